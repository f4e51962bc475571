from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from fracwave.models.field import SpectralField


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """One point (u, dt u) of phase space"""
    u: SpectralField
    v: SpectralField

    def __post_init__(self):
        if (self.u.dim, self.u.maxmode) != (self.v.dim, self.v.maxmode):
            raise ValueError("Position and velocity fields must share dim and maxmode")

    @property
    def dim(self) -> int:
        return self.u.dim

    @property
    def maxmode(self) -> int:
        return self.u.maxmode

    @classmethod
    def zeros(cls, dim: int, maxmode: int) -> "PhasePoint":
        return cls(SpectralField.zeros(dim, maxmode), SpectralField.zeros(dim, maxmode))

    def resize(self, maxmode: int) -> "PhasePoint":
        return PhasePoint(self.u.resize(maxmode), self.v.resize(maxmode))

    def __add__(self, other: "PhasePoint") -> "PhasePoint":
        return PhasePoint(self.u + other.u, self.v + other.v)

    def __sub__(self, other: "PhasePoint") -> "PhasePoint":
        return PhasePoint(self.u - other.u, self.v - other.v)

    def __mul__(self, scalar: float) -> "PhasePoint":
        return PhasePoint(self.u * scalar, self.v * scalar)

    __rmul__ = __mul__


@dataclass
class Trajectory:
    times: List[float] = field(default_factory=list)
    states: List[PhasePoint] = field(default_factory=list)
    observables: Dict[str, List[float]] = field(default_factory=dict)

    def append(self, time: float, state: PhasePoint, observables: Optional[Dict[str, float]] = None):
        if self.times and time <= self.times[-1]:
            raise ValueError(f"Trajectory times must increase strictly: {time} after {self.times[-1]}")
        self.times.append(time)
        self.states.append(state)
        for name, value in (observables or {}).items():
            self.observables.setdefault(name, []).append(value)

    def __len__(self) -> int:
        return len(self.times)


@dataclass
class Ensemble:
    members: List[PhasePoint]
    config: "object"
    seeds: List[int]
    weights: Optional[np.ndarray] = None
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.seeds) != len(self.members):
            raise ValueError("Ensemble needs one sample index per member")
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=np.float64)
            if weights.shape != (len(self.members),):
                raise ValueError("Ensemble needs one weight per member")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise ValueError("Ensemble weights must be positive and finite")
            self.weights = weights

    def __len__(self) -> int:
        return len(self.members)
