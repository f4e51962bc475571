import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from fracwave.models.potential import PotentialKind


class Potential(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: PotentialKind = Field(default=PotentialKind.EXP, description="exp for e^u, power for u^{2k+1}")
    k: int = Field(default=1, ge=0, description="Degree parameter of the power nonlinearity u^{2k+1}")

    @model_validator(mode="after")
    def validate_degree(self) -> "Potential":
        """Power potentials need k >= 1"""
        if self.kind == PotentialKind.POWER and self.k < 1:
            raise ValueError("power potential requires k >= 1")
        return self

    @property
    def is_exp(self) -> bool:
        return self.kind == PotentialKind.EXP


def default_r0(d: int, alpha: float) -> float:
    """Smallest even r0 >= 4 with d/r0 below half of the gap alpha - d/2"""
    gap = alpha - d / 2
    if gap <= 0:
        return 4.0
    r0 = 4
    while d / r0 >= gap / 2:
        r0 += 2
    return float(r0)


def default_dt(N: float, alpha: float) -> float:
    """Rotation guard dt = 0.1 <N>^{-alpha} for the fastest retained mode"""
    return 0.1 * (1.0 + N * N) ** (-alpha / 2)


def default_M(K: int, potential: Any = None) -> int:
    """
    4K+4 points per axis, raised to (2k+2)K+2 for u^{2k+1} so that the nonlinearity of a
    field band-limited to K is computed without aliasing.
    """
    if isinstance(potential, Potential):
        kind, k = potential.kind, potential.k
    elif isinstance(potential, dict):
        kind, k = potential.get("kind", PotentialKind.EXP), potential.get("k", 1)
    else:
        kind, k = PotentialKind.EXP, 1
    M = 4 * K + 4
    if PotentialKind(kind) == PotentialKind.POWER:
        M = max(M, (2 * int(k) + 2) * K + 2)
    return M


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    d: int = Field(default=1, ge=1, le=2, description="Torus dimension")
    alpha: float = Field(default=1.0, gt=0, description="Dispersion order of D^{2 alpha}")
    potential: Potential = Field(default_factory=Potential)
    N: float = Field(default=8.0, ge=0, description="Truncation radius of the flow")
    K: int = Field(default=8, ge=0, description="Radius of the stored mode box")
    M: int = Field(default=36, ge=2, description="Grid points per axis")
    dt: float = Field(default=0.0124, description="Time step")
    sigma: float = Field(default=0.25, description="Regularity index of the data space")
    s: float = Field(default=0.5, description="Sobolev index of reported norms")
    s1: float = Field(default=0.45, description="Index of the D^{s1} z statistic")
    beta: float = Field(default=2.0, description="Time weight exponent of Y/Z norms")
    eps0: float = Field(default=0.33, description="Smoothness of the W^{eps0,r0} norm")
    r0: float = Field(default=6.0, description="Integrability of the W^{eps0,r0} norm")
    window_L: int = Field(default=4, ge=0, description="Time windows l in [-L, L]")
    dt_sup: float = Field(default=1 / 64, description="Time resolution of window suprema")
    seed: int = Field(default=0, ge=0, description="Master seed")
    theta: float = Field(default=0.0, description="Index of the D^theta u L^inf statistic")
    q: float = Field(default=4.0, ge=1, description="Time exponent of the free-flow L^q_t L^r_x statistic")
    kick_scale: float = Field(default=1.0, description="Scale of the nonlinear kick: 1 normal, 0 free, -1 flipped")

    @model_validator(mode="before")
    @classmethod
    def fill_derived_defaults(cls, data: Any) -> Any:
        """Resolves the defaults that depend on other fields so the stored config is explicit"""
        if not isinstance(data, dict):
            return data
        data = {k: v for k, v in data.items() if v is not None}
        try:
            d = int(data.get("d", 1))
            alpha = float(data.get("alpha", 1.0))
            N = float(data.get("N", 8.0))
            gap = alpha - d / 2
            data.setdefault("K", int(math.ceil(N)))
            data.setdefault("M", default_M(int(data["K"]), data.get("potential")))
            data.setdefault("dt", default_dt(N, alpha))
            data.setdefault("sigma", gap / 2 if gap > 0 else 0.0)
            data.setdefault("s1", float(data.get("s", 0.5)) - 0.05)
            data.setdefault("r0", default_r0(d, alpha))
            data.setdefault("eps0", 0.5 * (d / float(data["r0"]) + max(gap, 0.0)))
        except (TypeError, ValueError):
            # field validation reports the malformed value
            pass
        return data

    @field_validator("N")
    @classmethod
    def validate_finite_truncation(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("requires a finite truncation radius N")
        return v

    @model_validator(mode="after")
    def validate_constraints(self) -> "SimConfig":
        """Collects every violated constraint before failing"""
        problems = self.constraint_violations()
        if problems:
            raise ValueError("\n".join(problems))
        return self

    def constraint_violations(self) -> List[str]:
        problems = []
        if not self.beta > 1:
            problems.append(f"requires beta > 1 so the time weights (1+|l|)^-beta of the Y/Z norms are summable (got beta={self.beta})")
        if not (self.d / self.r0 < self.eps0 < self.alpha - self.d / 2):
            problems.append(
                "requires d/r0 < eps0 < alpha - d/2, the window where W^{eps0,r0} embeds in L^inf and carries mu "
                f"(got d/r0={self.d / self.r0:.4g}, eps0={self.eps0}, alpha - d/2={self.alpha - self.d / 2:.4g})"
            )
        if self.r0 < 2:
            problems.append(f"requires r0 >= 2 (got r0={self.r0})")
        if self.eps0 < 0:
            problems.append(f"requires eps0 >= 0 (got eps0={self.eps0})")
        if self.M < 2 * self.K + 2:
            problems.append(f"requires M >= 2K+2 (got M={self.M}, K={self.K})")
        if not self.dt > 0:
            problems.append(f"requires dt > 0 (got dt={self.dt})")
        if not self.dt_sup > 0:
            problems.append(f"requires dt_sup > 0 (got dt_sup={self.dt_sup})")
        return problems

    def gibbs_violations(self) -> List[str]:
        """Constraints that only runs on the support of the Gaussian measure need"""
        problems = []
        gap = self.alpha - self.d / 2
        if not gap > 0:
            problems.append(f"requires alpha > d/2 (got alpha={self.alpha}, d={self.d})")
        if not (0 < self.sigma < gap):
            problems.append(f"requires 0 < sigma < alpha - d/2 (got sigma={self.sigma}, alpha - d/2={gap:.4g})")
        return problems

    @property
    def k(self) -> int:
        return self.potential.k

    def with_updates(self, **changes: Any) -> "SimConfig":
        """Re-validated copy; derived fields named with None are recomputed"""
        data = self.model_dump()
        data.update(changes)
        return SimConfig.model_validate(data)

    def to_flat(self) -> Dict[str, Any]:
        """Flat key/value view used by config files"""
        flat = self.model_dump(exclude={"potential"})
        flat["potential"] = self.potential.kind.value
        flat["k"] = self.potential.k
        return flat

    @classmethod
    def from_flat(cls, flat: Dict[str, Any]) -> "SimConfig":
        data = dict(flat)
        potential = {}
        if "potential" in data:
            potential["kind"] = data.pop("potential")
        if "k" in data:
            potential["k"] = data.pop("k")
        if potential:
            data["potential"] = potential
        return cls.model_validate(data)
