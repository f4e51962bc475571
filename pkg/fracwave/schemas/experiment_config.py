import enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from fracwave.schemas.sim_config import SimConfig


class ExperimentKind(str, enum.Enum):
    INVARIANCE = "invariance"
    CONVERGENCE = "convergence"
    TAIL = "tail"
    INFLATION = "inflation"
    ENERGY = "energy"
    GIBBS_CONVERGENCE = "gibbs-convergence"


class TailStatistic(str, enum.Enum):
    Y_NORM = "y-norm"
    Z_NORM = "z-norm"
    DTHETA_LINF = "dtheta-linf"
    HIGHFREQ = "highfreq"
    FREE_LQLR = "free-lqlr"


RUN_KEYS = (
    "experiment", "samples", "T", "t_checkpoints", "N_list", "N_ref", "n_list", "delta1", "delta2",
    "R_grid", "statistic", "observables", "output_dir", "threads", "negative_control", "bump_radius",
    "bump_bandwidth", "record_every", "p", "functional", "amplitude_scale", "data_u", "data_v",
)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    experiment: ExperimentKind
    sim: SimConfig = Field(default_factory=SimConfig)
    samples: int = Field(default=1000, ge=1)
    T: float = Field(default=1.0, gt=0)
    t_checkpoints: List[float] = Field(default_factory=lambda: [1.0, 5.0])
    N_list: List[float] = Field(default_factory=lambda: [8.0, 16.0, 32.0, 64.0])
    N_ref: Optional[float] = None
    n_list: List[int] = Field(default_factory=lambda: [8, 16, 32, 64])
    delta1: float = Field(default=0.25, gt=0)
    delta2: float = Field(default=0.5, gt=0)
    R_grid: List[float] = Field(default_factory=list)
    statistic: TailStatistic = TailStatistic.Y_NORM
    observables: List[str] = Field(default_factory=lambda: ["l2_squared", "potential"])
    output_dir: Optional[str] = None
    threads: int = Field(default=0, ge=0)
    negative_control: bool = False
    bump_radius: float = Field(default=1.0, gt=0)
    bump_bandwidth: float = Field(default=32.0, gt=0)
    record_every: int = Field(default=10, ge=1)
    p: float = Field(default=2.0, ge=1)
    functional: str = Field(default="F", pattern="^[FG]$", description="F for the potential integral, G for the Gibbs density")
    amplitude_scale: float = Field(default=1.0, gt=0)
    data_u: Optional[str] = None
    data_v: Optional[str] = None

    @field_validator("t_checkpoints")
    @classmethod
    def validate_checkpoints(cls, v: List[float]) -> List[float]:
        if any(t < 0 for t in v):
            raise ValueError("requires nonnegative time checkpoints")
        return sorted(v)

    @field_validator("N_list")
    @classmethod
    def validate_n_list(cls, v: List[float]) -> List[float]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("requires an ascending N_list")
        return v

    @model_validator(mode="after")
    def validate_reference(self) -> "ExperimentConfig":
        problems = []
        if self.delta2 <= self.delta1:
            problems.append(f"requires delta2 > delta1 (got delta1={self.delta1}, delta2={self.delta2})")
        if self.N_ref is not None and self.N_list and self.N_ref <= max(self.N_list):
            problems.append(f"requires N_ref > max(N_list) (got N_ref={self.N_ref})")
        if (self.data_u is None) != (self.data_v is None):
            problems.append("requires data_u and data_v together")
        if problems:
            raise ValueError("\n".join(problems))
        return self

    @property
    def reference_N(self) -> float:
        return self.N_ref if self.N_ref is not None else 2 * max(self.N_list)

    def to_flat(self) -> Dict[str, Any]:
        flat = self.sim.to_flat()
        run = self.model_dump(exclude={"sim"}, mode="json")
        flat.update({key: value for key, value in run.items() if value is not None})
        return flat
