import math
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class BumpPhi(BaseModel):
    """phi(y) = exp(1 - 1/(1 - |y/r|^2)) on |y| < r around the center, zero outside, max 1"""
    model_config = ConfigDict(frozen=True)

    center: Optional[Tuple[float, ...]] = Field(default=None, description="Center in x; pi along every axis when omitted")
    radius: float = Field(default=1.0, gt=0, description="Support radius in the rescaled variable y = n x")
    bandwidth: float = Field(default=32.0, gt=0, description="Rescaled frequency beyond which the bump spectrum is negligible")

    def center_for(self, d: int) -> Tuple[float, ...]:
        if self.center is None:
            return (math.pi,) * d
        if len(self.center) != d:
            raise ValueError(f"Bump center has {len(self.center)} components for d={d}")
        return tuple(self.center)


class InflationParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=2, description="Concentration scale")
    s: float = Field(..., gt=0, description="Sobolev index of the inflation")
    d: int = Field(default=1, ge=1, le=2)
    k: int = Field(..., ge=1, description="Nonlinearity u^{2k+1}")
    alpha: float = Field(..., gt=0)
    delta1: float = Field(default=0.25, gt=0)
    delta2: float = Field(default=0.5, gt=0)

    @model_validator(mode="after")
    def validate_window(self) -> "InflationParams":
        problems = []
        critical = self.d / 2 - self.alpha / self.k
        if not (0 < self.s < critical):
            problems.append(f"requires 0 < s < d/2 - alpha/k (got s={self.s}, d/2 - alpha/k={critical:.4g})")
        if not self.delta2 > self.delta1:
            problems.append(f"requires delta2 > delta1 (got delta1={self.delta1}, delta2={self.delta2})")
        if problems:
            raise ValueError("\n".join(problems))
        return self

    @property
    def case(self) -> str:
        """'2' when s also lies above d/2 - 2 alpha/(2k-1), which allows a smooth base state"""
        lower = self.d / 2 - 2 * self.alpha / (2 * self.k - 1)
        return "2" if lower <= self.s else "1"

    @property
    def kappa(self) -> float:
        return math.log(self.n) ** (-self.delta1)

    @property
    def amplitude(self) -> float:
        return self.kappa * self.n ** (self.d / 2 - self.s)

    @property
    def lam(self) -> float:
        return self.amplitude ** self.k

    @property
    def t_n(self) -> float:
        return (math.log(self.n) ** self.delta2 * self.n ** (-(self.d / 2 - self.s))) ** self.k
