from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline


@dataclass(frozen=True, eq=False)
class OdeProfile:
    """One period of the solution of V'' + V^{2k+1} = 0, V(0) = V0, V'(0) = 0"""
    k: int
    V0: float
    t: np.ndarray
    V: np.ndarray
    dV: np.ndarray
    period: float
    first_integral: float

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.t, self.V, self.dV)

    @cached_property
    def _dspline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.t, self.dV, -self.V ** (2 * self.k + 1))

    def value(self, tau) -> np.ndarray:
        """V at arbitrary times through the periodic extension of the table"""
        return self._spline(np.mod(tau, self.period))

    def derivative(self, tau) -> np.ndarray:
        return self._dspline(np.mod(tau, self.period))

    def evaluate(self, tau) -> Tuple[np.ndarray, np.ndarray]:
        return self.value(tau), self.derivative(tau)
