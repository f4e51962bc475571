import math
import re
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from fracwave.models.phase import PhasePoint
from fracwave.schemas.sim_config import SimConfig
from fracwave.services.spectral_service import SpectralService

BatchEvaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]

_MODE = re.compile(r"^mode_(-?\d+)(_v)?$")


@dataclass(frozen=True)
class Observable:
    """A named real functional of a phase point, evaluated on batches of coefficient arrays"""
    name: str
    batch: BatchEvaluator

    def __call__(self, p: PhasePoint) -> float:
        return float(self.batch(p.u.coeffs[None], p.v.coeffs[None])[0])


def _box_sum(array: np.ndarray, dim: int) -> np.ndarray:
    return np.sum(array, axis=tuple(range(-dim, 0)))


class ObservableService:
    BUILTIN = ("l2_squared", "sobolev_s", "linf", "potential", "hamiltonian")

    @staticmethod
    def resolve(name: str, cfg: SimConfig) -> Observable:
        """Builds an observable from its registry name; a `_v` suffix evaluates the velocity"""
        dim = cfg.d

        def maxmode(coeffs: np.ndarray) -> int:
            return (coeffs.shape[-1] - 1) // 2

        mode = _MODE.match(name)
        if mode:
            index, on_velocity = int(mode.group(1)), bool(mode.group(2))

            def coefficient(cu, cv):
                coeffs = cv if on_velocity else cu
                K = maxmode(coeffs)
                if abs(index) > K:
                    return np.zeros(coeffs.shape[0])
                position = (index + K,) + (K,) * (dim - 1)
                return coeffs[(slice(None),) + position].real

            return Observable(name, coefficient)

        base, on_velocity = (name[:-2], True) if name.endswith("_v") else (name, False)
        shift = -cfg.alpha if on_velocity else 0.0

        def pick(cu, cv):
            return cv if on_velocity else cu

        if base == "l2_squared":
            return Observable(name, lambda cu, cv: _box_sum(np.abs(pick(cu, cv)) ** 2, dim))
        if base == "sobolev_s":

            def sobolev(cu, cv):
                coeffs = pick(cu, cv)
                weights = SpectralService.multiplier(2 * (cfg.s + shift), dim, maxmode(coeffs))
                return np.sqrt(_box_sum(weights * np.abs(coeffs) ** 2, dim))

            return Observable(name, sobolev)
        if base == "linf":

            def linf(cu, cv):
                coeffs = pick(cu, cv)
                values = SpectralService.coeffs_to_values(coeffs, dim, maxmode(coeffs), cfg.M)
                return SpectralService.lp_norm_values(math.inf, values, dim)

            return Observable(name, linf)
        if base in ("potential", "hamiltonian") and not on_velocity:

            def potential(cu, cv):
                K = maxmode(cu)
                weights = SpectralService.projection_weights(cfg.N, dim, K)
                values = SpectralService.coeffs_to_values(cu * weights, dim, K, cfg.M)
                with np.errstate(over="ignore", invalid="ignore"):
                    density = np.exp(values) if cfg.potential.is_exp else values ** (2 * cfg.k + 2) / (2 * cfg.k + 2)
                    return _box_sum(density, dim) * (2 * math.pi / cfg.M) ** dim

            if base == "potential":
                return Observable(name, potential)

            def hamiltonian(cu, cv):
                K = maxmode(cu)
                freq = SpectralService.multiplier(cfg.alpha, dim, K)
                unprojected = SpectralService.coeffs_to_values(cu, dim, K, cfg.M)
                with np.errstate(over="ignore", invalid="ignore"):
                    if cfg.potential.is_exp:
                        density = np.exp(unprojected)
                    else:
                        density = unprojected ** (2 * cfg.k + 2) / (2 * cfg.k + 2)
                    kinetic = 0.5 * _box_sum(freq ** 2 * np.abs(cu) ** 2 + np.abs(cv) ** 2, dim)
                    return kinetic + _box_sum(density, dim) * (2 * math.pi / cfg.M) ** dim

            return Observable(name, hamiltonian)
        raise ValueError(f"Unknown observable '{name}'; known: {', '.join(ObservableService.BUILTIN)}, mode_<i>, with optional _v")

    @staticmethod
    def resolve_all(names: Sequence[str], cfg: SimConfig) -> List[Observable]:
        return [ObservableService.resolve(name, cfg) for name in names]
