import logging
import math
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from fracwave.models.field import SpectralField, box_shape
from fracwave.models.phase import Ensemble, PhasePoint
from fracwave.models.rng import RngStream
from fracwave.core.parallel import parallel_map
from fracwave.schemas.sim_config import SimConfig
from fracwave.services.spectral_service import SpectralService

logger = logging.getLogger(__name__)


@lru_cache(maxsize=64)
def canonical_modes(dim: int, maxmode: int) -> np.ndarray:
    """
    One representative n of every pair {n, -n} in the box (first nonzero component
    positive), ordered by the sup-norm shell max|n_i| and lexicographically inside a shell.
    A box of radius K is a prefix of every larger box, which makes truncations share draws.
    """
    axis = np.arange(-maxmode, maxmode + 1)
    modes = np.stack([g.ravel() for g in np.meshgrid(*([axis] * dim), indexing="ij")], axis=1)
    first_nonzero = np.zeros(len(modes), dtype=np.int64)
    for column in reversed(range(dim)):
        first_nonzero = np.where(modes[:, column] != 0, modes[:, column], first_nonzero)
    canonical = modes[(first_nonzero > 0) | np.all(modes == 0, axis=1)]
    shell = np.max(np.abs(canonical), axis=1)
    keys = [canonical[:, column] for column in reversed(range(dim))] + [shell]
    ordered = canonical[np.lexsort(keys)]
    ordered.setflags(write=False)
    return ordered


def _index(modes: np.ndarray, maxmode: int) -> Tuple[np.ndarray, ...]:
    return tuple((modes + maxmode).T)


def _hermitian_coeffs(dim: int, maxmode: int, modes: np.ndarray, values: np.ndarray) -> np.ndarray:
    coeffs = np.zeros(box_shape(dim, maxmode), dtype=np.complex128)
    coeffs[_index(-modes, maxmode)] = np.conj(values)
    coeffs[_index(modes, maxmode)] = values
    return coeffs


class RandomFieldService:
    @staticmethod
    def sample_mu(cfg: SimConfig, K: int, rng: RngStream) -> PhasePoint:
        """
        A draw of the Gaussian measure mu on the box of radius K. Every canonical mode
        consumes four normals (u real, u imaginary, v real, v imaginary) in shell order;
        the mode n = 0 uses the real ones only.
        """
        modes = canonical_modes(cfg.d, K)
        draws = rng.normals((len(modes), 4))
        bracket = np.sqrt(1.0 + np.sum(modes.astype(np.float64) ** 2, axis=1))
        u = (draws[:, 0] + 1j * draws[:, 1]) / math.sqrt(2) * bracket ** (-cfg.alpha)
        v = (draws[:, 2] + 1j * draws[:, 3]) / math.sqrt(2)
        u[0] = draws[0, 0]
        v[0] = draws[0, 2]
        return PhasePoint(
            SpectralField(cfg.d, K, _hermitian_coeffs(cfg.d, K, modes, u)),
            SpectralField(cfg.d, K, _hermitian_coeffs(cfg.d, K, modes, v)),
        )

    @staticmethod
    def sample_mu_truncated(cfg: SimConfig, N: float, rng: RngStream, K: Optional[int] = None) -> PhasePoint:
        """A draw of mu_N stored in the box of radius K (cfg.K by default)"""
        K = cfg.K if K is None else K
        drawn = K if math.isinf(N) else min(K, int(math.floor(N)))
        p = RandomFieldService.sample_mu(cfg, drawn, rng).resize(K)
        return PhasePoint(SpectralService.sharp_project(N, p.u), SpectralService.sharp_project(N, p.v))

    @staticmethod
    def randomize(field: SpectralField, draws: np.ndarray) -> SpectralField:
        """Multiplies the cos and sin coefficient of every canonical mode by its own normal"""
        modes = canonical_modes(field.dim, field.maxmode)
        c = field.coeffs[_index(modes, field.maxmode)]
        values = c.real * draws[:, 0] + 1j * (c.imag * draws[:, 1])
        values[0] = c[0].real * draws[0, 0]
        return field.with_coeffs(_hermitian_coeffs(field.dim, field.maxmode, modes, values))

    @staticmethod
    def sample_general(u0: SpectralField, v0: SpectralField, rng: RngStream) -> PhasePoint:
        if (u0.dim, u0.maxmode) != (v0.dim, v0.maxmode):
            raise ValueError("Randomized data needs u0 and v0 on the same box")
        modes = canonical_modes(u0.dim, u0.maxmode)
        draws = rng.normals((len(modes), 4))
        return PhasePoint(
            RandomFieldService.randomize(u0, draws[:, 0:2]),
            RandomFieldService.randomize(v0, draws[:, 2:4]),
        )

    @staticmethod
    def sample_ensemble(
        cfg: SimConfig,
        N: float,
        count: int,
        seed: Optional[int] = None,
        threads: Optional[int] = None,
        start_index: int = 0,
    ) -> Ensemble:
        seed = cfg.seed if seed is None else seed
        indices = list(range(start_index, start_index + count))
        members = parallel_map(
            lambda index: RandomFieldService.sample_mu_truncated(cfg, N, RngStream(seed, index)),
            indices,
            threads,
        )
        logger.info("Sampled %d members of mu_N (N=%g, K=%d, seed=%d)", count, N, cfg.K, seed)
        return Ensemble(members=members, config=cfg, seeds=indices, metadata={"seed": str(seed), "N": f"{N:g}"})

    @staticmethod
    def mode_variance_check(ensemble: Ensemble, alpha: float, max_modes: int = 16) -> List[Dict[str, float]]:
        """
        Per canonical mode n != 0, compares the empirical variance of the normalized real
        and imaginary parts with 1: sum of squares ~ chi^2 with 2 * samples degrees of freedom.
        """
        if not ensemble.members:
            return []
        first = ensemble.members[0].u
        modes = canonical_modes(first.dim, first.maxmode)[1:max_modes + 1]
        stack = np.stack([p.u.coeffs[_index(modes, first.maxmode)] for p in ensemble.members])
        rows = []
        for column, n in enumerate(modes):
            target = (1.0 + float(np.sum(n ** 2))) ** (-alpha)
            if not np.any(stack[:, column]):
                continue
            scaled = stack[:, column] * math.sqrt(2.0 / target)
            chi_square = float(np.sum(scaled.real ** 2 + scaled.imag ** 2))
            dof = 2 * len(stack)
            tail = stats.chi2.cdf(chi_square, dof)
            variance = float(np.mean(np.abs(stack[:, column]) ** 2))
            rows.append(
                {
                    "mode": tuple(int(i) for i in n),
                    "variance": variance,
                    "expected": target,
                    "z": (chi_square - dof) / math.sqrt(2 * dof),
                    "p_value": float(2 * min(tail, 1 - tail)),
                }
            )
        return rows
