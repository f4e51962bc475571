import logging
import math
from functools import lru_cache
from typing import List, Optional

import numpy as np

from fracwave.core.errors import GridTooSmallError
from fracwave.models.field import CutoffPsi, GridField, LatticeMode, SpectralField, box_shape, mode_norm_squared
from fracwave.models.phase import PhasePoint

logger = logging.getLogger(__name__)

DEFAULT_PSI = CutoffPsi()


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@lru_cache(maxsize=128)
def _multiplier_array(sigma: float, dim: int, maxmode: int) -> np.ndarray:
    return _freeze((1.0 + mode_norm_squared(dim, maxmode)) ** (sigma / 2))


@lru_cache(maxsize=128)
def _sharp_mask(N: float, dim: int, maxmode: int) -> np.ndarray:
    if math.isinf(N):
        return _freeze(np.ones(box_shape(dim, maxmode), dtype=bool))
    return _freeze(mode_norm_squared(dim, maxmode) <= math.floor(N * N))


@lru_cache(maxsize=128)
def _psi_weights(N: float, dim: int, maxmode: int, psi: CutoffPsi) -> np.ndarray:
    n2 = mode_norm_squared(dim, maxmode)
    if math.isinf(N):
        return _freeze(np.ones(n2.shape))
    weights = np.asarray(psi(np.sqrt(n2) / N), dtype=np.float64)
    # integer comparisons pin the flat zones so the projector identities hold bit for bit
    weights = np.where(4 * n2 <= N * N, 1.0, weights)
    weights = np.where(n2 > math.floor(N * N), 0.0, weights)
    return _freeze(weights)


def _box_index(dim: int, maxmode: int, M: int):
    index = np.arange(-maxmode, maxmode + 1) % M
    return (Ellipsis,) + np.ix_(*([index] * dim))


class SpectralService:
    @staticmethod
    def fractional_multiplier(sigma: float, mode: LatticeMode) -> float:
        """<lambda_n>^sigma = (1 + |n|^2)^{sigma/2}"""
        return (1.0 + mode.norm_squared) ** (sigma / 2)

    @staticmethod
    def multiplier(sigma: float, dim: int, maxmode: int) -> np.ndarray:
        """The D^sigma symbol over the whole box, laid out like SpectralField.coeffs"""
        return _multiplier_array(float(sigma), dim, maxmode)

    @staticmethod
    def lattice_modes(dim: int, maxmode: int) -> List[LatticeMode]:
        return list(SpectralField.zeros(dim, maxmode).modes())

    @staticmethod
    def apply_D(sigma: float, field: SpectralField) -> SpectralField:
        if sigma == 0:
            return field
        return field.with_coeffs(field.coeffs * SpectralService.multiplier(sigma, field.dim, field.maxmode))

    @staticmethod
    def sharp_mask(N: float, dim: int, maxmode: int) -> np.ndarray:
        """True on the modes with |n| <= N; |n|^2 is compared with floor(N^2) in integers"""
        if N < 0:
            raise ValueError(f"Truncation radius must be nonnegative, got N={N}")
        return _sharp_mask(float(N), dim, maxmode)

    @staticmethod
    def sharp_project(N: float, field: SpectralField) -> SpectralField:
        mask = SpectralService.sharp_mask(N, field.dim, field.maxmode)
        return field.with_coeffs(np.where(mask, field.coeffs, 0))

    @staticmethod
    def sharp_complement(N: float, field: SpectralField) -> SpectralField:
        mask = SpectralService.sharp_mask(N, field.dim, field.maxmode)
        return field.with_coeffs(np.where(mask, 0, field.coeffs))

    @staticmethod
    def psi_weights(N: float, dim: int, maxmode: int, psi: Optional[CutoffPsi] = None) -> np.ndarray:
        """psi(|n|/N) over the box, exactly 1 where |n| <= N/2 and exactly 0 where |n| > N"""
        if not N > 0:
            raise ValueError(f"Smooth projection requires N > 0, got N={N}")
        return _psi_weights(float(N), dim, maxmode, psi or DEFAULT_PSI)

    @staticmethod
    def projection_weights(N: float, dim: int, maxmode: int) -> np.ndarray:
        """Weights of pi_N for any N >= 0; pi_0 keeps the mean only"""
        if N > 0:
            return SpectralService.psi_weights(N, dim, maxmode)
        return SpectralService.sharp_mask(0, dim, maxmode).astype(np.float64)

    @staticmethod
    def smooth_project(N: float, field: SpectralField, psi: Optional[CutoffPsi] = None) -> SpectralField:
        weights = SpectralService.psi_weights(N, field.dim, field.maxmode, psi)
        return field.with_coeffs(field.coeffs * weights)

    @staticmethod
    def coeffs_to_values(coeffs: np.ndarray, dim: int, maxmode: int, M: int) -> np.ndarray:
        """
        Grid values of one or many fields. The last `dim` axes of `coeffs` are the mode box;
        any leading axes are a batch and are carried through.
        """
        if M < 2 * maxmode + 2:
            raise GridTooSmallError(M, maxmode)
        axes = tuple(range(-dim, 0))
        padded = np.zeros(coeffs.shape[:-dim] + (M,) * dim, dtype=np.complex128)
        padded[_box_index(dim, maxmode, M)] = coeffs
        values = np.fft.ifftn(padded, axes=axes) * (M ** dim / (2 * np.pi) ** (dim / 2))
        return values.real

    @staticmethod
    def values_to_coeffs(values: np.ndarray, dim: int, maxmode: int) -> np.ndarray:
        """Inverse of coeffs_to_values on the box; the result is Hermitian bit for bit"""
        M = values.shape[-1]
        if M < 2 * maxmode + 2:
            raise GridTooSmallError(M, maxmode)
        axes = tuple(range(-dim, 0))
        spectrum = np.fft.fftn(values, axes=axes) * ((2 * np.pi) ** (dim / 2) / M ** dim)
        coeffs = spectrum[_box_index(dim, maxmode, M)]
        return 0.5 * (coeffs + np.conj(np.flip(coeffs, axis=axes)))

    @staticmethod
    def to_grid(field: SpectralField, M: int) -> GridField:
        return GridField(field.dim, M, SpectralService.coeffs_to_values(field.coeffs, field.dim, field.maxmode, M))

    @staticmethod
    def from_grid(grid: GridField, maxmode: int) -> SpectralField:
        return SpectralField(grid.dim, maxmode, SpectralService.values_to_coeffs(grid.values, grid.dim, maxmode))

    @staticmethod
    def sobolev_norm(s: float, field: SpectralField) -> float:
        weights = SpectralService.multiplier(2 * s, field.dim, field.maxmode)
        return float(np.sqrt(np.sum(weights * np.abs(field.coeffs) ** 2)))

    @staticmethod
    def hs_pair_norm(s: float, p: PhasePoint, alpha: float) -> float:
        """Norm of the phase space H^s x H^{s-alpha}"""
        return float(np.hypot(SpectralService.sobolev_norm(s, p.u), SpectralService.sobolev_norm(s - alpha, p.v)))

    @staticmethod
    def lp_norm_values(r: float, values: np.ndarray, dim: int) -> np.ndarray:
        """L^r quadrature over the last `dim` axes of a batch of grid samples"""
        axes = tuple(range(-dim, 0))
        if math.isinf(r):
            return np.max(np.abs(values), axis=axes)
        if r < 1:
            raise ValueError(f"L^r norms need r >= 1, got r={r}")
        cell = (2 * np.pi / values.shape[-1]) ** dim
        return (cell * np.sum(np.abs(values) ** r, axis=axes)) ** (1.0 / r)

    @staticmethod
    def grid_lp_norm(r: float, grid: GridField) -> float:
        return float(SpectralService.lp_norm_values(r, grid.values, grid.dim))

    @staticmethod
    def wepsr_norm(eps0: float, r0: float, field: SpectralField, M: int) -> float:
        """The W^{eps0, r0} norm ||D^{eps0} u||_{L^{r0}} by grid quadrature"""
        return SpectralService.grid_lp_norm(r0, SpectralService.to_grid(SpectralService.apply_D(eps0, field), M))
