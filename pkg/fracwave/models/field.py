from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterator, Sequence, Tuple

import numpy as np


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LatticeMode:
    """A Fourier mode e^{in.x} of the torus with its frequency |n| and bracket (1+|n|^2)^{1/2}"""
    n: Tuple[int, ...]

    @property
    def lam(self) -> float:
        return float(np.sqrt(self.norm_squared))

    @property
    def norm_squared(self) -> int:
        return int(sum(ni * ni for ni in self.n))

    @property
    def bracket(self) -> float:
        return float(np.sqrt(1 + self.norm_squared))


@lru_cache(maxsize=64)
def mode_norm_squared(dim: int, maxmode: int) -> np.ndarray:
    """Integer |n|^2 over the symmetric box, laid out like SpectralField.coeffs"""
    axis = np.arange(-maxmode, maxmode + 1)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    return _freeze(sum(g.astype(np.int64) ** 2 for g in grids))


def box_shape(dim: int, maxmode: int) -> Tuple[int, ...]:
    return (2 * maxmode + 1,) * dim


@dataclass(frozen=True, eq=False)
class SpectralField:
    """
    A real field on T^d stored as the coefficients c_n of u = sum c_n e^{in.x} / (2pi)^{d/2}
    over the box |n_i| <= maxmode. Index i along an axis is mode n_i = i - maxmode.
    """
    dim: int
    maxmode: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"Only d in {{1, 2}} is supported, got d={self.dim}")
        coeffs = np.array(self.coeffs, dtype=np.complex128)
        if coeffs.shape != box_shape(self.dim, self.maxmode):
            raise ValueError(f"Coefficient array shape {coeffs.shape} does not match box {box_shape(self.dim, self.maxmode)}")
        object.__setattr__(self, "coeffs", _freeze(coeffs))

    @classmethod
    def zeros(cls, dim: int, maxmode: int) -> "SpectralField":
        return cls(dim, maxmode, np.zeros(box_shape(dim, maxmode), dtype=np.complex128))

    @classmethod
    def constant(cls, dim: int, maxmode: int, value: float) -> "SpectralField":
        """The field u(x) = value"""
        return cls.from_modes(dim, maxmode, {(0,) * dim: value * (2 * np.pi) ** (dim / 2)})

    @classmethod
    def from_modes(cls, dim: int, maxmode: int, modes: Dict[Tuple[int, ...], complex]) -> "SpectralField":
        """Builds a field from raw coefficients; the conjugate mirror of every given mode is filled in"""
        coeffs = np.zeros(box_shape(dim, maxmode), dtype=np.complex128)
        for n, value in modes.items():
            n = tuple(n)
            if any(abs(ni) > maxmode for ni in n):
                raise ValueError(f"Mode {n} lies outside the box of radius {maxmode}")
            coeffs[tuple(ni + maxmode for ni in n)] = value
            coeffs[tuple(maxmode - ni for ni in n)] = np.conj(value)
        return cls(dim, maxmode, coeffs)

    @classmethod
    def cosine(cls, dim: int, maxmode: int, n: Sequence[int], amplitude: float = 1.0) -> "SpectralField":
        """The field amplitude * cos(n.x)"""
        n = tuple(n)
        scale = (2 * np.pi) ** (dim / 2)
        if not any(n):
            return cls.from_modes(dim, maxmode, {n: amplitude * scale})
        return cls.from_modes(dim, maxmode, {n: 0.5 * amplitude * scale})

    @classmethod
    def sine(cls, dim: int, maxmode: int, n: Sequence[int], amplitude: float = 1.0) -> "SpectralField":
        """The field amplitude * sin(n.x)"""
        n = tuple(n)
        if not any(n):
            return cls.zeros(dim, maxmode)
        scale = (2 * np.pi) ** (dim / 2)
        return cls.from_modes(dim, maxmode, {n: -0.5j * amplitude * scale})

    def coeff(self, n: Sequence[int]) -> complex:
        if any(abs(ni) > self.maxmode for ni in n):
            return 0j
        return complex(self.coeffs[tuple(ni + self.maxmode for ni in n)])

    def modes(self) -> Iterator[LatticeMode]:
        """Every lattice mode of the box in lexicographic order"""
        for index in np.ndindex(*self.coeffs.shape):
            yield LatticeMode(tuple(int(i) - self.maxmode for i in index))

    def resize(self, maxmode: int) -> "SpectralField":
        """Zero-pads or truncates the box to the new radius"""
        if maxmode == self.maxmode:
            return self
        out = np.zeros(box_shape(self.dim, maxmode), dtype=np.complex128)
        keep = min(maxmode, self.maxmode)
        src = tuple(slice(self.maxmode - keep, self.maxmode + keep + 1) for _ in range(self.dim))
        dst = tuple(slice(maxmode - keep, maxmode + keep + 1) for _ in range(self.dim))
        out[dst] = self.coeffs[src]
        return SpectralField(self.dim, maxmode, out)

    def mirrored(self) -> np.ndarray:
        """Coefficients at -n, i.e. the box flipped along every axis"""
        return np.flip(self.coeffs, axis=tuple(range(self.dim)))

    def is_hermitian(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.coeffs - np.conj(self.mirrored())), initial=0.0) <= tol)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.dim, self.maxmode, coeffs)

    def _check_compatible(self, other: "SpectralField"):
        if (self.dim, self.maxmode) != (other.dim, other.maxmode):
            raise ValueError(f"Incompatible fields: (d={self.dim}, K={self.maxmode}) vs (d={other.dim}, K={other.maxmode})")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self.with_coeffs(-self.coeffs)


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of a real field on the uniform grid x_j = 2 pi j / M along each axis"""
    dim: int
    M: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.M,) * self.dim:
            raise ValueError(f"Grid values shape {values.shape} does not match ({self.M},)^{self.dim}")
        object.__setattr__(self, "values", _freeze(values))

    @property
    def cell_volume(self) -> float:
        return (2 * np.pi / self.M) ** self.dim

    @staticmethod
    def nodes(dim: int, M: int) -> Tuple[np.ndarray, ...]:
        axis = 2 * np.pi * np.arange(M) / M
        return tuple(np.meshgrid(*([axis] * dim), indexing="ij"))


@dataclass(frozen=True)
class CutoffPsi:
    """
    Smooth cutoff: 1 on [0, 1/2], 0 on [1, inf), and the C^inf bridge
    g(1-t) / (g(1-t) + g(t)) with t = 2r - 1 and g(x) = exp(-1/x) in between.
    """

    def __call__(self, r) -> np.ndarray:
        t = np.clip(2.0 * np.asarray(r, dtype=np.float64) - 1.0, 0.0, 1.0)
        rising = self._g(t)
        falling = self._g(1.0 - t)
        return falling / (falling + rising)

    @staticmethod
    def _g(x: np.ndarray) -> np.ndarray:
        safe = np.where(x > 0, x, 1.0)
        return np.where(x > 0, np.exp(-1.0 / safe), 0.0)
