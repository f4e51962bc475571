from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """
    A reproducible substream addressed by (master_seed, sample_index, path).
    The generator is a counter-based Philox keyed by the whole address, so streams
    can be created in any order on any thread and always yield the same draws.
    A stream with `constant` set returns that value for every Gaussian draw (test hook).
    """
    master_seed: int
    sample_index: int = 0
    path: Tuple[int, ...] = ()
    constant: Optional[float] = None

    @classmethod
    def degenerate(cls, value: float) -> "RngStream":
        return cls(0, 0, (), float(value))

    def spawn(self, child: int) -> "RngStream":
        return RngStream(self.master_seed, self.sample_index, self.path + (int(child),), self.constant)

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence([int(self.master_seed), int(self.sample_index), *self.path])
        return np.random.Generator(np.random.Philox(sequence))

    def normals(self, shape, generator: Optional[np.random.Generator] = None) -> np.ndarray:
        if self.constant is not None:
            return np.full(shape, self.constant, dtype=np.float64)
        return (generator or self.generator()).standard_normal(shape)
