import math

import numpy as np
import pytest

from fracwave.models.field import SpectralField
from fracwave.models.phase import PhasePoint
from fracwave.models.rng import RngStream
from fracwave.schemas.sim_config import SimConfig


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    """Pin worker threads so results never depend on the host"""
    monkeypatch.setenv("FRACWAVE_THREADS", "1")


@pytest.fixture
def cfg_1d():
    """d=1, alpha=1, Exp potential, N=K=8"""
    return SimConfig()


@pytest.fixture
def cfg_2d():
    """d=2, alpha=1.5, Exp potential, N=K=4"""
    return SimConfig(d=2, alpha=1.5, N=4)


@pytest.fixture
def power_cfg():
    """d=1, alpha=1, u^3 nonlinearity"""
    return SimConfig(potential={"kind": "power", "k": 1}, s=0.75, N=4)


@pytest.fixture
def stream():
    return RngStream(master_seed=1234, sample_index=7)


def random_field(dim: int, maxmode: int, seed: int = 0, decay: float = 1.0) -> SpectralField:
    """A real field with Gaussian coefficients decaying like <n>^-decay"""
    generator = np.random.default_rng(seed)
    shape = (2 * maxmode + 1,) * dim
    values = generator.standard_normal(shape) + 1j * generator.standard_normal(shape)
    axis = np.arange(-maxmode, maxmode + 1)
    n2 = sum(g ** 2 for g in np.meshgrid(*([axis] * dim), indexing="ij"))
    values = values * (1.0 + n2) ** (-decay / 2)
    coeffs = 0.5 * (values + np.conj(np.flip(values)))
    return SpectralField(dim, maxmode, coeffs)


@pytest.fixture
def field_1d():
    return random_field(1, 8, seed=1)


@pytest.fixture
def field_2d():
    return random_field(2, 4, seed=2)


@pytest.fixture
def smooth_point():
    """Small smooth data 0.5 cos x + 0.3 sin 2x with velocity 0.2 cos 3x on the K=8 box"""
    u = SpectralField.cosine(1, 8, (1,), 0.5) + SpectralField.sine(1, 8, (2,), 0.3)
    v = SpectralField.cosine(1, 8, (3,), 0.2)
    return PhasePoint(u, v)


@pytest.fixture
def unit_cosine():
    """cos x / sqrt(pi), unit norm in L^2(T)"""
    return SpectralField.cosine(1, 8, (1,), 1.0 / math.sqrt(math.pi))


@pytest.fixture
def make_field():
    return random_field
