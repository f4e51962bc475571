import math

import numpy as np
import pytest

from fracwave.models.field import SpectralField
from fracwave.models.rng import RngStream
from fracwave.schemas.sim_config import SimConfig
from fracwave.services.random_field_service import RandomFieldService, canonical_modes
from fracwave.services.spectral_service import SpectralService


def test_canonical_modes_order():
    """Shell order, lexicographic inside a shell, one representative per pair"""
    np.testing.assert_array_equal(canonical_modes(1, 2), [[0], [1], [2]])
    np.testing.assert_array_equal(canonical_modes(2, 1), [[0, 0], [0, 1], [1, -1], [1, 0], [1, 1]])


def test_canonical_modes_are_nested():
    """A small box is a prefix of a larger one"""
    small, large = canonical_modes(2, 2), canonical_modes(2, 5)
    np.testing.assert_array_equal(large[: len(small)], small)
    assert len(canonical_modes(2, 3)) == (7 * 7 + 1) // 2


def test_zero_gaussians_give_zero_field(cfg_1d):
    """All draws forced to zero"""
    p = RandomFieldService.sample_mu(cfg_1d, 4, RngStream.degenerate(0.0))
    assert not np.any(p.u.coeffs) and not np.any(p.v.coeffs)


def test_unit_gaussians_give_the_scaling(cfg_1d):
    """Draws forced to one expose the <n>^-alpha profile"""
    p = RandomFieldService.sample_mu(cfg_1d, 4, RngStream.degenerate(1.0))
    assert p.u.coeff((0,)) == 1.0
    assert p.u.coeff((2,)) == pytest.approx((1 + 1j) / math.sqrt(2) / math.sqrt(5))
    assert p.v.coeff((3,)) == pytest.approx((1 + 1j) / math.sqrt(2))
    assert p.u.is_hermitian(0.0) and p.v.is_hermitian(0.0)


def test_samples_are_reproducible(cfg_2d, stream):
    """Same address, same bits; another index, another draw"""
    first = RandomFieldService.sample_mu(cfg_2d, 4, stream)
    again = RandomFieldService.sample_mu(cfg_2d, 4, RngStream(stream.master_seed, stream.sample_index))
    other = RandomFieldService.sample_mu(cfg_2d, 4, RngStream(stream.master_seed, stream.sample_index + 1))
    assert np.array_equal(first.u.coeffs, again.u.coeffs)
    assert np.array_equal(first.v.coeffs, again.v.coeffs)
    assert not np.array_equal(first.u.coeffs, other.u.coeffs)


def test_truncation_coupling(cfg_1d, cfg_2d, stream):
    """sample_mu_truncated(N) = Pi_N sample_mu on the same stream, exactly"""
    for cfg in (cfg_1d, cfg_2d):
        full = RandomFieldService.sample_mu(cfg, cfg.K, stream)
        for N in (0.0, 1.5, 3.0, float(cfg.K)):
            truncated = RandomFieldService.sample_mu_truncated(cfg, N, stream)
            assert np.array_equal(truncated.u.coeffs, SpectralService.sharp_project(N, full.u).coeffs)
            assert np.array_equal(truncated.v.coeffs, SpectralService.sharp_project(N, full.v).coeffs)


def test_low_modes_do_not_move_with_the_box(cfg_1d, stream):
    """Growing the box keeps the draws of the low modes"""
    small = RandomFieldService.sample_mu(cfg_1d, 3, stream)
    large = RandomFieldService.sample_mu(cfg_1d, 8, stream)
    assert np.array_equal(large.u.resize(3).coeffs, small.u.coeffs)


def test_zero_truncation_keeps_the_mean(cfg_1d, stream):
    """N=0 leaves only the constant mode random"""
    p = RandomFieldService.sample_mu_truncated(cfg_1d, 0.0, stream)
    assert np.count_nonzero(p.u.coeffs) <= 1
    assert p.u.coeff((1,)) == 0


def test_expected_l2_norms():
    """E||u||^2 = 2.4 and E||v||^2 = 5 over the modes |n| <= 2 when d=1, alpha=1"""
    cfg = SimConfig(N=2)
    samples = [RandomFieldService.sample_mu(cfg, 2, RngStream(99, i)) for i in range(20000)]
    u_norms = np.array([SpectralService.sobolev_norm(0, p.u) ** 2 for p in samples])
    v_norms = np.array([SpectralService.sobolev_norm(0, p.v) ** 2 for p in samples])
    assert abs(u_norms.mean() - 2.4) < 4 * u_norms.std() / math.sqrt(len(u_norms))
    assert abs(v_norms.mean() - 5.0) < 4 * v_norms.std() / math.sqrt(len(v_norms))


def test_mode_variances(cfg_1d):
    """Per-mode variance of u matches <n>^-2alpha"""
    ensemble = RandomFieldService.sample_ensemble(cfg_1d, cfg_1d.N, 2000, seed=5)
    rows = RandomFieldService.mode_variance_check(ensemble, cfg_1d.alpha, max_modes=8)
    assert len(rows) == 8
    for row in rows:
        assert row["variance"] / row["expected"] == pytest.approx(1.0, abs=0.15)


def test_ensemble_members_follow_their_index(cfg_1d):
    """Member i is the draw of stream (seed, start + i)"""
    ensemble = RandomFieldService.sample_ensemble(cfg_1d, 4.0, 5, seed=3, start_index=10)
    assert ensemble.seeds == [10, 11, 12, 13, 14]
    direct = RandomFieldService.sample_mu_truncated(cfg_1d, 4.0, RngStream(3, 12))
    assert np.array_equal(ensemble.members[2].u.coeffs, direct.u.coeffs)


def test_sample_general_identity_and_zero():
    """Unit multipliers return the data; zero data stays zero"""
    u0 = SpectralField.cosine(1, 4, (1,), 0.7) + SpectralField.sine(1, 4, (3,), 0.2) + SpectralField.constant(1, 4, 0.1)
    v0 = SpectralField.cosine(1, 4, (2,), 1.3)
    p = RandomFieldService.sample_general(u0, v0, RngStream.degenerate(1.0))
    assert np.array_equal(p.u.coeffs, u0.coeffs) and np.array_equal(p.v.coeffs, v0.coeffs)
    zero = SpectralField.zeros(1, 4)
    q = RandomFieldService.sample_general(zero, zero, RngStream(1, 0))
    assert not np.any(q.u.coeffs)


def test_sample_general_preserves_mean_square():
    """E||u0^omega||^2 = ||u0||^2"""
    u0 = SpectralField.cosine(1, 4, (1,), 0.7) + SpectralField.sine(1, 4, (3,), 0.2)
    norms = np.array(
        [SpectralService.sobolev_norm(0, RandomFieldService.sample_general(u0, u0, RngStream(8, i)).u) ** 2 for i in range(5000)]
    )
    target = SpectralService.sobolev_norm(0, u0) ** 2
    assert abs(norms.mean() - target) < 4 * norms.std() / math.sqrt(len(norms))


def test_sample_general_needs_matching_boxes():
    """u0 and v0 live on the same box"""
    with pytest.raises(ValueError):
        RandomFieldService.sample_general(SpectralField.zeros(1, 4), SpectralField.zeros(1, 3), RngStream(0))
