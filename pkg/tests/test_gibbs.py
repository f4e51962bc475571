import math

import numpy as np
import pytest

from fracwave.core.errors import ExhaustedTriesError, NonlinearityOverflowError
from fracwave.models.field import SpectralField
from fracwave.models.rng import RngStream
from fracwave.schemas.sim_config import Potential, SimConfig
from fracwave.services.gibbs_service import GibbsService
from fracwave.services.random_field_service import RandomFieldService

EXP = Potential(kind="exp")
CUBIC = Potential(kind="power", k=1)


def test_potential_of_zero_field():
    """F(0) = 2 pi for Exp and 0 for powers; the weights follow"""
    zero = SpectralField.zeros(1, 8)
    assert GibbsService.potential_F(8, zero, EXP, 36) == pytest.approx(2 * math.pi, rel=1e-14)
    assert GibbsService.gibbs_weight(8, zero, EXP, 36) == pytest.approx(math.exp(-2 * math.pi), rel=1e-13)
    assert GibbsService.potential_F(8, zero, CUBIC, 36) == 0.0
    assert GibbsService.gibbs_weight(8, zero, CUBIC, 36) == 1.0


def test_potential_of_constant():
    """u = 1 gives 2 pi e"""
    one = SpectralField.constant(1, 4, 1.0)
    assert GibbsService.potential_F(4, one, EXP, 20) == pytest.approx(2 * math.pi * math.e, abs=1e-10)


def test_constant_shift_scales_exp_potential(make_field):
    """Adding c to u multiplies the Exp potential by e^c"""
    u = make_field(1, 8, seed=4)
    shifted = u + SpectralField.constant(1, 8, 0.3)
    ratio = GibbsService.potential_F(6, shifted, EXP, 36) / GibbsService.potential_F(6, u, EXP, 36)
    assert ratio == pytest.approx(math.exp(0.3), rel=1e-12)


def test_potential_in_two_dimensions():
    """F(0) = (2 pi)^2 on T^2"""
    assert GibbsService.potential_F(4, SpectralField.zeros(2, 4), EXP, 20) == pytest.approx(4 * math.pi ** 2, rel=1e-14)


def test_unprojected_potential_uses_every_mode():
    """N=None integrates u itself"""
    u = SpectralField.cosine(1, 8, (6,), 0.5)
    assert GibbsService.potential_F(None, u, CUBIC, 36) > 0
    assert GibbsService.potential_F(2, u, CUBIC, 36) == 0.0


def test_weights_lie_in_unit_interval(cfg_1d):
    """0 < G_N <= 1"""
    ensemble = RandomFieldService.sample_ensemble(cfg_1d, 4.0, 50, seed=1)
    weights = GibbsService.importance_weights(ensemble.members, 4.0, EXP, cfg_1d.M)
    assert np.all(weights > 0) and np.all(weights <= 1)
    assert 1 <= GibbsService.effective_sample_size(weights) <= 50


def test_overflow_is_reported():
    """e^u beyond the float range raises"""
    huge = SpectralField.constant(1, 2, 1000.0)
    with pytest.raises(NonlinearityOverflowError):
        GibbsService.potential_F(2, huge, EXP, 8)


def test_rejection_accepts_zero_field_at_once():
    """G = 1 for the zero field under a power potential"""
    cfg = SimConfig(N=4, potential={"kind": "power", "k": 1})
    draw = GibbsService.sample_gibbs_rejection(cfg, 4.0, cfg.potential, RngStream.degenerate(0.0))
    assert draw.tries == 1
    assert not np.any(draw.point.u.coeffs)


def test_rejection_exhausts():
    """No tries, no sample"""
    cfg = SimConfig(N=4)
    with pytest.raises(ExhaustedTriesError) as info:
        GibbsService.sample_gibbs_rejection(cfg, 4.0, cfg.potential, RngStream(0), max_tries=0)
    assert info.value.acceptance_rate == 0.0


def test_rejection_matches_importance_weights():
    """The rejection acceptance rate estimates E_mu[G_N]"""
    cfg = SimConfig(N=4, potential={"kind": "power", "k": 1})
    ensemble = RandomFieldService.sample_ensemble(cfg, 4.0, 4000, seed=11)
    weights = GibbsService.importance_weights(ensemble.members, 4.0, cfg.potential, cfg.M)
    mean_weight = float(np.mean(weights))
    draws = [GibbsService.sample_gibbs_rejection(cfg, 4.0, cfg.potential, RngStream(12, i)) for i in range(300)]
    accepted = len(draws)
    tries = sum(draw.tries for draw in draws)
    rate = accepted / tries
    # geometric tries: the rate estimate has relative error about sqrt((1 - g) / accepted)
    tolerance = 4 * rate * math.sqrt((1 - mean_weight) / accepted) + 4 * float(np.std(weights)) / math.sqrt(len(weights))
    assert abs(rate - mean_weight) < tolerance
    for draw in draws[:20]:
        assert GibbsService.gibbs_weight(4.0, draw.point.u, cfg.potential, cfg.M) <= 1.0


def test_lp_distance_of_identical_samples():
    """N1 = N2 gives 0"""
    values = np.random.default_rng(0).standard_normal(100)
    assert GibbsService.lp_distance(values, values, 2.0) == 0.0


def test_convergence_diagnostic_report(cfg_1d):
    """One row per N with nonnegative estimates and the trend verdicts"""
    report = GibbsService.convergence_diagnostic_F(cfg_1d, [2, 4, 8, 16], p=2.0, samples=40, seed=3)
    pairs = report.table("pairs")
    assert pairs.column("N2") == [4.0, 8.0, 16.0, 32.0]
    assert all(value >= 0 for value in pairs.column("lp_norm"))
    assert {"mann_kendall_p", "half_sample_ratio_min", "half_sample_ratio_max"} <= {v.name for v in report.verdicts}


def test_convergence_diagnostic_arbitrary_pairs(cfg_1d):
    """Explicit (N1, N2) pairs; N1 = N2 gives exactly 0"""
    report = GibbsService.convergence_diagnostic_F(cfg_1d, [], samples=40, seed=3, pairs=[(4, 4), (2, 8), (4, 16)])
    pairs = report.table("pairs")
    assert pairs.column("N1") == [4.0, 2.0, 4.0]
    assert pairs.column("N2") == [4.0, 8.0, 16.0]
    assert pairs.column("lp_norm")[0] == 0.0
    assert pairs.column("lp_norm")[1] > 0
    assert report.snapshots["sample_0"].maxmode == 16


def test_convergence_diagnostic_trend_passes(cfg_1d):
    """F_N - F_2N shrinks like 1/N, so four doublings give a significant decreasing trend"""
    report = GibbsService.convergence_diagnostic_F(cfg_1d, [2, 4, 8, 16], samples=400, seed=5)
    estimates = report.table("pairs").column("lp_norm")
    assert all(b < a for a, b in zip(estimates, estimates[1:]))
    assert report.passed


def test_convergence_diagnostic_rejects_unknown_functional(cfg_1d):
    """Only F and G are estimated"""
    with pytest.raises(ValueError):
        GibbsService.convergence_diagnostic_F(cfg_1d, [2, 4], samples=4, functional="H")
