import logging
import math

import numpy as np
import pytest

from fracwave.core.errors import NonlinearityOverflowError, SamplingResolutionError
from fracwave.models.field import SpectralField
from fracwave.models.phase import PhasePoint
from fracwave.schemas.sim_config import SimConfig
from fracwave.services.dynamics_service import DynamicsService
from fracwave.services.spectral_service import SpectralService


def test_free_flow_at_time_zero(smooth_point):
    """S(0) is the identity"""
    p = DynamicsService.free_flow(0.0, smooth_point, 1.0)
    assert np.array_equal(p.u.coeffs, smooth_point.u.coeffs)
    assert np.array_equal(p.v.coeffs, smooth_point.v.coeffs)


def test_free_flow_of_cosine():
    """cos x at rest oscillates as cos(sqrt(2) t) cos x when alpha = 1"""
    p = PhasePoint(SpectralField.cosine(1, 4, (1,)), SpectralField.zeros(1, 4))
    t = 1.7
    moved = DynamicsService.free_flow(t, p, 1.0)
    np.testing.assert_allclose(moved.u.coeffs, math.cos(math.sqrt(2) * t) * p.u.coeffs, atol=1e-15)
    np.testing.assert_allclose(moved.v.coeffs, -math.sqrt(2) * math.sin(math.sqrt(2) * t) * p.u.coeffs, atol=1e-15)


def test_free_flow_group_law(smooth_point):
    """S(s) S(t) = S(s + t)"""
    twice = DynamicsService.free_flow(0.4, DynamicsService.free_flow(1.3, smooth_point, 1.5), 1.5)
    once = DynamicsService.free_flow(1.7, smooth_point, 1.5)
    np.testing.assert_allclose(twice.u.coeffs, once.u.coeffs, atol=1e-13)
    np.testing.assert_allclose(twice.v.coeffs, once.v.coeffs, atol=1e-13)


def test_free_flow_keeps_kinetic_energy(make_field):
    """The quadratic part of H is invariant under S(t)"""
    p = PhasePoint(make_field(2, 4, seed=1), make_field(2, 4, seed=2))
    before = DynamicsService.kinetic(p, 1.5)
    after = DynamicsService.kinetic(DynamicsService.free_flow(3.2, p, 1.5), 1.5)
    assert after == pytest.approx(before, rel=1e-12)


def test_free_flow_batch_matches_single_times(smooth_point):
    """Batched times agree with one call per time"""
    u, v = DynamicsService.free_flow_batch([0.0, 0.5, 2.0], smooth_point, 1.0)
    single = DynamicsService.free_flow(0.5, smooth_point, 1.0)
    np.testing.assert_allclose(u[1], single.u.coeffs, atol=1e-15)
    np.testing.assert_allclose(v[1], single.v.coeffs, atol=1e-15)


def test_step_without_kick_is_free_flow(smooth_point):
    """kick_scale = 0 leaves only the rotation"""
    cfg = SimConfig(kick_scale=0.0)
    stepped = DynamicsService.step_strang(0.01, smooth_point, cfg)
    free = DynamicsService.free_flow(0.01, smooth_point, cfg.alpha)
    np.testing.assert_allclose(stepped.u.coeffs, free.u.coeffs, atol=1e-15)
    np.testing.assert_allclose(stepped.v.coeffs, free.v.coeffs, atol=1e-15)


def test_step_is_reversible(smooth_point, power_cfg):
    """A step of -dt undoes a step of dt"""
    cfg = power_cfg.with_updates(K=8, M=36)
    forward = DynamicsService.step_strang(0.01, smooth_point, cfg)
    back = DynamicsService.step_strang(-0.01, forward, cfg)
    np.testing.assert_allclose(back.u.coeffs, smooth_point.u.coeffs, atol=1e-10)
    np.testing.assert_allclose(back.v.coeffs, smooth_point.v.coeffs, atol=1e-10)


def test_evolve_records_every_step(smooth_point, cfg_1d):
    """T = 10 dt with record_every = 1 keeps 11 states from 0 to T"""
    T = 10 * cfg_1d.dt
    trajectory = DynamicsService.evolve(T, smooth_point, cfg_1d, observables=("H",))
    assert len(trajectory) == 11
    assert trajectory.times[0] == 0.0 and trajectory.times[-1] == T
    assert len(trajectory.observables["H"]) == 11


def test_evolve_rejects_nonpositive_time(smooth_point, cfg_1d):
    """T must be positive"""
    with pytest.raises(ValueError):
        DynamicsService.evolve(0.0, smooth_point, cfg_1d)


def test_truncated_flow_stays_in_e_n(smooth_point):
    """Data on E_N keeps zero coefficients outside E_N"""
    cfg = SimConfig(N=4, K=8)
    trajectory = DynamicsService.evolve(1.0, smooth_point, cfg, record_every=10, observables=())
    outside = ~SpectralService.sharp_mask(4, 1, 8)
    for state in trajectory.states:
        assert not np.any(state.u.coeffs[outside])
        assert not np.any(state.v.coeffs[outside])


def test_hamiltonian_of_velocity_only_data(cfg_1d, unit_cosine):
    """H(0, cos x / sqrt(pi)) = 1/2 + 2 pi for the Exp potential"""
    p = PhasePoint(SpectralField.zeros(1, 8), unit_cosine)
    assert DynamicsService.hamiltonian_H(p, cfg_1d) == pytest.approx(0.5 + 2 * math.pi, rel=1e-12)
    assert DynamicsService.hamiltonian_J(p, cfg_1d) == pytest.approx(0.5 + 2 * math.pi, rel=1e-12)


def test_energy_of_unit_cosine(unit_cosine):
    """E((cos x / sqrt(pi), 0)) = 1 + 3 / (16 pi) with k = 1, alpha = 1"""
    w = PhasePoint(unit_cosine, SpectralField.zeros(1, 8))
    assert DynamicsService.energy_E(w, 1, 1.0, 36) == pytest.approx(1 + 3 / (16 * math.pi), rel=1e-12)


def test_truncated_energy_drift_is_second_order(smooth_point):
    """Halving dt divides the drift of J by about four"""
    cfg = SimConfig(N=8)
    drifts = []
    for dt, every in ((0.01, 10), (0.005, 20)):
        trajectory = DynamicsService.evolve(10.0, smooth_point, cfg, record_every=every, observables=("J",), dt=dt)
        values = np.array(trajectory.observables["J"])
        drifts.append(float(np.max(np.abs(values - values[0]))))
    assert drifts[1] > 0
    assert 3.0 <= drifts[0] / drifts[1] <= 5.0


def test_window_norms_of_zero(cfg_1d):
    """Y and Z vanish on the zero point"""
    zero = PhasePoint.zeros(1, 8)
    assert DynamicsService.weighted_norm_Y(zero, cfg_1d) == 0.0
    assert DynamicsService.weighted_norm_Z(zero, cfg_1d) == 0.0


def test_window_norm_is_homogeneous(smooth_point, cfg_1d):
    """Z(2p) = 2 Z(p)"""
    single = DynamicsService.weighted_norm_Z(smooth_point, cfg_1d)
    assert single > 0
    assert DynamicsService.weighted_norm_Z(smooth_point * 2.0, cfg_1d) == pytest.approx(2 * single, rel=1e-12)


def test_window_norm_needs_time_resolution():
    """Two samples per window cannot resolve mode 4"""
    cfg = SimConfig(dt_sup=0.5)
    p = PhasePoint(SpectralField.cosine(1, 8, (4,)), SpectralField.zeros(1, 8))
    with pytest.raises(SamplingResolutionError):
        DynamicsService.weighted_norm_Z(p, cfg)


def test_nonlinear_part_without_kick(smooth_point):
    """With no kick the flow is free and w vanishes"""
    cfg = SimConfig(kick_scale=0.0)
    trajectory = DynamicsService.evolve(0.5, smooth_point, cfg, record_every=10, observables=())
    for w in DynamicsService.nonlinear_part(trajectory, smooth_point, cfg.alpha):
        assert np.max(np.abs(w.coeffs)) < 1e-12


def test_nonlinear_part_starts_at_zero(smooth_point, cfg_1d):
    """w(0) = 0"""
    trajectory = DynamicsService.evolve(0.2, smooth_point, cfg_1d, record_every=5, observables=())
    assert not np.any(DynamicsService.nonlinear_part(trajectory, smooth_point, cfg_1d.alpha)[0].coeffs)


def test_growth_curve_rows(smooth_point, cfg_1d):
    """One row per recorded time with sqrt(log(1 + t))"""
    trajectory = DynamicsService.evolve(0.1, smooth_point, cfg_1d, record_every=4, observables=())
    table = DynamicsService.growth_curve(trajectory, cfg_1d)
    assert len(table.rows) == len(trajectory)
    assert table.column("sqrt_log")[0] == 0.0
    assert all(value > 0 for value in table.column("xsb_norm"))


def test_stability_horizon(smooth_point, power_cfg):
    """Small data reaches T_max; e^800 overflows at once"""
    cfg = power_cfg.with_updates(K=8, M=36)
    assert DynamicsService.stability_horizon(smooth_point, cfg, 0.5) == 0.5
    huge = PhasePoint(SpectralField.constant(1, 8, 800.0), SpectralField.zeros(1, 8))
    assert DynamicsService.stability_horizon(huge, SimConfig(), 0.5) == 0.0


def test_strict_evolution_raises_on_overflow():
    """The single-trajectory integrator refuses an overflowing force"""
    huge = PhasePoint(SpectralField.constant(1, 8, 800.0), SpectralField.zeros(1, 8))
    with pytest.raises(NonlinearityOverflowError) as info:
        DynamicsService.evolve(0.1, huge, SimConfig(), observables=())
    assert info.value.time == 0.0


def test_batch_matches_single_trajectory(smooth_point, cfg_1d):
    """A batched member follows the same steps as evolve"""
    cu = np.stack([smooth_point.u.coeffs, smooth_point.u.coeffs])
    cv = np.stack([smooth_point.v.coeffs, smooth_point.v.coeffs])
    run = DynamicsService.evolve_batch(cu, cv, cfg_1d, [0.0, 0.3])
    final = DynamicsService.evolve(0.3, smooth_point, cfg_1d, record_every=10 ** 6, observables=()).states[-1]
    assert run.u.shape == (2, 2, 17)
    np.testing.assert_array_equal(run.u[0, 0], smooth_point.u.coeffs)
    np.testing.assert_allclose(run.u[1, 1], final.u.coeffs, atol=1e-12)
    assert not np.any(run.blown_up)


def test_batch_marks_blown_up_members(smooth_point, cfg_1d):
    """An overflowing member turns NaN without stopping the others"""
    huge = SpectralField.constant(1, 8, 800.0)
    cu = np.stack([smooth_point.u.coeffs, huge.coeffs])
    cv = np.stack([smooth_point.v.coeffs, np.zeros_like(huge.coeffs)])
    run = DynamicsService.evolve_batch(cu, cv, cfg_1d, [0.1])
    assert list(run.blown_up) == [False, True]
    assert np.all(np.isfinite(run.u[0, 0]))
    assert np.all(np.isnan(run.u[0, 1]))
    assert 0 < run.blowup_times[1] <= 0.1
    assert np.isnan(run.blowup_times[0])


def test_batch_warns_above_rotation_guard(caplog):
    """The untruncated flow moves box modes faster than <N>^alpha"""
    cfg = SimConfig(N=2, K=8, M=36)
    zeros = np.zeros((1, 17), dtype=np.complex128)
    with caplog.at_level(logging.WARNING):
        DynamicsService.evolve_batch(zeros, zeros, cfg, [0.1], truncated=True)
    assert "rotation guard" not in caplog.text
    with caplog.at_level(logging.WARNING):
        DynamicsService.evolve_batch(zeros, zeros, cfg, [0.1], truncated=False)
    assert "rotation guard" in caplog.text


def test_cubic_force_is_alias_free():
    """(2 cos 8x)^3 = 6 cos 8x + 2 cos 24x: the grid is exact and the 24-mode tenth is discarded"""
    cfg = SimConfig(potential={"kind": "power", "k": 1})
    p = PhasePoint(SpectralField.cosine(1, 8, (8,), 2.0), SpectralField.zeros(1, 8))
    check = DynamicsService.aliasing_check(p, cfg, truncated=False)
    assert check.aliasing_error < 1e-12
    assert check.tail_fraction == pytest.approx(0.1, rel=1e-9)


def test_exponential_force_aliases():
    """e^{2 cos 8x} has modes 32 and 40 that fold back into the box on 36 points"""
    cfg = SimConfig()
    p = PhasePoint(SpectralField.cosine(1, 8, (8,), 2.0), SpectralField.zeros(1, 8))
    check = DynamicsService.aliasing_check(p, cfg, truncated=False)
    assert check.aliasing_error > 1e-3
    assert check.tail_fraction > 0.05


def test_aliasing_of_zero_field(cfg_1d):
    p = PhasePoint.zeros(1, 8)
    check = DynamicsService.aliasing_check(p, cfg_1d.with_updates(potential={"kind": "power", "k": 1}))
    assert check.aliasing_error == 0.0 and check.tail_fraction == 0.0
