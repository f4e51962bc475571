import numpy as np
import pytest

from fracwave.models.field import SpectralField
from fracwave.models.phase import PhasePoint
from fracwave.services.dynamics_service import DynamicsService
from fracwave.services.gibbs_service import GibbsService
from fracwave.services.observable_service import ObservableService
from fracwave.services.spectral_service import SpectralService


def test_mode_observables(smooth_point, cfg_1d):
    """mode_<i> reads Re c_i of u, mode_<i>_v of v, zero outside the box"""
    assert ObservableService.resolve("mode_1", cfg_1d)(smooth_point) == smooth_point.u.coeff((1,)).real
    assert ObservableService.resolve("mode_-3_v", cfg_1d)(smooth_point) == smooth_point.v.coeff((-3,)).real
    assert ObservableService.resolve("mode_20", cfg_1d)(smooth_point) == 0.0


def test_l2_squared_of_unit_cosine(cfg_1d, unit_cosine):
    point = PhasePoint(unit_cosine, SpectralField.zeros(1, 8))
    assert ObservableService.resolve("l2_squared", cfg_1d)(point) == pytest.approx(1.0, rel=1e-14)
    assert ObservableService.resolve("l2_squared_v", cfg_1d)(point) == 0.0


def test_sobolev_observables(smooth_point, cfg_1d):
    """u is measured in H^s and v in H^(s-alpha)"""
    assert ObservableService.resolve("sobolev_s", cfg_1d)(smooth_point) == pytest.approx(
        SpectralService.sobolev_norm(cfg_1d.s, smooth_point.u), rel=1e-12
    )
    assert ObservableService.resolve("sobolev_s_v", cfg_1d)(smooth_point) == pytest.approx(
        SpectralService.sobolev_norm(cfg_1d.s - cfg_1d.alpha, smooth_point.v), rel=1e-12
    )


def test_linf_of_cosine(cfg_1d):
    point = PhasePoint(SpectralField.cosine(1, 8, (1,), 0.5), SpectralField.zeros(1, 8))
    assert ObservableService.resolve("linf", cfg_1d)(point) == pytest.approx(0.5, abs=1e-13)


def test_energy_observables_match_services(smooth_point, cfg_1d):
    """potential is F_N and hamiltonian is H"""
    potential = ObservableService.resolve("potential", cfg_1d)(smooth_point)
    assert potential == pytest.approx(GibbsService.potential_F(cfg_1d.N, smooth_point.u, cfg_1d.potential, cfg_1d.M), rel=1e-12)
    hamiltonian = ObservableService.resolve("hamiltonian", cfg_1d)(smooth_point)
    assert hamiltonian == pytest.approx(DynamicsService.hamiltonian_H(smooth_point, cfg_1d), rel=1e-12)


def test_batches_evaluate_per_member(cfg_2d, make_field):
    """One value per leading index"""
    cu = np.stack([make_field(2, 4, seed=i).coeffs for i in range(3)])
    values = ObservableService.resolve("l2_squared", cfg_2d).batch(cu, np.zeros_like(cu))
    assert values.shape == (3,)
    assert values[1] == pytest.approx(SpectralService.sobolev_norm(0, make_field(2, 4, seed=1)) ** 2, rel=1e-12)


def test_unknown_observables(cfg_1d):
    """Unregistered names and velocity potentials are refused"""
    with pytest.raises(ValueError):
        ObservableService.resolve("entropy", cfg_1d)
    with pytest.raises(ValueError):
        ObservableService.resolve("potential_v", cfg_1d)


def test_resolve_all_keeps_order(cfg_1d):
    names = ["linf", "mode_0", "hamiltonian"]
    assert [o.name for o in ObservableService.resolve_all(names, cfg_1d)] == names
