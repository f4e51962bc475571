import math

import numpy as np
import pytest

from fracwave.core.errors import ProfileNoReturnError, ResolutionError
from fracwave.models.field import SpectralField
from fracwave.models.phase import PhasePoint
from fracwave.schemas.inflation import BumpPhi, InflationParams
from fracwave.services.inflation_service import InflationService


@pytest.fixture(scope="module")
def quintic_profile():
    return InflationService.solve_profile(2)


@pytest.fixture
def params():
    """d=1, alpha=0.6, k=2: the window is 0 < s < 0.2"""
    return InflationParams(n=8, s=0.1, k=2, alpha=0.6)


@pytest.fixture
def narrow_phi():
    return BumpPhi(bandwidth=4.0)


def test_quadrature_period_of_linear_oscillator():
    """k = 0 is the harmonic oscillator with period 2 pi"""
    assert InflationService.period_quadrature(0) == pytest.approx(2 * math.pi, abs=1e-10)


def test_quadrature_period_of_cubic_oscillator():
    """V'' + V^3 = 0 from V0 = 1 has period about 7.4163"""
    assert InflationService.period_quadrature(1) == pytest.approx(7.4163, abs=1e-4)


def test_quadrature_period_scales_with_amplitude():
    """The period scales like V0^-k"""
    assert InflationService.period_quadrature(1, 2.0) == pytest.approx(InflationService.period_quadrature(1, 1.0) / 2, rel=1e-10)


def test_quadrature_rejects_nonpositive_amplitude():
    with pytest.raises(ValueError):
        InflationService.period_quadrature(1, 0.0)


def test_linear_profile():
    """Verlet recovers the period 2 pi and cos t"""
    profile = InflationService.solve_profile(0)
    assert profile.period == pytest.approx(2 * math.pi, abs=1e-8)
    tau = np.linspace(0, 2 * math.pi, 7)
    np.testing.assert_allclose(profile.value(tau), np.cos(tau), atol=1e-7)


def test_cubic_profile_matches_quadrature():
    """Integrated and quadrature periods agree; V swings between -1 and 1"""
    profile = InflationService.solve_profile(1)
    assert profile.period == pytest.approx(InflationService.period_quadrature(1), abs=1e-6)
    assert float(np.min(profile.V)) == pytest.approx(-1.0, abs=1e-6)
    assert profile.V[0] == 1.0 and profile.V[-1] == 1.0
    assert float(profile.derivative(0.0)) == pytest.approx(0.0, abs=1e-12)


def test_profile_is_periodic(quintic_profile):
    """V(tau + T) = V(tau)"""
    tau = np.array([0.3, 1.1, 2.9])
    np.testing.assert_allclose(quintic_profile.value(tau + quintic_profile.period), quintic_profile.value(tau), atol=1e-12)


def test_coarse_profile_is_refused():
    """A step far too large breaks the first integral"""
    with pytest.raises(ProfileNoReturnError):
        InflationService.solve_profile(1, dt_ode=0.5)


def test_inflation_window_is_validated():
    """s must lie below d/2 - alpha/k"""
    with pytest.raises(ValueError) as info:
        InflationParams(n=8, s=0.3, k=2, alpha=0.6)
    assert "d/2 - alpha/k" in str(info.value)


def test_inflation_scales(params):
    """kappa, amplitude, lambda and t_n from n"""
    kappa = math.log(8) ** -0.25
    assert params.kappa == pytest.approx(kappa)
    assert params.amplitude == pytest.approx(kappa * 8 ** 0.4)
    assert params.lam == pytest.approx((kappa * 8 ** 0.4) ** 2)
    assert params.t_n == pytest.approx((math.log(8) ** 0.5 * 8 ** -0.4) ** 2)
    assert InflationParams(n=8, s=0.15, k=2, alpha=0.6).case == "2"


def test_bump_profile(narrow_phi):
    """The bump peaks at 1 on the center and vanishes off its support"""
    nodes = (np.array([math.pi, math.pi + 0.05, 0.5]),)
    values = InflationService.bump_values(narrow_phi, nodes, 8)
    assert values[0] == 1.0
    assert 0 < values[1] < 1
    assert values[2] == 0.0


def test_bump_support_is_resolved(params, narrow_phi):
    """K below n * bandwidth / radius is refused"""
    assert InflationService.required_maxmode(params, narrow_phi) == 32
    with pytest.raises(ResolutionError):
        InflationService.build_inflation_data(params, narrow_phi, 16, 68)


def test_inflation_data(params, narrow_phi):
    """Real position data at rest peaking near the amplitude"""
    point = InflationService.build_inflation_data(params, narrow_phi, 32, 132)
    assert point.u.is_hermitian(0.0)
    assert not np.any(point.v.coeffs)
    assert point.u.coeff((0,)).real > 0


def test_ansatz_starts_at_data(params, narrow_phi, quintic_profile):
    """v_n(0) equals the initial grid values exactly"""
    start = InflationService.eval_vn(0.0, params, narrow_phi, quintic_profile, 132)
    data = InflationService.initial_values(params, narrow_phi, 132)
    np.testing.assert_array_equal(start.values, data.values)


def test_ansatz_needs_matching_profile(params, narrow_phi):
    """A cubic profile cannot drive a quintic inflation"""
    with pytest.raises(ValueError):
        InflationService.eval_vn(0.0, params, narrow_phi, InflationService.solve_profile(1), 132)


def test_semiclassical_energy_is_quadratic(unit_cosine):
    """Doubling w quadruples the rescaled energy"""
    w = PhasePoint(unit_cosine, SpectralField.zeros(1, 8))
    single = InflationService.semiclassical_energy(w, 8, 0.1, 0.6)
    assert single > 0
    assert InflationService.semiclassical_energy(w * 2.0, 8, 0.1, 0.6) == pytest.approx(4 * single, rel=1e-12)
    assert InflationService.semiclassical_energy(PhasePoint.zeros(1, 8), 8, 0.1, 0.6) == 0.0


def test_sobolev_bound_rows(quintic_profile):
    """Rows ascend in n and the constants come from the smallest n"""
    phi = BumpPhi(bandwidth=2.0)
    params_list = [InflationParams(n=n, s=0.1, k=2, alpha=0.6) for n in (8, 4)]
    rows = InflationService.sobolev_bound_check(params_list, phi, quintic_profile, sigmas=(0.0, 1.0), times=3)
    assert [row["n"] for row in rows] == [4.0, 8.0]
    assert rows[0]["upper_0_constant"] == rows[0]["upper_0"]
    assert rows[1]["lower_constant"] == rows[0]["lower"]
    assert all(row["upper_1"] > 0 for row in rows)
