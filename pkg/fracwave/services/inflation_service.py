import logging
import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate

from fracwave.core.errors import ProfileNoReturnError, ResolutionError
from fracwave.models.field import GridField, SpectralField
from fracwave.models.phase import PhasePoint
from fracwave.models.profile import OdeProfile
from fracwave.schemas.inflation import BumpPhi, InflationParams
from fracwave.services.spectral_service import SpectralService

logger = logging.getLogger(__name__)

TABLE_SAMPLES = 2 ** 14
DRIFT_LIMIT = 1e-6
INVARIANT_TOLERANCE = 1e-8


def _first_integral(V: float, W: float, k: int) -> float:
    return W * W + 2 * V ** (2 * k + 2) / (2 * k + 2)


class InflationService:
    @staticmethod
    def solve_profile(k: int, V0: float = 1.0, dt_ode: float = 1e-4) -> OdeProfile:
        """
        Velocity Verlet for V'' + V^{2k+1} = 0 from (V0, 0). A first pass locates the
        first return to V' = 0 from above; a second pass tabulates one period on
        2^14 equal intervals.
        """
        if not (V0 > 0 and dt_ode > 0):
            raise ValueError(f"solve_profile requires V0 > 0 and dt_ode > 0 (got V0={V0}, dt_ode={dt_ode})")
        power = 2 * k + 1
        level = _first_integral(V0, 0.0, k)
        scale = max(1.0, level)
        limit = int(4 * InflationService.period_quadrature(k, V0) / dt_ode) + 10

        V, W, t, h = V0, 0.0, 0.0, dt_ode
        acc = -V ** power
        went_negative = False
        period = None
        for _ in range(limit):
            W_half = W + 0.5 * h * acc
            V_next = V + h * W_half
            acc = -V_next ** power
            W_next = W_half + 0.5 * h * acc
            if abs(_first_integral(V_next, W_next, k) - level) > DRIFT_LIMIT * scale:
                raise ProfileNoReturnError(f"First integral drifted beyond {DRIFT_LIMIT:g} at t={t + h:.6g}; reduce dt_ode={dt_ode:g}")
            went_negative = went_negative or W_next < 0
            if went_negative and W > 0 and W_next <= 0:
                period = t + h * W / (W - W_next)
                break
            V, W, t = V_next, W_next, t + h
        if period is None:
            raise ProfileNoReturnError(f"No return to (V0, 0) within {limit} steps of dt_ode={dt_ode:g}")

        stride = max(1, int(math.ceil(period / (TABLE_SAMPLES * dt_ode))))
        h = period / (TABLE_SAMPLES * stride)
        times = np.linspace(0.0, period, TABLE_SAMPLES + 1)
        values = np.empty(TABLE_SAMPLES + 1)
        slopes = np.empty(TABLE_SAMPLES + 1)
        V, W = V0, 0.0
        acc = -V ** power
        values[0], slopes[0] = V, W
        for i in range(1, TABLE_SAMPLES * stride + 1):
            W_half = W + 0.5 * h * acc
            V = V + h * W_half
            acc = -V ** power
            W = W_half + 0.5 * h * acc
            if i % stride == 0:
                values[i // stride], slopes[i // stride] = V, W

        drift = float(np.max(np.abs(slopes ** 2 + 2 * values ** (2 * k + 2) / (2 * k + 2) - level)))
        closure = max(abs(values[-1] - V0), abs(slopes[-1]))
        tolerance = INVARIANT_TOLERANCE * scale
        if drift > tolerance or closure > tolerance:
            raise ProfileNoReturnError(
                f"Tabulated profile misses its invariants (drift {drift:.3g}, closure {closure:.3g}, tolerance {tolerance:.3g}); reduce dt_ode"
            )
        # close the table exactly so the periodic extension is continuous
        values[-1], slopes[-1] = V0, 0.0
        logger.info("ODE profile k=%d V0=%g: period %.10f, drift %.3g", k, V0, period, drift)
        return OdeProfile(k=k, V0=V0, t=times, V=values, dV=slopes, period=period, first_integral=level)

    @staticmethod
    def period_quadrature(k: int, V0: float = 1.0) -> float:
        """
        2 * integral over [-V0, V0] of dv / sqrt(2 (F(V0) - F(v))), with the square-root
        endpoint singularities handled by the algebraic weight of QUADPACK.
        """
        if not V0 > 0:
            raise ValueError(f"period_quadrature requires V0 > 0, got V0={V0}")

        def regular(v: float) -> float:
            # 2(F(V0) - F(v)) = (V0^2 - v^2) * 2/(2k+2) * sum_j V0^{2j} v^{2(k-j)}
            series = sum(V0 ** (2 * j) * v ** (2 * (k - j)) for j in range(k + 1))
            return 1.0 / math.sqrt(2.0 / (2 * k + 2) * series)

        value, _ = integrate.quad(regular, -V0, V0, weight="alg", wvar=(-0.5, -0.5), epsabs=1e-13, epsrel=1e-13, limit=200)
        return 2.0 * value

    @staticmethod
    def bump_values(phi: BumpPhi, nodes: Sequence[np.ndarray], n: float) -> np.ndarray:
        """phi(n (x - center)) with x - center wrapped to [-pi, pi)"""
        center = phi.center_for(len(nodes))
        radius2 = np.zeros_like(nodes[0])
        for axis, c in zip(nodes, center):
            offset = np.mod(axis - c + math.pi, 2 * math.pi) - math.pi
            radius2 = radius2 + (n * offset / phi.radius) ** 2
        inside = radius2 < 1.0
        safe = np.where(inside, 1.0 - radius2, 1.0)
        return np.where(inside, np.exp(1.0 - 1.0 / safe), 0.0)

    @staticmethod
    def required_maxmode(params: InflationParams, phi: BumpPhi) -> int:
        return int(math.ceil(params.n * phi.bandwidth / phi.radius))

    @staticmethod
    def initial_values(params: InflationParams, phi: BumpPhi, M: int, amplitude_scale: float = 1.0) -> GridField:
        """Grid samples of kappa_n n^{d/2-s} phi(n x)"""
        nodes = GridField.nodes(params.d, M)
        amplitude = params.amplitude * amplitude_scale
        return GridField(params.d, M, amplitude * InflationService.bump_values(phi, nodes, params.n))

    @staticmethod
    def build_inflation_data(
        params: InflationParams,
        phi: BumpPhi,
        K: int,
        M: int,
        amplitude_scale: float = 1.0,
    ) -> PhasePoint:
        required = InflationService.required_maxmode(params, phi)
        if K < required:
            raise ResolutionError(
                f"Bump at n={params.n} needs maxmode >= {required} (bandwidth {phi.bandwidth:g}), got K={K}"
            )
        u0 = SpectralService.from_grid(InflationService.initial_values(params, phi, M, amplitude_scale), K)
        return PhasePoint(u0, SpectralField.zeros(params.d, K))

    @staticmethod
    def vn_values(
        t: float,
        params: InflationParams,
        phi: BumpPhi,
        profile: OdeProfile,
        nodes: Sequence[np.ndarray],
        amplitude_scale: float = 1.0,
    ) -> np.ndarray:
        """a(x) V(t a(x)^k) with a = kappa_n n^{d/2-s} phi(n x)"""
        if profile.k != params.k:
            raise ValueError(f"Profile solves k={profile.k} but the inflation uses k={params.k}")
        amplitude = params.amplitude * amplitude_scale * InflationService.bump_values(phi, nodes, params.n)
        return amplitude * profile.value(t * amplitude ** params.k)

    @staticmethod
    def eval_vn(
        t: float,
        params: InflationParams,
        phi: BumpPhi,
        profile: OdeProfile,
        M: int,
        amplitude_scale: float = 1.0,
    ) -> GridField:
        nodes = GridField.nodes(params.d, M)
        return GridField(params.d, M, InflationService.vn_values(t, params, phi, profile, nodes, amplitude_scale))

    @staticmethod
    def semiclassical_energy(w: PhasePoint, n: float, s: float, alpha: float) -> float:
        """n^{-2(alpha-s)} (||dt w||^2 + ||D^alpha w||^2)"""
        gradient = SpectralService.sobolev_norm(alpha, w.u) ** 2
        return n ** (-2 * (alpha - s)) * (SpectralService.sobolev_norm(0.0, w.v) ** 2 + gradient)

    @staticmethod
    def sobolev_bound_check(
        params_list: Sequence[InflationParams],
        phi: BumpPhi,
        profile: OdeProfile,
        sigmas: Sequence[float] = (0.0, 1.0, 2.0),
        times: int = 9,
    ) -> List[Dict[str, float]]:
        """
        Per n: the upper-bound ratios sup_t ||v_n(t)||_{H^sigma} / (kappa (lambda t_n)^sigma n^{sigma-s})
        over t in [0, t_n] and the lower-bound ratio ||v_n(t_n)||_{H^s} / (kappa (lambda t_n)^s).
        The constants are the ratios of the smallest n.
        """
        rows = []
        for params in sorted(params_list, key=lambda p: p.n):
            K = InflationService.required_maxmode(params, phi)
            M = 4 * K + 4
            nodes = GridField.nodes(params.d, M)
            growth = params.lam * params.t_n
            row: Dict[str, float] = {"n": float(params.n)}
            fields = [
                SpectralService.values_to_coeffs(InflationService.vn_values(t, params, phi, profile, nodes), params.d, K)
                for t in np.linspace(0.0, params.t_n, times)
            ]
            for sigma in sigmas:
                scale = params.kappa * growth ** sigma * params.n ** (sigma - params.s)
                peak = max(SpectralService.sobolev_norm(sigma, SpectralField(params.d, K, c)) for c in fields)
                row[f"upper_{sigma:g}"] = peak / scale
            final = SpectralService.sobolev_norm(params.s, SpectralField(params.d, K, fields[-1]))
            row["lower"] = final / (params.kappa * growth ** params.s)
            rows.append(row)
        if rows:
            base = rows[0]
            for row in rows:
                for key in list(row):
                    if key.startswith("upper_") or key == "lower":
                        row[f"{key}_constant"] = base[key]
        return rows
