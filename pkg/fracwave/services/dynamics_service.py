import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from fracwave.core.errors import NonlinearityOverflowError, SamplingResolutionError
from fracwave.core.parallel import parallel_map
from fracwave.models.field import SpectralField
from fracwave.models.phase import PhasePoint, Trajectory
from fracwave.schemas.report import ReportTable
from fracwave.schemas.sim_config import SimConfig, default_dt
from fracwave.services.gibbs_service import GibbsService
from fracwave.services.spectral_service import SpectralService

logger = logging.getLogger(__name__)

TRAJECTORY_OBSERVABLES = ("H", "J", "sobolev_s", "sobolev_sigma", "Linf")
BATCH_CHUNK = 256


@dataclass
class BatchRun:
    """States of many trajectories at shared checkpoint times; blown-up members hold NaN after blow-up"""
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    blown_up: np.ndarray
    blowup_times: np.ndarray


class _KickRotateKick:
    """Array-level kick/rotate/kick stepping on coefficient arrays with optional leading batch axes"""

    def __init__(self, cfg: SimConfig, dim: int, maxmode: int, truncated: bool, strict: bool):
        self.cfg = cfg
        self.dim = dim
        self.maxmode = maxmode
        self.strict = strict
        self.freq = SpectralService.multiplier(cfg.alpha, dim, maxmode)
        self.weights = SpectralService.projection_weights(cfg.N, dim, maxmode) if truncated else None
        self.box_axes = tuple(range(-dim, 0))

    def rotate(self, cu: np.ndarray, cv: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        cos, sin = np.cos(t * self.freq), np.sin(t * self.freq)
        return cu * cos + cv * (sin / self.freq), -cu * (self.freq * sin) + cv * cos

    def force(self, cu: np.ndarray, time: Optional[float] = None) -> np.ndarray:
        """pi_N f(pi_N u) on the box, or P_K f(u) for the untruncated flow"""
        if self.cfg.kick_scale == 0:
            return np.zeros_like(cu)
        projected = cu if self.weights is None else cu * self.weights
        values = SpectralService.coeffs_to_values(projected, self.dim, self.maxmode, self.cfg.M)
        try:
            nonlinear = GibbsService.nonlinearity(values, self.cfg.potential, strict=self.strict)
        except NonlinearityOverflowError as exc:
            raise NonlinearityOverflowError(str(exc), time) from exc
        with np.errstate(over="ignore", invalid="ignore"):
            coeffs = SpectralService.values_to_coeffs(nonlinear, self.dim, self.maxmode)
        if self.strict and not np.all(np.isfinite(coeffs)):
            raise NonlinearityOverflowError("Nonlinear force is not finite", time)
        return coeffs if self.weights is None else coeffs * self.weights

    def finite_rows(self, force: np.ndarray) -> np.ndarray:
        return np.all(np.isfinite(force), axis=self.box_axes)

    def step(self, cu, cv, force, h):
        """One Strang step; `force` is the force at the incoming u and the outgoing one is returned"""
        half = 0.5 * h * self.cfg.kick_scale
        cv = cv - half * force
        cu, cv = self.rotate(cu, cv, h)
        force = self.force(cu)
        cv = cv - half * force
        return cu, cv, force


@dataclass(frozen=True)
class AliasingCheck:
    """
    aliasing_error: relative l^2 distance between the box force computed on the run grid M
    and on the doubled grid 2M. tail_fraction: share of the force energy on the doubled
    grid carried by modes outside the box, which the kick discards.
    """
    aliasing_error: float
    tail_fraction: float


def _steps_for(T: float, dt: float) -> int:
    return max(1, int(math.ceil(T / dt - 1e-9)))


def _check_rotation_guard(dt: float, cfg: SimConfig, maxmode: int, truncated: bool):
    """Warns when dt exceeds 0.1<N>^-alpha for the fastest mode the kick reaches"""
    fastest = min(cfg.N, maxmode) if truncated else maxmode
    guard = default_dt(fastest, cfg.alpha)
    if dt > guard * (1 + 1e-9):
        logger.warning("dt=%.4g exceeds the rotation guard 0.1<%g>^-alpha=%.4g", dt, fastest, guard)


class DynamicsService:
    @staticmethod
    def frequencies(alpha: float, dim: int, maxmode: int) -> np.ndarray:
        """Lambda_n = <lambda_n>^alpha over the box"""
        return SpectralService.multiplier(alpha, dim, maxmode)

    @staticmethod
    def free_flow(t: float, p: PhasePoint, alpha: float) -> PhasePoint:
        """Exact linear flow cos(t D^alpha) u + D^{-alpha} sin(t D^alpha) v, mode by mode"""
        freq = DynamicsService.frequencies(alpha, p.dim, p.maxmode)
        cos, sin = np.cos(t * freq), np.sin(t * freq)
        cu, cv = p.u.coeffs, p.v.coeffs
        return PhasePoint(
            p.u.with_coeffs(cu * cos + cv * (sin / freq)),
            p.v.with_coeffs(-cu * (freq * sin) + cv * cos),
        )

    @staticmethod
    def free_flow_batch(times: Sequence[float], p: PhasePoint, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
        """Free flow at many times at once: arrays of shape (len(times),) + box"""
        freq = DynamicsService.frequencies(alpha, p.dim, p.maxmode)
        phase = np.asarray(times, dtype=np.float64).reshape((-1,) + (1,) * p.dim) * freq
        cos, sin = np.cos(phase), np.sin(phase)
        cu, cv = p.u.coeffs, p.v.coeffs
        return cu * cos + cv * (sin / freq), -cu * (freq * sin) + cv * cos

    @staticmethod
    def step_strang(dt: float, p: PhasePoint, cfg: SimConfig, truncated: bool = True) -> PhasePoint:
        """Half kick, exact rotation over dt, half kick"""
        engine = _KickRotateKick(cfg, p.dim, p.maxmode, truncated, strict=True)
        cu, cv, _ = engine.step(p.u.coeffs, p.v.coeffs, engine.force(p.u.coeffs), dt)
        return PhasePoint(p.u.with_coeffs(cu), p.v.with_coeffs(cv))

    @staticmethod
    def evolve(
        T: float,
        p: PhasePoint,
        cfg: SimConfig,
        record_every: int = 1,
        truncated: bool = True,
        observables: Optional[Sequence[str]] = TRAJECTORY_OBSERVABLES,
        dt: Optional[float] = None,
    ) -> Trajectory:
        """
        ceil(T/dt) Strang steps of equal length T/steps. States are recorded at t=0,
        every `record_every` steps and at T.
        """
        if not T > 0:
            raise ValueError(f"evolve requires T > 0, got T={T}")
        dt = cfg.dt if dt is None else dt
        _check_rotation_guard(dt, cfg, p.maxmode, truncated)
        steps = _steps_for(T, dt)
        h = T / steps
        engine = _KickRotateKick(cfg, p.dim, p.maxmode, truncated, strict=True)
        names = tuple(observables or ())

        trajectory = Trajectory()

        def record(time: float, cu, cv):
            state = PhasePoint(p.u.with_coeffs(cu), p.v.with_coeffs(cv))
            values = {name: DynamicsService.trajectory_observable(name, state, cfg) for name in names}
            trajectory.append(time, state, values)

        cu, cv = p.u.coeffs, p.v.coeffs
        record(0.0, cu, cv)
        force = engine.force(cu, 0.0)
        for i in range(1, steps + 1):
            half = 0.5 * h * cfg.kick_scale
            cv = cv - half * force
            cu, cv = engine.rotate(cu, cv, h)
            force = engine.force(cu, i * h)
            cv = cv - half * force
            if i % record_every == 0 or i == steps:
                record(T if i == steps else i * h, cu, cv)
        logger.debug("Evolved %d steps of dt=%.4g to T=%.4g", steps, h, T)
        return trajectory

    @staticmethod
    def evolve_batch(
        cu: np.ndarray,
        cv: np.ndarray,
        cfg: SimConfig,
        checkpoints: Sequence[float],
        truncated: bool = True,
        dt: Optional[float] = None,
        threads: Optional[int] = None,
    ) -> BatchRun:
        """
        Evolves a batch of coefficient arrays (leading axis = member) through sorted
        checkpoints. Each segment between checkpoints uses ceil(segment/dt) equal steps.
        A member whose nonlinearity overflows is frozen as NaN and its blow-up time kept.
        """
        dim = cu.ndim - 1
        maxmode = (cu.shape[-1] - 1) // 2
        times = np.asarray(sorted(checkpoints), dtype=np.float64)
        if times.size == 0 or times[0] < 0:
            raise ValueError("Checkpoints must be nonnegative and nonempty")
        dt = cfg.dt if dt is None else dt
        _check_rotation_guard(dt, cfg, maxmode, truncated)
        engine = _KickRotateKick(cfg, dim, maxmode, truncated, strict=False)

        def run_chunk(bounds: Tuple[int, int]) -> BatchRun:
            start, stop = bounds
            u, v = cu[start:stop].copy(), cv[start:stop].copy()
            alive = np.ones(stop - start, dtype=bool)
            died = np.full(stop - start, np.nan)
            out_u = np.empty((len(times),) + u.shape, dtype=np.complex128)
            out_v = np.empty_like(out_u)
            clock = 0.0
            with np.errstate(over="ignore", invalid="ignore"):
                force = engine.force(u)
                for j, target in enumerate(times):
                    segment = target - clock
                    if segment > 0:
                        steps = _steps_for(segment, dt)
                        h = segment / steps
                        for i in range(1, steps + 1):
                            u, v, force = engine.step(u, v, force, h)
                            bad = alive & ~engine.finite_rows(force)
                            if np.any(bad):
                                died[bad] = clock + i * h
                                alive &= ~bad
                                u[bad], v[bad] = np.nan, np.nan
                                logger.warning("%d member(s) blew up at t=%.4g", int(np.sum(bad)), clock + i * h)
                        clock = float(target)
                    out_u[j], out_v[j] = u, v
            return BatchRun(times, out_u, out_v, ~alive, died)

        count = cu.shape[0]
        chunks = [(start, min(start + BATCH_CHUNK, count)) for start in range(0, count, BATCH_CHUNK)]
        runs = parallel_map(run_chunk, chunks, threads)
        return BatchRun(
            times,
            np.concatenate([r.u for r in runs], axis=1),
            np.concatenate([r.v for r in runs], axis=1),
            np.concatenate([r.blown_up for r in runs]),
            np.concatenate([r.blowup_times for r in runs]),
        )

    @staticmethod
    def aliasing_check(p: PhasePoint, cfg: SimConfig, truncated: bool = True) -> AliasingCheck:
        """
        Kick force on the run grid against a grid twice as fine. A degree-q polynomial of a
        field band-limited to K is alias-free once M > (q+1)K, so for u^{2k+1} both numbers
        vanish up to roundoff when M > (2k+2)K; e^u never band-limits.
        """
        fine_cfg = cfg.with_updates(M=2 * cfg.M)
        coarse = _KickRotateKick(cfg, p.dim, p.maxmode, truncated, strict=False)
        fine = _KickRotateKick(fine_cfg, p.dim, p.maxmode, truncated, strict=False)
        with np.errstate(over="ignore", invalid="ignore"):
            force_coarse = coarse.force(p.u.coeffs)
            force_fine = fine.force(p.u.coeffs)
            projected = p.u.coeffs if fine.weights is None else p.u.coeffs * fine.weights
            values = SpectralService.coeffs_to_values(projected, p.dim, p.maxmode, fine_cfg.M)
            nonlinear = GibbsService.nonlinearity(values, cfg.potential, strict=False)
            # discrete Parseval: the full spectrum of the grid function carries all of its energy
            total = float(np.sum(nonlinear ** 2)) * (2 * math.pi / fine_cfg.M) ** p.dim
            kept = float(np.sum(np.abs(SpectralService.values_to_coeffs(nonlinear, p.dim, p.maxmode)) ** 2))
            scale = float(np.sqrt(np.sum(np.abs(force_fine) ** 2)))
            difference = float(np.sqrt(np.sum(np.abs(force_coarse - force_fine) ** 2)))
        if not all(math.isfinite(x) for x in (scale, difference, total, kept)):
            return AliasingCheck(math.inf, math.inf)
        error = difference / scale if scale > 0 else 0.0
        tail = max(0.0, 1.0 - kept / total) if total > 0 else 0.0
        return AliasingCheck(error, tail)

    @staticmethod
    def kinetic(p: PhasePoint, alpha: float, mask: Optional[np.ndarray] = None) -> float:
        """1/2 (||D^alpha u||^2 + ||v||^2), optionally restricted to a mode mask"""
        freq = DynamicsService.frequencies(alpha, p.dim, p.maxmode)
        density = freq ** 2 * np.abs(p.u.coeffs) ** 2 + np.abs(p.v.coeffs) ** 2
        if mask is not None:
            density = np.where(mask, density, 0.0)
        return 0.5 * float(np.sum(density))

    @staticmethod
    def hamiltonian_H(p: PhasePoint, cfg: SimConfig, M: Optional[int] = None) -> float:
        return DynamicsService.kinetic(p, cfg.alpha) + GibbsService.potential_F(None, p.u, cfg.potential, M or cfg.M)

    @staticmethod
    def hamiltonian_J(p: PhasePoint, cfg: SimConfig, M: Optional[int] = None) -> float:
        """
        Energy conserved by the truncated flow: the quadratic part over E_N plus the
        potential of pi_N u. On modes where psi = 1 it coincides with H.
        """
        mask = SpectralService.sharp_mask(cfg.N, p.dim, p.maxmode)
        return DynamicsService.kinetic(p, cfg.alpha, mask) + GibbsService.potential_F(cfg.N, p.u, cfg.potential, M or cfg.M)

    @staticmethod
    def energy_E(w: PhasePoint, k: int, alpha: float, M: int) -> float:
        """1/2 (|dt w|^2 + |D^alpha w|^2) + w^{2k+2}/(2k+2), integrated"""
        grid = SpectralService.to_grid(w.u, M)
        potential = float(np.sum(grid.values ** (2 * k + 2))) * grid.cell_volume / (2 * k + 2)
        return DynamicsService.kinetic(w, alpha) + potential

    @staticmethod
    def _window_norm(p: PhasePoint, cfg: SimConfig, spatial: Callable[[np.ndarray], np.ndarray]) -> float:
        active = (p.u.coeffs != 0) | (p.v.coeffs != 0)
        if not np.any(active):
            return 0.0
        fastest = float(np.max(DynamicsService.frequencies(cfg.alpha, p.dim, p.maxmode)[active]))
        per_window = int(round(1.0 / cfg.dt_sup))
        if per_window < 4 * fastest / (2 * math.pi):
            raise SamplingResolutionError(
                f"{per_window} samples per unit window cannot resolve frequency {fastest:.4g}: "
                f"requires dt_sup <= {2 * math.pi / (4 * fastest):.4g}"
            )
        offsets = np.arange(per_window) * cfg.dt_sup
        total = 0.0
        for l in range(-cfg.window_L, cfg.window_L + 1):
            u_t, _ = DynamicsService.free_flow_batch(l + offsets, p, cfg.alpha)
            total += (1 + abs(l)) ** (-cfg.beta) * float(np.max(spatial(u_t)))
        return total

    @staticmethod
    def weighted_norm_Y(p: PhasePoint, cfg: SimConfig) -> float:
        """sum_l (1+|l|)^-beta sup_{l<=t<l+1} ||S(t)p||_{W^{eps0,r0}}, l in [-L, L]"""
        symbol = SpectralService.multiplier(cfg.eps0, p.dim, p.maxmode)

        def spatial(u_t: np.ndarray) -> np.ndarray:
            values = SpectralService.coeffs_to_values(u_t * symbol, p.dim, p.maxmode, cfg.M)
            return SpectralService.lp_norm_values(cfg.r0, values, p.dim)

        return DynamicsService._window_norm(p, cfg, spatial)

    @staticmethod
    def weighted_norm_Z(p: PhasePoint, cfg: SimConfig) -> float:
        """As weighted_norm_Y with the L^inf norm in space"""

        def spatial(u_t: np.ndarray) -> np.ndarray:
            values = SpectralService.coeffs_to_values(u_t, p.dim, p.maxmode, cfg.M)
            return SpectralService.lp_norm_values(math.inf, values, p.dim)

        return DynamicsService._window_norm(p, cfg, spatial)

    @staticmethod
    def xsb_norm(p: PhasePoint, cfg: SimConfig) -> float:
        """||p||_{H^sigma x H^{sigma-alpha}} + ||p||_Y"""
        return SpectralService.hs_pair_norm(cfg.sigma, p, cfg.alpha) + DynamicsService.weighted_norm_Y(p, cfg)

    @staticmethod
    def growth_curve(trajectory: Trajectory, cfg: SimConfig) -> ReportTable:
        table = ReportTable(name="growth_curve", columns=["time", "xsb_norm", "sqrt_log"])
        for time, state in zip(trajectory.times, trajectory.states):
            table.add(time, DynamicsService.xsb_norm(state, cfg), math.sqrt(math.log(1 + time)))
        return table

    @staticmethod
    def nonlinear_part(trajectory: Trajectory, p0: PhasePoint, alpha: float) -> List[SpectralField]:
        """w(t) = u(t) - [S(t) p0]_u at every recorded time"""
        return [
            state.u - DynamicsService.free_flow(time, p0, alpha).u
            for time, state in zip(trajectory.times, trajectory.states)
        ]

    @staticmethod
    def stability_horizon(p: PhasePoint, cfg: SimConfig, T_max: float, truncated: bool = True) -> float:
        """Time reached before the nonlinearity overflows, capped at T_max"""
        try:
            DynamicsService.evolve(T_max, p, cfg, record_every=10 ** 9, truncated=truncated, observables=())
        except NonlinearityOverflowError as exc:
            logger.warning("Overflow at t=%s before T_max=%g", exc.time, T_max)
            return exc.time if exc.time is not None else 0.0
        return T_max

    @staticmethod
    def trajectory_observable(name: str, p: PhasePoint, cfg: SimConfig) -> float:
        if name == "H":
            return DynamicsService.hamiltonian_H(p, cfg)
        if name == "J":
            return DynamicsService.hamiltonian_J(p, cfg)
        if name == "sobolev_s":
            return SpectralService.sobolev_norm(cfg.s, p.u)
        if name == "sobolev_sigma":
            return SpectralService.sobolev_norm(cfg.sigma, p.u)
        if name == "Linf":
            return SpectralService.grid_lp_norm(math.inf, SpectralService.to_grid(p.u, cfg.M))
        raise ValueError(f"Unknown trajectory observable '{name}'")
