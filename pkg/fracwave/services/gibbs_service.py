import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from fracwave.core.errors import ExhaustedTriesError, NonlinearityOverflowError
from fracwave.core.parallel import parallel_map
from fracwave.models.field import SpectralField
from fracwave.models.phase import PhasePoint
from fracwave.models.rng import RngStream
from fracwave.schemas.report import ExperimentReport, ReportTable, Verdict
from fracwave.schemas.sim_config import Potential, SimConfig
from fracwave.services.random_field_service import RandomFieldService
from fracwave.services.spectral_service import SpectralService
from fracwave.services.stats_service import StatsService

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GibbsDraw:
    point: PhasePoint
    tries: int


class GibbsService:
    @staticmethod
    def potential_density(values: np.ndarray, pot: Potential) -> np.ndarray:
        """Pointwise potential: e^u, or u^{2k+2}/(2k+2)"""
        with np.errstate(over="raise", invalid="raise"):
            try:
                if pot.is_exp:
                    return np.exp(values)
                return values ** (2 * pot.k + 2) / (2 * pot.k + 2)
            except FloatingPointError as exc:
                raise NonlinearityOverflowError(f"Potential overflows on grid values up to {np.max(np.abs(values)):.4g}") from exc

    @staticmethod
    def nonlinearity(values: np.ndarray, pot: Potential, strict: bool = True) -> np.ndarray:
        """f = Pot': e^u, or u^{2k+1}. With strict=False overflow yields inf instead of raising"""
        state = "raise" if strict else "ignore"
        with np.errstate(over=state, invalid=state):
            try:
                if pot.is_exp:
                    return np.exp(values)
                return values ** (2 * pot.k + 1)
            except FloatingPointError as exc:
                raise NonlinearityOverflowError(f"Nonlinearity overflows on grid values up to {np.max(np.abs(values)):.4g}") from exc

    @staticmethod
    def potential_F(N: Optional[float], u: SpectralField, pot: Potential, M: int) -> float:
        """Grid quadrature of the potential of pi_N u; N=None integrates the unprojected field"""
        field = u if N is None else u.with_coeffs(u.coeffs * SpectralService.projection_weights(N, u.dim, u.maxmode))
        grid = SpectralService.to_grid(field, M)
        total = float(np.sum(GibbsService.potential_density(grid.values, pot)) * grid.cell_volume)
        if not math.isfinite(total):
            raise NonlinearityOverflowError(f"Potential integral overflows (N={N})")
        return total

    @staticmethod
    def gibbs_weight(N: Optional[float], u: SpectralField, pot: Potential, M: int) -> float:
        """G_N = exp(-F_N), always in (0, 1]"""
        return math.exp(-GibbsService.potential_F(N, u, pot, M))

    @staticmethod
    def sample_gibbs_rejection(cfg: SimConfig, N: float, pot: Potential, rng: RngStream, max_tries: int = 10_000) -> GibbsDraw:
        """Draws mu_N proposals and accepts each with probability G_N(u), valid since G_N <= 1"""
        for attempt in range(max_tries):
            stream = rng.spawn(attempt)
            candidate = RandomFieldService.sample_mu_truncated(cfg, N, stream)
            uniform = stream.spawn(0).generator().random()
            if uniform < GibbsService.gibbs_weight(N, candidate.u, pot, cfg.M):
                return GibbsDraw(candidate, attempt + 1)
        raise ExhaustedTriesError(max_tries)

    @staticmethod
    def importance_weights(
        members: Sequence[PhasePoint],
        N: float,
        pot: Potential,
        M: int,
        threads: Optional[int] = None,
    ) -> np.ndarray:
        return np.array(parallel_map(lambda p: GibbsService.gibbs_weight(N, p.u, pot, M), members, threads))

    @staticmethod
    def effective_sample_size(weights: Sequence[float]) -> float:
        return StatsService.effective_sample_size(weights)

    @staticmethod
    def lp_distance(first: np.ndarray, second: np.ndarray, p: float) -> float:
        """Monte Carlo estimate of ||A - B||_{L^p(d mu)} from coupled samples"""
        return float(np.mean(np.abs(np.asarray(first) - np.asarray(second)) ** p) ** (1.0 / p))

    @staticmethod
    def convergence_diagnostic_F(
        cfg: SimConfig,
        N_list: Sequence[float],
        p: float = 2.0,
        samples: int = 1000,
        functional: str = "F",
        seed: Optional[int] = None,
        threads: Optional[int] = None,
        pairs: Optional[Sequence[Tuple[float, float]]] = None,
    ) -> ExperimentReport:
        """
        Estimates ||F_N1 - F_N2||_{L^p(d mu)} on coupled samples for the given (N1, N2) pairs,
        (N, 2N) for every N in N_list by default. Every sample is drawn once on a box that
        holds the largest level, so all levels see the same omega.
        """
        if functional not in ("F", "G"):
            raise ValueError(f"Unknown functional '{functional}', expected F or G")
        seed = cfg.seed if seed is None else seed
        report = ExperimentReport(name="gibbs-convergence", config=cfg.to_flat(), seed=seed)
        if pairs is None:
            pairs = [(float(N), 2.0 * float(N)) for N in N_list]
        pairs = [(float(N1), float(N2)) for N1, N2 in pairs]
        if not pairs:
            raise ValueError("convergence_diagnostic_F requires at least one (N1, N2) pair")
        levels = sorted({N for pair in pairs for N in pair})
        K = int(math.ceil(max(levels)))
        box_cfg = cfg.with_updates(K=K, M=max(cfg.M, 4 * K + 4))

        def draw(index: int) -> PhasePoint:
            return RandomFieldService.sample_mu(box_cfg, K, RngStream(seed, index))

        def evaluate(index: int) -> List[float]:
            u = draw(index).u
            values = [GibbsService.potential_F(N, u, cfg.potential, box_cfg.M) for N in levels]
            return [math.exp(-v) for v in values] if functional == "G" else values

        table = np.array(parallel_map(evaluate, range(samples), threads))
        column = {N: table[:, i] for i, N in enumerate(levels)}
        report.snapshots["sample_0"] = draw(0)

        rows = ReportTable(name="pairs", columns=["N1", "N2", "lp_norm", "standard_error", "lp_norm_half"])
        estimates, tops = [], []
        for N1, N2 in pairs:
            first, second = column[N1], column[N2]
            diff = np.abs(first - second)
            estimate = GibbsService.lp_distance(first, second, p)
            half = GibbsService.lp_distance(first[: samples // 2], second[: samples // 2], p)
            se = StatsService.bootstrap_se(diff, lambda d, axis=-1: np.mean(d ** p, axis=axis) ** (1.0 / p), seed=seed)
            rows.add(N1, N2, estimate, se, half)
            estimates.append(estimate)
            tops.append(max(N1, N2))
        report.tables.append(rows)

        trend_p = StatsService.mann_kendall_decreasing(tops, estimates)
        report.verdicts.append(Verdict.check("mann_kendall_p", trend_p, "<", 0.05))
        ratios = [row[4] / row[2] if row[2] > 0 else 1.0 for row in rows.rows]
        report.verdicts.append(Verdict.check("half_sample_ratio_min", min(ratios), ">=", 0.5))
        report.verdicts.append(Verdict.check("half_sample_ratio_max", max(ratios), "<=", 2.0))
        logger.info("Gibbs convergence of %s: estimates %s, trend p=%.3g", functional, estimates, trend_p)
        return report.finish()
