import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    effective_n: float


@dataclass(frozen=True)
class WelchResult:
    shift: float
    standard_error: float
    t: float
    df: float
    p_value: float
    effect_size: float


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int


def _weights(values: np.ndarray, weights: Optional[Sequence[float]]) -> np.ndarray:
    if weights is None:
        return np.ones(len(values))
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != values.shape:
        raise ValueError("Need one weight per sample")
    return weights


def _weighted_cdf(sorted_values: np.ndarray, cumulative: np.ndarray, points: np.ndarray) -> np.ndarray:
    positions = np.searchsorted(sorted_values, points, side="right")
    padded = np.concatenate([[0.0], cumulative])
    return padded[positions]


class StatsService:
    @staticmethod
    def effective_sample_size(weights: Sequence[float]) -> float:
        """Kish effective sample size (sum w)^2 / sum w^2"""
        weights = np.asarray(weights, dtype=np.float64)
        total = np.sum(weights ** 2)
        return float(np.sum(weights) ** 2 / total) if total > 0 else 0.0

    @staticmethod
    def weighted_ks_test(x, y, wx=None, wy=None) -> KsResult:
        """
        Two-sample Kolmogorov-Smirnov on weighted ECDFs. The asymptotic p-value uses
        the Kish sizes in place of the raw sizes, with the Stephens small-sample correction.
        """
        x = np.nan_to_num(np.asarray(x, dtype=np.float64), nan=np.inf)
        y = np.nan_to_num(np.asarray(y, dtype=np.float64), nan=np.inf)
        wx, wy = _weights(x, wx), _weights(y, wy)
        order_x, order_y = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
        sx, sy = x[order_x], y[order_y]
        cx = np.cumsum(wx[order_x]) / np.sum(wx)
        cy = np.cumsum(wy[order_y]) / np.sum(wy)
        points = np.concatenate([sx, sy])
        statistic = float(np.max(np.abs(_weighted_cdf(sx, cx, points) - _weighted_cdf(sy, cy, points))))
        nx, ny = StatsService.effective_sample_size(wx), StatsService.effective_sample_size(wy)
        en = nx * ny / (nx + ny)
        if statistic == 0:
            return KsResult(0.0, 1.0, en)
        root = math.sqrt(en)
        scaled = (root + 0.12 + 0.11 / root) * statistic
        return KsResult(statistic, float(np.clip(stats.kstwobign.sf(scaled), 0.0, 1.0)), en)

    @staticmethod
    def weighted_mean_var(values, weights=None):
        """Weighted mean, unbiased reliability-weighted variance and Kish size"""
        values = np.asarray(values, dtype=np.float64)
        weights = _weights(values, weights)
        total = np.sum(weights)
        mean = float(np.sum(weights * values) / total)
        n_eff = StatsService.effective_sample_size(weights)
        if n_eff <= 1:
            return mean, 0.0, n_eff
        spread = float(np.sum(weights * (values - mean) ** 2) / total)
        return mean, spread * n_eff / (n_eff - 1), n_eff

    @staticmethod
    def welch_test(x, y, wx=None, wy=None) -> WelchResult:
        """Weighted Welch t-test for a shift of the mean of y against x"""
        x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            return WelchResult(math.inf, math.inf, math.inf, math.nan, 0.0, math.inf)
        mx, vx, nx = StatsService.weighted_mean_var(x, wx)
        my, vy, ny = StatsService.weighted_mean_var(y, wy)
        shift = my - mx
        ex, ey = vx / nx, vy / ny
        se = math.sqrt(ex + ey)
        pooled = math.sqrt((vx + vy) / 2)
        effect = shift / pooled if pooled > 0 else 0.0
        if se == 0:
            return WelchResult(shift, 0.0, 0.0, math.inf, 1.0 if shift == 0 else 0.0, effect)
        t = shift / se
        df = (ex + ey) ** 2 / ((ex ** 2 / (nx - 1) if ex else 0.0) + (ey ** 2 / (ny - 1) if ey else 0.0))
        return WelchResult(shift, se, t, df, float(2 * stats.t.sf(abs(t), df)), effect)

    @staticmethod
    def linear_fit(x, y) -> LinearFit:
        x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
        if len(x) < 2:
            raise ValueError(f"A linear fit needs at least 2 points, got {len(x)}")
        result = stats.linregress(x, y)
        r_squared = float(result.rvalue ** 2) if np.isfinite(result.rvalue) else 0.0
        return LinearFit(float(result.slope), float(result.intercept), r_squared, len(x))

    @staticmethod
    def bootstrap_se(
        data,
        statistic: Callable[..., float] = np.mean,
        n_resamples: int = 999,
        seed: int = 0,
    ) -> float:
        """Bootstrap standard error of `statistic`, which must accept an `axis` keyword"""
        data = np.asarray(data, dtype=np.float64)
        if len(data) < 2 or np.all(data == data[0]):
            return 0.0
        result = stats.bootstrap(
            (data,),
            statistic,
            n_resamples=n_resamples,
            method="percentile",
            random_state=np.random.default_rng(seed),
        )
        return float(result.standard_error)

    @staticmethod
    def mann_kendall_decreasing(levels, values) -> float:
        """One-sided Kendall p-value for a decreasing trend of values in levels; exact unless levels tie"""
        if len(values) < 3:
            return 1.0
        tied = len(set(levels)) < len(levels) or len(set(values)) < len(values)
        result = stats.kendalltau(levels, values, alternative="less", method="asymptotic" if tied else "exact")
        return float(result.pvalue) if np.isfinite(result.pvalue) else 1.0

    @staticmethod
    def count_violations(values, increasing: bool) -> int:
        """Adjacent pairs that break strict monotonicity"""
        values = np.asarray(values, dtype=np.float64)
        steps = np.diff(values)
        broken = steps <= 0 if increasing else steps >= 0
        return int(np.sum(broken | ~np.isfinite(steps)))
