"""Exact problem-dependent quantities and aggregation of regret traces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import RegretTrace, dual_influence
from .errors import UsageError
from .graph_model import InfluenceMatrix

_CHUNK = 1 << 16


def _dual_vector(source) -> np.ndarray:
    if isinstance(source, InfluenceMatrix):
        return dual_influence(source)
    return np.asarray(source, dtype=np.float64)


class DualGapCounter:
    """Evaluates D(delta) = #{i : max r_dual - r_dual[i] <= delta} by bisection."""

    def __init__(self, source):
        r_dual = _dual_vector(source)
        self.d = len(r_dual)
        self.r_dual_star = float(r_dual.max())
        self.gaps = np.sort(self.r_dual_star - r_dual)

    def __call__(self, delta):
        counts = np.searchsorted(self.gaps, delta, side="right")
        return int(counts) if np.ndim(counts) == 0 else counts


def dual_gap_count(source, delta: float) -> int:
    """Number of nodes whose dual gap is at most ``delta`` (0 for negative delta)."""
    return DualGapCounter(source)(delta)


@dataclass(frozen=True)
class DetectableProfile:
    n: int
    T_star: int
    Delta_star: float
    D_star: int
    found: bool


def detectable_gap(T, r_dual_star: float, d: int, n: int):
    """Gap at scan position ``T``: 16 sqrt(r d L / T) + 144 d L / T, L = log(n d)."""
    log_nd = math.log(n * d)
    T = np.asarray(T, dtype=np.float64)
    return 16.0 * np.sqrt(r_dual_star * d * log_nd / T) + 144.0 * d * log_nd / T


def detectable_profile(source, n: int) -> DetectableProfile:
    """Detectable horizon, gap and dimension for horizon ``n``.

    Scans ``T = 1..n`` for the first ``T`` with
    ``T r* >= sqrt(D(gap(T)) n r*)`` where ``r*`` is the largest dual influence.
    Falls back to ``T = n, D = d`` when no ``T`` qualifies.
    """
    if n < 1:
        raise UsageError(f"horizon must be >= 1, got {n}")
    counter = source if isinstance(source, DualGapCounter) else DualGapCounter(source)
    d, r = counter.d, counter.r_dual_star
    if r == 0:
        return DetectableProfile(n, 1, float(detectable_gap(1, r, d, n)), d, True)
    for start in range(1, n + 1, _CHUNK):
        T = np.arange(start, min(start + _CHUNK, n + 1))
        gap = detectable_gap(T, r, d, n)
        dims = counter(gap)
        ok = T * r >= np.sqrt(dims * n * r)
        hits = np.flatnonzero(ok)
        if len(hits):
            i = hits[0]
            return DetectableProfile(n, int(T[i]), float(gap[i]), int(dims[i]), True)
    return DetectableProfile(n, n, float(detectable_gap(n, r, d, n)), d, False)


def dstar_curve(source, n_grid) -> list[DetectableProfile]:
    grid = [int(v) for v in n_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise UsageError("n grid must be ascending")
    counter = DualGapCounter(source)
    return [detectable_profile(counter, n) for n in grid]


@dataclass
class Aggregate:
    mean_regret: np.ndarray
    stderr_regret: np.ndarray
    mean_reward: np.ndarray
    trials: int
    mean_T_star: float | None = None
    sd_T_star: float | None = None
    mean_D_star: float | None = None
    sd_D_star: float | None = None


def _mean_sd(values):
    arr = np.asarray(values, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return float(arr.mean()), sd


def aggregate(traces: list[RegretTrace]) -> Aggregate:
    """Pointwise mean and standard error of the cumulative pseudo-regret."""
    if not traces:
        raise UsageError("nothing to aggregate")
    lengths = {len(tr) for tr in traces}
    if len(lengths) != 1:
        raise UsageError(f"traces have different lengths: {sorted(lengths)}")
    regret = np.vstack([tr.regret for tr in traces])
    reward = np.vstack([tr.reward for tr in traces])
    k = len(traces)
    stderr = np.zeros(regret.shape[1])
    if k > 1:
        varying = np.ptp(regret, axis=0) > 0
        stderr[varying] = regret[:, varying].std(axis=0, ddof=1) / math.sqrt(k)
    out = Aggregate(regret.mean(axis=0), stderr, reward.mean(axis=0), k)
    if all("T_star" in tr.info for tr in traces):
        out.mean_T_star, out.sd_T_star = _mean_sd([tr.info["T_star"] for tr in traces])
    if all("D_star" in tr.info for tr in traces):
        out.mean_D_star, out.sd_D_star = _mean_sd([tr.info["D_star"] for tr in traces])
    return out
