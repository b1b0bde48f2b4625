"""The local-influence game: sampling revealed sets and running episodes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HarnessError, UsageError
from .graph_model import InfluenceMatrix


class FeedbackMode(str, enum.Enum):
    FULL_SET = "full_set"
    COUNT_ONLY = "count_only"


@dataclass(frozen=True)
class InfluenceSample:
    """Outcome of influencing ``chosen`` at ``round``: the revealed set."""

    chosen: int
    influenced: np.ndarray
    round: int = 0

    @property
    def reward(self) -> int:
        return len(self.influenced)


@dataclass(frozen=True)
class OracleStats:
    r: np.ndarray
    r_dual: np.ndarray
    r_star: float
    r_dual_star: float
    eps_star: float
    argmax_r: np.ndarray
    argmax_r_dual: np.ndarray


def _check_node(matrix: InfluenceMatrix, k) -> int:
    if not (0 <= k < matrix.d):
        raise UsageError(f"node {k} out of range for d={matrix.d}")
    return int(k)


def step(matrix: InfluenceMatrix, k: int, mode=FeedbackMode.FULL_SET, rng=None, round: int = 0):
    """Influence node ``k`` once.

    Every stored entry ``(j, p)`` of row ``k`` joins the revealed set with
    probability ``p``, using exactly one uniform draw per entry. Returns an
    :class:`InfluenceSample` under full-set feedback, else the count ``|S|``.
    """
    k = _check_node(matrix, k)
    lo, hi = matrix.indptr[k], matrix.indptr[k + 1]
    hits = rng.random(hi - lo) < matrix.probs[lo:hi]
    if FeedbackMode(mode) is FeedbackMode.COUNT_ONLY:
        return int(np.count_nonzero(hits))
    return InfluenceSample(k, matrix.indices[lo:hi][hits], round)


def _exact_group_sums(keys: np.ndarray, values: np.ndarray, size: int) -> np.ndarray:
    # correctly rounded sums, independent of summation order
    out = np.zeros(size)
    if len(values) == 0:
        return out
    order = np.argsort(keys, kind="stable")
    keys, values = keys[order], values[order]
    bounds = np.flatnonzero(np.diff(keys)) + 1
    starts = np.concatenate(([0], bounds))
    ends = np.concatenate((bounds, [len(keys)]))
    for s, e in zip(starts.tolist(), ends.tolist()):
        out[keys[s]] = math.fsum(values[s:e].tolist())
    return out


def influence(matrix: InfluenceMatrix) -> np.ndarray:
    """Row sums r_k: expected number of nodes influenced by k."""
    return _exact_group_sums(matrix.row_ids(), matrix.probs, matrix.d)


def dual_influence(matrix: InfluenceMatrix) -> np.ndarray:
    """Column sums: expected number of nodes that influence k."""
    return _exact_group_sums(matrix.indices, matrix.probs, matrix.d)


def oracle_stats(matrix: InfluenceMatrix) -> OracleStats:
    r = influence(matrix)
    r_dual = dual_influence(matrix)
    r_star = float(r.max())
    r_dual_star = float(r_dual.max())
    argmax_r = np.flatnonzero(r == r_star)
    argmax_dual = np.flatnonzero(r_dual == r_dual_star)
    eps_star = r_star - float(r[argmax_dual].max())
    return OracleStats(r, r_dual, r_star, r_dual_star, eps_star, argmax_r, argmax_dual)


@dataclass
class RegretTrace:
    """Per-round record of one episode.

    ``regret`` is the cumulative pseudo-regret, ``reward`` the cumulative
    realized reward. ``info`` carries whatever the policy reports at the end
    (BARE reports ``T_star`` and ``D_star``).
    """

    regret: np.ndarray
    reward: np.ndarray
    chosen: np.ndarray | None = None
    seed: int | None = None
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.regret)

    def realized_regret(self, r_star: float) -> np.ndarray:
        return r_star * np.arange(1, len(self.reward) + 1) - self.reward


def run_episode(
    matrix: InfluenceMatrix,
    policy,
    n: int,
    mode=FeedbackMode.FULL_SET,
    rng=None,
    stats: OracleStats | None = None,
    seed: int | None = None,
    keep_choices: bool = True,
) -> RegretTrace:
    """Play ``n`` rounds of ``policy`` against ``matrix``.

    ``rng`` drives the environment; the policy must already be reset (it owns
    its own stream). Pseudo-regret increments are ``r_star - r[k_t]``.
    """
    mode = FeedbackMode(mode)
    if policy.required_feedback is FeedbackMode.FULL_SET and mode is not FeedbackMode.FULL_SET:
        raise UsageError(f"{type(policy).__name__} needs full_set feedback, got {mode.value}")
    if n < 1:
        raise UsageError(f"horizon must be >= 1, got {n}")
    horizon = getattr(policy, "horizon", None)
    if horizon is not None and horizon != n:
        raise HarnessError(f"policy was reset for {horizon} rounds but the episode has {n}")
    if rng is None:
        rng = np.random.default_rng(seed)
    stats = stats or oracle_stats(matrix)
    r = stats.r
    d = matrix.d
    indptr, indices, probs = matrix.indptr, matrix.indices, matrix.probs
    count_only = mode is FeedbackMode.COUNT_ONLY

    chosen = np.empty(n, dtype=np.int64)
    rewards = np.empty(n, dtype=np.int64)
    for t in range(1, n + 1):
        k = policy.select(t)
        if k is None or not (0 <= k < d):
            raise HarnessError(f"policy returned invalid node {k!r} at round {t} of {n}")
        lo, hi = indptr[k], indptr[k + 1]
        hits = rng.random(hi - lo) < probs[lo:hi]
        if count_only:
            size = int(np.count_nonzero(hits))
            policy.observe(t, size)
        else:
            sample = InfluenceSample(int(k), indices[lo:hi][hits], t)
            size = len(sample.influenced)
            policy.observe(t, sample)
        chosen[t - 1] = k
        rewards[t - 1] = size

    gaps = stats.r_star - r[chosen]
    return RegretTrace(
        regret=np.cumsum(gaps),
        reward=np.cumsum(rewards).astype(np.float64),
        chosen=chosen if keep_choices else None,
        seed=seed,
        info=dict(policy.report()),
    )
