"""Decision rules: GraphMOSS, BARE and reference baselines.

Every policy follows the same small contract::

    policy.reset(d, n, rng)      # before the first round
    k = policy.select(t)         # t = 1..n
    policy.observe(t, feedback)  # InfluenceSample or an int count
    policy.report()              # dict of end-of-episode statistics

``required_feedback`` says which :class:`FeedbackMode` the policy needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import FeedbackMode, InfluenceSample
from .errors import ConfigurationError, UsageError


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _reward_of(feedback) -> int:
    if isinstance(feedback, InfluenceSample):
        return len(feedback.influenced)
    return int(feedback)


class Policy:
    required_feedback = FeedbackMode.COUNT_ONLY
    name = "policy"

    def reset(self, d: int, n: int, rng=None):
        self.d = d
        self.horizon = n
        self.rng = _as_rng(rng)
        return self

    def select(self, t: int) -> int:
        raise NotImplementedError

    def observe(self, t: int, feedback) -> None:
        pass

    def report(self) -> dict:
        return {}


# ---------------------------------------------------------------------------
# Baselines


class UniformRandom(Policy):
    name = "uniform_random"

    def select(self, t):
        return int(self.rng.integers(self.d))


class RoundRobin(Policy):
    name = "round_robin"

    def select(self, t):
        return (t - 1) % self.d


class FixedOracle(Policy):
    """Always plays ``node`` (normally an argmax of the influence vector)."""

    name = "fixed_oracle"

    def __init__(self, node: int):
        self.node = int(node)

    def reset(self, d, n, rng=None):
        if not (0 <= self.node < d):
            raise ConfigurationError(f"oracle node {self.node} out of range for d={d}")
        return super().reset(d, n, rng)

    def select(self, t):
        return self.node


# ---------------------------------------------------------------------------
# GraphMOSS


@dataclass
class ArmStats:
    """Running reward statistics for a set of arms.

    Sums are kept exactly (rewards are integers) so the mean matches a
    recomputation from the reward log bit for bit.
    """

    pulls: np.ndarray
    sums: np.ndarray
    sumsq: np.ndarray

    @classmethod
    def empty(cls, size: int) -> "ArmStats":
        return cls(np.zeros(size, dtype=np.int64), np.zeros(size), np.zeros(size))

    def update(self, arm: int, reward: float) -> None:
        self.pulls[arm] += 1
        self.sums[arm] += reward
        self.sumsq[arm] += reward * reward

    @property
    def mean(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.pulls > 0, self.sums / np.maximum(self.pulls, 1), 0.0)

    @property
    def var(self) -> np.ndarray:
        """Biased (divide-by-T) empirical variance; 0 for unpulled arms."""
        pulls = np.maximum(self.pulls, 1)
        mean = self.sums / pulls
        return np.maximum(self.sumsq / pulls - mean * mean, 0.0)


def graphmoss_confidence(sigma, pulls, n: int, d_eff: int):
    """Bernstein-style MOSS width.

    ``2 sigma sqrt(L / T) + 2 L / T`` with ``L = max(log(n / (d_eff T)), 0)``.
    Works elementwise on arrays.
    """
    pulls_arr = np.asarray(pulls, dtype=np.float64)
    if np.any(pulls_arr < 1):
        raise UsageError("confidence width needs at least one pull per arm")
    log_term = np.maximum(np.log(n / (d_eff * pulls_arr)), 0.0)
    width = 2.0 * np.asarray(sigma) * np.sqrt(log_term / pulls_arr) + 2.0 * log_term / pulls_arr
    return float(width) if np.ndim(width) == 0 else width


def graphmoss_select(stats: ArmStats, n: int, d_eff: int, t: int) -> int:
    """Local arm index to play at local round ``t``.

    Round-robin until every arm has two pulls, then the argmax of
    ``mean + width`` with lowest-index tie-breaking.
    """
    if t <= 2 * d_eff:
        return (t - 1) % d_eff
    sigma = np.sqrt(stats.var)
    index = stats.mean + graphmoss_confidence(sigma, stats.pulls, n, d_eff)
    return int(np.argmax(index))


class GraphMOSS(Policy):
    """MOSS with a variance-aware width, played on ``arms`` (default: all nodes).

    Only ``|S|`` is used, so count-only feedback suffices.
    """

    name = "graphmoss"

    def __init__(self, arms=None):
        self.arms = None if arms is None else np.asarray(arms, dtype=np.int64)

    def reset(self, d, n, rng=None):
        super().reset(d, n, rng)
        if self.arms is None:
            self._nodes = np.arange(d)
        else:
            self._nodes = self.arms
            if len(self._nodes) == 0:
                raise ConfigurationError("GraphMOSS needs at least one arm")
        self.d_eff = len(self._nodes)
        self.stats = ArmStats.empty(self.d_eff)
        self._last = None
        return self

    def select(self, t):
        self._last = graphmoss_select(self.stats, self.horizon, self.d_eff, t)
        return int(self._nodes[self._last])

    def observe(self, t, feedback):
        self.stats.update(self._last, _reward_of(feedback))


# ---------------------------------------------------------------------------
# BARE


@dataclass
class RevealStats:
    """Global-exploration state of BARE.

    ``t`` is the exploration counter: it starts at 1 and is incremented after
    every exploration round, so after ``m`` rounds ``t = m + 1``.
    """

    d: int
    n: int
    c: float
    counts: np.ndarray
    t: int
    r_dual: np.ndarray
    sigma_star: float
    width: float
    kept: np.ndarray
    d_star: int
    t_star: int | None = None

    @classmethod
    def initial(cls, d: int, n: int, c: float = 1.0) -> "RevealStats":
        return cls(
            d=d,
            n=n,
            c=c,
            counts=np.zeros(d, dtype=np.int64),
            t=1,
            r_dual=np.zeros(d),
            sigma_star=float(d),
            width=math.inf,
            kept=np.ones(d, dtype=bool),
            d_star=d,
        )

    @property
    def log_nd(self) -> float:
        return math.log(self.n * self.d)

    @property
    def kept_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.kept)


def kept_set(r_dual: np.ndarray, width: float) -> np.ndarray:
    """Mask of nodes whose estimated dual gap is at most ``width``."""
    return r_dual.max() - r_dual <= width


def bare_explore_update(state: RevealStats, sample) -> RevealStats:
    """Fold one uniformly-sampled revealed set into ``state`` (in place).

    The running average ``t/(t+1) r + d/(t+1) S(k)`` starting from 0 equals
    ``d * count_k / (t+1)``; the count form is used so the estimate is exact.
    """
    influenced = sample.influenced if isinstance(sample, InfluenceSample) else np.asarray(sample)
    state.counts[influenced] += 1
    t_next = state.t + 1
    d, c = state.d, state.c
    dlog = d * state.log_nd
    state.r_dual = d * state.counts / t_next
    top = float(state.r_dual.max())
    state.sigma_star = math.sqrt(top + c * 8.0 * dlog / t_next)
    state.width = c * (8.0 * state.sigma_star * math.sqrt(dlog / t_next) + 40.0 * dlog / t_next)
    state.kept = kept_set(state.r_dual, state.width)
    state.d_star = int(np.count_nonzero(state.kept))
    state.t = t_next
    return state


def bare_stopping_test(state: RevealStats) -> bool:
    """True when global exploration should stop at the current counter."""
    t = state.t
    lhs = t * (state.sigma_star - state.c * 4.0 * math.sqrt(state.d * state.log_nd / t))
    return lhs > math.sqrt(state.d_star * state.n)


class Bare(Policy):
    """Global exploration by uniform sampling, then a bandit on the kept nodes.

    ``c`` scales every deviation term of the exploration phase. ``bandit``
    builds the phase-two policy from a sequence of graph nodes.
    """

    required_feedback = FeedbackMode.FULL_SET
    name = "bare"

    def __init__(self, c: float = 1.0, bandit=GraphMOSS):
        if c <= 0:
            raise ConfigurationError(f"confidence scale must be positive, got {c}")
        self.c = float(c)
        self.bandit = bandit

    def reset(self, d, n, rng=None):
        super().reset(d, n, rng)
        self.state = RevealStats.initial(d, n, self.c)
        self.exploring = True
        self.inner = None
        self._offset = 0
        return self

    def _start_bandit(self, t):
        self.exploring = False
        self.state.t_star = self.state.t
        self._offset = t - 1
        self.inner = self.bandit(self.state.kept_nodes)
        self.inner.reset(self.d, self.horizon - self._offset, self.rng)

    def select(self, t):
        if self.exploring and bare_stopping_test(self.state):
            self._start_bandit(t)
        if self.exploring:
            return int(self.rng.integers(self.d))
        return self.inner.select(t - self._offset)

    def observe(self, t, feedback):
        if self.exploring:
            if not isinstance(feedback, InfluenceSample):
                raise ConfigurationError("BARE needs the revealed set (full_set feedback)")
            bare_explore_update(self.state, feedback)
        else:
            self.inner.observe(t - self._offset, feedback)

    def report(self):
        t_star = self.state.t_star if self.state.t_star is not None else self.horizon
        return {"T_star": t_star, "D_star": self.state.d_star}


POLICY_NAMES = ("graphmoss", "bare", "uniform_random", "fixed_oracle", "round_robin")
