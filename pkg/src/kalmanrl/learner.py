"""On-line control with temporal-difference learning of a quadratic value.

The controller acts greedily with respect to ``V(x) = x'Pi x + b`` and after
every transition moves ``Pi`` along the gradient of ``V``:

    delta = target - V(x)
    Pi   <- Pi + alpha * delta * x x'
    b    <- b + alpha * delta            (when bias tracking is on)

with ``target = c(x, u) + V(x')`` for a continuing step and
``target = c_f(x)`` when the episode stops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ModelError
from .model import CostModel, LinearSystem
from .planner import greedy_gain_info
from .sim import (CERTAINTY_EQUIVALENT, FULLY_OBSERVED, EpisodeTrace, RngStream, Transition,
                  _check_mode, episode_steps, noise_factors)

__all__ = [
    "ValueEstimate", "Transition", "LearningSchedule", "EpisodeRecord", "LearnResult",
    "value_of", "greedy_action", "td_error", "td_update", "learn",
    "FULLY_OBSERVED", "CERTAINTY_EQUIVALENT",
]


@dataclass(frozen=True, eq=False)
class ValueEstimate:
    Pi: np.ndarray
    bias: float = 0.0

    @classmethod
    def zeros(cls, n: int) -> "ValueEstimate":
        return cls(np.zeros((n, n)), 0.0)


@dataclass(frozen=True)
class LearningSchedule:
    """Step sizes ``alpha_t = alpha0 * decay_c / (decay_c + t)`` and exploration settings.

    ``restart_cov`` of ``None`` means episodes start from ``N(x1_mean, Sigma1)``.

    ``max_step`` (off by default) caps ``alpha * |phi(x)|^2``, where
    ``phi(x)`` is the feature vector of the update: the entries of ``x x'``,
    plus a constant 1 when the bias is tracked. A single update moves the
    estimate at ``x`` by ``alpha * delta * |phi(x)|^2``, so values above 2
    overshoot the target; the plain schedule does this for large ``x``.
    """

    alpha0: float = 0.05
    decay_c: float = 1000.0
    explore_sigma: float = 0.1
    restart_cov: np.ndarray | None = None
    max_step: float | None = None

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not self.decay_c > 0:
            raise ValueError("decay_c must be positive")
        if not self.explore_sigma >= 0:
            raise ValueError("explore_sigma must be nonnegative")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError("max_step must be positive")

    def alpha(self, t: int) -> float:
        return self.alpha0 * self.decay_c / (self.decay_c + t)

    def step_size(self, t: int, x: np.ndarray, track_bias: bool = True) -> float:
        a = self.alpha(t)
        if self.max_step is None:
            return a
        sq = float(x @ x) ** 2 + (1.0 if track_bias else 0.0)
        return min(a, self.max_step / sq) if sq > 0 else a


def value_of(v: ValueEstimate, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (v.Pi.shape[0],):
        raise DimensionError(f"state has shape {x.shape}, expected ({v.Pi.shape[0]},)", name="x")
    return float(x @ v.Pi @ x) + v.bias


def greedy_action(v: ValueEstimate, x, sys: LinearSystem, cost: CostModel,
                  explore_sigma: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """``-L(Pi) x`` plus ``N(0, explore_sigma^2 I)`` exploration noise.

    No random numbers are drawn when ``explore_sigma`` is zero.
    """
    L, _ = greedy_gain_info(v.Pi, sys, cost)
    u = -(L @ np.asarray(x, dtype=np.float64))
    if explore_sigma > 0:
        if rng is None:
            raise ValueError("an rng is required when explore_sigma > 0")
        u = u + explore_sigma * rng.standard_normal(u.shape[0])
    return u


def td_error(tr: Transition, v: ValueEstimate) -> float:
    """Target minus estimate, for both continuing and terminal transitions."""
    if tr.stopped:
        return tr.final_cost - value_of(v, tr.x)
    return tr.cost + value_of(v, tr.x_next) - value_of(v, tr.x)


def td_update(v: ValueEstimate, tr: Transition, alpha: float,
              track_bias: bool = True) -> ValueEstimate:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    delta = td_error(tr, v)
    if delta == 0.0:
        return v
    x = np.asarray(tr.x, dtype=np.float64)
    step = alpha * delta
    Pi = v.Pi + step * np.outer(x, x)
    bias = v.bias + step if track_bias else v.bias
    return ValueEstimate(Pi, bias)


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    length: int
    total_cost: float
    pi_error: float


@dataclass(eq=False)
class LearnResult:
    value: ValueEstimate
    curve: list[EpisodeRecord] = field(default_factory=list)
    fallback_events: int = 0
    transitions: int = 0
    deltas: list[float] | None = None

    def __iter__(self):
        # unpacks as (value, curve)
        return iter((self.value, self.curve))


class _GreedyAgent:
    """Greedy policy reading the current estimate on every call."""

    def __init__(self, v, sys, cost, explore_sigma, gen):
        self.v = v
        self.sys = sys
        self.cost = cost
        self.explore_sigma = explore_sigma
        self.gen = gen
        self.fallbacks = 0

    def __call__(self, x):
        L, fell_back = greedy_gain_info(self.v.Pi, self.sys, self.cost)
        self.fallbacks += fell_back
        u = -(L @ x)
        if self.explore_sigma > 0:
            u = u + self.explore_sigma * self.gen.standard_normal(u.shape[0])
        return u


def _require_full_observation(sys: LinearSystem):
    if sys.H.shape != (sys.n, sys.n) or not np.array_equal(sys.H, np.eye(sys.n)):
        raise ModelError("fully-observed mode requires H = I", name="H")
    if np.any(sys.E != 0):
        raise ModelError("fully-observed mode requires E = 0", name="E")


def learn(sys: LinearSystem, cost: CostModel, schedule: LearningSchedule,
          mode: str = FULLY_OBSERVED, episodes: int = 1000, seed: int = 0, *,
          v0: ValueEstimate | None = None, track_bias: bool = True,
          oracle: np.ndarray | None = None, max_transitions: int | None = None,
          record_deltas: bool = False) -> LearnResult:
    """Interleave greedy control and TD updates over ``episodes`` episodes.

    Episode ``i`` draws from ``RngStream(seed, i)``. The step size uses the
    global transition counter ``t`` (starting at 0). If ``max_transitions``
    is reached mid-episode the run stops there and the partial episode is
    left out of the curve. ``oracle``, if given, is the reference ``Pi*``
    for the ``pi_error`` column; otherwise that column is NaN.
    """
    _check_mode(mode)
    if episodes < 0:
        raise ValueError("episodes must be nonnegative")
    if mode == FULLY_OBSERVED:
        _require_full_observation(sys)
    v = ValueEstimate.zeros(sys.n) if v0 is None else ValueEstimate(
        np.array(v0.Pi, dtype=np.float64), float(v0.bias))
    if v.Pi.shape != (sys.n, sys.n):
        raise DimensionError(f"initial Pi has shape {v.Pi.shape}, expected {(sys.n, sys.n)}", name="Pi")
    result = LearnResult(value=v, deltas=[] if record_deltas else None)
    factors = noise_factors(sys, schedule.restart_cov)
    t = 0
    for ep in range(episodes):
        gen = RngStream(seed, ep).generator()
        agent = _GreedyAgent(v, sys, cost, schedule.explore_sigma, gen)
        trace = EpisodeTrace()
        done = False
        for tr in episode_steps(sys, cost, agent, mode, gen, schedule.restart_cov, trace, factors):
            if record_deltas:
                result.deltas.append(td_error(tr, v))
            v = td_update(v, tr, schedule.step_size(t, tr.x, track_bias), track_bias)
            agent.v = v
            t += 1
            if max_transitions is not None and t >= max_transitions:
                done = not tr.stopped
                break
        result.fallback_events += agent.fallbacks
        if done:
            break
        err = float(np.linalg.norm(v.Pi - oracle)) if oracle is not None else float("nan")
        result.curve.append(EpisodeRecord(ep, trace.length, trace.total_cost, err))
        if max_transitions is not None and t >= max_transitions:
            break
    result.value = v
    result.transitions = t
    return result
