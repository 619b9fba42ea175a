"""Episode simulation with geometric stopping, and Monte-Carlo policy evaluation.

Random numbers come from counter-based Philox generators keyed by
``(seed, stream_id)``. Within one step the draws happen in a fixed order:

1. one uniform for the stop coin (stop when it is ``< p``);
2. if not stopped: ``k`` standard normals for the observation noise,
   then whatever the policy draws, then ``n`` standard normals for the
   process noise.

An episode starts with ``n`` standard normals for the initial state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import DimensionError, EpisodeCapError, NotPSDError
from .estimator import FilterState, kalman_init, kalman_step
from .model import CostModel, LinearSystem, symmetrize

FULLY_OBSERVED = "fully-observed"
CERTAINTY_EQUIVALENT = "certainty-equivalent"
MODES = (FULLY_OBSERVED, CERTAINTY_EQUIVALENT)

MAX_EPISODE_LENGTH = 10**7
BLOCK_SIZE = 8192

Policy = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def psd_sqrt(cov) -> np.ndarray:
    """Symmetric PSD square root ``C`` with ``C @ C == cov``.

    Negative eigenvalues within ``1e-10 * ||cov||`` are clamped to zero,
    so rank-deficient covariances are fine.
    """
    S = symmetrize(np.asarray(cov, dtype=np.float64))
    if S.size == 0:
        return S
    w, V = np.linalg.eigh(S)
    if w.min() < -1e-10 * max(np.abs(w).max(), 0.0):
        raise NotPSDError(f"covariance is not PSD (smallest eigenvalue {w.min():.6g})",
                          name="cov", eigenvalue=float(w.min()))
    return symmetrize((V * np.sqrt(np.clip(w, 0.0, None))) @ V.T)


def sample_gaussian(rng, mean, cov) -> np.ndarray:
    """Draw ``mean + C z`` with ``C = psd_sqrt(cov)`` and ``z`` standard normal."""
    gen = _as_generator(rng)
    mean = np.asarray(mean, dtype=np.float64)
    C = psd_sqrt(cov)
    if C.shape != (mean.shape[0], mean.shape[0]):
        raise DimensionError(f"covariance shape {C.shape} does not match mean {mean.shape}", name="cov")
    z = gen.standard_normal(mean.shape[0])
    return mean + C @ z


@dataclass(frozen=True, slots=True)
class Transition:
    """One step of experience.

    A terminal transition has ``stopped=True``, no ``x_next`` and carries
    the final cost paid on the true state.
    """

    x: np.ndarray
    u: np.ndarray | None
    cost: float
    x_next: np.ndarray | None = None
    stopped: bool = False
    final_cost: float | None = None

    def __post_init__(self):
        if self.stopped != (self.x_next is None) or self.stopped != (self.final_cost is not None):
            raise ValueError("terminal transitions need final_cost and no x_next; "
                             "non-terminal ones need x_next and no final_cost")


@dataclass(eq=False)
class EpisodeTrace:
    transitions: list[Transition] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    observations: list[np.ndarray] = field(default_factory=list)
    total_cost: float = 0.0

    @property
    def length(self) -> int:
        return len(self.transitions)


class LinearPolicy:
    """``u = -gain @ x``, vectorized over leading axes of ``x``."""

    def __init__(self, gain):
        self.gain = np.array(gain, dtype=np.float64)
        if self.gain.ndim != 2:
            raise DimensionError("gain must be an m x n matrix", name="gain")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return -(x @ self.gain.T)


class _ZeroPolicy:
    def __init__(self, m: int):
        self.m = m

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(x.shape[:-1] + (self.m,))


def zero_policy(m: int) -> Policy:
    """The policy that never actuates."""
    return _ZeroPolicy(m)


def _check_mode(mode: str):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def _initial_sqrt(sys: LinearSystem, restart_cov) -> np.ndarray:
    cov = sys.Sigma1 if restart_cov is None else np.asarray(restart_cov, dtype=np.float64)
    if cov.shape != (sys.n, sys.n):
        raise DimensionError(f"restart_cov has shape {cov.shape}, expected {(sys.n, sys.n)}",
                             name="restart_cov")
    return psd_sqrt(cov)


def noise_factors(sys: LinearSystem, restart_cov=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Square roots of W, E and the restart covariance, in that order."""
    return psd_sqrt(sys.W), psd_sqrt(sys.E), _initial_sqrt(sys, restart_cov)


def episode_steps(sys: LinearSystem, cost: CostModel, policy: Policy, mode: str,
                  gen: np.random.Generator, restart_cov=None,
                  trace: EpisodeTrace | None = None, factors=None) -> Iterator[Transition]:
    """Generate the transitions of one episode lazily.

    The policy is called only when the next step is requested, so a caller
    that changes the policy's parameters between transitions sees the change
    immediately. ``trace``, if given, is filled in as the episode runs.
    ``factors`` may carry a precomputed ``noise_factors(sys, restart_cov)``.
    """
    _check_mode(mode)
    observed = mode == FULLY_OBSERVED
    F, G, H = sys.F, sys.G, sys.H
    Q, R, Qf, p = cost.Q, cost.R, cost.Qf, cost.p
    sqrt_w, sqrt_e, sqrt_0 = noise_factors(sys, restart_cov) if factors is None else factors
    n, k = sys.n, sys.k

    x = sys.x1_mean + sqrt_0 @ gen.standard_normal(n)
    fs: FilterState | None = None if observed else kalman_init(sys)
    total = 0.0
    for _ in range(MAX_EPISODE_LENGTH):
        xl = x if observed else fs.xhat
        if trace is not None:
            trace.states.append(x)
        if gen.random() < p:
            cf = float(x @ Qf @ x)
            total += cf
            tr = Transition(x=xl, u=None, cost=0.0, stopped=True, final_cost=cf)
            if trace is not None:
                trace.transitions.append(tr)
                trace.total_cost = total
            yield tr
            return
        y = H @ x + sqrt_e @ gen.standard_normal(k)
        u = np.asarray(policy(xl), dtype=np.float64)
        c = float(x @ Q @ x + u @ R @ u)
        total += c
        x = F @ x + G @ u + sqrt_w @ gen.standard_normal(n)
        if observed:
            x_next = x
        else:
            fs = kalman_step(fs, u, y, sys)
            x_next = fs.xhat
        tr = Transition(x=xl, u=u, cost=c, x_next=x_next)
        if trace is not None:
            trace.observations.append(y)
            trace.transitions.append(tr)
            trace.total_cost = total
        yield tr
    raise EpisodeCapError(f"episode exceeded {MAX_EPISODE_LENGTH} steps; is p nearly 0?")


def simulate_episode(sys: LinearSystem, cost: CostModel, policy: Policy,
                     mode: str = FULLY_OBSERVED, rng=None, restart_cov=None) -> EpisodeTrace:
    """Run one episode to completion.

    The initial state is drawn from ``N(x1_mean, restart_cov)``, with
    ``restart_cov`` defaulting to ``Sigma1``. At every step the stop coin is
    tossed before acting, so the final cost is paid on the state at the toss
    and a length-1 episode never acts.
    """
    gen = _as_generator(RngStream(0) if rng is None else rng)
    trace = EpisodeTrace()
    for _ in episode_steps(sys, cost, policy, mode, gen, restart_cov, trace):
        pass
    return trace


def simulate_batch(sys: LinearSystem, cost: CostModel, policy: Policy, mode: str,
                   episodes: int, seed: int, restart_cov=None,
                   block_size: int = BLOCK_SIZE) -> tuple[np.ndarray, np.ndarray]:
    """Total costs and lengths of ``episodes`` independent episodes.

    Episodes are simulated in vectorized blocks of ``block_size``; block
    ``j`` draws from ``RngStream(seed, j)``, so results do not depend on how
    blocks are scheduled. ``policy`` must accept a batch of states with
    shape ``(B, n)`` and return controls of shape ``(B, m)``.
    """
    _check_mode(mode)
    if episodes < 0:
        raise ValueError("episodes must be nonnegative")
    observed = mode == FULLY_OBSERVED
    F, G, H = sys.F, sys.G, sys.H
    Q, R, Qf, p = cost.Q, cost.R, cost.Qf, cost.p
    sqrt_w, sqrt_e, sqrt_0 = noise_factors(sys, restart_cov)
    n, k = sys.n, sys.k

    costs = np.zeros(episodes)
    lengths = np.zeros(episodes, dtype=np.int64)
    for j, start in enumerate(range(0, episodes, block_size)):
        gen = RngStream(seed, j).generator()
        B = min(block_size, episodes - start)
        idx = np.arange(start, start + B)
        x = sys.x1_mean + gen.standard_normal((B, n)) @ sqrt_0
        fs = None if observed else FilterState(np.tile(sys.x1_mean, (B, 1)), symmetrize(sys.Sigma1))
        steps = 0
        while idx.size:
            steps += 1
            if steps > MAX_EPISODE_LENGTH:
                raise EpisodeCapError(f"episode exceeded {MAX_EPISODE_LENGTH} steps; is p nearly 0?")
            stop = gen.random(idx.size) < p
            lengths[idx] += 1
            if stop.any():
                xs = x[stop]
                costs[idx[stop]] += np.einsum("bi,ij,bj->b", xs, Qf, xs)
                keep = ~stop
                idx, x = idx[keep], x[keep]
                if fs is not None:
                    fs = FilterState(fs.xhat[keep], fs.Sigma, fs.t)
                if not idx.size:
                    break
            A = idx.size
            y = x @ H.T + gen.standard_normal((A, k)) @ sqrt_e
            u = np.asarray(policy(x if observed else fs.xhat), dtype=np.float64).reshape(A, -1)
            costs[idx] += (np.einsum("bi,ij,bj->b", x, Q, x)
                           + np.einsum("bi,ij,bj->b", u, R, u))
            x = x @ F.T + u @ G.T + gen.standard_normal((A, n)) @ sqrt_w
            if fs is not None:
                fs = kalman_step(fs, u, y, sys)
    return costs, lengths


def evaluate_policy(sys: LinearSystem, cost: CostModel, policy: Policy,
                    mode: str = FULLY_OBSERVED, episodes: int = 10_000, seed: int = 0,
                    restart_cov=None) -> tuple[float, float]:
    """Monte-Carlo mean total cost and its standard error."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    costs, _ = simulate_batch(sys, cost, policy, mode, episodes, seed, restart_cov)
    return summarize(costs)


def summarize(costs: np.ndarray) -> tuple[float, float]:
    if np.all(costs == costs[0]):
        return float(costs[0]), 0.0
    return float(costs.mean()), float(costs.std(ddof=1) / np.sqrt(costs.size))
