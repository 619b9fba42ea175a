"""Off-line reference solutions.

``riccati_backward`` solves the fixed-horizon problem by the classical
backward recursion. ``stationary_pi`` finds the time-independent value matrix
of the geometric-stopping problem by iterating its Bellman operator. Both
serve as ground truth for the on-line learner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergenceError, NotPDInnerMatrixError
from .model import CostModel, LinearSystem, symmetrize


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Cost-to-go matrices ``S[t-1] = S_t`` (t = 1..N) and gains ``L[t-1] = L_t`` (t = 1..N-1)."""

    S: list[np.ndarray]
    L: list[np.ndarray]

    @property
    def horizon(self) -> int:
        return len(self.S)


@dataclass(frozen=True, eq=False)
class StationaryValue:
    Pi: np.ndarray
    bias: float
    iterations: int
    residual: float


def _pd_solve(M: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve M X = B for symmetric PD ``M``; LinAlgError if M is not PD."""
    L = np.linalg.cholesky(M)
    return np.linalg.solve(L.T, np.linalg.solve(L, B))


def riccati_backward(sys: LinearSystem, cost: CostModel, N: int) -> RiccatiSolution:
    """Backward recursion from ``S_N = Qf``.

        L_t = (G' S_{t+1} G + R)^-1 G' S_{t+1} F
        S_t = Q + F' S_{t+1} F - F' S_{t+1} G L_t

    The same ``Q`` is used at every non-final step.
    """
    if N < 1:
        raise ValueError(f"horizon N must be >= 1, got {N}")
    F, G, Q, R = sys.F, sys.G, cost.Q, cost.R
    S = [None] * N
    L = [None] * (N - 1)
    S_next = symmetrize(cost.Qf)
    S[N - 1] = S_next
    for t in range(N - 2, -1, -1):
        GS = G.T @ S_next
        Lt = _pd_solve(symmetrize(GS @ G + R), GS @ F)
        St = Q + F.T @ S_next @ F - F.T @ S_next @ G @ Lt
        S_next = symmetrize(St)
        S[t] = S_next
        L[t] = Lt
    return RiccatiSolution(S=S, L=L)


def greedy_gain_info(Pi: np.ndarray, sys: LinearSystem, cost: CostModel,
                     fallback: bool = True) -> tuple[np.ndarray, bool]:
    """Greedy feedback gain and whether the regularized fallback was used.

    If ``R + G' Pi G`` fails Cholesky factorization, ``lam * I`` with
    ``lam = 1e-10 * |trace|`` is added and the solve is retried once.
    """
    GP = sys.G.T @ Pi
    M = symmetrize(cost.R + GP @ sys.G)
    B = GP @ sys.F
    try:
        return _pd_solve(M, B), False
    except np.linalg.LinAlgError:
        if not fallback:
            raise NotPDInnerMatrixError(
                "R + G' Pi G is not positive definite; Pi is too indefinite") from None
    lam = 1e-10 * abs(np.trace(M))
    try:
        return _pd_solve(M + lam * np.eye(M.shape[0]), B), True
    except np.linalg.LinAlgError:
        raise NotPDInnerMatrixError(
            "R + G' Pi G is not positive definite even after regularization") from None


def greedy_gain(Pi: np.ndarray, sys: LinearSystem, cost: CostModel) -> np.ndarray:
    """L(Pi) = (R + G' Pi G)^-1 G' Pi F; the greedy control is ``u = -L x``.

    This minimizes ``u'Ru + (Fx + Gu)' Pi (Fx + Gu)`` over ``u``.
    """
    return greedy_gain_info(Pi, sys, cost)[0]


def bellman_operator(Pi: np.ndarray, sys: LinearSystem, cost: CostModel) -> np.ndarray:
    """One application of the stopping-probability Bellman operator to ``x'Pi x``.

        T(Pi) = p Qf + (1-p) (Q + F'Pi F - F'Pi G (R + G'Pi G)^-1 G'Pi F)

    The state-independent noise term is dropped; see ``noise_bias``.

    Raises
    ------
    NotPDInnerMatrixError
        If ``R + G' Pi G`` is not positive definite.
    """
    p = cost.p
    F, G = sys.F, sys.G
    PF = Pi @ F
    M = symmetrize(cost.R + G.T @ Pi @ G)
    try:
        Lx = _pd_solve(M, G.T @ PF)
    except np.linalg.LinAlgError:
        raise NotPDInnerMatrixError(
            "R + G' Pi G is not positive definite; Pi is too indefinite") from None
    inner = cost.Q + F.T @ PF - PF.T @ G @ Lx
    return symmetrize(p * cost.Qf + (1.0 - p) * inner)


def noise_bias(Pi: np.ndarray, sys: LinearSystem, cost: CostModel) -> float:
    """Constant part of the cost-to-go due to process noise: ((1-p)/p) tr(Pi W)."""
    p = cost.p
    return float((1.0 - p) / p * np.trace(Pi @ sys.W))


def stationary_pi(sys: LinearSystem, cost: CostModel, tol: float = 1e-10,
                  max_iter: int = 100_000) -> StationaryValue:
    """Fixed point of ``bellman_operator`` by successive approximation from ``Qf``.

    Stops once ``||T(Pi) - Pi||_F <= tol * max(1, ||Pi||_F)``. If the residual
    fails to decrease for 10 consecutive iterations, the update switches to
    the averaged form ``(Pi + T(Pi)) / 2``.

    Raises
    ------
    NoConvergenceError
        After ``max_iter`` iterations; carries the last residual.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    Pi = symmetrize(np.array(cost.Qf, dtype=np.float64))
    damped = False
    stalled = 0
    prev = np.inf
    residual = np.inf
    for it in range(1, max_iter + 1):
        T = bellman_operator(Pi, sys, cost)
        residual = float(np.linalg.norm(T - Pi))
        if not np.isfinite(residual):
            break
        if residual <= tol * max(1.0, float(np.linalg.norm(Pi))):
            return StationaryValue(Pi=Pi, bias=noise_bias(Pi, sys, cost),
                                   iterations=it, residual=residual)
        stalled = stalled + 1 if residual >= prev else 0
        if stalled >= 10:
            damped = True
        prev = residual
        Pi = 0.5 * (Pi + T) if damped else T
    raise NoConvergenceError(
        f"fixed-point iteration did not converge in {max_iter} iterations "
        f"(last residual {residual:.3g})", iterations=max_iter, residual=residual)
