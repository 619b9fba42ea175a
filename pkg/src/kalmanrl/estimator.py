"""Kalman filter in one-step-ahead (predictor) form.

The estimate ``xhat_t`` is the mean of x_t given y_1..y_{t-1}; one update
consumes (u_t, y_t) and returns the estimate of x_{t+1}:

    K_t       = F S H' (H S H' + E)^-1
    xhat_{t+1} = F xhat_t + G u_t + K_t (y_t - H xhat_t)
    S_{t+1}   = W + F S F' - K_t H S F'
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularInnovationError
from .model import LinearSystem, symmetrize


@dataclass(frozen=True, eq=False)
class FilterState:
    """Estimate, its error covariance and the time index.

    ``xhat`` may carry leading batch axes (shape ``(..., n)``); the covariance
    is shared because it does not depend on the observed data.
    """

    xhat: np.ndarray
    Sigma: np.ndarray
    t: int = 1


def kalman_init(sys: LinearSystem) -> FilterState:
    return FilterState(xhat=sys.x1_mean.copy(), Sigma=symmetrize(sys.Sigma1), t=1)


def _chol_solve_right(B: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Return B S^-1 for symmetric PD ``S``, retrying once with jitter."""
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(S)
        try:
            L = np.linalg.cholesky(S + jitter * np.eye(S.shape[0]))
        except np.linalg.LinAlgError:
            raise SingularInnovationError(
                "innovation covariance H Sigma H' + E is singular; the observation "
                "model is degenerate") from None
    # B S^-1 = (S^-1 B')' = (L'^-1 L^-1 B')'
    Z = np.linalg.solve(L, B.T)
    return np.linalg.solve(L.T, Z).T


def kalman_gain(Sigma: np.ndarray, sys: LinearSystem) -> np.ndarray:
    """K = F Sigma H' (H Sigma H' + E)^-1."""
    S = symmetrize(sys.H @ Sigma @ sys.H.T + sys.E)
    return _chol_solve_right(sys.F @ Sigma @ sys.H.T, S)


def kalman_step(fs: FilterState, u, y, sys: LinearSystem) -> FilterState:
    """Advance the filter by one step using control ``u`` and observation ``y``.

    ``u`` and ``y`` may be batched along leading axes matching ``fs.xhat``.

    Raises
    ------
    SingularInnovationError
        If ``H Sigma H' + E`` cannot be factorized even after a
        ``1e-12 * trace`` jitter.
    """
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if u.shape[-1:] != (sys.m,):
        raise DimensionError(f"control has trailing dimension {u.shape[-1:]}, expected {sys.m}", name="u")
    if y.shape[-1:] != (sys.k,):
        raise DimensionError(f"observation has trailing dimension {y.shape[-1:]}, expected {sys.k}", name="y")
    Sigma = fs.Sigma
    K = kalman_gain(Sigma, sys)
    innov = y - fs.xhat @ sys.H.T
    xhat = fs.xhat @ sys.F.T + u @ sys.G.T + innov @ K.T
    Sigma_next = sys.W + sys.F @ Sigma @ sys.F.T - K @ sys.H @ Sigma @ sys.F.T
    return FilterState(xhat=xhat, Sigma=symmetrize(Sigma_next), t=fs.t + 1)


# --- batch CSV mode ---------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def filter_batch(rows, sys: LinearSystem):
    """Run the filter over ``(t, y, u)`` records.

    Yields ``(t, xhat, Sigma)`` starting with the initial state, then one
    record per consumed input row.
    """
    fs = kalman_init(sys)
    yield fs.t, fs.xhat, fs.Sigma
    for _, y, u in rows:
        fs = kalman_step(fs, u, y, sys)
        yield fs.t, fs.xhat, fs.Sigma


def read_filter_csv(text: str, sys: LinearSystem) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Parse rows ``t, y_1..y_k, u_1..u_m`` (header row required)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("filter input is empty; a header row is required") from None
    want = 1 + sys.k + sys.m
    if len(header) != want:
        raise DimensionError(
            f"filter input header has {len(header)} columns, expected {want} "
            f"(t, y_1..y_{sys.k}, u_1..u_{sys.m})", name="filter.input")
    try:
        float(header[0])
    except ValueError:
        pass
    else:
        raise ValueError("filter input must start with a header row")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != want:
            raise DimensionError(f"line {lineno}: {len(row)} columns, expected {want}", name="filter.input")
        vals = [float(v) for v in row]
        out.append((int(vals[0]), np.array(vals[1:1 + sys.k]), np.array(vals[1 + sys.k:])))
    return out


def write_filter_csv(records, n: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["t"] + [f"xhat_{i + 1}" for i in range(n)]
    header += [f"Sigma_{i + 1}_{j + 1}" for i in range(n) for j in range(n)]
    w.writerow(header)
    for t, xhat, Sigma in records:
        w.writerow([str(t)] + [_fmt(v) for v in xhat] + [_fmt(v) for v in np.ravel(Sigma)])
    return buf.getvalue()
