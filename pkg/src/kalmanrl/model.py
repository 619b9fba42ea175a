"""Problem definition: linear-Gaussian dynamics and quadratic costs.

    x_{t+1} = F x_t + G u_t + w_t,   w_t ~ N(0, W)
    y_t     = H x_t + e_t,           e_t ~ N(0, E)

    c(x, u) = x'Qx + u'Ru,   c_f(x) = x'Qf x

After each step the process is stopped with probability ``p`` and the
final cost is paid on the current state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionError, ModelError, NotPSDError

PSD_RTOL = 1e-10


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _as_matrix(M, name: str) -> np.ndarray:
    A = np.array(M, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d matrix, got shape {A.shape}", name=name)
    return A


def _as_vector(v, name: str) -> np.ndarray:
    a = np.array(v, dtype=np.float64)
    if a.ndim != 1:
        raise DimensionError(f"{name} must be a 1-d vector, got shape {a.shape}", name=name)
    return a


def _check_psd(M: np.ndarray, name: str, definite: bool = False) -> np.ndarray:
    """Symmetrize ``M`` and check its spectrum.

    Eigenvalues down to ``-PSD_RTOL * ||M||`` are treated as rounding error and
    clamped to zero. With ``definite=True`` the smallest eigenvalue must be
    strictly positive.
    """
    S = symmetrize(M)
    if not np.all(np.isfinite(S)):
        raise ModelError(f"{name} has non-finite entries", name=name)
    if S.size == 0:
        return S
    w, V = np.linalg.eigh(S)
    lo = w.min()
    scale = np.linalg.norm(S, 2)
    if definite:
        if lo <= 0.0:
            raise NotPSDError(
                f"{name} is not positive definite (smallest eigenvalue {lo:.6g})",
                name=name, eigenvalue=float(lo))
        return S
    if lo < -PSD_RTOL * scale:
        raise NotPSDError(
            f"{name} is not positive semidefinite (smallest eigenvalue {lo:.6g})",
            name=name, eigenvalue=float(lo))
    if lo < 0.0:
        S = symmetrize((V * np.clip(w, 0.0, None)) @ V.T)
    return S


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Dynamics, observation map and noise covariances of the plant."""

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    W: np.ndarray
    E: np.ndarray
    x1_mean: np.ndarray
    Sigma1: np.ndarray

    def __post_init__(self):
        for name in ("F", "G", "H", "W", "E", "Sigma1"):
            A = _as_matrix(getattr(self, name), name)
            A.setflags(write=False)
            object.__setattr__(self, name, A)
        x1 = _as_vector(self.x1_mean, "x1_mean")
        x1.setflags(write=False)
        object.__setattr__(self, "x1_mean", x1)

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[1]

    @property
    def k(self) -> int:
        return self.H.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LinearSystem):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in _SYSTEM_KEYS)


@dataclass(frozen=True, eq=False)
class CostModel:
    """Quadratic step and final costs plus the per-step stopping probability."""

    Q: np.ndarray
    R: np.ndarray
    Qf: np.ndarray
    p: float = field(default=1.0)

    def __post_init__(self):
        for name in ("Q", "R", "Qf"):
            A = _as_matrix(getattr(self, name), name)
            A.setflags(write=False)
            object.__setattr__(self, name, A)
        object.__setattr__(self, "p", float(self.p))

    def __eq__(self, other):
        if not isinstance(other, CostModel):
            return NotImplemented
        return self.p == other.p and all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("Q", "R", "Qf"))


_SYSTEM_KEYS = ("F", "G", "H", "W", "E", "x1_mean", "Sigma1")
_COST_KEYS = ("Q", "R", "Qf", "p")


def validate_system(sys: LinearSystem, cost: CostModel) -> tuple[LinearSystem, CostModel]:
    """Check shapes, definiteness and the stopping probability.

    Covariance and cost matrices are replaced by their symmetric parts (with
    tiny negative eigenvalues clamped) before the checks. Validating an
    already validated pair returns equal objects.

    Raises
    ------
    DimensionError
        A matrix has a shape inconsistent with ``F`` (the message names it).
    NotPSDError
        ``W``, ``E``, ``Sigma1``, ``Q`` or ``Qf`` is not PSD, or ``R`` is not PD.
    ModelError
        ``p`` outside ``(0, 1]`` or non-finite entries.
    """
    F = sys.F
    if F.shape[0] != F.shape[1] or F.shape[0] < 1:
        raise DimensionError(f"F must be square and non-empty, got shape {F.shape}", name="F")
    n = F.shape[0]
    m = sys.G.shape[1]
    k = sys.H.shape[0]
    if m < 1:
        raise DimensionError("G must have at least one column (m >= 1)", name="G")
    if k < 1:
        raise DimensionError("H must have at least one row (k >= 1)", name="H")
    expected = {
        "G": (n, m), "H": (k, n), "W": (n, n), "E": (k, k), "Sigma1": (n, n),
    }
    for name, shape in expected.items():
        got = getattr(sys, name).shape
        if got != shape:
            raise DimensionError(f"{name} has shape {got}, expected {shape}", name=name)
    if sys.x1_mean.shape != (n,):
        raise DimensionError(
            f"x1_mean has shape {sys.x1_mean.shape}, expected ({n},)", name="x1_mean")
    for name, shape in {"Q": (n, n), "R": (m, m), "Qf": (n, n)}.items():
        got = getattr(cost, name).shape
        if got != shape:
            raise DimensionError(f"{name} has shape {got}, expected {shape}", name=name)
    for name in ("F", "G", "H"):
        if not np.all(np.isfinite(getattr(sys, name))):
            raise ModelError(f"{name} has non-finite entries", name=name)
    if not np.all(np.isfinite(sys.x1_mean)):
        raise ModelError("x1_mean has non-finite entries", name="x1_mean")

    p = cost.p
    if not (0.0 < p <= 1.0):
        raise ModelError(f"stopping probability p={p!r} is outside (0, 1]", name="p")

    sys_v = LinearSystem(
        F=F, G=sys.G, H=sys.H,
        W=_check_psd(sys.W, "W"),
        E=_check_psd(sys.E, "E"),
        x1_mean=sys.x1_mean,
        Sigma1=_check_psd(sys.Sigma1, "Sigma1"),
    )
    cost_v = CostModel(
        Q=_check_psd(cost.Q, "Q"),
        R=_check_psd(cost.R, "R", definite=True),
        Qf=_check_psd(cost.Qf, "Qf"),
        p=p,
    )
    return sys_v, cost_v


def step_cost(x, u, cost: CostModel) -> float:
    """x'Qx + u'Ru."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if x.shape != (cost.Q.shape[0],):
        raise DimensionError(f"state has shape {x.shape}, expected ({cost.Q.shape[0]},)", name="x")
    if u.shape != (cost.R.shape[0],):
        raise DimensionError(f"control has shape {u.shape}, expected ({cost.R.shape[0]},)", name="u")
    return float(x @ cost.Q @ x + u @ cost.R @ u)


def final_cost(x, cost: CostModel) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cost.Qf.shape[0],):
        raise DimensionError(f"state has shape {x.shape}, expected ({cost.Qf.shape[0]},)", name="x")
    return float(x @ cost.Qf @ x)


# --- JSON model documents ---------------------------------------------------

def _parse_matrix(value: Any, path: str, vector: bool = False) -> np.ndarray:
    want = "array of numbers" if vector else "array of rows"
    if not isinstance(value, list):
        raise ModelError(f"{path}: expected {want}, got {type(value).__name__}", name=path)
    rows = [value] if vector else value
    width = None
    for i, row in enumerate(rows):
        rpath = path if vector else f"{path}[{i}]"
        if not isinstance(row, list):
            raise ModelError(f"{rpath}: expected a row (array of numbers)", name=rpath)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ModelError(f"{rpath}: ragged row of length {len(row)}, expected {width}", name=rpath)
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ModelError(f"{rpath}[{j}]: expected a number, got {v!r}", name=f"{rpath}[{j}]")
    arr = np.array(value, dtype=np.float64)
    if not vector and arr.ndim != 2:
        arr = arr.reshape(len(value), 0)
    return arr


def model_from_dict(doc: dict) -> tuple[LinearSystem, CostModel]:
    """Build and validate a model from a parsed JSON document.

    Errors carry the offending key path, e.g. ``cost.R`` or ``system.F[1]``.
    """
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object", name="")
    parts = {}
    for section, keys in (("system", _SYSTEM_KEYS), ("cost", _COST_KEYS)):
        if section not in doc:
            raise ModelError(f"missing key {section!r}", name=section)
        sec = doc[section]
        if not isinstance(sec, dict):
            raise ModelError(f"{section}: expected an object", name=section)
        vals = {}
        for key in keys:
            path = f"{section}.{key}"
            if key not in sec:
                raise ModelError(f"missing key {path!r}", name=path)
            if key == "p":
                p = sec[key]
                if isinstance(p, bool) or not isinstance(p, (int, float)):
                    raise ModelError(f"{path}: expected a number, got {p!r}", name=path)
                vals[key] = float(p)
            else:
                vals[key] = _parse_matrix(sec[key], path, vector=(key == "x1_mean"))
        parts[section] = vals
    sys = LinearSystem(**parts["system"])
    cost = CostModel(**parts["cost"])
    try:
        return validate_system(sys, cost)
    except ModelError as exc:
        section = "cost" if exc.name in _COST_KEYS else "system"
        exc.name = f"{section}.{exc.name}"
        exc.args = (f"{exc.name}: {exc.args[0]}",)
        raise


def model_to_dict(sys: LinearSystem, cost: CostModel) -> dict:
    return {
        "system": {k: getattr(sys, k).tolist() for k in _SYSTEM_KEYS},
        "cost": {"Q": cost.Q.tolist(), "R": cost.R.tolist(), "Qf": cost.Qf.tolist(), "p": cost.p},
    }


def load_model(path) -> tuple[LinearSystem, CostModel]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON ({exc})", name="") from exc
    return model_from_dict(doc)
