"""Command-line workflows: solve, filter, learn, eval, plus compare.

    python -m kalmanrl solve --config run.json --output out/

The config is a JSON object. The model is given either inline (top-level
"system" and "cost" keys) or as a path under "model", resolved relative to
the config file. Workflow sections: "solve", "filter", "learning", "eval".
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import KalmanRLError, ModelError, NumericalError
from .estimator import filter_batch, read_filter_csv, write_filter_csv
from .learner import LearningSchedule, learn
from .model import model_from_dict, model_to_dict
from .planner import greedy_gain, riccati_backward, stationary_pi
from .sim import FULLY_OBSERVED, MODES, LinearPolicy, simulate_batch, summarize, zero_policy

WORKFLOWS = ("solve", "filter", "learn", "eval")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5


class ConfigError(KalmanRLError):
    pass


@dataclass
class RunConfig:
    workflow: str
    model: dict
    sections: dict = field(default_factory=dict)
    output_dir: Path = Path(".")
    seed: int = 0
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, workflow: str, path, output_dir=None, seed=None) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {path} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(workflow, doc, path.parent, output_dir, seed)

    @classmethod
    def from_dict(cls, workflow, doc, base_dir=Path("."), output_dir=None, seed=None) -> "RunConfig":
        if workflow not in WORKFLOWS:
            raise ConfigError(f"unknown workflow {workflow!r}; expected one of {WORKFLOWS}")
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        if "workflow" in doc and doc["workflow"] != workflow:
            raise ConfigError(f"config selects workflow {doc['workflow']!r} but {workflow!r} was requested")
        base_dir = Path(base_dir)
        if "model" in doc:
            if not isinstance(doc["model"], str):
                raise ConfigError("'model' must be a path to a model file")
            mpath = base_dir / doc["model"]
            try:
                mtext = mpath.read_text(encoding="utf-8")
            except FileNotFoundError:
                raise ConfigError(f"model file {mpath} does not exist") from None
            try:
                model = json.loads(mtext)
            except json.JSONDecodeError as exc:
                raise ModelError(f"{mpath}: invalid JSON ({exc})") from exc
        else:
            model = {k: doc[k] for k in ("system", "cost") if k in doc}
        sections = {k: doc[k] for k in ("solve", "filter", "learning", "eval") if k in doc}
        for k, v in sections.items():
            if not isinstance(v, dict):
                raise ConfigError(f"section {k!r} must be an object")
        if seed is None:
            seed = doc.get("seed", sections.get(_section_name(workflow), {}).get("seed", 0))
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
        out = output_dir if output_dir is not None else doc.get("output_dir", ".")
        out = Path(out)
        if output_dir is None and not out.is_absolute():
            out = base_dir / out
        return cls(workflow, model, sections, out, seed, base_dir)

    def section(self) -> dict:
        return dict(self.sections.get(_section_name(self.workflow), {}))

    def echo(self) -> dict:
        return {
            "workflow": self.workflow,
            **self.model,
            **self.sections,
            "seed": self.seed,
        }


def _section_name(workflow: str) -> str:
    return {"learn": "learning"}.get(workflow, workflow)


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _get(sec: dict, key: str, default, kind, where: str):
    v = sec.get(key, default)
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if not isinstance(v, kind) or isinstance(v, bool) and kind is not bool:
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {v!r}")
    return v


# --- workflows --------------------------------------------------------------

def _run_solve(cfg, sys_, cost) -> dict:
    sec = cfg.section()
    tol = _get(sec, "tol", 1e-10, float, "solve")
    max_iter = _get(sec, "max_iter", 100_000, int, "solve")
    sv = stationary_pi(sys_, cost, tol=tol, max_iter=max_iter)
    result = {
        "Pi": sv.Pi.tolist(), "bias": sv.bias,
        "iterations": sv.iterations, "residual": sv.residual,
    }
    N = sec.get("horizon")
    if N is not None:
        if isinstance(N, bool) or not isinstance(N, int) or N < 1:
            raise ConfigError(f"solve.horizon: expected a positive integer, got {N!r}")
        rs = riccati_backward(sys_, cost, N)
        result["horizon"] = N
        result["S"] = [S.tolist() for S in rs.S]
        result["L"] = [L.tolist() for L in rs.L]
    return {"result.json": result}


def _run_filter(cfg, sys_, cost) -> dict:
    sec = cfg.section()
    src = sec.get("input")
    if not isinstance(src, str):
        raise ConfigError("filter.input: path to the observation CSV is required")
    rows = read_filter_csv((cfg.base_dir / src).read_text(encoding="utf-8"), sys_)
    return {"filter.csv": write_filter_csv(filter_batch(rows, sys_), sys_.n)}


def _run_learn(cfg, sys_, cost) -> dict:
    sec = cfg.section()
    mode = _get(sec, "mode", FULLY_OBSERVED, str, "learning")
    if mode not in MODES:
        raise ConfigError(f"learning.mode: expected one of {MODES}, got {mode!r}")
    restart = sec.get("restart_cov")
    max_step = sec.get("max_step")
    schedule = LearningSchedule(
        alpha0=_get(sec, "alpha0", 0.05, float, "learning"),
        decay_c=_get(sec, "decay_c", 1000.0, float, "learning"),
        explore_sigma=_get(sec, "explore_sigma", 0.1, float, "learning"),
        restart_cov=None if restart is None else np.array(restart, dtype=np.float64),
        max_step=None if max_step is None else float(max_step),
    )
    episodes = _get(sec, "episodes", 1000, int, "learning")
    track_bias = _get(sec, "track_bias", True, bool, "learning")
    oracle = None
    if _get(sec, "oracle", True, bool, "learning"):
        try:
            oracle = stationary_pi(sys_, cost).Pi
        except NumericalError:
            oracle = None
    res = learn(sys_, cost, schedule, mode, episodes, cfg.seed,
                track_bias=track_bias, oracle=oracle)
    curve = _csv(["episode", "length", "total_cost", "pi_error"],
                 ((r.episode, r.length, r.total_cost, r.pi_error) for r in res.curve))
    result = {
        "Pi": res.value.Pi.tolist(), "bias": res.value.bias,
        "fallback_events": res.fallback_events, "transitions": res.transitions,
        "episodes": len(res.curve), "mode": mode, "track_bias": track_bias,
        "explore_sigma": schedule.explore_sigma,
        "restart_cov": None if restart is None else schedule.restart_cov.tolist(),
    }
    if oracle is not None:
        result["pi_error"] = float(np.linalg.norm(res.value.Pi - oracle))
    return {"curve.csv": curve, "result.json": result}


def _eval_policy(spec: str, cfg, sys_, cost):
    if spec == "zero":
        return zero_policy(sys_.m)
    if spec == "greedy-oracle":
        return LinearPolicy(greedy_gain(stationary_pi(sys_, cost).Pi, sys_, cost))
    if spec.startswith("gain-matrix "):
        path = cfg.base_dir / spec.split(" ", 1)[1].strip()
        doc = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(doc, dict):
            doc = doc.get("L", doc.get("gain"))
        gain = np.array(doc, dtype=np.float64)
        if gain.shape != (sys_.m, sys_.n):
            raise ConfigError(f"gain matrix in {path} has shape {gain.shape}, expected {(sys_.m, sys_.n)}")
        return LinearPolicy(gain)
    raise ConfigError(f"eval.policy: unknown policy {spec!r}")


def _run_eval(cfg, sys_, cost) -> dict:
    sec = cfg.section()
    episodes = _get(sec, "episodes", 10_000, int, "eval")
    if episodes < 1:
        raise ConfigError("eval.episodes must be >= 1")
    mode = _get(sec, "mode", FULLY_OBSERVED, str, "eval")
    if mode not in MODES:
        raise ConfigError(f"eval.mode: expected one of {MODES}, got {mode!r}")
    policy = _eval_policy(_get(sec, "policy", "greedy-oracle", str, "eval"), cfg, sys_, cost)
    restart = sec.get("restart_cov")
    costs, lengths = simulate_batch(sys_, cost, policy, mode, episodes, cfg.seed,
                                    None if restart is None else np.array(restart, dtype=np.float64))
    mean, stderr = summarize(costs)
    out = {"summary.csv": _csv(["mean", "stderr", "episodes", "seed"],
                               [(mean, stderr, episodes, cfg.seed)])}
    if sec.get("per_episode", False):
        out["episodes.csv"] = _csv(["episode", "length", "total_cost"],
                                   zip(range(episodes), lengths.tolist(), costs.tolist()))
    return out


_WORKFLOW_FUNCS = {"solve": _run_solve, "filter": _run_filter, "learn": _run_learn, "eval": _run_eval}


def run(cfg: RunConfig) -> dict[str, Path]:
    """Run one workflow and write its artifacts; returns name -> path."""
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    sys_, cost = model_from_dict(cfg.model)
    artifacts = _WORKFLOW_FUNCS[cfg.workflow](cfg, sys_, cost)
    echo = cfg.echo()
    echo.update(model_to_dict(sys_, cost))
    written = {}
    for name, payload in artifacts.items():
        if isinstance(payload, dict):
            payload = _dumps({**payload, "seed": cfg.seed, "config": echo})
        path = cfg.output_dir / name
        atomic_write(path, payload)
        written[name] = path
    meta = {
        "workflow": cfg.workflow,
        "version": __version__,
        "seed": cfg.seed,
        "config": echo,
        "artifacts": sorted(artifacts),
        "started": started.isoformat(),
        "wall_clock_s": time.perf_counter() - t0,
    }
    path = cfg.output_dir / "metadata.json"
    atomic_write(path, _dumps(meta))
    written["metadata.json"] = path
    return written


def compare(learned: dict, oracle: dict) -> dict:
    """Frobenius, relative and max-entry deviation between two ``Pi`` documents."""
    A = np.array(learned["Pi"], dtype=np.float64)
    B = np.array(oracle["Pi"], dtype=np.float64)
    if A.shape != B.shape:
        raise ModelError(f"dimension mismatch: learned Pi {A.shape} vs oracle Pi {B.shape}", name="Pi")
    D = A - B
    fro = float(np.linalg.norm(D))
    ref = float(np.linalg.norm(B))
    return {
        "frobenius_error": fro,
        "relative_error": fro / ref if ref > 0 else (0.0 if fro == 0 else float("inf")),
        "max_abs_deviation": float(np.abs(D).max()) if D.size else 0.0,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kalmanrl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in WORKFLOWS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--output")
        p.add_argument("--seed", type=int)
        p.add_argument("--quiet", action="store_true")
    p = sub.add_parser("compare", help="compare a learned result with an oracle result")
    p.add_argument("learned")
    p.add_argument("oracle")
    p.add_argument("--output")
    p.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    def err(msg):
        print(f"kalmanrl: error: {msg}", file=sys.stderr)

    try:
        if args.command == "compare":
            docs = [json.loads(Path(p).read_text(encoding="utf-8")) for p in (args.learned, args.oracle)]
            report = compare(*docs)
            if args.output:
                atomic_write(Path(args.output), _dumps(report))
            if not args.quiet:
                print(_dumps(report), end="")
            return EXIT_OK
        cfg = RunConfig.load(args.command, args.config, args.output, args.seed)
        written = run(cfg)
    except ConfigError as exc:
        err(exc)
        return EXIT_USAGE
    except ModelError as exc:
        err(exc)
        return EXIT_VALIDATION
    except NumericalError as exc:
        err(exc)
        return EXIT_NUMERICAL
    except json.JSONDecodeError as exc:
        err(f"invalid JSON: {exc}")
        return EXIT_USAGE
    except (KeyError, ValueError) as exc:
        err(exc)
        return EXIT_USAGE
    except OSError as exc:
        err(exc)
        return EXIT_IO
    if not args.quiet:
        for name, path in written.items():
            print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
