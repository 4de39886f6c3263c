"""Command-line front end: ``tauhusimi <task> [--config run.json] [--key value ...]``.

Exit codes: 0 success, 2 validation error, 3 numerical-contract violation,
4 I/O error.  Failures print one line ``ERROR <code> <detail>`` to stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _backend, _spectral
from .errors import NumericalContractError, ValidationError
from .grids import PhaseGrid
from .husimi import SemigroupEvaluator, husimi_grid
from .models import (
    HilbertConfig,
    ObservableSet,
    bloch_vector,
    make_state,
    observables_from_labels,
    parse_state_spec,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

TASKS = (
    "husimi-cv",
    "husimi-spin",
    "husimi-generic",
    "wigner",
    "smear-check",
    "trotter-check",
    "born-limit",
    "record-replay",
    "record-sample",
)

# per-task defaults applied before validation (config and flags override)
TASK_DEFAULTS = {
    "husimi-cv": {"observables": ["X", "P"]},
    "husimi-spin": {"observables": ["Sx", "Sy", "Sz"], "state": "bloch:0,0,0"},
    "wigner": {"observables": ["X", "P"]},
    "smear-check": {"observables": ["X", "P"], "grid": [[-6.0, 6.0, 257]], "state": "fock:0"},
    "trotter-check": {
        "observables": ["X", "P"],
        "grid": [[-7.0, 7.0, 71]],
        "state": "fock:0",
        "n_blocks": [4, 8, 16, 32, 64],
        "probes": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
    },
    "born-limit": {"observables": ["Sz"], "window": 0.5},
}
NEEDS_TAU = {"husimi-cv", "husimi-spin", "husimi-generic", "smear-check", "trotter-check"}
NEEDS_GRID = {"husimi-cv", "husimi-spin", "husimi-generic", "wigner", "smear-check", "trotter-check"}


@dataclass
class RunConfig:
    task: str
    state: str | None = None
    observables: list | None = None
    observables_file: str | None = None
    tau: float | None = None
    tau_list: list | None = None
    grid: list | None = None
    hbar: float = 1.0
    dim: int = 48
    pad: int = 8
    seed: int = 0
    output: str | None = None
    format: str = "csv"
    threads: int | None = None
    plot_hint: bool = False
    window: float | None = None
    n_blocks: list | None = None
    probes: list | None = None
    schedule: list | None = None
    record: str | None = None
    max_tail: float = 1e-8
    backend: str | None = None

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        if "task" not in data:
            raise ValidationError("config needs a task")
        merged = dict(TASK_DEFAULTS.get(data["task"], {}))
        merged.update({k: v for k, v in data.items() if v is not None})
        return cls(**merged)

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass
class Finding:
    path: str
    message: str
    severity: str = "error"
    code: int = EXIT_VALIDATION

    def __str__(self):
        return f"{self.severity} {self.path}: {self.message}"


def _grid_from(cfg: RunConfig, ndim: int) -> PhaseGrid:
    axes = list(cfg.grid)
    if len(axes) == 1 and ndim > 1:
        axes = axes * ndim
    if len(axes) != ndim:
        raise ValidationError(f"grid has {len(axes)} axes but the task needs {ndim}")
    out = []
    for ax in axes:
        if isinstance(ax, dict):
            out.append((float(ax["min"]), float(ax["max"]), int(ax["count"])))
        else:
            lo, hi, n = ax
            out.append((float(lo), float(hi), int(n)))
    return PhaseGrid(tuple(out))


def _hilbert(cfg: RunConfig) -> HilbertConfig:
    return HilbertConfig(int(cfg.dim), float(cfg.hbar), int(cfg.pad))


def _observables(cfg: RunConfig) -> ObservableSet:
    if cfg.observables_file:
        mats = np.load(cfg.observables_file)
        if mats.ndim == 2:
            mats = mats[None]
        labels = cfg.observables or [f"A{k + 1}" for k in range(mats.shape[0])]
        return ObservableSet(tuple(mats), tuple(labels), float(cfg.hbar))
    return observables_from_labels(cfg.observables, _hilbert(cfg))


def _is_spin(cfg):
    return bool(cfg.observables) and all(str(s).lower() in ("sx", "sy", "sz") for s in cfg.observables)


def _state(cfg: RunConfig, obs: ObservableSet | None = None):
    if _is_spin(cfg):
        hc = HilbertConfig(2, 1.0, 0)
    elif cfg.observables_file:
        hc = HilbertConfig(obs.dim if obs is not None else 2, float(cfg.hbar), 0)
    else:
        hc = _hilbert(cfg)
    return make_state(cfg.state, hc, float(cfg.max_tail))


def validate(cfg: RunConfig) -> list:
    """All problems with *cfg*.  Errors block the run; warnings do not."""
    f = []
    if cfg.task not in TASKS:
        return [Finding("task", f"unknown task {cfg.task!r}; expected one of {', '.join(TASKS)}")]
    if cfg.format not in ("csv", "json"):
        f.append(Finding("format", "must be csv or json"))
    if not cfg.output:
        f.append(Finding("output", "an output path is required"))
    try:
        HilbertConfig(int(cfg.dim), float(cfg.hbar), int(cfg.pad))
    except (ValidationError, TypeError, ValueError) as exc:
        f.append(Finding("dim/hbar/pad", str(exc)))
    if cfg.threads is not None and int(cfg.threads) < 0:
        f.append(Finding("threads", "must be >= 0 (0 means auto)"))
    if cfg.task in NEEDS_TAU:
        if cfg.tau is None:
            f.append(Finding("tau", "required for this task"))
        elif not (float(cfg.tau) > 0 and math.isfinite(float(cfg.tau))):
            f.append(Finding("tau", "must be > 0 (the semigroup density is undefined at tau=0)"))
    if cfg.task == "born-limit":
        taus = cfg.tau_list or ([cfg.tau] if cfg.tau is not None else None)
        if not taus:
            f.append(Finding("tau_list", "born-limit needs tau or tau_list"))
        elif any(not float(t) > 0 for t in taus):
            f.append(Finding("tau_list", "every tau must be > 0 (the semigroup density is undefined at tau=0)"))
        if cfg.window is None or not float(cfg.window) > 0:
            f.append(Finding("window", "window half-width must be > 0"))
    if cfg.tau_list and any(b <= a for a, b in zip(cfg.tau_list, cfg.tau_list[1:])):
        f.append(Finding("tau_list", "must be strictly ascending"))
    if cfg.task in ("record-replay",) and not cfg.record:
        f.append(Finding("record", "record-replay needs a record file"))
    if cfg.task == "record-replay" and cfg.record and not Path(cfg.record).is_file():
        f.append(Finding("record", f"file not found: {cfg.record}", code=EXIT_IO))
    if cfg.task == "record-sample" and not cfg.schedule:
        f.append(Finding("schedule", "record-sample needs a schedule of (index, duration) pairs"))
    if cfg.schedule:
        for k, step in enumerate(cfg.schedule):
            if len(step) != 2 or not float(step[1]) > 0:
                f.append(Finding(f"schedule[{k}]", "expected (index, duration) with duration > 0"))
    if cfg.task == "trotter-check" and cfg.n_blocks and any(int(n) < 1 for n in cfg.n_blocks):
        f.append(Finding("n_blocks", "block counts must be positive"))

    obs = None
    if not cfg.observables and not cfg.observables_file:
        f.append(Finding("observables", "observable labels or an observables_file are required"))
    else:
        try:
            obs = _observables(cfg)
        except (ValidationError, OSError, ValueError) as exc:
            f.append(Finding("observables", str(exc)))
    if cfg.task in ("husimi-cv", "wigner", "smear-check", "trotter-check") and obs is not None:
        if not obs.is_canonical_pair():
            f.append(Finding("observables", "this task needs the canonical pair X,P"))
    if cfg.task == "husimi-spin" and obs is not None and obs.labels != ("Sx", "Sy", "Sz"):
        f.append(Finding("observables", "husimi-spin uses Sx,Sy,Sz"))
    if cfg.task == "born-limit" and obs is not None and obs.n != 1:
        f.append(Finding("observables", "born-limit needs exactly one observable"))

    if not cfg.state:
        f.append(Finding("state", "a state spec is required"))
    else:
        try:
            parse_state_spec(cfg.state)
            _state(cfg, obs)
        except ValidationError as exc:
            f.append(Finding("state", str(exc)))

    if cfg.task in NEEDS_GRID:
        if not cfg.grid:
            f.append(Finding("grid", "required for this task"))
        elif obs is not None:
            try:
                grid = _grid_from(cfg, obs.n)
            except (ValidationError, TypeError, ValueError, KeyError) as exc:
                f.append(Finding("grid", f"invalid grid: {exc}"))
            else:
                f.extend(_coverage(cfg, obs, grid))
    return f


def _coverage(cfg, obs, grid):
    out = []
    if cfg.task in ("husimi-spin", "husimi-generic") or _is_spin(cfg):
        for k, (ax, op) in enumerate(zip(grid.axes, obs.observables)):
            lam = np.linalg.eigvalsh(op)
            if ax.lo > lam.min() or ax.hi < lam.max():
                out.append(
                    Finding(
                        f"grid[{k}]",
                        f"axis [{ax.lo:g}, {ax.hi:g}] does not cover the eigenvalue range "
                        f"[{lam.min():.4g}, {lam.max():.4g}]; mass will be lost",
                        "warning",
                    )
                )
    return out


# ------------------------------------------------------------------ tasks


@dataclass
class TaskResult:
    columns: list
    rows: np.ndarray
    report: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    grid: PhaseGrid | None = None
    extra: dict = field(default_factory=dict)  # suffix -> text


def _axis_names(labels):
    names = []
    for s in labels:
        s = str(s)
        names.append(s[1:].lower() if s.lower() in ("sx", "sy", "sz") else s.lower())
    return names


def _grid_result(dist, labels, report=None):
    pts = dist.grid.points()
    rows = np.column_stack([pts, dist.values.ravel()])
    rep = {"tau": dist.tau, "hbar": dist.hbar, "integral": dist.integral()}
    rep.update(report or {})
    return TaskResult(_axis_names(labels) + ["value"], rows, rep, list(dist.warnings), dist.grid)


def _task_husimi(cfg, obs, timings):
    rho = _state(cfg, obs)
    grid = _grid_from(cfg, obs.n)
    ev = SemigroupEvaluator(obs, backend=cfg.backend, threads=cfg.threads)
    t0 = time.perf_counter()
    dist = husimi_grid(rho, obs, grid, float(cfg.tau), evaluator=ev)
    timings["evaluate"] = time.perf_counter() - t0
    return _grid_result(dist, obs.labels, {"route": ev.route, "normalization": dist.normalization})


def _task_spin(cfg, obs, timings):
    from .grids import COVERAGE_TOL, QuasiDistribution
    from .spin import spin_husimi

    rho = _state(cfg, obs)
    r_rho = bloch_vector(rho)
    grid = _grid_from(cfg, 3)
    tau = float(cfg.tau)
    t0 = time.perf_counter()
    # closed-form normalization: values do not depend on the grid extent
    vals = np.asarray(spin_husimi(r_rho, grid.points(), tau)).reshape(grid.shape)
    dist = QuasiDistribution(grid, vals, tau, 1.0, True, obs.labels, None)
    timings["evaluate"] = time.perf_counter() - t0
    lost = 1.0 - dist.integral()
    if abs(lost) > COVERAGE_TOL:
        dist.warnings.append(f"grid coverage: grid quadrature of the density is {1 - lost:.6g}")
    return _grid_result(dist, obs.labels, {"bloch": r_rho.tolist()})


def _task_wigner(cfg, obs, timings):
    from .wigner import wigner_grid

    rho = _state(cfg, obs)
    grid = _grid_from(cfg, 2)
    t0 = time.perf_counter()
    w = wigner_grid(rho, grid, obs=obs, threads=cfg.threads)
    timings["evaluate"] = time.perf_counter() - t0
    return _grid_result(w, obs.labels, {"tau": None})


def _task_smear(cfg, obs, timings):
    from .wigner import SmearingKernelCV, smear, wigner_grid

    rho = _state(cfg, obs)
    grid = _grid_from(cfg, 2)
    t0 = time.perf_counter()
    h = husimi_grid(rho, obs, grid, float(cfg.tau), backend=cfg.backend, threads=cfg.threads)
    timings["husimi"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    w = wigner_grid(rho, grid, obs=obs, threads=cfg.threads)
    kern = SmearingKernelCV(float(cfg.tau), obs.hbar)
    s = smear(w, kern)
    timings["wigner_smear"] = time.perf_counter() - t0
    diff = s.values - h.values
    pts = grid.points()
    rows = np.column_stack([pts, diff.ravel()])
    rep = {
        "tau": float(cfg.tau),
        "hbar": obs.hbar,
        "variance": kern.variance,
        "max_abs_diff": float(np.max(np.abs(diff))),
    }
    return TaskResult(_axis_names(obs.labels) + ["value"], rows, rep, sorted(set(h.warnings + w.warnings)), grid)


def _task_trotter(cfg, obs, timings):
    from .weak import conditional_constant_density, conditional_constant_grid, trotter_operator

    rho = _state(cfg, obs)
    grid = _grid_from(cfg, obs.n)
    tau = float(cfg.tau)
    probes = [tuple(float(v) for v in p) for p in cfg.probes]
    t0 = time.perf_counter()
    h = husimi_grid(rho, obs, grid, tau, backend=cfg.backend, threads=cfg.threads)
    zh = h.normalization
    ev = SemigroupEvaluator(obs, backend=cfg.backend, threads=cfg.threads)
    href = ev.numerators([rho], np.array(probes), [tau])[:, 0, 0] / zh
    timings["husimi"] = time.perf_counter() - t0
    rows, errors, dists = [], [], []
    t0 = time.perf_counter()
    for n in cfg.n_blocks:
        vals = conditional_constant_grid(rho, obs, int(n), tau, grid)
        cond = [conditional_constant_density(rho, obs, p, int(n), tau, grid, values=vals) for p in probes]
        err = float(np.max(np.abs(np.array(cond) - href)))
        dist = trotter_operator(obs, probes[0], tau, int(n)).distance()
        errors.append(err)
        dists.append(dist)
        rows.append([int(n), err, dist])
    timings["trotter"] = time.perf_counter() - t0
    ns = np.array(cfg.n_blocks, dtype=float)
    slope = float(np.polyfit(np.log(ns), np.log(errors), 1)[0]) if len(ns) > 1 else None
    rep = {
        "tau": tau,
        "probes": [list(p) for p in probes],
        "n_blocks": [int(n) for n in cfg.n_blocks],
        "max_error": errors,
        "operator_distance": dists,
        "loglog_slope": slope,
    }
    return TaskResult(["n", "max_error", "operator_distance"], np.array(rows, dtype=float), rep, list(h.warnings))


def _eig_key(lam):
    v = float(lam)
    if abs(v - round(v)) < 1e-9:
        v = float(round(v))
        return f"{int(v):+d}"
    return f"{v:+.12g}"


def _task_born(cfg, obs, timings):
    from .weak import born_limit

    rho = _state(cfg, obs)
    taus = [float(t) for t in (cfg.tau_list or [cfg.tau])]
    t0 = time.perf_counter()
    rep = born_limit(rho, obs, taus, float(cfg.window))
    timings["evaluate"] = time.perf_counter() - t0
    keys = [_eig_key(v) for v in rep.eigenvalues]
    rows = [[t, lam, m, p] for t, ms in zip(taus, rep.masses) for lam, m, p in zip(rep.eigenvalues, ms, rep.probabilities)]
    report = {
        "taus": taus,
        "window_halfwidth": rep.window_halfwidth,
        "masses": dict(zip(keys, rep.masses[-1].tolist())),
        "born": dict(zip(keys, rep.probabilities.tolist())),
        "masses_by_tau": [dict(zip(keys, m.tolist())) for m in rep.masses],
        "tail": rep.tails.tolist(),
        "max_error": rep.max_error().tolist(),
        "error_bound": rep.error_bound().tolist(),
    }
    return TaskResult(["tau", "eigenvalue", "mass", "born"], np.array(rows, dtype=float), report, rep.warnings)


def _expectations(rho, obs):
    return {lab: rho.expectation(op) for lab, op in zip(obs.labels, obs.observables)}


def _task_replay(cfg, obs, timings):
    from .weak import MeasurementRecord, posterior, record_density

    rho = _state(cfg, obs).embed(obs.dim)
    rec = MeasurementRecord.from_text(Path(cfg.record).read_text())
    rec.validate(obs)
    t0 = time.perf_counter()
    rows = []
    for k in range(1, len(rec) + 1):
        head = MeasurementRecord(rec.entries[:k])
        i, o, d = rec.entries[k - 1]
        rows.append([i, o, d, record_density(rho, obs, head)])
    post = posterior(rho, obs, rec)
    timings["evaluate"] = time.perf_counter() - t0
    rep = {
        "steps": len(rec),
        "record_density": rows[-1][3] if rows else 1.0,
        "posterior_expectations": _expectations(post, obs),
    }
    return TaskResult(["index", "outcome", "duration", "density"], np.array(rows, dtype=float).reshape(-1, 4), rep)


def _task_sample(cfg, obs, timings):
    from .weak import sample_record

    rho = _state(cfg, obs).embed(obs.dim)
    schedule = [(int(i), float(d)) for i, d in cfg.schedule]
    for i, _ in schedule:
        if not 0 <= i < obs.n:
            raise ValidationError(f"schedule index {i} invalid for {obs.n} observables")
    t0 = time.perf_counter()
    traj = sample_record(rho, obs, schedule, seed=int(cfg.seed))
    timings["sample"] = time.perf_counter() - t0
    rows = np.array([list(e) for e in traj.record.entries], dtype=float).reshape(-1, 3)
    rep = {
        "seed": int(cfg.seed),
        "steps": len(traj.record),
        "record_density": traj.likelihood,
        "posterior_expectations": _expectations(traj.posterior, obs),
    }
    return TaskResult(["index", "outcome", "duration"], rows, rep, extra={".record.txt": traj.record.to_text()})


DISPATCH = {
    "husimi-cv": _task_husimi,
    "husimi-generic": _task_husimi,
    "husimi-spin": _task_spin,
    "wigner": _task_wigner,
    "smear-check": _task_smear,
    "trotter-check": _task_trotter,
    "born-limit": _task_born,
    "record-replay": _task_replay,
    "record-sample": _task_sample,
}


# ------------------------------------------------------------------ output


def _fmt(v) -> str:
    # shortest round-trip decimal, locale independent
    return repr(float(v))


def render_csv(result: TaskResult, plot_hint=False) -> bytes:
    buf = io.StringIO(newline="")
    if plot_hint:
        buf.write("# columns: " + " ".join(result.columns) + "\n")
        if result.grid is not None:
            for name, ax in zip(result.columns, result.grid.axes):
                buf.write(f"# axis {name}: min={ax.lo!r} max={ax.hi!r} count={ax.count}\n")
            buf.write("# rows are row-major; the last axis varies fastest\n")
        buf.write("# gnuplot: set datafile separator ','\n")
    buf.write(",".join(result.columns) + "\n")
    for row in result.rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue().encode("ascii")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def render_json(task, result: TaskResult) -> bytes:
    doc = {"task": task, "columns": result.columns, "report": result.report, "warnings": result.warnings}
    if result.grid is not None:
        doc["grid"] = result.grid.as_dict()
        doc["labels"] = result.columns[:-1]
        doc["values"] = result.rows[:, -1]
    else:
        doc["rows"] = result.rows
    return (json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n").encode("ascii")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def run(cfg: RunConfig, stderr=None) -> int:
    """Validate, execute and write outputs plus ``<output>.manifest.json``."""
    stderr = sys.stderr if stderr is None else stderr
    timings = {}
    t0 = time.perf_counter()
    findings = validate(cfg)
    timings["validate"] = time.perf_counter() - t0
    errors = [x for x in findings if x.severity == "error"]
    if errors:
        code = EXIT_IO if all(x.code == EXIT_IO for x in errors) else EXIT_VALIDATION
        detail = "; ".join(f"{x.path}: {x.message}" for x in errors)
        print(f"ERROR {code} {detail}", file=stderr)
        return code
    warnings = [f"{x.path}: {x.message}" for x in findings]
    try:
        if cfg.threads is not None:
            _spectral.resolve_threads(cfg.threads)
        obs = _observables(cfg)
        result = DISPATCH[cfg.task](cfg, obs, timings)
    except ValidationError as exc:
        print(f"ERROR {EXIT_VALIDATION} {exc}", file=stderr)
        return EXIT_VALIDATION
    except (NumericalContractError, ArithmeticError) as exc:
        print(f"ERROR {EXIT_NUMERICAL} {exc}", file=stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"ERROR {EXIT_IO} {exc}", file=stderr)
        return EXIT_IO
    warnings += list(result.warnings)

    t0 = time.perf_counter()
    out = Path(cfg.output)
    payload = render_csv(result, cfg.plot_hint) if cfg.format == "csv" else render_json(cfg.task, result)
    files = {str(out): payload}
    for suffix, text in result.extra.items():
        files[str(out) + suffix] = text.encode("ascii")
    manifest = {
        "version": __version__,
        "task": cfg.task,
        "config": cfg.as_dict(),
        "backend": cfg.backend or _backend.BACKEND,
        "threads": _spectral.resolve_threads(cfg.threads),
        "outputs": [{"path": p, "sha256": _sha256(b), "bytes": len(b)} for p, b in files.items()],
        "warnings": warnings,
        "report": result.report,
    }
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        for p, b in files.items():
            Path(p).write_bytes(b)
        timings["write"] = time.perf_counter() - t0
        manifest["timings_s"] = timings
        Path(str(out) + ".manifest.json").write_text(json.dumps(_jsonable(manifest), indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        print(f"ERROR {EXIT_IO} {exc}", file=stderr)
        return EXIT_IO
    return EXIT_OK


# ------------------------------------------------------------------ parsing


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _grid_arg(text):
    axes = []
    for part in str(text).split(","):
        lo, hi, n = part.split(":")
        axes.append([float(lo), float(hi), int(n)])
    return axes


def _points_arg(text):
    return [_floats(p) for p in str(text).split(";") if p.strip()]


def _schedule_arg(text):
    out = []
    for part in str(text).split(","):
        i, d = part.split(":")
        out.append([int(i), float(d)])
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tauhusimi", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("--config", help="JSON run configuration; flags override its keys")
        p.add_argument("--state", help="state spec, e.g. fock:1, coherent:re=1,im=0, bloch:0,0,1")
        p.add_argument("--observables", type=lambda s: [v.strip() for v in s.split(",")], help="labels, e.g. X,P or Sz")
        p.add_argument("--observables-file", help=".npy array of shape (n, d, d)")
        p.add_argument("--tau", type=float)
        p.add_argument("--tau-list", type=_floats)
        p.add_argument("--grid", type=_grid_arg, help="min:max:count per axis, comma separated (use --grid=...)")
        p.add_argument("--hbar", type=float)
        p.add_argument("--dim", type=int)
        p.add_argument("--pad", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--output", "-o")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--threads", type=int, help="parallel width cap; 0 = auto (env HUSIMI_THREADS)")
        p.add_argument("--plot-hint", action="store_true", default=None, help="add '#' axis comment lines to CSV")
        p.add_argument("--window", type=float, help="born-limit window half-width")
        p.add_argument("--n-blocks", type=_ints)
        p.add_argument("--probes", type=_points_arg, help="points separated by ';', e.g. '0,0;1,0'")
        p.add_argument("--schedule", type=_schedule_arg, help="index:duration pairs, e.g. 0:1.0,1:0.5")
        p.add_argument("--record", help="record file for record-replay")
        p.add_argument("--max-tail", type=float)
        p.add_argument("--backend", choices=("compiled", "python"))
    return ap


def config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    if data.get("task", args.task) != args.task:
        raise ValidationError(f"config task {data['task']!r} does not match subcommand {args.task!r}")
    data["task"] = args.task
    for k, v in vars(args).items():
        if k in ("config", "task") or v is None:
            continue
        data[k] = v
    return RunConfig.from_mapping(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ValidationError as exc:
        print(f"ERROR {EXIT_VALIDATION} {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"ERROR {EXIT_IO} {exc}", file=sys.stderr)
        return EXIT_IO
    except TypeError as exc:
        print(f"ERROR {EXIT_VALIDATION} {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
