"""Scenario execution: validation, task dispatch, reports and artifacts."""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigurationError
from .grid import Axis, Grid

TASKS = ("verify-splitting", "derive-flow", "evolve", "gsge-check", "inverse-scattering", "dress")
DEFAULT_LAMBDAS = (0.5, 1.0, 2.0)
OUT_ENV = "SOLHIER_OUT"


def load_schema() -> dict:
    return json.loads(resources.files("solhier").joinpath("data/scenario.schema.json").read_text())


@dataclass
class Scenario:
    """A validated scenario document."""

    doc: dict
    path: str | None = None

    @classmethod
    def from_dict(cls, doc: dict, path=None) -> "Scenario":
        validator = jsonschema.Draft202012Validator(load_schema())
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
        if errors:
            e = errors[0]
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise ConfigurationError(f"scenario invalid at {where}: {e.message}")
        return cls(doc, path)

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigurationError(f"scenario file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"scenario is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, str(path))

    def __getattr__(self, key):
        doc = self.__dict__.get("doc", {})
        if key in doc:
            return doc[key]
        raise AttributeError(key)

    @property
    def params(self) -> dict:
        return self.doc.get("params", {})

    @property
    def n(self) -> int:
        return int(self.doc.get("n", 2))

    def grid(self) -> Grid:
        spec = self.doc.get("grid")
        if spec is None:
            raise ConfigurationError(f"task {self.task!r} needs a grid")
        return grid_from_spec(spec)


def grid_from_spec(spec: dict) -> Grid:
    axes = []
    for a in spec["axes"]:
        kind = a.get("kind", "periodic" if spec["boundary"] == "periodic" else "closed")
        make = Axis.periodic if kind == "periodic" else Axis.closed
        axes.append(make(a["name"], a["start"], a["stop"], a["size"], a.get("boundary")))
    return Grid(tuple(axes), spec["boundary"])


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    kind: str = "max"

    def to_dict(self):
        v = self.value
        return {"name": self.name, "value": None if not np.isfinite(v) else float(v),
                "tolerance": float(self.tolerance), "kind": self.kind, "passed": bool(self.passed)}


@dataclass
class RunReport:
    """Checks, environment fingerprint and timing of one scenario run."""

    scenario: str
    task: str
    seed: int
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check_max(self, name, value, tol):
        """Record ``value <= tol`` (NaN fails)."""
        value = float(value)
        c = Check(name, value, float(tol), bool(np.isfinite(value) and value <= tol), "max")
        self.checks.append(c)
        return c

    def check_min(self, name, value, bound):
        """Record ``value >= bound``."""
        value = float(value)
        c = Check(name, value, float(bound), bool(np.isfinite(value) and value >= bound), "min")
        self.checks.append(c)
        return c

    def check_true(self, name, ok):
        c = Check(name, 1.0 if ok else 0.0, 1.0, bool(ok), "flag")
        self.checks.append(c)
        return c

    def to_dict(self, with_timing=True):
        d = {"scenario": self.scenario, "task": self.task, "seed": self.seed, "passed": self.passed,
             "version": __version__, "environment": fingerprint(),
             "checks": [c.to_dict() for c in self.checks], "data": _jsonable(self.data),
             "artifacts": list(self.artifacts)}
        if with_timing:
            d["timing"] = self.timing
        return d


def fingerprint():
    return {"solhier": __version__, "numpy": np.__version__, "python": platform.python_version()}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# --------------------------------------------------------------------------
# artifacts
# --------------------------------------------------------------------------

def write_atomic(path, text: str):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return str(path)


def emit_plot_data(out_dir, stem: str, columns: list, rows, semantics: dict | None = None):
    """Write ``<stem>.csv`` (header row, then ``rows``) and ``<stem>.json`` describing the columns.

    All quantities are dimensionless.  An empty ``rows`` gives a header-only CSV.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    out_dir = Path(out_dir)
    csv_path = write_atomic(out_dir / f"{stem}.csv", buf.getvalue())
    manifest = {"file": f"{stem}.csv", "units": "dimensionless",
                "columns": [{"name": c, "meaning": (semantics or {}).get(c, c)} for c in columns]}
    json_path = write_atomic(out_dir / f"{stem}.json", json.dumps(manifest, indent=2) + "\n")
    return [csv_path, json_path]


def field_rows(grid: Grid, values: dict):
    """Rows ``(coords..., value columns...)`` for fields sampled on ``grid``."""
    mesh = [m.ravel() for m in grid.mesh()]
    cols = [np.asarray(v).ravel() for v in values.values()]
    return [tuple(float(m[k]) for m in mesh) + tuple(float(c[k]) for c in cols) for k in range(len(mesh[0]))]


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------

@dataclass
class RunOptions:
    seed: int | None = None
    out: str | None = None
    lambda_probes: tuple | None = None
    tolerance_scale: float = 1.0
    write: bool = True


class Context:
    """What a task sees: the scenario, effective options and the report."""

    def __init__(self, scenario: Scenario, opts: RunOptions):
        self.scenario = scenario
        self.opts = opts
        self.seed = int(opts.seed if opts.seed is not None else scenario.seed)
        self.rng = np.random.default_rng(self.seed)
        self.lambdas = tuple(opts.lambda_probes or scenario.doc.get("lambda_probes") or DEFAULT_LAMBDAS)
        self.report = RunReport(scenario.name, scenario.task, self.seed)
        out = opts.out or scenario.doc.get("outputs", {}).get("dir") or os.environ.get(OUT_ENV) or "solhier-out"
        self.out_dir = Path(out) / _slug(scenario.name)
        self.write = opts.write and scenario.doc.get("outputs", {}).get("csv", True)

    def tol(self, key, default=None):
        tols = self.scenario.tolerances
        if key not in tols and default is None:
            raise ConfigurationError(f"scenario has no tolerance {key!r}")
        return float(tols.get(key, default)) * self.opts.tolerance_scale

    def emit(self, stem, columns, rows, semantics=None):
        if self.write:
            self.report.artifacts += emit_plot_data(self.out_dir, stem, columns, rows, semantics)


def _slug(s):
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in s)


def run_scenario(scenario: Scenario, opts: RunOptions | None = None) -> RunReport:
    """Run every check of a scenario; artifacts go to ``<out>/<scenario name>/``."""
    from . import tasks

    opts = opts or RunOptions()
    ctx = Context(scenario, opts)
    t0 = time.perf_counter()
    tasks.TASK_FUNCTIONS[scenario.task](ctx)
    ctx.report.timing["total_s"] = round(time.perf_counter() - t0, 3)
    if ctx.write:
        ctx.report.artifacts.append(str(ctx.out_dir / "report.json"))
        write_atomic(ctx.out_dir / "report.json", json.dumps(ctx.report.to_dict(), indent=2) + "\n")
    return ctx.report
