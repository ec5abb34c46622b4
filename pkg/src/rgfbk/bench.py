"""Experiment grids over (method, problem size, seed) with flat-file outputs.

Outputs in ``output_dir``:

summary.csv
    method,m,seed,converged,it,elapsed_seconds,final_residual,threshold
history_<method>_<m>_<seed>.csv
    iter,residual_norm[,error_norm]   (only when history is enabled)
spec.resolved
    the fully resolved experiment, in the same INI format ``--config`` reads
failures.log
    one line per run that raised, only when a run raised
"""

import configparser
import csv
import io
import os
import statistics
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import reference_solution
from .errors import NoReferenceError, ParameterError, RGFBKError
from .problems import PROBLEMS, build_problem
from .solvers import METHODS, WEIGHT_RULES, SolverConfig, solve

OUTPUT_DIR_ENV = "RGFBK_OUTPUT_DIR"
SUMMARY_COLUMNS = ("method", "m", "seed", "converged", "it", "elapsed_seconds",
                   "final_residual", "threshold")
NOT_CONVERGED = "\u2014"  # marker for cells where most seeds failed


class SpecError(ParameterError):
    """Invalid experiment specification; ``field`` names the offending entry."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentSpec:
    problem: str
    sizes: tuple
    methods: tuple  # of SolverConfig; their seed field is replaced per run
    seeds: tuple
    output_dir: str
    problem_params: dict = field(default_factory=dict)
    history: bool = False
    x0: float | None = None
    reference: bool = False
    jobs: int = 1


@dataclass(frozen=True)
class RunSummaryRow:
    method: str
    m: int
    seed: int
    converged: bool
    it: int
    elapsed_seconds: float
    final_residual: float
    threshold: float


def _split(value):
    return [v.strip() for v in str(value).replace(";", ",").split(",") if v.strip()]


def _parse_ints(name, value):
    out = []
    for tok in _split(value):
        try:
            if "-" in tok:
                lo, hi = tok.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(tok))
        except ValueError:
            raise SpecError(name, f"cannot parse integer list {value!r}") from None
    return out


def _parse_bool(name, value):
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise SpecError(name, f"expected a boolean, got {value!r}")


def _number(name, value, kind=float):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise SpecError(name, f"expected {kind.__name__}, got {value!r}") from None


_METHOD_KEYS = ("alpha", "beta", "gamma", "weight_rule", "max_iterations", "residual_tolerance")


def _method_config(name, values):
    kwargs = {}
    for key in _METHOD_KEYS:
        raw = values.get(key)
        if raw is None or raw == "":
            continue
        if key in ("alpha", "beta", "max_iterations"):
            kwargs[key] = _number(key, raw, int)
        elif key == "gamma":
            kwargs[key] = _number(key, raw)
        elif key == "residual_tolerance":
            kwargs[key] = "auto" if str(raw) == "auto" else _number(key, raw)
        else:
            if raw not in WEIGHT_RULES:
                raise SpecError(key, f"unknown weight rule {raw!r}")
            kwargs[key] = raw
    if "gamma" in kwargs and not 0.0 < kwargs["gamma"] < 2.0:
        raise SpecError("gamma", f"must lie in (0, 2), got {kwargs['gamma']}")
    for key in ("alpha", "beta", "max_iterations"):
        if key in kwargs and kwargs[key] < 1:
            raise SpecError(key, f"must be positive, got {kwargs[key]}")
    if kwargs.get("beta", 1) > kwargs.get("alpha", float("inf")):
        raise SpecError("beta", f"beta={kwargs['beta']} exceeds alpha={kwargs['alpha']}")
    if kwargs.get("residual_tolerance", 0) != "auto" and kwargs.get("residual_tolerance", 0) < 0:
        raise SpecError("residual_tolerance", "must be 'auto' or nonnegative")
    return SolverConfig(method=name, **kwargs)


def read_config(path):
    """Read an INI experiment file into ``(experiment_values, per_method_values)``."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    base = dict(parser["experiment"]) if parser.has_section("experiment") else {}
    per_method = {
        sec.split(".", 1)[1]: dict(parser[sec])
        for sec in parser.sections() if sec.startswith("method.")
    }
    return base, per_method


def parse_spec(values, per_method=None):
    """Validate raw key/value settings and apply defaults.

    ``values`` holds experiment-level settings (strings or typed values);
    ``per_method`` maps a method name to overrides of alpha, beta, gamma,
    weight_rule, max_iterations or residual_tolerance for that method only.
    """
    per_method = per_method or {}
    problem = values.get("problem") or "chandrasekhar"
    if problem not in PROBLEMS:
        raise SpecError("problem", f"unknown problem {problem!r}; choose from {PROBLEMS}")

    method_names = _split(values.get("methods") or "")
    if not method_names:
        raise SpecError("methods", "at least one method is required")
    for name in method_names:
        if name not in METHODS:
            raise SpecError("methods", f"unknown method {name!r}; choose from {METHODS}")
    if len(set(method_names)) != len(method_names):
        raise SpecError("methods", "method names must be unique")
    for name in per_method:
        if name not in method_names:
            raise SpecError("methods", f"overrides given for unused method {name!r}")

    sizes = _parse_ints("sizes", values.get("sizes") or "")
    if not sizes or min(sizes) < 1:
        raise SpecError("sizes", "at least one positive size is required")
    seeds = _parse_ints("seeds", values.get("seeds") or "0")
    if not seeds:
        raise SpecError("seeds", "at least one seed is required")
    if min(seeds) < 0 or max(seeds) >= 2**64:
        raise SpecError("seeds", "seeds must be 64-bit unsigned integers")

    methods = []
    for name in method_names:
        merged = {k: values.get(k) for k in _METHOD_KEYS}
        merged.update({k: v for k, v in per_method.get(name, {}).items() if v not in (None, "")})
        cfg = _method_config(name, merged)
        for m in sizes:
            try:
                cfg.resolve(m)
            except ParameterError as exc:
                bad = "alpha" if cfg.alpha is not None and cfg.alpha > m else "beta"
                raise SpecError(bad, f"{name} at m={m}: {exc}") from None
        methods.append(cfg)

    params = {}
    if problem == "chandrasekhar":
        params["c"] = _number("c", values.get("c") if values.get("c") is not None else 0.9)
        if not 0.0 <= params["c"] <= 1.0:
            raise SpecError("c", f"must lie in [0, 1], got {params['c']}")
    elif problem == "linear":
        if values.get("n") not in (None, ""):
            params["n"] = _number("n", values["n"], int)
        params["cond"] = _number("cond", values.get("cond") or 10.0)
        params["problem_seed"] = _number("problem_seed", values.get("problem_seed") or 0, int)

    x0 = values.get("x0")
    output_dir = values.get("output_dir") or os.environ.get(OUTPUT_DIR_ENV) or "runs"
    jobs = _number("jobs", values.get("jobs") or 1, int)
    if jobs < 1:
        raise SpecError("jobs", "must be positive")
    return ExperimentSpec(
        problem=problem,
        sizes=tuple(sizes),
        methods=tuple(methods),
        seeds=tuple(seeds),
        output_dir=str(output_dir),
        problem_params=params,
        history=_parse_bool("history", values.get("history") or False),
        x0=None if x0 in (None, "") else _number("x0", x0),
        reference=_parse_bool("reference", values.get("reference") or False),
        jobs=jobs,
    )


def format_resolved(spec):
    """INI text that :func:`read_config` + :func:`parse_spec` map back to ``spec``."""
    parser = configparser.ConfigParser()
    exp = {
        "problem": spec.problem,
        "sizes": ", ".join(map(str, spec.sizes)),
        "methods": ", ".join(cfg.method for cfg in spec.methods),
        "seeds": ", ".join(map(str, spec.seeds)),
        "history": str(spec.history).lower(),
        "reference": str(spec.reference).lower(),
        "jobs": str(spec.jobs),
    }
    if spec.x0 is not None:
        exp["x0"] = repr(spec.x0)
    exp.update({k: repr(v) if isinstance(v, float) else str(v)
                for k, v in spec.problem_params.items()})
    parser["experiment"] = exp
    for cfg in spec.methods:
        sec = {k: str(getattr(cfg, k)) for k in _METHOD_KEYS if getattr(cfg, k) is not None}
        parser[f"method.{cfg.method}"] = sec
        for m in spec.sizes:
            r = cfg.resolve(m)
            parser[f"resolved.{cfg.method}.m{m}"] = {"alpha": str(r.alpha), "beta": str(r.beta)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def history_filename(method, m, seed):
    return f"history_{method}_{m}_{seed}.csv"


def run_single(spec, cfg, m, seed):
    """Solve one (method, size, seed) cell. Returns ``(row, history_text_or_None)``."""
    problem, x0, x_ref = build_problem(spec.problem, m, **spec.problem_params)
    if spec.x0 is not None:
        x0 = np.full(problem.n, spec.x0)
    if x_ref is None and spec.reference:
        try:
            x_ref = reference_solution(problem, x0)
        except NoReferenceError:
            x_ref = None
    report = solve(problem, replace(cfg, seed=seed), x0, x_ref=x_ref)
    row = RunSummaryRow(cfg.method, m, seed, bool(report.converged), report.iterations,
                        report.elapsed_seconds, report.final_residual, report.threshold_used)
    hist = None
    if spec.history:
        if x_ref is None:
            hist = _csv_text(("iter", "residual_norm"),
                             ((r.k, _fmt(r.residual_norm)) for r in report.history))
        else:
            hist = _csv_text(("iter", "residual_norm", "error_norm"),
                             ((r.k, _fmt(r.residual_norm), _fmt(r.error_norm))
                              for r in report.history))
    return row, hist


def _run_cell(args):
    spec, cfg, m, seed = args
    try:
        return run_single(spec, cfg, m, seed), None
    except RGFBKError as exc:
        return None, f"{cfg.method},{m},{seed}: {type(exc).__name__}: {exc}"


@dataclass
class ExperimentResult:
    rows: list
    failures: list
    files: list

    @property
    def exit_code(self):
        return 1 if self.failures else 0


def run_experiment(spec):
    """Run every (method, size, seed) cell and write the output files.

    Rows come out in (method, size, seed) order whatever the completion
    order, so reruns produce identical bytes outside the timing column.
    """
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = [(spec, cfg, m, seed) for cfg in spec.methods for m in spec.sizes for seed in spec.seeds]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]

    files = []
    rows, failures = [], []
    for (_, cfg, m, seed), (ok, err) in zip(cells, results):
        if err is not None:
            failures.append(err)
            continue
        row, hist = ok
        rows.append(row)
        if hist is not None:
            path = out / history_filename(cfg.method, m, seed)
            _atomic_write(path, hist)
            files.append(path)

    summary = out / "summary.csv"
    _atomic_write(summary, _csv_text(SUMMARY_COLUMNS,
                                     ([_fmt(getattr(r, c)) for c in SUMMARY_COLUMNS] for r in rows)))
    resolved = out / "spec.resolved"
    _atomic_write(resolved, format_resolved(spec))
    files[:0] = [summary, resolved]
    if failures:
        log = out / "failures.log"
        _atomic_write(log, "\n".join(failures) + "\n")
        files.append(log)
    return ExperimentResult(rows, failures, files)


def read_summary(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(RunSummaryRow(
                method=rec["method"],
                m=int(rec["m"]),
                seed=int(rec["seed"]),
                converged=rec["converged"] == "true",
                it=int(rec["it"]),
                elapsed_seconds=float(rec["elapsed_seconds"]),
                final_residual=float(rec["final_residual"]),
                threshold=float(rec["threshold"]),
            ))
    return rows


def pivot_cells(rows, pivot="it"):
    """``{(method, m): value or None}``: the median over converged seeds, or
    None when fewer than half of the seeds converged."""
    if pivot not in ("it", "elapsed"):
        raise ParameterError(f"pivot must be 'it' or 'elapsed', got {pivot!r}")
    groups = {}
    for r in rows:
        groups.setdefault((r.method, r.m), []).append(r)
    cells = {}
    for key, runs in groups.items():
        ok = [r for r in runs if r.converged]
        if 2 * len(ok) < len(runs) or not ok:
            cells[key] = None
        else:
            vals = [r.it if pivot == "it" else r.elapsed_seconds for r in ok]
            cells[key] = statistics.median(vals)
    return cells


def emit_table(rows, pivot="it"):
    """Methods as rows, sizes as columns, median over seeds in each cell."""
    if not rows:
        raise ParameterError("no summary rows to tabulate")
    cells = pivot_cells(rows, pivot)
    methods = list(dict.fromkeys(r.method for r in rows))
    sizes = sorted({r.m for r in rows})

    def show(v):
        if v is None:
            return NOT_CONVERGED
        if pivot == "it":
            return f"{v:g}"
        return f"{v:.4g}"

    label = "IT" if pivot == "it" else "elapsed [s]"
    header = [f"method \\ m ({label})"] + [str(m) for m in sizes]
    body = [[meth] + [show(cells.get((meth, m))) for m in sizes] for meth in methods]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = [f"# median over seeds; {NOT_CONVERGED} = not converged for most seeds"]
    for row in [header] + body:
        lines.append("  ".join(cell.rjust(w) if i else cell.ljust(w)
                               for i, (cell, w) in enumerate(zip(row, widths))))
    return "\n".join(lines) + "\n"
