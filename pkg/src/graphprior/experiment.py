"""Benchmark harness: trials over priors, methods and subset sizes.

One trial draws a fresh set of noisy priors (the only source of randomness
besides CV fold shuffles), then for every subset percentage and method it
tunes ``C`` where the method needs it, solves, and scores the argmax
predictions. Everything is a deterministic function of the ExperimentSpec.
"""
from __future__ import annotations

import configparser
import logging
import os
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io
from .distribution import RegionMethodConfig, run_region_method, wvrn
from .errors import ConfigError, InputError
from .graph import SparseWeightedGraph
from .model_selection import DEFAULT_RANGES, CVPlan, cv_select, make_doubling_grid
from .priors import (
    SCHEMES,
    NoiseSpec,
    accuracy,
    derived_labels,
    generate_noisy_priors,
    hard_labels,
    rank_nodes,
    scheme_scores,
    select_subset,
    top_percent_count,
)
from .quadratic import build_node_regularization, solve_gfhf, solve_lgc
from .synthetic import SyntheticBlockSpec, generate_block_graph

log = logging.getLogger(__name__)

METHODS = ("GFHF", "LGC", "WvRN", "WvRN-V1", "WvRN-V2", "IR", "DIR", "LSR")
SETTING_METHODS = {
    1: ("GFHF", "LGC", "WvRN", "IR", "DIR", "LSR"),
    2: ("GFHF", "LGC", "WvRN-V1", "WvRN-V2", "IR", "DIR", "LSR"),
}
TUNED = {1: ("LGC",), 2: ("LGC", "WvRN-V2", "IR", "DIR", "LSR")}
EVAL_SCOPES = ("all_nodes", "labeled_subset", "unselected")

# key -> help text; also the accepted keys of a spec file
SPEC_KEYS = {
    "graph": "edge-list file (u<TAB>v<TAB>w); omit to use a synthetic block graph",
    "nodes": "node count override for the edge list",
    "labels": "truth labels file (node<TAB>class)",
    "priors": "priors CSV (node,p_0,...); omit to simulate priors from the truth",
    "classes": "class count K (default: from priors or max label + 1)",
    "blocks": "synthetic block sizes, e.g. 100,100",
    "p_within": "synthetic within-block edge probability",
    "p_across": "synthetic across-block edge probability",
    "weight": "synthetic edge weight",
    "graph_seed": "synthetic graph seed",
    "pmin": "noise model: lower bound of the true-class probability",
    "pmax": "noise model: upper bound of the true-class probability",
    "methods": "comma-separated methods: " + ",".join(METHODS),
    "setting": "1 (clamp a confident subset) or 2 (use every prior)",
    "scheme": "confidence score: MPS or EBS",
    "subset_pcts": "comma-separated subset sizes in percent of nodes",
    "trials": "number of prior draws",
    "ir_trials": "cap on the number of trials that run IR",
    "seed": "master seed",
    "coverage": "force at least one selected node per class in Setting 1 (true/false)",
    "cv_folds": "CV folds",
    "cv_rule": "best or smallest_within_pct (default: best in Setting 1, smallest_within_pct in Setting 2)",
    "cv_pct": "slack for smallest_within_pct, in percent",
    "cv_absolute": "treat cv_pct as absolute accuracy points instead of relative (true/false)",
    "c_range_lgc": "lo,hi of the doubling C grid for LGC",
    "c_range_wvrn_v2": "lo,hi of the doubling C grid for WvRN-V2 (nu = 1/(1+C))",
    "c_range_ir": "lo,hi of the doubling C grid for IR",
    "c_range_dir": "lo,hi of the doubling C grid for DIR",
    "c_range_lsr": "lo,hi of the doubling C grid for LSR",
    "eval_scope": "all_nodes, labeled_subset or unselected",
    "node_regularization": "apply degree-based node regularization to GFHF/LGC labels (true/false)",
    "nu": "WvRN / WvRN-V1 annealing decay",
    "tol": "solver convergence tolerance (sup-norm)",
    "max_iter": "iteration cap for the quadratic and WvRN solvers",
    "region_max_iter": "outer iteration cap for IR/DIR/LSR",
    "workers": "parallel worker processes over trials",
}


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _parse_list(value, kind=str) -> list:
    if isinstance(value, (list, tuple)):
        return [kind(v) for v in value]
    return [kind(v.strip()) for v in str(value).split(",") if v.strip()]


def _method_key(method: str) -> str:
    return method.lower().replace("-", "_")


@dataclass
class ExperimentSpec:
    graph: str | None = None
    nodes: int | None = None
    labels: str | None = None
    priors: str | None = None
    classes: int | None = None
    blocks: list = field(default_factory=lambda: [100, 100])
    p_within: float = 0.1
    p_across: float = 0.005
    weight: float = 1.0
    graph_seed: int = 0
    pmin: float = 0.4
    pmax: float = 0.99
    methods: list = field(default_factory=lambda: ["GFHF", "LGC", "WvRN-V1", "WvRN-V2", "IR", "DIR", "LSR"])
    setting: int = 2
    scheme: str = "EBS"
    subset_pcts: list = field(default_factory=lambda: [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0])
    trials: int = 100
    ir_trials: int | None = None
    seed: int = 0
    coverage: bool | None = None
    cv_folds: int = 5
    cv_rule: str | None = None
    cv_pct: float = 5.0
    cv_absolute: bool = False
    c_ranges: dict = field(default_factory=lambda: dict(DEFAULT_RANGES))
    eval_scope: str = "all_nodes"
    node_regularization: bool = False
    nu: float = 0.95
    tol: float = 1e-6
    max_iter: int = 1000
    region_max_iter: int = 500
    workers: int = 1
    # output switches, set from CLI flags only
    cv_trace: bool = False
    trace: bool = False
    dump_scores: bool = False

    def __post_init__(self):
        self.methods = _parse_list(self.methods)
        self.subset_pcts = _parse_list(self.subset_pcts, float)
        self.blocks = _parse_list(self.blocks, int)
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
        if self.setting not in (1, 2):
            raise ConfigError("setting must be 1 or 2")
        bad = [m for m in self.methods if m not in SETTING_METHODS[self.setting]]
        if bad:
            raise ConfigError(f"method(s) {bad} are not defined in Setting {self.setting}")
        if not self.methods:
            raise ConfigError("no methods requested")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if not self.subset_pcts or any(not 0 < p <= 100 for p in self.subset_pcts):
            raise ConfigError("subset_pcts must lie in (0, 100]")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.eval_scope not in EVAL_SCOPES:
            raise ConfigError(f"eval_scope must be one of {EVAL_SCOPES}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.coverage is None:
            self.coverage = self.setting == 1
        if self.cv_rule is None:
            self.cv_rule = "best" if self.setting == 1 else "smallest_within_pct"
        self.c_ranges = {**DEFAULT_RANGES, **self.c_ranges}

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentSpec":
        kwargs = {}
        ranges = {}
        known = {f.name: f for f in fields(cls)}
        for key, raw in mapping.items():
            if raw is None:
                continue
            key = key.strip().lower()
            if key.startswith("c_range_"):
                method = {_method_key(m): m for m in DEFAULT_RANGES}.get(key[len("c_range_"):])
                if method is None:
                    raise ConfigError(f"unknown C range key {key!r}")
                lo, hi = _parse_list(raw, float)
                ranges[method] = (lo, hi)
                continue
            if key not in known or key == "c_ranges":
                raise ConfigError(f"unknown spec key {key!r}")
            kwargs[key] = _coerce(key, raw)
        if ranges:
            kwargs["c_ranges"] = ranges
        return cls(**kwargs)

    def grid(self, method: str) -> list[float]:
        lo, hi = self.c_ranges[method]
        return make_doubling_grid(lo, hi)

    def synthetic_spec(self) -> SyntheticBlockSpec:
        return SyntheticBlockSpec(
            blocks=tuple(self.blocks), p_within=self.p_within, p_across=self.p_across,
            weight=self.weight, seed=self.graph_seed,
        )


_INT_KEYS = {"nodes", "classes", "graph_seed", "setting", "trials", "ir_trials", "seed", "cv_folds",
             "max_iter", "region_max_iter", "workers"}
_FLOAT_KEYS = {"p_within", "p_across", "weight", "pmin", "pmax", "cv_pct", "nu", "tol"}
_BOOL_KEYS = {"coverage", "cv_absolute", "node_regularization", "cv_trace", "trace", "dump_scores"}


def _coerce(key: str, raw):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            return _parse_bool(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None
    return raw if not isinstance(raw, str) else raw.strip()


def read_spec_file(path) -> dict:
    """Parse flat ``key = value`` lines (``#`` comments) into a dict."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string("[experiment]\n" + fh.read())
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return dict(parser["experiment"])


@dataclass
class RunRecord:
    method: str
    setting: int
    scheme: str
    subset_pct: float
    C_chosen: float | None
    trial_seed: int
    accuracy: float
    initial_accuracy: float
    iterations: int
    wall_time: float = 0.0


RECORD_COLUMNS = ["method", "setting", "scheme", "subset_pct", "C_chosen", "trial_seed",
                  "accuracy", "initial_accuracy", "iterations"]


@dataclass
class _Problem:
    g: SparseWeightedGraph
    truth: np.ndarray
    K: int
    fixed_priors: np.ndarray | None


def load_problem(spec: ExperimentSpec) -> _Problem:
    if spec.graph:
        g = io.read_edge_list(spec.graph, n=spec.nodes)
        if not spec.labels:
            raise ConfigError("a graph file needs a labels file")
        truth = io.read_labels(spec.labels, n=g.n)
    else:
        g, truth = generate_block_graph(spec.synthetic_spec())
        if spec.labels:
            truth = io.read_labels(spec.labels, n=g.n)
    fixed = io.read_priors(spec.priors, n=g.n) if spec.priors else None
    if fixed is not None:
        K = fixed.shape[1]
    elif spec.classes:
        K = spec.classes
    else:
        K = int(truth.max()) + 1
    if truth.max(initial=-1) >= K:
        raise InputError("truth labels exceed the class count")
    if fixed is None and np.any(truth < 0):
        raise InputError("simulated priors need a truth label for every node")
    if spec.eval_scope == "all_nodes" and np.any(truth < 0):
        raise InputError("eval_scope=all_nodes needs a truth label for every node")
    if not np.any(truth >= 0):
        raise InputError("no truth labels to evaluate against")
    return _Problem(g=g, truth=truth, K=K, fixed_priors=fixed)


def trial_seeds(seed: int, trials: int) -> list[int]:
    state = np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint64)
    return [int(s) for s in state]


def solve_method(method: str, setting: int, g: SparseWeightedGraph, P0, lam, C: float, spec: ExperimentSpec,
                 trace: bool = False):
    """Run one method with label degrees ``lam`` and fit weight ``C``.

    In Setting 1, ``lam`` is the 0/1 indicator of the clamped subset.
    ``trace`` records the objective per outer iteration of region methods.
    """
    K = P0.shape[1]
    if setting == 1:
        Y = hard_labels(derived_labels(P0), K)
    else:
        Y = P0
    if method == "GFHF":
        Z = build_node_regularization(g, lam, Y).z if spec.node_regularization else Y
        return solve_gfhf(g, lam, Z, tol=spec.tol, max_iter=spec.max_iter)
    if method == "LGC":
        Z = build_node_regularization(g, lam, Y, use_node_regularization=spec.node_regularization).z
        return solve_lgc(g, lam, Z, C, tol=spec.tol, max_iter=spec.max_iter)
    if method == "WvRN":
        return wvrn(g, P0, clamp=lam > 0, variant="base", nu=spec.nu, tol=spec.tol, max_iter=spec.max_iter * 10)
    if method == "WvRN-V1":
        return wvrn(g, P0, variant="V1", nu=spec.nu, tol=spec.tol, max_iter=spec.max_iter * 10)
    if method == "WvRN-V2":
        return wvrn(g, P0, variant="V2", lam=lam, nu=1.0 / (1.0 + C), tol=spec.tol, max_iter=spec.max_iter * 10)
    if method in ("IR", "DIR", "LSR"):
        if setting == 1:
            cfg = RegionMethodConfig(method, setting=1, tol=spec.tol, max_outer_iter=spec.region_max_iter)
            return run_region_method(g, cfg, P0, S=lam > 0, trace=trace)
        cfg = RegionMethodConfig(method, setting=2, C=C, lam=lam, tol=spec.tol, max_outer_iter=spec.region_max_iter)
        return run_region_method(g, cfg, P0, trace=trace)
    raise ConfigError(f"unknown method {method!r}")


def _eval_nodes(scope: str, truth: np.ndarray, selected: np.ndarray | None) -> np.ndarray:
    known = truth >= 0
    if scope == "unselected" and selected is not None:
        known = known & ~selected
    idx = np.flatnonzero(known)
    if idx.size == 0:
        raise InputError(f"eval scope {scope!r} is empty")
    return idx


def _pct_tag(pct: float) -> str:
    return f"{pct:g}".replace(".", "p")


def run_trial(spec: ExperimentSpec, problem: _Problem, trial_index: int, seed: int, out_dir: str | None = None) -> list[RunRecord]:
    g, truth, K = problem.g, problem.truth, problem.K
    if problem.fixed_priors is not None:
        P0 = problem.fixed_priors
    else:
        P0 = generate_noisy_priors(truth, K, NoiseSpec(spec.pmin, spec.pmax, seed=seed))
    scores = scheme_scores(P0, spec.scheme)
    out = Path(out_dir) if out_dir else None

    records = []
    for pct in spec.subset_pcts:
        if spec.setting == 1:
            sel = select_subset(scores, P0, top_percent=pct, ensure_coverage=spec.coverage, scheme=spec.scheme)
            selected = sel.mask(g.n)
            lam = selected.astype(float)
            cv_nodes = sel.nodes
        else:
            selected = None
            lam = scores.copy()
            cv_nodes = np.sort(rank_nodes(scores)[: top_percent_count(pct, g.n)])
        eval_idx = _eval_nodes(spec.eval_scope, truth, selected)
        initial = accuracy(P0, truth, eval_idx)

        for method in spec.methods:
            if method == "IR" and spec.ir_trials is not None and trial_index >= spec.ir_trials:
                continue
            tag = f"{method}_s{spec.setting}_{spec.scheme}_m{_pct_tag(pct)}_t{trial_index}"
            start = time.perf_counter()
            C = 1.0
            C_chosen = None
            if method in TUNED[spec.setting]:
                plan = CVPlan(grid=spec.grid(method), k=spec.cv_folds, rule=spec.cv_rule, pct=spec.cv_pct,
                              relative=not spec.cv_absolute, seed=seed, eval_nodes=cv_nodes)

                def runner(c, lam_f, _m=method):
                    return solve_method(_m, spec.setting, g, P0, lam_f, c, spec).values

                outcome = cv_select(runner, P0, lam, plan)
                C = C_chosen = outcome.C
                if out is not None and spec.cv_trace:
                    rows = [(repr(c), f, repr(float(a))) for i, c in enumerate(plan.grid)
                            for f, a in enumerate(outcome.fold_accuracy[i])]
                    rows += [(repr(c), "mean", repr(float(m))) for c, m in zip(plan.grid, outcome.curve)]
                    io.write_rows(out / "cv_trace" / f"{tag}.csv", ["C", "fold", "accuracy"], rows)
            sol = solve_method(method, spec.setting, g, P0, lam, C, spec, trace=spec.trace)
            elapsed = time.perf_counter() - start
            if out is not None and spec.trace and sol.trace:
                io.write_rows(out / "trace" / f"{tag}.csv", ["iter", "objective", "delta"],
                              [(i, repr(o), repr(d)) for i, o, d in sol.trace])
            if out is not None and spec.dump_scores:
                (out / "scores").mkdir(parents=True, exist_ok=True)
                io.write_scores(sol.values, out / "scores" / f"{tag}.csv")
            records.append(RunRecord(
                method=method, setting=spec.setting, scheme=spec.scheme, subset_pct=float(pct),
                C_chosen=C_chosen, trial_seed=seed, accuracy=accuracy(sol.values, truth, eval_idx),
                initial_accuracy=initial, iterations=int(sol.iterations), wall_time=elapsed,
            ))
    return records


def _run_trial_job(args):
    return run_trial(*args)


def run_experiment(spec: ExperimentSpec, out_dir: str | os.PathLike | None = None) -> list[RunRecord]:
    """Run every trial and return the records in (trial, subset, method) order."""
    problem = load_problem(spec)
    seeds = trial_seeds(spec.seed, spec.trials)
    jobs = [(spec, problem, t, s, str(out_dir) if out_dir else None) for t, s in enumerate(seeds)]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(_run_trial_job, jobs))
    else:
        chunks = [_run_trial_job(j) for j in jobs]
    return [r for chunk in chunks for r in chunk]


# ------------------------------------------------------------- reporting


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_records(records, path) -> None:
    io.write_rows(path, RECORD_COLUMNS, [[_fmt(getattr(r, c)) for c in RECORD_COLUMNS] for r in records])


def write_timings(records, path) -> None:
    cols = ["method", "setting", "scheme", "subset_pct", "trial_seed", "wall_time"]
    io.write_rows(path, cols, [[_fmt(getattr(r, c)) for c in cols] for r in records])


def read_records(path) -> list[RunRecord]:
    import csv

    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(RECORD_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            out.append(RunRecord(
                method=row["method"], setting=int(row["setting"]), scheme=row["scheme"],
                subset_pct=float(row["subset_pct"]),
                C_chosen=float(row["C_chosen"]) if row["C_chosen"] else None,
                trial_seed=int(row["trial_seed"]), accuracy=float(row["accuracy"]),
                initial_accuracy=float(row["initial_accuracy"]), iterations=int(row["iterations"]),
            ))
    return out


@dataclass
class SummaryRow:
    setting: int
    scheme: str
    method: str
    subset_pct: float
    mean: float
    sd: float
    count: int


SUMMARY_COLUMNS = [f.name for f in fields(SummaryRow)]


def aggregate(records) -> list[SummaryRow]:
    """Mean and population standard deviation of accuracy per cell.

    Cells are ``(setting, scheme, method, subset_pct)``; rows come out sorted
    by setting, scheme, method (in canonical order) and subset size.
    """
    records = list(records)
    if not records:
        raise InputError("no records to aggregate")
    groups = defaultdict(list)
    for r in records:
        groups[(r.setting, r.scheme, r.method, r.subset_pct)].append(r.accuracy)
    order = {m: i for i, m in enumerate(METHODS)}
    keys = sorted(groups, key=lambda k: (k[0], k[1], order.get(k[2], len(order)), k[2], k[3]))
    rows = []
    for key in keys:
        acc = np.asarray(groups[key])
        rows.append(SummaryRow(*key, mean=float(acc.mean()), sd=float(acc.std()), count=int(acc.size)))
    return rows


def write_summary(rows, path) -> None:
    io.write_rows(path, SUMMARY_COLUMNS, [[_fmt(getattr(r, c)) for c in SUMMARY_COLUMNS] for r in rows])


def write_curves(records, out_dir) -> list[Path]:
    """One gnuplot-ready table per (setting, scheme) panel.

    Columns: subset size, the initial accuracy of the priors, then the mean
    accuracy of each method. Missing cells are written as ``NaN``.
    """
    records = list(records)
    out_dir = Path(out_dir)
    summary = aggregate(records)
    panels = sorted({(r.setting, r.scheme) for r in records})
    written = []
    for setting, scheme in panels:
        recs = [r for r in records if r.setting == setting and r.scheme == scheme]
        methods = [m for m in METHODS if any(r.method == m for r in recs)]
        methods += sorted({r.method for r in recs} - set(methods))
        pcts = sorted({r.subset_pct for r in recs})
        initial = {}
        for pct in pcts:
            seen = {}
            for r in recs:
                if r.subset_pct == pct:
                    seen.setdefault(r.trial_seed, r.initial_accuracy)
            initial[pct] = float(np.mean(list(seen.values())))
        means = {(s.method, s.subset_pct): s.mean for s in summary if s.setting == setting and s.scheme == scheme}
        path = out_dir / f"curves_s{setting}_{scheme}.dat"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# setting {setting}, scheme {scheme}: mean accuracy vs subset size (%)\n")
            fh.write("# subset_pct Initial " + " ".join(methods) + "\n")
            for pct in pcts:
                vals = [repr(initial[pct])] + [repr(means[(m, pct)]) if (m, pct) in means else "NaN" for m in methods]
                fh.write(f"{pct:g} " + " ".join(vals) + "\n")
        written.append(path)
    return written


def write_outputs(records, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records(records, out_dir / "records.csv")
    write_timings(records, out_dir / "timings.csv")
    write_summary(aggregate(records), out_dir / "summary.csv")
    write_curves(records, out_dir)


def spec_as_dict(spec: ExperimentSpec) -> dict:
    return asdict(spec)
