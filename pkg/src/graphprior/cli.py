"""Command-line entry point: ``graphprior <subcommand> ...``.

Failures print a single ``error: <category>: <message>`` line to stderr and
exit with status 1.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, GraphPriorError, InputError
from .experiment import (
    SPEC_KEYS,
    ExperimentSpec,
    aggregate,
    read_records,
    read_spec_file,
    run_experiment,
    write_curves,
    write_outputs,
    write_summary,
)
from .priors import (
    SCHEMES,
    NoiseSpec,
    derived_labels,
    generate_noisy_priors,
    rank_nodes,
    scheme_scores,
    select_subset,
    top_percent_count,
)
from .synthetic import SyntheticBlockSpec, generate_block_graph


def _spec_key_help() -> str:
    width = max(len(k) for k in SPEC_KEYS)
    lines = ["spec-file keys (key = value, lists comma-separated; flags override):"]
    lines += [f"  {k:<{width}}  {v}" for k, v in SPEC_KEYS.items()]
    return "\n".join(lines)


def _cmd_generate(args) -> None:
    spec = SyntheticBlockSpec(
        blocks=[int(b) for b in args.blocks.split(",")], p_within=args.p_within,
        p_across=args.p_across, weight=args.weight, seed=args.seed,
    )
    g, truth = generate_block_graph(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_edge_list(g, out / "graph.tsv")
    io.write_labels(truth, out / "labels.tsv")
    print(f"wrote {out / 'graph.tsv'} ({g.n} nodes, {g.num_edges} edges) and {out / 'labels.tsv'}")


def _cmd_noise(args) -> None:
    truth = io.read_labels(args.labels, n=args.nodes)
    if np.any(truth < 0):
        raise InputError("every node needs a truth label to simulate priors")
    K = args.classes or int(truth.max()) + 1
    P = generate_noisy_priors(truth, K, NoiseSpec(args.pmin, args.pmax, seed=args.seed))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_priors(P, out / "priors.csv")
    print(f"wrote {out / 'priors.csv'} ({P.shape[0]} nodes, {K} classes)")


def _cmd_select(args) -> None:
    P = io.read_priors(args.priors, n=args.nodes)
    scores = scheme_scores(P, args.scheme)
    n = P.shape[0]
    if args.setting == 1:
        if (args.threshold is None) == (args.subset_pct is None):
            raise ConfigError("Setting 1 needs exactly one of --threshold or --subset-pct")
        sel = select_subset(scores, P, threshold=args.threshold, top_percent=args.subset_pct,
                            ensure_coverage=not args.no_coverage, scheme=args.scheme)
        chosen = sel.mask(n)
        lam = chosen.astype(float)
    else:
        pct = 100.0 if args.subset_pct is None else args.subset_pct
        chosen = np.zeros(n, dtype=bool)
        chosen[rank_nodes(scores)[: top_percent_count(pct, n)]] = True
        lam = scores
    labels = derived_labels(P)
    out = Path(args.out_dir)
    io.write_rows(out / "selection.csv", ["node", "score", "selected", "derived_label", "lambda"],
                  [(i, repr(float(scores[i])), int(chosen[i]), int(labels[i]), repr(float(lam[i])))
                   for i in range(n)])
    print(f"wrote {out / 'selection.csv'} ({int(chosen.sum())} of {n} nodes selected)")


# flag name -> spec key for the run subcommand
_RUN_FLAGS = {
    "graph": "graph", "nodes": "nodes", "labels": "labels", "priors": "priors", "classes": "classes",
    "methods": "methods", "setting": "setting", "scheme": "scheme", "subset_pcts": "subset_pcts",
    "trials": "trials", "ir_trials": "ir_trials", "seed": "seed", "pmin": "pmin", "pmax": "pmax",
    "eval_scope": "eval_scope", "cv_rule": "cv_rule", "cv_pct": "cv_pct", "workers": "workers",
}


def _cmd_run(args) -> None:
    mapping = read_spec_file(args.spec) if args.spec else {}
    for flag, key in _RUN_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            mapping[key] = value
    spec = ExperimentSpec.from_mapping(mapping)
    spec.cv_trace = args.cv_trace
    spec.trace = args.trace
    spec.dump_scores = args.dump_scores
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = run_experiment(spec, out_dir=out)
    write_outputs(records, out)
    print(f"wrote {len(records)} records to {out / 'records.csv'}")


def _cmd_report(args) -> None:
    records = []
    for path in args.records:
        records.extend(read_records(path))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = aggregate(records)
    write_summary(rows, out / "summary.csv")
    write_curves(records, out)
    for r in rows:
        print(f"S{r.setting} {r.scheme} {r.method:8s} {r.subset_pct:5g}%  {r.mean:.4f} +/- {r.sd:.4f} (n={r.count})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphprior", description="Collective classification with noisy class priors.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthetic block graph and its truth labels")
    p.add_argument("--blocks", default="100,100", help="comma-separated block sizes")
    p.add_argument("--p-within", type=float, default=0.1)
    p.add_argument("--p-across", type=float, default=0.005)
    p.add_argument("--weight", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("noise", help="simulate noisy priors from truth labels")
    p.add_argument("--labels", required=True)
    p.add_argument("--nodes", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--pmin", type=float, default=0.4)
    p.add_argument("--pmax", type=float, default=0.99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_noise)

    p = sub.add_parser("select", help="confidence scores and the selected subset")
    p.add_argument("--priors", required=True)
    p.add_argument("--nodes", type=int)
    p.add_argument("--scheme", choices=SCHEMES, default="EBS")
    p.add_argument("--setting", type=int, choices=(1, 2), default=1)
    p.add_argument("--subset-pct", type=float, help="top percent of nodes by score")
    p.add_argument("--threshold", type=float, help="Setting 1: keep nodes with score >= threshold")
    p.add_argument("--no-coverage", action="store_true", help="do not force one node per class")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("run", help="full experiment", epilog=_spec_key_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--spec", help="spec file of key = value lines")
    p.add_argument("--graph")
    p.add_argument("--nodes", type=int)
    p.add_argument("--labels")
    p.add_argument("--priors")
    p.add_argument("--classes", type=int)
    p.add_argument("--methods")
    p.add_argument("--setting", type=int, choices=(1, 2))
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--subset-pcts")
    p.add_argument("--trials", type=int)
    p.add_argument("--ir-trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--pmin", type=float)
    p.add_argument("--pmax", type=float)
    p.add_argument("--eval-scope")
    p.add_argument("--cv-rule")
    p.add_argument("--cv-pct", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--cv-trace", action="store_true", help="write per-fold CV accuracies")
    p.add_argument("--trace", action="store_true", help="write region-method objective traces")
    p.add_argument("--dump-scores", action="store_true", help="write the raw score matrix of every run")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="aggregate existing records.csv files")
    p.add_argument("records", nargs="+")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except GraphPriorError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
