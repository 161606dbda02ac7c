"""Command-line interface: train, predict, inject-noise, benchmark, report,
export-model.

Exit codes: 0 success, 2 usage/flag errors, 3 I/O errors, 4 data validation
errors, 5 solver failures. Every run prints its resolved configuration and
seed so results can be reproduced from the log line alone.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import ClusterState, ClusterSvmSpec, train_cluster_svm
from .convex import train_svm
from .data import DataError, Dataset, NoiseSpec, inject_label_noise, load_dataset, normalize
from .harness import accuracy, emit_report, load_delimited_report, load_plan, run_experiment
from .lp_export import export_cluster_model
from .model_io import ModelFile, read_model, write_model
from .resvm import ReSvmSpec, train_resvm

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_SOLVER = 5

FAMILIES = ("svm", "resvm", "rlsvm", "cluster-l1", "cluster-l2")


def _parse_label_map(text: str | None):
    if text is None:
        return None
    mapping = {}
    for pair in text.split(","):
        raw, _, target = pair.partition(":")
        if target not in ("-1", "1", "+1"):
            raise DataError(f"label map entry {pair!r} must map to -1 or 1")
        mapping[raw.strip()] = int(target)
    return mapping


def _label_column(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def _load(args) -> Dataset:
    return load_dataset(args.data, _label_column(args.label_column),
                        _parse_label_map(args.label_map), delimiter=args.delimiter)


def _config_line(args, **extra) -> str:
    parts = [f"command={args.command}"]
    for key, value in sorted(vars(args).items()):
        if key in ("command", "func") or value is None:
            continue
        parts.append(f"{key.replace('_', '-')}={value}")
    parts.extend(f"{k}={v}" for k, v in extra.items())
    return "config: " + " ".join(parts)


def _add_data_flags(p: argparse.ArgumentParser):
    p.add_argument("--data", required=True, help="delimited or sparse data file")
    p.add_argument("--label-column", default="-1",
                   help="label column index or header name (default: last)")
    p.add_argument("--label-map", default=None,
                   help="raw:mapped pairs, e.g. '0:-1,1:1' (default: labels must be -1/+1)")
    p.add_argument("--delimiter", default=None, help="override delimiter auto-detection")


def cmd_train(args) -> int:
    d = _load(args)
    d.require_both_classes()
    scheme = args.normalize
    dn, params = normalize(d, scheme)
    print(_config_line(args, n=d.n, p=d.p))

    solver = args.solver
    flips: tuple[int, ...] = ()
    theta: tuple[int, ...] = ()
    k_plus = k_minus = None
    model_params: dict[str, float] = {}

    if args.model == "svm":
        sol = train_svm(dn, C=args.c, tol=args.tol,
                        deadline=_deadline(args.time_limit_s))
        if sol.status == "infeasible":
            raise RuntimeError("solver reported infeasible")
        hyper, objective, status = sol.hyperplane, sol.objective, sol.status
        model_params = {"C": args.c}
    elif args.model in ("resvm", "rlsvm"):
        mode = "hinge" if args.model == "resvm" else "ramp"
        spec = ReSvmSpec(c1=args.c1 if mode == "hinge" else args.c,
                         c2=args.c2, mode=mode,
                         solver="exact-bnb" if solver == "exact" else "alternating",
                         tol=args.tol, time_budget_s=args.time_limit_s)
        res = train_resvm(dn, spec)
        hyper, objective, status = res.hyperplane, res.objective, res.status
        flips = tuple(int(i) for i in np.flatnonzero(res.flips))
        model_params = {"c1": spec.c1, "c2": spec.c2}
    elif args.model in ("cluster-l1", "cluster-l2"):
        spec = ClusterSvmSpec(
            c1=args.c1, c2=args.c2, c3=args.c3,
            norm="l1" if args.model == "cluster-l1" else "l2",
            solver="exact-tiny" if solver in ("exact", "exact-tiny") else "alternating",
            time_budget_s=args.time_limit_s)
        init = _warm_state(args.warm_start, dn, spec) if args.warm_start else None
        res = train_cluster_svm(dn, spec, init=init)
        hyper, objective, status = res.hyperplane, res.objective, res.status
        flips = tuple(int(i) for i in np.flatnonzero(res.state.xi))
        theta = tuple(int(t) for t in res.state.theta)
        k_plus, k_minus = res.state.k_plus, res.state.k_minus
        model_params = {"c1": args.c1, "c2": args.c2, "c3": args.c3}
    else:
        raise DataError(f"unknown model {args.model!r}")

    model = ModelFile(family=args.model, params=model_params, hyperplane=hyper,
                      normalization=params, objective=objective, status=status,
                      seed=args.seed, flips=flips, theta=theta,
                      k_plus=k_plus, k_minus=k_minus)
    write_model(args.out, model)
    print(f"wrote {args.out} objective={objective!r} status={status}")
    return EXIT_OK


def _deadline(budget):
    import time
    return None if budget is None else time.perf_counter() + budget


def _warm_state(path, d: Dataset, spec: ClusterSvmSpec) -> ClusterState:
    mf = read_model(path)
    if not mf.theta or mf.k_plus is None or mf.k_minus is None:
        raise DataError(f"{path}: model file lacks cluster state for warm starting")
    theta = np.array(mf.theta, dtype=bool)
    dist = np.where(theta, spec.distances(d.X, mf.k_plus), spec.distances(d.X, mf.k_minus))
    return ClusterState(theta=theta, xi=np.zeros(d.n, dtype=bool),
                        k_plus=np.asarray(mf.k_plus, dtype=float),
                        k_minus=np.asarray(mf.k_minus, dtype=float), d=dist)


def _load_features(path, delimiter):
    """Feature-only table (no label column)."""
    from .data import _detect_delimiter, _is_number, _parse_float

    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(no, ln) for no, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise DataError(f"{path}: no rows found")
    delim = delimiter or _detect_delimiter(lines[0][1])
    rows = [(no, [c.strip() for c in (ln.split(delim) if delim else ln.split())])
            for no, ln in lines]
    if not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]  # header row
    return np.array([[_parse_float(c, no, j + 1) for j, c in enumerate(cells)]
                     for no, cells in rows])


def cmd_predict(args) -> int:
    model = read_model(args.model_file)
    print(_config_line(args))
    y = None
    if args.labeled:
        d = _load(args)
        X, y = d.X, d.y
    else:
        X = _load_features(args.data, args.delimiter)
    pred = model.predict(X)
    for value in pred:
        print(int(value))
    if y is not None:
        print(f"acc: {accuracy(pred, y):.4f}")
    return EXIT_OK


def cmd_inject_noise(args) -> int:
    d = _load(args)
    spec = NoiseSpec(rate=args.rate, seed=args.seed)
    noisy, record = inject_label_noise(d, spec)
    print(_config_line(args, flips=len(record.indices)))
    out = Path(args.out)
    rows = [",".join(f"{v!r}" for v in noisy.X[i]) + f",{noisy.y[i]}" for i in range(noisy.n)]
    out.write_text("\n".join(rows) + "\n", encoding="utf-8")
    if args.flip_record:
        Path(args.flip_record).write_text("\n".join(record.to_lines()) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(record.indices)} labels flipped)")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    plan, models = load_plan(args.plan)
    if args.workers is not None:
        from dataclasses import replace
        plan = replace(plan, workers=args.workers)
    print(_config_line(args, seed=plan.seed, datasets=len(plan.datasets),
                       models=",".join(m.family for m in models)))
    report = run_experiment(plan, models)
    ok = sum(1 for r in report.records if r.error is None)
    print(f"completed {len(report.records)} cells ({ok} trained, "
          f"{len(report.records) - ok} failed)")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for fmt, name in (("table-markdown", "report.md"), ("delimited", "records.tsv"),
                      ("boxplot-data", "boxplot.tsv")):
        path = emit_report(report, fmt, out_dir / name)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    report = load_delimited_report(args.records)
    print(_config_line(args))
    emit_report(report, args.format, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_export_model(args) -> int:
    d = _load(args)
    spec = ClusterSvmSpec(c1=args.c1, c2=args.c2, c3=args.c3,
                          norm="l1" if args.model == "cluster-l1" else "l2")
    print(_config_line(args))
    export_cluster_model(d, spec, args.out, coef_box=args.coef_box)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relabelsvm",
        description="Label-noise-robust linear SVM training and benchmarking")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write a model file")
    _add_data_flags(p)
    p.add_argument("--model", required=True, choices=FAMILIES)
    p.add_argument("--c", type=float, default=1.0, help="penalty for svm/rlsvm")
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--c3", type=float, default=1.0)
    p.add_argument("--solver", choices=("alternating", "exact", "exact-tiny"),
                   default="alternating")
    p.add_argument("--normalize", choices=("none", "minmax", "zscore"), default="minmax")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--time-limit-s", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warm-start", default=None, help="cluster model file used as initial state")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict labels with a model file")
    p.add_argument("--model-file", required=True)
    _add_data_flags(p)
    p.add_argument("--labeled", action="store_true",
                   help="the data file carries a label column; print accuracy")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("inject-noise", help="flip a fraction of labels, write the noisy copy")
    _add_data_flags(p)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--flip-record", default=None)
    p.set_defaults(func=cmd_inject_noise)

    p = sub.add_parser("benchmark", help="run a plan file and emit reports")
    p.add_argument("--plan", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("report", help="re-emit a saved delimited report")
    p.add_argument("--records", required=True)
    p.add_argument("--format", required=True,
                   choices=("table-markdown", "delimited", "boxplot-data"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export-model", help="write the cluster MIP in LP format")
    _add_data_flags(p)
    p.add_argument("--model", required=True, choices=("cluster-l1", "cluster-l2"))
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--c3", type=float, default=1.0)
    p.add_argument("--coef-box", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_model)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
