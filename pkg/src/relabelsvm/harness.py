"""Noise-injection benchmark protocol: repeated cross-validation with label
flips applied to the training portion only, hyperparameter grids, accuracy
scoring and report emission.

The default fold orientation trains on ONE fold and tests on the remaining
k-1 ("paper" orientation); the conventional orientation is available behind a
flag. Reported best-over-grid numbers take the best test accuracy across the
grid, which is an optimistic protocol (no nested validation); it is kept for
comparability and labeled as such in the reports.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cluster import ClusterSvmSpec, train_cluster_svm_alternating
from .convex import Hyperplane, train_svm
from .data import DataError, Dataset, NoiseSpec, derive_seed, inject_label_noise, \
    make_folds, normalize
from .resvm import ReSvmSpec, train_resvm_alternating

__all__ = [
    "GridSpec",
    "ModelEntry",
    "ExperimentPlan",
    "CellRecord",
    "ExperimentReport",
    "accuracy",
    "run_experiment",
    "emit_report",
    "two_gaussians",
    "load_plan",
    "default_models",
]

MODEL_FAMILIES = ("svm", "resvm", "rlsvm", "cluster-l1", "cluster-l2")
REPORT_VERSION = "# relabelsvm-report v1"
PLAN_VERSION = "# relabelsvm-plan v1"


def _decade_grid(lo: int, hi: int) -> tuple[float, ...]:
    return tuple(10.0 ** i for i in range(lo, hi + 1))


@dataclass(frozen=True)
class GridSpec:
    """Ordered per-parameter value lists; cells are the cartesian product."""

    params: tuple[tuple[str, tuple[float, ...]], ...]

    @classmethod
    def from_dict(cls, mapping) -> "GridSpec":
        return cls(tuple((k, tuple(float(v) for v in vs)) for k, vs in mapping.items()))

    @classmethod
    def defaults(cls, family: str) -> "GridSpec":
        wide = _decade_grid(-5, 5)
        if family == "svm":
            return cls.from_dict({"C": wide})
        if family == "resvm":
            return cls.from_dict({"c1": wide, "c2": wide})
        if family == "rlsvm":
            return cls.from_dict({"C": wide})
        if family in ("cluster-l1", "cluster-l2"):
            return cls.from_dict({"c1": wide, "c2": wide, "c3": _decade_grid(-3, 0)})
        raise ValueError(f"unknown model family {family!r}")

    def cells(self) -> list[tuple[tuple[str, float], ...]]:
        names = [k for k, _ in self.params]
        value_lists = [vs for _, vs in self.params]
        return [tuple(zip(names, combo)) for combo in itertools.product(*value_lists)]


@dataclass(frozen=True)
class ModelEntry:
    family: str
    grid: GridSpec

    def __post_init__(self):
        if self.family not in MODEL_FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")


def default_models(families) -> list[ModelEntry]:
    return [ModelEntry(f, GridSpec.defaults(f)) for f in families]


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to reproduce a sweep, including every seed."""

    datasets: tuple[Dataset, ...]
    noise_rates: tuple[float, ...] = (0.0, 0.2, 0.3, 0.4, 0.5)
    folds: int = 5
    repeats: int = 5
    seed: int = 0
    time_budget_s: float | None = 30.0
    orientation: str = "paper"  # paper: train on 1 fold | conventional: train on k-1
    normalize_scheme: str = "minmax"
    warm_start_chain: bool = False
    solver_tol: float = 1e-8
    cluster_cycles: int = 10
    cluster_iterations: int = 150
    cluster_restarts: int = 2
    workers: int = 1

    def __post_init__(self):
        if self.orientation not in ("paper", "conventional"):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if any(not 0.0 <= r <= 0.5 for r in self.noise_rates):
            raise ValueError("noise rates must lie in [0, 0.5]")


@dataclass(frozen=True)
class CellRecord:
    """One (dataset, model, rate, repeat, fold, grid cell) training outcome."""

    dataset: str
    model: str
    rate: float
    repeat: int
    fold: int
    cell: tuple[tuple[str, float], ...]
    acc: float | None
    seconds: float
    status: str
    error: str | None = None
    flipped: tuple[int, ...] = ()  # global row indices whose training labels were flipped

    def cell_label(self) -> str:
        return ",".join(f"{k}={v:g}" for k, v in self.cell)


@dataclass
class ExperimentReport:
    records: list[CellRecord]
    plan_seed: int
    orientation: str
    rates: tuple[float, ...]
    models: tuple[str, ...]
    datasets: tuple[str, ...]

    def _matching(self, dataset=None, model=None, rate=None, cell=None):
        for r in self.records:
            if dataset is not None and r.dataset != dataset:
                continue
            if model is not None and r.model != model:
                continue
            if rate is not None and r.rate != rate:
                continue
            if cell is not None and r.cell != cell:
                continue
            yield r

    def mean_acc(self, dataset, model, rate, cell) -> float | None:
        vals = [r.acc for r in self._matching(dataset, model, rate, cell) if r.acc is not None]
        return float(np.mean(vals)) if vals else None

    def cells_for(self, model) -> list:
        seen = []
        for r in self.records:
            if r.model == model and r.cell not in seen:
                seen.append(r.cell)
        return seen

    def best_over_grid(self, dataset, model, rate, how: str = "mean-then-best") -> float | None:
        """Grid aggregate. mean-then-best: best cell by fold-mean accuracy.
        best-then-mean: per (repeat, fold) best cell, averaged."""
        if how == "mean-then-best":
            means = [self.mean_acc(dataset, model, rate, c) for c in self.cells_for(model)]
            means = [m for m in means if m is not None]
            return max(means) if means else None
        if how == "best-then-mean":
            per_fold: dict[tuple[int, int], float] = {}
            for r in self._matching(dataset, model, rate):
                if r.acc is None:
                    continue
                key = (r.repeat, r.fold)
                per_fold[key] = max(per_fold.get(key, -np.inf), r.acc)
            return float(np.mean(list(per_fold.values()))) if per_fold else None
        raise ValueError(f"unknown aggregate {how!r}")

    def instance_best_accs(self, dataset, model) -> list[float]:
        """Per (rate, repeat, fold) best-over-grid accuracy, pooled across rates."""
        per_inst: dict[tuple[float, int, int], float] = {}
        for r in self._matching(dataset, model):
            if r.acc is None:
                continue
            key = (r.rate, r.repeat, r.fold)
            per_inst[key] = max(per_inst.get(key, -np.inf), r.acc)
        return [per_inst[k] for k in sorted(per_inst)]


def accuracy(predicted, actual) -> float:
    """Percentage of matching labels: 100 * matches / total."""
    predicted = np.asarray(predicted).ravel()
    actual = np.asarray(actual).ravel()
    if predicted.shape != actual.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {actual.shape}")
    if predicted.size == 0:
        raise ValueError("accuracy of empty label sequences is undefined")
    return 100.0 * float(np.mean(predicted == actual))


def two_gaussians(n: int = 200, p: int = 2, separation: float = 4.0, seed: int = 0,
                  balance: float = 0.5, dataset_id: str | None = None) -> Dataset:
    """Synthetic two-blob dataset: unit-variance gaussians ``separation``
    apart along the first axis, labels +-1 by blob."""
    rng = np.random.default_rng(seed)
    n_pos = int(round(n * balance))
    n_neg = n - n_pos
    X = rng.standard_normal((n, p))
    y = np.concatenate([np.ones(n_pos, dtype=int), -np.ones(n_neg, dtype=int)])
    X[:n_pos, 0] += separation / 2.0
    X[n_pos:, 0] -= separation / 2.0
    perm = rng.permutation(n)
    name = dataset_id or f"two-gaussians-{seed}"
    return Dataset(X[perm], y[perm], id=name)


# ---------------------------------------------------------------------------
# training dispatch


def _train_cell(family: str, params: dict, train: Dataset, plan: ExperimentPlan,
                warm_state=None):
    """Train one grid cell and return (hyperplane, status, aux-state)."""
    budget = plan.time_budget_s
    if family == "svm":
        sol = train_svm(train, C=params["C"], tol=plan.solver_tol,
                        deadline=None if budget is None else time.perf_counter() + budget)
        return sol.hyperplane, sol.status, None
    if family == "resvm":
        spec = ReSvmSpec(c1=params["c1"], c2=params["c2"], mode="hinge",
                         tol=plan.solver_tol, time_budget_s=budget)
        res = train_resvm_alternating(train, spec)
        return res.hyperplane, res.status, None
    if family == "rlsvm":
        spec = ReSvmSpec(c1=params["C"], mode="ramp", tol=plan.solver_tol,
                         time_budget_s=budget)
        res = train_resvm_alternating(train, spec)
        return res.hyperplane, res.status, None
    if family in ("cluster-l1", "cluster-l2"):
        spec = ClusterSvmSpec(
            c1=params["c1"], c2=params["c2"], c3=params["c3"],
            norm="l1" if family == "cluster-l1" else "l2",
            max_cycles=plan.cluster_cycles,
            subgrad_iterations=plan.cluster_iterations,
            subgrad_restarts=plan.cluster_restarts,
            time_budget_s=budget)
        res = train_cluster_svm_alternating(train, spec, init=warm_state)
        return res.hyperplane, res.status, res.state
    raise ValueError(f"unknown model family {family!r}")


def _run_task(plan: ExperimentPlan, models: list[ModelEntry], ds_index: int,
              rate: float, repeat: int, fold: int) -> list[CellRecord]:
    """All grid cells of all models for one (dataset, rate, repeat, fold)."""
    ds = plan.datasets[ds_index]
    folds = make_folds(ds.n, plan.folds, plan.repeats, derive_seed(plan.seed, "folds", ds.id))
    if plan.orientation == "paper":
        train_idx = folds.fold_indices(repeat, fold)
        test_idx = folds.complement_indices(repeat, fold)
    else:
        train_idx = folds.complement_indices(repeat, fold)
        test_idx = folds.fold_indices(repeat, fold)

    records: list[CellRecord] = []
    base = dict(dataset=ds.id, rate=rate, repeat=repeat, fold=fold)
    try:
        train_raw = ds.subset(train_idx, "train")
        noise = NoiseSpec(rate=rate, seed=derive_seed(plan.seed, "noise", ds.id,
                                                      repr(rate), repeat, fold))
        noisy, fliprec = inject_label_noise(train_raw, noise)
        flipped_global = tuple(int(train_idx[i]) for i in fliprec.indices)
        noisy_norm, norm_params = normalize(noisy, plan.normalize_scheme)
        X_test = norm_params.transform(ds.X[test_idx])
        y_test = ds.y[test_idx]
    except DataError as exc:
        for entry in models:
            for cell in entry.grid.cells():
                records.append(CellRecord(**base, model=entry.family, cell=cell, acc=None,
                                          seconds=0.0, status="error", error=str(exc)))
        return records

    chain_states: dict[tuple, object] = {}
    for entry in models:
        for cell in entry.grid.cells():
            params = dict(cell)
            warm = None
            if entry.family == "cluster-l2" and plan.warm_start_chain:
                warm = chain_states.get(cell)
                if warm is None:
                    try:
                        _, _, warm = _train_cell("cluster-l1", params, noisy_norm, plan)
                    except (DataError, ValueError):
                        warm = None
            t0 = time.perf_counter()
            try:
                noisy_norm.require_both_classes()
                h, status, aux = _train_cell(entry.family, params, noisy_norm, plan, warm)
                acc = accuracy(h.predict(X_test), y_test)
                err = None
            except (DataError, ValueError) as exc:
                h, status, aux, acc, err = None, "error", None, None, str(exc)
            seconds = time.perf_counter() - t0
            if entry.family == "cluster-l1" and plan.warm_start_chain and aux is not None:
                chain_states[cell] = aux
            records.append(CellRecord(**base, model=entry.family, cell=cell, acc=acc,
                                      seconds=seconds, status=status, error=err,
                                      flipped=flipped_global))
    return records


def run_experiment(plan: ExperimentPlan, models: list[ModelEntry]) -> ExperimentReport:
    """Run the full sweep; per-cell failures are recorded, never raised.

    Deterministic under the plan seed: every random draw flows through
    derived sub-seeds, and records are assembled in sorted task order
    regardless of worker scheduling.
    """
    tasks = [(di, rate, repeat, fold)
             for di in range(len(plan.datasets))
             for rate in plan.noise_rates
             for repeat in range(plan.repeats)
             for fold in range(plan.folds)]
    results: dict[tuple, list[CellRecord]] = {}
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            futures = {key: pool.submit(_run_task, plan, models, *key) for key in tasks}
            for key, fut in futures.items():
                results[key] = fut.result()
    else:
        for key in tasks:
            results[key] = _run_task(plan, models, *key)
    records: list[CellRecord] = []
    for key in sorted(results, key=lambda k: (plan.datasets[k[0]].id, k[1], k[2], k[3])):
        records.extend(results[key])
    return ExperimentReport(
        records=records, plan_seed=plan.seed, orientation=plan.orientation,
        rates=plan.noise_rates, models=tuple(m.family for m in models),
        datasets=tuple(d.id for d in plan.datasets))


# ---------------------------------------------------------------------------
# report emission


def _fmt(value) -> str:
    return "NA" if value is None else f"{value:.4f}"


def emit_report(report: ExperimentReport, format: str, path) -> str:
    """Write a report file; returns the path. Formats: table-markdown,
    delimited, boxplot-data. Output is byte-deterministic for a fixed seeded
    run (timings are deliberately excluded)."""
    if not report.records:
        raise ValueError("cannot emit an empty report")
    if format == "table-markdown":
        text = _emit_markdown(report)
    elif format == "delimited":
        text = _emit_delimited(report)
    elif format == "boxplot-data":
        text = _emit_boxplot(report)
    else:
        raise ValueError(f"unknown report format {format!r}")
    from pathlib import Path
    Path(path).write_text(text, encoding="utf-8")
    return str(path)


def _emit_markdown(report: ExperimentReport) -> str:
    lines = [REPORT_VERSION + f" format=table-markdown orientation={report.orientation} "
             f"seed={report.plan_seed}", ""]
    for how, title in (("mean-then-best", "best grid cell by fold-mean accuracy"),
                       ("best-then-mean", "per-fold best cell, averaged")):
        lines.append(f"## Aggregate: {how} ({title})")
        lines.append("")
        lines.append("Best-over-grid is reported on test accuracy (optimistic protocol, "
                     "no nested validation).")
        lines.append("")
        header = "| dataset | model | " + " | ".join(f"{r:g}" for r in report.rates) + " |"
        lines.append(header)
        lines.append("|" + "---|" * (2 + len(report.rates)))
        for ds in report.datasets:
            for model in report.models:
                cells = [_fmt(report.best_over_grid(ds, model, r, how)) for r in report.rates]
                lines.append(f"| {ds} | {model} | " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines) + "\n"


def _emit_delimited(report: ExperimentReport) -> str:
    lines = [REPORT_VERSION + f" format=delimited orientation={report.orientation} "
             f"seed={report.plan_seed}",
             "dataset\tmodel\trate\trepeat\tfold\tcell\tacc\tstatus\terror"]
    for r in report.records:
        lines.append("\t".join([
            r.dataset, r.model, f"{r.rate:g}", str(r.repeat), str(r.fold),
            r.cell_label(), _fmt(r.acc), r.status, r.error or ""]))
    return "\n".join(lines) + "\n"


def _emit_boxplot(report: ExperimentReport) -> str:
    """Quantile series per dataset x model over per-instance best accuracies.

    Quartiles use linear interpolation (the 25th/75th percentiles of
    1, 2, 3, 4, 5 are 2 and 4).
    """
    lines = [REPORT_VERSION + f" format=boxplot-data orientation={report.orientation} "
             f"seed={report.plan_seed}",
             "dataset\tmodel\tcount\tmin\tq1\tmedian\tq3\tmax"]
    for ds in report.datasets:
        for model in report.models:
            vals = report.instance_best_accs(ds, model)
            if not vals:
                continue
            q = np.percentile(vals, [0, 25, 50, 75, 100])
            lines.append("\t".join([ds, model, str(len(vals))] + [f"{v:.4f}" for v in q]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# plan files


def load_plan(path) -> tuple[ExperimentPlan, list[ModelEntry]]:
    """Parse a line-oriented key/value plan file.

    Datasets come from ``dataset <id> <path> [label_column=..] [map=a:-1,b:1]``
    lines or ``synthetic <id> two-gaussians n=.. p=.. sep=.. seed=..`` lines;
    grids can be overridden with ``grid <family> <param> v1,v2,...``.
    Malformed lines raise DataError naming the line number.
    """
    from pathlib import Path
    from .data import load_dataset

    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read plan {path}: {exc}") from exc

    fields: dict[str, str] = {}
    datasets: list[Dataset] = []
    grids: dict[str, dict[str, tuple[float, ...]]] = {}
    families: list[str] = []

    for lineno, line in enumerate(raw.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        key = parts[0]
        try:
            if key == "dataset":
                name, file_path = parts[1], parts[2]
                opts = dict(p.split("=", 1) for p in parts[3:])
                mapping = None
                if "map" in opts:
                    mapping = {}
                    for pair in opts["map"].split(","):
                        raw_v, mapped = pair.split(":")
                        mapping[raw_v] = int(mapped)
                col = opts.get("label_column", "-1")
                label_column = int(col) if _is_intlike(col) else col
                datasets.append(load_dataset(file_path, label_column, mapping, id=name))
            elif key == "synthetic":
                name, kind = parts[1], parts[2]
                if kind != "two-gaussians":
                    raise ValueError(f"unknown synthetic kind {kind!r}")
                opts = dict(p.split("=", 1) for p in parts[3:])
                datasets.append(two_gaussians(
                    n=int(opts.get("n", 200)), p=int(opts.get("p", 2)),
                    separation=float(opts.get("sep", 4.0)),
                    seed=int(opts.get("seed", 0)),
                    balance=float(opts.get("balance", 0.5)), dataset_id=name))
            elif key == "grid":
                family, param = parts[1], parts[2]
                values = tuple(float(v) for v in parts[3].split(","))
                grids.setdefault(family, {})[param] = values
            elif key == "models":
                families = [f.strip() for f in parts[1].split(",") if f.strip()]
            else:
                fields[key] = " ".join(parts[1:])
        except (IndexError, ValueError, KeyError) as exc:
            raise DataError(f"plan line {lineno}: {line!r}: {exc}") from exc

    if not datasets:
        raise DataError("plan declares no datasets")
    if not families:
        raise DataError("plan declares no models")

    def _get(name, cast, default):
        if name not in fields:
            return default
        try:
            return cast(fields[name])
        except ValueError as exc:
            raise DataError(f"plan field {name}: {exc}") from exc

    rates_text = fields.get("rates", "0,0.2,0.3,0.4,0.5")
    try:
        rates = tuple(float(v) for v in rates_text.split(","))
    except ValueError as exc:
        raise DataError(f"plan field rates: {exc}") from exc

    budget_text = fields.get("time_limit_s", "30")
    budget = None if budget_text in ("none", "None") else float(budget_text)

    plan = ExperimentPlan(
        datasets=tuple(datasets),
        noise_rates=rates,
        folds=_get("folds", int, 5),
        repeats=_get("repeats", int, 5),
        seed=_get("seed", int, 0),
        time_budget_s=budget,
        orientation=fields.get("orientation", "paper"),
        normalize_scheme=fields.get("normalize", "minmax"),
        warm_start_chain=_get("warm_start_chain", lambda s: s.strip() in ("1", "true", "yes"), False),
        cluster_cycles=_get("cluster_cycles", int, 10),
        cluster_iterations=_get("cluster_iterations", int, 150),
        cluster_restarts=_get("cluster_restarts", int, 2),
        workers=_get("workers", int, 1),
    )
    models = []
    for family in families:
        grid = GridSpec.from_dict(grids[family]) if family in grids else GridSpec.defaults(family)
        models.append(ModelEntry(family, grid))
    return plan, models


def _is_intlike(text: str) -> bool:
    try:
        int(text)
        return True
    except ValueError:
        return False


def load_delimited_report(path) -> ExperimentReport:
    """Read a delimited report back for re-emission in another format."""
    from pathlib import Path

    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc
    lines = raw.splitlines()
    if not lines or not lines[0].startswith(REPORT_VERSION):
        raise DataError(f"{path}: not a recognized report file")
    header_fields = dict(tok.split("=", 1) for tok in lines[0].split() if "=" in tok)
    records = []
    for lineno, ln in enumerate(lines[2:], start=3):
        if not ln.strip():
            continue
        cols = ln.split("\t")
        if len(cols) != 9:
            raise DataError(f"report line {lineno}: expected 9 columns, found {len(cols)}")
        cell = tuple()
        if cols[5]:
            cell = tuple((kv.split("=")[0], float(kv.split("=")[1]))
                         for kv in cols[5].split(","))
        records.append(CellRecord(
            dataset=cols[0], model=cols[1], rate=float(cols[2]), repeat=int(cols[3]),
            fold=int(cols[4]), cell=cell, acc=None if cols[6] == "NA" else float(cols[6]),
            seconds=0.0, status=cols[7], error=cols[8] or None))
    rates = tuple(sorted({r.rate for r in records}))
    models = tuple(dict.fromkeys(r.model for r in records))
    datasets = tuple(dict.fromkeys(r.dataset for r in records))
    return ExperimentReport(records=records, plan_seed=int(header_fields.get("seed", 0)),
                            orientation=header_fields.get("orientation", "paper"),
                            rates=rates, models=models, datasets=datasets)
