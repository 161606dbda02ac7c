"""Dataset loading, validation, feature scaling, label-flip injection and fold plans."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DataError",
    "ParseError",
    "UnmappedLabelError",
    "MissingValueError",
    "SingleClassError",
    "Dataset",
    "NormalizationParams",
    "NoiseSpec",
    "FlipRecord",
    "FoldPlan",
    "derive_seed",
    "load_dataset",
    "normalize",
    "inject_label_noise",
    "make_folds",
]


class DataError(Exception):
    """Base error for dataset construction and ingestion."""


class ParseError(DataError):
    """A cell could not be parsed as a number (names the row/column)."""


class UnmappedLabelError(DataError):
    """A label value was not covered by the label mapping."""


class MissingValueError(DataError):
    """An empty/missing cell was found (names the row/column)."""


class SingleClassError(DataError):
    """A training operation received labels from a single class."""


def derive_seed(master: int, *tags) -> int:
    """Stable 64-bit sub-seed from a master seed plus arbitrary hashable tags.

    Uses sha256 of the repr so derived streams are reproducible across runs
    and platforms, independent of Python hash randomization.
    """
    digest = hashlib.sha256(repr((int(master),) + tags).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix plus labels in {-1, +1}.

    Arrays are copied and marked read-only at construction so instances can
    be shared freely across workers.
    """

    X: np.ndarray
    y: np.ndarray
    id: str = "dataset"
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=int).ravel()
        if X.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {X.shape}")
        n, p = X.shape
        if n < 2 or p < 1:
            raise DataError(f"dataset needs n >= 2 rows and p >= 1 columns, got {n}x{p}")
        if y.shape[0] != n:
            raise DataError(f"label count {y.shape[0]} does not match row count {n}")
        if not np.all(np.isfinite(X)):
            bad = np.argwhere(~np.isfinite(X))[0]
            raise MissingValueError(f"row {bad[0] + 1}, column {bad[1] + 1}: non-finite value")
        if not np.all(np.isin(y, (-1, 1))):
            bad = int(np.flatnonzero(~np.isin(y, (-1, 1)))[0])
            raise DataError(f"row {bad + 1}: label {y[bad]} is not in {{-1, +1}}")
        if self.names is not None and len(self.names) != p:
            raise DataError(f"{len(self.names)} feature names for {p} columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def has_both_classes(self) -> bool:
        return bool(np.any(self.y == 1) and np.any(self.y == -1))

    def require_both_classes(self):
        if not self.has_both_classes:
            raise SingleClassError(
                f"dataset {self.id!r} has a single label class; training needs both"
            )

    def subset(self, indices, suffix: str = "subset") -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.X[idx], self.y[idx], id=f"{self.id}:{suffix}", names=self.names)

    def with_labels(self, y) -> "Dataset":
        return Dataset(self.X, y, id=self.id, names=self.names)


# ---------------------------------------------------------------------------
# loading


def _parse_float(token: str, row: int, col: int) -> float:
    token = token.strip()
    if token == "" or token.lower() in ("na", "nan", "?"):
        raise MissingValueError(f"row {row}, column {col}: missing value")
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"row {row}, column {col}: could not parse {token!r} as a number")


def _map_label(token: str, mapping, row: int) -> int:
    token = token.strip()
    if mapping is not None:
        if token in mapping:
            mapped = mapping[token]
        else:
            # fall back to numeric equivalence ("1" vs "1.0")
            mapped = None
            try:
                value = float(token)
            except ValueError:
                value = None
            if value is not None:
                for key, target in mapping.items():
                    try:
                        if float(key) == value:
                            mapped = target
                            break
                    except (TypeError, ValueError):
                        continue
            if mapped is None:
                raise UnmappedLabelError(f"row {row}: label {token!r} not in label mapping")
        if mapped not in (-1, 1):
            raise UnmappedLabelError(f"row {row}: label {token!r} maps to {mapped}, not -1/+1")
        return int(mapped)
    try:
        value = float(token)
    except ValueError:
        raise UnmappedLabelError(
            f"row {row}: label {token!r} is not numeric and no label mapping was given"
        )
    if value not in (-1.0, 1.0):
        raise UnmappedLabelError(f"row {row}: label {token!r} is not -1/+1; pass a label mapping")
    return int(value)


def _looks_like_libsvm(line: str) -> bool:
    parts = line.split()
    return len(parts) >= 2 and all(":" in tok for tok in parts[1:])


def _detect_delimiter(line: str) -> str | None:
    counts = {d: line.count(d) for d in (",", ";", "\t")}
    best = max(counts, key=counts.get)
    return best if counts[best] > 0 else None


def load_dataset(
    source,
    label_column=-1,
    label_mapping=None,
    *,
    delimiter: str | None = None,
    has_header: bool | None = None,
    id: str | None = None,
) -> Dataset:
    """Load a delimited or sparse ``label idx:val`` text file into a Dataset.

    ``label_column`` may be an integer position (negative allowed) or a header
    name. ``label_mapping`` maps raw label strings to -1/+1; without it the
    label column must already contain -1/+1 values. Row order is preserved.
    """
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(no, ln) for no, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ParseError(f"{path}: no data rows found")
    name = id if id is not None else path.stem

    if _looks_like_libsvm(lines[0][1]):
        return _load_libsvm(lines, label_mapping, name)

    delim = delimiter or _detect_delimiter(lines[0][1])
    rows = []
    for no, ln in lines:
        cells = [c.strip() for c in (ln.split(delim) if delim else ln.split())]
        rows.append((no, cells))
    width = len(rows[0][1])
    for no, cells in rows:
        if len(cells) != width:
            raise ParseError(f"row {no}: expected {width} columns, found {len(cells)}")
    if width < 2:
        raise ParseError(f"row {rows[0][0]}: need at least one feature column plus labels")

    header: list[str] | None = None
    if has_header is None:
        first = rows[0][1]
        numeric = all(_is_number(c) for c in first)
        has_header = not numeric
    if has_header:
        header = rows[0][1]
        rows = rows[1:]
        if not rows:
            raise ParseError(f"{path}: header present but no data rows")

    if isinstance(label_column, str):
        if header is None:
            raise DataError(f"label column {label_column!r} requires a header row")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise DataError(f"label column {label_column!r} not found in header {header}")
    else:
        label_idx = int(label_column) % width

    feature_cols = [j for j in range(width) if j != label_idx]
    X = np.empty((len(rows), len(feature_cols)))
    y = np.empty(len(rows), dtype=int)
    for i, (no, cells) in enumerate(rows):
        y[i] = _map_label(cells[label_idx], label_mapping, no)
        for jj, j in enumerate(feature_cols):
            X[i, jj] = _parse_float(cells[j], no, j + 1)
    names = tuple(header[j] for j in feature_cols) if header else None
    return Dataset(X, y, id=name, names=names)


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def _load_libsvm(lines, label_mapping, name: str) -> Dataset:
    parsed = []
    max_index = 0
    for no, ln in lines:
        parts = ln.split()
        label = _map_label(parts[0], label_mapping, no)
        feats = {}
        for tok in parts[1:]:
            idx_s, _, val_s = tok.partition(":")
            try:
                idx = int(idx_s)
            except ValueError:
                raise ParseError(f"row {no}: bad feature index {idx_s!r}")
            if idx < 1:
                raise ParseError(f"row {no}: feature indices are 1-based, got {idx}")
            feats[idx] = _parse_float(val_s, no, idx)
            max_index = max(max_index, idx)
        parsed.append((label, feats))
    if max_index == 0:
        raise ParseError("no feature values found in sparse file")
    X = np.zeros((len(parsed), max_index))
    y = np.empty(len(parsed), dtype=int)
    for i, (label, feats) in enumerate(parsed):
        y[i] = label
        for idx, val in feats.items():
            X[i, idx - 1] = val
    return Dataset(X, y, id=name)


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormalizationParams:
    """Per-column affine transform (x - offset) / scale, invertible.

    Constant columns are passed through unchanged and listed in
    ``constant_columns``.
    """

    scheme: str
    offset: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=float))

    @property
    def constant_columns(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.scale == 0.0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        scale = np.where(self.scale == 0.0, 1.0, self.scale)
        offset = np.where(self.scale == 0.0, 0.0, self.offset)
        return (np.asarray(X, dtype=float) - offset) / scale

    def invert(self, X: np.ndarray) -> np.ndarray:
        scale = np.where(self.scale == 0.0, 1.0, self.scale)
        offset = np.where(self.scale == 0.0, 0.0, self.offset)
        return np.asarray(X, dtype=float) * scale + offset

    def apply(self, d: Dataset) -> Dataset:
        return Dataset(self.transform(d.X), d.y, id=d.id, names=d.names)


def normalize(d: Dataset, scheme: str = "minmax") -> tuple[Dataset, NormalizationParams]:
    """Scale features per column; returns the scaled copy plus the transform.

    Schemes: ``none`` (identity), ``minmax`` (to [0, 1]) and ``zscore``.
    Columns with zero spread are passed through unscaled; they are flagged in
    the returned params rather than raising.
    """
    p = d.p
    if scheme == "none":
        params = NormalizationParams("none", np.zeros(p), np.ones(p))
    elif scheme == "minmax":
        lo = d.X.min(axis=0)
        span = d.X.max(axis=0) - lo
        params = NormalizationParams("minmax", lo, span)
    elif scheme == "zscore":
        mean = d.X.mean(axis=0)
        std = d.X.std(axis=0)
        params = NormalizationParams("zscore", mean, std)
    else:
        raise DataError(f"unknown normalization scheme {scheme!r}")
    return params.apply(d), params


# ---------------------------------------------------------------------------
# label-flip noise


@dataclass(frozen=True)
class NoiseSpec:
    """Exact-count label flipping: round(rate * n) labels negated, seeded."""

    rate: float
    seed: int
    mode: str = "exact-count"

    def __post_init__(self):
        if not 0.0 <= self.rate <= 0.5:
            raise DataError(f"noise rate must lie in [0, 0.5], got {self.rate}")
        if self.mode != "exact-count":
            raise DataError(f"unknown noise mode {self.mode!r}")

    def flip_count(self, n: int) -> int:
        # round-half-up so the count is platform independent
        return int(np.floor(self.rate * n + 0.5))


@dataclass(frozen=True)
class FlipRecord:
    """Audit record of which row indices had their labels negated."""

    indices: tuple[int, ...]
    rate: float
    seed: int

    def to_lines(self) -> list[str]:
        return [
            "# flip-record v1",
            f"rate {self.rate!r}",
            f"seed {self.seed}",
            "indices " + " ".join(str(i) for i in self.indices),
        ]

    @classmethod
    def from_lines(cls, lines) -> "FlipRecord":
        fields = {}
        for ln in lines:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            key, _, rest = ln.partition(" ")
            fields[key] = rest.strip()
        indices = tuple(int(t) for t in fields.get("indices", "").split())
        return cls(indices=indices, rate=float(fields["rate"]), seed=int(fields["seed"]))


def inject_label_noise(d: Dataset, spec: NoiseSpec) -> tuple[Dataset, FlipRecord]:
    """Negate exactly ``round(rate * n)`` labels chosen uniformly without replacement.

    The input dataset is untouched; the same (dataset, spec) pair always
    produces the same flips.
    """
    count = spec.flip_count(d.n)
    rng = np.random.default_rng(spec.seed)
    chosen = np.sort(rng.choice(d.n, size=count, replace=False)) if count else np.array([], dtype=int)
    y = d.y.copy()
    y[chosen] = -y[chosen]
    record = FlipRecord(indices=tuple(int(i) for i in chosen), rate=spec.rate, seed=spec.seed)
    return d.with_labels(y), record


# ---------------------------------------------------------------------------
# cross-validation folds


@dataclass(frozen=True)
class FoldPlan:
    """Repeated k-fold assignment; fold sizes within each repeat differ by at most 1."""

    k: int
    repeats: int
    seed: int
    assignment: np.ndarray  # (repeats, n) fold id per point

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        n = a.shape[1]
        for r in range(self.repeats):
            counts = np.bincount(a[r], minlength=self.k)
            if counts.sum() != n or len(counts) != self.k:
                raise DataError(f"repeat {r}: folds do not partition the index set")
            if counts.max() - counts.min() > 1:
                raise DataError(f"repeat {r}: fold sizes differ by more than 1")

    @property
    def n(self) -> int:
        return self.assignment.shape[1]

    def fold_indices(self, repeat: int, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment[repeat] == fold)

    def complement_indices(self, repeat: int, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment[repeat] != fold)

    def cells(self):
        for r in range(self.repeats):
            for f in range(self.k):
                yield r, f

    def to_lines(self) -> list[str]:
        lines = ["# fold-plan v1", f"k {self.k}", f"repeats {self.repeats}", f"seed {self.seed}"]
        for r in range(self.repeats):
            lines.append(f"repeat {r} " + " ".join(str(v) for v in self.assignment[r]))
        return lines


def make_folds(n: int, k: int, repeats: int = 1, seed: int = 0) -> FoldPlan:
    """Deterministic repeated k-fold split with balanced fold sizes."""
    if k < 2 or k > n:
        raise DataError(f"fold count k={k} must satisfy 2 <= k <= n={n}")
    if repeats < 1:
        raise DataError(f"repeats must be positive, got {repeats}")
    assignment = np.empty((repeats, n), dtype=int)
    base, extra = divmod(n, k)
    sizes = [base + 1 if f < extra else base for f in range(k)]
    fold_of_slot = np.repeat(np.arange(k), sizes)
    for r in range(repeats):
        rng = np.random.default_rng(derive_seed(seed, "fold-repeat", r))
        perm = rng.permutation(n)
        assignment[r, perm] = fold_of_slot
    return FoldPlan(k=k, repeats=repeats, seed=seed, assignment=assignment)
