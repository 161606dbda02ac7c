"""Self-describing model files.

A model file carries everything prediction needs (family, parameters,
normalization transform, w, b) plus the training decisions (flip indices,
cluster assignment, reference points) for auditing. Prediction depends on
(w, b) and the normalization only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .convex import Hyperplane
from .data import DataError, NormalizationParams

__all__ = ["ModelFile", "write_model", "read_model"]

MODEL_VERSION = "# relabelsvm-model v1"


@dataclass
class ModelFile:
    family: str
    params: dict
    hyperplane: Hyperplane
    normalization: NormalizationParams | None = None
    objective: float | None = None
    status: str | None = None
    seed: int | None = None
    flips: tuple[int, ...] = ()
    theta: tuple[int, ...] = ()
    k_plus: np.ndarray | None = None
    k_minus: np.ndarray | None = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.hyperplane.w.shape[0]:
            raise DataError(
                f"model expects {self.hyperplane.w.shape[0]} features, got {X.shape[1]}")
        if self.normalization is not None:
            X = self.normalization.transform(X)
        return self.hyperplane.predict(X)


def _vec(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def write_model(path, model: ModelFile) -> str:
    lines = [MODEL_VERSION, f"family {model.family}"]
    for key in sorted(model.params):
        lines.append(f"param {key} {model.params[key]!r}")
    if model.normalization is not None and model.normalization.scheme != "none":
        lines.append(f"normalize {model.normalization.scheme}")
        lines.append("norm_offset " + _vec(model.normalization.offset))
        lines.append("norm_scale " + _vec(model.normalization.scale))
    else:
        lines.append("normalize none")
    lines.append("w " + _vec(model.hyperplane.w))
    lines.append(f"b {model.hyperplane.b!r}")
    if model.objective is not None:
        lines.append(f"objective {model.objective!r}")
    if model.status is not None:
        lines.append(f"status {model.status}")
    if model.seed is not None:
        lines.append(f"seed {model.seed}")
    lines.append("flips " + " ".join(str(i) for i in model.flips))
    if model.theta:
        lines.append("theta " + " ".join(str(int(t)) for t in model.theta))
    if model.k_plus is not None:
        lines.append("k_plus " + _vec(model.k_plus))
    if model.k_minus is not None:
        lines.append("k_minus " + _vec(model.k_minus))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def read_model(path) -> ModelFile:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    lines = [ln.rstrip() for ln in raw.splitlines()]
    if not lines or not lines[0].startswith(MODEL_VERSION):
        raise DataError(f"{path}: not a recognized model file")
    fields: dict[str, str] = {}
    params: dict[str, float] = {}
    for ln in lines[1:]:
        if not ln or ln.startswith("#"):
            continue
        key, _, rest = ln.partition(" ")
        if key == "param":
            name, _, value = rest.partition(" ")
            params[name] = float(value)
        else:
            fields[key] = rest
    try:
        w = np.array([float(t) for t in fields["w"].split()])
        b = float(fields["b"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed hyperplane data: {exc}") from exc
    norm = None
    if fields.get("normalize", "none") != "none":
        norm = NormalizationParams(
            scheme=fields["normalize"],
            offset=np.array([float(t) for t in fields["norm_offset"].split()]),
            scale=np.array([float(t) for t in fields["norm_scale"].split()]))
    flips = tuple(int(t) for t in fields.get("flips", "").split())
    theta = tuple(int(t) for t in fields.get("theta", "").split())
    k_plus = np.array([float(t) for t in fields["k_plus"].split()]) if "k_plus" in fields else None
    k_minus = np.array([float(t) for t in fields["k_minus"].split()]) if "k_minus" in fields else None
    objective = float(fields["objective"]) if "objective" in fields else None
    seed = int(fields["seed"]) if "seed" in fields else None
    return ModelFile(family=fields.get("family", "svm"), params=params,
                     hyperplane=Hyperplane(w, b), normalization=norm,
                     objective=objective, status=fields.get("status"), seed=seed,
                     flips=flips, theta=theta, k_plus=k_plus, k_minus=k_minus)
