"""Relabeling SVM trainers.

Hinge mode jointly fits a soft-margin hyperplane and a set of per-point label
flips, each flip costing ``c2``. Ramp mode replaces the flip decision with an
outlier indicator that caps a point's hinge contribution at 2. Both come in
two solution modes: a monotone alternating heuristic for general instances
and a depth-first branch-and-bound that is exact for small ones.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .convex import Hyperplane, weighted_hinge_qp
from .data import Dataset

__all__ = [
    "ReSvmSpec",
    "ReSvmResult",
    "pointwise_flip_rule",
    "ramp_pointwise_cost",
    "train_resvm_alternating",
    "train_resvm_exact",
    "train_resvm",
    "train_rlsvm",
    "resvm_objective",
]


@dataclass(frozen=True)
class ReSvmSpec:
    """Penalties and solver policy for the relabeling / ramp trainers.

    In ramp mode a single penalty C is used: pass it as ``c1``; ``c2`` is
    ignored there (outliers pay a flat 2*C).
    """

    c1: float
    c2: float = 1.0
    mode: str = "hinge"  # hinge | ramp
    solver: str = "alternating"  # alternating | exact-bnb
    tol: float = 1e-8
    max_alternations: int = 100
    node_cap: int = 500_000
    exact_cap: int = 20
    time_budget_s: float | None = None

    def __post_init__(self):
        if self.c1 <= 0:
            raise ValueError(f"c1 must be positive, got {self.c1}")
        if self.c2 < 0:
            raise ValueError(f"c2 must be nonnegative, got {self.c2}")
        if self.mode not in ("hinge", "ramp"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.solver not in ("alternating", "exact-bnb"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.max_alternations < 1 or self.node_cap < 1 or self.exact_cap < 1:
            raise ValueError("iteration/node caps must be positive")


@dataclass
class ReSvmResult:
    """Fitted hyperplane plus the flip/outlier decisions that produced it.

    ``errors`` are the hinge values at the effective labels (zero for ramp
    outliers); the objective always reconstructs from (w, b, flips).
    ``bound`` is a valid global lower bound whenever the exact solver ran.
    """

    hyperplane: Hyperplane
    flips: np.ndarray
    errors: np.ndarray
    objective: float
    status: str  # optimal | heuristic | node-cap | time-cap
    nodes_explored: int = 0
    bound: float | None = None
    history: list = field(default_factory=list)  # per-chain half-step objective traces

    @property
    def flip_count(self) -> int:
        return int(self.flips.sum())

    def effective_labels(self, y: np.ndarray) -> np.ndarray:
        return np.where(self.flips, -y, y)


def pointwise_flip_rule(f_i: float, y_i: int, c1: float, c2: float) -> tuple[bool, float]:
    """Cost-minimizing flip decision for one point at a fixed hyperplane.

    Compares c1*hinge(keep) against c1*hinge(flip) + c2; ties keep the
    original label. Returns (flip, hinge error at the chosen label).
    """
    margin = y_i * f_i
    keep_err = max(0.0, 1.0 - margin)
    flip_err = max(0.0, 1.0 + margin)
    if c1 * flip_err + c2 < c1 * keep_err:
        return True, flip_err
    return False, keep_err


def ramp_pointwise_cost(f_i: float, y_i: int, c: float) -> tuple[float, bool, float]:
    """Per-point ramp loss c*min(hinge, 2) with its minimizing assignment.

    The outlier indicator pays a flat 2c and zeroes the error; ties stay
    non-outlier.
    """
    hinge = max(0.0, 1.0 - y_i * f_i)
    if hinge > 2.0:
        return 2.0 * c, True, 0.0
    return c * hinge, False, hinge


def _flip_pass(f: np.ndarray, y: np.ndarray, spec: ReSvmSpec):
    """Vectorized per-point optimal decisions at fixed decision values."""
    margin = y * f
    if spec.mode == "hinge":
        keep = np.maximum(0.0, 1.0 - margin)
        flip = np.maximum(0.0, 1.0 + margin)
        xi = spec.c1 * flip + spec.c2 < spec.c1 * keep
        err = np.where(xi, flip, keep)
        cost = spec.c1 * err + spec.c2 * xi
    else:
        hinge = np.maximum(0.0, 1.0 - margin)
        xi = hinge > 2.0
        err = np.where(xi, 0.0, hinge)
        cost = np.where(xi, 2.0 * spec.c1, spec.c1 * hinge)
    return xi, err, cost


def resvm_objective(d: Dataset, h: Hyperplane, flips: np.ndarray, spec: ReSvmSpec) -> float:
    """Recompute the objective from (w, b, flips) alone."""
    f = h.decision(d.X)
    w2 = 0.5 * float(h.w @ h.w)
    if spec.mode == "hinge":
        yhat = np.where(flips, -d.y, d.y)
        err = np.maximum(0.0, 1.0 - yhat * f)
        return w2 + spec.c1 * float(err.sum()) + spec.c2 * float(flips.sum())
    err = np.where(flips, 0.0, np.maximum(0.0, 1.0 - d.y * f))
    return w2 + spec.c1 * (float(err.sum()) + 2.0 * float(flips.sum()))


def _fixed_label_solve(d: Dataset, xi: np.ndarray, spec: ReSvmSpec,
                       deadline: float | None):
    """Optimal hyperplane for frozen decisions; returns (h, primal, dual).

    Hinge mode trains on the effective labels; ramp mode trains on the
    non-outlier points only (outliers pay their flat cost separately).
    """
    if spec.mode == "hinge":
        targets = np.where(xi, -d.y, d.y).astype(float)
        weights = np.full(d.n, spec.c1)
    else:
        targets = d.y.astype(float)
        weights = np.where(xi, 0.0, spec.c1)
    return weighted_hinge_qp(d.X, targets, weights, tol=spec.tol, deadline=deadline)


def _fixed_cost_constant(xi: np.ndarray, spec: ReSvmSpec) -> float:
    if spec.mode == "hinge":
        return spec.c2 * float(xi.sum())
    return 2.0 * spec.c1 * float(xi.sum())


def _lloyd_split(X: np.ndarray, iters: int = 25) -> np.ndarray:
    """Deterministic euclidean 2-means split seeded by a farthest pair."""
    center = X.mean(axis=0)
    a = int(np.argmax(((X - center) ** 2).sum(axis=1)))
    b = int(np.argmax(((X - X[a]) ** 2).sum(axis=1)))
    ka, kb = X[a].copy(), X[b].copy()
    member = None
    for _ in range(iters):
        da = ((X - ka) ** 2).sum(axis=1)
        db = ((X - kb) ** 2).sum(axis=1)
        new = da <= db
        if member is not None and np.array_equal(new, member):
            break
        member = new
        if member.any():
            ka = X[member].mean(axis=0)
        if (~member).any():
            kb = X[~member].mean(axis=0)
    return member


def _alternate_chain(d: Dataset, spec: ReSvmSpec, xi0: np.ndarray,
                     deadline: float | None):
    """One monotone alternating run; returns the final state and its trace."""
    xi = xi0.copy()
    seen = {xi.tobytes()}
    h = Hyperplane(np.zeros(d.p), 0.0)
    err = np.maximum(0.0, 1.0 - np.where(xi, -d.y, d.y) * h.decision(d.X))
    prev = resvm_objective(d, h, xi, spec)
    history = [prev]
    status = "heuristic"
    for _ in range(spec.max_alternations):
        cand, _, _ = _fixed_label_solve(d, xi, spec, deadline)
        obj_a = resvm_objective(d, cand, xi, spec)
        if obj_a <= prev + 1e-12:
            h = cand
        else:
            obj_a = prev  # solver failed to improve: keep the previous plane
        history.append(obj_a)

        f = h.decision(d.X)
        xi_new, err_new, _ = _flip_pass(f, d.y, spec)
        obj_b = resvm_objective(d, h, xi_new, spec)
        history.append(obj_b)
        xi, err = xi_new, err_new
        key = xi.tobytes()
        if key in seen or prev - obj_b < spec.tol * max(1.0, abs(prev)):
            prev = obj_b
            break
        seen.add(key)
        prev = obj_b
        if deadline is not None and time.perf_counter() > deadline:
            status = "time-cap"
            break
    return h, xi, err, prev, history, status


def train_resvm_alternating(d: Dataset, spec: ReSvmSpec,
                            init: np.ndarray | None = None) -> ReSvmResult:
    """Block-coordinate heuristic: solve the convex plane for frozen flips,
    then apply the pointwise rule, until the flip vector repeats or the
    objective stalls.

    Besides the provided (default all-keep) start, hinge mode also runs the
    two relabel-everything anchors (all labels to +1 / to -1, the closed-form
    optima of the cheap-relabel regime) and a self-diagnosis start that flips
    every point the initial fit misclassifies; the best chain wins.
    """
    deadline = None if spec.time_budget_s is None else time.perf_counter() + spec.time_budget_s
    starts = [np.zeros(d.n, dtype=bool) if init is None else np.asarray(init, dtype=bool).copy()]
    if spec.mode == "hinge":
        starts.append(d.y == -1)  # everything relabeled to +1
        starts.append(d.y == 1)   # everything relabeled to -1
        h0, _, _ = _fixed_label_solve(d, starts[0], spec, deadline)
        suspect = d.y * h0.decision(d.X) < 0.0
        if suspect.any() and not suspect.all():
            starts.append(suspect)
            # mirrored diagnosis escapes orientation lock-in: when the initial
            # fit is upside down its own suspects only cement the mistake
            starts.append(~suspect)
        # when heavy noise makes the label-based fit degenerate, geometry is
        # the only orientation signal left: suspect the labels disagreeing
        # with a majority-oriented 2-means split (and, mirrored, the rest)
        member = _lloyd_split(d.X)
        if member.any() and not member.all():
            agree = int(((d.y == 1) == member).sum())
            side = member if 2 * agree >= d.n else ~member
            geo_flips = np.where(side, 1, -1) != d.y
            starts.append(geo_flips)
            starts.append(~geo_flips)
        # drop duplicate starts
        unique, seen_keys = [], set()
        for xi0 in starts:
            key = xi0.tobytes()
            if key not in seen_keys:
                seen_keys.add(key)
                unique.append(xi0)
        starts = unique
    best = None
    histories = []
    status = "heuristic"
    for xi0 in starts:
        h, xi, err, obj, history, chain_status = _alternate_chain(d, spec, xi0, deadline)
        histories.append(history)
        if chain_status == "time-cap":
            status = "time-cap"
        if best is None or obj < best[3] - 1e-15:
            best = (h, xi, err, obj)
        if deadline is not None and time.perf_counter() > deadline:
            status = "time-cap"
            break
    h, xi, err, obj = best
    return ReSvmResult(hyperplane=h, flips=xi, errors=err, objective=obj,
                       status=status, history=histories)


def train_resvm_exact(d: Dataset, spec: ReSvmSpec) -> ReSvmResult:
    """Depth-first branch-and-bound over the flip vector.

    Node lower bound: dual value of the convex solve over the already-fixed
    points plus the fixed flip charges (unfixed points only add nonnegative
    cost). The incumbent is seeded by the alternating heuristic, refreshed at
    every node by completing the node solution with the pointwise rule, and
    branching follows descending heuristic hinge error.
    """
    if d.n > spec.exact_cap:
        raise ValueError(f"exact solver capped at n <= {spec.exact_cap}, got n = {d.n}")
    deadline = None if spec.time_budget_s is None else time.perf_counter() + spec.time_budget_s
    heur = train_resvm_alternating(d, spec)

    inc_obj = heur.objective
    inc = (heur.hyperplane, heur.flips.copy(), heur.errors.copy())
    order = np.argsort(-heur.errors, kind="stable")
    heur_xi = heur.flips

    n = d.n
    slack = 1e-9
    nodes = 0
    pruned_any = False
    status = "optimal"
    # stack entries: (depth, xi array with -1 for unfixed, inherited lower bound)
    root = np.full(n, -1, dtype=np.int8)
    stack = [(0, root, -np.inf)]

    def polish(xi_full: np.ndarray):
        nonlocal inc_obj, inc
        hp, primal, _ = _fixed_label_solve(d, xi_full, spec, deadline)
        f = hp.decision(d.X)
        xi_p, err_p, cost_p = _flip_pass(f, d.y, spec)
        val = 0.5 * float(hp.w @ hp.w) + float(cost_p.sum())
        if val < inc_obj - 1e-15:
            inc_obj = val
            inc = (hp, xi_p, err_p)

    while stack:
        if nodes >= spec.node_cap:
            status = "node-cap"
            break
        if deadline is not None and time.perf_counter() > deadline:
            status = "time-cap"
            break
        depth, xi_node, _ = stack.pop()
        nodes += 1
        fixed = xi_node >= 0
        xi_bool = xi_node == 1
        hp, primal, dual = weighted_hinge_qp(
            d.X[fixed], np.where(xi_bool[fixed], -d.y[fixed], d.y[fixed]).astype(float)
            if spec.mode == "hinge" else d.y[fixed].astype(float),
            np.full(int(fixed.sum()), spec.c1) if spec.mode == "hinge"
            else np.where(xi_bool[fixed], 0.0, spec.c1),
            tol=spec.tol, deadline=deadline)
        lb = dual + _fixed_cost_constant(xi_bool & fixed, spec)
        # candidate: evaluate the global objective at this node's plane
        f = hp.decision(d.X)
        xi_c, err_c, cost_c = _flip_pass(f, d.y, spec)
        cand = 0.5 * float(hp.w @ hp.w) + float(cost_c.sum())
        if cand < inc_obj - 1e-15:
            inc_obj = cand
            inc = (hp, xi_c, err_c)
            polish(xi_c)
        if lb >= inc_obj - slack:
            pruned_any = True
            continue
        if depth == n:
            # all fixed: primal + fixed charges is the leaf value
            leaf = primal + _fixed_cost_constant(xi_bool, spec)
            if leaf < inc_obj - 1e-15:
                inc_obj = leaf
                fl = hp.decision(d.X)
                if spec.mode == "hinge":
                    errs = np.maximum(0.0, 1.0 - np.where(xi_bool, -d.y, d.y) * fl)
                else:
                    errs = np.where(xi_bool, 0.0, np.maximum(0.0, 1.0 - d.y * fl))
                inc = (hp, xi_bool.copy(), errs)
            continue
        idx = int(order[depth])
        preferred = int(heur_xi[idx])
        for value in (1 - preferred, preferred):  # preferred child explored first (LIFO)
            child = xi_node.copy()
            child[idx] = value
            stack.append((depth + 1, child, lb))

    frontier = [entry[2] for entry in stack]
    base = inc_obj - (slack if pruned_any else 0.0)
    bound = min([base] + frontier)
    h, xi, err = inc
    obj = resvm_objective(d, h, xi, spec)
    return ReSvmResult(hyperplane=h, flips=xi, errors=err, objective=obj,
                       status=status, nodes_explored=nodes, bound=bound,
                       history=heur.history)


def train_resvm(d: Dataset, spec: ReSvmSpec, init: np.ndarray | None = None) -> ReSvmResult:
    """Dispatch on the spec's solver field."""
    if spec.solver == "exact-bnb":
        return train_resvm_exact(d, spec)
    return train_resvm_alternating(d, spec, init)


def train_rlsvm(d: Dataset, spec: ReSvmSpec, init: np.ndarray | None = None) -> ReSvmResult:
    """Ramp-loss trainer; requires a ramp-mode spec."""
    if spec.mode != "ramp":
        raise ValueError("train_rlsvm needs a spec with mode='ramp'")
    return train_resvm(d, spec, init)
