"""Cluster-SVM trainers: joint 2-cluster assignment and margin separation.

The model picks two reference points K+ / K-, assigns every observation to
one of them, and fits a hyperplane whose errors are measured against the
cluster sides rather than the given labels; disagreeing with the sign of a
point's original label costs ``c2`` per point, and summed point-to-reference
distances cost ``c3``. The l1 variant pairs an l1 margin with l1 distances
(coordinate medians); the l2 variant pairs an unsquared l2 margin with
euclidean distances (geometric medians).
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .convex import ConvexSubproblem, HingeTerm, Hyperplane, SignConstraint, \
    coordinate_median, geometric_median, polyak_minimize_batch, solve_subproblem
from .data import Dataset

__all__ = [
    "ClusterSvmSpec",
    "ClusterState",
    "ClusterSvmResult",
    "assign_points",
    "update_centroids",
    "train_cluster_svm_alternating",
    "train_cluster_svm_exact_tiny",
    "train_cluster_svm",
    "cluster_objective",
]


@dataclass(frozen=True)
class ClusterSvmSpec:
    """Penalties, norm pairing and solver policy for the cluster trainers.

    The norm fixes both the margin term and the distance metric. For the l2
    variant ``squared_margin`` switches the margin term to the fast QP path
    (0.5*||w||^2 instead of 0.5*||w||); the flag is recorded in results.
    """

    c1: float
    c2: float
    c3: float
    norm: str = "l1"  # l1 | l2
    solver: str = "alternating"  # alternating | exact-tiny
    squared_margin: bool = False
    tol: float = 1e-6
    max_cycles: int = 40
    subgrad_iterations: int = 400
    subgrad_restarts: int = 4
    exact_cap: int = 8
    sign_tol: float = 1e-9
    time_budget_s: float | None = None

    def __post_init__(self):
        if min(self.c1, self.c2, self.c3) < 0:
            raise ValueError("penalties c1, c2, c3 must be nonnegative")
        if self.norm not in ("l1", "l2"):
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.solver not in ("alternating", "exact-tiny"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.squared_margin and self.norm != "l2":
            raise ValueError("squared_margin applies to the l2 variant only")

    @property
    def margin_norm(self) -> str:
        if self.norm == "l1":
            return "l1"
        return "l2sq" if self.squared_margin else "l2"

    def distances(self, X: np.ndarray, k: np.ndarray) -> np.ndarray:
        diff = np.asarray(X, dtype=float) - np.asarray(k, dtype=float)
        if self.norm == "l1":
            return np.abs(diff).sum(axis=1)
        return np.sqrt((diff * diff).sum(axis=1))


@dataclass
class ClusterState:
    """Cluster assignment, sign-violation indicators and reference points.

    ``xi[i]`` is True exactly when y_i * f(x_i) < -sign_tol at the associated
    hyperplane; ``d[i]`` is the distance from x_i to its assigned reference.
    """

    theta: np.ndarray
    xi: np.ndarray
    k_plus: np.ndarray
    k_minus: np.ndarray
    d: np.ndarray
    empty_plus: bool = False
    empty_minus: bool = False

    def key(self) -> bytes:
        return self.theta.tobytes() + self.xi.tobytes()

    @property
    def cluster_labels(self) -> np.ndarray:
        return np.where(self.theta, 1, -1)


@dataclass
class ClusterSvmResult:
    hyperplane: Hyperplane
    state: ClusterState
    errors: np.ndarray  # hinge against the cluster side
    objective: float
    status: str  # heuristic | exact | time-cap
    margin_norm: str = "l2"
    degenerate_cluster: bool = False
    history: list = field(default_factory=list)


def cluster_objective(d: Dataset, h: Hyperplane, state: ClusterState,
                      spec: ClusterSvmSpec) -> float:
    """Recompute the full objective from the hyperplane and state parts."""
    f = h.decision(d.X)
    chat = state.cluster_labels
    errors = np.maximum(0.0, 1.0 - chat * f)
    margin = 0.5 * _margin_value(h.w, spec.margin_norm)
    return float(margin + spec.c1 * errors.sum() + spec.c2 * state.xi.sum()
                 + spec.c3 * state.d.sum())


def _margin_value(w: np.ndarray, margin_norm: str) -> float:
    if margin_norm == "l1":
        return float(np.abs(w).sum())
    if margin_norm == "l2sq":
        return float(w @ w)
    return float(np.sqrt(w @ w))


def assign_points(d: Dataset, h: Hyperplane, k_plus: np.ndarray, k_minus: np.ndarray,
                  spec: ClusterSvmSpec) -> ClusterState:
    """Per-point optimal cluster choice at a fixed hyperplane and references.

    Each point picks the side minimizing c1*hinge(side) + c3*dist(side); ties
    go to the nearer reference, then to the + side. The sign indicators
    depend only on the original labels and f.
    """
    f = h.decision(d.X)
    dist_p = spec.distances(d.X, k_plus)
    dist_m = spec.distances(d.X, k_minus)
    cost_p = spec.c1 * np.maximum(0.0, 1.0 - f) + spec.c3 * dist_p
    cost_m = spec.c1 * np.maximum(0.0, 1.0 + f) + spec.c3 * dist_m
    theta = cost_p < cost_m
    tied = cost_p == cost_m
    theta = np.where(tied, dist_p <= dist_m, theta)
    xi = d.y * f < -spec.sign_tol
    dist = np.where(theta, dist_p, dist_m)
    return ClusterState(theta=theta, xi=xi, k_plus=np.asarray(k_plus, dtype=float),
                        k_minus=np.asarray(k_minus, dtype=float), d=dist)


def update_centroids(d: Dataset, theta: np.ndarray, spec: ClusterSvmSpec,
                     prev_plus: np.ndarray | None = None,
                     prev_minus: np.ndarray | None = None):
    """Optimal reference point per cluster under the spec norm.

    Empty clusters keep their previous reference (falling back to the overall
    median) and are flagged.
    """
    theta = np.asarray(theta, dtype=bool)

    def centroid(points, prev):
        if len(points) == 0:
            fallback = prev if prev is not None else _full_median(d.X, spec)
            return np.asarray(fallback, dtype=float), True
        if spec.norm == "l1":
            return coordinate_median(points), False
        return geometric_median(points, tol=1e-10), False

    k_plus, empty_plus = centroid(d.X[theta], prev_plus)
    k_minus, empty_minus = centroid(d.X[~theta], prev_minus)
    return k_plus, k_minus, empty_plus, empty_minus


def _full_median(X: np.ndarray, spec: ClusterSvmSpec) -> np.ndarray:
    return coordinate_median(X) if spec.norm == "l1" else geometric_median(X, tol=1e-10)


def _better_centroid(points: np.ndarray, new: np.ndarray, old: np.ndarray,
                     spec: ClusterSvmSpec) -> np.ndarray:
    if len(points) == 0:
        return new
    return new if spec.distances(points, new).sum() <= spec.distances(points, old).sum() else old


def _state_for(d: Dataset, h: Hyperplane, theta: np.ndarray, spec: ClusterSvmSpec,
               k_plus, k_minus, empty_plus=False, empty_minus=False) -> ClusterState:
    f = h.decision(d.X)
    xi = d.y * f < -spec.sign_tol
    dist = np.where(theta, spec.distances(d.X, k_plus), spec.distances(d.X, k_minus))
    return ClusterState(theta=np.asarray(theta, dtype=bool), xi=xi,
                        k_plus=np.asarray(k_plus, dtype=float),
                        k_minus=np.asarray(k_minus, dtype=float), d=dist,
                        empty_plus=empty_plus, empty_minus=empty_minus)


def _hyperplane_step(d: Dataset, theta: np.ndarray, prev: tuple, spec: ClusterSvmSpec,
                     deadline: float | None):
    """Two-pass hyperplane update preserving full-objective monotonicity.

    Pass 1 solves without sign constraints, pass 2 re-solves constraining the
    points whose pass-1 signs already agree with their labels; whichever of
    {previous plane, pass 1, pass 2} has the lowest full objective wins.
    """
    chat = np.where(theta, 1, -1)
    hinges = tuple(HingeTerm(i, int(chat[i]), spec.c1) for i in range(d.n))
    kwargs = dict(tol=spec.tol, restarts=spec.subgrad_restarts,
                  iterations=spec.subgrad_iterations, deadline=deadline)
    prev_h, prev_state, prev_obj = prev

    sp1 = ConvexSubproblem(d.X, hinges, (), spec.margin_norm, 0.5)
    s1 = solve_subproblem(sp1, warm_start=prev_h, **kwargs)
    candidates = [(prev_obj, prev_h, prev_state)]
    st1 = _state_for(d, s1.hyperplane, theta, spec, prev_state.k_plus, prev_state.k_minus,
                     prev_state.empty_plus, prev_state.empty_minus)
    candidates.append((cluster_objective(d, s1.hyperplane, st1, spec), s1.hyperplane, st1))

    kept = np.flatnonzero(~st1.xi)
    cons = tuple(SignConstraint(int(i), int(d.y[i]), 0.0) for i in kept)
    sp2 = ConvexSubproblem(d.X, hinges, cons, spec.margin_norm, 0.5)
    s2 = solve_subproblem(sp2, warm_start=s1.hyperplane, **kwargs)
    st2 = _state_for(d, s2.hyperplane, theta, spec, prev_state.k_plus, prev_state.k_minus,
                     prev_state.empty_plus, prev_state.empty_minus)
    candidates.append((cluster_objective(d, s2.hyperplane, st2, spec), s2.hyperplane, st2))

    candidates.sort(key=lambda c: c[0])
    return candidates[0]


def _geometry_seed(d: Dataset, spec: ClusterSvmSpec, iters: int = 25) -> np.ndarray:
    """Deterministic 2-cluster split under the spec metric, ignoring the
    hyperplane terms; cluster names oriented by label majority."""
    X = d.X
    center = _full_median(X, spec)
    a = int(np.argmax(spec.distances(X, center)))
    b = int(np.argmax(spec.distances(X, X[a])))
    k_plus, k_minus = X[a].copy(), X[b].copy()
    theta = None
    for _ in range(iters):
        new_theta = spec.distances(X, k_plus) <= spec.distances(X, k_minus)
        if theta is not None and np.array_equal(new_theta, theta):
            break
        theta = new_theta
        k_plus, k_minus, _, _ = update_centroids(d, theta, spec, k_plus, k_minus)
    agree = int((d.y[theta] == 1).sum() + (d.y[~theta] == -1).sum())
    if 2 * agree < d.n:
        theta = ~theta
    return theta


def _cluster_chain(d: Dataset, spec: ClusterSvmSpec, theta0: np.ndarray,
                   centroids: tuple | None, deadline: float | None):
    """One monotone alternating run from a given assignment."""
    theta = np.asarray(theta0, dtype=bool).copy()
    if centroids is not None:
        k_plus, k_minus, ep, em = centroids
    else:
        k_plus, k_minus, ep, em = update_centroids(d, theta, spec)
    h = Hyperplane(np.zeros(d.p), 0.0)
    state = _state_for(d, h, theta, spec, k_plus, k_minus, ep, em)
    obj = cluster_objective(d, h, state, spec)
    history = [obj]
    status = "heuristic"

    obj, h, state = _hyperplane_step(d, theta, (h, state, obj), spec, deadline)
    history.append(obj)
    seen = {state.key()}
    for _ in range(spec.max_cycles):
        prev_obj = obj
        state = assign_points(d, h, state.k_plus, state.k_minus, spec)
        state.empty_plus = not state.theta.any()
        state.empty_minus = state.theta.all()
        obj = cluster_objective(d, h, state, spec)
        history.append(obj)

        k_plus, k_minus, ep, em = update_centroids(
            d, state.theta, spec, state.k_plus, state.k_minus)
        # the geometric median is iterative: accept a re-solved reference only
        # if it does not grow its cluster's distance sum
        k_plus = _better_centroid(d.X[state.theta], k_plus, state.k_plus, spec)
        k_minus = _better_centroid(d.X[~state.theta], k_minus, state.k_minus, spec)
        state = _state_for(d, h, state.theta, spec, k_plus, k_minus, ep, em)
        obj = cluster_objective(d, h, state, spec)
        history.append(obj)

        obj, h, state = _hyperplane_step(d, state.theta, (h, state, obj), spec, deadline)
        history.append(obj)

        key = state.key()
        if key in seen or prev_obj - obj < spec.tol * max(1.0, abs(prev_obj)):
            break
        seen.add(key)
        if deadline is not None and time.perf_counter() > deadline:
            status = "time-cap"
            break
    return obj, h, state, history, status


def train_cluster_svm_alternating(d: Dataset, spec: ClusterSvmSpec,
                                  init: ClusterState | None = None) -> ClusterSvmResult:
    """Alternate point assignment, reference updates and hyperplane updates.

    Every block step is accepted only when it does not increase the full
    objective, so each recorded objective trace is non-increasing. The default
    start assigns clusters from the given labels; a second chain starts from a
    purely geometric 2-clustering (label-majority oriented), and the better
    final objective wins. A provided ``init`` replaces the label start.
    """
    deadline = None if spec.time_budget_s is None else time.perf_counter() + spec.time_budget_s
    starts: list[tuple[np.ndarray, tuple | None]] = []
    if init is not None:
        starts.append((np.asarray(init.theta, dtype=bool),
                       (init.k_plus, init.k_minus, init.empty_plus, init.empty_minus)))
    else:
        starts.append((d.y == 1, None))
    geo = _geometry_seed(d, spec)
    if not any(np.array_equal(geo, th) for th, _ in starts):
        starts.append((geo, None))

    best = None
    histories = []
    status = "heuristic"
    for theta0, centroids in starts:
        obj, h, state, history, chain_status = _cluster_chain(d, spec, theta0, centroids, deadline)
        histories.append(history)
        if chain_status == "time-cap":
            status = "time-cap"
        if best is None or obj < best[0]:
            best = (obj, h, state)
        if deadline is not None and time.perf_counter() > deadline:
            status = "time-cap"
            break
    obj, h, state = best
    f = h.decision(d.X)
    errors = np.maximum(0.0, 1.0 - state.cluster_labels * f)
    return ClusterSvmResult(hyperplane=h, state=state, errors=errors, objective=obj,
                            status=status, margin_norm=spec.margin_norm,
                            degenerate_cluster=state.empty_plus or state.empty_minus,
                            history=histories)


# ---------------------------------------------------------------------------
# tiny exact enumeration


def _leaf_batch_solve(d: Dataset, targets: np.ndarray, cons_mask: np.ndarray,
                      spec: ClusterSvmSpec, W0, b0, iterations: int, restarts: int,
                      deadline=None):
    """Batched hyperplane solves: one row per (assignment, constraint-set) leaf.

    ``targets`` (L, n) are the cluster sides, ``cons_mask`` (L, n) marks the
    points whose original-label sign is enforced. Rows are duplicated per
    restart and reduced back to the best feasible point per leaf.
    """
    L, n = targets.shape
    y = d.y.astype(float)
    hw = np.full((L, n), spec.c1)
    hg = np.ones((L, n))
    hs = np.tile(y, (L, 1))
    hmarg = np.zeros((L, n))

    R = W0.shape[0] // L
    rep = lambda a: np.repeat(a, R, axis=0)
    W, b, obj = polyak_minimize_batch(
        d.X, rep(hw), rep(targets.astype(float)), rep(hg), rep(cons_mask),
        rep(hs), rep(hmarg), spec.margin_norm, 0.5, W0, b0,
        iterations=iterations, tol=spec.tol, penalty0=8.0 * (1.0 + spec.c1 * n),
        deadline=deadline)
    obj = obj.reshape(L, R)
    pick = obj.argmin(axis=1)
    flat = np.arange(L) * R + pick
    return W[flat], b[flat], obj[np.arange(L), pick]


def train_cluster_svm_exact_tiny(d: Dataset, spec: ClusterSvmSpec) -> ClusterSvmResult:
    """Joint enumeration over (assignment, sign-relaxation) pairs.

    For every assignment the reference points and distance cost are closed
    form; every surviving (theta, xi) pair is solved as a convex hyperplane
    problem (sign constraints on the non-relaxed points). Leaves whose
    distance-plus-relaxation charge already exceeds the incumbent are pruned,
    which is sound because margin and hinge terms are nonnegative. The final
    ranking refines the best leaves with a heavier solver pass.
    """
    n = d.n
    if n > spec.exact_cap:
        raise ValueError(f"tiny exact solver capped at n <= {spec.exact_cap}, got n = {n}")
    deadline = None if spec.time_budget_s is None else time.perf_counter() + spec.time_budget_s
    y = d.y

    thetas = [np.array(bits, dtype=bool) for bits in itertools.product((False, True), repeat=n)]
    cent = []
    for theta in thetas:
        k_plus, k_minus, ep, em = update_centroids(d, theta, spec)
        dist = np.where(theta, spec.distances(d.X, k_plus), spec.distances(d.X, k_minus))
        cent.append((k_plus, k_minus, ep, em, dist, spec.c3 * float(dist.sum())))

    # stage A: unconstrained solve per assignment; seeds the incumbent
    T = np.array([np.where(th, 1.0, -1.0) for th in thetas])
    no_cons = np.zeros((len(thetas), n), dtype=bool)
    R0 = 2
    W0 = np.zeros((len(thetas) * R0, d.p))
    b0 = np.zeros(len(thetas) * R0)
    rng = np.random.default_rng(0xC1)
    W0[1::R0] = rng.standard_normal((len(thetas), d.p))
    Wu, bu, vu = _leaf_batch_solve(d, T, no_cons, spec, W0, b0,
                                   spec.subgrad_iterations, R0, deadline)

    best = None  # (objective, theta_idx, Hyperplane)
    for ti in range(len(thetas)):
        h = Hyperplane(Wu[ti], float(bu[ti]))
        fu = h.decision(d.X)
        xi_u = y * fu < -spec.sign_tol
        val = vu[ti] + cent[ti][5] + spec.c2 * float(xi_u.sum())
        if best is None or val < best[0]:
            best = (val, ti, h)

    # stage B: enumerate (theta, xi) leaves that can still beat the incumbent
    leaf_theta_idx, leaf_masks = [], []
    xis = [np.array(bits, dtype=bool) for bits in itertools.product((False, True), repeat=n)]
    for ti in range(len(thetas)):
        base = cent[ti][5]
        for xi in xis:
            charge = base + spec.c2 * float(xi.sum())
            if charge >= best[0] * (1.0 + 1e-12) + 1e-15:
                continue
            leaf_theta_idx.append(ti)
            leaf_masks.append(~xi)  # constrain the points keeping their sign
    if leaf_theta_idx:
        idx = np.array(leaf_theta_idx)
        Tl = T[idx]
        Ml = np.array(leaf_masks)
        L = len(idx)
        R1 = 2
        W0 = np.zeros((L * R1, d.p))
        b0 = np.zeros(L * R1)
        W0[0::R1] = Wu[idx]  # warm start from the assignment's unconstrained plane
        b0[0::R1] = bu[idx]
        Wl, bl, vl = _leaf_batch_solve(d, Tl, Ml, spec, W0, b0,
                                       spec.subgrad_iterations, R1, deadline)
        charges = np.array([cent[ti][5] for ti in idx]) \
            + spec.c2 * (~Ml).sum(axis=1).astype(float)
        totals = vl + charges

        # stage C: heavier refinement of the most promising leaves
        top = np.argsort(totals, kind="stable")[:min(32, L)]
        R2 = 4
        W0 = np.zeros((len(top) * R2, d.p))
        b0 = np.zeros(len(top) * R2)
        W0[0::R2] = Wl[top]
        b0[0::R2] = bl[top]
        rng = np.random.default_rng(0xC2)
        W0[2::R2] = rng.standard_normal((len(top), d.p))
        W0[3::R2] = -W0[2::R2]
        Wr, br, vr = _leaf_batch_solve(d, Tl[top], Ml[top], spec, W0, b0,
                                       4 * spec.subgrad_iterations, R2, deadline)
        for k, leaf_pos in enumerate(top):
            better = min(vr[k], vl[leaf_pos])
            wsel, bsel = (Wr[k], br[k]) if vr[k] <= vl[leaf_pos] else (Wl[leaf_pos], bl[leaf_pos])
            val = better + charges[leaf_pos]
            if val < best[0]:
                best = (val, int(idx[leaf_pos]), Hyperplane(wsel, float(bsel)))

    _, ti, h = best
    theta = thetas[ti]
    k_plus, k_minus, ep, em, dist, _ = cent[ti]
    state = _state_for(d, h, theta, spec, k_plus, k_minus, ep, em)
    errors = np.maximum(0.0, 1.0 - state.cluster_labels * h.decision(d.X))
    obj = cluster_objective(d, h, state, spec)
    return ClusterSvmResult(hyperplane=h, state=state, errors=errors, objective=obj,
                            status="exact", margin_norm=spec.margin_norm,
                            degenerate_cluster=ep or em)


def train_cluster_svm(d: Dataset, spec: ClusterSvmSpec,
                      init: ClusterState | None = None) -> ClusterSvmResult:
    """Dispatch on the spec's solver field."""
    if spec.solver == "exact-tiny":
        return train_cluster_svm_exact_tiny(d, spec)
    return train_cluster_svm_alternating(d, spec, init)
