"""Continuous convex subsolvers shared by every trainer.

Two engines back the public operations:

* a pairwise dual-ascent QP solver for squared-l2-margin problems, which
  certifies solutions through the primal/dual gap, and
* a batched multi-restart Polyak subgradient solver for the nonsmooth l1 /
  unsquared-l2 margin problems, with hard sign constraints enforced by an
  escalating exact penalty.

Centroid routines (coordinate median, geometric median) live here as well
because the cluster trainers alternate between them and the hyperplane
subproblems.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EmptyPointSetError",
    "Hyperplane",
    "SvmSolution",
    "HingeTerm",
    "SignConstraint",
    "ConvexSubproblem",
    "train_svm",
    "solve_subproblem",
    "coordinate_median",
    "geometric_median",
]

HARD_VIOLATION_TOL = 1e-9


class EmptyPointSetError(ValueError):
    """A centroid was requested for an empty point set."""


@dataclass(frozen=True)
class Hyperplane:
    """Linear decision rule f(x) = w.x + b; predicted label is sign(f), sign(0) -> +1."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        if not np.all(np.isfinite(w)) or not np.isfinite(self.b):
            raise ValueError("hyperplane coefficients must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    def decision(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.w + self.b

    def predict(self, X: np.ndarray) -> np.ndarray:
        f = self.decision(X)
        return np.where(f >= 0.0, 1, -1)

    def mirrored(self) -> "Hyperplane":
        return Hyperplane(-self.w, -self.b)


@dataclass
class SvmSolution:
    """Result of a convex hyperplane solve.

    ``errors`` holds one hinge value per hinge term (for train_svm: one per
    training point). ``dual_gap`` is the relative primal/dual gap for the QP
    path and 0 for the subgradient path, whose quality report is
    ``restart_spread`` (best-vs-worst restart objective).
    """

    hyperplane: Hyperplane
    errors: np.ndarray
    objective: float
    dual_gap: float
    iterations: int
    status: str = "converged"  # converged | iteration-cap | infeasible
    violation: float = 0.0
    restart_spread: float = 0.0
    dual_bound: float = float("-inf")  # valid lower bound for constraint-free QP solves


@dataclass(frozen=True)
class HingeTerm:
    """weight * max(0, offset - target * f(x_index)) added to the objective."""

    index: int
    target: int
    weight: float
    offset: float = 1.0


@dataclass(frozen=True)
class SignConstraint:
    """Hard constraint sign * f(x_index) >= margin (margin <= 0)."""

    index: int
    sign: int
    margin: float = 0.0


@dataclass(frozen=True)
class ConvexSubproblem:
    """Carrier for the fixed-binaries hyperplane subproblems.

    margin_norm selects the regularizer: ``l2sq`` -> weight * ||w||_2^2 (QP
    path), ``l1`` -> weight * ||w||_1, ``l2`` -> weight * ||w||_2 (both on the
    subgradient path). All hinge weights must be nonnegative and all
    constraint margins nonpositive, which keeps (w, b) = 0 feasible.
    """

    X: np.ndarray
    hinges: tuple[HingeTerm, ...]
    constraints: tuple[SignConstraint, ...] = ()
    margin_norm: str = "l2sq"
    margin_weight: float = 0.5

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise ValueError("point matrix must be 2-D")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "hinges", tuple(self.hinges))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.margin_norm not in ("l1", "l2", "l2sq"):
            raise ValueError(f"unknown margin norm {self.margin_norm!r}")
        if self.margin_weight < 0:
            raise ValueError("margin weight must be nonnegative")
        for h in self.hinges:
            if h.weight < 0:
                raise ValueError("hinge weights must be nonnegative")
            if h.target not in (-1, 1):
                raise ValueError("hinge targets must be -1/+1")
        for c in self.constraints:
            if c.sign not in (-1, 1):
                raise ValueError("constraint signs must be -1/+1")
            if c.margin > 0:
                raise ValueError("constraint margins must be nonpositive")

    def objective_at(self, h: Hyperplane) -> float:
        """True objective (margin term plus hinge terms) at a hyperplane."""
        value = self.margin_weight * _margin_norm_value(h.w, self.margin_norm)
        if self.hinges:
            f = h.decision(self.X)
            for t in self.hinges:
                value += t.weight * max(0.0, t.offset - t.target * f[t.index])
        return float(value)

    def violation_at(self, h: Hyperplane) -> float:
        if not self.constraints:
            return 0.0
        f = h.decision(self.X)
        return max(max(0.0, c.margin - c.sign * f[c.index]) for c in self.constraints)


def _margin_norm_value(w: np.ndarray, norm: str) -> float:
    if norm == "l2sq":
        return float(w @ w)
    if norm == "l1":
        return float(np.abs(w).sum())
    return float(np.sqrt(w @ w))


# ---------------------------------------------------------------------------
# exact bias for piecewise-linear hinge sums


def _optimal_bias(ft: np.ndarray, targets: np.ndarray, weights: np.ndarray,
                  offsets: np.ndarray) -> tuple[float, float]:
    """Exactly minimize sum_k w_k max(0, g_k - t_k (ft_k + b)) over b.

    Returns (b, value). The minimizing set is an interval; its midpoint is
    returned (endpoint when unbounded) so mirrored problems produce mirrored
    biases.
    """
    if len(ft) == 0:
        return 0.0, 0.0
    beta = targets * offsets - ft  # term k becomes inactive/active at b = beta_k
    order = np.argsort(beta, kind="stable")
    beta_sorted = beta[order]
    w_sorted = weights[order]
    slope = -float(weights[targets > 0].sum())  # slope at b -> -inf
    b_opt = None
    if slope >= 0.0:
        b_opt = beta_sorted[0]
    else:
        cumulative = slope + np.cumsum(w_sorted)
        # cumulative is nondecreasing; cross = first event with slope >= 0
        cross = int(np.searchsorted(cumulative, 0.0, side="left"))
        if cross >= len(beta_sorted):
            b_opt = beta_sorted[-1]
        elif cumulative[cross] > 0.0:
            b_opt = beta_sorted[cross]
        else:
            # slope exactly zero after event `cross`: flat piece up to the next event
            if cross + 1 < len(beta_sorted):
                b_opt = 0.5 * (beta_sorted[cross] + beta_sorted[cross + 1])
            else:
                b_opt = beta_sorted[cross]
    value = float(np.sum(weights * np.maximum(0.0, offsets - targets * (ft + b_opt))))
    return float(b_opt), value


# ---------------------------------------------------------------------------
# QP engine (squared-l2 margin)
#
# Main driver: box-constrained dual coordinate descent (one multiplier per
# hinge term) nested in a bisection on the bias, whose optimality condition
# is sum_k t_k alpha_k = 0. The iterate is then projected exactly onto the
# equality/box dual feasible set, which certifies a primal/dual gap; a
# pairwise working-set stage polishes the rare case where the gap is not yet
# below tolerance.


def _project_equality_box(v: np.ndarray, t: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Exact projection onto {0 <= a <= caps, sum t_k a_k = 0}.

    balance(lam) = sum t_k clip(v_k - lam t_k, 0, c_k) is piecewise linear and
    nonincreasing; the root is found by scanning its breakpoints.
    """
    u = t * v
    points = np.unique(np.concatenate([u - caps, u]))
    clipped = np.clip(v[None, :] - points[:, None] * t[None, :], 0.0, caps[None, :])
    values = clipped @ t
    if values[0] <= 0.0:
        lam = points[0]
    elif values[-1] >= 0.0:
        lam = points[-1]
    else:
        k = int(np.searchsorted(-values, 0.0, side="left"))
        v0, v1 = values[k - 1], values[k]
        share = v0 / (v0 - v1) if v0 != v1 else 0.0
        lam = points[k - 1] + share * (points[k] - points[k - 1])
    return np.clip(v - lam * t, 0.0, caps)


def _qp_hybrid(A: np.ndarray, targets: np.ndarray, caps: np.ndarray, offsets: np.ndarray,
               margin_weight: float, tol: float, max_iter: int,
               deadline: float | None = None):
    """Minimize mw*||w||^2 + sum_k c_k max(0, g_k - t_k (w.x_k + b)).

    Returns the best primal iterate with a valid equality-dual lower bound.
    """
    n = len(targets)
    mu = margin_weight
    if n == 0:
        return dict(w=np.zeros(A.shape[1]), b=0.0, primal=0.0, dual=0.0, gap=0.0,
                    iterations=0, converged=True)
    inv2mu = 1.0 / (2.0 * mu)
    qdiag = np.maximum((A * A).sum(axis=1) * inv2mu, 1e-300)
    alpha = np.zeros(n)
    w = np.zeros(A.shape[1])
    rows = [A[k] for k in range(n)]
    tw_rows = [targets[k] * inv2mu * A[k] for k in range(n)]
    sweeps_done = 0

    def inner(b: float, max_sweeps: int, pg_stop: float) -> None:
        nonlocal alpha, w, sweeps_done
        for _ in range(max_sweeps):
            sweeps_done += 1
            max_pg = 0.0
            for k in range(n):
                grad = targets[k] * (rows[k] @ w + b) - offsets[k]
                ak = alpha[k]
                if ak <= 0.0:
                    pg = min(grad, 0.0)
                elif ak >= caps[k]:
                    pg = max(grad, 0.0)
                else:
                    pg = grad
                if pg == 0.0:
                    continue
                max_pg = max(max_pg, abs(pg))
                new = min(max(ak - grad / qdiag[k], 0.0), caps[k])
                if new != ak:
                    w += (new - ak) * tw_rows[k]
                    alpha[k] = new
            if max_pg <= pg_stop:
                break

    cap_sum = float(caps.sum())
    pg_coarse = max(1e-10, 1e-4 * (1.0 + cap_sum))
    balance_tol = max(1e-12, 1e-12 * (1.0 + cap_sum))

    def balance(b: float, max_sweeps: int = 4) -> float:
        inner(b, max_sweeps, pg_coarse)
        return float(targets @ alpha)

    # bracket the root of the (nonincreasing) balance function; a one-sided
    # target set drives the balance to zero instead of changing sign
    radius = 1.0 + float(np.abs(offsets).max())
    lo, hi = -radius, radius
    for _ in range(60):
        s_lo = balance(lo, 2)
        if s_lo > 0.0 or abs(s_lo) <= balance_tol:
            break
        lo *= 2.0
    for _ in range(60):
        s_hi = balance(hi, 2)
        if s_hi < 0.0 or abs(s_hi) <= balance_tol:
            break
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        s_mid = balance(mid)
        if abs(s_mid) <= balance_tol or hi - lo < 1e-13 * max(1.0, abs(mid)):
            break
        if s_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if deadline is not None and time.perf_counter() > deadline:
            break
    b_cd = 0.5 * (lo + hi)
    tfloat = targets.astype(float)

    def certify():
        """Project onto the equality/box dual set, recover the primal pair."""
        aproj = _project_equality_box(alpha, tfloat, caps)
        v = A.T @ (aproj * targets)
        w_p = v * inv2mu
        b_opt, hinge_sum = _optimal_bias(A @ w_p, targets, caps, offsets)
        primal = mu * float(w_p @ w_p) + hinge_sum
        dual = float(offsets @ aproj) - float(v @ v) * inv2mu * 0.5
        return aproj, w_p, b_opt, primal, dual

    best = None  # (primal, w, b)
    dual_best = -np.inf
    pg_stop = max(1e-13, 0.05 * tol * (1.0 + cap_sum))
    for tighten in range(10):
        inner(b_cd, 30 + 15 * tighten, pg_stop)
        pg_stop *= 0.25
        aproj, w_p, b_opt, primal, dual = certify()
        dual_best = max(dual_best, dual)
        if best is None or primal < best[0]:
            best = (primal, w_p, b_opt)
        if best[0] - dual_best <= tol * max(1.0, abs(best[0])):
            return dict(w=best[1], b=best[2], primal=best[0], dual=dual_best,
                        gap=best[0] - dual_best, iterations=sweeps_done * n,
                        converged=True)
        # re-center the bias on the current primal-optimal value
        b_cd = b_opt
        if deadline is not None and time.perf_counter() > deadline:
            break
        if sweeps_done * n > max_iter:
            break

    res = _smo(A, targets, caps, offsets, margin_weight, tol,
               max(0, max_iter - sweeps_done * n), deadline, alpha0=aproj)
    res["iterations"] += sweeps_done * n
    res["dual"] = max(res["dual"], dual_best)
    if best[0] < res["primal"]:
        res["primal"], res["w"], res["b"] = best
    res["gap"] = res["primal"] - res["dual"]
    res["converged"] = res["gap"] <= tol * max(1.0, abs(res["primal"]))
    return res


def _smo(A: np.ndarray, targets: np.ndarray, caps: np.ndarray, offsets: np.ndarray,
         margin_weight: float, tol: float, max_iter: int, deadline: float | None = None,
         alpha0: np.ndarray | None = None):
    """Pairwise working-set ascent on the box/equality dual.

    Used as the polishing stage from a warm start; terminates when the
    relative primal/dual gap drops below ``tol``. Returns the best primal
    iterate seen together with a valid dual lower bound.
    """
    n = len(targets)
    mu = margin_weight
    if n == 0:
        return dict(w=np.zeros(A.shape[1]), b=0.0, primal=0.0, dual=0.0, gap=0.0,
                    iterations=0, converged=True)
    G = A @ A.T
    diag = np.ascontiguousarray(np.diag(G))
    alpha = np.zeros(n) if alpha0 is None else alpha0.copy()
    s = G @ (alpha * targets) if alpha0 is not None else np.zeros(n)
    inv2mu = 1.0 / (2.0 * mu)

    def evaluate():
        w = (A.T @ (alpha * targets)) * inv2mu
        ft = s * inv2mu
        b, hinge_sum = _optimal_bias(ft, targets, caps, offsets)
        primal = mu * float(w @ w) + hinge_sum
        dual = float(offsets @ alpha) - float((alpha * targets) @ s) * inv2mu * 0.5
        return w, b, primal, dual

    best = None  # (primal, w, b)
    dual_best = -np.inf
    check_every = max(16, min(512, 4 * n))
    it = 0
    converged = False
    pos = targets > 0
    neg = ~pos
    while it < max_iter:
        minus_tg = offsets * targets - s * inv2mu  # == -t * grad
        up = ((alpha < caps) & pos) | ((alpha > 0.0) & neg)
        low = ((alpha < caps) & neg) | ((alpha > 0.0) & pos)
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, minus_tg, -np.inf)))
        m_val = minus_tg[i]
        if m_val - np.min(np.where(low, minus_tg, np.inf)) <= 1e-14:
            break
        # second-order partner choice: maximize gain b^2 / eta among the
        # sufficiently-violating candidates
        gap_j = m_val - minus_tg
        cand = low & (gap_j > 1e-14)
        if not cand.any():
            break
        eta_j = np.maximum((diag[i] + diag - 2.0 * G[:, i]) * inv2mu, 1e-14)
        j = int(np.argmax(np.where(cand, gap_j * gap_j / eta_j, -np.inf)))
        delta = gap_j[j] / eta_j[j]
        # box clipping expressed directly on delta
        hi = (caps[i] - alpha[i]) if targets[i] > 0 else alpha[i]
        hi = min(hi, alpha[j] if targets[j] > 0 else (caps[j] - alpha[j]))
        delta = min(delta, hi)
        if delta <= 0.0:
            break
        alpha[i] += targets[i] * delta
        alpha[j] -= targets[j] * delta
        np.clip(alpha, 0.0, caps, out=alpha)
        s += delta * (G[:, i] - G[:, j])
        it += 1
        if it % check_every == 0:
            w, b, primal, dual = evaluate()
            dual_best = max(dual_best, dual)
            if best is None or primal < best[0]:
                best = (primal, w, b)
            if best[0] - dual_best <= tol * max(1.0, abs(best[0])):
                converged = True
                break
            if deadline is not None and time.perf_counter() > deadline:
                break
    w, b, primal, dual = evaluate()
    dual_best = max(dual_best, dual)
    if best is None or primal < best[0]:
        best = (primal, w, b)
    gap = best[0] - dual_best
    if gap <= tol * max(1.0, abs(best[0])):
        converged = True
    return dict(w=best[1], b=best[2], primal=best[0], dual=dual_best, gap=gap,
                iterations=it, converged=converged)


def _solve_l2sq(sp: ConvexSubproblem, tol: float, max_iter: int,
                deadline: float | None) -> SvmSolution:
    hinges = [h for h in sp.hinges if h.weight > 0.0]
    h_idx = np.array([h.index for h in hinges], dtype=int)
    h_t = np.array([h.target for h in hinges], dtype=float)
    h_w = np.array([h.weight for h in hinges], dtype=float)
    h_g = np.array([h.offset for h in hinges], dtype=float)
    c_idx = np.array([c.index for c in sp.constraints], dtype=int)
    c_s = np.array([c.sign for c in sp.constraints], dtype=float)
    c_m = np.array([c.margin for c in sp.constraints], dtype=float)

    penalty = 16.0 * (1.0 + h_w.sum())
    status = "converged"
    iterations = 0
    while True:
        A = sp.X[np.concatenate([h_idx, c_idx])] if len(c_idx) else sp.X[h_idx]
        t = np.concatenate([h_t, c_s]) if len(c_idx) else h_t
        caps = np.concatenate([h_w, np.full(len(c_idx), penalty)]) if len(c_idx) else h_w
        g = np.concatenate([h_g, c_m]) if len(c_idx) else h_g
        res = _qp_hybrid(A, t, caps, g, sp.margin_weight, tol, max_iter, deadline)
        iterations += res["iterations"]
        hyper = Hyperplane(res["w"], res["b"])
        viol = sp.violation_at(hyper)
        if not res["converged"]:
            status = "iteration-cap"
        if len(c_idx) == 0 or viol <= HARD_VIOLATION_TOL:
            break
        if penalty > 1e13:
            status = "infeasible"
            break
        penalty *= 64.0
        if deadline is not None and time.perf_counter() > deadline:
            status = "iteration-cap"
            break

    f = hyper.decision(sp.X) if sp.hinges else np.zeros(0)
    errors = np.array([max(0.0, h.offset - h.target * f[h.index]) for h in sp.hinges])
    weights = np.array([h.weight for h in sp.hinges])
    objective = sp.margin_weight * float(hyper.w @ hyper.w) + float(weights @ errors) \
        if sp.hinges else sp.margin_weight * float(hyper.w @ hyper.w)
    dual_bound = res["dual"] if not sp.constraints else float("-inf")
    return SvmSolution(hyperplane=hyper, errors=errors, objective=objective,
                       dual_gap=res["gap"] / max(1.0, abs(res["primal"])),
                       iterations=iterations, status=status, violation=viol,
                       dual_bound=dual_bound)


# ---------------------------------------------------------------------------
# subgradient engine (l1 and unsquared-l2 margins), batched over problems


def polyak_minimize_batch(X, hinge_w, hinge_t, hinge_g, hard_mask, hard_s, hard_m,
                          margin_norm, margin_weight, W0, b0, iterations=600,
                          tol=1e-6, halve_every=25, penalty0=1e3, max_rounds=6,
                          deadline=None):
    """Polyak-step subgradient descent on a batch of hinge problems.

    Every array is batched over axis 0 (one row per problem/restart). Hard
    constraints are folded in with penalty weight ``P`` escalated until the
    incumbent satisfies them to HARD_VIOLATION_TOL. Returns the best feasible
    point per row (a zero initial point is always feasible because margins
    are nonpositive).
    """
    X = np.asarray(X, dtype=float)
    L, p = W0.shape
    W = W0.copy()
    b = b0.copy()
    has_hard = bool(hard_mask.any())
    P = np.full(L, penalty0)

    best_feas_obj = np.full(L, np.inf)
    best_feas_W = W0.copy()
    best_feas_b = b0.copy()

    def eval_parts(Wc, bc, Pc):
        F = Wc @ X.T + bc[:, None]
        hr = np.maximum(0.0, hinge_g - hinge_t * F)
        true_obj = margin_weight * _margin_norm_batch(Wc, margin_norm) + (hinge_w * hr).sum(axis=1)
        if has_hard:
            cr = np.maximum(0.0, (hard_m - hard_s * F) * hard_mask)
            viol = cr.max(axis=1)
            pen_obj = true_obj + Pc * cr.sum(axis=1)
        else:
            cr = None
            viol = np.zeros(L)
            pen_obj = true_obj
        return F, hr, cr, true_obj, viol, pen_obj

    total_rounds = max_rounds if has_hard else 1
    for _ in range(total_rounds):
        best_pen = np.full(L, np.inf)
        best_pen_W = W.copy()
        best_pen_b = b.copy()
        delta = None
        stall = np.zeros(L, dtype=int)
        for _ in range(iterations):
            F, hr, cr, true_obj, viol, pen_obj = eval_parts(W, b, P)
            feas = viol <= HARD_VIOLATION_TOL
            upd = feas & (true_obj < best_feas_obj)
            if upd.any():
                best_feas_obj[upd] = true_obj[upd]
                best_feas_W[upd] = W[upd]
                best_feas_b[upd] = b[upd]
            improved = pen_obj < best_pen
            best_pen = np.where(improved, pen_obj, best_pen)
            if improved.any():
                best_pen_W[improved] = W[improved]
                best_pen_b[improved] = b[improved]
            stall = np.where(improved, 0, stall + 1)
            if delta is None:
                delta = 0.25 * (1.0 + np.abs(pen_obj))
            halve = stall >= halve_every
            if halve.any():
                delta = np.where(halve, 0.5 * delta, delta)
                stall = np.where(halve, 0, stall)
            # subgradient
            coef = hinge_w * hinge_t * (hinge_g - hinge_t * F > 0.0)
            if has_hard:
                coef = coef + P[:, None] * hard_s * hard_mask * ((hard_m - hard_s * F) > 0.0)
            Gw = margin_weight * _margin_subgrad_batch(W, margin_norm) - coef @ X
            Gb = -coef.sum(axis=1)
            gn2 = (Gw * Gw).sum(axis=1) + Gb * Gb
            target = best_pen - delta
            step = np.where(gn2 > 0.0, (pen_obj - target) / np.maximum(gn2, 1e-300), 0.0)
            step = np.maximum(step, 0.0)
            W = W - step[:, None] * Gw
            b = b - step * Gb
            if deadline is not None and time.perf_counter() > deadline:
                break
        if not has_hard:
            break
        _, _, _, _, viol_best, _ = eval_parts(best_pen_W, best_pen_b, P)
        offending = viol_best > HARD_VIOLATION_TOL
        if not offending.any() or P.max() > 1e12:
            break
        P = np.where(offending, P * 64.0, P)
        W = best_pen_W.copy()
        b = best_pen_b.copy()
        if deadline is not None and time.perf_counter() > deadline:
            break

    # final exact evaluation of the stored feasible bests
    return best_feas_W, best_feas_b, best_feas_obj


def _margin_norm_batch(W: np.ndarray, norm: str) -> np.ndarray:
    if norm == "l2sq":
        return (W * W).sum(axis=1)
    if norm == "l1":
        return np.abs(W).sum(axis=1)
    return np.sqrt((W * W).sum(axis=1))


def _margin_subgrad_batch(W: np.ndarray, norm: str) -> np.ndarray:
    if norm == "l2sq":
        return 2.0 * W
    if norm == "l1":
        return np.sign(W)
    nrm = np.sqrt((W * W).sum(axis=1, keepdims=True))
    return np.where(nrm > 0.0, W / np.maximum(nrm, 1e-300), 0.0)


def _restart_block(p: int, warm: Hyperplane | None, restarts: int, scale: float,
                   seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic restart initializations: warm start, origin, +-random pairs."""
    rng = np.random.default_rng(seed)
    W = np.zeros((restarts, p))
    b = np.zeros(restarts)
    if warm is not None:
        W[0] = warm.w
        b[0] = warm.b
    k = 2
    while k + 1 < restarts:
        v = rng.standard_normal(p) * scale
        vb = rng.standard_normal() * scale
        W[k], b[k] = v, vb
        W[k + 1], b[k + 1] = -v, -vb
        k += 2
    return W, b


def _solve_piecewise(sp: ConvexSubproblem, tol: float, warm_start: Hyperplane | None,
                     restarts: int, iterations: int, deadline: float | None) -> SvmSolution:
    p = sp.X.shape[1]
    hinges = [h for h in sp.hinges if h.weight > 0.0]
    # one row per term so duplicate point indices are fine
    nh, nc = len(hinges), len(sp.constraints)
    rows = np.empty((nh + nc, p))
    hw = np.zeros((1, nh + nc))
    ht = np.ones((1, nh + nc))
    hg = np.zeros((1, nh + nc))
    hm = np.zeros((1, nh + nc), dtype=bool)
    hs = np.ones((1, nh + nc))
    hmarg = np.zeros((1, nh + nc))
    for k, h in enumerate(hinges):
        rows[k] = sp.X[h.index]
        hw[0, k] = h.weight
        ht[0, k] = h.target
        hg[0, k] = h.offset
    for k, c in enumerate(sp.constraints):
        rows[nh + k] = sp.X[c.index]
        hm[0, nh + k] = True
        hs[0, nh + k] = c.sign
        hmarg[0, nh + k] = c.margin

    restarts = max(2, restarts)
    scale = 1.0 / (1.0 + float(np.abs(sp.X).max() if sp.X.size else 1.0))
    W0, b0 = _restart_block(p, warm_start, restarts, scale, seed=0x5EED)
    tile = lambda a: np.tile(a, (restarts, 1))
    penalty0 = 8.0 * (1.0 + sum(h.weight for h in hinges))
    W, b, obj = polyak_minimize_batch(
        rows, tile(hw), tile(ht), tile(hg), tile(hm), tile(hs), tile(hmarg),
        sp.margin_norm, sp.margin_weight, W0, b0, iterations=iterations, tol=tol,
        penalty0=penalty0, deadline=deadline)
    k = int(np.argmin(obj))
    hyper = Hyperplane(W[k], float(b[k]))
    finite = obj[np.isfinite(obj)]
    spread = float(finite.max() - finite.min()) if finite.size else 0.0
    f = hyper.decision(sp.X)
    errors = np.array([max(0.0, h.offset - h.target * f[h.index]) for h in sp.hinges])
    viol = sp.violation_at(hyper)
    status = "converged" if viol <= HARD_VIOLATION_TOL else "infeasible"
    return SvmSolution(hyperplane=hyper, errors=errors, objective=sp.objective_at(hyper),
                       dual_gap=0.0, iterations=iterations, status=status,
                       violation=viol, restart_spread=spread)


# ---------------------------------------------------------------------------
# public operations


def solve_subproblem(sp: ConvexSubproblem, tol: float = 1e-6,
                     warm_start: Hyperplane | None = None, *, restarts: int = 6,
                     iterations: int = 600, max_iter: int = 200_000,
                     deadline: float | None = None) -> SvmSolution:
    """Solve a hyperplane subproblem under the norm selected by the carrier.

    The returned objective never exceeds the (feasible) warm start's objective
    beyond ``tol``: the warm start participates as a tracked candidate on the
    subgradient path, and the QP path is tolerance-exact.
    """
    if sp.margin_norm == "l2sq":
        return _solve_l2sq(sp, tol, max_iter, deadline)
    return _solve_piecewise(sp, tol, warm_start, restarts, iterations, deadline)


def weighted_hinge_qp(X: np.ndarray, targets: np.ndarray, weights: np.ndarray,
                      tol: float = 1e-8, max_iter: int = 200_000,
                      deadline: float | None = None):
    """Squared-l2-margin weighted hinge solve over the given point rows.

    Returns (hyperplane, primal_value, dual_lower_bound). The dual value is a
    valid lower bound on the optimum even when the solve is cut short, which
    is what the branch-and-bound nodes rely on.
    """
    targets = np.asarray(targets, dtype=float)
    weights = np.asarray(weights, dtype=float)
    keep = weights > 0.0
    res = _qp_hybrid(np.asarray(X, dtype=float)[keep], targets[keep], weights[keep],
                     np.ones(int(keep.sum())), 0.5, tol, max_iter, deadline)
    return Hyperplane(res["w"], res["b"]), float(res["primal"]), float(res["dual"])


def train_svm(d, C: float, tol: float = 1e-8, *, max_iter: int = 500_000,
              deadline: float | None = None) -> SvmSolution:
    """Soft-margin linear SVM: min 0.5*||w||^2 + C * sum hinge_i.

    Solved on the dual with a certified relative duality gap <= tol on
    success; per-point hinge errors are recomputed exactly from the returned
    hyperplane.
    """
    if C <= 0:
        raise ValueError(f"penalty C must be positive, got {C}")
    hinges = tuple(HingeTerm(i, int(d.y[i]), C) for i in range(d.n))
    sp = ConvexSubproblem(d.X, hinges, (), "l2sq", 0.5)
    return _solve_l2sq(sp, tol, max_iter, deadline)


def coordinate_median(points: np.ndarray) -> np.ndarray:
    """Component-wise lower median; minimizes the summed l1 distance."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise EmptyPointSetError("coordinate median of an empty point set")
    srt = np.sort(pts, axis=0)
    return srt[(pts.shape[0] - 1) // 2].copy()


def geometric_median(points: np.ndarray, tol: float = 1e-8, max_iter: int = 2000) -> np.ndarray:
    """Minimizer of the summed unsquared euclidean distance.

    Damped reweighting iteration with an anchor test: when the iterate lands
    on one of the input points, optimality holds iff the pull of the remaining
    points does not exceed the local multiplicity. Certified by subgradient
    norm <= tol otherwise.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = pts.shape[0]
    if m == 0:
        raise EmptyPointSetError("geometric median of an empty point set")
    if m == 1:
        return pts[0].copy()
    y = pts.mean(axis=0)
    span = float(np.abs(pts - y).max())
    near = max(1e-12, 1e-12 * span)
    for _ in range(max_iter):
        diff = pts - y
        dist = np.sqrt((diff * diff).sum(axis=1))
        coincident = dist <= near
        k = int(coincident.sum())
        if k == 0:
            grad = -(diff / dist[:, None]).sum(axis=0)
            if float(np.sqrt(grad @ grad)) <= tol:
                break
            inv = 1.0 / dist
            y = (pts * inv[:, None]).sum(axis=0) / inv.sum()
        else:
            rest = ~coincident
            if not rest.any():
                break  # all points coincide with y
            pull = (diff[rest] / dist[rest, None]).sum(axis=0)
            r = float(np.sqrt(pull @ pull))
            if r <= k + tol:
                break  # anchor point is optimal
            inv = 1.0 / dist[rest]
            t_point = (pts[rest] * inv[:, None]).sum(axis=0) / inv.sum()
            lam = min(1.0, k / r)
            y = (1.0 - lam) * t_point + lam * y
    return y
