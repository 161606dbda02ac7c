"""Shared test oracles and generators.

The reference SVM solver here is deliberately slow and independent of the
package's solver: projected gradient ascent on the dual with a bisection
projection onto the box/equality feasible set, plus an exhaustive-breakpoint
bias search for primal recovery.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from relabelsvm import Dataset


def random_dataset(rng: np.random.Generator, n: int, p: int, dataset_id="rnd") -> Dataset:
    X = rng.standard_normal((n, p))
    y = np.where(rng.random(n) < 0.5, 1, -1)
    y[0] = 1
    y[1] = -1  # both classes present
    return Dataset(X, y, id=dataset_id)


def _project_dual(v: np.ndarray, y: np.ndarray, C: float) -> np.ndarray:
    """Exact projection onto {0 <= a <= C, sum y_i a_i = 0}.

    balance(lam) = sum_i y_i clip(v_i - lam y_i, 0, C) is piecewise linear and
    nonincreasing in lam; the root is located by scanning the sorted
    breakpoints and interpolating on the straddling segment.
    """
    u = y * v  # per-term breakpoints are lam = u_i - C and lam = u_i
    points = np.unique(np.concatenate([u - C, u]))
    clipped = np.clip(v[None, :] - points[:, None] * y[None, :], 0.0, C)
    values = clipped @ y
    if values[0] <= 0.0:
        lam = points[0]
    elif values[-1] >= 0.0:
        lam = points[-1]
    else:
        k = int(np.searchsorted(-values, 0.0, side="left"))
        v0, v1 = values[k - 1], values[k]
        t = v0 / (v0 - v1) if v0 != v1 else 0.0
        lam = points[k - 1] + t * (points[k] - points[k - 1])
    return np.clip(v - lam * y, 0.0, C)


def reference_svm(d: Dataset, C: float, iters: int = 20000):
    """Accelerated projected-gradient dual solve with adaptive restarts;
    returns (w, b, objective, kkt_residual)."""
    X, y = d.X, d.y.astype(float)
    Z = y[:, None] * X
    Q = Z @ Z.T
    lam_max = float(np.linalg.eigvalsh(Q)[-1]) if d.n > 1 else float(Q[0, 0])
    step = 1.0 / max(lam_max, 1e-12)

    def dual_value(a):
        return float(a.sum() - 0.5 * a @ (Q @ a))

    alpha = np.zeros(d.n)
    momentum = alpha.copy()
    t_prev = 1.0
    best_val = dual_value(alpha)
    for _ in range(iters):
        grad = 1.0 - Q @ momentum
        nxt = _project_dual(momentum + step * grad, y, C)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev * t_prev))
        momentum = nxt + ((t_prev - 1.0) / t_next) * (nxt - alpha)
        alpha, t_prev = nxt, t_next
        val = dual_value(alpha)
        if val < best_val:  # adaptive restart on non-monotone step
            momentum = alpha.copy()
            t_prev = 1.0
        best_val = max(best_val, val)
    w = Z.T @ alpha
    # exact bias: the piecewise-linear optimum sits at a breakpoint
    margins = X @ w
    candidates = y - margins
    best_b, best_val = 0.0, np.inf
    for b in candidates:
        val = 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - y * (margins + b)).sum())
        if val < best_val:
            best_b, best_val = float(b), val
    # KKT residual: box complementarity of the dual iterate
    slack = 1.0 - y * (margins + best_b)
    res = 0.0
    for i in range(d.n):
        if alpha[i] < 1e-8 * C:
            res = max(res, slack[i])  # should be <= 0
        elif alpha[i] > C * (1 - 1e-8):
            res = max(res, -slack[i])  # should be >= 0
        else:
            res = max(res, abs(slack[i]))
    return w, best_b, best_val, res


def brute_force_flip_objective(d: Dataset, spec, solve_fixed):
    """2^n enumeration over flip vectors; solve_fixed(d, xi, spec) -> value.

    Returns (best value, list of optimal flip tuples within 1e-9)."""
    best = np.inf
    argmins: list[tuple[int, ...]] = []
    for bits in itertools.product((False, True), repeat=d.n):
        xi = np.array(bits, dtype=bool)
        val = solve_fixed(d, xi, spec)
        if val < best - 1e-9:
            best = val
            argmins = [tuple(int(b) for b in bits)]
        elif abs(val - best) <= 1e-9:
            argmins.append(tuple(int(b) for b in bits))
    return best, argmins


@pytest.fixture
def rng():
    return np.random.default_rng(0)
