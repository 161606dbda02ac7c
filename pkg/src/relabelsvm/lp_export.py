"""LP-format export of the full cluster-SVM mixed-integer model.

Debugging aid: writes the monolithic formulation (binary sign-relaxation and
assignment variables, big-M indicator constraints, linearized l1 terms) so an
external MIP solver can cross-check the decomposed trainers. The l1 variant
is a plain MILP; the l2 variant uses quadratic-constraint sections for the
cone terms (Gurobi-style LP dialect).

The big-M constant is materialized only here: M = 1 + 2 * max_i ||x_i||_1 * W + W
for a configured coefficient box |w_j|, |w0| <= W, and is echoed in the file
header.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cluster import ClusterSvmSpec
from .data import Dataset

__all__ = ["export_cluster_model", "big_m_constant"]


def big_m_constant(d: Dataset, coef_box: float) -> float:
    max_l1 = float(np.abs(d.X).sum(axis=1).max())
    return 1.0 + 2.0 * max_l1 * coef_box + coef_box


def _term(coef: float, var: str) -> str:
    return f"{'+' if coef >= 0 else '-'} {abs(coef):.12g} {var}"


def export_cluster_model(d: Dataset, spec: ClusterSvmSpec, path,
                         coef_box: float = 10.0) -> str:
    """Write the joint clustering/separation MIP in LP format; returns the path."""
    n, p = d.n, d.p
    M = big_m_constant(d, coef_box)
    data_box = float(np.abs(d.X).max()) + M  # generous bound for reference points

    obj_terms = []
    if spec.norm == "l1":
        obj_terms += [_term(0.5, f"u{j}") for j in range(p)]
    else:
        obj_terms.append(_term(0.5, "t"))
    obj_terms += [_term(spec.c1, f"e{i}") for i in range(n)]
    obj_terms += [_term(spec.c2, f"xi{i}") for i in range(n)]
    obj_terms += [_term(spec.c3, f"d{i}") for i in range(n)]

    cons: list[str] = []

    def add(name: str, lhs: list[str], sense: str, rhs: float):
        cons.append(f" {name}: " + " ".join(lhs) + f" {sense} {rhs:.12g}")

    for i in range(n):
        x = d.X[i]
        yi = int(d.y[i])
        # sign relaxation: y_i f(x_i) >= -M xi_i
        lhs = [_term(yi * x[j], f"w{j}") for j in range(p)]
        lhs += [_term(yi, "w0"), _term(M, f"xi{i}")]
        add(f"sign{i}", lhs, ">=", 0.0)
        # cluster-side errors: f(x_i) >= 1 - e_i - M(1 - th_i)
        lhs = [_term(x[j], f"w{j}") for j in range(p)]
        lhs += [_term(1.0, "w0"), _term(1.0, f"e{i}"), _term(-M, f"th{i}")]
        add(f"errp{i}", lhs, ">=", 1.0 - M)
        # f(x_i) <= -1 + e_i + M th_i
        lhs = [_term(x[j], f"w{j}") for j in range(p)]
        lhs += [_term(1.0, "w0"), _term(-1.0, f"e{i}"), _term(-M, f"th{i}")]
        add(f"errm{i}", lhs, "<=", -1.0)

    if spec.norm == "l1":
        # margin linearization u_j >= |w_j|
        for j in range(p):
            add(f"mup{j}", [_term(1.0, f"u{j}"), _term(-1.0, f"w{j}")], ">=", 0.0)
            add(f"mum{j}", [_term(1.0, f"u{j}"), _term(1.0, f"w{j}")], ">=", 0.0)
        # per-coordinate absolute deviations from each reference point
        for i in range(n):
            x = d.X[i]
            for j in range(p):
                add(f"ap{i}_{j}a", [_term(1.0, f"ap{i}_{j}"), _term(1.0, f"kp{j}")], ">=", x[j])
                add(f"ap{i}_{j}b", [_term(1.0, f"ap{i}_{j}"), _term(-1.0, f"kp{j}")], ">=", -x[j])
                add(f"am{i}_{j}a", [_term(1.0, f"am{i}_{j}"), _term(1.0, f"km{j}")], ">=", x[j])
                add(f"am{i}_{j}b", [_term(1.0, f"am{i}_{j}"), _term(-1.0, f"km{j}")], ">=", -x[j])
            # d_i >= sum_j ap_ij - M(1 - th_i);  d_i >= sum_j am_ij - M th_i
            lhs = [_term(1.0, f"d{i}")] + [_term(-1.0, f"ap{i}_{j}") for j in range(p)]
            lhs.append(_term(-M, f"th{i}"))
            add(f"dp{i}", lhs, ">=", -M)
            lhs = [_term(1.0, f"d{i}")] + [_term(-1.0, f"am{i}_{j}") for j in range(p)]
            lhs.append(_term(M, f"th{i}"))
            add(f"dm{i}", lhs, ">=", 0.0)

    qcons: list[str] = []
    if spec.norm == "l2":
        # margin cone: t >= ||w||_2
        terms = " + ".join(f"w{j} ^ 2" for j in range(p))
        qcons.append(f" qmargin: [ {terms} - t ^ 2 ] <= 0")
        # distance cones via slacks s = d_i + M(1-th) (resp. + M th) >= ||x_i - K||
        for i in range(n):
            x = d.X[i]
            for side, kvar, svar in (("p", "kp", f"sp{i}"), ("m", "km", f"sm{i}")):
                sq = []
                for j in range(p):
                    # (x_ij - k_j)^2 = k_j^2 - 2 x_ij k_j + x_ij^2
                    sq.append(f"{kvar}{j} ^ 2 - {2.0 * x[j]:.12g} {kvar}{j}")
                const = float((x * x).sum())
                qcons.append(f" qd{side}{i}: [ " + " + ".join(sq) + f" - {svar} ^ 2 ] <= {-const:.12g}")
            add(f"slkp{i}", [_term(1.0, f"sp{i}"), _term(-1.0, f"d{i}"), _term(M, f"th{i}")], "<=", M)
            add(f"slkm{i}", [_term(1.0, f"sm{i}"), _term(-1.0, f"d{i}"), _term(-M, f"th{i}")], "<=", 0.0)

    bounds = [f" -{coef_box:.12g} <= w{j} <= {coef_box:.12g}" for j in range(p)]
    bounds.append(f" -{coef_box:.12g} <= w0 <= {coef_box:.12g}")
    bounds += [f" -{data_box:.12g} <= kp{j} <= {data_box:.12g}" for j in range(p)]
    bounds += [f" -{data_box:.12g} <= km{j} <= {data_box:.12g}" for j in range(p)]
    if spec.norm == "l2":
        bounds.append(" 0 <= t")
        bounds += [f" 0 <= sp{i}" for i in range(d.n)]
        bounds += [f" 0 <= sm{i}" for i in range(d.n)]

    binaries = [f"xi{i}" for i in range(n)] + [f"th{i}" for i in range(n)]

    lines = [
        f"\\ cluster-svm {spec.norm} model for dataset {d.id}",
        f"\\ n={n} p={p} c1={spec.c1:g} c2={spec.c2:g} c3={spec.c3:g}",
        f"\\ coefficient box W={coef_box:g}, big-M={M:.12g}",
        "Minimize",
        " obj: " + " ".join(obj_terms),
        "Subject To",
        *cons,
        *qcons,
        "Bounds",
        *bounds,
        "Binaries",
        " " + " ".join(binaries),
        "End",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)
