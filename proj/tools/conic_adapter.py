#!/usr/bin/env python3
"""Conic solver adapter.

Reads a program description (linear objective, linear constraints, PSD
blocks M(x) <= 0 with affine entries) from the input JSON path and writes
{status, x, objective} to the output path. Backed by Clarabel, with a
cvxopt fallback when Clarabel is unavailable.

Usage: conic_adapter.py input.json output.json
"""

import json
import math
import sys


def load(path):
    with open(path) as f:
        return json.load(f)


def save(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f)


def solve_clarabel(prog):
    import clarabel
    import numpy as np
    from scipy import sparse

    n = prog["num_vars"]
    q = np.array(prog["objective"], dtype=float)

    rows, cols, vals, b, cones = [], [], [], [], []
    nrow = 0

    def add_row(terms, rhs):
        nonlocal nrow
        for var, coef in terms:
            rows.append(nrow)
            cols.append(var)
            vals.append(float(coef))
        b.append(float(rhs))
        nrow += 1

    # equalities first (zero cone), then inequalities (nonneg), then PSD
    eqs = [c for c in prog["linear"] if c["eq"]]
    les = [c for c in prog["linear"] if not c["eq"]]
    for c in eqs:  # expr == 0  ->  A x + s = -const, s = 0
        add_row(c["terms"], -c["const"])
    if eqs:
        cones.append(clarabel.ZeroConeT(len(eqs)))
    for c in les:  # expr <= 0  ->  A x + s = -const, s >= 0
        add_row(c["terms"], -c["const"])
    if les:
        cones.append(clarabel.NonnegativeConeT(len(les)))

    r2 = math.sqrt(2.0)
    for blk in prog["psd"]:
        k = blk["size"]
        # svec of -M(x) must be PSD: M_lin x + s = -M_const (scaled)
        tri = {}
        for e in blk["entries"]:
            tri[(e["row"], e["col"])] = e
        # Clarabel's triangular cone is the column-stacked upper triangle;
        # entries are stored as the lower triangle, so transpose the lookup.
        for col in range(k):
            for row in range(col + 1):
                e = tri.get((col, row), {"const": 0.0, "terms": []})
                scale = 1.0 if row == col else r2
                add_row([(v, scale * c) for v, c in e["terms"]],
                        -scale * e["const"])
        cones.append(clarabel.PSDTriangleConeT(k))

    A = sparse.csc_matrix(
        (vals, (rows, cols)), shape=(nrow, n))
    P = sparse.csc_matrix((n, n))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    solver = clarabel.DefaultSolver(P, q, A, np.array(b), cones, settings)
    sol = solver.solve()
    status = str(sol.status)
    if status in ("Solved", "AlmostSolved"):
        return {"status": "optimal", "x": list(sol.x),
                "objective": float(sol.obj_val), "message": status}
    if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return {"status": "infeasible", "message": status}
    return {"status": "numerical-failure", "message": status}


def solve_cvxopt(prog):
    from cvxopt import matrix, solvers, spmatrix

    n = prog["num_vars"]
    c = matrix(prog["objective"], tc="d")

    eqs = [x for x in prog["linear"] if x["eq"]]
    les = [x for x in prog["linear"] if not x["eq"]]

    def build(rows_spec):
        ri, ci, vi, h = [], [], [], []
        for i, (terms, rhs) in enumerate(rows_spec):
            for var, coef in terms:
                ri.append(i)
                ci.append(var)
                vi.append(float(coef))
            h.append(float(rhs))
        return ri, ci, vi, h

    G_rows = [(x["terms"], -x["const"]) for x in les]
    dims = {"l": len(les), "q": [], "s": []}
    for blk in prog["psd"]:
        k = blk["size"]
        dims["s"].append(k)
        tri = {(e["row"], e["col"]): e for e in blk["entries"]}
        full = []
        for col in range(k):
            for row in range(k):
                rr, cc = max(row, col), min(row, col)
                e = tri.get((rr, cc), {"const": 0.0, "terms": []})
                full.append((e["terms"], -e["const"]))
        G_rows.extend(full)
    ri, ci, vi, h = build(G_rows)
    G = spmatrix(vi, ri, ci, (len(G_rows), n))
    hv = matrix(h, tc="d")
    A = bmat = None
    if eqs:
        ri, ci, vi, h2 = build([(x["terms"], -x["const"]) for x in eqs])
        A = spmatrix(vi, ri, ci, (len(eqs), n))
        bmat = matrix(h2, tc="d")
    solvers.options["show_progress"] = False
    try:
        if A is not None:
            sol = solvers.conelp(c, G, hv, dims, A, bmat)
        else:
            sol = solvers.conelp(c, G, hv, dims)
    except Exception as exc:  # noqa: BLE001
        return {"status": "numerical-failure", "message": str(exc)}
    if sol["status"] == "optimal":
        return {"status": "optimal", "x": list(sol["x"]),
                "objective": float(sol["primal objective"]),
                "message": "optimal"}
    if sol["status"] == "primal infeasible":
        return {"status": "infeasible", "message": sol["status"]}
    return {"status": "numerical-failure", "message": sol["status"]}


def main():
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    prog = load(sys.argv[1])
    try:
        try:
            result = solve_clarabel(prog)
        except ImportError:
            result = solve_cvxopt(prog)
    except Exception as exc:  # noqa: BLE001
        result = {"status": "numerical-failure", "message": repr(exc)}
    save(sys.argv[2], result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
