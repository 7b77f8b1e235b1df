"""Brute-force vertex enumeration oracle for small bounded LPs.

Independent of the simplex implementation: candidate vertices come from
solving every n-subset of {constraint rows as equalities} x {variable bounds},
filtering for feasibility, and taking the best objective. Only valid for
problems whose feasible region is bounded (all variable bounds finite).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from rampdispatch import lp


def enumerate_optimum(problem: lp.LpProblem, tol: float = 1e-9):
    """Return (status, objective, argmin) by exhaustive vertex enumeration."""
    n = problem.num_vars
    lo = np.asarray(problem.lo)
    up = np.asarray(problem.up)
    if not (np.isfinite(lo).all() and np.isfinite(up).all()):
        raise ValueError("oracle requires finite variable bounds")

    rows = []
    senses = []
    rhs = []
    for row in problem.rows:
        a = np.zeros(n)
        for var, coef in row.terms.items():
            a[var] = coef
        if row.sense == lp.RANGE:
            rows.extend([a, a])
            senses.extend([lp.LE, lp.GE])
            rhs.extend([row.rhs, row.rlo])
        else:
            rows.append(a)
            senses.append(row.sense)
            rhs.append(row.rhs)
    a_mat = np.asarray(rows) if rows else np.zeros((0, n))
    rhs = np.asarray(rhs)
    m = len(rhs)

    c = np.zeros(n)
    for var, coef in problem.objective.terms.items():
        c[var] = coef

    def feasible(x: np.ndarray) -> bool:
        if (x < lo - 1e-7).any() or (x > up + 1e-7).any():
            return False
        vals = a_mat @ x if m else np.empty(0)
        for v, s, b in zip(vals, senses, rhs):
            if s == lp.LE and v > b + 1e-7:
                return False
            if s == lp.GE and v < b - 1e-7:
                return False
            if s == lp.EQ and abs(v - b) > 1e-7:
                return False
        return True

    best = math.inf
    best_x = None
    found = False
    row_ids = range(m)
    for k in range(0, n + 1):
        for tight_rows in itertools.combinations(row_ids, k):
            free_slots = n - k
            for bound_vars in itertools.combinations(range(n), free_slots):
                for pattern in itertools.product((0, 1), repeat=free_slots):
                    sys_a = np.zeros((n, n))
                    sys_b = np.zeros(n)
                    for r, ri in enumerate(tight_rows):
                        sys_a[r] = a_mat[ri]
                        sys_b[r] = rhs[ri]
                    for j, (var, side) in enumerate(zip(bound_vars, pattern)):
                        sys_a[k + j, var] = 1.0
                        sys_b[k + j] = up[var] if side else lo[var]
                    try:
                        x = np.linalg.solve(sys_a, sys_b)
                    except np.linalg.LinAlgError:
                        continue
                    if not feasible(x):
                        continue
                    found = True
                    val = float(c @ x)
                    if val < best - tol:
                        best = val
                        best_x = x
    if not found:
        return lp.LpStatus.INFEASIBLE, math.nan, None
    return lp.LpStatus.OPTIMAL, best + problem.objective.constant, best_x


def random_bounded_lp(rng: np.random.Generator, max_vars: int = 6,
                      max_rows: int = 8) -> lp.LpProblem:
    """Random LP that is feasible by construction (rows anchored at an
    interior point) with finite bounds, so the oracle applies."""
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(0, max_rows + 1))
    p = lp.LpProblem("fuzz")
    lo = rng.uniform(-5, 0, size=n)
    width = rng.uniform(0.5, 6.0, size=n)
    for j in range(n):
        p.add_variable(lo[j], lo[j] + width[j])
    x0 = np.asarray([rng.uniform(p.lo[j], p.up[j]) for j in range(n)])
    for _ in range(m):
        nnz = int(rng.integers(1, n + 1))
        support = rng.choice(n, size=nnz, replace=False)
        coefs = rng.normal(0, 1, size=nnz)
        expr = lp.lin({int(v): float(cf) for v, cf in zip(support, coefs)})
        lhs0 = float(sum(cf * x0[v] for v, cf in zip(support, coefs)))
        kind = rng.random()
        if kind < 0.4:
            p.add_constraint(expr, lp.LE, lhs0 + abs(rng.normal(0, 1.0)))
        elif kind < 0.8:
            p.add_constraint(expr, lp.GE, lhs0 - abs(rng.normal(0, 1.0)))
        elif kind < 0.9:
            p.add_constraint(expr, lp.EQ, lhs0)
        else:
            span = abs(rng.normal(0, 1.0))
            p.add_range_constraint(expr, lhs0 - span, lhs0 + span)
    obj = {j: float(rng.normal(0, 2)) for j in range(n)}
    p.set_objective(lp.lin(obj, float(rng.normal(0, 1))))
    return p
