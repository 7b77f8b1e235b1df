"""Self-contained linear programming layer.

Model builder for problems with bounded variables and sparse linear
constraints, plus a bounded-variable primal simplex solver that returns
primal values, the objective, a status, and one dual value per constraint.

Conventions:
  * minimization only
  * variable bounds may be -inf/+inf (never large finite sentinels)
  * a constraint dual is d(objective)/d(rhs); binding ``>=`` rows in a
    minimization therefore carry nonnegative duals
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

INF = math.inf

# Solver tolerances: feasibility/optimality at 1e-6, pivot acceptance at 1e-9.
FEAS_TOL = 1e-6
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
# Dantzig pricing switches to Bland's rule after this many pivots without
# objective improvement.
DEGENERATE_STREAK = 50
REFACTOR_EVERY = 128
# above this row count the basis inverse is held as a sparse LU + eta file
SPARSE_BASIS_ROWS = 400


class LpError(Exception):
    """Raised on malformed model input (reversed bounds, unknown variables)."""


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    # Numerical failure that survived the anti-cycling fallback; distinct
    # from INFEASIBLE on purpose.
    SOLVER_FAILURE = "solver_failure"


@dataclass
class LinearExpr:
    """Sparse linear expression: sum of coefficient*variable plus a constant."""

    terms: dict[int, float] = field(default_factory=dict)
    constant: float = 0.0

    def add_term(self, var: int, coef: float) -> "LinearExpr":
        self.terms[var] = self.terms.get(var, 0.0) + coef
        return self

    def normalized(self) -> "LinearExpr":
        """Drop zero coefficients; reject non-finite entries."""
        out: dict[int, float] = {}
        for var, coef in self.terms.items():
            if not math.isfinite(coef):
                raise LpError(f"non-finite coefficient {coef!r} on variable {var}")
            if coef != 0.0:
                out[var] = coef
        if not math.isfinite(self.constant):
            raise LpError(f"non-finite constant {self.constant!r}")
        return LinearExpr(out, self.constant)


def lin(pairs: dict[int, float] | None = None, constant: float = 0.0) -> LinearExpr:
    return LinearExpr(dict(pairs) if pairs else {}, constant)


# Row senses. RANGE rows carry (lo, hi) and are stored as a single row.
LE, GE, EQ, RANGE = "<=", ">=", "==", "range"


@dataclass
class _Row:
    terms: dict[int, float]
    sense: str
    rhs: float          # anchor: rhs for LE/GE/EQ, hi for RANGE
    rlo: float = 0.0    # RANGE only: lower side


class LpProblem:
    """Bounded-variable LP, sense = minimize."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self.lo: list[float] = []
        self.up: list[float] = []
        self.rows: list[_Row] = []
        self.objective = LinearExpr()

    @property
    def num_vars(self) -> int:
        return len(self.lo)

    @property
    def num_constraints(self) -> int:
        return len(self.rows)

    def add_variable(self, lower: float, upper: float) -> int:
        if math.isnan(lower) or math.isnan(upper):
            raise LpError("NaN variable bound")
        if lower > upper:
            raise LpError(f"reversed bounds: lower {lower} > upper {upper}")
        self.lo.append(float(lower))
        self.up.append(float(upper))
        return len(self.lo) - 1

    def _check_vars(self, expr: LinearExpr) -> None:
        n = self.num_vars
        for var in expr.terms:
            if not (0 <= var < n):
                raise LpError(f"unknown variable id {var}")

    def add_constraint(self, expr: LinearExpr, sense: str, rhs: float) -> int:
        if sense not in (LE, GE, EQ):
            raise LpError(f"unknown sense {sense!r}")
        if not math.isfinite(rhs):
            raise LpError(f"non-finite rhs {rhs!r}")
        expr = expr.normalized()
        self._check_vars(expr)
        # constant folds into the rhs
        self.rows.append(_Row(expr.terms, sense, float(rhs) - expr.constant))
        return len(self.rows) - 1

    def add_range_constraint(self, expr: LinearExpr, lo: float, hi: float) -> int:
        """lo <= expr <= hi as a single row (slack bounded on both sides)."""
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise LpError("range constraint needs finite sides")
        if lo > hi:
            raise LpError(f"reversed range: {lo} > {hi}")
        expr = expr.normalized()
        self._check_vars(expr)
        self.rows.append(_Row(expr.terms, RANGE, hi - expr.constant, lo - expr.constant))
        return len(self.rows) - 1

    def set_objective(self, expr: LinearExpr) -> None:
        expr = expr.normalized()
        self._check_vars(expr)
        self.objective = expr


@dataclass
class LpSolution:
    status: LpStatus
    primal: np.ndarray          # structural variable values (empty unless optimal)
    objective: float
    duals: np.ndarray           # one entry per constraint (empty unless optimal)
    iterations: int = 0

    def value(self, var: int) -> float:
        return float(self.primal[var])


def dual_of(solution: LpSolution, constraint_id: int) -> float:
    if solution.status is not LpStatus.OPTIMAL:
        raise LpError(f"duals undefined for status {solution.status.value}")
    return float(solution.duals[constraint_id])


def format_lp(problem: LpProblem) -> str:
    """Human-readable listing of the objective and constraints (debug aid)."""

    def term_str(terms: dict[int, float]) -> str:
        if not terms:
            return "0"
        parts = []
        for var in sorted(terms):
            coef = terms[var]
            sign = "-" if coef < 0 else "+"
            parts.append(f"{sign} {abs(coef):g} x{var}")
        out = " ".join(parts)
        return out[2:] if out.startswith("+ ") else out

    lines = [f"\\ problem: {problem.name}", "minimize"]
    lines.append("  " + term_str(problem.objective.terms))
    lines.append("subject to")
    for k, row in enumerate(problem.rows):
        if row.sense == RANGE:
            lines.append(f"  c{k}: {row.rlo:g} <= {term_str(row.terms)} <= {row.rhs:g}")
        else:
            lines.append(f"  c{k}: {term_str(row.terms)} {row.sense} {row.rhs:g}")
    lines.append("bounds")
    for j, (lo, up) in enumerate(zip(problem.lo, problem.up)):
        lines.append(f"  {lo:g} <= x{j} <= {up:g}")
    return "\n".join(lines) + "\n"


# variable states inside the solver
_BASIC, _AT_LO, _AT_UP, _FREE = 0, 1, 2, 3


class _DenseBasis:
    """Explicit inverse of the basis matrix; right size for small problems."""

    def __init__(self, m: int):
        self.m = m
        self.binv = np.eye(m)
        self.age = 0

    def ftran(self, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
        return self.binv[:, idx] @ vals

    def btran(self, c_basic: np.ndarray) -> np.ndarray:
        return c_basic @ self.binv

    def row(self, r: int) -> np.ndarray:
        return self.binv[r]

    def update(self, r: int, u: np.ndarray) -> None:
        pr = self.binv[r] / u[r]
        self.binv -= np.outer(u, pr)
        self.binv[r] = pr
        self.age += 1

    def needs_refresh(self) -> bool:
        return self.age >= REFACTOR_EVERY

    def refactor(self, bmat: sparse.csc_matrix) -> bool:
        try:
            self.binv = np.linalg.inv(bmat.toarray())
        except np.linalg.LinAlgError:
            return False
        self.age = 0
        return True


class _SparseLuBasis:
    """Sparse LU factors plus an eta file; keeps big bases cheap to apply."""

    def __init__(self, m: int):
        self.m = m
        self.lu = None
        self.etas: list[tuple[int, np.ndarray, float]] = []

    def ftran(self, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
        a = np.zeros(self.m)
        a[idx] = vals
        x = self.lu.solve(a)
        for r, u, ur in self.etas:
            xr = x[r] / ur
            if xr != 0.0:
                x -= u * xr
                x[r] = xr
        return x

    def btran(self, c_basic: np.ndarray) -> np.ndarray:
        w = c_basic.astype(float, copy=True)
        for r, u, ur in reversed(self.etas):
            s = u @ w
            w[r] = (w[r] - (s - ur * w[r])) / ur
        return self.lu.solve(w, trans="T")

    def row(self, r: int) -> np.ndarray:
        e = np.zeros(self.m)
        e[r] = 1.0
        return self.btran(e)

    def update(self, r: int, u: np.ndarray) -> None:
        self.etas.append((r, u.copy(), float(u[r])))

    def needs_refresh(self) -> bool:
        return len(self.etas) >= 96

    def refactor(self, bmat: sparse.csc_matrix) -> bool:
        try:
            self.lu = sparse_linalg.splu(bmat.tocsc())
        except RuntimeError:
            return False
        self.etas = []
        return True


class _Simplex:
    """Bounded-variable primal simplex over columns [structural | slack | artificial].

    Every row is held as ``a.x + s = anchor`` where the slack bound window
    encodes the sense (LE: [0,inf), GE: (-inf,0], EQ: [0,0], RANGE: [0,hi-lo]).
    """

    def __init__(self, problem: LpProblem):
        self.n = problem.num_vars
        self.m = problem.num_constraints
        n, m = self.n, self.m

        data, ri, ci = [], [], []
        anchor = np.zeros(m)
        s_lo = np.zeros(m)
        s_up = np.zeros(m)
        for i, row in enumerate(problem.rows):
            for var, coef in row.terms.items():
                data.append(coef)
                ri.append(i)
                ci.append(var)
            anchor[i] = row.rhs
            if row.sense == LE:
                s_lo[i], s_up[i] = 0.0, INF
            elif row.sense == GE:
                s_lo[i], s_up[i] = -INF, 0.0
            elif row.sense == EQ:
                s_lo[i], s_up[i] = 0.0, 0.0
            else:  # RANGE, anchored at hi
                s_lo[i], s_up[i] = 0.0, row.rhs - row.rlo

        a_struct = sparse.csc_matrix(
            (data, (ri, ci)), shape=(m, n), dtype=float
        )
        self.ncols = n + m  # artificials appended later
        self.acols = sparse.hstack(
            [a_struct, sparse.identity(m, format="csc")], format="csc"
        )
        self.anchor = anchor
        self.lo = np.concatenate([np.asarray(problem.lo), s_lo])
        self.up = np.concatenate([np.asarray(problem.up), s_up])
        self.cost = np.zeros(n + m)
        for var, coef in problem.objective.terms.items():
            self.cost[var] = coef
        self.obj_const = problem.objective.constant

        self.x = np.zeros(self.ncols)
        self.vstat = np.full(self.ncols, _AT_LO, dtype=np.int8)
        self.basis = np.zeros(m, dtype=np.int64)
        self.rep = (_SparseLuBasis(m) if m > SPARSE_BASIS_ROWS else _DenseBasis(m))
        self.n_art = 0
        self.iterations = 0

    # -- setup ---------------------------------------------------------------

    def prepare(self) -> None:
        """Initial point: structurals at the finite bound nearest zero, slacks
        basic where they absorb the residual, artificials elsewhere."""
        n, m = self.n, self.m
        for j in range(n):
            lo, up = self.lo[j], self.up[j]
            if math.isfinite(lo) and math.isfinite(up):
                self.vstat[j] = _AT_LO if abs(lo) <= abs(up) else _AT_UP
                self.x[j] = lo if self.vstat[j] == _AT_LO else up
            elif math.isfinite(lo):
                self.vstat[j], self.x[j] = _AT_LO, lo
            elif math.isfinite(up):
                self.vstat[j], self.x[j] = _AT_UP, up
            else:
                self.vstat[j], self.x[j] = _FREE, 0.0

        resid = self.anchor - self.acols[:, :n] @ self.x[:n]
        art_cols = []
        art_sign = []
        for i in range(m):
            s = n + i
            lo, up = self.lo[s], self.up[s]
            val = min(max(resid[i], lo), up)
            if abs(val - resid[i]) <= PIVOT_TOL:
                self.basis[i] = s
                self.vstat[s] = _BASIC
                self.x[s] = resid[i]
            else:
                # slack pinned at its nearest bound, artificial carries the rest
                self.x[s] = val
                self.vstat[s] = _AT_LO if val == lo else _AT_UP
                sign = 1.0 if resid[i] - val > 0 else -1.0
                art_cols.append(i)
                art_sign.append(sign)

        self.n_art = len(art_cols)
        if self.n_art:
            k = np.arange(self.n_art)
            art = sparse.csc_matrix(
                (np.asarray(art_sign), (np.asarray(art_cols), k)),
                shape=(m, self.n_art),
            )
            self.acols = sparse.hstack([self.acols, art], format="csc")
            self.lo = np.concatenate([self.lo, np.zeros(self.n_art)])
            self.up = np.concatenate([self.up, np.full(self.n_art, INF)])
            self.cost = np.concatenate([self.cost, np.zeros(self.n_art)])
            self.x = np.concatenate([self.x, np.zeros(self.n_art)])
            self.vstat = np.concatenate(
                [self.vstat, np.zeros(self.n_art, dtype=np.int8)]
            )
            for k, (i, sign) in enumerate(zip(art_cols, art_sign)):
                a = self.ncols + k
                # row reads a.x + s + sign*art = anchor with s pinned at a bound
                self.x[a] = sign * (resid[i] - self.x[self.n + i])
                self.basis[i] = a
                self.vstat[a] = _BASIC
        self.ncols += self.n_art
        self.acols = self.acols.tocsc()
        self.refactorize()

    # -- linear algebra helpers ----------------------------------------------

    def _col(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        a = self.acols
        sl = slice(a.indptr[j], a.indptr[j + 1])
        return a.indices[sl], a.data[sl]

    def _ftran(self, j: int) -> np.ndarray:
        idx, vals = self._col(j)
        return self.rep.ftran(idx, vals)

    def refactorize(self) -> bool:
        if self.m == 0:
            return True
        bmat = self.acols[:, self.basis]
        if not self.rep.refactor(bmat):
            return False
        nb = np.flatnonzero(self.vstat != _BASIC)
        resid = self.anchor - self.acols[:, nb] @ self.x[nb]
        self.x[self.basis] = self.rep.ftran(np.arange(self.m), resid) \
            if isinstance(self.rep, _DenseBasis) else self.rep.lu.solve(resid)
        return True

    # -- core iteration ------------------------------------------------------

    def iterate(self, costs: np.ndarray, max_iter: int) -> str:
        """Run simplex with the given cost vector. Returns 'optimal',
        'unbounded' or 'stalled'."""
        streak = 0
        bland = False
        basic_mask = self.vstat == _BASIC

        while True:
            if self.iterations >= max_iter:
                return "stalled"
            self.iterations += 1
            if self.rep.needs_refresh():
                if not self.refactorize():
                    return "stalled"

            y = self.rep.btran(costs[self.basis])
            red = costs - (self.acols.T @ y)
            red[basic_mask] = 0.0

            movable = self.up - self.lo > 0
            at_lo = (self.vstat == _AT_LO) & movable & (red < -OPT_TOL)
            at_up = (self.vstat == _AT_UP) & movable & (red > OPT_TOL)
            free = (self.vstat == _FREE) & (np.abs(red) > OPT_TOL)
            elig = at_lo | at_up | free
            if not elig.any():
                return "optimal"

            if bland:
                q = int(np.flatnonzero(elig)[0])
            else:
                score = np.where(elig, np.abs(red), 0.0)
                q = int(np.argmax(score))  # first max = lowest variable id

            direction = 1.0 if (self.vstat[q] == _AT_LO or
                                (self.vstat[q] == _FREE and red[q] < 0)) else -1.0
            u = self._ftran(q)

            # ratio test: basic variables hit a bound, or entering flips bounds
            xb = self.x[self.basis]
            du = direction * u
            lo_b = self.lo[self.basis]
            up_b = self.up[self.basis]
            ratios = np.full(self.m, INF)
            pos = du > PIVOT_TOL
            neg = du < -PIVOT_TOL
            ratios[pos] = (xb[pos] - lo_b[pos]) / du[pos]
            ratios[neg] = (xb[neg] - up_b[neg]) / du[neg]
            ratios = np.maximum(ratios, 0.0)

            t_self = self.up[q] - self.lo[q]  # inf if one-sided/free
            t_row = ratios.min() if self.m else INF
            t = min(t_self, t_row)
            if not math.isfinite(t):
                return "unbounded"

            gain = abs(red[q]) * t
            if gain > 1e-12 * (1.0 + abs(self._objective(costs))):
                streak = 0
                bland = False
            else:
                streak += 1
                if streak >= DEGENERATE_STREAK:
                    bland = True

            if t_self <= t_row:
                # bound flip, basis unchanged
                self.x[q] += direction * t_self
                self.vstat[q] = _AT_UP if self.vstat[q] == _AT_LO else _AT_LO
                self.x[self.basis] = xb - du * t_self
                continue

            # leaving row: smallest ratio; break ties on pivot magnitude, then
            # on lowest leaving variable id (deterministic)
            cand = np.flatnonzero(ratios <= t + 1e-9)
            amax = np.abs(du[cand]).max()
            cand = cand[np.abs(du[cand]) >= amax - 1e-12]
            r = int(cand[np.argmin(self.basis[cand])])
            leave = int(self.basis[r])
            # ratio test admits only |du| > PIVOT_TOL rows, so u[r] is usable

            self.x[self.basis] = xb - du * t
            self.x[q] = self.x[q] + direction * t
            # snap the leaving variable to the bound it reached
            if du[r] > 0:
                self.x[leave] = self.lo[leave]
                self.vstat[leave] = _AT_LO
            else:
                self.x[leave] = self.up[leave]
                self.vstat[leave] = _AT_UP
            self.vstat[q] = _BASIC
            basic_mask[leave] = False
            basic_mask[q] = True

            # basis inverse update
            self.rep.update(r, u)
            self.basis[r] = q

    def _objective(self, costs: np.ndarray) -> float:
        return float(costs @ self.x)

    # -- phases ----------------------------------------------------------------

    def drive_out_artificials(self) -> None:
        """Pivot basic artificials (value ~0) out; pin redundant rows."""
        if not self.n_art:
            return
        first_art = self.ncols - self.n_art
        for r in range(self.m):
            j = int(self.basis[r])
            if j < first_art:
                continue
            row = self.rep.row(r)
            piv = self.acols.T @ row  # piv[q] == (B^-1 a_q)[r]
            movable = (self.vstat != _BASIC) & (self.up - self.lo > 0)
            movable[first_art:] = False
            cand = np.flatnonzero(movable & (np.abs(piv) > 1e-7))
            if cand.size:
                # degenerate swap: entering keeps its value, artificial
                # leaves at zero
                q = int(cand[0])
                u = self._ftran(q)
                self.vstat[j] = _AT_LO
                self.x[j] = 0.0
                self.vstat[q] = _BASIC
                self.rep.update(r, u)
                self.basis[r] = q
            else:
                # dependent row: keep the artificial pinned at zero
                self.up[j] = 0.0
        # freeze every artificial out of phase 2
        self.up[first_art:] = 0.0
        self.refactorize()

    # -- public ----------------------------------------------------------------

    def solve(self) -> LpSolution:
        self.prepare()
        max_iter = 2000 + 60 * (self.m + self.n)

        if self.n_art:
            ph1 = np.zeros(self.ncols)
            ph1[self.ncols - self.n_art:] = 1.0
            outcome = self.iterate(ph1, max_iter)
            if outcome == "stalled":
                return LpSolution(LpStatus.SOLVER_FAILURE, np.empty(0), math.nan,
                                  np.empty(0), self.iterations)
            infeas = self._objective(ph1)
            if infeas > FEAS_TOL:
                return LpSolution(LpStatus.INFEASIBLE, np.empty(0), math.nan,
                                  np.empty(0), self.iterations)
            self.drive_out_artificials()

        costs = self.cost  # already padded with zeros over slacks/artificials
        outcome = self.iterate(costs, max_iter)
        if outcome == "unbounded":
            return LpSolution(LpStatus.UNBOUNDED, np.empty(0), math.nan,
                              np.empty(0), self.iterations)
        if outcome == "stalled":
            return LpSolution(LpStatus.SOLVER_FAILURE, np.empty(0), math.nan,
                              np.empty(0), self.iterations)

        if not self._post_checks():
            # one clean refactorization pass, then re-optimize
            self.refactorize()
            outcome = self.iterate(costs, self.iterations + 2000)
            if outcome != "optimal" or not self._post_checks():
                return LpSolution(LpStatus.SOLVER_FAILURE, np.empty(0), math.nan,
                                  np.empty(0), self.iterations)

        y = self.rep.btran(costs[self.basis])
        primal = self.x[: self.n].copy()
        obj = float(self.cost[: self.n] @ primal) + self.obj_const
        return LpSolution(LpStatus.OPTIMAL, primal, obj, np.asarray(y),
                          self.iterations)

    def _post_checks(self) -> bool:
        """Primal feasibility of the final iterate at FEAS_TOL."""
        resid = self.anchor - self.acols @ self.x
        if np.abs(resid).max(initial=0.0) > FEAS_TOL:
            return False
        below = np.maximum(self.lo - self.x, 0.0)
        above = np.maximum(self.x - self.up, 0.0)
        viol = np.maximum(below, above)
        # artificials were frozen at 0 via their bounds
        return viol.max(initial=0.0) <= FEAS_TOL


def solve(problem: LpProblem) -> LpSolution:
    """Solve a minimization LP; deterministic for identical input."""
    if problem.num_vars == 0:
        # vacuous model: objective constant, all rows with empty support
        for k, row in enumerate(problem.rows):
            lo = row.rlo if row.sense == RANGE else None
            ok = {
                LE: 0.0 <= row.rhs + FEAS_TOL,
                GE: 0.0 >= row.rhs - FEAS_TOL,
                EQ: abs(row.rhs) <= FEAS_TOL,
                RANGE: lo is not None and lo - FEAS_TOL <= 0.0 <= row.rhs + FEAS_TOL,
            }[row.sense]
            if not ok:
                return LpSolution(LpStatus.INFEASIBLE, np.empty(0), math.nan, np.empty(0))
        return LpSolution(LpStatus.OPTIMAL, np.empty(0),
                          problem.objective.constant,
                          np.zeros(problem.num_constraints))
    return _Simplex(problem).solve()
