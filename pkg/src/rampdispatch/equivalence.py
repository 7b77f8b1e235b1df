"""Feasible-region equivalence between LAED and the enhanced ramp products.

The two single-step formulations share the coordinates (committed dispatch,
shed series). A LAED trajectory maps onto ramp products by taking the running
envelope of each generator's deviation from its committed output; an RP point
maps back by reconstructing the trajectory from net procurement. Equivalence
of the regions is exercised two ways:

* equal optima under surrogate objectives expressible in the shared
  coordinates (minimum total shed, and committed cost plus shed penalty);
* round-trip feasibility of the constructive maps.

The equivalence holds on sustained (monotone nondecreasing) net-load ramps,
which is the regime the randomized instance generator draws from; on
rise-then-fall profiles the rolling-difference family deliberately
over-secures and the regions differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .policies import Forecast, PolicyConfig, RP, build_laed, build_rp
from .system import DispatchState, PenaltyConfig, SystemSpec


class EquivalenceError(Exception):
    pass


@dataclass
class LaedPoint:
    """Trajectory g[i, tau] and shed s[tau] for tau = 0..W."""

    g: np.ndarray
    s: np.ndarray


@dataclass
class RpPoint:
    """Committed g[i], shed s[tau] (tau = 0..W), products r[i, tau-1]
    for tau = 1..W (columns ordered by duration)."""

    g: np.ndarray
    s: np.ndarray
    r_plus: np.ndarray
    r_minus: np.ndarray


@dataclass(frozen=True)
class Violation:
    name: str
    amount: float

    def __str__(self) -> str:
        return f"{self.name} violated by {self.amount:.3e}"


def enhanced_config(w: int, penalty: PenaltyConfig | None = None) -> PolicyConfig:
    """All durations 1..W with both intertemporal families enabled."""
    return PolicyConfig(
        kind=RP,
        window_w=w,
        durations=tuple(range(1, w + 1)),
        increment_constraints=True,
        rolling_difference_constraints=True,
        penalty=penalty or PenaltyConfig(),
    )


# ---------------------------------------------------------------------------
# constructive maps


def laed_to_rp(point: LaedPoint, state: DispatchState,
               system: SystemSpec | None = None,
               forecast: Forecast | None = None) -> RpPoint:
    """Running-envelope construction of ramp products from a trajectory.

    When ``system`` and ``forecast`` are supplied the input is validated
    first and an infeasible point is rejected with its violated constraint.
    """
    if system is not None and forecast is not None:
        bad = check_feasible_laed(point, system, state, forecast)
        if bad:
            raise EquivalenceError(f"input LAED point infeasible: {bad[0]}")
    g = np.asarray(point.g, dtype=float)
    n, w_plus_1 = g.shape
    w = w_plus_1 - 1
    r_plus = np.zeros((n, w))
    r_minus = np.zeros((n, w))
    for tau in range(1, w + 1):
        dev = g[:, tau] - g[:, 0]
        if tau == 1:
            r_plus[:, 0] = np.maximum(0.0, dev)
            r_minus[:, 0] = np.maximum(0.0, -dev)
        else:
            r_plus[:, tau - 1] = np.maximum(r_plus[:, tau - 2], dev)
            r_minus[:, tau - 1] = np.maximum(r_minus[:, tau - 2], -dev)
    return RpPoint(g[:, 0].copy(), np.asarray(point.s, dtype=float).copy(),
                   r_plus, r_minus)


def rp_to_laed(point: RpPoint, state: DispatchState,
               system: SystemSpec | None = None,
               forecast: Forecast | None = None,
               config: PolicyConfig | None = None) -> LaedPoint:
    """Trajectory reconstruction g'(t+tau) = g(t) + r+(t+tau) - r-(t+tau)."""
    if system is not None and forecast is not None:
        cfg = config or enhanced_config(point.r_plus.shape[1])
        bad = check_feasible_rp(point, system, state, forecast, cfg)
        if bad:
            raise EquivalenceError(f"input RP point infeasible: {bad[0]}")
    g0 = np.asarray(point.g, dtype=float)
    n = g0.shape[0]
    w = point.r_plus.shape[1]
    g = np.empty((n, w + 1))
    g[:, 0] = g0
    for tau in range(1, w + 1):
        g[:, tau] = g0 + point.r_plus[:, tau - 1] - point.r_minus[:, tau - 1]
    return LaedPoint(g, np.asarray(point.s, dtype=float).copy())


# ---------------------------------------------------------------------------
# constraint evaluators


def check_feasible_laed(point: LaedPoint, system: SystemSpec,
                        state: DispatchState, forecast: Forecast,
                        tol: float = 1e-6) -> list[Violation]:
    """Evaluate every trajectory constraint; return violations with sizes."""
    arr = system.arrays()
    g = np.asarray(point.g, dtype=float)
    s = np.asarray(point.s, dtype=float)
    w = forecast.window
    out: list[Violation] = []
    if g.shape != (system.n, w + 1) or s.shape != (w + 1,):
        raise EquivalenceError(
            f"point shape {g.shape}/{s.shape} does not match system/forecast "
            f"({system.n}, {w + 1})"
        )

    def report(name: str, amount: float) -> None:
        if amount > tol:
            out.append(Violation(name, float(amount)))

    for tau in range(w + 1):
        for i in range(system.n):
            report(f"capacity_low[g{i},tau{tau}]", arr["g_min"][i] - g[i, tau])
            report(f"capacity_high[g{i},tau{tau}]", g[i, tau] - arr["g_max"][i])
            prev = state.prev_output[i] if tau == 0 else g[i, tau - 1]
            step = g[i, tau] - prev
            report(f"ramp_up[g{i},tau{tau}]", step - arr["ramp_up"][i])
            report(f"ramp_down[g{i},tau{tau}]", -step - arr["ramp_down"][i])
        report(f"shed_sign[tau{tau}]", -s[tau])
        gap = abs(forecast.demand[tau] - s[tau] - g[:, tau].sum())
        report(f"balance[tau{tau}]", gap)
    return out


def check_feasible_rp(point: RpPoint, system: SystemSpec, state: DispatchState,
                      forecast: Forecast, config: PolicyConfig,
                      tol: float = 1e-6) -> list[Violation]:
    """Evaluate the RP constraint families selected by ``config``."""
    arr = system.arrays()
    g = np.asarray(point.g, dtype=float)
    s = np.asarray(point.s, dtype=float)
    rp = np.asarray(point.r_plus, dtype=float)
    rm = np.asarray(point.r_minus, dtype=float)
    w = forecast.window
    durations = tuple(d for d in config.durations if d <= w)
    out: list[Violation] = []

    def report(name: str, amount: float) -> None:
        if amount > tol:
            out.append(Violation(name, float(amount)))

    def col(d: int) -> int:
        return durations.index(d)

    if rp.shape[1] < len(durations) or s.shape[0] < w + 1:
        raise EquivalenceError("point arrays too small for the duration set")

    for i in range(system.n):
        report(f"capacity_low[g{i}]", arr["g_min"][i] - g[i])
        report(f"capacity_high[g{i}]", g[i] - arr["g_max"][i])
        step = g[i] - state.prev_output[i]
        report(f"ramp_up[g{i}]", step - arr["ramp_up"][i])
        report(f"ramp_down[g{i}]", -step - arr["ramp_down"][i])
    for tau in range(w + 1):
        report(f"shed_sign[tau{tau}]", -s[tau])
    report("balance", abs(forecast.demand[0] - s[0] - g.sum()))

    for d in durations:
        k = col(d)
        for i in range(system.n):
            report(f"product_sign[r+{i},d{d}]", -rp[i, k])
            report(f"product_sign[r-{i},d{d}]", -rm[i, k])
            report(f"product_bound[r+{i},d{d}]", rp[i, k] - d * arr["ramp_up"][i])
            report(f"product_bound[r-{i},d{d}]", rm[i, k] - d * arr["ramp_down"][i])
            report(f"headroom_up[g{i},d{d}]", g[i] + rp[i, k] - arr["g_max"][i])
            report(f"headroom_down[g{i},d{d}]", arr["g_min"][i] - (g[i] - rm[i, k]))
        need_up = (forecast.demand[d] - s[d]) - (forecast.demand[0] - s[0])
        report(f"coverage_up[d{d}]", need_up - rp[:, k].sum())
        need_dn = (forecast.demand[0] - s[0]) - (forecast.demand[d] - s[d])
        report(f"coverage_down[d{d}]", need_dn - rm[:, k].sum())

    pairs = list(zip(durations, durations[1:]))
    if config.increment_constraints:
        for a, b in pairs:
            ka, kb = col(a), col(b)
            gap = b - a
            for i in range(system.n):
                report(f"increment_up_low[g{i},{a}->{b}]", rp[i, ka] - rp[i, kb])
                report(f"increment_up_high[g{i},{a}->{b}]",
                       rp[i, kb] - rp[i, ka] - gap * arr["ramp_up"][i])
                report(f"increment_down_low[g{i},{a}->{b}]", rm[i, ka] - rm[i, kb])
                report(f"increment_down_high[g{i},{a}->{b}]",
                       rm[i, kb] - rm[i, ka] - gap * arr["ramp_down"][i])
    if config.rolling_difference_constraints:
        for a, b in pairs:
            ka, kb = col(a), col(b)
            need = (forecast.demand[b] - s[b]) - (forecast.demand[a] - s[a])
            report(f"rolling_diff_up[{a}->{b}]",
                   need - (rp[:, kb].sum() - rp[:, ka].sum()))
            report(f"rolling_diff_down[{a}->{b}]",
                   -need - (rm[:, kb].sum() - rm[:, ka].sum()))
    return out


# ---------------------------------------------------------------------------
# surrogate-objective optima


def _solve_with_objective(problem, objective: lp.LinearExpr) -> lp.LpSolution:
    problem.lp.set_objective(objective)
    sol = lp.solve(problem.lp)
    if sol.status is not lp.LpStatus.OPTIMAL:
        raise EquivalenceError(f"surrogate solve failed: {sol.status.value}")
    return sol


def _shed_objective(problem) -> lp.LinearExpr:
    obj = lp.LinearExpr()
    for key, var in problem.var_map.items():
        if key[0] == "s":
            obj.add_term(var, 1.0)
    return obj


def min_shed_laed(system: SystemSpec, state: DispatchState,
                  forecast: Forecast) -> float:
    cfg = PolicyConfig(kind="laed", window_w=forecast.window)
    problem = build_laed(system, state, forecast, cfg)
    return _solve_with_objective(problem, _shed_objective(problem)).objective


def min_shed_enhanced_rp(system: SystemSpec, state: DispatchState,
                         forecast: Forecast) -> float:
    cfg = enhanced_config(forecast.window)
    problem = build_rp(system, state, forecast, cfg)
    return _solve_with_objective(problem, _shed_objective(problem)).objective


def min_shed_equivalence(system: SystemSpec, state: DispatchState,
                         forecast: Forecast, w: int) -> tuple[float, float]:
    """Minimum total shed of both formulations over the same window.

    Region equivalence makes the two values equal (up to solver tolerance)
    whenever the initial dispatch is identical on both sides.
    """
    if forecast.window != w:
        forecast = Forecast(forecast.demand[: w + 1])
    return (min_shed_laed(system, state, forecast),
            min_shed_enhanced_rp(system, state, forecast))


# ---------------------------------------------------------------------------
# canonical optimal points for round-trip map checks


def canonical_monotone_laed(system: SystemSpec, state: DispatchState,
                            forecast: Forecast, total_shed: float,
                            slack: float = 1e-7) -> LaedPoint | None:
    """A min-shed-optimal LAED point with per-generator nondecreasing
    trajectories, or None when no such decomposition exists. On sustained
    up-ramps one always has; it is the natural input for the envelope map."""
    cfg = PolicyConfig(kind="laed", window_w=forecast.window)
    problem = build_laed(system, state, forecast, cfg)
    w = forecast.window
    for tau in range(1, w + 1):
        for i in range(system.n):
            problem.lp.add_constraint(
                lp.lin({problem.var_map[("g", i, tau)]: 1.0,
                        problem.var_map[("g", i, tau - 1)]: -1.0}),
                lp.GE, 0.0,
            )
    problem.lp.add_constraint(_shed_objective(problem), lp.LE,
                              total_shed + slack)
    problem.lp.set_objective(_shed_objective(problem))
    sol = lp.solve(problem.lp)
    if sol.status is not lp.LpStatus.OPTIMAL:
        return None
    g = np.array([[sol.value(problem.var_map[("g", i, tau)])
                   for tau in range(w + 1)] for i in range(system.n)])
    s = np.array([sol.value(problem.var_map[("s", tau)]) for tau in range(w + 1)])
    return LaedPoint(g, s)


def canonical_tight_rp(system: SystemSpec, state: DispatchState,
                       forecast: Forecast, total_shed: float,
                       slack: float = 1e-7) -> RpPoint | None:
    """A min-shed-optimal enhanced-RP point with minimal total procurement,
    which makes the coverage rows tight and the reconstruction map exact."""
    w = forecast.window
    cfg = enhanced_config(w)
    problem = build_rp(system, state, forecast, cfg)
    problem.lp.add_constraint(_shed_objective(problem), lp.LE,
                              total_shed + slack)
    r_total = lp.LinearExpr()
    for key, var in problem.var_map.items():
        if key[0] in ("rp", "rm"):
            r_total.add_term(var, 1.0)
    problem.lp.set_objective(r_total)
    sol = lp.solve(problem.lp)
    if sol.status is not lp.LpStatus.OPTIMAL:
        return None
    n = system.n
    g = np.array([sol.value(problem.var_map[("g", i, 0)]) for i in range(n)])
    s = np.array([sol.value(problem.var_map[("s", tau)]) for tau in range(w + 1)])
    rp = np.array([[sol.value(problem.var_map[("rp", i, d)])
                    for d in range(1, w + 1)] for i in range(n)])
    rm = np.array([[sol.value(problem.var_map[("rm", i, d)])
                    for d in range(1, w + 1)] for i in range(n)])
    return RpPoint(g, s, rp, rm)


# ---------------------------------------------------------------------------
# randomized trials


def random_stressed_instance(rng: np.random.Generator, max_gens: int = 4,
                             max_window: int = 4):
    """Fleet, state and a sustained up-ramp forecast that stresses the
    aggregate ramp capability (steps up to 1.4x the fleet ramp, so shedding
    is forced on a fair share of draws)."""
    n = int(rng.integers(1, max_gens + 1))
    caps = rng.uniform(50, 500, n)
    ramps_up = rng.uniform(5, 60, n)
    ramps_dn = rng.uniform(5, 60, n)
    costs = rng.uniform(10, 100, n)
    from .system import GeneratorSpec, SystemSpec as _Sys

    gens = tuple(
        GeneratorSpec(f"R{i}", 0.0, float(caps[i]), float(ramps_up[i]),
                      float(ramps_dn[i]), float(costs[i]))
        for i in range(n)
    )
    system = _Sys(generators=gens)
    prev = rng.uniform(0.0, caps)
    state = DispatchState(prev_output=prev)
    w = int(rng.integers(1, max_window + 1))
    total_up = ramps_up.sum()
    # first interval stays reachable downward (over-generation is infeasible)
    floor = float(np.maximum(prev - ramps_dn, 0.0).sum())
    d0 = max(floor, float(prev.sum() + rng.uniform(-0.3, 0.7) * total_up))
    steps = rng.uniform(0.0, 1.4 * total_up, size=w)
    demand = d0 + np.concatenate([[0.0], np.cumsum(steps)])
    return system, state, Forecast(tuple(demand)), w


@dataclass
class TrialResult:
    discrepancy: float
    laed_value: float
    rp_value: float
    roundtrip_violations: list[Violation]


def equivalence_trial(system: SystemSpec, state: DispatchState,
                      forecast: Forecast) -> TrialResult:
    """One full equivalence check: surrogate optima plus both map directions
    applied to canonical optimal points."""
    w = forecast.window
    laed_v, rp_v = min_shed_equivalence(system, state, forecast, w)
    total = min(laed_v, rp_v)
    violations: list[Violation] = []

    laed_pt = canonical_monotone_laed(system, state, forecast, total)
    if laed_pt is None:
        violations.append(Violation("monotone_decomposition_exists", 1.0))
    else:
        mapped = laed_to_rp(laed_pt, state)
        violations += check_feasible_rp(mapped, system, state, forecast,
                                        enhanced_config(w))
    rp_pt = canonical_tight_rp(system, state, forecast, total)
    if rp_pt is None:
        violations.append(Violation("tight_procurement_exists", 1.0))
    else:
        mapped_back = rp_to_laed(rp_pt, state)
        violations += check_feasible_laed(mapped_back, system, state, forecast)

    return TrialResult(abs(laed_v - rp_v), laed_v, rp_v, violations)


def run_equivalence_suite(trials: int, seed: int, max_gens: int = 4,
                          max_window: int = 4, tolerance: float = 1e-6):
    """Randomized suite; returns (worst_discrepancy, failures) where failures
    lists (trial_index, reason)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures: list[tuple[int, str]] = []
    for k in range(trials):
        system, state, forecast, _w = random_stressed_instance(
            rng, max_gens, max_window
        )
        res = equivalence_trial(system, state, forecast)
        worst = max(worst, res.discrepancy)
        if res.discrepancy > tolerance:
            failures.append((k, f"optima differ by {res.discrepancy:.3e}"))
        for v in res.roundtrip_violations:
            failures.append((k, f"round trip: {v}"))
    return worst, failures
