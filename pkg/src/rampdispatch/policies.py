"""Dispatch-policy LP builders.

Two families of single-step decision problems, both re-solved every interval
under rolling-window operation:

* look-ahead economic dispatch (LAED): one trajectory variable per generator
  per window interval, priced over the whole window;
* ramp-product (RP) co-optimization: energy variables for the current
  interval only, plus upward/downward ramp-capability products for a set of
  durations, cleared against system coverage constraints.

The RP builder optionally adds per-generator ramp-increment constraints
(longer products no smaller than shorter ones, step-bounded) and system-level
rolling-difference constraints (incremental procurement covers incremental
net-load change). With all durations 1..W and both families enabled the RP
problem is the "enhanced" design whose single-step feasible region is
compared against LAED in :mod:`rampdispatch.equivalence`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .system import DispatchState, PenaltyConfig, SystemSpec

LAED = "laed"
RP = "rp"


class PolicyError(Exception):
    """Configuration or solve failure while building/deciding a step."""


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    window_w: int = 2
    durations: tuple[int, ...] = ()
    increment_constraints: bool = False
    rolling_difference_constraints: bool = False
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)

    def __post_init__(self):
        if self.kind not in (LAED, RP):
            raise PolicyError(f"unknown policy kind {self.kind!r}")
        if self.window_w < 0:
            raise PolicyError("window_w must be nonnegative")
        if self.kind == RP:
            if not self.durations:
                raise PolicyError("RP policy needs a nonempty duration set")
            ds = tuple(sorted(set(int(d) for d in self.durations)))
            if ds != tuple(self.durations):
                object.__setattr__(self, "durations", ds)
            if self.durations[0] < 1 or self.durations[-1] > self.window_w:
                raise PolicyError(
                    f"durations {self.durations} must lie in 1..{self.window_w}"
                )
        else:
            if self.durations:
                raise PolicyError("durations only apply to RP policies")
            if self.increment_constraints or self.rolling_difference_constraints:
                raise PolicyError("constraint flags only apply to RP policies")

    def label(self) -> str:
        if self.kind == LAED:
            return f"laed_w{self.window_w}"
        tag = "-".join(str(d) for d in self.durations)
        out = f"rp_d{tag}_w{self.window_w}"
        if self.increment_constraints:
            out += "_inc"
        if self.rolling_difference_constraints:
            out += "_rdiff"
        return out


@dataclass(frozen=True)
class Forecast:
    """Perfect net-load forecast d(t+tau) for tau = 0..W (W+1 values)."""

    demand: tuple[float, ...]

    def __post_init__(self):
        if len(self.demand) < 1:
            raise PolicyError("forecast needs at least the current interval")
        if not np.isfinite(self.demand).all():
            raise PolicyError("forecast values must be finite")

    @property
    def window(self) -> int:
        return len(self.demand) - 1


@dataclass
class PolicyProblem:
    """LP plus name->handle maps for variables and constraints."""

    lp: lp.LpProblem
    var_map: dict[tuple, int]
    constraint_map: dict[tuple, int]
    config: PolicyConfig
    durations_eff: tuple[int, ...] = ()


@dataclass
class PolicyDecision:
    committed_output: np.ndarray
    committed_shed: float
    advisory: dict[str, np.ndarray]
    objective: float
    rp_prices: dict[int, float]


def _check_penalty(system: SystemSpec, penalty: PenaltyConfig) -> None:
    worst = max(g.cost for g in system.generators)
    if penalty.rho_s <= worst:
        raise PolicyError(
            f"shed penalty {penalty.rho_s} must exceed the highest marginal "
            f"cost {worst}"
        )


def build_laed(system: SystemSpec, state: DispatchState, forecast: Forecast,
               config: PolicyConfig) -> PolicyProblem:
    """Multi-interval dispatch over tau = 0..W.

    Families: capacity (variable bounds), inter-interval ramp with tau=0
    anchored at the previous committed output, relaxed power balance per
    interval, and nonnegative shed variables priced at the penalty rate.
    """
    if config.kind != LAED:
        raise PolicyError("build_laed wants a LAED config")
    if forecast.window > config.window_w:
        raise PolicyError(
            f"forecast spans {forecast.window} intervals ahead, window is "
            f"{config.window_w}"
        )
    _check_penalty(system, config.penalty)
    n = system.n
    w = forecast.window
    arr = system.arrays()
    prob = lp.LpProblem("laed")
    vmap: dict[tuple, int] = {}
    cmap: dict[tuple, int] = {}

    for tau in range(w + 1):
        for i in range(n):
            vmap[("g", i, tau)] = prob.add_variable(arr["g_min"][i], arr["g_max"][i])
        vmap[("s", tau)] = prob.add_variable(0.0, lp.INF)

    for tau in range(w + 1):
        for i in range(n):
            expr = lp.lin({vmap[("g", i, tau)]: 1.0})
            if tau == 0:
                base = float(state.prev_output[i])
            else:
                expr.add_term(vmap[("g", i, tau - 1)], -1.0)
                base = 0.0
            cmap[("ramp", i, tau)] = prob.add_range_constraint(
                expr, base - arr["ramp_down"][i], base + arr["ramp_up"][i]
            )
        bal = lp.lin({vmap[("g", i, tau)]: 1.0 for i in range(n)})
        bal.add_term(vmap[("s", tau)], 1.0)
        cmap[("balance", tau)] = prob.add_constraint(bal, lp.EQ, forecast.demand[tau])

    obj = lp.LinearExpr()
    for tau in range(w + 1):
        obj.add_term(vmap[("s", tau)], config.penalty.rho_s)
        for i in range(n):
            obj.add_term(vmap[("g", i, tau)], arr["cost"][i])
    prob.set_objective(obj)
    return PolicyProblem(prob, vmap, cmap, config)


def build_rp(system: SystemSpec, state: DispatchState, forecast: Forecast,
             config: PolicyConfig) -> PolicyProblem:
    """Energy plus ramp products for the configured duration set.

    Shed variables exist only for the current interval and the procured
    durations; intermediate look-ahead intervals carry no constraints so a
    shed variable there would be a free zero. Durations beyond the available
    forecast are dropped (horizon truncation).
    """
    if config.kind != RP:
        raise PolicyError("build_rp wants an RP config")
    if forecast.window > config.window_w:
        raise PolicyError(
            f"forecast spans {forecast.window} intervals ahead, window is "
            f"{config.window_w}"
        )
    _check_penalty(system, config.penalty)
    n = system.n
    arr = system.arrays()
    durations = tuple(d for d in config.durations if d <= forecast.window)
    prob = lp.LpProblem("rp")
    vmap: dict[tuple, int] = {}
    cmap: dict[tuple, int] = {}

    for i in range(n):
        vmap[("g", i, 0)] = prob.add_variable(arr["g_min"][i], arr["g_max"][i])
    vmap[("s", 0)] = prob.add_variable(0.0, lp.INF)
    for d in durations:
        vmap[("s", d)] = prob.add_variable(0.0, lp.INF)
        for i in range(n):
            vmap[("rp", i, d)] = prob.add_variable(0.0, d * arr["ramp_up"][i])
            vmap[("rm", i, d)] = prob.add_variable(0.0, d * arr["ramp_down"][i])

    for i in range(n):
        prev = float(state.prev_output[i])
        cmap[("ramp", i, 0)] = prob.add_range_constraint(
            lp.lin({vmap[("g", i, 0)]: 1.0}),
            prev - arr["ramp_down"][i], prev + arr["ramp_up"][i],
        )

    for d in durations:
        for i in range(n):
            cmap[("headroom_up", i, d)] = prob.add_constraint(
                lp.lin({vmap[("g", i, 0)]: 1.0, vmap[("rp", i, d)]: 1.0}),
                lp.LE, arr["g_max"][i],
            )
            cmap[("headroom_down", i, d)] = prob.add_constraint(
                lp.lin({vmap[("g", i, 0)]: 1.0, vmap[("rm", i, d)]: -1.0}),
                lp.GE, arr["g_min"][i],
            )
        # coverage: procured capability meets the net-load change, shed-adjusted
        up = lp.lin({vmap[("rp", i, d)]: 1.0 for i in range(n)})
        up.add_term(vmap[("s", d)], 1.0)
        up.add_term(vmap[("s", 0)], -1.0)
        cmap[("cov_up", d)] = prob.add_constraint(
            up, lp.GE, forecast.demand[d] - forecast.demand[0]
        )
        dn = lp.lin({vmap[("rm", i, d)]: 1.0 for i in range(n)})
        dn.add_term(vmap[("s", d)], -1.0)
        dn.add_term(vmap[("s", 0)], 1.0)
        cmap[("cov_down", d)] = prob.add_constraint(
            dn, lp.GE, forecast.demand[0] - forecast.demand[d]
        )

    bal = lp.lin({vmap[("g", i, 0)]: 1.0 for i in range(n)})
    bal.add_term(vmap[("s", 0)], 1.0)
    cmap[("balance", 0)] = prob.add_constraint(bal, lp.EQ, forecast.demand[0])

    obj = lp.LinearExpr()
    obj.add_term(vmap[("s", 0)], config.penalty.rho_s)
    for d in durations:
        obj.add_term(vmap[("s", d)], config.penalty.rho_s)
    for i in range(n):
        obj.add_term(vmap[("g", i, 0)], arr["cost"][i])
    prob.set_objective(obj)

    out = PolicyProblem(prob, vmap, cmap, config, durations)
    if config.increment_constraints:
        add_increment_constraints(out, system, config)
    if config.rolling_difference_constraints:
        add_rolling_difference_constraints(out, system, forecast, config)
    return out


def _duration_pairs(durations: tuple[int, ...]) -> list[tuple[int, int]]:
    # the pair (0, d_min) is omitted: with r(t+0) == 0 it duplicates the
    # procurement bound (increment family) or the coverage row (rolling
    # difference family)
    return list(zip(durations, durations[1:]))


def add_increment_constraints(problem: PolicyProblem, system: SystemSpec,
                              config: PolicyConfig) -> None:
    """Per-generator monotone procurement, gap-scaled between durations:
    0 <= r(d_next) - r(d_prev) <= (d_next - d_prev) * ramp."""
    pairs = _duration_pairs(problem.durations_eff)
    if not pairs:
        warnings.warn("increment constraints need at least two durations; "
                      "skipped", stacklevel=2)
        return
    arr = system.arrays()
    for a, b in pairs:
        gap = b - a
        for i in range(system.n):
            problem.constraint_map[("incr_up", i, a, b)] = (
                problem.lp.add_range_constraint(
                    lp.lin({problem.var_map[("rp", i, b)]: 1.0,
                            problem.var_map[("rp", i, a)]: -1.0}),
                    0.0, gap * arr["ramp_up"][i],
                )
            )
            problem.constraint_map[("incr_down", i, a, b)] = (
                problem.lp.add_range_constraint(
                    lp.lin({problem.var_map[("rm", i, b)]: 1.0,
                            problem.var_map[("rm", i, a)]: -1.0}),
                    0.0, gap * arr["ramp_down"][i],
                )
            )


def add_rolling_difference_constraints(problem: PolicyProblem,
                                       system: SystemSpec, forecast: Forecast,
                                       config: PolicyConfig) -> None:
    """System-level incremental coverage between consecutive durations:
    the growth of total procurement must cover the shed-adjusted net-load
    change between those horizons (both directions)."""
    pairs = _duration_pairs(problem.durations_eff)
    if not pairs:
        warnings.warn("rolling-difference constraints need at least two "
                      "durations; skipped", stacklevel=2)
        return
    n = system.n
    vmap = problem.var_map
    for a, b in pairs:
        up = lp.lin({vmap[("rp", i, b)]: 1.0 for i in range(n)})
        for i in range(n):
            up.add_term(vmap[("rp", i, a)], -1.0)
        up.add_term(vmap[("s", b)], 1.0)
        up.add_term(vmap[("s", a)], -1.0)
        problem.constraint_map[("rdiff_up", a, b)] = problem.lp.add_constraint(
            up, lp.GE, forecast.demand[b] - forecast.demand[a]
        )
        dn = lp.lin({vmap[("rm", i, b)]: 1.0 for i in range(n)})
        for i in range(n):
            dn.add_term(vmap[("rm", i, a)], -1.0)
        dn.add_term(vmap[("s", b)], -1.0)
        dn.add_term(vmap[("s", a)], 1.0)
        problem.constraint_map[("rdiff_down", a, b)] = problem.lp.add_constraint(
            dn, lp.GE, forecast.demand[a] - forecast.demand[b]
        )


def decide(system: SystemSpec, state: DispatchState, forecast: Forecast,
           config: PolicyConfig) -> PolicyDecision:
    """Build and solve the configured policy problem; commit tau = 0.

    The committed dispatch is checked post-hoc against capacity, ramp and
    balance at 1e-6 before being returned.
    """
    if config.kind == LAED:
        problem = build_laed(system, state, forecast, config)
    else:
        problem = build_rp(system, state, forecast, config)

    sol = lp.solve(problem.lp)
    if sol.status is lp.LpStatus.INFEASIBLE:
        raise PolicyError(
            "policy LP infeasible; the net-load drop exceeds the fleet's "
            "deliverable ramp-down (over-generation cannot be shed)"
        )
    if sol.status is not lp.LpStatus.OPTIMAL:
        raise PolicyError(f"solver failure: status {sol.status.value}")

    n = system.n
    committed = np.array([sol.value(problem.var_map[("g", i, 0)]) for i in range(n)])
    shed = sol.value(problem.var_map[("s", 0)])
    _check_commitment(system, state, forecast, committed, shed)

    advisory: dict[str, np.ndarray] = {}
    rp_prices: dict[int, float] = {}
    if config.kind == LAED:
        w = forecast.window
        advisory["trajectory"] = np.array(
            [[sol.value(problem.var_map[("g", i, tau)]) for tau in range(w + 1)]
             for i in range(n)]
        )
        advisory["shed"] = np.array(
            [sol.value(problem.var_map[("s", tau)]) for tau in range(w + 1)]
        )
    else:
        ds = problem.durations_eff
        advisory["ramp_up"] = np.array(
            [[sol.value(problem.var_map[("rp", i, d)]) for d in ds] for i in range(n)]
        )
        advisory["ramp_down"] = np.array(
            [[sol.value(problem.var_map[("rm", i, d)]) for d in ds] for i in range(n)]
        )
        advisory["shed"] = np.array(
            [shed] + [sol.value(problem.var_map[("s", d)]) for d in ds]
        )
        for d in ds:
            rp_prices[d] = lp.dual_of(sol, problem.constraint_map[("cov_up", d)])

    return PolicyDecision(committed, shed, advisory, sol.objective, rp_prices)


def _check_commitment(system: SystemSpec, state: DispatchState,
                      forecast: Forecast, committed: np.ndarray,
                      shed: float, tol: float = 1e-6) -> None:
    arr = system.arrays()
    if (committed < arr["g_min"] - tol).any() or (committed > arr["g_max"] + tol).any():
        raise PolicyError("committed dispatch violates capacity bounds")
    delta = committed - state.prev_output
    if (delta > arr["ramp_up"] + tol).any() or (-delta > arr["ramp_down"] + tol).any():
        raise PolicyError("committed dispatch violates ramp limits")
    if shed < -tol:
        raise PolicyError("negative shed")
    if abs(forecast.demand[0] - shed - committed.sum()) > tol:
        raise PolicyError("committed dispatch violates the balance constraint")
