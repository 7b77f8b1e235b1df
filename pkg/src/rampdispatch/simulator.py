"""Rolling-window dispatch engine and the operational security loss metric.

Every interval the configured policy solves its look-ahead problem against a
perfect forecast window; only the first interval's dispatch is binding, the
rest is advisory and recorded for diagnostics but never fed forward. Total
loss is the shed sum converted to MWh.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .policies import Forecast, PolicyConfig, PolicyError, decide
from .system import DispatchState, NetLoadProfile, PenaltyConfig, SystemSpec


class SimulationError(Exception):
    """Solve failure mid-run; carries the step index and the dumped problem."""

    def __init__(self, message: str, step: int, lp_dump: str | None = None):
        super().__init__(message)
        self.step = step
        self.lp_dump = lp_dump


@dataclass
class StepRecord:
    t: int
    committed_output: np.ndarray
    shed: float
    demand: float
    objective: float  # committed-interval cost in $, already delta-t scaled
    rp_prices: dict[int, float] = field(default_factory=dict)


@dataclass
class SimulationResult:
    steps: list[StepRecord]
    total_loss_mwh: float
    policy: PolicyConfig
    system_fingerprint: str
    profile_fingerprint: str
    interval_minutes: int = 5

    @property
    def shed_series(self) -> np.ndarray:
        return np.array([s.shed for s in self.steps])


def initial_state(system: SystemSpec, profile: NetLoadProfile,
                  penalty: PenaltyConfig | None = None) -> DispatchState:
    """Economic starting point: single-interval dispatch against d(1) with
    ramp limits disabled. Applied identically to every policy so rolling
    comparisons start from the same committed output."""
    penalty = penalty or PenaltyConfig()
    arr = system.arrays()
    prob = lp.LpProblem("initial-ed")
    g = [prob.add_variable(arr["g_min"][i], arr["g_max"][i]) for i in range(system.n)]
    s = prob.add_variable(0.0, lp.INF)
    bal = lp.lin({gi: 1.0 for gi in g})
    bal.add_term(s, 1.0)
    prob.add_constraint(bal, lp.EQ, profile.values[0])
    obj = lp.lin({gi: float(c) for gi, c in zip(g, arr["cost"])})
    obj.add_term(s, penalty.rho_s)
    prob.set_objective(obj)
    sol = lp.solve(prob)
    if sol.status is not lp.LpStatus.OPTIMAL:
        raise SimulationError(
            f"initial dispatch failed: {sol.status.value}", step=0,
            lp_dump=lp.format_lp(prob),
        )
    return DispatchState(prev_output=sol.primal[: system.n], prev_shed=0.0)


def run(system: SystemSpec, profile: NetLoadProfile, config: PolicyConfig,
        initial: DispatchState) -> SimulationResult:
    """Simulate t = 1..T with window truncation near the horizon end."""
    demand = profile.as_array()
    horizon = len(demand)
    dt = system.delta_t_hours
    arr = system.arrays()
    state = DispatchState(initial.prev_output.copy(), initial.prev_shed)
    steps: list[StepRecord] = []

    for t in range(1, horizon + 1):
        hi = min(horizon, t + config.window_w)
        forecast = Forecast(tuple(demand[t - 1: hi]))
        try:
            decision = decide(system, state, forecast, config)
        except PolicyError as exc:
            raise SimulationError(f"step {t}: {exc}", step=t) from exc
        committed_cost = dt * (
            float(arr["cost"] @ decision.committed_output)
            + config.penalty.rho_s * decision.committed_shed
        )
        steps.append(StepRecord(
            t=t,
            committed_output=decision.committed_output,
            shed=decision.committed_shed,
            demand=float(demand[t - 1]),
            objective=committed_cost,
            rp_prices=dict(decision.rp_prices),
        ))
        state = DispatchState(decision.committed_output, decision.committed_shed)

    total = security_loss_from_sheds(np.array([s.shed for s in steps]), dt)
    return SimulationResult(
        steps=steps,
        total_loss_mwh=total,
        policy=config,
        system_fingerprint=system.fingerprint(),
        profile_fingerprint=profile.fingerprint(),
        interval_minutes=system.interval_minutes,
    )


def security_loss_from_sheds(sheds: np.ndarray, dt_hours: float) -> float:
    return float(np.maximum(sheds, 0.0).sum() * dt_hours)


def security_loss(result: SimulationResult) -> float:
    """Total unserved energy in MWh over the simulated horizon."""
    return security_loss_from_sheds(result.shed_series,
                                    result.interval_minutes / 60.0)


def clairvoyant_lower_bound(system: SystemSpec, profile: NetLoadProfile,
                            initial: DispatchState) -> float:
    """Minimal total shed from one full-horizon optimization, in MWh.

    Lower-bounds the loss of any rolling policy started from the same state.
    """
    demand = profile.as_array()
    horizon = len(demand)
    n = system.n
    arr = system.arrays()
    prob = lp.LpProblem("clairvoyant")
    g = [[prob.add_variable(arr["g_min"][i], arr["g_max"][i])
          for _ in range(horizon)] for i in range(n)]
    s = [prob.add_variable(0.0, lp.INF) for _ in range(horizon)]
    for i in range(n):
        for t in range(horizon):
            expr = lp.lin({g[i][t]: 1.0})
            base = float(initial.prev_output[i]) if t == 0 else 0.0
            if t > 0:
                expr.add_term(g[i][t - 1], -1.0)
            prob.add_range_constraint(
                expr, base - arr["ramp_down"][i], base + arr["ramp_up"][i]
            )
    for t in range(horizon):
        bal = lp.lin({g[i][t]: 1.0 for i in range(n)})
        bal.add_term(s[t], 1.0)
        prob.add_constraint(bal, lp.EQ, float(demand[t]))
    prob.set_objective(lp.lin({v: 1.0 for v in s}))
    sol = lp.solve(prob)
    if sol.status is not lp.LpStatus.OPTIMAL:
        raise SimulationError(
            f"clairvoyant solve failed: {sol.status.value}", step=0,
            lp_dump=None if horizon > 50 else lp.format_lp(prob),
        )
    return sol.objective * system.delta_t_hours


def write_steps_csv(result: SimulationResult, system: SystemSpec,
                    path: str) -> None:
    """One row per interval: t_min, demand, shed, per-generator output, cost."""
    names = [g.name for g in system.generators]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_min", "demand_mw", "shed_mw"]
                        + [f"g_{nm}" for nm in names] + ["objective_usd"])
        for rec in result.steps:
            writer.writerow(
                [5 * (rec.t - 1), repr(rec.demand), repr(rec.shed)]
                + [repr(float(v)) for v in rec.committed_output]
                + [repr(rec.objective)]
            )
