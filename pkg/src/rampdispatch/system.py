"""Domain model: generators, fleets, net-load profiles, dispatch state.

Ships the two built-in test fleets (a 2-generator system and a 10-generator
system) and JSON (de)serialization for fleet specs. Net-load profiles are
5-minute series; their CSV format lives in :mod:`rampdispatch.scenarios`.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GeneratorSpec:
    """One dispatchable resource.

    ``ramp_up``/``ramp_down`` are MW per dispatch interval, ``cost`` is $/MWh.
    """

    name: str
    g_min: float
    g_max: float
    ramp_up: float
    ramp_down: float
    cost: float


@dataclass(frozen=True)
class SystemSpec:
    generators: tuple[GeneratorSpec, ...]
    interval_minutes: int = 5

    @property
    def n(self) -> int:
        return len(self.generators)

    @property
    def delta_t_hours(self) -> float:
        return self.interval_minutes / 60.0

    def arrays(self) -> dict[str, np.ndarray]:
        """Column views of the fleet, keyed by field name."""
        gens = self.generators
        return {
            "g_min": np.array([g.g_min for g in gens]),
            "g_max": np.array([g.g_max for g in gens]),
            "ramp_up": np.array([g.ramp_up for g in gens]),
            "ramp_down": np.array([g.ramp_down for g in gens]),
            "cost": np.array([g.cost for g in gens]),
        }

    def fingerprint(self) -> str:
        return hashlib.sha256(to_json(self).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class NetLoadProfile:
    """Net demand d(t), t = 1..T, at 5-minute resolution.

    ``t0_value`` optionally carries a d(0) context value; the built-in
    policies never read it (the pre-horizon state is a dispatch, not a load).
    """

    values: tuple[float, ...]
    t0_value: float | None = None

    def __post_init__(self):
        if len(self.values) < 1:
            raise ValueError("profile needs at least one value")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("profile values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def fingerprint(self) -> str:
        payload = np.asarray(self.values, dtype=float).tobytes()
        return hashlib.sha256(payload).hexdigest()[:12]


@dataclass
class DispatchState:
    """Committed outputs of the previous interval plus its shed amount."""

    prev_output: np.ndarray
    prev_shed: float = 0.0

    def __post_init__(self):
        self.prev_output = np.asarray(self.prev_output, dtype=float)
        if self.prev_shed < 0:
            raise ValueError("prev_shed must be nonnegative")


@dataclass(frozen=True)
class PenaltyConfig:
    """Load-shedding penalty, standing in for emergency fast-start dispatch."""

    rho_s: float = 2500.0


def two_gen_system() -> SystemSpec:
    """Two 500 MW units: G1 fast and cheap, G2 slow and pricier."""
    return SystemSpec(
        generators=(
            GeneratorSpec("G1", 0.0, 500.0, 500.0, 500.0, 25.0),
            GeneratorSpec("G2", 0.0, 500.0, 50.0, 50.0, 30.0),
        )
    )


#: (cost $/MWh, capacity MW, ramp MW per 5 min) for the 10-unit fleet;
#: 2561 MW of capacity, 130 MW/5min of aggregate ramp.
_TEN_GEN_ROWS = (
    (185.0, 22.0, 7.5),
    (30.0, 170.0, 17.5),
    (55.0, 85.0, 7.5),
    (15.0, 230.0, 7.5),
    (20.0, 613.0, 37.5),
    (19.5, 686.0, 10.0),
    (48.0, 45.0, 10.0),
    (60.0, 50.0, 5.0),
    (57.0, 260.0, 5.0),
    (50.0, 400.0, 12.5),
)


def ten_gen_system() -> SystemSpec:
    return SystemSpec(
        generators=tuple(
            GeneratorSpec(f"G{k + 1}", 0.0, cap, ramp, ramp, cost)
            for k, (cost, cap, ramp) in enumerate(_TEN_GEN_ROWS)
        )
    )


def validate(system: SystemSpec) -> list[str]:
    """Return every invariant violation; an empty list means the spec is ok."""
    problems: list[str] = []
    if system.n < 1:
        problems.append("system has no generators")
    if system.interval_minutes <= 0:
        problems.append(f"interval_minutes must be positive, got {system.interval_minutes}")
    seen: set[str] = set()
    for g in system.generators:
        tag = f"generator {g.name!r}"
        if g.name in seen:
            problems.append(f"{tag}: duplicate name")
        seen.add(g.name)
        if not (0 <= g.g_min):
            problems.append(f"{tag}: g_min {g.g_min} is negative")
        if g.g_min > g.g_max:
            problems.append(f"{tag}: g_min {g.g_min} > g_max {g.g_max}")
        if not g.ramp_up > 0:
            problems.append(f"{tag}: ramp_up {g.ramp_up} must be positive")
        if not g.ramp_down > 0:
            problems.append(f"{tag}: ramp_down {g.ramp_down} must be positive")
        if not math.isfinite(g.cost):
            problems.append(f"{tag}: cost {g.cost} is not finite")
        for fname in ("g_min", "g_max", "ramp_up", "ramp_down"):
            v = getattr(g, fname)
            if math.isnan(v):
                problems.append(f"{tag}: {fname} is NaN")
    return problems


def to_json(system: SystemSpec) -> str:
    doc = {
        "interval_minutes": system.interval_minutes,
        "generators": [
            {
                "name": g.name,
                "g_min": g.g_min,
                "g_max": g.g_max,
                "ramp_up": g.ramp_up,
                "ramp_down": g.ramp_down,
                "cost": g.cost,
            }
            for g in system.generators
        ],
    }
    return json.dumps(doc, indent=2)


def from_json(text: str) -> SystemSpec:
    doc = json.loads(text)
    try:
        gens = tuple(
            GeneratorSpec(
                name=str(g["name"]),
                g_min=float(g["g_min"]),
                g_max=float(g["g_max"]),
                ramp_up=float(g["ramp_up"]),
                ramp_down=float(g["ramp_down"]),
                cost=float(g["cost"]),
            )
            for g in doc["generators"]
        )
        spec = SystemSpec(generators=gens, interval_minutes=int(doc["interval_minutes"]))
    except KeyError as exc:
        raise ValueError(f"system spec missing field {exc}") from exc
    return spec


def save_system(system: SystemSpec, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(to_json(system))


def load_system(path: str) -> SystemSpec:
    with open(path) as fh:
        return from_json(fh.read())
