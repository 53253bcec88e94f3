"""Closed-form growth phases and their concatenation into trajectories.

Each phase runs one vertex of the allocation polytope:

* exponential: ``u = (0, k_E)``, only enzyme is made;
* linear:      ``u = (k_M, 0)``, only storage is made;
* stationary:  ``u = (0, 0)``.

With a vertex control the dynamics integrate in closed form, so states,
depletion times and the biomass integral are all exact.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .config import NUTRIENT_TOL
from .errors import HorizonError, InfeasiblePlanError, NutrientDepletionError
from .model import Control, ModelParams, State, biomass, expm1_sat


class ArcKind(str, Enum):
    EXPONENTIAL = "Exponential"
    LINEAR = "Linear"
    STATIONARY = "Stationary"

    def control(self, p: ModelParams) -> Control:
        if self is ArcKind.EXPONENTIAL:
            return Control(0.0, p.k_E)
        if self is ArcKind.LINEAR:
            return Control(p.k_M, 0.0)
        return Control(0.0, 0.0)

    @property
    def letter(self) -> str:
        return self.value[0]


def is_degenerate(kind: ArcKind, x: State) -> bool:
    """True when a growth arc starts without enzyme and so never moves."""
    return kind is not ArcKind.STATIONARY and x.x_E <= 0.0


def arc_max_duration(p: ModelParams, kind: ArcKind, x_start: State) -> float:
    if kind is ArcKind.STATIONARY or is_degenerate(kind, x_start):
        return math.inf
    x_N = max(x_start.x_N, 0.0)
    if kind is ArcKind.EXPONENTIAL:
        return math.log1p(x_N / (p.a_E * p.b_E * x_start.x_E)) / p.k_E
    return x_N / (p.a_M * p.b_M * p.k_M * x_start.x_E)


def advance(p: ModelParams, kind: ArcKind, x: State, d: float) -> State:
    if kind is ArcKind.STATIONARY or d == 0.0 or x.x_E == 0.0:
        return x
    if kind is ArcKind.EXPONENTIAL:
        growth = x.x_E * expm1_sat(p.k_E * d)
        return State(x.x_N - p.a_E * p.b_E * growth, x.x_M, x.x_E + growth)
    made = p.k_M * x.x_E * d
    return State(x.x_N - p.a_M * p.b_M * made, x.x_M + made, x.x_E)


def arc_state(
    p: ModelParams,
    kind: ArcKind,
    x_start: State,
    tau0: float,
    t: float,
    tol: float = NUTRIENT_TOL,
) -> State:
    """State at time ``t`` on an arc that starts at ``tau0`` from ``x_start``.

    Raises:
        NutrientDepletionError: if ``t`` lies beyond the depletion time,
            i.e. the nutrient would drop below ``-tol``.
    """
    d = t - tau0
    if d < 0.0:
        raise HorizonError(f"t={t!r} precedes arc start {tau0!r}")
    x = advance(p, kind, x_start, d)
    if x.x_N < -tol:
        raise NutrientDepletionError(
            f"{kind.value} arc from t={tau0!r} exhausts the nutrient before t={t!r} (x_N={x.x_N!r})",
            x.x_N,
        )
    return x


def arc_objective(p: ModelParams, kind: ArcKind, x_start: State, duration: float) -> float:
    """Exact integral of biomass over an arc of the given duration."""
    d = duration
    if kind is ArcKind.STATIONARY or d == 0.0 or is_degenerate(kind, x_start):
        return biomass(p, x_start) * d
    if kind is ArcKind.LINEAR:
        return biomass(p, x_start) * d + 0.5 * p.b_M * p.k_M * x_start.x_E * d * d
    return p.b_M * x_start.x_M * d + p.b_E * x_start.x_E / p.k_E * expm1_sat(p.k_E * d)


@dataclass(frozen=True)
class Arc:
    kind: ArcKind
    t_start: float
    t_end: float
    x_start: State
    x_end: State

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def degenerate(self) -> bool:
        return is_degenerate(self.kind, self.x_start)


@dataclass(frozen=True)
class Trajectory:
    arcs: tuple[Arc, ...]
    horizon: float
    x0: State

    @property
    def x_end(self) -> State:
        return self.arcs[-1].x_end if self.arcs else self.x0

    @property
    def kinds(self) -> tuple[ArcKind, ...]:
        return tuple(a.kind for a in self.arcs)

    @property
    def junctions(self) -> tuple[float, ...]:
        return tuple(a.t_end for a in self.arcs[:-1])

    def arc_index(self, t: float) -> int:
        """Index of the arc active at ``t``; junctions belong to the later arc."""
        if not 0.0 <= t <= self.horizon:
            raise HorizonError(f"t={t!r} outside horizon [0, {self.horizon!r}]")
        if not self.arcs:
            raise HorizonError("empty trajectory has no arcs")
        starts = [a.t_start for a in self.arcs]
        return max(bisect.bisect_right(starts, t) - 1, 0)


def build_trajectory(
    p: ModelParams,
    plan: Sequence[tuple[ArcKind, float]],
    x0: State,
    tol: float = NUTRIENT_TOL,
) -> Trajectory:
    """Chain arcs from ``x0``; each entry of ``plan`` is ``(kind, duration)``.

    Raises:
        InfeasiblePlanError: naming the first arc whose duration exceeds
            what the remaining nutrient allows, with the nutrient shortfall.
    """
    arcs = []
    t = 0.0
    x = State(*map(float, x0))
    for i, (kind, d) in enumerate(plan):
        kind = ArcKind(kind)
        if d < 0.0 or not math.isfinite(d):
            raise InfeasiblePlanError(f"arc {i} ({kind.value}) has invalid duration {d!r}", i, 0.0)
        x_end = advance(p, kind, x, d)
        if x_end.x_N < -tol:
            raise InfeasiblePlanError(
                f"arc {i} ({kind.value}, duration {d!r}) runs out of nutrient; shortfall {-x_end.x_N!r}",
                i,
                -x_end.x_N,
            )
        arcs.append(Arc(kind, t, t + d, x, x_end))
        t += d
        x = x_end
    return Trajectory(tuple(arcs), t, State(*map(float, x0)))


def trajectory_objective(p: ModelParams, traj: Trajectory) -> float:
    return math.fsum(arc_objective(p, a.kind, a.x_start, a.duration) for a in traj.arcs)


def control_at(p: ModelParams, traj: Trajectory, t: float) -> Control:
    return traj.arcs[traj.arc_index(t)].kind.control(p)


def state_at(p: ModelParams, traj: Trajectory, t: float) -> State:
    if not traj.arcs:
        if t != 0.0:
            raise HorizonError(f"t={t!r} outside horizon [0, 0]")
        return traj.x0
    arc = traj.arcs[traj.arc_index(t)]
    return advance(p, arc.kind, arc.x_start, min(t, arc.t_end) - arc.t_start)


def sample_trajectory(
    p: ModelParams, traj: Trajectory, times: Iterable[float]
) -> list[tuple[State, Control]]:
    out = []
    for t in times:
        if not traj.arcs:
            out.append((state_at(p, traj, t), Control(0.0, 0.0)))
            continue
        arc = traj.arcs[traj.arc_index(t)]
        x = advance(p, arc.kind, arc.x_start, min(t, arc.t_end) - arc.t_start)
        out.append((x, arc.kind.control(p)))
    return out
