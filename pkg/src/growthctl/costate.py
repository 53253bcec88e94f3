"""Adjoint (costate) solutions and the pointwise Hamiltonian maximisation.

The Hamiltonian is ``lam0 * b.x + x_E * (lam S u)``; per unit enzyme the
vertex controls of the allocation polytope contribute

    phi_M = k_M (lam2 - a_M b_M lam1)     (linear, u = (k_M, 0))
    phi_E = k_E (lam3 - a_E b_E lam1)     (exponential, u = (0, k_E))

and zero for the stationary vertex. The state-constraint multipliers are
taken as zero on every arc; the terminal nutrient constraint is carried by
``gamma1 = lam1(T)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .arcs import ArcKind, Trajectory
from .config import SWITCH_TOL
from .model import Control, ModelParams


class Costate(NamedTuple):
    lam1: float
    lam2: float
    lam3: float
    lam0: float = 1.0


@dataclass(frozen=True)
class TerminalCondition:
    gamma1: float = 0.0

    def __post_init__(self):
        if not self.gamma1 >= 0.0:
            raise ValueError(f"gamma1 must be >= 0, got {self.gamma1!r}")

    @property
    def costate(self) -> Costate:
        return Costate(self.gamma1, 0.0, 0.0)


# deterministic representative when vertices tie
TIE_ORDER = (ArcKind.EXPONENTIAL, ArcKind.LINEAR, ArcKind.STATIONARY)


class SwitchReport(NamedTuple):
    phi_M: float
    phi_E: float
    winner: ArcKind
    tie: bool
    tied: frozenset

    def value(self, kind: ArcKind) -> float:
        if kind is ArcKind.LINEAR:
            return self.phi_M
        if kind is ArcKind.EXPONENTIAL:
            return self.phi_E
        return 0.0


class Argmax(NamedTuple):
    control: Control
    kind: ArcKind
    ties: frozenset


def arc_costate(p: ModelParams, kind: ArcKind, lam_end: Costate, tau1: float, t: float) -> Costate:
    """Integrate the costate backward from ``tau1`` (where it is ``lam_end``) to ``t``.

    ``t`` may be an array, in which case each field is an array.
    """
    l1, l2, l3, l0 = lam_end
    dt = tau1 - t
    if kind is ArcKind.STATIONARY:
        return Costate(l1, l2 + l0 * p.b_M * dt, l3 + l0 * p.b_E * dt, l0)
    if kind is ArcKind.LINEAR:
        lam3 = l3 + 0.5 * l0 * p.b_M * p.k_M * dt * dt + (l0 * p.b_E - p.a_M * p.b_M * p.k_M * l1 + p.k_M * l2) * dt
        return Costate(l1, l2 + l0 * p.b_M * dt, lam3, l0)
    # exponential: lam3' = -b_E + a_E b_E k_E lam1 - k_E lam3
    shift = p.a_E * p.b_E * l1 - l0 * p.b_E / p.k_E
    lam3 = np.exp(p.k_E * dt) * (l3 - shift) + shift
    return Costate(l1, l2 + l0 * p.b_M * dt, lam3, l0)


@dataclass(frozen=True)
class CostatePath:
    """Piecewise closed-form costate along a trajectory."""

    params: ModelParams
    trajectory: Trajectory
    ends: tuple[Costate, ...]  # costate at each arc's t_end
    terminal: TerminalCondition

    def at(self, t: float) -> Costate:
        traj = self.trajectory
        if not traj.arcs:
            return self.terminal.costate
        i = traj.arc_index(t)
        arc = traj.arcs[i]
        return arc_costate(self.params, arc.kind, self.ends[i], arc.t_end, t)

    def at_arc(self, i: int, t: float) -> Costate:
        """Evaluate arc ``i``'s formula at ``t`` (useful at junctions)."""
        arc = self.trajectory.arcs[i]
        return arc_costate(self.params, arc.kind, self.ends[i], arc.t_end, t)

    @property
    def initial(self) -> Costate:
        if not self.trajectory.arcs:
            return self.terminal.costate
        return self.at_arc(0, 0.0)


def backward_costate(p: ModelParams, traj: Trajectory, term: TerminalCondition) -> CostatePath:
    ends = [None] * len(traj.arcs)
    lam = term.costate
    for i in range(len(traj.arcs) - 1, -1, -1):
        arc = traj.arcs[i]
        ends[i] = lam
        lam = arc_costate(p, arc.kind, lam, arc.t_end, arc.t_start)
    return CostatePath(p, traj, tuple(ends), term)


def switching_values(p: ModelParams, lam: Costate, tol: float = SWITCH_TOL) -> SwitchReport:
    l1, l2, l3, _ = lam
    phi_M = p.k_M * (l2 - p.a_M * p.b_M * l1)
    phi_E = p.k_E * (l3 - p.a_E * p.b_E * l1)
    values = {ArcKind.EXPONENTIAL: phi_E, ArcKind.LINEAR: phi_M, ArcKind.STATIONARY: 0.0}
    best = max(values.values())
    scale = tol * (1.0 + abs(best))
    tied = frozenset(k for k, v in values.items() if best - v <= scale)
    winner = next(k for k in TIE_ORDER if k in tied)
    return SwitchReport(phi_M, phi_E, winner, len(tied) > 1, tied)


def pmp_argmax(p: ModelParams, lam: Costate, tol: float = SWITCH_TOL) -> Argmax:
    report = switching_values(p, lam, tol)
    return Argmax(report.winner.control(p), report.winner, report.tied)
