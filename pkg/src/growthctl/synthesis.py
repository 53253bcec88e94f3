"""Control synthesis from the maximum principle.

The costate dynamics depend on the control but not on the state, so for a
given terminal nutrient multiplier ``gamma1`` the pointwise maximisation,
integrated backward from ``T``, fixes the whole arc sequence. Simulating it
forward gives the terminal nutrient, and ``gamma1`` is then chosen so the
nutrient is exhausted exactly at ``T`` (or is zero if it never runs out).

This covers structures with any number of switches, e.g. enzyme growth,
storage growth, enzyme growth again and a final stationary phase.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .arcs import ArcKind, advance
from .config import NUTRIENT_TOL
from .costate import TIE_ORDER, Costate, arc_costate, switching_values
from .model import ModelParams, State

E, L, S = ArcKind.EXPONENTIAL, ArcKind.LINEAR, ArcKind.STATIONARY
MAX_ARCS = 64


class Synthesis(NamedTuple):
    plan: tuple[tuple[ArcKind, float], ...]
    gamma1: float
    x_end: State


def _phi(p: ModelParams, lam: Costate) -> dict:
    l1, l2, l3 = lam.lam1, lam.lam2, lam.lam3
    return {
        L: p.k_M * (l2 - p.a_M * p.b_M * l1),
        E: p.k_E * (l3 - p.a_E * p.b_E * l1),
        S: 0.0 * l2,
    }


def _lead(p: ModelParams, kind: ArcKind, lam_end: Costate, t_end: float, t):
    """Best rival switching value minus that of ``kind`` on a ``kind`` arc ending at ``t_end``."""
    phi = _phi(p, arc_costate(p, kind, lam_end, t_end, t))
    return np.maximum.reduce([v for k, v in phi.items() if k is not kind]) - phi[kind]


def _left_winner(p: ModelParams, lam: Costate, t: float, h: float) -> ArcKind:
    """Vertex that maximises the Hamiltonian just before ``t``."""
    tied = switching_values(p, lam).tied
    if len(tied) == 1:
        return next(iter(tied))
    # break the tie with each candidate's own backward dynamics
    for kind in TIE_ORDER:
        if kind in tied and _lead(p, kind, lam, t, t - h) <= 0.0:
            return kind
    return next(k for k in TIE_ORDER if k in tied)


def synthesize(p: ModelParams, T: float, gamma1: float, grid: int = 2000) -> list[tuple[ArcKind, float]]:
    """Arc plan ``[(kind, duration), ...]`` obeying the pointwise maximisation for ``gamma1``."""
    lam = Costate(gamma1, 0.0, 0.0)
    t = T
    h = 1e-7 * T
    backward = []
    while t > 1e-12 * T and len(backward) < MAX_ARCS:
        kind = _left_winner(p, lam, t, min(h, t))
        s = np.linspace(t, 0.0, grid + 1)[1:]
        lead = _lead(p, kind, lam, t, s)
        ahead = np.flatnonzero(lead > 0.0)
        if ahead.size == 0:
            start = 0.0
        else:
            i = int(ahead[0])
            right = t - min(h, t) if i == 0 else s[i - 1]

            def f(x):
                return float(_lead(p, kind, lam, t, x))

            if f(right) < 0.0:
                start = brentq(f, s[i], right, xtol=1e-15 * T, rtol=1e-15)
            else:
                start = right  # rounding noise at the tie; no clean bracket
        backward.append((kind, t - start))
        lam = arc_costate(p, kind, lam, t, start)
        t = start
    if t > 0.0:
        # a sliver left by rounding joins the earliest arc found
        kind = backward[-1][0] if backward else S
        backward.append((kind, t))
    plan = []
    for kind, d in reversed(backward):
        if plan and plan[-1][0] is kind:
            plan[-1] = (kind, plan[-1][1] + d)
        else:
            plan.append((kind, d))
    return plan


def simulate(p: ModelParams, plan, x0: State) -> State:
    x = State(*map(float, x0))
    for kind, d in plan:
        x = advance(p, kind, x, d)
    return x


def shoot(p: ModelParams, x0: State, T: float, *, tol: float = NUTRIENT_TOL, grid: int = 2000) -> Synthesis | None:
    """Plan satisfying the maximum principle with terminal complementarity.

    Returns ``None`` when the terminal nutrient jumps across zero as
    ``gamma1`` varies, i.e. when the optimum needs a tie held over an
    interval, which the vertex arcs cannot express.
    """
    def run(g):
        plan = synthesize(p, T, g, grid)
        return plan, simulate(p, plan, x0)

    plan, x = run(0.0)
    if x.x_N >= -tol:
        return Synthesis(tuple(plan), 0.0, x)
    # above this price every vertex but the stationary one loses everywhere
    lo, hi = 0.0, T / min(p.a_M, p.a_E) * (1.0 + 1e-12)
    best = run(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        cand = run(mid)
        if cand[1].x_N >= 0.0:
            hi, best = mid, cand
        else:
            lo = mid
    plan, x = best
    scale = 1.0 + abs(x0.x_N)
    if x.x_N > tol * scale or not math.isfinite(x.x_N):
        return None
    return Synthesis(tuple(plan), hi, x)
