"""Independent checks of a classification.

* ``check_pmp`` rebuilds the costate backward from the terminal multiplier
  and audits the pointwise Hamiltonian maximisation along every arc, the
  junction ties and the terminal complementarity.
* ``compare_candidates`` optimises the switch times of every candidate
  structure numerically (grid pre-scan, then golden section) and ranks them.
* ``oracle_gap`` measures how the LP oracle approaches the analytic optimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .arcs import ArcKind, advance, arc_max_duration, build_trajectory, trajectory_objective
from .config import JUNCTION_WINDOW, NUTRIENT_TOL, PMP_REL_TOL
from .costate import TerminalCondition, arc_costate, backward_costate, switching_values
from .errors import InfeasiblePlanError
from .regimes import (
    GROWTH_REGIMES,
    Classification,
    Regime,
    Scenario,
    classification_trajectory,
    plan_times,
    regime_gamma1,
    regime_plan,
)
from .synthesis import shoot

E, L, S = ArcKind.EXPONENTIAL, ArcKind.LINEAR, ArcKind.STATIONARY
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


# --- PMP audit --------------------------------------------------------------


@dataclass(frozen=True)
class JunctionCheck:
    t: float
    left: ArcKind
    right: ArcKind
    tie_gap: float       # |phi_left - phi_right| / (1 + max|phi|) at the switch
    costate_jump: float  # max |lam_left - lam_right| / (1 + max|lam|)
    ok: bool


@dataclass
class PmpReport:
    times: np.ndarray
    phi_M: np.ndarray
    phi_E: np.ndarray
    active: tuple[ArcKind, ...]
    violation: np.ndarray
    max_violation: float
    junctions: tuple[JunctionCheck, ...]
    terminal_ok: bool
    complementarity: float  # gamma1 * x_N(T)
    strict: bool            # active arc wins strictly away from arc ends
    passed: bool
    reason: str = ""
    tol: float = PMP_REL_TOL
    costate: np.ndarray = None  # (n, 3) lam1..lam3 at the sample times

    def records(self) -> list[dict]:
        return [
            {
                "t": float(t), "lam1": float(lam[0]), "lam2": float(lam[1]), "lam3": float(lam[2]),
                "phi_M": float(m), "phi_E": float(e), "active_arc": a.value, "violation": float(v),
            }
            for t, lam, m, e, a, v in zip(
                self.times, self.costate, self.phi_M, self.phi_E, self.active, self.violation
            )
        ]

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "max_violation": self.max_violation,
            "samples": int(self.times.size),
            "junctions_ok": all(j.ok for j in self.junctions),
            "terminal_ok": self.terminal_ok,
            "complementarity": self.complementarity,
            "strict": self.strict,
            "reason": self.reason,
        }


def _failed(reason: str, tol: float) -> PmpReport:
    empty = np.zeros(0)
    return PmpReport(empty, empty, empty, (), empty, math.inf, (), False, math.nan, False, False, reason, tol,
                     np.zeros((0, 3)))


def chebyshev_nodes(a: float, b: float, n: int) -> np.ndarray:
    """First-kind Chebyshev points on ``(a, b)`` in increasing order."""
    j = np.arange(n)
    x = np.cos((2 * j + 1) * np.pi / (2 * n))[::-1]
    return 0.5 * (a + b) + 0.5 * (b - a) * x


def check_pmp(
    s: Scenario,
    cls: Classification,
    n_samples: int = 1000,
    *,
    tol: float = PMP_REL_TOL,
    window: float = JUNCTION_WINDOW,
) -> PmpReport:
    """Audit the maximum principle along the classified trajectory.

    The violation at a sample is how far the best competing vertex beats the
    active one, relative to ``1 + max(|phi_M|, |phi_E|)``. Failures are data
    in the report, never exceptions.
    """
    p, T = s.params, s.T
    try:
        traj = classification_trajectory(s, cls)
    except InfeasiblePlanError as exc:
        return _failed(f"plan infeasible: {exc}", tol)
    except (TypeError, ValueError) as exc:
        return _failed(f"plan malformed: {exc}", tol)
    if abs(traj.horizon - T) > 1e-12 * max(1.0, T):
        return _failed(f"plan covers [0, {traj.horizon!r}] instead of [0, {T!r}]", tol)

    gamma1 = cls.gamma1
    x_end = traj.x_end
    complementarity = gamma1 * max(x_end.x_N, 0.0)
    terminal_ok = gamma1 >= 0.0 and x_end.x_N >= -NUTRIENT_TOL and complementarity <= tol * (1.0 + gamma1)
    path = backward_costate(p, traj, cls.terminal)

    times, lams, pm, pe, act, viol = [], [], [], [], [], []
    strict = True
    eps = window * T
    if s.x0.x_E > 0.0:
        for i, arc in enumerate(traj.arcs):
            if arc.duration <= 0.0:
                continue
            t = chebyshev_nodes(arc.t_start, arc.t_end, n_samples)
            lam = arc_costate(p, arc.kind, path.ends[i], arc.t_end, t)
            l1 = np.broadcast_to(lam.lam1, t.shape)
            l2 = np.broadcast_to(lam.lam2, t.shape)
            l3 = np.broadcast_to(lam.lam3, t.shape)
            phi = {
                L: p.k_M * (l2 - p.a_M * p.b_M * l1),
                E: p.k_E * (l3 - p.a_E * p.b_E * l1),
                S: np.zeros_like(t),
            }
            scale = 1.0 + np.maximum(np.abs(phi[L]), np.abs(phi[E]))
            mine = phi[arc.kind]
            other = np.maximum.reduce([v for k, v in phi.items() if k is not arc.kind])
            times.append(t)
            lams.append(np.column_stack([l1, l2, l3]))
            pm.append(phi[L])
            pe.append(phi[E])
            act.extend([arc.kind] * t.size)
            viol.append(np.maximum(other - mine, 0.0) / scale)
            inner = (t > arc.t_start + eps) & (t < arc.t_end - eps)
            if np.any(inner & (mine <= other)):
                strict = False
    # with no enzyme the Hamiltonian does not depend on the control

    junctions = []
    arcs = [(i, a) for i, a in enumerate(traj.arcs) if a.duration > 0.0]
    for (i, left), (j, right) in zip(arcs, arcs[1:]):
        if left.kind is right.kind:
            continue
        t = left.t_end
        lam_l, lam_r = path.at_arc(i, t), path.at_arc(j, t)
        lam_scale = 1.0 + max(abs(v) for v in lam_l[:3])
        jump = max(abs(a - b) for a, b in zip(lam_l[:3], lam_r[:3])) / lam_scale
        sr = switching_values(p, lam_r, 0.0)
        gap = abs(sr.value(left.kind) - sr.value(right.kind)) / (1.0 + max(abs(sr.phi_M), abs(sr.phi_E)))
        ok = s.x0.x_E <= 0.0 or (gap <= tol and jump <= tol)
        junctions.append(JunctionCheck(t, left.kind, right.kind, gap, jump, ok))

    times = np.concatenate(times) if times else np.zeros(0)
    violation = np.concatenate(viol) if viol else np.zeros(0)
    max_v = float(violation.max(initial=0.0))
    reasons = []
    if max_v > tol:
        k = int(np.argmax(violation))
        reasons.append(f"{act[k].value} arc loses at t={times[k]!r} by {max_v:.3g}")
    bad = [j for j in junctions if not j.ok]
    if bad:
        reasons.append(f"junction at t={bad[0].t!r} not a tie (gap {bad[0].tie_gap:.3g})")
    if not terminal_ok:
        reasons.append(f"terminal condition fails: gamma1={gamma1!r}, x_N(T)={x_end.x_N!r}")
    return PmpReport(
        times=times,
        phi_M=np.concatenate(pm) if pm else np.zeros(0),
        phi_E=np.concatenate(pe) if pe else np.zeros(0),
        active=tuple(act),
        violation=violation,
        max_violation=max_v,
        junctions=tuple(junctions),
        terminal_ok=terminal_ok,
        complementarity=complementarity,
        strict=strict,
        passed=not reasons,
        reason="; ".join(reasons),
        tol=tol,
        costate=np.concatenate(lams) if lams else np.zeros((0, 3)),
    )


def mutate(s: Scenario, cls: Classification, regime: Regime) -> Classification:
    """Relabel ``cls`` as ``regime``, keeping its switch times where they apply."""
    T = s.T
    tau_s = cls.tau_s if cls.tau_s is not None else (0.5 * (cls.tau1 + T) if cls.tau1 is not None else 0.5 * T)
    tau1 = cls.tau1 if cls.tau1 is not None else 0.5 * tau_s
    if regime in (Regime.EXPLIN,):
        tau_s = None
    elif regime in (Regime.LINSTAT, Regime.EXPSTAT):
        tau1 = None
    elif regime not in (Regime.EXPLINSTAT, Regime.LINEXPSTAT):
        tau1 = tau_s = None
    gamma1 = regime_gamma1(s.params, regime, T, tau_s, s.x0)
    return replace(cls, regime=regime, tau1=tau1, tau_s=tau_s,
                   terminal=TerminalCondition(gamma1), method="mutated", certificate=None, plan=None)


def mutations(s: Scenario, cls: Classification) -> list[Classification]:
    return [mutate(s, cls, r) for r in GROWTH_REGIMES if r is not cls.regime]


# --- candidate comparison ---------------------------------------------------


@dataclass(frozen=True)
class Maximum:
    x: float
    value: float
    unimodal: bool


def _golden(f: Callable[[float], float], a: float, b: float, xtol: float) -> tuple[float, float]:
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _feasible_edge(f, good: float, bad: float, iters: int = 100) -> float:
    """Bisect towards the feasibility boundary between ``good`` and ``bad``."""
    for _ in range(iters):
        mid = 0.5 * (good + bad)
        if mid in (good, bad):
            break
        if f(mid) is None:
            bad = mid
        else:
            good = mid
    return good


def _count_peaks(vals: Sequence[float]) -> int:
    scale = 1e-12 * (1.0 + max(abs(v) for v in vals))
    trend = 0
    peaks = 0
    for a, b in zip(vals, vals[1:]):
        step = b - a
        if abs(step) <= scale:
            continue
        new = 1 if step > 0 else -1
        if trend == 1 and new == -1:
            peaks += 1
        trend = new
    return peaks + (trend == 1)


def maximize_1d(f: Callable[[float], float | None], lo: float, hi: float, resolution: int = 200) -> Maximum | None:
    """Maximise ``f`` on ``[lo, hi]``; ``f`` returns ``None`` where infeasible.

    A grid pre-scan locates the best feasible point, feasibility edges next
    to it are found by bisection, and golden section refines inside the
    bracket. If the pre-scan shows more than one feasible peak the grid is
    made ten times denser before bracketing.
    """
    if hi <= lo:
        v = f(lo)
        return None if v is None else Maximum(lo, v, True)
    unimodal = True
    for n in (resolution, 10 * resolution):
        xs = np.linspace(lo, hi, n + 1)
        vals = [f(x) for x in xs]
        feas = [i for i, v in enumerate(vals) if v is not None]
        if not feas:
            return None
        runs = np.split(np.asarray(feas), np.flatnonzero(np.diff(feas) > 1) + 1)
        peaks = sum(_count_peaks([vals[i] for i in run]) for run in runs)
        if peaks <= 1:
            break
        unimodal = False
    k = max(feas, key=lambda i: vals[i])
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, n)]
    if k > 0 and vals[k - 1] is None:
        a = _feasible_edge(f, xs[k], xs[k - 1])
    if k < n and vals[k + 1] is None:
        b = _feasible_edge(f, xs[k], xs[k + 1])

    def g(x):
        v = f(x)
        return -math.inf if v is None else v

    width = hi - lo
    x, v = _golden(g, a, b, 1e-9 * width)
    x, v = _polish(g, x, v, a, b, width)
    for edge in (a, b):
        ve = g(edge)
        if ve > v or (ve == v and abs(edge - x) < 1e-9 * width):
            x, v = edge, ve
    return Maximum(float(x), float(v), unimodal)


def _polish(g, x, v, a, b, width):
    """Sharpen an interior maximum by bisecting on the sign of a central difference."""
    h = 1e-5 * width
    lo, hi = x - 1e-7 * width, x + 1e-7 * width
    if lo - h < a or hi + h > b:
        return x, v

    def slope(t):
        return g(t + h) - g(t - h)

    if not (slope(lo) > 0.0 and slope(hi) < 0.0):
        return x, v
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if slope(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    xp = 0.5 * (lo + hi)
    vp = g(xp)
    return (xp, vp) if vp >= v - 1e-15 * abs(v) else (x, v)


CANDIDATES = ("Stationary",) + tuple(r.value for r in GROWTH_REGIMES) + ("Synthesized",)


@dataclass(frozen=True)
class CandidateRow:
    structure: str
    tau1: float | None
    tau_s: float | None
    objective: float
    feasible: bool
    effective: Regime | None = None  # structure after dropping negligible arcs
    unimodal: bool = True
    plan: tuple | None = None  # synthesised rows only
    gamma1: float | None = None

    @property
    def n_arcs(self) -> int:
        if self.plan is not None:
            return len(_kept_kinds(self.plan, sum(d for _, d in self.plan)))
        return len(self.effective.arcs) if self.effective is not None else 99


@dataclass(frozen=True)
class CandidateTable:
    rows: tuple[CandidateRow, ...]

    @property
    def feasible_rows(self) -> tuple[CandidateRow, ...]:
        return tuple(r for r in self.rows if r.feasible)

    @property
    def best(self) -> CandidateRow:
        rows = self.feasible_rows
        top = max(r.objective for r in rows)
        near = [r for r in rows if r.objective >= top - 1e-12 * (1.0 + abs(top))]
        return min(near, key=lambda r: (r.n_arcs, -r.objective))

    def row(self, structure: str) -> CandidateRow:
        for r in self.rows:
            if r.structure == structure:
                return r
        raise KeyError(structure)

    def records(self) -> list[dict]:
        return [
            {
                "structure": r.structure,
                "tau1": r.tau1,
                "tau_s": r.tau_s,
                "objective": r.objective if r.feasible else None,
                "feasible": r.feasible,
                "effective": r.effective.value if r.effective is not None else None,
            }
            for r in self.rows
        ]


def _kept_kinds(plan, T: float) -> list[ArcKind]:
    kinds = []
    for kind, d in plan:
        if d > JUNCTION_WINDOW * T and (not kinds or kinds[-1] is not kind):
            kinds.append(kind)
    return kinds or [S]


def effective_structure(plan, T: float) -> Regime:
    try:
        return Regime.from_arcs(_kept_kinds(plan, T))
    except ValueError:
        return Regime.GENERAL


def effective_times(plan, T: float) -> tuple[float | None, float | None]:
    """Switch times of the effective structure: cumulative ends of kept arcs."""
    t = 0.0
    ends = []
    for kind, d in plan:
        t += d
        if d > JUNCTION_WINDOW * T:
            if ends and ends[-1][0] is kind:
                ends[-1] = (kind, t)
            else:
                ends.append((kind, t))
    switches = [e for _, e in ends[:-1]]
    kinds = tuple(k for k, _ in ends)
    if kinds and kinds[-1] is S:
        tau_s = switches[-1] if switches else None
        return (switches[0] if len(switches) > 1 else None), tau_s
    return (switches[0] if switches else None), None


def _plan_value(s: Scenario, plan) -> float | None:
    try:
        traj = build_trajectory(s.params, plan, s.x0)
    except InfeasiblePlanError:
        return None
    return trajectory_objective(s.params, traj)


def _depletion_after(s: Scenario, first: ArcKind, tau1: float, second: ArcKind) -> float:
    """How long ``second`` can run after ``tau1`` of ``first`` before the nutrient is gone."""
    x1 = advance(s.params, first, s.x0, tau1)
    return arc_max_duration(s.params, second, x1)


def compare_candidates(s: Scenario, resolution: int = 200) -> CandidateTable:
    """Optimise the switch times of every structure and tabulate the results.

    Free parameters: ``tau1`` for exponential-then-linear growth, ``tau_s``
    for the two-phase depleting structures and ``tau1`` for the three-phase
    ones, whose second growth phase then runs until depletion (or ``T``),
    since a longer growth phase only adds biomass.

    Besides the regimes with closed forms, storage growth followed by enzyme
    growth and a stationary phase is included: when storage costs more
    nutrient than enzyme (``a_M > a_E``) it can beat every other structure.
    The last row is the plan synthesised from the maximum principle, which
    may switch any number of times.
    """
    if resolution < 100:
        raise ValueError(f"resolution must be >= 100, got {resolution}")
    T = s.T
    rows = []

    def fixed(name, plan):
        v = _plan_value(s, plan)
        eff = effective_structure(plan, T) if v is not None else None
        rows.append(CandidateRow(name, None, None, v if v is not None else -math.inf, v is not None, eff))

    def free(name, make_plan, times):
        def f(x):
            return _plan_value(s, make_plan(x))

        m = maximize_1d(f, 0.0, T, resolution)
        if m is None:
            rows.append(CandidateRow(name, None, None, -math.inf, False))
            return
        plan = make_plan(m.x)
        rows.append(CandidateRow(name, *times(m.x), m.value, True, effective_structure(plan, T), m.unimodal))

    fixed("Stationary", [(S, T)])
    fixed("Exponential", [(E, T)])
    fixed("Linear", [(L, T)])
    free("ExpLin", lambda t1: regime_plan(Regime.EXPLIN, T, t1), lambda t1: (t1, None))
    free("LinStat", lambda ts: regime_plan(Regime.LINSTAT, T, None, ts), lambda ts: (None, ts))
    free("ExpStat", lambda ts: regime_plan(Regime.EXPSTAT, T, None, ts), lambda ts: (None, ts))

    for regime in (Regime.EXPLINSTAT, Regime.LINEXPSTAT):
        first, second, _ = regime.arcs

        def onset(t1, first=first, second=second):
            return max(min(t1 + _depletion_after(s, first, t1, second), T), t1)

        free(
            regime.value,
            lambda t1, regime=regime, onset=onset: regime_plan(regime, T, t1, onset(t1)),
            lambda t1, onset=onset: (t1, onset(t1)),
        )

    syn = shoot(s.params, s.x0, T)
    v = _plan_value(s, syn.plan) if syn is not None else None
    if v is None:
        rows.append(CandidateRow("Synthesized", None, None, -math.inf, False))
    else:
        rows.append(CandidateRow("Synthesized", *plan_times(syn.plan), v, True,
                                 effective_structure(syn.plan, T), plan=syn.plan, gamma1=syn.gamma1))
    return CandidateTable(tuple(rows))


# --- oracle gap --------------------------------------------------------------

EXACT_GAP = 1e-12


@dataclass(frozen=True)
class GapRow:
    N: int
    oracle: float
    analytic: float
    gap: float             # (analytic - oracle) / max(|analytic|, 1)
    order: float | None    # log-ratio against the previous row; None if undefined
    seconds: float = 0.0
    iterations: int = 0


@dataclass(frozen=True)
class GapReport:
    rows: tuple[GapRow, ...]

    @property
    def exact(self) -> bool:
        return all(abs(r.gap) <= EXACT_GAP for r in self.rows)

    @property
    def monotone(self) -> bool:
        gaps = [r.gap for r in self.rows]
        return all(b <= a + EXACT_GAP for a, b in zip(gaps, gaps[1:]))

    @property
    def min_order(self) -> float | None:
        orders = [r.order for r in self.rows if r.order is not None]
        return min(orders) if orders else None

    @property
    def fitted_order(self) -> float | None:
        """Least-squares slope of ``-log gap`` against ``log N``."""
        pts = [(math.log(r.N), math.log(r.gap)) for r in self.rows if r.gap > EXACT_GAP]
        if len(pts) < 2:
            return None
        x, y = np.array(pts).T
        return float(-np.polyfit(x, y, 1)[0])

    def records(self) -> list[dict]:
        return [r.__dict__.copy() for r in self.rows]


def oracle_gap(s: Scenario, N_list: Sequence[int], cls: Classification | None = None) -> GapReport:
    import time

    from .lp_oracle import oracle_solve
    from .regimes import classify

    if cls is None:
        cls = classify(s, certify=False)
    analytic = cls.objective
    scale = max(abs(analytic), 1.0)
    rows = []
    prev = None
    for N in N_list:
        t0 = time.perf_counter()
        res = oracle_solve(s, int(N))
        elapsed = time.perf_counter() - t0
        gap = (analytic - res.objective) / scale
        order = None
        if prev is not None and prev.gap > EXACT_GAP and gap > EXACT_GAP:
            order = math.log(prev.gap / gap) / math.log(N / prev.N)
        row = GapRow(int(N), res.objective, analytic, gap, order, elapsed, res.solution.iterations)
        rows.append(row)
        prev = row
    return GapReport(tuple(rows))
