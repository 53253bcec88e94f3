"""Optimal growth regimes and their switching times.

On short horizons the nutrient never runs out and the answer depends only on
the instantaneous biomass rates ``k_E b_E`` (enzyme) and ``k_M b_M`` (storage):
exponential growth if enzyme is at least as fast, otherwise linear growth or,
for long enough horizons, exponential growth followed by linear growth.

When the nutrient is exhausted before ``T`` the yields ``a_M``, ``a_E`` decide
which growth mode runs just before depletion, and a stationary phase follows.
Conditions that are only sufficient are backed by a numeric check and finally
by a brute-force comparison of all candidate structures.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import accumulate
from typing import Mapping, NamedTuple, Sequence

from .arcs import ArcKind, arc_max_duration, build_trajectory, trajectory_objective
from .config import CONDITION_TOL
from .costate import TerminalCondition
from .errors import DomainError, InfeasiblePlanError, InvalidParameterError, NoSolutionError
from .lambertw import lambert_w
from .model import ModelParams, State, exp_sat, expm1_sat

__all__ = [
    "Scenario", "Regime", "Classification", "classify", "short_horizon_regime",
    "long_horizon_regime", "explin_switch_time", "linstat_switch_time",
    "expstat_switch_time", "expstat_necessary_check", "explinstat_switch_times",
    "lambert_w", "regime_map", "regime_plan", "regime_gamma1", "classification_trajectory",
]

E, L, S = ArcKind.EXPONENTIAL, ArcKind.LINEAR, ArcKind.STATIONARY


@dataclass(frozen=True)
class Scenario:
    params: ModelParams
    x0: State
    T: float

    def __post_init__(self):
        object.__setattr__(self, "x0", State(*map(float, self.x0)))
        object.__setattr__(self, "T", float(self.T))
        if not (math.isfinite(self.T) and self.T >= 0.0):
            raise InvalidParameterError(f"horizon T must be finite and >= 0, got {self.T!r}")
        if not all(math.isfinite(v) and v >= 0.0 for v in self.x0):
            raise InvalidParameterError(f"initial state must be finite and >= 0, got {tuple(self.x0)!r}")


class Regime(str, Enum):
    EXPONENTIAL = "Exponential"
    LINEAR = "Linear"
    EXPLIN = "ExpLin"
    LINSTAT = "LinStat"
    EXPSTAT = "ExpStat"
    EXPLINSTAT = "ExpLinStat"
    LINEXPSTAT = "LinExpStat"
    GENERAL = "General"  # any other arc sequence, carried as an explicit plan
    DEGENERATE = "Degenerate"

    @property
    def arcs(self) -> tuple[ArcKind, ...]:
        if self not in REGIME_ARCS:
            raise ValueError(f"{self.value} has no fixed arc sequence")
        return REGIME_ARCS[self]

    @classmethod
    def from_arcs(cls, kinds: Sequence[ArcKind]) -> "Regime":
        kinds = tuple(kinds)
        for regime, seq in REGIME_ARCS.items():
            if seq == kinds and regime is not cls.DEGENERATE:
                return regime
        if kinds == (S,):
            return cls.DEGENERATE
        raise ValueError(f"no regime with arc sequence {kinds!r}")


REGIME_ARCS = {
    Regime.EXPONENTIAL: (E,),
    Regime.LINEAR: (L,),
    Regime.EXPLIN: (E, L),
    Regime.LINSTAT: (L, S),
    Regime.EXPSTAT: (E, S),
    Regime.EXPLINSTAT: (E, L, S),
    Regime.LINEXPSTAT: (L, E, S),
    Regime.DEGENERATE: (S,),
}
GROWTH_REGIMES = tuple(r for r in REGIME_ARCS if r is not Regime.DEGENERATE)


@dataclass(frozen=True)
class Classification:
    regime: Regime
    tau1: float | None
    tau_s: float | None
    terminal: TerminalCondition
    margins: Mapping[str, float]
    method: str
    objective: float
    boundary: tuple[str, ...] = ()
    certificate: object = field(default=None, compare=False)
    plan: tuple[tuple[ArcKind, float], ...] | None = None  # only for General

    @property
    def gamma1(self) -> float:
        return self.terminal.gamma1

    def to_dict(self) -> dict:
        out = {
            "regime": self.regime.value,
            "method": self.method,
            "tau1": self.tau1,
            "tau_s": self.tau_s,
            "gamma1": self.gamma1,
            "objective": self.objective,
            "margins": dict(self.margins),
            "boundary": list(self.boundary),
        }
        if self.plan is not None:
            out["arcs"] = [[kind.value, d] for kind, d in self.plan]
        if self.certificate is not None:
            out["certificate"] = self.certificate.summary()
        return out


def regime_plan(regime: Regime, T: float, tau1=None, tau_s=None) -> list[tuple[ArcKind, float]]:
    """Phase plan ``[(kind, duration), ...]`` tiling ``[0, T]``."""
    regime = Regime(regime)
    if regime is Regime.GENERAL:
        raise ValueError("General regimes carry their own plan")
    if regime in (Regime.EXPONENTIAL, Regime.LINEAR, Regime.DEGENERATE):
        return [(regime.arcs[0], T)]
    if regime is Regime.EXPLIN:
        return [(E, tau1), (L, T - tau1)]
    if regime in (Regime.LINSTAT, Regime.EXPSTAT):
        return [(regime.arcs[0], tau_s), (S, T - tau_s)]
    first, second, _ = regime.arcs
    return [(first, tau1), (second, tau_s - tau1), (S, T - tau_s)]


def regime_gamma1(p: ModelParams, regime: Regime, T: float, tau_s=None, x0: State | None = None) -> float:
    """Terminal nutrient multiplier that makes the final stationary arc optimal."""
    if regime in (Regime.LINSTAT, Regime.EXPLINSTAT):
        return max(T - tau_s, 0.0) / p.a_M
    if regime in (Regime.EXPSTAT, Regime.LINEXPSTAT):
        return max(T - tau_s, 0.0) / p.a_E
    if regime is Regime.DEGENERATE and x0 is not None and x0.x_N <= 0.0 and x0.x_E > 0.0:
        return T / min(p.a_M, p.a_E)
    return 0.0


def plan_times(plan) -> tuple[float | None, float | None]:
    """First switch time and onset of a final stationary arc, if any."""
    ends = list(accumulate(d for _, d in plan))
    tau1 = ends[0] if len(plan) > 1 else None
    tau_s = ends[-2] if len(plan) > 1 and plan[-1][0] is S else None
    return tau1, tau_s


def classification_trajectory(s: Scenario, cls: Classification):
    if cls.plan is not None:
        return build_trajectory(s.params, cls.plan, s.x0)
    plan = regime_plan(cls.regime, s.T, cls.tau1, cls.tau_s)
    return build_trajectory(s.params, plan, s.x0)


# --- switching times -----------------------------------------------------


def explin_threshold(p: ModelParams) -> float:
    """Horizon below which pure storage growth beats any enzyme investment."""
    return 2.0 * (p.k_M * p.b_M - p.k_E * p.b_E) / (p.b_M * p.k_M * p.k_E)


def explin_switch_time(p: ModelParams, T: float, tol: float = CONDITION_TOL) -> float:
    if p.k_E * p.b_E >= p.k_M * p.b_M:
        raise DomainError("exponential-linear switch needs k_E b_E < k_M b_M")
    thr = explin_threshold(p)
    if T < thr - tol:
        raise DomainError(f"T={T!r} is below the linear-growth threshold {thr!r}")
    return max(T - thr, 0.0)


def linstat_switch_time(p: ModelParams, x0: State) -> float:
    return arc_max_duration(p, L, x0)


def expstat_switch_time(p: ModelParams, x0: State) -> float:
    return arc_max_duration(p, E, x0)


def explin_nutrient_margin(p: ModelParams, x0: State, T: float, tau1: float, *, literal: bool = False) -> float:
    """Nutrient left at ``T`` after exponential growth to ``tau1`` then linear growth.

    ``literal=True`` drops the ``k_M`` factor from the linear consumption,
    which misstates the depletion rate whenever ``k_M != 1``.
    """
    g = exp_sat(p.k_E * tau1)
    lin_rate = p.a_M * p.b_M * (1.0 if literal else p.k_M)
    return x0.x_N - x0.x_E * (p.a_E * p.b_E * expm1_sat(p.k_E * tau1) + lin_rate * g * (T - tau1))


def linstat_time_margin(p: ModelParams, T: float, tau_s: float) -> float:
    r = p.a_E / p.a_M
    lhs = (r - 1.0) * p.b_E * p.k_E * T
    rhs = 0.5 * p.b_M * p.k_M * p.k_E * tau_s ** 2 + (r * p.b_E * p.k_E - p.b_M * p.k_M) * tau_s
    return lhs - rhs


class ExpStatCheck(NamedTuple):
    ok: bool
    margin: float              # min of the optimality gap over the exponential arc
    sigma_min: float           # time before depletion where the minimum sits
    roots: tuple[float, ...]   # equality points from Lambert W (time before depletion)
    lambert_consistent: bool


def expstat_necessary_check(s: Scenario, tau_s: float, tol: float = CONDITION_TOL) -> ExpStatCheck:
    """Exact pointwise test of exponential-then-stationary growth.

    With ``sigma`` the time remaining until depletion, exponential growth
    beats storage growth iff

        psi(sigma) = c (exp(k_E sigma) - 1) - sigma + (a_M/a_E - 1)(T - tau_s) >= 0

    on ``[0, tau_s]`` with ``c = b_E / (b_M k_M)``. ``psi`` is convex, so its
    minimum is at the clamped stationary point. The equality points are
    recomputed independently through Lambert W as a cross-check.
    """
    p = s.params
    k = p.k_E
    c = p.b_E / (p.b_M * p.k_M)
    offset = (p.a_M / p.a_E - 1.0) * (s.T - tau_s)

    def psi(sig):
        return c * expm1_sat(k * sig) - sig + offset

    if c * k >= 1.0:
        sig_min = 0.0
    else:
        sig_min = min(max(math.log(1.0 / (c * k)) / k, 0.0), tau_s)
    margin = psi(sig_min)
    ok = margin >= -tol

    # c e^{k sigma} = sigma + c - offset  =>  sigma = offset - c - W(z)/k
    roots = []
    log_z = math.log(k * c) + k * (offset - c)
    if log_z <= -1.0:  # z >= -1/e: real equality points exist
        z = -exp_sat(log_z)
        for b in ((0,) if z == 0.0 else (0, -1)):
            roots.append(offset - c - lambert_w(b, z) / k)
    roots = tuple(sorted(set(roots)))
    eps = tol * (1.0 + tau_s)
    crossing = any(eps < r < tau_s - eps for r in roots)
    starts_down = abs(offset) <= tol and c * k < 1.0
    ok_lw = not crossing and not starts_down
    return ExpStatCheck(ok, margin, sig_min, roots, ok_lw == ok)


def _explinstat_parts(p: ModelParams, x0: State, T: float, tau1: float, literal: bool):
    g = exp_sat(p.k_E * tau1)
    x_N1 = x0.x_N - p.a_E * p.b_E * x0.x_E * expm1_sat(p.k_E * tau1)
    lin_rate = p.a_M * p.b_M * p.k_M * (1.0 if literal else x0.x_E * g)
    d = x_N1 / lin_rate
    tau_s = tau1 + d
    res = (0.5 * p.b_M * p.k_M * p.k_E * d * d + (p.b_E * p.k_E - p.b_M * p.k_M) * d
           + (1.0 - p.a_E / p.a_M) * p.b_E * p.k_E * (T - tau_s))
    return tau_s, d, res


def explinstat_residual(s: Scenario, tau1: float, *, literal_balance: bool = False) -> tuple[float, float]:
    """``(tau_s, residual)`` for a trial switch time ``tau1``.

    ``tau_s`` closes the nutrient balance (storage growth until depletion);
    the residual is the switching condition at ``tau1``.
    """
    tau_s, _, res = _explinstat_parts(s.params, s.x0, s.T, tau1, literal_balance)
    return tau_s, res


def explinstat_switch_times(
    s: Scenario,
    *,
    literal_balance: bool = False,
    res_tol: float = 1e-10,
    tol: float = CONDITION_TOL,
    grid: int = 512,
) -> tuple[float, float]:
    """Solve for ``(tau1, tau_s)`` of exponential, then linear, then stationary growth.

    For each trial ``tau1`` the stationary onset follows from the nutrient
    balance in closed form, which leaves a scalar residual in ``tau1``; a
    sign change is bracketed on a grid and refined by bisection.

    Raises:
        NoSolutionError: no admissible bracket, or the root violates
            ``0 < tau1 < tau_s < T`` or the slope condition.
    """
    p, x0, T = s.params, s.x0, s.T
    if p.a_E < p.a_M - tol:
        raise DomainError("exponential-linear-stationary growth needs a_E >= a_M")
    if x0.x_E <= 0.0:
        raise NoSolutionError("no enzyme")
    hi = min(arc_max_duration(p, E, x0), T)

    def parts(t1):
        return _explinstat_parts(p, x0, T, t1, literal_balance)

    def admissible(t1, ts):
        return ts <= T * (1.0 + 1e-14) and ts >= t1

    pts = [hi * i / grid for i in range(grid + 1)]
    vals = [parts(t) for t in pts]
    bracket = None
    for (a, va), (b, vb) in zip(zip(pts, vals), zip(pts[1:], vals[1:])):
        if not (admissible(a, va[0]) and admissible(b, vb[0])):
            continue
        if va[2] == 0.0:
            bracket = (a, a)
            break
        if (va[2] < 0.0) != (vb[2] < 0.0):
            bracket = (a, b)
            break
    if bracket is None:
        raise NoSolutionError("switching residual has no sign change on the admissible interval")

    a, b = bracket
    fa = parts(a)[2]
    t1 = a
    for _ in range(200):
        t1 = 0.5 * (a + b)
        f = parts(t1)[2]
        if abs(f) <= res_tol * 1e-2 or b - a <= 4e-16 * max(1.0, abs(t1)):
            break
        if (f < 0.0) == (fa < 0.0):
            a, fa = t1, f
        else:
            b = t1
    tau_s, d, res = parts(t1)
    if abs(res) > res_tol:
        raise NoSolutionError(f"bisection stalled with residual {res!r}")
    if not (tol < t1 and d > tol and tau_s < T - tol):
        raise NoSolutionError(f"root ({t1!r}, {tau_s!r}) is not strictly inside (0, T)")
    if p.b_E * p.k_E < p.b_M * p.k_M * (1.0 - p.k_E * d) - tol:
        raise NoSolutionError("slope condition fails at the solved switch")
    return t1, tau_s


# --- classification --------------------------------------------------------


def _boundary(margins: Mapping[str, float], tol: float) -> tuple[str, ...]:
    return tuple(name for name, m in margins.items() if abs(m) <= tol)


def _make(s, regime, tau1, tau_s, margins, method, tol, gamma1=None, plan=None) -> Classification:
    p = s.params
    if gamma1 is None:
        gamma1 = regime_gamma1(p, regime, s.T, tau_s, s.x0)
    if plan is not None:
        plan = tuple(plan)
    traj = build_trajectory(p, plan or regime_plan(regime, s.T, tau1, tau_s), s.x0)
    return Classification(
        regime=regime,
        tau1=tau1,
        tau_s=tau_s,
        terminal=TerminalCondition(gamma1),
        margins=dict(margins),
        method=method,
        objective=trajectory_objective(p, traj),
        boundary=_boundary(margins, tol),
        plan=plan,
    )


def short_horizon_regime(s: Scenario, tol: float = CONDITION_TOL) -> Classification | None:
    """Non-depleting regimes; ``None`` means the nutrient would run out."""
    p, x0, T = s.params, s.x0, s.T
    rate_order = p.k_E * p.b_E - p.k_M * p.b_M
    if rate_order >= -tol:
        nutrient = x0.x_N - p.a_E * p.b_E * x0.x_E * expm1_sat(p.k_E * T)
        if nutrient < -tol:
            return None
        return _make(s, Regime.EXPONENTIAL, None, None,
                     {"rate_order": rate_order, "nutrient": nutrient}, "closed-form", tol)
    thr = explin_threshold(p)
    if thr - T > tol:
        nutrient = x0.x_N - T * p.a_M * p.b_M * p.k_M * x0.x_E
        if nutrient < -tol:
            return None
        return _make(s, Regime.LINEAR, None, None,
                     {"rate_order": -rate_order, "threshold": thr - T, "nutrient": nutrient},
                     "closed-form", tol)
    tau1 = explin_switch_time(p, T, tol)
    nutrient = explin_nutrient_margin(p, x0, T, tau1)
    if nutrient < -tol:
        return None
    return _make(s, Regime.EXPLIN, tau1, None,
                 {"rate_order": -rate_order, "threshold": T - thr, "nutrient": nutrient},
                 "closed-form", tol)


def long_horizon_regime(s: Scenario, tol: float = CONDITION_TOL, resolution: int = 200) -> Classification:
    """Depleting regimes, tried in the order LinStat, ExpStat, ExpLinStat."""
    p, x0, T = s.params, s.x0, s.T
    storage_yield = p.a_E - p.a_M

    if storage_yield >= -tol:
        tau_s = linstat_switch_time(p, x0)
        margins = {
            "yield_order": storage_yield,
            "depletion": T * p.a_M * p.b_M * p.k_M * x0.x_E - x0.x_N,
            "time_condition": linstat_time_margin(p, T, tau_s),
        }
        if min(margins.values()) >= -tol:
            return _make(s, Regime.LINSTAT, None, tau_s, margins, "closed-form", tol)

    if -storage_yield >= -tol:
        tau_s = expstat_switch_time(p, x0)
        depletion = expm1_sat(p.k_E * T) * p.a_E * p.b_E * x0.x_E - x0.x_N
        if depletion >= -tol:
            margins = {"yield_order": -storage_yield, "depletion": depletion}
            rate_order = p.b_E * p.k_E - p.b_M * p.k_M
            early_onset = (1.0 - p.a_E / p.a_M) * T - tau_s
            if rate_order >= -tol:
                margins["rate_order"] = rate_order
                return _make(s, Regime.EXPSTAT, None, tau_s, margins, "closed-form", tol)
            if early_onset >= -tol:
                margins["early_onset"] = early_onset
                return _make(s, Regime.EXPSTAT, None, tau_s, margins, "closed-form", tol)
            check = expstat_necessary_check(s, tau_s, tol)
            if check.ok:
                margins["min_psi"] = check.margin
                return _make(s, Regime.EXPSTAT, None, tau_s, margins, "numeric-check", tol)

    if storage_yield >= -tol:
        try:
            tau1, tau_s = explinstat_switch_times(s, tol=tol)
        except NoSolutionError:
            pass
        else:
            d = tau_s - tau1
            margins = {
                "yield_order": storage_yield,
                "ordering": min(tau1, d, T - tau_s),
                "slope_condition": p.b_E * p.k_E - p.b_M * p.k_M * (1.0 - p.k_E * d),
            }
            return _make(s, Regime.EXPLINSTAT, tau1, tau_s, margins, "closed-form", tol)

    return _by_comparison(s, tol, resolution)


SYNTH_PREFERENCE = 1e-9


def _by_comparison(s: Scenario, tol: float, resolution: int) -> Classification:
    from .verify import compare_candidates, effective_times

    table = compare_candidates(s, resolution)
    best = table.best
    synth = table.row("Synthesized")
    # its switch times are exact roots, while the searched ones carry ~1e-7 noise
    if synth.feasible and synth.objective >= best.objective - SYNTH_PREFERENCE * (1.0 + abs(best.objective)):
        best = synth
    rivals = [r for r in table.feasible_rows if r.effective is not best.effective]
    lead = best.objective - max((r.objective for r in rivals), default=-math.inf)
    margins = {"objective_lead": lead if math.isfinite(lead) else 0.0}
    if best.plan is not None:
        tau1, tau_s = plan_times(best.plan)
        try:
            named = Regime.from_arcs([kind for kind, _ in best.plan])
        except ValueError:
            named = Regime.GENERAL
        if named not in (Regime.GENERAL, Regime.DEGENERATE):
            return _make(s, named, tau1, tau_s, margins, "by-comparison", tol)
        return _make(s, Regime.GENERAL, tau1, tau_s, margins, "by-comparison", tol, best.gamma1, best.plan)
    structure = Regime.DEGENERATE if best.structure == "Stationary" else Regime(best.structure)
    plan = regime_plan(structure, s.T, best.tau1, best.tau_s)
    if best.effective not in (None, structure, Regime.DEGENERATE, Regime.GENERAL):
        tau1, tau_s = effective_times(plan, s.T)
        try:
            return _make(s, best.effective, tau1, tau_s, margins, "by-comparison", tol)
        except InfeasiblePlanError:
            pass  # dropping a negligible arc broke the nutrient balance
    return _make(s, structure, best.tau1, best.tau_s, margins, "by-comparison", tol)


def is_degenerate(s: Scenario) -> bool:
    return s.T == 0.0 or s.x0.x_E == 0.0 or s.x0.x_N == 0.0


def classify(
    s: Scenario,
    *,
    certify: bool = True,
    samples: int = 1000,
    resolution: int = 200,
    tol: float = CONDITION_TOL,
) -> Classification:
    """Optimal regime for ``s``; ``method`` records which path decided it."""
    if is_degenerate(s):
        cls = _make(s, Regime.DEGENERATE, None, None, {}, "closed-form", tol)
    else:
        cls = short_horizon_regime(s, tol) or long_horizon_regime(s, tol, resolution)
    if certify:
        from .verify import check_pmp

        cls = replace(cls, certificate=check_pmp(s, cls, samples))
    return cls


# --- parameter sweeps ------------------------------------------------------

SWEEPABLE = ("k_M", "k_E", "a_M", "a_E", "b_M", "b_E", "T", "x_N", "x_M", "x_E")


def with_value(s: Scenario, name: str, value: float) -> Scenario:
    if name == "T":
        return replace(s, T=value)
    if name in State._fields:
        return replace(s, x0=s.x0._replace(**{name: value}))
    if name in ModelParams.__dataclass_fields__:
        return replace(s, params=replace(s.params, **{name: value}))
    raise InvalidParameterError(f"cannot sweep unknown parameter {name!r}; choose from {SWEEPABLE}")


def _map_cell(args):
    s, n1, v1, n2, v2 = args
    cls = classify(with_value(with_value(s, n1, v1), n2, v2), certify=False)
    return {
        n1: v1,
        n2: v2,
        "regime": cls.regime.value,
        "tau1": cls.tau1,
        "tau_s": cls.tau_s,
        "objective": cls.objective,
    }


def regime_map(
    base: Scenario,
    axis1: tuple[str, Sequence[float]],
    axis2: tuple[str, Sequence[float]],
    workers: int | None = None,
) -> list[dict]:
    """Classify every point of a 2-D parameter grid (row-major in ``axis1``)."""
    (n1, vals1), (n2, vals2) = axis1, axis2
    for name in (n1, n2):
        if name not in SWEEPABLE:
            raise InvalidParameterError(f"cannot sweep unknown parameter {name!r}; choose from {SWEEPABLE}")
    jobs = [(base, n1, float(a), n2, float(b)) for a in vals1 for b in vals2]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_map_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_map_cell(j) for j in jobs]
