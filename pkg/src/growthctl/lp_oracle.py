"""Time-discretised linear program for the growth problem.

Fluxes ``v = (v_M, v_E)`` are piecewise constant on a uniform grid, so the
states are piecewise linear and the biomass integral is exact under the
trapezoidal rule. Enzyme capacity is imposed at the left end of each step;
since enzyme never decreases, every LP-feasible point is a feasible
continuous-time control and the LP optimum is a lower bound on the true one.

Two equivalent forms are produced. The ``full`` form keeps every state as a
variable. The ``condensed`` form substitutes the states out (they are
cumulative sums of fluxes), which leaves ``2N`` variables and ``N + 1`` rows:
one capacity row per step and a single nutrient row, because the nutrient is
monotone and only its final value can go negative.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .errors import SolverError
from .model import State
from .regimes import Scenario
from .simplex import LPProblem, LPSolution, simplex_solve

X_E_FLOOR = 1e-12


def _trapezoid_weights(N: int, dt: float) -> np.ndarray:
    w = np.full(N + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def transcribe(s: Scenario, N: int, form: str = "full") -> LPProblem:
    if N < 1:
        raise ValueError(f"need at least one time step, got N={N}")
    if form == "full":
        return _transcribe_full(s, N)
    if form == "condensed":
        return _transcribe_condensed(s, N)
    raise ValueError(f"unknown form {form!r}")


def _transcribe_full(s: Scenario, N: int) -> LPProblem:
    p, x0, T = s.params, s.x0, s.T
    dt = T / N
    nx = 3 * (N + 1)
    n = nx + 2 * N

    def xi(k, i):
        return 3 * k + i

    def vi(k, j):
        return nx + 2 * k + j

    labels = [f"{name}[{k}]" for k in range(N + 1) for name in ("x_N", "x_M", "x_E")]
    labels += [f"{name}[{k}]" for k in range(N) for name in ("v_M", "v_E")]

    stoich = ((-p.a_M * p.b_M, -p.a_E * p.b_E), (1.0, 0.0), (0.0, 1.0))
    A_eq = np.zeros((3 + 3 * N, n))
    b_eq = np.zeros(3 + 3 * N)
    eq_labels = []
    for i, name in enumerate(("x_N", "x_M", "x_E")):
        A_eq[i, xi(0, i)] = 1.0
        b_eq[i] = x0[i]
        eq_labels.append(f"init_{name}")
    row = 3
    for k in range(N):
        for i, name in enumerate(("x_N", "x_M", "x_E")):
            A_eq[row, xi(k + 1, i)] = 1.0
            A_eq[row, xi(k, i)] = -1.0
            A_eq[row, vi(k, 0)] = -dt * stoich[i][0]
            A_eq[row, vi(k, 1)] = -dt * stoich[i][1]
            eq_labels.append(f"dyn_{name}[{k}]")
            row += 1

    A_ub = np.zeros((N, n))
    for k in range(N):
        A_ub[k, vi(k, 0)] = 1.0 / p.k_M
        A_ub[k, vi(k, 1)] = 1.0 / p.k_E
        A_ub[k, xi(k, 2)] = -1.0
    ub_labels = [f"capacity[{k}]" for k in range(N)]

    c = np.zeros(n)
    w = _trapezoid_weights(N, dt)
    for k in range(N + 1):
        c[xi(k, 1)] = w[k] * p.b_M
        c[xi(k, 2)] = w[k] * p.b_E
    return LPProblem(c, A_eq, b_eq, A_ub, np.zeros(N), labels, eq_labels, ub_labels)


def _transcribe_condensed(s: Scenario, N: int) -> LPProblem:
    p, x0, T = s.params, s.x0, s.T
    dt = T / N
    n = 2 * N
    labels = [f"{name}[{k}]" for k in range(N) for name in ("v_M", "v_E")]

    # capacity[k]: v_M[k]/k_M + v_E[k]/k_E - dt * sum_{j<k} v_E[j] <= x_E(0)
    A_ub = np.zeros((N + 1, n))
    for k in range(N):
        A_ub[k, 2 * k] = 1.0 / p.k_M
        A_ub[k, 2 * k + 1] = 1.0 / p.k_E
        A_ub[k, 1:2 * k:2] = -dt
    A_ub[N, 0::2] = dt * p.a_M * p.b_M
    A_ub[N, 1::2] = dt * p.a_E * p.b_E
    b_ub = np.full(N + 1, x0.x_E)
    b_ub[N] = x0.x_N
    ub_labels = [f"capacity[{k}]" for k in range(N)] + ["nutrient"]

    # flux in step j adds to every later node: weight = dt * sum_{k>j} w_k
    w = _trapezoid_weights(N, dt)
    tail = np.cumsum(w[::-1])[::-1]  # tail[k] = sum_{i>=k} w_i
    later = dt * tail[1:]
    c = np.empty(n)
    c[0::2] = p.b_M * later
    c[1::2] = p.b_E * later
    offset = T * (p.b_M * x0.x_M + p.b_E * x0.x_E)
    return LPProblem(c, np.zeros((0, n)), np.zeros(0), A_ub, b_ub, labels, (), ub_labels, offset)


@dataclass
class OracleResult:
    objective: float
    times: np.ndarray      # grid nodes t_0..t_N
    states: np.ndarray     # (N+1, 3)
    fluxes: np.ndarray     # (N, 2), constant on [t_k, t_k+1)
    controls: np.ndarray   # (N, 2), v / x_E(t_k)
    degenerate_nodes: np.ndarray  # indices where x_E(t_k) is ~0
    solution: LPSolution

    def bang_bang_fraction(self, k_M: float, k_E: float, tol: float = 1e-6) -> float:
        if len(self.controls) == 0:
            return 1.0
        mixed = np.minimum(self.controls[:, 0] / k_M, self.controls[:, 1] / k_E)
        return float(np.mean(mixed <= tol))

    def pattern(self, k_M: float, k_E: float, min_run: float = 0.02) -> tuple[str, ...]:
        """Arc sequence read off the recovered controls, short runs merged away."""
        from .arcs import ArcKind

        use_M = self.controls[:, 0] / k_M
        use_E = self.controls[:, 1] / k_E
        labels = []
        for m, e in zip(use_M, use_E):
            if max(m, e) < 0.5:
                labels.append(ArcKind.STATIONARY)
            else:
                labels.append(ArcKind.LINEAR if m >= e else ArcKind.EXPONENTIAL)
        runs: list[list] = []
        for lab in labels:
            if runs and runs[-1][0] is lab:
                runs[-1][1] += 1
            else:
                runs.append([lab, 1])
        limit = max(1, int(min_run * len(labels)))
        kept = [r for r in runs if r[1] >= limit] or runs
        merged: list = []
        for lab, _ in kept:
            if not merged or merged[-1] is not lab:
                merged.append(lab)
        return tuple(k.value for k in merged)


def oracle_solve(s: Scenario, N: int, *, rule: str = "dantzig") -> OracleResult:
    """Solve the condensed LP and rebuild states and controls on the grid.

    Raises:
        SolverError: the LP is reported infeasible or unbounded, which
            cannot happen for a valid scenario.
    """
    p, x0 = s.params, s.x0
    lp = transcribe(s, N, "condensed")
    sol = simplex_solve(lp, rule=rule)
    if sol.status != "optimal":
        raise SolverError(f"LP oracle returned status {sol.status!r}")
    dt = s.T / N
    v = sol.x.reshape(N, 2)
    S = np.array([[-p.a_M * p.b_M, -p.a_E * p.b_E], [1.0, 0.0], [0.0, 1.0]])
    states = np.empty((N + 1, 3))
    states[0] = x0
    states[1:] = np.asarray(x0) + dt * np.cumsum(v @ S.T, axis=0)
    xE = states[:-1, 2]
    degenerate = np.flatnonzero(xE <= X_E_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(xE[:, None] > X_E_FLOOR, v / xE[:, None], 0.0)
    return OracleResult(
        objective=sol.value,
        times=np.linspace(0.0, s.T, N + 1),
        states=states,
        fluxes=v,
        controls=u,
        degenerate_nodes=degenerate,
        solution=sol,
    )


def dump_lp(lp: LPProblem, out: TextIO) -> None:
    """Plain-text listing: objective, then one line per row with its nonzeros."""
    names = list(lp.labels) or [f"z{j}" for j in range(lp.n_vars)]

    def terms(row):
        return " ".join(f"{row[j]:+.17g}*{names[j]}" for j in np.flatnonzero(row))

    out.write("maximize\n")
    out.write(f"  obj: {terms(lp.c)} {lp.objective_offset:+.17g}\n")
    out.write("subject to\n")
    eq_names = list(lp.eq_labels) or [f"eq{i}" for i in range(len(lp.b_eq))]
    for name, row, rhs in zip(eq_names, lp.A_eq, lp.b_eq):
        out.write(f"  {name}: {terms(row)} = {rhs:.17g}\n")
    ub_names = list(lp.ub_labels) or [f"ub{i}" for i in range(len(lp.b_ub))]
    for name, row, rhs in zip(ub_names, lp.A_ub, lp.b_ub):
        out.write(f"  {name}: {terms(row)} <= {rhs:.17g}\n")
    out.write("bounds\n  all variables >= 0\nend\n")


def grid_state(result: OracleResult, k: int) -> State:
    return State(*map(float, result.states[k]))
