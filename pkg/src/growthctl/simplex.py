"""Dense two-phase primal simplex.

Solves ``max c.z + offset`` subject to ``A_eq z = b_eq``, ``A_ub z <= b_ub``,
``z >= 0`` on a full tableau. Pricing is Dantzig's largest-coefficient rule;
after a run of degenerate pivots it falls back to Bland's smallest-index rule
until the objective moves again, which rules out cycling. ``rule="bland"``
uses Bland's rule throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

try:
    from scipy.linalg.blas import dger as _dger
except ImportError:  # pragma: no cover
    _dger = None

from .errors import SolverError, StructuralError

PIVOT_TOL = 1e-9
MAX_ITER = 10 ** 6
_DEGENERATE_RUN = 50


@dataclass
class LPProblem:
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    labels: Sequence[str] = ()
    eq_labels: Sequence[str] = ()
    ub_labels: Sequence[str] = ()
    objective_offset: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        self.A_ub = np.asarray(self.A_ub, dtype=float).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        self.b_ub = np.asarray(self.b_ub, dtype=float).ravel()
        if self.b_eq.size != self.A_eq.shape[0] or self.b_ub.size != self.A_ub.shape[0]:
            raise StructuralError(
                f"rhs sizes {self.b_eq.size}/{self.b_ub.size} do not match "
                f"row counts {self.A_eq.shape[0]}/{self.A_ub.shape[0]}"
            )
        if self.labels and len(self.labels) != n:
            raise StructuralError(f"{len(self.labels)} labels for {n} variables")
        for name in ("c", "A_eq", "b_eq", "A_ub", "b_ub"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise StructuralError(f"{name} contains non-finite entries")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def residuals(self, z: np.ndarray) -> tuple[float, float, float]:
        """Worst equality error, inequality excess and bound violation at ``z``."""
        eq = float(np.max(np.abs(self.A_eq @ z - self.b_eq), initial=0.0))
        ub = float(np.max(self.A_ub @ z - self.b_ub, initial=0.0))
        lb = float(np.max(-z, initial=0.0))
        return eq, max(ub, 0.0), max(lb, 0.0)

    def value(self, z: np.ndarray) -> float:
        return float(self.c @ z) + self.objective_offset


@dataclass
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float
    x: np.ndarray
    basis: list[str] = field(default_factory=list)
    iterations: int = 0


class _Tableau:
    def __init__(self, lp: LPProblem, pivot_tol: float):
        m1, n = lp.A_eq.shape
        m2 = lp.A_ub.shape[0]
        m = m1 + m2
        A = np.vstack([lp.A_eq, lp.A_ub]) if m else np.zeros((0, n))
        b = np.concatenate([lp.b_eq, lp.b_ub])
        sign = np.where(b < 0.0, -1.0, 1.0)
        # slack columns for the inequality rows
        slack = np.zeros((m, m2))
        slack[m1 + np.arange(m2), np.arange(m2)] = 1.0
        A = np.hstack([A, slack]) * sign[:, None]
        b = b * sign
        needs_art = np.ones(m, dtype=bool)
        needs_art[m1:] = sign[m1:] < 0.0
        art_rows = np.flatnonzero(needs_art)
        n_art = art_rows.size
        art = np.zeros((m, n_art))
        art[art_rows, np.arange(n_art)] = 1.0

        ncol = n + m2 + n_art
        self.n, self.m, self.m2, self.n_art, self.ncol = n, m, m2, n_art, ncol
        self.tol = pivot_tol
        # rows 0..m-1 constraints, row m phase-2 costs, row m+1 phase-1 costs
        T = np.zeros((m + 2, ncol + 1), order="F")
        T[:m, :n + m2] = A
        T[:m, n + m2:ncol] = art
        T[:m, -1] = b
        T[m, :n] = -lp.c
        self.basis = np.empty(m, dtype=np.int64)
        self.basis[:] = -1
        slack_rows = np.flatnonzero(~needs_art)
        self.basis[slack_rows] = n + (slack_rows - m1)
        self.basis[art_rows] = n + m2 + np.arange(n_art)
        if n_art:
            # phase-1 objective: maximise -sum(artificials), priced out
            T[m + 1, :n + m2] = -T[art_rows, :n + m2].sum(axis=0)
            T[m + 1, -1] = -T[art_rows, -1].sum()
        self.T = T
        self.enterable = np.ones(ncol, dtype=bool)
        self.iterations = 0

    def pivot(self, r: int, c: int) -> None:
        T = self.T
        T[r, :] /= T[r, c]
        col = T[:, c].copy()
        col[r] = 0.0
        if np.any(col):
            prow = T[r, :].copy()
            if _dger is not None:
                # in-place rank-1 update on the Fortran-ordered tableau
                self.T = T = _dger(-1.0, col, prow, a=T, overwrite_a=1)
            else:
                rows = np.flatnonzero(col)
                T[rows, :] -= np.outer(col[rows], prow)
        T[:, c] = 0.0
        T[r, c] = 1.0
        self.basis[r] = c
        self.iterations += 1

    def _entering(self, cost_row: int, bland: bool) -> int:
        d = self.T[cost_row, :self.ncol]
        cand = np.flatnonzero((d < -self.tol) & self.enterable)
        if cand.size == 0:
            return -1
        if bland:
            return int(cand[0])
        return int(cand[np.argmin(d[cand])])

    def _leaving(self, c: int) -> int:
        T = self.T
        col = T[:self.m, c]
        rows = np.flatnonzero(col > self.tol)
        if rows.size == 0:
            return -1
        rhs = np.maximum(T[rows, -1], 0.0)
        ratios = rhs / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, best)]
        return int(ties[np.argmin(self.basis[ties])])

    def optimise(self, cost_row: int, rule: str, max_iter: int) -> str:
        bland = rule == "bland"
        degenerate_run = 0
        while True:
            if self.iterations >= max_iter:
                raise SolverError(f"simplex exceeded {max_iter} iterations")
            c = self._entering(cost_row, bland or degenerate_run >= _DEGENERATE_RUN)
            if c < 0:
                return "optimal"
            r = self._leaving(c)
            if r < 0:
                return "unbounded"
            step = self.T[r, -1]
            self.pivot(r, c)
            degenerate_run = degenerate_run + 1 if step <= self.tol else 0

    def drive_out_artificials(self) -> None:
        first_art = self.n + self.m2
        for r in range(self.m):
            if self.basis[r] < first_art:
                continue
            row = self.T[r, :first_art]
            cand = np.flatnonzero(np.abs(row) > self.tol)
            if cand.size:
                self.pivot(r, int(cand[0]))
            # otherwise the row is redundant; its artificial stays basic at zero
        self.enterable[first_art:] = False

    def primal(self) -> np.ndarray:
        z = np.zeros(self.ncol)
        z[self.basis] = self.T[:self.m, -1]
        return z


def simplex_solve(
    lp: LPProblem,
    *,
    rule: str = "dantzig",
    pivot_tol: float = PIVOT_TOL,
    max_iter: int = MAX_ITER,
) -> LPSolution:
    """Maximise ``lp``; returns status ``optimal``, ``infeasible`` or ``unbounded``.

    Raises:
        StructuralError: inconsistent dimensions.
        SolverError: iteration cap exceeded.
    """
    if rule not in ("dantzig", "bland"):
        raise ValueError(f"unknown pricing rule {rule!r}")
    if not isinstance(lp, LPProblem):
        raise StructuralError("simplex_solve expects an LPProblem")
    tab = _Tableau(lp, pivot_tol)
    n = lp.n_vars
    labels = list(lp.labels) if lp.labels else [f"z{j}" for j in range(n)]
    labels += [f"slack{i}" for i in range(tab.m2)] + [f"art{i}" for i in range(tab.n_art)]

    if tab.n_art:
        tab.optimise(tab.m + 1, rule, max_iter)
        infeas = -tab.T[tab.m + 1, -1]
        scale = 1.0 + float(np.abs(tab.T[:tab.m, -1]).max(initial=0.0))
        if infeas > 1e-8 * scale:
            return LPSolution("infeasible", float("nan"), np.full(n, np.nan), [], tab.iterations)
        tab.drive_out_artificials()

    status = tab.optimise(tab.m, rule, max_iter)
    z = tab.primal()[:n]
    basis = [labels[j] for j in tab.basis]
    if status == "unbounded":
        return LPSolution("unbounded", float("inf"), z, basis, tab.iterations)
    return LPSolution("optimal", lp.value(z), z, basis, tab.iterations)
