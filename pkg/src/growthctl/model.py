"""Reduced three-state resource allocation model.

States are nutrient ``x_N``, storage ``x_M`` and enzyme ``x_E``. Every flux is
catalysed by the enzyme, so with the allocation ``u = (u_M, u_E)`` the fluxes
are ``v = u * x_E`` and the dynamics read ``dx/dt = S u x_E`` with

    S = [[-a_M b_M, -a_E b_E],
         [       1,        0],
         [       0,        1]].

The energy metabolite has been eliminated by a quasi-steady-state relation,
which folds its production cost into ``a_M``, ``a_E`` and the effective
catalytic constants ``k_M``, ``k_E``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .config import FEASIBILITY_TOL
from .errors import InvalidParameterError


def exp_sat(x: float) -> float:
    """``math.exp`` that saturates at ``inf`` instead of raising."""
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def expm1_sat(x: float) -> float:
    try:
        return math.expm1(x)
    except OverflowError:
        return math.inf


def _check(name: str, value: float, *, strict: bool = True) -> None:
    if not math.isfinite(value) or value < 0.0 or (strict and value == 0.0):
        bound = "> 0" if strict else ">= 0"
        raise InvalidParameterError(f"{name} must be finite and {bound}, got {value!r}")


@dataclass(frozen=True)
class RawNetworkParams:
    """Constants of the unreduced network (energy metabolite still explicit).

    ``aM_raw``/``aE_raw`` are the energy costs per unit nutrient incorporated
    into storage or enzyme; ``kA_raw`` is the turnover of the energy reaction.
    """

    kA_raw: float
    kM_raw: float
    kE_raw: float
    aM_raw: float
    aE_raw: float
    b_M: float
    b_E: float

    def __post_init__(self):
        for name in ("kA_raw", "kM_raw", "kE_raw", "b_M", "b_E"):
            _check(name, getattr(self, name))
        for name in ("aM_raw", "aE_raw"):
            _check(name, getattr(self, name), strict=False)


@dataclass(frozen=True)
class ModelParams:
    k_M: float
    k_E: float
    a_M: float
    a_E: float
    b_M: float
    b_E: float

    def __post_init__(self):
        for name in ("k_M", "k_E", "a_M", "a_E", "b_M", "b_E"):
            _check(name, getattr(self, name))

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in ("k_M", "k_E", "a_M", "a_E", "b_M", "b_E")}

    @property
    def linear_rate(self) -> float:
        """Biomass gain per unit enzyme and time when only storage is made."""
        return self.k_M * self.b_M

    @property
    def exponential_rate(self) -> float:
        """Biomass gain per unit enzyme and time when only enzyme is made."""
        return self.k_E * self.b_E


class State(NamedTuple):
    x_N: float
    x_M: float
    x_E: float

    def is_valid(self, tol: float = 0.0) -> bool:
        return min(self) >= -tol


class Control(NamedTuple):
    u_M: float
    u_E: float


class StateDerivative(NamedTuple):
    dx_N: float
    dx_M: float
    dx_E: float


class Feasibility(NamedTuple):
    feasible: bool
    margin: float


def reduce_params(raw: RawNetworkParams, *, literal: bool = False) -> ModelParams:
    """Eliminate the energy metabolite.

    Substituting the quasi-steady-state energy flux into the full capacity
    constraint gives ``1/k_M = aM_raw b_M / kA_raw + 1/kM_raw`` (likewise for
    E). ``literal=True`` instead divides the energy term by ``kM_raw`` /
    ``kE_raw``, which ignores the energy reaction's own turnover; it is kept
    only to demonstrate that it breaks the capacity constraint.
    """
    if not isinstance(raw, RawNetworkParams):
        raise InvalidParameterError("reduce_params expects RawNetworkParams")
    energy_M = raw.kM_raw if literal else raw.kA_raw
    energy_E = raw.kE_raw if literal else raw.kA_raw
    inv_kM = raw.aM_raw * raw.b_M / energy_M + 1.0 / raw.kM_raw
    inv_kE = raw.aE_raw * raw.b_E / energy_E + 1.0 / raw.kE_raw
    return ModelParams(
        k_M=1.0 / inv_kM,
        k_E=1.0 / inv_kE,
        a_M=raw.aM_raw + 1.0,
        a_E=raw.aE_raw + 1.0,
        b_M=raw.b_M,
        b_E=raw.b_E,
    )


def full_capacity_usage(raw: RawNetworkParams, v_M: float, v_E: float) -> float:
    """Enzyme demand ``v_A/kA + v_M/kM + v_E/kE`` of the unreduced network.

    The energy flux follows from the quasi-steady-state balance.
    """
    v_A = raw.aM_raw * raw.b_M * v_M + raw.aE_raw * raw.b_E * v_E
    return v_A / raw.kA_raw + v_M / raw.kM_raw + v_E / raw.kE_raw


def stoichiometry(p: ModelParams) -> tuple[tuple[float, float], ...]:
    return (
        (-p.a_M * p.b_M, -p.a_E * p.b_E),
        (1.0, 0.0),
        (0.0, 1.0),
    )


def dynamics(p: ModelParams, x: State, u: Control) -> StateDerivative:
    v_M = u.u_M * x.x_E
    v_E = u.u_E * x.x_E
    return StateDerivative(-(p.a_M * p.b_M * v_M + p.a_E * p.b_E * v_E), v_M, v_E)


def control_feasible(p: ModelParams, u: Control, tol: float = FEASIBILITY_TOL) -> Feasibility:
    margin = min(u.u_M, u.u_E, 1.0 - u.u_M / p.k_M - u.u_E / p.k_E)
    return Feasibility(margin >= -tol, margin)


def biomass(p: ModelParams, x: State) -> float:
    return p.b_M * x.x_M + p.b_E * x.x_E
