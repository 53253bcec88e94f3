"""Optimal allocation between storage and enzyme growth in a self-replicator."""
from __future__ import annotations

from .arcs import ArcKind, Trajectory, arc_state, build_trajectory, trajectory_objective
from .costate import Costate, TerminalCondition, backward_costate, switching_values
from .errors import GrowthCtlError
from .lambertw import lambert_w
from .lp_oracle import oracle_solve, transcribe
from .model import ModelParams, RawNetworkParams, State, reduce_params
from .regimes import Classification, Regime, Scenario, classify, regime_map
from .simplex import LPProblem, simplex_solve
from .synthesis import shoot, synthesize
from .verify import check_pmp, compare_candidates, oracle_gap

__all__ = [
    "ArcKind", "Trajectory", "arc_state", "build_trajectory", "trajectory_objective",
    "Costate", "TerminalCondition", "backward_costate", "switching_values",
    "GrowthCtlError", "lambert_w", "oracle_solve", "transcribe",
    "ModelParams", "RawNetworkParams", "State", "reduce_params",
    "Classification", "Regime", "Scenario", "classify", "regime_map",
    "LPProblem", "simplex_solve", "check_pmp", "compare_candidates", "oracle_gap",
    "shoot", "synthesize",
]
