"""Numerical tolerances and run settings."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

ENV_TOL = "GROWTHCTL_TOL"

FEASIBILITY_TOL = 1e-12   # control-constraint margins
NUTRIENT_TOL = 1e-10      # x_N >= -tol along closed-form arcs
SWITCH_TOL = 1e-10        # switching-value ties
CONDITION_TOL = 1e-10     # strict inequalities in regime conditions
PMP_REL_TOL = 1e-8        # audit tolerance, scaled by (1 + |phi|)
JUNCTION_WINDOW = 1e-6    # fraction of T around junctions where strictness is waived


def default_tol() -> float:
    """Regime-condition tolerance, honouring the ``GROWTHCTL_TOL`` override."""
    raw = os.environ.get(ENV_TOL)
    if raw is None or raw.strip() == "":
        return CONDITION_TOL
    value = float(raw)
    if not value >= 0.0:
        raise ValueError(f"{ENV_TOL} must be a nonnegative number, got {raw!r}")
    return value


@dataclass(frozen=True)
class RunConfig:
    tol: float = field(default_factory=default_tol)
    lp_nodes: int = 1000
    samples: int = 1000

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})
