"""Real Lambert W on the principal (0) and lower (-1) branches."""
from __future__ import annotations

import math

from .errors import DomainError

BRANCH_POINT = -math.exp(-1.0)
_MAX_ITER = 50


def _initial_guess(branch: int, x: float) -> float:
    q = 2.0 * (math.e * x + 1.0)
    if q < 0.25:
        # expansion about the branch point -1/e
        r = math.sqrt(max(q, 0.0))
        r = r if branch == 0 else -r
        return -1.0 + r - r * r / 3.0 + 11.0 / 72.0 * r ** 3
    if branch == 0:
        if abs(x) < 0.25:
            return x - x * x + 1.5 * x ** 3
        if x < 3.0:
            return 0.5 * math.log1p(x)  # crude but within Halley's basin
        l1 = math.log(x)
        l2 = math.log(l1)
        return l1 - l2 + l2 / l1
    l1 = math.log(-x)
    l2 = math.log(-l1)
    return l1 - l2 + l2 / l1


def lambert_w(branch, x: float) -> float:
    """Solve ``w * exp(w) = x`` for real ``w``.

    ``branch`` is ``0``/``"principal"`` (``x >= -1/e``) or ``-1``/``"minus-one"``
    (``-1/e <= x < 0``). Halley iteration from series or asymptotic starts.
    """
    if branch in ("principal", 0):
        branch = 0
    elif branch in ("minus-one", -1):
        branch = -1
    else:
        raise DomainError(f"unknown branch {branch!r}")
    x = float(x)
    if math.isnan(x) or x < BRANCH_POINT - 1e-15 * abs(BRANCH_POINT):
        raise DomainError(f"lambert_w undefined for x={x!r} < -1/e")
    if branch == -1 and x >= 0.0:
        raise DomainError(f"lower branch requires -1/e <= x < 0, got {x!r}")
    if x == 0.0:
        return 0.0
    if x <= BRANCH_POINT:
        return -1.0
    if math.isinf(x):
        return math.inf

    w = _initial_guess(branch, x)
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 1e-14 * (1.0 + abs(w)):
            break
    return w
