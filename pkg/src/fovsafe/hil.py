"""Blending of autonomous servoing with a human-in-the-loop twist.

The human weight adapts to the visibility margin: with h_min the smallest
of the sixteen plane/corner barriers (the standoff barrier is deliberately
not included),

    beta(h_min) = beta_max * sat(h_min / h_safe),   sat clamping to [0, 1],

so the operator has full authority (up to beta_max) while the marker is at
least h_safe inside the field of view and is faded out linearly as any
corner approaches a boundary.  The blended twist is still passed through
the barrier QP, so beta shapes preference, never safety.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HilParams:
    beta_max: float = 0.8
    h_safe: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.beta_max <= 1.0:
            raise ValueError("beta_max must lie in [0, 1]")
        if self.h_safe <= 0.0:
            raise ValueError("h_safe must be positive")


def beta(h_min: float, params: HilParams) -> float:
    """Adaptive human weight in [0, beta_max]."""
    return params.beta_max * min(1.0, max(0.0, h_min / params.h_safe))


def blend(u_servo: np.ndarray, u_hil: np.ndarray, weight: float) -> np.ndarray:
    """Convex combination (1 - beta) * u_servo + beta * u_hil."""
    if not 0.0 <= weight <= 1.0:
        raise ValueError("blend weight must lie in [0, 1]")
    return (1.0 - weight) * np.asarray(u_servo, float) + weight * np.asarray(u_hil, float)
