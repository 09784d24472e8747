"""Constant-velocity motion model and the package state-layout convention.

Target states are 4-vectors (x, vx, y, vy): planar position interleaved
with velocity.  POSITION_IDX picks the position components out of a state.
"""

from __future__ import annotations

import numpy as np

POSITION_IDX = (0, 2)


def constant_velocity_matrix(tau: float) -> np.ndarray:
    """Transition matrix advancing (x, vx, y, vy) by one step of length tau."""
    return np.array(
        [
            [1.0, tau, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, tau],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def position_projection(state_dim: int = 4) -> np.ndarray:
    """Matrix extracting (x, y) from a state vector."""
    proj = np.zeros((len(POSITION_IDX), state_dim))
    for row, idx in enumerate(POSITION_IDX):
        proj[row, idx] = 1.0
    return proj
