"""Measurement models: a mean-of-states vector sensor and a cell-grid
Rayleigh detection sensor, plus strategies for picking which cells to
interrogate each step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .motion import POSITION_IDX
from .regions import Rectangle


@dataclass
class MeanSensorModel:
    """z = projection(arithmetic mean of all target states) + N(0, R)."""

    R: np.ndarray
    position_projection: np.ndarray

    def __post_init__(self) -> None:
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.position_projection = np.atleast_2d(
            np.asarray(self.position_projection, dtype=float)
        )
        r = self.position_projection.shape[0]
        if self.R.shape != (r, r):
            raise ValueError(
                f"R shape {self.R.shape} does not match projection rows {r}"
            )
        if not np.allclose(self.R, self.R.T, atol=1e-9):
            raise ValueError("R must be symmetric")

    @property
    def meas_dim(self) -> int:
        return self.position_projection.shape[0]


@dataclass(frozen=True)
class CellReturn:
    """Binary detection for one interrogated cell."""

    cell_index: int
    value: int

    def __post_init__(self) -> None:
        if self.value not in (0, 1):
            raise ValueError(f"cell return must be 0 or 1, got {self.value}")


@dataclass
class GridSensorModel:
    """Detection grid over the workspace.

    cells[i] = (x_lo, y_lo, x_hi, y_hi); containment is half-open,
    x in [x_lo, x_hi) and y in [y_lo, y_hi), so the cells tile the
    workspace without overlap.  Cells are indexed row-major from the
    workspace origin corner (index = row * n_cols + col).

    p_d is the single-target detection probability, snr the known
    signal-to-noise ratio of the Rayleigh return model, m_cells the
    maximum number of cells interrogated per step.
    """

    cells: np.ndarray
    p_d: float
    snr: float
    m_cells: int

    def __post_init__(self) -> None:
        self.cells = np.atleast_2d(np.asarray(self.cells, dtype=float))
        if self.cells.shape[1] != 4:
            raise ValueError("cells must be rows of (x_lo, y_lo, x_hi, y_hi)")
        if not 0.0 < self.p_d < 1.0:
            raise ValueError(f"p_d must lie in (0, 1), got {self.p_d}")
        if self.snr <= 0.0:
            raise ValueError(f"snr must be positive, got {self.snr}")
        if self.m_cells < 1:
            raise ValueError("m_cells must be at least 1")

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def cell_center(self, index: int) -> tuple[float, float]:
        x_lo, y_lo, x_hi, y_hi = self.cells[index]
        return 0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi)

    def cell_size(self) -> tuple[float, float]:
        x_lo, y_lo, x_hi, y_hi = self.cells[0]
        return x_hi - x_lo, y_hi - y_lo

    def cell_contains(self, index: int, x: float, y: float) -> bool:
        x_lo, y_lo, x_hi, y_hi = self.cells[index]
        return x_lo <= x < x_hi and y_lo <= y < y_hi


def make_grid(
    workspace: Rectangle, rows: int = 12, cols: int = 12, p_d: float = 0.9,
    snr: float = 3.0, m_cells: int = 12,
) -> GridSensorModel:
    """Tile the workspace with rows x cols equal cells, row-major order."""
    width = (workspace.x_max - workspace.x_min) / cols
    height = (workspace.y_max - workspace.y_min) / rows
    cells = np.zeros((rows * cols, 4))
    for row in range(rows):
        for col in range(cols):
            x_lo = workspace.x_min + col * width
            y_lo = workspace.y_min + row * height
            cells[row * cols + col] = (x_lo, y_lo, x_lo + width, y_lo + height)
    return GridSensorModel(cells, p_d=p_d, snr=snr, m_cells=m_cells)


def mean_sensor_measure(
    true_states: list[np.ndarray], model: MeanSensorModel, rng: np.random.Generator
) -> np.ndarray:
    """Projected arithmetic mean of the true states plus Gaussian noise."""
    if len(true_states) == 0:
        raise ValueError("mean sensor is undefined for zero targets")
    stacked = np.atleast_2d(np.asarray(true_states, dtype=float))
    mean_state = stacked.mean(axis=0)
    z = model.position_projection @ mean_state
    if np.any(model.R):
        z = z + rng.multivariate_normal(np.zeros(model.meas_dim), model.R)
    return z


def detection_prob(t: int, p_d: float, snr: float) -> float:
    """Hit probability of a cell holding t targets under Rayleigh
    threshold detection: p_d ** ((1 + snr) / (1 + t * snr)).

    t = 0 gives the false-alarm probability p_d ** (1 + snr); t = 1 gives
    p_d exactly; the probability increases strictly with t.
    """
    if t < 0:
        raise ValueError(f"target count must be non-negative, got {t}")
    return float(p_d ** ((1.0 + snr) / (1.0 + t * snr)))


def count_occupancy(
    true_states: list[np.ndarray], cells: list[int], model: GridSensorModel
) -> list[int]:
    """Number of targets inside each requested cell (half-open containment)."""
    xi, yi = POSITION_IDX
    counts = []
    for c in cells:
        t = 0
        for s in true_states:
            if model.cell_contains(c, s[xi], s[yi]):
                t += 1
        counts.append(t)
    return counts


def grid_measure(
    true_states: list[np.ndarray],
    cells: list[int],
    model: GridSensorModel,
    rng: np.random.Generator,
) -> list[CellReturn]:
    """Binary return per interrogated cell, hit with detection_prob(T)."""
    if len(cells) > model.m_cells:
        raise ValueError(f"{len(cells)} cells requested but m_cells = {model.m_cells}")
    for c in cells:
        if not 0 <= c < model.n_cells:
            raise ValueError(f"cell index {c} out of range [0, {model.n_cells})")
    counts = count_occupancy(true_states, cells, model)
    returns = []
    for c, t in zip(cells, counts):
        hit = rng.random() < detection_prob(t, model.p_d, model.snr)
        returns.append(CellReturn(int(c), int(hit)))
    return returns


def select_cells(
    strategy: str,
    model: GridSensorModel,
    rng: np.random.Generator,
    step: int = 0,
    fixed: list[int] | None = None,
) -> list[int]:
    """Pick up to m_cells distinct cell indices to interrogate.

    random: uniform without replacement.  round_robin: deterministic
    sweep of m_cells consecutive indices advancing with the step counter.
    fixed_list: the caller-provided indices, unchanged.
    """
    m = min(model.m_cells, model.n_cells)
    if strategy == "random":
        return [int(i) for i in rng.choice(model.n_cells, size=m, replace=False)]
    if strategy == "round_robin":
        start = (step * m) % model.n_cells
        return [(start + i) % model.n_cells for i in range(m)]
    if strategy == "fixed_list":
        if fixed is None:
            raise ValueError("fixed_list strategy requires a cell list")
        return list(fixed)
    raise ValueError(f"unknown cell-selection strategy {strategy!r}")
