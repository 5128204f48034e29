"""Turntable scene: RIS element grid, co-rotating transmitter, fixed receiver.

All coordinates live in the RIS frame. The origin is the surface center,
x points right as seen from the front, y points up and z runs along the
surface normal toward the receiver at turntable angle 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact

DEFAULT_FREQUENCY_HZ = 5.53e9
DEFAULT_SURFACE_WIDTH_M = 0.360
DEFAULT_SURFACE_HEIGHT_M = 0.247


@dataclass(frozen=True)
class SurfaceLayout:
    """Rectangular grid of reflecting elements with row-major numbering."""

    rows: int = 16
    cols: int = 16
    pitch_x: float = DEFAULT_SURFACE_WIDTH_M / 16
    pitch_y: float = DEFAULT_SURFACE_HEIGHT_M / 16

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"layout needs at least one row and column, got {self.rows}x{self.cols}")
        if not (self.pitch_x > 0 and self.pitch_y > 0):
            raise ValueError("element pitch must be positive")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    def row_col(self, m):
        """1-based (row, col) of 1-based element index ``m``."""
        m = np.asarray(m)
        return (m - 1) // self.cols + 1, (m - 1) % self.cols + 1

    def index(self, row, col):
        """1-based element index of 1-based (row, col)."""
        return (np.asarray(row) - 1) * self.cols + np.asarray(col)

    def mirror_index(self, m):
        """Element mirrored across the central vertical axis (same row)."""
        row, col = self.row_col(m)
        return self.index(row, self.cols + 1 - col)

    @property
    def half_diagonal(self) -> float:
        return 0.5 * float(np.hypot((self.cols - 1) * self.pitch_x, (self.rows - 1) * self.pitch_y))


@dataclass(frozen=True)
class SceneGeometry:
    layout: SurfaceLayout = field(default_factory=SurfaceLayout)
    tx_distance: float = 1.96
    tx_elevation_deg: float = 30.6  # below the surface normal
    rx_distance: float = 7.472
    frequency_hz: float = DEFAULT_FREQUENCY_HZ

    def __post_init__(self):
        if not (self.tx_distance > 0 and self.rx_distance > 0):
            raise ValueError("tx_distance and rx_distance must be positive")
        if not self.frequency_hz > 0:
            raise ValueError("frequency_hz must be positive")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz

    @property
    def n_elements(self) -> int:
        return self.layout.n_elements


def _check_index(layout: SurfaceLayout, m) -> np.ndarray:
    m_arr = np.asarray(m)
    if not np.issubdtype(m_arr.dtype, np.integer):
        raise TypeError(f"element index must be an integer, got {m!r}")
    if np.any(m_arr < 1) or np.any(m_arr > layout.n_elements):
        raise IndexError(f"element index out of range [1, {layout.n_elements}]: {m!r}")
    return m_arr


def element_position(layout: SurfaceLayout, m) -> np.ndarray:
    """Center of element ``m`` (1-based, row-major from the top-left).

    Accepts a scalar index (returns shape (3,)) or an array of indices
    (returns shape (..., 3)).
    """
    m_arr = _check_index(layout, m)
    row, col = layout.row_col(m_arr)
    x = (col - (layout.cols + 1) / 2) * layout.pitch_x
    y = ((layout.rows + 1) / 2 - row) * layout.pitch_y
    return np.stack([x, y, np.zeros_like(x, dtype=float)], axis=-1).astype(float)


def element_positions(layout: SurfaceLayout) -> np.ndarray:
    """All element centers, shape (M, 3), row-major order."""
    return element_position(layout, np.arange(1, layout.n_elements + 1))


def rx_position(scene: SceneGeometry, nu_deg: float) -> np.ndarray:
    """Receiver position for turntable angle ``nu_deg``.

    Positive angles move the receiver toward +x, i.e. the right half of
    the surface seen from the front.
    """
    if not -90.0 < nu_deg < 90.0:
        raise ValueError(f"turntable angle must lie in (-90, 90) degrees, got {nu_deg}")
    nu = np.deg2rad(nu_deg)
    return np.array([scene.rx_distance * np.sin(nu), 0.0, scene.rx_distance * np.cos(nu)])


def tx_position(scene: SceneGeometry) -> np.ndarray:
    el = np.deg2rad(scene.tx_elevation_deg)
    return np.array([0.0, -scene.tx_distance * np.sin(el), scene.tx_distance * np.cos(el)])


def point_distances(scene: SceneGeometry, points: np.ndarray, nu_deg: float):
    """(d_h, d_g) from transmitter and receiver to arbitrary RIS-frame points."""
    points = np.asarray(points, dtype=float)
    d_h = np.linalg.norm(points - tx_position(scene), axis=-1)
    d_g = np.linalg.norm(points - rx_position(scene, nu_deg), axis=-1)
    return d_h, d_g


def distances(scene: SceneGeometry, nu_deg: float):
    """Per-element Tx and Rx distances, each of shape (M,)."""
    return point_distances(scene, element_positions(scene.layout), nu_deg)
