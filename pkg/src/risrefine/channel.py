"""Free-space cascaded channel, binary phase hardware model and effective channel."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .geometry import SPEED_OF_LIGHT, SceneGeometry, distances

TWO_PI = 2.0 * np.pi
# Reflect amplitude of an element in the pi state (-3 dB switching loss).
PI_STATE_AMPLITUDE = 0.5012


@dataclass(eq=False)
class RisConfig:
    """Binary phase state per element: False -> phase 0, True -> phase pi."""

    states: np.ndarray
    id: str = ""

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=bool).reshape(-1)

    def __len__(self):
        return self.states.size

    def __eq__(self, other):
        if not isinstance(other, RisConfig):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.states, other.states)

    @property
    def phases(self) -> np.ndarray:
        return np.where(self.states, np.pi, 0.0)

    @classmethod
    def uniform(cls, n_elements: int, state: bool = False, id: str = ""):
        return cls(np.full(n_elements, state, dtype=bool), id=id)


@dataclass(eq=False)
class CascadedChannel:
    values: np.ndarray
    nu_deg: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).reshape(-1)

    def __len__(self):
        return self.values.size


@dataclass(eq=False)
class AlphaVector:
    """Angle-dependent complex reflect coefficients at one receiver angle."""

    nu_deg: float
    alpha: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=complex).reshape(-1)

    def __len__(self):
        return self.alpha.size

    def magnitude_violations(self) -> np.ndarray:
        """1-based element indices where |alpha| exceeds one."""
        return np.flatnonzero(np.abs(self.alpha) > 1.0) + 1


@dataclass(eq=False)
class Beampattern:
    nu_deg: np.ndarray
    mag_db: np.ndarray
    mode: str = "simulated"
    config_id: str = ""
    extra: dict = field(default_factory=dict)


def wrap_phase(tau):
    """Wrap to [0, 2*pi)."""
    w = np.mod(tau, TWO_PI)
    # np.mod can round tiny negatives up to exactly 2*pi
    return np.where(w >= TWO_PI, 0.0, w)


def reflect_amplitude(tau):
    """Reflect amplitude of a (quantized) phase state: 0.5012 at pi, else 1."""
    tau = np.asarray(tau, dtype=float)
    out = np.where(tau == np.pi, PI_STATE_AMPLITUDE, 1.0)
    return float(out) if out.ndim == 0 else out


def quantize_phase(tau):
    """Round a continuous phase to the nearest binary state.

    The input is wrapped to [0, 2*pi) first. Returns pi on the half-open
    interval [pi/2, 3*pi/2) and 0 elsewhere, so pi/2 -> pi and 3*pi/2 -> 0.
    """
    w = wrap_phase(np.asarray(tau, dtype=float))
    out = np.where((w >= np.pi / 2) & (w < 3 * np.pi / 2), np.pi, 0.0)
    return float(out) if out.ndim == 0 else out


def state_response(states) -> np.ndarray:
    """Per-element reflection A(phi) e^{j phi} for boolean states.

    Exact values: 1 for phase 0 and -0.5012 for phase pi.
    """
    states = np.asarray(states, dtype=bool)
    return np.where(states, -PI_STATE_AMPLITUDE, 1.0).astype(complex)


def free_space_link(d, frequency_hz: float):
    """c / (4 pi f d) * exp(j 2 pi d / lambda) for each distance."""
    wavelength = SPEED_OF_LIGHT / frequency_hz
    d = np.asarray(d, dtype=float)
    return wavelength / (4 * np.pi * d) * np.exp(1j * TWO_PI * d / wavelength)


def cascaded_channel(scene: SceneGeometry, nu_deg: float) -> CascadedChannel:
    d_h, d_g = distances(scene, nu_deg)
    values = free_space_link(d_h, scene.frequency_hz) * free_space_link(d_g, scene.frequency_hz)
    return CascadedChannel(values, nu_deg=nu_deg)


def _alpha_values(alpha, n: int):
    if alpha is None:
        return None
    a = alpha.alpha if isinstance(alpha, AlphaVector) else np.asarray(alpha, dtype=complex)
    if a.size != n:
        raise ValueError(f"alpha has {a.size} entries, expected {n}")
    return a


def effective_channel(casc: CascadedChannel, cfg: RisConfig, alpha=None) -> complex:
    """Sum over elements of cascaded channel times element reflection.

    With ``alpha`` given, each element term is additionally scaled by its
    angle-dependent coefficient.
    """
    n = len(casc)
    if len(cfg) != n:
        raise ValueError(f"config has {len(cfg)} elements, channel has {n}")
    terms = casc.values * state_response(cfg.states)
    a = _alpha_values(alpha, n)
    if a is not None:
        terms = terms * a
    return complex(np.sum(terms))


def toggle_delta(casc: CascadedChannel, cfg: RisConfig, m: int, alpha=None) -> complex:
    """Change of h_eff when element ``m`` (1-based) flips its state."""
    i = m - 1
    a = _alpha_values(alpha, len(casc))
    a_i = 1.0 if a is None else a[i]
    before = state_response(cfg.states[i])
    after = state_response(not cfg.states[i])
    return complex(casc.values[i] * a_i * (after - before))


def to_db(value):
    return 20.0 * np.log10(np.abs(value))


def _nearest_alpha(alpha_table, nu: float) -> AlphaVector:
    if isinstance(alpha_table, Mapping):
        entries = list(alpha_table.values())
    else:
        entries = list(alpha_table)
    angles = np.array([a.nu_deg for a in entries])
    return entries[int(np.argmin(np.abs(angles - nu)))]


def beampattern(
    scene: SceneGeometry,
    cfg: RisConfig,
    nu_grid: Sequence[float],
    alpha_table=None,
) -> Beampattern:
    """20 log10 |h_eff| over receiver angles.

    Without ``alpha_table`` the result is the baseline ("simulated") model.
    With a table of AlphaVector (mapping or sequence) each grid point uses
    the entry at the nearest angle ("adapted").
    """
    grid = np.asarray(nu_grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("empty angle grid")
    if alpha_table is not None and len(alpha_table) == 0:
        raise ValueError("empty alpha table")
    mags = np.empty(grid.size)
    for k, nu in enumerate(grid):
        casc = cascaded_channel(scene, float(nu))
        alpha = None if alpha_table is None else _nearest_alpha(alpha_table, nu)
        mags[k] = to_db(effective_channel(casc, cfg, alpha))
    mode = "simulated" if alpha_table is None else "adapted"
    return Beampattern(grid, mags, mode=mode, config_id=cfg.id)


def rmse_db(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean((a - b) ** 2)))
