"""Ground-truth coefficient profiles and synthetic measurement sets.

The default profile follows the observed behaviour of the prototype: a
magnitude curve shared by all elements with -7 dB at broadside and -21.5 dB
at 65 degrees, and a per-column phase slope that grows from 0.01 rad/deg at
the outer columns to 0.285 rad/deg next to the rotation axis, negative on
the left half and positive on the right half.
"""

from __future__ import annotations

import hashlib
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .channel import AlphaVector, cascaded_channel, state_response
from .fitter import ChannelSample, config_index
from .geometry import SceneGeometry, SurfaceLayout

MAGNITUDE_SHAPES = ("quadratic", "cosine")


@dataclass(frozen=True)
class AlphaProfile:
    peak_db: float = -7.0
    edge_db: float = -21.5
    edge_deg: float = 65.0
    slope_min_rad_per_deg: float = 0.01
    slope_max_rad_per_deg: float = 0.285
    phase_offsets: tuple | None = None  # radians per element; None -> zeros
    magnitude_shape: str = "quadratic"
    # signed per-column slopes overriding the linear interpolation law
    column_slopes: tuple | None = None

    def __post_init__(self):
        if not self.peak_db > self.edge_db:
            raise ValueError("peak_db must exceed edge_db")
        if self.peak_db > 0:
            raise ValueError("peak_db above 0 dB would give |alpha| > 1")
        if not (self.slope_min_rad_per_deg > 0 and self.slope_max_rad_per_deg > 0):
            raise ValueError("phase slopes must be positive")
        if not 0 < self.edge_deg <= 90:
            raise ValueError("edge_deg must lie in (0, 90]")
        if self.magnitude_shape not in MAGNITUDE_SHAPES:
            raise ValueError(f"magnitude_shape must be one of {MAGNITUDE_SHAPES}")

    def magnitude_db(self, nu_deg):
        nu = np.asarray(nu_deg, dtype=float)
        drop = self.peak_db - self.edge_db
        if self.magnitude_shape == "quadratic":
            frac = (nu / self.edge_deg) ** 2
        else:
            frac = (1 - np.cos(np.deg2rad(nu))) / (1 - np.cos(np.deg2rad(self.edge_deg)))
        return self.peak_db - drop * frac


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float | None = None
    seed: int = 0


def column_slopes(profile: AlphaProfile, cols: int) -> np.ndarray:
    """Signed phase slope (rad/deg) for each column 1..cols.

    Magnitude rises linearly in column index from the outer edge to the
    column next to the central axis; the left half is negative, the right
    half positive. An odd center column gets zero slope.
    """
    if profile.column_slopes is not None:
        s = np.asarray(profile.column_slopes, dtype=float)
        if s.size != cols:
            raise ValueError(f"column_slopes has {s.size} entries, layout has {cols} columns")
        return s
    col = np.arange(1, cols + 1)
    dist = np.minimum(col, cols + 1 - col)  # 1 at the edges
    half = cols // 2
    if half <= 1:
        frac = np.ones(cols)
    else:
        frac = (dist - 1) / (half - 1)
    mag = profile.slope_min_rad_per_deg + (
        profile.slope_max_rad_per_deg - profile.slope_min_rad_per_deg
    ) * frac
    sign = np.where(col <= cols / 2, -1.0, 1.0)
    if cols % 2:
        sign[cols // 2] = 0.0
    return sign * mag


def element_slopes(profile: AlphaProfile, layout: SurfaceLayout) -> np.ndarray:
    return np.tile(column_slopes(profile, layout.cols), layout.rows)


def alpha_ground_truth(
    profile: AlphaProfile, nu_deg: float, layout: SurfaceLayout | None = None
) -> AlphaVector:
    if abs(nu_deg) > 90:
        raise ValueError(f"|nu| must not exceed 90 degrees, got {nu_deg}")
    layout = layout or SurfaceLayout()
    mag = 10 ** (profile.magnitude_db(nu_deg) / 20)
    offsets = np.zeros(layout.n_elements) if profile.phase_offsets is None else np.asarray(profile.phase_offsets, dtype=float)
    if offsets.size != layout.n_elements:
        raise ValueError(f"phase_offsets has {offsets.size} entries, layout has {layout.n_elements}")
    phase = element_slopes(profile, layout) * nu_deg + offsets
    return AlphaVector(nu_deg, mag * np.exp(1j * phase))


def _sample_rng(seed: int, config_id: str, nu_deg: float) -> np.random.Generator:
    digest = hashlib.sha256(f"{config_id}|{float(nu_deg)!r}".encode()).digest()
    words = np.frombuffer(digest[:16], dtype=np.uint32).tolist()
    return np.random.default_rng(np.random.SeedSequence([seed, *words]))


def _truth(profile, nu: float, layout: SurfaceLayout):
    if profile is None:
        return np.ones(layout.n_elements, dtype=complex)
    if isinstance(profile, AlphaProfile):
        return alpha_ground_truth(profile, nu, layout).alpha
    if callable(profile):
        out = profile(nu)
        return out.alpha if isinstance(out, AlphaVector) else np.asarray(out, dtype=complex)
    raise TypeError(f"unsupported profile {profile!r}")


def synthesize_measurements(
    scene: SceneGeometry,
    families,
    profile: AlphaProfile | Callable | None,
    nu_list: Sequence[float],
    noise: NoiseSpec | None = None,
    config_ids: Sequence[str] | None = None,
) -> list:
    """Noise-free or noisy h_eff for every config (or ``config_ids``) at every angle.

    ``profile=None`` means alpha = 1. With ``noise.snr_db`` set, each sample
    gets circular complex Gaussian noise of power |y|^2 / 10^(snr/10); the
    noise stream of a sample depends only on (seed, config_id, nu).
    """
    noise = noise or NoiseSpec()
    configs = [c for fam in families for c in fam.configs]
    if config_ids is not None:
        index = config_index(families)
        configs = [index[cid][0].configs[index[cid][1]] for cid in config_ids]
    states = np.array([c.states for c in configs], dtype=bool)
    theta = state_response(states)

    out = []
    for nu in nu_list:
        nu = float(nu)
        casc = cascaded_channel(scene, nu).values
        # row-wise sum: same reduction order as effective_channel, independent of batch
        y = (theta * (casc * _truth(profile, nu, scene.layout))).sum(axis=1)
        for cfg, value in zip(configs, y):
            if noise.snr_db is not None:
                sigma = abs(value) * 10 ** (-noise.snr_db / 20)
                z = _sample_rng(noise.seed, cfg.id, nu).standard_normal(2)
                value = value + sigma * (z[0] + 1j * z[1]) / np.sqrt(2)
            out.append(ChannelSample(cfg.id, nu, complex(value)))
    return out


def apply_family_bias(samples, families, gains: Mapping) -> list:
    """Multiply samples of each family kind by a complex gain (bias injection)."""
    index = config_index(families)
    keyed = {getattr(k, "value", k): complex(g) for k, g in gains.items()}
    out = []
    for s in samples:
        fam = index[s.config_id][0]
        g = keyed.get(fam.kind.value, 1.0)
        out.append(ChannelSample(s.config_id, s.nu_deg, s.value * g))
    return out


@dataclass(eq=False)
class PhaseConsistencyReport:
    nu_deg: np.ndarray
    slopes: np.ndarray  # (rows, cols) rad/deg
    intercepts: np.ndarray  # (rows, cols) rad
    column_spread: np.ndarray  # (cols,) max - min slope within each column
    max_spread: float
    column_mean_slope: np.ndarray = field(default=None)


def phase_slopes(alpha_table, layout: SurfaceLayout):
    """Linear fit of unwrapped phase vs angle for every element.

    Angles must be dense enough that the phase moves by less than pi
    between neighbours, otherwise unwrapping aliases the slope.
    """
    table = sorted(alpha_table.values() if isinstance(alpha_table, Mapping) else alpha_table, key=lambda a: a.nu_deg)
    if len(table) < 3:
        raise ValueError("phase slope regression needs at least 3 angles")
    nu = np.array([a.nu_deg for a in table])
    phase = np.unwrap(np.angle(np.array([a.alpha for a in table])), axis=0)
    design = np.column_stack([nu, np.ones_like(nu)])
    coef, *_ = np.linalg.lstsq(design, phase, rcond=None)
    shape = (layout.rows, layout.cols)
    return nu, coef[0].reshape(shape), coef[1].reshape(shape)


def row_phase_consistency_check(alpha_table, layout: SurfaceLayout | None = None) -> PhaseConsistencyReport:
    """Per-column spread of fitted phase slopes across rows."""
    layout = layout or SurfaceLayout()
    nu, slopes, intercepts = phase_slopes(alpha_table, layout)
    spread = slopes.max(axis=0) - slopes.min(axis=0)
    return PhaseConsistencyReport(
        nu_deg=nu,
        slopes=slopes,
        intercepts=intercepts,
        column_spread=spread,
        max_spread=float(spread.max()),
        column_mean_slope=slopes.mean(axis=0),
    )
