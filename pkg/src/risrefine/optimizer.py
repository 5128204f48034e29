"""Binary configuration families for beam steering and coefficient fitting.

Four families are produced:

* ``offset_sweep``: for each of T common receiver phases C_t, every element
  gets the continuous phase that makes its path arrive with phase C_t, then
  that phase is rounded to the nearest binary state.
* ``offset_sweep_tiled``: the same, with 2x2 tiles driven as one element
  from the tile-center geometry.
* ``single_element``: toggle one element at a time from a baseline.
* ``single_element_tiled``: toggle one 2x2 tile at a time from a baseline.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    TWO_PI,
    RisConfig,
    cascaded_channel,
    quantize_phase,
    state_response,
    wrap_phase,
)
from .geometry import SceneGeometry, SurfaceLayout, element_positions, point_distances

DEFAULT_OFFSETS = 360


class FamilyKind(str, enum.Enum):
    OFFSET_SWEEP = "offset_sweep"
    OFFSET_SWEEP_TILED = "offset_sweep_tiled"
    SINGLE = "single_element"
    SINGLE_TILED = "single_element_tiled"

    @property
    def is_sweep(self) -> bool:
        return self in (FamilyKind.OFFSET_SWEEP, FamilyKind.OFFSET_SWEEP_TILED)


@dataclass(eq=False)
class ConfigFamily:
    """Configurations of one kind plus their baseline-model predictions.

    ``predicted`` holds the model h_eff of each config, evaluated at
    ``target_deg`` for sweeps and at ``eval_nu_deg`` for single-element
    families. ``duplicate`` flags configs that repeat an earlier bit vector
    of the same family (neighbouring offsets can quantize identically).
    """

    kind: FamilyKind
    configs: list
    predicted: np.ndarray
    target_deg: float | None = None
    offsets: np.ndarray | None = None
    duplicate: np.ndarray | None = None
    baseline: RisConfig | None = None
    eval_nu_deg: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = FamilyKind(self.kind)
        self.predicted = np.asarray(self.predicted, dtype=complex).reshape(-1)
        if len(self.configs) != self.predicted.size:
            raise ValueError("configs and predicted differ in length")
        if self.duplicate is None:
            self.duplicate = _flag_duplicates(self.configs)
        if self.offsets is not None:
            self.offsets = np.asarray(self.offsets, dtype=float)

    def __len__(self):
        return len(self.configs)

    def __iter__(self):
        return iter(self.configs)

    @property
    def state_matrix(self) -> np.ndarray:
        return np.array([c.states for c in self.configs], dtype=bool)


def _flag_duplicates(configs) -> np.ndarray:
    seen = set()
    flags = np.zeros(len(configs), dtype=bool)
    for k, cfg in enumerate(configs):
        key = np.packbits(cfg.states).tobytes()
        flags[k] = key in seen
        seen.add(key)
    return flags


def phase_offsets(n_offsets: int = DEFAULT_OFFSETS) -> np.ndarray:
    """{0, 2pi/T, ..., 2pi - 2pi/T}."""
    return np.arange(n_offsets) * (TWO_PI / n_offsets)


def _fmt_angle(nu: float) -> str:
    return f"{nu:g}"


def path_phase(scene: SceneGeometry, nu_opt: float, points=None) -> np.ndarray:
    """2 pi (d_h + d_g) / lambda for each element (or each given point)."""
    if points is None:
        points = element_positions(scene.layout)
    d_h, d_g = point_distances(scene, points, nu_opt)
    return TWO_PI / scene.wavelength_m * (d_h + d_g)


def optimal_phase(scene: SceneGeometry, nu_opt: float, m, c_t: float):
    """Continuous phase of element ``m`` (1-based) aligning its path to C_t.

    Returns (C_t - path_phase) wrapped to [0, 2 pi).
    """
    phi = path_phase(scene, nu_opt)[np.asarray(m) - 1]
    out = wrap_phase(c_t - phi)
    return float(out) if np.ndim(out) == 0 else out


def tiles(layout: SurfaceLayout) -> np.ndarray:
    """0-based member indices of each 2x2 tile, shape (M/4, 4), row-major tiles."""
    if layout.rows % 2 or layout.cols % 2:
        raise ValueError(f"{layout.rows}x{layout.cols} layout cannot be split into 2x2 tiles")
    out = []
    for tr in range(layout.rows // 2):
        for tc in range(layout.cols // 2):
            r, c = 2 * tr, 2 * tc
            out.append([
                r * layout.cols + c,
                r * layout.cols + c + 1,
                (r + 1) * layout.cols + c,
                (r + 1) * layout.cols + c + 1,
            ])
    return np.array(out, dtype=int)


def _predict(casc_values: np.ndarray, states: np.ndarray) -> np.ndarray:
    return (state_response(states) * casc_values).sum(axis=1)


def offset_sweep(
    scene: SceneGeometry,
    nu_opt: float,
    n_offsets: int = DEFAULT_OFFSETS,
    tiled: bool = False,
) -> ConfigFamily:
    """Quantized optimal configurations for every phase offset C_t.

    Rows are ordered by C_t. Identical bit vectors from neighbouring offsets
    are kept and flagged in ``duplicate``.
    """
    c_t = phase_offsets(n_offsets)
    if tiled:
        groups = tiles(scene.layout)
        centers = element_positions(scene.layout)[groups].mean(axis=1)
        phi = path_phase(scene, nu_opt, centers)
    else:
        phi = path_phase(scene, nu_opt)
    bits = quantize_phase(c_t[:, None] - phi[None, :]) == np.pi
    if tiled:
        states = np.zeros((n_offsets, scene.n_elements), dtype=bool)
        for k, members in enumerate(groups):
            states[:, members] = bits[:, k : k + 1]
    else:
        states = bits

    kind = FamilyKind.OFFSET_SWEEP_TILED if tiled else FamilyKind.OFFSET_SWEEP
    prefix = "sweep_tiled" if tiled else "sweep"
    configs = [
        RisConfig(states[t], id=f"{prefix}@{_fmt_angle(nu_opt)}:{t:03d}") for t in range(n_offsets)
    ]
    casc = cascaded_channel(scene, nu_opt)
    return ConfigFamily(
        kind=kind,
        configs=configs,
        predicted=_predict(casc.values, states),
        target_deg=float(nu_opt),
        offsets=c_t,
    )


def best_offset(family: ConfigFamily):
    """(C_t, config) with the largest predicted |h_eff|; ties go to the smaller C_t."""
    if not family.kind.is_sweep:
        raise ValueError(f"best_offset needs an offset sweep, got {family.kind.value}")
    if len(family) == 0:
        raise ValueError("empty family")
    k = int(np.argmax(np.abs(family.predicted)))  # first maximum = smallest C_t
    return float(family.offsets[k]), family.configs[k]


def _baseline(baseline, n: int) -> RisConfig:
    if baseline is None:
        return RisConfig.uniform(n, False, id="baseline")
    if len(baseline) != n:
        raise ValueError(f"baseline has {len(baseline)} elements, scene has {n}")
    return baseline


def single_element_family(
    scene: SceneGeometry,
    baseline: RisConfig | None = None,
    nu_deg: float = 0.0,
) -> ConfigFamily:
    """M configs, config i toggling only element i relative to ``baseline``.

    The default baseline is all elements in the phase-0 state.
    """
    base = _baseline(baseline, scene.n_elements)
    states = np.tile(base.states, (scene.n_elements, 1))
    idx = np.arange(scene.n_elements)
    states[idx, idx] = ~states[idx, idx]
    configs = [RisConfig(states[i], id=f"single:{i + 1:04d}") for i in idx]
    casc = cascaded_channel(scene, nu_deg)
    return ConfigFamily(
        kind=FamilyKind.SINGLE,
        configs=configs,
        predicted=_predict(casc.values, states),
        baseline=base,
        eval_nu_deg=float(nu_deg),
        meta={"baseline": "all-off" if not base.states.any() else "custom"},
    )


def tiled_family(source, scene: SceneGeometry, nu_deg: float = 0.0) -> ConfigFamily:
    """2x2-tiled variant of a baseline (single-tile toggles) or of an offset sweep.

    For an offset sweep the tile phase is the quantized optimal phase at the
    tile center, applied to all four members.
    """
    if isinstance(source, ConfigFamily):
        if source.kind is FamilyKind.OFFSET_SWEEP:
            return offset_sweep(scene, source.target_deg, n_offsets=len(source), tiled=True)
        if source.kind is FamilyKind.SINGLE:
            return tiled_family(source.baseline, scene, nu_deg=source.eval_nu_deg or 0.0)
        raise ValueError(f"cannot tile a {source.kind.value} family")

    base = _baseline(source, scene.n_elements)
    groups = tiles(scene.layout)
    states = np.tile(base.states, (len(groups), 1))
    for k, members in enumerate(groups):
        states[k, members] = ~states[k, members]
    configs = [RisConfig(states[k], id=f"single_tiled:{k + 1:03d}") for k in range(len(groups))]
    casc = cascaded_channel(scene, nu_deg)
    return ConfigFamily(
        kind=FamilyKind.SINGLE_TILED,
        configs=configs,
        predicted=_predict(casc.values, states),
        baseline=base,
        eval_nu_deg=float(nu_deg),
        meta={"baseline": "all-off" if not base.states.any() else "custom"},
    )


def standard_families(
    scene: SceneGeometry,
    targets=(),
    single: bool = True,
    tiled: bool = True,
    n_offsets: int = DEFAULT_OFFSETS,
) -> list:
    """Single/tiled families plus an offset sweep (and tiled sweep) per target."""
    fams = []
    if single:
        fams.append(single_element_family(scene))
        if tiled:
            fams.append(tiled_family(None, scene))
    for nu in sorted(targets):
        fams.append(offset_sweep(scene, nu, n_offsets))
        if tiled:
            fams.append(offset_sweep(scene, nu, n_offsets, tiled=True))
    return fams
