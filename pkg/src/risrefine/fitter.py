"""Least-squares identification of per-element reflect coefficients.

Each measurement y_t of configuration t at receiver angle nu gives one row
of the complex system H alpha = y with H[t, m] = casc_m * theta_{m,t}.
Rows from several configuration families are stacked and alpha(nu) is the
complex least-squares solution (conjugate transpose, not plain transpose).
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import AlphaVector, CascadedChannel, cascaded_channel, state_response
from .geometry import SceneGeometry
from .optimizer import ConfigFamily, FamilyKind

logger = logging.getLogger(__name__)

NU_TOL = 1e-9
DEFAULT_COND_THRESHOLD = 1e12
RIDGE_SCALE = 1e-10

POLICIES = {
    "single_only": (FamilyKind.SINGLE,),
    "single_plus_tiled": (FamilyKind.SINGLE, FamilyKind.SINGLE_TILED),
    "full_stack": tuple(FamilyKind),
}
POLICY_ALIASES = {"single": "single_only", "single_tiled": "single_plus_tiled", "full": "full_stack"}


class FitError(RuntimeError):
    """The system cannot be solved as requested."""


class UnderdeterminedError(FitError):
    pass


class SingularSystemError(FitError):
    pass


@dataclass(frozen=True)
class ChannelSample:
    config_id: str
    nu_deg: float
    value: complex

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"non-finite sample for {self.config_id} at {self.nu_deg} deg")


class RowMeta(NamedTuple):
    kind: FamilyKind
    config_id: str
    target_deg: float | None
    offset: float | None  # C_t for sweeps, None otherwise


@dataclass(eq=False)
class LinearSystem:
    rows: np.ndarray
    rhs: np.ndarray
    row_meta: list
    nu_deg: float

    @property
    def shape(self):
        return self.rows.shape


@dataclass(eq=False)
class FitReport:
    alpha: AlphaVector
    residual_norm: float
    condition_estimate: float
    magnitude_violations: np.ndarray
    rows_used: int
    ridge: float = 0.0


def resolve_policy(policy: str) -> str:
    policy = POLICY_ALIASES.get(policy, policy)
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose from {sorted(POLICIES)}")
    return policy


def _family_order(fam: ConfigFamily):
    rank = {
        FamilyKind.SINGLE: (0, 0.0, 0),
        FamilyKind.SINGLE_TILED: (1, 0.0, 0),
        FamilyKind.OFFSET_SWEEP: (2, fam.target_deg or 0.0, 0),
        FamilyKind.OFFSET_SWEEP_TILED: (2, fam.target_deg or 0.0, 1),
    }
    return rank[fam.kind]


def config_index(families: Sequence[ConfigFamily]) -> dict:
    """config_id -> (family, position within family)."""
    index = {}
    for fam in families:
        for pos, cfg in enumerate(fam.configs):
            if cfg.id in index:
                raise ValueError(f"duplicate config id {cfg.id!r}")
            index[cfg.id] = (fam, pos)
    return index


def build_system(
    families: Sequence[ConfigFamily],
    samples: Sequence[ChannelSample],
    nu_deg: float,
    casc: CascadedChannel,
    dedup: bool = True,
) -> LinearSystem:
    """Stack one row per sample of a known config.

    Row order: single, single_tiled, then per target angle (ascending) the
    offset sweep followed by its tiled sweep; inside a family by config
    position, then by sample order. With ``dedup`` samples of configs
    flagged as duplicates in their family are dropped.
    """
    index = config_index(families)
    fam_rank = {id(f): (_family_order(f), k) for k, f in enumerate(families)}
    keyed = []
    for order, s in enumerate(samples):
        if s.config_id not in index:
            raise KeyError(f"unknown config id {s.config_id!r}")
        if abs(s.nu_deg - nu_deg) > NU_TOL:
            raise ValueError(f"sample {s.config_id!r} is at {s.nu_deg} deg, system is at {nu_deg} deg")
        fam, pos = index[s.config_id]
        if dedup and fam.duplicate[pos]:
            continue
        keyed.append((fam_rank[id(fam)], pos, order, fam, s))
    if not keyed:
        raise ValueError("no rows in system")
    keyed.sort(key=lambda k: k[:3])

    states = np.array([fam.configs[pos].states for _, pos, _, fam, _ in keyed])
    rows = state_response(states) * casc.values[None, :]
    rhs = np.array([s.value for *_, s in keyed], dtype=complex)
    meta = [
        RowMeta(
            fam.kind,
            s.config_id,
            fam.target_deg,
            None if fam.offsets is None else float(fam.offsets[pos]),
        )
        for _, pos, _, fam, s in keyed
    ]
    return LinearSystem(rows=rows, rhs=rhs, row_meta=meta, nu_deg=float(nu_deg))


def solve_alpha(
    system: LinearSystem,
    ridge: float | None = None,
    cond_threshold: float = DEFAULT_COND_THRESHOLD,
) -> FitReport:
    """Complex least-squares alpha minimizing ||H alpha - y||.

    Solved through the thin SVD of H. ``ridge=None`` turns on a Tikhonov
    term eps = 1e-10 trace(H^H H) / M only when the condition number exceeds
    ``cond_threshold``; ``ridge=0`` forbids it (ill-conditioned systems then
    raise SingularSystemError); a positive value is always applied.
    """
    H, y = system.rows, system.rhs
    n, m = H.shape
    if n < m:
        raise UnderdeterminedError(f"{n} rows for {m} unknowns at {system.nu_deg} deg")
    u, s, vh = np.linalg.svd(H, full_matrices=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")

    eps = 0.0
    if ridge is None:
        if cond > cond_threshold:
            eps = RIDGE_SCALE * float(np.sum(s**2)) / m
            logger.warning("condition %.3g at %g deg, ridge %.3g enabled", cond, system.nu_deg, eps)
    elif ridge == 0.0:
        if cond > cond_threshold:
            raise SingularSystemError(f"condition {cond:.3g} at {system.nu_deg} deg and ridge disabled")
    elif ridge > 0:
        eps = float(ridge)
    else:
        raise ValueError("ridge must be non-negative")

    if s[0] == 0:
        raise SingularSystemError("all-zero system matrix")
    gain = s / (s**2 + eps) if eps > 0 else 1.0 / s
    alpha = vh.conj().T @ (gain * (u.conj().T @ y))

    av = AlphaVector(system.nu_deg, alpha)
    return FitReport(
        alpha=av,
        residual_norm=float(np.linalg.norm(H @ alpha - y)),
        condition_estimate=cond,
        magnitude_violations=av.magnitude_violations(),
        rows_used=n,
        ridge=eps,
    )


def residual_spectrum(system: LinearSystem, alpha) -> np.ndarray:
    """|H_t alpha - y_t| per row, in ``system.row_meta`` order."""
    a = alpha.alpha if isinstance(alpha, AlphaVector) else np.asarray(alpha, dtype=complex)
    if a.size != system.rows.shape[1]:
        raise ValueError(f"alpha has {a.size} entries, system has {system.rows.shape[1]} columns")
    return np.abs(system.rows @ a - system.rhs)


def select_families(families: Sequence[ConfigFamily], policy: str) -> list:
    kinds = POLICIES[resolve_policy(policy)]
    return [f for f in families if f.kind in kinds]


def group_by_angle(samples: Sequence[ChannelSample]) -> dict:
    """Bucket samples by receiver angle (exact float keys)."""
    out = {}
    for s in samples:
        out.setdefault(float(s.nu_deg), []).append(s)
    return out


def fit_per_angle(
    families: Sequence[ConfigFamily],
    samples_by_nu: Mapping[float, Sequence[ChannelSample]],
    scene: SceneGeometry,
    policy: str = "single_plus_tiled",
    dedup: bool = True,
    on_error: str = "raise",
    **solve_kwargs,
) -> dict:
    """Independent fit per receiver angle; returns {nu_deg: FitReport}.

    Samples of configs outside the policy's families are ignored. With
    ``on_error="skip"`` a failing bucket is logged and left out while the
    others are still fitted.
    """
    if on_error not in ("raise", "skip"):
        raise ValueError("on_error must be 'raise' or 'skip'")
    known = config_index(families)
    chosen = select_families(families, policy)
    chosen_ids = set(config_index(chosen))

    reports = {}
    for nu in sorted(samples_by_nu):
        bucket = samples_by_nu[nu]
        try:
            unknown = [s.config_id for s in bucket if s.config_id not in known]
            if unknown:
                raise KeyError(f"unknown config id {unknown[0]!r}")
            used = [s for s in bucket if s.config_id in chosen_ids]
            if not used:
                raise FitError(f"no usable samples at {nu} deg")
            system = build_system(chosen, used, nu, cascaded_channel(scene, nu), dedup=dedup)
            reports[nu] = solve_alpha(system, **solve_kwargs)
        except (FitError, KeyError, ValueError) as exc:
            if on_error == "raise":
                raise
            logger.warning("skipping %g deg: %s", nu, exc)
    return reports
