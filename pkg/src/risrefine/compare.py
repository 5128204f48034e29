"""Measured vs. simulated vs. adapted beampattern comparison."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .channel import Beampattern, RisConfig, beampattern, rmse_db, to_db
from .geometry import SceneGeometry

logger = logging.getLogger(__name__)

MAIN_LOBE_HALF_WIDTH_DEG = 5.0


@dataclass
class ComparisonSummary:
    config_id: str
    target_deg: float | None
    n_points: int
    rmse_simulated_db: float
    rmse_adapted_db: float
    main_lobe_half_width_deg: float
    main_lobe_points: int
    main_lobe_rmse_simulated_db: float | None
    main_lobe_rmse_adapted_db: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def measured_pattern(samples, config_id: str) -> Beampattern:
    """Beampattern of one config assembled from measurement samples."""
    picked = sorted((s.nu_deg, s.value) for s in samples if s.config_id == config_id)
    if not picked:
        raise KeyError(f"no samples for config {config_id!r}")
    nu = np.array([p[0] for p in picked])
    mag = to_db(np.array([p[1] for p in picked]))
    return Beampattern(nu, mag, mode="measured", config_id=config_id)


def _alpha_grid_gap(alpha_table, grid) -> float:
    angles = np.array(sorted(alpha_table))
    return float(max(np.min(np.abs(angles - nu)) for nu in grid))


def model_patterns(scene: SceneGeometry, cfg: RisConfig, grid, alpha_table=None):
    """Simulated (and adapted, if a {nu: AlphaVector} table is given) patterns on ``grid``."""
    sim = beampattern(scene, cfg, grid)
    if alpha_table is None:
        return sim, None
    gap = _alpha_grid_gap(alpha_table, grid)
    if gap > 1e-9:
        logger.warning("alpha table does not cover the grid; nearest-angle resampling (max gap %.3g deg)", gap)
    return sim, beampattern(scene, cfg, grid, alpha_table)


def compare_patterns(
    measured: Beampattern,
    simulated: Beampattern,
    adapted: Beampattern,
    target_deg: float | None = None,
    half_width: float = MAIN_LOBE_HALF_WIDTH_DEG,
) -> ComparisonSummary:
    """RMSE (dB) of both models against the measurement, full grid and main lobe."""
    for other in (simulated, adapted):
        if not np.allclose(other.nu_deg, measured.nu_deg):
            raise ValueError("patterns are not on the measured grid")
    main = None
    if target_deg is not None:
        main = np.abs(measured.nu_deg - target_deg) <= half_width + 1e-9
        if not main.any():
            main = None
    return ComparisonSummary(
        config_id=measured.config_id or simulated.config_id,
        target_deg=target_deg,
        n_points=int(measured.nu_deg.size),
        rmse_simulated_db=rmse_db(simulated.mag_db, measured.mag_db),
        rmse_adapted_db=rmse_db(adapted.mag_db, measured.mag_db),
        main_lobe_half_width_deg=half_width,
        main_lobe_points=0 if main is None else int(main.sum()),
        main_lobe_rmse_simulated_db=None if main is None else rmse_db(simulated.mag_db[main], measured.mag_db[main]),
        main_lobe_rmse_adapted_db=None if main is None else rmse_db(adapted.mag_db[main], measured.mag_db[main]),
    )
