"""Readers and writers for scene, config, measurement, alpha, profile and beampattern files.

Floats are written with ``repr`` so every file round-trips exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .channel import AlphaVector, Beampattern, RisConfig
from .fitter import ChannelSample, FitReport
from .geometry import SceneGeometry, SurfaceLayout
from .optimizer import ConfigFamily, FamilyKind
from .synthlab import AlphaProfile

SCENE_KEYS = (
    "rows", "cols", "pitch_x_m", "pitch_y_m",
    "tx_distance_m", "tx_elevation_deg", "rx_distance_m", "frequency_hz",
)
MEASUREMENT_HEADER = ["config_id", "nu_deg", "re", "im"]
BEAMPATTERN_HEADER = ["nu_deg", "mag_db", "mode"]
BEAMPATTERN_MODES = ("simulated", "adapted", "measured")


class DataError(ValueError):
    """Malformed or inconsistent input file."""


# -- bit vectors ------------------------------------------------------------

def states_to_hex(states) -> str:
    """Row-major bits, first element is the most significant bit.

    Trailing zero bits pad the vector to a whole number of hex digits.
    """
    bits = np.asarray(states, dtype=bool)
    n_digits = -(-bits.size // 4)
    padded = np.zeros(n_digits * 4, dtype=bool)
    padded[: bits.size] = bits
    nibbles = padded.reshape(-1, 4) @ np.array([8, 4, 2, 1])
    return "".join(f"{v:x}" for v in nibbles)


def hex_to_states(text: str, n_elements: int) -> np.ndarray:
    if len(text) != -(-n_elements // 4):
        raise DataError(f"state string has {len(text)} hex digits, expected {-(-n_elements // 4)}")
    try:
        nibbles = np.array([int(ch, 16) for ch in text])
    except ValueError as exc:
        raise DataError(f"bad hex state string {text!r}") from exc
    bits = ((nibbles[:, None] >> np.array([3, 2, 1, 0])) & 1).astype(bool).reshape(-1)
    if bits[n_elements:].any():
        raise DataError("non-zero padding bits in state string")
    return bits[:n_elements]


# -- scene ------------------------------------------------------------------

def scene_to_dict(scene: SceneGeometry) -> dict:
    lay = scene.layout
    return {
        "rows": lay.rows,
        "cols": lay.cols,
        "pitch_x_m": lay.pitch_x,
        "pitch_y_m": lay.pitch_y,
        "tx_distance_m": scene.tx_distance,
        "tx_elevation_deg": scene.tx_elevation_deg,
        "rx_distance_m": scene.rx_distance,
        "frequency_hz": scene.frequency_hz,
    }


def scene_from_dict(data: dict) -> SceneGeometry:
    unknown = set(data) - set(SCENE_KEYS)
    if unknown:
        raise DataError(f"unknown scene keys: {sorted(unknown)}")
    base = scene_to_dict(SceneGeometry())
    base.update(data)
    try:
        layout = SurfaceLayout(int(base["rows"]), int(base["cols"]), float(base["pitch_x_m"]), float(base["pitch_y_m"]))
        return SceneGeometry(
            layout=layout,
            tx_distance=float(base["tx_distance_m"]),
            tx_elevation_deg=float(base["tx_elevation_deg"]),
            rx_distance=float(base["rx_distance_m"]),
            frequency_hz=float(base["frequency_hz"]),
        )
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid scene: {exc}") from exc


def save_scene(scene: SceneGeometry, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise DataError(f"missing file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from exc


def load_scene(path) -> SceneGeometry:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise DataError(f"{path}: scene must be a JSON object")
    return scene_from_dict(data)


# -- configs (JSON lines, one record per config) ---------------------------

def save_configs(families, path) -> int:
    """Write every config of every family; returns the record count."""
    n = 0
    with open(path, "w") as fh:
        for fam in families:
            base_hex = None if fam.baseline is None else states_to_hex(fam.baseline.states)
            for pos, cfg in enumerate(fam.configs):
                rec = {
                    "id": cfg.id,
                    "kind": fam.kind.value,
                    "target_deg": fam.target_deg,
                    "c_t_rad": None if fam.offsets is None else float(fam.offsets[pos]),
                    "duplicate": bool(fam.duplicate[pos]),
                    "predicted": [fam.predicted[pos].real, fam.predicted[pos].imag],
                    "states": states_to_hex(cfg.states),
                }
                if base_hex is not None:
                    rec["baseline"] = base_hex
                    rec["eval_nu_deg"] = fam.eval_nu_deg
                fh.write(json.dumps(rec) + "\n")
                n += 1
    return n


def load_configs(path, n_elements: int) -> list:
    """Rebuild families, grouping records by (kind, target) in file order."""
    groups: dict = {}
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError as exc:
        raise DataError(f"missing file: {path}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            key = (FamilyKind(rec["kind"]), rec.get("target_deg"))
            states = hex_to_states(rec["states"], n_elements)
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        groups.setdefault(key, []).append((rec, states))

    fams = []
    for (kind, target), recs in groups.items():
        first = recs[0][0]
        baseline = None
        if "baseline" in first:
            baseline = RisConfig(hex_to_states(first["baseline"], n_elements), id="baseline")
        fams.append(ConfigFamily(
            kind=kind,
            configs=[RisConfig(st, id=r["id"]) for r, st in recs],
            predicted=[complex(*r["predicted"]) for r, _ in recs],
            target_deg=target,
            offsets=None if first.get("c_t_rad") is None else [r["c_t_rad"] for r, _ in recs],
            duplicate=np.array([r.get("duplicate", False) for r, _ in recs]),
            baseline=baseline,
            eval_nu_deg=first.get("eval_nu_deg"),
        ))
    return fams


# -- measurements -----------------------------------------------------------

def save_measurements(samples, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MEASUREMENT_HEADER)
        for s in samples:
            w.writerow([s.config_id, repr(float(s.nu_deg)), repr(s.value.real), repr(s.value.imag)])


def load_measurements(path) -> list:
    try:
        fh = open(path, newline="")
    except FileNotFoundError as exc:
        raise DataError(f"missing file: {path}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MEASUREMENT_HEADER:
            raise DataError(f"{path}: expected header {','.join(MEASUREMENT_HEADER)}")
        out = []
        for lineno, row in enumerate(reader, 2):
            try:
                out.append(ChannelSample(row["config_id"], float(row["nu_deg"]), complex(float(row["re"]), float(row["im"]))))
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


# -- alpha fits -------------------------------------------------------------

def save_alpha(reports, path, policy: str | None = None) -> None:
    fits = []
    for nu in sorted(reports):
        rep: FitReport = reports[nu]
        fits.append({
            "nu_deg": float(nu),
            "alpha": [{"re": a.real, "im": a.imag} for a in rep.alpha.alpha],
            "residual_norm": rep.residual_norm,
            "condition_estimate": rep.condition_estimate,
            "violations": [int(v) for v in rep.magnitude_violations],
            "rows_used": rep.rows_used,
            "ridge": rep.ridge,
        })
    Path(path).write_text(json.dumps({"policy": policy, "fits": fits}, indent=1) + "\n")


def load_alpha(path) -> dict:
    """{nu_deg: FitReport} from an alpha JSON file."""
    data = _read_json(path)
    try:
        out = {}
        for fit in data["fits"]:
            alpha = np.array([complex(a["re"], a["im"]) for a in fit["alpha"]])
            av = AlphaVector(float(fit["nu_deg"]), alpha)
            out[av.nu_deg] = FitReport(
                alpha=av,
                residual_norm=float(fit["residual_norm"]),
                condition_estimate=float(fit["condition_estimate"]),
                magnitude_violations=np.array(fit["violations"], dtype=int),
                rows_used=int(fit["rows_used"]),
                ridge=float(fit.get("ridge", 0.0)),
            )
        return out
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed alpha file ({exc})") from exc


# -- profile ----------------------------------------------------------------

def profile_to_dict(profile: AlphaProfile) -> dict:
    return {
        "peak_db": profile.peak_db,
        "edge_db": profile.edge_db,
        "edge_deg": profile.edge_deg,
        "slope_min_rad_per_deg": profile.slope_min_rad_per_deg,
        "slope_max_rad_per_deg": profile.slope_max_rad_per_deg,
        "phase_offsets": None if profile.phase_offsets is None else list(profile.phase_offsets),
        "magnitude_shape": profile.magnitude_shape,
        "column_slopes": None if profile.column_slopes is None else list(profile.column_slopes),
    }


def save_profile(profile: AlphaProfile, path) -> None:
    Path(path).write_text(json.dumps(profile_to_dict(profile), indent=2) + "\n")


def load_profile(path) -> AlphaProfile:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise DataError(f"{path}: profile must be a JSON object")
    for key in ("phase_offsets", "column_slopes"):
        if data.get(key) is not None:
            data[key] = tuple(float(v) for v in data[key])
    try:
        return AlphaProfile(**data)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid profile ({exc})") from exc


# -- beampatterns -----------------------------------------------------------

def save_beampatterns(patterns, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BEAMPATTERN_HEADER)
        for bp in patterns:
            for nu, mag in zip(bp.nu_deg, bp.mag_db):
                w.writerow([repr(float(nu)), repr(float(mag)), bp.mode])


def load_beampatterns(path) -> dict:
    """{mode: Beampattern} from a beampattern CSV."""
    try:
        fh = open(path, newline="")
    except FileNotFoundError as exc:
        raise DataError(f"missing file: {path}") from exc
    cols: dict = {}
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != BEAMPATTERN_HEADER:
            raise DataError(f"{path}: expected header {','.join(BEAMPATTERN_HEADER)}")
        for lineno, row in enumerate(reader, 2):
            mode = row["mode"]
            if mode not in BEAMPATTERN_MODES:
                raise DataError(f"{path}:{lineno}: unknown mode {mode!r}")
            try:
                cols.setdefault(mode, []).append((float(row["nu_deg"]), float(row["mag_db"])))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return {
        mode: Beampattern(np.array([v[0] for v in vals]), np.array([v[1] for v in vals]), mode=mode)
        for mode, vals in cols.items()
    }
