"""Command-line front-end.

Subcommands: gen-configs, synth-measure, fit-alpha, beampattern, compare,
pipeline. Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import io as rio
from .compare import compare_patterns, measured_pattern, model_patterns
from .fitter import POLICIES, FitError, config_index, fit_per_angle, group_by_angle, resolve_policy
from .geometry import SceneGeometry
from .optimizer import DEFAULT_OFFSETS, FamilyKind, best_offset, standard_families
from .synthlab import AlphaProfile, NoiseSpec, synthesize_measurements

logger = logging.getLogger("risrefine")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_GRID = "-80:80:1"
DEFAULT_TARGETS = "0,30,60"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_angles(text: str) -> list:
    """'0,30,60' or inclusive 'start:stop:step' (degrees)."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(round((stop - start) / step)) + 1
            return [round(start + k * step, 9) for k in range(n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad angle list {text!r}") from None


def _scene(args) -> SceneGeometry:
    return rio.load_scene(args.scene) if args.scene else SceneGeometry()


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# -- subcommands ------------------------------------------------------------

def cmd_gen_configs(args) -> int:
    if not (args.target or args.single):
        raise UsageError("nothing to generate: give --target and/or --single")
    scene = _scene(args)
    fams = standard_families(scene, args.target or (), single=args.single, tiled=args.tiled, n_offsets=args.offsets)
    n = rio.save_configs(fams, args.out)
    for fam in fams:
        extra = "" if fam.target_deg is None else f" target={fam.target_deg:g}"
        print(f"{fam.kind.value}{extra}: {len(fam)} configs ({int(fam.duplicate.sum())} duplicates)")
    print(f"wrote {n} records to {args.out}")
    return EXIT_OK


def cmd_synth_measure(args) -> int:
    scene = _scene(args)
    profile = rio.load_profile(args.profile) if args.profile else AlphaProfile()
    fams = rio.load_configs(args.configs, scene.n_elements)
    samples = synthesize_measurements(
        scene, fams, profile, parse_angles(args.nu), NoiseSpec(args.snr_db, args.seed),
        config_ids=args.config_id or None,
    )
    rio.save_measurements(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def cmd_fit_alpha(args) -> int:
    scene = _scene(args)
    fams = rio.load_configs(args.configs, scene.n_elements)
    samples = rio.load_measurements(args.measurements)
    policy = resolve_policy(args.policy)
    reports = fit_per_angle(fams, group_by_angle(samples), scene, policy=policy, dedup=not args.no_dedup)
    rio.save_alpha(reports, args.out, policy=policy)
    for nu, rep in reports.items():
        print(f"nu={nu:g}: rows={rep.rows_used} residual={rep.residual_norm:.3e} "
              f"cond={rep.condition_estimate:.3e} violations={len(rep.magnitude_violations)}")
    return EXIT_OK


def cmd_beampattern(args) -> int:
    scene = _scene(args)
    fams = rio.load_configs(args.configs, scene.n_elements)
    index = config_index(fams)
    if args.config_id not in index:
        raise KeyError(f"unknown config id {args.config_id!r}")
    fam, pos = index[args.config_id]
    cfg = fam.configs[pos]
    grid = parse_angles(args.nu)
    alpha = None
    if args.alpha:
        alpha = {nu: rep.alpha for nu, rep in rio.load_alpha(args.alpha).items()}
    sim, adapted = model_patterns(scene, cfg, grid, alpha)
    patterns = [sim] if adapted is None else [sim, adapted]
    if args.measurements:
        patterns.append(measured_pattern(rio.load_measurements(args.measurements), args.config_id))
    rio.save_beampatterns(patterns, args.out)
    print(f"wrote {', '.join(p.mode for p in patterns)} pattern(s) for {args.config_id} to {args.out}")
    return EXIT_OK


def run_compare(scene, families, config_id, measured, alpha_table, target=None):
    """Returns (patterns, summary) for one config."""
    index = config_index(families)
    if config_id not in index:
        raise KeyError(f"unknown config id {config_id!r}")
    fam, pos = index[config_id]
    sim, adapted = model_patterns(scene, fam.configs[pos], measured.nu_deg, alpha_table)
    measured.config_id = config_id
    if target is None:
        target = fam.target_deg
    return [sim, adapted, measured], compare_patterns(measured, sim, adapted, target)


def cmd_compare(args) -> int:
    scene = _scene(args)
    fams = rio.load_configs(args.configs, scene.n_elements)
    patterns = rio.load_beampatterns(args.measured)
    if "measured" not in patterns:
        raise rio.DataError(f"{args.measured} has no measured rows")
    alpha = {nu: rep.alpha for nu, rep in rio.load_alpha(args.alpha).items()}
    out_patterns, summary = run_compare(scene, fams, args.config_id, patterns["measured"], alpha, args.target)
    rio.save_beampatterns(out_patterns, args.out)
    summary_path = args.summary or str(Path(args.out).with_suffix(".summary.json"))
    _write_json(summary_path, summary.to_dict())
    _print_summary(summary)
    return EXIT_OK


def _print_summary(s):
    print(f"{s.config_id}: RMSE simulated={s.rmse_simulated_db:.3f} dB adapted={s.rmse_adapted_db:.3f} dB")
    if s.main_lobe_points:
        print(f"  main lobe (+-{s.main_lobe_half_width_deg:g} deg): simulated={s.main_lobe_rmse_simulated_db:.3f} dB "
              f"adapted={s.main_lobe_rmse_adapted_db:.3f} dB")


PIPELINE_PARAMS = ("scene", "profile", "measurements", "targets", "nu", "policy", "snr_db", "seed", "offsets")


def cmd_pipeline(args) -> int:
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text())
        for key, value in manifest["params"].items():
            setattr(args, key, value)
    if args.profile and args.measurements:
        raise UsageError("--profile (synthetic) and --measurements (ingest) are exclusive")
    for ref in (args.scene, args.profile):
        if ref and not Path(ref).exists():
            raise rio.DataError(f"missing file: {ref}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = _scene(args)
    targets = parse_angles(args.targets)
    grid = parse_angles(args.nu)
    policy = resolve_policy(args.policy)

    # stage 1: configs
    fams = standard_families(scene, targets, single=True, tiled=True, n_offsets=args.offsets)
    rio.save_configs(fams, out / "configs.jsonl")
    rio.save_scene(scene, out / "scene.json")
    sweeps = {f.target_deg: f for f in fams if f.kind is FamilyKind.OFFSET_SWEEP}
    beams = {nu: best_offset(sweeps[nu])[1].id for nu in targets}
    print(f"[1/4] {sum(len(f) for f in fams)} configs")

    # stage 2: measurements
    if args.measurements:
        samples = rio.load_measurements(args.measurements)
        grid = sorted({s.nu_deg for s in samples})
    else:
        profile = rio.load_profile(args.profile) if args.profile else AlphaProfile()
        needed = [c.id for f in fams if f.kind in POLICIES[policy] for c in f.configs]
        needed += [cid for cid in beams.values() if cid not in set(needed)]
        samples = synthesize_measurements(scene, fams, profile, grid, NoiseSpec(args.snr_db, args.seed), config_ids=needed)
        rio.save_measurements(samples, out / "measurements.csv")
    print(f"[2/4] {len(samples)} samples over {len(grid)} angles")

    # stage 3: fit
    reports = fit_per_angle(fams, group_by_angle(samples), scene, policy=policy)
    rio.save_alpha(reports, out / "alpha.json", policy=policy)
    print(f"[3/4] fitted {len(reports)} angles ({policy})")

    # stage 4: compare
    alpha = {nu: rep.alpha for nu, rep in reports.items()}
    summaries = []
    for nu, cid in beams.items():
        patterns, summary = run_compare(scene, fams, cid, measured_pattern(samples, cid), alpha, nu)
        rio.save_beampatterns(patterns, out / f"compare_{nu:g}.csv")
        summaries.append(summary.to_dict())
        _print_summary(summary)
    _write_json(out / "summary.json", {"comparisons": summaries})
    print("[4/4] comparisons written")

    _write_json(out / "manifest.json", {
        "tool": "risrefine",
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "subcommand": "pipeline",
        "params": {k: getattr(args, k) for k in PIPELINE_PARAMS},
        "inputs": {"scene": args.scene, "profile": args.profile, "measurements": args.measurements},
        "outputs": sorted(p.name for p in out.iterdir() if p.name != "manifest.json"),
        "output_dir": str(out),
    })
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="risrefine", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_help):
        sp.add_argument("--scene", help="scene JSON (default: built-in turntable scene)")
        sp.add_argument("--out", required=True, help=out_help)
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("gen-configs", help="generate configuration families")
    common(sp, "config file (JSON lines)")
    sp.add_argument("--target", type=float, action="append", help="steering target in degrees (repeatable)")
    sp.add_argument("--single", action="store_true", help="single-element sweep")
    sp.add_argument("--tiled", action="store_true", help="add 2x2-tiled variants")
    sp.add_argument("--offsets", type=int, default=DEFAULT_OFFSETS, help="phase offsets per sweep")
    sp.set_defaults(func=cmd_gen_configs)

    sp = sub.add_parser("synth-measure", help="synthesize measurements from a profile")
    common(sp, "measurement CSV")
    sp.add_argument("--profile", help="profile JSON (default: built-in profile)")
    sp.add_argument("--configs", required=True)
    sp.add_argument("--nu", required=True, help="angles: 'a,b,c' or 'start:stop:step'")
    sp.add_argument("--snr-db", type=float, default=None)
    sp.add_argument("--config-id", action="append", help="restrict to these configs (repeatable)")
    sp.set_defaults(func=cmd_synth_measure)

    sp = sub.add_parser("fit-alpha", help="fit reflect coefficients per angle")
    common(sp, "alpha JSON")
    sp.add_argument("--measurements", required=True)
    sp.add_argument("--configs", required=True)
    sp.add_argument("--policy", default="single_tiled", choices=["single", "single_tiled", "full"])
    sp.add_argument("--no-dedup", action="store_true")
    sp.set_defaults(func=cmd_fit_alpha)

    sp = sub.add_parser("beampattern", help="simulated/adapted/measured beampattern CSV")
    common(sp, "beampattern CSV")
    sp.add_argument("--configs", required=True)
    sp.add_argument("--config-id", required=True)
    sp.add_argument("--nu", default=DEFAULT_GRID)
    sp.add_argument("--alpha", help="alpha JSON for the adapted pattern")
    sp.add_argument("--measurements", help="measurement CSV for the measured pattern")
    sp.set_defaults(func=cmd_beampattern)

    sp = sub.add_parser("compare", help="RMSE of simulated and adapted models vs measurement")
    common(sp, "comparison CSV")
    sp.add_argument("--configs", required=True)
    sp.add_argument("--config-id", required=True)
    sp.add_argument("--measured", required=True, help="beampattern CSV with measured rows")
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--target", type=float, help="main-lobe center (default: config's target)")
    sp.add_argument("--summary", help="summary JSON path (default: next to --out)")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("pipeline", help="configs -> measurements -> fit -> compare")
    common(sp, "output directory")
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--profile", help="synthetic mode: profile JSON")
    mode.add_argument("--measurements", help="ingest mode: measurement CSV")
    sp.add_argument("--targets", default=DEFAULT_TARGETS)
    sp.add_argument("--nu", default=DEFAULT_GRID)
    sp.add_argument("--policy", default="single_tiled", choices=["single", "single_tiled", "full"])
    sp.add_argument("--snr-db", type=float, default=None)
    sp.add_argument("--offsets", type=int, default=DEFAULT_OFFSETS)
    sp.add_argument("--manifest", help="rerun with the parameters of an earlier manifest")
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (rio.DataError, KeyError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
