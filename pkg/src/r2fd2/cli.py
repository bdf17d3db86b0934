"""Command-line interface.

Exit codes: 0 success, 1 usage / I-O / parameter error, 2 matching failure.
Every ``RunConfig`` field is available as a flag (``--window-sigma 1.5``)
and overrides the value from ``--config FILE``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import formats, plotting
from .config import RunConfig, parse_value
from .descriptor import describe_points
from .errors import R2FD2Error
from .evaluation import (
    ablation_csv,
    arrangement_ablation,
    detector_repeatability,
    dumps_json,
    load_manifest,
    match_metrics,
    repeatability_csv,
    rotation_sweep,
    synthetic_pairs,
)
from .imaging import NRD_PRESETS, NrdParams, ProjectiveTransform, load_image, rotate_about_center, save_image, synth_modality, warp_projective
from .pipeline import extract_features, match_features
from .loggabor import build_filter_bank

log = logging.getLogger("r2fd2")

EXIT_OK, EXIT_ERROR, EXIT_NO_MATCH = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", type=Path, help="key = value file; flags take precedence")
    for f in fields(RunConfig):
        g.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, metavar=f.type.split(" ")[0].upper(), default=None)


def build_config(args) -> RunConfig:
    base = RunConfig.load(args.config) if args.config else RunConfig()
    types = {f.name: f.type for f in fields(RunConfig)}
    overrides = {k[4:]: parse_value(types[k[4:]], v) for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return base.updated(**overrides)


def _out_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> None:
    path.write_text(text, newline="")


# ---------------------------------------------------------------------------
# commands


def cmd_detect(args, config: RunConfig) -> int:
    img = load_image(args.image)
    feats = extract_features(img, config, describe=False)
    if not feats.points:
        log.warning("no interest points detected in %s", args.image)
    _write(args.output, formats.points_csv(feats.points))
    if args.response_png:
        plotting.save_scalar_map(args.response_png, feats.response)
    if args.mim_png:
        plotting.save_index_map(args.mim_png, feats.mim)
    if args.amplitude_dir:
        out = _out_dir(args.amplitude_dir)
        for o, a in enumerate(feats.amplitudes, 1):
            plotting.save_scalar_map(out / f"amplitude_{o}.png", a)
    return EXIT_OK


def cmd_describe(args, config: RunConfig) -> int:
    img = load_image(args.image)
    feats = extract_features(img, config, describe=args.points is None)
    if args.points is not None:
        feats.described = describe_points(feats.mim, formats.read_points_csv(args.points), config.descriptor_params(), amplitude=feats.amplitudes.sum(axis=0))
    d = feats.described
    if d.dropped:
        log.warning("%d points too close to the border were not described", len(d.dropped))
    if not len(d):
        log.warning("no descriptors computed for %s", args.image)
    formats.write_descriptors(args.output, d.xy, d.descriptors)
    if args.csv:
        _write(args.csv, formats.descriptors_csv(d.xy, d.descriptors))
    return EXIT_OK


def _match(args, config: RunConfig):
    ref, sen = load_image(args.reference), load_image(args.sensed)
    bank = build_filter_bank(*ref.shape, config.filter_params())
    f_ref = extract_features(ref, config, bank)
    f_sen = extract_features(sen, config, bank if sen.shape == ref.shape else None)
    return ref, sen, match_features(f_ref, f_sen, config)


def _report_match(args, config: RunConfig, ref, sen, result, out: Path) -> int:
    success = result.success
    err = None
    if args.truth is not None:
        truth = ProjectiveTransform.load(args.truth)
        m = match_metrics(result, truth, config.inlier_threshold, config.min_matches)
        success = m.success
        err = m.rmse
    _write(out / "matches.csv", formats.matches_csv(result.pairs))
    _write(out / "summary.json", dumps_json(formats.match_summary(len(result.pairs), result.n_inliers, success, result.transform, err)))
    if not args.no_figures:
        plotting.plot_matches(out / "matches.png", ref, sen, result.pairs)
        if result.transform is not None:
            plotting.save_checkerboard(out / "checkerboard.png", ref, sen, result.transform)
    if not success:
        log.warning("matching failed: %d consensus inliers", result.n_inliers)
        return EXIT_NO_MATCH
    return EXIT_OK


def cmd_match(args, config: RunConfig) -> int:
    ref, sen, result = _match(args, config)
    return _report_match(args, config, ref, sen, result, _out_dir(args.output))


def cmd_register(args, config: RunConfig) -> int:
    ref, sen, result = _match(args, config)
    out = _out_dir(args.output)
    code = _report_match(args, config, ref, sen, result, out)
    if result.transform is not None:
        result.transform.save(out / "transform.txt")
        save_image(out / "registered.png", warp_projective(sen, result.transform, *ref.shape))
    return code


def cmd_eval_rotation(args, config: RunConfig) -> int:
    img = load_image(args.image)
    report = rotation_sweep(img, NRD_PRESETS[args.nrd_preset], args.start, args.stop, args.step, config)
    out = _out_dir(args.output)
    _write(out / "sweep.csv", report.to_csv(timing=False))
    _write(out / "sweep.json", dumps_json(report.to_dict(timing=False)))
    _write(out / "timing.csv", "angle,runtime_s\n" + "".join(f"{r.angle:g},{r.metrics.runtime_s:.3f}\n" for r in report.rows))
    if not args.no_figures:
        plotting.plot_ncm_per_angle(out / "ncm_per_angle.png", report.angles, [r.metrics.ncm for r in report.rows], threshold=100)
    print(f"SR {report.success_rate:.3f}  mean NCM {report.mean_ncm:.1f}  mean RMSE {report.mean_rmse:.3f}")
    return EXIT_OK


def _pairs(args, config: RunConfig):
    if args.pairs is not None:
        return load_manifest(args.pairs)
    if args.image is None:
        raise R2FD2Error("give --pairs MANIFEST or --image IMAGE")
    return synthetic_pairs({Path(args.image).stem: load_image(args.image)}, args.angles, NRD_PRESETS[args.nrd_preset], config.seed)


def cmd_eval_repeatability(args, config: RunConfig) -> int:
    pairs = _pairs(args, config)
    reports = detector_repeatability(pairs, config, args.tolerance)
    out = _out_dir(args.output)
    _write(out / "repeatability.csv", repeatability_csv(pairs, reports))
    summary = {
        name: {"mean": float(np.mean([r.repeatability for r in reps])), "pairs": [dict(asdict(r), pair=p.name) for p, r in zip(pairs, reps)]}
        for name, reps in reports.items()
    }
    _write(out / "repeatability.json", dumps_json(summary))
    for name, s in summary.items():
        print(f"{name}: mean repeatability {s['mean']:.4f}")
    return EXIT_OK


def cmd_ablate(args, config: RunConfig) -> int:
    pairs = load_manifest(args.manifest)
    rows = arrangement_ablation(pairs, config)
    out = _out_dir(args.output)
    _write(out / "ablation.csv", ablation_csv(rows))
    _write(out / "ablation.json", dumps_json([asdict(r) for r in rows]))
    if not args.no_figures:
        plotting.plot_ablation(out / "ablation.png", rows)
    sys.stdout.write(ablation_csv(rows))
    return EXIT_OK


def cmd_synth(args, config: RunConfig) -> int:
    img = load_image(args.image)
    nrd = NRD_PRESETS[args.nrd_preset]
    overrides = {k: v for k, v in (("gamma", args.gamma), ("noise_sigma", args.noise), ("blur_sigma", args.blur)) if v is not None}
    if args.invert:
        overrides["invert"] = True
    nrd = NrdParams(**{**asdict(nrd), **overrides})
    sen, fwd = rotate_about_center(synth_modality(img, nrd, seed=config.seed), args.angle)
    save_image(args.output, sen)
    truth_path = args.truth_out or args.output.with_suffix(".truth.txt")
    fwd.inverse().save(truth_path)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="r2fd2", description="Multimodal feature detection, description and matching.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="detect interest points")
    p.add_argument("image", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="interest point CSV")
    p.add_argument("--response-png", type=Path)
    p.add_argument("--mim-png", type=Path, help="colour dump of the maximum index map")
    p.add_argument("--amplitude-dir", type=Path, help="directory for per-orientation amplitude PNGs")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("describe", help="compute descriptors")
    p.add_argument("image", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="binary descriptor file")
    p.add_argument("--points", type=Path, help="describe these points instead of detecting")
    p.add_argument("--csv", type=Path, help="also write a CSV export")
    p.set_defaults(func=cmd_describe)

    for name, func, hlp in (("match", cmd_match, "match two images"), ("register", cmd_register, "match and warp the sensed image")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("reference", type=Path)
        p.add_argument("sensed", type=Path)
        p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
        p.add_argument("--truth", type=Path, help="true sensed-to-reference transform; adds RMSE")
        p.add_argument("--no-figures", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("eval-rotation", help="rotation sweep with synthetic radiometric distortion")
    p.add_argument("image", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--stop", type=float, default=360.0)
    p.add_argument("--step", type=float, default=10.0)
    p.add_argument("--nrd-preset", choices=sorted(NRD_PRESETS), default="mild")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval_rotation)

    p = sub.add_parser("eval-repeatability", help="detector repeatability against the intensity-gradient baseline")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pairs", type=Path, help="CSV manifest with columns ref,sen,truth")
    src.add_argument("--image", type=Path, help="build synthetic pairs from one image")
    p.add_argument("--angles", type=float, nargs="+", default=[10.0, 30.0, 45.0, 60.0, 90.0])
    p.add_argument("--nrd-preset", choices=sorted(NRD_PRESETS), default="inverted")
    p.add_argument("--tolerance", type=float, default=3.0)
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_eval_repeatability)

    p = sub.add_parser("ablate-arrangement", help="compare descriptor spatial arrangements")
    p.add_argument("manifest", type=Path, help="CSV manifest with columns ref,sen,truth")
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="make a rotated, radiometrically distorted copy")
    p.add_argument("image", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="output PNG")
    p.add_argument("--angle", type=float, default=0.0)
    p.add_argument("--nrd-preset", choices=sorted(NRD_PRESETS), default="none")
    p.add_argument("--gamma", type=float)
    p.add_argument("--invert", action="store_true")
    p.add_argument("--noise", type=float)
    p.add_argument("--blur", type=float)
    p.add_argument("--truth-out", type=Path, help="transform file (default: OUTPUT with .truth.txt)")
    p.set_defaults(func=cmd_synth)

    for action in sub.choices.values():
        _config_flags(action)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        config = build_config(args)
        return args.func(args, config)
    except (R2FD2Error, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
