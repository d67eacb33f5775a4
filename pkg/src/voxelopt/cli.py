"""Command-line front end: ``voxelopt {register,warp,metrics,features,synth}``.

Every successful command writes a JSON run report (config echo, timings,
metric values, output paths) and exits with status 0. Failures print the
offending file or key on stderr and exit non-zero without a report.
"""

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import features as feats
from ._parallel import worker_count
from .config import RegistrationConfig, load_config, theta_schedule
from .diffeo import jacobian_stats
from .errors import ConfigError, ShapeError, VoxelOptError
from .io import read_nifti, write_feat, write_nifti
from .metrics import dice, hd95, warp_labels
from .pyramid import register
from .synth import endpoint_error, make_pair
from .volume import warp


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _default_report(path):
    base = str(path)
    for ext in (".nii.gz", ".nii", ".voxf"):
        if base.endswith(ext):
            base = base[:-len(ext)]
            break
    return base + ".report.json"


def _write_report(path, command, body):
    report = {"command": command, **body}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _ms(seconds):
    return round(1000.0 * seconds, 3)


def _read_field(path, dims=None):
    img = read_nifti(path)
    if not img.is_vector:
        raise ShapeError(f"{path}: expected a 3-vector displacement field")
    if dims is not None and img.data.shape[:3] != tuple(dims):
        raise ShapeError(f"{path}: field grid {img.data.shape[:3]} does not match {tuple(dims)}")
    return img.data.astype(np.float64)


def _field_summary(u):
    sdlogj, fold = jacobian_stats(u)
    return {"max_abs_displacement": float(np.abs(u).max()), "fold_fraction": fold,
            "sdlogj": sdlogj}


def _registration_config(args):
    cfg = load_config(args.config) if args.config else RegistrationConfig()
    level = {}
    if args.no_adaptive:
        level["adaptive"] = False
    if args.no_prefilter:
        level["prefilter"] = False
    if args.k is not None:
        level["k"] = args.k
    if args.iters is not None:
        level["thetas"] = theta_schedule(args.iters)
    if args.alpha is not None:
        level["alpha"] = args.alpha
    if args.beta is not None:
        level["beta"] = args.beta
    if level:
        cfg = cfg.with_level(**level)
    if args.levels is not None:
        cfg = replace(cfg, levels=args.levels)
    if args.features is not None:
        cfg = replace(cfg, feature_mode=args.features)
    if args.fixed_feat or args.moving_feat:
        if not (args.fixed_feat and args.moving_feat):
            raise ConfigError("--fixed-feat and --moving-feat must be given together", "feature_mode")
        cfg = replace(cfg, feature_mode="external")
    elif cfg.feature_mode == "external":
        raise ConfigError("external features need --fixed-feat and --moving-feat", "feature_mode")
    return cfg


def cmd_register(args):
    t0 = time.perf_counter()
    cfg = _registration_config(args)
    fixed = read_nifti(args.fixed)
    moving = read_nifti(args.moving)
    if fixed.is_vector or moving.is_vector:
        raise ShapeError("fixed and moving images must be scalar volumes")
    if fixed.data.shape != moving.data.shape:
        raise ShapeError(f"{args.moving}: grid {moving.data.shape} does not match "
                         f"fixed grid {fixed.data.shape}")
    t1 = time.perf_counter()
    if cfg.feature_mode == "external":
        f = feats.load_external(args.fixed_feat, fixed.data.shape, cfg.zscore_external)
        m = feats.load_external(args.moving_feat, fixed.data.shape, cfg.zscore_external)
        if f.shape != m.shape:
            raise ShapeError(f"{args.moving_feat}: {m.shape[-1]} channels, fixed features have {f.shape[-1]}")
    else:
        f = feats.extract(fixed.data, cfg)
        m = feats.extract(moving.data, cfg)
    t2 = time.perf_counter()
    result = register(f, m, cfg, keep_levels=bool(args.dump_entropy))
    t3 = time.perf_counter()
    write_nifti(result.field.astype(np.float32), args.out_field, spacing=fixed.spacing)
    outputs = {"field": args.out_field}
    if args.dump_entropy:
        os.makedirs(args.dump_entropy, exist_ok=True)
        for i, rec in enumerate(result.levels):
            spacing = tuple(s * 2**i for s in fixed.spacing)
            for name, arr in (("entropy", rec.entropy), ("sigma", rec.sigma)):
                path = os.path.join(args.dump_entropy, f"{name}_level{i}.nii.gz")
                write_nifti(arr.astype(np.float32), path, spacing=spacing)
                outputs[f"{name}_level{i}"] = path
    t4 = time.perf_counter()
    timings = {f"{k}_ms": _ms(v) for k, v in result.timings.items()}
    timings.update(read_ms=_ms(t1 - t0), features_ms=_ms(t2 - t1), register_ms=_ms(t3 - t2),
                   write_ms=_ms(t4 - t3))
    report = args.report or _default_report(args.out_field)
    _write_report(report, "register", {
        "config": cfg.to_dict(),
        "inputs": {"fixed": args.fixed, "moving": args.moving,
                   "fixed_feat": args.fixed_feat, "moving_feat": args.moving_feat},
        "threads": worker_count(),
        "timings": timings,
        "metrics": _field_summary(result.field),
        "outputs": outputs,
    })


def cmd_warp(args):
    t0 = time.perf_counter()
    img = read_nifti(args.input)
    if img.is_vector:
        raise ShapeError(f"{args.input}: warping vector volumes is not supported")
    u = _read_field(args.field, img.data.shape)
    if args.interp == "nearest":
        out = warp_labels(img.data, u)
    else:
        out = warp(img.data.astype(np.float64), u).astype(np.float32)
    write_nifti(replace(img, data=out), args.out)
    report = args.report or _default_report(args.out)
    _write_report(report, "warp", {
        "inputs": {"in": args.input, "field": args.field}, "interp": args.interp,
        "timings": {"total_ms": _ms(time.perf_counter() - t0)}, "outputs": {"out": args.out},
    })


def cmd_metrics(args):
    t0 = time.perf_counter()
    dims = None
    metrics = {}
    spacing = (1.0, 1.0, 1.0)
    if bool(args.fixed_labels) != bool(args.moving_labels):
        raise ConfigError("--fixed-labels and --moving-labels must be given together", "labels")
    if args.fixed_labels:
        fl = read_nifti(args.fixed_labels)
        ml = read_nifti(args.moving_labels)
        if fl.data.shape != ml.data.shape:
            raise ShapeError(f"{args.moving_labels}: grid {ml.data.shape} does not match {fl.data.shape}")
        dims, spacing = fl.data.shape, fl.spacing
    u = _read_field(args.field, dims)
    metrics.update(_field_summary(u))
    if args.fixed_labels:
        a = np.rint(fl.data).astype(np.int64)
        b = warp_labels(np.rint(ml.data).astype(np.int64), u)
        scores, mean = dice(a, b)
        dists = {}
        for lab in scores:
            if (a == lab).any() and (b == lab).any():
                dists[lab] = hd95(a == lab, b == lab, spacing)
        metrics["dice"] = {"per_label": scores, "mean": mean}
        metrics["hd95_mm"] = {"per_label": dists,
                              "mean": float(np.mean(list(dists.values()))) if dists else math.nan}
    if args.truth_field:
        truth = _read_field(args.truth_field, u.shape[:3])
        before = endpoint_error(np.zeros_like(truth), truth, args.margin)
        after = endpoint_error(u, truth, args.margin)
        metrics["endpoint_error"] = {
            "initial": before, "final": after, "margin": args.margin,
            "reduction": 1.0 - after / before if before > 0 else math.nan}
    _write_report(args.out_report, "metrics", {
        "inputs": {"fixed_labels": args.fixed_labels, "moving_labels": args.moving_labels,
                   "field": args.field, "truth_field": args.truth_field},
        "timings": {"total_ms": _ms(time.perf_counter() - t0)},
        "metrics": metrics, "outputs": {"report": args.out_report},
    })


def cmd_features(args):
    t0 = time.perf_counter()
    img = read_nifti(args.input)
    if img.is_vector:
        raise ShapeError(f"{args.input}: features need a scalar volume")
    if args.mode == "raw":
        window = None if args.no_window else tuple(args.window)
        out = feats.raw_feature(img.data, window)
    else:
        out = feats.mind_extract(img.data, args.mind_sigma)
    write_feat(out, args.out, img.spacing)
    report = args.report or _default_report(args.out)
    _write_report(report, "features", {
        "inputs": {"in": args.input}, "mode": args.mode, "channels": out.shape[-1],
        "timings": {"total_ms": _ms(time.perf_counter() - t0)}, "outputs": {"out": args.out},
    })


def cmd_synth(args):
    t0 = time.perf_counter()
    dims = (args.size,) * 3
    pair = make_pair(dims, args.kind, args.magnitude, args.seed)
    write_nifti(pair.fixed.astype(np.float32), args.out_fixed)
    write_nifti(pair.moving.astype(np.float32), args.out_moving)
    write_nifti(pair.truth.astype(np.float32), args.out_truth)
    outputs = {"fixed": args.out_fixed, "moving": args.out_moving, "truth": args.out_truth}
    if args.out_fixed_labels:
        write_nifti(pair.fixed_labels, args.out_fixed_labels)
        outputs["fixed_labels"] = args.out_fixed_labels
    if args.out_moving_labels:
        write_nifti(pair.moving_labels, args.out_moving_labels)
        outputs["moving_labels"] = args.out_moving_labels
    report = args.report or _default_report(args.out_fixed)
    _write_report(report, "synth", {
        "kind": args.kind, "magnitude": args.magnitude, "seed": args.seed, "size": args.size,
        "timings": {"total_ms": _ms(time.perf_counter() - t0)}, "outputs": outputs,
    })


def build_parser():
    p = argparse.ArgumentParser(prog="voxelopt", description="Entropy-guided discrete deformable registration of 3D volumes.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("register", help="register a moving volume to a fixed volume")
    r.add_argument("--fixed", required=True)
    r.add_argument("--moving", required=True)
    r.add_argument("--out-field", required=True)
    r.add_argument("--fixed-feat", help="VOXF feature map of the fixed image")
    r.add_argument("--moving-feat", help="VOXF feature map of the moving image")
    r.add_argument("--config", help="JSON configuration file")
    r.add_argument("--dump-entropy", metavar="DIR", help="write per-level entropy and sigma maps")
    r.add_argument("--no-adaptive", action="store_true", help="isotropic instead of adaptive smoothing")
    r.add_argument("--no-prefilter", action="store_true", help="skip cost-volume pre-filtering")
    r.add_argument("--k", type=int, help="cost-volume kernel size")
    r.add_argument("--levels", type=int, help="pyramid levels")
    r.add_argument("--iters", type=int, help="coordinate-descent iterations per level")
    r.add_argument("--alpha", type=float)
    r.add_argument("--beta", type=float)
    r.add_argument("--features", choices=("raw", "mind"), help="override the configured feature mode")
    r.add_argument("--report")
    r.set_defaults(func=cmd_register)

    w = sub.add_parser("warp", help="apply a displacement field to a volume")
    w.add_argument("--in", dest="input", required=True)
    w.add_argument("--field", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--interp", choices=("trilinear", "nearest"), default="trilinear")
    w.add_argument("--report")
    w.set_defaults(func=cmd_warp)

    mt = sub.add_parser("metrics", help="Dice, HD95, SDLogJ and endpoint error of a field")
    mt.add_argument("--fixed-labels")
    mt.add_argument("--moving-labels")
    mt.add_argument("--field", required=True)
    mt.add_argument("--truth-field", help="ground-truth field for endpoint errors")
    mt.add_argument("--margin", type=int, default=0, help="voxels ignored at each face for endpoint errors")
    mt.add_argument("--out-report", required=True)
    mt.set_defaults(func=cmd_metrics)

    fe = sub.add_parser("features", help="extract raw or MIND features to a VOXF file")
    fe.add_argument("--in", dest="input", required=True)
    fe.add_argument("--mode", choices=("raw", "mind"), default="raw")
    fe.add_argument("--out", required=True)
    fe.add_argument("--window", type=float, nargs=2, default=(-800.0, 500.0), metavar=("LOW", "HIGH"))
    fe.add_argument("--no-window", action="store_true", help="min-max scale without clipping")
    fe.add_argument("--mind-sigma", type=float, default=0.5)
    fe.add_argument("--report")
    fe.set_defaults(func=cmd_features)

    sy = sub.add_parser("synth", help="write a synthetic pair with its ground-truth field")
    sy.add_argument("--out-fixed", required=True)
    sy.add_argument("--out-moving", required=True)
    sy.add_argument("--out-truth", required=True)
    sy.add_argument("--out-fixed-labels")
    sy.add_argument("--out-moving-labels")
    sy.add_argument("--kind", choices=("translation", "smooth"), default="translation")
    sy.add_argument("--magnitude", type=float, default=8.0)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--size", type=int, default=64)
    sy.add_argument("--report")
    sy.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        worker_count()
        args.func(args)
    except (VoxelOptError, OSError, ValueError) as exc:
        print(f"voxelopt {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
