"""Command-line interface.

Subcommands: detect, describe, match, register, bench, validate-net.
Exit codes: 0 success, 1 config/validation error, 2 data error, 3 internal.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .descriptor import CnnBackend, RawPatchBackend, describe_keypoints, read_descriptors, write_descriptors
from .detector import DetectorParams, detect_keypoints, read_keypoints, write_keypoints
from .distance import Metric, distance_matrix
from .errors import ConfigError, DataError, FeatregError, ShapeMismatch
from .evaluation import evaluate_pair
from .geometry import (
    Correspondence,
    Point2,
    RansacParams,
    format_homography,
    parse_homography_file,
    project_points,
    ransac_homography,
)
from .harness import emit_report, parse_run_config, run_benchmark
from .imaging import load_image
from .matcher import MatchParams, format_matches, match
from .network import parse_network_config, validate_network


def _detector_args(parser: argparse.ArgumentParser):
    parser.add_argument("--base-sigma", type=float, default=1.6)
    parser.add_argument("--scales-per-octave", type=int, default=3)
    parser.add_argument("--octaves", type=int, default=None)
    parser.add_argument("--contrast-threshold", type=float, default=0.03)
    parser.add_argument("--edge-ratio", type=float, default=10.0)
    parser.add_argument("--max-keypoints", type=int, default=None)


def _detector_params(args) -> DetectorParams:
    return DetectorParams(
        base_sigma=args.base_sigma,
        scales_per_octave=args.scales_per_octave,
        octaves=args.octaves,
        contrast_threshold=args.contrast_threshold,
        edge_ratio=args.edge_ratio,
        max_keypoints=args.max_keypoints,
    )


def _backend_args(parser: argparse.ArgumentParser):
    parser.add_argument("--backend", choices=("raw", "cnn"), default="raw")
    parser.add_argument("--side", type=int, default=32, help="raw backend patch side")
    parser.add_argument("--net-config", type=Path, default=None)
    parser.add_argument("--weights", type=Path, default=None)
    parser.add_argument("--tap", default=None, help="cnn descriptor layer (default: config tap)")
    parser.add_argument("--window", type=int, default=64)
    parser.add_argument("--no-normalize", action="store_true")


def _make_backend(args):
    if args.backend == "raw":
        return RawPatchBackend(args.side)
    if not args.net_config or not args.weights:
        raise ConfigError("cnn backend needs --net-config and --weights")
    cfg = parse_network_config(args.net_config.read_text())
    if args.tap:
        from dataclasses import replace

        cfg = replace(cfg, tap=args.tap)
        validate_network(cfg)
    return CnnBackend(cfg, args.weights.read_bytes())


def _describe(args, image_path: Path):
    img = load_image(image_path.read_bytes())
    params = _detector_params(args)
    kps = detect_keypoints(img, params)
    backend = _make_backend(args)
    return describe_keypoints(
        img, kps, backend, window=args.window,
        normalize=not args.no_normalize, base_sigma=params.base_sigma,
    )


def _write_out(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def cmd_detect(args) -> int:
    img = load_image(args.image.read_bytes())
    kps = detect_keypoints(img, _detector_params(args))
    _write_out(write_keypoints(kps), args.output)
    return 0


def cmd_describe(args) -> int:
    img = load_image(args.image.read_bytes())
    params = _detector_params(args)
    if args.keypoints is not None:
        kps = read_keypoints(args.keypoints.read_text())
    else:
        kps = detect_keypoints(img, params)
    backend = _make_backend(args)
    ds = describe_keypoints(
        img, kps, backend, window=args.window,
        normalize=not args.no_normalize, base_sigma=params.base_sigma,
    )
    data = write_descriptors(ds)
    if args.output is None:
        sys.stdout.buffer.write(data)
    else:
        args.output.write_bytes(data)
    return 0


def cmd_match(args) -> int:
    ds_a = read_descriptors(args.descriptors_a.read_bytes())
    ds_b = read_descriptors(args.descriptors_b.read_bytes())
    metric = Metric(args.metric, r=args.minkowski_r)
    dm = distance_matrix(ds_a, ds_b, metric)
    pairs = match(dm, MatchParams(args.method, args.threshold))
    _write_out(format_matches(pairs), args.output)
    return 0


def cmd_register(args) -> int:
    ds_a = _describe(args, args.image_a)
    ds_b = _describe(args, args.image_b)
    print(f"keypoints: {len(ds_a)} / {len(ds_b)}")
    metric = Metric(args.metric, r=args.minkowski_r)
    dm = distance_matrix(ds_a, ds_b, metric)
    pairs = match(dm, MatchParams(args.method, args.threshold))
    print(f"matches: {len(pairs)} ({args.metric}, {args.method} @ {args.threshold:g})")

    ransac = RansacParams(max_iterations=args.ransac_iterations,
                          inlier_threshold=args.inlier_threshold, seed=args.seed)
    if args.gt is not None:
        h_gt = parse_homography_file(args.gt.read_bytes())
        report = evaluate_pair(pairs, ds_a.keypoints, ds_b.keypoints, h_gt, ransac)
        print(f"ke_gh: {report.ke_gh if report.ke_gh is not None else 'n/a'}")
        print(f"tp: {report.tp}")
        print(f"ke_ch: {report.ke_ch if report.ke_ch is not None else 'n/a'}")
        print(f"inlier_ratio: {report.inlier_ratio if report.inlier_ratio is not None else 'n/a'}")
        if report.ransac_failed:
            print("ransac: failed")
            return 0

    corr = [
        Correspondence(
            Point2(ds_a.keypoints[p.idx_a].x, ds_a.keypoints[p.idx_a].y),
            Point2(ds_b.keypoints[p.idx_b].x, ds_b.keypoints[p.idx_b].y),
        )
        for p in pairs
    ]
    h, mask = ransac_homography(corr, ransac)
    inl = np.array(mask)
    pts = np.array([[c.p1.x, c.p1.y] for c in corr])
    tgt = np.array([[c.p2.x, c.p2.y] for c in corr])
    proj = project_points(h, pts)
    err = np.hypot(proj[:, 0] - tgt[:, 0], proj[:, 1] - tgt[:, 1])
    print(f"inliers: {int(inl.sum())} / {len(corr)}")
    print(f"mean_inlier_error_px: {err[inl].mean():.6g}")
    print("homography:")
    text = format_homography(h)
    print(text, end="")
    if args.output is not None:
        args.output.write_text(text)
    return 0


def cmd_bench(args) -> int:
    config = parse_run_config(args.config.read_text(), args.config.parent)
    rows = run_benchmark(config)
    written = emit_report(rows, config.output_dir, config.chart_method, config.chart_threshold)
    print(f"{len(rows)} rows -> {written[0]}")
    for path in written[1:]:
        print(f"  + {path.name}")
    return 0


def cmd_validate_net(args) -> int:
    try:
        cfg = parse_network_config(args.net_config.read_text())
        trace = validate_network(cfg)
    except (ShapeMismatch, DataError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    print(f"input: {cfg.input_side}x{cfg.input_side}x{cfg.input_channels}")
    for name, shape in trace:
        printable = "x".join(str(s) for s in shape)
        marker = "  <- tap" if name == cfg.tap else ""
        print(f"{name}: {printable}{marker}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featreg",
        description="Feature-based image registration toolkit and benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect keypoints in a PGM/PPM image")
    p.add_argument("image", type=Path)
    p.add_argument("-o", "--output", type=Path, default=None)
    _detector_args(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("describe", help="compute a KPD1 descriptor file")
    p.add_argument("image", type=Path)
    p.add_argument("keypoints", type=Path, nargs="?", default=None,
                   help="keypoint dump (default: run the detector)")
    p.add_argument("-o", "--output", type=Path, default=None)
    _detector_args(p)
    _backend_args(p)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("match", help="match two KPD1 descriptor files")
    p.add_argument("descriptors_a", type=Path)
    p.add_argument("descriptors_b", type=Path)
    p.add_argument("--metric", default="cosine",
                   choices=("cityblock", "euclidean", "cosine", "minkowski", "correlation"))
    p.add_argument("--minkowski-r", type=float, default=3.0)
    p.add_argument("--method", default="nnr1", choices=("nn1", "nn2", "nnr1", "nnr2"))
    p.add_argument("--threshold", type=float, default=1.1)
    p.add_argument("-o", "--output", type=Path, default=None)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("register", help="estimate the homography between two images")
    p.add_argument("image_a", type=Path)
    p.add_argument("image_b", type=Path)
    p.add_argument("--metric", default="cosine",
                   choices=("cityblock", "euclidean", "cosine", "minkowski", "correlation"))
    p.add_argument("--minkowski-r", type=float, default=3.0)
    p.add_argument("--method", default="nnr1", choices=("nn1", "nn2", "nnr1", "nnr2"))
    p.add_argument("--threshold", type=float, default=1.1)
    p.add_argument("--ransac-iterations", type=int, default=2000)
    p.add_argument("--inlier-threshold", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--gt", type=Path, default=None, help="ground-truth homography file")
    p.add_argument("-o", "--output", type=Path, default=None, help="write the homography here")
    _detector_args(p)
    _backend_args(p)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("bench", help="run the benchmark grid from a JSON config")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate-net", help="shape-check a network config file")
    p.add_argument("net_config", type=Path)
    p.set_defaults(func=cmd_validate_net)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FeatregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
