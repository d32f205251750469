"""Command-line entry point: run, gen, bench, score, mask."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import score_against_truth, sweep_k
from .config import ConfigError, PipelineConfig, build_config, read_config_file
from .errors import DatasetError, InvalidSeedError, SceneError
from .frame_io import (
    CameraIntrinsics,
    load_manifest,
    read_frame_pair,
    read_label_png,
    read_truth_labels,
    write_label_png,
)
from .pipeline import StreamingPipeline, export_frame
from .synthetic import load_scene_spec, write_scene_dataset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATASET = 3


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat key = value config file")
    parser.add_argument("--k", type=int)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--pos-scale", dest="pos_scale", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--psi", type=float)
    parser.add_argument("--inner-iters", dest="inner_iters", type=int)
    parser.add_argument("--depth-min", dest="depth_min", type=float)
    parser.add_argument("--depth-max", dest="depth_max", type=float)
    parser.add_argument("--stride", type=int)
    parser.add_argument("--fov-preset", dest="fov_preset",
                        choices=["kinect-v1", "kinect-v2"])
    parser.add_argument("--fov-x", dest="fov_x", type=float,
                        help="explicit horizontal fov in radians")
    parser.add_argument("--fov-y", dest="fov_y", type=float,
                        help="explicit vertical fov in radians")
    parser.add_argument("--rng-seed", dest="rng_seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--freeze-centroids", dest="freeze_centroids",
                        action="store_true", default=None,
                        help="never refresh centroids after seeding")
    parser.add_argument("--legacy-y-scale", dest="legacy_y_scale",
                        action="store_true", default=None,
                        help="divide the y pixel coordinate by the raster width "
                             "(legacy back-projection form)")
    parser.add_argument("--pre-aligned", dest="pre_aligned",
                        action="store_true", default=None,
                        help="treat color rasters as already mapped to the depth grid")


_CONFIG_KEYS = ("k", "alpha", "pos_scale", "gamma", "psi", "inner_iters",
                "depth_min", "depth_max", "stride", "fov_preset", "fov_x", "fov_y",
                "rng_seed", "threads", "freeze_centroids", "legacy_y_scale",
                "pre_aligned")


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    file_values = read_config_file(args.config) if args.config else None
    overrides = {key: getattr(args, key) for key in _CONFIG_KEYS}
    return build_config(file_values, overrides)


def _intrinsics_for(config: PipelineConfig, manifest) -> CameraIntrinsics:
    intr = manifest.intrinsics
    fov_x, fov_y = config.resolve_fov(default=(intr.fov_x, intr.fov_y))
    return CameraIntrinsics(fov_x=fov_x, fov_y=fov_y,
                            depth_width=intr.depth_width,
                            depth_height=intr.depth_height,
                            color_width=intr.color_width,
                            color_height=intr.color_height)


def _load_manifest_for(args, config: PipelineConfig):
    manifest = load_manifest(args.manifest)
    if config.pre_aligned is not None:
        manifest.pre_aligned = config.pre_aligned
    return manifest


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    manifest = _load_manifest_for(args, config)
    intrinsics = _intrinsics_for(config, manifest)
    pipe = StreamingPipeline(config, intrinsics)
    out_dir = Path(args.out)
    for index in range(len(manifest)):
        frame = read_frame_pair(manifest, index)
        result = pipe.process_frame(frame)
        export_frame(result, out_dir)
        print(f"frame {index:6d}  tau={result.tau:<6d} "
              f"points={result.cloud.valid_count():<8d} {result.elapsed_s:.4f}s")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    spec, intrinsics = load_scene_spec(args.scene)
    manifest_path = write_scene_dataset(spec, intrinsics,
                                        seed=args.rng_seed, out_dir=args.out)
    print(f"wrote {spec.frame_count} frames, manifest at {manifest_path}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    manifest = _load_manifest_for(args, config)
    try:
        k_values = [int(v) for v in args.k_list.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--k-list must be comma-separated integers, "
                          f"got {args.k_list!r}")
    if not k_values:
        raise ConfigError("--k-list is empty")
    report = sweep_k(manifest, k_values, config, repetitions=args.repetitions)
    print(f"# {report.machine}")
    print("k,fps_mean,fps_std,peak_mem_bytes,threads")
    for row in report.rows:
        print(f"{row.k},{row.fps_mean:.4f},{row.fps_std:.4f},"
              f"{row.peak_mem_bytes},{row.threads}")
    if args.out:
        report.write_csv(args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    manifest = _load_manifest_for(args, config)
    pred_dir = Path(args.pred)
    preds = []
    truths = []
    for index in range(len(manifest)):
        pred_path = pred_dir / f"labels_{index:06d}.png"
        if not pred_path.is_file():
            raise DatasetError(f"missing predicted labels {pred_path}")
        preds.append(read_label_png(pred_path))
        truths.append(read_truth_labels(manifest, index))
    report = score_against_truth(preds, truths)
    for index, frame in enumerate(report.frames):
        print(f"frame {index:6d}  accuracy={frame.accuracy:.4f}")
    print(f"mean accuracy: {report.mean_accuracy:.4f}")
    return EXIT_OK


def cmd_mask(args: argparse.Namespace) -> int:
    from .render_export import extract_object_mask

    config = _config_from_args(args)
    manifest = _load_manifest_for(args, config)
    intrinsics = _intrinsics_for(config, manifest)
    pipe = StreamingPipeline(config, intrinsics)
    result = None
    for index in range(len(manifest)):
        result = pipe.process_frame(read_frame_pair(manifest, index))
    try:
        row, col = (int(v) for v in args.seed_pixel.split(","))
    except ValueError:
        raise ConfigError(f"--seed-pixel must be 'row,col', got {args.seed_pixel!r}")
    if config.stride > 1:
        row, col = row // config.stride, col // config.stride
    mask = extract_object_mask(result.state, (row, col))
    # scatter the (possibly strided) mask back to depth resolution
    full = np.zeros((intrinsics.depth_height, intrinsics.depth_width),
                    dtype=np.uint8)
    full[np.ix_(result.cloud.rows, result.cloud.cols)] = mask.mask * 255
    out = Path(args.out)
    write_label_png(full, out)
    print(f"cluster {mask.cluster_id}: {int(mask.mask.sum())} pixels -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wcluster",
        description="Streaming weighted clustering for RGB-D frame sequences.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="cluster a recorded or synthetic dataset")
    p_run.add_argument("--manifest", required=True, type=Path)
    p_run.add_argument("--out", required=True, type=Path)
    _add_config_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_gen = sub.add_parser("gen", help="render a synthetic scene to a dataset")
    p_gen.add_argument("--scene", required=True, type=Path,
                       help="scene spec JSON file")
    p_gen.add_argument("--out", required=True, type=Path)
    p_gen.add_argument("--rng-seed", dest="rng_seed", type=int, default=0)
    p_gen.set_defaults(func=cmd_gen)

    p_bench = sub.add_parser("bench", help="sweep k, report FPS and peak memory")
    p_bench.add_argument("--manifest", required=True, type=Path)
    p_bench.add_argument("--k-list", dest="k_list", required=True,
                         help="comma-separated k values, e.g. 2,10,25,50")
    p_bench.add_argument("--repetitions", type=int, default=3)
    p_bench.add_argument("--out", type=Path, help="write the report CSV here")
    _add_config_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_score = sub.add_parser("score", help="score predicted labels against truth")
    p_score.add_argument("--manifest", required=True, type=Path)
    p_score.add_argument("--pred", required=True, type=Path,
                         help="directory holding labels_NNNNNN.png predictions")
    _add_config_flags(p_score)
    p_score.set_defaults(func=cmd_score)

    p_mask = sub.add_parser("mask", help="extract one object's mask from a seed pixel")
    p_mask.add_argument("--manifest", required=True, type=Path)
    p_mask.add_argument("--seed-pixel", dest="seed_pixel", required=True,
                        help="'row,col' of a labeled pixel")
    p_mask.add_argument("--out", required=True, type=Path)
    _add_config_flags(p_mask)
    p_mask.set_defaults(func=cmd_mask)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SceneError, InvalidSeedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATASET


if __name__ == "__main__":
    sys.exit(main())
