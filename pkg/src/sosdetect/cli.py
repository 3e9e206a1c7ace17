# sosdetect/cli.py
# !/usr/bin/env python3

"""
cli.py
~~~~~~~~~~~~~~~

Command-line front end. Each command is one pipeline stage over files:

    synth   render a synthetic scene dataset
    prep    write the prepared training patches of a dataset
    train   prepare patches and train a detector checkpoint
    detect  run a checkpoint over images and write detections
    eval    score detections against annotations

Exit codes: 0 success, 2 config or input format, 3 numerical failure, 4 I/O.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional, Sequence, Tuple

from . import __version__
from ._exceptions import ConfigError, InputFormatError, SosDetectError
from ._parallel import map_ordered
from .config import RunConfig, dump_run_config, load_run_config, write_resolved_config
from .detect.detections import read_detections, write_detections
from .detect.detector import detect_image, detect_image_candidates, restrict_levels
from .detect.levels import parse_levels
from .evaluation.metrics import curve
from .evaluation.report import write_report
from .net.checkpoint import load_checkpoint, save_checkpoint
from .raster.image import Image
from .raster.ppm import read_ppm, write_ppm
from .synth.annotations import (
    Annotation,
    annotation_to_record,
    read_annotations,
    write_annotations,
)
from .synth.patches import prep_training_patches
from .synth.scene import generate_scene
from .train.loop import train_loop, write_loss_log

logger = logging.getLogger(__name__)

ANNOTATIONS_FILENAME = "annotations.jsonl"
SAMPLES_FILENAME = "samples.jsonl"
LOSS_LOG_FILENAME = "loss.csv"
IMAGE_EXTENSION = ".ppm"


def _require(value: Optional[str], what: str) -> str:
    if not value:
        raise ConfigError(f"No {what} given on the command line or in paths")
    return value


def _resolve_config(args, **sections) -> RunConfig:
    """Config file, then global flags, then per-section flag overrides."""
    config = load_run_config(getattr(args, "config", None))
    config = config.with_overrides(
        seed=getattr(args, "seed", None), threads=getattr(args, "threads", None)
    )
    data = config.to_dict()
    changed = False
    for section, values in sections.items():
        for key, value in values.items():
            if value is not None:
                data[section][key] = value
                changed = True
    return RunConfig.from_dict(data) if changed else config


def _echo_config(config: RunConfig, out_dir: str) -> None:
    write_resolved_config(config, out_dir)
    print(dump_run_config(config))


def _dataset_annotations(dataset_dir: str):
    path = os.path.join(dataset_dir, ANNOTATIONS_FILENAME)
    if not os.path.isfile(path):
        raise ConfigError(f"Dataset '{dataset_dir}' has no {ANNOTATIONS_FILENAME}")
    return read_annotations(path)


def synth(args):
    """Handles the 'synth' subcommand."""
    config = _resolve_config(args)
    if args.count is not None:
        config = config.with_overrides(scenes=args.count)
    out_dir = _require(args.out_dir or config.paths.out, "output directory")
    os.makedirs(out_dir, exist_ok=True)

    def render(index: int):
        image, annotation = generate_scene(config.scene, index)
        write_ppm(os.path.join(out_dir, annotation.image_path), image)
        return annotation

    annotations = map_ordered(render, list(range(config.scenes)), config.threads)
    write_annotations(os.path.join(out_dir, ANNOTATIONS_FILENAME), annotations)
    logger.info(f"Wrote {len(annotations)} scenes to '{out_dir}'")
    _echo_config(config, out_dir)


def _prepare(config: RunConfig, dataset_dir: str):
    annotations = _dataset_annotations(dataset_dir)
    return prep_training_patches(
        annotations,
        dataset_dir,
        config.pyramid,
        config.anchors,
        config.seed,
        threads=config.threads,
    )


def prep(args):
    """Handles the 'prep' subcommand."""
    config = _resolve_config(args)
    dataset_dir = _require(args.dataset or config.paths.dataset, "dataset directory")
    out_dir = _require(args.out_dir or config.paths.out, "output directory")
    samples = _prepare(config, dataset_dir)

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, SAMPLES_FILENAME), "w", encoding="utf-8") as f:
        for index, sample in enumerate(samples):
            filename = f"patch_{index:06d}{IMAGE_EXTENSION}"
            write_ppm(os.path.join(out_dir, filename), Image(sample.pixels))
            provenance = sample.provenance
            record = annotation_to_record(Annotation(filename, sample.boxes))
            record.update(
                source=provenance.image_path,
                level=provenance.level,
                origin_x=provenance.origin_x,
                origin_y=provenance.origin_y,
                scale=provenance.scale,
            )
            f.write(json.dumps(record))
            f.write("\n")
    logger.info(f"Wrote {len(samples)} training patches to '{out_dir}'")
    _echo_config(config, out_dir)


def train(args):
    """Handles the 'train' subcommand."""
    config = _resolve_config(args, train={"total_iterations": args.iterations})
    dataset_dir = _require(args.dataset or config.paths.dataset, "dataset directory")
    checkpoint = _require(args.checkpoint or config.paths.checkpoint, "checkpoint path")
    out_dir = os.path.dirname(checkpoint) or "."
    log_path = args.loss_log or os.path.join(out_dir, LOSS_LOG_FILENAME)

    samples = _prepare(config, dataset_dir)
    if not samples:
        raise InputFormatError(f"Dataset '{dataset_dir}' yields no training patches")
    result = train_loop(samples, config.model, config.train, config.loss, config.augment)
    save_checkpoint(result.model, checkpoint)
    write_loss_log(log_path, result.log)
    logger.info(f"Loss log written to '{log_path}'")
    _echo_config(config, out_dir)


def _collect_images(inputs: Sequence[str]) -> List[Tuple[str, str]]:
    """(key, path) pairs; directory entries are keyed relative to the directory."""
    images = []
    for item in inputs:
        if os.path.isdir(item):
            for name in sorted(os.listdir(item)):
                if name.lower().endswith(IMAGE_EXTENSION):
                    images.append((name, os.path.join(item, name)))
        else:
            images.append((os.path.basename(item), item))
    return images


def detect(args):
    """Handles the 'detect' subcommand."""
    config = _resolve_config(
        args,
        detect={"score_threshold": args.score_threshold, "batch_size": args.batch_size},
    )
    checkpoint = _require(args.checkpoint or config.paths.checkpoint, "checkpoint path")
    out_path = _require(args.out or config.paths.detections, "detections output path")
    detect_config = config.detect
    if args.levels is not None:
        detect_config = restrict_levels(detect_config, parse_levels(args.levels))

    model = load_checkpoint(checkpoint)
    run = detect_image_candidates if args.raw else detect_image
    results = []
    for key, path in _collect_images(args.images):
        image = read_ppm(path)
        dets = run(model, image, detect_config, threads=config.threads)
        logger.info(f"{key}: {len(dets)} detections")
        results.append((key, dets))
    write_detections(out_path, results)
    _echo_config(config, os.path.dirname(out_path) or ".")


def evaluate(args):
    """Handles the 'eval' subcommand."""
    config = _resolve_config(args)
    detections_path = _require(args.detections or config.paths.detections, "detections file")
    annotations_path = _require(
        args.annotations or config.paths.annotations, "annotations file"
    )
    out_dir = _require(args.out_dir or config.paths.out, "output directory")

    dets = read_detections(detections_path, config.model.foreground_classes)
    gts = {a.image_path: a.objects for a in read_annotations(annotations_path)}
    report = curve(dets, gts, config.eval, threads=config.threads)
    write_report(out_dir, report)
    _echo_config(config, out_dir)


def _global_options() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration.")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Global seed.")
    common.add_argument(
        "--threads", type=int, default=argparse.SUPPRESS, help="Worker threads (1 = serial)."
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument(
        "--verbose", action="store_true", default=argparse.SUPPRESS, help="Debug logging."
    )
    verbosity.add_argument(
        "--quiet", action="store_true", default=argparse.SUPPRESS, help="Warnings only."
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = argparse.ArgumentParser(
        prog="sosdetect",
        description="Small-object detection with image pyramids and patch tiling.",
        epilog="Use 'sosdetect <command> --help' for more information on a specific command.",
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, help="Available commands")

    # --- synth ---
    synth_parser = subparsers.add_parser(
        "synth",
        parents=[common],
        help="Render a synthetic scene dataset.",
        epilog="Example: sosdetect synth data/train --count 200 --seed 42",
    )
    synth_parser.add_argument("out_dir", nargs="?", help="Output dataset directory.")
    synth_parser.add_argument("--count", type=int, help="Number of scenes (config 'scenes').")
    synth_parser.set_defaults(func=synth)

    # --- prep ---
    prep_parser = subparsers.add_parser(
        "prep", parents=[common], help="Write the prepared training patches of a dataset."
    )
    prep_parser.add_argument("dataset", nargs="?", help="Dataset directory.")
    prep_parser.add_argument("out_dir", nargs="?", help="Output patch directory.")
    prep_parser.set_defaults(func=prep)

    # --- train ---
    train_parser = subparsers.add_parser(
        "train",
        parents=[common],
        help="Train a detector checkpoint on a dataset.",
        epilog="Example: sosdetect train data/train runs/model.ckpt",
    )
    train_parser.add_argument("dataset", nargs="?", help="Dataset directory.")
    train_parser.add_argument("checkpoint", nargs="?", help="Output checkpoint path.")
    train_parser.add_argument("--iterations", type=int, help="Override total_iterations.")
    train_parser.add_argument("--loss-log", help="Loss CSV path (default: next to checkpoint).")
    train_parser.set_defaults(func=train)

    # --- detect ---
    detect_parser = subparsers.add_parser(
        "detect",
        parents=[common],
        help="Run a checkpoint over images and write JSON-lines detections.",
        epilog="Example: sosdetect detect runs/model.ckpt data/test --out dets.jsonl --levels 0",
    )
    detect_parser.add_argument("checkpoint", help="Checkpoint path.")
    detect_parser.add_argument("images", nargs="+", help="PPM images or directories of them.")
    detect_parser.add_argument("--out", help="Detections output file.")
    detect_parser.add_argument(
        "--levels",
        help="Pyramid levels to use: high, medium, low, or a list such as 0 / 1 / 2.. / 0,2.",
    )
    detect_parser.add_argument("--score-threshold", type=float, help="Candidate score threshold.")
    detect_parser.add_argument("--batch-size", type=int, help="Patches per forward pass.")
    detect_parser.add_argument(
        "--raw", action="store_true", help="Write candidates before NMS."
    )
    detect_parser.set_defaults(func=detect)

    # --- eval ---
    eval_parser = subparsers.add_parser(
        "eval",
        parents=[common],
        help="Score detections against annotations.",
        epilog="Example: sosdetect eval dets.jsonl data/test/annotations.jsonl runs/eval",
    )
    eval_parser.add_argument("detections", nargs="?", help="Detections file.")
    eval_parser.add_argument("annotations", nargs="?", help="Annotations file.")
    eval_parser.add_argument("out_dir", nargs="?", help="Report directory.")
    eval_parser.set_defaults(func=evaluate)

    return parser


def _configure_logging(args) -> None:
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Defines the command-line entry point for the tool."""
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        args.func(args)
    except SosDetectError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(4)
    except Exception as e:
        print(f"An unexpected error occurred: {e}", file=sys.stderr)
        sys.exit(1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
