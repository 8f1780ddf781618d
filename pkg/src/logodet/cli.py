"""Command-line surface: evaluate, corrupt, postprocess, plan-scales,
simulate, and eql-demo subcommands.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 partial
failure. Every command is deterministic given (inputs, config, seed); the
LOGODET_SEED environment variable overrides the config seed, and an
explicit --seed flag overrides both.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .dataio import (
    SEED_ENV_VAR,
    RunConfig,
    ValidationError,
    load_annotations,
    load_config,
    load_detections,
    save_detections,
)
from .augment import corrupt_dataset
from .evaluation import evaluate
from .geometry import Detection, ImageSize
from .longtail import DemoConfig, run_longtail_demo
from .multiscale import fuse_multiscale, plan_dimensions
from .netsim import run_simulation
from .postprocess import SoftNmsConfig, soft_nms, standard_nms

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_PARTIAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="logodet", description=__doc__)
    parser.add_argument("--config", type=Path, help="run configuration JSON")
    parser.add_argument("--seed", type=int, help="master seed override")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score a detection file against annotations")
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--detections", type=Path, required=True)

    p = sub.add_parser("corrupt", help="corrupt a dataset directory")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("postprocess", help="suppress or fuse detections")
    p.add_argument("--detections", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument(
        "--method", choices=("standard", "hard", "linear", "gaussian"),
        help="suppression method (default: config soft_nms.method)",
    )
    p.add_argument("--iou-threshold", type=float, dest="iou_threshold")
    p.add_argument("--sigma", type=float)
    p.add_argument("--score-floor", type=float, dest="score_floor")
    p.add_argument(
        "--fuse", action="append", metavar="FILE:FACTOR",
        help="per-scale detection file with its resize factor; repeatable",
    )

    p = sub.add_parser("plan-scales", help="resolved sizes for every plan target")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)

    sub.add_parser("simulate", help="seeded pyramid forward pass")

    sub.add_parser("eql-demo", help="long-tailed toy training comparison")
    return parser


def _resolve_seed(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise _UsageError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
    return cfg.seed


def _group_by_image(dets: list[Detection]) -> dict[int, list[Detection]]:
    groups: dict[int, list[Detection]] = {}
    for d in dets:
        groups.setdefault(d.image_id, []).append(d)
    return groups


def _cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    ann = load_annotations(args.annotations)
    dets = load_detections(args.detections)
    known_images = {im.id for im in ann.images}
    for i, det in enumerate(dets):
        if det.image_id not in known_images:
            raise ValidationError(
                f"detections[{i}]: image_id {det.image_id} not present in the annotation file"
            )
    result = evaluate(dets, ann.to_ground_truths(), cfg.thresholds)
    names = ann.category_names()
    print("AP per category (mean over IoU thresholds):")
    for cat in result.categories:
        label = names.get(cat, "?")
        print(f"  category {cat} ({label}): {result.category_ap(cat):.6f}")
    for t in result.thresholds:
        print(f"mAP@{t:.2f} {result.map_per_threshold[t]:.6f}")
    print(f"mAP {result.map_overall:.6f}")
    return EXIT_OK


def _cmd_corrupt(args: argparse.Namespace, cfg: RunConfig, seed: int) -> int:
    result = corrupt_dataset(args.dataset, cfg.corruptions, seed, args.out)
    print(f"corrupted {len(result.records)} images into {result.out_dir}")
    if result.errors:
        print(f"{len(result.errors)} images failed (see errors.log)", file=sys.stderr)
        return EXIT_VALIDATION if not result.records else EXIT_PARTIAL
    return EXIT_OK


def _soft_nms_config(args: argparse.Namespace, cfg: RunConfig) -> SoftNmsConfig:
    base = cfg.soft_nms
    method = args.method if args.method not in (None, "standard") else base.method
    return SoftNmsConfig(
        method=method,
        iou_threshold=args.iou_threshold if args.iou_threshold is not None else base.iou_threshold,
        sigma=args.sigma if args.sigma is not None else base.sigma,
        score_floor=args.score_floor if args.score_floor is not None else base.score_floor,
    )


def _cmd_postprocess(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.fuse:
        nms_cfg = _soft_nms_config(args, cfg)
        per_scale: list[list[Detection]] = []
        factors: list[float] = []
        for item in args.fuse:
            path, sep, factor = item.rpartition(":")
            if not sep or not path:
                raise _UsageError(f"--fuse expects FILE:FACTOR, got {item!r}")
            try:
                factors.append(float(factor))
            except ValueError as exc:
                raise _UsageError(f"--fuse factor must be a number, got {factor!r}") from exc
            per_scale.append(load_detections(Path(path)))
        if any(f <= 0 for f in factors):
            raise ValidationError(f"resize factors must be positive, got {factors}")
        fused = fuse_multiscale(per_scale, factors, nms_cfg)
        save_detections(fused, args.out)
        print(f"fused {sum(map(len, per_scale))} detections into {len(fused)}")
        return EXIT_OK

    if args.detections is None:
        raise _UsageError("postprocess needs --detections or --fuse entries")
    dets = load_detections(args.detections)
    out: list[Detection] = []
    if args.method == "standard":
        threshold = args.iou_threshold if args.iou_threshold is not None else cfg.soft_nms.iou_threshold
        for group in _group_by_image(dets).values():
            out.extend(standard_nms(group, threshold))
    else:
        nms_cfg = _soft_nms_config(args, cfg)
        for group in _group_by_image(dets).values():
            out.extend(soft_nms(group, nms_cfg))
    save_detections(out, args.out)
    print(f"kept {len(out)} of {len(dets)} detections")
    return EXIT_OK


def _cmd_plan_scales(args: argparse.Namespace, cfg: RunConfig) -> int:
    size = ImageSize(args.width, args.height)
    for target, w, h in plan_dimensions(cfg.scale_plan, size):
        print(f"{target}\t{w}\t{h}")
    return EXIT_OK


def _cmd_simulate(seed: int) -> int:
    report = run_simulation(seed=seed)
    h, w, c = report.input_shape
    print(f"input {h}x{w}x{c}")
    print(f"switchable-conv checksum {report.sac_checksum}")
    for i, (shape, checksum) in enumerate(zip(report.stage_shapes, report.stage_checksums), 1):
        sh, sw, sc = shape
        print(f"stage {i}: {sh}x{sw}x{sc} checksum {checksum}")
    print(f"cascade: {report.cascade_stages} stages, {report.cascade_boxes} boxes")
    return EXIT_OK


def _cmd_eql_demo(seed: int) -> int:
    report = run_longtail_demo(seed, DemoConfig())
    print(f"long-tail demo (seed {seed})")
    print("group\trecall[cross-entropy]\trecall[equalized]")
    for name in ("head", "mid", "tail"):
        print(
            f"{name}\t{report.group_recall_ce[name]:.6f}\t{report.group_recall_eqlv2[name]:.6f}"
        )
    for j, value in enumerate(report.final_g):
        print(f"g[{j}] {value:.6f}")
    print(
        f"tail recall: cross-entropy {report.group_recall_ce['tail']:.6f} "
        f"equalized {report.group_recall_eqlv2['tail']:.6f}"
    )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config) if args.config else RunConfig()
        seed = _resolve_seed(args, cfg)
        if args.command == "evaluate":
            return _cmd_evaluate(args, cfg)
        if args.command == "corrupt":
            return _cmd_corrupt(args, cfg, seed)
        if args.command == "postprocess":
            return _cmd_postprocess(args, cfg)
        if args.command == "plan-scales":
            return _cmd_plan_scales(args, cfg)
        if args.command == "simulate":
            return _cmd_simulate(seed)
        if args.command == "eql-demo":
            return _cmd_eql_demo(seed)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
