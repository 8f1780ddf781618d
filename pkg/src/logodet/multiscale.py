"""Aspect-preserving resize planning and multi-scale detection fusion.

An image is resized so its short side hits a target unless that would push
the long side past the cap (default 1333), in which case the cap binds.
Test-time fusion maps per-scale detections back to the original frame and
lets Soft-NMS arbitrate the duplicates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .geometry import BBox, Detection, ImageSize
from .postprocess import SoftNmsConfig, soft_nms

DEFAULT_SHORT_SIDE_TARGETS = (800, 900, 1000, 1100)
DEFAULT_MAX_LONG_SIDE = 1333


@dataclass(frozen=True)
class ScalePlan:
    """Strictly increasing short-side targets under one long-side cap."""

    short_side_targets: tuple[int, ...]
    max_long_side: int

    def __post_init__(self) -> None:
        if not self.short_side_targets:
            raise ValueError("need at least one short-side target")
        if any(t < 1 for t in self.short_side_targets) or self.max_long_side < 1:
            raise ValueError("targets and max_long_side must be positive")
        if any(b >= a for a, b in zip(self.short_side_targets[1:], self.short_side_targets)):
            raise ValueError(f"targets must be strictly increasing, got {self.short_side_targets}")
        if self.short_side_targets[-1] > self.max_long_side:
            raise ValueError("every target must be <= max_long_side")


def default_plan() -> ScalePlan:
    return ScalePlan(DEFAULT_SHORT_SIDE_TARGETS, DEFAULT_MAX_LONG_SIDE)


def resize_factor(size: ImageSize, target_short: int, max_long: int) -> float:
    """Scale factor hitting the short-side target unless the long-side cap binds."""
    if target_short < 1 or max_long < 1:
        raise ValueError("target_short and max_long must be positive")
    short = min(size.width, size.height)
    long_ = max(size.width, size.height)
    return min(target_short / short, max_long / long_)


def resized_dims(size: ImageSize, factor: float) -> tuple[int, int]:
    """(width, height) after scaling, rounded half-to-even, floored at 1."""
    if factor <= 0:
        raise ValueError(f"factor must be positive, got {factor}")
    return (max(1, round(size.width * factor)), max(1, round(size.height * factor)))


def plan_dimensions(plan: ScalePlan, size: ImageSize) -> list[tuple[int, int, int]]:
    """Resolved (target, width, height) for every target of the plan."""
    out = []
    for target in plan.short_side_targets:
        w, h = resized_dims(size, resize_factor(size, target, plan.max_long_side))
        out.append((target, w, h))
    return out


def scale_box(b: BBox, factor: float) -> BBox:
    if factor <= 0:
        raise ValueError(f"factor must be positive, got {factor}")
    return BBox(b.x_min * factor, b.y_min * factor, b.x_max * factor, b.y_max * factor)


def scale_boxes(boxes: list[BBox], factor: float) -> list[BBox]:
    """Multiply every coordinate by ``factor``."""
    return [scale_box(b, factor) for b in boxes]


def fuse_multiscale(
    per_scale_dets: list[list[Detection]],
    factors: list[float],
    cfg: SoftNmsConfig = SoftNmsConfig(),
) -> list[Detection]:
    """Fuse per-scale detections: map each list back to the original frame
    via its resize factor, pool everything, and Soft-NMS per image and
    category. Output coordinates are in the original image frame.
    """
    if len(per_scale_dets) != len(factors):
        raise ValueError("need exactly one resize factor per detection list")
    if any(f <= 0 for f in factors):
        raise ValueError(f"factors must be positive, got {factors}")
    pooled: dict[int, list[Detection]] = {}
    for dets, factor in zip(per_scale_dets, factors):
        for d in dets:
            mapped = replace(d, bbox=scale_box(d.bbox, 1.0 / factor))
            pooled.setdefault(d.image_id, []).append(mapped)
    fused: list[Detection] = []
    for image_id in sorted(pooled):
        fused.extend(soft_nms(pooled[image_id], cfg))
    return fused
