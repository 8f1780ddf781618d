"""Axis-aligned box arithmetic and the IoU overlap measure.

Coordinates are continuous reals in pixel units (COCO-style floats); there
is no +1 pixel-inclusive convention anywhere in this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    """Box given by its corners, with x_max >= x_min and y_max >= y_min."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValueError(f"box corners out of order: {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class ImageSize:
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be >= 1x1, got {self.width}x{self.height}")


@dataclass(frozen=True)
class Detection:
    """A scored box prediction on one image."""

    bbox: BBox
    category_id: int
    score: float
    image_id: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.category_id < 0 or self.image_id < 0:
            raise ValueError("category_id and image_id must be nonnegative")


@dataclass(frozen=True)
class GroundTruthBox:
    """An annotated box on one image."""

    bbox: BBox
    category_id: int
    image_id: int

    def __post_init__(self) -> None:
        if self.category_id < 0 or self.image_id < 0:
            raise ValueError("category_id and image_id must be nonnegative")


def area(b: BBox) -> float:
    """Box area; degenerate (zero width or height) boxes return 0."""
    return b.width * b.height


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes, 0 when the union has zero area."""
    ix_min = max(a.x_min, b.x_min)
    iy_min = max(a.y_min, b.y_min)
    ix_max = min(a.x_max, b.x_max)
    iy_max = min(a.y_max, b.y_max)
    iw = max(0.0, ix_max - ix_min)
    ih = max(0.0, iy_max - iy_min)
    inter = iw * ih
    union = area(a) + area(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def clip(b: BBox, s: ImageSize) -> BBox:
    """Clamp a box to [0, width] x [0, height]."""

    def _cx(v: float) -> float:
        return min(max(v, 0.0), float(s.width))

    def _cy(v: float) -> float:
        return min(max(v, 0.0), float(s.height))

    return BBox(_cx(b.x_min), _cy(b.y_min), _cx(b.x_max), _cy(b.y_max))


def xywh_to_xyxy(x: float, y: float, w: float, h: float) -> BBox:
    """Convert a corner+size box to corner-corner form; rejects negative sizes."""
    if w < 0 or h < 0:
        raise ValueError(f"width and height must be nonnegative, got w={w}, h={h}")
    return BBox(x, y, x + w, y + h)


def xyxy_to_xywh(b: BBox) -> tuple[float, float, float, float]:
    """Inverse of :func:`xywh_to_xyxy`."""
    return (b.x_min, b.y_min, b.width, b.height)
