"""Standard NMS and Soft-NMS rescoring for per-image detection sets.

Suppression is strictly per category; detections of different categories
never interact. Equal scores are broken deterministically by category id
and then by lexicographic box coordinates, so the output is invariant to
the input permutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .geometry import Detection, iou

METHODS = ("hard", "linear", "gaussian")


@dataclass(frozen=True)
class SoftNmsConfig:
    """Soft-NMS settings.

    ``iou_threshold`` gates the hard and linear decay methods, ``sigma``
    shapes the gaussian decay, and detections rescored below
    ``score_floor`` are dropped.
    """

    method: str = "gaussian"
    iou_threshold: float = 0.5
    sigma: float = 0.5
    score_floor: float = 0.001

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 <= self.score_floor < 1.0:
            raise ValueError(f"score_floor must be in [0, 1), got {self.score_floor}")


def _sort_key(d: Detection) -> tuple:
    return (-d.score, d.category_id, d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max)


def _by_category(dets: list[Detection]) -> dict[int, list[Detection]]:
    groups: dict[int, list[Detection]] = {}
    for d in dets:
        groups.setdefault(d.category_id, []).append(d)
    return groups


def standard_nms(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy NMS: per category, drop any detection whose IoU with an
    already-kept detection exceeds ``iou_threshold``.

    Returns a subset of the input, sorted by descending score.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    kept: list[Detection] = []
    for group in _by_category(dets).values():
        group_kept: list[Detection] = []
        for d in sorted(group, key=_sort_key):
            if all(iou(d.bbox, k.bbox) <= iou_threshold for k in group_kept):
                group_kept.append(d)
        kept.extend(group_kept)
    return sorted(kept, key=_sort_key)


def _decay(cfg: SoftNmsConfig, overlap: float) -> float:
    if cfg.method == "gaussian":
        return math.exp(-(overlap * overlap) / cfg.sigma)
    if cfg.method == "linear":
        return 1.0 - overlap if overlap > cfg.iou_threshold else 1.0
    # hard
    return 0.0 if overlap > cfg.iou_threshold else 1.0


def soft_nms(dets: list[Detection], cfg: SoftNmsConfig) -> list[Detection]:
    """Soft-NMS: iteratively keep the highest-scoring detection and decay
    the scores of its same-category overlaps instead of deleting them.

    Scores never increase and boxes never move; detections whose rescored
    score falls below ``cfg.score_floor`` are dropped.
    """
    if not isinstance(cfg, SoftNmsConfig):
        raise TypeError(f"cfg must be a SoftNmsConfig, got {type(cfg).__name__}")
    kept: list[Detection] = []
    for group in _by_category(dets).values():
        pool = sorted(group, key=_sort_key)
        while pool:
            best = min(pool, key=_sort_key)
            pool.remove(best)
            kept.append(best)
            rescored: list[Detection] = []
            for d in pool:
                new_score = d.score * _decay(cfg, iou(best.bbox, d.bbox))
                if new_score >= cfg.score_floor:
                    rescored.append(replace(d, score=new_score))
            pool = rescored
    return sorted(kept, key=_sort_key)
