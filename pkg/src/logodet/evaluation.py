"""Per-category average precision over an IoU-threshold sweep.

AP for one (category, threshold) pair is the area under the
precision-recall curve, integrated with the 101-point interpolation rule
(precision at each recall gridpoint r in {0.00, 0.01, ..., 1.00} is the
maximum precision attained at any recall >= r). The headline metric is the
unweighted mean over categories that have ground truth, then over the
threshold set, default {0.50, 0.55, ..., 0.95}.

Matching is greedy: detections are visited in descending score order
(ties broken by lexicographic box coordinates, so results do not depend
on input order) and each one claims the unmatched ground-truth box with
the highest IoU, provided that IoU meets the threshold. Every other
detection is a false positive, and categories with zero ground-truth
instances are excluded from the mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Detection, GroundTruthBox, iou

DEFAULT_IOU_THRESHOLDS: tuple[float, ...] = tuple(t / 100.0 for t in range(50, 100, 5))

_RECALL_GRID = np.linspace(0.0, 1.0, 101)


@dataclass
class MatchResult:
    """Flags from matching one (image, category) detection set against GT.

    ``scores`` and ``tp`` are parallel, ordered by descending score;
    ``gt_matched`` is parallel to the ground-truth input. A detection is a
    true positive iff it matched; each GT box is claimed at most once.
    """

    scores: list[float]
    tp: list[bool]
    gt_matched: list[bool]


@dataclass
class EvalResult:
    """AP per (category_id, threshold), plus threshold-level and overall means."""

    ap: dict[tuple[int, float], float]
    map_per_threshold: dict[float, float]
    map_overall: float
    thresholds: list[float]
    categories: list[int] = field(default_factory=list)

    def category_ap(self, category_id: int) -> float:
        """Mean AP over thresholds for one category."""
        values = [self.ap[(category_id, t)] for t in self.thresholds]
        return float(np.mean(values)) if values else 0.0


def match_detections(
    dets: list[Detection],
    gts: list[GroundTruthBox],
    iou_threshold: float,
) -> MatchResult:
    """Greedily match one (image, category) group of detections to GT.

    Score ties are broken by lexicographic box coordinates so the result
    is a function of the detection set, not of its input order.
    """
    order = sorted(
        range(len(dets)),
        key=lambda i: (-dets[i].score,) + dets[i].bbox.as_tuple(),
    )
    gt_matched = [False] * len(gts)
    scores: list[float] = []
    tp: list[bool] = []
    for i in order:
        det = dets[i]
        best_j = -1
        best_overlap = 0.0
        for j, gt in enumerate(gts):
            if gt_matched[j]:
                continue
            overlap = iou(det.bbox, gt.bbox)
            if overlap >= iou_threshold and overlap > best_overlap:
                best_overlap = overlap
                best_j = j
        scores.append(det.score)
        if best_j >= 0:
            gt_matched[best_j] = True
            tp.append(True)
        else:
            tp.append(False)
    return MatchResult(scores=scores, tp=tp, gt_matched=gt_matched)


def precision_recall_curve(
    matches: list[MatchResult],
    total_gt_count: int,
) -> list[tuple[float, float]]:
    """Pool per-image match results into one (recall, precision) curve.

    Detections are pooled across images and sorted by descending score
    (stable, so ties keep the given per-image order); cumulative TP/FP
    counts give one curve point per detection. No ground truth means an
    empty curve.
    """
    if total_gt_count < 0:
        raise ValueError("total_gt_count must be nonnegative")
    if total_gt_count == 0:
        return []
    pooled: list[tuple[float, bool]] = []
    for m in matches:
        pooled.extend(zip(m.scores, m.tp))
    pooled.sort(key=lambda p: -p[0])
    curve: list[tuple[float, float]] = []
    tp_cum = 0
    for k, (_, is_tp) in enumerate(pooled, start=1):
        if is_tp:
            tp_cum += 1
        curve.append((tp_cum / total_gt_count, tp_cum / k))
    return curve


def average_precision(curve: list[tuple[float, float]]) -> float:
    """101-point interpolated area under a precision-recall curve.

    An empty curve yields 0; callers decide whether a category with no
    ground truth should instead be excluded from any averaging.
    """
    if not curve:
        return 0.0
    recalls = np.array([r for r, _ in curve])
    precisions = np.array([p for _, p in curve])
    # Max precision at any recall >= r: running maximum from the right,
    # then indexed per gridpoint. Recalls are nondecreasing by construction.
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    idx = np.searchsorted(recalls, _RECALL_GRID, side="left")
    grid_prec = np.where(idx < len(curve), envelope[np.minimum(idx, len(curve) - 1)], 0.0)
    return float(grid_prec.mean())


def evaluate(
    dets: list[Detection],
    gts: list[GroundTruthBox],
    thresholds: list[float] | None = None,
) -> EvalResult:
    """AP per (category, threshold) plus mAP, for pooled detections and GT.

    Only categories present in the ground truth participate; detections
    for other categories are ignored by the mean. With no ground truth at
    all, every mAP is defined as 0.
    """
    if thresholds is None:
        thresholds = list(DEFAULT_IOU_THRESHOLDS)
    if not thresholds:
        raise ValueError("thresholds must be nonempty")
    if any(not 0.0 < t < 1.0 for t in thresholds):
        raise ValueError(f"thresholds must lie in (0, 1), got {thresholds}")
    if any(b >= a for a, b in zip(thresholds[1:], thresholds)):
        raise ValueError(f"thresholds must be strictly increasing, got {thresholds}")

    categories = sorted({gt.category_id for gt in gts})
    gts_by_cat_img: dict[int, dict[int, list[GroundTruthBox]]] = {}
    for gt in gts:
        gts_by_cat_img.setdefault(gt.category_id, {}).setdefault(gt.image_id, []).append(gt)
    dets_by_cat_img: dict[int, dict[int, list[Detection]]] = {}
    for det in dets:
        if det.category_id in gts_by_cat_img:
            dets_by_cat_img.setdefault(det.category_id, {}).setdefault(det.image_id, []).append(det)

    ap: dict[tuple[int, float], float] = {}
    for cat in categories:
        cat_gts = gts_by_cat_img[cat]
        total_gt = sum(len(v) for v in cat_gts.values())
        cat_dets = dets_by_cat_img.get(cat, {})
        image_ids = sorted(set(cat_gts) | set(cat_dets))
        for t in thresholds:
            matches = [
                match_detections(cat_dets.get(img, []), cat_gts.get(img, []), t)
                for img in image_ids
            ]
            ap[(cat, t)] = average_precision(precision_recall_curve(matches, total_gt))

    map_per_threshold = {
        t: (float(np.mean([ap[(c, t)] for c in categories])) if categories else 0.0)
        for t in thresholds
    }
    map_overall = float(np.mean(list(map_per_threshold.values()))) if categories else 0.0
    return EvalResult(
        ap=ap,
        map_per_threshold=map_per_threshold,
        map_overall=map_overall,
        thresholds=list(thresholds),
        categories=categories,
    )
