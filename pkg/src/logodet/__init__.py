"""Robust logo-detection toolkit.

Box geometry and IoU, (Soft-)NMS post-processing, COCO-style mAP
evaluation over an IoU-threshold sweep, a gradient-equalized loss for
long-tailed category distributions with a toy training demo, deterministic
image corruptions, multi-scale resize planning and test-time fusion, and a
forward-only simulator of the detector's pyramid/cascade wiring.
"""

from .geometry import BBox, Detection, GroundTruthBox, ImageSize, area, clip, iou
from .postprocess import SoftNmsConfig, soft_nms, standard_nms
from .evaluation import DEFAULT_IOU_THRESHOLDS, EvalResult, evaluate

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "Detection",
    "GroundTruthBox",
    "ImageSize",
    "SoftNmsConfig",
    "EvalResult",
    "DEFAULT_IOU_THRESHOLDS",
    "area",
    "clip",
    "iou",
    "soft_nms",
    "standard_nms",
    "evaluate",
    "__version__",
]
