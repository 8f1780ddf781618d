"""Dataset, detection, and run-configuration file formats.

Annotation files follow the familiar COCO-like JSON shape (images /
annotations / categories, boxes as [x, y, w, h] floats); detection files
are a flat JSON list of scored records. Validation failures always name
the offending record and field. All writes go through a temp-file +
rename so readers never observe partial output.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .augment import CorruptionSpec
from .evaluation import DEFAULT_IOU_THRESHOLDS
from .geometry import Detection, GroundTruthBox, ImageSize, xywh_to_xyxy, xyxy_to_xywh
from .multiscale import ScalePlan, default_plan
from .postprocess import SoftNmsConfig

ANNOTATIONS_NAME = "annotations.json"
SEED_ENV_VAR = "LOGODET_SEED"


class ValidationError(Exception):
    """A file parsed but violated the format's invariants."""


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class ImageEntry:
    id: int
    file_name: str
    width: int
    height: int


@dataclass(frozen=True)
class AnnotationEntry:
    id: int
    image_id: int
    category_id: int
    bbox: tuple[float, float, float, float]  # x, y, w, h
    area: float


@dataclass(frozen=True)
class CategoryEntry:
    id: int
    name: str


@dataclass
class AnnotationFile:
    images: list[ImageEntry] = field(default_factory=list)
    annotations: list[AnnotationEntry] = field(default_factory=list)
    categories: list[CategoryEntry] = field(default_factory=list)

    def image_sizes(self) -> dict[int, ImageSize]:
        return {im.id: ImageSize(im.width, im.height) for im in self.images}

    def category_names(self) -> dict[int, str]:
        return {c.id: c.name for c in self.categories}

    def to_ground_truths(self) -> list[GroundTruthBox]:
        return [
            GroundTruthBox(
                bbox=xywh_to_xyxy(*a.bbox), category_id=a.category_id, image_id=a.image_id
            )
            for a in self.annotations
        ]


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise ValidationError(f"{where}: missing field {key!r}")
    return record[key]


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}: expected an integer, got {value!r}")
    return value


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _load_json(path: Path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read file: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path}: malformed JSON at line {exc.lineno} column {exc.colno} (offset {exc.pos})"
        ) from exc


def load_annotations(path: Path) -> AnnotationFile:
    """Parse and validate an annotation file.

    Ids must be unique per list and every annotation's image_id and
    category_id must resolve; box sizes must be nonnegative.
    """
    data = _load_json(path)
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top level must be an object")

    images: list[ImageEntry] = []
    for i, rec in enumerate(data.get("images", [])):
        where = f"images[{i}]"
        entry = ImageEntry(
            id=_as_int(_require(rec, "id", where), f"{where}.id"),
            file_name=str(_require(rec, "file_name", where)),
            width=_as_int(_require(rec, "width", where), f"{where}.width"),
            height=_as_int(_require(rec, "height", where), f"{where}.height"),
        )
        if entry.width < 1 or entry.height < 1:
            raise ValidationError(f"{where} (id={entry.id}): width and height must be >= 1")
        images.append(entry)

    categories: list[CategoryEntry] = []
    for i, rec in enumerate(data.get("categories", [])):
        where = f"categories[{i}]"
        categories.append(
            CategoryEntry(
                id=_as_int(_require(rec, "id", where), f"{where}.id"),
                name=str(_require(rec, "name", where)),
            )
        )

    annotations: list[AnnotationEntry] = []
    for i, rec in enumerate(data.get("annotations", [])):
        where = f"annotations[{i}]"
        bbox_raw = _require(rec, "bbox", where)
        if not isinstance(bbox_raw, list) or len(bbox_raw) != 4:
            raise ValidationError(f"{where}.bbox: expected [x, y, w, h]")
        bbox = tuple(_as_number(v, f"{where}.bbox[{k}]") for k, v in enumerate(bbox_raw))
        entry = AnnotationEntry(
            id=_as_int(_require(rec, "id", where), f"{where}.id"),
            image_id=_as_int(_require(rec, "image_id", where), f"{where}.image_id"),
            category_id=_as_int(_require(rec, "category_id", where), f"{where}.category_id"),
            bbox=bbox,  # type: ignore[arg-type]
            area=_as_number(rec.get("area", bbox[2] * bbox[3]), f"{where}.area"),
        )
        if entry.bbox[2] < 0 or entry.bbox[3] < 0:
            raise ValidationError(f"{where} (id={entry.id}): bbox w and h must be nonnegative")
        annotations.append(entry)

    for list_name, ids in (
        ("images", [im.id for im in images]),
        ("categories", [c.id for c in categories]),
        ("annotations", [a.id for a in annotations]),
    ):
        seen: set[int] = set()
        for value in ids:
            if value in seen:
                raise ValidationError(f"{list_name}: duplicate id {value}")
            seen.add(value)

    image_ids = {im.id for im in images}
    category_ids = {c.id for c in categories}
    for i, a in enumerate(annotations):
        if a.image_id not in image_ids:
            raise ValidationError(
                f"annotations[{i}] (id={a.id}): image_id {a.image_id} does not resolve"
            )
        if a.category_id not in category_ids:
            raise ValidationError(
                f"annotations[{i}] (id={a.id}): category_id {a.category_id} does not resolve"
            )
    return AnnotationFile(images=images, annotations=annotations, categories=categories)


def save_annotations(ann: AnnotationFile, path: Path) -> None:
    payload = {
        "images": [vars(im) for im in ann.images],
        "annotations": [
            {
                "id": a.id,
                "image_id": a.image_id,
                "category_id": a.category_id,
                "bbox": list(a.bbox),
                "area": a.area,
            }
            for a in ann.annotations
        ],
        "categories": [vars(c) for c in ann.categories],
    }
    atomic_write_text(Path(path), json.dumps(payload, indent=2) + "\n")


def load_detections(path: Path) -> list[Detection]:
    """Parse a flat detection list; box validity and score range are
    checked here, id resolution happens against an annotation file at
    evaluation time."""
    data = _load_json(path)
    if not isinstance(data, list):
        raise ValidationError(f"{path}: top level must be a list of detection records")
    out: list[Detection] = []
    for i, rec in enumerate(data):
        where = f"detections[{i}]"
        bbox_raw = _require(rec, "bbox", where)
        if not isinstance(bbox_raw, list) or len(bbox_raw) != 4:
            raise ValidationError(f"{where}.bbox: expected [x, y, w, h]")
        x, y, w, h = (_as_number(v, f"{where}.bbox[{k}]") for k, v in enumerate(bbox_raw))
        score = _as_number(_require(rec, "score", where), f"{where}.score")
        if not 0.0 <= score <= 1.0:
            raise ValidationError(f"{where}.score: must be in [0, 1], got {score}")
        if w < 0 or h < 0:
            raise ValidationError(f"{where}.bbox: w and h must be nonnegative")
        out.append(
            Detection(
                bbox=xywh_to_xyxy(x, y, w, h),
                category_id=_as_int(_require(rec, "category_id", where), f"{where}.category_id"),
                score=score,
                image_id=_as_int(_require(rec, "image_id", where), f"{where}.image_id"),
            )
        )
    return out


def save_detections(dets: list[Detection], path: Path) -> None:
    payload = [
        {
            "image_id": d.image_id,
            "category_id": d.category_id,
            "bbox": list(xyxy_to_xywh(d.bbox)),
            "score": d.score,
        }
        for d in dets
    ]
    atomic_write_text(Path(path), json.dumps(payload, indent=2) + "\n")


@dataclass
class RunConfig:
    """One artifact-wide configuration document, one section per concern."""

    seed: int = 0
    thresholds: list[float] = field(default_factory=lambda: list(DEFAULT_IOU_THRESHOLDS))
    soft_nms: SoftNmsConfig = field(default_factory=SoftNmsConfig)
    scale_plan: ScalePlan = field(default_factory=default_plan)
    corruptions: list[CorruptionSpec] = field(
        default_factory=lambda: [CorruptionSpec(kind=k, severity=0.5) for k in
                                 ("gaussian_noise", "rain", "fog", "blur")]
    )


def load_config(path: Path) -> RunConfig:
    """Read a JSON run config; missing sections keep their defaults."""
    data = _load_json(path)
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top level must be an object")
    cfg = RunConfig()
    try:
        if "seed" in data:
            cfg.seed = _as_int(data["seed"], "seed")
        if "evaluation" in data:
            thresholds = data["evaluation"].get("thresholds")
            if thresholds is not None:
                cfg.thresholds = [_as_number(t, "evaluation.thresholds") for t in thresholds]
        if "soft_nms" in data:
            cfg.soft_nms = SoftNmsConfig(**data["soft_nms"])
        if "multiscale" in data:
            section = data["multiscale"]
            cfg.scale_plan = ScalePlan(
                short_side_targets=tuple(
                    section.get("short_side_targets", cfg.scale_plan.short_side_targets)
                ),
                max_long_side=section.get("max_long_side", cfg.scale_plan.max_long_side),
            )
        if "corruptions" in data:
            cfg.corruptions = [CorruptionSpec(**entry) for entry in data["corruptions"]]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: invalid configuration: {exc}") from exc
    return cfg


def save_config(cfg: RunConfig, path: Path) -> None:
    payload = {
        "seed": cfg.seed,
        "evaluation": {"thresholds": cfg.thresholds},
        "soft_nms": {
            "method": cfg.soft_nms.method,
            "iou_threshold": cfg.soft_nms.iou_threshold,
            "sigma": cfg.soft_nms.sigma,
            "score_floor": cfg.soft_nms.score_floor,
        },
        "multiscale": {
            "short_side_targets": list(cfg.scale_plan.short_side_targets),
            "max_long_side": cfg.scale_plan.max_long_side,
        },
        "corruptions": [
            {
                key: value
                for key, value in vars(spec).items()
                if value is not None
            }
            for spec in cfg.corruptions
        ],
    }
    atomic_write_text(Path(path), json.dumps(payload, indent=2) + "\n")
