"""Shared fixtures: random evaluator instances and a small PNG dataset."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from logodet.augment import save_image
from logodet.geometry import BBox, Detection, GroundTruthBox


def random_instance(rng: np.random.Generator, max_dets=8, max_gts=5, max_cats=3):
    """One random evaluator instance as plain tuples.

    Scores are continuous so ties have probability zero and the oracle's
    simple stable sort agrees with the implementation's ordering.
    """
    num_images = int(rng.integers(1, 3))
    num_cats = int(rng.integers(1, max_cats + 1))
    dets = []
    gts = []
    for _ in range(int(rng.integers(0, max_gts + 1))):
        x, y = rng.uniform(0, 60, size=2)
        w, h = rng.uniform(1, 40, size=2)
        gts.append((int(rng.integers(0, num_images)), int(rng.integers(0, num_cats)),
                    (x, y, x + w, y + h)))
    for _ in range(int(rng.integers(0, max_dets + 1))):
        if gts and rng.random() < 0.7:
            # jitter an existing GT so overlaps spread across thresholds
            img, cat, (x1, y1, x2, y2) = gts[int(rng.integers(0, len(gts)))]
            jitter = rng.uniform(-6, 6, size=4)
            x1j, y1j = x1 + jitter[0], y1 + jitter[1]
            x2j, y2j = max(x1j, x2 + jitter[2]), max(y1j, y2 + jitter[3])
            box = (x1j, y1j, x2j, y2j)
        else:
            img = int(rng.integers(0, num_images))
            cat = int(rng.integers(0, num_cats))
            x, y = rng.uniform(0, 60, size=2)
            w, h = rng.uniform(1, 40, size=2)
            box = (x, y, x + w, y + h)
        dets.append((img, cat, float(rng.uniform(0, 1)), box))
    return dets, gts


def to_package_types(dets, gts):
    pkg_dets = [
        Detection(bbox=BBox(*box), category_id=cat, score=score, image_id=img)
        for img, cat, score, box in dets
    ]
    pkg_gts = [
        GroundTruthBox(bbox=BBox(*box), category_id=cat, image_id=img)
        for img, cat, box in gts
    ]
    return pkg_dets, pkg_gts


def build_fixture_dataset(root: Path, num_images: int = 16, seed: int = 123) -> Path:
    """Small deterministic dataset: flat-color PNGs with a bright logo-like
    rectangle per annotation, plus a COCO-shaped annotation file."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    root.mkdir(parents=True, exist_ok=True)
    (root / "images").mkdir(exist_ok=True)
    images = []
    annotations = []
    categories = [{"id": c, "name": f"brand-{c}"} for c in range(3)]
    ann_id = 0
    for image_id in range(num_images):
        w, h = 48, 40
        img = np.full((h, w, 3), rng.integers(30, 200, size=3, dtype=np.uint8), dtype=np.uint8)
        for _ in range(int(rng.integers(1, 3))):
            bw = int(rng.integers(6, 16))
            bh = int(rng.integers(6, 14))
            x = int(rng.integers(0, w - bw))
            y = int(rng.integers(0, h - bh))
            cat = int(rng.integers(0, 3))
            img[y : y + bh, x : x + bw] = (255 - 60 * cat, 60 * cat, 128)
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": image_id,
                    "category_id": cat,
                    "bbox": [float(x), float(y), float(bw), float(bh)],
                    "area": float(bw * bh),
                }
            )
            ann_id += 1
        file_name = f"img_{image_id:03d}.png"
        save_image(img, root / "images" / file_name)
        images.append({"id": image_id, "file_name": file_name, "width": w, "height": h})
    payload = {"images": images, "annotations": annotations, "categories": categories}
    (root / "annotations.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return root


@pytest.fixture
def fixture_dataset(tmp_path: Path) -> Path:
    return build_fixture_dataset(tmp_path / "dataset")
