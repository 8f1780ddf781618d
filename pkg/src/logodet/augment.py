"""Seeded, deterministic image corruptions: noise, rain, fog, blur.

All corruptions are geometry-preserving (annotations stay valid verbatim)
and byte-exact reproducible: randomness comes from a counter-based
generator (Philox) keyed per image, float accumulation happens in a fixed
order, and quantization is a single clamp-to-[0,255] followed by
round-half-to-even. A zero parameter (or zero severity) is a byte
identity for every kind.

Images are H x W x 3 uint8 arrays throughout.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

CORRUPTION_KINDS = ("gaussian_noise", "rain", "fog", "blur")

# Fixed streak appearance; density and angle are the tunable knobs.
RAIN_BRIGHTNESS = 220.0
RAIN_ALPHA = 0.35
RAIN_LENGTH_RANGE = (8.0, 18.0)


def _check_image(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 array, got {getattr(img, 'shape', type(img))}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {img.dtype}")
    return img


def _quantize(values: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255], round half-to-even, return uint8."""
    return np.rint(np.clip(values, 0.0, 255.0)).astype(np.uint8)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))


def derive_seed(master_seed: int, image_id: int) -> int:
    """Stable, platform-independent per-image seed."""
    payload = struct.pack("<qq", master_seed & 0x7FFFFFFFFFFFFFFF, image_id)
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def gaussian_noise(img: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Additive zero-mean per-channel Gaussian noise in pixel units."""
    _check_image(img)
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return img.copy()
    noise = _rng(seed).normal(0.0, sigma, size=img.shape)
    return _quantize(img.astype(np.float64) + noise)


def fog(img: np.ndarray, attenuation: float, airlight: float) -> np.ndarray:
    """Atmospheric blend toward a gray airlight, heavier toward the bottom.

    Transmission is exp(-attenuation * depth) against a fixed vertical
    depth ramp running from 0 at the top row to 1 at the bottom row (a
    single-row image sits at depth 1).
    """
    _check_image(img)
    if attenuation < 0:
        raise ValueError(f"attenuation must be nonnegative, got {attenuation}")
    if not 0.0 <= airlight <= 255.0:
        raise ValueError(f"airlight must be in [0, 255], got {airlight}")
    if attenuation == 0:
        return img.copy()
    h = img.shape[0]
    depth = np.ones(h) if h == 1 else np.arange(h) / (h - 1)
    t = np.exp(-attenuation * depth)[:, None, None]
    return _quantize(img.astype(np.float64) * t + airlight * (1.0 - t))


def _streak_pixels(
    cx: float, cy: float, length: float, angle_deg: float, h: int, w: int
) -> list[tuple[int, int]]:
    """Pixels covered by one streak, in traversal order, deduplicated."""
    rad = math.radians(angle_deg)
    dx, dy = math.sin(rad), math.cos(rad)
    steps = max(1, int(math.ceil(length / 0.5)))
    seen: dict[tuple[int, int], None] = {}
    for k in range(steps + 1):
        t = length * (k / steps - 0.5)
        px = int(round(cx + t * dx))
        py = int(round(cy + t * dy))
        if 0 <= px < w and 0 <= py < h:
            seen[(py, px)] = None
    return list(seen)


def rain(img: np.ndarray, density: float, angle: float, seed: int) -> np.ndarray:
    """Alpha-composite brightening streaks; ``density`` is streaks per
    kilopixel and ``angle`` is degrees from vertical."""
    _check_image(img)
    if density < 0:
        raise ValueError(f"density must be nonnegative, got {density}")
    h, w = img.shape[:2]
    count = int(np.rint(density * w * h / 1000.0))
    if count == 0:
        return img.copy()
    rng = _rng(seed)
    buf = img.astype(np.float64)
    lo, hi = RAIN_LENGTH_RANGE
    for _ in range(count):
        cx = rng.uniform(0.0, w)
        cy = rng.uniform(0.0, h)
        length = rng.uniform(lo, hi)
        for py, px in _streak_pixels(cx, cy, length, angle, h, w):
            buf[py, px] = (1.0 - RAIN_ALPHA) * buf[py, px] + RAIN_ALPHA * RAIN_BRIGHTNESS
    return _quantize(buf)


def gaussian_blur_values(values: np.ndarray, radius: float) -> np.ndarray:
    """Separable Gaussian blur of a float H x W x C array, std = radius/2,
    kernel truncated at 3 std, edges clamped. Exposed pre-quantization so
    mass-conservation can be checked without rounding noise."""
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    if radius == 0:
        return values.copy()
    std = radius / 2.0
    half = int(math.ceil(3.0 * std))
    offsets = np.arange(-half, half + 1)
    kernel = np.exp(-0.5 * (offsets / std) ** 2)
    kernel /= kernel.sum()

    h, w = values.shape[:2]
    padded = np.pad(values, ((0, 0), (half, half), (0, 0)), mode="edge")
    out = np.zeros_like(values)
    for k, coeff in enumerate(kernel):
        out += coeff * padded[:, k : k + w]
    padded = np.pad(out, ((half, half), (0, 0), (0, 0)), mode="edge")
    out = np.zeros_like(values)
    for k, coeff in enumerate(kernel):
        out += coeff * padded[k : k + h]
    return out


def blur(img: np.ndarray, radius: float) -> np.ndarray:
    """Gaussian blur; radius 0 is a byte identity."""
    _check_image(img)
    if radius == 0:
        return img.copy()
    return _quantize(gaussian_blur_values(img.astype(np.float64), radius))


@dataclass(frozen=True)
class CorruptionSpec:
    """One corruption to apply: a kind, a severity in [0, 1], optional
    kind-specific overrides, and a seed.

    When an override is absent the parameter scales linearly with
    severity, so severity 0 is always an identity.
    """

    kind: str
    severity: float = 1.0
    sigma: float | None = None  # gaussian_noise, pixel units
    density: float | None = None  # rain, streaks per kilopixel
    angle: float | None = None  # rain, degrees from vertical
    attenuation: float | None = None  # fog
    airlight: float | None = None  # fog, gray level
    radius: float | None = None  # blur, pixels
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"kind must be one of {CORRUPTION_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.severity <= 1.0:
            raise ValueError(f"severity must be in [0, 1], got {self.severity}")
        for name in ("sigma", "density", "attenuation", "radius"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")
        if self.airlight is not None and not 0.0 <= self.airlight <= 255.0:
            raise ValueError(f"airlight must be in [0, 255], got {self.airlight}")

    def resolved_params(self) -> dict[str, float]:
        """Effective parameters with severity-scaled defaults filled in."""
        if self.kind == "gaussian_noise":
            return {"sigma": self.sigma if self.sigma is not None else 40.0 * self.severity}
        if self.kind == "rain":
            return {
                "density": self.density if self.density is not None else 3.0 * self.severity,
                "angle": self.angle if self.angle is not None else 70.0,
            }
        if self.kind == "fog":
            return {
                "attenuation": self.attenuation
                if self.attenuation is not None
                else 1.5 * self.severity,
                "airlight": self.airlight if self.airlight is not None else 220.0,
            }
        return {"radius": self.radius if self.radius is not None else 6.0 * self.severity}


def apply_corruption(img: np.ndarray, spec: CorruptionSpec, seed: int | None = None) -> np.ndarray:
    """Apply one spec; ``seed`` overrides the spec's own (for derived per-image seeds)."""
    params = spec.resolved_params()
    use_seed = spec.seed if seed is None else seed
    if spec.kind == "gaussian_noise":
        return gaussian_noise(img, params["sigma"], use_seed)
    if spec.kind == "rain":
        return rain(img, params["density"], params["angle"], use_seed)
    if spec.kind == "fog":
        return fog(img, params["attenuation"], params["airlight"])
    return blur(img, params["radius"])


def load_image(path: Path) -> np.ndarray:
    with PILImage.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_image(img: np.ndarray, path: Path) -> None:
    _check_image(img)
    path.parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(img, mode="RGB").save(path, format="PNG")


@dataclass(frozen=True)
class CorruptionRecord:
    image_id: int
    kind: str
    params: dict[str, float]
    seed: int

    def manifest_line(self) -> str:
        params = json.dumps(self.params, sort_keys=True)
        return f"{self.image_id}\t{self.kind}\t{params}\t{self.seed}"


@dataclass
class CorruptionRunResult:
    records: list[CorruptionRecord]
    errors: list[str]  # one line per unreadable/missing image
    out_dir: Path


def corrupt_dataset(
    dataset_dir: Path,
    specs: list[CorruptionSpec],
    seed: int,
    out_dir: Path,
) -> CorruptionRunResult:
    """Corrupt every image of a dataset directory into ``out_dir``.

    Specs are assigned round-robin over the annotation file's image order,
    each image keyed by a seed derived from (master seed, image id). The
    annotation file is copied byte-for-byte (corruptions never move
    geometry); unreadable images are recorded and skipped. Writes
    ``manifest.tsv`` (one tab-separated record per corrupted image) and,
    when anything failed, ``errors.log``.
    """
    from .dataio import ANNOTATIONS_NAME, load_annotations

    if not specs:
        raise ValueError("need at least one corruption spec")
    dataset_dir = Path(dataset_dir)
    out_dir = Path(out_dir)
    ann_path = dataset_dir / ANNOTATIONS_NAME
    annotations = load_annotations(ann_path)

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "images").mkdir(exist_ok=True)

    records: list[CorruptionRecord] = []
    errors: list[str] = []
    for index, image_entry in enumerate(annotations.images):
        spec = specs[index % len(specs)]
        image_seed = derive_seed(seed, image_entry.id)
        src = dataset_dir / "images" / image_entry.file_name
        try:
            img = load_image(src)
        except (OSError, ValueError) as exc:
            errors.append(f"{image_entry.id}\t{image_entry.file_name}\t{exc}")
            continue
        corrupted = apply_corruption(img, spec, seed=image_seed)
        save_image(corrupted, out_dir / "images" / image_entry.file_name)
        records.append(
            CorruptionRecord(
                image_id=image_entry.id,
                kind=spec.kind,
                params=spec.resolved_params(),
                seed=image_seed,
            )
        )

    (out_dir / ANNOTATIONS_NAME).write_bytes(ann_path.read_bytes())
    manifest = "".join(r.manifest_line() + "\n" for r in records)
    (out_dir / "manifest.tsv").write_text(manifest, encoding="utf-8")
    if errors:
        (out_dir / "errors.log").write_text("".join(e + "\n" for e in errors), encoding="utf-8")
    return CorruptionRunResult(records=records, errors=errors, out_dir=out_dir)
