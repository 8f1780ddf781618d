"""Forward-only, desk-scale simulator of the detector's wiring.

Three pieces are modeled with small fixed seeded linear/pooling operators,
enough to verify shapes, reductions, and the recurrence itself rather than
learned accuracy:

* a feature pyramid whose per-stage outputs feed back into the bottom-up
  path and are recomputed for a configurable number of unroll passes
  ("looking twice": pass one runs with zero feedback, later passes reuse
  the previous pass's pyramid outputs);
* a switchable two-dilation convolution blended by a per-location switch
  map, plus a squeeze-excite style global-context channel rescale;
* a cascade of box-refinement heads applying fixed affine deltas at
  increasing matching-quality thresholds.

All operators are pure functions of their (seeded) parameters; identical
seeds give bit-identical outputs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .geometry import BBox


@dataclass(frozen=True)
class FeatureMap:
    """Dense H x W x C grid of finite values."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 3 or any(d < 1 for d in v.shape):
            raise ValueError(f"feature map must be H x W x C with dims >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature map values must be finite")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def _avgpool2(x: np.ndarray) -> np.ndarray:
    h, w, c = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"spatial dims must be even to pool, got {h}x{w}")
    return x.reshape(h // 2, 2, w // 2, 2, c).mean(axis=(1, 3))


def _upsample2(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)


@dataclass(frozen=True)
class StageSpec:
    """Pyramid operators: per stage a bottom-up channel mix applied after
    2x2 mean pooling, a lateral mix, a top-down mix for the upsampled
    coarser output, and a feedback mix (all 1x1, i.e. channel matrices).

    ``unrolls`` is the number of bottom-up/top-down passes; feedback
    matrices of zeros reduce the recurrence to a single-pass pyramid.
    """

    bottom_up: tuple[np.ndarray, ...]
    lateral: tuple[np.ndarray, ...]
    top_down: tuple[np.ndarray, ...]
    feedback: tuple[np.ndarray, ...]
    unrolls: int = 2

    def __post_init__(self) -> None:
        s = len(self.bottom_up)
        if s < 1:
            raise ValueError("need at least one stage")
        if not (len(self.lateral) == len(self.top_down) == len(self.feedback) == s):
            raise ValueError("per-stage operator lists must have equal length")
        if self.unrolls < 1:
            raise ValueError("unrolls must be >= 1")
        width = self.bottom_up[0].shape[1]
        for i in range(s):
            if self.bottom_up[i].shape[1] != width:
                raise ValueError("all stages must share one channel width")
            if i > 0 and self.bottom_up[i].shape[0] != width:
                raise ValueError(f"bottom_up[{i}] input channels mismatch")
            for name, m in (("lateral", self.lateral[i]), ("top_down", self.top_down[i]),
                            ("feedback", self.feedback[i])):
                if m.shape != (width, width):
                    raise ValueError(f"{name}[{i}] must be {width}x{width}, got {m.shape}")

    @property
    def stages(self) -> int:
        return len(self.bottom_up)

    @property
    def input_channels(self) -> int:
        return self.bottom_up[0].shape[0]

    @classmethod
    def seeded(
        cls,
        input_channels: int = 3,
        channels: int = 8,
        stages: int = 3,
        unrolls: int = 2,
        seed: int = 0,
        feedback_scale: float = 1.0,
    ) -> "StageSpec":
        """Random small-magnitude operators; ``feedback_scale=0`` zeroes the recurrence."""
        rng = _rng(seed)

        def mat(rows: int, cols: int, scale: float = 1.0) -> np.ndarray:
            return scale * rng.normal(0.0, 1.0, size=(rows, cols)) / np.sqrt(rows)

        bottom_up = tuple(
            mat(input_channels if i == 0 else channels, channels) for i in range(stages)
        )
        lateral = tuple(mat(channels, channels) for _ in range(stages))
        top_down = tuple(mat(channels, channels) for _ in range(stages))
        feedback = tuple(mat(channels, channels, feedback_scale) for _ in range(stages))
        return cls(bottom_up, lateral, top_down, feedback, unrolls)


def _bottom_up_pass(
    x0: np.ndarray, spec: StageSpec, feedbacks: list[np.ndarray] | None
) -> list[np.ndarray]:
    xs = []
    cur = x0
    for i in range(spec.stages):
        cur = _avgpool2(cur) @ spec.bottom_up[i]
        if feedbacks is not None:
            cur = cur + feedbacks[i]
        xs.append(cur)
    return xs


def _top_down_pass(xs: list[np.ndarray], spec: StageSpec) -> list[np.ndarray]:
    fs: list[np.ndarray | None] = [None] * spec.stages
    for i in reversed(range(spec.stages)):
        f = xs[i] @ spec.lateral[i]
        if i < spec.stages - 1:
            f = f + _upsample2(fs[i + 1]) @ spec.top_down[i]
        fs[i] = f
    return fs  # type: ignore[return-value]


def rfp_forward(x0: FeatureMap, spec: StageSpec) -> list[FeatureMap]:
    """Unrolled recursive pyramid. The first pass runs with zero feedback;
    each later pass feeds the previous pass's outputs back into the
    bottom-up path, then recomputes the top-down fusion. Spatial dims
    halve per stage, so the input must divide by 2**stages.
    """
    v = x0.values
    if v.shape[2] != spec.input_channels:
        raise ValueError(
            f"input has {v.shape[2]} channels, spec expects {spec.input_channels}"
        )
    factor = 2 ** spec.stages
    if v.shape[0] % factor or v.shape[1] % factor:
        raise ValueError(
            f"spatial dims {v.shape[0]}x{v.shape[1]} not divisible by 2**{spec.stages}"
        )
    fs = _top_down_pass(_bottom_up_pass(v, spec, None), spec)
    for _ in range(spec.unrolls - 1):
        feedbacks = [fs[i] @ spec.feedback[i] for i in range(spec.stages)]
        fs = _top_down_pass(_bottom_up_pass(v, spec, feedbacks), spec)
    return [FeatureMap(f) for f in fs]


@dataclass(frozen=True)
class SacParams:
    """Shared 3x3 kernel for both dilation branches plus the switch head
    (per-channel weights and bias applied to a locally averaged input).
    """

    kernel: np.ndarray  # (3, 3, C_in, C_out)
    switch_weights: np.ndarray  # (C_in,)
    switch_bias: float = 0.0
    pool_size: int = 5

    def __post_init__(self) -> None:
        if self.kernel.ndim != 4 or self.kernel.shape[:2] != (3, 3):
            raise ValueError(f"kernel must be 3x3xCxC, got {self.kernel.shape}")
        if self.kernel.shape[2] != self.kernel.shape[3]:
            raise ValueError("kernel must map channels onto themselves (shape preserved)")
        if self.switch_weights.shape != (self.kernel.shape[2],):
            raise ValueError("switch weights must match kernel input channels")
        if self.pool_size < 1 or self.pool_size % 2 == 0:
            raise ValueError("pool_size must be odd and >= 1")

    @classmethod
    def seeded(cls, channels: int, seed: int = 0) -> "SacParams":
        rng = _rng(seed)
        kernel = rng.normal(0.0, 1.0, size=(3, 3, channels, channels)) / np.sqrt(9 * channels)
        return cls(kernel, rng.normal(0.0, 1.0, size=channels), float(rng.normal()), 5)


def _conv3x3(x: np.ndarray, kernel: np.ndarray, dilation: int) -> np.ndarray:
    h, w, _ = x.shape
    d = dilation
    padded = np.pad(x, ((d, d), (d, d), (0, 0)), mode="edge")
    out = np.zeros((h, w, kernel.shape[3]))
    for u in range(3):
        for v in range(3):
            out += padded[u * d : u * d + h, v * d : v * d + w] @ kernel[u, v]
    return out


def _box_mean(x: np.ndarray, size: int) -> np.ndarray:
    half = size // 2
    padded = np.pad(x, ((half, half), (half, half), (0, 0)), mode="edge")
    h, w, c = x.shape
    out = np.zeros((h, w, c))
    for u in range(size):
        for v in range(size):
            out += padded[u : u + h, v : v + w]
    return out / (size * size)


def sac_apply(
    x: FeatureMap, params: SacParams, switch: np.ndarray | float | None = None
) -> FeatureMap:
    """Blend a dilation-1 and a dilation-3 convolution of the same kernel,
    y = S*conv1 + (1-S)*conv3, with S per spatial location.

    By default S comes from a logistic 1x1 head over the locally averaged
    input; pass ``switch`` to freeze it (scalar or (H, W) array in [0, 1]),
    which makes the whole operator linear in the input.
    """
    v = x.values
    if v.shape[2] != params.kernel.shape[2]:
        raise ValueError("input channels do not match kernel")
    if switch is None:
        pooled = _box_mean(v, params.pool_size)
        s = 1.0 / (1.0 + np.exp(-(pooled @ params.switch_weights + params.switch_bias)))
    else:
        s = np.broadcast_to(np.asarray(switch, dtype=float), v.shape[:2])
        if np.any(s < 0) or np.any(s > 1):
            raise ValueError("forced switch values must lie in [0, 1]")
    y1 = _conv3x3(v, params.kernel, 1)
    y3 = _conv3x3(v, params.kernel, 3)
    return FeatureMap(s[:, :, None] * y1 + (1.0 - s[:, :, None]) * y3)


@dataclass(frozen=True)
class SeParams:
    """Global-context channel gate: logistic(affine(channel means))."""

    matrix: np.ndarray  # (C, C)
    bias: np.ndarray  # (C,)

    def __post_init__(self) -> None:
        c = self.matrix.shape[0]
        if self.matrix.shape != (c, c) or self.bias.shape != (c,):
            raise ValueError("matrix must be CxC with a C-vector bias")

    @classmethod
    def seeded(cls, channels: int, seed: int = 0) -> "SeParams":
        rng = _rng(seed)
        return cls(
            rng.normal(0.0, 1.0, size=(channels, channels)) / np.sqrt(channels),
            rng.normal(0.0, 1.0, size=channels),
        )


def se_fuse(x: FeatureMap, params: SeParams) -> FeatureMap:
    """Rescale each channel by a logistic gate of the globally pooled stats."""
    v = x.values
    if v.shape[2] != params.matrix.shape[0]:
        raise ValueError("params sized for a different channel count")
    pooled = v.mean(axis=(0, 1))
    scale = 1.0 / (1.0 + np.exp(-(params.matrix @ pooled + params.bias)))
    return FeatureMap(v * scale[None, None, :])


@dataclass(frozen=True)
class BoxDeltaMap:
    """Affine box update in center/size coordinates: the center shifts by
    (dx*w, dy*h) and the sides rescale by (scale_w, scale_h)."""

    dx: float = 0.0
    dy: float = 0.0
    scale_w: float = 1.0
    scale_h: float = 1.0

    def __post_init__(self) -> None:
        if self.scale_w <= 0 or self.scale_h <= 0:
            raise ValueError("side scales must be positive")

    def apply(self, b: BBox) -> BBox:
        cx = 0.5 * (b.x_min + b.x_max) + self.dx * b.width
        cy = 0.5 * (b.y_min + b.y_max) + self.dy * b.height
        w = b.width * self.scale_w
        h = b.height * self.scale_h
        return BBox(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)


@dataclass(frozen=True)
class CascadeSpec:
    """Ordered refinement heads with strictly increasing match thresholds."""

    heads: tuple[BoxDeltaMap, ...]
    iou_thresholds: tuple[float, ...] = (0.5, 0.6, 0.7)

    def __post_init__(self) -> None:
        if len(self.heads) != len(self.iou_thresholds):
            raise ValueError("one matching threshold per head required")
        if any(b >= a for a, b in zip(self.iou_thresholds[1:], self.iou_thresholds)):
            raise ValueError(f"thresholds must be strictly increasing, got {self.iou_thresholds}")

    @classmethod
    def seeded(cls, stages: int = 3, seed: int = 0, jitter: float = 0.05) -> "CascadeSpec":
        rng = _rng(seed)
        heads = tuple(
            BoxDeltaMap(
                dx=float(rng.normal(0.0, jitter)),
                dy=float(rng.normal(0.0, jitter)),
                scale_w=float(np.exp(rng.normal(0.0, jitter))),
                scale_h=float(np.exp(rng.normal(0.0, jitter))),
            )
            for _ in range(stages)
        )
        thresholds = tuple(0.5 + 0.1 * i for i in range(stages))
        return cls(heads, thresholds)


def cascade_refine(proposals: list[BBox], spec: CascadeSpec) -> list[list[BBox]]:
    """Run proposals through the head sequence; returns one box list per
    stage (stage k refines stage k-1's boxes, stage 0 refines the input).
    """
    stages: list[list[BBox]] = []
    current = list(proposals)
    for head in spec.heads:
        current = [head.apply(b) for b in current]
        stages.append(current)
    return stages


@dataclass
class SimulationReport:
    seed: int
    input_shape: tuple[int, int, int]
    sac_checksum: str
    stage_shapes: list[tuple[int, int, int]]
    stage_checksums: list[str]
    cascade_stages: int
    cascade_boxes: int


def _checksum(values: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(values).tobytes()).hexdigest()[:12]


def run_simulation(
    seed: int = 0,
    height: int = 32,
    width: int = 32,
    input_channels: int = 3,
    channels: int = 8,
    stages: int = 3,
    unrolls: int = 2,
    num_proposals: int = 4,
) -> SimulationReport:
    """Seeded end-to-end forward pass: switchable convolution on the input,
    the unrolled pyramid, per-stage global-context fusion, and the box
    cascade on seeded proposals."""
    rng = _rng(seed)
    x0 = FeatureMap(rng.normal(0.0, 1.0, size=(height, width, input_channels)))
    sac = sac_apply(x0, SacParams.seeded(input_channels, seed=seed + 1))
    spec = StageSpec.seeded(
        input_channels=input_channels, channels=channels, stages=stages,
        unrolls=unrolls, seed=seed + 2,
    )
    pyramid = rfp_forward(sac, spec)
    se = SeParams.seeded(channels, seed=seed + 3)
    fused = [se_fuse(f, se) for f in pyramid]

    proposals = []
    for _ in range(num_proposals):
        x_min, y_min = rng.uniform(0, width * 0.6), rng.uniform(0, height * 0.6)
        proposals.append(
            BBox(x_min, y_min, x_min + rng.uniform(2, width * 0.3), y_min + rng.uniform(2, height * 0.3))
        )
    cascade = cascade_refine(proposals, CascadeSpec.seeded(seed=seed + 4))

    return SimulationReport(
        seed=seed,
        input_shape=x0.values.shape,
        sac_checksum=_checksum(sac.values),
        stage_shapes=[f.values.shape for f in fused],
        stage_checksums=[_checksum(f.values) for f in fused],
        cascade_stages=len(cascade),
        cascade_boxes=sum(len(s) for s in cascade),
    )
