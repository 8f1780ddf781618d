import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from logodet.geometry import BBox, Detection, ImageSize
from logodet.multiscale import (
    ScalePlan,
    default_plan,
    fuse_multiscale,
    plan_dimensions,
    resize_factor,
    resized_dims,
    scale_box,
    scale_boxes,
)
from logodet.postprocess import SoftNmsConfig, soft_nms


class TestPlan:
    def test_default_plan(self):
        plan = default_plan()
        assert plan.short_side_targets == (800, 900, 1000, 1100)
        assert plan.max_long_side == 1333
        assert all(t <= plan.max_long_side for t in plan.short_side_targets)

    def test_validation(self):
        with pytest.raises(ValueError):
            ScalePlan((), 1333)
        with pytest.raises(ValueError):
            ScalePlan((800, 800), 1333)
        with pytest.raises(ValueError):
            ScalePlan((800, 2000), 1333)


class TestResizeFactor:
    def test_short_side_binds(self):
        factor = resize_factor(ImageSize(1000, 1500), 800, 1333)
        assert factor == pytest.approx(0.8)
        assert resized_dims(ImageSize(1000, 1500), factor) == (800, 1200)

    def test_identity(self):
        assert resize_factor(ImageSize(800, 800), 800, 1333) == 1.0

    def test_long_side_caps(self):
        factor = resize_factor(ImageSize(100, 4000), 800, 1333)
        assert factor == pytest.approx(1333 / 4000)
        assert factor == pytest.approx(0.33325)
        assert resized_dims(ImageSize(100, 4000), factor) == (33, 1333)

    @given(st.integers(1, 5000), st.integers(1, 5000))
    def test_cap_and_target_invariants(self, w, h):
        size = ImageSize(w, h)
        plan = default_plan()
        for target in plan.short_side_targets:
            factor = resize_factor(size, target, plan.max_long_side)
            rw, rh = resized_dims(size, factor)
            assert max(rw, rh) <= plan.max_long_side
            cap_binds = factor == pytest.approx(plan.max_long_side / max(w, h))
            if not cap_binds:
                assert min(rw, rh) == target

    @given(st.integers(1, 5000), st.integers(1, 5000))
    def test_monotone_in_target(self, w, h):
        size = ImageSize(w, h)
        factors = [resize_factor(size, t, 1333) for t in (800, 900, 1000, 1100)]
        assert all(a <= b for a, b in zip(factors, factors[1:]))

    def test_plan_dimensions(self):
        rows = plan_dimensions(default_plan(), ImageSize(1000, 1500))
        assert rows[0] == (800, 800, 1200)
        assert [r[0] for r in rows] == [800, 900, 1000, 1100]


class TestScaleBoxes:
    def test_identity(self):
        b = BBox(1, 2, 3, 4)
        assert scale_box(b, 1.0) == b

    def test_doubling(self):
        assert scale_box(BBox(1, 2, 3, 4), 2.0) == BBox(2, 4, 6, 8)

    def test_invalid_factor(self):
        with pytest.raises(ValueError):
            scale_box(BBox(0, 0, 1, 1), 0.0)

    @given(
        st.floats(0, 1000, allow_nan=False),
        st.floats(0, 1000, allow_nan=False),
        st.floats(0.01, 100, allow_nan=False),
        st.floats(0.01, 100, allow_nan=False),
        st.floats(0.05, 20.0, allow_nan=False),
    )
    def test_round_trip(self, x, y, w, h, factor):
        b = BBox(x, y, x + w, y + h)
        [back] = scale_boxes(scale_boxes([b], factor), 1.0 / factor)
        for got, want in zip(back.as_tuple(), b.as_tuple()):
            assert got == pytest.approx(want, abs=1e-9, rel=1e-12)


def det(box, score, cat=0, img=0):
    return Detection(bbox=BBox(*box), category_id=cat, score=score, image_id=img)


class TestFusion:
    def test_single_scale_reduces_to_soft_nms(self):
        dets = [det((0, 0, 4, 4), 0.9), det((0, 0, 4, 4), 0.8)]
        cfg = SoftNmsConfig()
        assert fuse_multiscale([dets], [1.0], cfg) == soft_nms(dets, cfg)

    def test_duplicate_across_scales_one_survivor(self):
        # the same object seen at factor 2 and factor 1 maps to one box
        at_full = [det((10, 10, 20, 20), 0.9)]
        at_double = [det((20, 20, 40, 40), 0.8)]
        fused = fuse_multiscale([at_full, at_double], [1.0, 2.0], SoftNmsConfig())
        assert fused[0].score == 0.9
        assert fused[0].bbox == BBox(10, 10, 20, 20)
        # the duplicate decayed by the full-overlap gaussian factor
        assert len(fused) == 2
        assert fused[1].score == pytest.approx(0.8 * np.exp(-2.0))

    def test_empty_input(self):
        assert fuse_multiscale([[], []], [1.0, 0.5]) == []

    def test_invalid_factors(self):
        with pytest.raises(ValueError):
            fuse_multiscale([[]], [0.0])
        with pytest.raises(ValueError):
            fuse_multiscale([[], []], [1.0])

    def test_output_in_original_frame(self):
        dets = [det((100, 100, 200, 200), 0.5)]
        [mapped] = fuse_multiscale([dets], [2.0], SoftNmsConfig())
        assert mapped.bbox == BBox(50, 50, 100, 100)

    def test_multi_image_grouping(self):
        a = det((0, 0, 4, 4), 0.9, img=0)
        b = det((0, 0, 4, 4), 0.8, img=1)  # same box, different image: untouched
        fused = fuse_multiscale([[a, b]], [1.0], SoftNmsConfig())
        assert sorted(d.score for d in fused) == [0.8, 0.9]
