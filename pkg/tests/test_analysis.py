import numpy as np
import pytest

from streetscape.analysis import (
    ContourReport,
    DenominatorMode,
    aggregate,
    analyze,
    render_overlay,
)
from streetscape.augment import Sample, flip_h
from streetscape.errors import DimensionMismatchError, ValidationError
from streetscape.mask import CanonicalClass, LabelMask

from conftest import random_image, random_mask

CC = CanonicalClass


def fixture_mask(primary_frac, secondary_frac, side=100):
    """Mask with exact pixel counts for the requested coverage fractions."""
    total = side * side
    n_primary = round(primary_frac * total)
    n_secondary = round(secondary_frac * total)
    flat = np.zeros(total, dtype=np.uint8)
    flat[:n_primary] = int(CC.PRIMARY)
    flat[n_primary : n_primary + n_secondary] = int(CC.SECONDARY)
    return LabelMask(flat.reshape(side, side))


@pytest.mark.parametrize(
    "primary,secondary,expected_ratio",
    [(0.514, 0.165, 0.321), (0.706, 0.016, 0.023), (0.598, 0.176, 0.294)],
)
def test_tokyo_case_study_ratios(primary, secondary, expected_ratio):
    report = analyze(fixture_mask(primary, secondary, side=1000), "fixture")
    assert report.coverage[CC.PRIMARY] == pytest.approx(primary, abs=1e-9)
    assert report.coverage[CC.SECONDARY] == pytest.approx(secondary, abs=1e-9)
    assert report.ratio_sp == pytest.approx(expected_ratio, abs=0.001)


def test_zero_secondary_ratio_is_zero():
    report = analyze(fixture_mask(0.5, 0.0), "x")
    assert report.ratio_sp == 0.0


def test_no_primary_ratio_undefined():
    report = analyze(fixture_mask(0.0, 0.3), "x")
    assert report.ratio_sp is None


def test_coverage_sums_to_one(rng):
    for _ in range(20):
        report = analyze(random_mask(rng, 13, 17), "x")
        assert sum(report.coverage.values()) == pytest.approx(1.0, abs=1e-9)


def test_non_sky_road_mode_same_ratio(rng):
    for _ in range(20):
        mask = random_mask(rng, 11, 9)
        whole = analyze(mask, "x", DenominatorMode.WHOLE_IMAGE)
        nsr = analyze(mask, "x", DenominatorMode.NON_SKY_ROAD)
        assert whole.ratio_sp == nsr.ratio_sp
        if any(nsr.coverage.values()):
            assert sum(nsr.coverage.values()) == pytest.approx(1.0, abs=1e-9)
        assert CC.SKY not in nsr.coverage and CC.ROAD not in nsr.coverage


def test_flip_invariance(rng):
    mask = random_mask(rng, 14, 10)
    flipped = LabelMask(mask.data[:, ::-1])
    a, b = analyze(mask, "x"), analyze(flipped, "x")
    assert a.coverage == b.coverage and a.ratio_sp == b.ratio_sp


def test_scale_invariance(rng):
    mask = random_mask(rng, 9, 7)
    up = LabelMask(np.kron(mask.data, np.ones((2, 2), dtype=np.uint8)))
    a, b = analyze(mask, "x"), analyze(up, "x")
    assert a.coverage == b.coverage and a.ratio_sp == b.ratio_sp


def test_ratio_independent_of_background(rng):
    base = fixture_mask(0.3, 0.1)
    shuffled = base.data.copy()
    bg = ~np.isin(shuffled, [int(CC.PRIMARY), int(CC.SECONDARY)])
    shuffled[bg] = rng.choice(
        np.array([int(CC.OTHER), int(CC.SKY), int(CC.ROAD), 255], np.uint8),
        size=int(bg.sum()),
    )
    assert analyze(LabelMask(shuffled), "x").ratio_sp == analyze(base, "x").ratio_sp


def test_aggregate_singleton():
    r = analyze(fixture_mask(0.5, 0.1), "only")
    summary = aggregate([r])
    assert summary["ratio_sp"]["mean"] == summary["ratio_sp"]["median"] == r.ratio_sp
    assert summary["images"] == 1


def test_aggregate_mean():
    reports = [
        ContourReport("a", {CC.PRIMARY: 0.5}, 0.2),
        ContourReport("b", {CC.PRIMARY: 0.5}, 0.4),
    ]
    assert aggregate(reports)["ratio_sp"]["mean"] == pytest.approx(0.3)


def test_aggregate_all_undefined():
    reports = [ContourReport("a", {}, None), ContourReport("b", {}, None)]
    summary = aggregate(reports)
    assert summary["ratio_sp"] is None
    assert summary["undefined_ratios"] == 2


def test_aggregate_empty_rejected():
    with pytest.raises(ValidationError):
        aggregate([])


def test_overlay_noop_without_contours(rng):
    image = random_image(rng, 6, 8)
    mask = LabelMask(np.zeros((6, 8), np.uint8))
    assert np.array_equal(render_overlay(image, mask), image)


def test_overlay_blend_values():
    image = np.zeros((4, 4, 3), np.uint8)
    mask = LabelMask(np.full((4, 4), int(CC.SECONDARY), np.uint8))
    out = render_overlay(image, mask, alpha=0.5)
    assert np.all(np.abs(out[:, :, 0].astype(int) - 128) <= 1)
    assert (out[:, :, 1:] == 0).all()


def test_overlay_primary_is_blue():
    image = np.zeros((2, 2, 3), np.uint8)
    mask = LabelMask(np.full((2, 2), int(CC.PRIMARY), np.uint8))
    out = render_overlay(image, mask, alpha=1.0)
    assert (out == np.array([0, 0, 255])).all()


def test_overlay_shape_and_mismatch(rng):
    image = random_image(rng, 5, 7)
    assert render_overlay(image, random_mask(rng, 5, 7)).shape == image.shape
    with pytest.raises(DimensionMismatchError):
        render_overlay(image, random_mask(rng, 5, 6))


def test_csv_row_format():
    r = analyze(fixture_mask(0.514, 0.165, side=1000), "akihabara")
    row = r.csv_row().split(",")
    assert row[0] == "akihabara"
    assert float(row[1]) == pytest.approx(51.4, abs=1e-6)
    assert float(row[7]) == pytest.approx(32.1, abs=0.1)
    undef = ContourReport("x", {c: 0.0 for c in CC}, None)
    assert undef.csv_row().endswith(",")
