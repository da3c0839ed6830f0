"""Loom surface construction, validation and design."""

import math
import warnings

import numpy as np
import pytest

from loomlab.hyperbolic import (
    BandPoint,
    DomainError,
    band_to_chart_complex,
    dist,
    dist_chart,
    dist_geodesics,
)
from loomlab.intervalsets import IntervalSet
from loomlab.surface import (
    HalfPlaneSpec,
    LoomSurfaceSpec,
    NonSummableWarning,
    SpecFormatError,
    SurfacePoint,
    ValidationError,
    boundary_geodesics,
    design_from_E,
    design_summable,
    load_spec,
    point_in_excised_disk,
    reflections,
    save_spec,
    sheet_distance,
    slack_partial_sums,
    slack_to_height,
    tau,
    validate,
)

RNG = np.random.default_rng(7)

LN2 = math.log(2.0)


def manual_spec(pairs):
    return LoomSurfaceSpec(tuple(HalfPlaneSpec(s, h) for s, h in pairs))


# -- validation ----------------------------------------------------------------


def test_validate_growing_gaps():
    spec = manual_spec([(0, 0.3), (10, 0.3), (30, 0.3), (60, 0.3)])
    report = validate(spec)
    assert report.valid and report.monotone
    assert all(b > a for a, b in zip(report.gaps, report.gaps[1:]))
    assert report.nonincreasing_at == ()


def test_validate_overlap_fails():
    spec = manual_spec([(0, 0.3), (0.1, 0.3)])
    report = validate(spec)
    assert not report.valid
    assert report.offending_pair == (1, 2)


def test_validate_single_entry():
    report = validate(manual_spec([(0, math.pi / 4)]))
    assert report.valid
    assert report.gaps == ()


def test_validate_reports_nonincreasing_gaps():
    spec = manual_spec([(0, 0.3), (20, 0.3), (25, 0.3)])
    report = validate(spec)
    assert report.valid  # reported, not fatal
    assert report.nonincreasing_at == (2,)


def test_entry_bounds():
    with pytest.raises(DomainError):
        HalfPlaneSpec(0.0, math.pi / 2)
    with pytest.raises(DomainError):
        HalfPlaneSpec(0.0, 0.0)
    with pytest.raises(ValidationError):
        LoomSurfaceSpec(())


# -- tau ------------------------------------------------------------------------


def test_tau_is_band_real_part():
    spec = manual_spec([(3, 0.4)])
    assert tau(SurfacePoint(BandPoint(2.0, 0.3), 0)) == 2.0
    for j in (0, 1):
        for t in (-1.0, 0.0, 4.5):
            assert tau(SurfacePoint(BandPoint(t, 0.0), j)) == t


def test_tau_lipschitz_same_sheet():
    spec = manual_spec([(2, 0.5), (8, 0.5)])
    n = 10_000
    pts = []
    while len(pts) < 2 * n:
        x = RNG.uniform(-4, 12)
        y = RNG.uniform(-1.4, 1.4)
        if point_in_excised_disk(band_to_chart_complex(x, y), spec) is None:
            pts.append(BandPoint(x, y))
    for p, q in zip(pts[:n], pts[n:]):
        assert abs(p.x - q.x) <= dist(p, q) + 1e-9


def test_tau_lipschitz_cross_sheet():
    spec = manual_spec([(1.5, 0.6), (5, 0.5)])
    refl = reflections(spec)
    for _ in range(300):
        x1, x2 = RNG.uniform(-2, 7, 2)
        y1, y2 = RNG.uniform(-1.2, 1.2, 2)
        w1 = band_to_chart_complex(x1, y1)
        w2 = band_to_chart_complex(x2, y2)
        if point_in_excised_disk(w1, spec) or point_in_excised_disk(w2, spec):
            continue
        # shortest single-crossing path length between (w1, 0) and (w2, 1)
        path = min(dist_chart(w1, r.apply_point(w2)) for r in refl)
        assert abs(x1 - x2) <= path + 1e-9


# -- sheet distance ---------------------------------------------------------------


def test_sheet_distance_boundary_is_zero():
    spec = manual_spec([(1.0, 0.7)])
    z = BandPoint(1.0, 0.7)  # the anchor point on the boundary geodesic
    assert sheet_distance(z, spec) <= 1e-9


def test_sheet_distance_on_core():
    spec = manual_spec([(0.0, 0.4), (6.0, 0.3), (14.0, 0.25)])
    for k, e in enumerate(spec.entries):
        d = sheet_distance(BandPoint(e.s, 0.0), spec)
        assert d <= 2.0 * math.atanh(math.sin(e.h)) + 1e-12


def test_sheet_distance_odd_word_oracle():
    # single reflections beat triple-reflection words on a small spread spec
    spec = manual_spec([(0.0, 0.5), (4.0, 0.5), (9.0, 0.5)])
    refl = reflections(spec)
    for x in (-1.0, 0.0, 2.0, 4.0, 6.5):
        w = band_to_chart_complex(x, 0.0)
        best1 = min(dist_chart(w, r.apply_point(w)) for r in refl)
        best3 = math.inf
        for r1 in refl:
            for r2 in refl:
                for r3 in refl:
                    img = (r1 @ r2 @ r3).apply_point(w)
                    best3 = min(best3, dist_chart(w, img))
        assert sheet_distance(BandPoint(x, 0.0), spec) == pytest.approx(
            min(best1, best3), abs=1e-9
        )
        assert best1 <= best3 + 1e-9


def test_sheet_distance_is_twice_boundary_distance():
    # the shortest single-crossing path through boundary k doubles the
    # distance from the point to that boundary geodesic
    from loomlab.hyperbolic import point_to_geodesic

    spec = manual_spec([(1.0, 0.6), (7.0, 0.4)])
    lines = boundary_geodesics(spec)
    for x, y in [(-1.0, 0.2), (1.0, -0.5), (3.5, 0.0), (6.0, 0.3)]:
        w = band_to_chart_complex(x, y)
        best = min(2.0 * point_to_geodesic(w, line) for line in lines)
        assert sheet_distance(BandPoint(x, y), spec) == pytest.approx(best, abs=1e-10)


def test_sheet_distance_distal_floor():
    spec = design_from_E(IntervalSet.from_values([2 * LN2]), 4, gap_growth=1.0)
    assert min(e.h for e in spec.entries) > 0.5
    floor = min(
        sheet_distance(BandPoint(t, 0.0), spec) for t in np.linspace(-5, 40, 120)
    )
    assert floor > 0.2


# -- designers ---------------------------------------------------------------------


def test_design_summable_one_over_k():
    spec = design_summable("1/k", 20)
    report = validate(spec)
    assert report.valid
    sums = slack_partial_sums(spec)
    assert sums[-1] < 3.3
    assert spec.gap_floor is not None and spec.gap_floor > 0


def test_design_summable_constant_warns():
    with pytest.warns(NonSummableWarning):
        design_summable(0.5, 8)


def test_design_summable_single_entry_slack():
    spec = design_summable(0.1, 1)
    sums = slack_partial_sums(spec)
    assert sums == pytest.approx([-2.0 * math.log(math.cos(0.1))], abs=1e-12)
    assert sums[0] == pytest.approx(0.010016711246470508, abs=1e-12)


def test_design_summable_bad_rule():
    with pytest.raises(DomainError):
        design_summable(2.0, 3)  # h >= pi/2
    with pytest.raises(DomainError):
        design_summable("1/k", 0)


def test_design_from_E_ln2():
    E = IntervalSet.from_values([LN2])
    spec = design_from_E(E, 6, gap_growth=1.0)
    for e in spec.entries:
        assert e.h == pytest.approx(math.pi / 4, abs=1e-12)
    assert validate(spec).valid


def test_design_from_E_two_values_alternate():
    E = IntervalSet.from_values([LN2, 2 * LN2])
    spec = design_from_E(E, 6, gap_growth=1.0)
    hs = [e.h for e in spec.entries]
    assert hs[0::2] == pytest.approx([math.pi / 4] * 3, abs=1e-12)
    assert hs[1::2] == pytest.approx([math.pi / 3] * 3, abs=1e-12)


def test_slack_to_height_continuity_at_zero():
    assert slack_to_height(1e-9) < 1e-4
    for e in (0.05, 0.4, 1.7):
        h = slack_to_height(e)
        assert -2.0 * math.log(math.cos(h)) == pytest.approx(e, abs=1e-12)
    with pytest.raises(DomainError):
        slack_to_height(0.0)


def test_design_from_E_rejects_nonpositive():
    with pytest.raises(DomainError):
        design_from_E(IntervalSet.from_intervals([(0.0, 0.5)], 1e-6), 4)


def test_design_gap_schedule_realizes_targets():
    spec = design_summable("1/k", 5, gap_base=2.0, gap_growth=0.75)
    lines = boundary_geodesics(spec)
    for k in range(len(lines) - 1):
        gap = dist_geodesics(lines[k], lines[k + 1])
        assert gap == pytest.approx(2.0 + 0.75 * (k + 1), abs=1e-9)


# -- file format ---------------------------------------------------------------------


def test_spec_round_trip(tmp_path):
    spec = design_summable("1/k", 5)
    path = tmp_path / "surface.json"
    save_spec(spec, str(path))
    back = load_spec(str(path))
    assert back.entries == spec.entries
    assert back.tail_policy == "empty"
    assert back.gap_floor == pytest.approx(spec.gap_floor)


def test_spec_file_rejections(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 1, "entries": [{"s": 0.0, "h": 2.0}]}')
    with pytest.raises(SpecFormatError):
        load_spec(str(path))
    path.write_text('{"version": 1, "entries": [{"s": NaN, "h": 0.3}]}')
    with pytest.raises(SpecFormatError):
        load_spec(str(path))
    path.write_text('{"version": 99, "entries": [{"s": 0.0, "h": 0.3}]}')
    with pytest.raises(SpecFormatError):
        load_spec(str(path))
    path.write_text("not json")
    with pytest.raises(SpecFormatError):
        load_spec(str(path))
