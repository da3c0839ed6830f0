"""Tracer: unfolding, crossings, slack, Busemann function."""

import math

import numpy as np
import pytest

from loomlab.hyperbolic import BandPoint, DomainError, band_to_chart_complex
from loomlab.surface import (
    HalfPlaneSpec,
    LoomSurfaceSpec,
    SurfacePoint,
    point_in_excised_disk,
    validate,
)
from loomlab.tracer import (
    DegenerateTraceError,
    OutsideSurfaceError,
    SurfaceTangent,
    busemann,
    crossing_sequence,
    flow,
    load_trajectory_csv,
    slack,
    slack_between,
    trace_geodesic,
    trace_horocycle,
    trace_horocycle_window,
    x_tangent,
)

RNG = np.random.default_rng(42)


def manual_spec(pairs):
    return LoomSurfaceSpec(tuple(HalfPlaneSpec(s, h) for s, h in pairs))


@pytest.fixture(scope="module")
def spec3():
    spec = manual_spec([(2.0, 0.8), (8.0, 0.6), (16.0, 0.5)])
    assert validate(spec).valid
    return spec


def tangent(x, y, angle, sheet=0):
    return SurfaceTangent(SurfacePoint(BandPoint(x, y), sheet), angle)


# -- zero-slack rail ---------------------------------------------------------


def test_core_ray_zero_slack(spec3):
    for sheet in (0, 1):
        for T in (1.0, 5.0):
            traj = trace_geodesic(x_tangent(sheet), T, spec3)
            assert traj.crossing_sequence == []
            assert slack(traj).value <= 1e-12
            for t, tau_v in traj.tau_samples:
                assert tau_v == pytest.approx(t, abs=1e-10)


def test_backward_arc_slack_is_twice_length(spec3):
    traj = trace_geodesic(x_tangent(0).reversed(), 3.0, spec3)
    assert slack(traj).value == pytest.approx(6.0, abs=1e-10)


# -- crossings ----------------------------------------------------------------


def test_aimed_single_crossing(spec3):
    s1, h1 = spec3.entries[0].s, spec3.entries[0].h
    traj = trace_geodesic(tangent(s1, 0.0, math.pi / 2), 5.0, spec3)
    assert traj.crossing_sequence == [1]
    ev = traj.crossings[0]
    assert ev.point.x == pytest.approx(s1, abs=1e-9)
    assert ev.point.y == pytest.approx(h1, abs=1e-9)
    assert ev.time == pytest.approx(math.atanh(math.sin(h1)), abs=1e-9)
    assert traj.arcs[0].sheet == 0 and traj.arcs[1].sheet == 1


def test_sheet_parity_alternates(spec3):
    traj = trace_geodesic(tangent(0.0, -0.4, 0.18), 40.0, spec3)
    sheets = [arc.sheet for arc in traj.arcs]
    for a, b in zip(sheets, sheets[1:]):
        assert b == 1 - a


def test_fold_back_stays_on_surface(spec3):
    for _ in range(12):
        ang = RNG.uniform(-0.4, 0.4)
        traj = trace_geodesic(tangent(-1.0, RNG.uniform(-0.5, 0.5), ang), 30.0, spec3)
        for arc in traj.arcs:
            for t in np.linspace(arc.t_in, arc.t_out, 25):
                w = traj.point_at(float(t))
                assert point_in_excised_disk(w, spec3, margin=1e-9) is None


def test_tau_lipschitz_along_trace(spec3):
    traj = trace_geodesic(tangent(-2.0, 0.3, 0.12), 35.0, spec3)
    ts = [t for t, _ in traj.tau_samples]
    taus = [v for _, v in traj.tau_samples]
    for (t1, v1), (t2, v2) in zip(zip(ts, taus), zip(ts[1:], taus[1:])):
        assert abs(v2 - v1) <= abs(t2 - t1) + 1e-9


def test_tau_continuous_across_crossings(spec3):
    traj = trace_geodesic(tangent(spec3.entries[0].s, 0.0, math.pi / 2), 5.0, spec3)
    tc = traj.crossings[0].time
    assert traj.tau_at(tc - 1e-7) == pytest.approx(traj.tau_at(tc + 1e-7), abs=1e-5)


# -- reversibility -------------------------------------------------------------


def test_reversibility(spec3):
    for _ in range(10):
        start = tangent(
            RNG.uniform(-1, 18),
            RNG.uniform(-0.9, 0.9),
            RNG.uniform(0, 2 * math.pi),
            int(RNG.integers(0, 2)),
        )
        w = band_to_chart_complex(start.base.z.x, start.base.z.y)
        if point_in_excised_disk(w, spec3) is not None:
            continue
        T = 8.0
        fwd = trace_geodesic(start, T, spec3)
        back = trace_geodesic(fwd.end_tangent.reversed(), T, spec3)
        again = back.end_tangent.reversed()
        assert again.base.z.x == pytest.approx(start.base.z.x, abs=1e-8)
        assert again.base.z.y == pytest.approx(start.base.z.y, abs=1e-8)
        assert math.cos(again.angle - start.angle) == pytest.approx(1.0, abs=1e-8)
        assert again.base.sheet == start.base.sheet


def test_flow_composition(spec3):
    start = tangent(1.0, 0.2, 0.3)
    mid = flow(start, 2.5, spec3)
    end = flow(mid, -2.5, spec3)
    assert end.base.z.x == pytest.approx(start.base.z.x, abs=1e-8)
    assert end.base.z.y == pytest.approx(start.base.z.y, abs=1e-8)


# -- slack properties ------------------------------------------------------------


def test_slack_additive_over_splits(spec3):
    traj = trace_geodesic(tangent(-1.0, 0.25, 0.1), 30.0, spec3)
    whole = slack_between(traj, 0.0, 30.0)
    for _ in range(10):
        cut = float(RNG.uniform(1.0, 29.0))
        parts = slack_between(traj, 0.0, cut) + slack_between(traj, cut, 30.0)
        assert parts == pytest.approx(whole, abs=1e-9)


def test_slack_monotone_in_horizon(spec3):
    traj = trace_geodesic(tangent(-1.0, 0.45, -0.2), 40.0, spec3)
    values = [slack_between(traj, 0.0, T) for T in (5.0, 10.0, 20.0, 40.0)]
    for a, b in zip(values, values[1:]):
        assert a <= b + 1e-10


def test_off_rail_segments_have_positive_slack(spec3):
    for _ in range(40):
        y = float(RNG.uniform(0.05, 0.8)) * (1 if RNG.random() < 0.5 else -1)
        ang = float(RNG.uniform(0.05, 0.6))
        traj = trace_geodesic(tangent(0.0, y, ang), 4.0, spec3)
        assert slack(traj).value > 1e-10


# -- errors ------------------------------------------------------------------------


def test_start_inside_excised_half_plane(spec3):
    s1, h1 = spec3.entries[0].s, spec3.entries[0].h
    bad = tangent(s1, h1 + 0.3, 0.0)
    with pytest.raises(OutsideSurfaceError):
        trace_geodesic(bad, 1.0, spec3)


def test_degenerate_trace_along_boundary(spec3):
    s1, h1 = spec3.entries[0].s, spec3.entries[0].h
    # tangent to the boundary geodesic at its anchor point: the chart circle
    # meets the band vertical orthogonally there, so the band direction of the
    # boundary at (s1, h1) is the horizontal direction
    with pytest.raises(DegenerateTraceError):
        trace_geodesic(tangent(s1, h1, 0.0), 1.0, spec3)
    with pytest.raises(DomainError):
        trace_geodesic(x_tangent(0), -1.0, spec3)


# -- horocycles ----------------------------------------------------------------------


def test_stable_horocycle_initial_chart(spec3):
    traj = trace_horocycle(x_tangent(0), 3.0, spec3, "stable")
    assert traj.crossing_sequence == []
    for t in np.linspace(0.0, 3.0, 10):
        w = traj.point_at(float(t))
        assert w.imag == pytest.approx(1.0, abs=1e-12)
        assert w.real == pytest.approx(float(t), abs=1e-12)


def test_horocycle_short_arc_continuity(spec3):
    start = tangent(1.0, 0.2, 0.7)
    for direction in ("stable", "unstable"):
        traj = trace_horocycle(start, 1e-6, spec3, direction)
        end = traj.end_tangent
        assert end.base.z.x == pytest.approx(start.base.z.x, abs=1e-5)
        assert end.base.z.y == pytest.approx(start.base.z.y, abs=1e-5)


def test_horocycle_enters_and_exits_disk(spec3):
    traj = trace_horocycle_window(x_tangent(0), (-20.0, 0.0), spec3, "stable")
    assert traj.crossing_sequence == [1, 1]
    assert traj.arcs[0].sheet == 0
    assert traj.arcs[1].sheet == 1
    assert traj.arcs[2].sheet == 0
    # entry/exit parameters of the line Im w = 1 against the chart disk
    s1, h1 = spec3.entries[0].s, spec3.entries[0].h
    m = -math.exp(s1) / math.sin(h1)
    r = math.exp(s1) / math.tan(h1)
    lo, hi = m - math.sqrt(r * r - 1), m + math.sqrt(r * r - 1)
    assert traj.crossings[0].time == pytest.approx(lo, rel=1e-9)
    assert traj.crossings[1].time == pytest.approx(hi, rel=1e-9)


def test_horocycle_fold_back_on_surface(spec3):
    traj = trace_horocycle_window(x_tangent(0), (-30.0, 5.0), spec3, "stable")
    for arc in traj.arcs:
        for t in np.linspace(arc.t_in, arc.t_out, 40):
            w = traj.point_at(float(t))
            assert point_in_excised_disk(w, spec3, margin=1e-9) is None


def test_unstable_horocycle_crossing(spec3):
    # tangent at the band origin whose backward geodesic endpoint lies under
    # the first excised disk, so the expanding horocycle wraps into it
    ang = -1.3221161458505512 - math.pi / 2
    traj = trace_horocycle(tangent(0.0, 0.0, ang), 40.0, spec3, "unstable")
    assert traj.crossing_sequence == [1]
    assert [arc.sheet for arc in traj.arcs] == [0, 1]
    for arc in traj.arcs:
        for t in np.linspace(arc.t_in, arc.t_out, 40):
            assert point_in_excised_disk(traj.point_at(float(t)), spec3,
                                         margin=1e-9) is None
    tc = traj.crossings[0].time
    assert abs(traj.tau_at(tc - 1e-7) - traj.tau_at(tc + 1e-7)) < 1e-5


# -- busemann ---------------------------------------------------------------------


def test_busemann_marked_points(spec3):
    for horizon in (5.0, 15.0, 30.0):
        b = busemann(x_tangent(0), horizon, spec3)
        assert not b.minus_infinity
        assert b.value == pytest.approx(0.0, abs=1e-10)


def test_busemann_translates_along_core(spec3):
    for t in (-2.0, 0.7, 3.0):
        b = busemann(tangent(t, 0.0, 0.0), 20.0, spec3)
        assert b.value == pytest.approx(t, abs=1e-10)


def test_busemann_decreasing_in_horizon(spec3):
    start = tangent(-1.0, 0.3, 0.15)
    values = [busemann(start, H, spec3).estimate for H in (5.0, 10.0, 20.0, 40.0)]
    for a, b in zip(values, values[1:]):
        assert b <= a + 1e-10


def test_busemann_vertical_ray_diverges(spec3):
    b = busemann(tangent(0.0, 0.0, math.pi / 2), 30.0, spec3)
    assert b.minus_infinity
    assert b.value == -math.inf
    assert b.tail_rate > 0.9


def test_busemann_cocycle(spec3):
    horizon = 40.0
    for _ in range(20):
        y0 = tangent(RNG.uniform(-1, 3), RNG.uniform(-0.3, 0.3), RNG.uniform(-0.15, 0.15))
        w = band_to_chart_complex(y0.base.z.x, y0.base.z.y)
        if point_in_excised_disk(w, spec3) is not None:
            continue
        base = busemann(y0, horizon, spec3)
        if base.minus_infinity:
            continue
        t = float(RNG.uniform(-2, 2))
        shifted = busemann(flow(y0, t, spec3), horizon, spec3)
        assert shifted.value == pytest.approx(base.value + t, abs=1e-8)


def test_concurrent_traces_are_deterministic(spec3):
    # the per-surface caches are append-only and shared; concurrent traces
    # must return exactly what sequential ones do
    from concurrent.futures import ThreadPoolExecutor

    def run(seed):
        rng = np.random.default_rng(seed)
        start = tangent(
            float(rng.uniform(-1, 10)), float(rng.uniform(-0.5, 0.5)),
            float(rng.uniform(0, 2 * math.pi)),
        )
        try:
            return slack(trace_geodesic(start, 15.0, spec3)).value
        except Exception:
            return None

    sequential = [run(s) for s in range(16)]
    with ThreadPoolExecutor(max_workers=8) as pool:
        concurrent = list(pool.map(run, range(16)))
    assert concurrent == sequential


def test_randomized_trace_invariants():
    rng = np.random.default_rng(314159)
    for trial in range(6):
        n = int(rng.integers(2, 5))
        heights = rng.uniform(0.15, 1.1, n)
        from loomlab.surface import design_heights

        spec = design_heights(heights, gap_base=float(rng.uniform(1.5, 4.0)),
                              gap_growth=float(rng.uniform(0.2, 1.0)))
        for _ in range(4):
            x = float(rng.uniform(-2.0, spec.entries[-1].s + 2.0))
            y = float(rng.uniform(-1.0, 1.0))
            if point_in_excised_disk(band_to_chart_complex(x, y), spec) is not None:
                continue
            start = tangent(x, y, float(rng.uniform(0, 2 * math.pi)),
                            int(rng.integers(0, 2)))
            traj = trace_geodesic(start, 25.0, spec)
            assert slack(traj).value >= 0.0
            sheets = [arc.sheet for arc in traj.arcs]
            for a, b in zip(sheets, sheets[1:]):
                assert b == 1 - a
            for arc in traj.arcs:
                for t in np.linspace(arc.t_in, arc.t_out, 12):
                    w = traj.point_at(float(t))
                    assert point_in_excised_disk(w, spec, margin=1e-8) is None
            ts = [t for t, _ in traj.tau_samples]
            taus = [v for _, v in traj.tau_samples]
            for (t1, v1), (t2, v2) in zip(zip(ts, taus), zip(ts[1:], taus[1:])):
                assert abs(v2 - v1) <= abs(t2 - t1) + 1e-9


# -- csv ----------------------------------------------------------------------------


def test_trajectory_csv_round_trip(tmp_path, spec3):
    traj = trace_geodesic(tangent(spec3.entries[0].s, 0.0, math.pi / 2), 4.0, spec3)
    path = tmp_path / "traj.csv"
    traj.to_csv(str(path))
    rows = load_trajectory_csv(str(path))
    assert rows[0][0] == pytest.approx(0.0)
    times = [r[0] for r in rows]
    assert times == sorted(times)
    marked = [r for r in rows if r[5] is not None]
    assert len(marked) == 1 and marked[0][5] == 1
    content1 = path.read_text()
    traj.to_csv(str(path))
    assert path.read_text() == content1  # deterministic rewrite
