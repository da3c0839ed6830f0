"""Crossings, weaving geodesics, and the slack bookkeeping around them.

A crossing is the geodesic switching sheets exactly once through one
boundary component; in the chart it develops to the geodesic from 0 (the
backward core endpoint) to the reflected image of infinity, i.e. to the
Euclidean center of the boundary circle.  A weaving geodesic for a pattern
k_1 < ... < k_m develops to the geodesic from 0 to
(R_{k_1} o ... o R_{k_m})(inf): the pattern is specified combinatorially,
the developing word is derived from the crossing order, and the result is
validated by comparing the traced crossing sequence against the pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hyperbolic import (
    INF,
    BandPoint,
    DomainError,
    GeodesicLine,
    GeometryError,
    Isometry,
    band_tangent_from_frame,
    band_to_chart_complex,
    dist_chart,
    dist_geodesics,
    frame_from_band_tangent,
    frame_through,
    geodesic_through_points,
    point_to_geodesic,
)
from .surface import (
    LoomSurfaceSpec,
    SurfacePoint,
    boundary_geodesics,
    design_heights,
    reflections,
)
from .tracer import (
    SurfaceTangent,
    Trajectory,
    slack,
    slack_between,
    trace_geodesic,
    trace_geodesic_window,
)


class PatternError(GeometryError):
    """Invalid weaving pattern."""


def _band_tangent(x: float, y: float, angle: float, sheet: int = 0) -> SurfaceTangent:
    return SurfaceTangent(SurfacePoint(BandPoint(x, y), sheet), angle)


@dataclass(frozen=True)
class WeavingPattern:
    indices: tuple[int, ...]
    initial_sign: str = "+"

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(k) for k in self.indices))
        if self.initial_sign not in ("+", "-"):
            raise PatternError("initial sign must be '+' or '-'")
        if any(k < 1 for k in self.indices):
            raise PatternError("pattern indices must be positive")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise PatternError(f"pattern must be strictly increasing: {self.indices}")

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class CrossingGeodesic:
    index: int
    sign: str
    line: GeodesicLine
    slack_closed_form: float


@dataclass(frozen=True)
class WeavingGeodesic:
    pattern: WeavingPattern
    line: GeodesicLine
    trajectory: Trajectory
    traced_slack: float
    start_sheet: int
    end_sheet: int


@dataclass(frozen=True)
class AdditivityReport:
    pattern: tuple[int, ...]
    traced_slack: float
    predicted_slack: float
    abs_error: float
    min_gap: float
    horizon: float

    def to_dict(self) -> dict:
        return {
            "pattern": list(self.pattern),
            "traced_slack": self.traced_slack,
            "predicted_slack": self.predicted_slack,
            "abs_error": self.abs_error,
            "min_gap": self.min_gap,
            "horizon": self.horizon,
        }


def crossing_slack(h: float) -> float:
    """Slack of a single crossing through a boundary of height h.

    Two equivalent closed forms are evaluated and must agree to 1e-12:
    2 ln cosh(arctanh(sin h)) and -2 ln cos h (cosh of arctanh(x) is
    1/sqrt(1 - x^2) and 1 - sin^2 h = cos^2 h).
    """
    if not (0.0 < h < math.pi / 2):
        raise DomainError(f"height must lie in (0, pi/2), got {h}")
    via_cosh = 2.0 * math.log(math.cosh(math.atanh(math.sin(h))))
    via_cos = -2.0 * math.log(math.cos(h))
    if abs(via_cosh - via_cos) > 1e-12 * max(1.0, via_cos):
        raise GeometryError("closed-form slack mismatch beyond 1e-12")
    return via_cos


def _check_index(k: int, spec: LoomSurfaceSpec):
    if not 1 <= k <= spec.count:
        raise PatternError(f"index {k} outside the surface prefix 1..{spec.count}")


def build_crossing(k: int, sign: str, spec: LoomSurfaceSpec) -> CrossingGeodesic:
    """Developed line of the single crossing through boundary k."""
    _check_index(k, spec)
    if sign not in ("+", "-"):
        raise PatternError("sign must be '+' or '-'")
    target = reflections(spec)[k - 1].apply_boundary(INF)
    line = GeodesicLine(0.0, target)
    return CrossingGeodesic(k, sign, line, crossing_slack(spec.entries[k - 1].h))


def default_crossing_horizon(k: int, spec: LoomSurfaceSpec) -> float:
    return 2.0 * spec.entries[k - 1].s + 40.0


def trace_crossing(k: int, sign: str, spec: LoomSurfaceSpec,
                   horizon: float | None = None) -> Trajectory:
    """Trace the crossing geodesic over a window centered at its anchor
    point on the boundary; both tails approach the core rails."""
    cg = build_crossing(k, sign, spec)
    if horizon is None:
        horizon = default_crossing_horizon(k, spec)
    e = spec.entries[k - 1]
    anchor = band_to_chart_complex(e.s, e.h)
    frame = frame_through(cg.line, anchor)
    sheet = 0 if sign == "+" else 1
    return trace_geodesic_window(frame, (-horizon / 2.0, horizon / 2.0), spec, sheet,
                                 forward_rail=True)


# -- pulled-tight construction ------------------------------------------------
#
# A single developed line cannot represent a weaving geodesic with large
# gaps in floats: the aim separating "cross k_2 then k_3" from "miss k_3"
# lives exponentially below the endpoint's resolution.  Pulling tight is
# therefore solved locally instead: find one point on each crossed circle
# such that consecutive geodesic arcs obey the reflection law there.  All
# quantities involved (directions, arc lengths, tail slacks) have closed
# forms conditioned by one gap, not by the whole pattern.


def _direction_to(p: complex, q: complex) -> complex:
    """Unit tangent direction at chart point p of the arc from p to q."""
    line = geodesic_through_points(p, q)
    if line.is_vertical():
        return 1j if q.imag > p.imag else -1j
    c, _ = line.center_radius()
    theta_p = math.atan2(p.imag, p.real - c)
    theta_q = math.atan2(q.imag, q.real - c)
    sign = 1.0 if theta_q > theta_p else -1.0
    v = sign * 1j * (p - c)
    return v / abs(v)


def _direction_to_ideal(p: complex, b: float) -> complex:
    """Unit tangent direction at p of the geodesic ray from p to boundary b."""
    if math.isinf(b):
        return 1j
    u, v = p.real, p.imag
    if abs(u - b) < 1e-300:
        return -1j  # straight down onto the foot
    c = (u * u + v * v - b * b) / (2.0 * (u - b))
    theta_p = math.atan2(v, u - c)
    theta_b = 0.0 if b > c else math.pi
    sign = 1.0 if theta_b > theta_p else -1.0
    w = sign * 1j * (p - c)
    return w / abs(w)


def _angle_diff(v1: complex, v2: complex) -> float:
    return math.remainder(math.atan2(v2.imag, v2.real) - math.atan2(v1.imag, v1.real),
                          2.0 * math.pi)


def solve_crossing_points(sequence, spec: LoomSurfaceSpec, *, tol: float = 1e-12,
                          max_iter: int = 60,
                          start: complex | None = None,
                          end: complex | None = None) -> list[complex]:
    """Crossing points of the pulled-tight geodesic through the given
    boundary sequence.

    By default the geodesic is backward-asymptotic to the rail end at 0 and
    forward-asymptotic to the rail end at infinity; passing chart points as
    `start`/`end` pins the corresponding end instead (a tight segment).

    One unknown angle per crossed circle; the residual at each circle is
    the reflection-law mismatch between the incoming and outgoing arcs.
    Newton iteration from the circle anchors converges fast: the coupling
    between neighbors decays with the gap.
    """
    seq = [int(k) for k in sequence]
    for k in seq:
        _check_index(k, spec)
    for a, b in zip(seq, seq[1:]):
        if a == b:
            raise PatternError("consecutive crossings of the same boundary collapse")
    lines = boundary_geodesics(spec)
    refl = reflections(spec)
    circles = [lines[k - 1].center_radius() for k in seq]
    m = len(seq)

    def points(phis):
        return [complex(c + r * math.cos(f), r * math.sin(f))
                for (c, r), f in zip(circles, phis)]

    def residuals(phis):
        pts = points(phis)
        out = []
        for j in range(m):
            if j > 0:
                incoming = _direction_to(pts[j], pts[j - 1])
            elif start is None:
                incoming = _direction_to_ideal(pts[j], 0.0)
            else:
                incoming = _direction_to(pts[j], start)
            _, refl_dir = refl[seq[j] - 1].apply_tangent(pts[j], -incoming)
            if j < m - 1:
                outgoing = _direction_to(pts[j], pts[j + 1])
            elif end is None:
                outgoing = _direction_to_ideal(pts[j], math.inf)
            else:
                outgoing = _direction_to(pts[j], end)
            out.append(_angle_diff(outgoing, refl_dir))
        return np.array(out)

    phis = np.array([
        math.atan2(band_to_chart_complex(spec.entries[k - 1].s,
                                         spec.entries[k - 1].h).imag,
                   band_to_chart_complex(spec.entries[k - 1].s,
                                         spec.entries[k - 1].h).real
                   - circles[j][0])
        for j, k in enumerate(seq)
    ])
    res = residuals(phis)
    for _ in range(max_iter):
        if float(np.abs(res).max()) < tol:
            break
        jac = np.zeros((m, m))
        delta = 1e-7
        for j in range(m):
            probe = phis.copy()
            probe[j] += delta
            jac[:, j] = (residuals(probe) - res) / delta
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise PatternError(f"tightening system is singular: {exc}") from exc
        step = np.clip(step, -0.3, 0.3)
        phis = phis + step
        phis = np.clip(phis, 1e-9, math.pi - 1e-9)
        res = residuals(phis)
    else:
        raise PatternError(
            f"tightening did not converge for sequence {seq}: residual {res}"
        )
    return points(phis)


def tail_slack(p: complex) -> float:
    """Slack of the geodesic ray from chart point p to either rail end
    (the boundary point 0 backward, or infinity forward)."""
    return math.log(abs(p) / p.imag)


def pulled_tight_slack(sequence, spec: LoomSurfaceSpec) -> float:
    """Exact slack of the pulled-tight geodesic through the sequence: the
    two rail-tail terms plus length-minus-progress over each middle arc."""
    pts = solve_crossing_points(sequence, spec)
    total = tail_slack(pts[0]) + tail_slack(pts[-1])
    for p, q in zip(pts, pts[1:]):
        total += dist_chart(p, q) - (math.log(abs(q)) - math.log(abs(p)))
    return total


def assemble_tight_trajectory(sequence, spec: LoomSurfaceSpec, *,
                              start_sheet: int = 0,
                              horizon: float | None = None) -> Trajectory:
    """Trajectory of the pulled-tight geodesic through the given boundary
    sequence, built arc by arc from the solved crossing points.  Each arc
    carries an exactly-anchored frame, so the rail tails stay exact at any
    horizon."""
    from .tracer import CrossingEvent, Trajectory, TrajectoryArc, attach_tau_samples
    from .hyperbolic import chart_to_band_xy

    seq = [int(k) for k in sequence]
    pts = solve_crossing_points(seq, spec)
    if horizon is None:
        horizon = 2.0 * max(spec.entries[k - 1].s for k in seq) + 40.0
    times = [0.0]
    for p, q in zip(pts, pts[1:]):
        times.append(times[-1] + dist_chart(p, q))
    # reach back to tau of about -20 along the incoming rail tail
    t_lo = -(spec.entries[seq[0] - 1].s + 20.0)
    t_hi = max(times[-1] + 20.0, t_lo + horizon)

    p1 = pts[0]
    c_back = (abs(p1) ** 2) / (2.0 * p1.real)
    f_in = frame_through(GeodesicLine(0.0, 2.0 * c_back), p1)
    frame0_inv = f_in.inverse()

    arcs = []
    crossings = []
    sheet = start_sheet
    arcs.append(TrajectoryArc(t_lo, 0.0, Isometry.identity(), f_in, sheet, seq[0]))
    crossings.append(
        CrossingEvent(0.0, seq[0], BandPoint(*chart_to_band_xy(p1.real, p1.imag)))
    )
    for j in range(1, len(seq)):
        sheet = 1 - sheet
        seg = frame_through(geodesic_through_points(pts[j - 1], pts[j]), pts[j - 1])
        fold_std = seg @ Isometry.a_flow(-times[j - 1])
        arcs.append(TrajectoryArc(times[j - 1], times[j], fold_std @ frame0_inv,
                                  fold_std, sheet, seq[j]))
        crossings.append(
            CrossingEvent(times[j], seq[j],
                          BandPoint(*chart_to_band_xy(pts[j].real, pts[j].imag)))
        )
    sheet = 1 - sheet
    pm = pts[-1]
    sq = math.sqrt(pm.imag)
    vertical = Isometry([[sq, pm.real / sq], [0.0, 1.0 / sq]])
    fold_std = vertical @ Isometry.a_flow(-times[-1])
    arcs.append(TrajectoryArc(times[-1], t_hi, fold_std @ frame0_inv, fold_std,
                              sheet, None))

    traj = Trajectory(
        kind="geodesic",
        curve="geodesic",
        frame0=f_in,
        t_lo=t_lo,
        t_hi=t_hi,
        arcs=arcs,
        crossings=crossings,
    )
    attach_tau_samples(traj)
    # the tight arcs must stay on the surface: none may dip into a disk
    from .surface import point_in_excised_disk

    for arc in traj.arcs:
        span = arc.t_out - arc.t_in
        for frac in np.linspace(0.02, 0.98, 33):
            w = traj.point_at(arc.t_in + span * float(frac))
            hit = point_in_excised_disk(w, spec, margin=1e-9)
            if hit is not None:
                raise PatternError(
                    f"tightened arc enters half-plane {hit}: the sequence "
                    f"{seq} is not realized by this surface"
                )
    return traj


def build_weaving(pattern: WeavingPattern | tuple, spec: LoomSurfaceSpec,
                  horizon: float | None = None) -> WeavingGeodesic:
    """Pull tight and realize the weaving geodesic of a strictly increasing
    pattern; the crossing sequence of the result is validated geometrically."""
    if not isinstance(pattern, WeavingPattern):
        pattern = WeavingPattern(tuple(pattern))
    if len(pattern) == 0:
        raise PatternError("weaving pattern must be nonempty")
    for k in pattern.indices:
        _check_index(k, spec)
    refl = reflections(spec)
    word = Isometry.identity()
    for k in pattern.indices:
        word = word @ refl[k - 1]
    target = word.apply_boundary(INF)
    line = GeodesicLine(0.0, target) if target != 0.0 else GeodesicLine(0.0, -1.0)
    sheet = 0 if pattern.initial_sign == "+" else 1
    traj = assemble_tight_trajectory(pattern.indices, spec, start_sheet=sheet,
                                     horizon=horizon)
    if traj.crossing_sequence != list(pattern.indices):
        raise PatternError(
            f"realized crossings {traj.crossing_sequence} differ from pattern "
            f"{list(pattern.indices)}"
        )
    return WeavingGeodesic(
        pattern=pattern,
        line=line,
        trajectory=traj,
        traced_slack=slack(traj).value,
        start_sheet=sheet,
        end_sheet=traj.arcs[-1].sheet,
    )


def verify_weaving_additivity(pattern, spec: LoomSurfaceSpec,
                              horizon: float | None = None) -> AdditivityReport:
    """Traced slack of a weaving geodesic against the sum of its crossings'
    closed-form slacks."""
    wg = build_weaving(pattern, spec, horizon)
    idx = wg.pattern.indices
    predicted = sum(crossing_slack(spec.entries[k - 1].h) for k in idx)
    lines = boundary_geodesics(spec)
    if len(idx) > 1:
        min_gap = min(
            dist_geodesics(lines[a - 1], lines[b - 1]) for a, b in zip(idx, idx[1:])
        )
    else:
        min_gap = math.inf
    return AdditivityReport(
        pattern=idx,
        traced_slack=wg.traced_slack,
        predicted_slack=predicted,
        abs_error=abs(wg.traced_slack - predicted),
        min_gap=min_gap,
        horizon=wg.trajectory.total_time,
    )


def additivity_gap_sweep(gaps, *, pattern_length: int = 3, h: float = math.pi / 4,
                         executor=None) -> list[AdditivityReport]:
    """One constant-height surface per gap value, each probed with the
    pattern (1, ..., m)."""

    def run(gap):
        spec = design_heights([h] * pattern_length, gap_base=gap)
        return verify_weaving_additivity(tuple(range(1, pattern_length + 1)), spec)

    if executor is not None:
        return list(executor.map(run, gaps))
    return [run(g) for g in gaps]


# -- monotone-crossing sampling ---------------------------------------------------


def sufficient_weaving_start(rho: float, spec: LoomSurfaceSpec) -> tuple[float, int]:
    """Sufficient start position S = s_{k_0}: k_0 is the least index such
    that every boundary gap from the (k_0-1, k_0) pair onward exceeds rho."""
    if rho < 0:
        raise DomainError("rho must be >= 0")
    lines = boundary_geodesics(spec)
    gaps = [dist_geodesics(lines[i], lines[i + 1]) for i in range(len(lines) - 1)]
    k0 = 1
    for i in range(len(gaps) - 1, -1, -1):
        if gaps[i] <= rho:
            k0 = i + 2
            break
    return spec.entries[k0 - 1].s, k0


@dataclass(frozen=True)
class WeavingLemmaReport:
    rho: float
    k0: int
    s_sufficient: float
    min_gap_beyond: float
    samples_total: int
    all_weaving_beyond_s: bool
    empirical_safe_tau: float
    backtrack_slack: float
    backtrack_exceeds_min_gap: bool
    violations: tuple


def _strictly_increasing(seq) -> bool:
    return all(b > a for a, b in zip(seq, seq[1:]))


def backtracking_demo(spec: LoomSurfaceSpec, k_first: int = 2,
                      k_second: int = 1) -> tuple[Trajectory, float]:
    """A deliberately backtracking geodesic: it crosses k_first, then the
    reflected image of k_second < k_first, paying wrong-direction travel
    between the two boundaries."""
    if not k_second < k_first:
        raise PatternError("backtracking demo needs k_second < k_first")
    _check_index(k_first, spec)
    traj = assemble_tight_trajectory((k_first, k_second), spec)
    if traj.crossing_sequence[:2] != [k_first, k_second]:
        raise PatternError(
            f"backtracking construction crossed {traj.crossing_sequence}"
        )
    return traj, slack(traj).value


def verify_weaving_lemma(rho: float, spec: LoomSurfaceSpec, samples: int,
                         seed: int = 0) -> WeavingLemmaReport:
    """Sample rays of measured slack <= rho and check the monotone-crossing
    property beyond the sufficient start position.

    Half the samples are subrays of explicitly built small-slack weaving
    geodesics, half are jittered rays near the core filtered by measured
    slack; both kinds must cross with strictly increasing indices.
    """
    if samples < 1:
        raise DomainError("need at least one sample")
    rng = np.random.default_rng(seed)
    s_suff, k0 = sufficient_weaving_start(rho, spec)
    lines = boundary_geodesics(spec)
    gaps = [dist_geodesics(lines[i], lines[i + 1]) for i in range(len(lines) - 1)]
    min_gap_beyond = min(gaps[k0 - 1:], default=math.inf)

    s_last = spec.entries[-1].s
    records = []  # (tau at start, measured slack, weaving bool)

    usable = [
        k for k in range(k0, spec.count + 1)
        if crossing_slack(spec.entries[k - 1].h) <= 0.85 * rho
    ]
    cache: dict[tuple, Trajectory] = {}
    attempts = 0
    while len(records) < samples and attempts < 60 * samples:
        attempts += 1
        if usable and rng.random() < 0.5:
            m = int(rng.integers(1, min(3, len(usable)) + 1))
            idx = tuple(sorted(rng.choice(usable, size=m, replace=False).tolist()))
            if sum(crossing_slack(spec.entries[k - 1].h) for k in idx) > 0.9 * rho:
                continue
            if idx not in cache:
                try:
                    cache[idx] = build_weaving(idx, spec).trajectory
                except PatternError:
                    continue
            traj = cache[idx]
            starts = [t for t, tau_v in traj.tau_samples
                      if s_suff + 0.1 < tau_v < spec.entries[idx[0] - 1].s - 0.5]
            if not starts:
                continue
            t_s = float(rng.choice(starts))
            measured = slack_between(traj, t_s, traj.t_hi)
            seq = [c.index for c in traj.crossings if c.time > t_s]
            tau_start = traj.tau_at(t_s)
        else:
            tau_start = float(rng.uniform(s_suff + 0.1, s_last + 2.0))
            y0 = float(rng.uniform(-0.2, 0.2))
            ang = float(rng.uniform(-0.2, 0.2))
            try:
                traj = trace_geodesic(
                    _band_tangent(tau_start, y0, ang),
                    (s_last - tau_start) + 30.0,
                    spec,
                )
            except GeometryError:
                continue
            measured = slack(traj).value
            seq = traj.crossing_sequence
        if measured <= rho:
            records.append((tau_start, measured, _strictly_increasing(seq)))

    violations = tuple((t0, m) for t0, m, ok in records if not ok)
    empirical_safe = s_suff
    for t0, _, ok in sorted(records, key=lambda r: r[0], reverse=True):
        if not ok:
            empirical_safe = t0
            break

    _, backtrack_slack = backtracking_demo(spec, min(2, spec.count), 1)
    return WeavingLemmaReport(
        rho=rho,
        k0=k0,
        s_sufficient=s_suff,
        min_gap_beyond=min_gap_beyond,
        samples_total=len(records),
        all_weaving_beyond_s=not violations,
        empirical_safe_tau=empirical_safe,
        backtrack_slack=backtrack_slack,
        backtrack_exceeds_min_gap=backtrack_slack > min(gaps, default=0.0),
        violations=violations,
    )


# -- chain slack --------------------------------------------------------------------


@dataclass(frozen=True)
class ChainSlackReport:
    n_arcs: int
    min_arc_length: float
    eps_budget: float
    eps_realized: float
    sum_arc_slack: float
    tight_slack: float
    abs_error: float
    junction_deviation: float


def _canonical_frame(tan: SurfaceTangent) -> Isometry:
    return frame_from_band_tangent(tan.base.z.x, tan.base.z.y, tan.angle)


def _junction(prev_end: SurfaceTangent, next_start: SurfaceTangent):
    if prev_end.base.sheet != next_start.base.sheet:
        raise DomainError("chain junction joins tangents on different sheets")
    k = _canonical_frame(prev_end).inverse() @ _canonical_frame(next_start)
    size = min(
        float(np.abs(k.m - np.eye(2)).sum()),
        float(np.abs(k.m + np.eye(2)).sum()),
    )
    return k, size


def verify_chain_slack(chain: list[Trajectory], eps: float, spec: LoomSurfaceSpec,
                       min_arc_length: float = 1.0) -> ChainSlackReport:
    """Slack of the pulled-tight geodesic homotopic to a near-concatenation
    of geodesic arcs, against the sum of the arcs' slacks.

    Junction gaps are the group displacements between the end tangent of
    one arc and the start tangent of the next.  The tight representative is
    the segment through the chain's combined crossing sequence with the
    chain's endpoints pinned, obtained from the local reflection solver;
    its slack is the sum of length-minus-progress over its sub-arcs.
    """
    if len(chain) < 1:
        raise DomainError("chain must contain at least one arc")
    for traj in chain:
        if traj.kind != "geodesic":
            raise DomainError("chain arcs must be geodesic trajectories")
        if traj.total_time < min_arc_length - 1e-12:
            raise DomainError(
                f"arc of length {traj.total_time} is shorter than {min_arc_length}"
            )
    eps_realized = 0.0
    junction_points = []
    for prev, nxt in zip(chain, chain[1:]):
        _, size = _junction(prev.end_tangent, nxt.start_tangent)
        eps_realized += size
        junction_points.append(prev.point_at(prev.t_hi))
    if eps_realized > eps * (1.0 + 1e-9) + 1e-9:  # float-level concatenations pass
        raise DomainError(
            f"junction gaps sum to {eps_realized}, above the budget {eps}"
        )

    seq: list[int] = []
    for traj in chain:
        seq.extend(traj.crossing_sequence)
    p_start = chain[0].point_at(chain[0].t_lo)
    q_end = chain[-1].point_at(chain[-1].t_hi)
    sheet_end = chain[-1].arcs[-1].sheet
    expected_end = chain[0].arcs[0].sheet ^ (len(seq) % 2)
    if sheet_end != expected_end:
        raise DomainError("chain sheet labels disagree with its crossing count")

    if seq:
        pts = solve_crossing_points(seq, spec, start=p_start, end=q_end)
    else:
        pts = []
    nodes = [p_start, *pts, q_end]
    tight_slack = 0.0
    for a, b in zip(nodes, nodes[1:]):
        tight_slack += dist_chart(a, b) - (math.log(abs(b)) - math.log(abs(a)))

    total = sum(slack(traj).value for traj in chain)
    deviation = 0.0
    for w in junction_points:
        best = math.inf
        for a, b in zip(nodes, nodes[1:]):
            best = min(best, point_to_geodesic(w, geodesic_through_points(a, b)))
        deviation = max(deviation, best)
    return ChainSlackReport(
        n_arcs=len(chain),
        min_arc_length=min(traj.total_time for traj in chain),
        eps_budget=eps,
        eps_realized=eps_realized,
        sum_arc_slack=total,
        tight_slack=tight_slack,
        abs_error=abs(tight_slack - total),
        junction_deviation=deviation,
    )


def split_perturbed_chain(spec: LoomSurfaceSpec, eps: float, *, pieces: int = 3,
                          seed: int = 0, pattern=(1, 2)) -> list[Trajectory]:
    """Chain harness: split a weaving geodesic into equal arcs, then shift
    the start of every arc after the first along the horocycle direction so
    the junction gaps sum to at most eps (zero eps reproduces a genuine
    concatenation)."""
    rng = np.random.default_rng(seed)
    base = build_weaving(pattern, spec).trajectory
    cuts = list(np.linspace(base.t_lo, base.t_hi, pieces + 1))
    cross_times = [c.time for c in base.crossings]
    for i in range(1, pieces):
        while any(abs(cuts[i] - tc) < 1.0 for tc in cross_times):
            cuts[i] += 1.0
    per = eps / max(1, pieces - 1)
    chain = []
    for i in range(pieces):
        length = float(cuts[i + 1] - cuts[i])
        if i == 0 or per == 0.0:
            # exact sub-arc of the base geodesic: no junction noise
            chain.append(base.restrict(float(cuts[i]), float(cuts[i + 1])))
            continue
        tan = base.tangent_at(float(cuts[i]))
        jitter = per * (0.5 + 0.4 * float(rng.random()))
        f = _canonical_frame(tan) @ Isometry.u_upper(jitter / 2.0)
        x, y, ang = band_tangent_from_frame(f)
        tan = _band_tangent(x, y, ang, tan.base.sheet)
        chain.append(trace_geodesic(tan, length, spec))
    return chain
