"""Exact tracing of geodesics and horocycles on loom surfaces.

A trace never leaves standard position: the curve is the imaginary axis
(geodesics), the horizontal line Im w = 1 (stable horocycles) or the circle
of diameter 1 tangent at 0 (unstable horocycles), parameterized at unit
speed.  The surface is unfolded across the curve instead: the boundary
geodesics are pulled back through the growing reflection word, so every
crossing test is a closed-form intersection against the standard curve.

Unfolding bookkeeping, for a trace with developed start frame F0:

    P_0 = F0^{-1},   P_i = P_{i-1} o R_k     after crossing boundary k,
    band representative of the point at time t on arc i:  P_i^{-1}(K(t)),

with K the standard curve.  Only the children of the current copy are ever
generated (lazy unfolding): each step pulls the finitely many base boundary
circles through the current word and keeps the earliest admissible hit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .hyperbolic import (
    INF,
    BandPoint,
    DomainError,
    GeodesicLine,
    GeometryError,
    Isometry,
    chart_to_band_xy,
    frame_from_band_tangent,
)
from .surface import (
    LoomSurfaceSpec,
    SurfacePoint,
    boundary_geodesics,
    point_in_excised_disk,
    reflections,
)

_TIME_GUARD = 1e-10
_GRAZE_TOL = 1e-12


class TraceError(GeometryError):
    """Trace cannot be carried out."""


class DegenerateTraceError(TraceError):
    """The trace curve coincides with a boundary geodesic."""


class OutsideSurfaceError(TraceError):
    """Start point lies inside an excised half-plane."""


@dataclass(frozen=True)
class SurfaceTangent:
    """Unit tangent vector on the surface: base point, sheet, band direction."""

    base: SurfacePoint
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", self.angle % (2.0 * math.pi))

    def reversed(self) -> "SurfaceTangent":
        return SurfaceTangent(self.base, self.angle + math.pi)


def x_tangent(sheet: int) -> SurfaceTangent:
    """The marked forward tangent at the band origin on the given sheet."""
    return SurfaceTangent(SurfacePoint(BandPoint(0.0, 0.0), sheet), 0.0)


@dataclass(frozen=True)
class SlackValue:
    value: float
    horizon: float
    diverging: bool = False


@dataclass(frozen=True)
class BusemannValue:
    value: float
    estimate: float
    minus_infinity: bool
    tail_rate: float


@dataclass(frozen=True)
class TrajectoryArc:
    t_in: float
    t_out: float
    fold: Isometry  # developed chart -> band representative in J
    fold_std: Isometry  # standard curve coordinates -> band representative
    sheet: int
    crossing_index: int | None  # boundary crossed at t_out, None on the last arc


def _repair_fold(iso: Isometry) -> Isometry:
    """Recompute the smallest matrix entry from the unit-determinant
    identity.  Composed fold words have structurally vanishing entries (a
    folded tail asymptotic to a vertical line has an exactly zero corner);
    float composition leaves noise of size 1e-16 * (matrix scale) there,
    and that noise acts like a fake pole when the fold is evaluated far
    along an asymptotic tail.  Solving det = 1 for the smallest entry from
    the three well-conditioned ones removes the noise and is a no-op, up to
    rounding, for well-conditioned matrices."""
    m = iso.m.copy()
    a, b, c, d = m.ravel()
    mags = np.abs(m).ravel()
    k = int(np.argmin(mags))
    scale = float(mags.max())
    if scale == 0.0 or mags[k] > 1e-6 * scale:
        return iso
    if k == 2 and b != 0.0:
        val, floor = (a * d - 1.0) / b, abs(a * d) / abs(b)
    elif k == 1 and c != 0.0:
        val, floor = (a * d - 1.0) / c, abs(a * d) / abs(c)
    elif k == 0 and d != 0.0:
        val, floor = (1.0 + b * c) / d, max(abs(b * c), 1.0) / abs(d)
    elif k == 3 and a != 0.0:
        val, floor = (1.0 + b * c) / a, max(abs(b * c), 1.0) / abs(a)
    else:
        return iso
    # below the repair's own rounding floor the value is indistinguishable
    # from an exact structural zero; snapping keeps asymptotic tails exact
    if abs(val) <= 64.0 * 2.3e-16 * floor:
        val = 0.0
    m.ravel()[k] = val
    return Isometry(m, iso.reversing, _trusted=True)


@dataclass(frozen=True)
class CrossingEvent:
    time: float
    index: int
    point: BandPoint


# -- standard curves ---------------------------------------------------------


def _std_point(curve: str, t: float) -> complex:
    if curve == "geodesic":
        return 1j * math.exp(t)
    if curve == "stable":
        return complex(t, 1.0)
    den = 1.0 + t * t
    return complex(t / den, 1.0 / den)


def _std_frame(curve: str, t: float) -> Isometry:
    if curve == "geodesic":
        return Isometry.a_flow(t)
    if curve == "stable":
        return Isometry.u_upper(t)
    return Isometry.n_lower(t)


def _std_velocity(curve: str, t: float) -> complex:
    if curve == "geodesic":
        return 1j * math.exp(t)
    if curve == "stable":
        return 1.0 + 0.0j
    den = (1.0 + t * t) ** 2
    return complex((1.0 - t * t) / den, -2.0 * t / den)


def _geodesic_hits(circle: GeodesicLine) -> tuple[list[float], bool]:
    """Crossing times of the imaginary axis with a pulled-back circle."""
    x1, x2 = circle.e_minus, circle.e_plus
    if math.isinf(x1) or math.isinf(x2):
        return [], False
    prod = x1 * x2
    if not prod < 0.0:
        return [], False
    val = -prod
    if not math.isfinite(val) or val <= 0.0:
        return [], False
    return [0.5 * math.log(val)], False


def _stable_hits(circle: GeodesicLine) -> tuple[list[float], bool]:
    """Crossing times of the line Im w = 1 with a pulled-back circle."""
    if circle.is_vertical():
        return [circle.foot()], False
    m, r = circle.center_radius()
    disc = r * r - 1.0
    if disc <= _GRAZE_TOL:
        return [], disc > -_GRAZE_TOL
    s = math.sqrt(disc)
    roots = [m - s, m + s]
    # the root nearer the origin of the pair loses precision when |m| >> s;
    # recover it from the product of roots, m^2 - disc
    big = max(roots, key=abs)
    if big != 0.0:
        roots = sorted(((m * m - disc) / big, big))
    return roots, False


def _unstable_hits(circle: GeodesicLine) -> tuple[list[float], bool]:
    """Crossing times of the unit-diameter circle at 0 with a pulled circle."""
    if circle.is_vertical():
        x = circle.foot()
        disc = 1.0 - 4.0 * x * x
        if disc <= _GRAZE_TOL:
            return [], abs(disc) <= _GRAZE_TOL
        sq = math.sqrt(disc)
        out = [x / v for v in ((1.0 + sq) / 2.0, (1.0 - sq) / 2.0) if v > 1e-15]
        return sorted(out), False
    m, r = circle.center_radius()
    q = r * r - m * m
    a = 1.0 + 4.0 * m * m
    b = 2.0 * m * (2.0 * q - 1.0)
    c = q * (q - 1.0)
    disc = b * b - 4.0 * a * c
    guard = _GRAZE_TOL * max(1.0, b * b, abs(4.0 * a * c))
    if disc <= guard:
        return [], abs(disc) <= guard
    sq = math.sqrt(disc)
    out = []
    for u in ((-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a)):
        v = 2.0 * m * u + q
        if v > 1e-15:
            out.append(u / v)
    return sorted(out), False


_HITS = {"geodesic": _geodesic_hits, "stable": _stable_hits, "unstable": _unstable_hits}


# -- trajectory ----------------------------------------------------------------


@dataclass
class Trajectory:
    """A traced path: the standard curve, the developed start frame, and the
    per-arc fold-back words produced by the unfolding."""

    kind: str  # "geodesic" | "horocycle"
    curve: str  # standard curve: "geodesic" | "stable" | "unstable"
    frame0: Isometry
    t_lo: float
    t_hi: float
    arcs: list[TrajectoryArc]
    crossings: list[CrossingEvent]
    tau_samples: list[tuple[float, float]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def total_time(self) -> float:
        return self.t_hi - self.t_lo

    def _arc_at(self, t: float) -> TrajectoryArc:
        if not self.t_lo - 1e-9 <= t <= self.t_hi + 1e-9:
            raise DomainError(f"time {t} outside trace window [{self.t_lo}, {self.t_hi}]")
        for arc in self.arcs:
            if t <= arc.t_out + 1e-15:
                return arc
        return self.arcs[-1]

    def _fold_std(self, arc: TrajectoryArc) -> Isometry:
        """Map from standard curve coordinates to the band representative."""
        return arc.fold_std

    def point_at(self, t: float) -> complex:
        arc = self._arc_at(t)
        return self._fold_std(arc).apply_point(_std_point(self.curve, t))

    def band_at(self, t: float) -> BandPoint:
        w = self.point_at(t)
        return BandPoint(*chart_to_band_xy(w.real, w.imag))

    def sheet_at(self, t: float) -> int:
        return self._arc_at(t).sheet

    def tau_at(self, t: float) -> float:
        if self.curve == "geodesic":
            # log-space evaluation: |M(i e^t)|^2 = (a^2 e^{2t} + b^2) /
            # (c^2 e^{2t} + d^2), safe at any window depth
            arc = self._arc_at(t)
            a, b, c, d = np.abs(arc.fold_std.m).ravel()

            def lg(v):
                return math.log(v) if v > 0.0 else -math.inf

            num = np.logaddexp(2.0 * (lg(a) + t), 2.0 * lg(b))
            den = np.logaddexp(2.0 * (lg(c) + t), 2.0 * lg(d))
            return 0.5 * float(num - den)
        w = self.point_at(t)
        return 0.5 * math.log(w.real * w.real + w.imag * w.imag)

    def frame_at(self, t: float) -> Isometry:
        """Folded chart frame at time t (reversing on odd-word arcs)."""
        arc = self._arc_at(t)
        return self._fold_std(arc) @ _std_frame(self.curve, t)

    def tangent_at(self, t: float) -> SurfaceTangent:
        arc = self._arc_at(t)
        w, vel = self._fold_std(arc).apply_tangent(
            _std_point(self.curve, t), _std_velocity(self.curve, t)
        )
        x, y = chart_to_band_xy(w.real, w.imag)
        angle = math.atan2(vel.imag, vel.real) - math.atan2(w.imag, w.real)
        return SurfaceTangent(SurfacePoint(BandPoint(x, y), arc.sheet), angle)

    @property
    def start_tangent(self) -> SurfaceTangent:
        return self.tangent_at(self.t_lo)

    @property
    def end_tangent(self) -> SurfaceTangent:
        return self.tangent_at(self.t_hi)

    @property
    def crossing_sequence(self) -> list[int]:
        return [c.index for c in self.crossings]

    def restrict(self, a: float, b: float) -> "Trajectory":
        """The sub-trajectory over [a, b]: same arcs and folds, clipped."""
        if not (self.t_lo - 1e-9 <= a < b <= self.t_hi + 1e-9):
            raise DomainError(f"restriction [{a}, {b}] outside the trace window")
        arcs = []
        for arc in self.arcs:
            lo, hi = max(arc.t_in, a), min(arc.t_out, b)
            if hi <= lo + 1e-15:
                continue
            idx = arc.crossing_index if hi == arc.t_out else None
            arcs.append(TrajectoryArc(lo, hi, arc.fold, arc.fold_std, arc.sheet, idx))
        sub = Trajectory(
            kind=self.kind,
            curve=self.curve,
            frame0=self.frame0,
            t_lo=a,
            t_hi=b,
            arcs=arcs,
            crossings=[c for c in self.crossings if a < c.time < b],
            warnings=list(self.warnings),
        )
        attach_tau_samples(sub)
        return sub

    def band_samples(self, step: float = 0.1):
        """(time, sheet, BandPoint, tau, crossing index) rows ordered by time."""
        rows = []
        for arc in self.arcs:
            n = max(1, math.ceil((arc.t_out - arc.t_in) / step))
            for j in range(n):
                t = arc.t_in + (arc.t_out - arc.t_in) * j / n
                rows.append((t, arc.sheet, self.band_at(t), self.tau_at(t), None))
        for ev in self.crossings:
            rows.append((ev.time, self.sheet_at(ev.time), ev.point, ev.point.x, ev.index))
        rows.append(
            (self.t_hi, self.arcs[-1].sheet, self.band_at(self.t_hi),
             self.tau_at(self.t_hi), None)
        )
        rows.sort(key=lambda r: (r[0], r[4] is None))
        dedup = []
        for row in rows:
            if dedup and abs(row[0] - dedup[-1][0]) < 1e-12 and row[4] is None:
                continue
            dedup.append(row)
        return dedup

    def to_csv(self, path: str, step: float = 0.1) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["time", "sheet", "band_x", "band_y", "tau", "cum_length", "crossing_index"]
            )
            for t, sheet, p, tau_v, idx in self.band_samples(step):
                writer.writerow(
                    [
                        f"{t:.9g}",
                        sheet,
                        f"{p.x:.9g}",
                        f"{p.y:.9g}",
                        f"{tau_v:.9g}",
                        f"{t - self.t_lo:.9g}",
                        "" if idx is None else idx,
                    ]
                )


def _same_line(a: GeodesicLine, b: GeodesicLine, tol: float = 1e-12) -> bool:
    pa, pb = a.endpoints_sorted(), b.endpoints_sorted()
    for x, y in zip(pa, pb):
        if math.isinf(x) != math.isinf(y):
            return False
        if not math.isinf(x) and abs(x - y) > tol * max(1.0, abs(x)):
            return False
    return True


# -- the unfolding loop ---------------------------------------------------------


def _force_vertical_tail(arc: TrajectoryArc) -> TrajectoryArc:
    """Exactify the fold of an arc declared forward-asymptotic to a core
    rail: the folded tail then runs up a vertical line, so the fold must fix
    the point at infinity.  Word-composed folds only carry that structural
    zero to within rounding noise, which acts as a fake turning point when
    the tail is long; the declaration restores it exactly."""
    m = arc.fold_std.m.copy()
    scale = float(np.abs(m).max())
    if abs(m[1, 0]) > 1e-5 * scale:
        raise TraceError(
            "trace declared rail-asymptotic, but its final fold is not "
            "close to one fixing infinity"
        )
    m[1, 0] = 0.0
    det = m[0, 0] * m[1, 1]
    if not det > 0:
        raise TraceError("degenerate fold after rail-asymptotic correction")
    m = m / math.sqrt(det)
    fixed = Isometry(m, arc.fold_std.reversing, _trusted=True)
    return TrajectoryArc(arc.t_in, arc.t_out, arc.fold, fixed, arc.sheet,
                         arc.crossing_index)


def _run_trace(curve: str, frame0: Isometry, window: tuple[float, float],
               spec: LoomSurfaceSpec, start_sheet: int, *, kind: str,
               max_crossings: int = 20000, forward_rail: bool = False,
               tau_step: float | None = None) -> Trajectory:
    t_lo, t_hi = window
    if not t_hi > t_lo:
        raise DomainError("trace window must have positive length")
    base = boundary_geodesics(spec)
    refl = reflections(spec)
    hits = _HITS[curve]

    frame0_inv = frame0.inverse()
    pull = frame0_inv  # P_i: base chart -> standard coordinates
    pinv = frame0  # P_i^{-1}

    start_w = frame0.apply_point(_std_point(curve, t_lo))
    inside = point_in_excised_disk(start_w, spec)
    if inside is not None:
        raise OutsideSurfaceError(f"trace starts inside excised half-plane {inside}")
    if curve == "geodesic":
        traced_line = GeodesicLine(frame0.apply_boundary(0.0), frame0.apply_boundary(INF))
        for k, bline in enumerate(base, start=1):
            if _same_line(traced_line, bline):
                raise DegenerateTraceError(
                    f"trace geodesic coincides with boundary geodesic {k}"
                )

    arcs: list[TrajectoryArc] = []
    crossings: list[CrossingEvent] = []
    warns: list[str] = []

    t = t_lo
    sheet = start_sheet
    last_k = None
    word: list[int] = []  # freely reduced reflection word of the current fold
    while True:
        guard = _TIME_GUARD * (1.0 + abs(t) * 1e-3)
        best_t, best_k = None, None
        for k in range(1, spec.count + 1):
            if curve == "geodesic" and k == last_k:
                continue
            x1 = pull.apply_boundary(base[k - 1].e_minus)
            x2 = pull.apply_boundary(base[k - 1].e_plus)
            if x1 == x2:
                continue  # pulled circle subtends less than one ulp: no hit
            times, grazed = hits(GeodesicLine(x1, x2))
            if grazed:
                warns.append(f"tangential graze of boundary {k} skipped near t={t:.6g}")
            for tc in times:
                if t + guard < tc <= t_hi and (best_t is None or tc < best_t):
                    best_t, best_k = tc, k
        fold_iso = pinv @ frame0_inv
        fold_std = _repair_fold(pinv)
        if best_t is None:
            arcs.append(TrajectoryArc(t, t_hi, fold_iso, fold_std, sheet, None))
            break
        arcs.append(TrajectoryArc(t, best_t, fold_iso, fold_std, sheet, best_k))
        wc = pinv.apply_point(_std_point(curve, best_t))
        crossings.append(
            CrossingEvent(best_t, best_k, BandPoint(*chart_to_band_xy(wc.real, wc.imag)))
        )
        # free reduction: an immediate re-crossing of the same boundary
        # cancels its reflection, so folds of excursions that return stay
        # exactly trivial instead of accumulating product noise
        if word and word[-1] == best_k:
            word.pop()
        else:
            word.append(best_k)
        pull = frame0_inv
        pinv = frame0
        for k_w in word:
            pull = pull @ refl[k_w - 1]
            pinv = refl[k_w - 1] @ pinv
        sheet = 1 - sheet
        last_k = best_k
        t = best_t
        if len(crossings) > max_crossings:
            raise TraceError(f"trace exceeded {max_crossings} crossings")

    if forward_rail:
        arcs[-1] = _force_vertical_tail(arcs[-1])

    traj = Trajectory(
        kind=kind,
        curve=curve,
        frame0=frame0,
        t_lo=t_lo,
        t_hi=t_hi,
        arcs=arcs,
        crossings=crossings,
        warnings=warns,
    )
    attach_tau_samples(traj, tau_step)
    return traj


def attach_tau_samples(traj: Trajectory, tau_step: float | None = None) -> None:
    if tau_step is None:
        tau_step = max(traj.total_time / 256.0, 0.05)
    samples = []
    for arc in traj.arcs:
        n = max(1, math.ceil((arc.t_out - arc.t_in) / tau_step))
        for j in range(n + 1):
            tt = arc.t_in + (arc.t_out - arc.t_in) * j / n
            samples.append((tt, traj.tau_at(tt)))
    traj.tau_samples = samples


# -- public operations ------------------------------------------------------------


def trace_geodesic(start: SurfaceTangent, T: float, spec: LoomSurfaceSpec,
                   **kw) -> Trajectory:
    """Unit-speed geodesic trace of length T from a surface tangent."""
    if not T > 0:
        raise DomainError("trace time must be positive")
    f0 = frame_from_band_tangent(start.base.z.x, start.base.z.y, start.angle)
    return _run_trace("geodesic", f0, (0.0, T), spec, start.base.sheet,
                      kind="geodesic", **kw)


def trace_geodesic_window(frame0: Isometry, window: tuple[float, float],
                          spec: LoomSurfaceSpec, start_sheet: int = 0,
                          **kw) -> Trajectory:
    """Trace a developed chart geodesic over a parameter window; the start
    parameter must fold into the base copy of the surface."""
    return _run_trace("geodesic", frame0, window, spec, start_sheet,
                      kind="geodesic", **kw)


def trace_horocycle(start: SurfaceTangent, L: float, spec: LoomSurfaceSpec,
                    direction: str = "stable", **kw) -> Trajectory:
    """Horocycle arc of hyperbolic length L through a surface tangent."""
    if not L > 0:
        raise DomainError("trace length must be positive")
    if direction not in ("stable", "unstable"):
        raise DomainError("direction must be 'stable' or 'unstable'")
    f0 = frame_from_band_tangent(start.base.z.x, start.base.z.y, start.angle)
    return _run_trace(direction, f0, (0.0, L), spec, start.base.sheet,
                      kind="horocycle", **kw)


def trace_horocycle_window(start: SurfaceTangent, window: tuple[float, float],
                           spec: LoomSurfaceSpec, direction: str = "stable",
                           **kw) -> Trajectory:
    if direction not in ("stable", "unstable"):
        raise DomainError("direction must be 'stable' or 'unstable'")
    f0 = frame_from_band_tangent(start.base.z.x, start.base.z.y, start.angle)
    return _run_trace(direction, f0, window, spec, start.base.sheet,
                      kind="horocycle", **kw)


def slack(traj: Trajectory) -> SlackValue:
    """Length minus tau-progress of the whole traced path."""
    value = traj.total_time - (traj.tau_at(traj.t_hi) - traj.tau_at(traj.t_lo))
    if value < -1e-9:
        raise TraceError(f"negative slack {value}: tracing inconsistency")
    return SlackValue(max(value, 0.0), traj.total_time)


def slack_between(traj: Trajectory, a: float, b: float) -> float:
    """Slack of the sub-path between trace times a <= b."""
    if b < a:
        raise DomainError("slack_between needs a <= b")
    return (b - a) - (traj.tau_at(b) - traj.tau_at(a))


def crossing_sequence(traj: Trajectory) -> list[int]:
    """Indices of the boundary geodesics crossed, in trace order."""
    return traj.crossing_sequence


def busemann(start: SurfaceTangent, horizon: float, spec: LoomSurfaceSpec,
             *, divergence_ratio: float = 0.5) -> BusemannValue:
    """tau(start) minus the forward slack at the given horizon.

    The slack rate over the last half of the horizon is the divergence
    heuristic: rays with rate above `divergence_ratio` are flagged as
    having value -infinity.  The threshold is heuristic (finite-slack rays
    have sublinear residual slack; no rate is prescribed) and is always
    reported alongside the flag.
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    traj = trace_geodesic(start, horizon, spec)
    s_full = slack(traj).value
    t_mid = traj.t_lo + traj.total_time / 2.0
    tail = slack_between(traj, t_mid, traj.t_hi)
    rate = tail / (traj.total_time / 2.0)
    estimate = start.base.z.x - s_full
    flagged = rate > divergence_ratio
    return BusemannValue(
        value=-math.inf if flagged else estimate,
        estimate=estimate,
        minus_infinity=flagged,
        tail_rate=rate,
    )


def flow(start: SurfaceTangent, t: float, spec: LoomSurfaceSpec) -> SurfaceTangent:
    """Geodesic flow of a surface tangent by signed time t."""
    if t == 0.0:
        return start
    if t > 0:
        return trace_geodesic(start, t, spec).end_tangent
    return trace_geodesic(start.reversed(), -t, spec).end_tangent.reversed()


def load_trajectory_csv(path: str):
    """Rows of a trajectory dump: (time, sheet, x, y, tau, crossing_index|None)."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(
                (
                    float(rec["time"]),
                    int(rec["sheet"]),
                    float(rec["band_x"]),
                    float(rec["band_y"]),
                    float(rec["tau"]),
                    int(rec["crossing_index"]) if rec["crossing_index"] else None,
                )
            )
    return rows
