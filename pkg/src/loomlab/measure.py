"""Empirical invariant measures along the stable horocycle orbit.

The section is a Bruhat-coordinate patch at the marked base tangent: a
point belongs to the window when its fold-back frame factors as
n_s a_t u_r with s in (-R, R), t in (-delta/4, delta/4), r in (c, d).
Along one no-crossing stretch of the horocycle trace the fold word is
constant, so t and r are constant and s moves at unit speed; membership is
therefore sampled on a fixed global grid but evaluated arc by arc.

Only finite-horizon statistical measures are produced; limits appear as
trend tables over growing horizons, never as claimed values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .hyperbolic import (
    DomainError,
    Isometry,
    LoomlabError,
    band_tangent_from_frame,
    band_to_chart_complex,
    dist_chart,
    nau_decompose,
    DecompositionError,
)
from .surface import (
    BandPoint,
    LoomSurfaceSpec,
    SurfacePoint,
    chart_disks,
    point_in_excised_disk,
    reflections,
    sheet_distance,
)
from .tracer import (
    SurfaceTangent,
    Trajectory,
    busemann,
    trace_horocycle_window,
    x_tangent,
)


class UndefinedMeasureError(LoomlabError):
    """The orbit never met the window at this horizon."""


@dataclass(frozen=True)
class SectionSpec:
    """Bruhat section parameters at the marked base tangent."""

    delta: float
    c: float
    d: float
    eta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError("delta must be positive")
        if not 0.0 < self.eta < self.delta / 4.0:
            raise DomainError("eta must lie in (0, delta/4)")
        if not self.c < self.d:
            raise DomainError("section needs c < d")
        if not (-self.eta / 2.0 < self.c and self.d < self.eta / 2.0):
            raise DomainError("(c, d) must sit inside (-eta/2, eta/2)")


@dataclass(frozen=True)
class VisitRecord:
    sigma_lo: float
    sigma_hi: float
    n_samples: int
    s_offset: float  # s = sigma + s_offset along the visit
    t_coord: float
    r_coord: float
    clipped: bool  # cut off by the trace horizon


@dataclass
class EmpiricalMeasure:
    R: float
    T: float
    step: float
    section: SectionSpec
    grid_shape: tuple[int, int, int]
    grid_origin: tuple[float, float, float]
    grid_step: tuple[float, float, float]
    weights: np.ndarray
    occupation_time: float
    total_time: float
    visits: list[VisitRecord] = field(default_factory=list)

    def mass(self) -> float:
        return float(self.weights.sum())

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "T": self.T,
            "grid": {
                "shape": list(self.grid_shape),
                "origin": list(self.grid_origin),
                "step": list(self.grid_step),
            },
            "weights": [float(w) for w in self.weights.ravel()],
            "occupation_time": self.occupation_time,
        }

    def dump(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")


# -- section construction -----------------------------------------------------


def injectivity_radius_estimate(spec: LoomSurfaceSpec) -> float:
    """Certified under-estimate of the injectivity radius at the base point:
    half the shortest nontrivial loop over reflection words of length one
    (sheet switch) and two (in-sheet systole candidates)."""
    w0 = band_to_chart_complex(0.0, 0.0)
    refl = reflections(spec)
    shortest = sheet_distance(BandPoint(0.0, 0.0), spec)
    for i, r1 in enumerate(refl):
        for j, r2 in enumerate(refl):
            if i == j:
                continue
            shortest = min(shortest, dist_chart(w0, (r1 @ r2).apply_point(w0)))
    return shortest / 2.0


@dataclass(frozen=True)
class SectionChoice:
    section: SectionSpec
    delta_estimate: float
    candidates: tuple[tuple[float, bool, float], ...]  # (r, diverging, tail rate)


def choose_section(spec: LoomSurfaceSpec, *, eta: float | None = None,
                   n_candidates: int = 6, seed: int = 0) -> SectionChoice:
    """Pick section parameters: delta is half the injectivity estimate, and
    (c, d) endpoints are expanding-horocycle offsets whose forward rays show
    diverging slack (the heuristic for boundary visits being negligible;
    the choices and their measured tail rates are reported)."""
    inj = injectivity_radius_estimate(spec)
    delta = inj / 2.0
    if eta is None:
        # small enough that the eta-shrunken window keeps tightness checks
        # meaningful down to eps ~ 0.2 at window widths around delta/5
        eta = delta / 120.0
    if not 0.0 < eta < delta / 4.0:
        raise DomainError(f"eta={eta} incompatible with delta={delta}")
    rng = np.random.default_rng(seed)
    candidates = []
    chosen_c, chosen_d = None, None
    magnitudes = np.linspace(0.45, 0.25, n_candidates) * eta
    for sign in (-1.0, 1.0):
        for mag in magnitudes:
            r = sign * float(mag) * (1.0 + 0.02 * float(rng.random()))
            frame = Isometry.n_lower(r)  # chart frame of the u_r-shifted tangent
            x, y, ang = band_tangent_from_frame(frame)
            tangent = SurfaceTangent(SurfacePoint(BandPoint(x, y), 0), ang)
            horizon = 2.0 * abs(math.log(abs(r))) + 30.0
            b = busemann(tangent, horizon, spec)
            candidates.append((r, b.minus_infinity, b.tail_rate))
            if b.minus_infinity:
                if sign < 0 and chosen_c is None:
                    chosen_c = r
                if sign > 0 and chosen_d is None:
                    chosen_d = r
    if chosen_c is None or chosen_d is None:
        raise DomainError(
            "no diverging-slack section endpoints found; widen the search"
        )
    return SectionChoice(
        section=SectionSpec(delta=delta, c=chosen_c, d=chosen_d, eta=eta),
        delta_estimate=inj,
        candidates=tuple(candidates),
    )


# -- membership ------------------------------------------------------------------


def section_membership(frame: Isometry, sec: SectionSpec, R: float):
    """Window membership of a frame given relative to the base tangent.

    The frame is factored as n_s a_t u_r; membership requires s in (-R, R),
    t in (-delta/4, delta/4) and r in (c, d).  Frames outside the open
    factorization cell (or orientation-reversing ones) are simply outside.
    """
    if not 0.0 < R < sec.delta / 4.0:
        raise DomainError("window half-width must lie in (0, delta/4)")
    if frame.reversing:
        return False, None
    try:
        s, t, r = nau_decompose(frame)
    except DecompositionError:
        return False, None
    inside = (
        -R < s < R
        and -sec.delta / 4.0 < t < sec.delta / 4.0
        and sec.c < r < sec.d
    )
    return inside, (s, t, r)


# -- the statistical measure -------------------------------------------------------


def _safe_backward_start(spec: LoomSurfaceSpec, sigma: float) -> float:
    """Move the trace start left until the horocycle point sits on the
    surface (the line Im w = 1 dips through excised disks)."""
    for _ in range(4 * spec.count + 4):
        w = complex(sigma, 1.0)
        hit = point_in_excised_disk(w, spec)
        if hit is None:
            return sigma
        c, r = chart_disks(spec)[hit - 1]
        sigma = c - math.sqrt(max(r * r - 1.0, 0.0)) - 1.0
    raise DomainError("could not find a surface point to start the trace")


def horocycle_orbit_trace(spec: LoomSurfaceSpec, T: float) -> Trajectory:
    """Stable horocycle orbit of the marked base tangent over [-T, T]
    (extended backward when the nominal start falls inside an excursion)."""
    start = _safe_backward_start(spec, -T)
    return trace_horocycle_window(x_tangent(0), (start, T), spec, "stable")


def estimate_nu(spec: LoomSurfaceSpec, sec: SectionSpec, R: float, T: float, *,
                s_bins: int = 24, t_bins: int = 5, r_bins: int = 5,
                step: float | None = None,
                trace: Trajectory | None = None) -> EmpiricalMeasure:
    """Statistical measure of the horocycle orbit in the window B_R up to
    horizon T: normalized arc length, binned in (s, t, r) coordinates.

    Samples sit on the fixed global grid sigma_j = -T + (j + 1/2) step; the
    per-arc structure (constant t and r, unit-speed s) makes each test a
    range intersection.
    """
    if not 0.0 < R < sec.delta / 4.0:
        raise DomainError("window half-width must lie in (0, delta/4)")
    if not T > 0:
        raise DomainError("horizon must be positive")
    s_step = 2.0 * R / s_bins
    if step is None:
        step = min(sec.eta, s_step) / 4.0
    if trace is None:
        trace = horocycle_orbit_trace(spec, T)
    elif trace.t_hi < T - 1e-9 or trace.t_lo > -T + 1e-9:
        raise DomainError("provided trace does not span [-T, T]")

    t_width = sec.delta / 2.0
    r_width = sec.d - sec.c
    grid_origin = (-R, -sec.delta / 4.0, sec.c)
    grid_step = (s_step, t_width / t_bins, r_width / r_bins)
    weights = np.zeros((s_bins, t_bins, r_bins))
    visits: list[VisitRecord] = []
    occupation = 0.0

    for arc in trace.arcs:
        if arc.fold_std.reversing or arc.sheet != 0:
            continue
        m = arc.fold_std.m
        a, b = float(m[0, 0]), float(m[0, 1])
        c_e, d_e = float(m[1, 0]), float(m[1, 1])
        if abs(a) < 1e-14:
            continue  # outside the open factorization cell for the whole arc
        t_coord = 2.0 * math.log(abs(a))
        r_coord = c_e / a
        if not (-sec.delta / 4.0 < t_coord < sec.delta / 4.0):
            continue
        if not (sec.c < r_coord < sec.d):
            continue
        s_offset = b / a
        lo = max(arc.t_in, -T, -R - s_offset)
        hi = min(arc.t_out, T, R - s_offset)
        if hi <= lo:
            continue
        j_lo = math.ceil((lo + T) / step - 0.5 + 1e-12)
        j_hi = math.floor((hi + T) / step - 0.5 - 1e-12)
        if j_hi < j_lo:
            continue
        sigmas = -T + (np.arange(j_lo, j_hi + 1) + 0.5) * step
        s_vals = sigmas + s_offset
        s_idx = np.clip(((s_vals + R) / s_step).astype(int), 0, s_bins - 1)
        t_idx = min(int((t_coord + sec.delta / 4.0) / grid_step[1]), t_bins - 1)
        r_idx = min(int((r_coord - sec.c) / grid_step[2]), r_bins - 1)
        np.add.at(weights[:, t_idx, r_idx], s_idx, step)
        occupation += len(sigmas) * step
        clipped = bool(lo <= -T + step or hi >= T - step)
        visits.append(
            VisitRecord(float(sigmas[0]), float(sigmas[-1]), len(sigmas),
                        s_offset, t_coord, r_coord, clipped)
        )

    if occupation <= 0.0:
        raise UndefinedMeasureError(
            f"orbit never met the window up to T={T}; enlarge the horizon"
        )
    weights /= weights.sum()
    return EmpiricalMeasure(
        R=R,
        T=T,
        step=step,
        section=sec,
        grid_shape=(s_bins, t_bins, r_bins),
        grid_origin=grid_origin,
        grid_step=grid_step,
        weights=weights,
        occupation_time=occupation,
        total_time=2.0 * T,
        visits=visits,
    )


# -- checks ------------------------------------------------------------------------


@dataclass(frozen=True)
class TightnessReport:
    eps: float
    eta: float
    shrunk_mass: float
    satisfied: bool


def check_tightness(mu: EmpiricalMeasure, eps: float) -> TightnessReport:
    """Mass of the eta-shrunken window: at least 1 - eps in the limit
    statement; finite horizons report the measured value."""
    if not 0.0 < eps <= 1.0:
        raise DomainError("eps must lie in (0, 1]")
    eta = mu.section.eta
    if not eta < eps * mu.R / 4.0:
        raise DomainError("tightness check needs eta < eps * R / 4")
    inner = 0.0
    for v in mu.visits:
        sigmas = v.sigma_lo + mu.step * np.arange(v.n_samples)
        s_vals = sigmas + v.s_offset
        inner += float(np.count_nonzero(np.abs(s_vals) < mu.R - eta)) * mu.step
    mass = inner / mu.occupation_time
    return TightnessReport(eps=eps, eta=eta, shrunk_mass=mass,
                           satisfied=mass >= 1.0 - eps)


def tightness_trend(spec: LoomSurfaceSpec, sec: SectionSpec, R: float, eps: float,
                    horizons) -> list[tuple[float, float, float]]:
    """(T, shrunken mass, occupation time) over growing horizons, sharing
    one trace of the largest horizon."""
    horizons = sorted(float(T) for T in horizons)
    trace = horocycle_orbit_trace(spec, horizons[-1])
    out = []
    for T in horizons:
        mu = estimate_nu(spec, sec, R, T, trace=trace)
        rep = check_tightness(mu, eps)
        out.append((T, rep.shrunk_mass, mu.occupation_time))
    return out


@dataclass(frozen=True)
class TestFunction:
    """Test function on the window depending on the s coordinate only."""

    __test__ = False  # math vocabulary, not a pytest item

    kind: str  # "box" | "tent"
    s_lo: float
    s_hi: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("box", "tent"):
            raise DomainError("test function kind must be 'box' or 'tent'")
        if not self.s_lo < self.s_hi:
            raise DomainError("empty test-function support")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "box":
            return self.amplitude * ((s > self.s_lo) & (s < self.s_hi))
        mid = 0.5 * (self.s_lo + self.s_hi)
        half = 0.5 * (self.s_hi - self.s_lo)
        return self.amplitude * np.maximum(0.0, 1.0 - np.abs(s - mid) / half)


@dataclass(frozen=True)
class FlowInvarianceReport:
    s_shift: float
    observed: float
    bound: float
    binning_error: float
    satisfied: bool


def check_flow_invariance(mu: EmpiricalMeasure, s_shift: float,
                          f: TestFunction) -> FlowInvarianceReport:
    """|nu(f o flow_shift) - nu(f)| against 2*shift*sup|f| / occupation."""
    lo = min(f.s_lo, f.s_lo + s_shift)
    hi = max(f.s_hi, f.s_hi + s_shift)
    if lo <= -mu.R or hi >= mu.R:
        raise DomainError("shifted test-function support escapes the window")
    val, val_shifted = 0.0, 0.0
    for v in mu.visits:
        sigmas = v.sigma_lo + mu.step * np.arange(v.n_samples)
        s_vals = sigmas + v.s_offset
        val += float(f(s_vals).sum()) * mu.step
        val_shifted += float(f(s_vals + s_shift).sum()) * mu.step
    occ = mu.occupation_time
    observed = abs(val_shifted - val) / occ
    bound = 2.0 * abs(s_shift) * f.amplitude / occ
    binning = 4.0 * f.amplitude * mu.step * max(1, len(mu.visits)) / occ
    return FlowInvarianceReport(
        s_shift=s_shift,
        observed=observed,
        bound=bound,
        binning_error=binning,
        satisfied=observed <= bound + binning,
    )


@dataclass(frozen=True)
class RestrictionReport:
    R1: float
    R2: float
    C: float
    sup_discrepancy: float
    tolerance: float
    satisfied: bool


def check_restriction(spec: LoomSurfaceSpec, sec: SectionSpec, R1: float,
                      R2: float, T: float,
                      trace: Trajectory | None = None) -> RestrictionReport:
    """Restriction consistency: the R2 measure renormalized on the R1 window
    agrees with the R1 measure, bin by bin in s."""
    if not R1 <= R2:
        raise DomainError("needs R1 <= R2")
    if trace is None:
        trace = horocycle_orbit_trace(spec, T)
    mu1 = estimate_nu(spec, sec, R1, T, trace=trace)
    mu2 = estimate_nu(spec, sec, R2, T, trace=trace)
    edges = np.linspace(-R1, R1, mu1.grid_shape[0] + 1)

    def bin_masses(mu):
        masses = np.zeros(len(edges) - 1)
        total_inside = 0.0
        for v in mu.visits:
            sigmas = v.sigma_lo + mu.step * np.arange(v.n_samples)
            s_vals = sigmas + v.s_offset
            inside = s_vals[np.abs(s_vals) < R1]
            total_inside += len(inside) * mu.step
            idx = np.clip(((inside + R1) / (edges[1] - edges[0])).astype(int),
                          0, len(edges) - 2)
            np.add.at(masses, idx, mu.step)
        return masses, total_inside

    m1, occ1_inside = bin_masses(mu1)
    m2, occ2_inside = bin_masses(mu2)
    if occ1_inside <= 0 or occ2_inside <= 0:
        raise UndefinedMeasureError("no occupation inside the inner window")
    sup = float(np.abs(m1 / occ1_inside - m2 / occ2_inside).max())
    bin_frac = (edges[1] - edges[0]) / (2.0 * R1)
    tolerance = 2.0 * bin_frac
    return RestrictionReport(
        R1=R1,
        R2=R2,
        C=mu1.occupation_time / mu2.occupation_time,
        sup_discrepancy=sup,
        tolerance=tolerance,
        satisfied=sup <= tolerance,
    )
