"""Loom surfaces: families of excised half-planes over the band.

A surface is the double of the band minus pairwise disjoint half-planes
D_{h_k}(s_k); two sheets of the complement are glued along the boundary
geodesics.  The artifact works with a finite prefix of the defining
sequence (tail_policy "empty"), so asymptotic statements downstream are
reported as trends over the prefix.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

from .hyperbolic import (
    BandPoint,
    DomainError,
    GeodesicLine,
    GeometryError,
    Isometry,
    LoomlabError,
    band_to_chart_complex,
    dist_chart,
    dist_geodesics,
    perpendicular_boundary_geodesic,
    reflect,
)
from .intervalsets import IntervalSet

SPEC_FORMAT_VERSION = 1


class ValidationError(GeometryError):
    """Surface fails a structural invariant."""


class SpecFormatError(LoomlabError, ValueError):
    """Malformed surface file."""


class NonSummableWarning(UserWarning):
    pass


@dataclass(frozen=True)
class HalfPlaneSpec:
    """One excised half-plane: horizontal position s and height h in (0, pi/2)."""

    s: float
    h: float

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise DomainError("half-plane position must be finite")
        if not (0.0 < self.h < math.pi / 2):
            raise DomainError(f"half-plane height must lie in (0, pi/2), got {self.h}")


@dataclass(frozen=True)
class LoomSurfaceSpec:
    entries: tuple[HalfPlaneSpec, ...]
    gap_floor: float | None = None
    tail_policy: str = "empty"

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if len(self.entries) < 1:
            raise ValidationError("surface needs at least one half-plane entry")

    @property
    def count(self) -> int:
        return len(self.entries)

    def with_gap_floor(self, value: float) -> "LoomSurfaceSpec":
        return replace(self, gap_floor=value)


@dataclass(frozen=True)
class SurfacePoint:
    """Band point together with a sheet label; boundary points are identified
    across sheets, so equality on the boundary ignores the sheet."""

    z: BandPoint
    sheet: int

    def __post_init__(self):
        if self.sheet not in (0, 1):
            raise DomainError("sheet must be 0 or 1")


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    monotone: bool
    sup_h: float
    min_pairwise: float
    gaps: tuple[float, ...]
    nonincreasing_at: tuple[int, ...]
    failures: tuple[str, ...]
    offending_pair: tuple[int, int] | None = None


@lru_cache(maxsize=128)
def boundary_geodesics(spec: LoomSurfaceSpec) -> tuple[GeodesicLine, ...]:
    return tuple(perpendicular_boundary_geodesic(e.s, e.h) for e in spec.entries)


@lru_cache(maxsize=128)
def reflections(spec: LoomSurfaceSpec) -> tuple[Isometry, ...]:
    return tuple(reflect(g) for g in boundary_geodesics(spec))


@lru_cache(maxsize=128)
def chart_disks(spec: LoomSurfaceSpec) -> tuple[tuple[float, float], ...]:
    """Euclidean (center, radius) of each excised disk in the chart."""
    return tuple(g.center_radius() for g in boundary_geodesics(spec))


def point_in_excised_disk(w: complex, spec: LoomSurfaceSpec, margin: float = 0.0) -> int | None:
    """Index (1-based) of the open disk strictly containing `w`, if any.

    Positive `margin` shrinks the disks (a point within `margin` of the
    boundary does not count as inside).
    """
    for k, (c, r) in enumerate(chart_disks(spec), start=1):
        if abs(w - c) < r * (1.0 - 1e-14) - margin:
            return k
    return None


def validate(spec: LoomSurfaceSpec) -> ValidationReport:
    """Structural checks: monotone positions, disjoint closures, bounded
    heights, and the prefix gap trend (reported, not certified)."""
    entries = spec.entries
    failures: list[str] = []
    offending = None

    s_vals = [e.s for e in entries]
    monotone = all(b > a for a, b in zip(s_vals, s_vals[1:]))
    if not monotone:
        failures.append("positions s_k are not strictly increasing")

    sup_h = max(e.h for e in entries)

    lines = boundary_geodesics(spec)
    min_pairwise = math.inf
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            d = dist_geodesics(lines[i], lines[j])
            if d <= 1e-12:
                failures.append(
                    f"half-plane closures {i + 1} and {j + 1} intersect"
                )
                offending = (i + 1, j + 1)
                min_pairwise = 0.0
                break
            min_pairwise = min(min_pairwise, d)
        if offending:
            break

    gaps = tuple(
        dist_geodesics(lines[i], lines[i + 1]) for i in range(len(lines) - 1)
    )
    nonincreasing = tuple(
        i + 1 for i in range(1, len(gaps)) if gaps[i] <= gaps[i - 1]
    )

    if len(lines) == 1:
        min_pairwise = math.inf

    return ValidationReport(
        valid=not failures,
        monotone=monotone,
        sup_h=sup_h,
        min_pairwise=min_pairwise,
        gaps=gaps,
        nonincreasing_at=nonincreasing,
        failures=tuple(failures),
        offending_pair=offending,
    )


def tau(p: SurfacePoint) -> float:
    """Tight-map coordinate: the band real part, independent of the sheet."""
    return p.z.x


def sheet_distance(z: BandPoint | tuple[float, float], spec: LoomSurfaceSpec) -> float:
    """Length of the shortest single-crossing path between (z,0) and (z,1):
    min over k of the distance from z to its reflection across boundary k."""
    if spec.count < 1:
        raise ValidationError("empty surface spec")
    if isinstance(z, tuple):
        z = BandPoint(*z)
    w = band_to_chart_complex(z.x, z.y)
    best = math.inf
    for refl in reflections(spec):
        best = min(best, dist_chart(w, refl.apply_point(w)))
    return best


# -- slack bookkeeping helpers (closed form lives in the weaving module; the
#    designers only need the elementary -2 ln cos h) --------------------------


def _entry_slack(h: float) -> float:
    return -2.0 * math.log(math.cos(h))


def slack_partial_sums(spec: LoomSurfaceSpec) -> list[float]:
    total = 0.0
    out = []
    for e in spec.entries:
        total += _entry_slack(e.h)
        out.append(total)
    return out


# -- designers ---------------------------------------------------------------


def _parse_rule(rule):
    """Height rules: a callable k -> h, a constant, or strings like
    '1/k', '0.7/k', '0.5', '0.8/k^2'."""
    if callable(rule):
        return rule
    if isinstance(rule, (int, float)):
        return lambda k, c=float(rule): c
    if isinstance(rule, str):
        text = rule.strip().replace(" ", "")
        m = re.fullmatch(r"([0-9.]*)/k(?:\^([0-9.]+))?", text)
        if m:
            coef = float(m.group(1)) if m.group(1) else 1.0
            power = float(m.group(2)) if m.group(2) else 1.0
            return lambda k, c=coef, p=power: c / k**p
        try:
            const = float(text)
        except ValueError:
            raise DomainError(f"unrecognized height rule: {rule!r}") from None
        return lambda k, c=const: c
    raise DomainError(f"unrecognized height rule: {rule!r}")


def _gap_position(s_prev: float, h_prev: float, h_next: float, target: float) -> float:
    """Advance so that the boundary geodesics at (s_prev, h_prev) and
    (s_prev + delta, h_next) sit at hyperbolic distance `target`."""
    left = perpendicular_boundary_geodesic(s_prev, h_prev)

    def gap(delta):
        return dist_geodesics(left, perpendicular_boundary_geodesic(s_prev + delta, h_next))

    lo, hi = 1e-6, target + 8.0
    while gap(hi) < target:
        hi *= 1.6
        if hi > 600:
            raise GeometryError("cannot schedule requested gap")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) < target:
            lo = mid
        else:
            hi = mid
    return s_prev + 0.5 * (lo + hi)


def _schedule(heights, gap_base, gap_growth, s0=0.0):
    entries = [HalfPlaneSpec(s0, heights[0])]
    realized = []
    for k in range(1, len(heights)):
        target = gap_base + gap_growth * k
        s_next = _gap_position(entries[-1].s, entries[-1].h, heights[k], target)
        entries.append(HalfPlaneSpec(s_next, heights[k]))
        realized.append(target)
    return entries, realized


def design_heights(heights, *, gap_base: float, gap_growth: float = 0.0,
                   s0: float = 0.0) -> LoomSurfaceSpec:
    """Surface with prescribed heights and scheduled boundary gaps
    gap_base + gap_growth * k between consecutive boundaries."""
    heights = [float(h) for h in heights]
    for h in heights:
        if not (0.0 < h < math.pi / 2):
            raise DomainError(f"height outside (0, pi/2): {h}")
    entries, _ = _schedule(heights, gap_base, gap_growth, s0=s0)
    spec = LoomSurfaceSpec(tuple(entries))
    report = validate(spec)
    if not report.valid:
        raise ValidationError(f"designed surface failed validation: {report.failures}")
    return spec.with_gap_floor(min(report.gaps) if report.gaps else math.inf)


def design_summable(rule, count: int, *, gap_base: float = 1.0,
                    gap_growth: float = 0.5) -> LoomSurfaceSpec:
    """Surface whose prefix heights follow a decay rule, with strictly
    growing boundary gaps.  Warns when the partial slack sums grow linearly
    (the rule cannot be summable)."""
    if count < 1:
        raise DomainError("count must be >= 1")
    fn = _parse_rule(rule)
    heights = []
    for k in range(1, count + 1):
        h = float(fn(k))
        if not (0.0 < h < math.pi / 2):
            raise DomainError(f"rule yields h={h} outside (0, pi/2) at k={k}")
        heights.append(h)

    entries, _ = _schedule(heights, gap_base, gap_growth)
    spec = LoomSurfaceSpec(tuple(entries))
    report = validate(spec)
    if not report.valid:
        raise ValidationError(f"designed surface failed validation: {report.failures}")

    sums = slack_partial_sums(spec)
    if count >= 4:
        first_half = sums[count // 2 - 1]
        if sums[-1] - first_half > 0.45 * sums[-1]:
            warnings.warn(
                "partial slack sums grow linearly; rule is not summable",
                NonSummableWarning,
                stacklevel=2,
            )
    return spec.with_gap_floor(min(report.gaps) if report.gaps else math.inf)


def dense_subset(E: IntervalSet, size: int) -> list[float]:
    """Deterministic dense enumeration of an interval set: midpoints first,
    then dyadic refinements of every non-degenerate interval."""
    values: list[float] = []
    level = 0
    while len(values) < size and level < 40:
        for a, b in E.intervals:
            if level == 0:
                values.append(0.5 * (a + b))
            elif b > a:
                step = (b - a) / 2.0 ** (level + 1)
                values.extend(a + step * j for j in range(1, 2 ** (level + 1), 2))
        if all(b == a for a, b in E.intervals):
            break
        level += 1
    return values[:size] if values else []


def slack_to_height(e: float) -> float:
    """Invert the crossing-slack formula: h with -2 ln cos h = e."""
    if not e > 0:
        raise DomainError("slack values must be positive")
    return math.acos(math.exp(-0.5 * e))


def design_from_E(E: IntervalSet, count: int, gap_growth: float = 1.0, *,
                  gap_base: float = 4.0) -> LoomSurfaceSpec:
    """Distal surface whose crossing slacks realize a dense subset of E in
    round-robin, so each chosen value recurs under prefix extension."""
    if count < 1:
        raise DomainError("count must be >= 1")
    if not gap_growth > 0:
        raise DomainError("gap_growth must be positive")
    if E.n_intervals == 0:
        raise DomainError("E must be nonempty")
    if E.min <= 0.0:
        raise DomainError("E must be a compact subset of (0, inf)")

    values = dense_subset(E, max(1, min(count, 4 * E.n_intervals)))
    heights = [slack_to_height(values[k % len(values)]) for k in range(count)]
    entries, _ = _schedule(heights, gap_base, gap_growth)
    spec = LoomSurfaceSpec(tuple(entries))
    report = validate(spec)
    if not report.valid:
        raise ValidationError(f"designed surface failed validation: {report.failures}")
    return spec.with_gap_floor(min(report.gaps) if report.gaps else math.inf)


# -- file format ---------------------------------------------------------------


def spec_to_dict(spec: LoomSurfaceSpec) -> dict:
    meta = {}
    if spec.gap_floor is not None and math.isfinite(spec.gap_floor):
        meta["gap_floor"] = spec.gap_floor
    return {
        "version": SPEC_FORMAT_VERSION,
        "entries": [{"s": e.s, "h": e.h} for e in spec.entries],
        "tail_policy": spec.tail_policy,
        "meta": meta,
    }


def save_spec(spec: LoomSurfaceSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _reject_constant(token: str):
    raise SpecFormatError(f"non-finite number in surface file: {token}")


def spec_from_dict(data: dict) -> LoomSurfaceSpec:
    if not isinstance(data, dict):
        raise SpecFormatError("surface file must hold a JSON object")
    if data.get("version") != SPEC_FORMAT_VERSION:
        raise SpecFormatError(f"unsupported surface file version: {data.get('version')}")
    raw = data.get("entries")
    if not isinstance(raw, list) or not raw:
        raise SpecFormatError("surface file needs a nonempty entries list")
    entries = []
    for i, item in enumerate(raw):
        try:
            s = float(item["s"])
            h = float(item["h"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecFormatError(f"bad entry #{i + 1}: {item!r}") from exc
        if not (math.isfinite(s) and math.isfinite(h)):
            raise SpecFormatError(f"entry #{i + 1} has non-finite coordinates")
        if not (0.0 < h < math.pi / 2):
            raise SpecFormatError(f"entry #{i + 1} height outside (0, pi/2): {h}")
        entries.append(HalfPlaneSpec(s, h))
    meta = data.get("meta") or {}
    gap_floor = meta.get("gap_floor")
    return LoomSurfaceSpec(
        tuple(entries),
        gap_floor=float(gap_floor) if gap_floor is not None else None,
        tail_policy=str(data.get("tail_policy", "empty")),
    )


def load_spec(path: str) -> LoomSurfaceSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh, parse_constant=_reject_constant)
    except OSError as exc:
        raise SpecFormatError(f"cannot read surface file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"surface file is not valid JSON: {exc}") from exc
    return spec_from_dict(data)
