"""Plane hyperbolic geometry in the band model and its half-plane chart.

The band {|Im z| < pi/2} carries the metric |dz|/cos(Im z).  The conformal
map w = i*exp(z) identifies it with the upper half-plane and sends the core
line {Im z = 0} to the positive imaginary axis; the metric pulls back to the
standard |dw|/Im w.  Geodesics in the chart are vertical rays and semicircles
orthogonal to the real axis, so every construction below reduces to real
2x2 matrix algebra with an explicit point at infinity.

Tolerances are tiered: constructions aim for 1e-12, geometric coincidence is
asserted at 1e-10, integrated quantities at 1e-9, reported values at 1e-6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INF = math.inf

COINCIDENCE_TOL = 1e-10
INTEGRATION_TOL = 1e-9
REPORT_TOL = 1e-6

_FLIP = np.array([[-1.0, 0.0], [0.0, 1.0]])


class LoomlabError(Exception):
    """Base class for all package errors."""


class GeometryError(LoomlabError, ValueError):
    """Invalid geometric construction or argument."""


class DomainError(GeometryError):
    """Argument outside an operation's domain."""


class DecompositionError(GeometryError):
    """Matrix does not admit the requested factorization."""


@dataclass(frozen=True)
class BandPoint:
    """Point of the band model, |y| < pi/2."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError("band point requires finite coordinates")
        if not abs(self.y) < math.pi / 2:
            raise DomainError(f"band point requires |y| < pi/2, got y={self.y}")


@dataclass(frozen=True)
class ChartPoint:
    """Point of the upper half-plane chart, v > 0."""

    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise DomainError("chart point requires finite coordinates")
        if not self.v > 0:
            raise DomainError(f"chart point requires v > 0, got v={self.v}")

    @property
    def w(self) -> complex:
        return complex(self.u, self.v)


def band_to_chart_complex(x: float, y: float) -> complex:
    ex = math.exp(x)
    return complex(-ex * math.sin(y), ex * math.cos(y))


def band_to_chart(p: BandPoint) -> ChartPoint:
    w = band_to_chart_complex(p.x, p.y)
    return ChartPoint(w.real, w.imag)


def chart_to_band_xy(u: float, v: float) -> tuple[float, float]:
    if not v > 0:
        raise DomainError("chart point requires v > 0")
    x = 0.5 * math.log(u * u + v * v)
    y = math.atan2(v, u) - math.pi / 2
    return x, y


def chart_to_band(p: ChartPoint) -> BandPoint:
    return BandPoint(*chart_to_band_xy(p.u, p.v))


def band_to_chart_arrays(x, y):
    """Vectorized band -> chart, returning (u, v) arrays."""
    ex = np.exp(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    return -ex * np.sin(y), ex * np.cos(y)


def dist_chart(w1: complex, w2: complex) -> float:
    """Hyperbolic distance between chart points."""
    return 2.0 * math.asinh(abs(w1 - w2) / (2.0 * math.sqrt(w1.imag * w2.imag)))


def dist_chart_arrays(u1, v1, u2, v2):
    d = np.hypot(u1 - u2, v1 - v2)
    return 2.0 * np.arcsinh(d / (2.0 * np.sqrt(v1 * v2)))


def dist(p: BandPoint, q: BandPoint) -> float:
    """Hyperbolic distance between band points."""
    return dist_chart(band_to_chart_complex(p.x, p.y), band_to_chart_complex(q.x, q.y))


class Isometry:
    """Isometry of the chart: z -> m(z), or z -> m(-conj(z)) when reversing.

    `m` is kept normalized to det +1; `reversing` marks anti-conformal maps.
    Equality of the underlying projective classes is up to the sign of `m`.
    """

    __slots__ = ("m", "reversing")

    def __init__(self, m, reversing: bool = False, _trusted: bool = False):
        m = np.array(m, dtype=float)
        if m.shape != (2, 2):
            raise GeometryError("isometry needs a 2x2 matrix")
        if not _trusted:
            # products of unit-determinant matrices keep det 1 exactly, and
            # recomputing it suffers cancellation at large entry scales, so
            # composition results skip this normalization
            det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
            if not (math.isfinite(det) and det > 0):
                raise GeometryError(f"isometry matrix must have det > 0, got {det}")
            m = m / math.sqrt(det)
        # deterministic sign: prefer positive trace, else largest entry positive
        tr = m[0, 0] + m[1, 1]
        if tr < -1e-12:
            m = -m
        elif abs(tr) <= 1e-12:
            flat = m.ravel()
            lead = flat[int(np.argmax(np.abs(flat)))]
            if lead < 0:
                m = -m
        m.flags.writeable = False
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "reversing", bool(reversing))

    def __setattr__(self, *a):  # immutable value type
        raise AttributeError("Isometry is immutable")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def identity() -> "Isometry":
        return Isometry(np.eye(2))

    @staticmethod
    def a_flow(t: float) -> "Isometry":
        """diag(e^{t/2}, e^{-t/2}): translation length t along (0, inf)."""
        if abs(t) > 1400.0:
            raise DomainError("flow time too large for float range")
        e = math.exp(t / 2.0)
        return Isometry([[e, 0.0], [0.0, 1.0 / e]])

    @staticmethod
    def n_lower(s: float) -> "Isometry":
        return Isometry([[1.0, 0.0], [s, 1.0]])

    @staticmethod
    def u_upper(r: float) -> "Isometry":
        return Isometry([[1.0, r], [0.0, 1.0]])

    @staticmethod
    def rotation_at_i(alpha: float) -> "Isometry":
        """Rotates tangent vectors at i by 2*alpha."""
        c, s = math.cos(alpha), math.sin(alpha)
        return Isometry([[c, s], [-s, c]])

    # -- group structure ----------------------------------------------------

    def __matmul__(self, other: "Isometry") -> "Isometry":
        if self.reversing:
            mm = self.m @ (_FLIP @ other.m @ _FLIP)
        else:
            mm = self.m @ other.m
        return Isometry(mm, self.reversing ^ other.reversing, _trusted=True)

    def inverse(self) -> "Isometry":
        inv = np.array([[self.m[1, 1], -self.m[0, 1]], [-self.m[1, 0], self.m[0, 0]]])
        if self.reversing:
            inv = _FLIP @ inv @ _FLIP
        return Isometry(inv, self.reversing, _trusted=True)

    def approx_eq(self, other: "Isometry", tol: float = COINCIDENCE_TOL) -> bool:
        if self.reversing != other.reversing:
            return False
        return (
            float(np.abs(self.m - other.m).max()) <= tol
            or float(np.abs(self.m + other.m).max()) <= tol
        )

    def is_identity(self, tol: float = COINCIDENCE_TOL) -> bool:
        return not self.reversing and self.approx_eq(Isometry.identity(), tol)

    # -- actions -------------------------------------------------------------

    def apply_boundary(self, x: float) -> float:
        """Action on the boundary circle R u {INF}."""
        a, b, c, d = self.m.ravel()
        if math.isinf(x):
            val = a / c if c != 0.0 else INF
        else:
            if self.reversing:
                x = -x
            den = c * x + d
            val = (a * x + b) / den if den != 0.0 else INF
        return INF if math.isinf(val) else float(val)

    def apply_point(self, z: complex) -> complex:
        if self.reversing:
            z = complex(-z.real, z.imag)
        a, b, c, d = self.m.ravel()
        return (a * z + b) / (c * z + d)

    def apply_tangent(self, z: complex, vec: complex) -> tuple[complex, complex]:
        """Image of a tangent vector `vec` at chart point `z`."""
        if self.reversing:
            z = complex(-z.real, z.imag)
            vec = complex(-vec.real, vec.imag)
        a, b, c, d = self.m.ravel()
        den = c * z + d
        return (a * z + b) / den, vec / (den * den)

    def __repr__(self):
        tag = ", reversing" if self.reversing else ""
        return f"Isometry([[{self.m[0,0]:.6g}, {self.m[0,1]:.6g}], [{self.m[1,0]:.6g}, {self.m[1,1]:.6g}]]{tag})"


@dataclass(frozen=True)
class GeodesicLine:
    """Complete chart geodesic given by its distinct boundary endpoints."""

    e_minus: float
    e_plus: float

    def __post_init__(self):
        for e in (self.e_minus, self.e_plus):
            if math.isnan(e):
                raise GeometryError("geodesic endpoint may not be NaN")
        if math.isinf(self.e_minus) and math.isinf(self.e_plus):
            raise GeometryError("geodesic endpoints must be distinct")
        if self.e_minus == self.e_plus:
            raise GeometryError("geodesic endpoints must be distinct")

    def is_vertical(self) -> bool:
        return math.isinf(self.e_minus) or math.isinf(self.e_plus)

    def foot(self) -> float:
        return self.e_plus if math.isinf(self.e_minus) else self.e_minus

    def center_radius(self) -> tuple[float, float]:
        if self.is_vertical():
            raise GeometryError("vertical geodesic has no finite center")
        return (self.e_minus + self.e_plus) / 2.0, abs(self.e_plus - self.e_minus) / 2.0

    def transform(self, g: Isometry) -> "GeodesicLine":
        return GeodesicLine(g.apply_boundary(self.e_minus), g.apply_boundary(self.e_plus))

    def reversed(self) -> "GeodesicLine":
        return GeodesicLine(self.e_plus, self.e_minus)

    def endpoints_sorted(self) -> tuple[float, float]:
        a, b = self.e_minus, self.e_plus
        if math.isinf(a):
            return (b, INF)
        if math.isinf(b):
            return (a, INF)
        return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Horocycle:
    """Horocycle as (base point, Busemann level); level 0 passes through i."""

    base: float
    level: float

    @staticmethod
    def through_point(base: float, w: complex) -> "Horocycle":
        if math.isinf(base):
            return Horocycle(INF, math.log(w.imag))
        q = abs(w - base) ** 2
        return Horocycle(base, math.log(w.imag * (1.0 + base * base) / q))

    def euclidean(self):
        """('line', height) for base INF, else (center, radius)."""
        if math.isinf(self.base):
            return "line", math.exp(self.level)
        diam = (1.0 + self.base * self.base) * math.exp(-self.level)
        return complex(self.base, diam / 2.0), diam / 2.0

    def transform(self, g: Isometry) -> "Horocycle":
        if math.isinf(self.base):
            probe = complex(0.0, math.exp(self.level))
        else:
            c, r = self.euclidean()
            probe = complex(c.real, c.imag + r)
        return Horocycle.through_point(g.apply_boundary(self.base), g.apply_point(probe))


def reflect(g: GeodesicLine) -> Isometry:
    """Reflection of the chart across `g` (an involutive, reversing isometry)."""
    if g.is_vertical():
        x0 = g.foot()
        return Isometry([[1.0, 2.0 * x0], [0.0, 1.0]], reversing=True)
    c, r = g.center_radius()
    return Isometry(np.array([[c, c * c - r * r], [1.0, c]]) / r, reversing=True)


def perpendicular_boundary_geodesic(s: float, h: float) -> GeodesicLine:
    """Chart geodesic orthogonal to the band vertical {Re z = s} at height h.

    Its endpoints are -e^s * cot(h/2) and -e^s * tan(h/2); it bounds the
    excised half-plane whose chart image is the open disk between them.
    """
    if not (0.0 < h < math.pi / 2):
        raise DomainError(f"height must lie in (0, pi/2), got {h}")
    if abs(s) > 690.0:
        raise DomainError("horizontal position too large for float range")
    es = math.exp(s)
    t = math.tan(h / 2.0)
    return GeodesicLine(-es / t, -es * t)


def _frame_to_axis(g: GeodesicLine) -> Isometry:
    """Isometry sending g.e_minus -> 0 and g.e_plus -> INF."""
    a, b = g.e_minus, g.e_plus
    if math.isinf(a):
        return Isometry([[0.0, -1.0], [1.0, -b]])
    if math.isinf(b):
        return Isometry([[1.0, -a], [0.0, 1.0]])
    if b > a:
        return Isometry([[-1.0, a], [1.0, -b]])
    return Isometry([[1.0, -a], [1.0, -b]])


def dist_geodesics(g1: GeodesicLine, g2: GeodesicLine) -> float:
    """Infimum distance between two complete geodesics.

    Zero when they intersect or share an endpoint; otherwise the distance
    along the common perpendicular.  Computed from endpoint differences, so
    circles of wildly different scales stay well-conditioned.
    """
    lo1, hi1 = g1.endpoints_sorted()
    lo2, hi2 = g2.endpoints_sorted()
    pts1 = (lo1, hi1)
    if lo2 in pts1 or hi2 in pts1:  # INF == INF included
        return 0.0
    if math.isinf(hi1) and math.isinf(hi2):
        return 0.0  # two verticals share the endpoint at infinity
    if math.isinf(hi1):
        v = lo1
        if lo2 < v < hi2:
            return 0.0
        num = abs(lo2 + hi2 - 2.0 * v)
        den = hi2 - lo2
    elif math.isinf(hi2):
        v = lo2
        if lo1 < v < hi1:
            return 0.0
        num = abs(lo1 + hi1 - 2.0 * v)
        den = hi1 - lo1
    else:
        if (lo1 < lo2 < hi1) != (lo1 < hi2 < hi1):
            return 0.0  # endpoints interleave: the geodesics cross
        scale = max(abs(lo1), abs(hi1), abs(lo2), abs(hi2))
        a1, b1, a2, b2 = lo1 / scale, hi1 / scale, lo2 / scale, hi2 / scale
        num = abs((a2 - a1) * (b2 - b1) + (b2 - a1) * (a2 - b1))
        den = abs((b1 - a1) * (b2 - a2))
    if den == 0.0:
        return math.inf if num > 0.0 else 0.0
    ratio = num / den
    return math.acosh(ratio) if ratio > 1.0 else 0.0


def point_to_geodesic(w: complex, g: GeodesicLine) -> float:
    """Distance from a chart point to a complete geodesic."""
    f = _frame_to_axis(g)
    z = f.apply_point(w)
    return math.asinh(abs(z.real) / z.imag)


def geodesic_frame(line: GeodesicLine) -> Isometry:
    """Isometry sending 0 -> e_minus, INF -> e_plus (so t -> M(i e^t) is a
    unit-speed parameterization of the line from e_minus to e_plus)."""
    a, b = line.e_minus, line.e_plus
    if math.isinf(b):
        return Isometry([[1.0, a], [0.0, 1.0]])
    if math.isinf(a):
        return Isometry([[b, -1.0], [1.0, 0.0]])
    if b > a:
        return Isometry([[b, a], [1.0, 1.0]])
    return Isometry([[b, -a], [1.0, -1.0]])


def frame_through(line: GeodesicLine, w: complex) -> Isometry:
    """Frame along `line` whose base point (image of i) is `w` on the line."""
    m0 = geodesic_frame(line)
    z = m0.inverse().apply_point(w)
    t0 = 0.5 * math.log(z.real * z.real + z.imag * z.imag)
    return m0 @ Isometry.a_flow(t0)


def geodesic_through_points(w1: complex, w2: complex) -> GeodesicLine:
    """Directed geodesic through two distinct chart points, from w1 to w2."""
    du = w2.real - w1.real
    scale = max(abs(w1), abs(w2), 1.0)
    if abs(du) <= 1e-14 * scale:
        u = 0.5 * (w1.real + w2.real)
        return GeodesicLine(u, INF) if w2.imag > w1.imag else GeodesicLine(INF, u)
    c = (abs(w2) ** 2 - abs(w1) ** 2) / (2.0 * du)
    r = abs(w1 - c)
    if du > 0:
        return GeodesicLine(c - r, c + r)
    return GeodesicLine(c + r, c - r)


def frame_from_band_tangent(x: float, y: float, angle: float) -> Isometry:
    """Chart frame of the unit tangent at band point (x, y) with band
    direction `angle` (0 = forward along the core line, pi/2 = up)."""
    w = band_to_chart_complex(x, y)
    u, v = w.real, w.imag
    sq = math.sqrt(v)
    translate = Isometry([[sq, u / sq], [0.0, 1.0 / sq]])
    chart_angle = angle + math.atan2(v, u)
    return translate @ Isometry.rotation_at_i((chart_angle - math.pi / 2.0) / 2.0)


def band_tangent_from_frame(frame: Isometry) -> tuple[float, float, float]:
    """Inverse of frame_from_band_tangent: returns (x, y, band angle)."""
    w, vec = frame.apply_tangent(1j, 1j)
    x, y = chart_to_band_xy(w.real, w.imag)
    chart_angle = math.atan2(vec.imag, vec.real)
    angle = (chart_angle - math.atan2(w.imag, w.real)) % (2.0 * math.pi)
    return x, y, angle


def nau_decompose(g: Isometry) -> tuple[float, float, float]:
    """Factor an orientation-preserving isometry as n_s a_t u_r.

    Here n_s = [[1,0],[s,1]], a_t = diag(e^{t/2}, e^{-t/2}), u_r = [[1,r],[0,1]].
    The factorization exists exactly on the open cell where the upper-left
    entry is nonzero (after sign normalization in the projective class).
    """
    if g.reversing:
        raise DecompositionError("reversing isometry has no n-a-u factorization")
    m = g.m
    a = m[0, 0]
    if abs(a) <= 1e-12:
        raise DecompositionError("matrix outside the open cell (vanishing corner entry)")
    if a < 0:
        m = -m
        a = -a
    return float(m[1, 0] / a), float(2.0 * math.log(a)), float(m[0, 1] / a)


def nau_compose(s: float, t: float, r: float) -> Isometry:
    return Isometry.n_lower(s) @ Isometry.a_flow(t) @ Isometry.u_upper(r)
