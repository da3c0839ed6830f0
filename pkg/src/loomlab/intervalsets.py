"""Compact subsets of R as finite unions of closed intervals.

Sets are carried at a stated resolution delta: an IntervalSet is a
delta-cover of the set it stands for.  Minkowski sums, parity unions and
box-counting dimension estimates all stay exact at the cover level; no
claim is ever made about the underlying limit set beyond the estimate and
its regression quality.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .hyperbolic import DomainError, LoomlabError

# grid snap for box counting: endpoint/scale ratios this close to an integer
# are treated as exact grid hits, so self-similar covers count exactly
_SNAP = 1e-9


class IntervalFormatError(LoomlabError, ValueError):
    pass


def _merge(starts, ends, tol=0.0):
    order = np.argsort(starts, kind="stable")
    starts = np.asarray(starts, dtype=float)[order]
    ends = np.asarray(ends, dtype=float)[order]
    out_s, out_e = [], []
    for a, b in zip(starts, ends):
        if out_e and a <= out_e[-1] + tol:
            if b > out_e[-1]:
                out_e[-1] = b
        else:
            out_s.append(a)
            out_e.append(b)
    return list(zip(out_s, out_e))


@dataclass(frozen=True)
class IntervalSet:
    intervals: tuple[tuple[float, float], ...]
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError("resolution delta must be positive")
        prev_end = -math.inf
        for a, b in self.intervals:
            if not (math.isfinite(a) and math.isfinite(b)):
                raise DomainError("interval endpoints must be finite")
            if b < a:
                raise DomainError(f"interval [{a}, {b}] is reversed")
            if a <= prev_end:
                raise DomainError("intervals must be sorted and pairwise disjoint")
            prev_end = b
        object.__setattr__(self, "intervals", tuple(map(tuple, self.intervals)))

    @staticmethod
    def from_intervals(pairs, delta: float, merge_tol: float | None = None) -> "IntervalSet":
        pairs = [(float(a), float(b)) for a, b in pairs]
        if not pairs:
            raise DomainError("empty interval list")
        if merge_tol is None:
            scale = max(1.0, max(abs(a) for a, _ in pairs), max(abs(b) for _, b in pairs))
            merge_tol = 1e-12 * scale
        merged = _merge([a for a, _ in pairs], [b for _, b in pairs], merge_tol)
        return IntervalSet(tuple(merged), delta)

    @staticmethod
    def from_values(values, delta: float = 1e-12) -> "IntervalSet":
        return IntervalSet.from_intervals([(v, v) for v in values], delta)

    @property
    def n_intervals(self) -> int:
        return len(self.intervals)

    @property
    def min(self) -> float:
        return self.intervals[0][0]

    @property
    def max(self) -> float:
        return self.intervals[-1][1]

    def total_length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return any(a - tol <= x <= b + tol for a, b in self.intervals)

    def clip(self, lo: float, hi: float) -> "IntervalSet":
        pairs = [(max(a, lo), min(b, hi)) for a, b in self.intervals if b >= lo and a <= hi]
        if not pairs:
            raise DomainError(f"clip to [{lo}, {hi}] leaves an empty set")
        return IntervalSet(tuple(pairs), self.delta)

    def translate(self, c: float) -> "IntervalSet":
        return IntervalSet(tuple((a + c, b + c) for a, b in self.intervals), self.delta)


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    scales: tuple[float, ...]
    counts: tuple[int, ...]
    r2: float


def minkowski_sum(A: IntervalSet, B: IntervalSet) -> IntervalSet:
    """Exact Minkowski sum of two interval unions (merged and sorted)."""
    sa = np.array([a for a, _ in A.intervals])
    ea = np.array([b for _, b in A.intervals])
    sb = np.array([a for a, _ in B.intervals])
    eb = np.array([b for _, b in B.intervals])
    starts = (sa[:, None] + sb[None, :]).ravel()
    ends = (ea[:, None] + eb[None, :]).ravel()
    scale = max(1.0, float(np.abs(starts).max()), float(np.abs(ends).max()))
    merged = _merge(starts, ends, 1e-12 * scale)
    return IntervalSet(tuple(merged), A.delta + B.delta)


def sumset(E: IntervalSet, m: int) -> IntervalSet:
    """m-fold Minkowski sum E + ... + E at resolution m * delta."""
    if not isinstance(m, int) or m < 1:
        raise DomainError(f"sumset order must be an integer >= 1, got {m}")
    acc = E
    for _ in range(m - 1):
        acc = minkowski_sum(acc, E)
    return acc


def delta_sets(E: IntervalSet, T: float, parity: str) -> IntervalSet:
    """Union of the parity-class iterated sums mE intersected with [0, T].

    Only orders m <= ceil(T / min E) can meet [0, T], so the union is finite.
    """
    if parity not in ("even", "odd"):
        raise DomainError("parity must be 'even' or 'odd'")
    if not T > 0:
        raise DomainError("T must be positive")
    dmin = E.min
    if dmin <= 0.0:
        raise DomainError("delta sets need min(E) > 0 (distality)")
    m_max = math.ceil(T / dmin)
    start = 2 if parity == "even" else 1
    pairs = []
    used_delta = E.delta
    acc = None
    for m in range(1, m_max + 1):
        acc = E if acc is None else minkowski_sum(acc, E)
        if m < start or (m - start) % 2 != 0:
            continue
        for a, b in acc.intervals:
            if a <= T and b >= 0.0:
                pairs.append((max(a, 0.0), min(b, T)))
        used_delta = max(used_delta, acc.delta)
    if not pairs:
        raise DomainError(f"no parity-{parity} sums meet [0, {T}]")
    return IntervalSet.from_intervals(pairs, used_delta)


def _cell_range(a: float, b: float, r: float):
    """Half-open grid cells [n r, (n+1) r) met by [a, b), with grid snapping."""
    la = a / r
    lo = math.floor(la)
    if lo + 1 - la < _SNAP:  # a sits on a grid line, up to float noise
        lo += 1
    if b <= a:
        return lo, lo
    rb = b / r
    hi = math.floor(rb)
    if rb - hi < _SNAP:  # b on a grid line: [a, b) stops short of cell hi
        hi -= 1
    return lo, max(hi, lo)


def box_count(S: IntervalSet, r: float) -> int:
    """Number of size-r grid boxes meeting S (half-open cell convention)."""
    ranges = sorted(_cell_range(a, b, r) for a, b in S.intervals)
    count = 0
    cur_lo, cur_hi = None, None
    for lo, hi in ranges:
        if cur_hi is not None and lo <= cur_hi + 1:
            cur_hi = max(cur_hi, hi)
        else:
            if cur_hi is not None:
                count += cur_hi - cur_lo + 1
            cur_lo, cur_hi = lo, hi
    if cur_hi is not None:
        count += cur_hi - cur_lo + 1
    return count


def box_dimension(S: IntervalSet, scales) -> DimensionEstimate:
    """Least-squares slope of log N(r) against log(1/r) over the given scales."""
    scales = [float(r) for r in scales]
    if len(scales) < 3:
        raise DomainError("need at least 3 scales for a dimension estimate")
    for r in scales:
        if r < S.delta * (1.0 - 1e-12):
            raise DomainError(
                f"scale {r} is below the set resolution {S.delta}; the count "
                "would measure the cover, not the set"
            )
    counts = [box_count(S, r) for r in scales]
    xs = np.log(1.0 / np.array(scales))
    ys = np.log(np.array(counts, dtype=float))
    slope, intercept = np.polyfit(xs, ys, 1)
    fit = slope * xs + intercept
    ss_res = float(np.sum((ys - fit) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DimensionEstimate(
        value=float(min(1.0, max(0.0, slope))),
        scales=tuple(scales),
        counts=tuple(counts),
        r2=r2,
    )


def cantor_cover(level: int, *, left: float = 0.0, scale: float = 1.0,
                 delta: float | None = None) -> IntervalSet:
    """Level-n cover of the middle-thirds set in [left, left + scale]."""
    if level < 0:
        raise DomainError("level must be >= 0")
    starts = np.array([0.0])
    for i in range(1, level + 1):
        starts = np.concatenate([starts, starts + 2.0 / 3.0**i])
    starts = np.sort(starts) * scale + left
    width = scale / 3.0**level
    pairs = tuple((s, s + width) for s in starts)
    return IntervalSet(pairs, delta if delta is not None else width)


# -- file format ----------------------------------------------------------------


def save_interval_set(S: IntervalSet, path: str) -> None:
    data = {"delta": S.delta, "intervals": [[a, b] for a, b in S.intervals]}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, sort_keys=True)
        fh.write("\n")


def load_interval_set(path: str) -> IntervalSet:
    def reject(token):
        raise IntervalFormatError(f"non-finite number in interval file: {token}")

    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh, parse_constant=reject)
    except OSError as exc:
        raise IntervalFormatError(f"cannot read interval file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IntervalFormatError(f"interval file is not valid JSON: {exc}") from exc
    try:
        return IntervalSet.from_intervals(data["intervals"], float(data["delta"]))
    except (KeyError, TypeError, DomainError) as exc:
        raise IntervalFormatError(f"bad interval file contents: {exc}") from exc


def parse_intervals_json(text: str, delta: float = 1e-9) -> IntervalSet:
    """Interval list from an inline JSON string like '[[0.69,0.69],[1,2]]'."""
    try:
        pairs = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IntervalFormatError(f"bad inline interval JSON: {exc}") from exc
    if not isinstance(pairs, list):
        raise IntervalFormatError("inline intervals must be a JSON list of pairs")
    return IntervalSet.from_intervals(pairs, delta)
