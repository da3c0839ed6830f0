"""Command-line driver.

Exit codes: 0 success, 2 surface validation failure, 3 malformed input
file or flag, 1 any other computation error.  Every failure prints exactly
one machine-parseable line to stderr:  loomlab-error code=<CODE> msg=<...>

All numeric output is printed at 9 significant digits and file outputs are
byte-identical for a fixed seed and configuration.  LOOMLAB_THREADS caps
the worker pool used by parameter sweeps.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import intervalsets, measure, recurrence, render, surface, tracer, weaving
from .hyperbolic import BandPoint, GeometryError, LoomlabError
from .intervalsets import IntervalFormatError
from .surface import SpecFormatError, SurfacePoint, ValidationError
from .tracer import SurfaceTangent

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_VALIDATION = 2
EXIT_PARSE = 3


def _fmt(x) -> str:
    if isinstance(x, float):
        out = f"{x:.9g}"
        return "0" if out == "-0" else out
    return str(x)


def _round9(obj):
    if isinstance(obj, float):
        return float(_fmt(obj)) if math.isfinite(obj) else repr(obj)
    if isinstance(obj, dict):
        return {k: _round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round9(v) for v in obj]
    return obj


def _write_json(data, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_round9(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def worker_count() -> int:
    try:
        n = int(os.environ.get("LOOMLAB_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, 32))


def _parse_start(text: str) -> SurfaceTangent:
    try:
        x, y, sheet, angle = (part.strip() for part in text.split(","))
        return SurfaceTangent(
            SurfacePoint(BandPoint(float(x), float(y)), int(sheet)), float(angle)
        )
    except (ValueError, GeometryError) as exc:
        raise SpecFormatError(f"bad start tangent {text!r}: {exc}") from exc


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise SpecFormatError(f"bad integer list {text!r}") from exc


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise SpecFormatError(f"bad number list {text!r}") from exc


# -- commands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    spec = surface.load_spec(args.surface)
    report = surface.validate(spec)
    print(f"entries={spec.count} sup_h={_fmt(report.sup_h)} "
          f"min_pairwise={_fmt(report.min_pairwise)}")
    print("gaps=" + ",".join(_fmt(g) for g in report.gaps))
    if report.nonincreasing_at:
        print("warning: gaps not increasing at "
              + ",".join(str(i) for i in report.nonincreasing_at)
              + " (divergence not certifiable on a finite prefix)")
    if not report.valid:
        for failure in report.failures:
            print(f"failure: {failure}")
        return EXIT_VALIDATION
    print("valid")
    return EXIT_OK


def cmd_design(args) -> int:
    if (args.summable is None) == (args.E is None):
        raise SpecFormatError("design needs exactly one of --summable or --E")
    if args.summable is not None:
        spec = surface.design_summable(
            args.summable, args.count,
            gap_base=args.gap_base, gap_growth=args.gap_growth,
        )
        sums = surface.slack_partial_sums(spec)
        print("slack_partial_sums=" + ",".join(_fmt(v) for v in sums))
    else:
        E = intervalsets.parse_intervals_json(args.E)
        spec = surface.design_from_E(
            E, args.count, gap_growth=args.gap_growth, gap_base=args.gap_base
        )
    surface.save_spec(spec, args.out)
    print(f"wrote {args.out} entries={spec.count} "
          f"gap_floor={_fmt(spec.gap_floor or 0.0)}")
    return EXIT_OK


def cmd_trace(args) -> int:
    spec = surface.load_spec(args.surface)
    start = _parse_start(args.start)
    if args.kind == "geodesic":
        traj = tracer.trace_geodesic(start, args.time, spec)
    else:
        traj = tracer.trace_horocycle(start, args.time, spec, args.direction)
    traj.to_csv(args.out, step=args.sample_step)
    print(f"wrote {args.out} crossings=" +
          ",".join(str(k) for k in traj.crossing_sequence))
    return EXIT_OK


def cmd_slack(args) -> int:
    spec = surface.load_spec(args.surface)
    start = _parse_start(args.start)
    traj = tracer.trace_geodesic(start, args.horizon, spec)
    value = tracer.slack(traj)
    buse = tracer.busemann(start, args.horizon, spec)
    print(f"slack={_fmt(value.value)} horizon={_fmt(value.horizon)}")
    print(f"busemann={_fmt(buse.estimate)} diverging={str(buse.minus_infinity).lower()} "
          f"tail_rate={_fmt(buse.tail_rate)}")
    print("crossings=" + ",".join(str(k) for k in traj.crossing_sequence))
    return EXIT_OK


def cmd_weave(args) -> int:
    if args.sweep_gaps:
        gaps = _parse_float_list(args.sweep_gaps)
        length = (len(_parse_int_list(args.pattern)) if args.pattern
                  else args.pattern_length)
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            reports = weaving.additivity_gap_sweep(
                gaps, pattern_length=length, h=args.h, executor=pool
            )
        rows = [r.to_dict() for r in reports]
        print("gap traced predicted abs_error")
        for gap, row in zip(gaps, rows):
            print(f"{_fmt(gap)} {_fmt(row['traced_slack'])} "
                  f"{_fmt(row['predicted_slack'])} {_fmt(row['abs_error'])}")
        if args.out:
            _write_json({"sweep": rows}, args.out)
        return EXIT_OK
    if not args.pattern:
        raise SpecFormatError("weave needs --pattern or --sweep-gaps")
    spec = surface.load_spec(args.surface)
    pattern = weaving.WeavingPattern(tuple(_parse_int_list(args.pattern)), args.sign)
    report = weaving.verify_weaving_additivity(pattern, spec, args.horizon)
    data = report.to_dict()
    for key in ("pattern", "traced_slack", "predicted_slack", "abs_error",
                "min_gap", "horizon"):
        print(f"{key}={_fmt(data[key]) if not isinstance(data[key], list) else data[key]}")
    if args.out:
        _write_json(data, args.out)
    return EXIT_OK


def cmd_dim(args) -> int:
    if args.set_file:
        base = intervalsets.load_interval_set(args.set_file)
    elif args.set == "cantor":
        base = intervalsets.cantor_cover(args.level, left=args.offset)
    else:
        raise SpecFormatError(f"unknown set kind {args.set!r}")
    orders = _parse_int_list(args.m) if args.m else [1]
    if args.scales:
        scales = _parse_float_list(args.scales)
    else:
        scales = [3.0 ** -j for j in range(2, 9)]
    rows = []

    def run(m):
        S = intervalsets.sumset(base, m)
        usable = [r for r in scales if r >= S.delta * (1.0 - 1e-12)]
        if len(usable) < 3:
            raise GeometryError(f"not enough scales above resolution for m={m}")
        est = intervalsets.box_dimension(S, usable)
        return {
            "m": m,
            "dimension": est.value,
            "r2": est.r2,
            "scales": list(est.scales),
            "counts": list(est.counts),
        }

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(run, orders))
    print("m dimension r2")
    for row in rows:
        print(f"{row['m']} {_fmt(row['dimension'])} {_fmt(row['r2'])}")
    if args.out:
        _write_json({"table": rows}, args.out)
    return EXIT_OK


def cmd_measure(args) -> int:
    spec = surface.load_spec(args.surface)
    choice = measure.choose_section(spec, seed=args.seed)
    sec = choice.section
    R = args.R if args.R is not None else 0.8 * sec.delta / 4.0
    trace = measure.horocycle_orbit_trace(spec, args.T)
    mu = measure.estimate_nu(spec, sec, R, args.T, trace=trace)
    print(f"delta={_fmt(sec.delta)} eta={_fmt(sec.eta)} "
          f"c={_fmt(sec.c)} d={_fmt(sec.d)}")
    print(f"R={_fmt(R)} T={_fmt(args.T)} mass={_fmt(mu.mass())} "
          f"occupation={_fmt(mu.occupation_time)} visits={len(mu.visits)}")
    tight = measure.check_tightness(mu, args.eps)
    print(f"tightness eps={_fmt(args.eps)} shrunk_mass={_fmt(tight.shrunk_mass)}")
    f = measure.TestFunction("tent", -R / 3.0, R / 3.0)
    flow_rep = measure.check_flow_invariance(mu, R / 8.0, f)
    print(f"flow_invariance observed={_fmt(flow_rep.observed)} "
          f"bound={_fmt(flow_rep.bound)} ok={str(flow_rep.satisfied).lower()}")
    if args.R2 is not None:
        restr = measure.check_restriction(spec, sec, min(R, args.R2),
                                          max(R, args.R2), args.T, trace=trace)
        print(f"restriction C={_fmt(restr.C)} "
              f"sup_discrepancy={_fmt(restr.sup_discrepancy)} "
              f"ok={str(restr.satisfied).lower()}")
    if args.out:
        _write_json(mu.to_dict(), args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_render(args) -> int:
    spec = surface.load_spec(args.surface)
    trajectories = []
    for path in args.traj:
        rows = tracer.load_trajectory_csv(path)
        trajectories.append([(r[0], r[1], r[2], r[3], r[4], r[5]) for r in rows])
    render.render_svg(spec, trajectories, args.out, px_per_unit=args.px_per_unit)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_recur(args) -> int:
    spec = surface.load_spec(args.surface)
    report = recurrence.recurrence_by_slack(args.t, spec, args.tol)
    data = report.to_dict()
    for key in ("t", "found", "witness", "predicted_slack", "traced_slack",
                "base_distance"):
        val = data[key]
        print(f"{key}={_fmt(val) if isinstance(val, float) else val}")
    if args.out:
        _write_json(data, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loomlab",
        description="horocyclic and geodesic dynamics on loom surfaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a surface file")
    p.add_argument("surface")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("design", help="design a surface")
    p.add_argument("--summable", help="height rule, e.g. '1/k' or '0.5'")
    p.add_argument("--E", help="inline interval JSON, e.g. '[[0.693147,0.693147]]'")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--gap-base", type=float, default=None)
    p.add_argument("--gap-growth", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_design)

    p = sub.add_parser("trace", help="trace a geodesic or horocycle")
    p.add_argument("--surface", required=True)
    p.add_argument("--start", required=True, metavar="x,y,sheet,angle")
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--kind", choices=("geodesic", "horocycle"), default="geodesic")
    p.add_argument("--direction", choices=("stable", "unstable"), default="stable")
    p.add_argument("--sample-step", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("slack", help="slack and Busemann value of a forward ray")
    p.add_argument("--surface", required=True)
    p.add_argument("--start", required=True, metavar="x,y,sheet,angle")
    p.add_argument("--horizon", type=float, default=40.0)
    p.set_defaults(fn=cmd_slack)

    p = sub.add_parser("weave", help="weaving geodesics and slack additivity")
    p.add_argument("--surface")
    p.add_argument("--pattern", help="comma list of indices, e.g. 1,2,3")
    p.add_argument("--sign", choices=("+", "-"), default="+")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--sweep-gaps", help="comma list of gaps for the sweep")
    p.add_argument("--pattern-length", type=int, default=3)
    p.add_argument("--h", type=float, default=math.pi / 4)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_weave)

    p = sub.add_parser("dim", help="box-counting dimension table")
    p.add_argument("--set", default="cantor")
    p.add_argument("--set-file")
    p.add_argument("--level", type=int, default=10)
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--m", help="comma list of sum orders, e.g. 1,2,3")
    p.add_argument("--scales", help="comma list of box sizes")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_dim)

    p = sub.add_parser("measure", help="empirical measure along the horocycle orbit")
    p.add_argument("--surface", required=True)
    p.add_argument("--T", type=float, default=1000.0)
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--R2", type=float, default=None)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_measure)

    p = sub.add_parser("recur", help="recurrence witness search")
    p.add_argument("--surface", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_recur)

    p = sub.add_parser("render", help="render surface and trajectories to SVG")
    p.add_argument("--surface", required=True)
    p.add_argument("--traj", nargs="*", default=[])
    p.add_argument("--px-per-unit", type=float, default=60.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_render)

    return parser


def _design_defaults(args):
    if args.gap_base is None:
        args.gap_base = 4.0 if args.E is not None else 1.0
    if args.gap_growth is None:
        args.gap_growth = 1.0 if args.E is not None else 0.5


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code not in (0, None) else EXIT_OK
    if args.command == "design":
        _design_defaults(args)
    try:
        return args.fn(args)
    except (SpecFormatError, IntervalFormatError) as exc:
        print(f"loomlab-error code=PARSE msg={exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"loomlab-error code=VALIDATION msg={exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except LoomlabError as exc:
        code = type(exc).__name__.upper()
        print(f"loomlab-error code={code} msg={exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"loomlab-error code=IO msg={exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
