"""Command-line front end.

Subcommands::

    analyze       critical points of dist_Y on X, classified, as a JSON report
    bottlenecks   ambient critical points with k + 1 witnesses
    degree-bound  smallest degree making the multijet map a submersion
    verify        duality check between an X->Y and a Y->X report
    plotdata      CSV samples of X, Y and the critical points (2-D only)

Exit codes: 0 clean, 2 when a degeneracy flag was raised (or duality
failed), 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import logging
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .distfield import PointCloud, SearchOptions, nearest_points, sample_variety
from .hypersurface import SolveOptions, analyze, bottlenecks, point_target_index
from .pointcloud import candidate_bound, enumerate_critical
from .poly import Poly, degree_bound
from .topology import (
    BUILTIN_BETTI,
    IndexCensus,
    check_duality,
    check_euler_identity,
    euler_characteristic,
    euler_sum,
    morse_inequalities,
    attachment_spheres,
)

log = logging.getLogger("distmorse")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FLAGGED = 2


class CliError(Exception):
    pass


def parse_point(text: str) -> np.ndarray:
    try:
        vals = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise CliError(f"cannot parse point {text!r}; expected comma-separated numbers") from None
    if not vals:
        raise CliError("empty point")
    return np.array(vals)


def _read_json(path: str, what: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError(f"{what} file {path} is not valid JSON: {exc}") from None
    except OSError as exc:
        raise CliError(f"cannot read {what} file {path}: {exc.strerror}") from None


def _topology(args, prefix: str) -> tuple[int | None, tuple[int, ...] | None]:
    space = getattr(args, f"{prefix}_space", None)
    chi = getattr(args, f"chi_{prefix}", None)
    betti = getattr(args, f"betti_{prefix}", None)
    if betti is not None:
        betti = tuple(int(b) for b in betti.split(","))
    if space is not None:
        if space not in BUILTIN_BETTI:
            raise CliError(f"unknown space {space!r}; known: {', '.join(sorted(BUILTIN_BETTI))}")
        betti = betti or BUILTIN_BETTI[space]
    if chi is None and betti is not None:
        chi = euler_characteristic(betti)
    return chi, betti


def _options(args) -> SolveOptions:
    search = SearchOptions(seed=args.seed, box=args.box)
    return SolveOptions(starts=args.starts, seed=args.seed, tol=args.tol, search=search)


def _options_echo(args, **extra) -> dict:
    out = {"seed": args.seed, "starts": args.starts, "tol": args.tol, "box": args.box}
    out.update(extra)
    return out


def _diag_json(diag: dict) -> dict:
    out = {}
    for key, val in diag.items():
        if key == "algebraic_only":
            out[key] = [{"x": np.asarray(a["x"]).tolist(), "k": a["k"], "reason": a["reason"]} for a in val]
        elif isinstance(val, dict):
            out[key] = {str(k): v for k, v in val.items()}
        else:
            out[key] = val
    return out


def _finish_report(report: dict, census: IndexCensus, flags: list[str], args) -> int:
    report["census"] = census.to_dict()
    verdicts = {"euler_sum": euler_sum(census), "attachment_spheres": attachment_spheres(census)}
    if census.chi_x is not None:
        v = check_euler_identity(census)
        verdicts["euler_identity"] = {"holds": v.holds, "lhs": v.lhs, "rhs": v.rhs}
    if census.betti_x is not None:
        mv = morse_inequalities(census)
        verdicts["morse"] = [m.to_dict() for m in mv]
    report["verdicts"] = verdicts
    report["diagnostics"]["flags"] = sorted(set(flags))
    if not args.no_meta:
        report["meta"] = {
            "version": __version__,
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        }
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_FLAGGED if flags else EXIT_OK


def _census_for(records: list[dict], args) -> IndexCensus:
    """Census over the validated nondegenerate, unflagged records."""
    chi_x, betti_x = _topology(args, "x")
    chi_y, _ = _topology(args, "y")
    chi_xy, betti_xy = _topology(args, "xy")
    counts: dict[tuple[int, int], int] = {}
    for r in records:
        if r.get("iota") is None or not r.get("validated") or not r.get("nondegenerate") or r.get("flags"):
            continue
        key = (int(r["k"]), int(r["iota"]))
        counts[key] = counts.get(key, 0) + 1
    return IndexCensus(counts, chi_x=chi_x, chi_y=chi_y, chi_xy=chi_xy, betti_x=betti_x, betti_xy=betti_xy)


def cmd_analyze(args) -> int:
    sources = [args.surface is not None, args.ambient, args.surface_point is not None]
    if sum(sources) != 1:
        raise CliError("give exactly one of --surface, --ambient, --surface-point")
    targets = [args.target is not None, args.cloud is not None, args.point is not None]
    if sum(targets) != 1:
        raise CliError("give exactly one of --target, --cloud, --point")

    p = Poly.from_dict(_read_json(args.surface, "surface")) if args.surface else None
    if args.target:
        target = Poly.from_dict(_read_json(args.target, "target"))
    elif args.cloud:
        target = PointCloud.from_dict(_read_json(args.cloud, "cloud"))
    else:
        target = PointCloud(parse_point(args.point)[None, :])
    n = target.nvars if isinstance(target, Poly) else target.dim
    if p is not None and p.nvars != n:
        raise CliError(f"dimension mismatch: surface lives in R^{p.nvars}, target in R^{n}")

    opts = _options(args)
    inputs = {
        "surface": None if p is None else p.to_dict(),
        "ambient": bool(args.ambient),
        "surface_point": None if args.surface_point is None else parse_point(args.surface_point).tolist(),
        "target": target.to_dict(),
        "target_kind": "poly" if isinstance(target, Poly) else "cloud",
        "options": _options_echo(args, k_max=args.k_max),
    }
    report: dict = {"inputs": inputs, "diagnostics": {}}
    flags: list[str] = []

    if args.surface_point is not None:
        # X is a single point: it is always critical, and nondegenerate iff its foot is unique
        x = parse_point(args.surface_point)
        if len(x) != n:
            raise CliError(f"dimension mismatch: point in R^{len(x)}, target in R^{n}")
        ns = nearest_points(target, x, opts.search)
        k = ns.multiplicity - 1
        rec = {
            "x": x.tolist(),
            "value": ns.radius,
            "k": k,
            "iota": 0 if k == 0 else None,
            "witnesses": ns.witnesses.tolist(),
            "nondegenerate": k == 0 and not ns.capped,
            "validated": True,
            "flags": ["capped"] if ns.capped else [],
        }
        if not rec["nondegenerate"]:
            flags.append("degenerate")
        report["mode"] = "point-source"
        report["critical_points"] = [rec]
        return _finish_report(report, _census_for([rec], args), flags, args)

    if p is None and isinstance(target, PointCloud):
        report["mode"] = "point-cloud"
        crit = enumerate_critical(target)
        report["critical_points"] = [c.to_dict(target) for c in crit]
        report["diagnostics"]["candidate_bound"] = candidate_bound(len(target), n)
        return _finish_report(report, _census_for(report["critical_points"], args), flags, args)

    diag: dict = {}
    if p is None:
        report["mode"] = "ambient-bottleneck"
    elif isinstance(target, PointCloud):
        report["mode"] = "point-target"
    else:
        report["mode"] = "hypersurface-pair"
    points = analyze(p, target, args.k_max, opts, diagnostics=diag)
    if report["mode"] == "point-target" and len(target) == 1:
        y = target.points[0]
        for cp in points:
            if cp.k == 0 and cp.iota is not None:
                cp.iota = point_target_index(p, cp.x, y)
    for cp in points:
        flags += cp.flags
        if cp.nondegenerate is False and not cp.flags:
            flags.append("degenerate")
    if diag.get("algebraic_only"):
        diag["algebraic_only_count"] = len(diag["algebraic_only"])
    report["critical_points"] = [cp.to_dict() for cp in points]
    report["diagnostics"].update(_diag_json(diag))
    return _finish_report(report, _census_for(report["critical_points"], args), flags, args)


def cmd_bottlenecks(args) -> int:
    q = Poly.from_dict(_read_json(args.target, "target"))
    opts = _options(args)
    diag: dict = {}
    points = bottlenecks(q, args.k, opts, diagnostics=diag)
    flags = [f for cp in points for f in cp.flags]
    report = {
        "mode": "ambient-bottleneck",
        "inputs": {
            "surface": None,
            "ambient": True,
            "target": q.to_dict(),
            "target_kind": "poly",
            "options": _options_echo(args, k=args.k),
        },
        "critical_points": [cp.to_dict() for cp in points],
        "diagnostics": _diag_json(diag),
        "label": "bottlenecks" if args.k == 1 else f"{args.k + 1}-bottlenecks",
    }
    census = IndexCensus.from_points([cp for cp in points if cp.clean])
    return _finish_report(report, census, flags, args)


def cmd_degree_bound(args) -> int:
    print(degree_bound(args.n, args.k, args.r))
    return EXIT_OK


def _load_report_census(path: str) -> IndexCensus:
    data = _read_json(path, "report")
    if "census" not in data:
        raise CliError(f"report {path} is missing field 'census'")
    try:
        return IndexCensus.from_dict(data["census"])
    except ValueError as exc:
        raise CliError(f"report {path}: {exc}") from None


def cmd_verify(args) -> int:
    xy = _load_report_census(args.report_xy)
    yx = _load_report_census(args.report_yx)
    verdict = check_duality(xy, yx)
    print(verdict.message())
    return EXIT_OK if verdict.holds else EXIT_FLAGGED


def cmd_plotdata(args) -> int:
    data = _read_json(args.report, "report")
    try:
        inputs = data["inputs"]
        crit = data["critical_points"]
    except KeyError as exc:
        raise CliError(f"report is missing field {exc}") from None
    opts = inputs.get("options", {})
    search = SearchOptions(seed=opts.get("seed", 0), box=opts.get("box", 10.0))
    rows: list[tuple] = []
    surface = inputs.get("surface")
    if surface is not None:
        p = Poly.from_dict(surface)
        if p.nvars != 2:
            raise CliError("plotdata supports planar inputs only")
        rows += [(a, b, "X", "", "") for a, b in sample_variety(p, search).points]
    target = inputs.get("target")
    if target is not None:
        if inputs.get("target_kind") == "cloud":
            pts = PointCloud.from_dict(target).points
        else:
            pts = sample_variety(Poly.from_dict(target), search).points
        if pts.shape[1] != 2:
            raise CliError("plotdata supports planar inputs only")
        rows += [(a, b, "Y", "", "") for a, b in pts]
    for c in crit:
        if len(c["x"]) != 2:
            raise CliError("plotdata supports planar inputs only")
        iota = "" if c.get("iota") is None else c["iota"]
        rows.append((c["x"][0], c["x"][1], "crit", c["k"], iota))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["x", "y", "which", "k", "iota"])
        for r in rows:
            w.writerow([repr(float(r[0])), repr(float(r[1])), r[2], r[3], r[4]])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def _add_run_options(sp):
    sp.add_argument("--starts", type=int, default=None, help="Newton starts per index k (default 128*n)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-9, help="residual tolerance of the critical system")
    sp.add_argument("--box", type=float, default=10.0, help="half-width of the search cube")
    sp.add_argument("--out", default=None, help="output file (default stdout)")
    sp.add_argument("--no-meta", action="store_true", help="omit version/timestamp for byte-identical reports")


def _add_topology_options(sp):
    for prefix, what in (("x", "X"), ("y", "Y"), ("xy", "X ∩ Y")):
        sp.add_argument(f"--{prefix}-space", default=None, help=f"built-in space for {what}: {', '.join(BUILTIN_BETTI)}")
        sp.add_argument(f"--chi-{prefix}", type=int, default=None, help=f"Euler characteristic of {what}")
        sp.add_argument(f"--betti-{prefix}", default=None, help=f"comma-separated Betti numbers of {what}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="distmorse", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="critical points of dist_Y restricted to X")
    a.add_argument("--surface", help="polynomial JSON of p, X = Z(p)")
    a.add_argument("--ambient", action="store_true", help="X is all of R^n")
    a.add_argument("--surface-point", help="X is a single point 'x,y,...'")
    a.add_argument("--target", help="polynomial JSON of q, Y = Z(q)")
    a.add_argument("--cloud", help="point-cloud JSON for a finite Y")
    a.add_argument("--point", help="Y is a single point 'x,y,...'")
    a.add_argument("--k-max", type=int, default=None)
    _add_run_options(a)
    _add_topology_options(a)
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("bottlenecks", help="ambient critical points with k + 1 witnesses")
    b.add_argument("--target", required=True)
    b.add_argument("--k", type=int, default=1)
    _add_run_options(b)
    b.set_defaults(func=cmd_bottlenecks)

    d = sub.add_parser("degree-bound", help="smallest d with C(n+d, d) >= k * sum_{l<=r} C(n, l)")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--k", type=int, required=True)
    d.add_argument("--r", type=int, required=True)
    d.set_defaults(func=cmd_degree_bound)

    v = sub.add_parser("verify", help="duality identity between two reports")
    v.add_argument("--report-xy", required=True)
    v.add_argument("--report-yx", required=True)
    v.set_defaults(func=cmd_verify)

    pl = sub.add_parser("plotdata", help="CSV of sampled X, Y and critical points")
    pl.add_argument("--report", required=True)
    pl.add_argument("--out", default=None)
    pl.set_defaults(func=cmd_plotdata)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return int(args.func(args))
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
