"""Command line: ``fairspace solve|verify|render|acceptance``.

Every solve writes a partition JSON and, next to it, a certificate JSON
(``p.json`` -> ``p.cert.json``).  Exit codes: 0 feasible / verified,
1 input error, 2 solved but infeasible, 3 certificate violated.
"""
from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import certificates as certs
from .delta_spaces import (
    PowerFixedSites,
    TwoLineDisk,
    calibrate_M,
    nested_space,
    space_from_dict,
    space_to_dict,
)
from .envyfree_convex import ConvexOptions, GroupInstance, solve_simultaneous
from .geometry import partition_from_dict, partition_to_dict
from .kkm_solver import SolveOptions, solve_envy_free, solve_levi
from .measures import Measure, measure_from_dict
from .proportional import solve_proportional
from .render import render_svg

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_VIOLATED = 0, 1, 2, 3


class InputError(Exception):
    pass


# -- io -------------------------------------------------------------------------


def read_json(path) -> object:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def load_measures(paths) -> list[Measure]:
    out = []
    for p in paths:
        try:
            out.append(measure_from_dict(read_json(p)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{p}: bad measure ({exc})") from exc
    if len({mu.dim for mu in out}) > 1:
        raise InputError("measures have different dimensions")
    return out


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return "+inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_plain(obj), indent=2) + "\n")


def cert_path(out) -> Path:
    return Path(out).with_suffix(".cert.json")


def _partition_dict(cells, dim, provenance) -> dict:
    if not cells:
        return {"dim": dim, "cells": [], "provenance": provenance}
    return partition_to_dict(cells, provenance)


def _emit(args, cells, dim, provenance, cert) -> int:
    write_json(args.out, _partition_dict(cells, dim, provenance))
    write_json(cert_path(args.out), cert)
    status = "feasible" if cert["feasible"] else "INFEASIBLE"
    print(f"{status}: wrote {args.out} and {cert_path(args.out)}")
    return EXIT_OK if cert["feasible"] else EXIT_INFEASIBLE


# -- solve ------------------------------------------------------------------------


def _solve_opts(args) -> SolveOptions:
    return SolveOptions(eps_mass=args.eps, restarts=args.restarts, max_evals=args.max_evals,
                        seed=args.seed, mode="secretive" if args.secret else "full")


def _delta_solve(args, space, measures) -> int:
    opts = _solve_opts(args)
    x, cells, cert = solve_envy_free(space, measures, opts)
    if opts.mode == "full":
        claims = certs.envy_claims(cert.assignment, opts.eps_mass)
    else:
        claims = [c for wit in cert.witnesses.values() for c in certs.envy_claims(wit, opts.eps_mass)]
    extra = {"x": x, "envy": cert.envy, "mode": opts.mode, "assignment": cert.assignment,
             "witnesses": cert.witnesses, "space": space_to_dict(space)}
    out = certs.make_certificate(args.kind, measures, cells, claims, cert.feasible, opts.eps_mass, extra)
    prov = {"command": f"solve {args.kind}", "seed": args.seed, "x": x, "space": space_to_dict(space)}
    return _emit(args, cells, space.dim, prov, out)


def _parse_cut(text: str):
    try:
        d, j = text.split(":")
        return tuple(float(v) for v in d.split(",")), int(j)
    except ValueError as exc:
        raise InputError(f"bad --cut {text!r}; expected like '1,0:0'") from exc


def solve_two_lines(args) -> int:
    return _delta_solve(args, TwoLineDisk(tuple(args.center), args.radius), load_measures(args.measures))


def solve_nested(args) -> int:
    measures = load_measures(args.measures)
    if args.space:
        space = space_from_dict(read_json(args.space))
    elif args.cut:
        space = nested_space(measures[0].dim, [_parse_cut(c) for c in args.cut])
    else:
        raise InputError("nested needs --space or at least one --cut")
    return _delta_solve(args, space, measures)


def solve_power_fixed(args) -> int:
    measures = load_measures(args.measures)
    sites = np.asarray(read_json(args.sites), dtype=float)
    M = args.M
    if M is None:
        calib = args.calib_eps if args.calib_eps is not None else min(args.eps, 0.5 / len(sites))
        M = calibrate_M(sites, measures, calib)
    return _delta_solve(args, PowerFixedSites(sites, M), measures)


def solve_levi_cmd(args) -> int:
    cones, _ = partition_from_dict(read_json(args.cones))
    measures = load_measures(args.measures)
    opts = _solve_opts(args)
    x, assign, cert = solve_levi(cones, measures, args.alphas, opts)
    alphas = np.asarray(args.alphas, dtype=float)
    cells = [c.translated(x) for c in cones]
    if opts.mode == "full":
        claims = certs.bound_claims(assign, alphas[assign] - opts.eps_mass)
    else:
        claims = [c for wit in assign.values()
                  for c in certs.bound_claims(wit, alphas[wit] - opts.eps_mass)]
    extra = {"x": x, "alphas": alphas, "residual": cert.envy, "mode": opts.mode,
             "assignment": cert.assignment, "witnesses": cert.witnesses}
    out = certs.make_certificate("levi", measures, cells, claims, cert.feasible, opts.eps_mass, extra)
    return _emit(args, cells, len(x), {"command": "solve levi", "seed": args.seed, "x": x}, out)


def _groups(args):
    base = load_measures([args.base])[0]
    groups = [load_measures(g) for g in args.group or []]
    if not groups:
        raise InputError("need at least one --group")
    if any(mu.dim != base.dim for g in groups for mu in g):
        raise InputError("group measures and base measure differ in dimension")
    labels = ["base"] + [f"group{r}[{j}]" for r, g in enumerate(groups) for j in range(len(g))]
    return base, groups, labels


def _convex_opts(args) -> ConvexOptions:
    return ConvexOptions(restarts=args.restarts, max_evals=args.max_evals, seed=args.seed,
                         tol_mass=args.tol_mass)


def solve_convex(args) -> int:
    base, groups, labels = _groups(args)
    n = len(groups[0]) + (1 if args.secret else 0)
    inst = GroupInstance(base, tuple(tuple(g) for g in groups), n, secretive=args.secret)
    opts = _convex_opts(args)
    res = solve_simultaneous(inst, args.eps_schedule, opts)
    measures = [base] + [mu for g in groups for mu in g]
    eps = res.report.get("eps_final", args.eps_schedule[-1] if args.eps_schedule else 0.0)
    claims = certs.mass_claims(0, len(res.cells), 1.0 / n, opts.tol_mass) if res.cells else []
    offset = 1
    for r, g in enumerate(groups):
        ids = list(range(offset, offset + len(g)))
        offset += len(g)
        if not res.feasible:
            continue
        fam = res.permutations[r]
        for p in (fam.values() if args.secret else [fam]):
            claims += certs.envy_claims(p[:len(g)], eps, ids)
    extra = {"permutations": res.permutations, "report": res.report}
    out = certs.make_certificate("convex-envyfree", measures, res.cells, claims, res.feasible, eps,
                                 extra, labels) if res.cells else {
        "kind": "convex-envyfree", "n_measures": len(measures), "feasible": False, "claims": [],
        "report": res.report}
    return _emit(args, res.cells, base.dim, {"command": "solve convex-envyfree", "seed": args.seed}, out)


def solve_proportional_cmd(args) -> int:
    base, groups, labels = _groups(args)
    if any(len(g) != args.n for g in groups):
        raise InputError(f"each group needs --n = {args.n} measures")
    res = solve_proportional(base, groups, args.n, args.eps_total, _convex_opts(args))
    measures = [base] + [mu for g in groups for mu in g]
    claims = []
    if res.feasible:
        for r, pi in enumerate(res.maps):
            ids = [1 + r * args.n + i for i in range(args.n)]
            claims += certs.bound_claims(pi, res.certificate["composed_bound"], ids)
    extra = {"maps": res.maps, "summary": res.certificate, "tree": res.tree.to_dict()}
    if res.cells:
        out = certs.make_certificate("proportional", measures, res.cells, claims, res.feasible,
                                     args.eps_total, extra, labels)
    else:
        out = {"kind": "proportional", "n_measures": len(measures), "feasible": False,
               "claims": [], **extra}
    return _emit(args, res.cells, base.dim, {"command": "solve proportional", "seed": args.seed}, out)


# -- verify / render ----------------------------------------------------------------


def cmd_verify(args) -> int:
    cells, _ = partition_from_dict(read_json(args.partition))
    cert = read_json(args.cert or cert_path(args.partition))
    measures = load_measures(args.measures)
    try:
        bad = certs.check_certificate(cert, cells, measures)
    except certs.ArityError as exc:
        raise InputError(str(exc)) from exc
    if bad:
        for line in bad:
            print(f"VIOLATED: {line}")
        return EXIT_VIOLATED
    print(f"ok: {len(cert['claims'])} claims hold")
    return EXIT_OK


def _cell_labels(cert: dict | None) -> dict[int, str]:
    if not cert:
        return {}
    names = cert.get("measure_labels") or [f"m{j}" for j in range(cert.get("n_measures", 0))]
    found: dict[int, set] = {}
    for c in cert.get("claims", []):
        if c["type"] in ("ge_max_minus", "ge_const") and c["measure"] < len(names):
            found.setdefault(c["cell"], set()).add(c["measure"])
    return {i: " ".join(names[j] for j in sorted(js)) for i, js in sorted(found.items())}


def cmd_render(args) -> int:
    d = read_json(args.partition)
    cells, _ = partition_from_dict(d)
    if int(d["dim"]) != 2:
        raise InputError(f"render needs a planar partition, got dim {d['dim']}")
    measures = load_measures(args.measures) if args.measures else []
    cert = None
    cp = Path(args.cert) if args.cert else cert_path(args.partition)
    if cp.exists():
        cert = read_json(cp)
    Path(args.out).write_text(render_svg(cells, measures, _cell_labels(cert)))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_acceptance(args) -> int:
    return subprocess.call([sys.executable, "-m", "pytest", args.path, "-s", "-q"])


# -- parser ---------------------------------------------------------------------------


def _common(p, secret=True):
    p.add_argument("--eps", type=float, default=1e-2, help="certificate tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--max-evals", type=int, default=400, help="objective budget per restart")
    if secret:
        p.add_argument("--secret", action="store_true", help="one measure fewer than pieces")
    p.add_argument("--out", required=True)


def _convex_common(p):
    p.add_argument("--base", required=True, help="base measure (split into equal masses)")
    p.add_argument("--group", nargs="+", action="append", help="one group of measures (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-evals", type=int, default=300)
    p.add_argument("--tol-mass", type=float, default=1e-3)
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fairspace", description="Envy-free and proportional convex partitions.")
    sub = ap.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="compute a partition and its certificate")
    kinds = solve.add_subparsers(dest="kind", required=True)

    p = kinds.add_parser("two-lines", help="disk cut by two chords")
    p.add_argument("--measures", nargs="+", required=True)
    p.add_argument("--center", nargs=2, type=float, default=(0.0, 0.0))
    p.add_argument("--radius", type=float, default=1.0)
    _common(p)
    p.set_defaults(func=solve_two_lines)

    p = kinds.add_parser("nested", help="nested hyperplane cuts")
    p.add_argument("--measures", nargs="+", required=True)
    p.add_argument("--cut", action="append", help="'v1,v2,...:j' cuts piece j orthogonally to v")
    p.add_argument("--space", help="JSON space description instead of --cut")
    _common(p)
    p.set_defaults(func=solve_nested)

    p = kinds.add_parser("power-fixed", help="power diagrams on fixed sites")
    p.add_argument("--measures", nargs="+", required=True)
    p.add_argument("--sites", required=True, help="JSON list of sites")
    p.add_argument("--M", type=float, default=None, help="negative weight scale (default: calibrated)")
    p.add_argument("--calib-eps", type=float, default=None)
    _common(p)
    p.set_defaults(func=solve_power_fixed)

    p = kinds.add_parser("levi", help="translate a fan of cones")
    p.add_argument("--cones", required=True, help="partition JSON of cones with apex at the origin")
    p.add_argument("--measures", nargs="+", required=True)
    p.add_argument("--alphas", nargs="+", type=float, required=True)
    _common(p)
    p.set_defaults(func=solve_levi_cmd)

    p = kinds.add_parser("convex-envyfree", help="simultaneous envy-free power diagram")
    _convex_common(p)
    p.add_argument("--secret", action="store_true", help="groups hold n-1 measures")
    p.add_argument("--eps-schedule", nargs="+", type=float, default=None)
    p.set_defaults(func=solve_convex)

    p = kinds.add_parser("proportional", help="proportional partition for any n")
    _convex_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps-total", type=float, default=0.05)
    p.set_defaults(func=solve_proportional_cmd)

    p = sub.add_parser("verify", help="recheck a certificate from scratch")
    p.add_argument("partition")
    p.add_argument("measures", nargs="+")
    p.add_argument("--cert", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("render", help="draw a planar partition as SVG")
    p.add_argument("partition")
    p.add_argument("--out", required=True)
    p.add_argument("--measures", nargs="*", default=None)
    p.add_argument("--cert", default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("acceptance", help="run the acceptance suite with pytest")
    p.add_argument("--path", default="tests/test_acceptance.py")
    p.set_defaults(func=cmd_acceptance)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
