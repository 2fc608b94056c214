"""Command-line front end.

Angles are given in degrees on the command line and written in radians.
Exit status: 0 success, 1 domain error, 2 solver failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import ast
import math
import operator
import os
import sys

import numpy as np

from . import __version__
from .errors import DomainError, SolverError
from .gas import GasConstants
from .linsolve import (
    assemble_linearized,
    grid_for,
    kernel_certificate,
    kernel_compute,
    maximum_principle_check,
    n_for_h,
    reflection_corner_fit,
)
from .output import header_fields, header_line, write_csv, write_json
from .pencil import (
    CornerProblem,
    corner_spectrum,
    reflection_corner_beta0,
    shock_wall_corner,
    wall_shock_corner,
    wall_wall_corner,
)
from .perturb import newton_solve
from .polar import convexity_scan, critical_angle, sample_polar, sonic_angle
from .reflection import (
    BASE_FRACTION,
    BASE_THETA_DEG,
    ReflectionParams,
    base_trivial_rr,
    core_from_params,
    transition_curves,
)

EXIT_DOMAIN = 1
EXIT_SOLVER = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def parse_angle(text: str) -> float:
    """Degrees, or a radian expression in ``pi`` such as ``pi``, ``pi/2``, ``3*pi/4``."""
    if "pi" not in text:
        return math.radians(float(text))
    tree = ast.parse(text, mode="eval")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported angle expression {text!r}")

    return ev(tree)


def _angle_arg(text):
    try:
        return parse_angle(text)
    except (ValueError, SyntaxError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _threads() -> int:
    raw = os.environ.get("REFLECTLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--gamma", type=float, default=1.4, help="adiabatic exponent (default 1.4)")
    common.add_argument("--tol", type=float, default=None, help="solver tolerance")
    common.add_argument("--out", default="-", help="output file ('-' for stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    base = argparse.ArgumentParser(add_help=False)
    base.add_argument("--theta-deg", type=float, default=BASE_THETA_DEG, help="wall angle of the base trivial RR")
    base.add_argument("--fraction", type=float, default=BASE_FRACTION, help="|xi_A| / (c3 |cos theta|)")
    base.add_argument("--M1", type=float, default=None, help="incident Mach number (selects the base by M1)")
    base.add_argument("--alpha-deg", type=float, default=None, help="incident angle, checked against the family")

    parser = _Parser(prog="reflectlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"reflectlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("polar", parents=[common], help="shock polar sweep with tau_star and tau_s")
    p.add_argument("--Mu", type=float, required=True, help="upstream Mach number")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--certify", action="store_true", help="also report the minimum convexity certificate")

    p = sub.add_parser("transition", parents=[common], help="detachment and sonic wall angles over M1")
    p.add_argument("--alpha-deg", type=float, default=None, help="incident angle (default: base configuration)")
    p.add_argument("--M1-min", type=float, default=1.5)
    p.add_argument("--M1-max", type=float, default=4.0)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--scan", type=int, default=40, help="theta scan points per M1")

    sub.add_parser("trivial", parents=[common, base], help="build and validate a trivial RR")

    p = sub.add_parser("pencil", parents=[common, base], help="corner pencil spectra")
    p.add_argument("--phi1", type=_angle_arg, help="edge-1 angle (degrees, or an expression in pi)")
    p.add_argument("--phi2", type=_angle_arg, help="edge-2 angle")
    p.add_argument("--bc1", type=_angle_arg, help="boundary-vector angle on edge 1, from the edge")
    p.add_argument("--bc2", type=_angle_arg, help="boundary-vector angle on edge 2, from the edge")
    p.add_argument("--neumann", action="store_true", help="normal derivatives on both edges")
    p.add_argument("--corner", choices=("xi_B", "A-B", "A-S"), help="corner of the base trivial RR")
    p.add_argument("--count", type=int, default=4)

    p = sub.add_parser("linsolve", parents=[common, base], help="kernel, certificate and corner fit")
    p.add_argument("--mesh-h", type=float, default=0.05)
    p.add_argument("--mesh-out", default=None, help="also write the mesh to this file")

    p = sub.add_parser("perturb", parents=[common, base], help="Newton continuation to nearby parameters")
    p.add_argument("--dtheta", type=float, default=0.0, help="wall-angle change (degrees)")
    p.add_argument("--dM1", type=float, default=0.0)
    p.add_argument("--dalpha", type=float, default=0.0, help="incident-angle change (degrees)")
    p.add_argument("--mesh-h", type=float, default=0.1)
    p.add_argument("--max-iter", type=int, default=30)
    return parser


def _base(args, consts):
    if args.M1 is None:
        return base_trivial_rr(consts, args.theta_deg, args.fraction)
    alpha = 0.0 if args.alpha_deg is None else math.radians(args.alpha_deg)
    params = ReflectionParams(args.M1, alpha, math.radians(args.theta_deg), consts.gamma)
    return core_from_params(params, alpha_tol=None if args.alpha_deg is None else 1e-8)


def _emit(args, fields, columns, rows, payload):
    if args.format == "csv":
        write_csv(args.out, columns, rows, fields)
    else:
        write_json(args.out, payload, fields)


def _summary(args, text):
    # data written to stdout keeps it clean: the summary then goes to stderr
    print(text, file=sys.stderr if args.out in (None, "-") else sys.stdout)


def cmd_polar(args, consts):
    curve = sample_polar(args.Mu, args.samples, consts)
    tau_star, beta_star = critical_angle(args.Mu, consts)
    tau_s, beta_s = sonic_angle(args.Mu, consts)
    rows = list(curve.rows())
    fields = header_fields(consts.gamma, Mu=args.Mu, samples=args.samples)
    payload = {"tau_star": tau_star, "beta_star": beta_star, "tau_s": tau_s, "beta_s": beta_s}
    if args.certify:
        payload["convexity_min"] = convexity_scan(curve)
    cols = ("beta_rad", "tau_rad", "vdx", "vdy", "rhoD", "MD", "type")
    _emit(args, fields, cols, rows, {**payload, "rows": [dict(zip(cols, r)) for r in rows]})
    line = f"tau_star={tau_star:.12g},tau_s={tau_s:.12g}"
    if args.certify:
        line += f",convexity_min={payload['convexity_min']:.6g}"
    _summary(args, line)


def cmd_transition(args, consts):
    alpha = (
        base_trivial_rr(consts).params().alpha if args.alpha_deg is None else math.radians(args.alpha_deg)
    )
    grid = np.linspace(args.M1_min, args.M1_max, args.points)
    rows = transition_curves(consts.gamma, alpha, grid, n_scan=args.scan, workers=_threads())
    fields = header_fields(consts.gamma, alpha_rad=alpha, scan=args.scan, xtol=1e-12)
    # the transition table is the one file kept in degrees, as its column names say
    table = [(r.mach1, math.degrees(r.theta_d), math.degrees(r.theta_s), r.status) for r in rows]
    cols = ("M1", "theta_d_deg", "theta_s_deg", "status")
    _emit(args, fields, cols, table, {"alpha": alpha, "rows": [dict(zip(cols, r)) for r in table]})
    ordered = sum(1 for r in rows if r.theta_s > r.theta_d)
    _summary(args, f"points={len(rows)},theta_s>theta_d={ordered}/{len(rows)}")


def trivial_report(trr) -> dict:
    p = trr.params()
    return {
        "params": {"mach1": p.mach1, "alpha": p.alpha, "theta": p.theta},
        "core": {
            "rho3": trr.rho3,
            "xi_a": trr.xi_a,
            "eta_b": trr.eta_b,
            "psi0": trr.psi0,
            "c3": trr.c3,
            "vx": trr.vx,
            "rho2": trr.rho2,
        },
        "reflected_type": trr.reflected_type,
        "beta0": reflection_corner_beta0(trr).beta0,
        "max_pseudo_mach": trr.max_pseudo_mach,
        "rh_residual_max": float(np.max(np.abs(trr.rh_residual(np.linspace(0.0, trr.eta_b, 65))))),
    }


def cmd_trivial(args, consts):
    trr = _base(args, consts)
    rep = trivial_report(trr)
    fields = header_fields(consts.gamma)
    flat = [(f"{k}.{kk}", vv) for k, v in rep.items() if isinstance(v, dict) for kk, vv in v.items()]
    flat += [(k, v) for k, v in rep.items() if not isinstance(v, dict)]
    _emit(args, fields, ("key", "value"), flat, rep)
    p = rep["params"]
    _summary(
        args,
        f"M1={p['mach1']:.10g},alpha_deg={math.degrees(p['alpha']):.10g},"
        f"type={rep['reflected_type']},beta0={rep['beta0']:.10g}"
    )


def cmd_pencil(args, consts):
    if args.corner:
        trr = _base(args, consts)
        builders = {"xi_B": lambda: shock_wall_corner(trr.reflected), "A-B": lambda: wall_wall_corner(trr), "A-S": lambda: wall_shock_corner(trr)}
        problem = builders[args.corner]()
        spec = corner_spectrum(problem, args.count)
    else:
        if args.phi1 is None or args.phi2 is None:
            raise DomainError("need --phi1 and --phi2 (or --corner)")
        if args.neumann:
            bc1 = bc2 = 0.5 * math.pi
        elif args.bc1 is None or args.bc2 is None:
            raise DomainError("need --bc1 and --bc2, or --neumann")
        else:
            bc1, bc2 = args.bc1, args.bc2
        e1 = np.array([math.cos(args.phi1), math.sin(args.phi1)])
        e2 = np.array([math.cos(args.phi2), math.sin(args.phi2)])

        def rot(v, a):
            return np.array([math.cos(a) * v[0] - math.sin(a) * v[1], math.sin(a) * v[0] + math.cos(a) * v[1]])

        if not 0 < args.phi2 - args.phi1 < 2 * math.pi:
            raise DomainError("need phi1 < phi2 < phi1 + 2 pi")
        spec = corner_spectrum(CornerProblem(np.eye(2), e1, e2, rot(e1, bc1), rot(e2, bc2)), args.count)
    fields = header_fields(consts.gamma, zero_tol=1e-12)
    _emit(args, fields, ("beta", "mult"), [(float(b), m) for b, m in spec.betas], spec.to_json())
    nonneg = sorted(b for b, _ in spec.betas if b >= 0)
    _summary(args, f"beta0={nonneg[0]:.12g},beta1={nonneg[1]:.12g}")


def cmd_linsolve(args, consts):
    trr = _base(args, consts)
    n = n_for_h(args.mesh_h)
    grid = grid_for(trr, n)
    system = assemble_linearized(trr, grid)
    _, gap = kernel_certificate(system)
    fld = kernel_compute(system)
    mp = maximum_principle_check(fld)
    fit = reflection_corner_fit(system, fld)
    beta0 = reflection_corner_beta0(trr).beta0
    mesh = grid.mesh()
    fields = header_fields(consts.gamma, n=n, h=mesh.h, gap_threshold=1e2)
    report = {
        "n": n,
        "h": mesh.h,
        "gap": gap,
        "normalization_xi_b": fld.at_xi_b,
        "max_principle_ok": mp.ok,
        "fitted_exponent": fit.exponent,
        "fit_ci": list(fit.ci),
        "beta0": beta0,
        "field": [list(r) for r in fld.rows()],
    }
    _emit(args, fields, ("x", "y", "psi_prime"), list(fld.rows()), report)
    if args.mesh_out:
        mesh.dump(args.mesh_out, header_line(fields))
    _summary(
        args,
        f"n={n},gap={gap:.4g},beta0={beta0:.6g},fitted={fit.exponent:.6g},"
        f"max_principle={'ok' if mp.ok else 'violated'}"
    )


def cmd_perturb(args, consts):
    trr = _base(args, consts)
    p0 = trr.params()
    params = p0.replace(
        theta=p0.theta + math.radians(args.dtheta),
        mach1=p0.mach1 + args.dM1,
        alpha=p0.alpha + math.radians(args.dalpha),
    )
    n = n_for_h(args.mesh_h)
    tol = 1e-8 if args.tol is None else args.tol
    res = newton_solve(trr, params, n=n, tol=tol, max_iter=args.max_iter)
    fields = header_fields(consts.gamma, n=n, tol=tol, max_iter=args.max_iter)
    _emit(args, fields, ("x", "y", "psi"), list(res.field.rows()), res.to_json())
    _summary(
        args,
        f"iterations={res.iterations},residual={res.residual_history[-1]:.3g},"
        f"displacement={res.displacement:.6g},weak={res.type_flags['weak']},transonic={res.type_flags['transonic']}"
    )


COMMANDS = {
    "polar": cmd_polar,
    "transition": cmd_transition,
    "trivial": cmd_trivial,
    "pencil": cmd_pencil,
    "linsolve": cmd_linsolve,
    "perturb": cmd_perturb,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        consts = GasConstants(args.gamma)
        COMMANDS[args.command](args, consts)
    except DomainError as exc:
        print(f"reflectlab: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except SolverError as exc:
        print(f"reflectlab: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
