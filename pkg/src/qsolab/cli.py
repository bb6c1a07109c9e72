"""Command-line front end.

Every subcommand prints a JSON summary on stdout. ``--out PATH`` also writes
the main artifact: JSON for ``validate``, ``check``, ``fixed``, ``omega`` and
``gallery --export``; CSV for ``iterate`` and ``cesaro`` (their JSON summary
goes next to it, at ``PATH`` with suffix ``.json``).

Exit codes::

    0  success / CONSISTENT
    2  operator violates the stochasticity constraints
    3  unreadable or ill-formed input, unknown name, parameter out of range
    4  REFUTED_EXACT
    5  REFUTED_SAMPLED
    6  NO_CONVERGENCE
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .dissipativity import (Verdict, certify_sampled, check_bistochastic_sampled,
                            check_vertex_rows, classify_form, extract_alpha_partition)
from .dynamics import (CLUSTER_RADIUS, FP_TOL, TAIL_FRACTION, cesaro, cesaro_subsequence,
                       find_fixed_points, iterate, log_schedule, omega_estimate, phi_series,
                       pow2_schedule, tail_schedule)
from .errors import NoConvergence, OperatorValidationError, QsoError
from .gallery import gallery, roster
from .operators import EPS_STOCH, OperatorSpec, to_json_dict, validate
from .simplex import EPS_CMP, SimplexPoint, sample_uniform

DEFAULT_SEED = 0x5EED_D15A

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_INPUT = 3
VERDICT_EXIT = {Verdict.CONSISTENT: 0, Verdict.REFUTED_EXACT: 4, Verdict.REFUTED_SAMPLED: 5}
EXIT_NO_CONVERGENCE = 6


def _parse_params(items) -> dict:
    params = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise QsoError(f"--param expects KEY=VALUE, got {item!r}")
        params[key.strip()] = val.strip()
    return params


def load_source(args) -> OperatorSpec:
    if args.file:
        if args.param:
            raise QsoError("--param only applies to --gallery")
        return io.load_operator(args.file)
    if args.gallery:
        return gallery(args.gallery, _parse_params(args.param))
    raise QsoError("give --gallery NAME or --file PATH")


def parse_x0(text: str, m: int, seed: int) -> SimplexPoint:
    text = text.strip()
    if text == "barycenter":
        return SimplexPoint.barycenter(m)
    if text == "random":
        return sample_uniform(m, seed)
    if text.startswith("vertex:"):
        return SimplexPoint.vertex(m, int(text.split(":", 1)[1]))
    try:
        coords = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise QsoError(f"cannot parse --x0 {text!r}") from exc
    if len(coords) != m:
        raise QsoError(f"--x0 has {len(coords)} coordinates, operator has m={m}")
    return SimplexPoint(coords)


def _emit(args, summary: dict, artifact: Optional[str] = None) -> None:
    text = io.dumps(summary)
    if args.out:
        out = Path(args.out)
        if artifact is None:
            io.write_atomic(out, text)
        else:
            io.write_atomic(out, artifact)
            io.write_atomic(out.with_suffix(".json"), text)
    sys.stdout.write(text)


def _workers() -> int:
    env = os.environ.get("QSO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _phi_excluded(op: OperatorSpec, override: Optional[str]) -> frozenset:
    if override:
        return frozenset(int(v) for v in override.split(","))
    if op.degree == 2 and all(r.passed for r in check_vertex_rows(op)):
        excluded = classify_form(op, extract_alpha_partition(op)).lyapunov_excluded
        if excluded:
            return excluded
    return frozenset({1})


# -- commands ---------------------------------------------------------------

def cmd_validate(args) -> int:
    if args.file:
        try:
            op = io.load_operator(args.file)
        except OperatorValidationError as exc:
            _emit(args, {"valid": False, "violations": exc.violations})
            return EXIT_VIOLATION
    else:
        op = load_source(args)
    try:
        validate(op.p, tol=args.eps_stoch)
    except OperatorValidationError as exc:
        _emit(args, {"valid": False, "name": op.name, "violations": exc.violations})
        return EXIT_VIOLATION
    _emit(args, {"valid": True, "name": op.name, "m": op.m, "degree": op.degree, "violations": []})
    return EXIT_OK


def cmd_check(args) -> int:
    op = load_source(args)
    if args.reverse:
        rep = check_bistochastic_sampled(op, args.n, args.eps_cmp, args.seed)
    else:
        rep = certify_sampled(op, args.n, args.eps_cmp, args.seed, args.eps_stoch)
    _emit(args, {"name": op.name, **io.dissipativity_to_dict(rep)})
    return VERDICT_EXIT[rep.verdict]


def cmd_iterate(args) -> int:
    op = load_source(args)
    x0 = parse_x0(args.x0, op.m, args.seed)
    traj = iterate(op, x0, args.n, renormalize=not args.no_renormalize)
    excluded = _phi_excluded(op, args.phi_exclude)
    phi = phi_series(traj.states, excluded)
    summary = {
        "name": op.name, "n": args.n, "x0": x0, "engine": traj.engine,
        "renormalized": traj.renormalized, "mass_defect_max": traj.mass_defect_max,
        "phi_excluded": sorted(excluded), "final": traj.states[-1],
    }
    _emit(args, summary, io.trajectory_csv(traj, phi))
    return EXIT_OK


def _schedule(spec: str, n_max: int):
    if spec == "pow2":
        return pow2_schedule(n_max)
    if spec == "tail":
        return tail_schedule(n_max)
    if spec.startswith("log:"):
        return log_schedule(int(float(spec[4:])), n_max)
    raise QsoError(f"unknown schedule {spec!r} (pow2, tail, log:LO)")


def cmd_cesaro(args) -> int:
    op = load_source(args)
    x0 = parse_x0(args.x0, op.m, args.seed)
    res = cesaro(op, x0, args.n, args.tol, _schedule(args.schedule, args.n))
    summary = {"name": op.name, "x0": x0, "schedule": args.schedule, **io.cesaro_summary(res)}
    if args.subsequence:
        idx = [int(v) for v in args.subsequence.split(",")]
        summary["subsequence"] = idx
        summary["subsequence_mean"] = cesaro_subsequence(op, x0, idx)
    _emit(args, summary, io.cesaro_csv(res))
    return EXIT_OK


def cmd_fixed(args) -> int:
    op = load_source(args)
    try:
        fps = find_fixed_points(op, args.starts, args.fp_tol, args.seed, workers=_workers())
    except NoConvergence as exc:
        _emit(args, {"name": op.name, "error": exc.code, "message": str(exc)})
        return EXIT_NO_CONVERGENCE
    summary = {
        "name": op.name,
        "count": len(fps),
        "continuum": any(fp.continuum for fp in fps),
        "fixed_points": [io.fixed_point_to_dict(fp) for fp in fps],
    }
    _emit(args, summary)
    return EXIT_OK


def cmd_omega(args) -> int:
    op = load_source(args)
    x0 = parse_x0(args.x0, op.m, args.seed)
    traj = iterate(op, x0, args.n)
    om = omega_estimate(traj, args.tail_fraction, args.cluster_radius)
    _emit(args, {"name": op.name, "x0": x0, "n": args.n, **io.omega_to_dict(om)})
    return EXIT_OK


def cmd_gallery(args) -> int:
    if args.export:
        op = gallery(args.export, _parse_params(args.param))
        _emit(args, to_json_dict(op))
        return EXIT_OK
    _emit(args, {"operators": roster()})
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsolab", description="Dissipative quadratic/cubic stochastic operators.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_operator=True):
        if needs_operator:
            src = p.add_mutually_exclusive_group()
            src.add_argument("--gallery", metavar="NAME")
            src.add_argument("--file", metavar="PATH")
            p.add_argument("--param", action="append", metavar="KEY=VALUE", help="gallery parameter (repeatable)")
        p.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED)
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--eps-cmp", type=float, default=EPS_CMP)
        p.add_argument("--eps-stoch", type=float, default=EPS_STOCH)

    p = sub.add_parser("validate", help="check the stochasticity constraints")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("check", help="necessary conditions plus sampled search for Vx not majorizing x")
    common(p)
    p.add_argument("-n", type=int, default=10_000, help="samples per phase")
    p.add_argument("--reverse", action="store_true", help="test Vx ≺ x (bistochastic direction) instead")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("iterate", help="write a trajectory as CSV")
    common(p)
    p.add_argument("-n", type=int, default=1000)
    p.add_argument("--x0", default="barycenter")
    p.add_argument("--no-renormalize", action="store_true")
    p.add_argument("--phi-exclude", metavar="I,J")
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("cesaro", help="Cesàro means along a trajectory")
    common(p)
    p.add_argument("-n", type=int, default=100_000, help="number of iterates averaged")
    p.add_argument("--x0", default="barycenter")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--schedule", default="pow2", help="pow2, tail, or log:LO")
    p.add_argument("--subsequence", metavar="N1,N2,...")
    p.set_defaults(func=cmd_cesaro)

    p = sub.add_parser("fixed", help="locate and classify fixed points")
    common(p)
    p.add_argument("--starts", type=int, default=32)
    p.add_argument("--fp-tol", type=float, default=FP_TOL)
    p.set_defaults(func=cmd_fixed)

    p = sub.add_parser("omega", help="estimate the omega-limit set of one start")
    common(p)
    p.add_argument("-n", type=int, default=10_000)
    p.add_argument("--x0", default="barycenter")
    p.add_argument("--tail-fraction", type=float, default=TAIL_FRACTION)
    p.add_argument("--cluster-radius", type=float, default=CLUSTER_RADIUS)
    p.set_defaults(func=cmd_omega)

    p = sub.add_parser("gallery", help="list or export named operators")
    common(p, needs_operator=False)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--list", action="store_true")
    group.add_argument("--export", metavar="NAME")
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_gallery)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("eps_cmp", "eps_stoch"):
        if getattr(args, name) <= 0:
            sys.stderr.write(f"--{name.replace('_', '-')} must be positive\n")
            return EXIT_INPUT
    try:
        return args.func(args)
    except OperatorValidationError as exc:
        sys.stderr.write(f"{exc.code}: {exc}\n")
        return EXIT_VIOLATION
    except QsoError as exc:
        sys.stderr.write(f"{exc.code}: {exc}\n")
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
