"""Command-line interface.

Subcommands:

* ``run``        execute a configured simulation and write its outputs;
* ``trace``      integrate a single characteristic and tabulate invariants;
* ``potential``  tabulate the confining potential, its cap, and the field;
* ``bounds``     print the a-priori constants timeline (C, C_tilde, K);
* ``check``      re-verify every margin for a stored snapshot.

Exit codes: 0 success, 1 a verified bound failed (negative margin, leaked
support, FAIL line), 2 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from typing import List, Optional

import numpy as np

from .config import RunConfig, parse_config_file
from .domain import AnnulusSpec, NormsBundle
from .errors import ConfigError, RingError
from .potential import (
    AprioriConstants,
    PotentialSpec,
    base_potential,
    capped_potential,
    confinement_threshold,
    external_field_profile,
    truncation_level,
)
from .runner import build_problem, check_snapshot, load_snapshot, run_with_output
from .transport import CharState, trace_particle

__all__ = ["main"]

logger = logging.getLogger(__name__)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _emit_rows(header: List[str], rows, out: Optional[str]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _cmd_run(args: argparse.Namespace) -> int:
    config = parse_config_file(args.config)
    overrides = {}
    if args.out is not None:
        overrides["directory"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.cadence is not None:
        overrides["cadence"] = args.cadence
    if args.force_unit_cfl_off:
        # Testing-only escape hatch: halve the step so dt != dr.  Fields-on
        # runs then abort inside the wave stepper, demonstrating the unit-CFL
        # enforcement; pure-transport runs proceed at the smaller step.
        width = config.r2 - config.r1
        overrides["dt_override"] = 0.5 * width / config.nr
    if overrides:
        config = dataclasses.replace(config, **overrides)

    result = run_with_output(config, config.directory, backend=args.backend)
    last = result.records[-1]
    print(f"steps={result.problem.n_steps} dt={_fmt(result.problem.dt)} "
          f"t_end={_fmt(result.problem.t_end)}")
    print(f"charge={_fmt(last.charge)} "
          f"pre_fixer_drift_accum={_fmt(last.pre_fixer_drift_accum)} "
          f"post_fixer_drift={_fmt(last.post_fixer_drift)}")
    print(f"leaks={result.leaks_total}")
    margins_ok = not any(rec.failed for rec in result.records)
    print(f"margins_ok={'true' if margins_ok else 'false'}")
    if result.oracle_rows:
        print(f"oracle_max_error={_fmt(max(e for _, e in result.oracle_rows))}")
    print(f"output={config.directory}")
    return result.exit_code


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------

def _cmd_trace(args: argparse.Namespace) -> int:
    if args.mode == "snapshot":
        if not args.snapshot:
            raise ConfigError(["trace mode snapshot requires --snapshot DIR"])
        snap = load_snapshot(args.snapshot)
        ann = snap.grid.annulus
        spec, constants, t_field = snap.potential, snap.constants, snap.time

        def fields(t: float, rr: float):
            er = float(np.interp(rr, snap.grid.r, snap.er))
            eth = float(np.interp(rr, snap.grid.r, snap.etheta))
            bb = float(np.interp(rr, snap.grid.r, snap.b))
            if spec is not None:
                bb += float(external_field_profile(
                    spec, constants, ann.delta0, t_field, np.array([rr]))[0])
            return er, eth, bb

    else:
        if args.config:
            prob = build_problem(parse_config_file(args.config))
            ann, spec, constants = prob.annulus, prob.potential, prob.constants
        else:
            ann = AnnulusSpec(1.0, 3.0, 0.5, 0.25)
            spec = PotentialSpec("explicit-csc", ann, ann.delta)
            constants = AprioriConstants(ann, NormsBundle(
                etheta0_sup=1.0, b0_sup=1.0, ebtheta_sup=1.0, f0_l1=1.0,
                rp0f0_l1=1.0, f0_linf=1.0, lam=0.0, m0=1.0,
            ))
        if args.mode == "vacuum":
            def fields(t: float, rr: float):
                return 0.0, 0.0, 0.0
        else:  # external-only
            if spec is None:
                raise ConfigError(
                    ["trace mode external-only needs a configured potential"]
                )
            t_field = args.field_time

            def fields(t: float, rr: float):
                bb = float(external_field_profile(
                    spec, constants, ann.delta0, t_field, np.array([rr]))[0])
                return 0.0, 0.0, bb

    ic = CharState(args.r, args.pr, args.ptheta)
    traj = trace_particle(ann, ic, fields, args.t0, args.t1,
                          tol=args.tol, dt=args.dt)

    rows = []
    for i, t in enumerate(traj.times):
        rr, pr, pt = traj.r[i], traj.pr[i], traj.ptheta[i]
        pnorm = math.hypot(pr, pt)
        p0 = math.sqrt(1.0 + pr * pr + pt * pt)
        if args.mode == "vacuum":
            canonical = rr * pt
        elif args.mode == "external-only":
            psi = float(capped_potential(
                spec, constants, ann.delta0, t_field, np.array([rr]))[0])
            canonical = rr * (pt + psi)
        else:
            canonical = float("nan")
        rows.append((t, rr, pr, pt, p0, pnorm, canonical))
    _emit_rows(["t", "r", "pr", "ptheta", "p0", "pnorm", "canonical"],
               rows, args.out)
    if traj.boundary_contact:
        print(f"boundary contact at t={_fmt(traj.contact_time)}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# potential
# ---------------------------------------------------------------------------

def _cmd_potential(args: argparse.Namespace) -> int:
    if args.config:
        prob = build_problem(parse_config_file(args.config))
        ann, spec, constants = prob.annulus, prob.potential, prob.constants
    else:
        ann = AnnulusSpec(1.0, 3.0, 0.5, 0.25)
        spec = PotentialSpec("explicit-csc", ann, ann.delta)
        constants = AprioriConstants(ann, NormsBundle(
            etheta0_sup=1.0, b0_sup=1.0, ebtheta_sup=1.0, f0_l1=1.0,
            rp0f0_l1=1.0, f0_linf=1.0, lam=0.0, m0=1.0,
        ))
    if spec is None:
        raise ConfigError(["potential tabulation needs a configured potential"])

    t = args.t
    lbar = truncation_level(spec, constants, ann.delta0, t)
    try:
        cs = confinement_threshold(spec, constants, ann.delta0, t)
    except RingError:
        cs = float("nan")
    tiny = 1e-13 * ann.width
    r = np.linspace(ann.r1 + tiny, ann.r2 - tiny, args.nodes)
    psi_base = base_potential(spec, r)
    psi_ext = capped_potential(spec, constants, ann.delta0, t, r)
    b_ext = external_field_profile(spec, constants, ann.delta0, t, r)
    rows = ((r[i], psi_base[i], psi_ext[i], b_ext[i], lbar, cs)
            for i in range(r.size))
    _emit_rows(["r", "psi_base", "psi_ext", "b_ext", "lbar", "cs"], rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

def _cmd_bounds(args: argparse.Namespace) -> int:
    width = args.r2 - args.r1
    ann = AnnulusSpec(args.r1, args.r2, 0.25 * width, 0.125 * width)
    norms = NormsBundle(
        etheta0_sup=args.etheta0, b0_sup=args.b0, ebtheta_sup=args.ebtheta,
        f0_l1=args.f0l1, rp0f0_l1=args.rp0f0, f0_linf=args.f0linf,
        lam=args.lam, m0=args.m0,
    )
    constants = AprioriConstants(ann, norms)
    for t in args.t:
        print(
            f"t={_fmt(t)} transits={constants.transit_count(t)} "
            f"C={_fmt(constants.growth_rate(t))} "
            f"C_tilde={_fmt(constants.field_coeff(t))} "
            f"K={_fmt(constants.bar_gain(t))}"
        )
    return 0


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def _cmd_check(args: argparse.Namespace) -> int:
    _, lines, code = check_snapshot(args.snapshot)
    for line in lines:
        print(line)
    return code


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringkinetics",
        description="Deterministic annulus plasma transport with verified bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured simulation")
    p_run.add_argument("--config", required=True, help="path to a config file")
    p_run.add_argument("--out", help="output directory (overrides [output])")
    p_run.add_argument("--seed", type=int, help="RNG seed override")
    p_run.add_argument("--cadence", type=int, help="output cadence override")
    p_run.add_argument(
        "--force-unit-cfl-off", action="store_true",
        help="testing only: halve dt so the unit-CFL coupling is broken",
    )
    p_run.add_argument(
        "--backend", choices=["auto", "numba", "numpy"],
        help="kernel backend override (default: RINGKINETICS_BACKEND or auto)",
    )
    p_run.set_defaults(func=_cmd_run)

    p_tr = sub.add_parser("trace", help="integrate one characteristic")
    p_tr.add_argument("--r", type=float, required=True)
    p_tr.add_argument("--pr", type=float, required=True)
    p_tr.add_argument("--ptheta", type=float, required=True)
    p_tr.add_argument("--t0", type=float, default=0.0)
    p_tr.add_argument("--t1", type=float, required=True)
    p_tr.add_argument("--tol", type=float, default=1e-8)
    p_tr.add_argument("--dt", type=float, default=None)
    p_tr.add_argument(
        "--mode", choices=["vacuum", "external-only", "snapshot"],
        default="vacuum",
    )
    p_tr.add_argument("--config", help="config file supplying domain/potential")
    p_tr.add_argument("--snapshot", help="snapshot directory (mode snapshot)")
    p_tr.add_argument(
        "--field-time", type=float, default=0.0,
        help="time at which the external-field cap is frozen",
    )
    p_tr.add_argument("--out", help="CSV output path (default stdout)")
    p_tr.set_defaults(func=_cmd_trace)

    p_pot = sub.add_parser("potential", help="tabulate the confining potential")
    p_pot.add_argument("--config", help="config file supplying domain/potential")
    p_pot.add_argument("--t", type=float, default=0.0)
    p_pot.add_argument("--nodes", type=int, default=257)
    p_pot.add_argument("--out", help="CSV output path (default stdout)")
    p_pot.set_defaults(func=_cmd_potential)

    p_b = sub.add_parser("bounds", help="print the a-priori constants timeline")
    p_b.add_argument("--r1", type=float, default=1.0)
    p_b.add_argument("--r2", type=float, default=3.0)
    p_b.add_argument("--etheta0", type=float, default=1.0)
    p_b.add_argument("--b0", type=float, default=1.0)
    p_b.add_argument("--ebtheta", type=float, default=1.0)
    p_b.add_argument("--f0l1", type=float, default=1.0)
    p_b.add_argument("--rp0f0", type=float, default=1.0)
    p_b.add_argument("--f0linf", type=float, default=1.0)
    p_b.add_argument("--lam", type=float, default=0.0)
    p_b.add_argument("--m0", type=float, default=1.0)
    p_b.add_argument(
        "--t", type=float, nargs="+", default=[1.0],
        help="one or more evaluation times",
    )
    p_b.set_defaults(func=_cmd_bounds)

    p_ck = sub.add_parser("check", help="re-verify a stored snapshot")
    p_ck.add_argument("--snapshot", required=True)
    p_ck.set_defaults(func=_cmd_check)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return 2
    except RingError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
