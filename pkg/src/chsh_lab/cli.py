"""Command-line front end.

Exit codes: 0 on a completed analysis (whatever the verdict), 2 on invalid
input, 1 when an internal consistency check fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Sequence

from . import mc_sim, two_valued
from .errors import ChshLabError, InvariantViolation
from .realizability import joint_feasible, remark_gap
from .settings import PAIR_KEYS, PAIRS, AngleConfig, CondTableFamily, Convention
from .unifying import build_unifying_space, conditional_chsh, verify_pi_identity


class InputError(ChshLabError):
    pass


def _decimal(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a decimal number: {text!r}") from exc


def _add_angles(p: argparse.ArgumentParser, required: bool) -> None:
    g = p.add_argument_group("analyzer angles (radians)")
    for flag, label in (("--t1", "A setting 1"), ("--t2", "A setting 2"), ("--u1", "B setting 1"), ("--u2", "B setting 2")):
        g.add_argument(flag, type=float, required=required, help=label)
    g.add_argument("--convention", choices=[c.value for c in Convention], default=Convention.FULL_ANGLE.value,
                   help="full: cos^2(d), half: cos^2(d/2) (default: full)")


def _add_family_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("tables", nargs="?", help="family JSON file ('-' for stdin)")
    _add_angles(p, required=False)


def _angles(args: argparse.Namespace) -> AngleConfig:
    return AngleConfig(args.t1, args.t2, args.u1, args.u2, Convention(args.convention))


def _load_family(args: argparse.Namespace) -> CondTableFamily:
    given = [getattr(args, k) is not None for k in ("t1", "t2", "u1", "u2")]
    if args.tables is not None:
        if any(given):
            raise InputError("give either a tables file or angle flags, not both")
        try:
            text = sys.stdin.read() if args.tables == "-" else open(args.tables, encoding="utf-8").read()
        except OSError as exc:
            raise InputError(f"cannot read {args.tables}: {exc.strerror}") from exc
        return CondTableFamily.from_json(text)
    if not all(given):
        raise InputError("need a tables file or all four of --t1 --t2 --u1 --u2")
    return _angles(args).family()


def _emit(obj: dict) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_qm(args: argparse.Namespace) -> None:
    family = _angles(args).family()
    out = family.to_dict()
    out["convention"] = args.convention
    out["correlations"] = {PAIR_KEYS[p]: float(c) for p, c in zip(PAIRS, family.correlations())}
    _emit(out)


def cmd_unify(args: argparse.Namespace) -> None:
    us = build_unifying_space(_load_family(args))
    pi = verify_pi_identity(us)
    if not pi.ok:
        raise InvariantViolation(f"conditional-expectation identity residual {float(pi.max_residual)!r}")
    _emit({
        "space": us.to_dict(),
        "pi_identity": pi.to_dict(),
        "unconditional_chsh": us.chsh().to_dict(),
        "conditional_chsh": conditional_chsh(us).to_dict(),
    })


def cmd_simulate(args: argparse.Namespace) -> None:
    family = _load_family(args)
    config = mc_sim.McConfig(family, trials=args.trials, seed=args.seed, batch_size=args.batch_size,
                             balanced=args.balanced)
    log = mc_sim.run_experiment(config, threads=args.threads)
    if args.csv:
        with open(args.csv, "w", encoding="ascii", newline="") as fh:
            log.write_csv(fh)
    est = mc_sim.estimate(log)
    out = {
        "config": {"trials": config.trials, "seed": config.seed, "batch_size": config.batch_size,
                   "balanced": config.balanced},
        "estimate": est.to_dict(),
        "analytic_conditional": {PAIR_KEYS[p]: c for p, c in mc_sim.analytic_conditionals(family).items()},
    }
    if all(est.counts.values()):
        out["chsh"] = mc_sim.chsh_from_estimates(est).to_dict()
    _emit(out)


def cmd_two_valued(args: argparse.Namespace) -> None:
    if args.target_corr is not None:
        if args.x is not None or args.y is not None:
            raise InputError("--target-corr excludes --x/--y")
        params = two_valued.solve_xy(args.target_corr)
    elif args.x is not None and args.y is not None:
        params = two_valued.TwoValuedParams(args.x, args.y)
    else:
        raise InputError("need --x and --y, or --target-corr")
    out = two_valued.report(two_valued.build_two_valued_space(params))
    if args.target_corr is not None:
        out["target_corr"] = float(args.target_corr)
    _emit(out)


def cmd_realizable(args: argparse.Namespace) -> None:
    family = _load_family(args)
    if args.explain:
        _emit(remark_gap(family).to_dict())
    else:
        _emit(joint_feasible(family).to_dict())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chsh-lab", description="CHSH statistics on gated probability spaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qm", help="QM outcome tables for four analyzer angles")
    _add_angles(p, required=True)
    p.set_defaults(func=cmd_qm)

    p = sub.add_parser("unify", help="build the 16-atom gated space and check conditional correlations")
    _add_family_source(p)
    p.set_defaults(func=cmd_unify)

    p = sub.add_parser("simulate", help="Monte Carlo run of the gated experiment")
    _add_family_source(p)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=mc_sim.DEFAULT_BATCH)
    p.add_argument("--balanced", action="store_true", help="open each pair exactly trials/4 times")
    p.add_argument("--threads", type=int, default=None, help=f"overrides ${mc_sim.THREADS_ENV}")
    p.add_argument("--csv", metavar="PATH", help="write the per-trial log here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("two-valued", help="the +-1 valued sixteen-outcome model")
    p.add_argument("--x", type=_decimal)
    p.add_argument("--y", type=_decimal)
    p.add_argument("--target-corr", type=_decimal, help="solve for x, y giving this conditional correlation")
    p.set_defaults(func=cmd_two_valued)

    p = sub.add_parser("realizable", help="does one joint distribution reproduce all four tables?")
    _add_family_source(p)
    p.add_argument("--explain", action="store_true", help="add the single-space interpretation")
    p.set_defaults(func=cmd_realizable)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ChshLabError as exc:
        print(f"chsh-lab: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"chsh-lab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
