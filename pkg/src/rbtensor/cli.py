"""Command-line front end: ``rbtensor {scan,find,slope,check-symmetry,simulate}``."""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional, Sequence

from . import dynamics
from .atomic_data import DATA_ENV_VAR, load_scheme
from .exceptions import RbTensorError
from .hamiltonian import (
    HamiltonianCoefficients,
    barred_dot_residual,
    check_rotation_symmetry,
    coefficients_at,
    symmetry_class,
)
from .polarizability import Condition, asymptotic_ratio_slope, find_magic_detunings, scan

DETUNING_HELP = (
    "Detunings are in MHz from the reference transition: F=1 -> F'=1 on D1, "
    "F=1 -> F'=0 on D2. Positive means blue of the transition."
)
AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def _fmt(x: float) -> str:
    return repr(float(x))


def _flag(b: bool) -> str:
    return "true" if b else "false"


def _finite(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return value


def _positive(text: str) -> float:
    value = _finite(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbtensor",
        description="Tensor polarizability of 87Rb D lines and the atom-light protocols it enables.",
        epilog=f"{DETUNING_HELP} Level data: --data PATH, else ${DATA_ENV_VAR}, else the bundled 87Rb file.",
        allow_abbrev=False,
    )
    parser.add_argument("--data", metavar="PATH", help="alternative level-scheme data file")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=f"{help_text}. {DETUNING_HELP}", allow_abbrev=False)
        return p

    line_kw = dict(choices=["d1", "d2"], type=str.lower)

    p = add("scan", "tabulate the polarizability components as CSV")
    p.add_argument("--line", required=True, **line_kw)
    p.add_argument("--min", dest="lo", type=_finite, required=True, metavar="MHZ")
    p.add_argument("--max", dest="hi", type=_finite, required=True, metavar="MHZ")
    p.add_argument("--step", type=_positive, default=1.0, metavar="MHZ")
    p.add_argument("--out", metavar="PATH")

    p = add("find", "locate detunings where a polarizability condition holds")
    p.add_argument("--line", required=True, **line_kw)
    p.add_argument("--condition", required=True, choices=[c.value for c in Condition])
    p.add_argument("--min", dest="lo", type=_finite, required=True, metavar="MHZ")
    p.add_argument("--max", dest="hi", type=_finite, required=True, metavar="MHZ")

    p = add("slope", "asymptotic growth rate of alpha1/alpha2")
    p.add_argument("--line", required=True, **line_kw)

    p = add("check-symmetry", "rotation-symmetry residuals of the coupling at a detuning")
    p.add_argument("--line", required=True, **line_kw)
    p.add_argument("--detuning", type=_finite, required=True, metavar="MHZ")
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = add("simulate", "run an atom-light protocol and print its time series as CSV")
    p.add_argument("--scenario", required=True, choices=[s.value for s in dynamics.Scenario])
    p.add_argument("--kappa", type=_finite, help="dimensionless coupling (default: scenario-specific)")
    p.add_argument("--atoms", type=_positive, default=1e6, metavar="N")
    p.add_argument("--photons", type=_positive, default=1e6, metavar="N")
    p.add_argument("--steps", type=_positive_int, default=dynamics.DEFAULT_STEPS)
    p.add_argument("--line", **line_kw)
    p.add_argument("--detuning", type=_finite, metavar="MHZ")
    p.add_argument("--coefficients", nargs=2, type=_finite, metavar=("A", "B"), help="override (a, b)")
    p.add_argument("--azimuth", type=_finite, default=0.0, help="atom-number: angle of J in the x-y plane (rad)")
    p.add_argument("--out", metavar="PATH")
    return parser


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_scan(args):
    rows = scan(load_scheme(args.line, args.data), args.lo, args.hi, args.step)
    lines = ["delta_ref_mhz,alpha0,alpha1,alpha2,ratio,absorption_flag"]
    for r in rows:
        ratio = "" if r.ratio_1_over_2 is None else _fmt(r.ratio_1_over_2)
        c = r.components
        lines.append(",".join([_fmt(r.delta_ref_mhz), _fmt(c.alpha0_c), _fmt(c.alpha1_c), _fmt(c.alpha2_c), ratio, _flag(r.absorption_flag)]))
    _emit("\n".join(lines) + "\n", args.out)


def _cmd_find(args):
    roots = find_magic_detunings(load_scheme(args.line, args.data), Condition(args.condition), args.lo, args.hi)
    out = ["delta_ref_mhz,condition,absorption_flag"]
    out += [f"{m.delta_ref_mhz:.4f},{m.condition.value},{_flag(m.absorption_flag)}" for m in roots]
    sys.stdout.write("\n".join(out) + "\n")


def _cmd_slope(args):
    slope = asymptotic_ratio_slope(load_scheme(args.line, args.data))
    sys.stdout.write(f"{args.line.upper()} alpha1/alpha2 slope over 50-100 GHz: {slope:.4f} GHz^-1\n")


def _cmd_check_symmetry(args):
    c = coefficients_at(load_scheme(args.line, args.data), args.detuning)
    out = [
        f"{'line':<22}{args.line.upper()}",
        f"{'detuning_mhz':<22}{args.detuning:.4f}",
        f"{'a (SzJz)':<22}{c.a:+.12e}",
        f"{'b (SxJx+SyJy)':<22}{c.b:+.12e}",
        f"{'condition':<22}{symmetry_class(c)}",
        "",
        f"{'axis':<10}{'residual':>22}{'barred residual':>22}",
    ]
    for name, axis in AXES.items():
        r = check_rotation_symmetry(c, axis, args.trials, seed=args.seed)
        rb = check_rotation_symmetry(c, axis, args.trials, barred=True, seed=args.seed)
        out.append(f"{name:<10}{r:>22.6e}{rb:>22.6e}")
    out.append(f"{'barred dot-product residual':<32}{barred_dot_residual(c, args.trials, args.seed):>22.6e}")
    sys.stdout.write("\n".join(out) + "\n")


def _cmd_simulate(args):
    coeffs = HamiltonianCoefficients(*args.coefficients) if args.coefficients else None
    scenario = dynamics.Scenario(args.scenario)
    line = args.line or dynamics.PRESETS[scenario][0]
    scheme = load_scheme(line, args.data) if not coeffs else None
    cfg = dynamics.ScenarioConfig(
        scenario=scenario,
        kappa=args.kappa,
        n_atoms=args.atoms,
        n_photons=args.photons,
        steps=args.steps,
        line=line if not coeffs else None,
        delta_ref_mhz=args.detuning,
        coefficients=coeffs,
        scheme=scheme,
        azimuth=args.azimuth,
    )
    ts = dynamics.run_scenario(cfg)
    _emit(ts.to_csv(), args.out)
    for key, value in ts.summary.items():
        sys.stderr.write(f"# {key} = {_fmt(value)}\n")


COMMANDS = {
    "scan": _cmd_scan,
    "find": _cmd_find,
    "slope": _cmd_slope,
    "check-symmetry": _cmd_check_symmetry,
    "simulate": _cmd_simulate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command in ("scan", "find") and not args.lo < args.hi:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"rbtensor {args.command}: error: --min must be below --max\n")
        return 2
    try:
        COMMANDS[args.command](args)
    except (RbTensorError, ValueError, OSError) as exc:
        sys.stderr.write(f"rbtensor: error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
