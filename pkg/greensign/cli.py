"""Command-line entry point: ``greensign {eval,matrix,region,solve,check}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import TYPE_CHECKING, NoReturn

from . import const, invariants, monotone
from .assembly import QuadratureMode
from .closed_form import KernelKind
from .commands import COMMANDS
from .config import RunConfig, load_config_file
from .errors import (
    ClassificationGateError,
    DomainError,
    GreenSignError,
    MonotonicityViolationError,
    NonFiniteResultError,
    SingularMatrixError,
    SingularParameterError,
)
from .sign_region import Strategy
from .version import __version__

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = logging.getLogger(__name__)

EXIT_CODES: list[tuple[type[GreenSignError], int]] = [
    (SingularParameterError, const.EXIT_SINGULAR_PARAMETER),
    (SingularMatrixError, const.EXIT_SINGULAR_MATRIX),
    (ClassificationGateError, const.EXIT_GATE),
    (MonotonicityViolationError, const.EXIT_MONOTONICITY),
    (NonFiniteResultError, const.EXIT_NON_FINITE),
]

# config file keys that differ from the option destinations
CONFIG_ALIASES = {"M": "big_m", "period": "T", "lambda": "lam", "M_range": "big_m_range"}


class ArgumentParser(argparse.ArgumentParser):
    """Parser whose usage errors exit with the documented usage code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(const.EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("-m", type=float, help="coefficient of v(-t) (v(t) for the ODE)")
    common.add_argument(
        "-M",
        "--big-m",
        dest="big_m",
        type=float,
        default=0.0,
        help="coefficient of v([t])",
    )
    common.add_argument("-T", dest="T", type=float, default=1.0, help="half-length of the interval")
    common.add_argument(
        "--kernel",
        choices=[k.value for k in KernelKind],
        default=KernelKind.REFLECTION_PIECEWISE.value,
    )
    common.add_argument(
        "--quadrature",
        choices=[q.value for q in QuadratureMode],
        default=QuadratureMode.ANALYTIC_PREFERRED.value,
    )
    common.add_argument("--quad-rel-tol", type=float, default=const.QUAD_REL_TOL)
    common.add_argument("--quad-abs-tol", type=float, default=const.QUAD_ABS_TOL)
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("-o", "--output", type=Path, help="file to write instead of stdout")
    common.add_argument(
        "--threads",
        type=int,
        help=f"worker count, defaults to ${const.THREADS_ENV} or the number of CPUs",
    )
    return common


def build_parser() -> ArgumentParser:
    """Top-level parser with one subparser per command."""
    parser = ArgumentParser(
        prog="greensign",
        description="Green's functions of periodic problems with reflection and piecewise "
        "constant arguments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, help="TOML file of option defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    common = _common()
    subparsers = {
        name: sub.add_parser(name, parents=[common], help=command.help_text)
        for name, command in COMMANDS.items()
    }

    ev = subparsers["eval"]
    ev.add_argument("--t", nargs="+", help="t values, with optional sides: 0.5 0- 1+ 0--")
    ev.add_argument("--s", nargs="+", help="s values, with optional sides")
    ev.add_argument("--line", help="hold one coordinate fixed: t=VALUE or s=VALUE")
    ev.add_argument("--points", dest="line_points", type=int, default=201)
    ev.add_argument("--integrate", action="store_true", help="integrate over s instead")

    region = subparsers["region"]
    region.add_argument("--m-range", nargs=2, type=float, default=[-1.0, 1.0])
    region.add_argument(
        "--M-range",
        "--big-m-range",
        dest="big_m_range",
        nargs=2,
        type=float,
        default=[-1.0, 1.0],
    )
    region.add_argument(
        "--resolution",
        nargs=2,
        type=int,
        default=[const.LATTICE_M, const.LATTICE_BIG_M],
    )
    region.add_argument("--strategy", choices=[s.value for s in Strategy])
    region.add_argument("--boundary", action="store_true", help="also write closed-form edges")
    region.add_argument("--audit", action="store_true", help="audit where positive minima sit")

    solve = subparsers["solve"]
    solve.add_argument("--f", choices=list(monotone.BUILTINS), help="built-in right-hand side")
    solve.add_argument("--lambda", dest="lam", type=float, default=0.0)
    solve.add_argument("--n1", type=int, default=const.SOLVER_GRID_N)
    solve.add_argument("--iters", type=int, default=const.SOLVER_MAX_ITER)
    solve.add_argument("--tol", type=float, default=const.SOLVER_TOL)
    solve.add_argument("--negative", action="store_true", help="negative kernel, alpha <= beta")
    solve.add_argument("--literal", action="store_true", help="f(s, v(s), v([s])) in the operator")
    solve.add_argument("--no-gate", action="store_true", help="skip the kernel sign check")

    check = subparsers["check"]
    check.add_argument("--seed", type=int, default=const.CHECK_SEED)
    check.add_argument("--samples", type=int, default=const.CHECK_SAMPLES)
    check.add_argument("--at", action="append", help="m=..,M=..,T=.. (repeatable)")
    check.add_argument("--only", action="append", choices=list(invariants.CHECKS))
    return parser


def apply_config_file(parser: ArgumentParser, path: Path) -> None:
    """Install the file's values as defaults so that explicit flags still win.

    Raises:
        DomainError: the file is unreadable or names an unknown option.

    """
    values = {CONFIG_ALIASES.get(k, k): v for k, v in load_config_file(path).items()}
    subparsers = [
        p
        for action in parser._actions  # noqa: SLF001
        if isinstance(action, argparse._SubParsersAction)  # noqa: SLF001
        for p in action.choices.values()
    ]
    known = {a.dest for p in subparsers for a in p._actions}  # noqa: SLF001
    unknown = sorted(values.keys() - known)
    if unknown:
        raise DomainError(f"{path}: unknown option(s) {', '.join(unknown)}")
    for p in subparsers:
        dests = {a.dest for a in p._actions}  # noqa: SLF001
        p.set_defaults(**{k: v for k, v in values.items() if k in dests})


def setup_logging(*, verbose: bool, quiet: bool) -> None:
    """Log to stderr: DEBUG with verbose, WARNING with quiet, INFO otherwise."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def exit_code(exc: GreenSignError) -> int:
    """Documented exit code of an error."""
    for kind, code in EXIT_CODES:
        if isinstance(exc, kind):
            return code
    return const.EXIT_USAGE


def main(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand and return its exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        pre = ArgumentParser(add_help=False)
        pre.add_argument("--config", type=Path)
        known, _ = pre.parse_known_args(argv)
        if known.config is not None:
            apply_config_file(parser, known.config)
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code is None:
            return const.EXIT_OK
        return exc.code if isinstance(exc.code, int) else const.EXIT_USAGE
    except (GreenSignError, OSError) as exc:
        print(f"greensign: {exc}", file=sys.stderr)  # noqa: T201
        return const.EXIT_USAGE
    setup_logging(verbose=ns.verbose, quiet=ns.quiet)
    try:
        cfg = RunConfig.from_namespace(ns)
        return COMMANDS[cfg.command].run(cfg)
    except GreenSignError as exc:
        logger.error("%s", exc)  # noqa: TRY400
        return exit_code(exc)
    except OSError as exc:
        logger.error("%s", exc)  # noqa: TRY400
        return const.EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
