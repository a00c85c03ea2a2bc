"""greensign subcommands.

Each command object turns a :class:`~greensign.config.RunConfig` into output on a stream and an
exit code. Errors are left to the caller, which maps them onto exit codes.
"""

# ruff: noqa: D101, D102, D107

from __future__ import annotations

import contextlib
import csv
import json
import logging
import sys
from collections import OrderedDict
from typing import TYPE_CHECKING, Any, TextIO

import numpy as np

from . import assembly, closed_form, const, invariants, monotone, sign_region
from .closed_form import KernelKind
from .errors import SingularMatrixError
from .utils import SidedPoint, ensure_finite, format_float

if TYPE_CHECKING:
    from collections.abc import Callable, Iterator
    from pathlib import Path

    from .config import RunConfig

logger = logging.getLogger(__name__)


@contextlib.contextmanager
def open_output(path: Path | None) -> Iterator[TextIO]:
    """Write to the given file, or to stdout when no path is set."""
    if path is None:
        yield sys.stdout
        return
    with path.open("w", encoding="utf-8", newline="") as stream:
        yield stream


class BaseCommand:
    """Base for greensign subcommands.

    A subcommand should derive from this class and implement ``run``.
    """

    def __init__(self, *, name: str, help_text: str) -> None:
        self.name = name
        self.help_text = help_text

    def run(self, cfg: RunConfig) -> int:
        """Execute the command and return the exit code."""
        raise NotImplementedError


## eval


def _sweep_points(lo: float, hi: float, count: int, split: set[float]) -> list[SidedPoint]:
    """Exact points on [lo, hi], with values in ``split`` given as both one-sided limits."""
    points = []
    values = sorted({*np.linspace(lo, hi, max(count, 2)).tolist(), *split})
    for v in values:
        if v in split:
            if v > lo:
                points.append(SidedPoint.minus(v))
            if v < hi:
                points.append(SidedPoint.plus(v))
        else:
            points.append(SidedPoint.exact(v))
    return points


def kernel_evaluator(cfg: RunConfig) -> Callable[[SidedPoint, SidedPoint], float]:
    """Evaluator of the configured kernel at one pair of points."""
    p = cfg.params
    if p is None:
        raise ValueError("no parameters")
    kind = cfg.kernel
    if kind == KernelKind.ODE_EXP:
        return lambda t, s: closed_form.g_ode_exp(p, t, s)
    if kind == KernelKind.REFLECTION_FIRST_ORDER:
        return lambda t, s: closed_form.g_reflection(p.m, p.T, t, s)
    if kind == KernelKind.REFLECTION_SECOND_ORDER:
        return lambda t, s: closed_form.g_reflection_second_order(p.m, p.T, t.value, s.value)
    if p.T <= 1:
        if kind == KernelKind.ODE_PIECEWISE:
            return lambda t, s: closed_form.h_ode_piecewise_small_t(p, t, s)
        return lambda t, s: closed_form.h_reflection_small_t(p, t, s)
    return assembly.assemble(p, kind, cfg.quadrature)


def kernel_integral(cfg: RunConfig, t: SidedPoint) -> float:
    """Integral of the configured kernel over its whole interval in the second variable."""
    p = cfg.params
    if p is None:
        raise ValueError("no parameters")
    kind = cfg.kernel
    lo, hi = kind.domain(p.T)
    if kind == KernelKind.ODE_EXP:
        return closed_form.ode_exp_integral(p.m, p.T, t.value, lo, hi)
    if kind == KernelKind.REFLECTION_FIRST_ORDER:
        return closed_form.integral_g_reflection(p.m, p.T, t, lo, hi)
    if kind == KernelKind.REFLECTION_SECOND_ORDER:
        return assembly.piecewise_quad(
            lambda r: closed_form.g_reflection_second_order(p.m, p.T, t.value, r),
            lo,
            hi,
            (t.value,),
            cfg.quadrature,
        )
    if kind == KernelKind.ODE_PIECEWISE and p.ode_singular and p.T <= 1:
        # no base kernel at m = 0, but the closed form exists
        return assembly.piecewise_quad(
            lambda r: closed_form.h_ode_piecewise_small_t(p, t, SidedPoint.exact(r)),
            lo,
            hi,
            (t.value,),
            cfg.quadrature,
        )
    k = assembly.assemble(p, kind, cfg.quadrature)
    return float(k.cell_integrals(t).sum())


class Eval(BaseCommand):
    def __init__(self) -> None:
        super().__init__(name="eval", help_text="evaluate a kernel at sided points")

    def pairs(self, cfg: RunConfig) -> list[tuple[SidedPoint, SidedPoint]]:
        p = cfg.params
        if p is None:
            raise ValueError("no parameters")
        lo, hi = cfg.kernel.domain(p.T)
        integers = {float(n) for n in range(int(np.ceil(lo)), int(np.floor(hi)) + 1)}
        integers = {v for v in integers if lo < v < hi}
        if cfg.line is not None:
            value = cfg.line.value
            split = integers | {value}
            swept = _sweep_points(lo, hi, cfg.line_points, split)
            fixed = SidedPoint.exact(value)
            if cfg.line.fixed == "t":
                return [(fixed, s) for s in swept]
            return [(t, fixed) for t in swept]
        t_points = cfg.t_points or (SidedPoint.exact(0.0),)
        split = integers | {t.value for t in t_points}
        s_points = cfg.s_points or tuple(_sweep_points(lo, hi, cfg.line_points, split))
        return [(t, s) for t in t_points for s in s_points]

    def run(self, cfg: RunConfig) -> int:
        rows: list[dict[str, Any]] = []
        if cfg.integrate:
            for t in cfg.t_points or (SidedPoint.exact(0.0),):
                value = kernel_integral(cfg, t)
                ensure_finite(value, f"integral at t={t}")
                rows.append({"t": t.value, "t_side": t.suffix, "integral": value})
        else:
            h = kernel_evaluator(cfg)
            for t, s in self.pairs(cfg):
                value = h(t, s)
                ensure_finite(value, f"kernel at ({t}, {s})")
                row = {"t": t.value, "t_side": t.suffix, "s": s.value, "s_side": s.suffix}
                rows.append({**row, "value": value})
        with open_output(cfg.output) as stream:
            write_rows(stream, rows, cfg.fmt)
        return const.EXIT_OK


def write_rows(stream: TextIO, rows: list[dict[str, Any]], fmt: str) -> None:
    """Rows as CSV with 17 significant digits, or as a JSON list."""
    if fmt == "json":
        json.dump(rows, stream, indent=1)
        stream.write("\n")
        return
    if not rows:
        return
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(rows[0].keys())
    for row in rows:
        writer.writerow(format_float(v) if isinstance(v, float) else v for v in row.values())


## matrix


def piecewise_kind(kind: KernelKind) -> KernelKind:
    """Kernel with piecewise argument of the same family."""
    return KernelKind.REFLECTION_PIECEWISE if kind.is_reflection else KernelKind.ODE_PIECEWISE


class Matrix(BaseCommand):
    def __init__(self) -> None:
        super().__init__(name="matrix", help_text="print the cell matrix, its inverse and det")

    def run(self, cfg: RunConfig) -> int:
        p = cfg.params
        if p is None:
            raise ValueError("no parameters")
        kind = piecewise_kind(cfg.kernel)
        _, _, matrix = assembly.build_matrix(p, kind, cfg.quadrature)
        det, inverse = assembly.factor_matrix(matrix)
        code = const.EXIT_OK
        if inverse is None:
            logger.error("%s", SingularMatrixError(p.m, p.big_m, matrix, det))
            code = const.EXIT_SINGULAR_MATRIX
        ensure_finite(matrix, "matrix A")
        with open_output(cfg.output) as stream:
            if cfg.fmt == "json":
                doc = {
                    "size": int(matrix.shape[0]),
                    "A": matrix.tolist(),
                    "A_inv": None if inverse is None else inverse.tolist(),
                    "det": det,
                }
                json.dump(doc, stream, indent=1)
                stream.write("\n")
            else:
                writer = csv.writer(stream, lineterminator="\n")
                blocks = [("A", matrix)] + ([] if inverse is None else [("A_inv", inverse)])
                for title, block in blocks:
                    writer.writerow([f"# {title}"])
                    writer.writerows([format_float(float(v)) for v in row] for row in block)
                writer.writerow(["# det"])
                writer.writerow([format_float(det)])
        return code


## region


class Region(BaseCommand):
    def __init__(self) -> None:
        super().__init__(name="region", help_text="classify a lattice of (m, M) by kernel sign")

    def run(self, cfg: RunConfig) -> int:
        sweep = cfg.sweep
        if sweep is None:
            raise ValueError("no sweep settings")
        period = cfg.params.T if cfg.params is not None else 1.0
        kind = piecewise_kind(cfg.kernel)
        grid = sign_region.sweep_region(
            sweep.m_range,
            sweep.big_m_range,
            sweep.resolution,
            period,
            cfg.quadrature,
            kind=kind,
            strategy=sweep.strategy,
            threads=cfg.threads,
        )
        counts = grid.counts()
        logger.info(
            "%d cells: %s",
            grid.cells.size,
            ", ".join(f"{c.label} {n}" for c, n in counts.items()),
        )
        boundary = (
            sign_region.boundary_polylines(grid.m_axis, period, kind) if sweep.boundary else None
        )
        with open_output(cfg.output) as stream:
            if cfg.fmt == "json":
                doc = grid.to_json()
                if boundary is not None:
                    doc["boundary"] = boundary
                json.dump(doc, stream, indent=1)
                stream.write("\n")
            else:
                grid.write_csv(stream)
        if boundary is not None and cfg.fmt == "csv":
            target = None if cfg.output is None else cfg.output.with_suffix(".boundary.csv")
            with open_output(target) as stream:
                if target is None:
                    stream.write("\n")
                write_rows(stream, boundary, "csv")
        if sweep.audit:
            findings = sign_region.conjecture_audit(grid, cfg.quadrature)
            misses = [f for f in findings if not f.coincides]
            logger.info(
                "audit: %d positive cells, %d off the trace at 0",
                len(findings),
                len(misses),
            )
            if any(not f.consistent for f in findings):
                logger.error("a positive cell has a negative minimum")
                return const.EXIT_CHECK_FAILED
        return const.EXIT_OK


## solve


class Solve(BaseCommand):
    def __init__(self) -> None:
        super().__init__(name="solve", help_text="run the monotone iteration for a built-in f")

    def run(self, cfg: RunConfig) -> int:
        p, s = cfg.params, cfg.solver
        if p is None or s is None:
            raise ValueError("no solver settings")
        problem = monotone.builtin_problem(
            s.rhs,
            p,
            s.lam,
            grid_n=s.grid_n,
            max_iter=s.max_iter,
            tol=s.tol,
            negative=s.negative,
            literal_form=s.literal_form,
        )
        alpha, beta = problem.start()
        lower = monotone.check_lower_solution(problem.f, alpha, p.T)
        upper = monotone.check_upper_solution(problem.f, beta, p.T)
        for what, report in (("alpha0", lower), ("beta0", upper)):
            if not report.valid:
                logger.warning("%s fails at %d nodes", what, len(report.violations))
        monotone.sample_one_sided_lipschitz(problem)
        trace = monotone.monotone_iterate(
            problem,
            cfg.quadrature,
            threads=cfg.threads,
            certify=s.gate,
        )
        residual, gap = monotone.solution_residual(problem.f, trace.alpha_seq[-1], p.T)
        logger.info(
            "final gap %.3e, converged at %s, residual %.3e, periodic gap %.3e",
            trace.final_gap,
            trace.converged_at,
            residual,
            gap,
        )
        with open_output(cfg.output) as stream:
            if cfg.fmt == "json":
                trace.write_json(stream)
            else:
                trace.write_csv(stream)
        return const.EXIT_OK


## check


class Check(BaseCommand):
    def __init__(self) -> None:
        super().__init__(name="check", help_text="run the kernel self-checks")

    def run(self, cfg: RunConfig) -> int:
        results = invariants.run_checks(
            cfg.check_points,
            cfg.seed,
            cfg.samples,
            cfg.quadrature,
            cfg.check_names,
        )
        with open_output(cfg.output) as stream:
            if cfg.fmt == "json":
                rows = [
                    {
                        "check": r.name,
                        "m": r.params.m,
                        "M": r.params.big_m,
                        "T": r.params.T,
                        "worst": r.worst if np.isfinite(r.worst) else None,
                        "tol": r.tol,
                        "passed": r.passed,
                        "detail": r.detail,
                    }
                    for r in results
                ]
                json.dump(rows, stream, indent=1)
                stream.write("\n")
            else:
                for r in results:
                    stream.write(f"{r}\n")
        failed = [r for r in results if not r.passed]
        if failed:
            logger.error("%d of %d checks failed", len(failed), len(results))
            return const.EXIT_CHECK_FAILED
        return const.EXIT_OK


COMMANDS: OrderedDict[str, BaseCommand] = OrderedDict(
    (c.name, c) for c in (Eval(), Matrix(), Region(), Solve(), Check())
)
