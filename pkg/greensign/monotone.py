"""Monotone iteration for ``v'(t) = f(t, v(-t), v([t]))`` with ``v(-T) = v(T)``.

Starting from a lower solution alpha and an upper solution beta, both sequences are pushed
through the operator

    (T gamma)(t) = integral of H(t, s) [f(s, gamma(-s), gamma([s])) + m gamma(-s) + M gamma([s])]

which needs a kernel of constant sign. With a positive kernel and ``beta <= alpha`` the alpha
iterates decrease and the beta iterates increase; with a negative kernel and ``alpha <= beta``
the directions swap. The caller is responsible for the one-sided Lipschitz condition on f,
``f(t, x1, y1) - f(t, x2, y2) >= -m (x1 - x2) - M (y1 - y2)`` inside the sector; it can be
sampled with :func:`sample_one_sided_lipschitz`.
"""

# ruff: noqa: D101, D102

from __future__ import annotations

import collections
import csv
import dataclasses
import json
import logging
import math
from typing import TYPE_CHECKING, Any, TextIO

import numpy as np
from joblib import Parallel, delayed

from . import const
from .assembly import AssembledKernel, QuadratureCfg, assemble
from .closed_form import KernelKind, ProblemParams
from .errors import (
    ClassificationGateError,
    DomainError,
    GridMismatchError,
    MonotonicityViolationError,
)
from .sign_region import SignClass, classify
from .utils import (
    Side,
    SidedPoint,
    ensure_finite,
    exact_keys,
    floor_sided,
    floor_tz,
    format_float,
    resolve_threads,
)

if TYPE_CHECKING:
    from collections.abc import Callable

    Rhs = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid of ``2 n + 1`` nodes on [-T, T], symmetric about 0."""

    T: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError("the grid needs at least one step on each side of 0")
        for k in range(1, math.ceil(self.T)):
            steps = k / self.step
            if abs(steps - round(steps)) > 1e-9 * steps:  # noqa: PLR2004
                raise GridMismatchError(
                    f"integer {k} is not a node of the grid with T={self.T!r}, n={self.n}",
                )

    @property
    def step(self) -> float:
        return self.T / self.n

    @property
    def nodes(self) -> np.ndarray:
        nodes = self.step * np.arange(-self.n, self.n + 1)
        # snap to the integers so that [t] is read exactly
        whole = np.round(nodes)
        return np.where(np.abs(nodes - whole) < 1e-9, whole, nodes)  # noqa: PLR2004

    @property
    def size(self) -> int:
        return 2 * self.n + 1

    def index(self, value: float) -> int:
        return self.n + round(value / self.step)

    def mirror(self) -> np.ndarray:
        """Index of -t for every node t."""
        return np.arange(self.size)[::-1]

    def cell_index(self, side: Side) -> np.ndarray:
        """Node index of ``[t]`` approached from ``side`` at every node."""
        return np.array(
            [self.index(floor_sided(SidedPoint(float(t), side))) for t in self.nodes],
            dtype=int,
        )

    def integer_nodes(self) -> np.ndarray:
        """Mask of the nodes that sit on an integer."""
        nodes = self.nodes
        return nodes == np.round(nodes)


@dataclasses.dataclass(frozen=True, eq=False)
class MonotoneProblem:
    """Right-hand side, certifying (m, M) and starting pair of the iteration.

    ``f`` is called with numpy arrays ``(t, x, y)`` where x receives ``v(-t)`` and y
    ``v([t])``. ``alpha0`` and ``beta0`` are constants or arrays sampled on the grid.
    """

    f: Rhs
    params: ProblemParams
    alpha0: float | np.ndarray
    beta0: float | np.ndarray
    grid_n: int = const.SOLVER_GRID_N
    max_iter: int = const.SOLVER_MAX_ITER
    tol: float = const.SOLVER_TOL
    negative: bool = False
    literal_form: bool = False

    def __post_init__(self) -> None:
        if self.max_iter < 0 or self.tol <= 0:
            raise DomainError("max_iter must be >= 0 and tol > 0")
        alpha, beta = self.start()
        low, high = (alpha, beta) if self.negative else (beta, alpha)
        if np.any(low > high):
            relation = "alpha0 <= beta0" if self.negative else "beta0 <= alpha0"
            raise DomainError(f"the starting pair must satisfy {relation} at every node")

    @property
    def grid(self) -> Grid:
        return Grid(self.params.T, self.grid_n)

    def start(self) -> tuple[np.ndarray, np.ndarray]:
        size = self.grid.size
        alpha = np.broadcast_to(np.asarray(self.alpha0, dtype=float), (size,)).copy()
        beta = np.broadcast_to(np.asarray(self.beta0, dtype=float), (size,)).copy()
        return alpha, beta


@dataclasses.dataclass(eq=False)
class IterationTrace:
    grid: np.ndarray
    alpha_seq: list[np.ndarray]
    beta_seq: list[np.ndarray]
    monotone_ok: list[bool] = dataclasses.field(default_factory=list)
    converged_at: int | None = None

    @property
    def final_gap(self) -> float:
        return float(np.max(np.abs(self.alpha_seq[-1] - self.beta_seq[-1])))

    @property
    def iterations(self) -> int:
        return len(self.alpha_seq) - 1

    def write_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["iter", "t", "alpha", "beta"])
        for n, (alpha, beta) in enumerate(zip(self.alpha_seq, self.beta_seq, strict=True)):
            for t, a, b in zip(self.grid, alpha, beta, strict=True):
                writer.writerow([n, format_float(t), format_float(a), format_float(b)])

    def to_json(self) -> dict[str, Any]:
        return {
            "grid": self.grid.tolist(),
            "alpha": [a.tolist() for a in self.alpha_seq],
            "beta": [b.tolist() for b in self.beta_seq],
            "monotone_ok": self.monotone_ok,
            "converged_at": self.converged_at,
            "final_gap": self.final_gap,
        }

    def write_json(self, stream: TextIO) -> None:
        json.dump(self.to_json(), stream)
        stream.write("\n")


@dataclasses.dataclass(frozen=True, eq=False)
class KernelTables:
    """``H(t_k, s_j+)`` and ``H(t_k, s_j-)`` on a grid."""

    grid: Grid
    plus: np.ndarray
    minus: np.ndarray


def _rows(k: AssembledKernel, t: np.ndarray, s_keys: np.ndarray) -> np.ndarray:
    return k.table(exact_keys(t), s_keys)


def kernel_tables(
    k: AssembledKernel,
    grid: Grid,
    threads: int | None = None,
) -> KernelTables:
    """Tabulate the kernel once, both sides of every s node, rows split over threads."""
    nodes = grid.nodes
    chunks = np.array_split(nodes, min(resolve_threads(threads), grid.size))
    tables = []
    for side in (Side.PLUS, Side.MINUS):
        s_keys = exact_keys(nodes, int(side))
        parts = Parallel(n_jobs=len(chunks), prefer="threads")(
            delayed(_rows)(k, chunk, s_keys) for chunk in chunks
        )
        tables.append(np.vstack(parts))
    ensure_finite(tables[0], "kernel table")
    ensure_finite(tables[1], "kernel table")
    return KernelTables(grid, tables[0], tables[1])


def _integrand(problem: MonotoneProblem, gamma: np.ndarray, side: Side) -> np.ndarray:
    grid = problem.grid
    nodes = grid.nodes
    reflected = gamma[grid.mirror()]
    cell = gamma[grid.cell_index(side)]
    x = gamma if problem.literal_form else reflected
    m, big_m = problem.params.m, problem.params.big_m
    return problem.f(nodes, x, cell) + m * reflected + big_m * cell


def operator_t(
    problem: MonotoneProblem,
    gamma: np.ndarray,
    tables: KernelTables,
) -> np.ndarray:
    """One application of the integral operator, composite trapezoid in s.

    Each step ``[s_j, s_j+1]`` uses the value just right of ``s_j`` and just left of
    ``s_j+1``, so the jumps of the kernel at ``s = t`` and at the integers stay outside
    every subinterval.

    Raises:
        GridMismatchError: gamma is not sampled on the tabulated grid.

    """
    if gamma.shape != (tables.grid.size,) or tables.grid.n != problem.grid_n:
        raise GridMismatchError("gamma and the kernel tables live on different grids")
    phi_plus = _integrand(problem, gamma, Side.PLUS)
    phi_minus = _integrand(problem, gamma, Side.MINUS)
    half = 0.5 * tables.grid.step
    return half * (tables.plus[:, :-1] @ phi_plus[:-1] + tables.minus[:, 1:] @ phi_minus[1:])


def _check_step(  # noqa: PLR0913
    trace: IterationTrace,
    n: int,
    prev: tuple[np.ndarray, np.ndarray],
    new: tuple[np.ndarray, np.ndarray],
    *,
    negative: bool,
    strict: bool,
) -> bool:
    (alpha, beta), (alpha_new, beta_new) = prev, new
    sign = -1.0 if negative else 1.0
    scale = max(1.0, float(np.max(np.abs(alpha))), float(np.max(np.abs(beta))))
    slack = const.MONOTONE_SLACK * scale
    # positive excess means the ordering broke
    excess = np.maximum.reduce(
        [
            sign * (alpha_new - alpha),
            sign * (beta - beta_new),
            sign * (beta_new - alpha_new),
        ],
    )
    worst = int(np.argmax(excess))
    if excess[worst] <= slack:
        return True
    if strict:
        raise MonotonicityViolationError(
            iteration=n + 1,
            node=worst,
            excess=float(excess[worst]),
            trace=trace,
        )
    logger.warning("iteration %d leaves the monotone ordering at node %d", n + 1, worst)
    return False


def monotone_iterate(  # noqa: PLR0913
    problem: MonotoneProblem,
    q: QuadratureCfg | None = None,
    *,
    tables: KernelTables | None = None,
    threads: int | None = None,
    strict: bool = True,
    certify: bool = True,
) -> IterationTrace:
    """Run both sequences until the larger step is below tol or max_iter is reached.

    Args:
        problem (MonotoneProblem): What to iterate.
        q (QuadratureCfg): Quadrature for assembling the kernel.
        tables (KernelTables): Precomputed kernel tables, built when omitted.
        threads (int): Workers for the table precompute.
        strict (bool): Raise on an ordering violation beyond slack instead of flagging it.
        certify (bool): Refuse a kernel without the sign the iteration relies on.

    Raises:
        ClassificationGateError: certify is set and the kernel sign does not fit.
        MonotonicityViolationError: the ordering broke and strict is set.
        NonFiniteResultError: an iterate contains NaN or infinity.

    Returns:
        IterationTrace: every iterate of both sequences.

    """
    if certify:
        require_certified(problem, q)
    grid = problem.grid
    if tables is None:
        k = assemble(problem.params, KernelKind.REFLECTION_PIECEWISE, q)
        tables = kernel_tables(k, grid, threads)
    alpha, beta = problem.start()
    trace = IterationTrace(grid.nodes, [alpha], [beta])
    for n in range(problem.max_iter):
        alpha_new = operator_t(problem, alpha, tables)
        beta_new = operator_t(problem, beta, tables)
        ensure_finite(alpha_new, f"alpha iterate {n + 1}")
        ensure_finite(beta_new, f"beta iterate {n + 1}")
        ok = _check_step(
            trace,
            n,
            (alpha, beta),
            (alpha_new, beta_new),
            negative=problem.negative,
            strict=strict,
        )
        trace.monotone_ok.append(ok)
        trace.alpha_seq.append(alpha_new)
        trace.beta_seq.append(beta_new)
        step = max(np.max(np.abs(alpha_new - alpha)), np.max(np.abs(beta_new - beta)))
        alpha, beta = alpha_new, beta_new
        if step < problem.tol:
            trace.converged_at = n
            break
    logger.info(
        "%d iterations, final gap %.3e, converged at %s",
        trace.iterations,
        trace.final_gap,
        trace.converged_at,
    )
    return trace


def require_certified(problem: MonotoneProblem, q: QuadratureCfg | None = None) -> None:
    """Refuse parameters whose kernel does not have the sign the iteration relies on.

    Raises:
        ClassificationGateError: the kernel is not Positive (Negative for the dual form).

    """
    p = problem.params
    sign = classify(p.m, p.big_m, p.T, q).sign
    required = SignClass.NEGATIVE if problem.negative else SignClass.POSITIVE
    if sign != required:
        raise ClassificationGateError(sign.label, required.label)


## Residual checks


@dataclasses.dataclass(frozen=True)
class ResidualReport:
    residual: np.ndarray
    boundary_gap: float
    violations: tuple[int, ...]

    @property
    def valid(self) -> bool:
        return not self.violations and self.boundary_gap <= const.LOWER_SOLUTION_SLACK

    @property
    def worst(self) -> float:
        finite = self.residual[np.isfinite(self.residual)]
        return float(np.max(np.abs(finite))) if finite.size else 0.0


def _residual(f: Rhs, values: np.ndarray, T: float) -> tuple[Grid, np.ndarray]:  # noqa: N803
    if values.ndim != 1 or values.size % 2 == 0 or values.size < 3:  # noqa: PLR2004
        raise GridMismatchError("samples must cover 2 n + 1 grid nodes")
    grid = Grid(T, values.size // 2)
    nodes = grid.nodes
    cells = np.array([grid.index(floor_tz(float(t))) for t in nodes], dtype=int)
    derivative = np.gradient(values, grid.step)
    residual = derivative - f(nodes, values[grid.mirror()], values[cells])
    # derivative jumps at integers; one-sided differences at the ends
    skip = grid.integer_nodes()
    skip[[0, -1]] = True
    residual[skip] = np.nan
    return grid, residual


def check_lower_solution(f: Rhs, alpha: np.ndarray, T: float) -> ResidualReport:  # noqa: N803
    """``alpha' - f(t, alpha(-t), alpha([t]))`` at interior nodes, with the periodic gap.

    Nodes where the residual is below ``-slack`` are violations. Integer nodes are skipped.
    """
    alpha = np.asarray(alpha, dtype=float)
    _, residual = _residual(f, alpha, T)
    bad = np.nonzero(residual < -const.LOWER_SOLUTION_SLACK)[0]
    return ResidualReport(residual, abs(float(alpha[0] - alpha[-1])), tuple(int(i) for i in bad))


def check_upper_solution(f: Rhs, beta: np.ndarray, T: float) -> ResidualReport:  # noqa: N803
    """Mirror of :func:`check_lower_solution`: violations are residuals above ``slack``."""
    beta = np.asarray(beta, dtype=float)
    _, residual = _residual(f, beta, T)
    bad = np.nonzero(residual > const.LOWER_SOLUTION_SLACK)[0]
    return ResidualReport(residual, abs(float(beta[0] - beta[-1])), tuple(int(i) for i in bad))


def solution_residual(f: Rhs, phi: np.ndarray, T: float) -> tuple[float, float]:  # noqa: N803
    """Largest ``|phi' - f(t, phi(-t), phi([t]))|`` off the integers, and ``|phi(-T) - phi(T)|``."""
    phi = np.asarray(phi, dtype=float)
    _, residual = _residual(f, phi, T)
    return float(np.nanmax(np.abs(residual))), abs(float(phi[0] - phi[-1]))


@dataclasses.dataclass(frozen=True)
class LipschitzReport:
    samples: int
    violations: int
    worst: float


def sample_one_sided_lipschitz(
    problem: MonotoneProblem,
    samples: int = const.LIPSCHITZ_SAMPLES,
    seed: int = const.CHECK_SEED,
    *,
    slack: float = const.MONOTONE_SLACK,
) -> LipschitzReport:
    """Sample the one-sided Lipschitz condition of f inside the sector of the starting pair.

    For each draw, ``x2 <= x1`` lie between the pair at ``-t`` and ``y2 <= y1`` between the
    pair at ``[t]``. The dual form checks the reversed inequality.
    """
    rng = np.random.default_rng(seed)
    grid = problem.grid
    alpha, beta = problem.start()
    low, high = (alpha, beta) if problem.negative else (beta, alpha)
    k = rng.integers(0, grid.size, samples)
    t = grid.nodes[k]
    at_x = grid.mirror()[k]
    at_y = np.array([grid.index(floor_tz(float(v))) for v in t], dtype=int)

    def pair(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = np.sort(rng.uniform(size=(2, samples)), axis=0)
        width = high[idx] - low[idx]
        return low[idx] + width * u[1], low[idx] + width * u[0]

    x1, x2 = pair(at_x)
    y1, y2 = pair(at_y)
    m, big_m = problem.params.m, problem.params.big_m
    lhs = problem.f(t, x1, y1) - problem.f(t, x2, y2)
    rhs = -m * (x1 - x2) - big_m * (y1 - y2)
    gap = rhs - lhs if not problem.negative else lhs - rhs
    violations = int(np.count_nonzero(gap > slack))
    if violations:
        logger.warning(
            "one-sided Lipschitz condition fails at %d of %d samples (worst %.3e)",
            violations,
            samples,
            float(np.max(gap)),
        )
    return LipschitzReport(samples, violations, float(np.max(gap, initial=0.0)))


## Built-in right-hand sides


@dataclasses.dataclass(frozen=True)
class BuiltinRhs:
    name: str
    help: str
    make: Callable[[float, float, float, float], tuple[Rhs, float, float]]
    lambda_bound: Callable[[float, float], float] | None = None


def _tanh2(
    lam: float,
    m: float,  # noqa: ARG001
    big_m: float,  # noqa: ARG001
    T: float,  # noqa: ARG001, N803
) -> tuple[Rhs, float, float]:
    def f(t: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return lam * np.tanh(t**2 - 2 * x + y)

    return f, 1.0, -1.0


def _tanh1(
    lam: float,
    m: float,  # noqa: ARG001
    big_m: float,  # noqa: ARG001
    T: float,  # noqa: N803
) -> tuple[Rhs, float, float]:
    def f(t: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return lam * np.tanh(t - x - y)

    return f, T / 2, -T / 2


def _linear_probe(
    lam: float,  # noqa: ARG001
    m: float,
    big_m: float,
    T: float,  # noqa: ARG001, N803
) -> tuple[Rhs, float, float]:
    def f(t: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:  # noqa: ARG001
        return -m * x - big_m * y + 1.0

    centre = 1.0 / (m + big_m)
    return f, centre + 1.0, centre - 1.0


BUILTINS: collections.OrderedDict[str, BuiltinRhs] = collections.OrderedDict(
    (b.name, b)
    for b in (
        BuiltinRhs(
            "tanh2",
            "lambda tanh(t^2 - 2x + y) on T = 1, alpha = 1, beta = -1",
            _tanh2,
            lambda m, big_m: min(m / 2, big_m),
        ),
        BuiltinRhs(
            "tanh1",
            "lambda tanh(t - x - y), alpha = T/2, beta = -T/2",
            _tanh1,
            lambda m, big_m: min(m, big_m),
        ),
        BuiltinRhs(
            "linear-probe",
            "-m x - M y + 1, whose solution is 1/(m + M)",
            _linear_probe,
        ),
    )
)


def builtin_problem(  # noqa: PLR0913
    name: str,
    params: ProblemParams,
    lam: float = 0.0,
    *,
    grid_n: int = const.SOLVER_GRID_N,
    max_iter: int = const.SOLVER_MAX_ITER,
    tol: float = const.SOLVER_TOL,
    negative: bool = False,
    literal_form: bool = False,
) -> MonotoneProblem:
    """Problem for a named right-hand side, warning when lambda exceeds its admissible bound.

    Raises:
        DomainError: the name is unknown or lambda is negative.

    """
    if name not in BUILTINS:
        raise DomainError(f"unknown right-hand side {name!r}, choose from {', '.join(BUILTINS)}")
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    builtin = BUILTINS[name]
    if builtin.lambda_bound is not None:
        bound = builtin.lambda_bound(params.m, params.big_m)
        if lam > bound:
            logger.warning(
                "lambda = %s exceeds the admissible bound %s for %s; the hypotheses may fail",
                lam,
                bound,
                name,
            )
    f, alpha0, beta0 = builtin.make(lam, params.m, params.big_m, params.T)
    if negative:
        alpha0, beta0 = beta0, alpha0
    return MonotoneProblem(
        f,
        params,
        alpha0,
        beta0,
        grid_n=grid_n,
        max_iter=max_iter,
        tol=tol,
        negative=negative,
        literal_form=literal_form,
    )
