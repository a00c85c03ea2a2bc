"""Assembly of the kernel with piecewise constant argument for any T.

The unknown values ``v(k)`` at the cell labels couple through the matrix ``A = I + M a`` with
``a[l, k]`` the integral of the base kernel ``G(l, .)`` over the cell labelled ``k``. Once ``A`` is
inverted the kernel is

    H(t, s) = G(t, s) - M * w(t) . A^-1 . g(s),

where ``w_i(t)`` integrates ``G(t, .)`` over cell ``i`` and ``g_j(s) = G(j, s)``.
"""

# ruff: noqa: D101, D102, D105

from __future__ import annotations

import dataclasses
import enum
import itertools
import logging
import math
from typing import TYPE_CHECKING

import numpy as np
from scipy import integrate, linalg

from . import closed_form, const
from .closed_form import KernelKind, ProblemParams
from .errors import DomainError, SingularMatrixError
from .utils import SidedPoint, exact_keys, floor_sided, floor_tz, point_keys

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

logger = logging.getLogger(__name__)


class QuadratureMode(enum.Enum):
    ANALYTIC_PREFERRED = "analytic"
    ADAPTIVE_ONLY = "adaptive"


@dataclasses.dataclass(frozen=True)
class QuadratureCfg:
    """How cell integrals of the base kernel are computed."""

    rel_tol: float = const.QUAD_REL_TOL
    abs_tol: float = const.QUAD_ABS_TOL
    max_subdivisions: int = const.QUAD_MAX_SUBDIVISIONS
    mode: QuadratureMode = QuadratureMode.ANALYTIC_PREFERRED

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be at least 1")


@dataclasses.dataclass(frozen=True)
class Cell:
    label: int
    lo: float
    hi: float

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclasses.dataclass(frozen=True)
class CellLayout:
    """Cells on which ``[t]`` is constant, ordered by label."""

    T: float
    lower: float
    upper: float
    cells: tuple[Cell, ...]

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(cell.label for cell in self.cells)

    @property
    def size(self) -> int:
        return len(self.cells)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        ends = {cell.lo for cell in self.cells} | {cell.hi for cell in self.cells}
        return tuple(sorted(ends))

    def label_of(self, point: SidedPoint) -> int:
        return floor_sided(point)

    def index_of(self, label: int) -> int:
        try:
            return self.indices.index(label)
        except ValueError:
            raise DomainError(f"no cell carries label {label}") from None


def build_layout(T: float, *, symmetric: bool = True) -> CellLayout:  # noqa: N803
    """Cells of ``[-T, T]`` (or ``[0, T]`` with ``symmetric=False``).

    Label 0 owns ``(max(-T, -1), min(T, 1))``; a positive label ``k`` owns ``[k, k+1)`` and a
    negative one ``(k-1, k]``, both clipped to the interval. Zero-length end cells, which occur
    for integer T, are dropped.

    Raises:
        DomainError: T is not positive.

    """
    if not T > 0 or not math.isfinite(T):
        raise DomainError(f"T must be positive, got {T!r}")
    top = floor_tz(T)
    cells = []
    if symmetric:
        for k in range(-top, top + 1):
            if k == 0:
                lo, hi = max(-T, -1.0), min(T, 1.0)
            elif k > 0:
                lo, hi = float(k), min(k + 1.0, T)
            else:
                lo, hi = max(k - 1.0, -T), float(k)
            if hi > lo:
                cells.append(Cell(k, lo, hi))
        return CellLayout(T, -T, T, tuple(cells))
    for k in range(top + 1):
        lo, hi = float(k), min(k + 1.0, T)
        if hi > lo:
            cells.append(Cell(k, lo, hi))
    return CellLayout(T, 0.0, T, tuple(cells))


@dataclasses.dataclass(frozen=True)
class BaseKernel:
    """The kernel without piecewise argument, for one value of m."""

    kind: KernelKind
    m: float
    T: float

    def __post_init__(self) -> None:
        if self.kind not in (KernelKind.ODE_EXP, KernelKind.REFLECTION_FIRST_ORDER):
            raise DomainError(f"{self.kind.value} cannot serve as a base kernel")

    @property
    def domain(self) -> tuple[float, float]:
        return self.kind.domain(self.T)

    def table(self, t_keys: np.ndarray, s_keys: np.ndarray) -> np.ndarray:
        if self.kind == KernelKind.ODE_EXP:
            return closed_form.g_ode_exp_table(self.m, self.T, t_keys, s_keys)
        return closed_form.g_reflection_table(self.m, self.T, t_keys, s_keys)

    def __call__(self, t: SidedPoint, s: SidedPoint) -> float:
        return float(self.table(point_keys([t]), point_keys([s]))[0, 0])

    def integrals(self, t: np.ndarray, a: float, b: float, q: QuadratureCfg) -> np.ndarray:
        """Integral of ``G(t, r)`` over ``r`` in ``[a, b]`` for each value of t."""
        t = np.asarray(t, dtype=float)
        if q.mode == QuadratureMode.ADAPTIVE_ONLY:
            return np.array([self.adaptive_integral(float(tv), a, b, q) for tv in t])
        if self.kind == KernelKind.ODE_EXP:
            return closed_form.ode_exp_integrals(self.m, self.T, t, a, b)
        return closed_form.integral_g_reflection_array(self.m, self.T, t, a, b)

    def integral(self, t: SidedPoint, a: float, b: float, q: QuadratureCfg) -> float:
        return float(self.integrals(np.array([t.value]), a, b, q)[0])

    def adaptive_integral(self, t: float, a: float, b: float, q: QuadratureCfg) -> float:
        point = SidedPoint.exact(t)

        def integrand(r: float) -> float:
            return self(point, SidedPoint.exact(r))

        cuts = (t, -t) if self.kind.is_reflection else (t,)
        return piecewise_quad(integrand, a, b, cuts, q)


def piecewise_quad(
    fn: Callable[[float], float],
    a: float,
    b: float,
    cuts: Sequence[float],
    q: QuadratureCfg,
) -> float:
    """Adaptive quadrature of fn over [a, b] split at the interior cuts.

    No piece is evaluated at its end points, so integrands that jump on the cuts are safe.
    """
    if a == b:
        return 0.0
    lo_end, hi_end = min(a, b), max(a, b)
    ends = sorted({lo_end, hi_end, *(c for c in cuts if lo_end < c < hi_end)})
    total = 0.0
    for lo, hi in itertools.pairwise(ends):
        value, _ = integrate.quad(
            fn,
            lo,
            hi,
            epsabs=q.abs_tol,
            epsrel=q.rel_tol,
            limit=q.max_subdivisions,
        )
        total += value
    return total if a <= b else -total


def base_kernel(p: ProblemParams, kind: KernelKind) -> BaseKernel:
    return BaseKernel(kind.base, p.m, p.T)


def build_matrix(
    p: ProblemParams,
    kind: KernelKind,
    q: QuadratureCfg,
) -> tuple[BaseKernel, CellLayout, np.ndarray]:
    """Base kernel, layout and the matrix ``A = I + M a``."""
    base = base_kernel(p, kind)
    layout = build_layout(p.T, symmetric=kind.is_reflection)
    coeffs = np.array(
        [
            [base.integral(SidedPoint.exact(row.label), col.lo, col.hi, q) for col in layout.cells]
            for row in layout.cells
        ],
    )
    return base, layout, np.eye(layout.size) + p.big_m * coeffs


def _lu_det(lu: np.ndarray, piv: np.ndarray) -> float:
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    return float(np.prod(np.diag(lu))) * (-1.0) ** swaps


def factor_matrix(matrix: np.ndarray) -> tuple[float, np.ndarray | None]:
    """det A from one LU factorisation, and A^-1 from the same factors unless A is singular."""
    lu, piv = linalg.lu_factor(matrix)
    det = _lu_det(lu, piv)
    if is_singular(matrix, det):
        return det, None
    return det, linalg.lu_solve((lu, piv), np.eye(matrix.shape[0]))


def det_a(p: ProblemParams, kind: KernelKind, q: QuadratureCfg | None = None) -> float:
    """Determinant of the cell matrix, computed even when it vanishes."""
    _, _, matrix = build_matrix(p, kind, q or QuadratureCfg())
    return _lu_det(*linalg.lu_factor(matrix))


def is_singular(matrix: np.ndarray, det: float) -> bool:
    """|det A| below the guard times the product of row norms."""
    scale = float(np.prod(np.linalg.norm(matrix, axis=1)))
    return not math.isfinite(det) or abs(det) < const.DET_GUARD * scale


@dataclasses.dataclass(frozen=True, eq=False)
class AssembledKernel:
    """Evaluator of the kernel with piecewise constant argument for one (m, M, T)."""

    params: ProblemParams
    base: BaseKernel
    layout: CellLayout
    matrix: np.ndarray
    inverse: np.ndarray
    det: float
    quadrature: QuadratureCfg

    @property
    def kind(self) -> KernelKind:
        if self.base.kind.is_reflection:
            return KernelKind.REFLECTION_PIECEWISE
        return KernelKind.ODE_PIECEWISE

    @property
    def labels(self) -> np.ndarray:
        return np.asarray(self.layout.indices, dtype=float)

    def weights_table(self, t: np.ndarray) -> np.ndarray:
        """``w_i(t)``, the integral of ``G(t, .)`` over cell i, as a (t, cells) array.

        Only the value of t matters: the base kernel jumps on a line of zero measure.
        """
        t = np.asarray(t, dtype=float)
        columns = [self.base.integrals(t, c.lo, c.hi, self.quadrature) for c in self.layout.cells]
        return np.stack(columns, axis=-1).reshape(t.size, self.layout.size)

    def cell_weights(self, t: SidedPoint) -> np.ndarray:
        return self.weights_table(np.array([t.value]))[0]

    def label_table(self, s_keys: np.ndarray) -> np.ndarray:
        """``G(label_i, s_j)`` as a (cells, s) array."""
        return self.base.table(exact_keys(self.labels), s_keys)

    def table(self, t_keys: np.ndarray, s_keys: np.ndarray) -> np.ndarray:
        """H for every pair of t and s keys."""
        values = self.base.table(t_keys, s_keys)
        if self.params.big_m == 0:
            return values
        weights = self.weights_table(t_keys[:, 0])
        return values - self.params.big_m * weights @ self.inverse @ self.label_table(s_keys)

    def section(self, t: SidedPoint) -> Callable[[SidedPoint], float]:
        """``s -> H(t, s)`` with the t-dependent factor computed once."""
        coeff = self.params.big_m * self.cell_weights(t) @ self.inverse

        def at(s: SidedPoint) -> float:
            value = self.base(t, s)
            if self.params.big_m:
                value -= float(coeff @ self.label_table(point_keys([s]))[:, 0])
            return value

        return at

    def cell_integrals(self, t: SidedPoint) -> np.ndarray:
        """Integral of ``H(t, .)`` over each cell, which is ``w(t) . A^-1``."""
        return self.cell_weights(t) @ self.inverse

    def __call__(self, t: SidedPoint, s: SidedPoint) -> float:
        return self.section(t)(s)


def assemble(
    p: ProblemParams,
    kind: KernelKind = KernelKind.REFLECTION_PIECEWISE,
    q: QuadratureCfg | None = None,
) -> AssembledKernel:
    """Build and invert the cell matrix for (m, M, T).

    Args:
        p (ProblemParams): Parameters.
        kind (KernelKind): Either family; the base kernel is derived from it.
        q (QuadratureCfg): Quadrature settings, defaults when omitted.

    Raises:
        SingularParameterError: the base kernel does not exist at m.
        SingularMatrixError: A is numerically singular.

    Returns:
        AssembledKernel: evaluator of H.

    """
    q = q or QuadratureCfg()
    base, layout, matrix = build_matrix(p, kind, q)
    det, inverse = factor_matrix(matrix)
    if inverse is None:
        raise SingularMatrixError(p.m, p.big_m, matrix, det)
    logger.debug("assembled %s at %s, det A = %.6g", kind.value, p, det)
    return AssembledKernel(p, base, layout, matrix, inverse, det, q)


def h_general(k: AssembledKernel, t: SidedPoint, s: SidedPoint) -> float:
    """Value of the assembled kernel at one pair of points."""
    return k(t, s)


def comparison_residual(
    p0: ProblemParams,
    p1: ProblemParams,
    t: SidedPoint,
    s: SidedPoint,
    q: QuadratureCfg | None = None,
) -> float:
    """Defect of the comparison relation between two reflection kernels.

    Returns ``H0(t, s) - [H1(t, s) + (m1 - m0) int H1(t, r) H0(-r, s) dr
    + (M1 - M0) int H1(t, r) H0([r], s) dr]``, which vanishes for admissible parameters.

    Raises:
        DomainError: the two parameter sets have different T.

    """
    if p0.T != p1.T:
        raise DomainError("both kernels must live on the same interval")
    q = q or QuadratureCfg()
    k0 = assemble(p0, KernelKind.REFLECTION_PIECEWISE, q)
    k1 = assemble(p1, KernelKind.REFLECTION_PIECEWISE, q)
    h1_t = k1.section(t)
    relation = h1_t(s)
    dm, dbig_m = p1.m - p0.m, p1.big_m - p0.big_m
    if dm:

        def integrand(r: float) -> float:
            return h1_t(SidedPoint.exact(r)) * k0(SidedPoint.exact(-r), s)

        cuts = (t.value, -t.value, s.value, -s.value, *k0.layout.breakpoints, *k0.labels)
        relation += dm * piecewise_quad(integrand, -p0.T, p0.T, cuts, q)
    if dbig_m:
        h0_labels = np.array([k0(SidedPoint.exact(c.label), s) for c in k0.layout.cells])
        relation += dbig_m * float(k1.cell_integrals(t) @ h0_labels)
    return k0(t, s) - relation
