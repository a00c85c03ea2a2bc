"""Constant-sign regions in the (m, M) plane.

A pair (m, M) is classified by the sign of its kernel. For T <= 1 the boundaries are known in
closed form; beyond that the kernel is assembled and its minimum searched over the points where
it can occur, or the fixed-point operator is compared with M on a grid of (t, s) pairs.
"""

# ruff: noqa: D101, D102

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import logging
import math
from typing import TYPE_CHECKING, Any, TextIO

import numpy as np
from joblib import Parallel, delayed
from scipy import optimize

from . import const
from .assembly import AssembledKernel, QuadratureCfg, assemble
from .closed_form import KernelKind, ProblemParams, q_bar_pair, reflection_singular
from .errors import (
    DomainError,
    GreenSignError,
    SingularMatrixError,
    SingularParameterError,
    ZeroDenominatorError,
)
from .utils import (
    Side,
    SidedPoint,
    cell_centres,
    exact_keys,
    format_float,
    point_keys,
    resolve_threads,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = logging.getLogger(__name__)

QUARTER_PI = math.pi / 4


class SignClass(enum.IntEnum):
    SIGN_CHANGING = 0
    POSITIVE = 1
    NEGATIVE = 2
    SINGULAR = 3
    UNDETERMINED = 4

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")


class Strategy(enum.Enum):
    CLOSED_FORM_ODE = "closed-form-ode"
    CLOSED_FORM_REFLECTION_SMALL_T = "closed-form-reflection"
    MIN_SCAN = "min-scan"
    FIXED_POINT_SCAN = "fixed-point-scan"


class Candidates(enum.Flag):
    """Which (t, s) pairs a minimum scan visits."""

    Q_BAR = enum.auto()
    DIAGONAL_ABOVE = enum.auto()
    T_GRID = enum.auto()
    ALL = Q_BAR | DIAGONAL_ABOVE | T_GRID


@dataclasses.dataclass(frozen=True)
class Classification:
    sign: SignClass
    strategy: Strategy
    minimum: float | None = None


@dataclasses.dataclass(frozen=True)
class ScanMinimum:
    value: float
    t: SidedPoint
    s: SidedPoint


## Closed-form boundaries


def _mirror(bounds: tuple[float, float]) -> tuple[float, float]:
    # the kernel at (m, M) is minus the kernel at (-m, -M) with reflected arguments
    return -bounds[1], -bounds[0]


def ode_region_boundary(
    m: float,
    T: float,  # noqa: N803
    *,
    negative: bool = False,
) -> tuple[float, float]:
    """Open M-interval where the T <= 1 piecewise ODE kernel is positive (or negative).

    Positive on ``-m < M < m/(e^{mT} - 1)``, continued to ``(0, 1/T)`` at ``m = 0``.

    Raises:
        DomainError: T outside (0, 1].

    """
    if not 0 < T <= 1:
        raise DomainError("the closed-form ODE region needs 0 < T <= 1")
    if negative:
        return _mirror(ode_region_boundary(-m, T))
    if m == 0:
        return 0.0, 1.0 / T
    return -m, m / math.expm1(m * T)


def reflection_region_boundary_small_t(
    m: float,
    T: float,  # noqa: N803
    *,
    negative: bool = False,
) -> tuple[float, float]:
    """Open M-interval where the T <= 1 reflection kernel is positive (or negative).

    Positive on ``-m < M < m(cot(mT) - 1)/2``, continued to ``(0, 1/(2T))`` at ``m = 0``.

    Raises:
        DomainError: T outside (0, 1] or ``|m| T >= pi/4``, where the kernel changes sign.

    """
    if not 0 < T <= 1:
        raise DomainError("the closed-form reflection region needs 0 < T <= 1")
    if abs(m) * T >= QUARTER_PI:
        raise DomainError(f"|m| T = {abs(m) * T!r} >= pi/4: the kernel changes sign")
    if negative:
        return _mirror(reflection_region_boundary_small_t(-m, T))
    if m == 0:
        return 0.0, 0.5 / T
    return -m, 0.5 * m * (1.0 / math.tan(m * T) - 1.0)


def _closed_form_sign(m: float, big_m: float, bounds: Any) -> SignClass:  # noqa: ANN401
    lo, hi = bounds(negative=False)
    if lo < big_m < hi:
        return SignClass.POSITIVE
    lo, hi = bounds(negative=True)
    if lo < big_m < hi:
        return SignClass.NEGATIVE
    return SignClass.SIGN_CHANGING


## Candidate pairs


def q_bar_pairs(
    k: AssembledKernel,
    *,
    diagonal_above: bool = False,
) -> list[tuple[SidedPoint, SidedPoint]]:
    """Pairs (t, s) where the minimum of the kernel can sit.

    ``q(s) = H(s-, s)`` at both sides of every interior integer, at the right end, and
    ``H(lo, lo+)`` at the left end. With ``diagonal_above`` the pairs ``H(s+, s)`` are added.
    """
    lower, upper = k.layout.lower, k.layout.upper
    anchors = [
        SidedPoint(float(n), side)
        for n in range(math.ceil(lower), math.floor(upper) + 1)
        if lower < n < upper
        for side in (Side.MINUS, Side.PLUS)
    ]
    ends = [SidedPoint.exact(upper), SidedPoint.plus(lower)]
    pairs = [q_bar_pair(s, lower) for s in (*anchors, *ends)]
    if diagonal_above:
        pairs += [(s.above(), s) for s in anchors]
        pairs.append((SidedPoint.plus(lower).above(), SidedPoint.plus(lower)))
    return pairs


def scan_points(
    k: AssembledKernel,
    points_per_unit: int = const.T_POINTS_PER_UNIT,
) -> tuple[list[SidedPoint], list[SidedPoint]]:
    """t-grid and sided s points of the fixed-point scan.

    s runs over the sides of every interior integer and the ends. The t-grid is uniform with
    ``points_per_unit`` points per unit length, plus the points just below and above each s.
    """
    lower, upper = k.layout.lower, k.layout.upper
    s_points = sorted({s for _, s in q_bar_pairs(k)}, key=lambda p: p.key)
    count = max(2, math.ceil(points_per_unit * (upper - lower)) + 1)
    t_points = [SidedPoint.exact(v) for v in np.linspace(lower, upper, count)[:-1]]
    for s in s_points:
        if s.value > lower or s.side == Side.PLUS:
            t_points.append(s.below())
        if s.value < upper:
            t_points.append(s.above())
    return t_points, s_points


def min_scan_minimum(
    k: AssembledKernel,
    candidates: Candidates | None = None,
    points_per_unit: int = const.T_POINTS_PER_UNIT,
) -> ScanMinimum:
    """Minimum of the kernel over a candidate set, with its location.

    The default set is the diagonal trace at integers and ends, plus the pairs just above the
    diagonal when m > 0. Both sides of every integer are visited, so the smaller of ``q(0-)``
    and ``q(0+)`` wins whichever side the theory points to.
    """
    if candidates is None:
        candidates = Candidates.Q_BAR
        if k.params.m > 0:
            candidates |= Candidates.DIAGONAL_ABOVE
    pairs = q_bar_pairs(k, diagonal_above=Candidates.DIAGONAL_ABOVE in candidates)
    best = ScanMinimum(math.inf, pairs[0][0], pairs[0][1])
    for t, s in pairs:
        value = k(t, s)
        if value < best.value:
            best = ScanMinimum(value, t, s)
    if Candidates.T_GRID in candidates:
        t_points, s_points = scan_points(k, points_per_unit)
        table = k.table(point_keys(t_points), point_keys(s_points))
        i, j = np.unravel_index(int(np.argmin(table)), table.shape)
        if table[i, j] < best.value:
            best = ScanMinimum(float(table[i, j]), t_points[i], s_points[j])
    return best


## Fixed-point operator


def _fixed_point_parts(
    k: AssembledKernel,
    t_keys: np.ndarray,
    s_keys: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    numerator = k.base.table(t_keys, s_keys)
    at_labels = k.table(exact_keys(k.labels), s_keys)
    weights = k.weights_table(t_keys[:, 0])
    denominator = weights @ at_labels
    scale = np.maximum(1.0, np.abs(weights) @ np.abs(at_labels))
    if np.any(np.abs(denominator) <= const.DENOMINATOR_GUARD * scale):
        raise ZeroDenominatorError("the fixed-point operator has a vanishing denominator")
    return numerator, denominator


def fixed_point_operator(k: AssembledKernel, t: SidedPoint, s: SidedPoint) -> float:
    """``G(t, s)`` over the sum of ``H(label, s)`` times the cell integral of ``G(t, .)``.

    The kernel vanishes at (t, s) exactly when M equals this value.

    Raises:
        ZeroDenominatorError: the denominator vanishes.

    """
    numerator, denominator = _fixed_point_parts(k, point_keys([t]), point_keys([s]))
    return float(numerator[0, 0] / denominator[0, 0])


def _fixed_point_holds(k: AssembledKernel, points_per_unit: int) -> bool:
    t_points, s_points = scan_points(k, points_per_unit)
    numerator, denominator = _fixed_point_parts(k, point_keys(t_points), point_keys(s_points))
    ratio = numerator / denominator
    big_m = k.params.big_m
    upper = np.where(denominator > 0, big_m < ratio, big_m > ratio)
    return bool(np.all(upper))


def fixed_point_boundary(
    m: float,
    T: float,  # noqa: N803
    q: QuadratureCfg | None = None,
    *,
    kind: KernelKind = KernelKind.REFLECTION_PIECEWISE,
    points_per_unit: int = const.T_POINTS_PER_UNIT,
    tol: float = const.BISECTION_TOL,
) -> float:
    """Edge of the positive region at fixed m: the M with M equal to the extreme operator value.

    For m > 0 the extreme is the minimum over pairs with positive denominator, for m < 0 the
    maximum over pairs with negative denominator. The root is bracketed by doubling and then
    bisected.

    Raises:
        DomainError: no sign change was found while expanding the bracket.

    """
    q = q or QuadratureCfg()

    def gap(big_m: float) -> float:
        k = assemble(ProblemParams(m, big_m, T), kind, q)
        t_points, s_points = scan_points(k, points_per_unit)
        numerator, denominator = _fixed_point_parts(k, point_keys(t_points), point_keys(s_points))
        ratio = numerator / denominator
        if m > 0:
            return big_m - float(np.min(ratio[denominator > 0]))
        return big_m - float(np.max(ratio[denominator < 0]))

    lo = 0.0 if m > 0 else -m * (1.0 + 1e-6)
    width = max(1.0, abs(m))
    hi = lo + width
    for _ in range(const.BISECTION_MAX_EXPANSIONS):
        if np.sign(gap(hi)) != np.sign(gap(lo)):
            break
        hi = lo + 2 * (hi - lo)
    else:
        raise DomainError(f"no edge of the positive region found for m={m!r}, T={T!r}")
    return float(optimize.bisect(gap, lo, hi, xtol=tol))


## Classification


def _positive(
    k: AssembledKernel,
    strategy: Strategy | None,
    points_per_unit: int,
) -> tuple[bool, Strategy, float | None]:
    m, big_m = k.params.m, k.params.big_m
    if strategy is None:
        strategy = Strategy.MIN_SCAN if m > 0 and big_m >= 0 else Strategy.FIXED_POINT_SCAN
    small = k.params.T <= 1
    if strategy == Strategy.MIN_SCAN:
        found = min_scan_minimum(k, Candidates.ALL if small else None, points_per_unit)
        return found.value > 0, strategy, found.value
    minimum = None
    if m > 0 or small:
        # both candidate sets when m > 0 and M < 0
        minimum = min_scan_minimum(k, Candidates.ALL, points_per_unit).value
        if minimum <= 0:
            return False, strategy, minimum
    try:
        return _fixed_point_holds(k, points_per_unit), strategy, minimum
    except ZeroDenominatorError:
        logger.debug("zero denominator at %s, falling back to the minimum scan", k.params)
        found = min_scan_minimum(k, Candidates.ALL, points_per_unit)
        return found.value > 0, Strategy.MIN_SCAN, found.value


def classify(  # noqa: C901, PLR0911
    m: float,
    big_m: float,
    T: float,  # noqa: N803
    q: QuadratureCfg | None = None,
    *,
    kind: KernelKind = KernelKind.REFLECTION_PIECEWISE,
    strategy: Strategy | None = None,
    points_per_unit: int = const.T_POINTS_PER_UNIT,
) -> Classification:
    """Classify (m, M) and report how the verdict was reached.

    Singular cells (eigenline, m = k pi/T, singular A) are reported as such, never raised.
    Positive is only possible with m + M > 0; Negative is decided by classifying (-m, -M).
    """
    q = q or QuadratureCfg()
    p = ProblemParams(m, big_m, T)
    reflection = kind.is_reflection
    closed = Strategy.CLOSED_FORM_REFLECTION_SMALL_T if reflection else Strategy.CLOSED_FORM_ODE
    if p.on_eigenline:
        return Classification(SignClass.SINGULAR, strategy or closed)
    if reflection:
        if m != 0 and reflection_singular(m, T):
            return Classification(SignClass.SINGULAR, strategy or closed)
        if abs(m) * T >= QUARTER_PI:
            return Classification(SignClass.SIGN_CHANGING, strategy or closed)
    if T <= 1 and strategy in (None, closed):
        bounds = ode_region_boundary if not reflection else reflection_region_boundary_small_t

        def at_m(*, negative: bool) -> tuple[float, float]:
            return bounds(m, T, negative=negative)

        return Classification(_closed_form_sign(m, big_m, at_m), closed)
    if (reflection and reflection_singular(m, T)) or (not reflection and p.ode_singular):
        return Classification(SignClass.SINGULAR, strategy or Strategy.MIN_SCAN)
    flip = m + big_m < 0
    target = p.negated() if flip else p
    try:
        k = assemble(target, kind, q)
        positive, used, minimum = _positive(k, strategy, points_per_unit)
    except (SingularMatrixError, SingularParameterError):
        return Classification(SignClass.SINGULAR, strategy or Strategy.MIN_SCAN)
    except GreenSignError as exc:
        logger.warning("could not classify %s: %s", p, exc)
        return Classification(SignClass.UNDETERMINED, strategy or Strategy.MIN_SCAN)
    if not positive:
        return Classification(SignClass.SIGN_CHANGING, used, minimum)
    return Classification(SignClass.NEGATIVE if flip else SignClass.POSITIVE, used, minimum)


def classify_point(
    m: float,
    big_m: float,
    T: float,  # noqa: N803
    q: QuadratureCfg | None = None,
    **kwargs: Any,  # noqa: ANN401
) -> SignClass:
    """Sign class of (m, M) for the given T."""
    return classify(m, big_m, T, q, **kwargs).sign


## Sweeps


@dataclasses.dataclass(frozen=True, eq=False)
class RegionGrid:
    """Sign classes on an (m, M) lattice of cell centres, rows indexed by m."""

    m_axis: np.ndarray
    big_m_axis: np.ndarray
    T: float
    kind: KernelKind
    cells: np.ndarray
    strategies: tuple[tuple[Strategy, ...], ...]

    def __post_init__(self) -> None:
        for axis in (self.m_axis, self.big_m_axis):
            if axis.size > 1 and np.any(np.diff(axis) <= 0):
                raise DomainError("axes must be strictly increasing")
        if self.cells.shape != (self.m_axis.size, self.big_m_axis.size):
            raise DomainError("cells must be dimensioned |m_axis| x |M_axis|")

    def sign(self, i: int, j: int) -> SignClass:
        return SignClass(int(self.cells[i, j]))

    def counts(self) -> dict[SignClass, int]:
        return {c: int(np.count_nonzero(self.cells == c)) for c in SignClass}

    def write_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["m", "M", "class"])
        for i, m in enumerate(self.m_axis):
            for j, big_m in enumerate(self.big_m_axis):
                writer.writerow([format_float(m), format_float(big_m), self.sign(i, j).label])

    def to_json(self) -> dict[str, Any]:
        return {
            "T": self.T,
            "kernel": self.kind.value,
            "m_axis": [float(x) for x in self.m_axis],
            "M_axis": [float(x) for x in self.big_m_axis],
            "legend": {c.label: int(c) for c in SignClass},
            "classes": [int(c) for c in self.cells.ravel()],
            "strategies": [s.value for row in self.strategies for s in row],
        }

    def write_json(self, stream: TextIO) -> None:
        json.dump(self.to_json(), stream, indent=1)
        stream.write("\n")


def sweep_region(  # noqa: PLR0913
    m_range: tuple[float, float],
    big_m_range: tuple[float, float],
    resolution: tuple[int, int] = (const.LATTICE_M, const.LATTICE_BIG_M),
    T: float = 1.0,  # noqa: N803
    q: QuadratureCfg | None = None,
    *,
    kind: KernelKind = KernelKind.REFLECTION_PIECEWISE,
    strategy: Strategy | None = None,
    threads: int | None = None,
) -> RegionGrid:
    """Classify every cell centre of the lattice over the two ranges.

    Cells are distributed over a joblib worker pool; results are gathered by cell index, so
    the grid does not depend on scheduling.
    """
    q = q or QuadratureCfg()
    m_axis = cell_centres(*m_range, resolution[0])
    big_m_axis = cell_centres(*big_m_range, resolution[1])
    pairs = [(m, big_m) for m in m_axis for big_m in big_m_axis]
    results: Sequence[Classification] = []
    if pairs:
        results = Parallel(n_jobs=resolve_threads(threads), prefer="threads")(
            delayed(classify)(float(m), float(big_m), T, q, kind=kind, strategy=strategy)
            for m, big_m in pairs
        )
    shape = (m_axis.size, big_m_axis.size)
    cells = np.array([int(r.sign) for r in results], dtype=int).reshape(shape)
    strategies = tuple(
        tuple(r.strategy for r in results[i * shape[1] : (i + 1) * shape[1]])
        for i in range(shape[0])
    )
    grid = RegionGrid(m_axis, big_m_axis, T, kind, cells, strategies)
    undetermined = grid.counts()[SignClass.UNDETERMINED]
    if undetermined:
        logger.warning("%d of %d cells are undetermined", undetermined, cells.size)
    return grid


def boundary_polylines(
    m_axis: np.ndarray,
    T: float,  # noqa: N803
    kind: KernelKind = KernelKind.REFLECTION_PIECEWISE,
) -> list[dict[str, float]]:
    """Closed-form region edges at each m where they are known (T <= 1)."""
    if T > 1:
        return []
    bounds = reflection_region_boundary_small_t if kind.is_reflection else ode_region_boundary
    rows = []
    for m in m_axis:
        try:
            pos, neg = bounds(float(m), T), bounds(float(m), T, negative=True)
        except DomainError:
            continue
        rows.append(
            {
                "m": float(m),
                "positive_low": pos[0],
                "positive_high": pos[1],
                "negative_low": neg[0],
                "negative_high": neg[1],
            },
        )
    return rows


## Conjecture audit


@dataclasses.dataclass(frozen=True)
class AuditFinding:
    m: float
    big_m: float
    minimum: ScanMinimum
    trace_value: float
    trace_side: str

    @property
    def coincides(self) -> bool:
        return abs(self.minimum.value - self.trace_value) <= const.CONJECTURE_TOL

    @property
    def consistent(self) -> bool:
        return self.minimum.value > -const.CONJECTURE_TOL


def audit_point(k: AssembledKernel, points_per_unit: int = const.T_POINTS_PER_UNIT) -> AuditFinding:
    """Full candidate minimum of a positive kernel against the trace at 0.

    The trace is expected at ``q(0-)`` for M > 0 and ``q(0+)`` for M < 0; both sides are
    evaluated and the smaller kept, with the side that attained it.
    """
    found = min_scan_minimum(k, Candidates.ALL, points_per_unit)
    below = k(SidedPoint.minus(0).below(), SidedPoint.minus(0))
    above = k(SidedPoint.plus(0).below(), SidedPoint.plus(0))
    value, side = (below, "0-") if below <= above else (above, "0+")
    return AuditFinding(k.params.m, k.params.big_m, found, value, side)


def conjecture_audit(
    grid: RegionGrid,
    q: QuadratureCfg | None = None,
    points_per_unit: int = const.T_POINTS_PER_UNIT,
) -> list[AuditFinding]:
    """Audit every Positive cell of a T > 1 reflection grid.

    Cells whose minimum does not sit at the trace at 0 are logged as counterexamples. A
    Positive cell with a negative minimum is an inconsistency of the classification.
    """
    q = q or QuadratureCfg()
    findings = []
    for i, j in zip(*np.nonzero(grid.cells == SignClass.POSITIVE), strict=True):
        p = ProblemParams(float(grid.m_axis[i]), float(grid.big_m_axis[j]), grid.T)
        finding = audit_point(assemble(p, grid.kind, q), points_per_unit)
        if not finding.coincides:
            logger.warning(
                "minimum at (m, M) = (%.6g, %.6g) is %.6g at (%s, %s), trace %s gives %.6g",
                p.m,
                p.big_m,
                finding.minimum.value,
                finding.minimum.t,
                finding.minimum.s,
                finding.trace_side,
                finding.trace_value,
            )
        findings.append(finding)
    return findings
