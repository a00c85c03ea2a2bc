"""Closed-form kernels.

Branch-exact evaluation of the periodic kernels. One-sided limits are taken by choosing the
branch from the sides of the arguments, the formulas are then evaluated at the plain values.

Two families live here:

* the periodic ODE ``v' + m v = h`` on ``[0, T]`` and its piecewise-argument perturbation
  ``v' + m v + M v([t]) = h``,
* the reflection problem ``v'(t) + m v(-t) = h`` on ``[-T, T]`` (through the second-order kernel
  of ``v'' + m^2 v``) and its piecewise-argument perturbation with ``M v([t])``.
"""

from __future__ import annotations

import dataclasses
import enum
import itertools
import math
from typing import TYPE_CHECKING

import numpy as np

from . import const
from .errors import AmbiguousSideError, DomainError, SingularParameterError
from .utils import SidedPoint, compare, compare_keys, exact_keys, point_keys

if TYPE_CHECKING:
    from collections.abc import Callable

    Evaluator = Callable[[SidedPoint, SidedPoint], float]

ZERO = SidedPoint.exact(0.0)


class KernelKind(enum.Enum):
    """Which kernel is meant, each with its own interval and singular set."""

    ODE_EXP = "ode-exp"
    ODE_PIECEWISE = "ode-piecewise"
    REFLECTION_SECOND_ORDER = "reflection-second-order"
    REFLECTION_FIRST_ORDER = "reflection-first-order"
    REFLECTION_PIECEWISE = "reflection-piecewise"

    @property
    def is_reflection(self) -> bool:
        return self.value.startswith("reflection")

    @property
    def base(self) -> KernelKind:
        """Kernel that the piecewise perturbation is assembled from."""
        return KernelKind.REFLECTION_FIRST_ORDER if self.is_reflection else KernelKind.ODE_EXP

    def domain(self, period: float) -> tuple[float, float]:
        return (-period, period) if self.is_reflection else (0.0, period)


@dataclasses.dataclass(frozen=True)
class ProblemParams:
    """The triple (m, M, T).

    ``m`` multiplies ``v(-t)`` (reflection) or ``v(t)`` (ODE), ``big_m`` multiplies ``v([t])``
    and ``T`` is the half-length of ``[-T, T]`` or the length of ``[0, T]``.
    """

    m: float
    big_m: float
    T: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(x) for x in (self.m, self.big_m, self.T)):
            raise DomainError(f"parameters must be finite, got {self}")
        if self.T <= 0:
            raise DomainError(f"T must be positive, got {self.T!r}")

    @property
    def on_eigenline(self) -> bool:
        scale = max(1.0, abs(self.m), abs(self.big_m))
        return abs(self.m + self.big_m) <= const.EIGENLINE_GUARD * scale

    @property
    def reflection_singular(self) -> bool:
        return reflection_singular(self.m, self.T)

    @property
    def ode_singular(self) -> bool:
        return abs(self.m * self.T) <= const.SIN_GUARD

    def negated(self) -> ProblemParams:
        return ProblemParams(-self.m, -self.big_m, self.T)

    def require_off_eigenline(self) -> None:
        if self.on_eigenline:
            raise SingularParameterError("on_eigenline", f"m + M = 0 at m={self.m!r}")


def reflection_singular(m: float, period: float) -> bool:
    """True when m = k*pi/T, where the reflection kernels do not exist."""
    return abs(math.sin(m * period)) <= const.SIN_GUARD * max(1.0, abs(m * period))


def _require_reflection(m: float, period: float) -> None:
    if reflection_singular(m, period):
        raise SingularParameterError("reflection_singular", f"m*T = {m * period!r} is k*pi")


def _require_ode(m: float, period: float) -> None:
    if abs(m * period) <= const.SIN_GUARD:
        raise SingularParameterError("ode_singular", "the periodic ODE kernel needs m != 0")


def _check_domain(values: np.ndarray | float, lo: float, hi: float) -> None:
    values = np.asarray(values)
    if values.size and (values.min() < lo or values.max() > hi):
        raise DomainError(f"coordinates must lie in [{lo!r}, {hi!r}]")


def _split_diagonal(
    t_keys: np.ndarray,
    s_keys: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Broadcast keys to (nt, ns, 3) and flag the pairs with s below t."""
    tk = t_keys[:, None, :]
    sk = s_keys[None, :, :]
    order = compare_keys(sk, tk)
    if np.any(order == 0):
        raise AmbiguousSideError("the kernel jumps on s = t; give the point a side")
    return tk, sk, order < 0


## Periodic ODE on [0, T]


def g_ode_exp_table(m: float, period: float, t_keys: np.ndarray, s_keys: np.ndarray) -> np.ndarray:
    """Tabulate the periodic ODE kernel for every pair of t and s keys."""
    _require_ode(m, period)
    _check_domain(t_keys[:, 0], 0.0, period)
    _check_domain(s_keys[:, 0], 0.0, period)
    tk, sk, below = _split_diagonal(t_keys, s_keys)
    t, s = tk[..., 0], sk[..., 0]
    shift = np.where(below, period, 0.0)
    return np.exp(m * (s - t + shift)) / np.expm1(m * period)


def g_ode_exp(p: ProblemParams, t: SidedPoint, s: SidedPoint) -> float:
    """Kernel of ``v' + m v = h``, ``v(0) = v(T)``.

    ``e^{m(s-t+T)}/(e^{mT}-1)`` for ``s < t`` and ``e^{m(s-t)}/(e^{mT}-1)`` for ``s > t``.

    Raises:
        SingularParameterError: m = 0.
        DomainError: a coordinate leaves [0, T].
        AmbiguousSideError: t and s coincide without a side to separate them.

    """
    return float(g_ode_exp_table(p.m, p.T, point_keys([t]), point_keys([s]))[0, 0])


def ode_exp_integrals(m: float, period: float, t: np.ndarray, a: float, b: float) -> np.ndarray:
    """Integrals of the periodic ODE kernel in its second variable over [a, b], one per t."""
    _require_ode(m, period)
    t = np.asarray(t, dtype=float)
    _check_domain(np.append(t, [a, b]), 0.0, period)
    lo_end, hi_end = min(a, b), max(a, b)
    ends = [np.full_like(t, lo_end), np.clip(t, lo_end, hi_end), np.full_like(t, hi_end)]
    total = np.zeros_like(t)
    for lo, hi in itertools.pairwise(ends):
        shift = np.where(0.5 * (lo + hi) < t, period, 0.0)
        total += np.exp(m * (hi - t + shift)) - np.exp(m * (lo - t + shift))
    total /= m * math.expm1(m * period)
    return total if a <= b else -total


def ode_exp_integral(m: float, period: float, t: float, a: float, b: float) -> float:
    """Integral of the periodic ODE kernel in its second variable over [a, b]."""
    return float(ode_exp_integrals(m, period, np.array([t]), a, b)[0])


def h_ode_piecewise_small_t(p: ProblemParams, t: SidedPoint, s: SidedPoint) -> float:
    """Kernel of ``v' + m v + M v([t]) = h`` on ``[0, T]`` with ``T <= 1``.

    For ``m != 0`` this is ``G(t, s) - M/(m+M) G(0, s)``. At ``m = 0`` the explicit form
    ``(1 - M t)/(M T)``, plus one when ``s < t``, is used.

    Raises:
        DomainError: T > 1 or coordinates outside [0, T].
        SingularParameterError: m + M = 0.
        AmbiguousSideError: t and s coincide without a side to separate them.

    """
    if p.T > 1:
        raise DomainError("the closed form needs T <= 1; assemble the kernel instead")
    p.require_off_eigenline()
    if p.ode_singular:
        _check_domain(np.array([t.value, s.value]), 0.0, p.T)
        order = compare(s, t)
        if order == 0:
            raise AmbiguousSideError("the kernel jumps on s = t; give the point a side")
        value = (1.0 - p.big_m * t.value) / (p.big_m * p.T)
        return value + 1.0 if order < 0 else value
    value = g_ode_exp(p, t, s)
    if p.big_m:
        value -= p.big_m / (p.m + p.big_m) * g_ode_exp(p, ZERO, s)
    return value


def h_ode_minimum(p: ProblemParams) -> float:
    """Minimum of the T <= 1 piecewise ODE kernel for m > 0 and m + M > 0."""
    if p.m <= 0 or p.m + p.big_m <= 0:
        raise DomainError("the closed-form minimum needs m > 0 and m + M > 0")
    e = math.exp(p.m * p.T)
    denom = (e - 1.0) * (p.m + p.big_m)
    if p.big_m <= 0:
        return p.m / denom
    return (p.m + p.big_m - e * p.big_m) / denom


## Reflection on [-T, T]


def g_reflection_second_order(m: float, period: float, t: float, s: float) -> float:
    """Kernel of ``v'' + m^2 v = h`` with periodic conditions on ``[-T, T]``."""
    if m == 0:
        raise SingularParameterError("reflection_singular", "the second-order kernel needs m != 0")
    _require_reflection(m, period)
    _check_domain(np.array([t, s]), -period, period)
    arg = period + s - t if s <= t else period - s + t
    return math.cos(m * arg) / (2.0 * m * math.sin(m * period))


def _reflection_branches(  # noqa: PLR0913
    m: float,
    period: float,
    t: np.ndarray,
    s: np.ndarray,
    below: np.ndarray,
    anti: np.ndarray,
) -> np.ndarray:
    # below: s < t, anti: -s > t
    even = np.where(anti, np.cos(m * (period + s + t)), np.cos(m * (period - s - t)))
    odd = np.where(below, np.sin(m * (period + s - t)), -np.sin(m * (period - s + t)))
    return (even + odd) / (2.0 * math.sin(m * period))


def g_reflection_table(
    m: float,
    period: float,
    t_keys: np.ndarray,
    s_keys: np.ndarray,
) -> np.ndarray:
    """Tabulate the first-order reflection kernel for every pair of t and s keys.

    Raises:
        SingularParameterError: m = k*pi/T.
        DomainError: coordinates outside [-T, T].
        AmbiguousSideError: some s equals some t, sides included.

    """
    _require_reflection(m, period)
    _check_domain(t_keys[:, 0], -period, period)
    _check_domain(s_keys[:, 0], -period, period)
    tk, sk, below = _split_diagonal(t_keys, s_keys)
    anti = compare_keys(-sk, tk) > 0
    return _reflection_branches(m, period, tk[..., 0], sk[..., 0], below, anti)


def g_reflection(m: float, period: float, t: SidedPoint, s: SidedPoint) -> float:
    """Kernel of ``v'(t) + m v(-t) = h`` with ``v(-T) = v(T)``.

    It equals ``m G(t, -s) - dG/ds(t, s)`` for the second-order kernel ``G``. Four branches,
    split by ``s`` against ``t`` and ``-s`` against ``t``, share the factor ``1/(2 sin mT)``.
    The kernel is continuous across ``s = -t``, so only ``s = t`` needs a side.
    """
    return float(g_reflection_table(m, period, point_keys([t]), point_keys([s]))[0, 0])


def integral_g_reflection_array(
    m: float,
    period: float,
    t: np.ndarray,
    a: float,
    b: float,
) -> np.ndarray:
    """Integrals of the reflection kernel in its second variable over [a, b], one per t.

    The interval is cut at ``r = t`` and ``r = -t`` and each piece integrated with the
    antiderivative of its branch. Pieces that fall outside [a, b] collapse to zero length.
    """
    _require_reflection(m, period)
    t = np.asarray(t, dtype=float)
    _check_domain(np.append(t, [a, b]), -period, period)
    lo_end, hi_end = min(a, b), max(a, b)
    ends = [
        np.full_like(t, lo_end),
        np.clip(np.minimum(t, -t), lo_end, hi_end),
        np.clip(np.maximum(t, -t), lo_end, hi_end),
        np.full_like(t, hi_end),
    ]

    def antiderivative(r: np.ndarray, below: np.ndarray, anti: np.ndarray) -> np.ndarray:
        even = np.where(anti, np.sin(m * (period + r + t)), -np.sin(m * (period - r - t)))
        odd = np.where(below, -np.cos(m * (period + r - t)), -np.cos(m * (period - r + t)))
        return even + odd

    total = np.zeros_like(t)
    for lo, hi in itertools.pairwise(ends):
        mid = 0.5 * (lo + hi)
        below, anti = mid < t, -mid > t
        total += antiderivative(hi, below, anti) - antiderivative(lo, below, anti)
    total /= 2.0 * m * math.sin(m * period)
    return total if a <= b else -total


def integral_g_reflection(m: float, period: float, t: SidedPoint, a: float, b: float) -> float:
    """Integral of the reflection kernel in its second variable over [a, b].

    The side of t does not matter: the kernel only jumps on the line r = t.
    """
    return float(integral_g_reflection_array(m, period, np.array([t.value]), a, b)[0])


def g_reflection_sign(
    m: float,
    period: float,
    samples: int = const.SIGN_GRID,
) -> tuple[float, float]:
    """Smallest and largest value of the reflection kernel on a square sample grid."""
    grid = np.linspace(-period, period, samples)
    table = g_reflection_table(m, period, exact_keys(grid), exact_keys(grid, side=1))
    return float(table.min()), float(table.max())


def h_reflection_small_t(p: ProblemParams, t: SidedPoint, s: SidedPoint) -> float:
    """Kernel of ``v'(t) + m v(-t) + M v([t]) = h`` on ``[-T, T]`` with ``T <= 1``.

    ``G(t, s) - M/(m+M) G(0, s)`` with ``G`` the first-order reflection kernel. Across
    ``s = 0`` at ``t = 0`` it jumps by ``m/(m+M)``.

    Raises:
        DomainError: T > 1.
        SingularParameterError: m + M = 0 or m = k*pi/T.

    """
    if p.T > 1:
        raise DomainError("the closed form needs T <= 1; assemble the kernel instead")
    p.require_off_eigenline()
    value = g_reflection(p.m, p.T, t, s)
    if p.big_m:
        value -= p.big_m / (p.m + p.big_m) * g_reflection(p.m, p.T, ZERO, s)
    return value


def q_bar_pair(s: SidedPoint, lower: float) -> tuple[SidedPoint, SidedPoint]:
    """Point ``(s-, s)`` of the diagonal trace, or ``(lower, lower+)`` at the left end."""
    if s.value == lower:
        return SidedPoint.exact(lower), SidedPoint.plus(lower)
    return s.below(), s


def q_bar(p: ProblemParams, s: SidedPoint, h: Evaluator) -> float:
    """Diagonal trace ``s -> H(s-, s)``, with ``H(-T, -T+)`` at the left end.

    Args:
        p (ProblemParams): Parameters of the kernel.
        s (SidedPoint): Point of [-T, T].
        h (Evaluator): Any evaluator of the reflection kernel with piecewise argument.

    Returns:
        float: the trace value.

    """
    _check_domain(s.value, -p.T, p.T)
    return h(*q_bar_pair(s, -p.T))
