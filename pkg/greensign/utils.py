"""Utility functions.

Piecewise-argument truncation, one-sided points and small helpers used throughout greensign.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import os
from typing import TYPE_CHECKING

import numpy as np

from . import const
from .errors import DomainError, NonFiniteResultError

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence


def floor_tz(t: float) -> int:
    """Truncate toward zero.

    ``[t] = n`` on ``[n, n+1)`` for ``n >= 0`` and ``[t] = -n`` on ``(-n-1, -n]``, which is
    integer truncation. In particular ``[t] = 0`` on ``(-1, 1)``.

    Args:
        t (float): Finite real number.

    Raises:
        DomainError: t is not finite.

    Returns:
        int: the truncated value.

    """
    if not math.isfinite(t):
        raise DomainError(f"floor_tz needs a finite argument, got {t!r}")
    return math.trunc(t)


class Side(enum.IntEnum):
    """Approach side of a one-sided point."""

    MINUS = -1
    EXACT = 0
    PLUS = 1

    @property
    def symbol(self) -> str:
        return {Side.MINUS: "-", Side.EXACT: "", Side.PLUS: "+"}[self]


@dataclasses.dataclass(frozen=True)
class SidedPoint:
    """A real coordinate together with the side it is approached from.

    ``side`` is the first-order approach and ``inner`` a second-order one, so that a point just
    below ``0-`` (needed for ``q(0-) = H(0--, 0-)``) is representable. Points are ordered
    lexicographically by ``(value, side, inner)``.
    """

    value: float
    side: Side = Side.EXACT
    inner: Side = Side.EXACT

    @classmethod
    def exact(cls, value: float) -> SidedPoint:
        return cls(float(value))

    @classmethod
    def minus(cls, value: float) -> SidedPoint:
        return cls(float(value), Side.MINUS)

    @classmethod
    def plus(cls, value: float) -> SidedPoint:
        return cls(float(value), Side.PLUS)

    @property
    def key(self) -> tuple[float, int, int]:
        return (self.value, int(self.side), int(self.inner))

    @property
    def is_exact(self) -> bool:
        return self.side == Side.EXACT and self.inner == Side.EXACT

    @property
    def suffix(self) -> str:
        return self.side.symbol + self.inner.symbol

    def __neg__(self) -> SidedPoint:
        return SidedPoint(-self.value, Side(-self.side), Side(-self.inner))

    def below(self) -> SidedPoint:
        """Point infinitesimally below this one."""
        if self.side == Side.EXACT:
            return dataclasses.replace(self, side=Side.MINUS)
        return dataclasses.replace(self, inner=Side.MINUS)

    def above(self) -> SidedPoint:
        """Point infinitesimally above this one."""
        if self.side == Side.EXACT:
            return dataclasses.replace(self, side=Side.PLUS)
        return dataclasses.replace(self, inner=Side.PLUS)

    def __str__(self) -> str:
        return f"{self.value!r}{self.suffix}"


def compare(a: SidedPoint, b: SidedPoint) -> int:
    """Return -1, 0 or 1 as a is below, equal to or above b."""
    ka, kb = a.key, b.key
    return (ka > kb) - (ka < kb)


def floor_sided(p: SidedPoint) -> int:
    """Truncation of a one-sided point, the limit of ``floor_tz`` from the given side."""
    side = p.side if p.side != Side.EXACT else p.inner
    if side == Side.EXACT or not float(p.value).is_integer():
        return floor_tz(p.value)
    n = int(p.value)
    if side == Side.PLUS:
        return n if n >= 0 else n + 1
    return n - 1 if n > 0 else n


def point_keys(points: Iterable[SidedPoint]) -> np.ndarray:
    """Stack point keys into a ``(k, 3)`` float array."""
    rows = [p.key for p in points]
    if not rows:
        return np.zeros((0, 3))
    return np.asarray(rows, dtype=float)


def exact_keys(values: Sequence[float] | np.ndarray, side: int = 0) -> np.ndarray:
    """Keys of plain values, all approached from the same side."""
    values = np.asarray(values, dtype=float)
    keys = np.zeros((values.size, 3))
    keys[:, 0] = values
    keys[:, 1] = side
    return keys


def compare_keys(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorised ``compare`` on broadcastable key arrays with a trailing axis of length 3."""
    diff = np.sign(a - b)
    out = diff[..., 0]
    out = np.where(out == 0, diff[..., 1], out)
    return np.where(out == 0, diff[..., 2], out)


def parse_sided(text: str) -> SidedPoint:
    """Parse ``"0.5"``, ``"0-"``, ``"1+"`` or ``"0--"`` into a sided point.

    Raises:
        DomainError: the text is not a number with at most two side marks.

    """
    body = text.strip()
    marks = ""
    while body and body[-1] in "+-" and len(marks) < 2:  # noqa: PLR2004
        marks = body[-1] + marks
        body = body[:-1]
    try:
        value = float(body)
    except ValueError:
        raise DomainError(f"cannot read a point from {text!r}") from None
    sides = [Side.PLUS if c == "+" else Side.MINUS for c in marks]
    sides += [Side.EXACT] * (2 - len(sides))
    return SidedPoint(value, sides[0], sides[1])


def format_float(x: float) -> str:
    """Round-trip representation with a fixed number of significant digits."""
    return f"{x:.{const.SIGNIFICANT_DIGITS}g}"


def ensure_finite(values: float | np.ndarray, what: str) -> None:
    """Raise when a result contains NaN or infinity."""
    if not np.all(np.isfinite(values)):
        raise NonFiniteResultError(f"{what} is not finite")


def resolve_threads(threads: int | None) -> int:
    """Worker count from the flag, the environment or the machine."""
    if threads is None:
        env = os.environ.get(const.THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise DomainError(f"{const.THREADS_ENV} must be an integer, got {env!r}") from None
    if threads is None:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise DomainError("thread count must be at least 1")
    return threads


def cell_centres(lo: float, hi: float, count: int) -> np.ndarray:
    """Centres of ``count`` equal cells tiling ``[lo, hi]``; empty for a degenerate range."""
    if count <= 0 or not hi > lo:
        return np.zeros(0)
    step = (hi - lo) / count
    return lo + step * (np.arange(count) + 0.5)
