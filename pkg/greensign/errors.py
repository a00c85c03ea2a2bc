"""Exceptions raised by greensign.

All of them derive from ``ValueError`` through ``GreenSignError``, so callers that only care
about bad input can keep catching ``ValueError``.
"""

# ruff: noqa: D101, D107

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    import numpy as np


class GreenSignError(ValueError):
    """Base of every greensign error."""


class SingularParameterError(GreenSignError):
    """The kernel does not exist for the given parameters."""

    def __init__(self, predicate: str, message: str) -> None:
        super().__init__(f"{predicate}: {message}")
        self.predicate = predicate


class DomainError(GreenSignError):
    pass


class AmbiguousSideError(GreenSignError):
    """An exact point was requested on a line where the kernel jumps."""


class SingularMatrixError(GreenSignError):
    """The cell matrix is numerically singular: (m, M) is close to an eigenvalue pair."""

    def __init__(self, m: float, big_m: float, matrix: np.ndarray, det: float) -> None:
        super().__init__(f"matrix A is singular near (m, M) = ({m!r}, {big_m!r}), det = {det!r}")
        self.m = m
        self.big_m = big_m
        self.matrix = matrix
        self.det = det


class ZeroDenominatorError(GreenSignError):
    pass


class GridMismatchError(GreenSignError):
    pass


class MonotonicityViolationError(GreenSignError):
    """An iterate left the monotone ordering by more than the allowed slack."""

    def __init__(
        self,
        *,
        iteration: int,
        node: int,
        excess: float,
        trace: Any,  # noqa: ANN401
    ) -> None:
        super().__init__(
            f"monotone ordering violated at iteration {iteration}, node {node} by {excess:.3e}",
        )
        self.iteration = iteration
        self.node = node
        self.excess = excess
        self.trace = trace


class NonFiniteResultError(GreenSignError):
    pass


class ClassificationGateError(GreenSignError):
    """The kernel of (m, M, T) does not have the sign the solver needs."""

    def __init__(self, sign: str, required: str) -> None:
        super().__init__(f"kernel is {sign}, the monotone iteration needs it {required}")
        self.sign = sign
        self.required = required
