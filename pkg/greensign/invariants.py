"""Self-checks of the kernels.

Each check evaluates one identity the kernels must satisfy at a parameter point, on samples
drawn from a seeded generator, and reports the worst defect against its tolerance.
"""

from __future__ import annotations

import collections
import dataclasses
import logging
import math
from typing import TYPE_CHECKING

import numpy as np

from . import closed_form, const
from .assembly import QuadratureCfg, assemble, build_matrix, comparison_residual, det_a
from .closed_form import KernelKind, ProblemParams
from .errors import GreenSignError
from .utils import SidedPoint

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class CheckResult:
    """Outcome of one check at one parameter point."""

    name: str
    params: ProblemParams
    worst: float
    tol: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return math.isfinite(self.worst) and self.worst <= self.tol

    def __str__(self) -> str:
        status = "ok" if self.passed else "FAIL"
        p = self.params
        text = f"{status:4} {self.name:14} m={p.m:g} M={p.big_m:g} T={p.T:g} "
        text += f"worst={self.worst:.3e} tol={self.tol:.0e}"
        return f"{text} {self.detail}".rstrip()


def _margin_ok(values: Iterable[float], margin: float) -> bool:
    return all(abs(v - round(v)) > margin for v in values)


def sample_pairs(
    rng: np.random.Generator,
    T: float,  # noqa: N803
    count: int,
    *,
    lower: float | None = None,
    margin: float = 100 * const.FD_STEP,
) -> list[tuple[float, float]]:
    """Random (t, s) away from ``s = t``, ``s = -t`` and the integers."""
    lower = -T if lower is None else lower
    pairs: list[tuple[float, float]] = []
    while len(pairs) < count:
        t, s = rng.uniform(lower + margin, T - margin, 2)
        if abs(t - s) > margin and abs(t + s) > margin and _margin_ok((t, s), margin):
            pairs.append((float(t), float(s)))
    return pairs


def check_jump(
    p: ProblemParams,
    rng: np.random.Generator,
    samples: int,
    q: QuadratureCfg,
) -> CheckResult:
    """Unit jump across ``s = t``; across ``s = 0`` at ``t = 0`` the jump is m/(m+M) for T <= 1."""
    k = assemble(p, KernelKind.REFLECTION_PIECEWISE, q)
    worst = 0.0
    for t, _ in sample_pairs(rng, p.T, samples):
        s = SidedPoint.exact(t)
        gap = k(SidedPoint.plus(t), s) - k(SidedPoint.minus(t), s)
        worst = max(worst, abs(gap - 1.0))
    if p.T <= 1:
        zero = SidedPoint.exact(0.0)
        gap = k(zero, SidedPoint.minus(0.0)) - k(zero, SidedPoint.plus(0.0))
        worst = max(worst, abs(gap - p.m / (p.m + p.big_m)))
    return CheckResult("jump", p, worst, const.JUMP_TOL)


def check_symmetry(
    p: ProblemParams,
    rng: np.random.Generator,
    samples: int,
    q: QuadratureCfg,
) -> CheckResult:
    """``H(m, M; t, s) + H(-m, -M; -t, -s) = 0`` and det A unchanged by the sign flip."""
    k = assemble(p, KernelKind.REFLECTION_PIECEWISE, q)
    flipped = assemble(p.negated(), KernelKind.REFLECTION_PIECEWISE, q)
    worst = 0.0
    for t, s in sample_pairs(rng, p.T, samples):
        tp, sp = SidedPoint.exact(t), SidedPoint.exact(s)
        worst = max(worst, abs(k(tp, sp) + flipped(-tp, -sp)))
    det_gap = abs(k.det - flipped.det) / max(1.0, abs(k.det))
    return CheckResult("symmetry", p, max(worst, det_gap), const.SYMMETRY_TOL)


def check_eigenline(
    p: ProblemParams,
    rng: np.random.Generator,  # noqa: ARG001
    samples: int,  # noqa: ARG001
    q: QuadratureCfg,
) -> CheckResult:
    """det A vanishes on m + M = 0 relative to the size of A."""
    on_line = ProblemParams(p.m, -p.m, p.T)
    _, _, matrix = build_matrix(on_line, KernelKind.REFLECTION_PIECEWISE, q)
    det = det_a(on_line, KernelKind.REFLECTION_PIECEWISE, q)
    scale = max(1.0, float(np.linalg.norm(matrix)))
    return CheckResult("eigenline", p, abs(det) / scale, const.DET_GUARD)


def check_residual(
    p: ProblemParams,
    rng: np.random.Generator,
    samples: int,
    q: QuadratureCfg,
) -> CheckResult:
    """Central differences of the defining equations in t.

    ``dH/dt + m H(-t, s) + M H([t], s) = 0`` for the reflection kernel,
    ``dG/dt + m G = 0`` for the periodic ODE kernel and
    ``dH/dt + m H + M H([t], s) = 0`` for its piecewise counterpart.
    """
    k = assemble(p, KernelKind.REFLECTION_PIECEWISE, q)
    h = const.FD_STEP
    worst = 0.0
    for t, s in sample_pairs(rng, p.T, samples):
        sp = SidedPoint.exact(s)
        derivative = (k(SidedPoint.exact(t + h), sp) - k(SidedPoint.exact(t - h), sp)) / (2 * h)
        cell = SidedPoint.exact(float(math.trunc(t)))
        defect = derivative + p.m * k(SidedPoint.exact(-t), sp) + p.big_m * k(cell, sp)
        worst = max(worst, abs(defect))
    if not p.ode_singular:
        for t, s in sample_pairs(rng, p.T, samples, lower=0.0):
            sp = SidedPoint.exact(s)
            ahead = closed_form.g_ode_exp(p, SidedPoint.exact(t + h), sp)
            behind = closed_form.g_ode_exp(p, SidedPoint.exact(t - h), sp)
            here = closed_form.g_ode_exp(p, SidedPoint.exact(t), sp)
            worst = max(worst, abs((ahead - behind) / (2 * h) + p.m * here))
        ode = assemble(p, KernelKind.ODE_PIECEWISE, q)
        for t, s in sample_pairs(rng, p.T, samples, lower=0.0):
            sp = SidedPoint.exact(s)
            ahead, behind = ode(SidedPoint.exact(t + h), sp), ode(SidedPoint.exact(t - h), sp)
            here = ode(SidedPoint.exact(t), sp)
            cell = ode(SidedPoint.exact(float(math.floor(t))), sp)
            worst = max(worst, abs((ahead - behind) / (2 * h) + p.m * here + p.big_m * cell))
    return CheckResult("residual", p, worst, const.FD_RESIDUAL_TOL)


def check_normalisation(
    p: ProblemParams,
    rng: np.random.Generator,
    samples: int,
    q: QuadratureCfg,
) -> CheckResult:
    """Constant right-hand side 1 gives 1/m without and 1/(m + M) with the cell term."""
    k = assemble(p, KernelKind.REFLECTION_PIECEWISE, q)
    ode = None if p.ode_singular else assemble(p, KernelKind.ODE_PIECEWISE, q)
    worst = 0.0
    for t, _ in sample_pairs(rng, p.T, samples):
        tp = SidedPoint.exact(t)
        g = closed_form.integral_g_reflection(p.m, p.T, tp, -p.T, p.T)
        h = k.cell_integrals(tp).sum()
        worst = max(worst, abs(g - 1.0 / p.m), abs(h - 1.0 / (p.m + p.big_m)))
    if ode is not None:
        for t, _ in sample_pairs(rng, p.T, samples, lower=0.0):
            g = closed_form.ode_exp_integral(p.m, p.T, t, 0.0, p.T)
            h = ode.cell_integrals(SidedPoint.exact(t)).sum()
            worst = max(worst, abs(g - 1.0 / p.m), abs(h - 1.0 / (p.m + p.big_m)))
    return CheckResult("normalisation", p, worst, const.NORMALISATION_TOL)


def check_comparison(
    p: ProblemParams,
    rng: np.random.Generator,
    samples: int,
    q: QuadratureCfg,
) -> CheckResult:
    """Relation between the kernels of (m, M) and a nearby pair."""
    worst = 0.0
    for t, s in sample_pairs(rng, p.T, max(1, samples // 4)):
        other = ProblemParams(p.m + rng.uniform(-0.1, 0.1), p.big_m + rng.uniform(-0.1, 0.1), p.T)
        defect = comparison_residual(p, other, SidedPoint.exact(t), SidedPoint.exact(s), q)
        worst = max(worst, abs(defect))
    return CheckResult("comparison", p, worst, const.COMPARISON_TOL)


def check_sign(
    p: ProblemParams,
    rng: np.random.Generator,  # noqa: ARG001
    samples: int,  # noqa: ARG001
    q: QuadratureCfg,  # noqa: ARG001
) -> CheckResult:
    """The reflection kernel has the sign of m when ``|m| T < pi/4``."""
    if abs(p.m) * p.T >= math.pi / 4 or p.m == 0:
        return CheckResult("sign", p, 0.0, 0.0, "skipped: |m| T >= pi/4")
    low, high = closed_form.g_reflection_sign(p.m, p.T)
    worst = max(0.0, -low) if p.m > 0 else max(0.0, high)
    return CheckResult("sign", p, worst, 0.0)


CHECKS: collections.OrderedDict[str, Callable[..., CheckResult]] = collections.OrderedDict(
    [
        ("jump", check_jump),
        ("symmetry", check_symmetry),
        ("eigenline", check_eigenline),
        ("residual", check_residual),
        ("normalisation", check_normalisation),
        ("comparison", check_comparison),
        ("sign", check_sign),
    ],
)


def run_checks(
    points: Iterable[tuple[float, float, float]] = const.CHECK_POINTS,
    seed: int = const.CHECK_SEED,
    samples: int = const.CHECK_SAMPLES,
    q: QuadratureCfg | None = None,
    names: Iterable[str] | None = None,
) -> list[CheckResult]:
    """Run the selected checks at every point; an error inside a check counts as a failure."""
    q = q or QuadratureCfg()
    rng = np.random.default_rng(seed)
    selected = list(CHECKS) if names is None else list(names)
    results = []
    for m, big_m, period in points:
        p = ProblemParams(m, big_m, period)
        for name in selected:
            try:
                result = CHECKS[name](p, rng, samples, q)
            except GreenSignError as exc:
                result = CheckResult(name, p, math.inf, 0.0, f"error: {exc}")
            logger.debug("%s", result)
            results.append(result)
    return results
