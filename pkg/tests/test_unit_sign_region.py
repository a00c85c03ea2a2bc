import io
import math
import unittest

import numpy as np

from greensign import sign_region
from greensign.assembly import assemble
from greensign.closed_form import KernelKind, ProblemParams
from greensign.errors import DomainError
from greensign.sign_region import Candidates, SignClass, Strategy
from greensign.utils import SidedPoint


def reflection_edge(m: float, period: float) -> float:
    return 0.5 * m * (1 / math.tan(m * period) - 1)


class ClosedFormRegionTest(unittest.TestCase):
    def test_ode_region(self) -> None:
        lo, hi = sign_region.ode_region_boundary(1.0, 1.0)
        self.assertEqual(-1.0, lo)
        self.assertAlmostEqual(0.58198, hi, places=5)
        self.assertEqual((0.0, 1.0), sign_region.ode_region_boundary(0.0, 1.0))

    def test_ode_negative_region(self) -> None:
        lo, hi = sign_region.ode_region_boundary(1.0, 1.0, negative=True)
        self.assertAlmostEqual(1 / (math.exp(-1) - 1), lo)
        self.assertAlmostEqual(-1.0, hi)

    def test_reflection_region(self) -> None:
        lo, hi = sign_region.reflection_region_boundary_small_t(0.5, 1.0)
        self.assertEqual(-0.5, lo)
        self.assertAlmostEqual(reflection_edge(0.5, 1.0), hi)
        self.assertEqual((0.0, 0.5), sign_region.reflection_region_boundary_small_t(0.0, 1.0))

    def test_reflection_negative_region(self) -> None:
        lo, hi = sign_region.reflection_region_boundary_small_t(0.5, 1.0, negative=True)
        self.assertAlmostEqual(-0.25 * (1 + 1 / math.tan(0.5)), lo)
        self.assertAlmostEqual(-0.5, hi)

    def test_domain(self) -> None:
        self.assertRaises(DomainError, sign_region.ode_region_boundary, 1.0, 2.0)
        self.assertRaises(DomainError, sign_region.reflection_region_boundary_small_t, 1.0, 1.0)
        self.assertRaises(DomainError, sign_region.reflection_region_boundary_small_t, 0.1, 1.2)


class ClassifyTest(unittest.TestCase):
    def test_short_interval(self) -> None:
        self.assertEqual(SignClass.POSITIVE, sign_region.classify_point(0.5, 0.19, 1.0))
        self.assertEqual(SignClass.SIGN_CHANGING, sign_region.classify_point(0.5, 0.22, 1.0))
        self.assertEqual(SignClass.NEGATIVE, sign_region.classify_point(-0.5, -0.19, 1.0))
        self.assertEqual(SignClass.NEGATIVE, sign_region.classify_point(0.5, -0.6, 1.0))

    def test_singular(self) -> None:
        self.assertEqual(SignClass.SINGULAR, sign_region.classify_point(0.5, -0.5, 1.0))
        self.assertEqual(SignClass.SINGULAR, sign_region.classify_point(0.21, -0.21, 1.6))
        self.assertEqual(SignClass.SINGULAR, sign_region.classify_point(math.pi, 0.1, 1.0))

    def test_large_m_changes_sign(self) -> None:
        found = sign_region.classify(1.0, 0.1, 1.0)
        self.assertEqual(SignClass.SIGN_CHANGING, found.sign)

    def test_three_cells(self) -> None:
        self.assertEqual(SignClass.POSITIVE, sign_region.classify_point(0.21, 0.2, 1.6))

    def test_min_scan_agrees_with_closed_form(self) -> None:
        for big_m, expected in ((0.19, SignClass.POSITIVE), (0.22, SignClass.SIGN_CHANGING)):
            found = sign_region.classify(0.5, big_m, 1.0, strategy=Strategy.MIN_SCAN)
            self.assertEqual(expected, found.sign)
            self.assertEqual(Strategy.MIN_SCAN, found.strategy)

    def test_fixed_point_agrees_with_closed_form(self) -> None:
        # positive for 0.3 < M < 0.635 at m = -0.3
        self.assertAlmostEqual(0.63490, reflection_edge(-0.3, 1.0), places=4)
        for big_m, expected in ((0.5, SignClass.POSITIVE), (0.7, SignClass.SIGN_CHANGING)):
            found = sign_region.classify(-0.3, big_m, 1.0, strategy=Strategy.FIXED_POINT_SCAN)
            self.assertEqual(expected, found.sign)

    def test_sign_flip(self) -> None:
        flipped = {
            SignClass.POSITIVE: SignClass.NEGATIVE,
            SignClass.NEGATIVE: SignClass.POSITIVE,
            SignClass.SIGN_CHANGING: SignClass.SIGN_CHANGING,
            SignClass.SINGULAR: SignClass.SINGULAR,
            SignClass.UNDETERMINED: SignClass.UNDETERMINED,
        }
        for m, big_m in ((0.3, 0.2), (0.3, -0.1)):
            a = sign_region.classify_point(m, big_m, 1.3)
            b = sign_region.classify_point(-m, -big_m, 1.3)
            self.assertEqual(flipped[a], b)

    def test_positive_needs_positive_sum(self) -> None:
        for m, big_m in ((0.3, -0.4), (-0.2, 0.1), (0.1, -0.2)):
            self.assertNotEqual(SignClass.POSITIVE, sign_region.classify_point(m, big_m, 1.3))

    def test_label(self) -> None:
        self.assertEqual("sign-changing", SignClass.SIGN_CHANGING.label)
        self.assertEqual("positive", SignClass.POSITIVE.label)


class MinimumTest(unittest.TestCase):
    def test_minimum_below_zero_for_positive_big_m(self) -> None:
        k = assemble(ProblemParams(0.5, 0.19, 1.0))
        found = sign_region.min_scan_minimum(k)
        self.assertEqual(SidedPoint.minus(0.0), found.s)
        self.assertGreater(found.value, 0.0)

    def test_minimum_above_zero_for_negative_big_m(self) -> None:
        k = assemble(ProblemParams(0.5, -0.2, 1.0))
        found = sign_region.min_scan_minimum(k)
        self.assertEqual(SidedPoint.plus(0.0), found.s)

    def test_minimum_vanishes_on_edge(self) -> None:
        k = assemble(ProblemParams(0.5, reflection_edge(0.5, 1.0), 1.0))
        found = sign_region.min_scan_minimum(k)
        self.assertAlmostEqual(0.0, found.value, delta=1e-8)

    def test_grid_never_beats_trace(self) -> None:
        k = assemble(ProblemParams(0.5, 0.1, 1.0))
        trace = sign_region.min_scan_minimum(k)
        full = sign_region.min_scan_minimum(k, Candidates.ALL)
        self.assertAlmostEqual(trace.value, full.value, places=12)

    def test_candidate_pairs(self) -> None:
        k = assemble(ProblemParams(0.21, 0.2, 1.6))
        pairs = sign_region.q_bar_pairs(k)
        # both sides of -1, 0 and 1, and the two ends
        self.assertEqual(8, len(pairs))
        self.assertIn((SidedPoint.minus(0.0).below(), SidedPoint.minus(0.0)), pairs)
        self.assertEqual(15, len(sign_region.q_bar_pairs(k, diagonal_above=True)))


class FixedPointTest(unittest.TestCase):
    def test_reflection_operator_at_zero(self) -> None:
        m, big_m = 0.5, 0.1
        k = assemble(ProblemParams(m, big_m, 1.0))
        s = SidedPoint.minus(0.0)
        value = sign_region.fixed_point_operator(k, s.below(), s)
        c, si = math.cos(m), math.sin(m)
        self.assertAlmostEqual((m + big_m) * (c - si) / (c + si), value, places=10)

    def test_ode_operator_limits(self) -> None:
        m, big_m = 0.7, -0.2
        k = assemble(ProblemParams(m, big_m, 1.0), KernelKind.ODE_PIECEWISE)
        value = sign_region.fixed_point_operator(k, SidedPoint.exact(0.0), SidedPoint.plus(0.0))
        self.assertAlmostEqual(m + big_m, value, places=10)
        s = SidedPoint.minus(1.0)
        value = sign_region.fixed_point_operator(k, s.below(), s)
        self.assertAlmostEqual((m + big_m) * math.exp(-m), value, places=10)

    def test_reflection_boundary(self) -> None:
        edge = sign_region.fixed_point_boundary(0.5, 1.0)
        self.assertAlmostEqual(reflection_edge(0.5, 1.0), edge, delta=1e-6)

    def test_ode_boundary(self) -> None:
        edge = sign_region.fixed_point_boundary(0.5, 1.0, kind=KernelKind.ODE_PIECEWISE)
        self.assertAlmostEqual(0.5 / math.expm1(0.5), edge, delta=1e-6)


class SweepTest(unittest.TestCase):
    def test_small_lattice(self) -> None:
        grid = sign_region.sweep_region((0.1, 0.7), (-0.4, 0.4), (3, 4), 1.0, threads=2)
        self.assertEqual((3, 4), grid.cells.shape)
        np.testing.assert_allclose([0.2, 0.4, 0.6], grid.m_axis)
        np.testing.assert_allclose([-0.3, -0.1, 0.1, 0.3], grid.big_m_axis)
        self.assertEqual(SignClass.POSITIVE, grid.sign(0, 3))
        self.assertEqual(SignClass.POSITIVE, grid.sign(2, 0))
        self.assertEqual(SignClass.SIGN_CHANGING, grid.sign(2, 3))
        self.assertEqual(12, sum(grid.counts().values()))

    def test_scans_agree_with_closed_form(self) -> None:
        args = ((-0.7, 0.7), (-1.0, 1.0), (4, 9), 1.0)
        closed = sign_region.sweep_region(*args, threads=2)
        step = float(closed.big_m_axis[1] - closed.big_m_axis[0])
        compared = 0
        for strategy in (Strategy.MIN_SCAN, Strategy.FIXED_POINT_SCAN):
            scanned = sign_region.sweep_region(*args, strategy=strategy, threads=2)
            for i, m in enumerate(closed.m_axis):
                edges = [
                    *sign_region.reflection_region_boundary_small_t(float(m), 1.0),
                    *sign_region.reflection_region_boundary_small_t(float(m), 1.0, negative=True),
                ]
                for j, big_m in enumerate(closed.big_m_axis):
                    if min(abs(big_m - e) for e in edges) < step:
                        continue
                    compared += 1
                    self.assertEqual(closed.sign(i, j), scanned.sign(i, j), (strategy, m, big_m))
        self.assertGreater(compared, 20)

    def test_parallel_matches_serial(self) -> None:
        args = ((0.1, 0.5), (0.0, 0.3), (2, 3), 1.4)
        serial = sign_region.sweep_region(*args, threads=1)
        parallel = sign_region.sweep_region(*args, threads=3)
        np.testing.assert_array_equal(serial.cells, parallel.cells)

    def test_empty_range(self) -> None:
        grid = sign_region.sweep_region((0.0, 1.0), (0.0, 0.0), (4, 4), 1.0, threads=1)
        self.assertEqual((4, 0), grid.cells.shape)
        out = io.StringIO()
        grid.write_csv(out)
        self.assertEqual("m,M,class\n", out.getvalue())

    def test_csv_and_json(self) -> None:
        grid = sign_region.sweep_region((0.0, 0.4), (0.0, 0.4), (1, 1), 1.0, threads=1)
        out = io.StringIO()
        grid.write_csv(out)
        lines = out.getvalue().splitlines()
        self.assertEqual(["m,M,class", "0.20000000000000001,0.20000000000000001,positive"], lines)
        data = grid.to_json()
        self.assertEqual([int(SignClass.POSITIVE)], data["classes"])
        self.assertEqual(["closed-form-reflection"], data["strategies"])

    def test_rejects_unsorted_axes(self) -> None:
        self.assertRaises(
            DomainError,
            sign_region.RegionGrid,
            np.array([0.2, 0.1]),
            np.array([0.0]),
            1.0,
            KernelKind.REFLECTION_PIECEWISE,
            np.zeros((2, 1), dtype=int),
            ((), ()),
        )

    def test_boundary_polylines(self) -> None:
        rows = sign_region.boundary_polylines(np.array([0.5, 1.0]), 1.0)
        self.assertEqual(1, len(rows))
        self.assertAlmostEqual(reflection_edge(0.5, 1.0), rows[0]["positive_high"])
        self.assertEqual([], sign_region.boundary_polylines(np.array([0.5]), 1.6))

    def test_audit_is_consistent(self) -> None:
        grid = sign_region.sweep_region((0.1, 0.3), (0.05, 0.15), (2, 2), 1.3, threads=1)
        findings = sign_region.conjecture_audit(grid)
        self.assertEqual(grid.counts()[SignClass.POSITIVE], len(findings))
        self.assertTrue(all(f.consistent for f in findings))

    def test_audit_on_three_cells(self) -> None:
        grid = sign_region.sweep_region((0.05, 0.35), (-0.3, 0.3), (3, 4), 1.6, threads=2)
        positive = grid.counts()[SignClass.POSITIVE]
        self.assertGreater(positive, 0)
        findings = sign_region.conjecture_audit(grid)
        self.assertEqual(positive, len(findings))
        for finding in findings:
            self.assertTrue(finding.consistent, finding)
            self.assertGreater(finding.minimum.value, 0.0)
