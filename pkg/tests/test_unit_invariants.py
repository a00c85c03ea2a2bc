import unittest
from unittest import mock

import numpy as np

from greensign import invariants
from greensign.closed_form import KernelKind, ProblemParams
from greensign.errors import DomainError


class SamplePairsTest(unittest.TestCase):
    def test_pairs_avoid_jump_lines(self) -> None:
        rng = np.random.default_rng(1)
        for t, s in invariants.sample_pairs(rng, 1.6, 50):
            self.assertGreater(abs(t - s), 1e-3)
            self.assertGreater(abs(t + s), 1e-3)
            self.assertGreater(abs(t - round(t)), 1e-3)
            self.assertLess(abs(s), 1.6)

    def test_lower_end(self) -> None:
        rng = np.random.default_rng(2)
        pairs = invariants.sample_pairs(rng, 1.0, 20, lower=0.0)
        self.assertTrue(all(t > 0 and s > 0 for t, s in pairs))


class RunChecksTest(unittest.TestCase):
    def test_single_cell(self) -> None:
        results = invariants.run_checks([(0.3, 0.2, 0.8)], samples=5)
        self.assertEqual(list(invariants.CHECKS), [r.name for r in results])
        for result in results:
            self.assertTrue(result.passed, str(result))

    def test_three_cells(self) -> None:
        results = invariants.run_checks([(0.21, 0.2, 1.6)], samples=3)
        for result in results:
            self.assertTrue(result.passed, str(result))

    def test_selected_names(self) -> None:
        results = invariants.run_checks([(0.3, 0.2, 0.8)], samples=2, names=["jump", "sign"])
        self.assertEqual(["jump", "sign"], [r.name for r in results])

    def test_sign_skipped_for_large_m(self) -> None:
        results = invariants.run_checks([(2.36, 1.19, 1.0)], samples=2, names=["sign"])
        self.assertTrue(results[0].passed)
        self.assertIn("skipped", results[0].detail)

    def test_error_counts_as_failure(self) -> None:
        broken = mock.Mock(side_effect=DomainError("broken"))
        with mock.patch.dict(invariants.CHECKS, {"jump": broken}):
            results = invariants.run_checks([(0.3, 0.2, 0.8)], samples=2, names=["jump"])
        self.assertFalse(results[0].passed)
        self.assertIn("broken", results[0].detail)
        broken.assert_called_once()

    def test_result_text(self) -> None:
        result = invariants.CheckResult("jump", ProblemParams(0.3, 0.2, 0.8), 1e-12, 1e-9)
        self.assertTrue(str(result).startswith("ok"))
        failed = invariants.CheckResult("jump", ProblemParams(0.3, 0.2, 0.8), 1e-3, 1e-9)
        self.assertTrue(str(failed).startswith("FAIL"))

    def test_residual_covers_ode_kernel(self) -> None:
        with mock.patch.object(invariants, "assemble", wraps=invariants.assemble) as built:
            results = invariants.run_checks([(0.3, 0.2, 0.8)], samples=3, names=["residual"])
        self.assertTrue(results[0].passed, str(results[0]))
        kinds = [c.args[1] for c in built.call_args_list]
        self.assertIn(KernelKind.ODE_PIECEWISE, kinds)
        self.assertIn(KernelKind.REFLECTION_PIECEWISE, kinds)
