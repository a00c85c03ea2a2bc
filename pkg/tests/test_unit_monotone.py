import io
import unittest

import numpy as np

from greensign import monotone
from greensign.assembly import assemble
from greensign.closed_form import ProblemParams
from greensign.errors import (
    ClassificationGateError,
    DomainError,
    GridMismatchError,
    MonotonicityViolationError,
)
from greensign.monotone import Grid, MonotoneProblem
from greensign.utils import Side

EXAMPLE_ONE = ProblemParams(0.5, 0.2, 1.0)
EXAMPLE_TWO = ProblemParams(0.21, 0.2, 1.6)


def zero_rhs(t: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:  # noqa: ARG001
    return np.zeros_like(t)


class GridTest(unittest.TestCase):
    def test_nodes(self) -> None:
        grid = Grid(1.0, 4)
        np.testing.assert_allclose(np.linspace(-1, 1, 9), grid.nodes)
        self.assertEqual(9, grid.size)
        self.assertEqual(4, grid.index(0.0))
        np.testing.assert_array_equal(np.arange(9)[::-1], grid.mirror())

    def test_integers_must_be_nodes(self) -> None:
        self.assertRaises(GridMismatchError, Grid, 1.6, 100)
        self.assertRaises(DomainError, Grid, 1.0, 0)
        Grid(1.6, 256)

    def test_cell_index(self) -> None:
        grid = Grid(1.6, 8)
        one, minus_one = grid.index(1.0), grid.index(-1.0)
        self.assertEqual(13, one)
        self.assertEqual(one, grid.cell_index(Side.PLUS)[one])
        self.assertEqual(grid.index(0.0), grid.cell_index(Side.MINUS)[one])
        self.assertEqual(grid.index(0.0), grid.cell_index(Side.PLUS)[minus_one])
        self.assertEqual(minus_one, grid.cell_index(Side.MINUS)[minus_one])

    def test_integer_nodes(self) -> None:
        grid = Grid(1.6, 8)
        self.assertEqual([-1.0, 0.0, 1.0], grid.nodes[grid.integer_nodes()].tolist())


class ProblemTest(unittest.TestCase):
    def test_starting_pair_order(self) -> None:
        self.assertRaises(DomainError, MonotoneProblem, zero_rhs, EXAMPLE_ONE, -1.0, 1.0)
        MonotoneProblem(zero_rhs, EXAMPLE_ONE, -1.0, 1.0, negative=True)

    def test_bad_settings(self) -> None:
        self.assertRaises(DomainError, MonotoneProblem, zero_rhs, EXAMPLE_ONE, 1.0, 0.0, tol=0.0)

    def test_unknown_builtin(self) -> None:
        self.assertRaises(DomainError, monotone.builtin_problem, "cubic", EXAMPLE_ONE)
        self.assertRaises(DomainError, monotone.builtin_problem, "tanh2", EXAMPLE_ONE, -0.1)

    def test_lambda_above_bound_warns(self) -> None:
        with self.assertLogs("greensign.monotone", "WARNING"):
            monotone.builtin_problem("tanh2", EXAMPLE_ONE, 0.3, grid_n=8)

    def test_negative_swaps_pair(self) -> None:
        problem = monotone.builtin_problem("tanh2", EXAMPLE_ONE, 0.2, grid_n=8, negative=True)
        alpha, beta = problem.start()
        self.assertTrue(np.all(alpha == -1.0))
        self.assertTrue(np.all(beta == 1.0))


class IterationTest(unittest.TestCase):
    def test_zero_rhs_is_fixed(self) -> None:
        problem = MonotoneProblem(zero_rhs, EXAMPLE_ONE, 0.0, 0.0, grid_n=16)
        trace = monotone.monotone_iterate(problem, threads=1)
        self.assertEqual(0, trace.converged_at)
        self.assertEqual(0.0, trace.final_gap)
        self.assertEqual([True], trace.monotone_ok)

    def test_linear_probe(self) -> None:
        problem = monotone.builtin_problem("linear-probe", EXAMPLE_ONE, grid_n=128, max_iter=5)
        trace = monotone.monotone_iterate(problem, threads=1)
        np.testing.assert_allclose(1 / 0.7, trace.alpha_seq[-1], atol=1e-3)
        np.testing.assert_allclose(1 / 0.7, trace.beta_seq[-1], atol=1e-3)
        self.assertIsNotNone(trace.converged_at)
        self.assertTrue(all(trace.monotone_ok))

    def test_linear_probe_three_cells(self) -> None:
        problem = monotone.builtin_problem("linear-probe", EXAMPLE_TWO, grid_n=160, max_iter=3)
        trace = monotone.monotone_iterate(problem, threads=2)
        np.testing.assert_allclose(1 / 0.41, trace.alpha_seq[-1], atol=1e-3)

    def test_first_example(self) -> None:
        problem = monotone.builtin_problem("tanh2", EXAMPLE_ONE, 0.2)
        trace = monotone.monotone_iterate(problem, threads=2)
        self.assertTrue(all(trace.monotone_ok))
        self.assertLess(trace.final_gap, 1e-6)
        for alpha, beta in zip(trace.alpha_seq, trace.beta_seq, strict=True):
            self.assertTrue(np.all(beta <= alpha + 1e-9))
        residual, gap = monotone.solution_residual(problem.f, trace.alpha_seq[-1], 1.0)
        self.assertLess(residual, 5e-3)
        self.assertLess(gap, 1e-6)

    def test_second_example(self) -> None:
        problem = monotone.builtin_problem("tanh1", EXAMPLE_TWO, 0.2, max_iter=10)
        trace = monotone.monotone_iterate(problem, threads=2)
        self.assertTrue(all(trace.monotone_ok))
        self.assertLessEqual(trace.iterations, 10)
        self.assertLess(trace.final_gap, 1e-2)
        for n in range(trace.iterations):
            self.assertTrue(np.all(trace.alpha_seq[n + 1] <= trace.alpha_seq[n] + 1e-9))
            self.assertTrue(np.all(trace.beta_seq[n + 1] >= trace.beta_seq[n] - 1e-9))
        residual, _ = monotone.solution_residual(problem.f, trace.alpha_seq[-1], 1.6)
        self.assertLess(residual, 5e-3)

    def test_violation_raises(self) -> None:
        def steep(t: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:  # noqa: ARG001
            return -5.0 * x

        problem = MonotoneProblem(steep, EXAMPLE_ONE, 1.0, -1.0, grid_n=16, max_iter=2)
        with self.assertRaises(MonotonicityViolationError) as ctx:
            monotone.monotone_iterate(problem, threads=1)
        self.assertEqual(1, ctx.exception.iteration)
        with self.assertLogs("greensign.monotone", "WARNING"):
            trace = monotone.monotone_iterate(problem, threads=1, strict=False)
        self.assertFalse(trace.monotone_ok[0])

    def test_literal_form_differs(self) -> None:
        problem = monotone.builtin_problem("tanh1", EXAMPLE_ONE, 0.2, grid_n=16, max_iter=1)
        literal = monotone.builtin_problem(
            "tanh1",
            EXAMPLE_ONE,
            0.2,
            grid_n=16,
            max_iter=1,
            literal_form=True,
        )
        tables = monotone.kernel_tables(assemble(EXAMPLE_ONE), problem.grid, threads=1)
        gamma = np.linspace(-0.5, 0.5, problem.grid.size)
        reflected = monotone.operator_t(problem, gamma, tables)
        direct = monotone.operator_t(literal, gamma, tables)
        self.assertFalse(np.allclose(reflected, direct))

    def test_operator_checks_grid(self) -> None:
        problem = monotone.builtin_problem("tanh2", EXAMPLE_ONE, 0.2, grid_n=8)
        tables = monotone.kernel_tables(assemble(EXAMPLE_ONE), problem.grid, threads=1)
        self.assertRaises(GridMismatchError, monotone.operator_t, problem, np.zeros(5), tables)

    def test_tables_do_not_depend_on_threads(self) -> None:
        k = assemble(EXAMPLE_TWO)
        grid = Grid(1.6, 16)
        serial = monotone.kernel_tables(k, grid, threads=1)
        parallel = monotone.kernel_tables(k, grid, threads=3)
        np.testing.assert_allclose(serial.plus, parallel.plus, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(serial.minus, parallel.minus, rtol=1e-12, atol=1e-14)

    def test_trace_output(self) -> None:
        problem = monotone.builtin_problem("linear-probe", EXAMPLE_ONE, grid_n=4, max_iter=2)
        trace = monotone.monotone_iterate(problem, threads=1)
        out = io.StringIO()
        trace.write_csv(out)
        lines = out.getvalue().splitlines()
        self.assertEqual("iter,t,alpha,beta", lines[0])
        self.assertEqual(1 + (trace.iterations + 1) * 9, len(lines))
        data = trace.to_json()
        self.assertEqual(trace.converged_at, data["converged_at"])
        self.assertEqual(9, len(data["grid"]))


class GateTest(unittest.TestCase):
    def test_sign_changing_kernel_refused(self) -> None:
        problem = monotone.builtin_problem("tanh2", ProblemParams(0.5, 0.3, 1.0), 0.2, grid_n=8)
        self.assertRaises(ClassificationGateError, monotone.require_certified, problem)

    def test_positive_kernel_accepted(self) -> None:
        problem = monotone.builtin_problem("tanh2", EXAMPLE_ONE, 0.2, grid_n=8)
        monotone.require_certified(problem)

    def test_iteration_refuses_sign_changing_kernel(self) -> None:
        params = ProblemParams(0.5, 0.3, 1.0)
        problem = monotone.builtin_problem("tanh2", params, 0.2, grid_n=8, max_iter=1)
        self.assertRaises(ClassificationGateError, monotone.monotone_iterate, problem, threads=1)
        trace = monotone.monotone_iterate(problem, threads=1, strict=False, certify=False)
        self.assertEqual(1, trace.iterations)

    def test_dual_form_needs_negative_kernel(self) -> None:
        problem = monotone.builtin_problem("tanh2", EXAMPLE_ONE, 0.2, grid_n=8, negative=True)
        self.assertRaises(ClassificationGateError, monotone.require_certified, problem)


class ResidualTest(unittest.TestCase):
    def test_constant_lower_and_upper_solutions(self) -> None:
        problem = monotone.builtin_problem("tanh2", EXAMPLE_ONE, 0.2, grid_n=64)
        self.assertTrue(monotone.check_lower_solution(problem.f, np.ones(129), 1.0).valid)
        self.assertTrue(monotone.check_upper_solution(problem.f, -np.ones(129), 1.0).valid)

    def test_wrong_pair_is_rejected(self) -> None:
        problem = monotone.builtin_problem("tanh2", EXAMPLE_ONE, 0.2, grid_n=64)
        report = monotone.check_lower_solution(problem.f, -np.ones(129), 1.0)
        self.assertFalse(report.valid)
        self.assertGreater(report.worst, 0.0)

    def test_exact_solution(self) -> None:
        residual, gap = monotone.solution_residual(zero_rhs, np.full(17, 2.0), 1.0)
        self.assertEqual(0.0, residual)
        self.assertEqual(0.0, gap)

    def test_sample_count(self) -> None:
        self.assertRaises(GridMismatchError, monotone.solution_residual, zero_rhs, np.ones(4), 1.0)


class LipschitzTest(unittest.TestCase):
    def test_admissible_lambda(self) -> None:
        problem = monotone.builtin_problem("tanh2", EXAMPLE_ONE, 0.2, grid_n=32)
        report = monotone.sample_one_sided_lipschitz(problem)
        self.assertEqual(0, report.violations)

    def test_large_lambda(self) -> None:
        with self.assertLogs("greensign.monotone", "WARNING"):
            problem = monotone.builtin_problem("tanh2", EXAMPLE_ONE, 1.0, grid_n=32)
            report = monotone.sample_one_sided_lipschitz(problem)
        self.assertGreater(report.violations, 0)
