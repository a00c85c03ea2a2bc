"""Module containing the numerical defaults.

Every tolerance, threshold and default problem setting used throughout greensign is placed
here. Changing these values alters how close to a singularity an evaluation is accepted and how
fine the sweeps and solver grids are.
"""

## Singularity guards
# |sin(mT)| must exceed this times max(1, |mT|)
SIN_GUARD = 1e-12
# |m + M| must exceed this times max(1, |m|, |M|)
EIGENLINE_GUARD = 1e-12
# |det A| below this times the product of row norms declares the pair an eigenvalue
DET_GUARD = 1e-8
# denominators of the fixed-point operator
DENOMINATOR_GUARD = 1e-14

## Quadrature
QUAD_REL_TOL = 1e-10
QUAD_ABS_TOL = 1e-12
QUAD_MAX_SUBDIVISIONS = 200

## Region sweep
LATTICE_M = 128
LATTICE_BIG_M = 128
T_POINTS_PER_UNIT = 33
BISECTION_TOL = 1e-8
BISECTION_MAX_EXPANSIONS = 60
CONJECTURE_TOL = 1e-9

## Monotone solver
SOLVER_GRID_N = 256
SOLVER_TOL = 1e-8
SOLVER_MAX_ITER = 64
MONOTONE_SLACK = 1e-9
LOWER_SOLUTION_SLACK = 1e-9
LIPSCHITZ_SAMPLES = 2000

# Worked example with the reflection kernel on [-1, 1]
EXAMPLE_ONE = {"m": 0.5, "M": 0.2, "T": 1.0, "lam": 0.2}
# Worked example with three cells on [-1.6, 1.6]
EXAMPLE_TWO = {"m": 0.21, "M": 0.2, "T": 1.6, "lam": 0.2, "iters": 10}

## Invariant checks
CHECK_SEED = 20240611
CHECK_SAMPLES = 20
FD_STEP = 1e-5
FD_RESIDUAL_TOL = 1e-4
JUMP_TOL = 1e-9
SYMMETRY_TOL = 1e-8
NORMALISATION_TOL = 1e-9
COMPARISON_TOL = 1e-7
SIGN_GRID = 101
CHECK_POINTS = [
    (0.3, 0.2, 0.8),
    (2.36, 1.19, 1.0),
    (0.21, 0.2, 1.6),
    (0.3, 0.2, 1.3),
]

## Output
SIGNIFICANT_DIGITS = 17
THREADS_ENV = "GREENSIGN_THREADS"

## Exit codes
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_SINGULAR_PARAMETER = 2
EXIT_SINGULAR_MATRIX = 3
EXIT_GATE = 4
EXIT_MONOTONICITY = 5
EXIT_NON_FINITE = 6
EXIT_USAGE = 7
