"""Parallel-in-time nonlinear ODE solving via associative scans.

Rolling out all N steps of a one-step method as a single stacked
root-finding problem h(xi) = 0 makes the Jacobian block lower bidiagonal,
so every Newton step is an affine recurrence that a parallel associative
scan evaluates in logarithmic depth. The package provides that solver
(newton_pint), the scan primitive (affine_scan), benchmark ODE problems
(problems), explicit Runge-Kutta and implicit one-step methods (steppers),
sequential and Parareal baselines (baselines), and a benchmarking CLI
(cli_bench, installed as the `odescan` script).
"""

from .affine_scan import (
    AffineElement,
    combine,
    identity,
    init_elements,
    scan_parallel,
    scan_sequential,
    extract_states,
)
from .baselines import (
    InnerNewtonFailedError,
    PararealConfig,
    PararealResult,
    solve_parareal,
    solve_sequential_explicit,
    solve_sequential_implicit,
)
from .linalg_small import SingularMatrixError, inf_norm, lu_solve, mat_mul, mat_vec
from .newton_pint import (
    GUESS_POLICIES,
    NewtonConfig,
    NonFiniteError,
    SingularDiagonalBlockError,
    SolveReport,
    Trajectory,
    initial_guess,
    n_steps_for,
    solve,
)
from .problems import (
    PROBLEM_NAMES,
    OdeProblem,
    cart_pole,
    dahlquist,
    get_problem,
    logistic,
    robertson,
    van_der_pol,
)
from .steppers import (
    EULER_TABLEAU,
    RK4_TABLEAU,
    STEPPER_NAMES,
    ButcherTableau,
    StepperIncrement,
    explicit_euler,
    explicit_rk,
    get_stepper,
    implicit_euler,
    trapezoidal,
)
from .threads import hardware_threads, max_threads, set_threads

__version__ = "0.1.0"

__all__ = [
    "AffineElement",
    "combine",
    "identity",
    "init_elements",
    "scan_parallel",
    "scan_sequential",
    "extract_states",
    "InnerNewtonFailedError",
    "PararealConfig",
    "PararealResult",
    "solve_parareal",
    "solve_sequential_explicit",
    "solve_sequential_implicit",
    "SingularMatrixError",
    "inf_norm",
    "lu_solve",
    "mat_mul",
    "mat_vec",
    "GUESS_POLICIES",
    "NewtonConfig",
    "NonFiniteError",
    "SingularDiagonalBlockError",
    "SolveReport",
    "Trajectory",
    "initial_guess",
    "n_steps_for",
    "solve",
    "PROBLEM_NAMES",
    "OdeProblem",
    "cart_pole",
    "dahlquist",
    "get_problem",
    "logistic",
    "robertson",
    "van_der_pol",
    "EULER_TABLEAU",
    "RK4_TABLEAU",
    "STEPPER_NAMES",
    "ButcherTableau",
    "StepperIncrement",
    "explicit_euler",
    "explicit_rk",
    "get_stepper",
    "implicit_euler",
    "trapezoidal",
    "hardware_threads",
    "max_threads",
    "set_threads",
    "__version__",
]
