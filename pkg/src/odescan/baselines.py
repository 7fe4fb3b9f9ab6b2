"""Sequential reference solvers and the Parareal predictor-corrector.

The sequential solvers are the ground truth the parallel Newton solver is
checked against: marching an explicit method forward, or solving one small
Newton problem per step for an implicit method. Parareal is the classical
parallel-in-time alternative used as a runtime comparison point; it splits
the horizon into M coarse intervals, propagates cheap coarse predictions
sequentially, and corrects them with fine integrations that run in
parallel across intervals.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .newton_pint import NonFiniteError, Trajectory, n_steps_for
from .problems import OdeProblem
from .steppers import StepperIncrement

__all__ = [
    "InnerNewtonFailedError",
    "PararealConfig",
    "PararealResult",
    "solve_sequential_explicit",
    "solve_sequential_implicit",
    "solve_parareal",
]


class InnerNewtonFailedError(Exception):
    """The per-step Newton solve of the implicit baseline stalled.

    step is the 0-based time step whose root find did not reach tolerance.
    """

    def __init__(self, step: int, singular: bool = False):
        self.step = int(step)
        self.singular = bool(singular)
        why = ("hit a singular Jacobian" if singular
               else "did not reach tolerance")
        super().__init__(f"inner Newton solve at time step {step} {why}")


def _resolve_n(problem: OdeProblem, dt: float, n_steps) -> int:
    if n_steps is None:
        return n_steps_for(problem, dt)
    n = int(n_steps)
    if n < 0:
        raise ValueError(f"n_steps must be nonnegative, got {n_steps}")
    if not dt >= 0.0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    return n


def _require_compiled(problem: OdeProblem):
    if problem.f_into is None or problem.jac_into is None:
        raise ValueError(
            f"problem {problem.name!r} lacks compiled f_into/jac_into"
        )


def solve_sequential_explicit(problem: OdeProblem, stepper: StepperIncrement,
                              dt: float, n_steps=None) -> Trajectory:
    """March x_{k+1} = x_k + g(x_k, dt) for n steps.

    n_steps defaults to spanning [t0, tf]; pass it explicitly to integrate
    a different horizon (0 gives a trajectory holding only x0).
    """
    if stepper.kind != "explicit":
        raise ValueError(f"expected an explicit stepper, got {stepper.kind!r}")
    if stepper.problem is not problem:
        raise ValueError("stepper was built for a different problem instance")
    _require_compiled(problem)
    n = _resolve_n(problem, dt, n_steps)
    X = np.empty((n, problem.dim))
    _kernels.seq_explicit(problem.f_into, stepper.tableau.a,
                          stepper.tableau.b, problem.x0, dt, n, X)
    if not np.all(np.isfinite(X)):
        bad = int(np.argmax(~np.isfinite(X).all(axis=1)))
        raise NonFiniteError(bad)
    return Trajectory(problem.x0.copy(), X, dt, n)


def solve_sequential_implicit(problem: OdeProblem, stepper: StepperIncrement,
                              dt: float, inner_newton_tol: float = 1e-12,
                              inner_max_iters: int = 50,
                              n_steps=None) -> Trajectory:
    """March an implicit method, solving each step's root problem by Newton.

    Each step solves r(x) = x - x_k - g(x_k, x, dt) = 0 with Jacobian
    I - dg/dx, warm-started at x_k, until the infinity norm of r drops to
    inner_newton_tol or inner_max_iters is exhausted.
    """
    if stepper.kind != "implicit":
        raise ValueError(f"expected an implicit stepper, got {stepper.kind!r}")
    if stepper.problem is not problem:
        raise ValueError("stepper was built for a different problem instance")
    _require_compiled(problem)
    if inner_newton_tol < 0.0:
        raise ValueError("inner_newton_tol must be nonnegative")
    if inner_max_iters < 1:
        raise ValueError("inner_max_iters must be at least 1")
    n = _resolve_n(problem, dt, n_steps)
    w_prev, w_next = stepper.weights
    X = np.empty((n, problem.dim))
    status = _kernels.seq_implicit(
        problem.f_into, problem.jac_into, w_prev, w_next,
        problem.x0, dt, n, inner_newton_tol, inner_max_iters, X,
    )
    if status <= -2:
        raise InnerNewtonFailedError(-status - 2, singular=True)
    if status >= 0:
        raise InnerNewtonFailedError(status)
    if not np.all(np.isfinite(X)):
        bad = int(np.argmax(~np.isfinite(X).all(axis=1)))
        raise NonFiniteError(bad)
    return Trajectory(problem.x0.copy(), X, dt, n)


@dataclass
class PararealConfig:
    """Shape of a Parareal run.

    n_coarse coarse intervals, n_iterations correction rounds, and
    fine_substeps fine steps inside each interval; the fine grid therefore
    has n_coarse * fine_substeps steps in total.
    """

    n_coarse: int
    n_iterations: int
    fine_substeps: int

    def __post_init__(self):
        if self.n_coarse < 1:
            raise ValueError("n_coarse must be at least 1")
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be at least 1")
        if self.fine_substeps < 1:
            raise ValueError("fine_substeps must be at least 1")

    @property
    def n_fine_total(self) -> int:
        return self.n_coarse * self.fine_substeps


@dataclass
class PararealResult:
    """Final coarse nodes, the concatenated fine trajectory, and the
    per-round node iterates.

    node_history[0] is the sequential coarse initialization; entry i is the
    node vector after correction round i. trajectory concatenates the fine
    sub-trajectories of the last fine pass, which started from the
    previous round's nodes; its interval endpoints can therefore differ
    from coarse_nodes by the size of the final correction.
    """

    coarse_nodes: np.ndarray
    trajectory: Trajectory
    node_history: list = field(default_factory=list)


def solve_parareal(problem: OdeProblem, coarse_stepper: StepperIncrement,
                   fine_stepper: StepperIncrement,
                   config: PararealConfig) -> PararealResult:
    """Predictor-corrector parallel-in-time solve.

    One sequential coarse pass initializes the nodes (a single coarse step
    spans a whole interval). Each round then runs the fine integrator over
    every interval in parallel from the current nodes and applies the
    sequential correction
        x_{k+1} <- G(x_k^new) + F(x_k^old) - G(x_k^old).
    Both steppers must be explicit; stiff problems are outside this
    method's reach here because an explicit coarse step over a long
    interval blows up.
    """
    for role, st in (("coarse", coarse_stepper), ("fine", fine_stepper)):
        if st.kind != "explicit":
            raise ValueError(f"{role} stepper must be explicit, got {st.kind!r}")
        if st.problem is not problem:
            raise ValueError(
                f"{role} stepper was built for a different problem instance"
            )
    _require_compiled(problem)

    m = config.n_coarse
    sub = config.fine_substeps
    d = problem.dim
    span = problem.tf - problem.t0
    dt_coarse = span / m
    dt_fine = span / config.n_fine_total

    def coarse_step(x):
        return x + coarse_stepper.eval(x, dt_coarse)

    nodes = np.empty((m + 1, d))
    nodes[0] = problem.x0
    g_prev = np.empty((m, d))
    for k in range(m):
        g_prev[k] = coarse_step(nodes[k])
        nodes[k + 1] = g_prev[k]
    node_history = [nodes.copy()]

    fa = fine_stepper.tableau.a
    fb = fine_stepper.tableau.b
    fine_out = np.empty((m, sub, d))
    for rnd in range(config.n_iterations):
        _kernels.parareal_fine(problem.f_into, fa, fb, nodes[:m],
                               dt_fine, sub, fine_out)
        fine_ends = fine_out[:, -1, :]
        new_nodes = np.empty_like(nodes)
        new_nodes[0] = problem.x0
        for k in range(m):
            gk = coarse_step(new_nodes[k])
            new_nodes[k + 1] = gk + fine_ends[k] - g_prev[k]
            g_prev[k] = gk
        nodes = new_nodes
        if not np.all(np.isfinite(nodes)):
            raise NonFiniteError(rnd + 1)
        node_history.append(nodes.copy())

    fine_states = fine_out.reshape(config.n_fine_total, d).copy()
    traj = Trajectory(problem.x0.copy(), fine_states, dt_fine,
                      config.n_fine_total)
    return PararealResult(coarse_nodes=nodes, trajectory=traj,
                          node_history=node_history)
