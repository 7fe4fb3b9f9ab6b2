"""Parallel Newton solver: oracles, edge cases, kernel/reference parity."""

import numpy as np
import pytest
from numba import njit

from odescan.baselines import solve_sequential_explicit, solve_sequential_implicit
from odescan.newton_pint import (
    GUESS_POLICIES,
    NewtonConfig,
    NonFiniteError,
    SingularDiagonalBlockError,
    Trajectory,
    dense_jacobian_explicit,
    dense_jacobian_implicit,
    initial_guess,
    n_steps_for,
    newton_step_explicit,
    newton_step_implicit,
    residual_explicit,
    residual_implicit,
    solve,
)
from odescan.problems import OdeProblem, get_problem
from odescan.steppers import RK4_TABLEAU, get_stepper


@njit(cache=False)
def _exp_f(x, out):
    out[0] = np.exp(x[0])


@njit(cache=False)
def _exp_jac(x, out):
    out[0, 0] = np.exp(x[0])


def exp_problem():
    """dy/dt = exp(y): overflows fast, for divergence-path tests."""
    return OdeProblem(
        name="exp_growth", dim=1,
        f=lambda x: np.array([np.exp(x[0])]),
        jac_f=lambda x: np.array([[np.exp(x[0])]]),
        x0=np.array([0.0]), t0=0.0, tf=1.0,
        f_into=_exp_f, jac_into=_exp_jac,
    )


@njit(cache=False)
def _square_f(x, out):
    out[0] = x[0] * x[0]


@njit(cache=False)
def _square_jac(x, out):
    out[0, 0] = 2.0 * x[0]


def square_problem():
    """dy/dt = y^2, whose backward-Euler block 1 - 2 dt y is singular at
    y = 1/(2 dt): for singular-diagonal-path tests."""
    return OdeProblem(
        name="square", dim=1,
        f=lambda x: np.array([x[0] ** 2]),
        jac_f=lambda x: np.array([[2.0 * x[0]]]),
        x0=np.array([1.0]), t0=0.0, tf=1.0,
        f_into=_square_f, jac_into=_square_jac,
    )


def manual_rk4_increment(f, x, dt):
    """Independent stage-by-stage RK4, matching the classic tableau."""
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


class TestNStepsFor:
    def test_divides_cleanly(self):
        assert n_steps_for(get_problem("logistic"), 1e-2) == 1000
        assert n_steps_for(get_problem("dahlquist"), 0.1) == 40

    def test_indivisible_dt_raises(self):
        with pytest.raises(ValueError):
            n_steps_for(get_problem("logistic"), 0.3)

    def test_nonpositive_dt_raises(self):
        with pytest.raises(ValueError):
            n_steps_for(get_problem("logistic"), 0.0)
        with pytest.raises(ValueError):
            n_steps_for(get_problem("logistic"), -0.1)


class TestTrajectory:
    def test_full_states_prepends_x0(self):
        traj = Trajectory(np.array([1.0]), np.array([[2.0], [3.0]]), 0.5, 2)
        full = traj.full_states()
        assert full.shape == (3, 1)
        np.testing.assert_array_equal(full[:, 0], [1.0, 2.0, 3.0])

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            Trajectory(np.array([1.0]), np.ones((2, 2)), 0.5, 2)
        with pytest.raises(ValueError):
            Trajectory(np.array([1.0]), np.ones((2, 1)), 0.5, 3)
        with pytest.raises(ValueError):
            Trajectory(np.array([1.0]), np.ones((2, 1)), -0.5, 2)


class TestInitialGuess:
    def test_constant_policies(self):
        p = get_problem("vdp")
        ones = initial_guess("ones", p, 4)
        zeros = initial_guess("zeros", p, 4)
        repl = initial_guess("replicate_x0", p, 4)
        assert ones.states.shape == (4, 2)
        np.testing.assert_array_equal(ones.states, np.ones((4, 2)))
        np.testing.assert_array_equal(zeros.states, np.zeros((4, 2)))
        np.testing.assert_array_equal(repl.states, np.tile(p.x0, (4, 1)))
        assert ones.dt == pytest.approx(2.5)

    def test_coarse_euler_stride_one_is_plain_euler(self):
        p = get_problem("logistic")
        guess = initial_guess("coarse_euler", p, 5)
        v = p.x0.copy()
        dt = (p.tf - p.t0) / 5
        for k in range(5):
            v = v + dt * p.f(v)
            np.testing.assert_allclose(guess.states[k], v, rtol=1e-14)

    def test_coarse_euler_holds_values_between_nodes(self):
        p = get_problem("logistic")
        n = 250  # stride max(1, 250 // 100) = 2
        guess = initial_guess("coarse_euler", p, n)
        dt = (p.tf - p.t0) / n
        v = p.x0.copy()
        k = 0
        while k < n:
            v = v + 2 * dt * p.f(v)
            np.testing.assert_allclose(guess.states[k], v, rtol=1e-14)
            if k + 1 < n:
                np.testing.assert_array_equal(guess.states[k],
                                              guess.states[k + 1])
            k += 2

    def test_unknown_policy_raises(self):
        with pytest.raises(ValueError):
            initial_guess("interpolate", get_problem("logistic"), 10)

    def test_policy_registry(self):
        assert GUESS_POLICIES == ("ones", "zeros", "replicate_x0",
                                  "coarse_euler")


class TestResiduals:
    def test_explicit_matches_manual_stage_loop(self):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        rng = np.random.default_rng(4)
        n = 7
        traj = Trajectory(p.x0.copy(),
                          0.5 + 0.1 * rng.standard_normal((n, 1)),
                          (p.tf - p.t0) / n, n)
        blocks = residual_explicit(traj, st)
        full = traj.full_states()
        for k in range(n):
            expected = (full[k + 1] - full[k]
                        - manual_rk4_increment(p.f, full[k], traj.dt))
            np.testing.assert_allclose(blocks[k], expected, rtol=1e-13,
                                       atol=1e-15)

    def test_implicit_matches_manual_formula(self):
        p = get_problem("robertson")
        st = get_stepper("trapezoidal", p)
        rng = np.random.default_rng(9)
        n = 5
        states = np.abs(rng.standard_normal((n, 3))) * 0.3
        traj = Trajectory(p.x0.copy(), states, (p.tf - p.t0) / n, n)
        blocks = residual_implicit(traj, st)
        full = traj.full_states()
        for k in range(n):
            g = 0.5 * traj.dt * (p.f(full[k]) + p.f(full[k + 1]))
            expected = full[k + 1] - full[k] - g
            np.testing.assert_allclose(blocks[k], expected, rtol=1e-13)

    def test_kind_mismatch_raises(self):
        p = get_problem("logistic")
        traj = initial_guess("ones", p, 4)
        with pytest.raises(ValueError):
            residual_explicit(traj, get_stepper("backward_euler", p))
        with pytest.raises(ValueError):
            residual_implicit(traj, get_stepper("rk4", p))


class TestNewtonStepVsDense:
    @pytest.mark.parametrize("n", [2, 5, 50])
    def test_explicit_logistic(self, n):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        rng = np.random.default_rng(n)
        traj = Trajectory(p.x0.copy(),
                          0.5 + 0.2 * rng.standard_normal((n, 1)),
                          (p.tf - p.t0) / n, n)
        h = residual_explicit(traj, st)
        u_scan = np.concatenate(newton_step_explicit(traj, h, st))
        H = dense_jacobian_explicit(traj, st)
        u_dense = np.linalg.solve(H, -np.concatenate(h))
        np.testing.assert_allclose(u_scan, u_dense, rtol=1e-9, atol=1e-9)

    @pytest.mark.parametrize("n", [2, 5, 50])
    def test_implicit_dahlquist(self, n):
        p = get_problem("dahlquist")
        st = get_stepper("backward_euler", p)
        rng = np.random.default_rng(100 + n)
        traj = Trajectory(p.x0.copy(), rng.standard_normal((n, 1)),
                          (p.tf - p.t0) / n, n)
        h = residual_implicit(traj, st)
        u_scan = np.concatenate(newton_step_implicit(traj, h, st))
        H = dense_jacobian_implicit(traj, st)
        u_dense = np.linalg.solve(H, -np.concatenate(h))
        np.testing.assert_allclose(u_scan, u_dense, rtol=1e-9, atol=1e-9)

    def test_implicit_multidim_vdp_trapezoidal(self):
        p = get_problem("vdp")
        st = get_stepper("trapezoidal", p)
        rng = np.random.default_rng(55)
        n = 12
        traj = Trajectory(p.x0.copy(), rng.standard_normal((n, 2)),
                          (p.tf - p.t0) / n, n)
        h = residual_implicit(traj, st)
        u_scan = np.concatenate(newton_step_implicit(traj, h, st))
        H = dense_jacobian_implicit(traj, st)
        u_dense = np.linalg.solve(H, -np.concatenate(h))
        np.testing.assert_allclose(u_scan, u_dense, rtol=1e-9, atol=1e-11)

    def test_singular_diagonal_block_raises_with_index(self):
        p = square_problem()
        st = get_stepper("backward_euler", p)
        n = 10
        states = np.full((n, 1), 5.0)  # 1 - 0.1 * 2 * 5 = 0 on the diagonal
        traj = Trajectory(p.x0.copy(), states, 0.1, n)
        h = residual_implicit(traj, st)
        with pytest.raises(SingularDiagonalBlockError) as exc_info:
            newton_step_implicit(traj, h, st)
        assert exc_info.value.block_index == 0


class TestDenseJacobianStructure:
    def test_explicit_blocks(self):
        p = get_problem("vdp")
        st = get_stepper("euler", p)
        traj = initial_guess("replicate_x0", p, 3)
        H = dense_jacobian_explicit(traj, st)
        assert H.shape == (6, 6)
        eye = np.eye(2)
        for k in range(3):
            np.testing.assert_array_equal(H[2 * k:2 * k + 2, 2 * k:2 * k + 2],
                                          eye)
        np.testing.assert_allclose(
            H[2:4, 0:2], -eye - st.jac_prev(traj.states[0], traj.dt),
            rtol=1e-14)
        np.testing.assert_array_equal(H[0:2, 2:6], np.zeros((2, 4)))
        np.testing.assert_array_equal(H[2:4, 4:6], np.zeros((2, 2)))

    def test_implicit_blocks(self):
        p = get_problem("dahlquist")
        st = get_stepper("backward_euler", p)
        traj = initial_guess("ones", p, 3)
        H = dense_jacobian_implicit(traj, st)
        full = traj.full_states()
        for k in range(3):
            a_expected = 1.0 - st.jac_next(full[k], full[k + 1],
                                           traj.dt)[0, 0]
            assert H[k, k] == pytest.approx(a_expected, rel=1e-14)
        assert H[1, 0] == pytest.approx(-1.0, rel=1e-14)  # jac_prev is zero


class TestSolve:
    def test_history_layout_fixed_iterations(self):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        rep = solve(p, st, 0.1, "ones", NewtonConfig(max_iters=4))
        assert rep.iterations_run == 4
        assert len(rep.residual_history) == 5
        assert len(rep.scaled_residual_history) == 5
        assert rep.residual_history[0] > rep.residual_history[-1]

    def test_scaled_history_equals_plain_for_explicit(self):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        rep = solve(p, st, 0.1, "ones", NewtonConfig(max_iters=3))
        np.testing.assert_array_equal(rep.residual_history,
                                      rep.scaled_residual_history)

    def test_residual_tol_early_exit(self):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        rep = solve(p, st, 0.1, "ones",
                    NewtonConfig(max_iters=20, residual_tol=1e-6))
        assert rep.iterations_run < 20
        assert rep.residual_history[-1] <= 1e-6
        assert len(rep.residual_history) == rep.iterations_run + 1

    def test_zero_tol_forces_fixed_count(self):
        p = get_problem("dahlquist")
        st = get_stepper("backward_euler", p)
        rep = solve(p, st, 0.1, "zeros",
                    NewtonConfig(max_iters=5, residual_tol=0.0))
        assert rep.iterations_run == 5
        assert len(rep.residual_history) == 6

    def test_record_residuals_off(self):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        rep = solve(p, st, 0.1, "ones",
                    NewtonConfig(max_iters=3, record_residuals=False))
        assert rep.residual_history == []
        assert rep.scaled_residual_history == []
        assert rep.wall_time > 0.0

    def test_explicit_converges_to_sequential_solution(self):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        rep = solve(p, st, 1e-2, "ones", NewtonConfig(max_iters=11))
        seq = solve_sequential_explicit(p, st, 1e-2)
        np.testing.assert_allclose(rep.trajectory.states, seq.states,
                                   rtol=0, atol=1e-10)

    def test_implicit_converges_to_sequential_solution(self):
        p = get_problem("dahlquist")
        st = get_stepper("backward_euler", p)
        rep = solve(p, st, 0.1, "zeros", NewtonConfig(max_iters=5))
        seq = solve_sequential_implicit(p, st, 0.1)
        np.testing.assert_allclose(rep.trajectory.states, seq.states,
                                   rtol=0, atol=1e-12)

    def test_first_kernel_step_matches_reference_path(self):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        guess = initial_guess("ones", p, 50)
        h = residual_explicit(guess, st)
        u = newton_step_explicit(guess, h, st)
        expected = guess.states + np.vstack(u)
        rep = solve(p, st, (p.tf - p.t0) / 50, "ones",
                    NewtonConfig(max_iters=1))
        np.testing.assert_allclose(rep.trajectory.states, expected,
                                   rtol=1e-12, atol=1e-12)

    def test_trajectory_guess_accepted_and_not_mutated(self):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        guess = initial_guess("ones", p, 100)
        before = guess.states.copy()
        rep = solve(p, st, 0.1, guess, NewtonConfig(max_iters=2))
        np.testing.assert_array_equal(guess.states, before)
        assert rep.trajectory.states is not guess.states

    def test_converged_guess_exits_immediately(self):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        root = solve(p, st, 0.1, "ones", NewtonConfig(max_iters=11)).trajectory
        rep = solve(p, st, 0.1, root,
                    NewtonConfig(max_iters=11, residual_tol=1e-10))
        assert rep.iterations_run == 0
        assert len(rep.residual_history) == 1

    def test_wrong_guess_shape_raises(self):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        bad = initial_guess("ones", p, 50)
        with pytest.raises(ValueError):
            solve(p, st, 0.1, bad, NewtonConfig(max_iters=1))

    def test_unknown_policy_raises(self):
        p = get_problem("logistic")
        st = get_stepper("rk4", p)
        with pytest.raises(ValueError):
            solve(p, st, 0.1, "magic", NewtonConfig(max_iters=1))

    def test_stepper_problem_mismatch_raises(self):
        p1 = get_problem("logistic")
        p2 = get_problem("vdp")
        st = get_stepper("rk4", p2)
        with pytest.raises(ValueError):
            solve(p1, st, 0.1, "ones", NewtonConfig(max_iters=1))

    def test_nonfinite_guess_raises_at_iteration_zero(self):
        p = exp_problem()
        st = get_stepper("euler", p)
        n = 4
        guess = Trajectory(p.x0.copy(), np.full((n, 1), 800.0), 0.25, n)
        with pytest.raises(NonFiniteError) as exc_info:
            solve(p, st, 0.25, guess, NewtonConfig(max_iters=3))
        assert exc_info.value.iteration == 0

    def test_singular_diagonal_block_in_kernel_path(self):
        p = square_problem()
        st = get_stepper("backward_euler", p)
        guess = Trajectory(p.x0.copy(), np.full((10, 1), 5.0), 0.1, 10)
        with pytest.raises(SingularDiagonalBlockError) as exc_info:
            solve(p, st, 0.1, guess, NewtonConfig(max_iters=2))
        assert exc_info.value.block_index == 0

    def test_rk4_vs_euler_share_code_path(self):
        # Forward Euler is the one-stage tableau, so solving with it must
        # agree bitwise with a hand-built one-stage RK solve.
        p = get_problem("logistic")
        euler = get_stepper("euler", p)
        from odescan.steppers import EULER_TABLEAU, explicit_rk
        clone = explicit_rk(p, EULER_TABLEAU, name="euler_clone", order=1)
        r1 = solve(p, euler, 0.1, "ones", NewtonConfig(max_iters=3))
        r2 = solve(p, clone, 0.1, "ones", NewtonConfig(max_iters=3))
        np.testing.assert_array_equal(r1.trajectory.states,
                                      r2.trajectory.states)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            NewtonConfig(max_iters=0)
        with pytest.raises(ValueError):
            NewtonConfig(max_iters=1, residual_tol=-1.0)
