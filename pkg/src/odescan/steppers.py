"""Increment functions for one-step integration methods.

A step of any method here has the form x_{k+1} = x_k + g(...). Explicit
methods evaluate g from x_k alone; implicit methods read x_{k+1} as well.
StepperIncrement packages g together with the partial Jacobians the
Newton-step recursions need: dg/dx_k for explicit steps, plus dg/dx_{k+1}
for implicit ones.

Explicit steppers are parameterized by a Butcher tableau; forward Euler is
the one-stage tableau with weight 1, so it shares every code path with the
general Runge-Kutta stepper. The implicit steppers are the weighted
two-point family g = dt (w_prev f(x_k) + w_next f(x_{k+1})): backward Euler
is (0, 1) and the trapezoidal rule is (1/2, 1/2).
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .problems import OdeProblem

__all__ = [
    "ButcherTableau",
    "StepperIncrement",
    "RK4_TABLEAU",
    "EULER_TABLEAU",
    "explicit_euler",
    "explicit_rk",
    "implicit_euler",
    "trapezoidal",
    "get_stepper",
    "STEPPER_NAMES",
]


@dataclass(frozen=True)
class ButcherTableau:
    """Stage coefficients a (s x s) and weights b (s,) of a Runge-Kutta rule."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"a must be square, got shape {a.shape}")
        if b.ndim != 1 or b.shape[0] != a.shape[0]:
            raise ValueError(
                f"b must have one weight per stage: a is {a.shape}, b is {b.shape}"
            )
        if abs(float(b.sum()) - 1.0) > 1e-14:
            raise ValueError(f"stage weights must sum to 1, got {b.sum()!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def s(self) -> int:
        return self.b.shape[0]

    def is_explicit(self) -> bool:
        """True when a is strictly lower triangular (stage i uses stages < i)."""
        return not np.any(np.triu(self.a) != 0.0)


EULER_TABLEAU = ButcherTableau(a=np.zeros((1, 1)), b=np.ones(1))

RK4_TABLEAU = ButcherTableau(
    a=np.array([
        [0.0, 0.0, 0.0, 0.0],
        [0.5, 0.0, 0.0, 0.0],
        [0.0, 0.5, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ]),
    b=np.array([1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]),
)


@dataclass(frozen=True)
class StepperIncrement:
    """g and its partial Jacobians for one integration method on one problem.

    kind is "explicit" or "implicit". For explicit steppers eval and
    jac_prev take (x_prev, dt) and jac_next is None. For implicit steppers
    all three take (x_prev, x_next, dt). tableau is set on the explicit side,
    weights = (w_prev, w_next) on the implicit side; the compiled solvers
    read those fields together with the problem's compiled right-hand side.
    """

    kind: str
    name: str
    order: int
    problem: OdeProblem
    eval: Callable
    jac_prev: Callable
    jac_next: Optional[Callable] = None
    tableau: Optional[ButcherTableau] = field(default=None, repr=False)
    weights: Optional[tuple] = None


def explicit_rk(problem: OdeProblem, tableau: ButcherTableau,
                name: str = "rk", order: int = 0) -> StepperIncrement:
    """General explicit Runge-Kutta increment with analytic Jacobian.

    The Jacobian is chain-ruled through the stage recursion:
    dk_i/dx = J(x_i) (I + dt sum_{j<i} a_ij dk_j/dx) with x_i the stage
    point. Finite differences would be cheaper to write but the Newton
    recursion applies these blocks N times per iteration, so accuracy
    compounds.
    """
    if not tableau.is_explicit():
        raise ValueError("tableau has entries on or above the diagonal; "
                         "only explicit tableaus are supported")
    a, b = tableau.a, tableau.b
    s = tableau.s
    f, jac_f = problem.f, problem.jac_f
    d = problem.dim

    def _stages(x_prev, dt):
        kap = np.empty((s, d))
        for i in range(s):
            xs = x_prev.astype(np.float64, copy=True)
            for j in range(i):
                xs += dt * a[i, j] * kap[j]
            kap[i] = f(xs)
        return kap

    def eval(x_prev, dt):
        x_prev = np.asarray(x_prev, dtype=np.float64)
        kap = _stages(x_prev, dt)
        g = np.zeros(d)
        for i in range(s):
            g += b[i] * kap[i]
        return dt * g

    def jac_prev(x_prev, dt):
        x_prev = np.asarray(x_prev, dtype=np.float64)
        kap = np.empty((s, d))
        dkap = np.empty((s, d, d))
        eye = np.eye(d)
        for i in range(s):
            xs = x_prev.copy()
            M = eye.copy()
            for j in range(i):
                xs += dt * a[i, j] * kap[j]
                M += dt * a[i, j] * dkap[j]
            kap[i] = f(xs)
            dkap[i] = jac_f(xs) @ M
        Jg = np.zeros((d, d))
        for i in range(s):
            Jg += b[i] * dkap[i]
        return dt * Jg

    return StepperIncrement(
        kind="explicit",
        name=name,
        order=order,
        problem=problem,
        eval=eval,
        jac_prev=jac_prev,
        tableau=tableau,
    )


def explicit_euler(problem: OdeProblem) -> StepperIncrement:
    """Forward Euler: g = f(x) dt. Implemented as the one-stage tableau."""
    return explicit_rk(problem, EULER_TABLEAU, name="euler", order=1)


def _implicit_weighted(problem: OdeProblem, w_prev: float, w_next: float,
                       name: str, order: int) -> StepperIncrement:
    f, jac_f = problem.f, problem.jac_f
    d = problem.dim

    def eval(x_prev, x_next, dt):
        return dt * (w_prev * f(np.asarray(x_prev, dtype=np.float64))
                     + w_next * f(np.asarray(x_next, dtype=np.float64)))

    def jac_prev(x_prev, x_next, dt):
        if w_prev == 0.0:
            return np.zeros((d, d))
        return dt * w_prev * jac_f(np.asarray(x_prev, dtype=np.float64))

    def jac_next(x_prev, x_next, dt):
        return dt * w_next * jac_f(np.asarray(x_next, dtype=np.float64))

    return StepperIncrement(
        kind="implicit",
        name=name,
        order=order,
        problem=problem,
        eval=eval,
        jac_prev=jac_prev,
        jac_next=jac_next,
        weights=(w_prev, w_next),
    )


def implicit_euler(problem: OdeProblem) -> StepperIncrement:
    """Backward Euler: g = f(x_next) dt."""
    return _implicit_weighted(problem, 0.0, 1.0, "backward_euler", 1)


def trapezoidal(problem: OdeProblem) -> StepperIncrement:
    """Trapezoidal rule: g = (dt/2) (f(x_prev) + f(x_next))."""
    return _implicit_weighted(problem, 0.5, 0.5, "trapezoidal", 2)


_FACTORIES = {
    "euler": explicit_euler,
    "rk4": lambda p: explicit_rk(p, RK4_TABLEAU, name="rk4", order=4),
    "backward_euler": implicit_euler,
    "trapezoidal": trapezoidal,
}

STEPPER_NAMES = tuple(sorted(_FACTORIES))


def get_stepper(name: str, problem: OdeProblem) -> StepperIncrement:
    """Look a stepper up by its CLI name and bind it to a problem."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(
            f"unknown stepper {name!r}; available: {', '.join(STEPPER_NAMES)}"
        ) from None
    return factory(problem)
