"""Small analytic ODE systems used to verify the solvers independently of
the reservoir model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .ode import OdeSystem


@dataclass
class TestSystem(OdeSystem):
    """ODE system built from closures, with an optional exact implicit-Euler
    step map for reference trajectories."""

    __test__ = False  # not a pytest test class despite the name

    name: str
    n_x: int
    rhs_fn: Callable[[np.ndarray], np.ndarray]
    jac_fn: Callable[[np.ndarray], sp.csc_matrix]
    exact_implicit_step: Callable[[np.ndarray, float], np.ndarray] | None = None

    def rhs(self, x, u=None, d=None):
        return self.rhs_fn(np.asarray(x, dtype=float))

    def jacobian(self, x, u=None, d=None):
        return self.jac_fn(np.asarray(x, dtype=float))


def linear_decay_system(n: int, lam: float) -> TestSystem:
    """xdot = -lam * x; the implicit-Euler step is exactly x / (1 + lam dt)."""
    if n < 1 or lam < 0:
        raise ValueError("need n >= 1 and lam >= 0")
    jac = sp.csc_matrix(-lam * sp.identity(n))
    return TestSystem(
        name=f"linear_decay(n={n}, lam={lam})",
        n_x=n,
        rhs_fn=lambda x: -lam * x,
        jac_fn=lambda x: jac,
        exact_implicit_step=lambda x, dt: x / (1.0 + lam * dt),
    )


def robertson_like_stiff_system() -> TestSystem:
    """The classic three-species stiff reaction kinetics.

    Rates span eight orders of magnitude; the total x1 + x2 + x3 is
    conserved exactly by the continuous system and up to the Newton
    tolerance per step by the discrete scheme.
    """
    k1, k2, k3 = 0.04, 3e7, 1e4

    def rhs(x):
        r1 = k1 * x[0]
        r2 = k2 * x[1] ** 2
        r3 = k3 * x[1] * x[2]
        return np.array([-r1 + r3, r1 - r2 - r3, r2])

    def jac(x):
        return sp.csc_matrix(np.array([
            [-k1, k3 * x[2], k3 * x[1]],
            [k1, -2.0 * k2 * x[1] - k3 * x[2], -k3 * x[1]],
            [0.0, 2.0 * k2 * x[1], 0.0],
        ]))

    return TestSystem("robertson_like", 3, rhs, jac)


def random_polynomial_system(n: int, seed: int) -> TestSystem:
    """Dense quadratic-cubic system f(x) = A x + B x^2 + C x^3 (elementwise
    powers) with an analytic Jacobian; used for finite-difference checks."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) / np.sqrt(n)
    b = rng.standard_normal((n, n)) / (2.0 * n)
    c = rng.standard_normal((n, n)) / (6.0 * n)

    def rhs(x):
        return a @ x + b @ x ** 2 + c @ x ** 3

    def jac(x):
        return sp.csc_matrix(a + b * (2.0 * x)[None, :] + c * (3.0 * x ** 2)[None, :])

    return TestSystem(f"random_polynomial(n={n}, seed={seed})", n, rhs, jac)
