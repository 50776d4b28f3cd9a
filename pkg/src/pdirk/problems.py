"""Test systems: spectral Burgers, shallow water, porous medium, plus a
scalar contractive ODE.

Each problem bundles its right-hand side, exact Jacobian, and a family of
named linearization strategies.  A strategy is a factory mapping an anchor
state to an affine surrogate f_sur(u) = M u + g frozen at that anchor:

* ``lin1``   -- freeze the nonlinear coefficient inside the flux, then
                differentiate (value-consistent at the anchor).
* ``lin2*``  -- differentiate the PDE first, then freeze coefficients
                (consistency depends on the spatial resolution).
* ``taylor`` -- first-order Taylor expansion f(a) + f'(a)(u - a)
                (value- and Jacobian-consistent at the anchor).

``EXACT_STRATEGY`` names the degenerate choice f_sur = f, which the
integrator handles with Newton solves instead of an affine operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral import PeriodicGrid, build_diff_matrices
from .tableau import ConsistencyClass

__all__ = [
    "AffineOperator",
    "ProblemInstance",
    "TauProbe",
    "burgers_problem",
    "shallow_water_problem",
    "porous_medium_problem",
    "scalar_contractive_problem",
    "problem_by_name",
    "tau_consistency_probe",
    "EXACT_STRATEGY",
    "PROBLEM_NAMES",
]

EXACT_STRATEGY = "exact"
PROBLEM_NAMES = ("burgers", "shallow-water", "porous-medium", "scalar")

VACUUM_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class AffineOperator:
    """Affine surrogate u -> M u + g built at a fixed anchor state."""

    m: np.ndarray
    g: np.ndarray
    anchor: np.ndarray
    strategy_name: str

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.m @ u + self.g


StrategyFactory = Callable[[np.ndarray], AffineOperator]


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    name: str
    grid: PeriodicGrid | None
    dimension: int
    rhs: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    strategies: dict[str, StrategyFactory]
    initial_condition: np.ndarray
    default_tf: float

    def strategy_factory(self, name: str) -> StrategyFactory:
        try:
            return self.strategies[name]
        except KeyError:
            raise KeyError(
                f"problem {self.name!r} has no strategy {name!r}; available: "
                f"{sorted(self.strategies)} (plus {EXACT_STRATEGY!r})"
            ) from None


def _taylor_factory(problem_rhs, problem_jac) -> StrategyFactory:
    def factory(anchor: np.ndarray) -> AffineOperator:
        m = problem_jac(anchor)
        g = problem_rhs(anchor) - m @ anchor
        return AffineOperator(m=m, g=g, anchor=anchor, strategy_name="taylor")
    return factory


def burgers_problem(n: int) -> ProblemInstance:
    """Inviscid Burgers u_t + (u^2/2)_x = 0 on [0, 2pi), sine initial data."""
    grid = PeriodicGrid(n=n, x_left=0.0, x_right=2.0 * np.pi)
    dx = build_diff_matrices(grid).dx
    x = grid.points

    def rhs(u):
        return -0.5 * (dx @ (u * u))

    def jac(u):
        return -(dx * u[None, :])

    def lin1(anchor):
        return AffineOperator(m=-0.5 * (dx * anchor[None, :]), g=np.zeros(n),
                              anchor=anchor, strategy_name="lin1")

    def lin2(anchor):
        return AffineOperator(m=-(anchor[:, None] * dx), g=np.zeros(n),
                              anchor=anchor, strategy_name="lin2")

    return ProblemInstance(
        name="burgers",
        grid=grid,
        dimension=n,
        rhs=rhs,
        jacobian=jac,
        strategies={"lin1": lin1, "lin2": lin2, "taylor": _taylor_factory(rhs, jac)},
        initial_condition=0.5 + 0.25 * np.sin(x),
        default_tf=3.5,
    )


def shallow_water_problem(n: int) -> ProblemInstance:
    """Shallow water in (height, mass-flux) variables on [0, 2pi).

    The state stacks the height block on top of the flux block.  All
    linearizations divide by the anchor height, so anchors with near-zero
    height entries are rejected.
    """
    grid = PeriodicGrid(n=n, x_left=0.0, x_right=2.0 * np.pi)
    dx = build_diff_matrices(grid).dx
    x = grid.points
    zeros = np.zeros((n, n))

    def split(y):
        return y[:n], y[n:]

    def flux_ratio(eta, mu):
        if np.min(np.abs(eta)) < VACUUM_TOL:
            raise ValueError("vacuum state in linearization")
        return mu / eta

    def rhs(y):
        eta, mu = split(y)
        return -np.concatenate([dx @ mu, dx @ (mu * mu / eta + 0.5 * eta * eta)])

    def jac(y):
        eta, mu = split(y)
        r = flux_ratio(eta, mu)
        return np.block([
            [zeros, -dx],
            [dx * (r * r - eta)[None, :], -2.0 * (dx * r[None, :])],
        ])

    def lin1(anchor):
        eta, mu = split(anchor)
        r = flux_ratio(eta, mu)
        m = -np.block([
            [zeros, dx],
            [0.5 * (dx * eta[None, :]), dx * r[None, :]],
        ])
        return AffineOperator(m=m, g=np.zeros(2 * n), anchor=anchor,
                              strategy_name="lin1")

    def lin2(anchor):
        eta, mu = split(anchor)
        r = flux_ratio(eta, mu)
        m = -np.block([
            [zeros, dx],
            [(eta - r * r)[:, None] * dx, 2.0 * r[:, None] * dx],
        ])
        return AffineOperator(m=m, g=np.zeros(2 * n), anchor=anchor,
                              strategy_name="lin2")

    eta0 = np.sin(x) / 10.0 + 1.0
    return ProblemInstance(
        name="shallow-water",
        grid=grid,
        dimension=2 * n,
        rhs=rhs,
        jacobian=jac,
        strategies={"lin1": lin1, "lin2": lin2, "taylor": _taylor_factory(rhs, jac)},
        initial_condition=np.concatenate([eta0, np.zeros(n)]),
        default_tf=1.0,
    )


def porous_medium_problem(n: int) -> ProblemInstance:
    """Degenerate diffusion u_t = (u^3)_xx on [-pi, pi)."""
    grid = PeriodicGrid(n=n, x_left=-np.pi, x_right=np.pi)
    mats = build_diff_matrices(grid)
    dx, dxx = mats.dx, mats.dxx
    x = grid.points

    def rhs(u):
        return dxx @ (u**3)

    def jac(u):
        return 3.0 * (dxx * (u * u)[None, :])

    def lin1(anchor):
        return AffineOperator(m=dxx * (anchor * anchor)[None, :], g=np.zeros(n),
                              anchor=anchor, strategy_name="lin1")

    def lin2a(anchor):
        return AffineOperator(m=3.0 * (dx * (anchor * anchor)[None, :]) @ dx,
                              g=np.zeros(n), anchor=anchor, strategy_name="lin2a")

    def lin2b(anchor):
        m = (6.0 * (anchor * (dx @ anchor))[:, None] * dx
             + 3.0 * (anchor * anchor)[:, None] * dxx)
        return AffineOperator(m=m, g=np.zeros(n), anchor=anchor,
                              strategy_name="lin2b")

    return ProblemInstance(
        name="porous-medium",
        grid=grid,
        dimension=n,
        rhs=rhs,
        jacobian=jac,
        strategies={"lin1": lin1, "lin2a": lin2a, "lin2b": lin2b,
                    "taylor": _taylor_factory(rhs, jac)},
        initial_condition=0.5 * np.cos(x) + 0.5,
        default_tf=0.5,
    )


def scalar_contractive_problem() -> ProblemInstance:
    """u' = -u^3: a smooth contractive scalar testbed."""

    def rhs(u):
        return -(u**3)

    def jac(u):
        return np.array([[-3.0 * u[0] ** 2]])

    def lin1(anchor):
        return AffineOperator(m=np.array([[-anchor[0] ** 2]]), g=np.zeros(1),
                              anchor=anchor, strategy_name="lin1")

    return ProblemInstance(
        name="scalar",
        grid=None,
        dimension=1,
        rhs=rhs,
        jacobian=jac,
        strategies={"lin1": lin1, "taylor": _taylor_factory(rhs, jac)},
        initial_condition=np.array([1.0]),
        default_tf=2.0,
    )


def problem_by_name(name: str, n: int = 101) -> ProblemInstance:
    key = name.strip().lower()
    if key == "burgers":
        return burgers_problem(n)
    if key == "shallow-water":
        return shallow_water_problem(n)
    if key == "porous-medium":
        return porous_medium_problem(n)
    if key == "scalar":
        return scalar_contractive_problem()
    raise KeyError(f"unknown problem {name!r}; available: {', '.join(PROBLEM_NAMES)}")


@dataclass(frozen=True)
class TauProbe:
    """Measured surrogate defect at an anchor: values and Jacobians."""

    tau_norm: float
    tau_u_norm: float
    consistency_class: ConsistencyClass


def tau_consistency_probe(p: ProblemInstance, strategy: str,
                          u: np.ndarray) -> TauProbe:
    """Build the surrogate anchored at u and measure its defect there.

    tau_norm is the max-norm mismatch of the surrogate value against the
    true right-hand side at u; tau_u_norm the max-abs-entry mismatch of
    the surrogate matrix against the true Jacobian.  Both are judged
    against 1e-9 relative to the Jacobian's max entry.
    """
    jac = p.jacobian(u)
    if strategy == EXACT_STRATEGY:
        tau, tau_u = 0.0, 0.0
    else:
        op = p.strategy_factory(strategy)(u)
        tau = float(np.max(np.abs(op.apply(u) - p.rhs(u))))
        tau_u = float(np.max(np.abs(op.m - jac)))
    tol = 1e-9 * float(np.max(np.abs(jac)))
    if tau < tol and tau_u < tol:
        klass = ConsistencyClass.TAU_AND_DERIV_ZERO
    elif tau < tol:
        klass = ConsistencyClass.TAU_ZERO
    else:
        klass = ConsistencyClass.NONE
    return TauProbe(tau_norm=tau, tau_u_norm=tau_u, consistency_class=klass)
