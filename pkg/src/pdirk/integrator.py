"""Time integration: perturbed DIRK stepping with affine stage solves.

Each implicit stage of a perturbed method solves

    u_i = r_i + dt * at_ii * f(u_i) + dt * ae_ii * (M u_i + g)

where ``r_i`` collects the step start plus the weighted history of true
and surrogate evaluations, ``(M, g)`` is the affine surrogate anchored per
the anchor policy, and ``at = A - Aeps``.  For every built-in method the
true-rhs weight ``at_ii`` is zero, so the stage reduces to one dense LU
solve on ``(I - dt*ae_ii*M)``; a Newton fallback covers custom tableaus
with implicit true-rhs diagonals and the degenerate "exact" strategy
(surrogate == true rhs).  The step update always combines true right-hand
side values only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .problems import EXACT_STRATEGY, AffineOperator, ProblemInstance
from .tableau import PerturbedTableau, Tableau

__all__ = [
    "AnchorPolicy",
    "IntegrationError",
    "BlowUpError",
    "StageSolveError",
    "SolverStats",
    "StepRecord",
    "TrajectoryStats",
    "perturbed_dirk_step",
    "integrate",
    "reference_solution",
    "resolved_newton_baseline",
    "BLOWUP_THRESHOLD",
]

BLOWUP_THRESHOLD = 1e8
NEWTON_MAX_ITER = 50
NEWTON_TOL_FACTOR = 1e-12
STAGE_RESIDUAL_FACTOR = 1e-10


class AnchorPolicy(enum.Enum):
    """Where each stage's linearization is anchored.

    PREVIOUS_STEP anchors every stage at the step start; PREVIOUS_STAGE
    anchors stage i at stage i-1 (the first stage always uses the step
    start).
    """

    PREVIOUS_STEP = "un"
    PREVIOUS_STAGE = "prev"

    @classmethod
    def parse(cls, text: str) -> "AnchorPolicy":
        key = text.strip().lower()
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise ValueError(f"unknown anchor policy {text!r}; use 'un' or 'prev'")


class IntegrationError(RuntimeError):
    """Base for failures during time stepping; carries the time reached."""

    def __init__(self, message: str, time_reached: float):
        super().__init__(message)
        self.time_reached = time_reached


class BlowUpError(IntegrationError):
    pass


class StageSolveError(IntegrationError):
    pass


@dataclass
class SolverStats:
    linear_solves: int = 0
    newton_iters: int = 0
    max_residual: float = 0.0

    def merge(self, other: "SolverStats") -> None:
        self.linear_solves += other.linear_solves
        self.newton_iters += other.newton_iters
        self.max_residual = max(self.max_residual, other.max_residual)


@dataclass
class StepRecord:
    time: float
    state: np.ndarray
    stage_states: list[np.ndarray] | None
    solver_stats: SolverStats


@dataclass
class TrajectoryStats:
    steps: int = 0
    dt: float = 0.0
    solver: SolverStats = field(default_factory=SolverStats)


def _check_finite(u: np.ndarray, t: float, what: str) -> None:
    if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > BLOWUP_THRESHOLD:
        raise BlowUpError(f"{what} exceeded blow-up threshold at t={t:.6g}", t)


def _newton_stage(rhs_part, jac_builder, r, tol, t, stage_idx, stats):
    """Solve u = r + rhs_part(u) by Newton from the explicit predictor."""
    u = r.copy()
    for _ in range(NEWTON_MAX_ITER):
        residual = u - r - rhs_part(u)
        stats.newton_iters += 1
        if np.max(np.abs(residual)) <= tol:
            return u
        jac = jac_builder(u)
        try:
            delta = np.linalg.solve(jac, -residual)
        except np.linalg.LinAlgError as exc:
            raise StageSolveError(
                f"singular Newton matrix in stage {stage_idx + 1} at t={t:.6g}: {exc}", t
            ) from exc
        stats.linear_solves += 1
        u = u + delta
        if not np.all(np.isfinite(u)):
            raise BlowUpError(
                f"Newton iterate diverged in stage {stage_idx + 1} at t={t:.6g}", t)
    raise StageSolveError(
        f"Newton did not converge in stage {stage_idx + 1} at t={t:.6g}", t)


def perturbed_dirk_step(
    pt: PerturbedTableau,
    problem: ProblemInstance,
    strategy: str,
    policy: AnchorPolicy,
    u_n: np.ndarray,
    dt: float,
    t: float = 0.0,
    retain_stages: bool = False,
) -> StepRecord:
    """Advance one step of the perturbed method from u_n over [t, t + dt]."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    s = pt.s
    a_eps = pt.a_eps
    a_tilde = pt.a_tilde
    a_full = pt.a
    exact = strategy == EXACT_STRATEGY
    factory = None if exact else problem.strategy_factory(strategy)

    m = u_n.shape[0]
    eye = np.eye(m)
    stats = SolverStats()
    newton_tol = NEWTON_TOL_FACTOR * (1.0 + float(np.max(np.abs(u_n))))

    f_vals: list[np.ndarray] = []
    sur_vals: list[np.ndarray] = []
    stages: list[np.ndarray] = []

    # Under the step-start anchor the operator is the same for all stages,
    # so build it once and reuse LU factors per distinct diagonal weight.
    shared_op: AffineOperator | None = None
    lu_cache: dict[float, tuple] = {}

    for i in range(s):
        if exact:
            op = None
        elif policy is AnchorPolicy.PREVIOUS_STEP or i == 0:
            if shared_op is None:
                shared_op = factory(u_n)
            op = shared_op
        else:
            op = factory(stages[i - 1])

        r = u_n.copy()
        for j in range(i):
            r += dt * (a_tilde[i, j] * f_vals[j] + a_eps[i, j] * sur_vals[j])

        ae_ii = a_eps[i, i]
        at_ii = a_tilde[i, i]

        if exact:
            aii = a_full[i, i]
            if aii == 0.0 or dt == 0.0:
                u_i = r
            else:
                u_i = _newton_stage(
                    rhs_part=lambda u: dt * aii * problem.rhs(u),
                    jac_builder=lambda u: eye - dt * aii * problem.jacobian(u),
                    r=r, tol=newton_tol, t=t, stage_idx=i, stats=stats,
                )
        elif at_ii != 0.0 and dt != 0.0:
            # Custom tableau with an implicit true-rhs diagonal.
            u_i = _newton_stage(
                rhs_part=lambda u: dt * (at_ii * problem.rhs(u)
                                         + ae_ii * op.apply(u)),
                jac_builder=lambda u: (eye - dt * at_ii * problem.jacobian(u)
                                       - dt * ae_ii * op.m),
                r=r, tol=newton_tol, t=t, stage_idx=i, stats=stats,
            )
        elif ae_ii == 0.0 or dt == 0.0:
            u_i = r
        else:
            reuse = policy is AnchorPolicy.PREVIOUS_STEP
            lu = lu_cache.get(ae_ii) if reuse else None
            if lu is None:
                lu = lu_factor(eye - dt * ae_ii * op.m, check_finite=False)
                if np.any(np.diag(lu[0]) == 0.0):
                    raise StageSolveError(
                        f"singular stage matrix in stage {i + 1} at t={t:.6g}", t)
                if reuse:
                    lu_cache[ae_ii] = lu
            u_i = lu_solve(lu, r + dt * ae_ii * op.g, check_finite=False)
            stats.linear_solves += 1

        _check_finite(u_i, t, f"stage {i + 1}")

        f_i = problem.rhs(u_i)
        sur_i = f_i if exact else op.apply(u_i)
        residual = float(np.max(np.abs(
            u_i - r - dt * at_ii * f_i - dt * ae_ii * sur_i
        )))
        stats.max_residual = max(stats.max_residual, residual)
        if residual > STAGE_RESIDUAL_FACTOR * (1.0 + float(np.max(np.abs(u_i)))):
            raise StageSolveError(
                f"stage {i + 1} residual {residual:.3e} too large at t={t:.6g}", t)

        f_vals.append(f_i)
        sur_vals.append(sur_i)
        stages.append(u_i)

    u_next = u_n + dt * sum(pt.b[i] * f_vals[i] for i in range(s))
    _check_finite(u_next, t + dt, "step update")

    return StepRecord(
        time=t + dt,
        state=u_next,
        stage_states=stages if retain_stages else None,
        solver_stats=stats,
    )


def _step_count(t_final: float, dt: float) -> int:
    if dt <= 0 or t_final <= 0:
        raise ValueError("dt and t_final must be positive")
    return max(1, round(t_final / dt))


def integrate(
    pt: PerturbedTableau,
    problem: ProblemInstance,
    strategy: str,
    policy: AnchorPolicy,
    dt: float,
    t_final: float,
) -> tuple[np.ndarray, TrajectoryStats]:
    """Run the perturbed method to t_final; dt is rounded so N*dt = t_final."""
    n_steps = _step_count(t_final, dt)
    dt_actual = t_final / n_steps
    stats = TrajectoryStats(steps=n_steps, dt=dt_actual)
    u = problem.initial_condition.copy()
    t = 0.0
    for k in range(n_steps):
        record = perturbed_dirk_step(pt, problem, strategy, policy, u,
                                     dt_actual, t=t)
        u = record.state
        t = (k + 1) * dt_actual
        stats.solver.merge(record.solver_stats)
    return u, stats


def reference_solution(problem: ProblemInstance, t_final: float,
                       dt_ref: float) -> np.ndarray:
    """Classical explicit RK4 on the true right-hand side."""
    if t_final == 0.0:
        return problem.initial_condition.copy()
    n_steps = _step_count(t_final, dt_ref)
    h = t_final / n_steps
    u = problem.initial_condition.copy()
    f = problem.rhs
    for k in range(n_steps):
        k1 = f(u)
        k2 = f(u + 0.5 * h * k1)
        k3 = f(u + 0.5 * h * k2)
        k4 = f(u + h * k3)
        u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > BLOWUP_THRESHOLD:
            raise BlowUpError(f"reference solve blew up at t={(k + 1) * h:.6g}",
                              (k + 1) * h)
    return u


def resolved_newton_baseline(t: Tableau, problem: ProblemInstance, dt: float,
                             t_final: float) -> np.ndarray:
    """Unperturbed DIRK with every implicit stage solved by Newton on f."""
    n_steps = _step_count(t_final, dt)
    h = t_final / n_steps
    a, b, s = t.a, t.b, t.s
    u = problem.initial_condition.copy()
    eye = np.eye(u.shape[0])
    time = 0.0
    stats = SolverStats()
    for k in range(n_steps):
        newton_tol = NEWTON_TOL_FACTOR * (1.0 + float(np.max(np.abs(u))))
        f_vals = []
        for i in range(s):
            r = u.copy()
            for j in range(i):
                r += h * a[i, j] * f_vals[j]
            aii = a[i, i]
            if aii == 0.0:
                u_i = r
            else:
                u_i = _newton_stage(
                    rhs_part=lambda v: h * aii * problem.rhs(v),
                    jac_builder=lambda v: eye - h * aii * problem.jacobian(v),
                    r=r, tol=newton_tol, t=time, stage_idx=i, stats=stats,
                )
            _check_finite(u_i, time, f"stage {i + 1}")
            f_vals.append(problem.rhs(u_i))
        u = u + h * sum(b[i] * f_vals[i] for i in range(s))
        time = (k + 1) * h
        _check_finite(u, time, "step update")
    return u
