import numpy as np
import pytest

from pdirk.integrator import (AnchorPolicy, BlowUpError, StageSolveError,
                              integrate, perturbed_dirk_step,
                              reference_solution, resolved_newton_baseline)
from pdirk.problems import (AffineOperator, ProblemInstance, burgers_problem,
                            porous_medium_problem, problem_by_name,
                            scalar_contractive_problem)
from pdirk.tableau import ConsistencyClass, PerturbedTableau, Tableau, registry_lookup

UN = AnchorPolicy.PREVIOUS_STEP
PREV = AnchorPolicy.PREVIOUS_STAGE


def linear_problem(lam=-1.0):
    """u' = lam*u with a surrogate equal to the right-hand side."""
    mat = np.array([[lam]])

    def factory(anchor):
        return AffineOperator(m=mat, g=np.zeros(1), anchor=anchor,
                              strategy_name="lin")

    return ProblemInstance(
        name="linear",
        grid=None,
        dimension=1,
        rhs=lambda u: lam * u,
        jacobian=lambda u: mat,
        strategies={"lin": factory},
        initial_condition=np.array([1.0]),
        default_tf=1.0,
    )


class TestStep:
    def test_midpoint_stability_function(self):
        # one step of the one-stage midpoint baseline on u' = -u equals
        # (1 + z/2)/(1 - z/2) with z = -dt
        p = linear_problem(-1.0)
        pt = registry_lookup("D1s2p1m")
        rec = perturbed_dirk_step(pt, p, "lin", UN, np.array([1.0]), 0.1)
        assert rec.state[0] == pytest.approx(0.95 / 1.05, abs=1e-14)

    def test_zero_dt_is_identity(self):
        p = burgers_problem(12)
        pt = registry_lookup("A2s3p3m")
        rec = perturbed_dirk_step(pt, p, "lin1", UN, p.initial_condition, 0.0)
        assert np.array_equal(rec.state, p.initial_condition)

    def test_local_order_against_micro_integration(self):
        # one-step defect of the third-order method is O(dt^4); fit the
        # slope against a tiny-step RK4 oracle over a measurable dt range
        p = burgers_problem(9)
        pt = registry_lookup("A2s3p3m")

        def micro(u0, t_final, h):
            u = u0.copy()
            for _ in range(round(t_final / h)):
                k1 = p.rhs(u)
                k2 = p.rhs(u + 0.5 * h * k1)
                k3 = p.rhs(u + 0.5 * h * k2)
                k4 = p.rhs(u + h * k3)
                u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            return u

        dts = [0.2, 0.1, 0.05, 0.025]
        defects = []
        for dt in dts:
            rec = perturbed_dirk_step(pt, p, "taylor", UN,
                                      p.initial_condition, dt)
            defects.append(np.max(np.abs(
                rec.state - micro(p.initial_condition, dt, dt / 2048))))
        slope = np.polyfit(np.log(dts), np.log(defects), 1)[0]
        assert 3.6 < slope < 4.4

    def test_stage_residuals_small(self):
        p = burgers_problem(24)
        pt = registry_lookup("B3s4p4m")
        u = p.initial_condition
        rec = perturbed_dirk_step(pt, p, "taylor", UN, u, 0.05,
                                  retain_stages=True)
        assert len(rec.stage_states) == 3
        bound = 1e-10 * (1.0 + max(np.max(np.abs(s)) for s in rec.stage_states))
        assert rec.solver_stats.max_residual < bound

    def test_anchor_policies_differ(self):
        p = burgers_problem(16)
        pt = registry_lookup("A2s3p3m")
        a = perturbed_dirk_step(pt, p, "lin1", UN, p.initial_condition, 0.1)
        b = perturbed_dirk_step(pt, p, "lin1", PREV, p.initial_condition, 0.1)
        assert np.max(np.abs(a.state - b.state)) > 1e-10

    def test_negative_dt_rejected(self):
        p = linear_problem()
        pt = registry_lookup("D1s2p1m")
        with pytest.raises(ValueError):
            perturbed_dirk_step(pt, p, "lin", UN, np.array([1.0]), -0.1)


class TestNewtonFallback:
    def test_nonzero_true_diagonal_tableau(self):
        # implicit Euler split half/half between true rhs and surrogate
        base = Tableau("half", [[1.0]], [1.0])
        pt = PerturbedTableau(base, [[0.5]], "half", 1, 1, ConsistencyClass.NONE)
        p = linear_problem(-2.0)
        rec = perturbed_dirk_step(pt, p, "lin", UN, np.array([1.0]), 0.25)
        # both halves see the same operator, so this is exactly implicit Euler
        assert rec.state[0] == pytest.approx(1.0 / 1.5, abs=1e-12)
        assert rec.solver_stats.newton_iters > 0

    def test_newton_matches_affine_on_linear_problem(self):
        p = linear_problem(-1.0)
        base = registry_lookup("D2s3p1m").base
        u_aff, _ = integrate(registry_lookup("D2s3p1m"), p, "lin", UN, 0.1, 1.0)
        u_newton = resolved_newton_baseline(base, p, 0.1, 1.0)
        assert u_aff[0] == pytest.approx(u_newton[0], abs=1e-12)


class TestIntegrate:
    def test_step_rounding_hits_final_time(self):
        p = scalar_contractive_problem()
        pt = registry_lookup("D1s2p1m")
        _, stats = integrate(pt, p, "lin1", UN, 0.3, 1.0)
        assert stats.steps == 3
        assert stats.dt == pytest.approx(1.0 / 3.0)

    def test_single_step_when_dt_exceeds_tf(self):
        p = scalar_contractive_problem()
        pt = registry_lookup("D1s2p1m")
        _, stats = integrate(pt, p, "lin1", UN, 5.0, 1.0)
        assert stats.steps == 1

    def test_determinism(self):
        p = burgers_problem(24)
        pt = registry_lookup("A2s3p3m")
        u1, _ = integrate(pt, p, "lin1", UN, 0.05, 1.0)
        u2, _ = integrate(pt, p, "lin1", UN, 0.05, 1.0)
        assert np.array_equal(u1, u2)

    def test_blow_up_reported_with_time(self):
        p = porous_medium_problem(33)
        pt = registry_lookup("B6s5p5m")
        with pytest.raises(BlowUpError) as err:
            integrate(pt, p, "lin1", UN, 0.05, 0.5)
        assert 0.0 <= err.value.time_reached <= 0.5

    def test_exact_strategy_matches_newton_baseline(self):
        p = burgers_problem(33)
        pt = registry_lookup("B3s4p4m")
        u_exact, _ = integrate(pt, p, "exact", UN, 3.5 / 16, 3.5)
        u_newton = resolved_newton_baseline(pt.base, p, 3.5 / 16, 3.5)
        assert np.max(np.abs(u_exact - u_newton)) < 1e-9

    @pytest.mark.parametrize("pname,n,tf", [
        ("shallow-water", 12, 0.5),
        ("porous-medium", 17, 0.1),
        ("scalar", 1, 2.0),
    ])
    def test_exact_strategy_degenerates_on_every_problem(self, pname, n, tf):
        p = problem_by_name(pname, n)
        pt = registry_lookup("A2s3p3m")
        u_exact, _ = integrate(pt, p, "exact", UN, tf / 8, tf)
        u_newton = resolved_newton_baseline(pt.base, p, tf / 8, tf)
        assert np.max(np.abs(u_exact - u_newton)) < 1e-9

    def test_invalid_dt(self):
        p = scalar_contractive_problem()
        pt = registry_lookup("D1s2p1m")
        with pytest.raises(ValueError):
            integrate(pt, p, "lin1", UN, 0.0, 1.0)


class TestReference:
    def test_scalar_closed_form(self):
        # u' = -u^3, u(0) = 1 has u(t) = (1 + 2t)^(-1/2)
        p = scalar_contractive_problem()
        u = reference_solution(p, 2.0, 1e-4)
        assert abs(u[0] - (1.0 + 4.0) ** -0.5) < 1e-10

    def test_fourth_order_ratio(self):
        p = scalar_contractive_problem()
        exact = (1.0 + 4.0) ** -0.5
        e1 = abs(reference_solution(p, 2.0, 0.02)[0] - exact)
        e2 = abs(reference_solution(p, 2.0, 0.01)[0] - exact)
        assert 12.0 < e1 / e2 < 20.0

    def test_zero_final_time(self):
        p = burgers_problem(12)
        u = reference_solution(p, 0.0, 1e-3)
        assert np.array_equal(u, p.initial_condition)


class TestResolvedNewton:
    def test_fourth_order_on_burgers(self):
        p = burgers_problem(24)
        base = registry_lookup("D3s4p1m").base
        ref = reference_solution(p, 1.0, 1e-4)
        errs = [np.max(np.abs(resolved_newton_baseline(base, p, 1.0 / m, 1.0) - ref))
                for m in (8, 16, 32)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 3.5)

    def test_explicit_first_stage_tableau(self):
        # 6-stage method with a zero first row: stage 1 is a plain copy
        p = scalar_contractive_problem()
        base = registry_lookup("B6s5p5m").base
        u = resolved_newton_baseline(base, p, 0.1, 1.0)
        assert np.isfinite(u[0])


class TestSurrogateGapRates:
    def test_gap_rates_scalar(self):
        # gap between the perturbed run and its resolved baseline shrinks
        # at second order for value-consistent surrogates and third order
        # for Taylor surrogates (measured in the asymptotic dt range)
        p = scalar_contractive_problem()
        dts = [0.025, 0.0125, 0.00625, 0.003125]
        slopes = {}
        for mname in ("A2s3p3m", "B3s4p4m"):
            pt = registry_lookup(mname)
            for strat in ("lin1", "taylor"):
                gaps = []
                for dt in dts:
                    up, _ = integrate(pt, p, strat, UN, dt, 2.0)
                    uu = resolved_newton_baseline(pt.base, p, dt, 2.0)
                    gaps.append(abs(up[0] - uu[0]))
                slopes[(mname, strat)] = np.polyfit(np.log(dts),
                                                    np.log(gaps), 1)[0]
        assert slopes[("A2s3p3m", "lin1")] >= 1.8
        assert slopes[("B3s4p4m", "lin1")] >= 1.8
        assert slopes[("A2s3p3m", "taylor")] >= 2.8
        assert slopes[("B3s4p4m", "taylor")] >= 2.8
