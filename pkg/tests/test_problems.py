import numpy as np
import pytest

from pdirk.integrator import reference_solution
from pdirk.problems import (EXACT_STRATEGY, burgers_problem,
                            porous_medium_problem, problem_by_name,
                            scalar_contractive_problem,
                            shallow_water_problem, tau_consistency_probe)
from pdirk.tableau import ConsistencyClass

ALL_PROBLEMS = ["burgers", "shallow-water", "porous-medium", "scalar"]


def make(name, n=24):
    return problem_by_name(name, n)


def fd_jacobian_columns(p, u, cols, delta=1e-6):
    jac = p.jacobian(u)
    worst = 0.0
    for j in cols:
        e = np.zeros_like(u)
        e[j] = delta
        col = (p.rhs(u + e) - p.rhs(u - e)) / (2 * delta)
        worst = max(worst, float(np.max(np.abs(col - jac[:, j]))))
    return worst


def random_state(p, rng):
    if p.name == "shallow-water":
        n = p.dimension // 2
        eta = 1.0 + 0.2 * rng.standard_normal(n)
        eta = np.clip(eta, 0.5, None)  # keep away from vacuum
        mu = 0.3 * rng.standard_normal(n)
        return np.concatenate([eta, mu])
    return p.initial_condition + 0.3 * rng.standard_normal(p.dimension)


class TestJacobians:
    @pytest.mark.parametrize("name", ALL_PROBLEMS)
    def test_matches_finite_differences(self, name, rng):
        p = make(name, 16)
        cols = range(p.dimension) if p.dimension <= 4 else \
            rng.choice(p.dimension, size=6, replace=False)
        for _ in range(5):
            u = random_state(p, rng)
            assert fd_jacobian_columns(p, u, cols) < 1e-5


class TestAffinity:
    @pytest.mark.parametrize("name", ALL_PROBLEMS)
    def test_operators_are_affine(self, name, rng):
        p = make(name, 12)
        anchor = random_state(p, rng)
        u = random_state(p, rng)
        v = random_state(p, rng)
        zero = np.zeros(p.dimension)
        for sname, factory in p.strategies.items():
            op = factory(anchor)
            gap = op.apply(u + v) - op.apply(u) - op.apply(v) + op.apply(zero)
            scale = 1.0 + np.max(np.abs(op.m))
            assert np.max(np.abs(gap)) < 1e-11 * scale, sname
            assert op.strategy_name == sname
            assert np.array_equal(op.anchor, anchor)


class TestBurgers:
    def test_constant_state_is_steady(self):
        p = burgers_problem(16)
        u = np.full(16, 0.5)
        assert np.max(np.abs(p.rhs(u))) < 1e-12

    def test_initial_condition_and_tf(self):
        p = burgers_problem(32)
        x = p.grid.points
        assert p.initial_condition == pytest.approx(0.5 + 0.25 * np.sin(x))
        assert p.default_tf == 3.5

    def test_lin1_value_consistent_anywhere(self, rng):
        p = burgers_problem(20)
        for _ in range(3):
            u = random_state(p, rng)
            op = p.strategies["lin1"](u)
            assert np.max(np.abs(op.apply(u) - p.rhs(u))) < 1e-12

    def test_taylor_matches_jacobian(self, rng):
        p = burgers_problem(20)
        u = random_state(p, rng)
        op = p.strategies["taylor"](u)
        assert np.max(np.abs(op.m - p.jacobian(u))) < 1e-12


class TestShallowWater:
    def test_constant_lake_at_rest(self):
        p = shallow_water_problem(16)
        u = np.concatenate([np.full(16, 1.3), np.zeros(16)])
        assert np.max(np.abs(p.rhs(u))) < 1e-10

    def test_lin1_value_consistent_at_anchor(self, rng):
        p = shallow_water_problem(20)
        u = random_state(p, rng)
        op = p.strategies["lin1"](u)
        assert np.max(np.abs(op.apply(u) - p.rhs(u))) < 1e-11

    def test_taylor_blocks_match_finite_differences(self, rng):
        p = shallow_water_problem(12)
        u = random_state(p, rng)
        op = p.strategies["taylor"](u)
        assert np.max(np.abs(op.m - p.jacobian(u))) == 0.0
        cols = rng.choice(p.dimension, size=8, replace=False)
        assert fd_jacobian_columns(p, u, cols) < 1e-5

    def test_vacuum_anchor_rejected(self):
        p = shallow_water_problem(8)
        bad = np.concatenate([np.zeros(8), np.ones(8)])
        for sname in ("lin1", "lin2", "taylor"):
            with pytest.raises(ValueError, match="vacuum state"):
                p.strategies[sname](bad)


class TestPorousMedium:
    def test_constant_state_is_steady(self):
        p = porous_medium_problem(16)
        assert np.max(np.abs(p.rhs(np.full(16, 0.7)))) < 1e-9

    def test_domain_and_initial_condition(self):
        p = porous_medium_problem(32)
        assert p.grid.x_left == pytest.approx(-np.pi)
        x = p.grid.points
        assert p.initial_condition == pytest.approx(0.5 * np.cos(x) + 0.5)
        assert p.default_tf == 0.5

    def test_lin1_value_consistent_at_anchor(self, rng):
        p = porous_medium_problem(20)
        u = random_state(p, rng)
        op = p.strategies["lin1"](u)
        scale = np.max(np.abs(op.m))
        assert np.max(np.abs(op.apply(u) - p.rhs(u))) < 1e-11 * scale

    def test_taylor_matrix_is_exact_jacobian(self, rng):
        p = porous_medium_problem(20)
        u = random_state(p, rng)
        op = p.strategies["taylor"](u)
        assert np.max(np.abs(op.m - p.jacobian(u))) < 1e-12


class TestScalar:
    def test_fixed_point_at_zero(self):
        p = scalar_contractive_problem()
        assert p.rhs(np.zeros(1))[0] == 0.0

    def test_contractive_pairs(self, rng):
        p = scalar_contractive_problem()
        for _ in range(20):
            y, z = rng.uniform(-3, 3, size=2)
            lhs = (z - y) * (p.rhs(np.array([z]))[0] - p.rhs(np.array([y]))[0])
            assert lhs <= 1e-14

    def test_taylor_value_identity(self, rng):
        p = scalar_contractive_problem()
        u = np.array([rng.uniform(0.2, 2.0)])
        op = p.strategies["taylor"](u)
        # -3a^2 u + 2a^3 evaluated at u = a gives -a^3 back
        assert op.m[0, 0] == pytest.approx(-3.0 * u[0] ** 2)
        assert op.g[0] == pytest.approx(2.0 * u[0] ** 3)
        assert op.apply(u)[0] == pytest.approx(p.rhs(u)[0], abs=1e-14)


class TestNameLookup:
    def test_all_names_resolve(self):
        for name in ALL_PROBLEMS:
            p = problem_by_name(name, 8)
            assert p.name == name

    def test_unknown_rejected(self):
        with pytest.raises(KeyError, match="burgers"):
            problem_by_name("kdv")

    def test_unknown_strategy_rejected(self):
        p = burgers_problem(8)
        with pytest.raises(KeyError, match="lin1"):
            p.strategy_factory("spline")


class TestTauProbe:
    def test_burgers_taylor_fully_consistent(self):
        p = burgers_problem(32)
        probe = tau_consistency_probe(p, "taylor", p.initial_condition)
        assert probe.consistency_class is ConsistencyClass.TAU_AND_DERIV_ZERO
        assert probe.tau_norm < 1e-12

    def test_burgers_lin1_value_only(self):
        p = burgers_problem(32)
        probe = tau_consistency_probe(p, "lin1", p.initial_condition)
        assert probe.consistency_class is ConsistencyClass.TAU_ZERO
        assert probe.tau_u_norm > 1.0

    def test_burgers_lin2_inconsistent_on_coarse_evolved_state(self):
        # The frozen-coefficient form only mismatches states with spectral
        # content near the grid limit; an evolved state on a coarse grid
        # shows it, and the mismatch decays fast under refinement.
        taus = {}
        for n in (20, 40):
            p = burgers_problem(n)
            u1 = reference_solution(p, 1.0, 1e-3)
            taus[n] = tau_consistency_probe(p, "lin2", u1)
        assert taus[20].consistency_class is ConsistencyClass.NONE
        assert taus[20].tau_norm > 1e-6
        assert taus[40].tau_norm < 1e-2 * taus[20].tau_norm

    def test_band_limited_initial_data_hides_lin2_mismatch(self):
        # The sine initial data is a degree-1 trigonometric polynomial, so
        # every product rule the frozen-coefficient forms rely on is exact
        # on the grid: tau at the initial condition sits at roundoff.
        for name in ("burgers", "shallow-water"):
            p = problem_by_name(name, 101)
            probe = tau_consistency_probe(p, "lin2", p.initial_condition)
            assert probe.tau_norm < 1e-11
            assert probe.consistency_class is ConsistencyClass.TAU_ZERO

    def test_porous_medium_classes_at_initial_condition(self):
        p = porous_medium_problem(101)
        u0 = p.initial_condition
        assert tau_consistency_probe(p, "lin1", u0).consistency_class \
            is ConsistencyClass.TAU_ZERO
        assert tau_consistency_probe(p, "taylor", u0).consistency_class \
            is ConsistencyClass.TAU_AND_DERIV_ZERO
        # cosine initial data is band-limited too: the differentiate-first
        # forms are value-consistent here and classify as TAU_ZERO.
        for s in ("lin2a", "lin2b"):
            assert tau_consistency_probe(p, s, u0).consistency_class \
                is ConsistencyClass.TAU_ZERO

    def test_exact_strategy_probe(self):
        p = burgers_problem(16)
        probe = tau_consistency_probe(p, EXACT_STRATEGY, p.initial_condition)
        assert probe.tau_norm == 0.0 and probe.tau_u_norm == 0.0
        assert probe.consistency_class is ConsistencyClass.TAU_AND_DERIV_ZERO
