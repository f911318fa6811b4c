"""Tests for selection strategies, IMEX stepping and bundles"""

import numpy as np
import pytest

from isoblock.errors import ConfigError, NumericalError, PreconditionError
from isoblock.models.heaviside import HeavisideRD
from isoblock.models.zoo import LinearSaddle, SqrtODE, saddle_exact
from isoblock.solver.integrator import BundleGenerator, integrate, make_bundle, step_count
from isoblock.solver.selection import (
    SelectionStrategy,
    heaviside_selection,
    regularized_selection,
    strategies_from_strings,
)

from conftest import ALL_STRATEGIES


class TestSelectionSets:
    """H0 and its regularisation"""

    def test_heaviside(self):
        assert heaviside_selection(0.0) == (-1.0, 1.0)
        assert heaviside_selection(0.3) == (1.0, 1.0)
        assert heaviside_selection(-0.3) == (-1.0, -1.0)
        lo, hi = heaviside_selection(np.array([-1.0, 0.0, 2.0]))
        assert np.array_equal(lo, [-1.0, -1.0, 1.0])
        assert np.array_equal(hi, [-1.0, 1.0, 1.0])

    @pytest.mark.parametrize(
        "u, expected",
        [(-0.2, (-1.0, -1.0)), (-0.05, (-1.0, 0.0)), (0.0, (-1.0, 1.0)), (0.05, (0.0, 1.0)),
         (0.2, (1.0, 1.0))],
    )
    def test_regularized(self, u, expected):
        lo, hi = regularized_selection(u, 0.1)
        assert abs(lo - expected[0]) < 1e-12
        assert abs(hi - expected[1]) < 1e-12

    def test_regularized_needs_width(self):
        with pytest.raises(PreconditionError):
            regularized_selection(0.0, 0.0)

    @pytest.mark.parametrize("eps_small, eps_large", [(0.01, 0.1), (0.05, 0.5), (0.3, 1.0)])
    def test_regularizations_are_nested(self, eps_small, eps_large):
        u = np.linspace(-1.0, 1.0, 2001)
        lo_small, hi_small = regularized_selection(u, eps_small)
        lo_large, hi_large = regularized_selection(u, eps_large)
        assert np.all(lo_large <= lo_small) and np.all(hi_small <= hi_large)
        lo_h, hi_h = heaviside_selection(u, sign_tol=0.0)
        assert np.all(lo_small <= lo_h) and np.all(hi_h <= hi_small)


class TestStrategies:
    """Strategy parsing and choices"""

    @pytest.mark.parametrize("text", ALL_STRATEGIES)
    def test_round_trip_label(self, text):
        strategy = SelectionStrategy.from_string(text)
        assert SelectionStrategy.from_string(strategy.label()).label() == strategy.label()

    @pytest.mark.parametrize("text", ["fastest", "depart:x:+", "depart:1.0", "tracking"])
    def test_bad_strings(self, text):
        with pytest.raises(ConfigError):
            SelectionStrategy.from_string(text)

    def test_choices(self, saddle):
        lo, hi = np.array([-1.0, 0.5]), np.array([1.0, 0.5])
        x = np.zeros(2)
        assert np.array_equal(SelectionStrategy.maximal().select(0.0, lo, hi, x, saddle), hi)
        assert np.array_equal(SelectionStrategy.minimal().select(0.0, lo, hi, x, saddle), lo)
        assert np.array_equal(SelectionStrategy.zero().select(0.0, lo, hi, x, saddle), [0.0, 0.5])

    def test_depart_switches_at_tau(self, saddle):
        lo, hi = -np.ones(1), np.ones(1)
        strategy = SelectionStrategy.depart(0.5, -1)
        assert strategy.select(0.4, lo, hi, None, saddle)[0] == 0.0
        assert strategy.select(0.5, lo, hi, None, saddle)[0] == -1.0

    def test_random_is_reproducible(self, saddle):
        lo, hi = -np.ones(3), np.ones(3)
        a = SelectionStrategy.random(0.1, seed=7)
        b = SelectionStrategy.random(0.1, seed=7)
        picks_a = [a.select(0.01 * j, lo, hi, None, saddle) for j in range(30)]
        picks_b = [b.select(0.01 * j, lo, hi, None, saddle) for j in range(30)]
        assert np.array_equal(picks_a, picks_b)
        # held for one dwell period
        assert np.array_equal(picks_a[0], picks_a[9])
        assert not np.array_equal(picks_a[0], picks_a[10])

    def test_seeds_derive_from_global_seed(self):
        first = [s.seed for s in strategies_from_strings(["random", "random"], seed=3)]
        again = [s.seed for s in strategies_from_strings(["random", "random"], seed=3)]
        assert first == again
        assert first[0] != first[1]


class TestIntegrate:
    """Integration of single strategies"""

    def test_step_count(self):
        assert step_count(2.0, 0.01) == 200
        with pytest.raises(PreconditionError):
            step_count(1.0, 0.3)

    def test_sqrt_ode_exact_flow(self):
        traj = integrate(SqrtODE(), [1.0], SelectionStrategy.maximal(), 2.0, 0.01)
        assert abs(traj.endpoint().coords[0] - 4.0) < 1e-9

    @pytest.mark.parametrize(
        "text, expected",
        [("zero", 0.0), ("maximal", 1.0), ("minimal", -1.0), ("depart:0.5:+", 0.5625)],
    )
    def test_sqrt_ode_family_from_zero(self, text, expected):
        traj = integrate(SqrtODE(), [0.0], SelectionStrategy.from_string(text), 2.0, 0.01)
        assert abs(traj.endpoint().coords[0] - expected) < 1e-9

    def test_saddle_first_order(self, saddle):
        x0 = np.array([0.1, 1.0])
        errors = []
        for dt in (0.01, 0.005):
            traj = integrate(saddle, x0, SelectionStrategy.maximal(), 1.0, dt)
            errors.append(np.max(np.abs(traj.endpoint().coords - saddle_exact(x0, 1.0))))
        assert errors[1] < 0.6 * errors[0]
        assert errors[1] < 5e-3

    def test_stability_limit(self):
        with pytest.raises(NumericalError):
            integrate(LinearSaddle(2.0, 1.0), [0.1, 0.1], SelectionStrategy.maximal(), 1.0, 0.5)

    def test_dimension_checked(self, saddle):
        with pytest.raises(PreconditionError):
            integrate(saddle, [0.1], SelectionStrategy.maximal(), 1.0, 0.1)

    def test_imex_residual(self, rd_model, rd_config):
        u0 = np.sin(np.pi * rd_config.x)
        traj = integrate(rd_model, u0, SelectionStrategy.zero(), 0.1, rd_config.dt)
        for x, x_new, h in zip(traj.states[:-1], traj.states[1:], traj.selection):
            assert rd_model.residual_ok(x, x_new, h, traj.dt)

    @pytest.mark.parametrize("text", ["maximal", "minimal", "zero", "depart:0.0:+"])
    def test_heaviside_steps_are_regularized_steps(self, rd_model, rd_config, text):
        u0 = 0.02 * np.sin(2 * np.pi * rd_config.x)
        traj = integrate(rd_model, u0, SelectionStrategy.from_string(text), 0.2, rd_config.dt)
        regularized = HeavisideRD(rd_config.with_epsilon(0.01))
        for x, x_new, h in zip(traj.states[:-1], traj.states[1:], traj.selection):
            assert regularized.selection_distance(x, h) <= 1e-9
            assert regularized.residual_ok(x, x_new, h, traj.dt)

    def test_stop_region(self, saddle, unit_box):
        traj = integrate(saddle, [0.5, 0.0], SelectionStrategy.maximal(), 4.0, 0.02,
                         stop_region=unit_box)
        assert traj.endpoint().coords[0] > 1.0
        assert unit_box.contains(traj.states[-2])


class TestBundles:
    """Bundles and their generator"""

    def test_single_valued_has_one_member(self, saddle):
        strategies = strategies_from_strings(ALL_STRATEGIES)
        bundle = make_bundle(saddle, [0.1, 0.2], strategies, 1.0, 0.02)
        assert len(bundle) == 1

    def test_duplicates_merged(self):
        strategies = strategies_from_strings(ALL_STRATEGIES)
        assert len(make_bundle(SqrtODE(), [1.0], strategies, 1.0, 0.01)) == 1

    def test_branching_at_zero(self):
        strategies = strategies_from_strings(["zero", "maximal", "minimal"])
        bundle = make_bundle(SqrtODE(), [0.0], strategies, 1.0, 0.01)
        ends = sorted(m.endpoint().coords[0] for m in bundle)
        assert np.allclose(ends, [-0.25, 0.0, 0.25])

    def test_needs_strategies(self, saddle):
        with pytest.raises(PreconditionError):
            make_bundle(saddle, [0.0, 0.0], [], 1.0, 0.1)

    def test_grouped_run_matches_independent_runs(self, rd_model, rd_config):
        u0 = 0.01 * np.sin(3 * np.pi * rd_config.x)
        texts = ["maximal", "minimal", "random:0.05", "depart:0.1:+"]
        strategies = strategies_from_strings(texts, seed=5)
        bundle = make_bundle(rd_model, u0, strategies, 0.2, rd_config.dt, dedup_tol=-1.0)
        for member, strategy in zip(bundle, strategies_from_strings(texts, seed=5)):
            alone = integrate(rd_model, u0, strategy, 0.2, rd_config.dt)
            assert np.allclose(member.states, alone.states, atol=1e-14)

    def test_generator_is_deterministic(self, rd_model, rd_config):
        gen = BundleGenerator(rd_model, ALL_STRATEGIES, 0.1, rd_config.dt, seed=11)
        u0 = 0.01 * np.sin(np.pi * rd_config.x)
        a, b = gen.bundle(u0, index=4), gen.bundle(u0, index=4)
        assert len(a) == len(b)
        for m, n in zip(a, b):
            assert np.array_equal(m.states, n.states)
        assert gen.seed_for(4) != gen.seed_for(5)

    def test_reversed_generator(self, saddle_generator, planar):
        back = saddle_generator.reversed()
        traj = back.bundle([1.0, 0.1], T=1.0).members[0]
        assert traj.endpoint().coords[0] < 1.0
        assert traj.endpoint().coords[1] > 0.1
        assert BundleGenerator(planar, ["maximal"], 1.0, 0.01).reversed() is None


class TestLipschitz:
    """Empirical Lipschitz constants"""

    def test_planar_constant(self, planar, rng):
        assert planar.check_lipschitz(rng, n_pairs=200) <= planar.lipschitz_C * (1 + 1e-9)

    def test_heaviside_is_not_lipschitz(self, rd_model, rng):
        worst = rd_model.check_lipschitz(rng, n_pairs=20, spread=1e-3)
        assert worst > 100.0
