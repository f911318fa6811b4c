"""Tests for the axiom checks, (K5), A+-(N) estimates and invariance"""

import numpy as np
import pytest

from isoblock.core.diagnostics import (
    check_axioms,
    check_k5,
    estimate_A_minus,
    estimate_A_plus,
    is_weakly_positively_invariant,
    omega_limit,
)
from isoblock.core.region import RegionSpec
from isoblock.core.state import StateVec
from isoblock.core.trajectory import Bundle, CloudLabel, PointCloudSet, Trajectory
from isoblock.errors import NumericalError, PreconditionError
from isoblock.solver.integrator import BundleGenerator, integrate
from isoblock.solver.selection import SelectionStrategy


class EmptyBundles(BundleGenerator):
    """Generator whose bundles have no members"""

    def bundle(self, x, T=None, index=0, stop_region=None):
        return Bundle(self.model.state(x), [])


def dyadic(x, m_max=60):
    return [np.asarray(x, dtype=float) + 2.0**-m for m in range(1, m_max + 1)]


class TestAxioms:
    """(K1)-(K4) on finite samples"""

    def test_saddle_passes(self, saddle_generator):
        samples = [[0.2, 0.5], [-0.1, 0.3], [0.0, -0.7]]
        report = check_axioms(saddle_generator, samples, 1.0)
        assert report.passed
        assert report.to_dict()["finite_sample"]

    def test_sqrt_family_near_zero(self, sqrt_generator):
        report = check_axioms(sqrt_generator, [[0.0], [1e-3]], 1.0)
        assert report.k1 and report.k2 and report.k3 and report.k4

    def test_empty_bundles_fail_k1(self, saddle):
        gen = EmptyBundles(saddle, ["maximal"], 1.0, 0.02)
        report = check_axioms(gen, [[0.1, 0.1]], 1.0)
        assert not report.k1
        assert not report.passed

    def test_needs_samples(self, saddle_generator):
        with pytest.raises(PreconditionError):
            check_axioms(saddle_generator, [], 1.0)

    def test_horizon_on_grid(self, saddle_generator):
        with pytest.raises(PreconditionError):
            check_axioms(saddle_generator, [[0.1, 0.1]], 1.01)


class TestK5:
    """Lower semicontinuity of the solution set"""

    def test_minimal_solution_is_not_a_limit(self, sqrt_generator):
        target = integrate(sqrt_generator.model, [0.0], SelectionStrategy.minimal(), 2.0, 0.01)
        report = check_k5(sqrt_generator, [0.0], target, dyadic([0.0], 20), 2.0)
        assert not report.passed
        # sup |t^2/4 + t^2/4| over the window [0, 2 - dt]
        assert abs(report.closest_gap - 2.0) <= 0.02 * 2.0
        assert len(report.gaps) == 20

    def test_maximal_solution_is_a_limit(self, sqrt_generator):
        target = integrate(sqrt_generator.model, [0.0], SelectionStrategy.maximal(), 2.0, 0.01)
        report = check_k5(sqrt_generator, [0.0], target, dyadic([0.0]), 2.0, tol=1e-6)
        assert report.passed

    def test_saddle_passes(self, saddle_generator):
        x = np.array([0.3, -0.4])
        target = integrate(saddle_generator.model, x, SelectionStrategy.maximal(), 1.0, 0.02)
        assert check_k5(saddle_generator, x, target, dyadic(x), 1.0).passed

    def test_target_must_start_at_x(self, saddle_generator):
        target = integrate(saddle_generator.model, [0.1, 0.1], SelectionStrategy.maximal(),
                           1.0, 0.02)
        with pytest.raises(PreconditionError):
            check_k5(saddle_generator, [0.0, 0.0], target, dyadic([0.0, 0.0]), 1.0)

    def test_window_too_short(self, saddle_generator):
        target = integrate(saddle_generator.model, [0.1, 0.1], SelectionStrategy.maximal(),
                           0.02, 0.02)
        with pytest.raises(NumericalError):
            check_k5(saddle_generator, [0.1, 0.1], target, dyadic([0.1, 0.1]), 0.02)


class TestInvariantSets:
    """A+(N), A-(N), omega limits and weak invariance on the saddle"""

    def test_A_plus_is_the_stable_axis(self, saddle_generator, unit_box):
        grid = unit_box.grid(21)
        cloud = estimate_A_plus(saddle_generator, unit_box, grid, 4.0)
        assert cloud.label is CloudLabel.A_PLUS
        assert len(cloud) == 21
        assert np.all(np.abs(cloud.points[:, 0]) < 1e-12)

    def test_A_plus_shrinks_with_the_horizon(self, saddle_generator, unit_box):
        grid = unit_box.grid(21)
        clouds = [estimate_A_plus(saddle_generator, unit_box, grid, h) for h in (0.5, 1.0, 2.0)]
        kept = [{tuple(np.round(p, 9)) for p in cloud.points} for cloud in clouds]
        assert kept[2] <= kept[1] <= kept[0]
        assert len(kept[2]) < len(kept[0])

    @pytest.mark.parametrize("half_width", [1.0, 0.5, 0.1])
    def test_fixed_point_in_both_sets(self, saddle_generator, half_width):
        box = RegionSpec.box(StateVec([0.0, 0.0]), [half_width, half_width])
        A_plus = estimate_A_plus(saddle_generator, box, box.grid(5), 4.0)
        A_minus = estimate_A_minus(saddle_generator, box, box.grid(5), 4.0)
        assert A_plus.distance([0.0, 0.0]) == 0.0
        assert A_minus.distance([0.0, 0.0]) == 0.0

    def test_A_plus_needs_grid_in_region(self, saddle_generator, unit_box):
        with pytest.raises(PreconditionError):
            estimate_A_plus(saddle_generator, unit_box, [[2.0, 0.0]], 1.0)

    def test_A_minus_hugs_the_unstable_axis(self, saddle_generator, unit_box):
        grid = unit_box.grid(11)
        cloud = estimate_A_minus(saddle_generator, unit_box, grid, 10.0)
        assert cloud.label is CloudLabel.A_MINUS
        assert np.all(np.abs(cloud.points[:, 1]) < 0.05)
        assert np.max(np.abs(cloud.points[:, 0])) > 0.5
        assert cloud.distance([0.0, 0.0]) == 0.0

    def test_omega_limit(self, saddle_generator):
        traj = integrate(saddle_generator.model, [0.0, 1.0], SelectionStrategy.maximal(),
                         20.0, 0.02)
        limit = omega_limit(traj)
        assert len(limit) == 1
        assert limit.distance([0.0, 0.0]) < 1e-3

    def test_omega_limit_needs_a_tail(self):
        traj = Trajectory(0.0, 0.1, np.zeros((20, 1)), np.ones(1))
        with pytest.raises(NumericalError):
            omega_limit(traj)

    def test_weak_invariance(self, saddle_generator, unit_box):
        origin = PointCloudSet([[0.0, 0.0]], np.ones(2), CloudLabel.K_APPROX)
        assert is_weakly_positively_invariant(saddle_generator, origin, [[0.0, 0.0]], 4.0)
        report = is_weakly_positively_invariant(saddle_generator, origin, [[0.1, 0.0]], 4.0)
        assert not report
        assert report.failures == [0]
        assert is_weakly_positively_invariant(saddle_generator, unit_box, [[0.0, 0.5]], 4.0)
        assert not is_weakly_positively_invariant(saddle_generator, unit_box, [[0.5, 0.0]], 4.0)
