"""Tests for relaxation certificates on the planar Lipschitz inclusion"""

import numpy as np
import pytest

from isoblock.core.trajectory import Trajectory
from isoblock.errors import PreconditionError
from isoblock.solver.certificate import (
    adversarial_reference,
    exponential_bound,
    filippov_certificate,
    relaxation_bound,
    tracking_pair,
)
from isoblock.solver.integrator import integrate
from isoblock.solver.selection import SelectionStrategy


class TestRelaxationBound:
    """xi on a grid"""

    def test_no_forcing_is_exponential(self):
        times = np.linspace(0, 1, 101)
        xi = relaxation_bound(times, np.zeros_like(times), 0.1, 2.0)
        assert np.allclose(xi, exponential_bound(0.1, 2.0, times))

    def test_constant_forcing(self):
        times = np.linspace(0, 1, 2001)
        C, rho = 0.5, 0.3
        xi = relaxation_bound(times, np.full_like(times, rho), 0.0, C)
        exact = rho * (np.exp(2 * C * times) - 1) / (2 * C)
        assert np.max(np.abs(xi - exact)) < 1e-6


class TestTracking:
    """Filippov projection"""

    def test_tracking_reproduces_a_solution(self, planar):
        z = integrate(planar, [0.3, -0.2], SelectionStrategy.from_string("random:0.1", 3), 1.0,
                      0.01)
        u = tracking_pair(planar, z, [0.3, -0.2])
        assert u.sup_distance(z) < 1e-12

    def test_matched_selection_gives_exponential_bound(self, planar):
        z = integrate(planar, [0.5, 0.5], SelectionStrategy.maximal(), 1.0, 0.01)
        u = tracking_pair(planar, z, [0.52, 0.49])
        cert = filippov_certificate(planar, u, z)
        assert cert.valid
        assert np.max(cert.rho) == 0.0
        pure = exponential_bound(cert.observed_gap[0], planar.lipschitz_C, cert.times)
        assert np.allclose(cert.xi, pure)
        assert np.all(cert.observed_gap <= pure + cert.slack)


class TestCertificates:
    """observed gap <= xi + slack"""

    def test_random_pairs(self, planar, rng):
        texts = ["maximal", "minimal", "random:0.1", "zero"]
        for i in range(100):
            z0 = rng.uniform(-1, 1, 2)
            u0 = z0 + 0.01 * rng.standard_normal(2)
            strategy = SelectionStrategy.from_string(texts[i % 4], seed=i)
            z = adversarial_reference(planar, z0, strategy, 1.0, 0.01)
            u = tracking_pair(planar, z, u0)
            cert = filippov_certificate(planar, u, z)
            assert cert.valid, f"pair {i}: margin {cert.worst_margin}"

    def test_adversarial_reference_leaves_the_box(self, planar):
        z = adversarial_reference(planar, [0.2, 0.1], SelectionStrategy.maximal(), 1.0, 0.01)
        cert = filippov_certificate(planar, tracking_pair(planar, z, [0.2, 0.1]), z)
        assert np.max(cert.rho) > 0.0
        assert cert.valid

    def test_grids_must_match(self, planar):
        z = integrate(planar, [0.0, 0.0], SelectionStrategy.maximal(), 1.0, 0.01)
        u = integrate(planar, [0.0, 0.0], SelectionStrategy.maximal(), 0.5, 0.01)
        with pytest.raises(PreconditionError):
            filippov_certificate(planar, u, z)

    def test_needs_selection_record(self, planar):
        z = Trajectory(0.0, 0.1, np.zeros((3, 2)), np.ones(2))
        with pytest.raises(PreconditionError):
            filippov_certificate(planar, z, z)

    def test_needs_lipschitz_constant(self, sqrt_generator):
        model = sqrt_generator.model
        z = integrate(model, [1.0], SelectionStrategy.maximal(), 0.1, 0.01)
        with pytest.raises(PreconditionError):
            filippov_certificate(model, z, z)
