"""Tests for the reference models and their closed forms"""

import math

import numpy as np
import pytest

from isoblock.errors import ConfigError, PreconditionError
from isoblock.models.zoo import (
    LinearSaddle,
    PlanarLipschitzInclusion,
    SqrtFamily,
    make_zoo_model,
    saddle_exact,
    sqrt_ode_exact,
)


class TestSqrtODE:
    """x' = sqrt|x| and its solution family at 0"""

    def test_unique_branch(self):
        assert abs(sqrt_ode_exact(1.0, "unique", 2.0) - 4.0) < 1e-15
        assert abs(sqrt_ode_exact(-1.0, "unique", 2.0) + 4.0) < 1e-15

    @pytest.mark.parametrize(
        "tau, t, expected", [(0.0, 2.0, 1.0), (1.0, 2.0, 0.25), (1.0, 0.5, 0.0)]
    )
    def test_departing_family(self, tau, t, expected):
        assert abs(sqrt_ode_exact(0.0, SqrtFamily.DEPART, t, tau, 1) - expected) < 1e-15
        assert abs(sqrt_ode_exact(0.0, SqrtFamily.DEPART, t, tau, -1) + expected) < 1e-15

    def test_family_must_match_origin(self):
        with pytest.raises(PreconditionError):
            sqrt_ode_exact(0.0, "unique", 1.0)
        with pytest.raises(PreconditionError):
            sqrt_ode_exact(1.0, "constant", 1.0)

    def test_closed_form_of_model(self):
        zoo = make_zoo_model("sqrt-ode")
        assert np.allclose(zoo.closed_form([0.25], 1.0), [1.0])
        assert zoo.model.equilibria()[0][0] == 0.0


class TestSaddle:
    """x1' = a x1, x2' = -b x2"""

    def test_exact(self):
        out = saddle_exact([1.0, 1.0], 1.0, a=2.0, b=0.5)
        assert np.allclose(out, [math.exp(2.0), math.exp(-0.5)])

    def test_time_reversal(self):
        forward = LinearSaddle(1.0, 2.0)
        backward = forward.time_reversed()
        x = np.array([0.3, 0.4])
        assert np.allclose(backward.closed_form(forward.closed_form(x, 0.7), 0.7), x)
        assert backward.time_reversed().direction == 1

    def test_rates_positive(self):
        with pytest.raises(PreconditionError):
            LinearSaddle(0.0, 1.0)


class TestPlanar:
    """Planar inclusion with a known Lipschitz constant"""

    def test_box_and_rotation(self):
        model = PlanarLipschitzInclusion(2.0)
        lo, hi = model.selection_set([0.0, 0.0])
        s = 2.0 / (2 * math.sqrt(2))
        assert np.allclose(hi, [s, s]) and np.allclose(lo, [-s, -s])
        assert np.allclose(model.nonstiff([1.0, 0.0]), [0.0, 1.0])

    def test_adversarial_inflates(self):
        model = PlanarLipschitzInclusion(1.0)
        lo, hi = model.adversarial(2.0).selection_set([0.5, 0.0])
        lo0, hi0 = model.selection_set([0.5, 0.0])
        assert np.allclose(hi, 2.0 * hi0)

    def test_factory(self):
        assert make_zoo_model("planar-lipschitz", C=3.0).model.lipschitz_C == 3.0
        assert make_zoo_model("saddle", a=2.0).model.a == 2.0
        with pytest.raises(ConfigError):
            make_zoo_model("lorenz")
