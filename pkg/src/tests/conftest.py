"""Shared small models and generators"""

import numpy as np
import pytest

from isoblock.core.region import RegionSpec
from isoblock.core.state import StateVec
from isoblock.models.heaviside import HeavisideRD, RDConfig
from isoblock.models.zoo import LinearSaddle, PlanarLipschitzInclusion, SqrtODE
from isoblock.solver.integrator import BundleGenerator

ALL_STRATEGIES = [
    "maximal",
    "minimal",
    "zero",
    "random:0.1",
    "random:0.05",
    "depart:0.0:+",
    "depart:0.0:-",
    "depart:0.5:+",
]


@pytest.fixture
def saddle():
    return LinearSaddle(1.0, 1.0)


@pytest.fixture
def saddle_generator(saddle):
    return BundleGenerator(saddle, ["maximal"], T=4.0, dt=0.02, seed=0)


@pytest.fixture
def unit_box():
    return RegionSpec.box(StateVec([0.0, 0.0]), [1.0, 1.0])


@pytest.fixture
def sqrt_generator():
    return BundleGenerator(
        SqrtODE(), ["zero", "maximal", "minimal", "depart:0.5:+", "depart:0.5:-"], T=2.0, dt=0.01
    )


@pytest.fixture
def planar():
    return PlanarLipschitzInclusion(1.0)


@pytest.fixture
def rd_config():
    return RDConfig(n=31, omega=0.0, epsilon_reg=0.0, dt=0.005, T=0.5)


@pytest.fixture
def rd_model(rd_config):
    return HeavisideRD(rd_config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
