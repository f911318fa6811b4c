"""Low-dimensional reference models with closed-form solutions"""

import math
from enum import Enum

import numpy as np

from isoblock.core.state import StateVec
from isoblock.errors import ConfigError, PreconditionError
from isoblock.solver.model import InclusionModel
from isoblock.solver.selection import heaviside_selection
from isoblock.utils.math_utils import weighted_norm


class SqrtFamily(Enum):
    UNIQUE = "unique"
    CONSTANT = "constant"
    DEPART = "depart"


def sqrt_ode_exact(x0, family, t, tau=0.0, sign=1):
    """
    Closed-form solutions of x' = sqrt|x| (odd extension below zero)

    Args:
        x0: Initial value
        family: SqrtFamily (UNIQUE needs x0 != 0, CONSTANT/DEPART need x0 == 0)
        t: Time >= 0
        tau: Departure time (DEPART)
        sign: Departure direction (DEPART)

    Raises:
        PreconditionError: family and x0 do not match
    """
    family = SqrtFamily(family)
    if family is SqrtFamily.UNIQUE:
        if x0 == 0:
            raise PreconditionError("x0 = 0 has no unique solution; pick CONSTANT or DEPART")
        if x0 > 0:
            return (t / 2.0 + math.sqrt(x0)) ** 2
        return -((t / 2.0 + math.sqrt(-x0)) ** 2)
    if x0 != 0:
        raise PreconditionError(f"the {family.value} family starts at 0, not {x0}")
    if family is SqrtFamily.CONSTANT or t <= tau:
        return 0.0
    return math.copysign((t - tau) ** 2 / 4.0, sign)


def saddle_exact(x0, t, a=1.0, b=1.0):
    """(x1 e^{a t}, x2 e^{-b t})"""
    coords = x0.coords if isinstance(x0, StateVec) else np.asarray(x0, dtype=float)
    if coords.shape != (2,):
        raise PreconditionError("the saddle is two-dimensional")
    out = np.array([coords[0] * math.exp(a * t), coords[1] * math.exp(-b * t)])
    return StateVec(out) if isinstance(x0, StateVec) else out


class SqrtODE(InclusionModel):
    """x' in H0(x) sqrt|x|, stepped with its exact local flow"""

    name = "sqrt-ode"

    def __init__(self):
        super().__init__(1)

    def selection_set(self, x):
        return heaviside_selection(np.asarray(x, dtype=float), sign_tol=0.0)

    def step(self, x, h, dt):
        """Exact flow of x' = s sqrt|x| over dt with s frozen"""
        x0, s = float(x[0]), float(h[0])
        if x0 == 0.0:
            return np.array([math.copysign((abs(s) * dt / 2.0) ** 2, s) if s else 0.0])
        return np.array([math.copysign((abs(s) * dt / 2.0 + math.sqrt(abs(x0))) ** 2, x0)])

    def residual(self, x, x_new, h, dt):
        return float(weighted_norm(x_new - self.step(x, h, dt), self.metric_weights))

    def residual_scale(self, x, x_new, dt):
        return 1.0 + abs(float(x_new[0]))

    def equilibria(self):
        return [np.zeros(1)]

    def closed_form(self, x0, t):
        return np.array([sqrt_ode_exact(float(np.asarray(x0).reshape(-1)[0]), "unique", t)])


class LinearSaddle(InclusionModel):
    """x1' = a x1, x2' = -b x2 as a degenerate (singleton) inclusion, explicit Euler"""

    name = "saddle"
    single_valued = True

    def __init__(self, a=1.0, b=1.0, direction=1):
        """
        Args:
            a: Unstable rate
            b: Stable rate
            direction: +1 forward flow, -1 backward flow
        """
        if a <= 0 or b <= 0:
            raise PreconditionError("saddle rates must be positive")
        super().__init__(2, lipschitz_C=max(a, b))
        self.a = float(a)
        self.b = float(b)
        self.direction = 1 if direction >= 0 else -1

    def field(self, x):
        x = np.asarray(x, dtype=float)
        return self.direction * np.array([self.a * x[0], -self.b * x[1]])

    def selection_set(self, x):
        f = self.field(x)
        return f, f.copy()

    def max_stable_dt(self):
        return 1.0 / max(self.a, self.b)

    def equilibria(self):
        return [np.zeros(2)]

    def time_reversed(self):
        return LinearSaddle(self.a, self.b, -self.direction)

    def closed_form(self, x0, t):
        return saddle_exact(np.asarray(x0, dtype=float), self.direction * t, self.a, self.b)


class PlanarLipschitzInclusion(InclusionModel):
    """
    u' in r J u + sigma(u) [-1, 1]^2 with sigma(u) = L (1 + sin u_1)

    With r = C/2 and L = C / (2 sqrt 2) the multivalued Lipschitz constant is C.
    """

    name = "planar-lipschitz"

    def __init__(self, C=1.0, inflation=1.0):
        """
        Args:
            C: Multivalued Lipschitz constant
            inflation: Scales the selection box (> 1 builds off-model trajectories)
        """
        if C <= 0:
            raise PreconditionError("Lipschitz constant must be positive")
        super().__init__(2, lipschitz_C=C)
        self.rotation = C / 2.0
        self.sigma_slope = C / (2.0 * math.sqrt(2.0))
        self.inflation = float(inflation)

    def sigma(self, x):
        return self.sigma_slope * (1.0 + math.sin(float(x[0])))

    def selection_set(self, x):
        s = self.inflation * self.sigma(x)
        return np.array([-s, -s]), np.array([s, s])

    def nonstiff(self, x):
        x = np.asarray(x, dtype=float)
        return self.rotation * np.array([-x[1], x[0]])

    def max_stable_dt(self):
        return 1.0 / self.lipschitz_C

    def equilibria(self):
        return []

    def adversarial(self, inflation=1.5):
        """Same dynamics with an inflated box, for trajectories that leave F(z)"""
        return PlanarLipschitzInclusion(self.lipschitz_C, inflation)


class ZooModel:
    """Model id plus its closed-form evaluator, selectable by string"""

    def __init__(self, model_id, model, closed_form=None):
        self.id = model_id
        self.model = model
        self.closed_form = closed_form

    def __repr__(self):
        return f"ZooModel({self.id}, {self.model!r})"


def make_zoo_model(model_id, a=1.0, b=1.0, C=1.0):
    """
    Build a zoo model by id string

    Raises:
        ConfigError: unknown id
    """
    if model_id == "sqrt-ode":
        model = SqrtODE()
        return ZooModel(model_id, model, model.closed_form)
    if model_id == "saddle":
        model = LinearSaddle(a, b)
        return ZooModel(model_id, model, model.closed_form)
    if model_id == "planar-lipschitz":
        return ZooModel(model_id, PlanarLipschitzInclusion(C))
    raise ConfigError(f"unknown zoo model {model_id!r}")
