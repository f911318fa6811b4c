"""Base class for differential inclusions u' in A u + f(u) with box-valued f"""

import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from isoblock.config import RESIDUAL_TOL
from isoblock.core.state import StateVec
from isoblock.errors import DimensionError
from isoblock.solver.selection import distance_to_box
from isoblock.utils.math_utils import weighted_norm

logger = logging.getLogger(__name__)


class InclusionModel:
    """
    Differential inclusion u' - A u in F(u) + N(u)

    F(u) is a box given per component by selection_set; N is a single-valued
    nonstiff drift; A is an optional stiff linear part treated implicitly.
    Subclasses override selection_set, nonstiff and, if needed, step/residual.
    """

    name = "inclusion"
    single_valued = False

    def __init__(self, dimension, metric_weights=None, linear_part=None, lipschitz_C=0.0):
        """
        Args:
            dimension: Phase-space dimension n
            metric_weights: Weights of the metric (default ones)
            linear_part: Optional sparse (n, n) operator A
            lipschitz_C: Multivalued Lipschitz constant of F + N (0 if unknown)
        """
        self.dimension = int(dimension)
        if metric_weights is None:
            metric_weights = np.ones(self.dimension)
        self.metric_weights = np.asarray(metric_weights, dtype=float)
        if self.metric_weights.shape != (self.dimension,):
            raise DimensionError("metric weights do not match the model dimension")
        self.linear_part = sp.csc_matrix(linear_part) if linear_part is not None else None
        self.lipschitz_C = float(lipschitz_C)
        self._factorizations = {}

    def selection_set(self, x):
        """Per-component closed interval (lo, hi) of admissible selections at x"""
        raise NotImplementedError

    def nonstiff(self, x):
        """Single-valued explicit drift N(x)"""
        return np.zeros_like(np.asarray(x, dtype=float))

    def drift(self, x, h):
        """Explicit right-hand side h + N(x)"""
        return h + self.nonstiff(x)

    def equilibria(self):
        """Known fixed points, as coordinate arrays"""
        return []

    def max_stable_dt(self):
        """Largest step accepted by the explicit part"""
        return np.inf

    def time_reversed(self):
        """Model of the backward flow, or None when backward solving is ill-posed"""
        return None

    def state(self, coords):
        return StateVec(coords, self.metric_weights)

    def _factorization(self, dt):
        key = float(dt)
        if key not in self._factorizations:
            eye = sp.identity(self.dimension, format="csc")
            self._factorizations[key] = splu(sp.csc_matrix(eye - dt * self.linear_part))
        return self._factorizations[key]

    def step(self, x, h, dt):
        """
        One IMEX Euler step: implicit on A, explicit on the selection and N

        (I - dt A) x_new = x + dt (h + N(x))
        """
        rhs = x + dt * self.drift(x, h)
        if self.linear_part is None:
            return rhs
        return self._factorization(dt).solve(rhs)

    def residual(self, x, x_new, h, dt):
        """Weighted norm of (x_new - x)/dt - A x_new - h - N(x)"""
        r = (x_new - x) / dt - self.drift(x, h)
        if self.linear_part is not None:
            r = r - self.linear_part @ x_new
        return float(weighted_norm(r, self.metric_weights))

    def residual_scale(self, x, x_new, dt):
        """Magnitude the residual is compared against"""
        return 1.0 + float(weighted_norm(x_new, self.metric_weights)) / dt

    def residual_ok(self, x, x_new, h, dt, tol=RESIDUAL_TOL):
        return self.residual(x, x_new, h, dt) <= tol * self.residual_scale(x, x_new, dt)

    def selection_distance(self, x, h):
        """Weighted distance from h to the selection box at x"""
        lo, hi = self.selection_set(x)
        return distance_to_box(h, lo, hi, self.metric_weights)

    def check_lipschitz(self, rng, n_pairs=100, spread=1.0, center=None):
        """
        Empirical max of dist_H(F(x) + N(x), F(z) + N(z)) / d(x, z) on random pairs

        For boxes the Hausdorff distance is the weighted norm of the
        componentwise max of endpoint differences.
        """
        center = np.zeros(self.dimension) if center is None else np.asarray(center, dtype=float)
        worst = 0.0
        for _ in range(n_pairs):
            x = center + spread * rng.standard_normal(self.dimension)
            z = center + spread * rng.standard_normal(self.dimension)
            lo_x, hi_x = self.selection_set(x)
            lo_z, hi_z = self.selection_set(z)
            nx, nz = self.nonstiff(x), self.nonstiff(z)
            gap = np.maximum(np.abs(lo_x + nx - lo_z - nz), np.abs(hi_x + nx - hi_z - nz))
            d = weighted_norm(x - z, self.metric_weights)
            if d > 0:
                worst = max(worst, float(weighted_norm(gap, self.metric_weights)) / d)
        return worst

    def __repr__(self):
        return f"{self.__class__.__name__}(n={self.dimension}, C={self.lipschitz_C:g})"
