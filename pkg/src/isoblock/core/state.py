"""Points of the discretized phase space and the weighted l2 metric"""

import numpy as np

from isoblock.errors import DimensionError
from isoblock.utils.math_utils import weighted_norm


class StateVec:
    """Phase-space point with weighted-l2 metric weights"""

    def __init__(self, coords, metric_weights=None):
        """
        Args:
            coords: Sequence of n >= 1 reals
            metric_weights: Positive weights, same length (defaults to ones)
        """
        self.coords = np.atleast_1d(np.asarray(coords, dtype=float)).copy()
        if self.coords.ndim != 1 or self.coords.size == 0:
            raise DimensionError("coords must be a nonempty vector")
        if metric_weights is None:
            metric_weights = np.ones_like(self.coords)
        self.metric_weights = np.atleast_1d(np.asarray(metric_weights, dtype=float)).copy()
        if self.metric_weights.shape != self.coords.shape:
            raise DimensionError(
                f"coords ({self.coords.size}) and metric_weights "
                f"({self.metric_weights.size}) differ in length"
            )
        if np.any(self.metric_weights <= 0):
            raise DimensionError("metric weights must be strictly positive")

    @property
    def dimension(self):
        return self.coords.size

    def __add__(self, other):
        return StateVec(self.coords + _coords_of(other), self.metric_weights)

    def __sub__(self, other):
        return StateVec(self.coords - _coords_of(other), self.metric_weights)

    def __mul__(self, scalar):
        return StateVec(self.coords * scalar, self.metric_weights)

    def __neg__(self):
        return StateVec(-self.coords, self.metric_weights)

    def norm(self):
        """Weighted l2 norm"""
        return float(weighted_norm(self.coords, self.metric_weights))

    def copy(self):
        return StateVec(self.coords, self.metric_weights)

    def to_list(self):
        return [float(c) for c in self.coords]

    def __repr__(self):
        head = ", ".join(f"{c:.4g}" for c in self.coords[:4])
        tail = ", ..." if self.coords.size > 4 else ""
        return f"StateVec([{head}{tail}], n={self.coords.size})"


def _coords_of(value):
    return value.coords if isinstance(value, StateVec) else np.asarray(value, dtype=float)


def distance(x, y):
    """
    Weighted l2 distance d(x, y) = sqrt(sum w_i (x_i - y_i)^2)

    Both states must carry the same dimension and the same weights.

    Raises:
        DimensionError: dimensions or metric weights differ
    """
    if x.coords.shape != y.coords.shape:
        raise DimensionError(f"dimension mismatch: {x.coords.size} vs {y.coords.size}")
    if not np.array_equal(x.metric_weights, y.metric_weights):
        raise DimensionError("the two states carry different metric weights")
    return float(weighted_norm(x.coords - y.coords, x.metric_weights))


def grid_weights(n):
    """Weights w_i = h = 1/(n+1) approximating the L2(0,1) norm"""
    return np.full(n, 1.0 / (n + 1))
