"""Sampled solutions, solution bundles and point clouds"""

from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from isoblock.core.state import StateVec
from isoblock.errors import DimensionError, PreconditionError
from isoblock.utils.math_utils import scaled, weighted_norm


class Trajectory:
    """A solution sampled on the uniform grid t_j = t0 + j*dt, with its selection record"""

    def __init__(self, t0, dt, states, metric_weights, selection=None):
        """
        Args:
            t0: Start time (negative for complete trajectories)
            dt: Positive step
            states: Array (m, n) of states, m >= 1
            metric_weights: Weights of the phase-space metric
            selection: Array (m-1, k) of chosen h(t_j), or None for single-valued records
        """
        if dt <= 0:
            raise PreconditionError("dt must be positive")
        self.t0 = float(t0)
        self.dt = float(dt)
        self.states = np.atleast_2d(np.asarray(states, dtype=float))
        if self.states.shape[0] == 0:
            raise PreconditionError("a trajectory needs at least one state")
        self.metric_weights = np.asarray(metric_weights, dtype=float)
        if self.metric_weights.shape != (self.states.shape[1],):
            raise DimensionError("metric weights do not match the state dimension")
        if selection is None or len(selection) == 0:
            self.selection = np.empty((0, self.states.shape[1]))
        else:
            self.selection = np.atleast_2d(np.asarray(selection, dtype=float))
            if self.selection.shape[0] != self.states.shape[0] - 1:
                raise DimensionError("selection record must have one entry per step")

    @property
    def n_samples(self):
        return self.states.shape[0]

    @property
    def dimension(self):
        return self.states.shape[1]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_samples)

    @property
    def t_end(self):
        return self.t0 + self.dt * (self.n_samples - 1)

    def has_selection(self):
        return self.selection.shape[0] > 0

    def state(self, j):
        """State at grid index j as a StateVec"""
        return StateVec(self.states[j], self.metric_weights)

    def origin(self):
        return self.state(0)

    def endpoint(self):
        return self.state(-1)

    def index_of(self, t):
        """Grid index of time t (must lie on the grid)"""
        j = (t - self.t0) / self.dt
        if abs(j - round(j)) > 1e-6 or not 0 <= round(j) < self.n_samples:
            raise PreconditionError(f"time {t} is not on the trajectory grid")
        return int(round(j))

    def tail(self, j):
        """The solution restarted at index j, re-timed to start at 0"""
        sel = self.selection[j:] if self.has_selection() else None
        return Trajectory(0.0, self.dt, self.states[j:], self.metric_weights, sel)

    def head(self, j):
        """The first j+1 samples"""
        sel = self.selection[:j] if self.has_selection() else None
        return Trajectory(self.t0, self.dt, self.states[: j + 1], self.metric_weights, sel)

    def concatenate(self, other):
        """
        Join this trajectory with one starting at this trajectory's endpoint

        Raises:
            PreconditionError: steps differ
        """
        if abs(other.dt - self.dt) > 1e-15:
            raise PreconditionError("cannot concatenate trajectories with different steps")
        states = np.vstack([self.states, other.states[1:]])
        if self.has_selection() or other.has_selection():
            selection = np.vstack([self.selection, other.selection])
        else:
            selection = None
        return Trajectory(self.t0, self.dt, states, self.metric_weights, selection)

    def gaps_to(self, other, n=None):
        """Per-sample weighted distances to another trajectory on the same grid"""
        m = min(self.n_samples, other.n_samples) if n is None else n
        return weighted_norm(self.states[:m] - other.states[:m], self.metric_weights)

    def sup_distance(self, other, n=None):
        """Sup over the common samples of d(self(t_j), other(t_j))"""
        return float(np.max(self.gaps_to(other, n)))

    def csv_rows(self):
        """Rows (t, x_1..x_n) for export"""
        header = ["t"] + [f"x_{i + 1}" for i in range(self.dimension)]
        rows = [[float(t), *map(float, s)] for t, s in zip(self.times, self.states)]
        return header, rows

    def __repr__(self):
        return (
            f"Trajectory(t0={self.t0:g}, dt={self.dt:g}, samples={self.n_samples}, "
            f"n={self.dimension})"
        )


class Bundle:
    """Finite sample of the solution set D(x) sharing one origin"""

    def __init__(self, origin, members, seed=0):
        """
        Args:
            origin: StateVec all members start from
            members: Nonempty list of Trajectory
            seed: Seed the selections were generated from
        """
        self.origin = origin
        self.members = list(members)
        self.seed = seed

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def is_empty(self):
        return not self.members

    def __repr__(self):
        return f"Bundle(origin={self.origin}, members={len(self.members)}, seed={self.seed})"


class CloudLabel(Enum):
    K_APPROX = "K_approx"
    A_PLUS = "A_plus"
    A_MINUS = "A_minus"


class PointCloudSet:
    """Finite approximation of K, A+(N) or A-(N)"""

    def __init__(self, points, metric_weights, label, horizon=None):
        """
        Args:
            points: Array (m, n)
            metric_weights: Weights of the phase-space metric
            label: CloudLabel
            horizon: Finite horizon the cloud was estimated with, if any
        """
        self.metric_weights = np.asarray(metric_weights, dtype=float)
        pts = np.asarray(points, dtype=float)
        self.points = pts.reshape(-1, self.metric_weights.size)
        self.label = CloudLabel(label)
        self.horizon = horizon
        if self.label is CloudLabel.K_APPROX and len(self.points) == 0:
            raise PreconditionError("a K approximation cannot be empty")
        self._tree = cKDTree(scaled(self.points, self.metric_weights)) if len(self.points) else None

    def __len__(self):
        return len(self.points)

    def is_empty(self):
        return len(self.points) == 0

    def distance(self, x):
        """
        d(x, cloud) = min over points

        Raises:
            PreconditionError: the cloud is empty
        """
        if self._tree is None:
            raise PreconditionError(f"distance to an empty {self.label.value} cloud")
        coords = x.coords if isinstance(x, StateVec) else np.asarray(x, dtype=float)
        d, _ = self._tree.query(scaled(coords, self.metric_weights))
        return float(d)

    def distances(self, points):
        """Vectorised d(p, cloud) for an array of points"""
        if self._tree is None:
            raise PreconditionError(f"distance to an empty {self.label.value} cloud")
        d, _ = self._tree.query(scaled(points, self.metric_weights))
        return np.asarray(d, dtype=float)

    def contains(self, x, tol):
        return self.distance(x) <= tol

    def states(self):
        return [StateVec(p, self.metric_weights) for p in self.points]

    def to_dict(self):
        return {
            "label": self.label.value,
            "horizon": self.horizon,
            "finite_horizon": self.horizon is not None,
            "points": self.points.tolist(),
        }

    def __repr__(self):
        return f"PointCloudSet({self.label.value}, points={len(self.points)})"
