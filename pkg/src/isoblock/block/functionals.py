"""The functionals D and F, the reparametrization alpha and exit times"""

import logging

import numpy as np

from isoblock.core.state import StateVec
from isoblock.core.trajectory import PointCloudSet
from isoblock.errors import PreconditionError
from isoblock.utils.math_utils import lerp

logger = logging.getLogger(__name__)

EXIT_BISECTIONS = 7  # 2^-7 < 1/100 of a step


def alpha(t):
    """2 - 1/(1 + t): increasing, alpha(0) = 1, below 2"""
    return 2.0 - 1.0 / (1.0 + np.asarray(t, dtype=float))


def _coords(x):
    return x.coords if isinstance(x, StateVec) else np.asarray(x, dtype=float)


class BlockFunctionals:
    """K, A-(N), N and O(K) with the distance functionals built on them"""

    def __init__(self, K_cloud, A_minus_cloud, region_N, region_O=None):
        """
        Args:
            K_cloud: PointCloudSet approximating K
            A_minus_cloud: PointCloudSet approximating A-(N)
            region_N: Region N (its interior is U)
            region_O: Region O(K); defaults to N

        Raises:
            PreconditionError: a K point is not strictly interior to N
        """
        self.K_cloud = K_cloud
        self.A_minus_cloud = A_minus_cloud
        self.region_N = region_N
        self.region_O = region_O if region_O is not None else region_N
        interior = region_N.signed_distances(K_cloud.points) < -region_N.membership_tol
        if not np.all(interior):
            raise PreconditionError(
                f"{int(np.sum(~interior))} K points are not in the interior of N"
            )

    def restricted_to(self, region_N):
        """Functionals relative to a smaller N, with A-(N) cut down to it"""
        mask = region_N.signed_distances(self.A_minus_cloud.points) <= region_N.membership_tol
        points = self.A_minus_cloud.points[mask]
        if len(points) == 0:
            points = self.K_cloud.points
        cloud = PointCloudSet(
            points, self.A_minus_cloud.metric_weights, self.A_minus_cloud.label,
            self.A_minus_cloud.horizon,
        )
        return BlockFunctionals(self.K_cloud, cloud, region_N, self.region_O)

    def D_values(self, points):
        """D for an array of points assumed to lie in N"""
        points = np.atleast_2d(points)
        d_K = self.K_cloud.distances(points)
        d_out = self.region_N.distances_to_exterior(points)
        total = d_K + d_out
        return np.divide(d_K, total, out=np.zeros_like(d_K), where=total > 0)

    def F_values(self, points):
        return np.minimum(1.0, self.A_minus_cloud.distances(np.atleast_2d(points)))

    def in_U(self, x):
        return self.region_N.interior(x)

    def __repr__(self):
        return (
            f"BlockFunctionals(K={len(self.K_cloud)}, A-={len(self.A_minus_cloud)}, "
            f"N={self.region_N!r})"
        )


def compute_D(x, f):
    """
    D(x) = d(x, K) / (d(x, K) + d(x, X \\ N))

    Raises:
        PreconditionError: x outside N
    """
    coords = _coords(x)
    if not f.region_N.contains(coords):
        raise PreconditionError("D is only defined on N")
    return float(f.D_values(coords)[0])


def compute_F(x, f):
    """
    F(x) = min(1, d(x, A-(N)))

    Raises:
        PreconditionError: the A- cloud is empty
    """
    return float(f.F_values(_coords(x))[0])


def exit_time(traj, region, open_set=False):
    """
    First time traj leaves region, bisected on the linear interpolant to dt/100

    Args:
        traj: Trajectory
        region: Region
        open_set: Use the interior (exit of U, t+) instead of the closed set (s+)

    Returns:
        (time since traj.t0, truncated); truncated means traj ends inside

    Raises:
        PreconditionError: traj starts outside the closed region
    """
    sd = region.signed_distances(traj.states)
    tol = region.membership_tol
    if sd[0] > tol:
        raise PreconditionError("trajectory starts outside the region")
    outside = sd >= -tol if open_set else sd > tol
    hits = np.flatnonzero(outside)
    if len(hits) == 0:
        return traj.t_end - traj.t0, True
    j = int(hits[0])
    if j == 0:
        return 0.0, False

    a, b = traj.states[j - 1], traj.states[j]
    lo, hi = 0.0, 1.0
    for _ in range(EXIT_BISECTIONS):
        mid = 0.5 * (lo + hi)
        value = region.signed_distance(lerp(a, b, mid))
        if (value >= -tol) if open_set else (value > tol):
            hi = mid
        else:
            lo = mid
    return (j - 1 + hi) * traj.dt, False
