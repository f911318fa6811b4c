"""Closed neighborhoods N with interior U, given by signed distance functions"""

from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from isoblock.config import MEMBERSHIP_TOL
from isoblock.core.state import StateVec
from isoblock.errors import DimensionError, PreconditionError
from isoblock.utils.math_utils import scaled, weighted_norm


class RegionKind(Enum):
    BOX = "box"
    BALL = "ball"


def _as_coords(x):
    return x.coords if isinstance(x, StateVec) else np.asarray(x, dtype=float)


class Region:
    """
    Common membership logic; subclasses provide signed_distances

    signed distance < 0 inside, 0 on the boundary, > 0 outside.
    """

    membership_tol = MEMBERSHIP_TOL
    metric_weights = None

    def signed_distances(self, points):
        raise NotImplementedError

    def signed_distance(self, x):
        coords = _as_coords(x)
        return float(self.signed_distances(coords[None, :])[0])

    def contains(self, x):
        """Closed-set membership (within membership_tol)"""
        return self.signed_distance(x) <= self.membership_tol

    def interior(self, x):
        """x in U = int N"""
        return self.signed_distance(x) < -self.membership_tol

    def on_boundary(self, x):
        return abs(self.signed_distance(x)) <= self.membership_tol

    def distance_to_exterior(self, x):
        """d(x, X \\ N), zero outside"""
        return max(0.0, -self.signed_distance(x))

    def distances_to_exterior(self, points):
        return np.maximum(0.0, -self.signed_distances(points))


class RegionSpec(Region):
    """Box or ball in the weighted metric"""

    def __init__(self, kind, center, radii, membership_tol=MEMBERSHIP_TOL):
        """
        Args:
            kind: RegionKind or its string value
            center: StateVec
            radii: Per-coordinate half-widths (box) or a scalar radius (ball)
            membership_tol: Width of the boundary band
        """
        self.kind = RegionKind(kind)
        self.center = center
        self.metric_weights = center.metric_weights
        self.membership_tol = float(membership_tol)
        if self.membership_tol <= 0:
            raise PreconditionError("membership_tol must be positive")
        if self.kind is RegionKind.BALL:
            self.radii = float(np.asarray(radii, dtype=float).reshape(-1)[0])
            if self.radii <= 0:
                raise PreconditionError("ball radius must be positive")
        else:
            radii = np.asarray(radii, dtype=float)
            self.radii = np.broadcast_to(radii, center.coords.shape).astype(float).copy()
            if np.any(self.radii <= 0):
                raise PreconditionError("box half-widths must be positive")

    @classmethod
    def box(cls, center, radii, membership_tol=MEMBERSHIP_TOL):
        return cls(RegionKind.BOX, center, radii, membership_tol)

    @classmethod
    def ball(cls, center, radius, membership_tol=MEMBERSHIP_TOL):
        return cls(RegionKind.BALL, center, radius, membership_tol)

    def signed_distances(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.center.dimension:
            raise DimensionError("point dimension does not match the region")
        offset = points - self.center.coords
        if self.kind is RegionKind.BALL:
            return weighted_norm(offset, self.metric_weights) - self.radii
        excess = np.abs(offset) - self.radii
        root_w = np.sqrt(self.metric_weights)
        outside = np.sqrt(np.sum(self.metric_weights * np.maximum(excess, 0.0) ** 2, axis=1))
        inside = np.max(root_w * excess, axis=1)
        return np.where(np.all(excess <= 0.0, axis=1), inside, outside)

    def scaled_by(self, factor):
        """Concentric region with radii multiplied by factor"""
        return RegionSpec(self.kind, self.center, self.radii * factor, self.membership_tol)

    def grid(self, resolution, shrink=1.0):
        """
        Tensor grid covering a box (low dimension only)

        Args:
            resolution: Points per axis
            shrink: Fraction of the half-width covered
        """
        if self.kind is not RegionKind.BOX:
            raise PreconditionError("tensor grids are only defined for boxes")
        axes = [
            np.linspace(c - shrink * r, c + shrink * r, resolution)
            for c, r in zip(self.center.coords, self.radii)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_dict(self):
        radii = self.radii if np.isscalar(self.radii) else self.radii.tolist()
        return {
            "kind": self.kind.value,
            "center": self.center.to_list(),
            "radii": radii,
            "membership_tol": self.membership_tol,
        }

    def __repr__(self):
        return f"RegionSpec({self.kind.value}, center={self.center}, radii={self.radii})"


class SampledRegion(Region):
    """
    Region known only through member / non-member samples

    The signed distance of x is its distance to the bisector of the nearest
    member m and the nearest non-member o, (|x - m|^2 - |x - o|^2) / (2 |m - o|),
    which is zero halfway between the two sample sets.
    """

    def __init__(self, samples, member_mask, metric_weights, cell, membership_tol=MEMBERSHIP_TOL):
        """
        Args:
            samples: Array (m, n) of sample points
            member_mask: Boolean array (m,), True for samples inside the region
            metric_weights: Weights of the phase-space metric
            cell: Sample spacing, used when no exterior samples exist
        """
        self.samples = np.atleast_2d(np.asarray(samples, dtype=float))
        self.member_mask = np.asarray(member_mask, dtype=bool)
        self.metric_weights = np.asarray(metric_weights, dtype=float)
        self.cell = float(cell)
        self.membership_tol = float(membership_tol)
        if not self.member_mask.any():
            raise PreconditionError("a sampled region needs at least one member sample")
        pts = scaled(self.samples, self.metric_weights)
        self._inside = cKDTree(pts[self.member_mask])
        outside = pts[~self.member_mask]
        self._outside = cKDTree(outside) if len(outside) else None

    def signed_distances(self, points):
        pts = scaled(np.atleast_2d(np.asarray(points, dtype=float)), self.metric_weights)
        d_in, i_in = self._inside.query(pts)
        d_in = np.asarray(d_in, dtype=float)
        if self._outside is None:
            return d_in - 0.5 * self.cell
        d_out, i_out = self._outside.query(pts)
        d_out = np.asarray(d_out, dtype=float)
        gap = np.linalg.norm(self._inside.data[i_in] - self._outside.data[i_out], axis=-1)
        return (d_in**2 - d_out**2) / (2.0 * gap)

    def __repr__(self):
        return (
            f"SampledRegion(members={int(self.member_mask.sum())}, "
            f"samples={len(self.samples)}, cell={self.cell:g})"
        )
