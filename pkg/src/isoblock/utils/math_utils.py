"""Numerical helpers shared by the solver, the block builder and the RD model"""

import numpy as np
import scipy.sparse as sp


def lerp(a, b, t):
    """Linear interpolation"""
    return a + (b - a) * t


def weighted_norm(v, weights):
    """
    Weighted l2 norm sqrt(sum w_i v_i^2)

    Args:
        v: Array of shape (n,) or (m, n); norms are taken over the last axis
        weights: Positive weights of shape (n,)
    """
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.sum(weights * v * v, axis=-1))


def scaled(points, weights):
    """Map points into coordinates where the weighted metric is Euclidean"""
    return np.asarray(points, dtype=float) * np.sqrt(weights)


def laplacian_1d(n, h):
    """
    Second-difference Dirichlet Laplacian on n interior points

    Args:
        n: Number of interior grid points
        h: Grid spacing

    Returns:
        scipy.sparse.csc_matrix: (u_{i-1} - 2 u_i + u_{i+1}) / h^2 with u_0 = u_{n+1} = 0
    """
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csc") / (h * h)


def interval_measure_below(a, b, width, level):
    """
    Measure of {s in [0, width]: |l(s)| <= level} for the linear l with l(0)=a, l(width)=b

    Exact per cell, used for sublevel measures of piecewise-linear profiles.
    """
    if a == b:
        return width if abs(a) <= level else 0.0
    slope = (b - a) / width
    s_lo = (-level - a) / slope
    s_hi = (level - a) / slope
    if s_lo > s_hi:
        s_lo, s_hi = s_hi, s_lo
    return max(0.0, min(width, s_hi) - max(0.0, s_lo))
