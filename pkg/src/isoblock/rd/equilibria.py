"""Equilibria v_k^+- of the Heaviside RD inclusion and the Lyapunov function E"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from isoblock.config import EQUILIBRIUM_RESIDUAL_TOL, NEWTON_MAX_ITER
from isoblock.core.state import StateVec, grid_weights
from isoblock.errors import NumericalError, PreconditionError
from isoblock.solver.selection import distance_to_box, heaviside_selection
from isoblock.utils.math_utils import laplacian_1d

logger = logging.getLogger(__name__)


def k_max(n):
    """Largest resolvable lobe count on n interior points"""
    from isoblock.config import POINTS_PER_LOBE

    return n // POINTS_PER_LOBE


def lobe_profile(s, width, omega):
    """
    Positive solution of -u'' = 1 + omega u on (0, width) with zero ends

    omega = 0: s (width - s) / 2
    omega > 0: (cos(sqrt(omega)(s - width/2)) / cos(sqrt(omega) width/2) - 1) / omega
    """
    s = np.asarray(s, dtype=float)
    if omega == 0:
        return s * (width - s) / 2.0
    r = math.sqrt(omega)
    return (np.cos(r * (s - width / 2.0)) / math.cos(r * width / 2.0) - 1.0) / omega


def lobe_slope(width, omega):
    """|u'(0)| of lobe_profile"""
    if omega == 0:
        return width / 2.0
    r = math.sqrt(omega)
    return math.tan(r * width / 2.0) / r


def analytic_profile(k, sign, x, omega):
    """k equal lobes of alternating sign, starting with sign on the first lobe"""
    width = 1.0 / k
    lobe = np.minimum(np.floor(x / width), k - 1).astype(int)
    local = x - lobe * width
    signs = sign * np.where(lobe % 2 == 0, 1.0, -1.0)
    return signs * lobe_profile(local, width, omega)


def stationary_residual(u, config):
    """Weighted distance of -A u - omega u to H0(u), zero exactly at equilibria"""
    u = np.asarray(u, dtype=float)
    A = laplacian_1d(config.n, config.h)
    h = -(A @ u) - config.omega * u
    lo, hi = heaviside_selection(u)
    return distance_to_box(h, lo, hi, grid_weights(config.n))


def interior_zeros(u, x, h):
    """Zero locations of the piecewise-linear interpolant inside (0, 1)"""
    zeros = []
    for i, value in enumerate(u):
        if value == 0.0:
            zeros.append(float(x[i]))
        elif i + 1 < len(u) and u[i + 1] != 0.0 and value * u[i + 1] < 0:
            zeros.append(float(x[i] + h * value / (value - u[i + 1])))
    return zeros


def _polish(seed, config, zero_tol):
    """
    Piecewise-linear Newton on the discrete stationary problem

    For a fixed sign pattern s the problem (-A - omega I) u = s is linear;
    nodes where the seed vanishes are pinned to 0 with a free selection.
    The pattern is updated until it is self-consistent.
    """
    n = config.n
    M = sp.csc_matrix(-laplacian_1d(n, config.h) - config.omega * sp.identity(n))
    pinned = np.abs(seed) <= zero_tol
    pattern = np.sign(seed)
    for iteration in range(1, NEWTON_MAX_ITER + 1):
        rows = M.tolil()
        rhs = pattern.astype(float)
        for i in np.flatnonzero(pinned):
            rows.rows[i] = [i]
            rows.data[i] = [1.0]
            rhs[i] = 0.0
        u = spsolve(sp.csc_matrix(rows), rhs)
        u[pinned] = 0.0
        new_pattern = np.where(pinned, 0.0, np.sign(u))
        if np.array_equal(new_pattern, pattern):
            return u, iteration
        pattern = new_pattern
    raise NumericalError(f"equilibrium polish did not settle in {NEWTON_MAX_ITER} iterations")


@dataclass
class Equilibrium:
    """Fixed point v_k^sign with its zeros, boundary slope and energy"""

    k: int
    sign: int
    profile: StateVec
    zeros: list
    gamma0: float
    energy: float
    lobe_width: float = 0.0
    iterations: int = 0
    residual: float = 0.0
    seed: np.ndarray = field(default=None, repr=False)

    @property
    def sup_norm(self):
        return float(np.max(np.abs(self.profile.coords)))

    @property
    def nondegeneracy_constant(self):
        """C = 4k / gamma0"""
        return 4.0 * self.k / self.gamma0

    def csv_rows(self, config):
        """Rows (x, v(x)) including the boundary zeros"""
        x = np.concatenate([[0.0], config.x, [1.0]])
        v = np.concatenate([[0.0], self.profile.coords, [0.0]])
        return ["x", "v"], [[float(a), float(b)] for a, b in zip(x, v)]

    def to_dict(self):
        return {
            "k": self.k,
            "sign": self.sign,
            "zeros": self.zeros,
            "gamma0": self.gamma0,
            "C": self.nondegeneracy_constant,
            "energy": self.energy,
            "sup_norm": self.sup_norm,
            "lobe_width": self.lobe_width,
            "iterations": self.iterations,
            "residual": self.residual,
        }


def shoot_equilibrium(k, sign, config):
    """
    Build v_k^sign from the per-lobe analytic solve and polish it on the grid

    Args:
        k: Number of lobes (k - 1 interior zeros)
        sign: +1 or -1, the sign of the first lobe
        config: RDConfig

    Raises:
        PreconditionError: k outside 1..k_max(n) or sign not +-1
        NumericalError: the polish fails to reach the residual tolerance
    """
    if sign not in (1, -1):
        raise PreconditionError("sign must be +1 or -1")
    if not 1 <= k <= k_max(config.n):
        raise PreconditionError(
            f"k={k} is not resolvable on n={config.n} points (k_max={k_max(config.n)})"
        )
    x = config.x
    seed = analytic_profile(k, sign, x, config.omega)
    zero_tol = 1e-12 * max(1.0, float(np.max(np.abs(seed))))
    u, iterations = _polish(seed, config, zero_tol)
    residual = stationary_residual(u, config)
    if residual > EQUILIBRIUM_RESIDUAL_TOL:
        raise NumericalError(f"v_{k} residual {residual:.3g} above {EQUILIBRIUM_RESIDUAL_TOL}")

    zeros = interior_zeros(u, x, config.h)
    if len(zeros) != k - 1:
        raise NumericalError(f"v_{k} has {len(zeros)} interior zeros, expected {k - 1}")
    width = 1.0 / k
    logger.debug("v_%d^%+d: %d polish iterations, residual %.2e", k, sign, iterations, residual)
    return Equilibrium(
        k=k,
        sign=sign,
        profile=StateVec(u, grid_weights(config.n)),
        zeros=zeros,
        gamma0=lobe_slope(width, config.omega),
        energy=lyapunov_E(u, config),
        lobe_width=width,
        iterations=iterations,
        residual=residual,
        seed=seed,
    )


def lyapunov_E(u, config):
    """
    Discrete E(u) = 1/2 sum h ((u_{i+1} - u_i)/h)^2 - sum h (|u_i| + omega u_i^2 / 2)

    Boundary values are 0.
    """
    coords = u.coords if isinstance(u, StateVec) else np.asarray(u, dtype=float)
    h = config.h
    padded = np.concatenate([[0.0], coords, [0.0]])
    gradient = np.diff(padded) / h
    return float(
        0.5 * h * np.sum(gradient**2)
        - h * np.sum(np.abs(coords) + 0.5 * config.omega * coords**2)
    )


@dataclass
class EnergyOrderingReport:
    energies: dict
    sup_norms: dict
    strictly_increasing: bool
    all_negative: bool
    symmetric: bool
    forbidden: list
    passed: bool

    def to_dict(self):
        return {
            "energies": {str(k): v for k, v in self.energies.items()},
            "sup_norms": {str(k): v for k, v in self.sup_norms.items()},
            "strictly_increasing": self.strictly_increasing,
            "all_negative": self.all_negative,
            "symmetric": self.symmetric,
            "forbidden_connections": [list(pair) for pair in self.forbidden],
            "passed": self.passed,
        }


def check_energy_ordering(config, k_limit):
    """
    E(v_1) < E(v_2) < ... < E(v_k_limit) < E(0) = 0 and E(v_k^+) = E(v_k^-)

    Also lists the forbidden connections v_k -> v_j (k <= j), which would
    require E to increase or stay constant along a nonconstant orbit.

    Raises:
        PreconditionError: k_limit > k_max(n)
    """
    if k_limit > k_max(config.n):
        raise PreconditionError(f"k_max={k_limit} exceeds the resolvable {k_max(config.n)}")
    energies, sup_norms = {}, {}
    symmetric = True
    for k in range(1, k_limit + 1):
        plus = shoot_equilibrium(k, 1, config)
        minus = shoot_equilibrium(k, -1, config)
        symmetric &= bool(np.isclose(plus.energy, minus.energy, rtol=1e-12, atol=1e-15))
        energies[k] = plus.energy
        sup_norms[k] = plus.sup_norm
    values = [energies[k] for k in sorted(energies)]
    increasing = all(a < b for a, b in zip(values, values[1:]))
    negative = all(v < 0 for v in values)
    forbidden = [(k, j) for k in energies for j in energies if energies[k] <= energies[j]]
    report = EnergyOrderingReport(
        energies, sup_norms, increasing, negative, symmetric, forbidden,
        increasing and negative and symmetric,
    )
    logger.info("energy ordering up to k=%d: %s", k_limit, "pass" if report.passed else "FAIL")
    return report
