"""Relaxation-inequality certificates comparing a trajectory with a selection-driven one"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from isoblock.errors import PreconditionError
from isoblock.solver.integrator import integrate
from isoblock.solver.selection import SelectionStrategy

logger = logging.getLogger(__name__)


@dataclass
class FilippovCertificate:
    """
    Sampled bound ||u(t) - z(t)|| <= xi(t)

    rho(t) = 2 dist(g(t), F(z(t))) where g is the selection recorded along z,
    xi(t) = ||u0 - z0|| e^{2Ct} + int_0^t e^{2C(t-s)} rho(s) ds.
    """

    times: np.ndarray
    rho: np.ndarray
    xi: np.ndarray
    observed_gap: np.ndarray
    lipschitz_C: float
    slack: float
    valid: bool

    @property
    def worst_margin(self):
        """Largest observed_gap - xi (negative when the bound holds with room)"""
        return float(np.max(self.observed_gap - self.xi))

    def to_dict(self):
        return {
            "valid": self.valid,
            "lipschitz_C": self.lipschitz_C,
            "slack": self.slack,
            "worst_margin": self.worst_margin,
            "times": self.times.tolist(),
            "rho": self.rho.tolist(),
            "xi": self.xi.tolist(),
            "observed_gap": self.observed_gap.tolist(),
        }


def relaxation_bound(times, rho, initial_gap, C):
    """xi on the grid, the integral by the trapezoid rule"""
    decay = np.exp(-2.0 * C * times)
    integral = cumulative_trapezoid(decay * rho, times, initial=0.0)
    return np.exp(2.0 * C * times) * (initial_gap + integral)


def _rhs_sup(model, traj):
    """max_j ||h_j + N(x_j)||_inf along a trajectory"""
    if not traj.has_selection():
        return 0.0
    drifts = [model.drift(x, h) for x, h in zip(traj.states[:-1], traj.selection)]
    return float(np.max(np.abs(drifts)))


def filippov_certificate(model, u, z, slack=None):
    """
    Certificate for u against z on a shared grid

    Args:
        model: InclusionModel with lipschitz_C > 0
        u: Trajectory of the model
        z: Trajectory with a selection record (need not be a model solution)
        slack: Numeric slack; default 10 dt ||rhs||_inf

    Raises:
        PreconditionError: grids differ, C is not positive, or z has no selection record
    """
    if model.lipschitz_C <= 0:
        raise PreconditionError("certificates need a positive Lipschitz constant")
    if (
        u.n_samples != z.n_samples
        or abs(u.dt - z.dt) > 1e-15
        or abs(u.t0 - z.t0) > 1e-12
    ):
        raise PreconditionError("u and z must share the same time grid")
    if not z.has_selection():
        raise PreconditionError("z needs a selection record to measure rho")

    C = model.lipschitz_C
    times = z.times - z.t0
    per_step = np.array(
        [2.0 * model.selection_distance(x, h) for x, h in zip(z.states[:-1], z.selection)]
    )
    # rho is frozen per step; the last sample repeats the final step's value
    rho = np.append(per_step, per_step[-1] if len(per_step) else 0.0)
    gap = u.gaps_to(z)
    xi = relaxation_bound(times, rho, float(gap[0]), C)
    if slack is None:
        slack = 10.0 * z.dt * max(_rhs_sup(model, u), _rhs_sup(model, z), 1.0)
    valid = bool(np.all(gap <= xi + slack))
    if not valid:
        logger.info("certificate violated: worst margin %.3g", float(np.max(gap - xi)))
    return FilippovCertificate(times, rho, xi, gap, C, float(slack), valid)


def tracking_pair(model, z, u0):
    """
    Solution u from u0 whose selection projects z's velocity onto F(u)

    Returns:
        Trajectory on z's grid
    """
    T = z.t_end - z.t0
    return integrate(model, u0, SelectionStrategy.tracking(z), T, z.dt, t0=z.t0)


def adversarial_reference(model, z0, strategy, T, dt, inflation=1.5):
    """
    Trajectory z of an inflated copy of the model, so rho > 0 where the box is active

    The model must provide adversarial(inflation).
    """
    inflated = model.adversarial(inflation)
    return integrate(inflated, z0, strategy, T, dt)


def exponential_bound(initial_gap, C, times):
    """Pure-exponential bound ||u0 - z0|| e^{2Ct} for matched selections"""
    return initial_gap * np.exp(2.0 * C * np.asarray(times, dtype=float))
