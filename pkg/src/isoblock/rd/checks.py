"""Executable versions of the Lyapunov, nondegeneracy, comparison and uniqueness results"""

import logging
from dataclasses import dataclass, field

import numpy as np

from isoblock.config import HARVEST_STRIDE, SIGN_TOL
from isoblock.core.region import RegionSpec
from isoblock.core.state import StateVec, grid_weights
from isoblock.core.trajectory import CloudLabel, PointCloudSet
from isoblock.errors import BlockConstructionError, PreconditionError
from isoblock.models.heaviside import HeavisideRD
from isoblock.rd.equilibria import Equilibrium, lyapunov_E, shoot_equilibrium
from isoblock.solver.integrator import integrate, make_bundle
from isoblock.utils.math_utils import interval_measure_below

logger = logging.getLogger(__name__)


def _coords(v):
    if isinstance(v, Equilibrium):
        return v.profile.coords
    return v.coords if isinstance(v, StateVec) else np.asarray(v, dtype=float)


@dataclass
class LyapunovReport:
    energies: np.ndarray
    max_uphill: float
    slack: float
    horizon: float
    passed: bool

    def to_dict(self):
        return {
            "passed": self.passed,
            "max_uphill": self.max_uphill,
            "slack": self.slack,
            "horizon": self.horizon,
            "E_start": float(self.energies[0]),
            "E_end": float(self.energies[-1]),
            "energies": self.energies.tolist(),
        }


def check_lyapunov_decrease(traj, config):
    """E(u(t_j)) nonincreasing in j within 10 dt"""
    energies = np.array([lyapunov_E(s, config) for s in traj.states])
    jumps = np.diff(energies)
    max_uphill = float(max(0.0, np.max(jumps))) if len(jumps) else 0.0
    slack = 10.0 * traj.dt
    passed = max_uphill <= slack
    if not passed:
        logger.warning("energy increased by %.3g (slack %.3g)", max_uphill, slack)
    return LyapunovReport(energies, max_uphill, slack, traj.t_end - traj.t0, passed)


def sublevel_measure(v, config, alpha):
    """mu{x in (0,1): |v(x)| <= alpha} for the piecewise-linear interpolant of v"""
    padded = np.concatenate([[0.0], _coords(v), [0.0]])
    return float(
        sum(
            interval_measure_below(a, b, config.h, alpha)
            for a, b in zip(padded[:-1], padded[1:])
        )
    )


def is_degenerate(v, tol=SIGN_TOL):
    """True if some grid cell (boundary cells included) has both ends at 0"""
    padded = np.abs(np.concatenate([[0.0], _coords(v), [0.0]]))
    return bool(np.any((padded[:-1] <= tol) & (padded[1:] <= tol)))


@dataclass
class NondegeneracyReport:
    C: float
    alpha0: float
    measured: list
    fitted: bool
    passed: bool

    def to_dict(self):
        return {
            "C": self.C,
            "alpha0": self.alpha0,
            "fitted": self.fitted,
            "passed": self.passed,
            "measured": [[a, m] for a, m in self.measured],
        }


def nondegeneracy(v, config, alphas=None):
    """
    Measure mu{|v| <= alpha} against C alpha

    For an Equilibrium C = 4k / gamma0; for a general profile C is the
    largest measured ratio mu / alpha.

    Raises:
        PreconditionError: zero boundary slope or a flat zero cell ("degenerate profile")
    """
    coords = _coords(v)
    if is_degenerate(coords):
        raise PreconditionError("degenerate profile")
    alpha0 = float(np.max(np.abs(coords))) / 4.0
    if alphas is None:
        alphas = np.geomspace(alpha0 / 32.0, alpha0 / 3.0, 10)
    alphas = [float(a) for a in alphas if 0 < a < alpha0]
    measured = [(a, sublevel_measure(coords, config, a)) for a in alphas]
    if isinstance(v, Equilibrium):
        C, fitted = v.nondegeneracy_constant, False
    else:
        C = max((m / a for a, m in measured), default=0.0)
        fitted = True
    passed = all(m <= C * a * (1.0 + 1e-12) for a, m in measured)
    return NondegeneracyReport(C, alpha0, measured, fitted, passed)


@dataclass
class ComparisonReport:
    precondition_ok: bool
    reason: str = ""
    pairs: int = 0
    worst_violation: float = 0.0
    slack: float = 0.0
    horizon: float = 0.0
    passed: bool = False
    violations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "precondition_ok": self.precondition_ok,
            "reason": self.reason,
            "pairs": self.pairs,
            "worst_violation": self.worst_violation,
            "slack": self.slack,
            "horizon": self.horizon,
            "passed": self.passed,
            "violations": self.violations,
        }


def check_comparison(u0, v0, config, strategies, T=None):
    """
    Ordering u(t) <= v(t) for every pair of strategies

    Args:
        u0, v0: Initial profiles with u0 <= v0
        config: RDConfig (epsilon_reg is ignored, the Heaviside model is used)
        strategies: SelectionStrategy list
        T: Horizon (default config.T)

    Raises:
        PreconditionError: u0 > v0 somewhere
    """
    u0, v0 = _coords(u0), _coords(v0)
    if np.any(u0 > v0):
        raise PreconditionError("comparison needs u0 <= v0 componentwise")
    horizon = config.T if T is None else T
    slack = config.slack
    if is_degenerate(u0) and is_degenerate(v0):
        logger.info("comparison skipped: both initial profiles are degenerate")
        return ComparisonReport(False, "both initial profiles are degenerate", slack=slack,
                                horizon=horizon)

    model = HeavisideRD(config.with_epsilon(0.0))
    lower = [integrate(model, u0, s, horizon, config.dt) for s in strategies]
    upper = [integrate(model, v0, s, horizon, config.dt) for s in strategies]
    worst, violations = -np.inf, []
    for i, u in enumerate(lower):
        for j, v in enumerate(upper):
            excess = float(np.max(u.states - v.states))
            worst = max(worst, excess)
            if excess > slack:
                violations.append([strategies[i].label(), strategies[j].label(), excess])
    worst = max(worst, 0.0)
    report = ComparisonReport(
        True, "", len(lower) * len(upper), worst, slack, horizon, not violations, violations
    )
    logger.info("comparison over %d pairs: worst violation %.3g", report.pairs, worst)
    return report


@dataclass
class UniquenessReport:
    max_deviation: float
    spread: float
    members: int
    tolerance: float
    horizon: float
    passed: bool

    def to_dict(self):
        return {
            "max_deviation": self.max_deviation,
            "spread": self.spread,
            "members": self.members,
            "tolerance": self.tolerance,
            "horizon": self.horizon,
            "passed": self.passed,
        }


def bundle_spread(u0, config, strategies, T=None):
    """
    Deviation of every member from u0 and the largest pairwise sup distance

    Returns:
        (max deviation from the constant trajectory, spread, member count)
    """
    model = HeavisideRD(config.with_epsilon(0.0))
    horizon = config.T if T is None else T
    bundle = make_bundle(model, _coords(u0), strategies, horizon, config.dt)
    weights = model.metric_weights
    deviation = max(
        float(np.max(np.sqrt(np.sum(weights * (m.states - _coords(u0)) ** 2, axis=1))))
        for m in bundle
    )
    spread = max(
        (a.sup_distance(b) for a in bundle for b in bundle if a is not b), default=0.0
    )
    return deviation, spread, len(bundle)


def uniqueness_at_equilibrium(k, sign, config, strategies, T=None):
    """All members from v_k^sign stay within 10 dt (1 + omega) of the constant solution"""
    v = shoot_equilibrium(k, sign, config)
    horizon = config.T if T is None else T
    deviation, spread, members = bundle_spread(v, config, strategies, horizon)
    tol = config.slack
    return UniquenessReport(deviation, spread, members, tol, horizon, deviation <= tol)


@dataclass
class RegularizedInputs:
    """K_eps approximation and the delta ball it was harvested in"""

    cloud: PointCloudSet
    region: RegionSpec
    epsilon_reg: float
    radius: float
    spread: float
    fits_half_ball: bool
    kept: int = 0
    dropped: int = 0
    surrogate: str = "forward-tail harvesting"

    def to_dict(self):
        return {
            "epsilon_reg": self.epsilon_reg,
            "radius": self.radius,
            "spread": self.spread,
            "fits_half_ball": self.fits_half_ball,
            "kept": self.kept,
            "dropped": self.dropped,
            "surrogate": self.surrogate,
            "cloud_size": len(self.cloud),
            "region": self.region.to_dict(),
        }


def regularized_block_inputs(
    k, sign, config, delta_nbhd, strategies, horizon=None, n_starts=4, seed=0
):
    """
    Approximate K_eps near v_k^sign by harvesting G_eps trajectory tails inside the delta ball

    Starts are v_k itself and n_starts seeded perturbations of norm delta/4.
    Members that leave the ball before the horizon are dropped; the tails of
    the others and v_k itself form the cloud.

    Raises:
        BlockConstructionError: every G_eps trajectory escapes the delta ball
            ("eps too large")
    """
    if delta_nbhd <= 0:
        raise PreconditionError("delta_nbhd must be positive")
    v = shoot_equilibrium(k, sign, config)
    weights = grid_weights(config.n)
    center = v.profile
    region = RegionSpec.ball(center, delta_nbhd)
    if config.epsilon_reg == 0:
        cloud = PointCloudSet(center.coords[None, :], weights, CloudLabel.K_APPROX)
        return RegularizedInputs(cloud, region, 0.0, delta_nbhd, 0.0, True)

    model = HeavisideRD(config)
    horizon = config.T if horizon is None else horizon
    rng = np.random.default_rng(seed)
    starts = [center.coords]
    for _ in range(n_starts):
        direction = rng.standard_normal(config.n)
        direction /= np.sqrt(np.sum(weights * direction**2))
        starts.append(center.coords + 0.25 * delta_nbhd * direction)

    harvested = [center.coords[None, :]]
    kept = dropped = 0
    for x0 in starts:
        bundle = make_bundle(model, x0, strategies, horizon, config.dt, seed, stop_region=region)
        for member in bundle:
            if not region.contains(member.endpoint()) or member.t_end < horizon - 0.5 * config.dt:
                logger.debug("G_eps member leaves the ball at t=%g", member.t_end)
                dropped += 1
                continue
            kept += 1
            harvested.append(member.states[member.n_samples // 2 :: HARVEST_STRIDE])
    if not kept:
        raise BlockConstructionError(
            f"eps too large: every G_eps trajectory leaves the {delta_nbhd:g}-ball around v_{k}"
        )
    points = np.vstack(harvested)
    cloud = PointCloudSet(points, weights, CloudLabel.K_APPROX, horizon=horizon)
    spread = float(np.max(np.sqrt(np.sum(weights * (points - center.coords) ** 2, axis=1))))
    fits = spread <= 0.5 * delta_nbhd
    logger.info(
        "K_eps for eps=%g: %d points from %d members (%d dropped), spread %.3g",
        config.epsilon_reg, len(cloud), kept, dropped, spread,
    )
    return RegularizedInputs(
        cloud, region, config.epsilon_reg, delta_nbhd, spread, fits, kept, dropped
    )


def empirical_epsilon0(k, sign, config, delta_nbhd, strategies, candidates, horizon=None):
    """
    Largest candidate eps whose K_eps fits in the delta/2 ball

    Returns:
        (epsilon, RegularizedInputs) or (None, None) if no candidate qualifies
    """
    for eps in sorted(candidates, reverse=True):
        try:
            inputs = regularized_block_inputs(
                k, sign, config.with_epsilon(eps), delta_nbhd, strategies, horizon
            )
        except BlockConstructionError:
            continue
        if inputs.fits_half_ball:
            return eps, inputs
    return None, None
