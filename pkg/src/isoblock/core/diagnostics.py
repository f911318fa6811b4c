"""Finite-sample diagnostics of the solution-set axioms, invariance and A+-(N) estimates"""

import logging
from dataclasses import dataclass, field

import numpy as np

from isoblock.config import (
    AXIOM_TOL,
    CLUSTER_TOL,
    HARVEST_STRIDE,
    K5_TOL,
    MEMBERSHIP_TOL,
)
from isoblock.core.region import Region
from isoblock.core.state import StateVec
from isoblock.core.trajectory import CloudLabel, PointCloudSet
from isoblock.errors import NumericalError, PreconditionError
from isoblock.solver.integrator import integrate, step_count
from isoblock.solver.selection import SelectionStrategy, interval_contains

logger = logging.getLogger(__name__)

FINITE_SAMPLE_NOTE = "finite-sample diagnostic: can refute, cannot prove"


def _coords(x):
    return x.coords if isinstance(x, StateVec) else np.asarray(x, dtype=float)


def _residual_valid(model, traj, tol=AXIOM_TOL):
    """Every step passes the residual test and its selection lies in the box"""
    for x, x_new, h in zip(traj.states[:-1], traj.states[1:], traj.selection):
        if not model.residual_ok(x, x_new, h, traj.dt, tol):
            return False
        lo, hi = model.selection_set(x)
        if not interval_contains(lo, hi, h, tol):
            return False
    return True


@dataclass
class AxiomReport:
    """Pass/fail of (K1)-(K4) on a finite sample"""

    k1: bool
    k2: bool
    k3: bool
    k4: bool
    horizon: float
    samples: int
    details: dict = field(default_factory=dict)
    finite_sample: bool = True

    @property
    def passed(self):
        return self.k1 and self.k2 and self.k3 and self.k4

    def to_dict(self):
        return {
            "K1": self.k1,
            "K2": self.k2,
            "K3": self.k3,
            "K4": self.k4,
            "passed": self.passed,
            "horizon": self.horizon,
            "samples": self.samples,
            "finite_sample": self.finite_sample,
            "note": FINITE_SAMPLE_NOTE,
            "details": self.details,
        }


def _check_translation(model, bundle, shift):
    """Shifted tails are residual-valid and replaying their selections reproduces them"""
    worst = 0.0
    for member in bundle:
        if member.n_samples <= shift + 1 or not member.has_selection():
            continue
        tail = member.tail(shift)
        if not _residual_valid(model, tail):
            return False, np.inf
        T = tail.t_end
        replay = integrate(model, tail.states[0], SelectionStrategy.tracking(tail), T, tail.dt)
        worst = max(worst, replay.sup_distance(tail))
    return worst <= AXIOM_TOL, worst


def _check_concatenation(model, generator, bundle, shift):
    """A member cut at shift and continued by a member from its state stays residual-valid"""
    for member in bundle:
        if member.n_samples <= shift + 1 or not member.has_selection():
            continue
        head = member.head(shift)
        horizon = (member.n_samples - 1 - shift) * member.dt
        continuation = generator.bundle(head.states[-1], T=horizon)
        if continuation.is_empty():
            continue
        joined = head.concatenate(continuation.members[-1])
        if not _residual_valid(model, joined):
            return False
    return True


def _check_cauchy(generator, x, horizon, direction, levels):
    """
    Members from x + 2^-m direction, chained greedily, are uniformly Cauchy

    Returns:
        (passed, consecutive sup gaps)
    """
    gaps = []
    previous = None
    for m in range(1, levels + 1):
        bundle = generator.bundle(x + 2.0**-m * direction, T=horizon, index=m)
        if bundle.is_empty():
            return False, gaps
        if previous is None:
            chosen = bundle.members[0]
        else:
            chosen = min(bundle, key=lambda member: member.sup_distance(previous))
            gaps.append(chosen.sup_distance(previous))
        previous = chosen
    if not gaps:
        return True, gaps
    passed = gaps[-1] <= max(AXIOM_TOL, 1e-3 * max(gaps[0], AXIOM_TOL))
    return passed, gaps


def check_axioms(generator, samples, horizon, cauchy_levels=30, direction=None):
    """
    Check (K1)-(K4) on sample origins

    Args:
        generator: BundleGenerator
        samples: Origins (StateVec or coordinates)
        horizon: Horizon, a multiple of dt
        cauchy_levels: Length of the convergent origin sequence for K4
        direction: Direction of that sequence (default first basis vector)

    Raises:
        PreconditionError: no samples, or horizon not a multiple of dt
    """
    if len(samples) == 0:
        raise PreconditionError("axiom checks need at least one sample")
    steps = step_count(horizon, generator.dt)
    model = generator.model
    shift = max(1, steps // 2)
    if direction is None:
        direction = np.zeros(model.dimension)
        direction[0] = 1.0

    k1 = k2 = k3 = k4 = True
    translation_gaps, cauchy_gaps = [], []
    for index, sample in enumerate(samples):
        x = _coords(sample)
        bundle = generator.bundle(x, T=horizon, index=index)
        if bundle.is_empty():
            k1 = False
            continue
        ok, gap = _check_translation(model, bundle, shift)
        k2 &= ok
        translation_gaps.append(gap)
        k3 &= _check_concatenation(model, generator, bundle, shift)
        ok, gaps = _check_cauchy(generator, x, horizon, np.asarray(direction), cauchy_levels)
        k4 &= ok
        cauchy_gaps.append(gaps[-1] if gaps else 0.0)

    report = AxiomReport(
        bool(k1),
        bool(k2),
        bool(k3),
        bool(k4),
        horizon,
        len(samples),
        {"translation_gaps": translation_gaps, "final_cauchy_gaps": cauchy_gaps, "shift": shift},
    )
    logger.info("axioms K1..K4 = %s %s %s %s", report.k1, report.k2, report.k3, report.k4)
    return report


@dataclass
class K5Report:
    passed: bool
    gaps: list
    window: float
    tolerance: float
    closest_gap: float
    excluded_final_window: bool = True
    finite_sample: bool = True

    def to_dict(self):
        return {
            "passed": self.passed,
            "gaps": self.gaps,
            "window": self.window,
            "tolerance": self.tolerance,
            "closest_gap": self.closest_gap,
            "excluded_final_window": self.excluded_final_window,
            "finite_sample": self.finite_sample,
            "note": FINITE_SAMPLE_NOTE,
        }


def check_k5(generator, x, target, approach, horizon, t_phi=None, tol=K5_TOL):
    """
    Lower-semicontinuity test: from approach points some member follows target

    The window is [0, min(horizon, t_phi)) with the final dt step excluded.
    For each approach point the smallest sup distance over the bundle is
    recorded; the verdict is taken at the closest approach point.

    Args:
        generator: BundleGenerator
        x: Limit point
        target: Trajectory starting at x
        approach: Sequence converging to x
        horizon: Time window
        t_phi: Exit time of target from O(K), if known
        tol: Tube width

    Raises:
        PreconditionError: target does not start at x, or approach is empty
    """
    x = _coords(x)
    offset = target.states[0] - x
    if float(np.sqrt(np.sum(generator.metric_weights * offset**2))) > MEMBERSHIP_TOL:
        raise PreconditionError("target must start at x")
    if len(approach) == 0:
        raise PreconditionError("approach sequence is empty")
    limit = horizon if t_phi is None else min(horizon, t_phi)
    steps = min(int(np.floor(limit / target.dt + 1e-9)), target.n_samples - 1) - 1
    if steps < 1:
        raise NumericalError("K5 window shorter than two steps")
    window = steps * target.dt
    reference = target.head(steps)

    gaps = []
    for index, point in enumerate(approach):
        bundle = generator.bundle(_coords(point), T=window, index=index)
        best = min(member.sup_distance(reference) for member in bundle)
        gaps.append(best)
    closest = int(
        np.argmin([np.sqrt(np.sum(generator.metric_weights * (_coords(p) - x) ** 2))
                   for p in approach])
    )
    passed = gaps[closest] <= tol
    logger.info("K5: closest-approach gap %.3g (tol %.1g)", gaps[closest], tol)
    return K5Report(passed, gaps, window, tol, gaps[closest])


def _stays(member, region, steps):
    return member.n_samples == steps + 1 and region.contains(member.states[-1])


def estimate_A_plus(generator, region, grid, horizon):
    """
    Grid points with at least one member staying in region on [0, horizon]

    Raises:
        PreconditionError: a grid point lies outside region
    """
    steps = step_count(horizon, generator.dt)
    kept = []
    for index, point in enumerate(grid):
        coords = _coords(point)
        if not region.contains(coords):
            raise PreconditionError(f"grid point {index} lies outside the region")
        bundle = generator.bundle(coords, T=horizon, index=index, stop_region=region)
        if any(_stays(member, region, steps) for member in bundle):
            kept.append(coords)
    points = np.array(kept).reshape(-1, generator.model.dimension)
    logger.debug("A+ estimate: %d of %d grid points", len(points), len(grid))
    return PointCloudSet(points, generator.metric_weights, CloudLabel.A_PLUS, horizon)


def _harvest(member, region, start, stride):
    """States from index start on, every stride-th, while member stays in region"""
    states = member.states
    exits = np.flatnonzero(region.signed_distances(states) > region.membership_tol)
    end = exits[0] if len(exits) else len(states)
    return states[start:end:stride]


def estimate_A_minus(
    generator,
    region,
    grid,
    horizon_back,
    tail=None,
    stride=HARVEST_STRIDE,
    seeds_per_equilibrium=16,
    seed_radius=1e-6,
    seed_stride=1,
):
    """
    Point cloud approximating A-(N)

    Harvests states phi(t), t >= horizon_back, of grid-launched members that
    stayed in N that long, plus the forward orbits of a small seeded cloud
    around every known equilibrium inside N (the unstable set of the
    equilibria), plus the equilibria themselves.

    Args:
        generator: BundleGenerator
        region: N
        grid: Launch points
        horizon_back: Required dwell time in N
        tail: Extra time after horizon_back to keep harvesting (default horizon_back)
        stride: Keep every stride-th state
        seeds_per_equilibrium: Size of the seeded cloud around each equilibrium
        seed_radius: Radius of that cloud (weighted metric)
        seed_stride: Harvest stride along the seeded orbits

    Raises:
        PreconditionError: horizon_back <= 0
    """
    if horizon_back <= 0:
        raise PreconditionError("horizon_back must be positive")
    dt = generator.dt
    tail = horizon_back if tail is None else tail
    total = (step_count(horizon_back, dt) + step_count(tail, dt)) * dt
    start = step_count(horizon_back, dt)
    weights = generator.metric_weights
    chunks = []

    for index, point in enumerate(grid):
        coords = _coords(point)
        if not region.contains(coords):
            continue
        bundle = generator.bundle(coords, T=total, index=index, stop_region=region)
        for member in bundle:
            chunks.append(_harvest(member, region, start, stride))

    equilibria = [e for e in generator.equilibria() if region.contains(e)]
    rng = np.random.default_rng(generator.seed)
    offset = len(grid)
    for eq in equilibria:
        chunks.append(eq[None, :])
        for j in range(seeds_per_equilibrium):
            direction = rng.standard_normal(eq.size)
            direction *= seed_radius / np.sqrt(np.sum(weights * direction**2))
            bundle = generator.bundle(eq + direction, T=total, index=offset + j, stop_region=region)
            for member in bundle:
                chunks.append(_harvest(member, region, 0, seed_stride))
        offset += seeds_per_equilibrium

    chunks = [c for c in chunks if len(c)]
    points = np.vstack(chunks) if chunks else np.empty((0, generator.model.dimension))
    logger.debug("A- estimate: %d points, %d equilibria", len(points), len(equilibria))
    return PointCloudSet(points, weights, CloudLabel.A_MINUS, horizon_back)


def omega_limit(trajectory, tail_fraction=0.2, cluster_tol=CLUSTER_TOL):
    """
    Cluster representatives of the trajectory tail

    Raises:
        NumericalError: fewer than 10 tail samples
        PreconditionError: tail_fraction outside (0, 1)
    """
    if not 0 < tail_fraction < 1:
        raise PreconditionError("tail_fraction must lie in (0, 1)")
    count = int(np.floor(tail_fraction * trajectory.n_samples))
    if count < 10:
        raise NumericalError(f"tail has {count} samples, at least 10 are needed")
    tail = trajectory.states[-count:]
    weights = trajectory.metric_weights
    representatives = []
    for state in tail:
        if not any(
            np.sqrt(np.sum(weights * (state - r) ** 2)) <= cluster_tol for r in representatives
        ):
            representatives.append(state)
    return PointCloudSet(np.array(representatives), weights, CloudLabel.K_APPROX)


@dataclass
class InvarianceReport:
    invariant: bool
    failures: list
    horizon: float
    points: int

    def __bool__(self):
        return self.invariant

    def to_dict(self):
        return {
            "invariant": self.invariant,
            "failures": self.failures,
            "horizon": self.horizon,
            "points": self.points,
        }


class _CloudRegion(Region):
    """Tolerance neighbourhood of a point cloud, so clouds and regions share one test"""

    def __init__(self, cloud, tol):
        self.cloud = cloud
        self.membership_tol = tol

    def signed_distances(self, points):
        return self.cloud.distances(points)


def is_weakly_positively_invariant(generator, target, grid, horizon, tol=None):
    """
    Every grid point has a member staying in target on [0, horizon]

    Args:
        target: Region or PointCloudSet (membership within tol)
        tol: Cloud membership tolerance (default 10 dt)
    """
    if isinstance(target, PointCloudSet):
        if tol is None:
            tol = max(MEMBERSHIP_TOL, 10.0 * generator.dt)
        region = _CloudRegion(target, tol)
    else:
        region = target
    steps = step_count(horizon, generator.dt)
    failures = []
    for index, point in enumerate(grid):
        coords = _coords(point)
        bundle = generator.bundle(coords, T=horizon, index=index, stop_region=region)
        if not any(_stays(member, region, steps) for member in bundle):
            failures.append(index)
    return InvarianceReport(not failures, failures, horizon, len(grid))
