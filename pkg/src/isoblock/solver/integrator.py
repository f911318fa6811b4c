"""Selection-driven integration of inclusions and solution bundles"""

import logging

import numpy as np

from isoblock.config import DEDUP_TOL, RESIDUAL_TOL
from isoblock.core.state import StateVec
from isoblock.core.trajectory import Bundle, Trajectory
from isoblock.errors import NumericalError, PreconditionError
from isoblock.solver.selection import strategies_from_strings

logger = logging.getLogger(__name__)


def step_count(T, dt):
    """Number of steps of size dt in T, requiring dt to divide T"""
    if dt <= 0 or T <= 0:
        raise PreconditionError("T and dt must be positive")
    steps = T / dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise PreconditionError(f"dt={dt} does not divide T={T}")
    return int(round(steps))


def _check_step(model, dt):
    limit = model.max_stable_dt()
    if not dt < limit:
        raise NumericalError(
            f"dt={dt} violates the stability/positivity limit {limit:g} of {model.name}"
        )


def _coords(x0):
    return x0.coords if isinstance(x0, StateVec) else np.asarray(x0, dtype=float)


def _run(model, x0, strategies, T, dt, t0=0.0, stop_region=None, residual_tol=RESIDUAL_TOL):
    """
    Integrate several strategies from one origin, sharing work while they agree

    Strategies whose selections coincide stay in one group and the implicit
    solve is done once per group, so the result equals independent runs.

    Returns:
        list of (states, selections) per strategy
    """
    steps = step_count(T, dt)
    _check_step(model, dt)
    x0 = _coords(x0)
    if x0.shape != (model.dimension,):
        raise PreconditionError(f"initial state has dimension {x0.size}, model {model.dimension}")
    for strategy in strategies:
        strategy.reset()

    states = [[x0.copy()] for _ in strategies]
    selections = [[] for _ in strategies]
    groups = [(x0.copy(), list(range(len(strategies))))]

    for j in range(steps):
        t = t0 + j * dt
        next_groups = []
        for x, members in groups:
            lo, hi = model.selection_set(x)
            split = {}
            for idx in members:
                h = np.asarray(strategies[idx].select(t, lo, hi, x, model), dtype=float)
                split.setdefault(h.tobytes(), (h, []))[1].append(idx)
            for h, idxs in split.values():
                x_new = model.step(x, h, dt)
                if not np.all(np.isfinite(x_new)):
                    raise NumericalError(f"non-finite state at t={t + dt:g}")
                if not model.residual_ok(x, x_new, h, dt, residual_tol):
                    raise NumericalError(
                        f"one-step residual {model.residual(x, x_new, h, dt):.3g} "
                        f"above tolerance at t={t + dt:g}"
                    )
                for idx in idxs:
                    states[idx].append(x_new)
                    selections[idx].append(h)
                if stop_region is not None and not stop_region.contains(x_new):
                    continue
                next_groups.append((x_new, idxs))
        groups = next_groups
        if not groups:
            break

    return [(np.array(s), np.array(h)) for s, h in zip(states, selections)]


def integrate(model, x0, strategy, T, dt, t0=0.0, stop_region=None):
    """
    Solve u' in A u + F(u) + N(u) with selections chosen by one strategy

    Args:
        model: InclusionModel
        x0: Initial StateVec or coordinates
        strategy: SelectionStrategy
        T: Horizon (dt must divide it)
        dt: Step below the model's stability limit
        t0: Start time
        stop_region: Optional region; integration stops at the first state outside it

    Returns:
        Trajectory whose steps satisfy the model's one-step residual

    Raises:
        NumericalError: dt violates the stability limit or the residual check fails
    """
    states, sel = _run(model, x0, [strategy], T, dt, t0, stop_region)[0]
    return Trajectory(t0, dt, states, model.metric_weights, sel)


def _deduplicate(trajectories, tol):
    kept = []
    for traj in trajectories:
        duplicate = any(
            other.n_samples == traj.n_samples and other.sup_distance(traj) <= tol
            for other in kept
        )
        if not duplicate:
            kept.append(traj)
    return kept


def make_bundle(model, x0, strategies, T, dt, seed=0, stop_region=None, dedup_tol=DEDUP_TOL):
    """
    One member per strategy, deduplicated, in strategy order

    Raises:
        PreconditionError: no strategies given
    """
    if not strategies:
        raise PreconditionError("a bundle needs at least one strategy")
    if model.single_valued:
        strategies = strategies[:1]
    runs = _run(model, x0, strategies, T, dt, 0.0, stop_region)
    members = [Trajectory(0.0, dt, s, model.metric_weights, h) for s, h in runs]
    members = _deduplicate(members, dedup_tol)
    origin = x0 if isinstance(x0, StateVec) else model.state(x0)
    logger.debug("bundle from %s: %d strategies -> %d members", origin, len(runs), len(members))
    return Bundle(origin, members, seed)


class BundleGenerator:
    """Produces bundles D(x) for a model with a fixed strategy menu"""

    def __init__(self, model, strategy_texts, T, dt, seed=0):
        """
        Args:
            model: InclusionModel
            strategy_texts: Strategy strings, see SelectionStrategy.from_string
            T: Default horizon
            dt: Time step
            seed: Global seed; per-call seeds derive from it
        """
        self.model = model
        self.strategy_texts = list(strategy_texts)
        self.T = float(T)
        self.dt = float(dt)
        self.seed = int(seed)
        step_count(self.T, self.dt)

    @property
    def metric_weights(self):
        return self.model.metric_weights

    @property
    def bundle_size(self):
        return 1 if self.model.single_valued else len(self.strategy_texts)

    def seed_for(self, index):
        """Deterministic per-sample seed derived from (global seed, index)"""
        return int(np.random.SeedSequence([self.seed, int(index)]).generate_state(1)[0])

    def bundle(self, x, T=None, index=0, stop_region=None):
        """Bundle from x over [0, T] (default horizon if T is None)"""
        seed = self.seed_for(index)
        strategies = strategies_from_strings(self.strategy_texts, seed)
        horizon = self.T if T is None else T
        return make_bundle(self.model, x, strategies, horizon, self.dt, seed, stop_region)

    def equilibria(self):
        return [np.asarray(e, dtype=float) for e in self.model.equilibria()]

    def with_strategies(self, strategy_texts):
        """Same model and time grid with another strategy list"""
        return BundleGenerator(self.model, strategy_texts, self.T, self.dt, self.seed)

    def with_step(self, dt, T=None):
        """Same model and strategies on another time grid"""
        return BundleGenerator(
            self.model, self.strategy_texts, self.T if T is None else T, dt, self.seed
        )

    def reversed(self):
        """Generator of the backward flow, or None"""
        back = self.model.time_reversed()
        if back is None:
            return None
        return BundleGenerator(back, self.strategy_texts[:1], self.T, self.dt, self.seed)

    def __repr__(self):
        return (
            f"BundleGenerator({self.model!r}, strategies={len(self.strategy_texts)}, "
            f"T={self.T:g}, dt={self.dt:g})"
        )
