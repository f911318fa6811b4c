"""Set-valued right-hand sides and the strategies that pick selections from them"""

import logging
from enum import Enum

import numpy as np

from isoblock.config import RANDOM_DWELL, SIGN_TOL
from isoblock.errors import ConfigError, PreconditionError

logger = logging.getLogger(__name__)


def heaviside_selection(u, sign_tol=SIGN_TOL):
    """
    H0(u): {-1} for u < 0, [-1, 1] at u = 0, {1} for u > 0

    Args:
        u: Scalar or array
        sign_tol: |u| <= sign_tol counts as zero

    Returns:
        (lo, hi) with the shape of u
    """
    u = np.asarray(u, dtype=float)
    lo = np.where(u > sign_tol, 1.0, -1.0)
    hi = np.where(u < -sign_tol, -1.0, 1.0)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def regularized_selection(u, epsilon):
    """
    g_eps(u), the four-branch regularisation of H0

    -1 for u <= -eps; [-1, 2u/eps + 1] on [-eps, 0]; [2u/eps - 1, 1] on [0, eps];
    1 for u >= eps. Continuous in u for the Hausdorff distance and equal to H0
    outside [-eps, eps].

    Raises:
        PreconditionError: epsilon <= 0
    """
    if epsilon <= 0:
        raise PreconditionError(f"regularisation width must be positive, got {epsilon}")
    u = np.asarray(u, dtype=float)
    lo = np.clip(2.0 * u / epsilon - 1.0, -1.0, 1.0)
    lo = np.where(u <= 0.0, -1.0, lo)
    hi = np.clip(2.0 * u / epsilon + 1.0, -1.0, 1.0)
    hi = np.where(u >= 0.0, 1.0, hi)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def interval_contains(lo, hi, h, tol=0.0):
    """Componentwise lo - tol <= h <= hi + tol"""
    return bool(np.all(h >= np.asarray(lo) - tol) and np.all(h <= np.asarray(hi) + tol))


def distance_to_box(h, lo, hi, weights):
    """Weighted distance from h to the box [lo, hi]"""
    gap = np.maximum(lo - h, 0.0) + np.maximum(h - hi, 0.0)
    return float(np.sqrt(np.sum(weights * gap * gap)))


class StrategyKind(Enum):
    MAXIMAL = "maximal"
    MINIMAL = "minimal"
    ZERO = "zero"
    RANDOM = "random"
    DEPART = "depart"
    TRACKING = "tracking"


class SelectionStrategy:
    """Rule choosing h(t, x) inside the selection interval, frozen per step"""

    def __init__(self, kind, seed=0, dwell=RANDOM_DWELL, tau=0.0, sign=1, reference=None):
        """
        Args:
            kind: StrategyKind or its string value
            seed: Seed of the random stream (RANDOM only)
            dwell: Resampling period (RANDOM)
            tau: Departure delay (DEPART)
            sign: Departure direction +1 / -1 (DEPART)
            reference: Trajectory followed by TRACKING
        """
        self.kind = StrategyKind(kind)
        self.seed = seed
        self.dwell = float(dwell)
        self.tau = float(tau)
        self.sign = 1 if sign >= 0 else -1
        self.reference = reference
        if self.kind is StrategyKind.RANDOM and self.dwell <= 0:
            raise PreconditionError("dwell time must be positive")
        if self.kind is StrategyKind.DEPART and self.tau < 0:
            raise PreconditionError("departure delay must be nonnegative")
        if self.kind is StrategyKind.TRACKING and reference is None:
            raise PreconditionError("tracking needs a reference trajectory")
        self.reset()

    @classmethod
    def maximal(cls):
        return cls(StrategyKind.MAXIMAL)

    @classmethod
    def minimal(cls):
        return cls(StrategyKind.MINIMAL)

    @classmethod
    def zero(cls):
        return cls(StrategyKind.ZERO)

    @classmethod
    def random(cls, dwell=RANDOM_DWELL, seed=0):
        return cls(StrategyKind.RANDOM, seed=seed, dwell=dwell)

    @classmethod
    def depart(cls, tau, sign):
        return cls(StrategyKind.DEPART, tau=tau, sign=sign)

    @classmethod
    def tracking(cls, reference):
        return cls(StrategyKind.TRACKING, reference=reference)

    @classmethod
    def from_string(cls, text, seed=0):
        """
        Parse "maximal", "minimal", "zero", "random[:dwell]" or "depart:tau:+|-"

        Raises:
            ConfigError: unknown or malformed strategy
        """
        parts = text.strip().lower().split(":")
        try:
            kind = StrategyKind(parts[0])
        except ValueError as exc:
            raise ConfigError(f"unknown selection strategy {text!r}") from exc
        try:
            if kind is StrategyKind.RANDOM:
                dwell = float(parts[1]) if len(parts) > 1 else RANDOM_DWELL
                return cls.random(dwell, seed)
            if kind is StrategyKind.DEPART:
                sign = -1 if parts[2] in ("-", "-1") else 1
                return cls.depart(float(parts[1]), sign)
        except (IndexError, ValueError) as exc:
            raise ConfigError(f"malformed selection strategy {text!r}") from exc
        if kind is StrategyKind.TRACKING:
            raise ConfigError("tracking strategies are built programmatically")
        return cls(kind, seed=seed)

    def reset(self):
        """Restart the random stream so integrations are reproducible"""
        self._rng = np.random.default_rng(self.seed)
        self._fractions = None
        self._next_resample = -np.inf

    def select(self, t, lo, hi, x, model):
        """
        Selection value h(t, x) in [lo, hi]

        Args:
            t: Current time
            lo, hi: Selection interval at x (arrays)
            x: Current state coordinates
            model: The InclusionModel (TRACKING needs its nonstiff drift)
        """
        kind = self.kind
        if kind is StrategyKind.MAXIMAL:
            return hi.copy()
        if kind is StrategyKind.MINIMAL:
            return lo.copy()
        if kind is StrategyKind.ZERO:
            return np.clip(0.0, lo, hi)
        if kind is StrategyKind.DEPART:
            if t < self.tau - 1e-12:
                return np.clip(0.0, lo, hi)
            return hi.copy() if self.sign > 0 else lo.copy()
        if kind is StrategyKind.RANDOM:
            if t >= self._next_resample - 1e-12:
                self._fractions = self._rng.uniform(0.0, 1.0, size=np.shape(lo))
                self._next_resample = t + self.dwell
            return lo + self._fractions * (hi - lo)
        return self._track(t, lo, hi, x, model)

    def _track(self, t, lo, hi, x, model):
        """Projection of the reference velocity onto the current selection box"""
        ref = self.reference
        j = min(int(round((t - ref.t0) / ref.dt)), ref.n_samples - 2)
        target = ref.selection[j] + model.nonstiff(ref.states[j]) - model.nonstiff(x)
        return np.clip(target, lo, hi)

    def label(self):
        if self.kind is StrategyKind.RANDOM:
            return f"random:{self.dwell:g}"
        if self.kind is StrategyKind.DEPART:
            return f"depart:{self.tau:g}:{'+' if self.sign > 0 else '-'}"
        return self.kind.value

    def __repr__(self):
        return f"SelectionStrategy({self.label()}, seed={self.seed})"


def strategies_from_strings(texts, seed=0):
    """Strategies with per-index seeds derived from one global seed"""
    children = np.random.SeedSequence(seed).spawn(len(texts))
    return [
        SelectionStrategy.from_string(text, int(child.generate_state(1)[0]))
        for text, child in zip(texts, children)
    ]
