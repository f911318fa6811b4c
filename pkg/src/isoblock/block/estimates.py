"""Bundle estimates of the block-defining functionals g+ and g-"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from isoblock.block.functionals import alpha, exit_time
from isoblock.config import REFINE_XATOL
from isoblock.core.state import StateVec
from isoblock.errors import PreconditionError
from isoblock.utils.math_utils import lerp

logger = logging.getLogger(__name__)


@dataclass
class GEstimate:
    """
    Finite-bundle value of g+ (an infimum) or g- (a supremum)

    time is the argmin (g+) or argmax (g-) inside the scanned window.
    """

    kind: str
    value: float
    bundle_size: int
    horizon: float
    time: float
    truncated: bool

    def to_dict(self):
        return {
            "kind": self.kind,
            "value": self.value,
            "bundle_size": self.bundle_size,
            "horizon": self.horizon,
            "time": self.time,
            "truncated": self.truncated,
        }


def _coords(x):
    return x.coords if isinstance(x, StateVec) else np.asarray(x, dtype=float)


def _at(traj, t):
    """Linear interpolant of traj at time t since its start"""
    s = t / traj.dt
    j = min(int(np.floor(s)), traj.n_samples - 2)
    return lerp(traj.states[j], traj.states[j + 1], s - j)


def _refine(objective, times, best, upper):
    """Bounded Brent search around grid index best, clipped to [0, upper]"""
    left = times[max(best - 1, 0)]
    right = min(times[min(best + 1, len(times) - 1)], upper)
    if right - left <= REFINE_XATOL:
        return None
    result = minimize_scalar(
        objective, bounds=(left, right), method="bounded", options={"xatol": REFINE_XATOL}
    )
    return float(result.x), float(result.fun)


def _member_g_plus(member, f):
    """min over t < t+ of D(phi(t)) / (1 + t) for one member"""
    t_plus, truncated = exit_time(member, f.region_N, open_set=True)
    times = member.times - member.t0
    window = times < t_plus if not truncated else np.ones(len(times), dtype=bool)
    window[0] = True
    values = f.D_values(member.states[window]) / (1.0 + times[window])
    best = int(np.argmin(values))
    value, time = float(values[best]), float(times[best])
    if value > 0 and member.n_samples > 1:
        upper = t_plus if not truncated else times[-1]
        # stay strictly inside U while refining
        upper = min(upper, times[np.flatnonzero(window)[-1]])

        def objective(t):
            return float(f.D_values(_at(member, t))[0] / (1.0 + t))

        refined = _refine(objective, times, best, upper)
        if refined is not None and refined[1] < value:
            time, value = refined
    return max(value, 0.0), time, truncated


def _member_g_minus(member, f):
    """max over t in [0, s+] of alpha(t) F(phi(t)) for one member"""
    s_plus, truncated = exit_time(member, f.region_N, open_set=False)
    times = member.times - member.t0
    inside = times <= s_plus + 1e-12
    states = member.states[inside]
    t_in = times[inside]
    if not truncated and s_plus > t_in[-1]:
        states = np.vstack([states, _at(member, s_plus)])
        t_in = np.append(t_in, s_plus)
    values = alpha(t_in) * f.F_values(states)
    best = int(np.argmax(values))
    value, time = float(values[best]), float(t_in[best])
    if value > 0 and len(t_in) > 1:

        def objective(t):
            return -float(alpha(t) * f.F_values(_at(member, t))[0])

        refined = _refine(objective, t_in, best, t_in[-1])
        if refined is not None and -refined[1] > value:
            time, value = refined[0], -refined[1]
    return value, time, truncated


def _bundle(generator, x, f, T, dt, index):
    gen = generator if dt is None or abs(dt - generator.dt) < 1e-15 else generator.with_step(dt, T)
    return gen.bundle(x, T=T, index=index, stop_region=f.region_N)


def g_pair(x, generator, f, T, dt=None, index=0):
    """
    g+ and g- from one shared bundle

    Args:
        x: Point of U
        generator: BundleGenerator
        f: BlockFunctionals
        T: Horizon
        dt: Step (default the generator's)
        index: Sample index the bundle seed derives from

    Raises:
        PreconditionError: x not in U
    """
    coords = _coords(x)
    if not f.in_U(coords):
        raise PreconditionError("g+ is only defined on U = int N")
    bundle = _bundle(generator, coords, f, T, dt, index)
    return _g_plus_from(bundle, f, T), _g_minus_from(bundle, f, T)


def _g_plus_from(bundle, f, T):
    results = [_member_g_plus(m, f) for m in bundle]
    value, time, _ = min(results, key=lambda r: r[0])
    truncated = any(r[2] for r in results)
    return GEstimate("g_plus", value, len(bundle), T, time, truncated)


def _g_minus_from(bundle, f, T):
    results = [_member_g_minus(m, f) for m in bundle]
    value, time, _ = max(results, key=lambda r: r[0])
    truncated = any(r[2] for r in results)
    return GEstimate("g_minus", value, len(bundle), T, time, truncated)


def estimate_g_plus(x, generator, f, T, dt=None, index=0):
    """
    inf over the bundle of min over t < t+(phi) of D(phi(t)) / (1 + t)

    Raises:
        PreconditionError: x not in U
    """
    coords = _coords(x)
    if not f.in_U(coords):
        raise PreconditionError("g+ is only defined on U = int N")
    return _g_plus_from(_bundle(generator, coords, f, T, dt, index), f, T)


def estimate_g_minus(x, generator, f, T, dt=None, index=0):
    """
    sup over the bundle of max over t in [0, s+(phi)] of alpha(t) F(phi(t))

    Raises:
        PreconditionError: x not in N
    """
    coords = _coords(x)
    if not f.region_N.contains(coords):
        raise PreconditionError("g- is only defined on N")
    return _g_minus_from(_bundle(generator, coords, f, T, dt, index), f, T)
