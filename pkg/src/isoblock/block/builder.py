"""Two-stage isolating block construction on sampled neighborhoods"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from isoblock.block.estimates import g_pair
from isoblock.config import (
    BAND_MIN,
    DELTA_FRACTION,
    EPSILON_LEVELS,
    EPSILON_START,
    JUMP_FACTOR,
    NEIGHBOR_RADIUS,
)
from isoblock.core.region import SampledRegion
from isoblock.errors import BlockConstructionError
from isoblock.utils.math_utils import scaled

logger = logging.getLogger(__name__)

INTERIOR, BOUNDARY, EXTERIOR = -1, 0, 1


class BoundaryLabel(Enum):
    EGRESS = "Egress"
    INGRESS = "Ingress"
    BOUNCE_OFF = "BounceOff"


def sample_spacing(samples, weights):
    """Median nearest-neighbour distance of a sample set"""
    if len(samples) < 2:
        return 1.0
    d, _ = cKDTree(scaled(samples, weights)).query(scaled(samples, weights), k=2)
    return float(np.median(d[:, 1]))


def _neighbours(samples, weights, radius):
    tree = cKDTree(scaled(samples, weights))
    return tree.query_ball_point(scaled(samples, weights), radius)


def level_width(value, others, delta, band=np.inf, band_min=BAND_MIN):
    """
    Half-width of "value ~ delta" at one sample

    Half the largest jump to a neighbour on the other side of delta, clipped
    to [band_min, band]. A sample is within it exactly when it is the closer
    side of a level crossing, so the sampled level set is one layer thick.
    """
    if not np.isfinite(value):
        return band_min
    others = np.asarray(others, dtype=float)
    others = others[np.isfinite(others)]
    crossing = others[(others - delta) * (value - delta) <= 0]
    width = 0.5 * float(np.max(np.abs(value - crossing))) if len(crossing) else 0.0
    return min(max(width, band_min), band)


def label_from_g(g_plus, g_minus, delta, band_plus, band_minus=None):
    """Egress if only g+ ~ delta, Ingress if only g- ~ delta, BounceOff if both"""
    band_minus = band_plus if band_minus is None else band_minus
    near_plus = abs(g_plus - delta) <= band_plus
    near_minus = abs(g_minus - delta) <= band_minus
    if near_plus and near_minus:
        return BoundaryLabel.BOUNCE_OFF
    if near_plus:
        return BoundaryLabel.EGRESS
    if near_minus:
        return BoundaryLabel.INGRESS
    # neither level is resolved: the larger functional decides which face
    return BoundaryLabel.EGRESS if g_plus >= g_minus else BoundaryLabel.INGRESS


def _adjacent_pairs(samples, labels, weights, cell):
    """(Ingress, Egress) index pairs closer than NEIGHBOR_RADIUS cells"""
    keys = sorted(labels)
    if not keys:
        return []
    near = _neighbours(samples[keys], weights, NEIGHBOR_RADIUS * cell)
    pairs = []
    for a, neighbours in enumerate(near):
        if labels[keys[a]] is not BoundaryLabel.INGRESS:
            continue
        pairs += [
            (keys[a], keys[b]) for b in neighbours if labels[keys[b]] is BoundaryLabel.EGRESS
        ]
    return pairs


def close_exit_set(labels, samples, weights, cell):
    """Egress samples touching an Ingress sample become BounceOff"""
    closed = dict(labels)
    for _, j in _adjacent_pairs(samples, labels, weights, cell):
        closed[j] = BoundaryLabel.BOUNCE_OFF
    return closed


def evaluate_g(samples, generator, f, T, dt=None, offset=0):
    """g+ and g- at every sample, seeds derived from the sample index"""
    g_plus = np.empty(len(samples))
    g_minus = np.empty(len(samples))
    truncated = np.zeros(len(samples), dtype=bool)
    for i, x in enumerate(samples):
        plus, minus = g_pair(x, generator, f, T, dt, index=offset + i)
        g_plus[i], g_minus[i] = plus.value, minus.value
        truncated[i] = plus.truncated or minus.truncated
        logger.debug("sample %d: g+=%.4g g-=%.4g", i, plus.value, minus.value)
    return g_plus, g_minus, truncated


@dataclass
class EpsilonChoice:
    epsilon: float
    samples: np.ndarray
    member_mask: np.ndarray
    g_plus: np.ndarray
    g_minus: np.ndarray
    cell: float
    scanned: list


def choose_epsilon(
    generator,
    f,
    candidate_grid,
    T,
    dt=None,
    epsilon_start=EPSILON_START,
    levels=EPSILON_LEVELS,
    cell=None,
):
    """
    Largest eps in {eps0, eps0/2, ...} whose sampled H_eps, dilated by a cell, fits in U cap O

    K points are added to the candidate samples; grid points outside U cap O
    count as excluded samples.

    Raises:
        BlockConstructionError: no eps qualifies ("isolating neighborhood too tight")
    """
    weights = generator.metric_weights
    grid = np.atleast_2d(np.asarray(candidate_grid, dtype=float))
    samples = np.vstack([f.K_cloud.points, grid])
    n_K = len(f.K_cloud)
    cell = sample_spacing(grid, weights) if cell is None else float(cell)

    sd_N = f.region_N.signed_distances(samples)
    sd_O = f.region_O.signed_distances(samples)
    admissible = (sd_N < -f.region_N.membership_tol) & (sd_O < -f.region_O.membership_tol)
    # a dilation by one cell must stay inside U cap O
    margin_ok = (sd_N + cell < 0) & (sd_O + cell < 0)

    g_plus = np.full(len(samples), np.inf)
    g_minus = np.full(len(samples), np.inf)
    idx = np.flatnonzero(admissible)
    g_plus[idx], g_minus[idx], _ = evaluate_g(samples[idx], generator, f, T, dt)
    G = np.maximum(g_plus, g_minus)
    near_K = _neighbours(samples, weights, NEIGHBOR_RADIUS * cell)[:n_K]

    scanned = []
    eps = float(epsilon_start)
    for _ in range(levels):
        members = G < eps
        fits = bool(np.all(margin_ok[members]))
        # every K point must sit among sampled members of H_eps, not alone
        holds_K = bool(np.all(members[:n_K])) and all(
            any(j >= n_K and members[j] for j in near) for near in near_K
        )
        scanned.append({"epsilon": eps, "members": int(members.sum()), "fits": fits})
        if fits and holds_K and members.any():
            logger.info("eps=%g: %d samples in H_eps", eps, int(members.sum()))
            return EpsilonChoice(eps, samples, members, g_plus, g_minus, cell, scanned)
        eps *= 0.5
    raise BlockConstructionError(
        f"isolating neighborhood too tight: no eps in [{eps * 2:g}, {epsilon_start:g}] works"
    )


def refined_grid(points, cell, factor):
    """Tensor grid of spacing cell/factor over the bounding box of points"""
    lo, hi = points.min(axis=0), points.max(axis=0)
    step = cell / factor
    axes = [np.arange(a, b + 0.5 * step, step) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def boundary_band(G, samples, weights, cell, band_min=BAND_MIN, among=None):
    """
    Half-width of the "g ~ delta" band

    The grid-induced variation of a sample is half its largest jump to a
    neighbour one cell away; the band is twice the 90th percentile of it,
    taken over the samples selected by `among` (all samples by default).
    """
    neighbours = _neighbours(samples, weights, 1.01 * cell)
    chosen = np.ones(len(samples), dtype=bool) if among is None else np.asarray(among, dtype=bool)
    variation = []
    for i, near in enumerate(neighbours):
        if not chosen[i]:
            continue
        jumps = [abs(G[i] - G[j]) for j in near if j != i and np.isfinite(G[j])]
        if jumps and np.isfinite(G[i]):
            variation.append(0.5 * max(jumps))
    if not variation:
        return band_min
    return max(2.0 * float(np.quantile(variation, 0.9)), band_min)


@dataclass
class BlockResult:
    """Sampled block B = cl H~_delta with its boundary labels"""

    epsilon: float
    delta: float
    band: float
    cell: float
    samples: np.ndarray
    g_plus: np.ndarray
    g_minus: np.ndarray
    sample_class: np.ndarray
    labels: dict
    flagged: np.ndarray
    metric_weights: np.ndarray
    functionals: object = None
    horizon: float = 0.0
    bundle_size: int = 0
    stage1: dict = field(default_factory=dict)
    band_min: float = BAND_MIN

    @property
    def interior_indices(self):
        return np.flatnonzero(self.sample_class == INTERIOR)

    @property
    def boundary_indices(self):
        return np.flatnonzero(self.sample_class == BOUNDARY)

    @property
    def interior_samples(self):
        return self.samples[self.interior_indices]

    @property
    def boundary_samples(self):
        return [(self.samples[i], self.labels.get(int(i))) for i in self.boundary_indices]

    def label_counts(self):
        counts = {"Egress": 0, "Ingress": 0, "BounceOff": 0}
        for label in self.labels.values():
            counts[label.value] += 1
        return counts

    @cached_property
    def _tree(self):
        return cKDTree(scaled(self.samples, self.metric_weights))

    def nearest_class(self, points):
        """Class of the nearest sample for each point"""
        _, idx = self._tree.query(scaled(np.atleast_2d(points), self.metric_weights))
        return self.sample_class[np.asarray(idx)]

    def label_at(self, x, g_plus, g_minus):
        """
        Label of a point with known g values, by the rule used for the samples

        Level widths come from the samples within NEIGHBOR_RADIUS cells of x;
        an Egress point next to an Ingress sample is BounceOff.
        """
        point = scaled(np.asarray(x, dtype=float), self.metric_weights)
        near = self._tree.query_ball_point(point, NEIGHBOR_RADIUS * self.cell)
        if not near:
            near = [int(self._tree.query(point)[1])]
        width_plus = level_width(g_plus, self.g_plus[near], self.delta, self.band, self.band_min)
        width_minus = level_width(g_minus, self.g_minus[near], self.delta, self.band, self.band_min)
        label = label_from_g(g_plus, g_minus, self.delta, width_plus, width_minus)
        if label is BoundaryLabel.EGRESS and any(
            self.labels.get(int(j)) is BoundaryLabel.INGRESS for j in near
        ):
            return BoundaryLabel.BOUNCE_OFF
        return label

    def to_dict(self):
        boundary = [
            {
                "x": self.samples[i].tolist(),
                "label": self.labels[int(i)].value if int(i) in self.labels else None,
                "g_plus": float(self.g_plus[i]),
                "g_minus": float(self.g_minus[i]),
                "flagged": bool(self.flagged[i]),
            }
            for i in self.boundary_indices
        ]
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "band": self.band,
            "cell": self.cell,
            "horizon": self.horizon,
            "bundle_size": self.bundle_size,
            "interior_count": int(len(self.interior_indices)),
            "boundary_count": int(len(self.boundary_indices)),
            "label_counts": self.label_counts(),
            "flagged_count": int(np.sum(self.flagged[self.boundary_indices])),
            "interior": self.interior_samples.tolist(),
            "boundary": boundary,
            "stage1": self.stage1,
        }

    def csv_rows(self):
        """Boundary and interior samples as rows (x_1..x_n, g_plus, g_minus, label)"""
        n = self.samples.shape[1]
        header = [f"x_{i + 1}" for i in range(n)] + ["g_plus", "g_minus", "label"]
        rows = []
        for i in np.flatnonzero(self.sample_class != EXTERIOR):
            label = self.labels[int(i)].value if int(i) in self.labels else "interior"
            rows.append([*map(float, self.samples[i]), float(self.g_plus[i]),
                         float(self.g_minus[i]), label])
        return header, rows


def build_block(
    generator,
    f,
    grid,
    T,
    dt=None,
    delta=None,
    epsilon_start=EPSILON_START,
    levels=EPSILON_LEVELS,
    band_min=BAND_MIN,
    cell=None,
    refine=None,
):
    """
    Construct B = cl H~_delta

    Stage one picks eps on the grid. Stage two samples H_eps (refined by
    `refine` on low-dimensional tensor grids), recomputes g+- relative to
    N~ = cl H_eps and splits the samples at the sampled level set G = delta.
    Boundary samples are the closer side of each level crossing; Egress
    samples touching Ingress ones are relabelled BounceOff.

    Args:
        generator: BundleGenerator
        f: BlockFunctionals on N
        grid: Samples covering U cap O(K)
        T: Horizon of the g estimates
        dt: Step (default the generator's)
        delta: Level in (0, eps); default DELTA_FRACTION * eps
        refine: Stage-two refinement factor (default 4 for dimension <= 3, else 1)

    Raises:
        BlockConstructionError: no eps qualifies, or delta not in (0, eps)
    """
    choice = choose_epsilon(generator, f, grid, T, dt, epsilon_start, levels, cell)
    eps = choice.epsilon
    delta = DELTA_FRACTION * eps if not delta else float(delta)
    if not 0 < delta < eps:
        raise BlockConstructionError(f"delta={delta:g} must lie in (0, eps={eps:g})")

    weights = generator.metric_weights
    dimension = choice.samples.shape[1]
    N_tilde = SampledRegion(choice.samples, choice.member_mask, weights, choice.cell)
    f2 = f.restricted_to(N_tilde)

    if refine is None:
        refine = 4 if dimension <= 3 else 1
    if refine > 1:
        candidates = refined_grid(choice.samples[choice.member_mask], choice.cell, refine)
        stage2 = np.vstack([f.K_cloud.points, candidates[N_tilde.signed_distances(candidates) < 0]])
        cell2 = choice.cell / refine
    else:
        stage2 = choice.samples[choice.member_mask]
        cell2 = choice.cell

    in_U = N_tilde.signed_distances(stage2) < -N_tilde.membership_tol
    g_plus = np.full(len(stage2), np.inf)
    g_minus = np.full(len(stage2), np.inf)
    idx = np.flatnonzero(in_U)
    g_plus[idx], g_minus[idx], _ = evaluate_g(stage2[idx], generator, f2, T, dt, offset=len(grid))
    G = np.maximum(g_plus, g_minus)

    neighbours = _neighbours(stage2, weights, NEIGHBOR_RADIUS * cell2)
    others = [[j for j in near if j != i] for i, near in enumerate(neighbours)]
    on_level = np.array([
        abs(G[i] - delta) <= level_width(G[i], G[others[i]], delta, band_min=band_min)
        for i in range(len(stage2))
    ], dtype=bool)
    among = on_level if on_level.any() else None
    band = boundary_band(G, stage2, weights, cell2, band_min, among=among)

    sample_class = np.where(G < delta, INTERIOR, EXTERIOR)
    for i in range(len(stage2)):
        if abs(G[i] - delta) <= level_width(G[i], G[others[i]], delta, band, band_min):
            sample_class[i] = BOUNDARY

    flagged = np.zeros(len(stage2), dtype=bool)
    for i in np.flatnonzero(np.isfinite(G)):
        jumps = [abs(G[i] - G[j]) for j in others[i] if np.isfinite(G[j])]
        if jumps and max(jumps) > JUMP_FACTOR * band:
            flagged[i] = True

    labels = {}
    for i in np.flatnonzero(sample_class == BOUNDARY):
        near = others[i]
        width_plus = level_width(g_plus[i], g_plus[near], delta, band, band_min)
        width_minus = level_width(g_minus[i], g_minus[near], delta, band, band_min)
        labels[int(i)] = label_from_g(g_plus[i], g_minus[i], delta, width_plus, width_minus)
    labels = close_exit_set(labels, stage2, weights, cell2)
    generator_size = generator.bundle_size
    result = BlockResult(
        epsilon=eps,
        delta=delta,
        band=band,
        cell=cell2,
        samples=stage2,
        g_plus=g_plus,
        g_minus=g_minus,
        sample_class=sample_class,
        labels=labels,
        flagged=flagged,
        metric_weights=weights,
        functionals=f2,
        horizon=T,
        bundle_size=generator_size,
        band_min=band_min,
        stage1={
            "scan": choice.scanned,
            "samples": int(len(choice.samples)),
            "members": int(choice.member_mask.sum()),
            "cell": choice.cell,
        },
    )
    logger.info(
        "block: eps=%g delta=%g band=%.3g interior=%d boundary=%d %s",
        eps, delta, band, len(result.interior_indices), len(result.boundary_indices),
        result.label_counts(),
    )
    return result
