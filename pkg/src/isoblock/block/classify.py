"""Boundary labels of a sampled block and verification of the block properties"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from isoblock.block.builder import (
    BOUNDARY,
    EXTERIOR,
    INTERIOR,
    BoundaryLabel,
    _adjacent_pairs,
)
from isoblock.block.estimates import estimate_g_minus, estimate_g_plus, g_pair
from isoblock.block.functionals import exit_time
from isoblock.config import MONOTONICITY_SLACK, STRICTNESS_FLOOR
from isoblock.errors import PreconditionError
from isoblock.solver.integrator import step_count

logger = logging.getLogger(__name__)


class ProbeOutcome(Enum):
    LEAVES = "leaves"
    ENTERS = "enters"
    STAYS = "stays"
    SKIPPED = "skipped"


def probe(bundle, block):
    """First event of each member: reaching an exterior or an interior sample"""
    outcomes = []
    for member in bundle:
        classes = block.nearest_class(member.states[1:])
        events = classes[classes != BOUNDARY]
        if len(events) == 0:
            outcomes.append(ProbeOutcome.STAYS)
        elif events[0] == EXTERIOR:
            outcomes.append(ProbeOutcome.LEAVES)
        else:
            outcomes.append(ProbeOutcome.ENTERS)
    return outcomes


@dataclass
class ClassifiedPoint:
    label: BoundaryLabel
    flagged: bool
    g_plus: float
    g_minus: float
    forward: list = field(default_factory=list)
    backward: ProbeOutcome = ProbeOutcome.SKIPPED

    def to_dict(self):
        return {
            "label": self.label.value,
            "flagged": self.flagged,
            "g_plus": self.g_plus,
            "g_minus": self.g_minus,
            "forward": [o.value for o in self.forward],
            "backward": self.backward.value,
        }


def _probe_generator(generator, probe_dt, probe_T):
    dt = probe_dt or generator.dt
    return generator.with_step(dt, probe_T)


def classify_boundary_point(x, generator, block, probe_dt=None, probe_T=1.0, g=None, index=0):
    """
    Label a band point by its g values and confirm the label by probing

    Egress and BounceOff need every member to leave B forward, Ingress to
    enter its interior; BounceOff is also probed backward when the model has
    a time-reversed flow. A mismatch keeps the label and sets flagged.

    Args:
        x: Point in the boundary band
        generator: BundleGenerator
        block: BlockResult
        probe_dt: Probe step (default the generator's)
        probe_T: Probe horizon
        g: Known (g_plus, g_minus) at x, recomputed if None

    Raises:
        PreconditionError: x is not in the band
    """
    x = np.asarray(x, dtype=float)
    if g is None:
        plus, minus = g_pair(x, generator, block.functionals, block.horizon, index=index)
        g = (plus.value, minus.value)
    g_plus, g_minus = g
    if abs(max(g_plus, g_minus) - block.delta) > block.band:
        raise PreconditionError(
            f"max(g+, g-) = {max(g_plus, g_minus):.4g} is outside the band "
            f"{block.delta:g} +- {block.band:.3g}"
        )
    label = block.label_at(x, g_plus, g_minus)

    probe_gen = _probe_generator(generator, probe_dt, probe_T)
    forward = probe(probe_gen.bundle(x, T=probe_T, index=index), block)
    expected = ProbeOutcome.ENTERS if label is BoundaryLabel.INGRESS else ProbeOutcome.LEAVES
    flagged = any(o is not expected for o in forward)

    backward = ProbeOutcome.SKIPPED
    if label is BoundaryLabel.BOUNCE_OFF:
        reverse = probe_gen.reversed()
        if reverse is not None:
            outcomes = probe(reverse.bundle(x, T=probe_T, index=index), block)
            backward = (
                ProbeOutcome.LEAVES
                if all(o is ProbeOutcome.LEAVES for o in outcomes)
                else outcomes[0]
            )
            flagged |= backward is not ProbeOutcome.LEAVES
    return ClassifiedPoint(label, flagged, float(g_plus), float(g_minus), forward, backward)


@dataclass
class VerificationReport:
    labels_complete: bool
    exit_set_closed: bool
    monotone: bool
    K_interior: bool
    label_counts: dict
    flagged: int
    probes: int
    monotonicity_violations: list = field(default_factory=list)
    strictness_violations: list = field(default_factory=list)
    closedness_violations: list = field(default_factory=list)
    stage2_consistent: bool = True
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return self.labels_complete and self.exit_set_closed and self.monotone and self.K_interior

    def to_dict(self):
        return {
            "passed": self.passed,
            "labels_complete": self.labels_complete,
            "exit_set_closed": self.exit_set_closed,
            "monotone": self.monotone,
            "K_interior": self.K_interior,
            "label_counts": self.label_counts,
            "flagged": self.flagged,
            "probes": self.probes,
            "monotonicity_violations": self.monotonicity_violations,
            "strictness_violations": self.strictness_violations,
            "closedness_violations": self.closedness_violations,
            "stage2_consistent": self.stage2_consistent,
            "notes": self.notes,
        }


def exit_set_violations(block):
    """Ingress samples with an Egress sample within NEIGHBOR_RADIUS cells"""
    pairs = _adjacent_pairs(block.samples, block.labels, block.metric_weights, block.cell)
    return sorted({i for i, _ in pairs})


def _segment(member, block, f):
    """Leading part of member inside the block interior and inside int N~"""
    classes = block.nearest_class(member.states)
    inside = (classes == INTERIOR) & (
        f.region_N.signed_distances(member.states) < -f.region_N.membership_tol
    )
    end = int(np.argmin(inside)) if not inside.all() else len(inside)
    return end


def _monotonicity(generator, block, x, probe_T, checkpoints, index):
    """
    g+ and g- along one orbit segment, each evaluated with horizon T - s

    Returns:
        (nondecreasing/nonincreasing violations, strictness violations, stage-2 gap)
    """
    f = block.functionals
    T = block.horizon
    member = generator.bundle(x, T=probe_T, index=index).members[0]
    end = _segment(member, block, f)
    if end < 2:
        return [], [], 0.0
    picks = np.unique(np.linspace(0, end - 1, checkpoints).astype(int))
    plus, minus = [], []
    for j in picks:
        s = j * member.dt
        horizon = (step_count(T, generator.dt) - j) * generator.dt
        plus.append(estimate_g_plus(member.states[j], generator, f, horizon, index=index).value)
        minus.append(estimate_g_minus(member.states[j], generator, f, horizon, index=index).value)
        logger.debug("orbit from sample %d at s=%g: g+=%.4g g-=%.4g", index, s, plus[-1], minus[-1])

    weak, strict = [], []
    for a in range(len(picks) - 1):
        if plus[a + 1] < plus[a] - MONOTONICITY_SLACK:
            weak.append({"sample": index, "kind": "g_plus", "drop": plus[a] - plus[a + 1]})
        elif plus[a] > STRICTNESS_FLOOR and plus[a + 1] <= plus[a]:
            strict.append({"sample": index, "kind": "g_plus", "value": plus[a]})
        if minus[a + 1] > minus[a] + MONOTONICITY_SLACK:
            weak.append({"sample": index, "kind": "g_minus", "rise": minus[a + 1] - minus[a]})
        elif minus[a] > STRICTNESS_FLOOR and minus[a + 1] >= minus[a]:
            strict.append({"sample": index, "kind": "g_minus", "value": minus[a]})

    t_open, _ = exit_time(member, f.region_N, open_set=True)
    t_closed, _ = exit_time(member, f.region_N, open_set=False)
    return weak, strict, abs(t_closed - t_open)


def verify_block(
    block, generator, probe_dt=None, probe_T=1.0, n_probes=20, checkpoints=4, classify=True
):
    """
    Check a built block

    (a) every boundary sample has a label, (b) Egress and BounceOff form a
    closed set at sample resolution, (c) g+ increases and g- decreases along
    probed orbit segments in the interior, (d) K lies in the interior samples.
    Probing of the boundary labels is recorded as the flagged count.
    """
    boundary = block.boundary_indices
    labels_complete = len(boundary) > 0 and all(int(i) in block.labels for i in boundary)
    closedness = exit_set_violations(block)

    flagged = 0
    if classify:
        for i in boundary:
            point = classify_boundary_point(
                block.samples[i], generator, block, probe_dt, probe_T,
                g=(block.g_plus[i], block.g_minus[i]), index=int(i),
            )
            block.flagged[i] |= point.flagged
        flagged = int(np.sum(block.flagged[boundary]))

    interior = block.interior_indices
    chosen = interior[np.linspace(0, len(interior) - 1, min(n_probes, len(interior))).astype(int)]
    weak, strict = [], []
    worst_stage2 = 0.0
    probe_horizon = min(probe_T, block.horizon)
    for i in np.unique(chosen):
        w, s, gap = _monotonicity(
            generator, block, block.samples[i], probe_horizon, checkpoints, int(i)
        )
        weak += w
        strict += s
        worst_stage2 = max(worst_stage2, gap)

    K_classes = block.nearest_class(block.functionals.K_cloud.points)
    report = VerificationReport(
        labels_complete=bool(labels_complete),
        exit_set_closed=not closedness,
        monotone=not weak and not strict,
        K_interior=bool(np.all(K_classes == INTERIOR)),
        label_counts=block.label_counts(),
        flagged=flagged,
        probes=int(len(np.unique(chosen))),
        monotonicity_violations=weak,
        strictness_violations=strict,
        closedness_violations=closedness,
        stage2_consistent=worst_stage2 <= generator.dt * (1 + 1e-9),
        notes=["admissibility of N is assumed, not verified"],
    )
    logger.info("verification %s: %s", "passed" if report.passed else "FAILED", report.label_counts)
    return report
