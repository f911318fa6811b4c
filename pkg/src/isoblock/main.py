"""Command-line front end: simulate, equilibria, block, classify and verify"""

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from isoblock.block.builder import build_block
from isoblock.block.classify import classify_boundary_point, verify_block
from isoblock.block.functionals import BlockFunctionals
from isoblock.config import RunConfig
from isoblock.core.diagnostics import check_axioms, check_k5, estimate_A_minus, omega_limit
from isoblock.core.region import RegionSpec
from isoblock.core.state import StateVec
from isoblock.core.trajectory import CloudLabel, PointCloudSet
from isoblock.errors import ConfigError, IsoblockError, SuiteMismatchError
from isoblock.models.heaviside import HeavisideRD, RDConfig
from isoblock.models.zoo import make_zoo_model
from isoblock.rd.checks import (
    check_comparison,
    check_lyapunov_decrease,
    nondegeneracy,
    regularized_block_inputs,
    uniqueness_at_equilibrium,
)
from isoblock.rd.equilibria import check_energy_ordering, shoot_equilibrium
from isoblock.solver.certificate import adversarial_reference, filippov_certificate, tracking_pair
from isoblock.solver.integrator import BundleGenerator, integrate
from isoblock.solver.selection import SelectionStrategy, strategies_from_strings
from isoblock.utils.export import write_csv, write_json
from isoblock.utils.math_utils import weighted_norm

logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "equilibria", "block", "classify", "verify")
RD_SUITES = ("lyapunov", "comparison", "ordering", "nondegeneracy")
E_TRACE_POINTS = 200  # Energy samples kept in the simulate summary
K5_APPROACH = 60  # Approach points x + 2^-m e1, m = 1..K5_APPROACH
FILIPPOV_PAIRS = 100


class Run:
    """Model, generator and neighbourhood built once from a validated RunConfig"""

    def __init__(self, config):
        self.config = config
        if config.model == "heaviside-rd":
            self.rd_config = RDConfig.from_run_config(config)
            self.model = HeavisideRD(self.rd_config)
        else:
            self.rd_config = None
            self.model = make_zoo_model(
                config.model, config.a, config.b, config.lipschitz_c
            ).model
        self.generator = BundleGenerator(
            self.model, config.active_strategies(), config.T, config.dt, config.seed
        )
        self.dimension = self.model.dimension

    @property
    def is_rd(self):
        return self.rd_config is not None

    def equilibrium(self, k=None, sign=None):
        if not self.is_rd:
            raise ConfigError("equilibria v_k are only defined for heaviside-rd")
        k = self.config.k if k is None else k
        sign = self.config.sign if sign is None else sign
        return shoot_equilibrium(k, sign, self.rd_config)

    def initial_state(self):
        """x0, the named equilibrium, or (RD only) a seeded profile of size u0_scale"""
        config = self.config
        if config.x0_equilibrium:
            k, sign = (int(part) for part in config.x0_equilibrium.split(","))
            return self.equilibrium(k, sign).profile.coords.copy()
        if config.x0:
            x0 = np.asarray(config.x0, dtype=float)
            if x0.shape != (self.dimension,):
                raise ConfigError(f"x0 has {x0.size} entries, the model has {self.dimension}")
            return x0
        if self.is_rd:
            rng = np.random.default_rng(config.seed)
            return config.u0_scale * rng.standard_normal(self.dimension)
        raise ConfigError("x0 is required for this model")

    def region_center(self):
        if self.config.region_center:
            center = np.asarray(self.config.region_center, dtype=float)
            if center.shape != (self.dimension,):
                raise ConfigError("region_center does not match the model dimension")
            return center
        if self.is_rd:
            return self.equilibrium().profile.coords.copy()
        return np.zeros(self.dimension)

    def region(self):
        config = self.config
        center = StateVec(self.region_center(), self.model.metric_weights)
        if config.region_radius:
            radius = np.asarray(config.region_radius, dtype=float)
        elif self.is_rd:
            radius = np.array([0.5 * self.equilibrium().sup_norm])
        else:
            radius = np.ones(1)
        if np.any(radius <= 0):
            raise ConfigError("region_radius must be positive")
        if config.region_kind == "ball":
            return RegionSpec.ball(center, radius[0])
        if radius.size not in (1, self.dimension):
            raise ConfigError("region_radius needs one entry or one per coordinate")
        return RegionSpec.box(center, radius)

    def samples(self, region):
        """Tensor grid on low-dimensional boxes, otherwise seeded rays from the center"""
        config = self.config
        if self.dimension <= 3 and region.kind.value == "box":
            return region.grid(config.grid_resolution)
        rng = np.random.default_rng(config.seed)
        levels = max(2, config.grid_resolution // 2)
        rays = max(1, config.n_samples // levels)
        radius = float(np.max(region.radii))
        weights = self.model.metric_weights
        points = [region.center.coords]
        for _ in range(rays):
            direction = rng.standard_normal(self.dimension)
            direction /= np.sqrt(np.sum(weights * direction**2))
            for r in np.linspace(radius / levels, radius, levels, endpoint=False):
                points.append(region.center.coords + r * direction)
        return np.array(points)

    def K_cloud(self, region):
        weights = self.model.metric_weights
        if self.is_rd and self.config.epsilon_reg > 0:
            inputs = regularized_block_inputs(
                self.config.k, self.config.sign, self.rd_config, float(np.max(region.radii)),
                strategies_from_strings(self.generator.strategy_texts, self.config.seed),
                seed=self.config.seed,
            )
            return inputs.cloud
        inside = [e for e in self.generator.equilibria() if region.interior(e)]
        if not inside:
            raise ConfigError("no known equilibrium lies inside the region")
        return PointCloudSet(np.array(inside), weights, CloudLabel.K_APPROX)

    def functionals(self):
        region = self.region()
        grid = self.samples(region)
        K = self.K_cloud(region)
        A_minus = estimate_A_minus(self.generator, region, grid, self.config.horizon_back)
        f = BlockFunctionals(K, A_minus, region, region.scaled_by(self.config.region_o_scale))
        return f, grid

    def block(self):
        config = self.config
        f, grid = self.functionals()
        return build_block(
            self.generator,
            f,
            grid,
            config.T,
            delta=config.delta or None,
            epsilon_start=config.epsilon_start,
            levels=config.epsilon_levels,
            band_min=config.band_min,
        )

    def probe_dt(self):
        return self.config.probe_dt or None


def _max_residual(model, traj):
    if not traj.has_selection():
        return 0.0
    return max(
        model.residual(x, x_new, h, traj.dt)
        for x, x_new, h in zip(traj.states[:-1], traj.states[1:], traj.selection)
    )


def cmd_simulate(run, out):
    """One CSV per bundle member plus a summary with endpoints, residuals and E for RD"""
    x0 = run.initial_state()
    bundle = run.generator.bundle(x0)
    members, tables = [], []
    labels = run.generator.strategy_texts
    for i, member in enumerate(bundle):
        label = labels[i] if len(bundle) == len(labels) else f"member{i}"
        tables.append((out / f"trajectory_{i}.csv", *member.csv_rows()))
        entry = {
            "strategy": label,
            "endpoint": member.endpoint().coords,
            "t_end": member.t_end,
            "max_residual": _max_residual(run.model, member),
            "distance_from_start": float(
                weighted_norm(member.states[-1] - member.states[0], member.metric_weights)
            ),
        }
        if run.is_rd:
            lyapunov = check_lyapunov_decrease(member, run.rd_config)
            stride = max(1, member.n_samples // E_TRACE_POINTS)
            entry["E_trace"] = lyapunov.energies[::stride]
            entry["E_nonincreasing"] = lyapunov.passed
        members.append(entry)
    summary = {
        "command": "simulate",
        "model": run.config.model,
        "x0": x0,
        "dt": run.config.dt,
        "T": run.config.T,
        "seed": run.config.seed,
        "members": members,
    }
    return summary, tables, True


def cmd_equilibria(run, out):
    """v_k^+- for k = 1..k_max: one CSV each and a JSON with zeros, slopes and energies"""
    if not run.is_rd:
        raise ConfigError("equilibria needs model = heaviside-rd")
    found, tables = [], []
    for k in range(1, run.config.k_max + 1):
        for sign in (1, -1):
            eq = run.equilibrium(k, sign)
            name = f"v_{k}{'p' if sign > 0 else 'm'}.csv"
            tables.append((out / name, *eq.csv_rows(run.rd_config)))
            found.append(eq.to_dict())
    ordering = check_energy_ordering(run.rd_config, run.config.k_max)
    summary = {"command": "equilibria", "equilibria": found, "ordering": ordering}
    return summary, tables, ordering.passed


def cmd_block(run, out):
    block = run.block()
    report = verify_block(block, run.generator, run.probe_dt(), run.config.probe_T)
    summary = {"command": "block", "block": block, "verification": report}
    return summary, [(out / "boundary.csv", *block.csv_rows())], report.passed


def cmd_classify(run, out):
    """Label x0 against a freshly built block"""
    block = run.block()
    point = classify_boundary_point(
        run.initial_state(), run.generator, block, run.probe_dt(), run.config.probe_T
    )
    summary = {
        "command": "classify",
        "x": run.initial_state(),
        "delta": block.delta,
        "band": block.band,
        "classification": point,
    }
    return summary, [], not point.flagged


def _suite_axioms(run):
    region = run.region()
    samples = run.samples(region)
    picks = samples[np.linspace(0, len(samples) - 1, min(5, len(samples))).astype(int)]
    report = check_axioms(run.generator, picks, run.config.T)
    return report, report.passed


def _suite_k5(run):
    x = run.initial_state()
    target_strategy = SelectionStrategy.from_string(run.config.strategies[0])
    target = integrate(run.model, x, target_strategy, run.config.T, run.config.dt)
    direction = np.zeros(run.dimension)
    direction[0] = 1.0
    approach = [x + 2.0**-m * direction for m in range(1, K5_APPROACH + 1)]
    report = check_k5(run.generator, x, target, approach, run.config.T)
    return report, report.passed


def _suite_lyapunov(run):
    """E along every member from x0, where each lands, and the departure from 0"""
    config = run.config
    x0 = run.initial_state()
    equilibria = run.generator.equilibria()
    weights = run.model.metric_weights
    runs, passed = [], True
    for member in run.generator.bundle(x0):
        report = check_lyapunov_decrease(member, run.rd_config)
        limit = omega_limit(member)
        landing = min(
            float(np.sqrt(np.sum(weights * (limit.points[-1] - e) ** 2))) for e in equilibria
        )
        runs.append({"lyapunov": report, "omega_limit_distance": landing})
        passed &= report.passed
    departure = integrate(
        run.model, np.zeros(run.dimension), SelectionStrategy.maximal(), config.T, config.dt
    )
    departed = check_lyapunov_decrease(departure, run.rd_config)
    end = departure.endpoint().coords
    nearest = min(
        range(len(equilibria)),
        key=lambda i: float(np.sum(weights * (end - equilibria[i]) ** 2)),
    )
    report = {
        "runs": runs,
        "departure_from_zero": {
            "lyapunov": departed,
            "nearest_equilibrium": nearest,
            "distance": float(np.sqrt(np.sum(weights * (end - equilibria[nearest]) ** 2))),
        },
        "passed": bool(passed and departed.passed),
    }
    return report, report["passed"]


def _suite_comparison(run):
    """u0 = x0 - perturbation sin(pi x) against v0 = x0, plus uniqueness at v_k"""
    config = run.config
    v0 = run.initial_state()
    u0 = v0 - config.perturbation * np.sin(np.pi * run.rd_config.x)
    strategies = strategies_from_strings(run.generator.strategy_texts, config.seed)
    report = check_comparison(u0, v0, run.rd_config, strategies)
    if not report.precondition_ok:
        return report, False
    uniqueness = uniqueness_at_equilibrium(config.k, config.sign, run.rd_config, strategies)
    combined = {"comparison": report, "uniqueness": uniqueness,
                "passed": bool(report.passed and uniqueness.passed)}
    return combined, combined["passed"]


def _suite_ordering(run):
    report = check_energy_ordering(run.rd_config, run.config.k_max)
    return report, report.passed


def _suite_nondegeneracy(run):
    report = nondegeneracy(run.equilibrium(), run.rd_config)
    return report, report.passed


def _suite_filippov(run):
    """Certificates for seeded pairs (z from an inflated box, u tracking z)"""
    config = run.config
    model = run.model
    if not hasattr(model, "adversarial") or model.lipschitz_C <= 0:
        raise SuiteMismatchError(f"filippov needs a Lipschitz inclusion, not {config.model}")
    rng = np.random.default_rng(config.seed)
    strategies = run.generator.strategy_texts
    pairs, worst, passed = [], -np.inf, True
    for i in range(min(config.n_samples, FILIPPOV_PAIRS)):
        z0 = rng.uniform(-1.0, 1.0, run.dimension)
        u0 = z0 + config.perturbation * rng.standard_normal(run.dimension)
        strategy = SelectionStrategy.from_string(strategies[i % len(strategies)], seed=i)
        z = adversarial_reference(model, z0, strategy, config.T, config.dt)
        u = tracking_pair(model, z, u0)
        cert = filippov_certificate(model, u, z)
        worst = max(worst, cert.worst_margin)
        passed &= cert.valid
        pairs.append({"valid": cert.valid, "worst_margin": cert.worst_margin,
                      "max_rho": float(np.max(cert.rho))})
    report = {"pairs": pairs, "worst_margin": worst, "passed": bool(passed)}
    return report, report["passed"]


SUITE_RUNNERS = {
    "axioms": _suite_axioms,
    "k5": _suite_k5,
    "lyapunov": _suite_lyapunov,
    "comparison": _suite_comparison,
    "ordering": _suite_ordering,
    "nondegeneracy": _suite_nondegeneracy,
    "filippov": _suite_filippov,
}


def cmd_verify(run, out, suite):
    """
    Run one verification suite

    A failing suite with expect_fail is recorded as an expected failure and
    counts as success; a comparison whose precondition fails is a mismatch.

    Raises:
        SuiteMismatchError: suite not valid for the model, or failed precondition
    """
    config = run.config
    if not suite:
        raise ConfigError("verify needs a suite (config key 'suite' or --suite)")
    if suite in RD_SUITES and not run.is_rd:
        raise SuiteMismatchError(f"suite {suite} needs model = heaviside-rd")
    report, passed = SUITE_RUNNERS[suite](run)
    precondition_failed = suite == "comparison" and not getattr(report, "precondition_ok", True)
    if precondition_failed and not config.expect_fail:
        raise SuiteMismatchError(f"comparison precondition failed: {report.reason}")
    ok = passed != config.expect_fail
    summary = {
        "command": "verify",
        "suite": suite,
        "model": config.model,
        "passed": bool(passed),
        "expect_fail": config.expect_fail,
        "expected_failure": bool(config.expect_fail and not passed),
        "report": report,
    }
    return summary, [], ok


def build_parser():
    parser = argparse.ArgumentParser(
        prog="isoblock",
        description="Isolating blocks for multivalued semiflows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=Path, required=True, help="key = value run file")
        cmd.add_argument("--out", type=Path, default=None, help="output directory")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--deterministic", action="store_true",
                         help="omit timestamps and durations from reports")
        cmd.add_argument("-v", "--verbose", action="count", default=0)
        if name == "verify":
            cmd.add_argument("--suite", default=None)
    return parser


def run_command(command, config, suite=None):
    """
    Dispatch a command

    Returns:
        (summary, [(csv path, header, rows), ...], success); nothing is
        written until every command step has finished
    """
    out = Path(config.out_dir)
    run = Run(config)
    if command == "simulate":
        return cmd_simulate(run, out)
    if command == "equilibria":
        return cmd_equilibria(run, out)
    if command == "block":
        return cmd_block(run, out)
    if command == "classify":
        return cmd_classify(run, out)
    return cmd_verify(run, out, suite or config.suite)


def main(argv=None):
    """
    Entry point

    Exit codes: 0 success, 1 check failed, 2 configuration, 3 numerical,
    4 block construction, 5 suite mismatch.
    """
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    started = time.time()
    try:
        overrides = {
            "seed": args.seed,
            "out_dir": str(args.out) if args.out is not None else None,
            "deterministic": True if args.deterministic else None,
        }
        config = RunConfig.from_file(args.config, overrides)
        summary, tables, ok = run_command(args.command, config, getattr(args, "suite", None))
    except IsoblockError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code

    summary["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started))
    summary["duration_s"] = time.time() - started
    paths = [write_csv(path, header, rows) for path, header, rows in tables]
    report_path = Path(config.out_dir) / f"{args.command}.json"
    write_json(report_path, summary, deterministic=config.deterministic)
    for path in [*paths, report_path]:
        print(path)
    logger.info("%s %s", args.command, "ok" if ok else "FAILED")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
