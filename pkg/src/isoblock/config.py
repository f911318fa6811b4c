"""Numerical defaults and run configuration"""

import math
import tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path

from isoblock.errors import ConfigError

# Time stepping
DEFAULT_DT = 1e-3
DEFAULT_T = 10.0
RESIDUAL_TOL = 1e-9  # One-step residual accepted by the integrator
SIGN_TOL = 1e-12  # |u_i| below this counts as exactly zero for selections
DEDUP_TOL = 1e-12  # Bundle members closer than this (sup over time) are merged

# Selection strategies
RANDOM_DWELL = 0.1  # Resampling period of RandomPiecewiseConstant
DEFAULT_STRATEGIES = (
    "maximal",
    "minimal",
    "zero",
    "random:0.1",
    "random:0.05",
    "depart:0.0:+",
    "depart:0.0:-",
    "depart:0.5:+",
)

# Semiflow diagnostics
MEMBERSHIP_TOL = 1e-9
CLUSTER_TOL = 1e-3  # omega-limit cluster radius (weighted metric)
HORIZON_BACK = 10.0  # Forward-tail harvesting horizon for A^-(N)
HARVEST_STRIDE = 10  # Keep every k-th tail state when harvesting
AXIOM_TOL = 1e-6
K5_TOL = 1e-6

# Block construction
EPSILON_START = 1.0
EPSILON_LEVELS = 12  # Geometric scan eps0, eps0/2, ...
DELTA_FRACTION = 0.5  # delta = DELTA_FRACTION * epsilon unless overridden
BAND_MIN = 1e-3  # Lower bound of the "g ~ delta" half-width
JUMP_FACTOR = 10.0  # Neighbour jumps above JUMP_FACTOR * band are flagged
NEIGHBOR_RADIUS = 1.5  # In units of the sample cell size
MONOTONICITY_SLACK = 1e-6
STRICTNESS_FLOOR = 1e-4
REFINE_XATOL = 1e-6  # Local refinement tolerance (time units)

# Heaviside reaction-diffusion
RD_N = 63
RD_OMEGA = 0.0
RD_EPSILON_REG = 0.0
POINTS_PER_LOBE = 8
NEWTON_MAX_ITER = 50
EQUILIBRIUM_RESIDUAL_TOL = 1e-8

# Output
JSON_FLOAT_FORMAT = ".17g"

MODEL_IDS = ("sqrt-ode", "saddle", "planar-lipschitz", "heaviside-rd")
SUITES = ("axioms", "k5", "lyapunov", "comparison", "ordering", "nondegeneracy", "filippov")


@dataclass
class RunConfig:
    """Validated contents of a flat key-value run file"""

    model: str = ""
    a: float = 1.0
    b: float = 1.0
    lipschitz_c: float = 1.0
    n: int = RD_N
    omega: float = RD_OMEGA
    epsilon_reg: float = RD_EPSILON_REG
    dt: float = DEFAULT_DT
    T: float = DEFAULT_T
    seed: int = 0
    strategies: list = field(default_factory=lambda: list(DEFAULT_STRATEGIES))
    x0: list = field(default_factory=list)
    x0_equilibrium: str = ""
    region_kind: str = "box"
    region_center: list = field(default_factory=list)
    region_radius: list = field(default_factory=list)
    region_o_scale: float = 1.5
    grid_resolution: int = 21
    n_samples: int = 120
    epsilon_start: float = EPSILON_START
    epsilon_levels: int = EPSILON_LEVELS
    delta: float = 0.0
    band_min: float = BAND_MIN
    horizon_back: float = HORIZON_BACK
    bundle_size: int = len(DEFAULT_STRATEGIES)
    probe_T: float = 1.0
    probe_dt: float = 0.0
    k: int = 1
    sign: int = 1
    k_max: int = 3
    suite: str = ""
    expect_fail: bool = False
    u0_scale: float = 0.0
    perturbation: float = 0.01
    out_dir: str = "out"
    deterministic: bool = False

    @classmethod
    def from_file(cls, path, overrides=None):
        """
        Read a flat key = value file and validate it

        Args:
            path: Path to the run file
            overrides: Optional dict applied after the file (CLI flags)

        Raises:
            ConfigError: Unreadable file, unknown key, bad type or bad value
        """
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid key = value text: {exc}") from exc
        return cls.from_mapping(raw, overrides)

    @classmethod
    def from_mapping(cls, raw, overrides=None):
        """Build a config from a plain dict, validating every key"""
        values = dict(raw)
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

        config = cls()
        for key, value in values.items():
            default = getattr(config, key)
            setattr(config, key, _coerce(key, value, default))
        config.validate()
        return config

    def validate(self):
        """Check ranges and cross-field consistency"""
        if not self.model:
            raise ConfigError("missing model id")
        if self.model not in MODEL_IDS:
            raise ConfigError(f"unknown model id {self.model!r}; expected one of {MODEL_IDS}")
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError("dt and T must be positive")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError(f"dt={self.dt} does not divide T={self.T}")
        if not 0.0 <= self.omega < math.pi**2:
            raise ConfigError(f"omega={self.omega} outside [0, pi^2)")
        if self.n < 3:
            raise ConfigError("n must be at least 3")
        if self.epsilon_reg < 0:
            raise ConfigError("epsilon_reg must be nonnegative")
        if self.a <= 0 or self.b <= 0 or self.lipschitz_c <= 0:
            raise ConfigError("a, b and lipschitz_c must be positive")
        if self.sign not in (-1, 1):
            raise ConfigError("sign must be +1 or -1")
        if self.k < 1 or self.k_max < 1:
            raise ConfigError("k and k_max must be positive")
        if self.region_kind not in ("box", "ball"):
            raise ConfigError(f"region_kind must be 'box' or 'ball', not {self.region_kind!r}")
        if self.grid_resolution < 3 or self.n_samples < 1:
            raise ConfigError("grid_resolution must be >= 3 and n_samples >= 1")
        if not 0 < self.epsilon_start or self.epsilon_levels < 1:
            raise ConfigError("epsilon_start must be positive and epsilon_levels >= 1")
        if self.delta < 0 or self.band_min <= 0:
            raise ConfigError("delta must be >= 0 and band_min > 0")
        if self.bundle_size < 1 or not self.strategies:
            raise ConfigError("at least one selection strategy is required")
        from isoblock.solver.selection import SelectionStrategy

        for text in self.strategies:
            if not isinstance(text, str):
                raise ConfigError(f"strategy entries must be strings, not {text!r}")
            SelectionStrategy.from_string(text)
        if self.suite and self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; expected one of {SUITES}")
        if self.probe_T <= 0 or self.probe_dt < 0 or self.horizon_back <= 0:
            raise ConfigError("probe_T and horizon_back must be positive, probe_dt >= 0")
        if self.x0_equilibrium:
            try:
                k, sign = (int(part) for part in self.x0_equilibrium.split(","))
            except ValueError as exc:
                raise ConfigError("x0_equilibrium must read 'k,sign'") from exc
            if k < 1 or sign not in (-1, 1):
                raise ConfigError("x0_equilibrium must name k >= 1 and sign +-1")
            self._check_lobes("x0_equilibrium k", k)
        self._check_lobes("k", self.k)
        self._check_lobes("k_max", self.k_max)

    def _check_lobes(self, name, k):
        """v_k needs POINTS_PER_LOBE grid points per lobe on the RD grid"""
        if self.model != "heaviside-rd":
            return
        largest = self.n // POINTS_PER_LOBE
        if k > largest:
            raise ConfigError(
                f"{name}={k} needs n >= {POINTS_PER_LOBE * k}; n={self.n} resolves k <= {largest}"
            )

    def active_strategies(self):
        """Strategy strings limited to bundle_size"""
        return list(self.strategies[: self.bundle_size])


def _coerce(key, value, default):
    """Coerce a raw file value to the type of the field default"""
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, list):
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                return [value]
            if not isinstance(value, list):
                raise TypeError
            return list(value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return value


def load_config(path, overrides=None):
    """Shorthand for RunConfig.from_file"""
    return RunConfig.from_file(Path(path), overrides)
