"""Discretized Heaviside reaction-diffusion inclusion u_t - u_xx in H0(u) + omega u on (0, 1)"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from isoblock.config import DEFAULT_DT, DEFAULT_T, RD_EPSILON_REG, RD_N, RD_OMEGA
from isoblock.core.state import grid_weights
from isoblock.errors import ConfigError
from isoblock.solver.model import InclusionModel
from isoblock.solver.selection import heaviside_selection, regularized_selection
from isoblock.utils.math_utils import laplacian_1d

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RDConfig:
    """Grid and time-stepping parameters of the RD inclusion"""

    n: int = RD_N
    omega: float = RD_OMEGA
    epsilon_reg: float = RD_EPSILON_REG
    dt: float = DEFAULT_DT
    T: float = DEFAULT_T

    def __post_init__(self):
        if self.n < 3:
            raise ConfigError(f"n={self.n}: at least 3 interior points are needed")
        if not 0.0 <= self.omega < math.pi**2:
            raise ConfigError(f"omega={self.omega} outside [0, pi^2)")
        if self.epsilon_reg < 0:
            raise ConfigError("epsilon_reg must be nonnegative")
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError("dt and T must be positive")

    @property
    def h(self):
        return 1.0 / (self.n + 1)

    @property
    def x(self):
        """Interior nodes x_i = i h, i = 1..n"""
        return self.h * np.arange(1, self.n + 1)

    @property
    def k_max(self):
        """Largest lobe count with at least POINTS_PER_LOBE nodes per lobe"""
        from isoblock.config import POINTS_PER_LOBE

        return self.n // POINTS_PER_LOBE

    @property
    def slack(self):
        """Order/uniqueness slack 10 dt (1 + omega) of the first-order scheme"""
        return 10.0 * self.dt * (1.0 + self.omega)

    def with_epsilon(self, epsilon_reg):
        return RDConfig(self.n, self.omega, epsilon_reg, self.dt, self.T)

    @classmethod
    def from_run_config(cls, run):
        return cls(run.n, run.omega, run.epsilon_reg, run.dt, run.T)


class HeavisideRD(InclusionModel):
    """
    IMEX-discretized Heaviside inclusion

    The discrete Laplacian is implicit; the selection from H0 (or g_eps when
    epsilon_reg > 0) and omega u are explicit. Metric weights are h.
    """

    name = "heaviside-rd"

    def __init__(self, config=None):
        config = config or RDConfig()
        eps = config.epsilon_reg
        C = 2.0 / eps + config.omega if eps > 0 else 0.0
        super().__init__(
            config.n,
            metric_weights=grid_weights(config.n),
            linear_part=laplacian_1d(config.n, config.h),
            lipschitz_C=C,
        )
        self.config = config
        self._equilibria = None

    def selection_set(self, x):
        if self.config.epsilon_reg > 0:
            return regularized_selection(np.asarray(x, dtype=float), self.config.epsilon_reg)
        return heaviside_selection(np.asarray(x, dtype=float))

    def nonstiff(self, x):
        return self.config.omega * np.asarray(x, dtype=float)

    def max_stable_dt(self):
        # positivity of the explicit omega u part
        return 1.0 / self.config.omega if self.config.omega > 0 else np.inf

    def regularized(self, epsilon_reg):
        """The model of the regularized family G_eps"""
        return HeavisideRD(self.config.with_epsilon(epsilon_reg))

    def equilibria(self):
        """0 and v_k^+- for k up to k_max(n)"""
        if self._equilibria is None:
            from isoblock.rd.equilibria import shoot_equilibrium

            found = [np.zeros(self.dimension)]
            for k in range(1, self.config.k_max + 1):
                for sign in (1, -1):
                    found.append(shoot_equilibrium(k, sign, self.config).profile.coords)
            self._equilibria = found
            logger.debug("cached %d equilibria for n=%d", len(found), self.dimension)
        return [e.copy() for e in self._equilibria]

    def energy(self, u):
        from isoblock.rd.equilibria import lyapunov_E

        return lyapunov_E(u, self.config)

    def __repr__(self):
        c = self.config
        return f"HeavisideRD(n={c.n}, omega={c.omega:g}, epsilon_reg={c.epsilon_reg:g})"
