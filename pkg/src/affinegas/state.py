"""Perturbation state, derived flow-map geometry and nonlinear remainders.

The perturbation variable is H = r*(chi/a - 1); theta = H/r measures the
relative deviation from the affine motion, xi = 1 + theta, and the radial
Jacobian of the modified flow map is J = xi^2 (xi + xi_r r).  J - 1 is
assembled from the exact polynomial expansion

    J - 1 = 3 theta + 3 theta^2 + theta^3 + xi^2 r theta_r,

which avoids cancellation when the perturbation is small.  All derived
fields are recomputed at construction; states are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import Dr_values, RadialGrid
from .errors import DegenerateFlowMapError


def powm1(y: np.ndarray, s: float) -> np.ndarray:
    """(1+y)^s - 1 without cancellation for small y."""
    return np.expm1(s * np.log1p(y))


_SERIES_CUT = 1e-3


def pow_plus_linear(y: np.ndarray, gamma: float) -> np.ndarray:
    """(1+y)^(-gamma) - 1 + gamma*y, stable for small y.

    The two O(y) pieces cancel analytically; for |y| below the series cut a
    truncated binomial series keeps full relative accuracy of the O(y^2) result.
    """
    y = np.asarray(y, dtype=float)
    out = powm1(y, -gamma) + gamma * y
    small = np.abs(y) < _SERIES_CUT
    if np.any(small):
        ys = y[small]
        acc = np.zeros_like(ys)
        coef = 1.0
        for m in range(1, 8):
            coef *= -(gamma + m - 1.0) / m
            if m >= 2:
                acc += coef * ys**m
        out[small] = acc
    return out


@dataclass(frozen=True)
class PerturbationState:
    """(H, H_tau) at fixed tau with derived geometric factors."""

    tau: float
    grid: RadialGrid
    H: np.ndarray
    H_tau: np.ndarray
    theta: np.ndarray = field(repr=False)
    theta_r: np.ndarray = field(repr=False)
    theta_rr: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    J: np.ndarray = field(repr=False)
    J_minus_1: np.ndarray = field(repr=False)
    J_r: np.ndarray = field(repr=False)

    @property
    def min_J(self) -> float:
        return float(np.min(self.J))


def make_state(grid: RadialGrid, tau: float, H: np.ndarray, H_tau: np.ndarray) -> PerturbationState:
    H = np.asarray(H, dtype=float)
    H_tau = np.asarray(H_tau, dtype=float)
    theta = H * grid.inv_r
    theta_r = grid.ddr(theta, "even")
    theta_rr = grid.ddr(theta_r, "odd")
    xi = 1.0 + theta
    jm1 = 3.0 * theta + 3.0 * theta**2 + theta**3 + xi**2 * grid.r * theta_r
    J = 1.0 + jm1
    if np.any(J <= 0.0):
        where = float(grid.r[int(np.argmin(J))])
        raise DegenerateFlowMapError(
            f"flow-map Jacobian non-positive (min {np.min(J):.3e} at r={where:.4f})", where=where)
    # exact identity: J_r = xi^2 (r theta_rr + 4 theta_r) + 2 xi r theta_r^2
    J_r = xi**2 * (grid.r * theta_rr + 4.0 * theta_r) + 2.0 * xi * grid.r * theta_r**2
    return PerturbationState(tau=float(tau), grid=grid, H=H, H_tau=H_tau,
                             theta=theta, theta_r=theta_r, theta_rr=theta_rr,
                             xi=xi, J=J, J_minus_1=jm1, J_r=J_r)


@dataclass(frozen=True)
class Remainders:
    """Pointwise nonlinear remainder terms of the perturbation equation."""

    R1: np.ndarray
    R2: np.ndarray
    R2a: np.ndarray
    R2b: np.ndarray
    R3: np.ndarray


def compute_remainders(state: PerturbationState, profile) -> Remainders:
    """Quadratic-and-higher remainders; R2 = R2a + R2b exactly.

    R3 uses the regularized form of dJ/dr - xi^2 (r theta_rr + 4 theta_r),
    which equals 2 xi theta_r^2 r identically, so no second derivatives of
    theta enter it.
    """
    grid = state.grid
    if np.any(state.J <= 0.0):
        where = float(grid.r[int(np.argmin(state.J))])
        raise DegenerateFlowMapError("flow-map Jacobian non-positive", where=where)
    g = profile.gamma
    r = grid.r
    theta, theta_r, xi = state.theta, state.theta_r, state.xi
    y = state.J_minus_1
    rho = profile.rho_deriv(0)
    d = profile.d_deriv(0)
    Jpow = (1.0 + y) ** (-(g + 1.0))

    R1 = -2.0 * g * rho ** (g - 1.0) * d * xi**3 * Jpow * theta_r**2
    DrH = Dr_values(grid, state.H, "odd")  # equals r theta_r + 3 theta
    jm1_pow = powm1(y, -(g + 1.0))  # J^(-gamma-1) - 1
    bracket = pow_plus_linear(y, g) + g * jm1_pow * xi**2 * DrH
    R2a = -xi**2 * bracket
    R2b = -g * xi**2 * (3.0 * theta**2 + 2.0 * theta**3)
    R3 = (r * xi**2 * g * jm1_pow * (2.0 * xi * theta_r**2 * r)
          - 2.0 * r * g * xi**3 * jm1_pow * theta_r * DrH
          - (xi**2 + 2.0 * r * xi * theta_r) * bracket)
    return Remainders(R1=R1, R2=R2a + R2b, R2a=R2a, R2b=R2b, R3=R3)


@dataclass
class AprioriMonitor:
    """Running maxima of the four smallness bounds along a trajectory."""

    sn_max: float = 0.0
    j_dev_max: float = 0.0
    dth_max: float = 0.0
    d2th_max: float = 0.0
    limit: float = 1.0 / 3.0

    def update(self, state: PerturbationState, sn_value: float | None = None) -> str | None:
        """Fold in one state; returns the name of the first violated bound, if any."""
        self.j_dev_max = max(self.j_dev_max, float(np.max(np.abs(state.J_minus_1))))
        self.dth_max = max(self.dth_max, float(np.max(np.abs(state.theta_r))))
        self.d2th_max = max(self.d2th_max, float(np.max(np.abs(state.theta_rr))))
        if sn_value is not None:
            self.sn_max = max(self.sn_max, float(sn_value))
        if self.sn_max >= self.limit:
            return "sn_bound"
        if self.j_dev_max >= self.limit:
            return "j_bound"
        if self.dth_max >= self.limit:
            return "dth_bound"
        if self.d2th_max >= self.limit:
            return "d2th_bound"
        return None

    @property
    def sn_bound(self) -> bool:
        return self.sn_max < self.limit

    @property
    def j_bound(self) -> bool:
        return self.j_dev_max < self.limit

    @property
    def dth_bound(self) -> bool:
        return self.dth_max < self.limit

    @property
    def d2th_bound(self) -> bool:
        return self.d2th_max < self.limit

    def to_dict(self) -> dict:
        return {
            "sn_bound": self.sn_bound, "sn_max": self.sn_max,
            "j_bound": self.j_bound, "j_dev_max": self.j_dev_max,
            "dth_bound": self.dth_bound, "dth_max": self.dth_max,
            "d2th_bound": self.d2th_bound, "d2th_max": self.d2th_max,
        }


@dataclass
class Trajectory:
    """Sampled states of one evolution run, immutable once emitted."""

    states: list[PerturbationState]
    sn_series: list[float]
    monitor: AprioriMonitor
    reports: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def taus(self) -> np.ndarray:
        return np.array([s.tau for s in self.states])

    def checkpoints_csv(self) -> str:
        lines = ["tau,r,H,H_tau"]
        for s in self.states:
            for r, hv, vv in zip(s.grid.r, s.H, s.H_tau):
                lines.append(f"{s.tau:.17g},{r:.17g},{hv:.17g},{vv:.17g}")
        return "\n".join(lines) + "\n"
