"""Expanding affine background: scaling ODE, time rescaling, density profile.

The background motion is the scalar solution of a_tt = a^(2-3*gamma) with
a(0) > 0.  We integrate in the rescaled time tau defined by dtau/dt = 1/a,
where the state (a, a_tau, t) obeys

    da/dtau     = a_tau
    da_tau/dtau = a_tau^2 / a + a^(4-3*gamma)
    dt/dtau     = a,

which keeps samples uniformly spaced in tau even when t grows exponentially.
The late-time expansion rate a_1 = lim a_tau/a equals lim a_t, which the
conserved energy (1/2) a_t^2 + a^(3-3*gamma)/(3*gamma-3) gives in closed form;
a tail fit of a_tau/a is retained as a consistency diagnostic.

The density profile rho_bar = phi must be positive with phi'(0) = 0.  The
entropy weight

    d(r) = (int_r^1 s phi(s) ds) / phi(r)^gamma

vanishes at r = 1, which is what lets the vacuum boundary carry positive
density.  Polynomial phi gives d and all its derivatives in closed form
(the numerator is an exact antiderivative, so d(1) = 0 holds identically);
tabulated phi is lifted to a Chebyshev interpolant and handled spectrally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import sympy as sym
from numpy.polynomial import chebyshev as cheb
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .calculus import GridFunction, RadialGrid
from .errors import (DegenerateFlowMapError, IntegrationFailureError,
                     InvalidParameterError, InvalidProfileError)


@dataclass(frozen=True)
class GammaExponents:
    """Adiabatic-constant dependent time-weight exponents."""

    gamma: float
    d_exp: float
    b_exp: float


def gamma_exponents(gamma: float) -> GammaExponents:
    """Time-weight exponents: d = 3*gamma-3 up to gamma = 5/3, then 2; b = d+3-3*gamma."""
    if not gamma > 1.0:
        raise InvalidParameterError(f"gamma must exceed 1, got {gamma}")
    if gamma <= 5.0 / 3.0:
        d_exp = 3.0 * gamma - 3.0
    else:
        d_exp = 2.0
    return GammaExponents(gamma=gamma, d_exp=d_exp, b_exp=d_exp + 3.0 - 3.0 * gamma)


@dataclass(frozen=True)
class AffineMotion:
    """Background scaling factor with its time reparametrization.

    samples columns: t, tau, a, a_t, a_tau.  Interpolants are cubic Hermite
    splines in tau built with exact derivative data, so evaluation between
    samples stays at the integrator's accuracy.
    """

    gamma: float
    a0_init: float
    a1_init: float
    samples: np.ndarray
    a1_limit: float
    a0_rate: float
    a1_tail: float
    tail_slope: float
    tol: float
    _a_spline: CubicHermiteSpline = field(repr=False)
    _atau_spline: CubicHermiteSpline = field(repr=False)
    _t_spline: CubicHermiteSpline = field(repr=False)
    _tau_of_t_spline: CubicHermiteSpline = field(repr=False)

    @property
    def tau_max(self) -> float:
        return float(self.samples[-1, 1])

    @property
    def t_max(self) -> float:
        return float(self.samples[-1, 0])

    def a_of_tau(self, tau) -> float | np.ndarray:
        return self._a_spline(tau)

    def a_tau_of_tau(self, tau) -> float | np.ndarray:
        return self._atau_spline(tau)

    def t_of_tau(self, tau) -> float | np.ndarray:
        return self._t_spline(tau)

    def tau_of_t(self, t) -> float | np.ndarray:
        return self._tau_of_t_spline(t)

    def a_of_t(self, t) -> float | np.ndarray:
        return self._a_spline(self.tau_of_t(t))

    def a_t_of_t(self, t) -> float | np.ndarray:
        tau = self.tau_of_t(t)
        return self._atau_spline(tau) / self._a_spline(tau)

    def to_csv(self) -> str:
        lines = ["t,tau,a,a_t,a_tau"]
        for row in self.samples:
            lines.append(",".join(f"{x:.17g}" for x in row))
        return "\n".join(lines) + "\n"


def energy_expansion_rate(gamma: float, a_init: float, adot_init: float) -> float:
    """Closed-form late-time rate: a_1 = sqrt(a'(0)^2 + 2 a(0)^(3-3g) / (3g-3))."""
    return float(np.sqrt(adot_init**2 + 2.0 * a_init ** (3.0 - 3.0 * gamma) / (3.0 * gamma - 3.0)))


def integrate_affine(gamma: float, a_init: float, adot_init: float,
                     t_final: float | None = None, tol: float = 1e-10,
                     tau_final: float | None = None) -> AffineMotion:
    """Integrate the background scaling ODE up to t_final (or tau_final).

    Integration runs in tau with an embedded RK45 pair at relative tolerance
    tol; samples are emitted uniformly in tau, densely enough that a centered
    second difference of a_t reproduces a^(2-3*gamma) to within ~10*tol.
    """
    if not gamma > 1.0:
        raise InvalidParameterError(f"gamma must exceed 1, got {gamma}")
    if a_init <= 0.0:
        raise InvalidParameterError(f"a(0) must be positive, got {a_init}")
    if tol <= 0.0:
        raise InvalidParameterError("tol must be positive")
    if t_final is None and tau_final is None:
        raise InvalidParameterError("one of t_final, tau_final is required")

    def rhs(tau, y):
        a, atau, t = y
        return [atau, atau**2 / a + a ** (4.0 - 3.0 * gamma), a]

    if tau_final is None:
        # tau <= t / a_min; the conserved energy bounds the turning radius
        energy = 0.5 * adot_init**2 + a_init ** (3.0 - 3.0 * gamma) / (3.0 * gamma - 3.0)
        a_min = min(a_init, ((3.0 * gamma - 3.0) * energy) ** (1.0 / (3.0 - 3.0 * gamma)))
        tau_cap = t_final / a_min + 2.0
    else:
        tau_cap = tau_final

    events = None
    if t_final is not None:
        def hit_t(tau, y):
            return y[2] - t_final
        hit_t.terminal = True
        hit_t.direction = 1.0
        events = hit_t

    y0 = [a_init, adot_init * a_init, 0.0]
    sol = solve_ivp(rhs, (0.0, tau_cap), y0, method="RK45",
                    rtol=tol, atol=tol * 1e-3, dense_output=True, events=events)
    if not sol.success:
        raise IntegrationFailureError(f"background ODE integration failed: {sol.message}")
    tau_end = float(sol.t[-1])
    if t_final is not None and (not sol.t_events[0].size):
        raise IntegrationFailureError("integration ended before reaching t_final")

    # sample density: centered second differences of a_t carry error
    # ~ (a dtau)^2 |a_tttt| <= dtau^2 near t=0, so dtau ~ sqrt(10*tol)
    dtau = min(1e-3, np.sqrt(10.0 * tol))
    m = max(int(np.ceil(tau_end / dtau)), 400)
    m = min(m, 400_000)
    taus = np.linspace(0.0, tau_end, m + 1)
    a, atau, t = sol.sol(taus)
    if np.any(a <= 0.0):
        raise IntegrationFailureError("scaling factor reached a non-positive value")
    a_t = atau / a

    a1 = energy_expansion_rate(gamma, a_init, adot_init)
    exps = gamma_exponents(gamma)
    # tail-fit diagnostic over the final 10% of samples
    k0 = int(0.9 * len(taus))
    coef = np.polyfit(taus[k0:], a_t[k0:], 1)
    a1_tail, tail_slope = float(np.polyval(coef, taus[k0:].mean())), float(coef[0])

    samples = np.column_stack([t, taus, a, a_t, atau])
    datau = atau**2 / a + a ** (4.0 - 3.0 * gamma)
    return AffineMotion(
        gamma=gamma, a0_init=a_init, a1_init=adot_init, samples=samples,
        a1_limit=a1, a0_rate=0.5 * exps.d_exp * a1, a1_tail=a1_tail,
        tail_slope=tail_slope, tol=tol,
        _a_spline=CubicHermiteSpline(taus, a, atau),
        _atau_spline=CubicHermiteSpline(taus, atau, datau),
        _t_spline=CubicHermiteSpline(taus, t, a),
        _tau_of_t_spline=CubicHermiteSpline(t, taus, 1.0 / a),
    )


# -- density profile and entropy weight ---------------------------------------

FLAT_CENTER_TOL = 1e-9


@dataclass(frozen=True)
class BackgroundProfile:
    """Density profile rho_bar = phi with the entropy weight d and derivatives.

    Nodal derivative stacks go up to k_derivs; rho_fns/d_fns evaluate the
    closed-form (or Chebyshev) representations at arbitrary points in [0,1].
    """

    grid: RadialGrid
    gamma: float
    k_derivs: int
    phi_spec: dict
    _rho_stack: np.ndarray = field(repr=False)
    _d_stack: np.ndarray = field(repr=False)
    _rho_fns: tuple = field(repr=False)
    _d_fns: tuple = field(repr=False)
    _lk_cache: dict = field(default_factory=dict, repr=False)

    @property
    def rho_bar(self) -> GridFunction:
        return GridFunction(self.grid, self._rho_stack[0])

    @property
    def d_weight(self) -> GridFunction:
        return GridFunction(self.grid, self._d_stack[0])

    @property
    def rho_derivs(self) -> list[GridFunction]:
        return [GridFunction(self.grid, v) for v in self._rho_stack]

    @property
    def d_derivs(self) -> list[GridFunction]:
        return [GridFunction(self.grid, v) for v in self._d_stack]

    def rho_deriv(self, ell: int) -> np.ndarray:
        if ell > self.k_derivs:
            raise InvalidParameterError(
                f"profile built with k_derivs={self.k_derivs}, requested derivative {ell}")
        return self._rho_stack[ell]

    def d_deriv(self, ell: int) -> np.ndarray:
        if ell > self.k_derivs:
            raise InvalidParameterError(
                f"profile built with k_derivs={self.k_derivs}, requested derivative {ell}")
        return self._d_stack[ell]

    def eval_rho(self, r, ell: int = 0) -> np.ndarray:
        return self._rho_fns[ell](np.asarray(r, dtype=float))

    def eval_d(self, r, ell: int = 0) -> np.ndarray:
        return self._d_fns[ell](np.asarray(r, dtype=float))

    def lk_cached(self, k: int):
        from .calculus import lk_coefficients
        hit = self._lk_cache.get(k)
        if hit is None:
            hit = lk_coefficients(self, k)
            self._lk_cache[k] = hit
        return hit

    def balance_residual(self) -> GridFunction:
        """Discrete residual of rho*r + d/dr(rho^gamma d); zero up to stencil error."""
        g = self.grid
        w = self._rho_stack[0] ** self.gamma * self._d_stack[0]
        return GridFunction(g, self._rho_stack[0] * g.r + g.ddr(w))

    def boundary_slope(self, h0: float = 1e-2, levels: int = 3) -> float:
        """One-sided slope of rho^(gamma-1) d at r = 1 by Richardson extrapolation."""
        def gfun(r):
            return self.eval_rho(r) ** (self.gamma - 1.0) * self.eval_d(r)
        table = []
        for k in range(levels):
            h = h0 / 2**k
            table.append((gfun(1.0) - gfun(1.0 - h)) / h)
        est = np.array(table, dtype=float)
        for k in range(1, levels):
            est = (2**k * est[1:] - est[:-1]) / (2**k - 1)
        return float(est[0])


def build_profile(phi_spec, gamma: float, grid: RadialGrid, k_derivs: int = 6) -> BackgroundProfile:
    """Construct the background profile and entropy weight on a grid.

    phi_spec is {"kind": "poly", "coeffs": [...]} for phi(r) = sum c_i r^i or
    {"kind": "table", "r": [...], "phi": [...]} for sampled profiles.
    """
    if not gamma > 1.0:
        raise InvalidParameterError(f"gamma must exceed 1, got {gamma}")
    spec = _normalize_spec(phi_spec)
    if spec["kind"] == "poly":
        rho_fns, d_fns = _poly_profile_fns(spec["coeffs"], gamma, k_derivs)
    else:
        rho_fns, d_fns = _cheb_profile_fns(spec["r"], spec["phi"], gamma, k_derivs)

    probe = np.linspace(0.0, 1.0, 2001)
    phi_probe = rho_fns[0](probe)
    if np.any(phi_probe <= 0.0):
        raise InvalidProfileError("phi must be positive on [0,1]")
    slope0 = float(rho_fns[1](np.array([0.0]))[0])
    if abs(slope0) > FLAT_CENTER_TOL * max(1.0, float(np.max(np.abs(phi_probe)))):
        raise InvalidProfileError(f"phi'(0) = {slope0:.3e} violates the flat-center condition")

    rho_stack = np.array([rho_fns[ell](grid.r) for ell in range(k_derivs + 1)])
    d_stack = np.array([d_fns[ell](grid.r) for ell in range(k_derivs + 1)])
    return BackgroundProfile(grid=grid, gamma=gamma, k_derivs=k_derivs, phi_spec=spec,
                             _rho_stack=rho_stack, _d_stack=d_stack,
                             _rho_fns=tuple(rho_fns), _d_fns=tuple(d_fns))


def _normalize_spec(phi_spec) -> dict:
    if isinstance(phi_spec, dict):
        kind = phi_spec.get("kind")
        if kind == "poly":
            coeffs = [float(c) for c in phi_spec.get("coeffs", [])]
            if not coeffs:
                raise InvalidProfileError("polynomial profile needs coefficients")
            return {"kind": "poly", "coeffs": coeffs}
        if kind == "table":
            r = np.asarray(phi_spec["r"], dtype=float)
            phi = np.asarray(phi_spec["phi"], dtype=float)
            if r.shape != phi.shape or r.ndim != 1 or len(r) < 8:
                raise InvalidProfileError("tabulated profile needs matching r/phi arrays (>= 8 points)")
            return {"kind": "table", "r": r.tolist(), "phi": phi.tolist()}
        raise InvalidProfileError(f"unknown profile kind {kind!r}")
    if isinstance(phi_spec, (list, tuple)):
        return _normalize_spec({"kind": "poly", "coeffs": list(phi_spec)})
    raise InvalidProfileError(f"cannot interpret profile descriptor {phi_spec!r}")


@lru_cache(maxsize=32)
def _poly_profile_lambdas(coeffs: tuple, gamma: float, k_derivs: int):
    r = sym.Symbol("r", nonnegative=True)
    phi = sum(sym.Rational(0) + c * r**i for i, c in enumerate(coeffs))
    # numerator int_r^1 s phi(s) ds written so it vanishes identically at r = 1
    numer = sum(c * (1 - r ** (i + 2)) / sym.Integer(i + 2) for i, c in enumerate(coeffs))
    d_expr = numer / phi**gamma
    rho_fns, d_fns = [], []
    rho_expr = phi
    for _ in range(k_derivs + 1):
        rho_fns.append(sym.lambdify(r, rho_expr, "numpy"))
        d_fns.append(sym.lambdify(r, d_expr, "numpy"))
        rho_expr = sym.diff(rho_expr, r)
        d_expr = sym.together(sym.diff(d_expr, r))
    return rho_fns, d_fns


def _poly_profile_fns(coeffs, gamma, k_derivs):
    rho_fns, d_fns = _poly_profile_lambdas(tuple(coeffs), float(gamma), int(k_derivs))
    return ([_vectorized(f) for f in rho_fns], [_vectorized(f) for f in d_fns])


def _vectorized(f):
    def wrapped(r):
        r = np.asarray(r, dtype=float)
        out = f(r)
        return np.broadcast_to(np.asarray(out, dtype=float), r.shape).copy()
    return wrapped


def _cheb_profile_fns(r_tab, phi_tab, gamma, k_derivs, degree: int = 48):
    r_tab = np.asarray(r_tab, dtype=float)
    phi_tab = np.asarray(phi_tab, dtype=float)
    if np.any(phi_tab <= 0.0):
        raise InvalidProfileError("tabulated phi must be positive")
    # map [0,1] -> [-1,1]; least-squares Chebyshev fit of phi and of phi^gamma
    deg = min(degree, len(r_tab) - 1)
    x = 2.0 * r_tab - 1.0
    c_phi = cheb.chebfit(x, phi_tab, deg)
    c_pg = cheb.chebfit(x, phi_tab**gamma, deg)
    # numerator series N with N' = -r phi and N(1) = 0 (antiderivative in x)
    c_rphi = cheb.chebmul(cheb.chebfit(x, r_tab, 1), c_phi)
    c_N = cheb.chebint(cheb.chebmul(c_rphi, [-1.0]), scl=0.5)  # d/dx = 2 d/dr
    c_N = c_N - cheb.chebval(1.0, c_N) * np.eye(len(c_N))[0]

    def series_fns(series):
        fns = []
        c = series
        scale = 1.0
        for _ in range(k_derivs + 1):
            fns.append(_cheb_eval_fn(c, scale))
            c = cheb.chebder(c)
            scale *= 2.0
        return fns

    rho_fns = series_fns(c_phi)
    pg_fns = series_fns(c_pg)
    N_fns = series_fns(c_N)

    # d = N / phi^gamma; derivative stacks via the quotient recursion
    def d_fn(ell):
        def f(r):
            r = np.asarray(r, dtype=float)
            N = [g(r) for g in N_fns[: ell + 1]]
            P = [g(r) for g in pg_fns[: ell + 1]]
            out = [N[0] / P[0]]
            for m in range(1, ell + 1):
                s = N[m] - sum(comb(m, j) * out[j] * P[m - j] for j in range(m))
                out.append(s / P[0])
            return out[ell]
        return f

    d_fns = [d_fn(ell) for ell in range(k_derivs + 1)]
    return rho_fns, d_fns


def _cheb_eval_fn(series, scale):
    def f(r):
        r = np.asarray(r, dtype=float)
        return scale * cheb.chebval(2.0 * r - 1.0, series)
    return f


# -- Eulerian view --------------------------------------------------------------

def eulerian_fields(motion: AffineMotion, profile: BackgroundProfile,
                    state=None, t: float | None = None):
    """Physical-space velocity, density and entropy along the motion.

    With a perturbation state the radial flow map is chi = a (1 + H/r);
    without one the affine map chi = a is used.  Returns GridFunctions
    (u, rho, S) sampled at the Lagrangian grid nodes.
    """
    grid = profile.grid
    if state is not None:
        tau = state.tau
        a = float(motion.a_of_tau(tau))
        a_tau = float(motion.a_tau_of_tau(tau))
        xi = state.xi
        chi = a * xi
        chi_t = (a_tau / a) * xi + state.H_tau / grid.r
        jac = chi**2 * (chi + a * state.theta_r * grid.r)
    else:
        if t is None:
            raise InvalidParameterError("eulerian_fields needs a state or a time t")
        if not 0.0 <= t <= motion.t_max * (1.0 + 1e-12):
            raise InvalidParameterError(f"t={t} outside integrated range [0, {motion.t_max:.6g}]")
        a = float(motion.a_of_t(t))
        a_t = float(motion.a_t_of_t(t))
        chi = np.full(grid.n, a)
        chi_t = np.full(grid.n, a_t)
        jac = np.full(grid.n, a**3)
    if np.any(jac <= 0.0):
        where = float(grid.r[int(np.argmin(jac))])
        raise DegenerateFlowMapError("Eulerian Jacobian non-positive", where=where)
    u = grid.r * chi_t
    rho = profile.rho_deriv(0) / jac
    entropy = np.log(profile.d_deriv(0))
    return (GridFunction(grid, u), GridFunction(grid, rho), GridFunction(grid, entropy))
