"""Evolution of the perturbation equation in rescaled time.

The second-order equation for H = r*(chi/a - 1),

    a^(3g-3) H_tt + a^(3g-4) a_t H_t
        = gamma * (xi^4 / J^(g+1)) L0 H + H (1 + H/r) - r R1 - r R2,

is advanced as a first-order system (H, H_tau) with classical RK4 under a
CFL restriction tied to the degenerate sound speed.  The elliptic operator
L0 is applied in expanded form (calculus.lk_values), whose first-order
coefficient equals -r by the background balance relation, so the affine
state H = 0 is an exact fixed point of the discrete right-hand side.

The local-existence iteration evolves the once-differentiated equation for
h = D_r H with coefficients frozen at the previous iterate and reconstructs
H by radial integration; it provides an independent construction of the
same solution near tau = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sym

from . import diagnostics
from .background import AffineMotion, BackgroundProfile
from .calculus import (Di_values, Dr_values, RadialGrid, dr_values, lk_values,
                       lk_star_values, qij_exact, weighted_norm_values)
from .errors import (AprioriViolatedError, BlowUpDetectedError,
                     InvalidParameterError, IterationDivergedError,
                     StepRejectedError)
from .state import (AprioriMonitor, PerturbationState, Trajectory,
                    compute_remainders, make_state)

BLOWUP_JACOBIAN_FLOOR = 1e-6


@dataclass(frozen=True)
class SolveControls:
    """Knobs for solve(); defaults follow the desk-scale conventions."""

    cfl: float = 0.4
    dtau_max: float = 0.05
    n_samples: int = 81
    N: int | None = None          # order of the smallness monitor, None disables
    enforce_apriori: bool = True
    store_reports: bool = False
    linearize: bool = False
    source: object = None         # callable(tau, r) manufactured forcing
    eps: float | None = None
    lam: float | None = None


def rhs_H(state: PerturbationState, motion: AffineMotion, profile: BackgroundProfile,
          *, linearize: bool = False, source=None) -> np.ndarray:
    """Value of H_tautau for the current state.

    With linearize=True the coefficient xi^4/J^(g+1) is frozen at 1, the
    remainders are dropped and H(1+H/r) becomes H (the linearization at the
    affine fixed point).  A source callable(tau, r) adds a manufactured
    forcing in equation form.
    """
    g = profile.gamma
    grid = state.grid
    a = float(motion.a_of_tau(state.tau))
    a_tau = float(motion.a_tau_of_tau(state.tau))
    bracket = -(a ** (3.0 * g - 4.0)) * a_tau * state.H_tau
    if linearize:
        bracket = bracket + g * lk_values(grid, profile, 0, state.H) + state.H
    else:
        rem = compute_remainders(state, profile)
        coef = state.xi**4 * state.J ** (-(g + 1.0))
        bracket = (bracket
                   + g * coef * lk_values(grid, profile, 0, state.H)
                   + state.H * state.xi
                   - grid.r * rem.R1 - grid.r * rem.R2)
    if source is not None:
        bracket = bracket + source(state.tau, grid.r)
    return a ** (3.0 - 3.0 * g) * bracket


def cfl_dtau(state: PerturbationState, motion: AffineMotion, profile: BackgroundProfile,
             cfl: float = 0.4) -> float:
    """CFL-limited step from the degenerate wave speed of the H equation."""
    g = profile.gamma
    a = float(motion.a_of_tau(state.tau))
    _, beta = profile.lk_cached(0)
    c2 = g * a ** (3.0 - 3.0 * g) * float(
        np.max(beta * state.xi**4 * state.J ** (-(g + 1.0))))
    return cfl * state.grid.h / np.sqrt(max(c2, 1e-300))


def _stage(grid, tau, H, V):
    return make_state(grid, tau, H, V)


def _rk4_step(state: PerturbationState, motion, profile, dtau: float,
              *, linearize=False, source=None) -> PerturbationState:
    grid = state.grid
    tau, H, V = state.tau, state.H, state.H_tau

    def f(s):
        return s.H_tau, rhs_H(s, motion, profile, linearize=linearize, source=source)

    k1h, k1v = f(state)
    s2 = _stage(grid, tau + 0.5 * dtau, H + 0.5 * dtau * k1h, V + 0.5 * dtau * k1v)
    k2h, k2v = f(s2)
    s3 = _stage(grid, tau + 0.5 * dtau, H + 0.5 * dtau * k2h, V + 0.5 * dtau * k2v)
    k3h, k3v = f(s3)
    s4 = _stage(grid, tau + dtau, H + dtau * k3h, V + dtau * k3v)
    k4h, k4v = f(s4)
    H_new = H + (dtau / 6.0) * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
    V_new = V + (dtau / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    new = make_state(grid, tau + dtau, H_new, V_new)
    _check_finite(new)
    return new


def _check_finite(state: PerturbationState):
    if not (np.all(np.isfinite(state.H)) and np.all(np.isfinite(state.H_tau))):
        bad = np.where(~np.isfinite(state.H) | ~np.isfinite(state.H_tau))[0]
        where = float(state.grid.r[bad[0]]) if bad.size else None
        raise BlowUpDetectedError("non-finite value in state", tau=state.tau, where=where)
    if state.min_J < BLOWUP_JACOBIAN_FLOOR:
        where = float(state.grid.r[int(np.argmin(state.J))])
        raise BlowUpDetectedError(
            f"flow-map Jacobian below floor ({state.min_J:.3e})", tau=state.tau, where=where)


def step(state: PerturbationState, motion: AffineMotion, profile: BackgroundProfile,
         dtau: float, cfl: float = 0.4, *, linearize: bool = False,
         source=None) -> PerturbationState:
    """Single RK4 step with an explicit CFL guard."""
    limit = cfl_dtau(state, motion, profile, cfl)
    if dtau > limit * (1.0 + 1e-9):
        raise StepRejectedError(
            f"dtau={dtau:.3e} exceeds CFL limit {limit:.3e} at tau={state.tau:.4f}")
    return _rk4_step(state, motion, profile, dtau, linearize=linearize, source=source)


def solve(initial: PerturbationState, motion: AffineMotion, profile: BackgroundProfile,
          tau_final: float, controls: SolveControls | None = None) -> Trajectory:
    """March the perturbation to tau_final, sampling states on a uniform cadence.

    Raises AprioriViolatedError as soon as a sampled state breaks one of the
    four smallness bounds (the partial trajectory rides on the exception),
    and BlowUpDetectedError on non-finite values or a collapsing Jacobian.
    """
    c = controls or SolveControls()
    if tau_final <= 0.0:
        raise InvalidParameterError("tau_final must be positive")
    if tau_final > motion.tau_max * (1.0 + 1e-12):
        raise InvalidParameterError(
            f"tau_final={tau_final} beyond integrated motion range {motion.tau_max:.4g}")
    sample_taus = np.linspace(0.0, tau_final, c.n_samples)
    monitor = AprioriMonitor()
    traj = Trajectory(states=[], sn_series=[], monitor=monitor,
                      meta={"eps": c.eps, "lam": c.lam, "tau_final": tau_final})

    sn_running = 0.0

    def record(s: PerturbationState):
        nonlocal sn_running
        sn_val = None
        if c.N is not None:
            sn_running = max(sn_running, diagnostics.sn_summand(s, motion, profile, c.N))
            sn_val = sn_running
        traj.states.append(s)
        traj.sn_series.append(sn_running if c.N is not None else float("nan"))
        if c.store_reports:
            traj.reports.append(diagnostics.compute_energy_identity_terms(
                s, motion, profile, c.N if c.N is not None else 0))
        violated = monitor.update(s, sn_val)
        if violated is not None and c.enforce_apriori:
            err = AprioriViolatedError(violated, s.tau, getattr(monitor, {
                "sn_bound": "sn_max", "j_bound": "j_dev_max",
                "dth_bound": "dth_max", "d2th_bound": "d2th_max"}[violated]))
            err.trajectory = traj
            raise err

    state = initial
    record(state)
    for target in sample_taus[1:]:
        while state.tau < target - 1e-13 * max(1.0, target):
            dtau = min(cfl_dtau(state, motion, profile, c.cfl),
                       c.dtau_max, target - state.tau)
            state = _rk4_step(state, motion, profile, dtau,
                              linearize=c.linearize, source=c.source)
        record(state)
    return traj


# -- initial data ---------------------------------------------------------------

def initial_data(grid: RadialGrid, profile: BackgroundProfile, motion: AffineMotion,
                 spec: dict) -> tuple[np.ndarray, np.ndarray, dict]:
    """Build (H0, H_tau0) from a family descriptor.

    Families:
      poly-even:  H = s * r * p(r), p(r) = sum_k c_k r^(2k) from key "p"
                  (velocity likewise from key "q"); s chosen so the order-N
                  smallness functional at tau = 0 equals eps.
      amplitude:  H = amp * r * p(r) with the raw amplitude from key "amp".
    """
    family = spec.get("family", "poly-even")
    p = np.asarray(spec.get("p", [1.0, -1.0]), dtype=float)
    q = np.asarray(spec.get("q", []), dtype=float)
    r = grid.r
    u = r * _even_poly(p, r)
    v = r * _even_poly(q, r) if q.size else np.zeros_like(r)
    if family == "amplitude":
        amp = float(spec["amp"])
        meta = {"family": family, "amp": amp}
        return amp * u, amp * v, meta
    if family != "poly-even":
        raise InvalidParameterError(f"unknown initial-data family {family!r}")
    eps = float(spec.get("eps", 1e-3))
    N = int(spec.get("N", 2))
    # probe at a small amplitude so the probe state is safely nondegenerate;
    # the functional is exactly quadratic in the fields
    probe_amp = 1e-2
    base = make_state(grid, 0.0, probe_amp * u, probe_amp * v)
    sn_base = diagnostics.sn_summand(base, motion, profile, N)
    scale = probe_amp * np.sqrt(eps / sn_base)
    H0, Ht0 = scale * u, scale * v
    lam_actual = weighted_norm_values(grid, profile, 0, H0)
    meta = {"family": family, "eps": eps, "N": N, "scale": float(scale),
            "sn0": eps, "H0_norm0_sq": float(lam_actual)}
    return H0, Ht0, meta


def _even_poly(coeffs: np.ndarray, r: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r)
    for k, c in enumerate(coeffs):
        out = out + c * r ** (2 * k)
    return out


# -- local-existence iteration ----------------------------------------------------

@dataclass
class LwpResult:
    """Outcome of the frozen-coefficient iteration."""

    iterates: list          # list of (H table, V table) at half-steps
    taus: np.ndarray        # half-step times
    diffs: list[float]      # successive difference sizes
    ratios: list[float]
    final_state: PerturbationState
    meta: dict = field(default_factory=dict)


def lwp_iterate(H0: np.ndarray, Ht0: np.ndarray, motion: AffineMotion,
                profile: BackgroundProfile, T: float = 0.25, j_max: int = 8,
                cfl: float = 0.4, include_R3: bool = False,
                stop_tol: float = 1e-12) -> LwpResult:
    """Iterate the linearized equation for h = D_r H with frozen coefficients.

    Each pass solves the once-differentiated equation for the new h with
    the nonlinearities evaluated on the previous iterate, then rebuilds
    H(r) = r^-2 int_0^r h s^2 ds.  Reports successive differences measured
    in the order-2 smallness functional of the difference trajectory.
    """
    g = profile.gamma
    grid = profile.grid
    if T <= 0.0 or T > motion.tau_max:
        raise InvalidParameterError("T must lie inside the motion's range")
    state0 = make_state(grid, 0.0, H0, Ht0)
    dt0 = cfl_dtau(state0, motion, profile, cfl)
    M = max(int(np.ceil(T / (0.9 * dt0))), 4)
    dtau = T / M
    taus = np.linspace(0.0, T, 2 * M + 1)  # half-step times

    h0 = Dr_values(grid, H0)
    hv0 = Dr_values(grid, Ht0)
    q10 = qij_exact(profile, 1)[0]

    def freeze(H_tab, V_tab):
        """Per half-step: coefficient e, and the frozen right-hand side."""
        coefs, rhs_frozen = [], []
        for m, tau in enumerate(taus):
            s = make_state(grid, tau, H_tab[m], V_tab[m])
            rem = compute_remainders(s, profile)
            e = s.xi**4 * s.J ** (-(g + 1.0))
            de = grid.ddr(e, "even")
            l0 = lk_values(grid, profile, 0, s.H)
            c1 = e * q10 * Dr_values(grid, s.H, "odd")
            nl = grid.r * (rem.R1 + rem.R2 + (rem.R3 if include_R3 else 0.0))
            rhs = (Di_values(grid, 1, s.H**2 * grid.inv_r)
                   - Di_values(grid, 1, nl)
                   + g * c1 + g * de * l0)
            coefs.append(e)
            rhs_frozen.append(rhs)
        return coefs, rhs_frozen

    def advance(coefs, rhs_frozen):
        """RK4 on the linear system for (h, h_tau) with tabulated coefficients.

        Half-step slots of the output tables come from the cubic Hermite
        dense output of the step, fourth-order like the stepper itself.
        """
        h = h0.copy()
        v = hv0.copy()
        H_tab = np.empty((2 * M + 1, grid.n))
        V_tab = np.empty((2 * M + 1, grid.n))

        def f(m_half, h_cur, v_cur):
            tau = taus[m_half]
            a = float(motion.a_of_tau(tau))
            a_tau = float(motion.a_tau_of_tau(tau))
            br = (-(a ** (3.0 * g - 4.0)) * a_tau * v_cur
                  + g * coefs[m_half] * lk_star_values(grid, profile, 1, h_cur)
                  + h_cur + rhs_frozen[m_half])
            return v_cur, a ** (3.0 - 3.0 * g) * br

        H_tab[0], V_tab[0] = h, v
        for k in range(M):
            m = 2 * k
            k1h, k1v = f(m, h, v)
            k2h, k2v = f(m + 1, h + 0.5 * dtau * k1h, v + 0.5 * dtau * k1v)
            k3h, k3v = f(m + 1, h + 0.5 * dtau * k2h, v + 0.5 * dtau * k2v)
            k4h, k4v = f(m + 2, h + dtau * k3h, v + dtau * k3v)
            h_new = h + (dtau / 6.0) * (k1h + 2 * k2h + 2 * k3h + k4h)
            v_new = v + (dtau / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            a1h, a1v = k1h, k1v
            a2h, a2v = f(m + 2, h_new, v_new)
            H_tab[m + 1] = 0.5 * (h + h_new) + 0.125 * dtau * (a1h - a2h)
            V_tab[m + 1] = 0.5 * (v + v_new) + 0.125 * dtau * (a1v - a2v)
            H_tab[m + 2], V_tab[m + 2] = h_new, v_new
            h, v = h_new, v_new
        return H_tab, V_tab

    def reconstruct(tab):
        out = np.empty_like(tab)
        for m in range(tab.shape[0]):
            out[m] = grid.cumint_r2_from_zero(tab[m]) * grid.inv_r**2
        return out

    # iterate 1: frozen at the initial data for all tau
    H_prev = np.tile(H0, (2 * M + 1, 1))
    V_prev = np.tile(Ht0, (2 * M + 1, 1))
    iterates = [(H_prev, V_prev)]
    diffs: list[float] = []
    ratios: list[float] = []
    bad_streak = 0
    for _ in range(j_max):
        coefs, rhs_frozen = freeze(H_prev, V_prev)
        h_tab, hv_tab = advance(coefs, rhs_frozen)
        H_new = reconstruct(h_tab)
        V_new = reconstruct(hv_tab)
        diff = _table_diff(grid, profile, motion, taus, H_new - H_prev, V_new - V_prev)
        diffs.append(diff)
        if len(diffs) >= 2:
            ratio = diffs[-1] / max(diffs[-2], 1e-300)
            ratios.append(ratio)
            bad_streak = bad_streak + 1 if ratio >= 1.0 else 0
            if bad_streak >= 3:
                raise IterationDivergedError(
                    f"difference ratio >= 1 for 3 consecutive iterates: {ratios[-3:]}")
        iterates.append((H_new, V_new))
        H_prev, V_prev = H_new, V_new
        if diff < stop_tol:
            break
    final_state = make_state(grid, T, H_prev[-1], V_prev[-1])
    return LwpResult(iterates=iterates, taus=taus, diffs=diffs, ratios=ratios,
                     final_state=final_state,
                     meta={"M": M, "dtau": dtau, "include_R3": include_R3})


def _table_diff(grid, profile, motion, taus, H_tab, V_tab) -> float:
    """Norm-scale size of a difference trajectory: the square root of the
    order-2 smallness functional, evaluated at full steps."""
    best = 0.0
    for m in range(0, H_tab.shape[0], 2):
        s = make_state(grid, taus[m], H_tab[m], V_tab[m])
        best = max(best, diagnostics.sn_summand(s, motion, profile, 2))
    return float(np.sqrt(best))


# -- manufactured solutions --------------------------------------------------------

def manufactured_solution(profile: BackgroundProfile, motion: AffineMotion, eps: float):
    """Forcing that makes H*(tau, r) = eps e^-tau r (1 - r^2) an exact solution.

    Returns (H_of_tau, Htau_of_tau, source) where source(tau, r) enters
    rhs_H in equation form.  The spatial part is differentiated symbolically,
    so the forcing is exact and the scheme's residual is purely discretization.
    Requires a polynomial density profile.
    """
    if profile.phi_spec["kind"] != "poly":
        raise InvalidParameterError("manufactured forcing needs a polynomial profile")
    g = profile.gamma
    grid = profile.grid
    s_sym, r = sym.symbols("s r", positive=True)
    coeffs = profile.phi_spec["coeffs"]
    phi = sum(c * r**i for i, c in enumerate(coeffs))
    dnum = sum(c * (1 - r ** (i + 2)) / sym.Integer(i + 2) for i, c in enumerate(coeffs))
    d_expr = dnum / phi**g

    H = s_sym * r * (1 - r**2)
    theta = H / r
    xi = 1 + theta
    theta_r = sym.diff(theta, r)
    J = xi**2 * (xi + r * theta_r)
    DrH = sym.diff(H, r) + 2 * H / r
    L0H = sym.diff(phi**g * d_expr * DrH, r) / phi
    coef = xi**4 / J**(g + 1)
    R1 = -2 * g * phi**(g - 1) * d_expr * xi**3 / (J**(g + 1) * r**2) * (r * theta_r)**2
    R2 = (-xi**2 * ((J**(-g) - 1) + g * (J - 1)
                    + g * (J**(-g - 1) - 1) * xi**2 * (r * theta_r + 3 * theta))
          - g * xi**2 * (3 * theta**2 + 2 * theta**3))
    G = g * coef * L0H + H * (1 + theta) - r * R1 - r * R2
    G_fn = sym.lambdify((s_sym, r), G, "numpy")

    shape = grid.r * (1.0 - grid.r**2)

    def H_of_tau(tau: float) -> np.ndarray:
        return eps * np.exp(-tau) * shape

    def Htau_of_tau(tau: float) -> np.ndarray:
        return -eps * np.exp(-tau) * shape

    def source(tau: float, r_nodes: np.ndarray) -> np.ndarray:
        amp = eps * np.exp(-tau)
        a = float(motion.a_of_tau(tau))
        a_tau = float(motion.a_tau_of_tau(tau))
        time_part = (a ** (3.0 * g - 3.0) - a ** (3.0 * g - 4.0) * a_tau) * amp * (
            r_nodes * (1.0 - r_nodes**2))
        return time_part - G_fn(amp, r_nodes)

    return H_of_tau, Htau_of_tau, source
