"""Radial grid on (0,1) and the differential-operator hierarchy used everywhere.

The grid is cell-centered, r_j = (j+1/2)/n, so no node sits at the coordinate
singularity r = 0 and none at the vacuum boundary r = 1.  First derivatives use
centered stencils of the requested order in the interior and one-sided stencils
near both edges.  Boundary closures carry two extra orders of accuracy: the
operator hierarchy composes d/dr several times, each composition of a rough
(row-dependent) truncation error costs one order, and the extra accuracy keeps
composed operators converging at the nominal interior order in the sup norm.

Operator naming:
    apply_dr      d/dr
    apply_Dr      r^-2 d/dr(r^2 .)  (spherical divergence, = d/dr + 2/r)
    apply_Di      alternating composition D_i: (d/dr D_r)^(i/2), odd orders
                  prefixed by one D_r; D_0 = identity
    apply_Dbar_i  Dbar_i = D_{i-1} d/dr for i >= 1
    apply_Lk      weighted elliptic operator, expanded so the entropy weight d
                  only ever multiplies (it vanishes at r = 1)
    apply_Lk_star adjoint-flavored variant with d/dr innermost
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import OrderTooHighError

# Operators compose reliably up to this order at desk-scale resolution;
# higher orders are available but only convergence trends are trusted.
MAX_VERIFIED_ORDER = 4
MAX_OPERATOR_ORDER = 8


def _lagrange_weights(x: np.ndarray, x0: float) -> np.ndarray:
    """Lagrange basis values at x0: f(x0) = sum w_i f(x_i) for the interpolant."""
    x = np.asarray(x, dtype=float)
    w = np.ones(len(x))
    for i in range(len(x)):
        for k in range(len(x)):
            if k != i:
                w[i] *= (x0 - x[k]) / (x[i] - x[k])
    return w


def fd_weights(x: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at x0 on nodes x.

    Fornberg's recursion; exact for polynomials of degree len(x)-1.
    """
    x = np.asarray(x, dtype=float)
    npts = len(x)
    w = np.zeros((m + 1, npts))
    c1 = 1.0
    c4 = x[0] - x0
    w[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    w[k, i] = c1 * (k * w[k - 1, i - 1] - c5 * w[k, i - 1]) / c2
                w[0, i] = -c1 * c5 * w[0, i - 1] / c2
            for k in range(mn, 0, -1):
                w[k, j] = ((x[i] - x0) * w[k, j] - k * w[k - 1, j]) / c3
            w[0, j] = (x[i] - x0) * w[0, j] / c3
        c1 = c2
    return w[m]


class RadialGrid:
    """Uniform cell-centered grid on (0,1) with r^2 dr quadrature.

    Quadrature uses midpoint cell weights plus one-sided endpoint-derivative
    corrections, giving O(h^4) for smooth integrands and the exact value 1/3
    for the unit function against r^2 dr.
    """

    def __init__(self, n: int, stencil_order: int = 2):
        if n < 16:
            raise ValueError(f"grid needs at least 16 cells, got {n}")
        if stencil_order not in (2, 4):
            raise ValueError(f"stencil_order must be 2 or 4, got {stencil_order}")
        self.n = int(n)
        self.stencil_order = int(stencil_order)
        self.h = 1.0 / n
        self.r = (np.arange(n) + 0.5) * self.h
        self.inv_r = 1.0 / self.r
        self._ddr = {p: self._build_ddr_matrix(p) for p in ("none", "odd", "even")}
        self._wq = self._build_quadrature()

    # -- construction -----------------------------------------------------

    def _build_ddr_matrix(self, parity: str) -> sp.csr_matrix:
        """Centered stencil at every row, ghosts closed by parity or extrapolation.

        A radial field that extends to a smooth field in 3-space is even or
        odd across r = 0; reflecting through the origin gives ghost weights
        of +-1, which never amplify grid-scale noise (essential for stable
        long-time composition in the evolution operators).  Fields without a
        declared parity, and every ghost beyond r = 1, use degree p+3
        polynomial extrapolation instead, which keeps the truncation-error
        field smooth so composed operators hold their interior order.
        """
        n, p, h = self.n, self.stencil_order, self.h
        half = p // 2
        offsets = np.arange(-half, half + 1)
        w_cent = fd_weights(offsets * h, 0.0, 1)
        q = p + 3  # extrapolation degree
        npts = q + 1
        A = np.zeros((n, n))
        sign = {"odd": -1.0, "even": 1.0}.get(parity)
        for j in range(n):
            for off, w in zip(offsets, w_cent):
                k = j + off
                if 0 <= k < n:
                    A[j, k] += w
                elif k < 0 and sign is not None:
                    A[j, -1 - k] += w * sign  # ghost at -(k+1/2)h mirrors node -1-k
                else:
                    x_ghost = (k + 0.5) * h
                    base = np.arange(npts) if k < 0 else np.arange(n - npts, n)
                    ew = _lagrange_weights(self.r[base], x_ghost)
                    A[j, base] += w * ew
        return sp.csr_matrix(A)

    def _build_quadrature(self) -> np.ndarray:
        n, h, r = self.n, self.h, self.r
        w = np.zeros(n)
        base = h * r**2
        # endpoint corrections (h^2/24)(g'(1) - g'(0)) applied to g = f r^2;
        # one-sided 4-point derivative stencils keep the total error O(h^4)
        d0 = fd_weights(r[:4], 0.0, 1)
        d1 = fd_weights(r[-4:], 1.0, 1)
        corr = np.zeros(n)
        corr[-4:] += (h**2 / 24.0) * d1 * r[-4:] ** 2
        corr[:4] -= (h**2 / 24.0) * d0 * r[:4] ** 2
        w[:] = base + corr
        return w

    # -- basic operations --------------------------------------------------

    def ddr(self, values: np.ndarray, parity: str = "none") -> np.ndarray:
        """First derivative d/dr.

        parity declares how the operand extends across the origin: 'odd',
        'even', or 'none' for plain extrapolation.
        """
        return self._ddr[parity] @ values

    def integrate(self, values: np.ndarray) -> float:
        """Integral of f against r^2 dr over [0,1]."""
        return float(self._wq @ values)

    def integrate_between(self, values: np.ndarray, lo: float, hi: float,
                          measure: str = "r2") -> float:
        """Midpoint integral over cells contained in [lo, hi].

        Cell edges must align with lo and hi (use n divisible by 4 for the
        quarter-interval cuts).  measure is 'r2' for r^2 dr or 'dr'.
        """
        mask = (self.r > lo) & (self.r < hi)
        f = values[mask]
        if measure == "r2":
            return float(np.sum(f * self.r[mask] ** 2) * self.h)
        if measure == "dr":
            return float(np.sum(f) * self.h)
        raise ValueError(f"unknown measure {measure!r}")

    def cumint_r2_from_zero(self, values: np.ndarray) -> np.ndarray:
        """Cumulative integral I(r_j) = int_0^{r_j} f(s) s^2 ds, O(h^4).

        Each subinterval integrates the local cubic through the four nearest
        nodes of the integrand f r^2.
        """
        n, h, r = self.n, self.h, self.r
        q = values * r**2
        out = np.zeros(n)
        # first piece [0, r_0] from the cubic through the first four nodes
        w0 = _interval_weights(r[:4], 0.0, r[0])
        acc = float(w0 @ q[:4])
        out[0] = acc
        for j in range(n - 1):
            k = min(max(j - 1, 0), n - 4)
            idx = slice(k, k + 4)
            w = _interval_weights_uniform(j - k, h) if 0 <= j - k <= 2 else None
            if w is None:
                w = _interval_weights(r[idx], r[j], r[j + 1])
            acc += float(w @ q[idx])
            out[j + 1] = acc
        return out


@lru_cache(maxsize=None)
def _interval_weights_uniform(pos: int, h: float) -> np.ndarray:
    """Integral of the cubic through 4 uniform nodes over [x_pos, x_pos+1]."""
    x = np.arange(4) * h
    return _interval_weights(x, x[pos], x[pos + 1])


def _interval_weights(x, a: float, b: float) -> np.ndarray:
    """Weights w with sum_i w_i f(x_i) = integral over [a,b] of the cubic interpolant."""
    x = np.asarray(x, dtype=float)
    V = np.vander(x, increasing=True).T  # V[k, i] = x_i^k
    moments = np.array([(b ** (k + 1) - a ** (k + 1)) / (k + 1) for k in range(len(x))])
    return np.linalg.solve(V, moments)


@dataclass(frozen=True)
class GridFunction:
    """A scalar field sampled at the grid nodes."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"values shape {v.shape} does not match grid n={self.grid.n}")
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None):
        return np.asarray(self.values, dtype=dtype)

    def to_csv(self) -> str:
        lines = ["r,value"]
        lines += [f"{r:.17g},{v:.17g}" for r, v in zip(self.grid.r, self.values)]
        return "\n".join(lines) + "\n"


def _unpack(f):
    if isinstance(f, GridFunction):
        return f.grid, f.values, True
    raise TypeError("operator application needs a GridFunction (or use the ndarray helpers)")


def _wrap(grid: RadialGrid, values: np.ndarray, wrap: bool):
    return GridFunction(grid, values) if wrap else values


# -- ndarray-level operator kernels (hot path) -------------------------------

def flip_parity(parity: str) -> str:
    """Every primitive (d/dr, D_r, 1/r) turns odd into even and back."""
    return {"odd": "even", "even": "odd", "none": "none"}[parity]


def dr_values(grid: RadialGrid, v: np.ndarray, parity: str = "none") -> np.ndarray:
    return grid.ddr(v, parity)


def Dr_values(grid: RadialGrid, v: np.ndarray, parity: str = "none") -> np.ndarray:
    return grid.ddr(v, parity) + 2.0 * v * grid.inv_r


def Di_values(grid: RadialGrid, i: int, v: np.ndarray, parity: str = "odd") -> np.ndarray:
    _check_order(grid, i)
    # composition runs right-to-left: D_r innermost, then alternating d/dr, D_r
    out = v
    for level in range(1, i + 1):
        if level % 2 == 1:
            out = Dr_values(grid, out, parity)
        else:
            out = grid.ddr(out, parity)
        parity = flip_parity(parity)
    return out


def _check_order(grid: RadialGrid, i: int):
    if i < 0:
        raise ValueError("operator order must be nonnegative")
    if i > min(MAX_OPERATOR_ORDER, grid.n // 8):
        raise OrderTooHighError(
            f"operator order {i} exceeds supported order "
            f"{min(MAX_OPERATOR_ORDER, grid.n // 8)} at n={grid.n}")


def Dbar_values(grid: RadialGrid, i: int, v: np.ndarray, parity: str = "odd") -> np.ndarray:
    if i == 0:
        return v
    _check_order(grid, i)
    return Di_values(grid, i - 1, grid.ddr(v, parity), flip_parity(parity))


# -- public GridFunction API --------------------------------------------------

def apply_dr(f: GridFunction, parity: str = "none") -> GridFunction:
    grid, v, w = _unpack(f)
    return _wrap(grid, dr_values(grid, v, parity), w)


def apply_Dr(f: GridFunction, parity: str = "none") -> GridFunction:
    """Spherical divergence r^-2 d/dr(r^2 f), computed as df/dr + 2f/r."""
    grid, v, w = _unpack(f)
    return _wrap(grid, Dr_values(grid, v, parity), w)


def apply_Di(i: int, f: GridFunction, parity: str = "odd") -> GridFunction:
    """Alternating composition; defaults to the perturbation field's parity."""
    grid, v, w = _unpack(f)
    return _wrap(grid, Di_values(grid, i, v, parity), w)


def apply_Dbar_i(i: int, f: GridFunction, parity: str = "odd") -> GridFunction:
    grid, v, w = _unpack(f)
    return _wrap(grid, Dbar_values(grid, i, v, parity), w)


# -- weighted elliptic operators ----------------------------------------------

def lk_coefficients(profile, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Expanded coefficients (alpha_k, beta) with L_k f = alpha_k D_r f + beta d/dr D_r f.

    beta = rho^(gamma-1) d and alpha_k = alpha_0 + k * beta_r; the entropy
    weight d never appears with a negative exponent, so evaluation is safe at
    the last cell where d is tiny.
    """
    g = profile.gamma
    rho, rho_r = profile.rho_deriv(0), profile.rho_deriv(1)
    d, d_r = profile.d_deriv(0), profile.d_deriv(1)
    alpha = (g + k * (g - 1.0)) * rho ** (g - 2.0) * rho_r * d \
        + (1.0 + k) * rho ** (g - 1.0) * d_r
    beta = rho ** (g - 1.0) * d
    return alpha, beta


def _alpha_k_jet(profile, k: int, depth: int) -> list[np.ndarray]:
    """Nodal derivatives [alpha_k, alpha_k', ...] up to the requested depth."""
    g = profile.gamma
    c1 = g + k * (g - 1.0)
    c2 = 1.0 + k
    rho = [profile.rho_deriv(m) for m in range(depth + 2)]
    d = [profile.d_deriv(m) for m in range(depth + 2)]
    rho_jet = rho[: depth + 2]
    pw = jet_pow(rho_jet, g - 2.0, depth)
    term1 = jet_mul(jet_mul(pw, rho[1: depth + 2], depth), d[: depth + 1], depth)
    pw2 = jet_pow(rho_jet, g - 1.0, depth)
    term2 = jet_mul(pw2, d[1: depth + 2], depth)
    return [c1 * a + c2 * b for a, b in zip(term1, term2)]


def apply_Lk(k: int, f: GridFunction, profile, parity: str = "odd") -> GridFunction:
    grid, v, w = _unpack(f)
    alpha, beta = lk_coefficients(profile, k)
    g1 = Dr_values(grid, v, parity)
    return _wrap(grid, alpha * g1 + beta * grid.ddr(g1, flip_parity(parity)), w)


def apply_Lk_star(k: int, h: GridFunction, profile, parity: str = "even") -> GridFunction:
    grid, v, w = _unpack(h)
    alpha, beta = lk_coefficients(profile, k)
    g1 = grid.ddr(v, parity)
    return _wrap(grid, alpha * g1 + beta * Dr_values(grid, g1, flip_parity(parity)), w)


def lk_values(grid: RadialGrid, profile, k: int, v: np.ndarray,
              parity: str = "odd") -> np.ndarray:
    alpha, beta = profile.lk_cached(k)
    g1 = Dr_values(grid, v, parity)
    return alpha * g1 + beta * grid.ddr(g1, flip_parity(parity))


def lk_star_values(grid: RadialGrid, profile, k: int, v: np.ndarray,
                   parity: str = "even") -> np.ndarray:
    alpha, beta = profile.lk_cached(k)
    g1 = grid.ddr(v, parity)
    return alpha * g1 + beta * Dr_values(grid, g1, flip_parity(parity))


def calL_values(grid: RadialGrid, profile, i: int, v: np.ndarray) -> np.ndarray:
    """Parity-matched elliptic operator: L_i for even i, L_i^* for odd i.

    Acts on the i-fold derivative of the perturbation field, whose parity
    alternates with i; the origin closure is chosen accordingly.
    """
    if i % 2 == 0:
        return lk_values(grid, profile, i, v, "odd")
    return lk_star_values(grid, profile, i, v, "even")


def compute_Qplus(k: int, profile) -> GridFunction:
    """First-order coefficient in D_r L_k = L_{k+1}^* D_r + Q_+ D_r."""
    grid = profile.grid
    a = _alpha_k_jet(profile, k, 1)
    return GridFunction(grid, a[1] + 2.0 * a[0] * grid.inv_r)


def compute_Qminus(k: int, profile) -> GridFunction:
    """First-order coefficient in d/dr L_k^* = L_{k+1} d/dr + Q_- d/dr."""
    grid = profile.grid
    a = _alpha_k_jet(profile, k, 1)
    return GridFunction(grid, a[1] - 2.0 * a[0] * grid.inv_r)


def qij_exact(profile, i: int) -> list[np.ndarray]:
    """Coefficients q_{i0}..q_{i,i-1} in D_i L_0 = calL_i D_i + sum q_{ij} D_{i-j}.

    Assembled from the Q+/Q- commutation identities; available for i <= 2
    where the composition is short enough to write in closed form.
    """
    if i == 1:
        qp0 = _alpha_k_jet(profile, 0, 1)
        grid = profile.grid
        return [qp0[1] + 2.0 * qp0[0] * grid.inv_r]
    if i == 2:
        grid = profile.grid
        a0 = _alpha_k_jet(profile, 0, 2)
        a1 = _alpha_k_jet(profile, 1, 1)
        qplus0 = a0[1] + 2.0 * a0[0] * grid.inv_r
        dqplus0 = a0[2] + 2.0 * a0[1] * grid.inv_r - 2.0 * a0[0] * grid.inv_r**2
        qminus1 = a1[1] - 2.0 * a1[0] * grid.inv_r
        return [qminus1 + qplus0, dqplus0]
    raise OrderTooHighError(f"closed-form commutator coefficients only for i <= 2, got {i}")


# -- jets (nodal derivative stacks) -------------------------------------------

def jet_mul(A: list[np.ndarray], B: list[np.ndarray], depth: int) -> list[np.ndarray]:
    """Leibniz product of two derivative stacks up to the given depth."""
    return [sum(comb(m, j) * A[j] * B[m - j] for j in range(m + 1)) for m in range(depth + 1)]


def jet_pow(A: list[np.ndarray], s: float, depth: int) -> list[np.ndarray]:
    """Derivative stack of A(r)^s for positive A, via P' = s P A'/A."""
    P = [np.power(A[0], s)]
    if depth == 0:
        return P
    u = _jet_div([A[m + 1] for m in range(depth)], A, depth - 1)
    for m in range(depth):
        # m-th derivative of P' = s*(P*u), assembled degree by degree
        val = s * sum(comb(m, j) * P[j] * u[m - j] for j in range(m + 1))
        P.append(val)
    return P


def _jet_div(A: list[np.ndarray], B: list[np.ndarray], depth: int) -> list[np.ndarray]:
    """Derivative stack of A/B (B nonvanishing)."""
    out = [A[0] / B[0]]
    for m in range(1, depth + 1):
        s = A[m] - sum(comb(m, j) * out[j] * B[m - j] for j in range(m))
        out.append(s / B[0])
    return out


# -- weighted norms ------------------------------------------------------------

def weighted_norm(f: GridFunction, k: int, profile) -> float:
    """Squared weighted norm: integral of d^k f^2 r^2 dr."""
    if k < 0:
        raise ValueError("weight exponent must be nonnegative")
    grid, v, _ = _unpack(f)
    d = profile.d_deriv(0)
    return grid.integrate(d**k * v**2)


def weighted_norm_values(grid: RadialGrid, profile, k: int, v: np.ndarray) -> float:
    d = profile.d_deriv(0)
    return grid.integrate(d**k * v**2)


# -- cutoff ---------------------------------------------------------------------

def cutoff_psi(r: np.ndarray) -> np.ndarray:
    """Quintic smoothstep cutoff: 1 on [0,1/2], 0 on [3/4,1], nonincreasing."""
    r = np.asarray(r, dtype=float)
    t = np.clip((r - 0.5) * 4.0, 0.0, 1.0)
    s = t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
    return 1.0 - s


# -- vector-field words ----------------------------------------------------------

@dataclass(frozen=True)
class VectorFieldWord:
    """A composition of primitive radial operators.

    letters are applied right-to-left to the field: ('dr', 'Dr') means
    d/dr applied to (D_r f).  Primitive names: 'dr', 'Dr', 'inv_r', 'id'.
    """

    family: str   # 'P' or 'Pbar'
    order: int
    letters: tuple[str, ...]

    def apply(self, f: GridFunction, parity: str = "odd") -> GridFunction:
        grid, v, w = _unpack(f)
        return _wrap(grid, self.apply_values(grid, v, parity), w)

    def apply_values(self, grid: RadialGrid, v: np.ndarray, parity: str = "odd") -> np.ndarray:
        out = v
        for letter in reversed(self.letters):
            if letter == "dr":
                out = grid.ddr(out, parity)
            elif letter == "Dr":
                out = Dr_values(grid, out, parity)
            elif letter == "inv_r":
                out = out * grid.inv_r
            elif letter == "id":
                continue
            else:
                raise ValueError(f"unknown letter {letter!r}")
            parity = flip_parity(parity)
        return out


def enumerate_P(i: int, family: str = "P") -> list[VectorFieldWord]:
    """All operator words of the given order in the P (or Pbar) class.

    Words of even order 2j+2 are products of j+1 factors (d/dr V) with
    V in {D_r, 1/r}; odd order 2j+1 prepends a bare V.  The Pbar classes
    append one d/dr to the words of order i-1.
    """
    if i < 0 or i > 6:
        raise OrderTooHighError(f"vector-field order must be in [0, 6], got {i}")
    if family == "P":
        return [VectorFieldWord("P", i, w) for w in _p_letters(i)]
    if family == "Pbar":
        if i == 0:
            return [VectorFieldWord("Pbar", 0, ("id",))]
        inner = _p_letters(i - 1)
        return [VectorFieldWord("Pbar", i, w + ("dr",)) for w in inner]
    raise ValueError(f"unknown family {family!r}")


def _p_letters(i: int) -> list[tuple[str, ...]]:
    if i == 0:
        return [("id",)]
    choices = ("Dr", "inv_r")
    if i % 2 == 0:
        j = i // 2  # j factors of (dr V)
        words = []
        for picks in _product(choices, j):
            letters: tuple[str, ...] = ()
            for v in picks:
                letters += ("dr", v)
            words.append(letters)
        return words
    j = (i - 1) // 2
    words = []
    for lead in choices:
        for picks in _product(choices, j):
            letters = (lead,)
            for v in picks:
                letters += ("dr", v)
            words.append(letters)
    return words


def _product(choices, repeat: int):
    if repeat == 0:
        yield ()
        return
    for rest in _product(choices, repeat - 1):
        for c in choices:
            yield (c,) + rest
