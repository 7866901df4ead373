"""Cutting functions chi = chi0 * chi1 across a corridor g < eta < (1+mu) g.

chi0 ramps linearly from 0 on the graph of g to 1 on the graph of (1+mu) g;
chi1 is a smooth radial cutoff equal to 1 for |zeta| <= R and 0 for
|zeta| >= 2R.  The module also certifies the two quantitative properties the
d-bar machinery needs: |grad chi| dA is a Carleson measure, and
Im(zeta) |grad chi(zeta)| is bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .geometry import GraphFunction
from .quadrature import gauss_legendre


def _psi(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def _dpsi(t):
    t = np.asarray(t, dtype=float)
    ts = np.where(t > 0, t, 1.0)
    return np.where(t > 0, _psi(t) / ts**2, 0.0)


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    a, b = _psi(t), _psi(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


def smooth_step_derivative(t):
    t = np.asarray(t, dtype=float)
    a, b = _psi(t), _psi(1.0 - t)
    da, db = _dpsi(t), -_dpsi(1.0 - t)
    return (da * b - a * db) / (a + b) ** 2


# sup |smooth_step'|, attained at t = 1/2
STEP_SLOPE = float(smooth_step_derivative(0.5))


@dataclass(frozen=True)
class CuttingFunction:
    """chi = chi0 * chi1 for the corridor of ``g`` with opening ``mu``.

    ``inner``/``outer`` default to R and 2R.  ``h_fd`` is the finite
    difference step used next to abscissae where g' may jump.
    """

    g: GraphFunction
    mu: float
    R: float
    inner: float | None = None
    outer: float | None = None
    h_fd: float = 1e-7

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.inner is None:
            object.__setattr__(self, "inner", float(self.R))
        if self.outer is None:
            object.__setattr__(self, "outer", 2.0 * float(self.R))
        if not self.outer > self.inner >= self.R:
            raise ValueError("cutoff radii must satisfy R <= inner < outer")

    def chi1(self, r):
        t = (self.outer - np.asarray(r, dtype=float)) / (self.outer - self.inner)
        return smooth_step(t)

    def dchi1_dr(self, r):
        t = (self.outer - np.asarray(r, dtype=float)) / (self.outer - self.inner)
        return -smooth_step_derivative(t) / (self.outer - self.inner)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "R": self.R, "cutoff": {"inner": self.inner, "outer": self.outer}, "h_fd": self.h_fd}


def chi0_eval(cf: CuttingFunction, zeta):
    """Linear ramp across the corridor; 1 wherever g vanishes."""
    zeta = np.asarray(zeta, dtype=complex)
    xi, eta = zeta.real, zeta.imag
    g = cf.g(xi)
    pos = g > 0
    gs = np.where(pos, g, 1.0)
    ramp = np.clip((eta - gs) / (cf.mu * gs), 0.0, 1.0)
    return np.where(pos, ramp, 1.0)


def chi_eval(cf: CuttingFunction, zeta):
    zeta = np.asarray(zeta, dtype=complex)
    return chi0_eval(cf, zeta) * cf.chi1(np.abs(zeta))


def _grad_chi0(cf: CuttingFunction, xi, eta):
    g = cf.g(xi)
    gp = cf.g.d(xi)
    pos = g > 0
    gs = np.where(pos, g, 1.0)
    # closed corridor: boundary points take the corridor-side value
    inside = pos & (eta >= gs) & (eta <= (1 + cf.mu) * gs)
    d_eta = np.where(inside, 1.0 / (cf.mu * gs), 0.0)
    d_xi = np.where(inside, -eta * gp / (cf.mu * gs**2), 0.0)
    return d_xi, d_eta


def grad_chi(cf: CuttingFunction, zeta):
    """(d chi/d xi, d chi/d eta).

    Analytic off the abscissae where g' may jump (the derivative callable gives
    the one-sided value there); on those vertical lines a central difference of
    step ``h_fd`` is used.  Points exactly on a corridor boundary line receive
    the value from the corridor side.
    """
    zeta = np.asarray(zeta, dtype=complex)
    xi, eta = zeta.real, zeta.imag
    r = np.abs(zeta)
    c0 = chi0_eval(cf, zeta)
    c1 = cf.chi1(r)
    g0x, g0y = _grad_chi0(cf, xi, eta)
    rs = np.where(r > 0, r, 1.0)
    d1 = cf.dchi1_dr(r)
    gx = c1 * g0x + c0 * d1 * xi / rs
    gy = c1 * g0y + c0 * d1 * eta / rs
    if cf.g.kinks:
        kinks = np.asarray(cf.g.kinks, dtype=float)
        near = np.any(xi[..., None] == kinks, axis=-1)
        if np.any(near):
            z = zeta[near]
            h = cf.h_fd
            gx[near] = (chi_eval(cf, z + h) - chi_eval(cf, z - h)) / (2 * h)
            gy[near] = (chi_eval(cf, z + 1j * h) - chi_eval(cf, z - 1j * h)) / (2 * h)
    return gx, gy


def dbar_chi(cf: CuttingFunction, zeta):
    """d-bar chi = (chi_x + i chi_y) / 2."""
    gx, gy = grad_chi(cf, zeta)
    return 0.5 * (gx + 1j * gy)


def _corridor_sqrt_integral(A, B, e0, e1):
    """int_{e0}^{e1} sqrt(A^2 eta^2 + B^2) d eta in closed form (A, B >= 0)."""
    if A == 0.0:
        return B * (e1 - e0)

    def prim(e):
        return 0.5 * e * np.sqrt(A * A * e * e + B * B) + B * B / (2 * A) * np.arcsinh(A * e / B)

    return prim(e1) - prim(e0)


def slice_gradient_integral(cf: CuttingFunction, xi: float, top: float, order: int = 48) -> float:
    """int_0^top |grad chi(xi + i eta)| d eta along one vertical slice."""
    g = float(cf.g(np.array(xi)))
    gp = float(cf.g.d(np.array(xi)))
    br = [0.0, top]
    if g > 0:
        br += [g, (1 + cf.mu) * g]
    for rad in (cf.inner, cf.outer):
        if rad > abs(xi):
            br.append(np.sqrt(rad * rad - xi * xi))
    br = np.unique(np.clip(br, 0.0, top))
    x, w = gauss_legendre(order)
    total = 0.0
    for e0, e1 in zip(br[:-1], br[1:]):
        if e1 <= e0:
            continue
        em = 0.5 * (e0 + e1)
        r_hi = np.hypot(xi, e1)
        r_lo = np.hypot(xi, e0)
        if r_lo >= cf.outer:
            continue
        in_corridor = g > 0 and g <= em <= (1 + cf.mu) * g
        below = g > 0 and em < g
        if below:
            continue
        if in_corridor and r_hi <= cf.inner:
            A = abs(gp) / (cf.mu * g * g)
            B = 1.0 / (cf.mu * g)
            total += _corridor_sqrt_integral(A, B, e0, e1)
            continue
        if not in_corridor and r_hi <= cf.inner:
            continue
        eta = e0 + (e1 - e0) * x
        gx, gy = grad_chi(cf, xi + 1j * eta)
        total += (e1 - e0) * np.sum(w * np.hypot(gx, gy))
    return float(total)


@dataclass
class BoxIntegral:
    value: float
    side: float
    ratio: float
    a: float
    b: float


def carleson_box_integral(cf: CuttingFunction, a: float, b: float, tol: float = 1e-8) -> BoxIntegral:
    """int over (a,b) x (0, b-a) of |grad chi| dA.

    Each vertical slice is integrated exactly on the corridor (closed form where
    chi1 = 1, Gauss-Legendre where the cutoff varies), then the slices are
    integrated in xi adaptively with the kinks of g and the cutoff radii as
    breakpoints.
    """
    if not b > a:
        raise ValueError("box needs a < b")
    side = b - a
    pts = [p for p in (*cf.g.kinks, -cf.outer, -cf.inner, cf.inner, cf.outer) if a < p < b]
    val, _ = quad(
        lambda s: slice_gradient_integral(cf, s, side),
        a,
        b,
        points=pts or None,
        epsabs=tol * side,
        epsrel=tol,
        limit=400,
    )
    return BoxIntegral(value=float(val), side=side, ratio=float(val) / side, a=a, b=b)


def carleson_constant(cf: CuttingFunction) -> float:
    """C with box integral <= C log(1+mu) (b-a) for every box.

    From |grad chi| <= |grad chi0| + |grad chi1|: each corridor slice
    contributes at most 1 + (1+mu) Lip(g), and the cutoff at most
    STEP_SLOPE * 2R / (outer - inner) per unit length in xi.
    """
    lip = cf.g.lipschitz_bound
    if lip is None:
        lip = cf.g.check_lipschitz()
    cutoff = STEP_SLOPE * 2.0 * cf.outer / (cf.outer - cf.inner)
    return (1.0 + (1.0 + cf.mu) * lip + cutoff) / np.log1p(cf.mu)


def verify_gradient_bound(cf: CuttingFunction, grid) -> float:
    """sup over the grid of Im(zeta) |grad chi(zeta)|."""
    grid = np.asarray(grid, dtype=complex).ravel()
    grid = grid[grid.imag > 0]
    gx, gy = grad_chi(cf, grid)
    return float(np.max(grid.imag * np.hypot(gx, gy))) if grid.size else 0.0


def origin_refinement_grid(cf: CuttingFunction, level: int, n: int = 64, r_max: float | None = None):
    """Polar grid on {delta <= |zeta| <= r_max, 0 < arg < pi} with delta = r_max 2^-(4 level)."""
    r_max = cf.R if r_max is None else r_max
    delta = r_max * 2.0 ** (-4 * level)
    r = np.geomspace(delta, r_max, n * (level + 1))
    th = np.linspace(0, np.pi, n + 2)[1:-1]
    return (r[:, None] * np.exp(1j * th[None, :])).ravel()
