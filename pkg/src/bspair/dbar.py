"""Solutions of the d-bar problem  d-bar u = rho  in the upper half-plane.

Four constructions are provided:

* ``standard_cauchy_solution``: the Cauchy transform (1/pi) int rho(zeta)/(z - zeta) dA;
* ``jones_solution``: the Jones-type kernel with the exponential damping factor;
* ``transversal_solution``: C^rho minus an analytic reflection term (angle corridors);
* ``tangential_solution``: C^rho plus a contour integral along the reflected lower
  corridor boundary (tangential corridors).

Densities of the form f * dbar(chi), with f analytic across the transition region
of a cutting function, are integrated through the Cauchy-Pompeiu formula, which
turns the area integral into contour integrals of f*chi; this stays accurate
arbitrarily close to the origin.  Generic densities use a tensor-grid area rule
with exact near-field cells.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy.optimize import brentq

from .cutting import CuttingFunction, chi_eval, dbar_chi
from .errors import CarlesonViolationError, GeometryError, IntegrabilityError
from .quadrature import (
    nearest_param,
    ContourPiece,
    cauchy_integral,
    cauchy_sum,
    composite_nodes,
    gauss_legendre,
    geometric_breaks,
)

# --------------------------------------------------------------------------
# densities


class DensityField:
    """Base class: a density rho on C+ with a quadrature node cloud."""

    name = "density"

    def __call__(self, z):
        raise NotImplementedError

    def nodes(self):
        """(points, weights, values) of a quadrature rule for integrals against rho."""
        raise NotImplementedError

    def discontinuity_distance(self, z):
        """Distance from z to the set where rho may jump (inf if rho is smooth)."""
        return np.full(np.shape(z), np.inf)

    def is_zero(self) -> bool:
        _, _, v = self.nodes()
        return not np.any(v)

    def l1_norm(self) -> float:
        _, w, v = self.nodes()
        return float(np.sum(w * np.abs(v)))

    def height_bound(self) -> float:
        """sup |rho(z)| Im z over the node cloud."""
        p, _, v = self.nodes()
        return float(np.max(np.abs(v) * p.imag)) if p.size else 0.0

    def carleson_estimate(self, levels: int = 24) -> float:
        """max over dyadic boxes (a, a+s) x (0, s) of int_box |rho| dA / s."""
        p, w, v = self.nodes()
        m = w * np.abs(v)
        keep = m > 0
        p, m = p[keep], m[keep]
        if not p.size:
            return 0.0
        span = max(np.ptp(p.real), p.imag.max(), 1e-300)
        best = 0.0
        for j in range(levels):
            side = span * 2.0 ** (1 - j)
            for shift in (0.0, 0.5):
                idx = np.floor(p.real / side - shift)
                sel = p.imag < side
                if not np.any(sel):
                    continue
                keys, inv = np.unique(idx[sel], return_inverse=True)
                mass = np.bincount(inv, weights=m[sel])
                best = max(best, float(mass.max() / side))
        return best


@dataclass(eq=False)
class GridDensity(DensityField):
    """A density given by a callable on a bounding box, sampled on an n x n grid.

    Cell values are averages over ``subsample``^2 points, which keeps
    discontinuous densities (indicator functions) accurate to second order.
    """

    rho: Callable
    box: tuple[float, float, float, float]
    n: int = 512
    subsample: int = 4
    jump_distance: Callable | None = None
    name: str = "grid-density"
    _cells: np.ndarray | None = field(default=None, repr=False)

    def __call__(self, z):
        return np.asarray(self.rho(np.asarray(z, dtype=complex)), dtype=complex)

    @property
    def h(self) -> tuple[float, float]:
        x0, x1, y0, y1 = self.box
        return (x1 - x0) / self.n, (y1 - y0) / self.n

    def cells(self) -> np.ndarray:
        if self._cells is None:
            x0, x1, y0, y1 = self.box
            hx, hy = self.h
            s = self.subsample
            off = (np.arange(s) + 0.5) / s
            vals = np.zeros((self.n, self.n), dtype=complex)
            xs = x0 + hx * (np.arange(self.n)[:, None] + off[None, :])
            for j in range(self.n):
                ys = y0 + hy * (j + off)
                z = xs.reshape(-1)[:, None] + 1j * ys[None, :]
                vals[:, j] = self(z).reshape(self.n, s * s).mean(axis=1)
            self._cells = vals
        return self._cells

    def nodes(self):
        x0, x1, y0, y1 = self.box
        hx, hy = self.h
        xc = x0 + hx * (np.arange(self.n) + 0.5)
        yc = y0 + hy * (np.arange(self.n) + 0.5)
        pts = (xc[:, None] + 1j * yc[None, :]).ravel()
        vals = self.cells().ravel()
        keep = vals != 0
        return pts[keep], np.full(int(keep.sum()), hx * hy), vals[keep]

    def discontinuity_distance(self, z):
        if self.jump_distance is None:
            return super().discontinuity_distance(z)
        return np.asarray(self.jump_distance(np.asarray(z, dtype=complex)), dtype=float)


def unit_disc_density(n: int = 512, subsample: int = 8, radius: float = 1.0) -> GridDensity:
    """rho = 1 on the disc |z| < radius; its Cauchy transform is known in closed form."""
    r = radius
    return GridDensity(
        rho=lambda z: (np.abs(z) < r).astype(complex),
        box=(-r, r, -r, r),
        n=n,
        subsample=subsample,
        jump_distance=lambda z: np.abs(np.abs(z) - r),
        name=f"disc(r={r})",
    )


def unit_disc_exact(z, radius: float = 1.0):
    """Cauchy transform of the disc indicator: conj(z) inside, r^2/z outside."""
    z = np.asarray(z, dtype=complex)
    inside = np.abs(z) <= radius
    zs = np.where(inside, 1.0, z)
    return np.where(inside, np.conj(z), radius**2 / zs)


@dataclass(eq=False)
class CutDensity(DensityField):
    """rho = f * dbar(chi) for a cutting function chi and an analytic f.

    ``f`` must be analytic (and vectorised) on the closure of the transition
    region {0 < chi < 1} and on the real segments R <= |xi| <= 2R where g = 0.
    """

    f: Callable
    cf: CuttingFunction
    order: int = 16
    grade_depth: float = 1e-14
    name: str = "f dbar chi"
    _nodes: tuple | None = field(default=None, repr=False)
    _pieces: list | None = field(default=None, repr=False)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return self.f(z) * dbar_chi(self.cf, z)

    # geometry of the transition region --------------------------------

    def _intervals(self):
        """Positive intervals of g clipped to |xi| < outer."""
        cf = self.cf
        out = []
        for a, b in cf.g.support():
            a, b = max(a, -cf.outer), min(b, cf.outer)
            if b > a:
                out.append((a, b))
        return out

    def _line_crossings(self, a, b, factor, radius):
        """Abscissae in (a, b) where |xi + i factor g(xi)| = radius."""
        g = self.cf.g
        t = np.linspace(a, b, 4001)
        q = np.hypot(t, factor * g(t)) - radius
        roots = []
        for i in np.nonzero(np.sign(q[:-1]) * np.sign(q[1:]) < 0)[0]:
            roots.append(brentq(lambda s: np.hypot(s, factor * float(g(np.array(s)))) - radius, t[i], t[i + 1], xtol=1e-15))
        roots += [float(x) for x in t[q == 0]]
        return sorted(roots)

    def _upper_arcs(self, radius):
        """theta intervals of the circle |z| = radius lying above the corridor."""
        g, mu = self.cf.g, self.cf.mu
        th = np.linspace(0.0, np.pi, 8001)

        def q(t):
            t = np.asarray(t, dtype=float)
            return radius * np.sin(t) - (1 + mu) * g(radius * np.cos(t))

        vals = q(th)
        above = vals > 0
        # endpoints on the real axis count as above when g vanishes there
        above[0] = g(np.array(radius)) == 0
        above[-1] = g(np.array(-radius)) == 0
        arcs = []
        i = 0
        while i < th.size:
            if not above[i]:
                i += 1
                continue
            j = i
            while j + 1 < th.size and above[j + 1]:
                j += 1
            lo = th[i] if i == 0 or vals[i - 1] == 0 else brentq(q, th[i - 1], th[i], xtol=1e-15)
            hi = th[j] if j == th.size - 1 or vals[j + 1] == 0 else brentq(q, th[j], th[j + 1], xtol=1e-15)
            arcs.append((float(lo), float(hi)))
            i = j + 1
        return arcs

    def in_transition(self, z):
        """Indicator of the region bounded by the Pompeiu pieces.

        Geometric rather than a test on chi values, which round to 0 or 1 near
        the cutoff radii.
        """
        z = np.asarray(z, dtype=complex)
        cf = self.cf
        gv = cf.g(z.real)
        r = np.abs(z)
        above_low = (z.imag > 0) & ((gv == 0) | (z.imag > gv))
        plateau = (r <= cf.inner) & ((gv == 0) | (z.imag >= (1 + cf.mu) * gv))
        return above_low & (r < cf.outer) & ~plateau

    # node cloud -----------------------------------------------------------

    def nodes(self):
        if self._nodes is None:
            self._nodes = self._build_nodes()
        return self._nodes

    def _build_nodes(self):
        cf = self.cf
        g, mu = cf.g, cf.mu
        xg, wg = gauss_legendre(self.order)
        pts, wts = [], []
        # corridor, mapped to (xi, s) with eta = g(xi)(1 + mu s)
        for a, b in self._intervals():
            brk = [np.linspace(a, b, 17), np.asarray([k for k in g.kinks if a < k < b])]
            for end in (a, b):
                if g(np.array(end)) == 0 or end in (a,) and g(np.array(end + 1e-300)) == 0:
                    brk.append(geometric_breaks(a, b, end, self.grade_depth * (b - a)))
            for fac in (1.0, 1.0 + mu):
                for rad in (cf.inner, cf.outer):
                    brk.append(np.asarray(self._line_crossings(a, b, fac, rad)))
            xn, xw = composite_nodes(np.unique(np.concatenate(brk)), self.order)
            gv = g(xn)
            for x, w, gx in zip(xn, xw, gv):
                if gx <= 0:
                    continue
                sb = [0.0, 1.0]
                for rad in (cf.inner, cf.outer):
                    if rad > abs(x):
                        sc = (np.sqrt(rad * rad - x * x) / gx - 1.0) / mu
                        if 0 < sc < 1:
                            sb.append(sc)
                sb = np.unique(sb)
                s0, s1 = sb[:-1], sb[1:]
                s = (s0[:, None] + (s1 - s0)[:, None] * xg[None, :]).ravel()
                sw = ((s1 - s0)[:, None] * wg[None, :]).ravel()
                pts.append(x + 1j * gx * (1 + mu * s))
                wts.append(w * mu * gx * sw)
        # annulus part above the corridor
        rn, rw = composite_nodes(np.linspace(cf.inner, cf.outer, 5), self.order)
        xt, wt = gauss_legendre(32)
        for r, w in zip(rn, rw):
            for t0, t1 in self._upper_arcs(r):
                nseg = max(1, int(np.ceil((t1 - t0) / (np.pi / 8))))
                e = np.linspace(t0, t1, nseg + 1)
                th = (e[:-1, None] + np.diff(e)[:, None] * xt[None, :]).ravel()
                tw = (np.diff(e)[:, None] * wt[None, :]).ravel()
                pts.append(r * np.exp(1j * th))
                wts.append(w * r * tw)
        p = np.concatenate(pts) if pts else np.zeros(0, complex)
        w = np.concatenate(wts) if wts else np.zeros(0)
        keep = (np.abs(p) < cf.outer) & (p.imag > 0)
        p, w = p[keep], w[keep]
        v = self(p)
        nz = v != 0
        return p[nz], w[nz], v[nz]

    # Cauchy-Pompeiu contour ---------------------------------------------------

    def pompeiu_pieces(self):
        """Oriented boundary pieces of {0 < chi < 1} on which f*chi is nonzero."""
        if self._pieces is not None:
            return self._pieces
        cf, f = self.cf, self.f
        g, mu = cf.g, cf.mu
        pieces = []
        # upper corridor line inside |z| <= R; traversed right to left, so the
        # left-to-right parametrisation enters with a minus sign
        for a, b in self._intervals():
            cuts = [a, b] + self._line_crossings(a, b, 1 + mu, cf.inner)
            cuts = np.unique(cuts)
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                mid = 0.5 * (lo + hi)
                if abs(mid + 1j * (1 + mu) * float(g(np.array(mid)))) > cf.inner:
                    continue
                grade = tuple(e for e in (lo, hi) if g(np.array(e)) == 0)
                brk = tuple(k for k in g.kinks if lo < k < hi)
                pieces.append(
                    ContourPiece(
                        gamma=lambda t, g=g, mu=mu: t + 1j * (1 + mu) * g(t),
                        dgamma=lambda t, g=g, mu=mu: 1 + 1j * (1 + mu) * g.d(t),
                        density=lambda t, g=g, mu=mu: -f(t + 1j * (1 + mu) * g(t)),
                        t0=float(lo),
                        t1=float(hi),
                        breakpoints=brk,
                        grade_to=grade,
                        name="upper-line",
                    )
                )
        # circle |z| = R above the corridor, clockwise
        R = cf.inner
        for t0, t1 in self._upper_arcs(R):
            pieces.append(
                ContourPiece(
                    gamma=lambda t: R * np.exp(1j * t),
                    dgamma=lambda t: 1j * R * np.exp(1j * t),
                    density=lambda t: -f(R * np.exp(1j * t)),
                    t0=t0,
                    t1=t1,
                    name="inner-circle",
                )
            )
        # real axis where g = 0 inside the cutoff annulus, left to right
        for lo, hi in ((-cf.outer, -cf.inner), (cf.inner, cf.outer)):
            t = np.linspace(lo, hi, 2001)
            zero = g(t) == 0
            if not np.any(zero):
                continue
            edges = np.flatnonzero(np.diff(zero.astype(int)))
            runs, start = [], (lo if zero[0] else None)
            for e in edges:
                if zero[e]:
                    runs.append((start, t[e]))
                    start = None
                else:
                    start = t[e + 1]
            if start is not None:
                runs.append((start, hi))
            for a, b in runs:
                if b > a:
                    pieces.append(
                        ContourPiece(
                            gamma=lambda t: t + 0j,
                            dgamma=lambda t: np.ones_like(t) + 0j,
                            density=lambda t: f(t + 0j) * cf.chi1(np.abs(t)),
                            t0=float(a),
                            t1=float(b),
                            name="real-axis",
                        )
                    )
        self._pieces = pieces
        return pieces

    def discontinuity_distance(self, z):
        z = np.asarray(z, dtype=complex)
        g, mu = self.cf.g, self.cf.mu
        gv = g(z.real)
        slope = np.sqrt(1.0 + ((1 + mu) * g.d(z.real)) ** 2)
        d = np.minimum(np.abs(z.imag - gv), np.abs(z.imag - (1 + mu) * gv)) / slope
        if g.kinks:
            d = np.minimum(d, np.min(np.abs(np.abs(z[..., None] - np.asarray(g.kinks))), axis=-1))
        return d


# --------------------------------------------------------------------------
# solutions


@dataclass
class SolutionField:
    """A solution u of d-bar u = rho, evaluated lazily."""

    evaluate: Callable
    solver: str
    meta: dict = field(default_factory=dict)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.asarray(self.evaluate(z), dtype=complex).reshape(z.shape)


def zero_solution(solver: str) -> SolutionField:
    return SolutionField(lambda z: np.zeros(np.shape(z), complex), solver, {"zero_density": True})


@numba.njit(cache=True)
def _rect_cauchy_scalar(z, x0, x1, y0, y1):
    total = 0j
    vx = (x0, x1, x1, x0)
    vy = (y0, y0, y1, y1)
    for k in range(4):
        P = complex(vx[k], vy[k])
        Q = complex(vx[(k + 1) % 4], vy[(k + 1) % 4])
        L = abs(Q - P)
        e = (Q - P) / L
        n = -1j * e
        dP = ((P - z) * n.conjugate()).real
        if dP == 0.0:
            continue
        sP = ((P - z) * e.conjugate()).real
        sQ = ((Q - z) * e.conjugate()).real
        sg = 1.0 if dP > 0 else -1.0
        ad = abs(dP)
        phiP = np.arctan2(sg * sP, ad)
        phiQ = np.arctan2(sg * sQ, ad)
        logs = np.log(abs(P - z)) - np.log(abs(Q - z))
        total += -dP * n.conjugate() * ((phiQ - phiP) + 1j * logs)
    return total


@numba.njit(cache=True)
def _area_cauchy(targets, ci, cj, vals, x0, y0, hx, hy, near, out):
    for t in range(targets.size):
        z = targets[t]
        ti = np.floor((z.real - x0) / hx)
        tj = np.floor((z.imag - y0) / hy)
        acc = 0j
        for c in range(vals.size):
            i = ci[c]
            j = cj[c]
            if abs(i - ti) <= near and abs(j - tj) <= near:
                acc += vals[c] * _rect_cauchy_scalar(z, x0 + i * hx, x0 + (i + 1) * hx, y0 + j * hy, y0 + (j + 1) * hy)
            else:
                acc += vals[c] * hx * hy / (z - complex(x0 + (i + 0.5) * hx, y0 + (j + 0.5) * hy))
        out[t] = acc / np.pi


def area_cauchy_transform(rho: GridDensity, z, near: int = 2) -> np.ndarray:
    """(1/pi) int rho/(z - zeta) dA by midpoint cells, exact integrals for the near block."""
    z = np.asarray(z, dtype=complex)
    cells = rho.cells()
    ci, cj = np.nonzero(cells)
    x0, _, y0, _ = rho.box
    hx, hy = rho.h
    out = np.empty(z.size, dtype=complex)
    _area_cauchy(
        np.ascontiguousarray(z.ravel()),
        ci.astype(np.float64),
        cj.astype(np.float64),
        np.ascontiguousarray(cells[ci, cj]),
        float(x0),
        float(y0),
        float(hx),
        float(hy),
        float(near),
        out,
    )
    return out.reshape(z.shape)


def pompeiu_cauchy_transform(rho: CutDensity, z) -> np.ndarray:
    """C^rho(z) = f chi(z) 1_Omega(z) - (1/2 pi i) oint_{d Omega} f chi/(zeta - z) d zeta."""
    z = np.asarray(z, dtype=complex)
    flat = z.ravel().copy()
    pieces = rho.pompeiu_pieces()
    # u is continuous: a target on a contour piece is replaced by the mean of
    # two points pushed off along the normal
    on = np.zeros(flat.size, dtype=bool)
    normal = np.zeros(flat.size, dtype=complex)
    for pc in pieces:
        ts, dist = nearest_param(pc, flat)
        hit = dist <= 1e-9 * np.maximum(np.abs(flat), 1e-3)
        tang = pc.dgamma(ts[hit])
        normal[hit] = 1j * tang / np.abs(tang)
        on |= hit
    if np.any(on):
        eps = 1e-8 * np.maximum(np.abs(flat[on]), 1e-3)
        pts = np.concatenate([flat[~on], flat[on] + eps * normal[on], flat[on] - eps * normal[on]])
    else:
        pts = flat
    inside = rho.in_transition(pts)
    val = np.where(inside, rho.f(pts) * chi_eval(rho.cf, pts), 0.0)
    if pieces:
        val = val - cauchy_integral(pieces, pts)
    out = np.empty(flat.size, dtype=complex)
    n_off = int((~on).sum())
    out[~on] = val[:n_off]
    if np.any(on):
        k = int(on.sum())
        out[on] = 0.5 * (val[n_off : n_off + k] + val[n_off + k :])
    return out.reshape(z.shape)


def standard_cauchy_solution(rho: DensityField, method: str = "auto", near: int = 2) -> SolutionField:
    """The standard solution C^rho = (1/pi) int rho(zeta)/(z - zeta) dA(zeta)."""
    if rho.is_zero():
        return zero_solution("standard")
    if not np.isfinite(rho.l1_norm()):
        raise IntegrabilityError("density is not integrable")
    if method == "auto":
        method = "contour" if isinstance(rho, CutDensity) else "area"
    if method == "contour":
        if not isinstance(rho, CutDensity):
            raise TypeError("contour route needs a density of the form f dbar chi")
        return SolutionField(lambda z: pompeiu_cauchy_transform(rho, z), "standard", {"method": "contour"})
    if method == "area":
        if not isinstance(rho, GridDensity):
            raise TypeError("area route needs a GridDensity")
        return SolutionField(
            lambda z: area_cauchy_transform(rho, z, near),
            "standard",
            {"method": "area", "grid": rho.n, "subsample": rho.subsample, "near": near},
        )
    raise ValueError(f"unknown method {method!r}")


# Jones solution -----------------------------------------------------------


@numba.njit(cache=True)
def _jones_self_phase(p, m, group_end, out):
    # out[j] = sum over Im p_k <= Im p_j of m_k / (p_j - conj(p_k)); nodes sorted by Im
    for j in range(p.size):
        acc = 0j
        zj = p[j]
        for k in range(group_end[j]):
            acc += m[k] / (zj - p[k].conjugate())
        out[j] = acc


@numba.njit(cache=True)
def _jones_alpha_inv(probes, p, m):
    best = 0.0
    for i in range(probes.size):
        q = probes[i]
        acc = 0.0
        for k in range(p.size):
            if p[k].imag <= q.imag:
                d = p[k] - q.conjugate()
                acc += m[k] / (d.real * d.real + d.imag * d.imag)
        val = 2.0 * q.imag * acc
        if val > best:
            best = val
    return best


@numba.njit(cache=True)
def _jones_correction(targets, p, w_rho, m, G, group_start, group_end, alpha, out):
    n = p.size
    for t in range(targets.size):
        z = targets[t]
        phi = 0j
        acc = 0j
        j = 0
        while j < n:
            s = group_start[j]
            e = group_end[j]
            for k in range(s, e):
                phi += m[k] / (z - p[k].conjugate())
            for k in range(s, e):
                d = z - p[k]
                if d == 0:
                    continue
                h = 2j * p[k].imag / (z - p[k].conjugate()) * np.exp(-1j * alpha * (phi - G[k]))
                acc += w_rho[k] * (h - 1.0) / d
            j = e
        out[t] = acc / np.pi


@dataclass
class JonesData:
    alpha: float
    alpha_inv: float
    n_nodes: int
    n_probes: int


def jones_alpha_inverse(rho: DensityField, probes=None) -> tuple[float, int]:
    """sup over nodes and probes of 2 Im(zeta) sum_{Im w <= Im zeta} |rho(w)| dA / |w - conj(zeta)|^2."""
    p, w, v = rho.nodes()
    m = w * np.abs(v)
    pr = p if probes is None else np.concatenate([p, np.ravel(np.asarray(probes, dtype=complex))])
    pr = pr[pr.imag > 0]
    return float(_jones_alpha_inv(np.ascontiguousarray(pr), np.ascontiguousarray(p), np.ascontiguousarray(m))), int(pr.size)


def jones_probe_grid(rho: DensityField, n: int = 48, depth: int = 30) -> np.ndarray:
    """Polar probe grid geometrically refined toward the origin."""
    p, _, _ = rho.nodes()
    rmax = float(np.max(np.abs(p))) * 1.5 if p.size else 1.0
    r = rmax * 2.0 ** -np.linspace(0, depth, 2 * depth + 1)
    th = np.linspace(0, np.pi, n + 2)[1:-1]
    return (r[:, None] * np.exp(1j * th[None, :])).ravel()


def jones_solution(rho: DensityField, probes=None, alpha: float | None = None) -> SolutionField:
    """u = C^rho + (1/pi) int rho(zeta) (h(z, zeta) - 1)/(z - zeta) dA(zeta).

    h(z, zeta) = 2i Im(zeta)/(z - conj zeta) exp(-i alpha (Phi(z, Im zeta) - Phi(zeta, Im zeta)))
    with Phi(z, s) = int_{Im w <= s} |rho(w)|/(z - conj w) dA(w).  h(., zeta) is analytic
    and h(zeta, zeta) = 1, so the correction is analytic in z.
    """
    if rho.is_zero():
        return zero_solution("jones")
    p, w, v = rho.nodes()
    order = np.argsort(p.imag, kind="stable")
    p, w, v = p[order], w[order], v[order]
    m = w * np.abs(v)
    im = p.imag
    group_end = np.searchsorted(im, im, side="right").astype(np.int64)
    group_start = np.searchsorted(im, im, side="left").astype(np.int64)
    if probes is None:
        probes = jones_probe_grid(rho)
    if alpha is None:
        ainv, nprobe = jones_alpha_inverse(rho, probes)
        if not np.isfinite(ainv):
            raise CarlesonViolationError("alpha^-1 diverges: |rho| dA is not a Carleson measure")
        alpha = 1.0 / ainv
    else:
        ainv, nprobe = 1.0 / alpha, 0
    G = np.empty(p.size, dtype=complex)
    _jones_self_phase(p, m, group_end, G)
    base = standard_cauchy_solution(rho)
    wr = np.ascontiguousarray(w * v)

    def evaluate(z):
        z = np.asarray(z, dtype=complex)
        corr = np.empty(z.size, dtype=complex)
        _jones_correction(np.ascontiguousarray(z.ravel()), p, wr, m, G, group_start, group_end, float(alpha), corr)
        return base(z) + corr.reshape(z.shape)

    data = JonesData(alpha=float(alpha), alpha_inv=float(ainv), n_nodes=int(p.size), n_probes=nprobe)
    return SolutionField(evaluate, "jones", {"alpha": data.alpha, "alpha_inv": data.alpha_inv, "nodes": data.n_nodes, "probes": data.n_probes})


# transversal solution -----------------------------------------------------


def linear_slope(g, samples: int = 257) -> float | None:
    """k if g(xi) = k xi on xi >= 0 and 0 on xi <= 0, else None."""
    x = g.samples(samples)
    x = x[x > 0]
    k = g(x) / x
    left = g(-x)
    if np.allclose(k, k[0], rtol=1e-10, atol=0) and np.all(left == 0) and k[0] > 0:
        return float(k[0])
    return None


def reflection_term(rho: DensityField):
    """a(zeta) = (1/pi) int (conj z / z) rho(z)/(zeta - conj z) dA(z), analytic in C+."""
    p, w, v = rho.nodes()
    coeff = w * v * np.conj(p) / p / np.pi
    src = np.conj(p)
    return lambda z: cauchy_sum(np.asarray(z, dtype=complex), src, coeff)


def transversal_solution(rho: DensityField, sector: tuple[float, float] | None = None) -> SolutionField:
    """u = C^rho - a for densities supported near 0 in a sector k < eta/xi < k'.

    ``sector`` gives (k, k'); for an f dbar chi density over a linear g it is
    inferred as (k, (1+mu) k).  Support inside |z| < R must lie in the closed sector.
    """
    if rho.is_zero():
        return zero_solution("transversal")
    if sector is None:
        if not isinstance(rho, CutDensity):
            raise GeometryError("declare the supporting sector for a generic density")
        k = linear_slope(rho.cf.g)
        if k is None:
            raise GeometryError("corridor is not an angle: g must be k xi on xi >= 0 and 0 on xi <= 0")
        sector = (k, (1 + rho.cf.mu) * k)
        R = rho.cf.inner
    else:
        R = np.inf
    k1, k2 = sector
    p, _, _ = rho.nodes()
    near = p[np.abs(p) < R * (1 - 1e-12)]
    ok = (near.real > 0) & (near.imag >= k1 * near.real * (1 - 1e-9)) & (near.imag <= k2 * near.real * (1 + 1e-9))
    if not np.all(ok):
        raise GeometryError("density support is not contained in the declared sector")
    base = standard_cauchy_solution(rho)
    a = reflection_term(rho)
    return SolutionField(lambda z: base(z) - a(z), "transversal", {"sector": [k1, k2]})


# tangential solution ------------------------------------------------------


def reflected_contour(f, g, b: float) -> ContourPiece:
    """The path t -> t - i g(t), t in [0, b], carrying f(t + i g(t))."""
    return ContourPiece(
        gamma=lambda t: t - 1j * g(t),
        dgamma=lambda t: 1 - 1j * g.d(t),
        density=lambda t: f(t + 1j * g(t)),
        t0=0.0,
        t1=float(b),
        breakpoints=tuple(k for k in g.kinks if 0 < k < b),
        grade_to=(0.0,),
        name="reflected-lower-line",
    )


def tangential_contour_term(f, cf: CuttingFunction, b: float, weight: float = 1.0):
    """weight/(2 pi i) int_{reflected line} f(conj z) dz / (zeta - z), analytic in C+."""
    piece = reflected_contour(f, cf.g, b)
    return lambda z: -weight * cauchy_integral([piece], np.asarray(z, dtype=complex))


def tangential_solution(f, cf: CuttingFunction, b: float, contour_weight: float = 1.0) -> SolutionField:
    """u = C^rho + contour term along the reflected lower corridor boundary.

    ``contour_weight`` multiplies (1/2 pi i) int f(conj z) dz/(zeta - z).  The
    logarithmic growth of C^rho at the origin is cancelled when it equals the
    total jump of chi across the corridor, which is 1.
    """
    g = cf.g
    x = np.linspace(0, b, 2001)[1:]
    if np.any(g(x) <= 0):
        raise GeometryError("g must be positive on (0, b]")
    if np.any(g(-np.geomspace(1e-12, cf.outer, 200)) != 0):
        raise GeometryError("g must vanish on (-inf, 0]")
    top = np.abs(x + 1j * (1 + cf.mu) * g(x))
    if np.any(top > cf.inner):
        raise GeometryError("cutoff must equal 1 on the corridor over (0, b)")
    rho = CutDensity(f, cf)
    base = standard_cauchy_solution(rho)
    term = tangential_contour_term(f, cf, b, contour_weight)
    return SolutionField(lambda z: base(z) + term(z), "tangential", {"b": b, "contour_weight": contour_weight})


# residuals and scans -----------------------------------------------------


def fd_dbar(u: SolutionField, z, h: float):
    """Central-difference d-bar = (d_x + i d_y)/2 with step h."""
    z = np.asarray(z, dtype=complex)
    stack = np.concatenate([z + h, z - h, z + 1j * h, z - 1j * h])
    vals = u(stack).reshape(4, -1)
    dx = (vals[0] - vals[1]) / (2 * h)
    dy = (vals[2] - vals[3]) / (2 * h)
    return (0.5 * (dx + 1j * dy)).reshape(z.shape)


@dataclass
class ResidualReport:
    h_fd: float
    sup_residual: float
    sup_rho: float
    relative: float
    n_points: int
    n_excluded: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def guard_mask(rho: DensityField, z, h_fd: float, guard: float | None = None, avoid=None) -> np.ndarray:
    """True where the FD stencil stays clear of jumps of rho and of the points ``avoid``."""
    z = np.asarray(z, dtype=complex)
    band = 2 * h_fd if guard is None else max(guard, 2 * h_fd)
    ok = rho.discontinuity_distance(z) > band
    if avoid is not None and np.size(avoid):
        av = np.ravel(np.asarray(avoid, dtype=complex))
        d = np.min(np.abs(z.ravel()[:, None] - av[None, :]), axis=1).reshape(z.shape)
        ok &= d > band
    return ok & (z.imag > band)


def dbar_residual(u: SolutionField, rho: DensityField, grid, h_fd: float = 1e-3, guard=None, avoid=None) -> ResidualReport:
    """sup over guarded grid points of |dbar_h u - rho|."""
    grid = np.ravel(np.asarray(grid, dtype=complex))
    ok = guard_mask(rho, grid, h_fd, guard, avoid)
    if not np.all(ok):
        warnings.warn(f"{int((~ok).sum())} grid points inside the guard band were excluded", stacklevel=2)
    pts = grid[ok]
    if not pts.size:
        return ResidualReport(h_fd, 0.0, 0.0, 0.0, 0, int((~ok).sum()))
    r = rho(pts)
    res = np.abs(fd_dbar(u, pts, h_fd) - r)
    sup_r = float(np.max(np.abs(r)))
    sup_res = float(np.max(res))
    return ResidualReport(h_fd, sup_res, sup_r, sup_res / sup_r if sup_r > 0 else sup_res, int(pts.size), int((~ok).sum()))


def residual_convergence(u, rho, grid, h_values, guard=None, avoid=None):
    """Residuals for a sequence of steps and the observed orders log(e_k / e_{k+1}) / log(h_k / h_{k+1}).

    Every step is evaluated on the same points: those clear of the widest guard band.
    """
    grid = np.ravel(np.asarray(grid, dtype=complex))
    grid = grid[guard_mask(rho, grid, max(h_values), guard, avoid)]
    reports = [dbar_residual(u, rho, grid, h, guard=guard, avoid=avoid) for h in h_values]
    errs = np.array([r.sup_residual for r in reports])
    ratios = np.asarray(h_values[:-1]) / np.asarray(h_values[1:])
    orders = np.log(errs[:-1] / errs[1:]) / np.log(ratios)
    return reports, orders


def fd_dbar4(fn, z, h: float):
    """Fourth-order central difference for d-bar fn."""
    z = np.asarray(z, dtype=complex)

    def d(step):
        return (-fn(z + 2 * step) + 8 * fn(z + step) - 8 * fn(z - step) + fn(z - 2 * step)) / (12 * h)

    return 0.5 * (d(h) + 1j * d(1j * h))


def cr_residual(fn, z, h: float = 1e-3) -> float:
    """sup |dbar_h fn| / sup |fn| with a fourth-order stencil: small when fn is analytic near z."""
    z = np.asarray(z, dtype=complex)
    d = np.abs(fd_dbar4(fn, z, h))
    scale = max(float(np.max(np.abs(fn(z)))), 1e-300)
    return float(np.max(d)) / scale


def polar_grid(r_min: float, r_max: float, n_r: int = 40, n_theta: int = 48, theta=(0.0, np.pi)) -> np.ndarray:
    r = np.geomspace(r_min, r_max, n_r)
    th = np.linspace(theta[0], theta[1], n_theta + 2)[1:-1]
    return (r[:, None] * np.exp(1j * th[None, :])).ravel()


@dataclass
class PlateauScan:
    deltas: list
    sups: list
    growth: list

    def to_dict(self):
        return {"deltas": self.deltas, "sups": self.sups, "growth": self.growth}


def plateau_scan(fn, r_max: float, levels: int = 4, delta0: float | None = None, factor: float = 256.0,
                 n_r: int = 24, n_theta: int = 48, theta=(0.0, np.pi)) -> PlateauScan:
    """sup |fn| over {delta_l <= |z| <= r_max} with delta_l = delta0 / factor^l.

    ``growth[l]`` is sup_{l+1}/sup_l - 1.  The regions are nested, so the sups
    are non-decreasing; a bounded function plateaus.
    """
    delta0 = r_max / factor if delta0 is None else delta0
    deltas, sups = [], []
    running = 0.0
    upper = r_max
    for lev in range(levels):
        d = delta0 / factor**lev
        ring = polar_grid(d, upper, n_r, n_theta, theta)
        running = max(running, float(np.max(np.abs(fn(ring)))))
        deltas.append(d)
        sups.append(running)
        upper = d
    growth = [sups[i + 1] / sups[i] - 1.0 if sups[i] > 0 else float(sups[i + 1] > 0) for i in range(len(sups) - 1)]
    return PlateauScan(deltas, sups, growth)


# dumps --------------------------------------------------------------------


def write_field_csv(path, z, u) -> None:
    z = np.ravel(np.asarray(z, dtype=complex))
    u = np.ravel(np.asarray(u, dtype=complex))
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "re_u", "im_u", "abs_u"])
        for zi, ui in zip(z, u):
            wr.writerow([repr(float(v)) for v in (zi.real, zi.imag, ui.real, ui.imag, abs(ui))])


def read_field_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0] + 1j * data[:, 1], data[:, 2] + 1j * data[:, 3]


def write_residual_json(path, report: ResidualReport, grid_meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump({"residual": report.to_dict(), "grid": grid_meta or {}}, fh, indent=2)
