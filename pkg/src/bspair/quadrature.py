"""Quadrature building blocks for Cauchy-type kernels.

* Gauss-Legendre panels graded toward near-singular targets,
* Cauchy integrals along parametrised contour pieces,
* the exact area integral of 1/(z - zeta) over an axis-parallel rectangle,
* compiled direct sums sum_j c_j / (z_i - s_j).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numba
import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def composite_nodes(breaks: np.ndarray, order: int = 16):
    """Gauss nodes/weights on consecutive panels of a sorted breakpoint array."""
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1], breaks[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    x, w = gauss_legendre(order)
    nodes = a[:, None] + (b - a)[:, None] * x[None, :]
    weights = (b - a)[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def geometric_breaks(a: float, b: float, toward: float, smallest: float, ratio: float = 2.0) -> np.ndarray:
    """Breakpoints in [a, b] accumulating geometrically at ``toward``."""
    span = max(toward - a, b - toward)
    if span <= 0 or smallest <= 0:
        return np.array([a, b])
    nlev = int(np.ceil(np.log(span / smallest) / np.log(ratio))) + 1
    offs = smallest * ratio ** np.arange(nlev)
    pts = np.concatenate([[a, b, toward], toward - offs, toward + offs])
    return np.unique(np.clip(pts, a, b))


@dataclass
class ContourPiece:
    """A parametrised path gamma: [t0, t1] -> C carrying a density.

    ``density(t)`` gives the values integrated against d gamma/(gamma - z).
    ``grade_to`` lists parameters (typically the origin) where the density or
    the geometry degenerates; panels are refined geometrically there.
    """

    gamma: Callable[[np.ndarray], np.ndarray]
    dgamma: Callable[[np.ndarray], np.ndarray]
    density: Callable[[np.ndarray], np.ndarray]
    t0: float
    t1: float
    breakpoints: tuple[float, ...] = ()
    grade_to: tuple[float, ...] = ()
    name: str = "piece"
    _samples: np.ndarray | None = field(default=None, repr=False)

    def samples(self) -> np.ndarray:
        if self._samples is None:
            pts = [np.linspace(self.t0, self.t1, 513)]
            L = self.t1 - self.t0
            for g in self.grade_to:
                pts.append(geometric_breaks(self.t0, self.t1, g, 1e-15 * L))
            pts.append(np.asarray(self.breakpoints, dtype=float))
            t = np.unique(np.clip(np.concatenate(pts), self.t0, self.t1))
            self._samples = t
        return self._samples

    def base_breaks(self) -> np.ndarray:
        L = self.t1 - self.t0
        pts = [np.array([self.t0, self.t1]), np.asarray(self.breakpoints, dtype=float)]
        for g in self.grade_to:
            pts.append(geometric_breaks(self.t0, self.t1, g, 1e-15 * L))
        # uniform coarse panels keep long smooth stretches accurate
        pts.append(np.linspace(self.t0, self.t1, 9))
        t = np.concatenate(pts)
        return np.unique(t[(t >= self.t0) & (t <= self.t1)])


def nearest_param(piece: ContourPiece, z: np.ndarray):
    """Closest parameter on the piece for each target (golden refinement)."""
    t = piece.samples()
    g = piece.gamma(t)
    idx = np.empty(z.size, dtype=int)
    for s in range(0, z.size, 512):
        zz = z[s : s + 512]
        idx[s : s + 512] = np.argmin(np.abs(zz[:, None] - g[None, :]), axis=1)
    lo = t[np.maximum(idx - 1, 0)]
    hi = t[np.minimum(idx + 1, t.size - 1)]
    phi = 0.5 * (np.sqrt(5.0) - 1.0)
    for _ in range(60):
        m1 = hi - phi * (hi - lo)
        m2 = lo + phi * (hi - lo)
        f1 = np.abs(piece.gamma(m1) - z)
        f2 = np.abs(piece.gamma(m2) - z)
        left = f1 < f2
        hi = np.where(left, m2, hi)
        lo = np.where(left, lo, m1)
    ts = 0.5 * (lo + hi)
    return ts, np.abs(piece.gamma(ts) - z)


def cauchy_integral(pieces, z, order: int = 16, min_dist: float = 0.0) -> np.ndarray:
    """(1/2 pi i) sum over pieces of int density(t) gamma'(t) / (gamma(t) - z) dt.

    Panels are refined geometrically around the projection of every target so
    near-boundary targets keep full accuracy.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.zeros(z.shape, dtype=complex)
    flat = z.ravel()
    res = np.zeros(flat.size, dtype=complex)
    for piece in pieces:
        base = piece.base_breaks()
        L = piece.t1 - piece.t0
        ts, dist = nearest_param(piece, flat)
        speed = np.abs(piece.dgamma(ts))
        ends = piece.gamma(np.array([piece.t0, piece.t1]))
        closed = abs(ends[0] - ends[1]) <= 1e-12 * max(1.0, abs(ends[0]))
        for i, zi in enumerate(flat):
            dpar = max(dist[i], min_dist) / max(speed[i], 1e-300)
            if dpar < L:
                small = max(dpar, 1e-16 * L)
                extra = geometric_breaks(piece.t0, piece.t1, ts[i], small)
                if closed and min(ts[i] - piece.t0, piece.t1 - ts[i]) < 0.25 * L:
                    other = piece.t1 - (ts[i] - piece.t0) if ts[i] - piece.t0 < 0.25 * L else piece.t0 + (piece.t1 - ts[i])
                    extra = np.union1d(extra, geometric_breaks(piece.t0, piece.t1, other, small))
                br = np.union1d(base, extra)
            else:
                br = base
            tn, wn = composite_nodes(br, order)
            gam = piece.gamma(tn)
            val = piece.density(tn) * piece.dgamma(tn) / (gam - zi)
            res[i] += np.sum(wn * val)
    out.ravel()[:] = res / (2j * np.pi)
    return out


def rect_cauchy(z, x0, x1, y0, y1):
    """Exact integral of 1/(z - zeta) dA(zeta) over [x0,x1] x [y0,y1].

    Broadcasts over ``z`` and the rectangle bounds.  Uses the fan of signed
    triangles from z to the four edges, each integrated in polar coordinates
    about z in closed form.
    """
    z = np.asarray(z, dtype=complex)
    verts = [x0 + 1j * y0, x1 + 1j * y0, x1 + 1j * y1, x0 + 1j * y1]
    total = np.zeros(np.broadcast(z, x0, x1, y0, y1).shape, dtype=complex)
    for k in range(4):
        P, Q = verts[k], verts[(k + 1) % 4]
        e = (Q - P) / np.abs(Q - P)
        n = -1j * e
        dP = np.real((P - z) * np.conj(n))
        sP = np.real((P - z) * np.conj(e))
        sQ = np.real((Q - z) * np.conj(e))
        sg = np.where(dP >= 0, 1.0, -1.0)
        ad = np.abs(dP)
        phiP = np.arctan2(sg * sP, ad)
        phiQ = np.arctan2(sg * sQ, ad)
        rP = np.abs(P - z)
        rQ = np.abs(Q - z)
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where((rP > 0) & (rQ > 0), np.log(rP) - np.log(rQ), 0.0)
        contrib = -dP * np.conj(n) * ((phiQ - phiP) + 1j * logs)
        total = total + np.where(ad > 0, contrib, 0.0)
    return total


@numba.njit(cache=True)
def _cauchy_sum(targets, sources, coeffs, out):
    for i in range(targets.size):
        z = targets[i]
        acc = 0j
        for j in range(sources.size):
            d = z - sources[j]
            if d != 0:
                acc += coeffs[j] / d
        out[i] = acc


def cauchy_sum(targets, sources, coeffs) -> np.ndarray:
    """sum_j coeffs_j / (targets_i - sources_j); coincident pairs are skipped."""
    t = np.ascontiguousarray(np.ravel(targets), dtype=np.complex128)
    s = np.ascontiguousarray(np.ravel(sources), dtype=np.complex128)
    c = np.ascontiguousarray(np.ravel(coeffs), dtype=np.complex128)
    nz = c != 0
    out = np.empty(t.size, dtype=np.complex128)
    _cauchy_sum(t, s[nz], c[nz], out)
    return out.reshape(np.shape(targets))


def trapezoid_circle(center: complex, radius: float, n: int, clockwise: bool = True):
    """Equispaced nodes and complex weights dz on a circle."""
    theta = 2 * np.pi * np.arange(n) / n
    nodes = center + radius * np.exp(1j * theta)
    dz = 1j * radius * np.exp(1j * theta) * (2 * np.pi / n)
    return nodes, (-dz if clockwise else dz)
