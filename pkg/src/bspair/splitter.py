"""Splitting f = f1 + f2 from a solution of d-bar u = f dbar(chi).

f1 = f chi - u and f2 = f (1 - chi) + u.  Since chi vanishes below the corridor
and equals 1 above it (near the origin), f1 coincides with -u near the lower
set and f2 with u near the upper set, so each piece inherits the singularities
of f on one side only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import shapely
from shapely.geometry import Polygon

from .cutting import CuttingFunction, chi_eval
from .dbar import (
    CutDensity,
    SolutionField,
    cr_residual,
    jones_solution,
    plateau_scan,
    standard_cauchy_solution,
    tangential_solution,
    transversal_solution,
    write_field_csv,
)
from .errors import ConstructionError, InvalidTestFunctionError, SeparationError
from .geometry import ParametricArc, separation_check
from .quadrature import ContourPiece, cauchy_integral

PLATEAU_GROWTH = 0.10


@dataclass
class AnalyticFunction:
    """A bounded analytic function off a closed set, given by a vectorised evaluator.

    ``singular`` holds sample points of the set where the function may fail to
    be analytic; ``on_singular`` (optional) is a predicate for that set, where
    the function is extended by 0.
    """

    evaluate: Callable
    singular: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    bound: float | None = None
    name: str = "f"
    on_singular: Callable | None = None

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        val = np.asarray(self.evaluate(z), dtype=complex) * np.ones(z.shape)
        if self.on_singular is not None:
            val = np.where(self.on_singular(z), 0.0, val)
        return val


# --------------------------------------------------------------------------
# test catalog


def constant_function(value: complex = 1.0) -> AnalyticFunction:
    return AnalyticFunction(lambda z: np.full(np.shape(z), complex(value)), bound=abs(value), name=f"const({value})")


def _arc_polygon(arc_pts: np.ndarray):
    """Region between a polyline arc and the chord joining its ends."""
    span = float(np.max(np.abs(arc_pts - arc_pts[0])))
    chord = arc_pts[-1] - arc_pts[0]
    off = np.abs(((arc_pts - arc_pts[0]) * np.conj(chord)).imag) / abs(chord)
    if np.max(off) <= 1e-12 * span:
        return None
    ring = np.column_stack([arc_pts.real, arc_pts.imag])
    poly = Polygon(ring)
    if poly.is_valid and poly.area < 1e-12 * span**2:
        return None
    if not poly.is_valid:
        raise ConstructionError("arc crosses its chord: no simple region to carry the branch correction")
    return poly


def mobius_power(arc: ParametricArc | np.ndarray, beta: float, n: int = 2001) -> AnalyticFunction:
    """w(z)^{i beta} with w = (z - p)/(z - q), p, q the endpoints of ``arc``.

    The principal logarithm cuts along the chord [p, q]; the region between the
    chord and the arc receives a 2 pi i correction so the cut follows the arc.
    The branch tends to 0 at infinity, so |f| = exp(-beta arg w).
    """
    pts = arc(np.linspace(0, 1, n)) if isinstance(arc, ParametricArc) else np.asarray(arc, dtype=complex)
    p, q = complex(pts[0]), complex(pts[-1])
    if abs(p - q) < 1e-14:
        raise ConstructionError("arc endpoints coincide")
    poly = _arc_polygon(pts)
    shift = 0.0
    if poly is not None:
        chord = q - p
        nrm = 1j * chord / abs(chord)
        eps = 1e-7 * abs(chord)
        mids = p + chord * np.array([0.25, 0.5, 0.75])
        jumps = []
        for m in mids:
            a, b = m + eps * nrm, m - eps * nrm
            ina = shapely.contains_xy(poly, a.real, a.imag)
            inb = shapely.contains_xy(poly, b.real, b.imag)
            if ina == inb:
                continue
                # chord point not on the region boundary here (arc meets chord)
            zin, zout = (a, b) if ina else (b, a)
            la = np.log((zin - p) / (zin - q))
            lb = np.log((zout - p) / (zout - q))
            jumps.append((lb.imag - la.imag) / (2 * np.pi))
        if not jumps:
            raise ConstructionError("could not locate the region between the arc and its chord")
        s = np.round(np.mean(jumps))
        if np.max(np.abs(np.asarray(jumps) - s)) > 1e-3 or s == 0:
            raise ConstructionError("branch cut does not follow the declared arc")
        shift = float(s)

    def log_w(z):
        z = np.asarray(z, dtype=complex)
        lw = np.log((z - p) / (z - q))
        if poly is not None:
            inside = shapely.contains_xy(poly, z.real, z.imag)
            lw = lw + 2j * np.pi * shift * inside
        return lw

    # continuity across the chord is a construction invariant
    if poly is not None:
        chord = q - p
        nrm = 1j * chord / abs(chord)
        for m in p + chord * np.linspace(0.1, 0.9, 9):
            eps = 1e-8 * abs(chord)
            d = abs(log_w(m + eps * nrm) - log_w(m - eps * nrm))
            on_arc = np.min(np.abs(pts - m)) < 1e-6 * abs(chord)
            if d > 1e-4 and not on_arc:
                raise ConstructionError("branch correction failed the continuity test")

    grid = np.concatenate([pts + 1e-9 * (1 + 1j), pts - 1e-9 * (1 + 1j)])
    bound = float(np.max(np.exp(-beta * log_w(grid).imag)))
    return AnalyticFunction(
        lambda z: np.exp(1j * beta * log_w(z)),
        singular=pts,
        bound=max(bound, float(np.exp(beta * np.pi))),
        name=f"mobius_power(beta={beta})",
    )


def arc_cauchy_transform(arc: ParametricArc, density: Callable | None = None) -> AnalyticFunction:
    """(1/2 pi i) int_arc phi(t) gamma'(t) dt / (gamma(t) - z), phi Holder with phi = 0 at the ends."""
    phi = density if density is not None else (lambda t: t * (1 - t))
    ends = np.asarray(phi(np.array([0.0, 1.0])), dtype=complex)
    if np.max(np.abs(ends)) > 1e-12:
        raise InvalidTestFunctionError("density must vanish at the arc endpoints")
    piece = ContourPiece(
        gamma=lambda t: arc(t),
        dgamma=lambda t: arc.dgamma(np.asarray(t, float)),
        density=lambda t: np.asarray(phi(t), dtype=complex),
        t0=0.0,
        t1=1.0,
        grade_to=(0.0, 1.0),
        name="arc-density",
    )
    pts = arc(np.linspace(0, 1, 401))
    return AnalyticFunction(lambda z: cauchy_integral([piece], z), singular=pts, name="arc_cauchy")


def test_function(kind: str, **params) -> AnalyticFunction:
    """Catalog of bounded analytic test functions.

    kinds: ``constant`` (value), ``mobius_power`` (arc, beta), ``cauchy`` (arc,
    density), ``witness`` (pair, x, schedule, j), ``poles`` (see scenarios).
    """
    if kind in ("constant", "i"):
        return constant_function(params.get("value", 1.0))
    if kind in ("mobius_power", "ii"):
        return mobius_power(params["arc"], params.get("beta", 1.0))
    if kind in ("cauchy", "iii"):
        return arc_cauchy_transform(params["arc"], params.get("density"))
    if kind in ("witness", "iv"):
        from .witness import witness_function

        return witness_function(**params)
    if kind == "poles":
        from .scenarios import pole_catalog_function

        return pole_catalog_function(**params)
    raise InvalidTestFunctionError(f"unknown test function kind {kind!r}")


test_function.__test__ = False  # not a pytest test


# --------------------------------------------------------------------------
# splitting


SOLVERS = ("standard", "jones", "transversal", "tangential")


def solve(f: Callable, cf: CuttingFunction, solver: str | Callable, **options) -> SolutionField:
    """Run one of the d-bar constructions on rho = f dbar(chi)."""
    if callable(solver):
        return solver(CutDensity(f, cf))
    if solver == "standard":
        return standard_cauchy_solution(CutDensity(f, cf))
    if solver == "jones":
        return jones_solution(CutDensity(f, cf), probes=options.get("probes"))
    if solver == "transversal":
        return transversal_solution(CutDensity(f, cf))
    if solver == "tangential":
        return tangential_solution(f, cf, options["b"], options.get("contour_weight", 1.0))
    raise ValueError(f"unknown solver {solver!r}")


@dataclass
class SplitResult:
    f: AnalyticFunction
    f1: AnalyticFunction
    f2: AnalyticFunction
    u: SolutionField
    cf: CuttingFunction
    diagnostics: dict = field(default_factory=dict)


def split(
    f: AnalyticFunction,
    cf: CuttingFunction,
    solver: str | Callable = "transversal",
    s1=None,
    s2=None,
    probe=None,
    **options,
) -> SplitResult:
    """f1 = f chi - u, f2 = f (1 - chi) + u with u from the chosen d-bar solver.

    ``s1``/``s2`` are samples of the lower and upper singular sets; when given
    they are checked against the corridor before solving.  f1 is analytic near
    ``s1`` (it equals -u there) and carries the singularities on ``s2``; f2 the
    other way round.
    """
    s1 = np.zeros(0, complex) if s1 is None else np.asarray(s1, dtype=complex)
    s2 = np.zeros(0, complex) if s2 is None else np.asarray(s2, dtype=complex)
    near1 = s1[(np.abs(s1) > 0) & (np.abs(s1) < cf.outer)]
    near2 = s2[(np.abs(s2) > 0) & (np.abs(s2) < cf.outer)]
    if near1.size or near2.size:
        rep = separation_check(near1, near2, cf.g, cf.mu)
        if not rep.ok:
            raise SeparationError(f"singular sets are not separated by the corridor: {rep.violations[:3]}")
    u = solve(f, cf, solver, **options)

    def f1_eval(z):
        z = np.asarray(z, dtype=complex)
        return f(z) * chi_eval(cf, z) - u(z)

    def f2_eval(z):
        z = np.asarray(z, dtype=complex)
        return f(z) - f1_eval(z)

    f1 = AnalyticFunction(f1_eval, singular=s2, name="f1")
    f2 = AnalyticFunction(f2_eval, singular=s1, name="f2")
    sr = SplitResult(f=f, f1=f1, f2=f2, u=u, cf=cf)
    if probe is not None:
        sr.diagnostics = verify_split(sr, probe)
    return sr


def guarded_points(sr: SplitResult, z, h: float, band: float | None = None) -> np.ndarray:
    """Points whose stencil stays away from S and from the corridor boundary lines."""
    z = np.ravel(np.asarray(z, dtype=complex))
    band = max(4 * h, band or 0.0)
    rho = CutDensity(sr.f, sr.cf)
    keep = (rho.discontinuity_distance(z) > band) & (z.imag > band)
    for s in (sr.f1.singular, sr.f2.singular, sr.f.singular):
        if np.size(s):
            d = np.min(np.abs(z[:, None] - np.ravel(s)[None, :]), axis=1)
            keep &= d > band
    return z[keep]


def verify_split(
    sr: SplitResult,
    probe,
    h: float = 1e-3,
    r_max: float | None = None,
    levels: int = 4,
    factor: float = 256.0,
    centers=(0j,),
) -> dict:
    """Identity, analyticity and boundedness diagnostics for a split.

    Boundedness: sup |f_j| over nested regions delta_l <= |z - c| <= r_max
    (delta_l = r_max factor^-(l+1)) around each accumulation point c; any
    growth above 10% per level marks the piece NOT-CERTIFIED-BOUNDED.
    """
    probe = np.ravel(np.asarray(probe, dtype=complex))
    fv, f1v, f2v = sr.f(probe), sr.f1(probe), sr.f2(probe)
    direct_f2 = fv * (1 - chi_eval(sr.cf, probe)) + sr.u(probe)
    scale = max(float(np.max(np.abs(fv))), 1.0)
    pts = guarded_points(sr, probe, h)
    diag = {
        "identity_residual": float(np.max(np.abs(f1v + f2v - fv))) / scale,
        "f2_formula_residual": float(np.max(np.abs(f2v - direct_f2))) / scale,
        "cr_residual_f1_off_S1": cr_residual(sr.f1, pts, h) if pts.size else 0.0,
        "cr_residual_f2_off_S2": cr_residual(sr.f2, pts, h) if pts.size else 0.0,
        "cr_points": int(pts.size),
        "f1_singular_on": "upper set" if np.size(sr.f1.singular) else "declared none",
        "f2_singular_on": "lower set" if np.size(sr.f2.singular) else "declared none",
        "solver": sr.u.solver,
        "solver_meta": {k: v for k, v in sr.u.meta.items() if isinstance(v, (int, float, str, list))},
    }
    r_max = float(sr.cf.R) / 2 if r_max is None else r_max
    scans = {}
    for name, fn in (("f1", sr.f1), ("f2", sr.f2), ("u", sr.u)):
        per_center = []
        for c in centers:
            sc = plateau_scan(lambda z, fn=fn, c=c: fn(z + c), r_max if c == 0 else min(r_max, 0.9 * abs(c.imag)),
                              levels=levels, factor=factor,
                              theta=(0.0, np.pi) if c == 0 else (0.0, 2 * np.pi))
            per_center.append({"center": [c.real, c.imag], **sc.to_dict()})
        worst = max(max(s["growth"]) if s["growth"] else 0.0 for s in per_center)
        scans[name] = {
            "scans": per_center,
            "max_growth": worst,
            "status": "CERTIFIED-BOUNDED" if worst < PLATEAU_GROWTH else "NOT-CERTIFIED-BOUNDED",
        }
    diag["plateau"] = scans
    diag["sup_f1"] = max(s["sups"][-1] for s in scans["f1"]["scans"])
    diag["sup_f2"] = max(s["sups"][-1] for s in scans["f2"]["scans"])
    return diag


def export_split(sr: SplitResult, grid, prefix) -> None:
    """CSV dumps of f1, f2, u on ``grid`` plus a JSON diagnostics summary."""
    grid = np.ravel(np.asarray(grid, dtype=complex))
    for name, fn in (("f1", sr.f1), ("f2", sr.f2), ("u", sr.u)):
        write_field_csv(f"{prefix}_{name}.csv", grid, fn(grid))
    with open(f"{prefix}_diagnostics.json", "w") as fh:
        json.dump(sr.diagnostics, fh, indent=2, default=float)
