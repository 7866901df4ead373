"""Witness families showing that two graphs meeting tangentially are not separable.

For x -> 0 we build arcs K_j = {t + i phi_j(t) : x <= t <= X} and the Cauchy
integrals W_j of a trapezoid density over them.  W_1 + W_2 stays bounded while
W_1 blows up at A = x + i phi_1(x) like (1/2 pi) log((X - x)/h); the cell-gap
inequality turns this into a lower bound for any bounded splitting.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field

import cvxpy as cp
import numpy as np
import shapely
from shapely.geometry import LineString, Point, Polygon

from .errors import (
    AmbiguityError,
    ContainmentError,
    InvalidCellError,
    InvalidTestFunctionError,
    ScheduleInfeasibleError,
    SingularPointError,
)
from .geometry import GraphFunction
from .quadrature import ContourPiece, cauchy_integral, composite_nodes, geometric_breaks

# --------------------------------------------------------------------------
# cells


@dataclass
class Cell:
    """A Jordan domain given by a closed polyline, with a marked centre."""

    boundary: np.ndarray
    center: complex
    name: str = "cell"
    _poly: Polygon | None = field(default=None, repr=False)

    def __post_init__(self):
        b = np.asarray(self.boundary, dtype=complex)
        if abs(b[0] - b[-1]) > 0:
            b = np.append(b, b[0])
        self.boundary = b
        poly = Polygon(np.column_stack([b.real, b.imag]))
        if not poly.is_valid or poly.area <= 0:
            raise InvalidCellError("cell boundary is not a simple closed curve")
        c = complex(self.center)
        if not poly.contains(Point(c.real, c.imag)):
            raise InvalidCellError("centre is not strictly inside the cell")
        self._poly = poly

    @property
    def polygon(self) -> Polygon:
        return self._poly

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return shapely.contains_xy(self._poly, z.real, z.imag)


def disc_cell(center: complex, radius: float, offset: complex = 0.0, n: int = 1 << 17) -> Cell:
    """Disc of the given radius around ``center``; the marked point is center + offset."""
    th = 2 * np.pi * np.arange(n) / n
    return Cell(center + radius * np.exp(1j * th), center + offset, name="disc")


def rotundity(cell: Cell) -> float:
    """2 pi dist(A, boundary) / length(boundary); 1 exactly for a centred disc."""
    ring = cell.polygon.exterior
    c = complex(cell.center)
    return float(2 * np.pi * ring.distance(Point(c.real, c.imag)) / ring.length)


# --------------------------------------------------------------------------
# schedules


class Schedule(str, enum.Enum):
    ANGLE = "ANGLE"
    UPPER_ANGLE = "UPPER_ANGLE"


@dataclass(frozen=True)
class WitnessParams:
    """Window [x, X] with ramps of width h at both ends."""

    x: float
    X: float
    h: float
    schedule: str = "CUSTOM"
    eps: float | None = None

    def __post_init__(self):
        if not (self.x > 0 and self.h > 0):
            raise ScheduleInfeasibleError("x and h must be positive", self.x)
        if not self.x < self.x1 <= self.x2 < self.X:
            raise ScheduleInfeasibleError("need x < x + h <= X - h < X", self.x)

    @property
    def x1(self) -> float:
        return self.x + self.h

    @property
    def x2(self) -> float:
        return self.X - self.h


def _sup_on(fn, a: float, b: float, n: int = 4001, depth: int = 40) -> float:
    """sup of fn over (a, b], sampled uniformly and geometrically toward a."""
    t = np.concatenate([np.linspace(a, b, n)[1:], a + (b - a) * 2.0 ** -np.linspace(0, depth, 4 * depth)])
    return float(np.max(fn(t)))


def check_proximity(params: WitnessParams, phi1: GraphFunction, phi2: GraphFunction, n: int = 4001) -> None:
    """Delta(t) <= h on [x, X] at grid resolution."""
    t = np.linspace(params.x, params.X, n)
    delta = phi2(t) - phi1(t)
    bad = np.flatnonzero(delta > params.h * (1 + 1e-12))
    if bad.size:
        raise ScheduleInfeasibleError(
            f"Delta(t) = {delta[bad[0]]:.3e} exceeds h = {params.h:.3e} at t = {t[bad[0]]:.6e}", float(t[bad[0]])
        )


def schedule(kind: str, x: float, phi1: GraphFunction, phi2: GraphFunction, n: int = 4001) -> WitnessParams:
    """Window and ramp width for one member of the witness family.

    ANGLE: eps = sup (|phi1| + |phi2|)/t over (0, 2x], X = 2x, h = 2 eps x.
    UPPER_ANGLE: X = x + phi1(x)/2, eps = Delta(x)/phi1(x) + sup_{[0,X]} |Delta'|,
    h = 2 phi1(x) eps.
    """
    kind = Schedule(kind)
    if kind is Schedule.ANGLE:
        eps = _sup_on(lambda t: (np.abs(phi1(t)) + np.abs(phi2(t))) / t, 0.0, 2 * x, n)
        X, h = 2 * x, 2 * eps * x
    else:
        p1 = float(phi1(np.array(x)))
        if not p1 > 0:
            raise ScheduleInfeasibleError("UPPER_ANGLE needs phi1 > 0", x)
        X = x + 0.5 * p1
        delta_x = float(phi2(np.array(x)) - p1)
        tt = np.linspace(0.0, X, n)
        dmax = float(np.max(np.abs(phi2.d(tt) - phi1.d(tt))))
        eps = delta_x / p1 + dmax
        h = 2 * p1 * eps
    if not 2 * h <= X - x:
        raise ScheduleInfeasibleError(f"ramp width h = {h:.3e} leaves no plateau in [x, X]", x)
    params = WitnessParams(x=float(x), X=float(X), h=float(h), schedule=kind.value, eps=float(eps))
    check_proximity(params, phi1, phi2, n)
    return params


def cell_for(kind: str, x: float, phi1: GraphFunction, k: float, X: float | None = None) -> Cell:
    """The cell centred at A = x + i phi1(x).

    ANGLE: the full angle |eta| < k xi truncated at Re < 3x.  UPPER_ANGLE: the
    square (x - phi1(x), x + phi1(x)) x (0, 2 phi1(x)).  When X is given, the
    arc K_1 over [x, X] is checked to lie in the closed cell.
    """
    kind = Schedule(kind)
    p1 = float(phi1(np.array(x)))
    A = complex(x, p1)
    if kind is Schedule.ANGLE:
        bnd = np.array([0.0, 3 * x * (1 - 1j * k), 3 * x * (1 + 1j * k)])
    else:
        if not p1 > 0:
            raise InvalidCellError("square cell needs phi1(x) > 0")
        bnd = np.array([x - p1, x + p1, x + p1 + 2j * p1, x - p1 + 2j * p1])
    cell = Cell(bnd, A, name=kind.value)
    if X is not None:
        t = np.linspace(x, X, 2001)
        arc = t + 1j * phi1(t)
        inside = shapely.contains_xy(cell.polygon, arc.real, arc.imag)
        on = np.array([cell.polygon.exterior.distance(Point(p.real, p.imag)) for p in arc[~inside]])
        if on.size and np.max(on) > 1e-12 * x:
            raise ContainmentError("arc K_1 leaves the cell")
    return cell


# --------------------------------------------------------------------------
# witness functions


def trapezoid(params: WitnessParams):
    """0 off (x, X), 1 on [x1, x2], linear ramps of slope 1/h in between."""
    x, x1, x2, X, h = params.x, params.x1, params.x2, params.X, params.h

    def f(t):
        t = np.asarray(t, dtype=float)
        return np.clip(np.minimum((t - x) / h, (X - t) / h), 0.0, 1.0) * ((t > x) & (t < X))

    return f


@dataclass
class WitnessPair:
    params: WitnessParams
    phi1: GraphFunction
    phi2: GraphFunction

    def __post_init__(self):
        t = np.linspace(self.params.x, self.params.X, 2001)
        if np.any(self.phi2(t) <= self.phi1(t)):
            raise InvalidCellError("arcs K_1 and K_2 must be disjoint with phi1 < phi2")

    def graph(self, j: int) -> GraphFunction:
        return self.phi1 if j == 1 else self.phi2

    def arc(self, j: int, n: int = 2001) -> np.ndarray:
        t = np.linspace(self.params.x, self.params.X, n)
        return t + 1j * self.graph(j)(t)

    @property
    def A(self) -> complex:
        return complex(self.params.x, float(self.phi1(np.array(self.params.x))))

    def piece(self, j: int) -> ContourPiece:
        phi = self.graph(j)
        p = self.params
        f = trapezoid(p)
        return ContourPiece(
            gamma=lambda t: t + 1j * phi(t),
            dgamma=lambda t: 1 + 1j * phi.d(t),
            density=lambda t: f(t).astype(complex),
            t0=p.x,
            t1=p.X,
            breakpoints=(p.x1, p.x2),
            grade_to=(p.x, p.X),
            name=f"K{j}",
        )


def _graph_pv(pair: WitnessPair, j: int, t0: float, order: int = 16) -> complex:
    """p.v. int_x^X f(t) z'(t) dt / (z(t) - z(t0)) for z = t + i phi_j(t)."""
    p = pair.params
    phi = pair.graph(j)
    f = trapezoid(p)
    z0 = complex(t0, float(phi(np.array(t0))))
    f0 = float(f(np.array(t0)))
    br = np.union1d(geometric_breaks(p.x, p.X, t0, 1e-12 * (p.X - p.x)), [p.x, p.x1, p.x2, p.X])
    tn, wn = composite_nodes(br, order)
    z = tn + 1j * phi(tn)
    dz = 1 + 1j * phi.d(tn)
    d = z - z0
    reg = np.sum(np.where(d != 0, wn * (f(tn) - f0) * dz / np.where(d != 0, d, 1.0), 0.0))
    za = complex(p.x, float(phi(np.array(p.x))))
    zb = complex(p.X, float(phi(np.array(p.X))))
    if f0 == 0.0:
        return complex(reg)
    # p.v. of dz/(z - z0): real part log-ratio, imaginary part the turning of the chords
    lg = np.log(abs(zb - z0) / abs(za - z0)) + 1j * (np.angle(zb - z0) - np.angle(z0 - za))
    return complex(reg + f0 * lg)


def phi_witness(j: int, pair: WitnessPair, zeta, side: str | None = None, tol: float = 1e-12) -> np.ndarray:
    """W_j(zeta) = (-1)^{j-1} (1/2 pi i) int_{K_j} f(Re z) dz / (z - zeta), K_j oriented left to right.

    Points on the open arc need ``side`` = "+" (limit from above, the left of
    the orientation) or "-".  The endpoints carry zero density and need no side.
    """
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    sign = 1.0 if j == 1 else -1.0
    zeta = np.asarray(zeta, dtype=complex)
    flat = zeta.ravel()
    p = pair.params
    phi = pair.graph(j)
    out = np.empty(flat.size, dtype=complex)
    on = (flat.real >= p.x) & (flat.real <= p.X) & (np.abs(flat.imag - phi(np.clip(flat.real, p.x, p.X))) <= tol * p.X)
    if np.any(~on):
        out[~on] = cauchy_integral([pair.piece(j)], flat[~on])
    f = trapezoid(p)
    for i in np.flatnonzero(on):
        t0 = float(flat[i].real)
        f0 = float(f(np.array(t0)))
        if f0 != 0.0 and side not in ("+", "-"):
            raise AmbiguityError("zeta lies on the arc: choose side '+' or '-'")
        jump = 0.0 if f0 == 0.0 else (0.5 * f0 if side == "+" else -0.5 * f0)
        out[i] = _graph_pv(pair, j, t0) / (2j * np.pi) + jump
    return sign * out.reshape(zeta.shape)


def phi1_at_A(pair: WitnessPair) -> complex:
    """Boundary value of W_1 at A = x + i phi1(x), by direct quadrature."""
    return complex(phi_witness(1, pair, np.array([pair.A]))[0])


def blowup_lower_bound(params: WitnessParams) -> float:
    """(1/2 pi) log((x2 - x1)/(2h)) - 2."""
    gap = params.x2 - params.x1
    if gap <= 0:
        return -np.inf
    return float(np.log(gap / (2 * params.h)) / (2 * np.pi) - 2.0)


def witness_function(pair: WitnessPair, j: int = 1, **_):
    """W_j as an AnalyticFunction for the splitting catalog."""
    from .splitter import AnalyticFunction

    return AnalyticFunction(lambda z: phi_witness(j, pair, z), singular=pair.arc(j), name=f"W{j}")


# --------------------------------------------------------------------------
# certificates


@dataclass
class SumScan:
    value: float
    far_value: float
    delta_probe: float
    n_probes: int
    argmax: complex


def arc_probes(pair: WitnessPair, j: int, delta: float, n: int = 160) -> np.ndarray:
    """Points at normal distance delta on both sides of K_j, denser near the ramps."""
    p = pair.params
    t = np.unique(
        np.concatenate(
            [
                np.linspace(p.x, p.X, n),
                geometric_breaks(p.x, p.X, p.x, delta / 4),
                geometric_breaks(p.x, p.X, p.X, delta / 4),
                np.linspace(p.x, p.x1, 12),
                np.linspace(p.x2, p.X, 12),
            ]
        )
    )
    phi = pair.graph(j)
    z = t + 1j * phi(t)
    nrm = 1j * (1 + 1j * phi.d(t))
    nrm = nrm / np.abs(nrm)
    return np.concatenate([z + delta * nrm, z - delta * nrm])


def sum_bound_scan(pair: WitnessPair, delta_probe: float | None = None, n: int = 160, far: float = 10.0) -> SumScan:
    """sup |W_1 + W_2| over one-sided probes along both arcs and a far ring."""
    p = pair.params
    delta = p.h / 10 if delta_probe is None else delta_probe
    pts = np.concatenate([arc_probes(pair, 1, delta, n), arc_probes(pair, 2, delta, n)])
    vals = np.abs(phi_witness(1, pair, pts) + phi_witness(2, pair, pts))
    ring = far * p.X * np.exp(2j * np.pi * np.arange(64) / 64)
    fv = np.abs(phi_witness(1, pair, ring) + phi_witness(2, pair, ring))
    i = int(np.argmax(vals))
    return SumScan(
        value=float(max(vals.max(), fv.max())),
        far_value=float(fv.max()),
        delta_probe=float(delta),
        n_probes=int(pts.size + ring.size),
        argmax=complex(pts[i]),
    )


def kernel_split(t, t0, phi1: GraphFunction, phi2: GraphFunction):
    """(K1, K2) with K1 + K2 = z1'/(z1 - z0) - z2'/(z2 - z0), z0 = t0 + i phi1(t0)."""
    t = np.asarray(t, dtype=float)
    t0 = np.asarray(t0, dtype=float)
    if np.any(t == t0):
        raise SingularPointError("kernel is singular at t = t0")

    def rem(lam):
        return lam(t) - lam(t0) - lam.d(t) * (t - t0)

    class _Delta:
        def __call__(self, s):
            return phi2(s) - phi1(s)

        def d(self, s):
            return phi2.d(s) - phi1.d(s)

    delta = _Delta()
    z0 = t0 + 1j * phi1(t0)
    z1 = t + 1j * phi1(t)
    z2 = t + 1j * phi2(t)
    den = (z1 - z0) * (z2 - z0)
    k1 = (1j * rem(delta) + phi2.d(t) * rem(phi1) - phi1.d(t) * rem(phi2)) / den
    k2 = 1j * delta(t0) * (1 + 1j * phi1.d(t)) / den
    return k1, k2


def direct_kernel(t, t0, phi1: GraphFunction, phi2: GraphFunction):
    t = np.asarray(t, dtype=float)
    z0 = t0 + 1j * phi1(t0)
    return (1 + 1j * phi1.d(t)) / (t + 1j * phi1(t) - z0) - (1 + 1j * phi2.d(t)) / (t + 1j * phi2(t) - z0)


# --------------------------------------------------------------------------
# cell-gap inequality


def minimax_polynomial(z, values, degree: int = 4, center: complex = 0.0):
    """Coefficients c minimising max_i |values_i - sum_k c_k (z_i - center)^k|."""
    z = np.ravel(np.asarray(z, dtype=complex))
    v = np.ravel(np.asarray(values, dtype=complex))
    scale = max(float(np.max(np.abs(z - center))), 1e-300)
    V = ((z - center)[:, None] / scale) ** np.arange(degree + 1)[None, :]
    c = cp.Variable(degree + 1, complex=True)
    prob = cp.Problem(cp.Minimize(cp.max(cp.abs(V @ c - v))))
    prob.solve()
    coeffs = np.asarray(c.value) / scale ** np.arange(degree + 1)
    return coeffs


def polynomial(coeffs, center: complex = 0.0):
    coeffs = np.asarray(coeffs, dtype=complex)
    return lambda z: np.polyval(coeffs[::-1], np.asarray(z, dtype=complex) - center)


def cell_probe_grid(cell: Cell, K: np.ndarray, n: int = 40, clearance: float | None = None) -> np.ndarray:
    """Probe points in the cell away from the arc, including a ring close to A."""
    xmin, ymin, xmax, ymax = cell.polygon.bounds
    x, y = np.meshgrid(np.linspace(xmin, xmax, n + 2)[1:-1], np.linspace(ymin, ymax, n + 2)[1:-1])
    z = (x + 1j * y).ravel()
    A = complex(cell.center)
    d_bnd = cell.polygon.exterior.distance(Point(A.real, A.imag))
    rings = np.concatenate(
        [A + r * np.exp(1j * np.linspace(0, 2 * np.pi, 48, endpoint=False)) for r in d_bnd * np.geomspace(1e-6, 0.9, 12)]
    )
    z = np.concatenate([z, rings])
    z = z[cell.contains(z)]
    line = LineString(np.column_stack([np.real(K), np.imag(K)]))
    clearance = 1e-9 * d_bnd if clearance is None else clearance
    dist = shapely.distance(line, shapely.points(z.real, z.imag))
    return z[dist > clearance]


@dataclass
class CellGapReport:
    lhs: float
    rhs: float
    rotundity: float
    phi_at_A: float
    n_probes: int
    holds: bool


def cell_gap(phi, cell: Cell, K: np.ndarray, h_test=None, phi_A: complex | None = None, n: int = 40,
                cr_tol: float = 1e-6) -> CellGapReport:
    """lhs = sup |phi - h_test| over cell minus K, rhs = (rotundity/2) |phi(A)|.

    ``phi_A`` is the boundary value of phi at the centre (evaluated from phi at
    the centre when omitted).  ``h_test`` must be analytic in the cell.
    """
    z = cell_probe_grid(cell, K, n)
    if h_test is not None:
        interior = z[cell.polygon.exterior.distance(shapely.points(z.real, z.imag)) > 1e-3 * np.sqrt(cell.polygon.area)]
        scale = np.sqrt(cell.polygon.area)
        if _not_analytic(h_test, interior, scale, cr_tol):
            raise InvalidTestFunctionError("test function is not analytic in the cell")
    pv = phi(z)
    hv = np.zeros_like(pv) if h_test is None else np.asarray(h_test(z), dtype=complex)
    lhs = float(np.max(np.abs(pv - hv)))
    A = complex(cell.center)
    val = complex(phi(np.array([A]))[0]) if phi_A is None else complex(phi_A)
    rho = rotundity(cell)
    rhs = 0.5 * rho * abs(val)
    return CellGapReport(lhs=lhs, rhs=float(rhs), rotundity=rho, phi_at_A=abs(val), n_probes=int(z.size), holds=bool(lhs >= rhs))


lemma21_gap = cell_gap  # published interface name


def _not_analytic(fn, z, scale: float, tol: float) -> bool:
    from .dbar import cr_residual

    if not np.size(z):
        return False
    return cr_residual(fn, z, 1e-3 * scale) > tol


# --------------------------------------------------------------------------
# family scans and reports


def witness_report(pair: WitnessPair, cell: Cell | None = None, scan: bool = True) -> dict:
    p = pair.params
    val = phi1_at_A(pair)
    rep = {
        "x": p.x,
        "X": p.X,
        "h": p.h,
        "eps": p.eps,
        "schedule": p.schedule,
        "log_ratio": float(np.log((p.X - p.x) / p.h)),
        "phi1_at_A": abs(val),
        "lower_bound": blowup_lower_bound(p),
    }
    if scan:
        s = sum_bound_scan(pair)
        rep["sum_scan"] = s.value
        rep["delta_probe"] = s.delta_probe
    if cell is not None:
        rep["rotundity"] = rotundity(cell)
    return rep


def witness_family(kind: str, phi1: GraphFunction, phi2: GraphFunction, xs, k: float = 1.0, scan: bool = True) -> list[dict]:
    rows = []
    for x in xs:
        params = schedule(kind, float(x), phi1, phi2)
        pair = WitnessPair(params, phi1, phi2)
        cell = cell_for(kind, float(x), phi1, k, params.X)
        rows.append(witness_report(pair, cell, scan))
    return rows


def blowup_slope(rows: list[dict]) -> float:
    """Least-squares slope of |W_1(A)| against log((X - x)/h)."""
    L = np.array([r["log_ratio"] for r in rows])
    v = np.array([r["phi1_at_A"] for r in rows])
    return float(np.polyfit(L, v, 1)[0])


def write_family_csv(path, rows: list[dict]) -> None:
    import csv

    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=keys)
        wr.writeheader()
        for r in rows:
            wr.writerow(r)


def write_report_json(path, report) -> None:
    with open(path, "w") as fh:
        json.dump(report if isinstance(report, (dict, list)) else asdict(report), fh, indent=2, default=str)
