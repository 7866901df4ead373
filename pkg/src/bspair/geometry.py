"""Half-plane hyperbolic geometry, graph/arc representations and the
bounded-separation classifier for pairs of arcs meeting at the origin."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq
from shapely.geometry import LineString

from .errors import (
    DegenerateTangentError,
    DomainError,
    InvalidPairError,
    UndefinedCorridorError,
)

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GraphFunction:
    """A real C^{1+eps} function given by value and derivative callables.

    Both callables are vectorised and accept any real argument; graphs used
    as corridor profiles are extended by zero to the left of the origin.
    ``kinks`` lists abscissae where the derivative may jump.
    """

    b: float
    value: ArrayFn
    derivative: ArrayFn
    holder_exponent: float = 1.0
    lipschitz_bound: float | None = None
    origin_anchored: bool = True
    kinks: tuple[float, ...] = ()
    positive_intervals: tuple[tuple[float, float], ...] | None = None
    name: str = "graph"

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("domain_end b must be positive")
        if not 0 < self.holder_exponent <= 1:
            raise ValueError("holder exponent must lie in (0, 1]")

    def __call__(self, xi):
        return self.value(np.asarray(xi, dtype=float))

    def d(self, xi):
        return self.derivative(np.asarray(xi, dtype=float))

    def samples(self, n: int = 2001, depth: int = 30) -> np.ndarray:
        """Sample abscissae in (0, b]: uniform plus geometric toward 0."""
        geo = self.b * 2.0 ** -np.linspace(0, depth, 4 * depth + 1)
        return np.unique(np.concatenate([np.linspace(0, self.b, n)[1:], geo]))

    def check_lipschitz(self, n: int = 4001) -> float:
        t = np.linspace(0, self.b, n)
        return float(np.max(np.abs(self.d(t))))

    def support(self) -> tuple[tuple[float, float], ...]:
        """Maximal intervals where the graph is positive."""
        if self.positive_intervals is not None:
            return self.positive_intervals
        return ((0.0, np.inf),)


def _zero_left(fn):
    def wrapped(xi):
        xi = np.asarray(xi, dtype=float)
        out = fn(np.where(xi >= 0, xi, 0.0))
        return np.where(xi >= 0, out, 0.0)

    return wrapped


def linear_graph(k: float, b: float = 1.0) -> GraphFunction:
    """g(xi) = k xi for xi >= 0 and 0 to the left (corridor of an angle)."""
    return GraphFunction(
        b=b,
        value=_zero_left(lambda x: k * x),
        derivative=lambda x: np.where(np.asarray(x) >= 0, k, 0.0) + 0.0 * np.asarray(x),
        lipschitz_bound=abs(k),
        kinks=(0.0,),
        name=f"linear(k={k})",
    )


def power_graph(c: float, p: float, b: float = 1.0) -> GraphFunction:
    """g(xi) = c xi**p, p >= 1, extended by zero to the left."""
    if p < 1:
        raise ValueError("power graphs need exponent >= 1")
    return GraphFunction(
        b=b,
        value=_zero_left(lambda x: c * x**p),
        derivative=_zero_left(lambda x: c * p * x ** (p - 1)),
        holder_exponent=min(1.0, p - 1) if p > 1 else 1.0,
        lipschitz_bound=abs(c * p) * b ** (p - 1),
        kinks=(0.0,) if p == 1 else (),
        name=f"power(c={c},p={p})",
    )


def poly_graph(coeffs: dict[int, float] | Sequence[float], b: float = 1.0) -> GraphFunction:
    """Polynomial graph sum_k a_k xi**k (k >= 1) extended by zero."""
    if not isinstance(coeffs, dict):
        coeffs = {k: a for k, a in enumerate(coeffs) if a}
    coeffs = {int(k): float(a) for k, a in coeffs.items()}
    if 0 in coeffs and coeffs[0] != 0:
        raise ValueError("graph must vanish at the origin")

    def val(x):
        return sum(a * x**k for k, a in coeffs.items())

    def der(x):
        return sum(k * a * x ** (k - 1) for k, a in coeffs.items()) + 0.0 * x

    t = np.linspace(0, b, 2001)
    return GraphFunction(
        b=b,
        value=_zero_left(val),
        derivative=_zero_left(der),
        lipschitz_bound=float(np.max(np.abs(der(t)))),
        kinks=(0.0,) if coeffs.get(1, 0.0) else (),
        name=f"poly({coeffs})",
    )


def tent_graph(a: float, c: float) -> GraphFunction:
    """g(xi) = dist(xi, R minus (a, c)): the profile of a bounded open interval."""
    if not c > a:
        raise ValueError("empty interval")
    mid = 0.5 * (a + c)

    def val(x):
        x = np.asarray(x, dtype=float)
        return np.clip(np.minimum(x - a, c - x), 0.0, None)

    def der(x):
        x = np.asarray(x, dtype=float)
        inside = (x > a) & (x < c)
        return np.where(inside, np.where(x < mid, 1.0, -1.0), 0.0)

    return GraphFunction(
        b=c,
        value=val,
        derivative=der,
        lipschitz_bound=1.0,
        origin_anchored=(a == 0.0),
        kinks=(a, mid, c),
        positive_intervals=((a, c),),
        name=f"tent({a},{c})",
    )


def graph_from_table(xi, phi, dphi, name: str = "table") -> GraphFunction:
    """Graph from a dense sample table; cubic Hermite interpolation."""
    xi = np.asarray(xi, dtype=float)
    order = np.argsort(xi)
    xi, phi, dphi = xi[order], np.asarray(phi, float)[order], np.asarray(dphi, float)[order]
    spline = CubicHermiteSpline(xi, phi, dphi)
    deriv = spline.derivative()
    lo, hi = xi[0], xi[-1]

    def val(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > lo, spline(np.clip(x, lo, hi)), 0.0 if lo >= 0 else spline(lo))

    def der(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > lo, deriv(np.clip(x, lo, hi)), 0.0)

    return GraphFunction(
        b=float(hi),
        value=val,
        derivative=der,
        lipschitz_bound=float(np.max(np.abs(dphi))),
        origin_anchored=abs(float(spline(0.0)) if lo <= 0 else phi[0]) < 1e-12,
        name=name,
    )


def graph_from_csv(path) -> GraphFunction:
    """Read ``xi, phi, dphi`` rows (header optional) into a graph."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row[:3]])
            except ValueError:
                continue  # header
    data = np.array(rows)
    return graph_from_table(data[:, 0], data[:, 1], data[:, 2], name=str(path))


@dataclass(frozen=True)
class ParametricArc:
    """A C^{1+eps} arc gamma: [0, 1] -> C with gamma(0) = 0."""

    gamma: Callable[[np.ndarray], np.ndarray]
    dgamma: Callable[[np.ndarray], np.ndarray]
    name: str = "arc"

    def __call__(self, t):
        return self.gamma(np.asarray(t, dtype=float))

    def samples(self, n: int = 2000, depth: int = 30) -> np.ndarray:
        t = np.unique(np.concatenate([np.linspace(0, 1, n), 2.0 ** -np.linspace(0, depth, 4 * depth)]))
        return t


def ray_arc(angle: float, length: float = 1.0) -> ParametricArc:
    e = np.exp(1j * angle)
    return ParametricArc(
        gamma=lambda t: length * t * e,
        dgamma=lambda t: length * e + 0 * t,
        name=f"ray({angle:.6g})",
    )


def quadratic_arc(angle: float, bend: complex, length: float = 1.0) -> ParametricArc:
    """gamma(t) = length*t*e^{i angle} + bend*t**2."""
    e = np.exp(1j * angle)
    return ParametricArc(
        gamma=lambda t: length * t * e + bend * t**2,
        dgamma=lambda t: length * e + 2 * bend * t,
        name=f"quad({angle:.6g},{bend})",
    )


def graph_arc(phi: GraphFunction) -> ParametricArc:
    """The graph t -> t + i phi(t) over [0, b], as an arc on [0, 1]."""
    b = phi.b
    return ParametricArc(
        gamma=lambda t: b * t + 1j * phi(b * t),
        dgamma=lambda t: b * (1 + 1j * phi.d(b * t)),
        name=f"graph[{phi.name}]",
    )


@dataclass(frozen=True)
class PairSpec:
    """Two graphs phi_1 < phi_2 on (0, b] inside the angle |eta| < k xi."""

    lower: GraphFunction
    upper: GraphFunction
    containing_angle_slope: float = 1.0

    def __post_init__(self):
        if not self.containing_angle_slope > 0:
            raise ValueError("angle slope must be positive")

    @property
    def b(self) -> float:
        return min(self.lower.b, self.upper.b)

    def delta(self, x):
        return self.upper(x) - self.lower(x)

    def validate(self, n: int = 4001) -> None:
        t = self.lower.samples(n)
        t = t[(t > 0) & (t <= self.b)]
        lo, hi = self.lower(t), self.upper(t)
        if np.any(lo >= hi):
            bad = t[np.argmax(lo >= hi)]
            raise InvalidPairError(f"graphs are not strictly ordered at t={bad:.6g}")
        k = self.containing_angle_slope
        if np.any(np.abs(lo) >= k * t) or np.any(np.abs(hi) >= k * t):
            raise InvalidPairError("graphs leave the declared angle")


class Verdict(str, enum.Enum):
    BS = "BS"
    NOT_BS = "NOT_BS"
    INDETERMINATE = "INDETERMINATE"


@dataclass
class BsDecision:
    verdict: Verdict
    evidence: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return {Verdict.BS: 0, Verdict.NOT_BS: 1, Verdict.INDETERMINATE: 2}[self.verdict]


def hyperbolic_distance(z, w):
    """Poincare distance in the upper half-plane (vectorised)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(z.imag <= 0) or np.any(w.imag <= 0):
        raise DomainError("hyperbolic distance needs points with Im > 0")
    arg = 1.0 + np.abs(z - w) ** 2 / (2.0 * z.imag * w.imag)
    out = np.arccosh(arg)
    return float(out) if out.ndim == 0 else out


def corridor_width(g: GraphFunction, mu: float, xi=None) -> float:
    """Infimum of the hyperbolic distance across the corridor g < eta < (1+mu) g."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    xi = g.samples() if xi is None else np.asarray(xi, dtype=float)
    gv = g(xi)
    keep = gv > 0
    if not np.any(keep):
        raise UndefinedCorridorError("g vanishes on every sample point")
    lo = xi[keep] + 1j * gv[keep]
    hi = xi[keep] + 1j * (1 + mu) * gv[keep]
    return float(np.min(hyperbolic_distance(lo, hi)))


def tangent_at_origin(gamma: GraphFunction | ParametricArc) -> complex:
    """Unit tangent at the origin, returned as a complex number."""
    if isinstance(gamma, GraphFunction):
        v = complex(1.0, float(gamma.d(0.0)))
    else:
        v = complex(np.asarray(gamma.dgamma(np.array(0.0))).item())
    n = abs(v)
    if not np.isfinite(n) or n < 1e-14:
        raise DegenerateTangentError("derivative vanishes at the origin")
    tau = v / n
    if tau.imag < 0 and abs(tau.imag) > 1e-12:
        raise DomainError("arc leaves the upper half-plane at the origin")
    return complex(tau.real, max(tau.imag, 0.0))


def _check_arcs(a1: ParametricArc, a2: ParametricArc, t_min: float = 1e-7) -> None:
    t = a1.samples()
    t = t[t >= t_min]
    p1, p2 = a1(t), a2(t)
    if np.any(p1.imag <= 0) or np.any(p2.imag <= 0):
        raise InvalidPairError("arcs must lie in the open upper half-plane off the origin")
    l1 = LineString(np.column_stack([p1.real, p1.imag]))
    l2 = LineString(np.column_stack([p2.real, p2.imag]))
    if l1.intersects(l2):
        raise InvalidPairError("arcs intersect away from the origin")


def _arc_to_graph(arc: ParametricArc, flip: bool, xtol: float) -> GraphFunction:
    """Locally rewrite an arc with real tangent as a graph over Re."""
    sgn = -1.0 if flip else 1.0

    def re(t):
        return sgn * np.real(arc(t))

    def dre(t):
        return sgn * np.real(arc.dgamma(np.asarray(t, float)))

    t = np.linspace(0, 1, 4001)
    d0 = dre(0.0)
    bad = np.nonzero(dre(t) < 0.5 * d0)[0]
    t_end = t[bad[0] - 1] if bad.size else 1.0
    b = float(re(t_end))

    def inverse(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        for i, xv in enumerate(x):
            if xv <= 0:
                out[i] = 0.0
            elif xv >= b:
                out[i] = t_end
            else:
                out[i] = brentq(lambda s: re(s) - xv, 0.0, t_end, xtol=xtol * max(xv, 1e-300))
        return out

    def val(x):
        x = np.asarray(x, dtype=float)
        return np.imag(arc(inverse(x))).reshape(x.shape)

    def der(x):
        x = np.asarray(x, dtype=float)
        dg = arc.dgamma(inverse(x))
        return (np.imag(dg) / (sgn * np.real(dg))).reshape(x.shape)

    return GraphFunction(b=b, value=val, derivative=der, name=f"resampled[{arc.name}]")


def _ratio_probe(lower: GraphFunction, upper: GraphFunction, b: float, depth: int):
    n = np.arange(depth + 1)
    x = b * 2.0 ** (-n)
    p1, p2 = lower(x), upper(x)
    lo = np.minimum(p1, p2)
    if np.any(lo <= 0):
        raise InvalidPairError("lower graph must be positive on (0, b]")
    return x, np.abs(p2 - p1) / lo


def classify_pair(
    pair,
    second=None,
    *,
    depth: int = 40,
    delta_pos: float = 1e-3,
    delta_zero: float = 1e-6,
    tail_fraction: float = 0.5,
    zero_run: int = 5,
    tangent_tol: float = 1e-9,
    resample_xtol: float = 1e-13,
) -> BsDecision:
    """Decide whether two arcs meeting at 0 form a bs-pair in the upper half-plane.

    ``pair`` is a :class:`PairSpec`, or two :class:`ParametricArc` objects are
    passed positionally.  Different tangents give BS; a common non-real tangent
    gives NOT_BS; a common real tangent is settled by probing Delta/phi_1 on the
    dyadic grid b 2^-n, n <= depth.
    """
    if second is None:
        if not isinstance(pair, PairSpec):
            raise TypeError("pass a PairSpec or two ParametricArc objects")
        pair.validate()
        arcs = (graph_arc(pair.lower), graph_arc(pair.upper))
        graphs = (pair.lower, pair.upper)
        b = pair.b
        tau = (tangent_at_origin(pair.lower), tangent_at_origin(pair.upper))
    else:
        arcs = (pair, second)
        _check_arcs(*arcs)
        graphs = None
        tau = (tangent_at_origin(pair), tangent_at_origin(second))

    evidence = {"tau1": [tau[0].real, tau[0].imag], "tau2": [tau[1].real, tau[1].imag]}
    if abs(tau[0] - tau[1]) > tangent_tol:
        evidence["branch"] = "I: distinct tangents"
        return BsDecision(Verdict.BS, evidence)
    if tau[0].imag > tangent_tol:
        evidence["branch"] = "II(a): common non-real tangent"
        return BsDecision(Verdict.NOT_BS, evidence)

    if graphs is None:
        flip = tau[0].real < 0
        g1 = _arc_to_graph(arcs[0], flip, resample_xtol)
        g2 = _arc_to_graph(arcs[1], flip, resample_xtol)
        b = min(g1.b, g2.b)
        if g1(np.array(b)) > g2(np.array(b)):
            g1, g2 = g2, g1
        graphs = (g1, g2)

    x, r = _ratio_probe(graphs[0], graphs[1], b, depth)
    start = int(np.floor(depth * (1 - tail_fraction)))
    tail = r[start:]
    evidence.update(
        branch="II(b): common real tangent",
        probe_x=x.tolist(),
        ratio=r.tolist(),
        tail_min=float(tail.min()),
        thresholds={"delta_pos": delta_pos, "delta_zero": delta_zero, "depth": depth},
    )
    if tail.min() >= delta_pos:
        return BsDecision(Verdict.BS, evidence)
    if np.all(r[-zero_run:] < delta_zero):
        return BsDecision(Verdict.NOT_BS, evidence)
    return BsDecision(Verdict.INDETERMINATE, evidence)


@dataclass
class SeparationReport:
    ok: bool
    margin: float
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def separation_check(s1, s2, g: GraphFunction, mu: float) -> SeparationReport:
    """Check S1 below the graph of g and S2 above the graph of (1+mu) g.

    The margin is the smallest slack over all samples (negative when violated).
    """
    s1 = np.atleast_1d(np.asarray(s1, dtype=complex))
    s2 = np.atleast_1d(np.asarray(s2, dtype=complex))
    slack1 = g(s1.real) - s1.imag if s1.size else np.array([])
    slack2 = s2.imag - (1 + mu) * g(s2.real) if s2.size else np.array([])
    viol = [("S1", complex(p)) for p in s1[slack1 <= 0]] + [("S2", complex(p)) for p in s2[slack2 <= 0]]
    allslack = np.concatenate([slack1, slack2])
    margin = float(allslack.min()) if allslack.size else np.inf
    return SeparationReport(ok=not viol, margin=margin, violations=viol)
