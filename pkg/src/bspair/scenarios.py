"""Scenario catalog, disc chains and the half-plane splitting across a chain of discs.

A scenario bundles the singular sets, the cutting function and the solver that
handles its geometry.  Parameters are plain JSON values so bundles can be
rebuilt from a config file.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cutting import CuttingFunction
from .dbar import cr_residual, linear_slope
from .errors import ConfigError, IntegrabilityError, InvalidPairError
from .geometry import (
    BsDecision,
    GraphFunction,
    PairSpec,
    ParametricArc,
    Verdict,
    classify_pair,
    separation_check,
    graph_arc,
    linear_graph,
    poly_graph,
    power_graph,
    quadratic_arc,
    ray_arc,
    tent_graph,
)
from .quadrature import ContourPiece, cauchy_integral, trapezoid_circle
from .splitter import AnalyticFunction, constant_function, mobius_power

# --------------------------------------------------------------------------
# graph and arc specs


def scaled_graph(g: GraphFunction, c: float, b: float | None = None) -> GraphFunction:
    """c * g."""
    return GraphFunction(
        b=g.b if b is None else b,
        value=lambda x: c * g(x),
        derivative=lambda x: c * g.d(x),
        holder_exponent=g.holder_exponent,
        lipschitz_bound=None if g.lipschitz_bound is None else abs(c) * g.lipschitz_bound,
        origin_anchored=g.origin_anchored,
        kinks=g.kinks,
        positive_intervals=g.positive_intervals,
        name=f"{c}*{g.name}",
    )


def product_graph(r: GraphFunction, phi: GraphFunction, b: float | None = None) -> GraphFunction:
    """r * phi, with the product rule for the derivative."""
    return GraphFunction(
        b=min(r.b, phi.b) if b is None else b,
        value=lambda x: r(x) * phi(x),
        derivative=lambda x: r.d(x) * phi(x) + r(x) * phi.d(x),
        holder_exponent=min(r.holder_exponent, phi.holder_exponent),
        kinks=tuple(sorted(set(r.kinks) | set(phi.kinks))),
        name=f"({r.name})*({phi.name})",
    )


def sum_graph(a: GraphFunction, c: GraphFunction) -> GraphFunction:
    return GraphFunction(
        b=min(a.b, c.b),
        value=lambda x: a(x) + c(x),
        derivative=lambda x: a.d(x) + c.d(x),
        holder_exponent=min(a.holder_exponent, c.holder_exponent),
        kinks=tuple(sorted(set(a.kinks) | set(c.kinks))),
        name=f"{a.name}+{c.name}",
    )


def open_set_graph(intervals) -> GraphFunction:
    """dist(xi, R minus G) for G a finite union of disjoint bounded open intervals."""
    iv = sorted((float(a), float(c)) for a, c in intervals)
    if not iv:
        raise ConfigError("G must contain at least one interval")
    for (a, c), nxt in zip(iv, iv[1:] + [(np.inf, np.inf)]):
        if not (np.isfinite(a) and np.isfinite(c) and c > a):
            raise ConfigError(f"interval ({a}, {c}) is not bounded and nonempty")
        if nxt[0] < c:
            raise ConfigError("intervals of G must be disjoint")
    tents = [tent_graph(a, c) for a, c in iv]
    if len(tents) == 1:
        return tents[0]
    return GraphFunction(
        b=iv[-1][1],
        value=lambda x: sum(t(x) for t in tents),
        derivative=lambda x: sum(t.d(x) for t in tents),
        lipschitz_bound=1.0,
        origin_anchored=iv[0][0] == 0.0,
        kinks=tuple(k for t in tents for k in t.kinks),
        positive_intervals=tuple(iv),
        name=f"dist(., R minus {iv})",
    )


def oscillating_ratio(floor: float = 1e-8, omega: float = np.pi / (3 * np.log(2)), b: float = 1.0) -> GraphFunction:
    """floor + (1 + cos(omega log xi))/2: a ratio with no limit at 0."""

    def val(x):
        x = np.asarray(x, dtype=float)
        s = np.log(np.where(x > 0, x, 1.0))
        return floor + 0.5 * (1 + np.cos(omega * s))

    def der(x):
        x = np.asarray(x, dtype=float)
        xs = np.where(x > 0, x, 1.0)
        return np.where(x > 0, -0.5 * omega * np.sin(omega * np.log(xs)) / xs, 0.0)

    return GraphFunction(b=b, value=val, derivative=der, origin_anchored=False, name=f"oscillating({floor},{omega:.6g})")


def graph_from_spec(spec, b: float = 1.0) -> GraphFunction:
    """Build a graph from a JSON spec such as ``{"kind": "power", "c": 1, "p": 2}``."""
    if isinstance(spec, GraphFunction):
        return spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"graph spec needs a 'kind': {spec!r}")
    kind = spec["kind"]
    b = float(spec.get("b", b))
    try:
        if kind == "linear":
            return linear_graph(float(spec["k"]), b=b)
        if kind == "power":
            return power_graph(float(spec.get("c", 1.0)), float(spec.get("p", 2.0)), b=b)
        if kind == "poly":
            coeffs = spec["coeffs"]
            if isinstance(coeffs, dict):
                coeffs = {int(k): v for k, v in coeffs.items()}
            return poly_graph(coeffs, b=b)
        if kind == "tent":
            return tent_graph(float(spec["a"]), float(spec["c"]))
        if kind == "open_set":
            return open_set_graph(spec["intervals"])
        if kind == "oscillating":
            return oscillating_ratio(float(spec.get("floor", 1e-8)), float(spec.get("omega", np.pi / (3 * np.log(2)))), b=b)
        if kind == "constant":
            c = float(spec["value"])
            return GraphFunction(b=b, value=lambda x: c + 0.0 * x, derivative=lambda x: 0.0 * x, origin_anchored=c == 0, name=f"const({c})")
    except KeyError as err:
        raise ConfigError(f"graph spec {spec!r} misses {err}") from None
    raise ConfigError(f"unknown graph kind {kind!r}")


def arc_from_spec(spec) -> ParametricArc:
    if isinstance(spec, ParametricArc):
        return spec
    kind = spec.get("kind")
    if kind == "ray":
        return ray_arc(float(spec["angle"]), float(spec.get("length", 1.0)))
    if kind == "quadratic":
        bend = spec.get("bend", 0.0)
        bend = complex(*bend) if isinstance(bend, (list, tuple)) else complex(bend)
        return quadratic_arc(float(spec["angle"]), bend, float(spec.get("length", 1.0)))
    if kind == "graph":
        return graph_arc(graph_from_spec(spec["graph"], float(spec.get("b", 1.0))))
    raise ConfigError(f"unknown arc kind {kind!r}")


# --------------------------------------------------------------------------
# scenario bundles


@dataclass
class Scenario:
    """Everything needed to classify, split or certify one configuration.

    ``s1``/``s2`` are point samples of the singular sets.  ``solver`` is the
    construction suited to the geometry (None when no bounded split exists).
    """

    name: str
    params: dict
    s1: np.ndarray
    s2: np.ndarray
    cf: CuttingFunction | None = None
    solver: str | None = None
    solver_options: dict = field(default_factory=dict)
    pair: PairSpec | None = None
    arcs: tuple | None = None
    chain: "DiscChain | None" = None
    expected: Verdict | None = None
    extra: dict = field(default_factory=dict)

    def classify(self, **kw) -> BsDecision:
        if self.pair is not None:
            return classify_pair(self.pair, **kw)
        if self.arcs is not None:
            return classify_pair(*self.arcs, **kw)
        if self.chain is not None:
            # two conjugate disc families separated by the real axis
            return BsDecision(Verdict.BS, {"branch": "disc chain in the right half-plane", "tail": self.chain.tail_certificate()})
        if self.cf is not None:
            # sets on both sides of a corridor of positive hyperbolic width
            rep = separation_check(self.s1, self.s2, self.cf.g, self.cf.mu)
            ev = {"branch": "corridor separation", "mu": self.cf.mu, "margin": rep.margin}
            return BsDecision(Verdict.BS if rep.ok else Verdict.INDETERMINATE, ev)
        raise ConfigError(f"scenario {self.name} has nothing to classify")

    def corridor(self, xi):
        """Lower and upper corridor profiles g and (1 + mu) g at ``xi``."""
        xi = np.asarray(xi, dtype=float)
        return self.cf.g(xi), (1 + self.cf.mu) * self.cf.g(xi)


def _graph_samples(phi: GraphFunction, length: float, n: int = 400) -> np.ndarray:
    t = np.unique(np.concatenate([np.linspace(0, length, n)[1:], length * np.geomspace(1e-6, 1, n // 4)]))
    return t + 1j * phi(t)


def _default_R(s1, s2, R):
    if R is not None:
        return float(R)
    return 2.0 * float(np.max(np.abs(np.concatenate([s1, s2]))))


def _ex1(k=1.0, mu=1.0, R=None, length=0.5):
    k, mu = float(k), float(mu)
    if not (k > 0 and mu > 0):
        raise ConfigError("EX1 needs k > 0 and mu > 0")
    kp = (1 + mu) * k
    arcs = (ray_arc(np.arctan(k / 2), length), ray_arc(np.arctan(2 * kp), length))
    s1, s2 = (a(np.linspace(0, 1, 400)[1:]) for a in arcs)
    R = _default_R(s1, s2, R)
    cf = CuttingFunction(linear_graph(k, b=2 * R), mu, R)
    return dict(s1=s1, s2=s2, cf=cf, solver="transversal", arcs=arcs, expected=Verdict.BS, extra={"k": k, "k_prime": kp})


def _ex2(G=((0.0, 1.0),), mu=1.0, R=None):
    g = open_set_graph(G)
    mu = float(mu)
    if not mu > 0:
        raise ConfigError("EX2 needs mu > 0")
    xs = np.concatenate([np.linspace(a, c, 401)[1:-1] for a, c in g.positive_intervals])
    s1 = xs + 0.5j * g(xs)
    s2 = xs + 1j * (1 + 2 * mu) * g(xs)
    R = _default_R(s1, s2, R)
    cf = CuttingFunction(g, mu, R)
    return dict(s1=s1, s2=s2, cf=cf, solver="jones", expected=Verdict.BS, extra={"peak": float(np.max(g(xs)))})


def _ex3(g=None, R=None, length=0.5):
    g = graph_from_spec(g or {"kind": "power", "c": 1.0, "p": 2.0})
    x = np.geomspace(1e-8, 1e-4, 20)
    if np.max(np.abs(g(np.array([0.0])))) > 0 or np.max(np.abs(g.d(x))) > 1e-3 or np.any(g(x) < 0):
        raise ConfigError("EX3 needs g >= 0 with g(0) = g'(0) = 0")
    phi1, phi2 = g, scaled_graph(g, 2.0)
    s1, s2 = _graph_samples(phi1, length), _graph_samples(phi2, length)
    R = _default_R(s1, s2, R)
    # corridor strictly between eta = g and eta = 2 g
    cut = scaled_graph(g, 1.2, b=2 * R)
    cf = CuttingFunction(cut, 0.5, R)
    pair = PairSpec(GraphFunction(b=length, value=phi1.value, derivative=phi1.derivative, holder_exponent=g.holder_exponent, name=g.name),
                    scaled_graph(g, 2.0, b=length), containing_angle_slope=1.0 + 2 * float(np.max(np.abs(phi2.d(np.linspace(0, length, 401))))))
    return dict(s1=s1, s2=s2, cf=cf, solver="tangential", solver_options={"b": float(length)}, pair=pair, expected=Verdict.BS)


def _tangent_pair(phi1, ratio, length):
    phi1 = graph_from_spec(phi1, b=length)
    r = graph_from_spec(ratio, b=length)
    t = np.linspace(0, length, 801)[1:]
    if np.any(phi1(t) <= 0):
        raise ConfigError("phi1 must be positive on (0, length]")
    if np.any(r(t) <= 0):
        raise ConfigError("the ratio Delta/phi1 must be positive")
    upper = sum_graph(phi1, product_graph(r, phi1, b=length))
    slope = 1.0 + 2 * float(np.max(np.abs(np.concatenate([phi1(t), upper(t)]) / np.concatenate([t, t]))))
    return phi1, upper, PairSpec(phi1, upper, containing_angle_slope=slope)


def _tangent_bs(phi1=None, c=1.0, R=None, length=0.5):
    c = float(c)
    if not c > 0:
        raise ConfigError("TANGENT_BS needs c > 0")
    phi1, phi2, pair = _tangent_pair(phi1 or {"kind": "power", "c": 1.0, "p": 2.0}, {"kind": "constant", "value": c}, length)
    s1, s2 = _graph_samples(phi1, length), _graph_samples(phi2, length)
    R = _default_R(s1, s2, R)
    # corridor (1 + c/3) phi1 .. (1 + 2c/3) phi1 between the two graphs
    cut = scaled_graph(phi1, 1 + c / 3, b=2 * R)
    mu = (c / 3) / (1 + c / 3)
    cf = CuttingFunction(cut, mu, R)
    if linear_slope(cut) is not None:
        solver, opts = "transversal", {}
    else:
        solver, opts = "tangential", {"b": float(length)}
    return dict(s1=s1, s2=s2, cf=cf, solver=solver, solver_options=opts, pair=pair, expected=Verdict.BS)


def _tangent_not_bs(phi1=None, delta_ratio=None, length=0.5):
    phi1, phi2, pair = _tangent_pair(phi1 or {"kind": "power", "c": 1.0, "p": 2.0}, delta_ratio or {"kind": "linear", "k": 1.0}, length)
    x = length * 2.0 ** -np.arange(20, 41)
    if np.max(pair.delta(x) / phi1(x)) > 1e-3:
        raise ConfigError("TANGENT_NOT_BS needs Delta/phi1 -> 0")
    s1, s2 = _graph_samples(phi1, length), _graph_samples(phi2, length)
    return dict(s1=s1, s2=s2, pair=pair, expected=Verdict.NOT_BS)


def _tangent_ratio(phi1=None, delta_ratio=None, length=0.5):
    """Common real tangent with an arbitrary ratio Delta/phi1 (no verdict asserted)."""
    phi1, phi2, pair = _tangent_pair(phi1 or {"kind": "power", "c": 1.0, "p": 2.0}, delta_ratio or {"kind": "oscillating"}, length)
    s1, s2 = _graph_samples(phi1, length), _graph_samples(phi2, length)
    return dict(s1=s1, s2=s2, pair=pair)


def _arc_pair(arcs=None):
    if not arcs or len(arcs) != 2:
        raise ConfigError("ARC_PAIR needs two arc specs")
    a = tuple(arc_from_spec(s) for s in arcs)
    s1, s2 = (arc(np.linspace(0, 1, 400)[1:]) for arc in a)
    return dict(s1=s1, s2=s2, arcs=a)


def _disc_chain(g=None, xi_base=2.0, r_base=4.0, N=40, n0=1):
    chain = DiscChain.geometric(graph_from_spec(g or {"kind": "power", "c": 1.0, "p": 2.0}), xi_base, r_base, N, n0)
    s1 = chain.centers
    return dict(s1=s1, s2=np.conj(s1), chain=chain, solver="theorem9", expected=Verdict.BS)


_BUILDERS = {
    "EX1": _ex1,
    "EX2": _ex2,
    "EX3": _ex3,
    "TANGENT_BS": _tangent_bs,
    "TANGENT_NOT_BS": _tangent_not_bs,
    "TANGENT_RATIO": _tangent_ratio,
    "ARC_PAIR": _arc_pair,
    "DISC_CHAIN": _disc_chain,
}
SCENARIOS = tuple(_BUILDERS)


def scenario(name: str, params: dict | None = None) -> Scenario:
    """Build a ready-to-run bundle for one of the catalog scenarios."""
    params = dict(params or {})
    key = name.upper()
    if key not in _BUILDERS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    try:
        parts = _BUILDERS[key](**params)
    except TypeError as err:
        raise ConfigError(f"bad parameters for {key}: {err}") from None
    except (ValueError, InvalidPairError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"{key}: {err}") from err
    return Scenario(name=key, params=params, **parts)


def scenario_test_function(sc: Scenario, spec: dict | None = None) -> AnalyticFunction:
    """Bounded analytic function off the scenario's singular sets.

    The default is the sum of the Mobius powers (beta = 1) of the two sets,
    each taken as a polyline from the origin.  ``spec`` may ask for
    ``{"kind": "constant", "value": v}``, ``{"kind": "mobius_power", "set":
    "s1" | "s2", "beta": b}`` or ``{"kind": "sum", "terms": [...]}``.
    """
    spec = spec or {"kind": "sum", "terms": [{"kind": "mobius_power", "set": "s1"}, {"kind": "mobius_power", "set": "s2"}]}
    kind = spec.get("kind")
    if kind == "sum":
        parts = [scenario_test_function(sc, t) for t in spec["terms"]]
        sing = np.concatenate([p.singular for p in parts])
        return AnalyticFunction(lambda z: sum(p(z) for p in parts), singular=sing, name="sum")
    if kind == "constant":
        v = spec.get("value", 1.0)
        return constant_function(complex(*v) if isinstance(v, list) else v)
    if kind == "mobius_power":
        pts = {"s1": sc.s1, "s2": sc.s2}.get(spec.get("set", "s2"))
        if pts is None:
            raise ConfigError("mobius_power needs set 's1' or 's2'")
        pts = np.concatenate([[0j], pts[np.argsort(np.abs(pts))]])
        return mobius_power(pts, float(spec.get("beta", 1.0)))
    raise ConfigError(f"unknown test function kind {kind!r}")


# --------------------------------------------------------------------------
# disc chains


@dataclass
class DiscChain:
    """Discs B_n of radius r_n centred at xi_n + i g(xi_n), n = 1..N.

    S+ is the union of the discs, S- its mirror image; both lie in the right
    half-plane.
    """

    xi: np.ndarray
    radii: np.ndarray
    g: GraphFunction
    name: str = "chain"

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.radii = np.asarray(self.radii, dtype=float)
        if self.xi.shape != self.radii.shape or self.xi.ndim != 1 or self.xi.size < 2:
            raise IntegrabilityError("need matching 1-d arrays of at least two centres and radii")
        if np.any(self.xi <= 0) or np.any(np.diff(self.xi) >= 0):
            raise IntegrabilityError("xi_n must be positive and strictly decreasing")
        gx = self.g(self.xi)
        if np.any(gx <= 0) or np.any(gx > self.xi * (1 + 1e-12)):
            raise IntegrabilityError("need 0 < g(xi_n) <= xi_n")
        if np.any(self.radii <= 0) or np.any(self.radii >= gx):
            raise IntegrabilityError("need 0 < r_n < g(xi_n)")
        gaps = -np.diff(self.xi)
        near = np.minimum(np.append(gaps, np.inf), np.insert(gaps, 0, np.inf))
        if np.any(self.radii >= near):
            raise IntegrabilityError("discs are not disjoint: need r_n < min(xi_n - xi_{n+1}, xi_{n-1} - xi_n)")
        self.tail_certificate()

    @classmethod
    def geometric(cls, g: GraphFunction, xi_base: float = 2.0, r_base: float = 4.0, N: int = 40, n0: int = 1) -> "DiscChain":
        """xi_n = xi_base^-n, r_n = r_base^-n g(xi_n) for n = n0 .. n0 + N - 1."""
        n = np.arange(n0, n0 + int(N), dtype=float)
        xi = float(xi_base) ** -n
        return cls(xi, float(r_base) ** -n * g(xi), g, name=f"geometric({xi_base},{r_base})")

    @property
    def N(self) -> int:
        return int(self.xi.size)

    @property
    def centers(self) -> np.ndarray:
        return self.xi + 1j * self.g(self.xi)

    def terms(self) -> np.ndarray:
        return self.radii / self.g(self.xi)

    def tail_certificate(self, tol: float | None = None) -> dict:
        """Partial sums of r_n/g(xi_n) and a ratio-test remainder bound.

        The ratio q is the largest term ratio over the second half of the
        chain; with q < 1 the sequence is extended geometrically, giving the
        remainder bound a_N q/(1-q).
        """
        a = self.terms()
        ratios = a[1:] / a[:-1]
        q = float(np.max(ratios[ratios.size // 2 :]))
        if not q < 1:
            raise IntegrabilityError(f"cannot certify sum r_n/g(xi_n) < inf: term ratio {q:.4g} >= 1")
        partial = np.cumsum(a)
        # remainder after n terms: rest of the listed chain plus the geometric extension
        ext = a[-1] * q / (1 - q)
        remainder = partial[-1] - partial + ext
        return {"partial_sums": partial.tolist(), "remainder_bound": remainder.tolist(), "ratio": q, "sum_bound": float(partial[-1] + ext)}

    def contains(self, z, pad: float = 0.0) -> np.ndarray:
        """True where z lies in some closed disc of S+ or S- (enlarged by pad * r_n)."""
        z = np.asarray(z, dtype=complex)
        c = self.centers
        inside = np.zeros(z.shape, bool)
        for cn, rn in zip(c, self.radii):
            lim = rn * (1 + pad)
            inside |= (np.abs(z - cn) <= lim) | (np.abs(z - np.conj(cn)) <= lim)
        return inside

    def resolvable(self, rel: float = 1e-9) -> int:
        """Number of leading discs whose circles are resolved in double precision."""
        ok = self.radii >= rel * np.abs(self.centers)
        return int(np.argmin(ok)) if not ok.all() else self.N

    def truncated(self, N: int) -> "DiscChain":
        return DiscChain(self.xi[:N], self.radii[:N], self.g, self.name)


def pole_catalog_function(chain: DiscChain, weights=None, smooth: complex = 1.0, N: int | None = None) -> AnalyticFunction:
    """f = smooth/(1+z) + sum_n w_n r_n (1/(z - zeta_n) + 1/(z - conj zeta_n)).

    Each pole sits at the centre of a disc of S+ or S-, so f is analytic off
    the chain; the weights r_n make it bounded there because sum r_n/g(xi_n)
    converges.  ``exact_split`` gives the three pieces in closed form.
    """
    N = chain.N if N is None else int(N)
    w = np.ones(N) if weights is None else np.asarray(weights, dtype=complex)[:N]
    c = chain.centers[:N]
    a = w * chain.radii[:N]
    smooth = complex(smooth)
    poles = np.concatenate([c, np.conj(c)])
    amp = np.concatenate([a, a])

    def evaluate(z):
        z = np.asarray(z, dtype=complex)
        out = smooth / (1 + z)
        for p, s in zip(poles, amp):
            out = out + s / (z - p)
        return out

    f = AnalyticFunction(evaluate, singular=poles, name=f"poles({N})", on_singular=lambda z: chain.contains(z, pad=-1e-6))
    f.bound = float(np.max(np.abs(f(_norm_probe(chain)))))
    f.poles, f.residues, f.smooth = poles, amp, smooth
    return f


def _norm_probe(chain: DiscChain) -> np.ndarray:
    """Points on the disc boundaries, the imaginary axis and a polar grid."""
    pts = [1j * np.concatenate([-np.geomspace(1e-8, 1e4, 400), np.geomspace(1e-8, 1e4, 400)])]
    th = 2 * np.pi * np.arange(64) / 64
    for cn, rn in zip(chain.centers[: chain.resolvable()], chain.radii):
        ring = cn + rn * np.exp(1j * th)
        pts += [ring, np.conj(ring)]
    r, t = np.meshgrid(np.geomspace(1e-6, 10, 60), np.linspace(-np.pi / 2, np.pi / 2, 61))
    pts.append((r * np.exp(1j * t)).ravel())
    z = np.concatenate(pts)
    return z[~chain.contains(z)]


def exact_split(f: AnalyticFunction, chain: DiscChain, N: int | None = None):
    """Closed-form f1, f+, f- for a pole catalog function (residue calculus)."""
    N = chain.N if N is None else int(N)
    n = len(f.poles) // 2
    c, a = f.poles[:n], f.residues[:n]
    use = np.arange(n) < N
    const = -np.sum(a * (1 / (1 + c) + 1 / (1 + np.conj(c))))

    def f1(z):
        return f.smooth / (1 + np.asarray(z, dtype=complex)) + const

    def part(centres, amp):
        def ev(z):
            z = np.asarray(z, dtype=complex)
            out = np.zeros(z.shape, complex)
            for p, s in zip(centres, amp):
                out = out + s * (1 + z) / ((1 + p) * (z - p))
            return out

        return ev

    return f1, part(c[use], a[use]), part(np.conj(c[use]), a[use])


# --------------------------------------------------------------------------
# splitting across the chain


def circle_nodes(radius: float, dist) -> np.ndarray:
    """Trapezoid node count max(64, 16 r/dist), rounded up to a power of two."""
    need = np.maximum(64.0, 16.0 * radius / np.maximum(dist, 1e-300))
    return (2 ** np.ceil(np.log2(np.minimum(need, 2**20)))).astype(int)


def circle_cauchy(fn, center: complex, radius: float, z, clockwise: bool = True) -> np.ndarray:
    """(1/2 pi i) int_{|w - c| = r} fn(w) dw/(w - z) by the trapezoid rule.

    The node count adapts to each target's distance from the circle.
    """
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    dist = np.abs(np.abs(flat - center) - radius)
    counts = circle_nodes(radius, dist)
    out = np.zeros(flat.size, complex)
    for m in np.unique(counts):
        sel = counts == m
        nodes, dz = trapezoid_circle(center, radius, int(m), clockwise=clockwise)
        vals = fn(nodes) * dz
        out[sel] = (vals[None, :] / (nodes[None, :] - flat[sel, None])).sum(axis=1) / (2j * np.pi)
    return out.reshape(z.shape)


def axis_piece(fn, Y: float) -> ContourPiece:
    """The imaginary axis segment [-iY, iY] oriented upwards, carrying fn(iy)/(1+iy)."""
    return ContourPiece(
        gamma=lambda t: 1j * t,
        dgamma=lambda t: 1j + 0 * t,
        density=lambda t: fn(1j * t) / (1 + 1j * t),
        t0=-float(Y),
        t1=float(Y),
        grade_to=(0.0,),
        name="imaginary-axis",
    )


def axis_tail_bound(norm: float, z, Y: float) -> np.ndarray:
    """Bound on the dropped part |y| > Y of the axis integral for f1.

    |1+z|/(2 pi) * norm * int_{|y|>Y} dy/((1+|y|) dist(iy, z))
    <= norm |1+z| log(Y/(Y-|z|)) / (pi |z|).
    """
    z = np.asarray(z, dtype=complex)
    a = np.abs(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(a > 0, np.log(Y / np.maximum(Y - a, 1e-300)) / np.where(a > 0, a, 1), 1.0 / Y)
    val = np.where(a < Y, val, np.inf)
    return norm * np.abs(1 + z) * val / np.pi


@dataclass
class ChainSplit:
    """f1, f+, f- for f bounded analytic off a disc chain in the right half-plane.

    ``evaluate`` returns the three pieces; points inside a disc are excluded
    (NaN).  Both groupings are reported: the additive identity
    f = f1 + f+ + f- (clockwise circles) and the signed form (f1 + f+) - f-.
    """

    f: AnalyticFunction
    chain: DiscChain
    N: int
    Y: float
    workers: int = 1
    order: int = 16

    def f_plus(self, z):
        return self._circles(z, conj=False)

    def f_minus(self, z):
        return self._circles(z, conj=True)

    def _circles(self, z, conj: bool):
        z = np.asarray(z, dtype=complex)
        fz = lambda w: self.f(w) / (1 + w)
        c = self.chain.centers[: self.N]
        c = np.conj(c) if conj else c
        r = self.chain.radii[: self.N]
        jobs = list(zip(c, r))
        run = lambda cr: circle_cauchy(fz, cr[0], cr[1], z, clockwise=True)
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as ex:
                parts = list(ex.map(run, jobs))
        else:
            parts = [run(j) for j in jobs]
        return (1 + z) * np.sum(parts, axis=0)

    def f1(self, z):
        z = np.asarray(z, dtype=complex)
        piece = axis_piece(self.f, self.Y)
        return -(1 + z) * cauchy_integral([piece], z, order=self.order).reshape(z.shape)

    def tail_bound(self, z) -> np.ndarray:
        return axis_tail_bound(self.f.bound or 0.0, z, self.Y)

    def evaluate(self, z) -> dict:
        z = np.asarray(z, dtype=complex)
        out = self.chain.contains(z)
        keep = ~out & (z.real > 0)
        zk = z[keep]
        vals = {}
        for key, fn in (("f", self.f), ("f1", self.f1), ("f_plus", self.f_plus), ("f_minus", self.f_minus)):
            v = np.full(z.shape, np.nan + 0j)
            v[keep] = fn(zk)
            vals[key] = v
        vals["excluded"] = ~keep
        vals["additive_residual"] = np.abs(vals["f"] - vals["f1"] - vals["f_plus"] - vals["f_minus"])
        vals["signed_residual"] = np.abs(vals["f"] - (vals["f1"] + vals["f_plus"] - vals["f_minus"]))
        return vals


def theorem9_split(f: AnalyticFunction, chain: DiscChain, N: int | None = None, Y: float = 1e4, workers: int = 1) -> ChainSplit:
    """Split f bounded analytic in the right half-plane off S+ and S-.

    f1 = -(1+z) C_{iR}[f/(1+z)] with the axis oriented upwards, and
    f+- = (1+z) sum_{n<=N} C_{dB_n}[f/(1+z)] over clockwise circles (the
    mirror discs for f-).  f1 + f+ is bounded off S+ and f- off S-.

    N defaults to the number of discs whose circles are resolvable in double
    precision; deeper discs contribute at most ||f|| r_n/dist each.
    """
    N = chain.resolvable() if N is None else int(N)
    if not 1 <= N <= chain.resolvable():
        raise ConfigError(f"truncation N must lie in [1, {chain.resolvable()}] (resolvable discs)")
    if not Y > 0:
        raise ConfigError("axis window Y must be positive")
    if f.bound is None:
        f.bound = float(np.max(np.abs(f(_norm_probe(chain)))))
    return ChainSplit(f, chain, N, float(Y), workers)


def right_half_probe(chain: DiscChain, n_r: int = 16, n_theta: int = 12, r_min: float = 1e-3, r_max: float = 2.0) -> np.ndarray:
    """Polar probe grid in the right half-plane with the chain's discs removed."""
    r, t = np.meshgrid(np.geomspace(r_min, r_max, n_r), np.linspace(-np.pi / 2 + 0.05, np.pi / 2 - 0.05, n_theta))
    z = (r * np.exp(1j * t)).ravel()
    return z[~chain.contains(z, pad=0.5)]


def split_report(cs: ChainSplit, probe, tol: float = 1e-3) -> dict:
    """Identity residuals for both groupings, truncation bounds and a CR check of f-."""
    vals = cs.evaluate(probe)
    keep = ~vals["excluded"]
    add = float(np.max(vals["additive_residual"][keep]))
    signed = float(np.max(vals["signed_residual"][keep]))
    zk = np.asarray(probe)[keep]
    upper = zk[zk.imag > 1e-2]
    cr_minus = cr_residual(cs.f_minus, upper, 1e-3) if upper.size else 0.0
    rep = {
        "N": cs.N,
        "Y": cs.Y,
        "circle_tail_bound": float(np.sum(cs.f.bound * cs.chain.radii[cs.N :] / np.maximum(np.min(np.abs(zk[:, None] - cs.chain.centers[None, cs.N :]), axis=0) - cs.chain.radii[cs.N :], 1e-300))) if cs.N < cs.chain.N and zk.size else 0.0,
        "probes": int(keep.sum()),
        "excluded": int((~keep).sum()),
        "identity_residual": add,
        "signed_grouping_residual": signed,
        "grouping_flag": "f = f1 + f+ + f- holds with clockwise circles; the grouping (f1 + f+) - f- does not" if signed > max(10 * add, tol) else "both groupings agree",
        "axis_tail_bound": float(np.max(cs.tail_bound(zk))),
        "norm_estimate": cs.f.bound,
        "cr_residual_f_minus_upper": float(cr_minus),
        "status": "PASS" if add <= tol else "FAIL",
    }
    if add > tol:
        rep["advisory"] = "identity residual above tolerance: increase N or Y"
    return rep


def circle_bound_check(f: AnalyticFunction, chain: DiscChain, z, n: int | None = None) -> dict:
    """Check |C_{dB_n}^f(z)| <= ||f|| r_n / dist(z, B_n) at the given points."""
    z = np.asarray(z, dtype=complex)
    norm = f.bound if f.bound is not None else float(np.max(np.abs(f(_norm_probe(chain)))))
    idx = range(chain.resolvable()) if n is None else [n]
    worst = -np.inf
    for i in idx:
        c, r = chain.centers[i], chain.radii[i]
        d = np.abs(z - c) - r
        ok = d > 0
        val = np.abs(circle_cauchy(f, c, r, z[ok]))
        ratio = val / (norm * r / d[ok])
        worst = max(worst, float(np.max(ratio)) if ratio.size else -np.inf)
    return {"max_ratio": worst, "holds": bool(worst <= 1 + 1e-9), "norm": norm}


def f1_growth(cs: ChainSplit, n_r: int = 14, r_min: float = 1e-6, r_max: float = 0.5, half_angle: float = np.pi / 2 - 0.2) -> dict:
    """Slope of |f1| against log(1/|z|) on a sector toward 0, with the log bound shape.

    The bound shape is (norm/pi) log(1/|z|); the report gives the ratio of the
    fitted slope to norm/pi.
    """
    r = np.geomspace(r_min, r_max, n_r)
    ang = np.linspace(-half_angle, half_angle, 5)
    z = (r[:, None] * np.exp(1j * ang[None, :])).ravel()
    bad = cs.chain.contains(z, pad=0.5)
    v = np.abs(cs.f1(z[~bad]))
    L = np.log(1 / np.abs(z[~bad]))
    slope = float(np.polyfit(L, v, 1)[0])
    ref = (cs.f.bound or 0.0) / np.pi
    return {"slope": slope, "bound_slope": ref, "ratio": slope / ref if ref > 0 else np.inf, "max_abs_f1": float(v.max())}


def chain_bound_certificates(chain: DiscChain, grid, k: float = 10.0) -> dict:
    """Check dist(z, B_n) >= c_k g(xi_n) on grid points of C+ outside A_k+ and sum the terms r_n/g(xi_n).

    A_k+ = {xi > 0, 0 < eta < k xi}.  c_k = sin(arctan k - arctan 2) - max r_n/g(xi_n).
    Points with Re z <= 0 additionally get dist(z, B_n) >= xi_n - r_n.
    """
    if not k > 2:
        raise ConfigError("need k > 2")
    z = np.asarray(grid, dtype=complex).ravel()
    upper = z[z.imag > 0]
    in_angle = (upper.real > 0) & (upper.imag < k * upper.real)
    pts = upper[~in_angle]
    gx = chain.g(chain.xi)
    ck = float(np.sin(np.arctan(k) - np.arctan(2.0)) - np.max(chain.radii / gx))
    d = np.abs(pts[:, None] - chain.centers[None, :]) - chain.radii[None, :]
    ratio = d / gx[None, :]
    left = pts.real <= 0
    left_slack = (d[left] - (chain.xi - chain.radii)[None, :]) if left.any() else np.zeros((0, chain.N))
    tail = chain.tail_certificate()
    return {
        "k": k,
        "c_k": ck,
        "c_k_positive": ck > 0,
        "checked": int(pts.size),
        "excluded_in_angle": int(in_angle.sum()),
        "excluded_lower": int(z.size - upper.size),
        "min_dist_ratio": float(ratio.min()) if ratio.size else np.inf,
        "distance_bound_holds": bool(ck > 0 and (ratio.size == 0 or ratio.min() >= ck)),
        "left_min_slack": float(left_slack.min()) if left_slack.size else np.inf,
        "left_bound_holds": bool(left_slack.size == 0 or left_slack.min() >= -1e-15),
        "tail": tail,
    }
