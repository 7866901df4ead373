import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from bspair.errors import DegenerateTangentError, DomainError, InvalidPairError, UndefinedCorridorError
from bspair.geometry import (
    GraphFunction,
    PairSpec,
    ParametricArc,
    Verdict,
    classify_pair,
    corridor_width,
    hyperbolic_distance,
    linear_graph,
    poly_graph,
    power_graph,
    quadratic_arc,
    ray_arc,
    separation_check,
    tangent_at_origin,
    tent_graph,
)

upper = st.builds(
    complex,
    st.floats(-50, 50, allow_nan=False),
    st.floats(1e-3, 50, allow_nan=False),
)


def geodesic_length(z, w):
    """Integrate |dz|/Im z along the circular geodesic through z and w."""
    c = (abs(w) ** 2 - abs(z) ** 2) / (2 * (w.real - z.real))
    r = abs(z - c)
    t0, t1 = sorted([np.angle(z - c), np.angle(w - c)])
    return quad(lambda t: 1.0 / np.sin(t), t0, t1, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


def test_distance_examples():
    assert hyperbolic_distance(1j, 1j) == 0.0
    assert hyperbolic_distance(1j, 2j) == pytest.approx(np.log(2), abs=1e-15)
    assert abs(hyperbolic_distance(1 + 1j, 3 + 1j) - geodesic_length(1 + 1j, 3 + 1j)) < 1e-10


def test_distance_rejects_lower_half_plane():
    with pytest.raises(DomainError):
        hyperbolic_distance(1j, 0.0)
    with pytest.raises(DomainError):
        hyperbolic_distance(-1j, 1j)


@given(upper, upper)
def test_distance_matches_geodesic_integral(z, w):
    if abs(z.real - w.real) < 1e-2 or hyperbolic_distance(z, w) > 20:
        return
    assert abs(hyperbolic_distance(z, w) - geodesic_length(z, w)) < 1e-8 * max(1, hyperbolic_distance(z, w))


@given(upper, upper, upper)
def test_triangle_inequality(a, b, c):
    assert hyperbolic_distance(a, c) <= hyperbolic_distance(a, b) + hyperbolic_distance(b, c) + 1e-9


@given(upper, upper, st.floats(-10, 10), st.floats(0.1, 10))
def test_distance_isometries(z, w, c, lam):
    d = hyperbolic_distance(z, w)
    assert hyperbolic_distance(z + c, w + c) == pytest.approx(d, rel=1e-9, abs=1e-9)
    assert hyperbolic_distance(lam * z, lam * w) == pytest.approx(d, rel=1e-9, abs=1e-9)
    assert hyperbolic_distance(w, z) == d


def test_corridor_width_examples():
    assert abs(corridor_width(linear_graph(0.7), 1.0) - np.log(2)) < 1e-12
    assert abs(corridor_width(power_graph(1.0, 2.0), 0.5) - np.log(1.5)) < 1e-12
    assert abs(corridor_width(tent_graph(0.5, 1.0), 1.0) - np.log(2)) < 1e-12


def test_corridor_width_undefined():
    zero = GraphFunction(b=1.0, value=lambda x: 0.0 * np.asarray(x), derivative=lambda x: 0.0 * np.asarray(x))
    with pytest.raises(UndefinedCorridorError):
        corridor_width(zero, 1.0)


@given(st.floats(0.01, 20), st.floats(0.01, 5), st.floats(1.0, 4.0))
def test_corridor_width_is_log(mu, c, p):
    assert abs(corridor_width(power_graph(c, p), mu) - np.log1p(mu)) < 1e-10


def test_tangent_examples():
    assert tangent_at_origin(power_graph(1.0, 2.0)) == pytest.approx(1.0)
    t = tangent_at_origin(ray_arc(np.pi / 4))
    assert t == pytest.approx(np.exp(1j * np.pi / 4), abs=1e-15)
    t = tangent_at_origin(linear_graph(0.5))
    assert t == pytest.approx(complex(2, 1) / np.sqrt(5), abs=1e-15)


def test_tangent_degenerate():
    arc = ParametricArc(gamma=lambda t: 1j * t**2, dgamma=lambda t: 2j * t)
    with pytest.raises(DegenerateTangentError):
        tangent_at_origin(arc)


@given(st.floats(0.0, np.pi), st.floats(0.1, 10))
def test_tangent_unit_norm(angle, length):
    assert abs(abs(tangent_at_origin(ray_arc(angle, length))) - 1) < 1e-12


def test_classify_examples():
    d = classify_pair(PairSpec(power_graph(1.0, 2.0), power_graph(2.0, 2.0), containing_angle_slope=3.0))
    assert d.verdict is Verdict.BS and d.exit_code == 0
    assert d.evidence["branch"].startswith("II(b)")
    assert np.allclose(d.evidence["ratio"], 1.0)

    d = classify_pair(PairSpec(power_graph(1.0, 2.0, b=0.5), poly_graph([0, 0, 1, 1], b=0.5)))
    assert d.verdict is Verdict.NOT_BS and d.exit_code == 1

    d = classify_pair(ray_arc(np.pi / 4), ray_arc(np.pi / 2))
    assert d.verdict is Verdict.BS and d.evidence["branch"].startswith("I:")


def test_common_nonreal_tangent():
    d = classify_pair(ray_arc(np.pi / 4), quadratic_arc(np.pi / 4, 0.3j))
    assert d.verdict is Verdict.NOT_BS
    assert d.evidence["branch"].startswith("II(a)")


def test_parametric_real_tangent_resampled():
    d = classify_pair(quadratic_arc(0.0, 0.5j), quadratic_arc(0.0, 1.0j))
    assert d.verdict is Verdict.BS
    d = classify_pair(quadratic_arc(np.pi, 0.5j), quadratic_arc(np.pi, 1.0j))
    assert d.verdict is Verdict.BS


def oscillating_graph(floor=1e-5):
    """x^2 (1 + r(x)) with r(b 2^-n) alternating between 1 and ``floor``."""
    amp = 0.5 * (1 - floor)

    def r(x):
        return floor + amp * (1 + np.cos(np.pi * np.log2(x)))

    def dr(x):
        return -amp * np.pi * np.sin(np.pi * np.log2(x)) / (x * np.log(2))

    def val(x):
        x = np.asarray(x, dtype=float)
        xs = np.where(x > 0, x, 1.0)
        return np.where(x > 0, xs**2 * (1 + r(xs)), 0.0)

    def der(x):
        x = np.asarray(x, dtype=float)
        xs = np.where(x > 0, x, 1.0)
        return np.where(x > 0, 2 * xs * (1 + r(xs)) + xs**2 * dr(xs), 0.0)

    return GraphFunction(b=1.0, value=val, derivative=der, name="oscillating")


def test_indeterminate_oscillation():
    d = classify_pair(PairSpec(power_graph(1.0, 2.0), oscillating_graph(), containing_angle_slope=5.0))
    assert d.verdict is Verdict.INDETERMINATE and d.exit_code == 2
    assert min(d.evidence["ratio"]) < 1e-3 and max(d.evidence["ratio"][-5:]) > 1e-6


def test_crossing_arcs_rejected():
    a = ParametricArc(gamma=lambda t: t + 1j * t * (1 - t) + 1e-3j * t, dgamma=lambda t: 1 + 1j * (1 - 2 * t) + 1e-3j)
    b = ray_arc(np.pi / 8)
    with pytest.raises(InvalidPairError):
        classify_pair(a, b)


def test_unordered_graphs_rejected():
    with pytest.raises(InvalidPairError):
        classify_pair(PairSpec(power_graph(2.0, 2.0), power_graph(1.0, 2.0)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(1.05, 4.0), st.floats(0.1, 10.0))
def test_classify_scale_invariant(c1, ratio, scale):
    base = classify_pair(PairSpec(power_graph(c1, 2.0), power_graph(c1 * ratio, 2.0), 100.0))
    scaled = classify_pair(PairSpec(power_graph(scale * c1, 2.0), power_graph(scale * c1 * ratio, 2.0), 1000.0))
    assert base.verdict == scaled.verdict == Verdict.BS


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, np.pi / 2 - 0.05), st.floats(0.05, 1.0))
def test_classify_swap_invariant(a1, gap):
    a2 = a1 + gap
    assert classify_pair(ray_arc(a1), ray_arc(a2)).verdict == classify_pair(ray_arc(a2), ray_arc(a1)).verdict


def test_separation_examples():
    x = np.linspace(1e-4, 1, 200)
    g = power_graph(1.5, 2.0)
    rep = separation_check(x + 1j * x**2, x + 2j * x**2, g, 0.2)
    assert rep.ok and rep.margin > 0
    rep = separation_check(np.array([0.5 + 1j]), x + 2j * x**2, g, 0.2)
    assert not rep.ok and rep.violations[0] == ("S1", 0.5 + 1j)
    assert separation_check(np.array([]), x + 2j * x**2, g, 0.2).ok
