import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bspair import splitter
from bspair import witness as W
from bspair.errors import (
    AmbiguityError,
    ContainmentError,
    InvalidCellError,
    InvalidTestFunctionError,
    ScheduleInfeasibleError,
    SingularPointError,
)
from bspair.geometry import poly_graph, power_graph

P1 = power_graph(0.5, 2.0, b=0.5)
P2 = power_graph(1.0, 2.0, b=0.5)


def pair_at(n):
    x = 0.5 * 2.0**-n
    return W.WitnessPair(W.schedule("ANGLE", x, P1, P2), P1, P2)


@pytest.fixture(scope="module")
def family():
    xs = 0.5 * 2.0 ** -np.arange(3, 14)
    return W.witness_family("ANGLE", P1, P2, xs, k=1.0)


def test_rotundity_examples():
    assert W.rotundity(W.disc_cell(0.3 + 0.2j, 2.0)) == pytest.approx(1.0, abs=1e-9)
    square = W.Cell(np.array([0, 1, 1 + 1j, 1j]), 0.5 + 0.5j)
    assert W.rotundity(square) == pytest.approx(np.pi / 4, rel=1e-12)
    assert W.rotundity(W.disc_cell(0.0, 1.0, offset=0.5)) == pytest.approx(0.5, rel=1e-9)


def test_cell_rejects_outside_center():
    with pytest.raises(InvalidCellError):
        W.Cell(np.array([0, 1, 1 + 1j, 1j]), 2.0 + 0.5j)
    with pytest.raises(InvalidCellError):
        W.Cell(np.array([0, 1, 1j, 1 + 1j]), 0.5 + 0.5j)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-0.9, 0.9))
def test_rotundity_at_most_one(a, b):
    cell = W.Cell(np.array([0, 1, 1 + 1j, 1j]) * (1 + a), complex(0.5 + 0.5 * a, 0.5 + 0.5 * a) * (1 + 0.5 * b))
    assert 0 < W.rotundity(cell) <= 1


def test_trapezoid_values():
    p = W.WitnessParams(x=1.0, X=3.0, h=0.5)
    f = W.trapezoid(p)
    assert f(1.0) == 0 and f(1.25) == pytest.approx(0.5) and f(2.0) == 1.0 and f(3.5) == 0


def test_angle_schedule_example():
    p = W.schedule("ANGLE", 0.01, power_graph(1.0, 2.0), power_graph(2.0, 2.0))
    assert p.eps == pytest.approx(0.06, rel=1e-12)
    assert p.X == pytest.approx(0.02) and p.h == pytest.approx(0.0012, rel=1e-12)


def test_upper_angle_schedule_example():
    x = 0.01
    phi2 = poly_graph({2: 1.0, 3: 1.0})
    p = W.schedule("UPPER_ANGLE", x, power_graph(1.0, 2.0), phi2)
    X = x + x * x / 2
    assert p.X == pytest.approx(X, rel=1e-14)
    assert p.eps == pytest.approx(x + 3 * X * X, rel=1e-9)
    assert p.h == pytest.approx(2 * x * x * (x + 3 * X * X), rel=1e-9)


def test_schedules_shrink_ramp_ratio():
    ratios = [(lambda p: p.h / (p.X - p.x))(W.schedule("ANGLE", x, P1, P2)) for x in 2.0 ** -np.arange(5, 15)]
    assert np.all(np.diff(ratios) < 0) and ratios[-1] < 1e-3
    phi2 = poly_graph({2: 1.0, 3: 1.0})
    up = [(lambda p: p.h / (p.X - p.x))(W.schedule("UPPER_ANGLE", x, power_graph(1.0, 2.0), phi2)) for x in 2.0 ** -np.arange(5, 15)]
    assert np.all(np.diff(up) < 0) and up[-1] < 1e-3


def test_proximity_violation_reports_t():
    p = W.WitnessParams(x=0.1, X=0.2, h=1e-4)
    with pytest.raises(ScheduleInfeasibleError) as err:
        W.check_proximity(p, P1, P2)
    assert 0.1 <= err.value.t <= 0.2


def test_decay_at_infinity():
    pair = pair_at(6)
    X = pair.params.X
    z = 1e6 * X * np.exp(1j * np.linspace(0, 2 * np.pi, 8))
    for j in (1, 2):
        assert np.all(np.abs(W.phi_witness(j, pair, z)) <= 2 * X / np.abs(z))


def test_jump_across_arc():
    pair = pair_at(7)
    p = pair.params
    for t0, fval in ((0.5 * (p.x1 + p.x2), 1.0), (p.x + 0.3 * p.h, 0.3)):
        z0 = np.array([t0 + 1j * P1(t0)])
        jump = W.phi_witness(1, pair, z0, side="+") - W.phi_witness(1, pair, z0, side="-")
        assert jump[0] == pytest.approx(fval, abs=1e-12)
        nrm = 1j * (1 + 1j * P1.d(t0))
        nrm /= abs(nrm)
        d = 1e-7 * p.x
        assert abs(W.phi_witness(1, pair, z0 + d * nrm) - W.phi_witness(1, pair, z0, side="+"))[0] < 1e-5


def test_on_arc_needs_side():
    pair = pair_at(7)
    t0 = 0.5 * (pair.params.x1 + pair.params.x2)
    with pytest.raises(AmbiguityError):
        W.phi_witness(1, pair, np.array([t0 + 1j * P1(t0)]))


def test_value_at_A_is_limit():
    pair = pair_at(7)
    vA = W.phi1_at_A(pair)
    d = 1e-9 * pair.params.x
    near = W.phi_witness(1, pair, np.array([pair.A - d, pair.A + 1j * d]))
    assert np.max(np.abs(near - vA)) < 1e-6


def test_blowup_lower_bound_at_large_ratio():
    x, h = 0.1, 1e-10
    p = W.WitnessParams(x=x, X=x + 2 * h + 2e-2, h=h)
    assert (p.x2 - p.x1) / (2 * p.h) == pytest.approx(1e8)
    pair = W.WitnessPair(p, P1, P2)
    assert abs(W.phi1_at_A(pair)) >= W.blowup_lower_bound(p)
    assert W.blowup_lower_bound(p) == pytest.approx(np.log(1e8) / (2 * np.pi) - 2)


def test_no_plateau_no_blowup():
    x = 0.01
    p = W.WitnessParams(x=x, X=2 * x, h=x / 2)
    assert abs(W.phi1_at_A(W.WitnessPair(p, P1, P2))) < 2


def test_blowup_slope_and_bounded_sum(family):
    slope = W.blowup_slope(family)
    assert slope == pytest.approx(1 / (2 * np.pi), rel=0.2)
    sums = np.array([r["sum_scan"] for r in family])
    assert sums.max() / sums.min() < 4
    assert all(r["phi1_at_A"] >= r["lower_bound"] for r in family)


def test_far_ring_decay():
    pair = pair_at(6)
    assert W.sum_bound_scan(pair).far_value <= 4 / 10


def test_angle_cells_similar():
    k = 3.0
    rots = [W.rotundity(W.cell_for("ANGLE", x, P1, k)) for x in 2.0 ** -np.arange(5, 16)]
    assert min(rots) > 0
    assert (max(rots) - min(rots)) / min(rots) < 0.01


def test_square_cell_and_containment():
    phi1 = power_graph(1.0, 2.0)
    x = 0.01
    cell = W.cell_for("UPPER_ANGLE", x, phi1, 1.0, X=x + x * x / 2)
    assert W.rotundity(cell) == pytest.approx(np.pi / 4, rel=1e-12)
    with pytest.raises(ContainmentError):
        W.cell_for("UPPER_ANGLE", x, phi1, 1.0, X=x + 2 * x * x)
    p = W.schedule("ANGLE", 2.0**-8, P1, P2)
    W.cell_for("ANGLE", p.x, P1, 1.0, X=p.X)


@pytest.fixture(scope="module")
def gap_setup():
    pair = pair_at(7)
    p = pair.params
    cell = W.cell_for("ANGLE", p.x, P1, 1.0, p.X)
    phi = lambda z: W.phi_witness(1, pair, z)
    return pair, cell, phi, W.phi1_at_A(pair)


def test_cell_gap_zero_test_function(gap_setup):
    pair, cell, phi, vA = gap_setup
    rep = W.cell_gap(phi, cell, pair.arc(1), phi_A=vA)
    assert rep.holds and rep.lhs >= rep.rhs


def test_cell_gap_minimax_polynomial(gap_setup):
    pair, cell, phi, vA = gap_setup
    z = W.cell_probe_grid(cell, pair.arc(1), 20)
    coeffs = W.minimax_polynomial(z, phi(z), 4, cell.center)
    rep = W.cell_gap(phi, cell, pair.arc(1), h_test=W.polynomial(coeffs, cell.center), phi_A=vA)
    assert rep.holds


def test_cell_gap_homogeneous(gap_setup):
    pair, cell, phi, vA = gap_setup
    a = W.cell_gap(phi, cell, pair.arc(1), phi_A=vA, n=16)
    b = W.cell_gap(lambda z: 3j * phi(z), cell, pair.arc(1), phi_A=3j * vA, n=16)
    assert b.lhs == pytest.approx(3 * a.lhs, rel=1e-12) and b.rhs == pytest.approx(3 * a.rhs, rel=1e-12)


def test_cell_gap_rejects_non_analytic_test(gap_setup):
    pair, cell, phi, vA = gap_setup
    with pytest.raises(InvalidTestFunctionError):
        W.cell_gap(phi, cell, pair.arc(1), h_test=lambda z: np.conj(z) / pair.params.x, phi_A=vA, n=10)


def test_kernel_split_identity():
    rng = np.random.default_rng(0)
    t = rng.uniform(0.01, 0.4, 100)
    t0 = rng.uniform(0.01, 0.4, 100)
    k1, k2 = W.kernel_split(t, t0, P1, P2)
    direct = W.direct_kernel(t, t0, P1, P2)
    assert np.max(np.abs(k1 + k2 - direct) / np.abs(direct)) < 1e-10


def test_kernel_split_equal_graphs():
    t = np.linspace(0.05, 0.3, 20)
    k1, k2 = W.kernel_split(t, 0.17, P1, P1)
    assert np.all(k2 == 0)
    assert np.max(np.abs(W.direct_kernel(t, 0.17, P1, P1))) == 0
    assert np.max(np.abs(k1)) < 1e-12


def test_kernel_k1_integrable_rate():
    t0 = 0.2
    d = np.geomspace(1e-6, 1e-2, 20)
    k1, _ = W.kernel_split(t0 + d, t0, P1, P2)
    slope = np.polyfit(np.log(d), np.log(np.abs(k1)), 1)[0]
    eps = P2.holder_exponent
    assert slope >= eps - 1 - 0.1
    with pytest.raises(SingularPointError):
        W.kernel_split(np.array([t0]), t0, P1, P2)


def test_witness_reexport():
    pair = pair_at(6)
    f = splitter.test_function("witness", pair=pair, j=2)
    z = np.array([0.1 + 0.1j, -0.2 + 0.05j])
    assert np.array_equal(f(z), W.phi_witness(2, pair, z))


def test_family_exports(tmp_path, family):
    W.write_family_csv(tmp_path / "fam.csv", family)
    W.write_report_json(tmp_path / "fam.json", family)
    data = json.loads((tmp_path / "fam.json").read_text())
    assert len(data) == len(family) and "sum_scan" in data[0]
    assert (tmp_path / "fam.csv").read_text().count("\n") == len(family) + 1
