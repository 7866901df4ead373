import numpy as np
import pytest

from bspair import splitter
from bspair.cutting import CuttingFunction, chi_eval
from bspair.errors import ConstructionError, InvalidTestFunctionError, SeparationError
from bspair.geometry import linear_graph, quadratic_arc
from bspair.splitter import AnalyticFunction, SplitResult, split, verify_split

K, MU = 0.5, 1.0


def ex1():
    cf = CuttingFunction(linear_graph(K, b=2.0), MU, 1.0)
    t = np.linspace(0, 1, 400)
    s1 = 0.5 * t[::-1] * np.exp(1j * np.arctan(K / 2))
    s2 = 0.5 * t * np.exp(1j * np.arctan(2 * K * (1 + MU)))
    return cf, s1, s2


def probe(n=12):
    x, y = np.meshgrid(np.linspace(0.05, 1.8, n), np.linspace(0.02, 1.8, n))
    return (x + 1j * y).ravel()


@pytest.fixture(scope="module")
def mobius_split():
    cf, s1, s2 = ex1()
    f = splitter.mobius_power(np.concatenate([s1, s2[1:]]), 1.0)
    sr = split(f, cf, "transversal", s1=s1, s2=s2)
    return sr, verify_split(sr, probe(), levels=3)


def test_constant_catalog():
    f = splitter.test_function("constant", value=1.0)
    assert f.bound == 1.0
    assert np.all(f(probe(4)) == 1.0)


def test_zero_split_is_zero():
    cf, _, _ = ex1()
    sr = split(splitter.constant_function(0.0), cf, "transversal")
    z = probe(5)
    assert np.all(sr.f1(z) == 0) and np.all(sr.f2(z) == 0)
    d = verify_split(sr, z, levels=2)
    assert d["identity_residual"] == 0 and d["cr_residual_f1_off_S1"] == 0


def test_constant_split_identity_exact():
    cf, _, _ = ex1()
    sr = split(splitter.constant_function(1.0), cf, "transversal")
    z = probe(10)
    assert np.max(np.abs(sr.f1(z) + sr.f2(z) - 1.0)) <= 4 * np.finfo(float).eps
    assert np.allclose(sr.f1(z), chi_eval(cf, z) - sr.u(z), rtol=0, atol=1e-15)


def test_mobius_power_bounded_by_exp_two_pi():
    arc = quadratic_arc(0.3, 0.4j, 1.0)
    f = splitter.test_function("mobius_power", arc=arc, beta=1.0)
    x, y = np.meshgrid(np.linspace(-1, 2, 80), np.linspace(-1, 1.5, 80))
    assert np.max(np.abs(f((x + 1j * y).ravel()))) <= np.exp(2 * np.pi)


def test_mobius_cut_follows_arc():
    arc = quadratic_arc(0.0, 0.5j, 1.0)
    f = splitter.mobius_power(arc, 1.0)
    chord_mid = 0.5 + 0.0j
    arc_mid = complex(arc(0.5))
    eps = 1e-7
    assert abs(f(chord_mid + 1j * eps) - f(chord_mid - 1j * eps)) < 1e-5
    assert abs(f(arc_mid + 1j * eps) - f(arc_mid - 1j * eps)) > 1e-2


def test_mobius_rejects_arc_crossing_chord():
    t = np.linspace(0, 1, 500)
    wiggle = t + 0.2j * np.sin(2 * np.pi * t)
    with pytest.raises(ConstructionError):
        splitter.mobius_power(wiggle, 1.0)


def test_cauchy_catalog_analytic_off_arc():
    arc = quadratic_arc(0.5, 0.2j, 1.0)
    f = splitter.test_function("cauchy", arc=arc)
    z = np.array([1.5 + 1.0j, -0.5 + 0.5j, 0.2 - 0.6j])
    assert np.all(np.isfinite(f(z)))
    from bspair.dbar import cr_residual

    assert cr_residual(f, z, 1e-3) < 1e-8
    with pytest.raises(InvalidTestFunctionError):
        splitter.test_function("cauchy", arc=arc, density=lambda t: 1.0 + 0 * t)


def test_mobius_split_certified(mobius_split):
    sr, d = mobius_split
    assert d["identity_residual"] < 1e-15
    assert d["cr_residual_f1_off_S1"] <= 1e-4
    assert d["cr_residual_f2_off_S2"] <= 1e-4
    assert d["plateau"]["f1"]["status"] == "CERTIFIED-BOUNDED"
    assert d["plateau"]["f2"]["status"] == "CERTIFIED-BOUNDED"


def test_tampered_piece_flagged(mobius_split):
    sr, _ = mobius_split
    s = 0.3 * np.exp(1j * np.arctan(2 * K * (1 + MU))) + 0.05j
    f1 = sr.f1
    bad = AnalyticFunction(lambda z: f1(z) + 1.0 / (z - s), singular=f1.singular)
    tampered = SplitResult(sr.f, bad, sr.f2, sr.u, sr.cf)
    d = verify_split(tampered, probe(6), levels=3, centers=(0j, s))
    assert d["plateau"]["f1"]["status"] == "NOT-CERTIFIED-BOUNDED"
    assert d["plateau"]["f2"]["status"] == "CERTIFIED-BOUNDED"


def test_standard_solver_identity_holds_but_not_bounded():
    cf, _, _ = ex1()
    sr = split(splitter.constant_function(1.0), cf, "standard")
    d = verify_split(sr, probe(6), levels=3)
    assert d["identity_residual"] < 1e-15
    assert d["plateau"]["u"]["status"] == "NOT-CERTIFIED-BOUNDED"
    assert d["plateau"]["f1"]["status"] == "NOT-CERTIFIED-BOUNDED"


def test_unseparated_sets_rejected():
    cf, s1, s2 = ex1()
    inside = 0.3 * np.exp(1j * np.arctan(1.5 * K))
    with pytest.raises(SeparationError):
        split(splitter.constant_function(1.0), cf, "transversal", s1=np.append(s1, inside), s2=s2)


def test_export_split(tmp_path, mobius_split):
    sr, d = mobius_split
    sr.diagnostics = d
    splitter.export_split(sr, probe(3), tmp_path / "run")
    import json

    data = json.loads((tmp_path / "run_diagnostics.json").read_text())
    assert "identity_residual" in data
    assert (tmp_path / "run_f1.csv").exists()
