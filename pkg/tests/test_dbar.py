import numpy as np
import pytest

from bspair.cutting import CuttingFunction, chi_eval
from bspair.dbar import (
    CutDensity,
    GridDensity,
    cr_residual,
    dbar_residual,
    jones_alpha_inverse,
    jones_probe_grid,
    jones_solution,
    plateau_scan,
    read_field_csv,
    reflection_term,
    residual_convergence,
    standard_cauchy_solution,
    tangential_contour_term,
    tangential_solution,
    transversal_solution,
    unit_disc_density,
    unit_disc_exact,
    write_field_csv,
)
from bspair.errors import GeometryError
from bspair.geometry import linear_graph, power_graph, tent_graph


def ex1_cf(R=1.0):
    return CuttingFunction(linear_graph(0.5, b=2 * R), 1.0, R)


def ex3_cf():
    return CuttingFunction(power_graph(1.0, 2.0, b=3.6), 1.0, 1.8)


def pole(z):
    return 1.0 / (np.asarray(z, dtype=complex) + 2j)


def probe_grid(n=8):
    x, y = np.meshgrid(np.linspace(0.07, 1.7, n), np.linspace(0.03, 1.7, n))
    return (x + 1j * y).ravel()


def test_disc_transform_matches_closed_form():
    rho = unit_disc_density(n=256, subsample=8)
    x, y = np.meshgrid(np.linspace(-2, 2, 20), np.linspace(-2, 2, 20))
    z = (x + 1j * y).ravel()
    u = standard_cauchy_solution(rho)(z)
    exact = unit_disc_exact(z)
    assert np.max(np.abs(u - exact)) / np.max(np.abs(exact)) < 5e-3


@pytest.mark.parametrize("solver", ["standard", "jones", "transversal", "tangential"])
def test_zero_density_gives_zero(solver):
    zero = lambda z: np.zeros(np.shape(z), complex)
    z = probe_grid(4)
    if solver == "tangential":
        u = tangential_solution(zero, ex3_cf(), 0.5)
    else:
        rho = CutDensity(zero, ex1_cf())
        u = {"standard": standard_cauchy_solution, "jones": jones_solution, "transversal": transversal_solution}[solver](rho)
    assert np.all(u(z) == 0)


@pytest.mark.parametrize("solver", [standard_cauchy_solution, transversal_solution])
def test_linearity(solver):
    cf = ex1_cf()
    z = probe_grid(5)
    f1 = lambda z: np.ones(np.shape(z), complex)
    u1 = solver(CutDensity(f1, cf))(z)
    u2 = solver(CutDensity(pole, cf))(z)
    u12 = solver(CutDensity(lambda z: f1(z) + 2 * pole(z), cf))(z)
    assert np.max(np.abs(u12 - u1 - 2 * u2)) < 1e-10 * np.max(np.abs(u12))


@pytest.mark.parametrize("solver", [standard_cauchy_solution, transversal_solution])
def test_scaling_covariance(solver):
    # rho_lam(z) = lam rho(lam z) is solved by u(lam z)
    lam = 2.0
    z = probe_grid(5) * 0.4
    u = solver(CutDensity(pole, ex1_cf(1.0)))
    u_lam = solver(CutDensity(lambda w: pole(lam * np.asarray(w)), ex1_cf(1.0 / lam)))
    assert np.max(np.abs(u_lam(z) - u(lam * z))) < 1e-9 * np.max(np.abs(u(lam * z)))


def test_residual_converges_second_order():
    rho = CutDensity(pole, ex1_cf())
    u = standard_cauchy_solution(rho)
    reports, orders = residual_convergence(u, rho, probe_grid(8), [4e-3, 2e-3, 1e-3])
    assert np.all(orders > 1.5)
    assert reports[-1].relative < 0.05


def test_mismatched_density_detected():
    cf = ex1_cf()
    rho = CutDensity(pole, cf)
    wrong = CutDensity(lambda z: 2 * pole(z), cf)
    u = standard_cauchy_solution(wrong)
    rep = dbar_residual(u, rho, probe_grid(8), 1e-3)
    assert rep.relative > 0.5


def test_reflection_and_contour_terms_analytic():
    z = probe_grid(6)
    a = reflection_term(CutDensity(pole, ex1_cf()))
    assert cr_residual(a, z, 1e-3) < 1e-8
    t = tangential_contour_term(pole, ex3_cf(), 0.5)
    assert cr_residual(t, z[np.abs(z - 0.5) > 0.05], 1e-3) < 1e-6


def test_jones_alpha_stable_under_probe_refinement():
    rho = CutDensity(pole, ex1_cf())
    coarse, _ = jones_alpha_inverse(rho, jones_probe_grid(rho, n=24, depth=30))
    fine, _ = jones_alpha_inverse(rho, jones_probe_grid(rho, n=48, depth=30))
    assert abs(fine - coarse) / coarse < 0.05


def test_contour_route_matches_area_route():
    cf = CuttingFunction(tent_graph(0.2, 1.0), 1.0, R=1.0)
    rho = CutDensity(pole, cf)
    grid = GridDensity(lambda z: rho(z) * (np.asarray(z).imag > 0), box=(-2.0, 2.0, 0.0, 2.0), n=400, subsample=4)
    z = np.array([0.6 + 1.2j, -1.0 + 0.8j, 1.5 + 1.5j, 0.3 + 0.02j])
    a = standard_cauchy_solution(rho)(z)
    b = standard_cauchy_solution(grid)(z)
    assert np.max(np.abs(a - b)) < 2e-2 * np.max(np.abs(a))


def test_transversal_rejects_curved_corridor():
    with pytest.raises(GeometryError):
        transversal_solution(CutDensity(pole, ex3_cf()))


def test_tangential_rejects_corridor_leaving_plateau():
    with pytest.raises(GeometryError):
        tangential_solution(pole, ex3_cf(), 1.7)
    with pytest.raises(GeometryError):
        tangential_solution(pole, CuttingFunction(tent_graph(0.2, 1.0), 1.0, 1.0), 0.5)


def test_cauchy_solution_of_constant_has_chi_jump():
    # away from the support of dbar chi, C^rho - f chi is analytic
    cf = ex1_cf()
    u = standard_cauchy_solution(CutDensity(lambda z: np.ones(np.shape(z), complex), cf))
    z = np.array([-0.5 + 0.5j, 0.2 + 0.8j, 3.0 + 1.0j])
    assert cr_residual(lambda w: u(w) - chi_eval(cf, w), z, 1e-3) < 1e-6


def test_transversal_plateaus_while_standard_grows():
    rho = CutDensity(lambda z: np.ones(np.shape(z), complex), ex1_cf())
    std = plateau_scan(standard_cauchy_solution(rho), 0.5, levels=3)
    tr = plateau_scan(transversal_solution(rho), 0.5, levels=3)
    assert min(std.growth) > 0.25
    assert max(tr.growth) < 0.01


def test_field_csv_roundtrip(tmp_path):
    z = probe_grid(3)
    u = np.exp(z) + 1j / 3
    write_field_csv(tmp_path / "u.csv", z, u)
    z2, u2 = read_field_csv(tmp_path / "u.csv")
    assert np.array_equal(z, z2) and np.array_equal(u, u2)
