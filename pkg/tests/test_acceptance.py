"""Acceptance criteria 1-9, one test each, at the stated tolerances."""

import time
import warnings

import numpy as np

from bspair import scenarios as S
from bspair import witness as W
from bspair.cutting import carleson_box_integral
from bspair.dbar import (
    CutDensity,
    plateau_scan,
    polar_grid,
    residual_convergence,
    standard_cauchy_solution,
    unit_disc_density,
    unit_disc_exact,
)
from bspair.geometry import Verdict, power_graph
from bspair.splitter import PLATEAU_GROWTH, constant_function, solve, split, verify_split

from conftest import ACCEPTANCE_LINES


def record(n, ok, detail):
    ACCEPTANCE_LINES[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[n])
    return ok


def test_criterion_1_disc_transform():
    t0 = time.perf_counter()
    rho = unit_disc_density(n=512, subsample=8)
    x, y = np.meshgrid(np.linspace(-2, 2, 64), np.linspace(-2, 2, 64))
    z = (x + 1j * y).ravel()
    u = standard_cauchy_solution(rho)(z)
    exact = unit_disc_exact(z)
    err = float(np.max(np.abs(u - exact)) / np.max(np.abs(exact)))
    secs = time.perf_counter() - t0
    assert record(1, err <= 1e-3 and secs < 300, f"relative error {err:.2e} (<= 1e-3), {secs:.1f}s")


def test_criterion_2_dbar_residual():
    rows, ok = [], True
    for name, solver in [("EX1", "standard"), ("EX1", "jones"), ("EX1", "transversal"), ("EX3", "tangential")]:
        sc = S.scenario(name)
        f = S.scenario_test_function(sc)
        u = solve(f, sc.cf, solver, **sc.solver_options)
        grid = polar_grid(sc.cf.R / 64, sc.cf.R, 12, 16)
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message=".*guard band")
            reps, orders = residual_convergence(u, CutDensity(f, sc.cf), grid, [4e-3, 2e-3, 1e-3], avoid=np.concatenate([sc.s1, sc.s2]))
        good = reps[-1].relative <= 0.05 and np.all(orders >= 1.5)
        ok &= bool(good)
        rows.append(f"{name}/{solver} rel={reps[-1].relative:.1e} order={orders.min():.2f}")
    assert record(2, ok, "; ".join(rows))


def test_criterion_3_carleson_scaling():
    rng = np.random.default_rng(3)
    sides = 10.0 ** rng.uniform(-4, 0, 100)
    mus = (0.5, 1.0, 2.0)
    per_mu, spreads = [], []
    for mu in mus:
        cf = S.scenario("EX1", {"k": 1.0, "mu": mu, "R": 10.0}).cf
        r = np.array([carleson_box_integral(cf, 0.0, b).ratio for b in sides])
        spreads.append(r.max() / r.min())
        per_mu.append(np.median(r))
    normalised = np.array(per_mu) / np.log1p(mus)
    scaling = normalised.max() / normalised.min()
    ok = max(spreads) <= 1.1 and scaling <= 1.1
    detail = (f"box ratio spread {max(spreads):.6f} (<= 1.1); ratio/log(1+mu) = "
              f"{', '.join(f'{v:.3f}' for v in normalised)} spread {scaling:.2f} (<= 1.1)")
    assert record(3, ok, detail)


def test_criterion_4_boundedness_contrast():
    one = constant_function(1.0)
    ex1 = S.scenario("EX1")
    R = ex1.cf.R
    rows, ok = [], True
    for solver in ("transversal", "jones"):
        scan = plateau_scan(solve(one, ex1.cf, solver), R / 2, levels=4)
        g = max(scan.growth)
        ok &= g < 0.10
        rows.append(f"{solver} u growth {g:.1e}")
        sr = split(one, ex1.cf, solver, s1=ex1.s1, s2=ex1.s2)
        diag = verify_split(sr, polar_grid(R / 8, R, 4, 6), levels=4)
        for piece in ("f1", "f2"):
            gp = diag["plateau"][piece]["max_growth"]
            ok &= gp < PLATEAU_GROWTH
            rows.append(f"{solver} {piece} growth {gp:.1e}")
    ex3 = S.scenario("EX3")
    scan = plateau_scan(standard_cauchy_solution(CutDensity(one, ex3.cf)), ex3.cf.R / 2, levels=4)
    gmin = min(scan.growth)
    ok &= gmin >= 0.25
    rows.append(f"EX3 standard growth min {gmin:.2f} (>= 0.25)")
    assert record(4, ok, "; ".join(rows))


def test_criterion_5_witness_family():
    t0 = time.perf_counter()
    b = 0.125
    phi1, phi2 = power_graph(1.0, 2.0, b=b), power_graph(2.0, 2.0, b=b)
    xs = b * 2.0 ** -np.arange(3, 14)
    rows = W.witness_family("ANGLE", phi1, phi2, xs, k=3.0)
    lower = all(r["phi1_at_A"] >= r["lower_bound"] for r in rows)
    slope = W.blowup_slope(rows)
    target = 1 / (2 * np.pi)
    sums = np.array([r["sum_scan"] for r in rows])
    rots = np.array([r["rotundity"] for r in rows])
    var = (rots.max() - rots.min()) / rots.min()
    secs = time.perf_counter() - t0
    ok = lower and abs(slope / target - 1) <= 0.2 and sums.max() / sums.min() <= 4 and var < 0.01 and secs < 300
    detail = (f"lower bound {'all' if lower else 'not all'}; slope {slope:.4f} vs {target:.4f}; "
              f"sum max/min {sums.max() / sums.min():.2f}; rotundity >= {rots.min():.4f}, variation {var:.2%}; {secs:.1f}s")
    assert record(5, ok, detail)


def test_criterion_6_kernel_split():
    rng = np.random.default_rng(6)
    phi1, phi2 = power_graph(1.0, 2.0), power_graph(2.0, 2.0)
    t = rng.uniform(0.01, 0.5, 10_000)
    t0 = rng.uniform(0.01, 0.5, 10_000)
    k1, k2 = W.kernel_split(t, t0, phi1, phi2)
    direct = W.direct_kernel(t, t0, phi1, phi2)
    err = float(np.max(np.abs(k1 + k2 - direct) / np.abs(direct)))
    assert record(6, err <= 1e-10, f"max relative deviation {err:.1e} over 10^4 points (<= 1e-10)")


def test_criterion_7_cell_gap():
    b = 0.125
    phi1, phi2 = power_graph(1.0, 2.0, b=b), power_graph(2.0, 2.0, b=b)
    worst, count = np.inf, 0
    for n in (4, 6, 8, 10, 12):
        p = W.schedule("ANGLE", b * 2.0**-n, phi1, phi2)
        pair = W.WitnessPair(p, phi1, phi2)
        phi = lambda z, pair=pair: W.phi_witness(1, pair, z)
        vA = W.phi1_at_A(pair)
        K = pair.arc(1)
        for k in (1.0, 3.0):
            cell = W.cell_for("ANGLE", p.x, phi1, k, p.X)
            z = W.cell_probe_grid(cell, K, 20)
            for degree in (2, 4):
                coeffs = W.minimax_polynomial(z, phi(z), degree, cell.center)
                rep = W.cell_gap(phi, cell, K, h_test=W.polynomial(coeffs, cell.center), phi_A=vA, n=24)
                worst = min(worst, rep.lhs - rep.rhs)
                count += 1
    ok = count == 20 and worst >= -1e-6
    assert record(7, ok, f"{count} triples, min(lhs - rhs) = {worst:.3e} (>= -1e-6)")


def test_criterion_8_disc_chain_split():
    chain = S.scenario("DISC_CHAIN").chain
    f = S.pole_catalog_function(chain)
    cs = S.theorem9_split(f, chain, Y=1e4)
    probe = S.right_half_probe(chain, 16, 12)
    rep = S.split_report(cs, probe, 1e-3)
    rng = np.random.default_rng(8)
    rnd = rng.uniform(-1, 1, 400) + 1j * rng.uniform(-1, 1, 400)
    rnd = rnd[~chain.contains(rnd)][:50]
    bound = S.circle_bound_check(f, chain, np.concatenate([probe, rnd]))
    growth = S.f1_growth(cs)
    ok = rep["identity_residual"] <= 1e-3 and bound["holds"] and growth["ratio"] <= 1.2
    detail = (f"identity {rep['identity_residual']:.1e} (<= 1e-3); circle bound max ratio {bound['max_ratio']:.3f} (<= 1); "
              f"f1 slope/bound {growth['ratio']:.3f} (<= 1.2); signed grouping residual {rep['signed_grouping_residual']:.2f}")
    assert record(8, ok, detail)


def test_criterion_9_classifier_table():
    arcs = [{"kind": "quadratic", "angle": np.pi / 4, "bend": [0.0, 0.3]}, {"kind": "quadratic", "angle": np.pi / 4, "bend": [0.3, 0.0]}]
    table = {
        "EX1": (S.scenario("EX1").classify().verdict, Verdict.BS),
        "EX3 phi2 = 2 phi1": (S.scenario("EX3").classify().verdict, Verdict.BS),
        "tangent Delta/phi1 = xi": (S.scenario("TANGENT_NOT_BS", {"delta_ratio": {"kind": "linear", "k": 1.0}}).classify().verdict, Verdict.NOT_BS),
        "common tangent Im tau > 0": (S.scenario("ARC_PAIR", {"arcs": arcs}).classify().verdict, Verdict.NOT_BS),
    }
    ok = all(got == want for got, want in table.values())
    assert record(9, ok, "; ".join(f"{k} -> {got.value}" for k, (got, _) in table.items()))
