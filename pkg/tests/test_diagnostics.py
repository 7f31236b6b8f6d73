import json

import numpy as np
import pytest

from minsurf.diagnostics import (LatticeField, bootstrap_monitor, check_nested, compare_solutions,
                                 convergence_report, flatness_report, observed_orders,
                                 product_l1, product_l1_2d, smallness_check)
from minsurf.errors import ConfigError, InvalidInputError
from minsurf.evolution import EvolveConfig, evolve
from minsurf.fields import GridSpec1D, sample
from minsurf.initial_data import GeometricData, transport_profiles
from minsurf.report import DiagnosticsReport, config_hash


def _data(cfg, lam="zero", nu="zero", psi0="zero", psi1="zero"):
    grid = GridSpec1D.from_interval(*cfg.data_interval(), cfg.h)
    return GeometricData(*(sample(d, grid) for d in (lam, nu, psi0, psi1)))


@pytest.mark.parametrize("lam, nu", [
    ("gaussian(amplitude=0.3, center=-1)", "gaussian(amplitude=-0.2, sigma=0.5, center=2)"),
    ("compact-bump(amplitude=0.5, support=-1:1)", "gaussian(amplitude=0.1, deriv=1)"),
    ("gaussian(amplitude=2, sigma=0.3, deriv=2)", "compact-bump(amplitude=-1, support=0:3)"),
])
def test_product_norm_factorizes(lam, nu):
    cfg = EvolveConfig(-4, 4, 1 / 32, 1.0)
    pair = transport_profiles(_data(cfg, lam, nu))
    direct = product_l1_2d(pair, block=37)
    # oracle: brute-force 2D trapezoid with no trimming or blocking
    a, b = np.abs(pair.Lambda.values), np.abs(pair.V.values)
    brute = np.trapezoid(np.trapezoid(a[:, None] * b[None, :], dx=pair.V.grid.spacing, axis=1),
                         dx=pair.Lambda.grid.spacing)
    assert direct == pytest.approx(brute, rel=1e-12)
    assert product_l1(pair) == pytest.approx(direct, rel=1e-12)


def test_smallness_check_background_and_margins():
    grid = GridSpec1D.from_interval(-5, 5, 1 / 16)
    gd = GeometricData.zeros(grid, psi_value=np.log(2.0))
    assert not smallness_check(gd, 0.01).passed
    rep = smallness_check(gd, 0.01, background=np.log(2.0))
    assert rep.passed
    assert rep.metrics["conformal_norm"] == pytest.approx(0.0, abs=1e-15)
    assert rep.metrics["curvature_margin"] == 0.01


def test_bootstrap_monitor_zero_and_large():
    cfg = EvolveConfig(-2, 2, 1 / 16, 1.0)
    ev = evolve(_data(cfg), cfg)
    rep = bootstrap_monitor(ev, 0.01, _data(cfg))
    assert rep.passed and rep.metrics["sup_psi"] == 0.0
    assert rep.metrics["first_violation_time"] == -1.0
    big = _data(cfg, lam="gaussian(amplitude=3, center=1)", nu="gaussian(amplitude=3, center=-1)")
    rep = bootstrap_monitor(evolve(big, cfg), 0.01, big)
    assert not rep.flags["bootstrap"].passed
    assert not rep.provenance["hypotheses_hold"]
    assert rep.metrics["first_violation_time"] > 0


def test_bootstrap_bound_dominates_small_data():
    cfg = EvolveConfig(-3, 3, 1 / 32, 3.0)
    gd = _data(cfg, lam="gaussian(amplitude=0.001, center=1)",
               nu="gaussian(amplitude=0.001, center=-1)", psi0="gaussian(amplitude=0.001)")
    rep = bootstrap_monitor(evolve(gd, cfg), 0.01, gd)
    assert rep.passed
    assert 0 < rep.metrics["chain_ratio"] <= 1
    assert rep.metrics["product_l1_tr"] == pytest.approx(2 * rep.metrics["product_l1_uv"])


def test_flatness_report_outside_rectangle():
    cfg = EvolveConfig(-3, 3, 1 / 64, 2.0)
    gd = _data(cfg, lam="compact-bump(amplitude=0.05, support=-1:1)",
               nu="compact-bump(amplitude=0.05, support=-1:1)")
    ev = evolve(gd, cfg)
    rep = flatness_report(ev, ev.pair, ((-0.5, 0.5), (-0.5, 0.5)))
    assert rep.metrics["source_outside"] == 0.0
    assert rep.metrics["curvature_exact_outside"] == 0.0
    assert rep.metrics["curvature_inside"] > 100 * rep.metrics["curvature_outside"]
    assert rep.passed
    with pytest.raises(InvalidInputError):
        flatness_report(ev, ev.pair, ((-0.2, 0.2), (-0.5, 0.5)))


def test_observed_orders_and_nesting():
    hs = [0.1, 0.05, 0.025]
    np.testing.assert_allclose(observed_orders(hs, [4e-2, 1e-2, 2.5e-3]), [2.0, 2.0])
    with pytest.raises(ConfigError):
        check_nested([0.1, 0.05])
    with pytest.raises(ConfigError):
        check_nested([0.1, 0.04, 0.02])


def test_convergence_report_paths():
    hs = [0.1, 0.05, 0.025]
    rep = convergence_report("q", hs, [1e-2, 2.5e-3, 6.25e-4], max_order=2.1)
    assert rep.passed and rep.metrics["order"] == pytest.approx(2.0)
    assert not convergence_report("q", hs, [1e-2, 5e-3, 2.5e-3]).passed
    exact = convergence_report("q", hs, [1e-15, 3e-15, 2e-15], exact_tol=1e-13)
    assert exact.passed and exact.metrics["order"] == np.inf
    assert json.loads(exact.to_json())["metrics"]["order"] == "inf"


def test_compare_solutions():
    t = np.linspace(0, 1, 11)
    x = np.linspace(-1, 1, 21)
    va = np.add.outer(t, x)
    a = LatticeField(t, x, va)
    tb, xb = np.linspace(0, 1, 21), np.linspace(-1, 1, 41)
    b = LatticeField(tb, xb, np.add.outer(tb, xb) + 0.5)
    out = compare_solutions(a, b)
    # bilinear interpolation reproduces a linear field exactly
    assert out["sup"] == pytest.approx(0.5) and out["nodes"] == va.size
    far = LatticeField(tb, xb + 10, np.zeros((21, 41)))
    with pytest.raises(InvalidInputError):
        compare_solutions(a, far)


def test_report_json_merge_and_hash():
    a = DiagnosticsReport("a")
    a.add("x", 1.5)
    a.check("small", "x", 2.0)
    b = DiagnosticsReport("b")
    b.add("y", 3.0)
    b.check("big", "y", 1.0, ">")
    a.merge(b)
    assert a.passed and set(a.flags) == {"small", "b.big"}
    assert a.to_json() == a.to_json()
    assert list(json.loads(a.to_json())["metrics"]) == ["b.y", "x"]
    assert config_hash({"p": 1, "q": [1, 2]}) == config_hash({"q": [1, 2], "p": 1})
    assert config_hash({"p": 1}) != config_hash({"p": 2})
    with pytest.raises(KeyError):
        a.check("nope", "missing", 1.0)
