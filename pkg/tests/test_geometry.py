import numpy as np
import pytest
import sympy as sp

from minsurf.errors import InvalidInputError
from minsurf.geometry import (ConformalFactorPoint, SffPoint, christoffels, curvature_from_psi,
                              gaussian_curvature, inverse_metric_component, metric_component,
                              psi_wave_residual, riem_lnln, wave_operator)


def _symbolic_geometry():
    """Christoffels and sectional curvature of e^psi (du dv + dv du) from scratch."""
    u, v = sp.symbols("u v")
    psi = sp.Function("psi")(u, v)
    x = [u, v]
    g = sp.Matrix([[0, sp.exp(psi)], [sp.exp(psi), 0]])
    gi = g.inv()
    gam = [[[sp.simplify(sum(gi[a, d] * (sp.diff(g[d, b], x[c]) + sp.diff(g[d, c], x[b])
                                         - sp.diff(g[b, c], x[d])) for d in range(2)) / 2)
             for c in range(2)] for b in range(2)] for a in range(2)]

    def riemann(a, b, c, d):
        # R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb} + Gamma^a_{ce} Gamma^e_{db} - ...
        return (sp.diff(gam[a][d][b], x[c]) - sp.diff(gam[a][c][b], x[d])
                + sum(gam[a][c][e] * gam[e][d][b] - gam[a][d][e] * gam[e][c][b]
                      for e in range(2)))

    # <R(d_u, d_v) d_v, d_u> = g_{ua} R^a_{v u v}
    r_uvvu = sum(g[0, a] * riemann(a, 1, 0, 1) for a in range(2))
    K = sp.simplify(r_uvvu / (g[0, 0] * g[1, 1] - g[0, 1] ** 2))
    # Riem(L, N, L, N) with L^a = g^{ab} d_b u, N^a = g^{ab} d_b v
    L = [gi[a, 0] for a in range(2)]
    N = [gi[a, 1] for a in range(2)]
    lower = lambda a, b, c, d: sum(g[a, e] * riemann(e, b, c, d) for e in range(2))
    R_lnln = sp.simplify(sum(lower(a, b, c, d) * L[a] * N[b] * L[c] * N[d]
                             for a in range(2) for b in range(2)
                             for c in range(2) for d in range(2)))
    return u, v, psi, gam, K, R_lnln


def test_christoffels_match_symbolic():
    u, v, psi, gam, _, _ = _symbolic_geometry()
    assert sp.simplify(gam[0][0][0] - sp.diff(psi, u)) == 0
    assert sp.simplify(gam[1][1][1] - sp.diff(psi, v)) == 0
    others = [gam[a][b][c] for a in range(2) for b in range(2) for c in range(2)
              if not (a == b == c)]
    assert all(sp.simplify(e) == 0 for e in others)
    assert christoffels(ConformalFactorPoint(0.1, 0.2, 0.3)) == (0.2, 0.3)


def test_curvature_sign_matches_symbolic():
    u, v, psi, _, K, _ = _symbolic_geometry()
    assert sp.simplify(K + sp.exp(-psi) * sp.diff(psi, u, v)) == 0
    # with psi_uv = exp(-psi) lambda nu this is -exp(-2 psi) lambda nu
    lam, nu, p = 0.3, -0.7, 0.2
    assert gaussian_curvature(p, SffPoint(lam, nu)) == pytest.approx(-np.exp(-2 * p) * lam * nu)


def test_metric_and_riemann_components():
    assert metric_component(0.0) == 1.0
    assert metric_component(1.0) * inverse_metric_component(1.0) == pytest.approx(1.0)
    u, v, psi, _, _, R_lnln = _symbolic_geometry()
    lam, nu = sp.symbols("lambda nu")
    # impose the conformal-factor equation psi_uv = exp(-psi) lambda nu
    expr = sp.simplify(R_lnln.subs(sp.diff(psi, u, v), sp.exp(-psi) * lam * nu))
    P = sp.Symbol("P")
    f = sp.lambdify((P, lam, nu), expr.subs(psi, P))
    for p, a, b in [(0.4, 2.0, 3.0), (-0.3, -1.5, 0.25)]:
        assert riem_lnln(p, SffPoint(a, b)) == pytest.approx(float(f(p, a, b)), rel=1e-12)


def test_wave_operator_manufactured_solution():
    # psi = sin(r) cos(2t): psi_rr - psi_tt = 3 sin(r) cos(2t)
    errs = []
    for n in (32, 64, 128):
        h = 1.0 / n
        t = np.arange(0, 1 + h / 2, h)
        r = np.arange(-1, 1 + h / 2, h)
        tt, rr = np.meshgrid(t, r, indexing="ij")
        out = wave_operator(np.sin(rr) * np.cos(2 * tt), h, h)
        exact = (3 * np.sin(rr) * np.cos(2 * tt))[1:-1, 1:-1]
        errs.append(np.max(np.abs(out - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_psi_wave_residual_vanishes_for_manufactured_source():
    h = 1 / 64
    t = np.arange(0, 0.5, h)
    r = np.arange(-1, 1, h)
    tt, rr = np.meshgrid(t, r, indexing="ij")
    psi = 0.1 * np.sin(rr) * np.cos(tt)
    # sin(r) cos(t) is a free wave, so the residual with zero source is truncation only
    res = psi_wave_residual(psi, np.zeros_like(psi), h, h)
    assert np.max(np.abs(res)) < 1e-5
    with pytest.raises(InvalidInputError):
        psi_wave_residual(psi, np.zeros((3, 3)), h, h)
    with pytest.raises(InvalidInputError):
        wave_operator(np.zeros(5), h, h)


def test_curvature_from_psi_stride():
    h = 1 / 64
    t = np.arange(0, 1, h)
    r = np.arange(-1, 1, h)
    tt, rr = np.meshgrid(t, r, indexing="ij")
    psi = 0.01 * (rr ** 2 - 3 * tt ** 2)   # psi_rr - psi_tt = 0.08
    k = curvature_from_psi(psi, h, h, stride=2)
    assert k.shape == (len(t) - 4, len(r) - 4)
    np.testing.assert_allclose(k, -np.exp(-psi[2:-2, 2:-2]) * 0.08, rtol=1e-9)
