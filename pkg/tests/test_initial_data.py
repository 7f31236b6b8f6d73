import numpy as np
import pytest
import sympy as sp

from minsurf.errors import InvalidInputError, NotTimelikeError
from minsurf.fields import GridSpec1D, SampledFunction1D, derivative, sample
from minsurf.initial_data import (GeometricData, GraphData, graph_slice_frame, graph_to_geometric,
                                  transport_profiles, validate_timelike)

A0, S0, A1, S1, C1 = 0.3, 1.0, 0.2, 0.7, 0.4


def _symbolic_oracle():
    """lambda0, nu0, psi0, psi1 from the induced metric of the graph, built symbolically.

    d_t is the G-orthogonal complement of d_x with G(d_t, d_t) = -G(d_x, d_x),
    future pointing; psi1 follows from d_t X_x = d_x X_t (coordinate fields commute).
    """
    x = sp.Symbol("x", real=True)
    f0 = A0 * sp.exp(-x ** 2 / (2 * S0 ** 2))
    f1 = A1 * sp.exp(-(x - C1) ** 2 / (2 * S1 ** 2))
    px, pt = sp.diff(f0, x), f1
    pxx, ptx = sp.diff(f0, x, 2), sp.diff(f1, x)
    ptt = sp.Symbol("ptt")
    pde = (1 + px ** 2) * ptt - 2 * pt * px * ptx - (1 - pt ** 2) * pxx
    ptt = sp.solve(pde, ptt)[0]
    eta = sp.diag(-1, 1, 1)
    XT = sp.Matrix([1, 0, pt])
    Xx = sp.Matrix([0, 1, px])
    ip = lambda a, b: (a.T * eta * b)[0]
    G = sp.Matrix([[ip(XT, XT), ip(XT, Xx)], [ip(Xx, XT), ip(Xx, Xx)]])
    # d_t = alpha d_T + beta d_x with G(d_t, d_x) = 0
    beta_over_alpha = -G[0, 1] / G[1, 1]
    gtt_unit = G[0, 0] + 2 * beta_over_alpha * G[0, 1] + beta_over_alpha ** 2 * G[1, 1]
    alpha = sp.sqrt(G[1, 1] / -gtt_unit)
    beta = alpha * beta_over_alpha
    Xt = alpha * XT + beta * Xx
    # unit normal: orthogonal to XT, Xx, spacelike
    n = sp.Matrix([pt, -px, 1]) / sp.sqrt(1 - pt ** 2 + px ** 2)
    XTT = sp.Matrix([0, 0, ptt])
    XTx = sp.Matrix([0, 0, ptx])
    Xxx = sp.Matrix([0, 0, pxx])

    def k(a, b):
        # a, b are (T, x) components of tangent vectors
        return (a[0] * b[0] * ip(XTT, n) + (a[0] * b[1] + a[1] * b[0]) * ip(XTx, n)
                + a[1] * b[1] * ip(Xxx, n))

    du = (alpha, 1 + beta)
    dv = (-alpha, 1 - beta)
    psi = sp.log(2 * G[1, 1])
    psi1 = 4 * ip(Xx, sp.diff(Xt, x)) / sp.exp(psi)
    funcs = [sp.lambdify(x, e, "numpy") for e in (k(du, du), k(dv, dv), psi, psi1)]
    return funcs


@pytest.fixture(scope="module")
def oracle():
    return _symbolic_oracle()


def _graph(h, exact_jets=False):
    grid = GridSpec1D.from_interval(-8, 8, h)
    d0 = f"gaussian(amplitude={A0}, sigma={S0})"
    d1 = f"gaussian(amplitude={A1}, sigma={S1}, center={C1})"
    jets = {}
    if exact_jets:
        jets = dict(
            phi0_x=sample(f"gaussian(amplitude={A0}, sigma={S0}, deriv=1)", grid),
            phi0_xx=sample(f"gaussian(amplitude={A0}, sigma={S0}, deriv=2)", grid),
            phi1_x=sample(f"gaussian(amplitude={A1}, sigma={S1}, center={C1}, deriv=1)", grid))
    return GraphData(sample(d0, grid), sample(d1, grid), **jets)


def test_conversion_matches_symbolic_oracle_with_exact_jets(oracle):
    g = _graph(1 / 32, exact_jets=True)
    gd = graph_to_geometric(g)
    x = g.grid.nodes
    for got, f in zip((gd.lambda0, gd.nu0, gd.psi0, gd.psi1), oracle):
        np.testing.assert_allclose(got.values, f(x), atol=1e-13)


def test_conversion_converges_second_order_with_finite_differences(oracle):
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        g = _graph(h)
        gd = graph_to_geometric(g)
        x = g.grid.nodes
        inner = np.abs(x) < 7
        errs.append(max(np.max(np.abs(got.values - f(x))[inner])
                        for got, f in zip((gd.lambda0, gd.nu0, gd.psi0, gd.psi1), oracle)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9), (errs, orders)


def test_flat_plane():
    grid = GridSpec1D.from_interval(-2, 2, 0.1)
    z = SampledFunction1D(grid, np.zeros(grid.count))
    gd = graph_to_geometric(GraphData(z, z))
    np.testing.assert_array_equal(gd.lambda0.values, 0.0)
    np.testing.assert_array_equal(gd.nu0.values, 0.0)
    np.testing.assert_allclose(gd.psi0.values, np.log(2.0), rtol=0, atol=1e-15)
    np.testing.assert_array_equal(gd.psi1.values, 0.0)


@pytest.mark.parametrize("direction", [+1, -1])
def test_travelling_wave_has_one_null_curvature(direction):
    # f(x - t) has phi1 = -D phi0 (lambda = 0); f(x + t) has phi1 = +D phi0 (nu = 0)
    grid = GridSpec1D.from_interval(-8, 8, 1 / 16)
    f = sample("gaussian(amplitude=0.4, sigma=1)", grid)
    g = GraphData(f, f.with_values(-direction * derivative(f).values))
    gd = graph_to_geometric(g)
    quiet, loud = (gd.lambda0, gd.nu0) if direction > 0 else (gd.nu0, gd.lambda0)
    assert np.max(np.abs(quiet.values)) < 1e-13
    assert np.max(np.abs(loud.values)) > 0.1
    assert validate_timelike(g) == pytest.approx(1.0, abs=1e-14)


def test_reflection_swaps_lambda_and_nu():
    grid = GridSpec1D.from_interval(-6, 6, 1 / 16)
    x = grid.nodes
    p0 = 0.2 * np.exp(-(x - 0.5) ** 2)
    p1 = 0.1 * np.exp(-(x + 0.3) ** 2)
    a = graph_to_geometric(GraphData(SampledFunction1D(grid, p0), SampledFunction1D(grid, p1)))
    b = graph_to_geometric(GraphData(SampledFunction1D(grid, p0[::-1]),
                                     SampledFunction1D(grid, p1[::-1])))
    np.testing.assert_allclose(a.lambda0.values, b.nu0.values[::-1], atol=1e-13)
    np.testing.assert_allclose(a.psi0.values, b.psi0.values[::-1], atol=1e-13)
    # psi1 = d_t psi is unchanged by x -> -x
    np.testing.assert_allclose(a.psi1.values, b.psi1.values[::-1], atol=1e-13)


def test_not_timelike_reports_location():
    grid = GridSpec1D.from_interval(-2, 2, 0.25)
    x = grid.nodes
    g = GraphData(SampledFunction1D(grid, np.zeros_like(x)),
                  SampledFunction1D(grid, 2.0 * np.exp(-x ** 2)))
    with pytest.raises(NotTimelikeError) as info:
        graph_to_geometric(g)
    assert info.value.index == int(np.argmin(np.abs(x)))
    assert info.value.value == pytest.approx(-3.0)


def test_grid_mismatch_and_too_few_nodes():
    a = SampledFunction1D(GridSpec1D(0, 0.1, 10), np.zeros(10))
    b = SampledFunction1D(GridSpec1D(0, 0.2, 10), np.zeros(10))
    with pytest.raises(InvalidInputError):
        GraphData(a, b)
    with pytest.raises(InvalidInputError):
        GeometricData(a, a, a, b)
    tiny = SampledFunction1D(GridSpec1D(0, 0.1, 4), np.zeros(4))
    with pytest.raises(InvalidInputError):
        graph_to_geometric(GraphData(tiny, tiny))


def test_slice_frame_relations():
    g = _graph(1 / 32)
    gd = graph_to_geometric(g)
    X, Xu, Xv, n = graph_slice_frame(g)
    ip = lambda a, b: -a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]
    ep = np.exp(gd.psi0.values)
    np.testing.assert_allclose(ip(Xu, Xu), 0.0, atol=1e-13)
    np.testing.assert_allclose(ip(Xv, Xv), 0.0, atol=1e-13)
    np.testing.assert_allclose(ip(Xu, Xv) / ep, 1.0, atol=1e-13)
    np.testing.assert_allclose(ip(n, n), 1.0, atol=1e-13)
    np.testing.assert_allclose(ip(n, Xu), 0.0, atol=1e-13)
    np.testing.assert_array_equal(X[:, 1], g.grid.nodes)


def test_transport_profiles_half_grid():
    grid = GridSpec1D(-4.0, 0.5, 17)
    vals = np.arange(17.0)
    gd = GeometricData(SampledFunction1D(grid, vals), SampledFunction1D(grid, -vals),
                       SampledFunction1D(grid, 0 * vals), SampledFunction1D(grid, 0 * vals))
    pair = transport_profiles(gd)
    assert pair.Lambda.grid.origin == -2.0 and pair.Lambda.grid.spacing == 0.25
    # lambda(t, r) = lambda0(r + t)
    assert pair.lam(1.0, 0.5) == pytest.approx(np.interp(1.5, grid.nodes, vals))
    assert pair.nu(1.0, 0.5) == pytest.approx(-np.interp(-0.5, grid.nodes, vals))
