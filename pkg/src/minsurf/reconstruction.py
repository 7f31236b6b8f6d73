"""Rebuild the immersed surface in R^{1,2} from null-gauge data.

Along the slice u = v = s (so r = 2s) the frame (X, X_u, X_v, n) obeys

    X_uu = psi_u X_u + lambda n,    X_vv = psi_v X_v + nu n,    X_uv = 0,
    n_u  = -exp(-psi) lambda X_v,   n_v  = -exp(-psi) nu X_u,

with psi_u = psi0' + psi1 and psi_v = psi0' - psi1 on the slice.  Off the
slice X_u depends on u alone and X_v on v alone, so

    X(u, v) = X(s0, s0) + int_{s0}^{u} X_u(s, s) ds + int_{s0}^{v} X_v(s, s) ds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .errors import InvalidSeedError, OutOfDomainError
from .evolution import Evolution
from .initial_data import GeometricData, GraphData, NullPair, graph_slice_frame
from .report import DiagnosticsReport

SEED_TOL = 1e-10


def mdot(a, b):
    """Minkowski inner product -a0 b0 + a1 b1 + a2 b2 over the last axis."""
    a = np.asarray(a)
    b = np.asarray(b)
    return -a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def mcross(a, b):
    """Vector orthogonal (in R^{1,2}) to a and b."""
    c = np.cross(a, b)
    c[..., 0] *= -1.0
    return c


def unit_normal(xu, xv):
    m = mcross(xu, xv)
    return m / np.sqrt(mdot(m, m))[..., None]


@dataclass(frozen=True)
class FrameSeed:
    X: np.ndarray
    Xu: np.ndarray
    Xv: np.ndarray
    n: np.ndarray


def canonical_seed(gd: GeometricData, index: int = 0) -> FrameSeed:
    """Flat frame at one slice node with <X_u, X_v> = exp(psi0)."""
    c = np.sqrt(np.exp(gd.psi0.values[index]) / 2.0)
    x = gd.grid.nodes[index]
    return FrameSeed(np.array([0.0, x, 0.0]), c * np.array([1.0, 1.0, 0.0]),
                     c * np.array([-1.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))


def graph_seed(g: GraphData, index: int = 0) -> FrameSeed:
    X, Xu, Xv, n = graph_slice_frame(g)
    return FrameSeed(X[index], Xu[index], Xv[index], n[index])


def seed_defects(seed: FrameSeed, psi: float) -> dict:
    e = np.exp(psi)
    return {
        "null_u": abs(mdot(seed.Xu, seed.Xu)) / e,
        "null_v": abs(mdot(seed.Xv, seed.Xv)) / e,
        "metric": abs(mdot(seed.Xu, seed.Xv) / e - 1.0),
        "normal": abs(mdot(seed.n, seed.n) - 1.0),
        "normal_u": abs(mdot(seed.n, seed.Xu)) / np.sqrt(e),
        "normal_v": abs(mdot(seed.n, seed.Xv)) / np.sqrt(e),
    }


@dataclass(frozen=True)
class SliceFrame:
    r: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)
    Xu: np.ndarray = field(repr=False)
    Xv: np.ndarray = field(repr=False)
    n: np.ndarray = field(repr=False)
    psi0: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    def defects(self) -> dict:
        e = np.exp(self.psi0)
        return {
            "null_u": float(np.max(np.abs(mdot(self.Xu, self.Xu)) / e)),
            "null_v": float(np.max(np.abs(mdot(self.Xv, self.Xv)) / e)),
            "metric": float(np.max(np.abs(mdot(self.Xu, self.Xv) / e - 1.0))),
            "normal": float(np.max(np.abs(mdot(self.n, self.n) - 1.0))),
            "normal_u": float(np.max(np.abs(mdot(self.n, self.Xu)) / np.sqrt(e))),
            "normal_v": float(np.max(np.abs(mdot(self.n, self.Xv)) / np.sqrt(e))),
        }


def integrate_slice_frame(gd: GeometricData, seed: FrameSeed | None = None) -> SliceFrame:
    """Classical RK4 along the slice from its leftmost node.

    Coefficients between nodes come from cubic splines of the sampled profiles.
    """
    if seed is None:
        seed = canonical_seed(gd)
    psi0 = gd.psi0.values
    bad = {k: v for k, v in seed_defects(seed, psi0[0]).items() if v > SEED_TOL}
    if bad:
        raise InvalidSeedError(f"seed frame violates the frame relations: {bad}")

    r = gd.grid.nodes
    h = gd.grid.spacing
    spl_psi = CubicSpline(r, psi0)
    spl_psi1 = CubicSpline(r, gd.psi1.values)
    spl_lam = CubicSpline(r, gd.lambda0.values)
    spl_nu = CubicSpline(r, gd.nu0.values)

    def coeffs(pts):
        dpsi = spl_psi(pts, 1)
        p1 = spl_psi1(pts)
        return np.stack([dpsi + p1, dpsi - p1, spl_lam(pts), spl_nu(pts),
                         np.exp(-spl_psi(pts))], axis=1)

    at_nodes = coeffs(r)
    at_mid = coeffs(r[:-1] + 0.5 * h)

    def rhs(c, y):
        psi_u, psi_v, lam, nu, ef = c
        X, Xu, Xv, n = y
        return 0.5 * np.array([
            Xu + Xv,
            psi_u * Xu + lam * n,
            psi_v * Xv + nu * n,
            -ef * (lam * Xv + nu * Xu),
        ])

    N = len(r)
    out = np.empty((N, 4, 3))
    y = np.array([seed.X, seed.Xu, seed.Xv, seed.n], dtype=float)
    out[0] = y
    for i in range(N - 1):
        k1 = rhs(at_nodes[i], y)
        k2 = rhs(at_mid[i], y + 0.5 * h * k1)
        k3 = rhs(at_mid[i], y + 0.5 * h * k2)
        k4 = rhs(at_nodes[i + 1], y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y
    return SliceFrame(r=r, X=out[:, 0], Xu=out[:, 1], Xv=out[:, 2], n=out[:, 3],
                      psi0=psi0.copy())


class _Primitive:
    """Piecewise-linear X_u(s) (or X_v) with its trapezoidal prefix integral."""

    def __init__(self, s, vec):
        self.s = s
        self.vec = vec
        self.prim = cumulative_trapezoid(vec, s, axis=0, initial=0.0)

    def _interp(self, q, table):
        flat = np.ravel(q)
        cols = [np.interp(flat, self.s, table[:, k]) for k in range(3)]
        return np.stack(cols, axis=-1).reshape(np.shape(q) + (3,))

    def value(self, q):
        return self._interp(q, self.vec)

    def integral(self, q):
        return self._interp(q, self.prim)


@dataclass
class Embedding:
    times: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)
    Xu: np.ndarray = field(repr=False)
    Xv: np.ndarray = field(repr=False)
    n: np.ndarray = field(repr=False)
    frame: SliceFrame = field(repr=False)

    def __post_init__(self):
        s = 0.5 * self.frame.r
        self._pu = _Primitive(s, self.frame.Xu)
        self._pv = _Primitive(s, self.frame.Xv)

    @property
    def s_range(self):
        return 0.5 * self.frame.r[0], 0.5 * self.frame.r[-1]

    def inside(self, u, v):
        lo, hi = self.s_range
        tol = 1e-9 * self.frame.h
        return (u >= lo - tol) & (u <= hi + tol) & (v >= lo - tol) & (v <= hi + tol)

    def position(self, u, v):
        """X(u, v); NaN outside the determinacy region of the slice."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        X = self.frame.X[0] + self._pu.integral(u) + self._pv.integral(v)
        return np.where(self.inside(u, v)[..., None], X, np.nan)

    def tangent_u(self, u):
        return self._pu.value(u)

    def tangent_v(self, v):
        return self._pv.value(v)

    def write_csv(self, path):
        tt, rr = np.meshgrid(self.times, self.r, indexing="ij")
        uu, vv = 0.5 * (rr + tt), 0.5 * (rr - tt)
        mask = np.all(np.isfinite(self.X), axis=-1)
        cols = [uu[mask], vv[mask], tt[mask], rr[mask]] + [self.X[..., k][mask] for k in range(3)]
        np.savetxt(path, np.column_stack(cols), delimiter=",", fmt="%.17g",
                   header="u,v,t,r,x0,x1,x2", comments="")


def assemble_embedding(frame: SliceFrame, times, r) -> Embedding:
    """Evaluate the immersion on the (t, r) lattice ``times x r``.

    Nodes outside the determinacy region of the slice are NaN; requesting a
    lattice that leaves the slice's extent altogether raises OutOfDomainError.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    r0, r1 = frame.r[0], frame.r[-1]
    tol = 1e-9 * frame.h
    if r.min() < r0 - tol or r.max() > r1 + tol:
        raise OutOfDomainError(f"r range [{r.min()}, {r.max()}] exceeds slice [{r0}, {r1}]")
    if times.min() < -tol or times.max() > 0.5 * (r1 - r0) + tol:
        raise OutOfDomainError(f"t range [{times.min()}, {times.max()}] exceeds the slice's "
                               f"domain of determinacy")
    stub = Embedding(times, r, None, None, None, None, frame)
    tt, rr = np.meshgrid(times, r, indexing="ij")
    u, v = 0.5 * (rr + tt), 0.5 * (rr - tt)
    X = stub.position(u, v)
    mask = np.isfinite(X[..., 0])[..., None]
    Xu = np.where(mask, stub.tangent_u(u), np.nan)
    Xv = np.where(mask, stub.tangent_v(v), np.nan)
    with np.errstate(invalid="ignore"):
        n = unit_normal(Xu, Xv)
    stub.X, stub.Xu, stub.Xv, stub.n = X, Xu, Xv, n
    return stub


def embedding_on_evolution(frame: SliceFrame, ev: Evolution, r_lo=None, r_hi=None,
                           t_lo=None, t_hi=None) -> Embedding:
    """Assemble the embedding on (a window of) an evolution's stored lattice."""
    cols = ev.region(ev.r[0] if r_lo is None else r_lo, ev.r[-1] if r_hi is None else r_hi)
    times = ev.times
    keep = np.ones(len(times), dtype=bool)
    if t_lo is not None:
        keep &= times >= t_lo - 1e-12
    if t_hi is not None:
        keep &= times <= t_hi + 1e-12
    return assemble_embedding(frame, times[keep], ev.r[cols])


def _hermite(p0, p1, m0, m1, w, dt):
    """Cubic Hermite interpolant on [0, 1] with end slopes scaled by dt, and its w-derivative."""
    w2, w3 = w * w, w * w * w
    h00, h10, h01, h11 = 2 * w3 - 3 * w2 + 1, w3 - 2 * w2 + w, -2 * w3 + 3 * w2, w3 - w2
    d00, d10, d01, d11 = 6 * w2 - 6 * w, 3 * w2 - 4 * w + 1, -6 * w2 + 6 * w, 3 * w2 - 2 * w
    val = h00 * p0 + h10 * dt * m0 + h01 * p1 + h11 * dt * m1
    der = d00 * p0 + d10 * dt * m0 + d01 * p1 + d11 * dt * m1
    return val, der


def regraph(e: Embedding, query_times, query_x, newton_iters: int = 4):
    """Height phi(T, x) of the embedded surface over the ambient (T, x) plane.

    Along every lattice column (fixed r) the crossing of the ambient time T
    is found on the cubic Hermite interpolant in t, using the node
    derivatives d_t X = (X_u - X_v) / 2; the resulting points (x, phi) at
    time T are joined by a cubic spline and evaluated at ``query_x``.
    Returns ``(phi, mask)``; masked entries could not be resolved as a graph.
    """
    query_times = np.atleast_1d(np.asarray(query_times, dtype=float))
    query_x = np.asarray(query_x, dtype=float)
    phi = np.full((len(query_times), len(query_x)), np.nan)
    T0 = e.X[..., 0]
    Xt = 0.5 * (e.Xu - e.Xv)
    for j, T in enumerate(query_times):
        with np.errstate(invalid="ignore"):
            above = T0 >= T
        k = np.argmax(above, axis=0)
        cols = np.arange(T0.shape[1])
        ok = above.any(axis=0) & (k > 0)
        km = np.maximum(k - 1, 0)
        a, b = T0[km, cols], T0[k, cols]
        with np.errstate(invalid="ignore"):
            ok &= np.isfinite(a) & np.isfinite(b) & (a < T)
        if ok.sum() < 4:
            continue
        dt = np.where(ok, e.times[k] - e.times[km], 1.0)
        p0, p1 = e.X[km, cols], e.X[k, cols]
        m0, m1 = Xt[km, cols], Xt[k, cols]
        w = np.where(ok, (T - a) / np.where(ok, b - a, 1.0), 0.0)
        with np.errstate(invalid="ignore"):
            for _ in range(newton_iters):
                val, der = _hermite(p0[:, 0], p1[:, 0], m0[:, 0], m1[:, 0], w, dt)
                w = np.where(ok, np.clip(w - (val - T) / np.where(ok, der, 1.0), 0.0, 1.0), 0.0)
            x_at, _ = _hermite(p0[:, 1], p1[:, 1], m0[:, 1], m1[:, 1], w, dt)
            z_at, _ = _hermite(p0[:, 2], p1[:, 2], m0[:, 2], m1[:, 2], w, dt)
        # longest contiguous run of resolved columns
        idx = np.nonzero(ok)[0]
        breaks = np.nonzero(np.diff(idx) > 1)[0]
        starts = np.concatenate([[0], breaks + 1])
        ends = np.concatenate([breaks + 1, [len(idx)]])
        best = int(np.argmax(ends - starts))
        run = idx[starts[best]:ends[best]]
        xs, zs = x_at[run], z_at[run]
        if len(run) < 4 or np.any(np.diff(xs) <= 0):
            continue
        inside = (query_x >= xs[0]) & (query_x <= xs[-1])
        phi[j, inside] = CubicSpline(xs, zs)(query_x[inside])
    return phi, np.isfinite(phi)


def embedding_checks(e: Embedding, ev: Evolution, pair: NullPair) -> DiagnosticsReport:
    """Defects of the reconstructed surface against the evolved conformal factor.

    ``e`` must be assembled on nodes of ``ev`` (same r spacing, stored times).
    """
    rep = DiagnosticsReport("embedding_checks")
    rep.provenance.update(h=ev.h, scheme=ev.config.scheme, levels=int(len(e.times)))
    rows = np.array([int(np.argmin(np.abs(ev.times - t))) for t in e.times])
    c0 = int(np.argmin(np.abs(ev.r - e.r[0])))
    psi = ev.psi[rows][:, c0:c0 + len(e.r)]
    tt, rr = np.meshgrid(e.times, e.r, indexing="ij")
    u, v = 0.5 * (rr + tt), 0.5 * (rr - tt)
    good = np.isfinite(psi) & np.isfinite(e.X[..., 0])
    ep = np.exp(psi)

    def sup(a):
        a = np.abs(a)[good & np.isfinite(a)]
        return float(a.max()) if a.size else 0.0

    rep.add("null_u", sup(mdot(e.Xu, e.Xu) / ep))
    rep.add("null_v", sup(mdot(e.Xv, e.Xv) / ep))
    rep.add("metric", sup(mdot(e.Xu, e.Xv) / ep - 1.0))
    m = mcross(e.Xu, e.Xv)
    rep.add("normal", sup(mdot(m, m) / ep ** 2 - 1.0))

    d = ev.h
    X = e.position
    with np.errstate(invalid="ignore"):
        x_uu = (X(u + d, v) - 2.0 * X(u, v) + X(u - d, v)) / d ** 2
        x_vv = (X(u, v + d) - 2.0 * X(u, v) + X(u, v - d)) / d ** 2
        q = 0.5 * d
        x_uv = (X(u + q, v + q) - X(u + q, v - q) - X(u - q, v + q) + X(u - q, v - q)) / d ** 2
        x_u = (X(u + q, v) - X(u - q, v)) / d
        x_v = (X(u, v + q) - X(u, v - q)) / d
    n = e.n
    rep.add("lambda", sup(mdot(x_uu, n) - pair.Lambda(u)))
    rep.add("nu", sup(mdot(x_vv, n) - pair.V(v)))
    rep.add("trace", sup(2.0 * mdot(x_uv, n) / ep))
    rep.add("pullback_metric", sup(mdot(x_u, x_v) / ep - 1.0))
    # rounding level of the second differences above
    scale = float(np.nanmax(np.abs(e.X))) if np.isfinite(e.X).any() else 0.0
    rep.add("rounding_floor", np.finfo(float).eps * scale / (d * d * float(ep[good].min())))
    return rep
