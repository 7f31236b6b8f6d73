"""Evolution of the conformal factor: psi_tt = psi_rr - exp(-psi) lambda nu.

lambda and nu are never advected numerically; they are read off the
transported profiles, lambda(t, r) = lambda0(r + t), nu(t, r) = nu0(r - t).

No boundary condition is imposed.  Each step loses one node at either end of
the lattice, so the trusted nodes of level n are the indices [n, N-1-n]; with
cfl = 1 this is exactly the domain of determinacy of the data interval.
Untrusted nodes are stored as NaN.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import BlowUpError, ConfigError, InvalidInputError, PicardError
from .initial_data import GeometricData, NullPair, transport_profiles

log = logging.getLogger(__name__)

SCHEMES = ("leapfrog", "characteristic")


@dataclass(frozen=True)
class EvolveConfig:
    r_min: float
    r_max: float
    h: float
    t_final: float
    cfl: float = 1.0
    scheme: str = "leapfrog"
    picard_tol: float = 1e-12
    picard_max_iters: int = 50
    snapshot_every: int = 1
    blowup: float = 50.0

    def __post_init__(self):
        if not self.r_min < self.r_max:
            raise ConfigError("r_min must be below r_max")
        if not self.h > 0:
            raise ConfigError("h must be positive")
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        if not 0 < self.cfl <= 1.0:
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if not self.picard_tol > 0 or self.picard_max_iters < 1:
            raise ConfigError("picard_tol must be positive and picard_max_iters >= 1")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be >= 1")

    @property
    def dt(self) -> float:
        return self.h if self.scheme == "characteristic" else self.cfl * self.h

    @property
    def steps(self) -> int:
        return int(np.ceil(self.t_final / self.dt - 1e-9))

    @property
    def padding(self) -> float:
        """Distance the data grid must extend beyond [r_min, r_max]."""
        return self.steps * self.h

    def data_interval(self):
        return self.r_min - self.padding, self.r_max + self.padding


@dataclass(frozen=True)
class Evolution:
    r: np.ndarray = field(repr=False)
    levels: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    dt: float
    pair: NullPair = field(repr=False)
    sup_abs: np.ndarray = field(repr=False)
    config: EvolveConfig
    psi_min: np.ndarray = field(default=None, repr=False)
    psi_max: np.ndarray = field(default=None, repr=False)

    def sup_deviation(self, background: float = 0.0) -> np.ndarray:
        """Per-level sup |psi - background| over trusted nodes, for every level."""
        if background == 0.0 or self.psi_min is None:
            return np.asarray(self.sup_abs)
        return np.maximum(self.psi_max - background, background - self.psi_min)

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def times(self) -> np.ndarray:
        return self.levels * self.dt

    def trusted_bounds(self, level: int):
        """Inclusive index range of trusted nodes at a time level."""
        return level, len(self.r) - 1 - level

    def trusted_mask(self) -> np.ndarray:
        return np.isfinite(self.psi)

    def lam_field(self) -> np.ndarray:
        return self.pair.lam(self.times[:, None], self.r[None, :])

    def nu_field(self) -> np.ndarray:
        return self.pair.nu(self.times[:, None], self.r[None, :])

    def source_field(self) -> np.ndarray:
        return self.lam_field() * self.nu_field()

    def level_index(self, level: int) -> int:
        hit = np.nonzero(self.levels == level)[0]
        if hit.size == 0:
            raise InvalidInputError(f"level {level} was not stored")
        return int(hit[0])

    def region(self, r_lo: float, r_hi: float):
        """Column slice of the nodes with r_lo <= r <= r_hi."""
        tol = 1e-9 * self.h
        idx = np.nonzero((self.r >= r_lo - tol) & (self.r <= r_hi + tol))[0]
        return slice(int(idx[0]), int(idx[-1]) + 1)

    def write_csv(self, path, stride: int = 1, level_every: int = 1, r_window=None):
        """Trusted nodes as rows of (t, r, psi, lambda, nu, source).

        ``stride`` thins the columns, ``level_every`` keeps stored levels that
        are multiples of it, ``r_window = (lo, hi)`` restricts r.
        """
        cols = self.region(*r_window) if r_window is not None else slice(None)
        rows_keep = (self.levels % level_every == 0) | (self.levels == self.levels[-1])
        times, r = self.times[rows_keep], self.r[cols][::stride]
        psi = self.psi[rows_keep][:, cols][:, ::stride]
        lam = self.pair.lam(times[:, None], r[None, :])
        nu = self.pair.nu(times[:, None], r[None, :])
        tt = np.broadcast_to(times[:, None], psi.shape)
        rr = np.broadcast_to(r[None, :], psi.shape)
        mask = np.isfinite(psi)
        rows = np.column_stack([a[mask] for a in (tt, rr, psi, lam, nu, lam * nu)])
        np.savetxt(path, rows, delimiter=",", fmt="%.17g",
                   header="t,r,psi,lambda,nu,source", comments="")


def _check_inputs(gd: GeometricData, cfg: EvolveConfig):
    grid = gd.grid
    if not np.isclose(grid.spacing, cfg.h, rtol=1e-9, atol=0):
        raise InvalidInputError(f"data spacing {grid.spacing} differs from h={cfg.h}")
    lo, hi = cfg.data_interval()
    if not grid.contains(lo, hi, slack=1e-6):
        raise InvalidInputError(
            f"data must cover [{lo:.6g}, {hi:.6g}] for t_final={cfg.t_final}; "
            f"grid spans [{grid.origin:.6g}, {grid.end:.6g}]")


def _source_fn(gd: GeometricData, dt: float):
    """Return S(n) = lambda0(r + t_n) * nu0(r - t_n) on the grid for level n."""
    lam0, nu0 = gd.lambda0.values, gd.nu0.values
    x = gd.grid.nodes
    h = gd.grid.spacing
    N = len(x)
    if np.isclose(dt, h, rtol=1e-12, atol=0):
        lam_pad = np.concatenate([lam0, np.zeros(N)])
        nu_pad = np.concatenate([np.zeros(N), nu0])

        def source(n):
            if n >= N:
                return np.zeros(N)
            return lam_pad[n:n + N] * nu_pad[N - n:2 * N - n]
        return source

    pair = transport_profiles(gd)

    def source(n):
        return pair.source(n * dt, x)
    return source


def _source_at(gd: GeometricData, t: float, r):
    pair = transport_profiles(gd)
    return pair.source(t, r)


class _Recorder:
    def __init__(self, cfg: EvolveConfig, N: int):
        self.cfg = cfg
        self.levels = []
        self.rows = []
        self.sup = np.empty(cfg.steps + 1)
        self.lo = np.empty(cfg.steps + 1)
        self.hi = np.empty(cfg.steps + 1)

    def push(self, n, row):
        finite = row[np.isfinite(row)]
        peak = float(np.max(np.abs(finite))) if finite.size else 0.0
        self.sup[n] = peak
        self.lo[n] = float(finite.min()) if finite.size else 0.0
        self.hi[n] = float(finite.max()) if finite.size else 0.0
        if peak > self.cfg.blowup or not finite.size:
            i = int(np.nanargmax(np.abs(row))) if finite.size else -1
            raise BlowUpError(
                f"blow-up suspected: |psi| = {peak:.4g} > {self.cfg.blowup} "
                f"at level {n}, node {i}", level=n, index=i)
        if n % self.cfg.snapshot_every == 0 or n == self.cfg.steps:
            self.levels.append(n)
            self.rows.append(row.copy())


def _finish(gd, cfg, rec: _Recorder, dt) -> Evolution:
    return Evolution(
        r=gd.grid.nodes, levels=np.asarray(rec.levels), psi=np.vstack(rec.rows),
        dt=dt, pair=transport_profiles(gd), sup_abs=rec.sup, config=cfg,
        psi_min=rec.lo, psi_max=rec.hi)


def evolve_leapfrog(gd: GeometricData, cfg: EvolveConfig) -> Evolution:
    if cfg.scheme != "leapfrog":
        cfg = EvolveConfig(**{**cfg.__dict__, "scheme": "leapfrog"})
    _check_inputs(gd, cfg)
    h, dt = cfg.h, cfg.dt
    c2 = (dt / h) ** 2
    N = gd.grid.count
    source = _source_fn(gd, dt)
    psi0, psi1 = gd.psi0.values, gd.psi1.values
    rec = _Recorder(cfg, N)

    prev = psi0.copy()
    rec.push(0, prev)
    lap = np.full(N, np.nan)
    lap[1:-1] = (psi0[2:] - 2.0 * psi0[1:-1] + psi0[:-2]) / h ** 2
    cur = psi0 + dt * psi1 + 0.5 * dt ** 2 * (lap - np.exp(-psi0) * source(0))
    rec.push(1, cur)

    for n in range(1, cfg.steps):
        nxt = np.full(N, np.nan)
        c = cur[1:-1]
        nxt[1:-1] = (2.0 * c - prev[1:-1] + c2 * (cur[2:] - 2.0 * c + cur[:-2])
                     - dt ** 2 * np.exp(-c) * source(n)[1:-1])
        prev, cur = cur, nxt
        rec.push(n + 1, cur)
    return _finish(gd, cfg, rec, dt)


def evolve_characteristic(gd: GeometricData, cfg: EvolveConfig) -> Evolution:
    """March characteristic diamonds of half-diagonal h (so dt = h).

    For the diamond with top N, bottom S and side corners E, W the integral
    form of psi_uv = F over the (u, v) rectangle gives
    ``psi_N = psi_E + psi_W - psi_S - h^2 F(center)``; F depends on psi at the
    center, estimated by the corner average, so each level is a fixed point
    solved by Picard iteration.
    """
    if cfg.scheme != "characteristic":
        cfg = EvolveConfig(**{**cfg.__dict__, "scheme": "characteristic"})
    _check_inputs(gd, cfg)
    h = cfg.h
    N = gd.grid.count
    x = gd.grid.nodes
    source = _source_fn(gd, h)
    psi0, psi1 = gd.psi0.values, gd.psi1.values
    rec = _Recorder(cfg, N)

    prev = psi0.copy()
    rec.push(0, prev)
    # first level: d'Alembert on [r-h, r+h] plus the Duhamel integral over the
    # triangle of area h^2, evaluated at its centroid (h/3, r)
    cur = np.full(N, np.nan)
    centroid_psi = psi0[1:-1] + psi1[1:-1] * h / 3.0
    s_centroid = _source_at(gd, h / 3.0, x[1:-1])
    cur[1:-1] = (0.5 * (psi0[2:] + psi0[:-2])
                 + h / 6.0 * (psi1[:-2] + 4.0 * psi1[1:-1] + psi1[2:])
                 - 0.5 * h ** 2 * np.exp(-centroid_psi) * s_centroid)
    rec.push(1, cur)

    for n in range(1, cfg.steps):
        east, west, south = cur[2:], cur[:-2], prev[1:-1]
        s_c = source(n)[1:-1]
        base = east + west - south
        top = base - h ** 2 * np.exp(-cur[1:-1]) * s_c
        for it in range(cfg.picard_max_iters):
            center = 0.25 * (top + south + east + west)
            new = base - h ** 2 * np.exp(-center) * s_c
            delta = np.abs(new - top)
            top = new
            worst = np.nanmax(delta) if np.isfinite(delta).any() else 0.0
            if worst <= cfg.picard_tol:
                break
        else:
            i = int(np.nanargmax(delta)) + 1
            raise PicardError(
                f"Picard iteration did not converge at level {n + 1}, node {i}: "
                f"residual {worst:.3g}", level=n + 1, index=i, residual=float(worst))
        nxt = np.full(N, np.nan)
        nxt[1:-1] = top
        prev, cur = cur, nxt
        rec.push(n + 1, cur)
    return _finish(gd, cfg, rec, h)


def evolve(gd: GeometricData, cfg: EvolveConfig) -> Evolution:
    if cfg.scheme == "characteristic":
        return evolve_characteristic(gd, cfg)
    return evolve_leapfrog(gd, cfg)


def transported_product_vanishes(gd: GeometricData) -> bool:
    """True when lambda0(r + t) nu0(r - t) is zero for every t >= 0.

    That holds when either profile vanishes or the support of lambda0 lies
    strictly left of the support of nu0 (the two then move apart).
    """
    lam_nz = np.nonzero(gd.lambda0.values)[0]
    nu_nz = np.nonzero(gd.nu0.values)[0]
    if lam_nz.size == 0 or nu_nz.size == 0:
        return True
    return lam_nz[-1] + 2 <= nu_nz[0]


def free_wave_closed_form(gd: GeometricData):
    """d'Alembert evaluator ``(t, r) -> psi`` for data with a vanishing source."""
    if not transported_product_vanishes(gd):
        raise InvalidInputError("free_wave_closed_form needs lambda0(r+t) nu0(r-t) == 0")
    x = gd.grid.nodes
    psi0 = gd.psi0.values
    prim = cumulative_trapezoid(gd.psi1.values, x, initial=0.0)
    lo, hi = x[0], x[-1]

    def evaluate(t, r):
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        a, b = r + t, r - t
        val = 0.5 * (np.interp(a, x, psi0) + np.interp(b, x, psi0)) \
            + 0.5 * (np.interp(a, x, prim) - np.interp(b, x, prim))
        tol = 1e-9 * (hi - lo)
        outside = (a > hi + tol) | (b < lo - tol) | (t < 0)
        return np.where(outside, np.nan, val)

    return evaluate
