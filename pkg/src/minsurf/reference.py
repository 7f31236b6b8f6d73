"""Direct finite-difference solver for graphical timelike minimal surfaces.

Steps the non-divergence form

    (1 + phi_x^2) phi_tt - 2 phi_t phi_x phi_tx - (1 - phi_t^2) phi_xx = 0

with a three-level leapfrog update.  phi_t and phi_tx are centered in time,
which makes each level a small fixed-point problem; it is solved by Picard
iteration with the config's picard_tol / picard_max_iters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidInputError, NotTimelikeError, PicardError
from .evolution import EvolveConfig
from .fields import derivative
from .initial_data import GraphData, validate_timelike

RADICAND_FLOOR = 1e-6


def quasilinear_form(phi_t, phi_x, phi_tt, phi_tx, phi_xx):
    rad = 1.0 - np.asarray(phi_t) ** 2 + np.asarray(phi_x) ** 2
    if np.any(rad <= 0):
        raise NotTimelikeError("radicand is not positive")
    return ((1.0 + phi_x ** 2) * phi_tt - 2.0 * phi_t * phi_x * phi_tx
            - (1.0 - phi_t ** 2) * phi_xx)


def _phi_tt(phi_t, phi_x, phi_tx, phi_xx):
    return (2.0 * phi_t * phi_x * phi_tx + (1.0 - phi_t ** 2) * phi_xx) / (1.0 + phi_x ** 2)


def null_speeds(phi_t, phi_x):
    """dx/dT of the two null directions on the graph, (left, right)."""
    rad = 1.0 - phi_t ** 2 + phi_x ** 2
    w = 1.0 + phi_x ** 2
    sd = np.sqrt(np.maximum(rad, 0.0))
    return (-phi_t * phi_x - sd) / w, (-phi_t * phi_x + sd) / w


@dataclass(frozen=True)
class GraphEvolution:
    x: np.ndarray = field(repr=False)
    levels: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    phi_t: np.ndarray = field(repr=False)
    dt: float
    config: EvolveConfig

    @property
    def times(self) -> np.ndarray:
        return self.levels * self.dt

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def radicand(self) -> np.ndarray:
        phi_x = np.gradient(self.phi, self.h, axis=1)
        return 1.0 - self.phi_t ** 2 + phi_x ** 2

    def at_time(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[k], t, rtol=0, atol=1e-9 * max(1.0, t)):
            raise InvalidInputError(f"no stored level at t={t}")
        return self.phi[k]

    def write_csv(self, path):
        tt = np.broadcast_to(self.times[:, None], self.phi.shape)
        xx = np.broadcast_to(self.x[None, :], self.phi.shape)
        mask = np.isfinite(self.phi) & np.isfinite(self.phi_t)
        rad = self.radicand()
        rows = np.column_stack([a[mask] for a in (tt, xx, self.phi, self.phi_t, rad)])
        np.savetxt(path, rows, delimiter=",", fmt="%.17g",
                   header="t,x,phi,phi_t,radicand", comments="")


def _dx(a, h):
    out = np.full_like(a, np.nan)
    out[1:-1] = (a[2:] - a[:-2]) / (2.0 * h)
    return out


def _dxx(a, h):
    out = np.full_like(a, np.nan)
    out[1:-1] = (a[2:] - 2.0 * a[1:-1] + a[:-2]) / h ** 2
    return out


def _check_radicand(phi_t, phi_x, level, x):
    rad = 1.0 - phi_t ** 2 + phi_x ** 2
    if np.nanmin(rad) < RADICAND_FLOOR:
        i = int(np.nanargmin(rad))
        raise NotTimelikeError(
            f"timelike breakdown at level {level}, x={x[i]:.6g}: radicand {rad[i]:.3g}",
            index=i, value=float(rad[i]))


def evolve_graph(g: GraphData, cfg: EvolveConfig) -> GraphEvolution:
    validate_timelike(g)
    grid = g.grid
    if not np.isclose(grid.spacing, cfg.h, rtol=1e-9, atol=0):
        raise InvalidInputError(f"data spacing {grid.spacing} differs from h={cfg.h}")
    h = cfg.h
    dt = cfg.cfl * h
    steps = int(np.ceil(cfg.t_final / dt - 1e-9))
    lo, hi = cfg.r_min - steps * h, cfg.r_max + steps * h
    if not grid.contains(lo, hi, slack=1e-6):
        raise InvalidInputError(f"graph data must cover [{lo:.6g}, {hi:.6g}]")
    x = grid.nodes
    N = len(x)

    phi0, phi1 = g.phi0.values, g.phi1.values
    px0 = derivative(g.phi0).values
    speed = np.max(np.abs(null_speeds(phi1, px0)))
    if speed * dt > h * (1.0 + 1e-12):
        raise ConfigError(f"CFL violated: speed {speed:.4g} with dt/h = {cfg.cfl}")

    levels, rows, rows_t = [], [], []

    def record(n, phi, phi_t):
        if n % cfg.snapshot_every == 0 or n == steps:
            levels.append(n)
            rows.append(phi.copy())
            rows_t.append(phi_t.copy())

    acc0 = _phi_tt(phi1, px0, derivative(g.phi1).values,
                   derivative(derivative(g.phi0)).values)
    record(0, phi0, phi1)
    prev = phi0.copy()
    cur = np.full(N, np.nan)
    cur[1:-1] = (phi0 + dt * phi1 + 0.5 * dt ** 2 * acc0)[1:-1]
    before = None

    for n in range(1, steps):
        px = _dx(cur, h)
        pxx = _dxx(cur, h)
        base = 2.0 * cur - prev
        lagged = (cur - prev) / dt
        nxt = base + dt ** 2 * _phi_tt(lagged, px, _dx(lagged, h), pxx)
        for _ in range(cfg.picard_max_iters):
            pt = (nxt - prev) / (2.0 * dt)
            # the lagged estimate stands in beyond the trusted edge so the
            # implicit coupling does not eat one node per iteration
            pt_fill = np.where(np.isfinite(pt), pt, lagged)
            new = base + dt ** 2 * _phi_tt(pt, px, _dx(pt_fill, h), pxx)
            delta = np.nanmax(np.abs(new - nxt)) if np.isfinite(new).any() else 0.0
            nxt = new
            if delta <= cfg.picard_tol:
                break
        else:
            raise PicardError(f"graph solver fixed point failed at level {n + 1}",
                              level=n + 1, residual=float(delta))
        pt = (nxt - prev) / (2.0 * dt)
        _check_radicand(pt, px, n, x)
        speed = np.nanmax(np.abs(null_speeds(pt, px)))
        if speed * dt > h * (1.0 + 1e-9):
            raise ConfigError(f"characteristic speed {speed:.4g} exceeds the CFL budget")
        record(n, cur, pt)
        before, prev, cur = prev, cur, nxt

    if before is None:
        final_t = (cur - prev) / dt
    else:
        final_t = (3.0 * cur - 4.0 * prev + before) / (2.0 * dt)
    record(steps, cur, final_t)
    return GraphEvolution(x=x, levels=np.asarray(levels), phi=np.vstack(rows),
                          phi_t=np.vstack(rows_t), dt=dt, config=cfg)
