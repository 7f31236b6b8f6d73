"""Conversion of graph Cauchy data (phi0, phi1) into null-gauge data.

Gauge: on the initial slice ``u = v = x/2``, so the slice coordinate r equals
the graph coordinate x and ``g(d_r, d_r) = exp(psi)/2``.  The flat plane
therefore has ``psi == ln 2``, not 0.

Ambient space is R^{1,2} with coordinates (T, x, z) and inner product
``-a0 b0 + a1 b1 + a2 b2``; the surface is the graph ``z = phi(T, x)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NotTimelikeError
from .fields import GridSpec1D, SampledFunction1D, derivative

MIN_NODES = 5


@dataclass(frozen=True)
class GraphData:
    """Height and velocity on the slice.

    The optional ``phi0_x``, ``phi0_xx`` and ``phi1_x`` carry exact
    derivatives; absent ones are computed by finite differences.
    """

    phi0: SampledFunction1D
    phi1: SampledFunction1D
    phi0_x: SampledFunction1D | None = None
    phi0_xx: SampledFunction1D | None = None
    phi1_x: SampledFunction1D | None = None

    def __post_init__(self):
        for f in (self.phi1, self.phi0_x, self.phi0_xx, self.phi1_x):
            if f is not None and f.grid != self.phi0.grid:
                raise InvalidInputError("graph data profiles must share one grid")

    @property
    def grid(self) -> GridSpec1D:
        return self.phi0.grid


@dataclass(frozen=True)
class GeometricData:
    lambda0: SampledFunction1D
    nu0: SampledFunction1D
    psi0: SampledFunction1D
    psi1: SampledFunction1D

    def __post_init__(self):
        g = self.lambda0.grid
        if not (self.nu0.grid == g and self.psi0.grid == g and self.psi1.grid == g):
            raise InvalidInputError("geometric data profiles must share one grid")

    @property
    def grid(self) -> GridSpec1D:
        return self.lambda0.grid

    @classmethod
    def zeros(cls, grid: GridSpec1D, psi_value: float = 0.0) -> "GeometricData":
        z = SampledFunction1D(grid, np.zeros(grid.count))
        return cls(z, z, z.with_values(np.full(grid.count, psi_value)), z)


@dataclass(frozen=True)
class NullPair:
    """Transported curvature profiles: lambda = Lambda(u), nu = V(v)."""

    Lambda: SampledFunction1D
    V: SampledFunction1D

    def lam(self, t, r):
        return self.Lambda(0.5 * (np.asarray(r) + t))

    def nu(self, t, r):
        return self.V(0.5 * (np.asarray(r) - t))

    def source(self, t, r):
        """The product lambda * nu at (t, r)."""
        return self.lam(t, r) * self.nu(t, r)


@dataclass(frozen=True)
class _SliceJet:
    p: np.ndarray      # phi0'
    q: np.ndarray      # phi1
    phi_xx: np.ndarray
    phi_tx: np.ndarray
    radicand: np.ndarray


def _slice_jet(g: GraphData) -> _SliceJet:
    if g.grid.count < MIN_NODES:
        raise InvalidInputError(f"graph data needs at least {MIN_NODES} nodes")
    dphi0 = g.phi0_x if g.phi0_x is not None else derivative(g.phi0)
    # phi_xx as the derivative of the derivative, so that travelling-wave data
    # phi1 = -D phi0 gives phi_tx = -phi_xx node by node.
    phi_xx = (g.phi0_xx if g.phi0_xx is not None else derivative(dphi0)).values
    phi_tx = (g.phi1_x if g.phi1_x is not None else derivative(g.phi1)).values
    p = dphi0.values
    q = g.phi1.values
    return _SliceJet(p, q, phi_xx, phi_tx, 1.0 - q * q + p * p)


def validate_timelike(g: GraphData) -> float:
    """Return the minimum radicand ``1 - phi1^2 + phi0'^2``; raise if it is not positive."""
    rad = _slice_jet(g).radicand
    i = int(np.argmin(rad))
    if rad[i] <= 0.0:
        raise NotTimelikeError(
            f"surface not timelike at node {i} (x={g.grid.nodes[i]:.6g}): "
            f"radicand {rad[i]:.6g}", index=i, value=float(rad[i]))
    return float(rad[i])


def _frame_components(jet: _SliceJet):
    """Graph-coordinate (T, x) components of d_u and d_v along the slice."""
    p, q = jet.p, jet.q
    w = 1.0 + p * p
    sd = np.sqrt(jet.radicand)
    # d_t = (W, -pq)/sqrt(D) in (T, x) components, d_r = (0, 1)
    tT, tx = w / sd, -p * q / sd
    return (tT, 1.0 + tx), (-tT, 1.0 - tx)


def graph_to_geometric(g: GraphData) -> GeometricData:
    validate_timelike(g)
    jet = _slice_jet(g)
    p, q, rad = jet.p, jet.q, jet.radicand
    w = 1.0 + p * p
    sd = np.sqrt(rad)
    # phi_TT from the minimal surface equation
    phi_tt = (2.0 * q * p * jet.phi_tx + (1.0 - q * q) * jet.phi_xx) / w

    def k(a, b):
        return (a * a * phi_tt + 2.0 * a * b * jet.phi_tx + b * b * jet.phi_xx) / sd

    (uT, ux), (vT, vx) = _frame_components(jet)
    lam = k(uT, ux)
    nu = k(vT, vx)
    psi0 = np.log(2.0 * w)
    psi1 = -2.0 * q * jet.phi_xx / (w * sd)
    f = g.phi0
    return GeometricData(f.with_values(lam), f.with_values(nu),
                         f.with_values(psi0), f.with_values(psi1))


def graph_slice_frame(g: GraphData):
    """Ambient frame (X, X_u, X_v, n) along the initial slice, each of shape (N, 3)."""
    validate_timelike(g)
    jet = _slice_jet(g)
    p, q = jet.p, jet.q
    w = 1.0 + p * p
    sd = np.sqrt(jet.radicand)
    x = g.grid.nodes
    zeros = np.zeros_like(x)
    X = np.stack([zeros, x, g.phi0.values], axis=1)
    Xr = np.stack([zeros, np.ones_like(x), p], axis=1)
    Xt = np.stack([w, -p * q, q], axis=1) / sd[:, None]
    n = np.stack([q, -p, np.ones_like(x)], axis=1) / sd[:, None]
    return X, Xr + Xt, Xr - Xt, n


def transport_profiles(gd: GeometricData) -> NullPair:
    """Lambda(c) = lambda0(2c), V(c) = nu0(2c): the line u = c meets the slice at x = 2c."""
    grid = gd.grid
    half = GridSpec1D(grid.origin / 2.0, grid.spacing / 2.0, grid.count)
    return NullPair(SampledFunction1D(half, gd.lambda0.values),
                    SampledFunction1D(half, gd.nu0.values))
