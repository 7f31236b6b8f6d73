"""Pointwise geometry of the metric e^psi (du dv + dv du).

Conventions used throughout the package:

* ``u = (r + t)/2`` and ``v = (r - t)/2``, so ``d_u = d_r + d_t``,
  ``d_v = d_r - d_t`` and ``d_u d_v = d_r^2 - d_t^2``.
* ``lambda = k(d_u, d_u)`` and ``nu = k(d_v, d_v)``; the null components of
  the second fundamental form relative to the unit spacelike normal.
* Curvature sign: sectional curvature ``K = <R(X,Y)Y, X> / (g(X,X)g(Y,Y) - g(X,Y)^2)``.
  For this metric ``K = -exp(-psi) psi_uv = -exp(-2 psi) lambda nu``.

All functions broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class ConformalFactorPoint:
    psi: float
    psi_u: float
    psi_v: float


@dataclass(frozen=True)
class SffPoint:
    lam: float
    nu: float


def metric_component(psi):
    """g(d_u, d_v); g_uu = g_vv = 0."""
    return np.exp(psi)


def inverse_metric_component(psi):
    """g^{uv}."""
    return np.exp(-psi)


def christoffels(p: ConformalFactorPoint):
    """Return ``(Gamma^u_uu, Gamma^v_vv)``; every other symbol vanishes."""
    return p.psi_u, p.psi_v


def riem_lnln(psi, s: SffPoint):
    """Riem(L, N, L, N) for L = grad u, N = grad v."""
    return np.exp(-4.0 * psi) * s.lam * s.nu


def gaussian_curvature(psi, s: SffPoint):
    return -np.exp(-2.0 * psi) * s.lam * s.nu


def _check_lattice(psi, source=None):
    psi = np.asarray(psi, dtype=float)
    if psi.ndim != 2 or min(psi.shape) < 3:
        raise InvalidInputError(f"need a 2D lattice of at least 3x3, got {psi.shape}")
    if source is not None:
        source = np.asarray(source, dtype=float)
        if source.shape != psi.shape:
            raise InvalidInputError(
                f"lattice shapes differ: psi {psi.shape} vs source {source.shape}")
    return psi, source


def wave_operator(psi, h, dt, stride=1):
    """Centered ``psi_rr - psi_tt`` on a (t, r) lattice.

    ``stride`` spaces the stencil ``stride`` nodes apart; the result covers the
    nodes at least ``stride`` away from every edge.
    """
    psi, _ = _check_lattice(psi)
    s = int(stride)
    c = psi[s:-s, s:-s]
    d_rr = (psi[s:-s, 2 * s:] - 2.0 * c + psi[s:-s, :-2 * s]) / (s * h) ** 2
    d_tt = (psi[2 * s:, s:-s] - 2.0 * c + psi[:-2 * s, s:-s]) / (s * dt) ** 2
    return d_rr - d_tt


def psi_wave_residual(psi, source, h, dt):
    """Residual of ``psi_rr - psi_tt = exp(-psi) * source`` at interior nodes.

    ``psi`` and ``source`` are (t, r) lattices with ``source = lambda * nu``.
    """
    psi, source = _check_lattice(psi, source)
    return wave_operator(psi, h, dt) - np.exp(-psi[1:-1, 1:-1]) * source[1:-1, 1:-1]


def curvature_from_psi(psi, h, dt, stride=1):
    """Gaussian curvature ``-exp(-psi) psi_uv`` recomputed by second differences."""
    psi, _ = _check_lattice(psi)
    s = int(stride)
    return -np.exp(-psi[s:-s, s:-s]) * wave_operator(psi, h, dt, stride=s)
