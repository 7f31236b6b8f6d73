"""Scenario-level runs shared by the CLI, the convergence study and the tests."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .evolution import EvolveConfig, evolve, free_wave_closed_form
from .fields import (GridSpec1D, analytic_derivative, evaluate_profile, parse_descriptor,
                     sample)
from .initial_data import GeometricData, GraphData, graph_to_geometric, transport_profiles
from .reconstruction import (embedding_on_evolution, graph_seed, canonical_seed,
                             integrate_slice_frame, regraph)
from .reference import evolve_graph

PIPELINES = ("evolve", "free-wave", "travelling-wave", "cross-pipeline", "transport",
             "bootstrap", "flatness", "reconstruct")


@dataclass(frozen=True)
class Scenario:
    pipeline: str = "evolve"
    graph: dict | None = None
    geometric: dict | None = None
    r_min: float = -10.0
    r_max: float = 10.0
    h: float = 1.0 / 64
    t_final: float = 5.0
    cfl: float = 1.0
    scheme: str = "leapfrog"
    picard_tol: float = 1e-12
    picard_max_iters: int = 50
    snapshot_every: int = 1
    graph_cfl: float = 0.5
    epsilon: float = 0.01
    compare_time: float | None = None
    resolutions: tuple = ()
    supports: tuple | None = None
    flatness_stride: int = 2
    output: str = "out"
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"unknown pipeline {self.pipeline!r}; expected one of {PIPELINES}")
        if (self.graph is None) == (self.geometric is None):
            raise ConfigError("exactly one of the [graph] and [geometric] blocks is required")
        if self.graph is not None:
            _require(self.graph, ("phi0", "phi1"), "graph")
        if self.geometric is not None:
            _require(self.geometric, ("lambda0", "nu0", "psi0", "psi1"), "geometric")

    def evolve_config(self, h=None, t_final=None, scheme=None, r_min=None, r_max=None,
                      cfl=None, snapshot_every=None) -> EvolveConfig:
        return EvolveConfig(
            r_min=self.r_min if r_min is None else r_min,
            r_max=self.r_max if r_max is None else r_max,
            h=self.h if h is None else h,
            t_final=self.t_final if t_final is None else t_final,
            cfl=self.cfl if cfl is None else cfl,
            scheme=self.scheme if scheme is None else scheme,
            picard_tol=self.picard_tol, picard_max_iters=self.picard_max_iters,
            snapshot_every=self.snapshot_every if snapshot_every is None else snapshot_every)

    def at(self, **changes) -> "Scenario":
        return replace(self, **changes)


def _require(block, keys, name):
    missing = [k for k in keys if k not in block]
    if missing:
        raise ConfigError(f"[{name}] block is missing {missing}")


def _descriptors(block):
    return {k: parse_descriptor(v) if isinstance(v, str) else v for k, v in block.items()}


def sample_graph(sc: Scenario, grid: GridSpec1D, exact_jets: bool = True) -> GraphData:
    """Sampled graph data, with closed-form derivatives where the profiles allow."""
    d = _descriptors(sc.graph)
    jets = {}
    if exact_jets:
        for name, (key, order) in (("phi0_x", ("phi0", 1)), ("phi0_xx", ("phi0", 2)),
                                   ("phi1_x", ("phi1", 1))):
            desc = analytic_derivative(d[key], order)
            if desc is not None:
                jets[name] = sample(desc, grid)
    return GraphData(sample(d["phi0"], grid), sample(d["phi1"], grid), **jets)


def sample_geometric(sc: Scenario, grid: GridSpec1D) -> GeometricData:
    d = _descriptors(sc.geometric)
    return GeometricData(*(sample(d[k], grid) for k in ("lambda0", "nu0", "psi0", "psi1")))


def initial_data(sc: Scenario, cfg: EvolveConfig):
    """Geometric data on the padded grid required by ``cfg``; also the graph data if any."""
    grid = GridSpec1D.from_interval(*cfg.data_interval(), cfg.h)
    if sc.graph is not None:
        g = sample_graph(sc, grid)
        return graph_to_geometric(g), g
    return sample_geometric(sc, grid), None


def flat_background(sc: Scenario) -> float:
    """Conformal factor of the flat plane in the scenario's normalization."""
    return float(np.log(2.0)) if sc.graph is not None else 0.0


def run_evolution(sc: Scenario, **cfg_changes):
    cfg = sc.evolve_config(**cfg_changes)
    gd, g = initial_data(sc, cfg)
    return evolve(gd, cfg), gd, g


def free_wave_error(sc: Scenario, h: float, scheme: str) -> float:
    cfg = sc.evolve_config(h=h, scheme=scheme)
    gd, _ = initial_data(sc, cfg)
    ev = evolve(gd, cfg)
    exact = free_wave_closed_form(gd)
    cols = ev.region(sc.r_min, sc.r_max)
    ref = exact(ev.times[:, None], ev.r[None, cols])
    return float(np.nanmax(np.abs(ev.psi[:, cols] - ref)))


def query_grid(sc: Scenario, h: float) -> np.ndarray:
    n = int(round((sc.r_max - sc.r_min) / h))
    return sc.r_min + h * np.arange(n + 1)


def reference_at(sc: Scenario, h: float, T: float) -> np.ndarray:
    """Reference-solver height at time T on the query grid."""
    if sc.graph is None:
        raise ConfigError("the reference solver needs a [graph] block")
    cfg = EvolveConfig(sc.r_min, sc.r_max, h, T, cfl=sc.graph_cfl,
                       picard_tol=sc.picard_tol, picard_max_iters=sc.picard_max_iters,
                       snapshot_every=10 ** 9)
    steps = int(np.ceil(T / cfg.dt - 1e-9))
    pad = steps * h + 2 * h
    grid = GridSpec1D.from_interval(sc.r_min - pad, sc.r_max + pad, h)
    ge = evolve_graph(sample_graph(sc, grid), cfg)
    return np.interp(query_grid(sc, h), ge.x, ge.at_time(T))


def geometric_regraph_at(sc: Scenario, h: float, T: float, scheme=None) -> np.ndarray:
    """convert -> evolve -> reconstruct -> regraph at ambient time T."""
    if sc.graph is None:
        raise ConfigError("regraphing needs a [graph] block")
    margin = 2.0
    t_geo = 1.05 * T + 0.5
    cfg = sc.evolve_config(h=h, t_final=t_geo, r_min=sc.r_min - margin,
                           r_max=sc.r_max + margin, scheme=scheme, snapshot_every=1)
    gd, g = initial_data(sc, cfg)
    ev = evolve(gd, cfg)
    frame = integrate_slice_frame(gd, graph_seed(g))
    emb = embedding_on_evolution(frame, ev, cfg.r_min, cfg.r_max,
                                 t_lo=max(0.0, 0.9 * T - 1.0), t_hi=t_geo)
    phi, _ = regraph(emb, [T], query_grid(sc, h))
    return phi[0]


def travelling_wave_errors(sc: Scenario, h: float, T: float):
    """(reference error, geometric error) against the exact f(x - T)."""
    f = parse_descriptor(sc.graph["phi0"]) if isinstance(sc.graph["phi0"], str) else sc.graph["phi0"]
    xq = query_grid(sc, h)
    exact = evaluate_profile(f, xq - T)
    ref = reference_at(sc, h, T)
    geo = geometric_regraph_at(sc, h, T)
    return float(np.max(np.abs(ref - exact))), float(np.nanmax(np.abs(geo - exact))), \
        bool(np.all(np.isfinite(geo)))


def cross_pipeline_error(sc: Scenario, h: float, T: float) -> float:
    geo = geometric_regraph_at(sc, h, T)
    ref = reference_at(sc, h, T)
    if not np.all(np.isfinite(geo)):
        return float("inf")
    return float(np.max(np.abs(geo - ref)))


def transport_defect(sc: Scenario, h: float) -> float:
    """Relative sup of centered d_v lambda and d_u nu along lattice characteristics.

    Moving along v at fixed u is the step (t, r) -> (t - h, r + h) of the
    cfl = 1 lattice; the centered difference spans two such steps.
    """
    ev, gd, _ = run_evolution(sc, h=h, cfl=1.0, scheme="leapfrog", snapshot_every=1)
    lam, nu = ev.lam_field(), ev.nu_field()
    dv_lam = (lam[:-2, 2:] - lam[2:, :-2]) / (2.0 * h)
    du_nu = (nu[2:, 2:] - nu[:-2, :-2]) / (2.0 * h)
    scale_l = max(np.max(np.abs(lam)), 1e-300) / h
    scale_n = max(np.max(np.abs(nu)), 1e-300) / h
    return float(max(np.max(np.abs(dv_lam)) / scale_l, np.max(np.abs(du_nu)) / scale_n))


def reconstruct(sc: Scenario, h=None, r_window=None, t_window=None):
    """Evolution, slice frame and embedding for a scenario."""
    ev, gd, g = run_evolution(sc, h=h, snapshot_every=1)
    seed = graph_seed(g) if g is not None else canonical_seed(gd)
    frame = integrate_slice_frame(gd, seed)
    r_lo, r_hi = r_window or (sc.r_min, sc.r_max)
    t_lo, t_hi = t_window or (0.0, None)
    emb = embedding_on_evolution(frame, ev, r_lo, r_hi, t_lo=t_lo, t_hi=t_hi)
    return ev, gd, frame, emb, transport_profiles(gd)
