"""Measurable reports for flatness, smallness, the bootstrap bound and convergence."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError, InvalidInputError, MinsurfError
from .evolution import Evolution
from .fields import SampledFunction1D, derivative, norm_l1, norm_linf
from .geometry import SffPoint, curvature_from_psi, gaussian_curvature
from .initial_data import GeometricData, NullPair
from .report import DiagnosticsReport

EXACT_RTOL = 1e-12
MIN_ORDER = 1.8


def smallness_check(gd: GeometricData, eps: float, background: float = 0.0
                    ) -> DiagnosticsReport:
    """Both smallness hypotheses of the global existence theorem, with margins.

    ``background`` is the conformal factor of the flat plane in the chosen
    normalization (0 for geometric data, ln 2 for converted graph data).
    """
    rep = DiagnosticsReport("smallness")
    rep.provenance.update(epsilon=eps, background=background)
    dev = gd.psi0.with_values(gd.psi0.values - background)
    curv = rep.add("curvature_norm", norm_l1(gd.lambda0) + norm_l1(gd.nu0))
    conf = rep.add("conformal_norm", norm_linf(dev) + norm_l1(derivative(gd.psi0))
                   + norm_l1(gd.psi1))
    rep.add("psi0_sup", norm_linf(dev))
    rep.add("curvature_margin", eps - curv)
    rep.add("conformal_margin", eps - conf)
    rep.check("curvature_hypothesis", "curvature_norm", eps, "<=")
    rep.check("conformal_hypothesis", "conformal_norm", eps, "<")
    return rep


def _trimmed(f: SampledFunction1D):
    nz = np.nonzero(f.values)[0]
    if nz.size == 0:
        return np.zeros(0)
    lo, hi = max(nz[0] - 1, 0), min(nz[-1] + 1, f.grid.count - 1)
    return f.values[lo:hi + 1]


def _trap_weights(n, h):
    w = np.full(n, h)
    if n:
        w[0] = w[-1] = 0.5 * h
    return w


def product_l1_2d(pair: NullPair, block: int = 1024) -> float:
    """Two-dimensional trapezoidal integral of |Lambda(u) V(v)| du dv.

    The integrand is formed explicitly, block by block; zero tails are
    trimmed, which leaves the trapezoid sum unchanged.
    """
    a = np.abs(_trimmed(pair.Lambda))
    b = np.abs(_trimmed(pair.V))
    if a.size == 0 or b.size == 0:
        return 0.0
    wa = _trap_weights(a.size, pair.Lambda.grid.spacing)
    wb = _trap_weights(b.size, pair.V.grid.spacing)
    total = 0.0
    for i in range(0, a.size, block):
        tile = np.abs(a[i:i + block, None] * b[None, :])
        total += float(wa[i:i + block] @ (tile @ wb))
    return total


def product_l1(pair: NullPair) -> float:
    """||lambda nu||_{L1(du dv)} = ||Lambda||_1 ||V||_1, checked against the 2D integral."""
    prod = norm_l1(pair.Lambda) * norm_l1(pair.V)
    direct = product_l1_2d(pair)
    if abs(direct - prod) > EXACT_RTOL * max(abs(prod), 1e-300):
        raise MinsurfError(f"product factorization failed: 2D {direct!r} vs {prod!r}")
    return prod


def product_l1_tr(pair: NullPair) -> float:
    """Same quantity in the (t, r) measure, where dr dt = 2 du dv."""
    return 2.0 * product_l1(pair)


def bootstrap_monitor(ev: Evolution, eps: float, gd: GeometricData | None = None,
                      background: float = 0.0) -> DiagnosticsReport:
    """Running sup|psi - background| against 3 eps, plus the Duhamel bound level by level.

    With w = psi - background the equation reads w_uv = exp(-background)
    exp(-w) lambda nu, so the bound after level n is
    ``eps + exp(-background) exp(max_{m<=n} sup|w_m|) P`` with P the
    L1(du dv) norm of lambda nu; it must dominate sup|w| at level n+1.
    """
    rep = DiagnosticsReport("bootstrap")
    rep.provenance.update(epsilon=eps, h=ev.h, dt=ev.dt, scheme=ev.config.scheme,
                          t_final=float(ev.config.steps * ev.dt), background=background)
    if gd is not None:
        small = smallness_check(gd, eps, background)
        rep.merge(small)
        rep.provenance["hypotheses_hold"] = small.passed
    sup = ev.sup_deviation(background)
    running = np.maximum.accumulate(sup)
    prod = product_l1(ev.pair)
    bound = eps + np.exp(running - background) * prod
    rep.add("sup_psi", running[-1])
    rep.add("three_eps", 3.0 * eps)
    rep.add("product_l1_uv", prod)
    rep.add("product_l1_tr", 2.0 * prod)
    ratio = sup[1:] / bound[:-1] if len(sup) > 1 else np.zeros(1)
    rep.add("chain_ratio", float(np.max(ratio)))
    rep.add("chain_slack", float(np.min(bound[:-1] - sup[1:])) if len(sup) > 1 else eps)
    viol = np.nonzero(sup >= 3.0 * eps)[0]
    rep.add("first_violation_time", float(viol[0] * ev.dt) if viol.size else -1.0)
    rep.check("bootstrap", "sup_psi", 3.0 * eps, "<")
    rep.check("inequality_chain", "chain_ratio", 1.0, "<=")
    step = max(1, len(sup) // 200)
    rep.series["time"] = list(np.arange(len(sup))[::step] * ev.dt)
    rep.series["sup_psi"] = list(sup[::step])
    rep.series["bound"] = list(bound[::step])
    return rep


def _support_ok(f: SampledFunction1D, lo: float, hi: float) -> bool:
    x = f.x
    tol = 1e-9 * f.grid.spacing
    outside = (x < lo - tol) | (x > hi + tol)
    return not np.any(f.values[outside] != 0.0)


def flatness_report(ev: Evolution, pair: NullPair, supports, stride: int = 1,
                    flat_tol: float = 1e-6) -> DiagnosticsReport:
    """Curvature outside the rectangle u-support x v-support.

    The source lambda * nu must vanish there exactly.  The curvature
    recomputed from second differences of psi (spaced ``stride`` nodes) is
    reported as ``curvature_outside``.
    """
    (u0, u1), (v0, v1) = supports
    if not (_support_ok(pair.Lambda, u0, u1) and _support_ok(pair.V, v0, v1)):
        raise InvalidInputError("Lambda/V do not vanish outside the stated supports")
    rep = DiagnosticsReport("flatness")
    rep.provenance.update(h=ev.h, dt=ev.dt, scheme=ev.config.scheme, stride=stride,
                          u_support=[u0, u1], v_support=[v0, v1])
    tt, rr = np.meshgrid(ev.times, ev.r, indexing="ij")
    u, v = 0.5 * (rr + tt), 0.5 * (rr - tt)
    tol = 1e-9 * ev.h
    outside = (u < u0 - tol) | (u > u1 + tol) | (v < v0 - tol) | (v > v1 + tol)
    trusted = np.isfinite(ev.psi)
    lam, nu = pair.Lambda(u), pair.V(v)
    src = lam * nu
    rep.add("source_max", float(np.max(np.abs(src[trusted]))) if trusted.any() else 0.0)
    rep.add("source_outside", float(np.max(np.abs(src[outside & trusted]), initial=0.0)))
    k_exact = gaussian_curvature(ev.psi, SffPoint(lam, nu))
    rep.add("curvature_exact_outside",
            float(np.max(np.abs(k_exact[outside & trusted]), initial=0.0)))
    rep.check("source_vanishes", "source_outside",
              EXACT_RTOL * max(rep.metrics["source_max"], 1e-300), "<=")
    s = int(stride)
    stored_dt = float(np.diff(ev.times).min()) if len(ev.times) > 1 else ev.dt
    if not np.allclose(np.diff(ev.times), stored_dt):
        raise InvalidInputError("flatness_report needs uniformly stored levels")
    k_fd = curvature_from_psi(ev.psi, ev.h, stored_dt, stride=s)
    inner_out = outside[s:-s, s:-s] & np.isfinite(k_fd)
    rep.add("curvature_outside", float(np.max(np.abs(k_fd[inner_out]), initial=0.0)))
    inner_in = ~outside[s:-s, s:-s] & np.isfinite(k_fd)
    rep.add("curvature_inside", float(np.max(np.abs(k_fd[inner_in]), initial=0.0)))
    rep.check("flat_outside", "curvature_outside", flat_tol, "<")
    return rep


def observed_orders(hs, errors):
    """Orders log(e_k / e_{k+1}) / log(h_k / h_{k+1}) for consecutive pairs."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])


def check_nested(hs):
    hs = np.asarray(hs, dtype=float)
    if len(hs) < 3:
        raise ConfigError("a convergence study needs at least 3 resolutions")
    if not np.allclose(hs[:-1] / hs[1:], 2.0, rtol=1e-9):
        raise ConfigError(f"resolutions must halve successively, got {list(hs)}")


def convergence_report(name, hs, errors, min_order=MIN_ORDER, exact_tol=None,
                       max_order=None) -> DiagnosticsReport:
    """Observed orders for a sequence of errors.

    When every error is below ``exact_tol`` the quantity is exact to rounding
    and the order is reported as infinite.
    """
    check_nested(hs)
    rep = DiagnosticsReport(name)
    rep.series["h"] = list(map(float, hs))
    rep.series["error"] = list(map(float, errors))
    for h, e in zip(hs, errors):
        rep.add(f"error_h{1.0 / h:g}", e)
    errors = np.asarray(errors, dtype=float)
    if exact_tol is not None and np.all(errors <= exact_tol):
        rep.add("order", np.inf)
        rep.add("max_error", float(errors.max()))
        rep.check("exact", "max_error", exact_tol, "<=")
        return rep
    orders = observed_orders(hs, errors)
    rep.series["orders"] = list(map(float, orders))
    rep.add("order", float(np.min(orders)))
    rep.add("order_max", float(np.max(orders)))
    rep.check("order_min", "order", min_order, ">=")
    if max_order is not None:
        rep.check("order_upper", "order_max", max_order, "<=")
    return rep


@dataclass(frozen=True)
class LatticeField:
    """Values on a (t, x) product lattice; NaN marks untrusted nodes."""

    times: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @classmethod
    def from_evolution(cls, ev: Evolution) -> "LatticeField":
        return cls(ev.times, ev.r, ev.psi)


def compare_solutions(a: LatticeField, b: LatticeField, region=None) -> dict:
    """Sup and L1 differences of b (bilinearly interpolated) against a's nodes.

    ``region`` is ``(t_lo, t_hi, x_lo, x_hi)``; only nodes trusted in both
    fields are compared.
    """
    tt, xx = np.meshgrid(a.times, a.x, indexing="ij")
    sel = np.isfinite(a.values)
    if region is not None:
        t_lo, t_hi, x_lo, x_hi = region
        eps_t = 1e-9 * max(1.0, abs(t_hi))
        eps_x = 1e-9 * max(1.0, abs(x_hi))
        sel &= (tt >= t_lo - eps_t) & (tt <= t_hi + eps_t) & (xx >= x_lo - eps_x) & (xx <= x_hi + eps_x)
    if len(b.times) > 1:
        interp = RegularGridInterpolator((b.times, b.x), b.values, bounds_error=False,
                                         fill_value=np.nan)
        bv = np.full(tt.shape, np.nan)
        bv[sel] = interp(np.column_stack([tt[sel], xx[sel]]))
    else:
        bv = np.full(tt.shape, np.nan)
        same_t = np.isclose(tt, b.times[0])
        bv[same_t] = np.interp(xx[same_t], b.x, b.values[0], left=np.nan, right=np.nan)
    sel &= np.isfinite(bv)
    if not sel.any():
        raise InvalidInputError("the two fields share no trusted nodes in the region")
    diff = np.abs(a.values - bv)[sel]
    dt = float(np.diff(a.times).mean()) if len(a.times) > 1 else 1.0
    dx = float(a.x[1] - a.x[0])
    return {"sup": float(diff.max()), "l1": float(diff.sum() * dt * dx), "nodes": int(sel.sum())}


def _self_convergence(fields, hs):
    """Successive differences of fields sampled at nested resolutions.

    ``fields[k]`` is a 1D array on a grid of spacing ``hs[k]`` sharing the
    left endpoint; differences are taken on the coarsest nodes.
    """
    diffs = []
    for k in range(len(fields) - 1):
        a = fields[k]
        b = fields[k + 1][::2][:len(a)]
        d = np.abs(a[:len(b)] - b)
        diffs.append(float(np.nanmax(d)))
    return diffs


def convergence_study(scenario, resolutions=None) -> DiagnosticsReport:
    """Run a scenario's pipeline at nested resolutions and report observed orders.

    Uses an exact oracle where one exists (free-wave closed form, travelling
    wave, exact transport); cross-pipeline compares the two independent
    solvers; any other pipeline falls back to self-convergence of psi at
    t_final from successive differences.
    """
    from . import pipelines as pl

    hs = list(resolutions or scenario.resolutions)
    check_nested(hs)
    kind = scenario.pipeline
    T = scenario.compare_time if scenario.compare_time is not None else scenario.t_final
    tol = scenario.tolerances
    min_order = tol.get("min_order", MIN_ORDER)
    rep = DiagnosticsReport(f"convergence:{kind}")
    rep.provenance.update(pipeline=kind, resolutions=hs)
    if kind == "free-wave":
        for scheme in ("leapfrog", "characteristic"):
            errs = [pl.free_wave_error(scenario, h, scheme) for h in hs]
            rep.merge(convergence_report(scheme, hs, errs, tol.get("min_order", 1.9),
                                         max_order=tol.get("max_order", 2.1)), prefix=scheme)
    elif kind == "travelling-wave":
        runs = [pl.travelling_wave_errors(scenario, h, T) for h in hs]
        rep.merge(convergence_report("reference", hs, [r[0] for r in runs],
                                     tol.get("reference_order", 1.9)), prefix="reference")
        rep.merge(convergence_report("geometric", hs, [r[1] for r in runs], min_order),
                  prefix="geometric")
    elif kind == "cross-pipeline":
        errs = [pl.cross_pipeline_error(scenario, h, T) for h in hs]
        rep.merge(convergence_report("cross", hs, errs, min_order), prefix="cross")
    elif kind == "transport":
        errs = [pl.transport_defect(scenario, h) for h in hs]
        rep.merge(convergence_report("transport", hs, errs, exact_tol=tol.get("exact", 1e-13)),
                  prefix="transport")
    elif kind == "flatness" and scenario.supports is not None:
        errs = []
        for h in hs:
            ev, _, _ = pl.run_evolution(scenario, h=h, snapshot_every=1)
            flat = flatness_report(ev, ev.pair, scenario.supports,
                                   stride=scenario.flatness_stride)
            errs.append(flat.metrics["curvature_outside"])
        rep.merge(convergence_report("curvature_outside", hs, errs, min_order),
                  prefix="flatness")
    elif kind == "reconstruct":
        from .reconstruction import embedding_checks
        checks = []
        for h in hs:
            ev, _, _, emb, pair = pl.reconstruct(scenario, h=h)
            checks.append(embedding_checks(emb, ev, pair).metrics)
        # exact identities are judged against the rounding level of the finest
        # second differences, which grows like eps |X| / h^2
        floor = max(c.pop("rounding_floor") for c in checks)
        exact_tol = max(tol.get("exact", 1e-12), 100.0 * floor)
        rep.add("rounding_floor", floor)
        for key in sorted(checks[0]):
            errs = [c[key] for c in checks]
            rep.merge(convergence_report(key, hs, errs, min_order, exact_tol=exact_tol),
                      prefix=key)
    else:
        psis = []
        for h in hs:
            ev, _, _ = pl.run_evolution(scenario, h=h, snapshot_every=10 ** 9)
            cols = ev.region(scenario.r_min, scenario.r_max)
            psis.append(ev.psi[-1, cols])
        diffs = _self_convergence(psis, hs)
        rep.series["successive_differences"] = diffs
        orders = observed_orders(hs[:-1], diffs)
        rep.add("order", float(np.min(orders)))
        rep.check("order_min", "order", min_order, ">=")
    return rep
