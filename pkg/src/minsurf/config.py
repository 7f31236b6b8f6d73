"""Scenario files: ``[section]`` headers, ``key = value`` lines, ``#`` comments.

Sections::

    [scenario]   pipeline, epsilon, compare_time, resolutions (comma list),
                 supports (u0:u1, v0:v1), flatness_stride
    [graph]      phi0, phi1                     (profile descriptors)
    [geometric]  lambda0, nu0, psi0, psi1       (profile descriptors)
    [evolve]     r_min, r_max, h, t_final, cfl, scheme, picard_tol,
                 picard_max_iters, snapshot_every, graph_cfl
    [output]     directory
    [tolerances] free-form name = float overrides

Exactly one of [graph] / [geometric] must be present.  Profile descriptors
are ``zero``, ``constant(value=c)``, ``gaussian(amplitude=, sigma=, center=,
deriv=)``, ``compact-bump(..., support=lo:hi)`` or ``file(path=...)``.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .errors import ConfigError
from .fields import parse_descriptor
from .pipelines import Scenario

_FLOATS = ("r_min", "r_max", "h", "t_final", "cfl", "picard_tol", "graph_cfl")
_INTS = ("picard_max_iters", "snapshot_every")


def _interval(text):
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ConfigError(f"expected lo:hi, got {text!r}")
    return float(lo), float(hi)


def parse_scenario(text: str, base_dir: Path | None = None) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    kw = {}
    sc = cp["scenario"] if cp.has_section("scenario") else {}
    try:
        if "pipeline" in sc:
            kw["pipeline"] = sc["pipeline"].strip()
        for key in ("epsilon", "compare_time"):
            if key in sc:
                kw[key] = float(sc[key])
        if "resolutions" in sc:
            kw["resolutions"] = tuple(_parse_h(s) for s in sc["resolutions"].split(","))
        if "supports" in sc:
            parts = [p.strip() for p in sc["supports"].split(",")]
            if len(parts) != 2:
                raise ConfigError("supports needs two intervals: u0:u1, v0:v1")
            kw["supports"] = (_interval(parts[0]), _interval(parts[1]))
        if "flatness_stride" in sc:
            kw["flatness_stride"] = int(sc["flatness_stride"])
        if cp.has_section("evolve"):
            ev = cp["evolve"]
            for key in _FLOATS:
                if key in ev:
                    kw[key] = _parse_h(ev[key]) if key == "h" else float(ev[key])
            for key in _INTS:
                if key in ev:
                    kw[key] = int(ev[key])
            if "scheme" in ev:
                kw["scheme"] = ev["scheme"].strip()
        if cp.has_section("tolerances"):
            kw["tolerances"] = {k: float(v) for k, v in cp["tolerances"].items()}
    except ValueError as exc:
        raise ConfigError(f"bad numeric value: {exc}") from None
    if cp.has_section("output") and "directory" in cp["output"]:
        kw["output"] = cp["output"]["directory"].strip()
    for block in ("graph", "geometric"):
        if cp.has_section(block):
            entries = {}
            for k, v in cp[block].items():
                desc = parse_descriptor(v)
                if desc.kind == "file" and base_dir is not None:
                    path = Path(desc.get("path"))
                    if not path.is_absolute():
                        path = base_dir / path
                    if not path.exists():
                        raise ConfigError(f"profile file {path} does not exist")
                    params = tuple((pk, str(path) if pk == "path" else pv)
                                   for pk, pv in desc.params)
                    desc = type(desc)(desc.kind, params)
                entries[k] = str(desc)
            kw[block] = entries
    return Scenario(**kw)


def _parse_h(text):
    """Accept ``0.0078125`` or ``1/128``."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return parse_scenario(path.read_text(encoding="utf-8"), base_dir=path.parent)
