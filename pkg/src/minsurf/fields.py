"""Uniform-grid sampled functions, differencing, quadrature and norms."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidInputError


@dataclass(frozen=True)
class GridSpec1D:
    origin: float
    spacing: float
    count: int

    def __post_init__(self):
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise InvalidInputError(f"grid spacing must be positive, got {self.spacing}")
        if int(self.count) != self.count or self.count < 2:
            raise InvalidInputError(f"grid needs at least 2 nodes, got {self.count}")
        if not np.isfinite(self.origin):
            raise InvalidInputError("grid origin must be finite")

    @classmethod
    def from_interval(cls, lo: float, hi: float, h: float) -> "GridSpec1D":
        """Grid starting at ``lo`` with spacing ``h`` whose last node is the first >= ``hi``."""
        n = int(np.ceil((hi - lo) / h - 1e-9)) + 1
        return cls(float(lo), float(h), max(n, 2))

    @property
    def nodes(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.count)

    @property
    def end(self) -> float:
        return self.origin + self.spacing * (self.count - 1)

    def contains(self, lo: float, hi: float, slack: float = 1e-9) -> bool:
        tol = slack * self.spacing
        return self.origin <= lo + tol and hi - tol <= self.end


@dataclass(frozen=True)
class SampledFunction1D:
    grid: GridSpec1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.count,):
            raise InvalidInputError(
                f"expected {self.grid.count} samples, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("sampled values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values) -> "SampledFunction1D":
        return SampledFunction1D(self.grid, values)

    def __call__(self, x):
        """Linear interpolation; zero outside the grid."""
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)


def derivative(f: SampledFunction1D) -> SampledFunction1D:
    """Second-order centered differences, second-order one-sided at the ends."""
    if f.grid.count < 3:
        raise InvalidInputError("derivative needs at least 3 samples")
    return f.with_values(np.gradient(f.values, f.grid.spacing, edge_order=2))


def second_derivative(f: SampledFunction1D) -> SampledFunction1D:
    """Three-point second difference; second-order four-point stencils at the ends."""
    n = f.grid.count
    if n < 4:
        raise InvalidInputError("second derivative needs at least 4 samples")
    y = f.values
    h2 = f.grid.spacing ** 2
    out = np.empty(n)
    out[1:-1] = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / h2
    out[0] = (2.0 * y[0] - 5.0 * y[1] + 4.0 * y[2] - y[3]) / h2
    out[-1] = (2.0 * y[-1] - 5.0 * y[-2] + 4.0 * y[-3] - y[-4]) / h2
    return f.with_values(out)


def norm_l1(f: SampledFunction1D) -> float:
    return float(np.trapezoid(np.abs(f.values), dx=f.grid.spacing))


def norm_linf(f: SampledFunction1D) -> float:
    return float(np.max(np.abs(f.values)))


def norm_w11(f: SampledFunction1D) -> float:
    return norm_l1(f) + norm_l1(derivative(f))


# ---------------------------------------------------------------------------
# analytic profile descriptors

_DESCRIPTOR_RE = re.compile(r"^\s*([A-Za-z][\w-]*)\s*(?:\((.*)\))?\s*$")


@dataclass(frozen=True)
class ProfileDescriptor:
    """A named analytic profile, e.g. ``gaussian(amplitude=0.1, sigma=1)``."""

    kind: str
    params: tuple = ()

    def get(self, key, default=None):
        return dict(self.params).get(key, default)

    def __str__(self):
        if not self.params:
            return self.kind
        body = ", ".join(f"{k}={v[0]!r}:{v[1]!r}" if k == "support" else f"{k}={v}"
                         for k, v in self.params)
        return f"{self.kind}({body})"


KNOWN_PROFILES = ("zero", "constant", "gaussian", "compact-bump", "file")


def parse_descriptor(text: str) -> ProfileDescriptor:
    m = _DESCRIPTOR_RE.match(text)
    if not m:
        raise ConfigError(f"malformed profile descriptor: {text!r}")
    kind = m.group(1).lower()
    if kind not in KNOWN_PROFILES:
        raise ConfigError(f"unknown profile {kind!r}; expected one of {KNOWN_PROFILES}")
    params = []
    body = (m.group(2) or "").strip()
    if body:
        for item in body.split(","):
            if "=" not in item:
                raise ConfigError(f"profile argument {item.strip()!r} is not key=value")
            key, value = (s.strip() for s in item.split("=", 1))
            if key == "support":
                lo, _, hi = value.partition(":")
                try:
                    value = (float(lo), float(hi))
                except ValueError:
                    raise ConfigError(f"support must be lo:hi, got {value!r}") from None
            elif key != "path":
                try:
                    value = float(value)
                except ValueError:
                    raise ConfigError(f"non-numeric value for {key}: {value!r}") from None
            params.append((key, value))
    return ProfileDescriptor(kind, tuple(params))


def gaussian_profile(x, amplitude=1.0, sigma=1.0, center=0.0, deriv=0):
    """Gaussian ``a exp(-(x-c)^2 / 2 sigma^2)`` or its first or second derivative."""
    y = (np.asarray(x, dtype=float) - center) / sigma
    g = amplitude * np.exp(-0.5 * y * y)
    if deriv == 0:
        return g
    if deriv == 1:
        return -y / sigma * g
    if deriv == 2:
        return (y * y - 1.0) / sigma ** 2 * g
    if deriv == 3:
        return (3.0 - y * y) * y / sigma ** 3 * g
    raise ConfigError(f"gaussian derivative order {deriv} not supported")


def smooth_cutoff(x, lo, hi):
    """C-infinity bump equal to 1 at the interval midpoint, exactly 0 outside (lo, hi)."""
    x = np.asarray(x, dtype=float)
    y = (2.0 * x - lo - hi) / (hi - lo)
    out = np.zeros_like(x)
    inside = np.abs(y) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - y[inside] ** 2))
    return out


def evaluate_profile(desc: ProfileDescriptor, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    kind = desc.kind
    if kind == "zero":
        return np.zeros_like(x)
    if kind == "constant":
        return np.full_like(x, float(desc.get("value", 0.0)))
    if kind in ("gaussian", "compact-bump"):
        vals = gaussian_profile(
            x,
            amplitude=desc.get("amplitude", 1.0),
            sigma=desc.get("sigma", 1.0),
            center=desc.get("center", 0.0),
            deriv=int(desc.get("deriv", 0)),
        )
        if kind == "compact-bump":
            lo, hi = desc.get("support", (-1.0, 1.0))
            if not lo < hi:
                raise ConfigError(f"empty support interval {lo}:{hi}")
            vals = vals * smooth_cutoff(x, lo, hi)
        return vals
    if kind == "file":
        path = desc.get("path")
        if path is None:
            raise ConfigError("file profile needs path=...")
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        return np.interp(x, data[:, 0], data[:, 1])
    raise ConfigError(f"unknown profile {kind!r}")


def analytic_derivative(desc: ProfileDescriptor, order: int = 1):
    """Descriptor of the ``order``-th derivative, or None when it is not closed form."""
    if desc.kind == "zero":
        return desc
    if desc.kind == "constant":
        return ProfileDescriptor("zero")
    if desc.kind == "gaussian":
        total = int(desc.get("deriv", 0)) + order
        if total > 3:
            return None
        params = tuple((k, v) for k, v in desc.params if k != "deriv")
        return ProfileDescriptor("gaussian", params + (("deriv", float(total)),))
    return None


def sample(descriptor, grid: GridSpec1D) -> SampledFunction1D:
    if isinstance(descriptor, str):
        descriptor = parse_descriptor(descriptor)
    return SampledFunction1D(grid, evaluate_profile(descriptor, grid.nodes))
