"""Difference-of-convex functions described by their second-derivative measure.

A ``ConvexCombo`` stores ``f''(dx) = g(x) dx + sum_i c_i delta_{a_i}`` and an
anchor ``(x0, f(x0), f'_-(x0))``.  The left derivative follows from
``f'_-(y) - f'_-(x) = mu_f([x, y))`` and ``f`` from one more integration,
so the measure is the single source of truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .localtime import BandConfig, LocalTimeField, band_local_time
from .paths import SamplePath


class SmoothDensity:
    """Density ``g`` with antiderivatives ``G1' = g`` and ``G2' = G1``."""

    name = "custom"

    def __call__(self, x):
        raise NotImplementedError

    def first(self, x):
        raise NotImplementedError

    def second(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroDensity(SmoothDensity):
    name = "zero"

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def first(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def second(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ConstantDensity(SmoothDensity):
    value: float = 1.0
    name = "constant"

    def __call__(self, x):
        return np.full(np.shape(x), self.value)

    def first(self, x):
        return self.value * np.asarray(x, dtype=float)

    def second(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.value * x * x


@dataclass(frozen=True)
class GaussianBump(SmoothDensity):
    """``amplitude * exp(-(x - center)^2 / (2 width^2))``."""

    amplitude: float = 1.0
    center: float = 0.0
    width: float = 1.0
    name = "gaussian-bump"

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return self.amplitude * np.exp(-0.5 * u * u)

    def first(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / (self.width * math.sqrt(2.0))
        return self.amplitude * self.width * math.sqrt(math.pi / 2.0) * special.erf(z)

    def second(self, x):
        y = np.asarray(x, dtype=float) - self.center
        z = y / (self.width * math.sqrt(2.0))
        k = self.amplitude * self.width * math.sqrt(math.pi / 2.0)
        return k * (y * special.erf(z) + self.width * math.sqrt(2.0 / math.pi) * np.exp(-z * z))


@dataclass(frozen=True)
class CallableDensity(SmoothDensity):
    """Arbitrary density; antiderivatives from 0 by adaptive quadrature."""

    g: Callable[[float], float]
    name = "callable"

    def __call__(self, x):
        return np.vectorize(lambda u: float(self.g(u)))(np.asarray(x, dtype=float))

    def first(self, x):
        f = lambda u: integrate.quad(self.g, 0.0, u, limit=200)[0]
        return np.vectorize(f)(np.asarray(x, dtype=float))

    def second(self, x):
        # int_0^x (x - u) g(u) du
        f = lambda v: integrate.quad(lambda u: (v - u) * self.g(u), 0.0, v, limit=200)[0]
        return np.vectorize(f)(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SumDensity(SmoothDensity):
    parts: tuple[tuple[float, SmoothDensity], ...]
    name = "sum"

    def __call__(self, x):
        return sum(w * p(x) for w, p in self.parts)

    def first(self, x):
        return sum(w * p.first(x) for w, p in self.parts)

    def second(self, x):
        return sum(w * p.second(x) for w, p in self.parts)


_DENSITIES = {
    "zero": lambda: ZeroDensity(),
    "constant": lambda value=1.0: ConstantDensity(value),
    "gaussian-bump": lambda amplitude=1.0, center=0.0, width=1.0: GaussianBump(amplitude, center, width),
}


def smooth_density(name: str, **params) -> SmoothDensity:
    try:
        make = _DENSITIES[name]
    except KeyError:
        raise KeyError(f"unknown density {name!r}; choose from {sorted(_DENSITIES)}") from None
    return make(**params)


@dataclass(frozen=True)
class ConvexCombo:
    smooth_second: SmoothDensity = field(default_factory=ZeroDensity)
    atoms: tuple[tuple[float, float], ...] = ()
    anchor: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((float(a), float(c)) for a, c in self.atoms))
        object.__setattr__(self, "anchor", tuple(float(v) for v in self.anchor))

    def scaled(self, alpha: float) -> "ConvexCombo":
        x0, f0, d0 = self.anchor
        return ConvexCombo(SumDensity(((alpha, self.smooth_second),)),
                           tuple((a, alpha * c) for a, c in self.atoms),
                           (x0, alpha * f0, alpha * d0))

    def __add__(self, other: "ConvexCombo") -> "ConvexCombo":
        if self.anchor[0] != other.anchor[0]:
            raise ValueError("combos must share the anchor point")
        x0 = self.anchor[0]
        return ConvexCombo(SumDensity(((1.0, self.smooth_second), (1.0, other.smooth_second))),
                           self.atoms + other.atoms,
                           (x0, self.anchor[1] + other.anchor[1], self.anchor[2] + other.anchor[2]))


def abs_combo(a: float = 0.0) -> ConvexCombo:
    """``|x - a|``: a point mass of size 2 at ``a``."""
    return ConvexCombo(ZeroDensity(), ((a, 2.0),), (a - 1.0, 1.0, -1.0))


def square_combo() -> ConvexCombo:
    return ConvexCombo(ConstantDensity(2.0), (), (0.0, 0.0, 0.0))


def linear_combo(slope: float, intercept: float = 0.0) -> ConvexCombo:
    return ConvexCombo(ZeroDensity(), (), (0.0, intercept, slope))


def eval_left_derivative(combo: ConvexCombo, x):
    """``f'_-(x) = f'_-(x0) + mu_f([x0, x))`` (signed when ``x < x0``)."""
    x = np.asarray(x, dtype=float)
    x0, _, d0 = combo.anchor
    g = combo.smooth_second
    out = d0 + (g.first(x) - g.first(x0))
    for a, c in combo.atoms:
        if a >= x0:
            out = out + c * ((x > a) & (a >= x0))
        else:
            out = out - c * ((x <= a) & (a < x0))
    return out


def eval_f(combo: ConvexCombo, x):
    x = np.asarray(x, dtype=float)
    x0, f0, d0 = combo.anchor
    g = combo.smooth_second
    out = f0 + d0 * (x - x0) + (g.second(x) - g.second(x0) - (x - x0) * g.first(x0))
    for a, c in combo.atoms:
        if a >= x0:
            out = out + c * np.maximum(x - a, 0.0)
        else:
            out = out + c * np.maximum(a - x, 0.0)
    return out


def ito_tanaka_residual(path: SamplePath, combo: ConvexCombo, field: LocalTimeField) -> SamplePath:
    """Pathwise residual of the extended Ito-Tanaka formula.

    ``f(X_t) - f(X_0) - sum f'_-(X_i) dX_i - (1/2)(sum_x g(x) L_t^x dx + sum_i c_i L_t^{a_i})``

    The smooth part uses the field's midpoint rule; each atom gets its own
    band column at the exact atom level.  ``field`` must be on the path's
    full time grid and its levels must cover the path range.
    """
    v = path.values
    if v.ndim != 1:
        raise ValueError("ito_tanaka_residual takes a single path")
    if field.values.shape[0] != path.grid.steps + 1:
        raise ValueError("field must be sampled at every grid time of the path")
    if field.x_grid[0] > v.min() or field.x_grid[-1] < v.max():
        raise ValueError(
            f"field levels [{field.x_grid[0]:.6g}, {field.x_grid[-1]:.6g}] do not cover "
            f"path range [{v.min():.6g}, {v.max():.6g}]")
    fx = eval_f(combo, v)
    ito = np.zeros_like(v)
    np.cumsum(eval_left_derivative(combo, v[:-1]) * np.diff(v), out=ito[1:])
    smooth = field.integrate(combo.smooth_second, slice(None))
    band = BandConfig(field.epsilon)
    atoms = np.zeros_like(v)
    for a, c in combo.atoms:
        atoms = atoms + c * band_local_time(path, a, band, field.weight).values
    resid = fx - fx[0] - ito - 0.5 * (smooth + atoms)
    return path.with_values(resid)

