"""Periodic convex integrands ``f(y, xi) = a(y) * W(xi)``.

``a`` is a Y-periodic coefficient field bounded below by a positive constant
and ``W`` a radial convex potential.  All evaluations are vectorized: ``y``
and ``xi`` are arrays whose last axis has length ``d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .nfunc import GrowthConstants, NFunction

__all__ = [
    "CoefficientField",
    "Integrand",
    "GrowthReport",
    "ConvexityReport",
    "check_growth",
    "check_convexity",
    "coefficient_from_spec",
    "integrand_from_spec",
]

ORLICZ_SMOOTHING = 1e-8


@dataclass(frozen=True)
class CoefficientField:
    """Y-periodic scalar coefficient.

    kinds
        ``constant``      ``a0``
        ``sine``          ``alpha + beta * sin(2 pi y_1)``
        ``laminate``      ``a1`` where ``y_axis mod 1 < 1/2``, ``a2`` elsewhere
        ``checkerboard``  ``a1`` on the two squares touching the origin, ``a2`` on the others (d = 2)
    """

    kind: str
    a0: float = 1.0
    alpha: float = 2.0
    beta: float = 1.0
    a1: float = 1.0
    a2: float = 4.0
    axis: int = 0

    def __post_init__(self):
        if self.kind not in ("constant", "sine", "laminate", "checkerboard"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.min_value() <= 0:
            raise ValueError(f"coefficient must be bounded below by a positive constant ({self})")

    def min_value(self) -> float:
        if self.kind == "constant":
            return self.a0
        if self.kind == "sine":
            return self.alpha - abs(self.beta)
        return min(self.a1, self.a2)

    def max_value(self) -> float:
        if self.kind == "constant":
            return self.a0
        if self.kind == "sine":
            return self.alpha + abs(self.beta)
        return max(self.a1, self.a2)

    @property
    def min_dim(self) -> int:
        if self.kind == "checkerboard":
            return 2
        if self.kind == "laminate":
            return self.axis + 1
        return 1

    def __call__(self, y) -> np.ndarray:
        y = np.mod(np.asarray(y, dtype=float), 1.0)
        if y.ndim == 0 or y.shape[-1] < self.min_dim:
            raise ValueError(f"{self.kind} coefficient needs points with at least {self.min_dim} coordinates")
        base = y[..., 0]
        if self.kind == "constant":
            return np.full(base.shape, self.a0)
        if self.kind == "sine":
            return self.alpha + self.beta * np.sin(2.0 * np.pi * base)
        if self.kind == "laminate":
            return np.where(y[..., self.axis] < 0.5, self.a1, self.a2)
        same = (y[..., 0] < 0.5) == (y[..., 1] < 0.5)
        return np.where(same, self.a1, self.a2)

    def on_indices(self, idx: np.ndarray, n: int) -> np.ndarray:
        """Evaluate at ``y = (idx mod n) / n`` with the reduction done in integers."""
        return self(np.mod(idx, n) / n)


@dataclass(frozen=True, eq=False)
class Integrand:
    """``f(y, xi) = a(y) * W(xi)``.

    potentials
        ``quadratic``  ``|xi|^2``
        ``power``      ``|xi|^p / p`` with ``p >= 2``
        ``orlicz``     ``B(sqrt(delta^2 + |xi|^2)) - B(delta)``, ``delta = 1e-8``
        ``custom``     user callables ``value(xi)`` and ``grad(xi)``
    """

    coefficient: CoefficientField
    potential: str = "quadratic"
    p: float = 2.0
    nfunction: Optional[NFunction] = None
    value_fn: Optional[Callable] = field(default=None, repr=False)
    grad_fn: Optional[Callable] = field(default=None, repr=False)
    growth: Optional[GrowthConstants] = None

    def __post_init__(self):
        if self.potential not in ("quadratic", "power", "orlicz", "custom"):
            raise ValueError(f"unknown potential {self.potential!r}")
        if self.potential == "power" and self.p < 2:
            raise ValueError("power potential requires p >= 2 for differentiability")
        if self.potential == "orlicz" and self.nfunction is None:
            raise ValueError("orlicz potential requires an N-function")
        if self.potential == "custom" and (self.value_fn is None or self.grad_fn is None):
            raise ValueError("custom potential requires value_fn and grad_fn")

    @property
    def even(self) -> bool:
        return self.potential != "custom"

    # -- potential ---------------------------------------------------------

    def W(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.potential == "custom":
            return np.asarray(self.value_fn(xi), dtype=float)
        r2 = np.sum(xi * xi, axis=-1)
        if self.potential == "quadratic":
            return r2
        if self.potential == "power":
            return np.power(r2, 0.5 * self.p) / self.p
        d = ORLICZ_SMOOTHING
        B = self.nfunction
        return B._eval(np.sqrt(d * d + r2)) - B._eval(d)

    def dW(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.potential == "custom":
            return np.asarray(self.grad_fn(xi), dtype=float)
        if self.potential == "quadratic":
            return 2.0 * xi
        r2 = np.sum(xi * xi, axis=-1, keepdims=True)
        if self.potential == "power":
            return np.power(r2, 0.5 * self.p - 1.0) * xi
        d = ORLICZ_SMOOTHING
        r = np.sqrt(d * d + r2)
        return self.nfunction._dens(r) / r * xi

    # -- density -----------------------------------------------------------

    def eval(self, y, xi) -> np.ndarray:
        out = self.coefficient(y) * self.W(xi)
        return float(out) if np.ndim(out) == 0 else out

    def grad_xi(self, y, xi) -> np.ndarray:
        return self.coefficient(y)[..., None] * self.dW(xi)

    __call__ = eval


@dataclass(frozen=True)
class GrowthReport:
    lower_slack: float
    upper_slack: float
    worst_lower_xi: float
    worst_upper_xi: float
    samples: int
    discontinuous_coefficient: bool

    @property
    def ok(self) -> bool:
        return self.lower_slack >= -1e-12 and self.upper_slack >= -1e-12


@dataclass(frozen=True)
class ConvexityReport:
    worst_slack: float
    samples: int

    @property
    def ok(self) -> bool:
        return self.worst_slack >= -1e-10


def _random_directions(rng, m, d):
    v = rng.standard_normal((m, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def check_growth(f: Integrand, gc: GrowthConstants, samples: int = 1000, dim: int = 1, seed: int = 0) -> GrowthReport:
    """Worst slack of both sides of the growth bound on a random sample.

    ``|xi|`` is log-spaced in ``[1e-3, 1e3]``; slacks are divided by
    ``max(1, |bound|)`` so that large-``|xi|`` rounding does not dominate.
    Violations are reported, never raised.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    dim = max(dim, f.coefficient.min_dim)
    rng = np.random.default_rng(seed)
    r = np.geomspace(1e-3, 1e3, samples)
    xi = _random_directions(rng, samples, dim) * r[:, None]
    y = rng.random((samples, dim))
    fv = f.eval(y, xi)
    lower = gc.c * gc.lower._eval(r) - gc.c_prime
    upper = gc.C * (1.0 + gc.upper._eval(r))
    lo_s = (fv - lower) / np.maximum(1.0, np.abs(lower))
    up_s = (upper - fv) / np.maximum(1.0, np.abs(upper))
    i, j = int(np.argmin(lo_s)), int(np.argmin(up_s))
    return GrowthReport(
        lower_slack=float(lo_s[i]),
        upper_slack=float(up_s[j]),
        worst_lower_xi=float(r[i]),
        worst_upper_xi=float(r[j]),
        samples=samples,
        discontinuous_coefficient=f.coefficient.kind in ("laminate", "checkerboard"),
    )


def check_convexity(f: Integrand, samples: int = 1000, dim: int = 1, seed: int = 0, scale: float = 10.0) -> ConvexityReport:
    """Midpoint test ``f(y, (xi+eta)/2) <= (f(y, xi) + f(y, eta))/2`` on random triples."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    dim = max(dim, f.coefficient.min_dim)
    rng = np.random.default_rng(seed)
    y = rng.random((samples, dim))
    xi = rng.uniform(-scale, scale, (samples, dim))
    eta = rng.uniform(-scale, scale, (samples, dim))
    mid = f.eval(y, 0.5 * (xi + eta))
    avg = 0.5 * (f.eval(y, xi) + f.eval(y, eta))
    slack = (avg - mid) / np.maximum(1.0, np.abs(avg))
    return ConvexityReport(worst_slack=float(np.min(slack)), samples=samples)


def coefficient_from_spec(spec: Mapping) -> CoefficientField:
    spec = dict(spec)
    kind = spec.pop("coefficient", spec.pop("kind", "constant"))
    if kind == "checkerboard-2d":
        kind = "checkerboard"
    return CoefficientField(kind=kind, **spec)


def integrand_from_spec(spec: Mapping, nfunction: Optional[NFunction] = None) -> Integrand:
    """Build an integrand from a config section.

    Keys: ``coefficient`` plus its parameters, ``potential`` and ``p``.
    """
    spec = dict(spec)
    potential = spec.pop("potential", "quadratic")
    p = float(spec.pop("p", 2.0))
    coeff = coefficient_from_spec(spec)
    return Integrand(coeff, potential=potential, p=p, nfunction=nfunction if potential == "orlicz" else None)
