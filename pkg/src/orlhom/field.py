"""Finite-difference fields on the unit cell Y and the domain Omega = (0,1)^d.

Two grid roles are used:

* ``"cell"`` -- the periodic unit cell.  ``n`` nodes per axis at ``i/n``;
  node ``n`` is identified with node ``0``.
* ``"domain"`` -- the closed unit cube for Dirichlet problems.  ``n + 1``
  nodes per axis (both faces included) and ``n`` cells per axis.

Gradients are forward differences and live on cells; cell ``i`` is sampled at
its lower-left node.  Quadrature is the rectangle rule over cells, so a
nodal domain field is integrated over its first ``n`` nodes per axis.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .nfunc import DomainError, NFunction

__all__ = [
    "PeriodicGrid",
    "ScalarField",
    "VectorField",
    "cell_grid",
    "domain_grid",
    "gradient",
    "gradient_periodic",
    "divergence_adjoint",
    "integrate",
    "zero_mean_project",
    "modular",
    "luxemburg_norm",
    "luxemburg_norm_values",
    "sobolev_norm",
    "interpolate_periodic",
    "write_csv",
]

ROLES = ("cell", "domain")


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on (0,1)^dim with spacing ``1/n``."""

    dim: int
    n: int
    role: str = "cell"

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 4:
            raise ValueError(f"need at least 4 nodes per axis, got {self.n}")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def periodic(self) -> bool:
        return self.role == "cell"

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of nodal arrays."""
        m = self.n if self.periodic else self.n + 1
        return (m,) * self.dim

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def axis(self, cells: bool = False) -> np.ndarray:
        m = self.n if (cells or self.periodic) else self.n + 1
        return np.arange(m) / self.n

    def coordinates(self, cells: bool = False) -> np.ndarray:
        """Array of shape ``(*shape, dim)`` with node (or cell-anchor) coordinates."""
        ax = self.axis(cells)
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    def indices(self, cells: bool = False) -> np.ndarray:
        """Integer node indices, shape ``(*shape, dim)``."""
        m = self.n if (cells or self.periodic) else self.n + 1
        mesh = np.meshgrid(*([np.arange(m)] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)


def cell_grid(n: int, dim: int = 1) -> PeriodicGrid:
    return PeriodicGrid(dim=dim, n=n, role="cell")


def domain_grid(n: int, dim: int = 1) -> PeriodicGrid:
    return PeriodicGrid(dim=dim, n=n, role="domain")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values sampled on a grid.

    ``values`` has either the nodal shape of the grid or its cell shape
    (cellwise data such as a gradient component).  On cell grids the two
    coincide.
    """

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape not in (self.grid.shape, self.grid.cell_shape):
            raise ValueError(
                f"values of shape {vals.shape} do not fit grid "
                f"(nodes {self.grid.shape}, cells {self.grid.cell_shape})"
            )
        if not np.all(np.isfinite(vals)):
            raise DomainError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn, cells: bool = False) -> "ScalarField":
        """Sample ``fn(x)`` where ``x`` has shape ``(..., dim)``."""
        return cls(grid, np.asarray(fn(grid.coordinates(cells)), dtype=float))

    @classmethod
    def constant(cls, grid: PeriodicGrid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    @property
    def cellwise(self) -> bool:
        return self.values.shape == self.grid.cell_shape

    def cell_values(self) -> np.ndarray:
        """Values at the lower-left node of each cell."""
        return _trim(self.grid, self.values)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.values + other.values)
        return ScalarField(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.values - other.values)
        return ScalarField(self.grid, self.values - other)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: PeriodicGrid
    components: tuple

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=float) for c in self.components)
        if len(comps) != self.grid.dim:
            raise ValueError(f"expected {self.grid.dim} components, got {len(comps)}")
        for c in comps:
            if c.shape != self.grid.cell_shape:
                raise ValueError(f"component shape {c.shape} != cell shape {self.grid.cell_shape}")
            if not np.all(np.isfinite(c)):
                raise DomainError("field values must be finite")
            c.setflags(write=False)
        object.__setattr__(self, "components", comps)

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.components[i])

    def stacked(self) -> np.ndarray:
        """Array of shape ``(*cell_shape, dim)``."""
        return np.stack(self.components, axis=-1)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.grid, tuple(a + b for a, b in zip(self.components, other.components)))


def _trim(grid: PeriodicGrid, values: np.ndarray) -> np.ndarray:
    if values.shape == grid.cell_shape:
        return values
    return values[(slice(0, grid.n),) * grid.dim]


def forward_differences(grid: PeriodicGrid, values: np.ndarray) -> list[np.ndarray]:
    """Forward differences of a nodal array, one cell-shaped array per axis."""
    h = grid.h
    out = []
    if grid.periodic:
        for k in range(grid.dim):
            out.append((np.roll(values, -1, axis=k) - values) / h)
        return out
    n = grid.n
    for k in range(grid.dim):
        hi = [slice(0, n)] * grid.dim
        lo = [slice(0, n)] * grid.dim
        hi[k] = slice(1, n + 1)
        out.append((values[tuple(hi)] - values[tuple(lo)]) / h)
    return out


def divergence_adjoint(grid: PeriodicGrid, comps: Sequence[np.ndarray]) -> np.ndarray:
    """Transpose of :func:`forward_differences`: maps cell arrays to a nodal array."""
    h = grid.h
    if grid.periodic:
        out = np.zeros(grid.shape)
        for k, w in enumerate(comps):
            out += (np.roll(w, 1, axis=k) - w) / h
        return out
    n = grid.n
    out = np.zeros(grid.shape)
    for k, w in enumerate(comps):
        hi = [slice(0, n)] * grid.dim
        lo = [slice(0, n)] * grid.dim
        hi[k] = slice(1, n + 1)
        out[tuple(hi)] += w / h
        out[tuple(lo)] -= w / h
    return out


def gradient(u: ScalarField) -> VectorField:
    """Forward-difference gradient; periodic wrap on cell grids."""
    if u.cellwise and not u.grid.periodic:
        raise ValueError("gradient needs a nodal field on domain grids")
    return VectorField(u.grid, tuple(forward_differences(u.grid, u.values)))


def gradient_periodic(u: ScalarField) -> VectorField:
    if not u.grid.periodic:
        raise ValueError("gradient_periodic needs a cell-Y grid")
    return gradient(u)


def integrate(u) -> float:
    """Rectangle rule ``h^d * sum`` over cells."""
    if isinstance(u, ScalarField):
        return float(u.grid.cell_volume * np.sum(u.cell_values()))
    raise TypeError("integrate expects a ScalarField")


def zero_mean_project(u: ScalarField) -> ScalarField:
    if not u.grid.periodic:
        raise ValueError("zero-mean projection is defined on the periodic cell only")
    mean = integrate(u)
    vals = u.values - mean
    # second pass removes the rounding residue of the first
    vals = vals - u.grid.cell_volume * np.sum(vals)
    return ScalarField(u.grid, vals)


def _modular_values(values: np.ndarray, weight: float, nf: NFunction) -> float:
    return float(weight * np.sum(nf._eval(np.abs(values))))


def modular(u: ScalarField, nf: NFunction) -> float:
    """``int B(|u|)``."""
    return _modular_values(u.cell_values(), u.grid.cell_volume, nf)


def luxemburg_norm_values(values: np.ndarray, weight: float, nf: NFunction) -> float:
    """Luxemburg norm of samples carrying quadrature weight ``weight`` each."""
    vals = np.abs(np.asarray(values, dtype=float)).ravel()
    if not np.all(np.isfinite(vals)):
        raise DomainError("Luxemburg norm of non-finite values")
    top = float(vals.max(initial=0.0))
    if top == 0.0:
        return 0.0

    def excess(k):
        return _modular_values(vals / k, weight, nf) - 1.0

    hi = top
    for _ in range(2000):
        if excess(hi) <= 0:
            break
        hi *= 2.0
    lo = hi / 2.0
    for _ in range(2000):
        if excess(lo) > 0:
            break
        hi = lo
        lo /= 2.0
    else:
        raise DomainError("could not bracket the Luxemburg norm")
    return float(brentq(excess, lo, hi, xtol=1e-12 * (1.0 + hi), rtol=1e-15, maxiter=500))


def luxemburg_norm(u: ScalarField, nf: NFunction) -> float:
    """``inf{k > 0 : int B(|u|/k) <= 1}``; zero for the zero field."""
    return luxemburg_norm_values(u.cell_values(), u.grid.cell_volume, nf)


def sobolev_norm(u: ScalarField, nf: NFunction) -> float:
    """``||u||_B + sum_i ||D_i u||_B``."""
    grad = gradient(u)
    return luxemburg_norm(u, nf) + sum(luxemburg_norm(grad.component(i), nf) for i in range(u.grid.dim))


def interpolate_periodic(u: ScalarField, y: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of a cell-grid field at points ``y`` (shape ``(..., dim)``)."""
    grid = u.grid
    if not grid.periodic:
        raise ValueError("periodic interpolation needs a cell grid")
    y = np.asarray(y, dtype=float)
    n = grid.n
    s = np.mod(y, 1.0) * n
    i0 = np.floor(s).astype(int)
    frac = s - i0
    i0 %= n
    out = np.zeros(y.shape[:-1])
    vals = u.values
    for corner in range(2**grid.dim):
        w = np.ones(y.shape[:-1])
        idx = []
        for k in range(grid.dim):
            bit = (corner >> k) & 1
            w = w * (frac[..., k] if bit else 1.0 - frac[..., k])
            idx.append((i0[..., k] + bit) % n)
        out += w * vals[tuple(idx)]
    return out


def write_csv(u: ScalarField, path) -> None:
    """Export node coordinates and values."""
    coords = u.grid.coordinates(cells=u.cellwise).reshape(-1, u.grid.dim)
    vals = u.values.ravel()
    names = ["x", "y"][: u.grid.dim] if not u.grid.periodic else ["y1", "y2"][: u.grid.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*names, "value"])
        for c, v in zip(coords, vals):
            w.writerow([*(repr(float(ci)) for ci in c), repr(float(v))])
