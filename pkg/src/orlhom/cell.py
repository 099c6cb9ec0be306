"""Cell problem and tabulated homogenized density.

For a macroscopic gradient ``xi`` the cell problem minimizes

    h^d * sum_i f(y_i, xi + (grad_h u)_i)

over periodic nodal fields ``u`` on the unit cell.  The value is invariant
under ``u -> u + const``; the returned corrector is normalized to zero mean.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .descent import laplacian_preconditioner, minimize_bb
from .field import (
    PeriodicGrid,
    ScalarField,
    divergence_adjoint,
    forward_differences,
    zero_mean_project,
)
from .integrand import Integrand

__all__ = [
    "ExtrapolationError",
    "CellProblem",
    "CellSolution",
    "HomogenizedDensity",
    "ConvexityCheck",
    "discrete_energy",
    "energy_and_gradient",
    "solve_cell",
    "tabulate_fhom",
    "fhom_convexity_check",
]


class ExtrapolationError(ValueError):
    """Query outside the range of a tabulated density."""


@dataclass(frozen=True, eq=False)
class CellProblem:
    integrand: Integrand
    grid: PeriodicGrid
    xi: np.ndarray
    tol: float = 1e-9
    max_iter: int = 100_000

    def __post_init__(self):
        if self.grid.role != "cell":
            raise ValueError("cell problems live on a cell-Y grid")
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if xi.shape != (self.grid.dim,):
            raise ValueError(f"xi must have {self.grid.dim} components, got shape {xi.shape}")
        if self.integrand.coefficient.min_dim > self.grid.dim:
            raise ValueError(f"{self.integrand.coefficient.kind} coefficient needs dim >= {self.integrand.coefficient.min_dim}")
        object.__setattr__(self, "xi", xi)

    def coefficients(self) -> np.ndarray:
        return self.integrand.coefficient.on_indices(self.grid.indices(), self.grid.n)


@dataclass(frozen=True, eq=False)
class CellSolution:
    xi: np.ndarray
    corrector: ScalarField
    value: float
    gradient_residual: float
    iterations: int
    converged: bool


def _local_energy(f: Integrand, a: np.ndarray, xi: np.ndarray, grid: PeriodicGrid, u: np.ndarray):
    comps = forward_differences(grid, u)
    G = np.stack(comps, axis=-1) + xi
    E = grid.cell_volume * float(np.sum(a * f.W(G)))
    flux = a[..., None] * f.dW(G)
    g = grid.cell_volume * divergence_adjoint(grid, [flux[..., k] for k in range(grid.dim)])
    return E, g


def energy_and_gradient(p: CellProblem, u: np.ndarray, a: np.ndarray | None = None):
    """Discrete cell energy and its gradient with respect to the nodal values."""
    if a is None:
        a = p.coefficients()
    return _local_energy(p.integrand, a, p.xi, p.grid, np.asarray(u, dtype=float))


def discrete_energy(p: CellProblem, u: ScalarField) -> float:
    """``h^d * sum_i f(y_i, xi + (grad_h u)_i)``."""
    if u.grid != p.grid:
        raise ValueError("field and problem grids differ")
    a = p.coefficients()
    comps = forward_differences(p.grid, u.values)
    G = np.stack(comps, axis=-1) + p.xi
    return p.grid.cell_volume * float(np.sum(a * p.integrand.W(G)))


def _curvature(f: Integrand, xi: np.ndarray) -> float:
    r2 = float(np.dot(xi, xi))
    if r2 == 0.0 or f.potential == "quadratic":
        return 2.0
    w = float(f.W(xi))
    return max(2.0 * w / r2, 1e-8)


def solve_cell(p: CellProblem) -> CellSolution:
    """Minimize the discrete cell energy by preconditioned BB descent from ``u = 0``."""
    grid = p.grid
    a = p.coefficients()
    weight = grid.cell_volume * float(np.mean(a)) * _curvature(p.integrand, p.xi)
    precond = laplacian_preconditioner(grid.n, grid.dim, periodic=True, weight=weight)
    res = minimize_bb(
        lambda u: _local_energy(p.integrand, a, p.xi, grid, u),
        np.zeros(grid.shape),
        precond=precond,
        tol=p.tol,
        max_iter=p.max_iter,
    )
    corrector = zero_mean_project(ScalarField(grid, res.x))
    return CellSolution(
        xi=p.xi.copy(),
        corrector=corrector,
        value=discrete_energy(p, corrector),
        gradient_residual=res.residual,
        iterations=res.iterations,
        converged=res.converged,
    )


# --------------------------------------------------------------------------
# tabulated density


@dataclass(frozen=True, eq=False)
class HomogenizedDensity:
    """Values of ``f_hom`` on a regular xi-grid with multilinear interpolation."""

    axes: tuple
    values: np.ndarray
    converged: np.ndarray = field(repr=False)
    iterations: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    tol: float = 1e-9

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def complete(self) -> bool:
        return bool(np.all(self.converged))

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def _locate(self, xi: np.ndarray):
        idx, t, widths = [], [], []
        for k, ax in enumerate(self.axes):
            x = xi[..., k]
            span = ax[-1] - ax[0]
            if np.any(x < ax[0] - 1e-12 * span) or np.any(x > ax[-1] + 1e-12 * span):
                raise ExtrapolationError(
                    f"xi component {k} outside tabulated range [{ax[0]}, {ax[-1]}]"
                )
            i = np.clip(np.searchsorted(ax, x, side="right") - 1, 0, len(ax) - 2)
            w = ax[i + 1] - ax[i]
            idx.append(i)
            t.append(np.clip((x - ax[i]) / w, 0.0, 1.0))
            widths.append(w)
        return idx, t, widths

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 0:
            xi = xi[None]
        idx, t, _ = self._locate(xi)
        out = np.zeros(xi.shape[:-1])
        for corner in range(2**self.dim):
            w = np.ones(xi.shape[:-1])
            sel = []
            for k in range(self.dim):
                bit = (corner >> k) & 1
                w = w * (t[k] if bit else 1.0 - t[k])
                sel.append(idx[k] + bit)
            out = out + w * self.values[tuple(sel)]
        return float(out) if out.ndim == 0 else out

    def gradient(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        idx, t, widths = self._locate(xi)
        out = np.zeros(xi.shape)
        for corner in range(2**self.dim):
            sel = [idx[k] + ((corner >> k) & 1) for k in range(self.dim)]
            v = self.values[tuple(sel)]
            for k in range(self.dim):
                w = np.ones(xi.shape[:-1])
                for j in range(self.dim):
                    bit = (corner >> j) & 1
                    if j == k:
                        w = w * ((1.0 if bit else -1.0) / widths[k])
                    else:
                        w = w * (t[j] if bit else 1.0 - t[j])
                out[..., k] += w * v
        return out


def tabulate_fhom(
    integrand: Integrand,
    grid: PeriodicGrid,
    xi_range,
    counts,
    tol: float = 1e-9,
    max_iter: int = 100_000,
    workers: int | None = None,
) -> HomogenizedDensity:
    """Solve one cell problem per node of a regular xi-grid.

    ``xi_range`` is ``(lo, hi)`` or one such pair per axis; ``counts`` an
    int or one int per axis.
    """
    d = grid.dim
    if np.ndim(xi_range) == 1:
        xi_range = [xi_range] * d
    if np.ndim(counts) == 0:
        counts = [int(counts)] * d
    if len(xi_range) != d or len(counts) != d:
        raise ValueError("xi_range/counts must match the grid dimension")
    if any(c < 2 for c in counts):
        raise ValueError("need at least 2 nodes per axis")
    axes = tuple(np.linspace(float(lo), float(hi), int(c)) for (lo, hi), c in zip(xi_range, counts))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    points = mesh.reshape(-1, d)

    def one(xi):
        return solve_cell(CellProblem(integrand, grid, xi, tol=tol, max_iter=max_iter))

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            sols = list(ex.map(one, points))
    else:
        sols = [one(xi) for xi in points]
    shape = tuple(int(c) for c in counts)
    return HomogenizedDensity(
        axes=axes,
        values=np.array([s.value for s in sols]).reshape(shape),
        converged=np.array([s.converged for s in sols]).reshape(shape),
        iterations=np.array([s.iterations for s in sols]).reshape(shape),
        residuals=np.array([s.gradient_residual for s in sols]).reshape(shape),
        tol=tol,
    )


@dataclass(frozen=True)
class ConvexityCheck:
    worst_slack: float
    location: tuple
    threshold: float

    @property
    def ok(self) -> bool:
        return self.worst_slack >= self.threshold


def fhom_convexity_check(table: HomogenizedDensity) -> ConvexityCheck:
    """Midpoint convexity over every equally spaced aligned triple of table nodes.

    The pass threshold is ``-10 * tol * (1 + max|f_hom|)``.
    """
    v = table.values
    worst, where = np.inf, ()
    for k in range(table.dim):
        m = v.shape[k]
        for step in range(1, (m - 1) // 2 + 1):
            lo = np.take(v, np.arange(0, m - 2 * step), axis=k)
            mid = np.take(v, np.arange(step, m - step), axis=k)
            hi = np.take(v, np.arange(2 * step, m), axis=k)
            slack = 0.5 * (lo + hi) - mid
            j = int(np.argmin(slack))
            if slack.flat[j] < worst:
                worst = float(slack.flat[j])
                pos = list(np.unravel_index(j, slack.shape))
                pos[k] += step
                where = (k, step, tuple(int(q) for q in pos))
    if worst == np.inf:
        worst = 0.0
    scale = 1.0 + float(np.max(np.abs(v)))
    return ConvexityCheck(worst_slack=worst, location=where, threshold=-10.0 * table.tol * scale)
