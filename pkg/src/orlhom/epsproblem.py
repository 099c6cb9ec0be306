"""Oscillating problems at finite epsilon, the homogenized problem, and recovery sequences.

The oscillating energy on Omega = (0,1)^d is

    E_eps(u) = h^d * sum_cells f(x_i / eps, (grad_h u)_i),

minimized over nodal fields equal to ``xi . x`` on the boundary.  ``1/eps``
must be an integer dividing the number of cells per axis, with at least
eight cells per period, so that ``x_i / eps mod 1`` is a node of the cell
grid and can be computed in integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cell import HomogenizedDensity
from .descent import laplacian_preconditioner, minimize_bb
from .field import (
    PeriodicGrid,
    ScalarField,
    divergence_adjoint,
    forward_differences,
    gradient,
    interpolate_periodic,
    luxemburg_norm,
    luxemburg_norm_values,
    sobolev_norm,
)
from .integrand import Integrand
from .nfunc import NFunction

__all__ = [
    "MIN_NODES_PER_PERIOD",
    "AdmissibilityError",
    "periods",
    "fast_coordinates",
    "OscillatingProblem",
    "EpsSolution",
    "Separable",
    "RecoveryMetrics",
    "affine_field",
    "solve_eps",
    "solve_homogenized",
    "smooth_cutoff",
    "build_recovery",
    "recovery_metrics",
    "oscillating_energy",
    "two_scale_gradient",
    "two_scale_energy",
    "decreasing",
]

MIN_NODES_PER_PERIOD = 8


class AdmissibilityError(ValueError):
    """epsilon incompatible with the domain grid."""


def periods(eps: float, n: int | None = None) -> int:
    """Number of periods ``m = 1/eps`` per unit length, checked for admissibility."""
    if not eps > 0:
        raise AdmissibilityError(f"eps must be positive, got {eps}")
    inv = 1.0 / eps
    m = int(round(inv))
    if m < 1 or abs(inv - m) > 1e-9 * max(1.0, inv):
        raise AdmissibilityError(f"1/eps = {inv:.12g} is not an integer")
    if n is not None:
        if n % m:
            raise AdmissibilityError(f"1/eps = {m} must divide the number of cells per axis n = {n}")
        if n // m < MIN_NODES_PER_PERIOD:
            raise AdmissibilityError(
                f"n * eps = {n // m} cells per period; at least {MIN_NODES_PER_PERIOD} are required"
            )
    return m


def fast_coordinates(grid: PeriodicGrid, eps: float, cells: bool = False) -> np.ndarray:
    """``x / eps mod 1`` at the grid nodes (or cell anchors), reduced exactly."""
    m = periods(eps)
    return np.mod(grid.indices(cells) * m, grid.n) / grid.n


def affine_field(grid: PeriodicGrid, xi) -> ScalarField:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return ScalarField(grid, grid.coordinates() @ xi)


@dataclass(frozen=True, eq=False)
class OscillatingProblem:
    integrand: Integrand
    grid: PeriodicGrid
    eps: float
    xi: np.ndarray
    tol: float = 1e-9
    max_iter: int = 100_000

    def __post_init__(self):
        if self.grid.role != "domain":
            raise ValueError("oscillating problems live on a domain-Omega grid")
        periods(self.eps, self.grid.n)
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if xi.shape != (self.grid.dim,):
            raise ValueError(f"xi must have {self.grid.dim} components")
        object.__setattr__(self, "xi", xi)

    def coefficients(self) -> np.ndarray:
        """Coefficient at each cell anchor, ``a(x_i / eps)``."""
        return self.integrand.coefficient(fast_coordinates(self.grid, self.eps, cells=True))


@dataclass(frozen=True, eq=False)
class EpsSolution:
    eps: float
    minimizer: ScalarField
    energy: float
    gradient_residual: float
    iterations: int
    converged: bool

    def __iter__(self):
        # allows ``u, E = solve_eps(p)``
        return iter((self.minimizer, self.energy))


def _interior(grid: PeriodicGrid):
    return (slice(1, grid.n),) * grid.dim


def _dirichlet_descent(grid, density, density_grad, boundary: np.ndarray, weight, tol, max_iter):
    inner = _interior(grid)
    vol = grid.cell_volume

    def full(x):
        u = boundary.copy()
        u[inner] = x
        return u

    def fun(x):
        u = full(x)
        G = np.stack(forward_differences(grid, u), axis=-1)
        E = vol * float(np.sum(density(G)))
        flux = density_grad(G)
        g = vol * divergence_adjoint(grid, [flux[..., k] for k in range(grid.dim)])
        return E, g[inner]

    precond = laplacian_preconditioner(grid.n, grid.dim, periodic=False, weight=weight)
    res = minimize_bb(fun, boundary[inner].copy(), precond=precond, tol=tol, max_iter=max_iter)
    return full(res.x), res


def solve_eps(p: OscillatingProblem) -> EpsSolution:
    """Minimize the oscillating energy with affine Dirichlet data.

    Starts from the affine extension of the boundary data.
    """
    grid = p.grid
    f = p.integrand
    a = p.coefficients()
    boundary = affine_field(grid, p.xi).values.copy()
    r2 = float(np.dot(p.xi, p.xi))
    curv = 2.0 if (r2 == 0.0 or f.potential == "quadratic") else max(2.0 * float(f.W(p.xi)) / r2, 1e-8)
    u, res = _dirichlet_descent(
        grid,
        lambda G: a * f.W(G),
        lambda G: a[..., None] * f.dW(G),
        boundary,
        grid.cell_volume * float(np.mean(a)) * curv,
        p.tol,
        p.max_iter,
    )
    return EpsSolution(p.eps, ScalarField(grid, u), res.value, res.residual, res.iterations, res.converged)


def oscillating_energy(f: Integrand, u: ScalarField, eps: float) -> float:
    """Discrete oscillating energy of an arbitrary nodal field on a domain grid."""
    grid = u.grid
    periods(eps, grid.n)
    a = f.coefficient(fast_coordinates(grid, eps, cells=True))
    G = np.stack(forward_differences(grid, u.values), axis=-1)
    return grid.cell_volume * float(np.sum(a * f.W(G)))


def solve_homogenized(
    table: HomogenizedDensity,
    grid: PeriodicGrid,
    xi,
    tol: float = 1e-9,
    max_iter: int = 100_000,
) -> EpsSolution:
    """Minimize ``h^d sum f_hom(grad_h u)`` with affine data, ``f_hom`` from a table.

    Raises :class:`ExtrapolationError` if ``xi`` (or an iterate's gradient)
    leaves the tabulated range.
    """
    if grid.role != "domain":
        raise ValueError("the homogenized problem lives on a domain-Omega grid")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if table.dim != grid.dim or xi.shape != (grid.dim,):
        raise ValueError("table, grid and xi dimensions differ")
    table(xi)  # range check
    boundary = affine_field(grid, xi).values.copy()
    r2 = float(xi @ xi)
    curv = max(2.0 * abs(float(table(xi))) / r2, 1e-3) if r2 > 0 else 2.0
    u, res = _dirichlet_descent(
        grid, table, table.gradient, boundary, grid.cell_volume * curv, tol, max_iter
    )
    return EpsSolution(0.0, ScalarField(grid, u), res.value, res.residual, res.iterations, res.converged)


def decreasing(values: Sequence[float], floor: float = 0.0) -> bool:
    """Each entry is at most its predecessor, or at most ``floor``.

    The floor absorbs sequences that are already at rounding level, where
    strict monotonicity is meaningless.
    """
    v = [float(x) for x in values]
    return all(b <= a or b <= floor for a, b in zip(v, v[1:]))


# --------------------------------------------------------------------------
# recovery sequences


@dataclass(frozen=True, eq=False)
class Separable:
    """Corrector term ``phi(x) * psi(y)``; ``phi`` nodal on the domain grid, ``psi`` on a cell grid."""

    phi: ScalarField
    psi: ScalarField

    def __post_init__(self):
        if self.phi.grid.role != "domain" or self.phi.cellwise:
            raise ValueError("phi must be a nodal field on a domain grid")
        if self.psi.grid.role != "cell":
            raise ValueError("psi must live on a cell grid")
        if self.phi.grid.dim != self.psi.grid.dim:
            raise ValueError("phi and psi dimensions differ")


def build_recovery(u: ScalarField, terms: Sequence[Separable], eps: float) -> ScalarField:
    """``u(x) + eps * sum_k phi_k(x) psi_k(x/eps mod 1)`` at the nodes of ``u``'s grid."""
    grid = u.grid
    periods(eps, grid.n)
    y = fast_coordinates(grid, eps)
    out = np.array(u.values, dtype=float)
    for t in terms:
        if t.phi.grid != grid:
            raise ValueError("phi must share the grid of u")
        out += eps * t.phi.values * interpolate_periodic(t.psi, y)
    return ScalarField(grid, out)


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        e0 = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        e1 = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return e0 / (e0 + e1)


def smooth_cutoff(grid: PeriodicGrid, width: float) -> ScalarField:
    """Product cutoff vanishing on the boundary and equal to 1 at distance >= ``width``."""
    x = grid.coordinates()
    if width <= 0:
        return ScalarField(grid, np.ones(grid.shape))
    chi = np.ones(grid.shape)
    for k in range(grid.dim):
        chi *= _smooth_step(x[..., k] / width) * _smooth_step((1.0 - x[..., k]) / width)
    return ScalarField(grid, chi)


@dataclass(frozen=True)
class RecoveryMetrics:
    """Distance and energy diagnostics of ``u_{delta,eps} = u + eps v_delta(x, x/eps)``.

    ``term1`` is the L^B distance to ``u``; ``term1_gradient`` the gradient
    part of the full Sobolev distance.  ``term2_plus``/``term2_minus``
    compare ``||D u_{delta,eps}||`` with ``||Du +/- D_y u_1||`` over the
    product domain.
    """

    eps: float
    delta: float
    cutoff_width: float
    approximation_error: float
    term1: float
    term1_gradient: float
    term2_plus: float
    term2_minus: float
    energy_of_recovery: float
    target_two_scale_energy: float

    @property
    def c_delta_eps(self) -> float:
        return self.term1 + self.term2_plus

    @property
    def c_delta_eps_minus(self) -> float:
        return self.term1 + self.term2_minus

    @property
    def c_delta_eps_sobolev(self) -> float:
        return self.term1 + self.term1_gradient + self.term2_plus


def _psi_grid(terms: Sequence[Separable]) -> PeriodicGrid | None:
    grids = {t.psi.grid for t in terms}
    if len(grids) > 1:
        raise ValueError("all psi fields must share one cell grid")
    return next(iter(grids)) if grids else None


def two_scale_gradient(u: ScalarField, terms: Sequence[Separable], sign: float = 1.0) -> list[np.ndarray]:
    """Components of ``Du(x) + sign * D_y u_1(x, y)`` on the product of cell anchors.

    Each array has shape ``(*Omega cells, *Y cells)``.
    """
    grid = u.grid
    d = grid.dim
    Du = forward_differences(grid, u.values)
    ygrid = _psi_grid(terms)
    if ygrid is None:
        return [c for c in Du]
    ones_y = (1,) * d
    out = []
    for k in range(d):
        comp = Du[k].reshape(Du[k].shape + ones_y) * np.ones((1,) * d + ygrid.cell_shape)
        for t in terms:
            dpsi = forward_differences(ygrid, t.psi.values)[k]
            comp = comp + sign * t.phi.cell_values().reshape(grid.cell_shape + ones_y) * dpsi.reshape((1,) * d + dpsi.shape)
        out.append(comp)
    return out


def two_scale_energy(f: Integrand, u: ScalarField, terms: Sequence[Separable]) -> float:
    """``iint f(y, Du(x) + D_y u_1(x, y)) dx dy`` by tensor rectangle rule."""
    grid = u.grid
    comps = two_scale_gradient(u, terms)
    ygrid = _psi_grid(terms)
    if ygrid is None:
        # y-independent argument: average the coefficient over a fine cell grid
        ygrid = PeriodicGrid(grid.dim, 256, "cell")
        comps = [c.reshape(c.shape + (1,) * grid.dim) for c in comps]
    a = f.coefficient(ygrid.coordinates(cells=True))
    G = np.stack(np.broadcast_arrays(*comps), axis=-1)
    vals = a.reshape((1,) * grid.dim + a.shape) * f.W(G)
    return float(grid.cell_volume * ygrid.cell_volume * np.sum(vals))


def recovery_metrics(
    u: ScalarField,
    terms: Sequence[Separable],
    eps: float,
    nf: NFunction,
    integrand: Integrand,
    delta: float | None = None,
    schedule: Callable[[float], float] = math.sqrt,
) -> RecoveryMetrics:
    """Build ``u_{delta,eps}`` and measure it.

    ``u`` is used as its own smooth approximation.  The corrector
    ``u_1 = sum phi_k psi_k`` is approximated by ``v_delta = chi_w u_1`` with
    a smooth cutoff ``chi_w``, the width ``w`` chosen so that the bound
    ``||u_1 - v_delta||_{L^1(W^1 L^B_per)} <= delta / 2`` holds.
    ``delta`` defaults to ``schedule(eps)``.
    """
    grid = u.grid
    d = grid.dim
    if delta is None:
        delta = float(schedule(eps))
    psi_norms = [sobolev_norm(t.psi, nf) for t in terms]
    S = sum(float(np.max(np.abs(t.phi.values))) * q for t, q in zip(terms, psi_norms))
    if S > 0:
        ratio = min(1.0, delta / (2.0 * S))
        width = min(0.5, 1.0 - (1.0 - ratio) ** (1.0 / d))
    else:
        width = 0.0
    chi = smooth_cutoff(grid, width)
    v_terms = [Separable(ScalarField(grid, chi.values * t.phi.values), t.psi) for t in terms]
    approx = sum(
        grid.cell_volume * float(np.sum(np.abs((1.0 - chi.cell_values()) * t.phi.cell_values()))) * q
        for t, q in zip(terms, psi_norms)
    )

    U = build_recovery(u, v_terms, eps)
    diff = U - u
    dgrad = gradient(diff)
    term1 = luxemburg_norm(diff, nf)
    term1_grad = sum(luxemburg_norm(dgrad.component(k), nf) for k in range(d))

    DU = gradient(U)
    lhs = sum(luxemburg_norm(DU.component(k), nf) for k in range(d))
    ygrid = _psi_grid(terms) or PeriodicGrid(d, 4, "cell")
    w = grid.cell_volume * ygrid.cell_volume
    rhs = {}
    for sign in (1.0, -1.0):
        comps = two_scale_gradient(u, terms, sign)
        if not terms:
            comps = [c.reshape(c.shape + (1,) * d) * np.ones((1,) * d + ygrid.cell_shape) for c in comps]
        rhs[sign] = sum(luxemburg_norm_values(c, w, nf) for c in comps)

    return RecoveryMetrics(
        eps=eps,
        delta=delta,
        cutoff_width=width,
        approximation_error=approx,
        term1=term1,
        term1_gradient=term1_grad,
        term2_plus=abs(lhs - rhs[1.0]),
        term2_minus=abs(lhs - rhs[-1.0]),
        energy_of_recovery=oscillating_energy(integrand, U, eps),
        target_two_scale_energy=two_scale_energy(integrand, u, terms),
    )
