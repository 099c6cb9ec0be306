"""Barzilai-Borwein gradient descent with a backtracking safeguard.

Steps are taken along ``-P^{-1} g`` where ``P`` is a fixed symmetric positive
definite operator (a discrete Laplacian for the energies in this package),
so the method is steepest descent in the metric induced by ``P``.  The BB
step length is the metric version of ``<s, s> / <s, y>``.  Sufficient
decrease is enforced against the maximum of the last few energies
(Grippo-Lampariello-Lucidi), which keeps the long BB steps acceptable.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["DescentResult", "minimize_bb", "laplacian_preconditioner"]


@dataclass
class DescentResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    residual: float
    iterations: int
    converged: bool


def minimize_bb(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-9,
    max_iter: int = 100_000,
    memory: int = 10,
    c1: float = 1e-4,
    step0: float = 1.0,
) -> DescentResult:
    """Minimize a smooth convex ``fun`` returning ``(value, gradient)``.

    Stops once ``max|g| <= tol * (1 + |value|)``.
    """
    if precond is None:
        precond = lambda g: g  # noqa: E731
    x = np.array(x0, dtype=float)
    E, g = fun(x)
    d = precond(g)
    history = deque([E], maxlen=memory)
    alpha = step0
    it = 0
    res = float(np.max(np.abs(g))) if g.size else 0.0
    while True:
        if res <= tol * (1.0 + abs(E)):
            return DescentResult(x, E, g, res, it, True)
        if it >= max_iter:
            return DescentResult(x, E, g, res, it, False)
        it += 1
        gd = float(np.vdot(g, d))
        if gd <= 0:
            # preconditioned direction lost descent (rounding); fall back to -g
            d = g
            gd = float(np.vdot(g, g))
        ref = max(history)
        slack = 16 * np.finfo(float).eps * (1.0 + abs(ref))
        accepted = False
        for _ in range(60):
            x_new = x - alpha * d
            E_new, g_new = fun(x_new)
            if np.isfinite(E_new) and E_new <= ref - c1 * alpha * gd + slack:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return DescentResult(x, E, g, res, it, False)
        d_new = precond(g_new)
        y = g_new - g
        sy = -alpha * float(np.vdot(d, y))
        # metric BB1 step: <s, P s> / <s, y> with s = -alpha d and P s = -alpha g
        alpha_next = alpha * alpha * gd / sy if sy > 0 else 2.0 * alpha
        x, E, g, d = x_new, E_new, g_new, d_new
        history.append(E)
        alpha = float(np.clip(alpha_next, 1e-12, 1e12))
        res = float(np.max(np.abs(g))) if g.size else 0.0


def _fft_symbol(n: int, h: float) -> np.ndarray:
    k = np.arange(n)
    return (4.0 / (h * h)) * np.sin(np.pi * k / n) ** 2


def _dst_symbol(n: int, h: float) -> np.ndarray:
    # Dirichlet Laplacian on n - 1 interior nodes
    k = np.arange(1, n)
    return (4.0 / (h * h)) * np.sin(np.pi * k / (2 * n)) ** 2


def laplacian_preconditioner(n: int, dim: int, periodic: bool, weight: float):
    """Inverse of ``weight * (-Laplace_h)`` on the periodic cell or the interior nodes.

    The periodic inverse annihilates the constant mode.
    """
    from scipy import fft

    h = 1.0 / n
    if periodic:
        sym1 = _fft_symbol(n, h)
        sym = np.zeros((n,) * dim)
        for k in range(dim):
            shape = [1] * dim
            shape[k] = n
            sym = sym + sym1.reshape(shape)
        inv = np.zeros_like(sym)
        nz = sym > 0
        inv[nz] = 1.0 / (weight * sym[nz])

        def apply(g):
            return np.real(fft.ifftn(fft.fftn(g) * inv))

        return apply

    sym1 = _dst_symbol(n, h)
    m = n - 1
    sym = np.zeros((m,) * dim)
    for k in range(dim):
        shape = [1] * dim
        shape[k] = m
        sym = sym + sym1.reshape(shape)
    inv = 1.0 / (weight * sym)

    def apply(g):
        return fft.idstn(fft.dstn(g, type=1) * inv, type=1)

    return apply
