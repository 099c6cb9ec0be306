"""Numerical tests of weak two-scale convergence.

A sequence ``u_eps`` is paired with oscillating separable test functions
``phi(x) psi(x/eps)`` and the pairings are compared with
``iint u_0(x, y) phi(x) psi(y) dx dy``.  The admissible test class is
replaced by a finite battery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .epsproblem import EpsSolution, Separable, fast_coordinates, periods
from .field import PeriodicGrid, ScalarField, forward_differences, gradient

__all__ = [
    "TestPair",
    "TwoScaleLimit",
    "TwoScaleReport",
    "GradientLimitReport",
    "default_battery",
    "pairing",
    "target",
    "check_weak_2s",
    "check_gradient_limit",
    "check_proposition1",
    "fit_slope",
]

_Y_REFERENCE = 1024


@dataclass(frozen=True)
class TestPair:
    """Separable test function ``phi(x) * psi(y)`` with closed-form factors.

    Both callables take coordinate arrays of shape ``(..., d)``.
    """

    __test__ = False  # not a pytest class

    label: str
    phi: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    psi: Callable[[np.ndarray], np.ndarray] = field(repr=False)


def default_battery() -> list[TestPair]:
    """phi in {1, x, x^2, cos(pi x)} times psi in {1, sin(2 pi y)}, acting on the first coordinate."""
    phis = [
        ("1", lambda x: np.ones(x.shape[:-1])),
        ("x", lambda x: x[..., 0]),
        ("x^2", lambda x: x[..., 0] ** 2),
        ("cos(pi x)", lambda x: np.cos(np.pi * x[..., 0])),
    ]
    psis = [
        ("1", lambda y: np.ones(y.shape[:-1])),
        ("sin(2 pi y)", lambda y: np.sin(2.0 * np.pi * y[..., 0])),
    ]
    return [TestPair(f"{pl} * {sl}", pf, sf) for pl, pf in phis for sl, sf in psis]


@dataclass(frozen=True, eq=False)
class TwoScaleLimit:
    """``u_0(x, y) = u(x) + sum_k phi_k(x) psi_k(y)``; ``u`` may be omitted (zero)."""

    u: ScalarField | None = None
    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.u is None and not self.terms:
            return
        if self.u is not None and self.u.grid.role != "domain":
            raise ValueError("u must live on a domain grid")


def pairing(u_eps: ScalarField, eps: float, t: TestPair) -> float:
    """``int u_eps(x) phi(x) psi(x/eps) dx`` by the rectangle rule over cells."""
    grid = u_eps.grid
    periods(eps, grid.n)
    x = grid.coordinates(cells=True)
    y = fast_coordinates(grid, eps, cells=True)
    return float(grid.cell_volume * np.sum(u_eps.cell_values() * t.phi(x) * t.psi(y)))


def _y_integral(grid: PeriodicGrid, values: np.ndarray) -> float:
    return float(grid.cell_volume * np.sum(values))


def target(u0: TwoScaleLimit, t: TestPair) -> float:
    """``iint (u(x) + u_1(x, y)) phi(x) psi(y) dx dy`` by tensor rectangle rules."""
    total = 0.0
    if u0.u is not None:
        g = u0.u.grid
        xint = float(g.cell_volume * np.sum(u0.u.cell_values() * t.phi(g.coordinates(cells=True))))
        yg = u0.terms[0].psi.grid if u0.terms else PeriodicGrid(g.dim, _Y_REFERENCE, "cell")
        total += xint * _y_integral(yg, t.psi(yg.coordinates()))
    for term in u0.terms:
        g = term.phi.grid
        xint = float(g.cell_volume * np.sum(term.phi.cell_values() * t.phi(g.coordinates(cells=True))))
        yg = term.psi.grid
        total += xint * _y_integral(yg, term.psi.values * t.psi(yg.coordinates()))
    return total


def fit_slope(eps: Sequence[float], defects: Sequence[float], floor: float = 0.0) -> float:
    """Least-squares slope of ``log(defect)`` against ``log(eps)`` over defects above ``floor``.

    Returns ``inf`` when fewer than two defects exceed the floor (nothing
    left to decay).
    """
    e = np.asarray(eps, dtype=float)
    dd = np.asarray(defects, dtype=float)
    keep = dd > floor
    if np.count_nonzero(keep) < 2:
        return float("inf")
    return float(np.polyfit(np.log(e[keep]), np.log(dd[keep]), 1)[0])


@dataclass
class TwoScaleReport:
    rows: list  # (test label, eps, pairing, target, defect)
    slopes: dict
    terminal: dict
    passed_tests: dict
    tol: float
    floor: float
    min_slope: float
    slope: float  # fitted on the worst defect per eps

    @property
    def passed(self) -> bool:
        return all(self.passed_tests.values())

    def defects(self, label: str) -> list[float]:
        return [r[4] for r in self.rows if r[0] == label]


def check_weak_2s(
    sequence: Sequence[tuple[float, ScalarField]],
    u0: TwoScaleLimit,
    tests: Sequence[TestPair] | None = None,
    tol: float = 0.05,
    floor: float | None = None,
    min_slope: float = 0.5,
) -> TwoScaleReport:
    """Pair every member of the sequence with every test and judge the defects.

    A test passes when its terminal defect is at most ``tol`` and its
    defects above ``floor`` (default ``tol / 10``) decay with fitted
    log-log slope above ``min_slope``.  Failures are reported, not raised.
    """
    tests = list(tests) if tests is not None else default_battery()
    eps_list = [float(e) for e, _ in sequence]
    if len(eps_list) < 2:
        raise ValueError("need at least two members in the sequence")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps must be strictly decreasing along the sequence")
    if floor is None:
        floor = 0.1 * tol
    rows, slopes, terminal, passed = [], {}, {}, {}
    worst = np.zeros(len(eps_list))
    for t in tests:
        tgt = target(u0, t)
        defs = []
        for i, (eps, u) in enumerate(sequence):
            pv = pairing(u, eps, t)
            dv = abs(pv - tgt)
            rows.append((t.label, eps, pv, tgt, dv))
            defs.append(dv)
            worst[i] = max(worst[i], dv)
        s = fit_slope(eps_list, defs, floor)
        slopes[t.label] = s
        terminal[t.label] = defs[-1]
        passed[t.label] = bool(defs[-1] <= tol and s > min_slope)
    return TwoScaleReport(
        rows=rows,
        slopes=slopes,
        terminal=terminal,
        passed_tests=passed,
        tol=tol,
        floor=floor,
        min_slope=min_slope,
        slope=fit_slope(eps_list, worst, floor),
    )


@dataclass
class GradientLimitReport:
    components: list  # one TwoScaleReport per gradient component
    scale: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.components)


def check_gradient_limit(
    solutions: Sequence[EpsSolution | tuple[float, ScalarField]],
    xi,
    corrector: ScalarField,
    tests: Sequence[TestPair] | None = None,
    rtol: float = 0.05,
) -> GradientLimitReport:
    """Gradients of eps-minimizers against ``xi + D_y u_1`` with an x-independent corrector.

    The per-component tolerance is ``rtol`` times the largest target
    magnitude over the battery.
    """
    tests = list(tests) if tests is not None else default_battery()
    seq = [(s.eps, s.minimizer) if isinstance(s, EpsSolution) else tuple(s) for s in solutions]
    if not seq:
        raise ValueError("no solutions given")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    grid = seq[0][1].grid
    ygrid = corrector.grid
    dpsi = forward_differences(ygrid, corrector.values)
    ones = ScalarField.constant(grid, 1.0)
    reports, scales = [], []
    for k in range(grid.dim):
        limit = TwoScaleLimit(
            u=ScalarField.constant(grid, xi[k]),
            terms=(Separable(ones, ScalarField(ygrid, dpsi[k])),),
        )
        scale = max(abs(target(limit, t)) for t in tests)
        comp_seq = [(eps, gradient(u).component(k)) for eps, u in seq]
        reports.append(check_weak_2s(comp_seq, limit, tests, tol=rtol * scale))
        scales.append(scale)
    return GradientLimitReport(reports, scales)


check_proposition1 = check_gradient_limit
