import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from orlhom import nfunc as nf
from orlhom.cell import (
    CellProblem,
    ExtrapolationError,
    HomogenizedDensity,
    discrete_energy,
    energy_and_gradient,
    fhom_convexity_check,
    solve_cell,
    tabulate_fhom,
)
from orlhom.epsproblem import decreasing
from orlhom.field import ScalarField, cell_grid, integrate
from orlhom.integrand import CoefficientField, Integrand

LAMINATE = Integrand(CoefficientField("laminate", a1=1.0, a2=4.0))
SINE = Integrand(CoefficientField("sine", alpha=2.0, beta=1.0))
CHECKER = Integrand(CoefficientField("checkerboard", a1=1.0, a2=4.0))


def test_laminate_harmonic_mean():
    sol = solve_cell(CellProblem(LAMINATE, cell_grid(256), [1.0]))
    assert sol.converged
    assert sol.value == pytest.approx(1.6, rel=1e-10)


def test_laminate_errors_over_refinement():
    errs = [abs(solve_cell(CellProblem(LAMINATE, cell_grid(n), [1.0])).value - 1.6) for n in (32, 64, 128, 256)]
    # the discrete laminate reproduces the harmonic mean up to rounding at every n
    assert max(errs) < 1e-9
    assert decreasing(errs, floor=1e-9)


def test_sine_quadrature_oracle():
    inv_mean, _ = quad(lambda y: 1.0 / (2.0 + np.sin(2 * np.pi * y)), 0.0, 1.0, epsabs=1e-14)
    oracle = 1.0 / inv_mean
    assert oracle == pytest.approx(np.sqrt(3.0), rel=1e-12)
    sol = solve_cell(CellProblem(SINE, cell_grid(256), [1.0]))
    assert sol.value == pytest.approx(oracle, rel=1e-8)


def test_checkerboard_refinement_decreases():
    errs = [abs(solve_cell(CellProblem(CHECKER, cell_grid(n, 2), [1.0, 0.0])).value - 2.0) for n in (16, 32, 64)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01


def test_power_potential_laminate_closed_form():
    # 1D: f_hom(xi) = (<a^{-1/(p-1)}>)^{-(p-1)} |xi|^p / p
    p = 3.0
    f = Integrand(CoefficientField("laminate", a1=1.0, a2=4.0), potential="power", p=p)
    mean = 0.5 * (1.0 + 4.0 ** (-1.0 / (p - 1)))
    xi = 1.7
    oracle = mean ** (-(p - 1)) * xi**p / p
    sol = solve_cell(CellProblem(f, cell_grid(128), [xi]))
    assert sol.converged
    assert sol.value == pytest.approx(oracle, rel=1e-8)


def test_gradient_matches_finite_differences(rng):
    p = CellProblem(SINE, cell_grid(16), [0.7])
    u = rng.standard_normal(16)
    E, g = energy_and_gradient(p, u)
    h = 1e-6
    for i in range(16):
        e = np.zeros(16)
        e[i] = h
        fd = (energy_and_gradient(p, u + e)[0] - energy_and_gradient(p, u - e)[0]) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_nonconvergence_is_reported():
    sol = solve_cell(CellProblem(CHECKER, cell_grid(32, 2), [1.0, 0.0], max_iter=1))
    assert not sol.converged
    assert sol.iterations == 1


def test_problem_validation():
    with pytest.raises(ValueError):
        CellProblem(LAMINATE, cell_grid(8), [1.0, 2.0])
    with pytest.raises(ValueError):
        CellProblem(CHECKER, cell_grid(8), [1.0])
    from orlhom.field import domain_grid

    with pytest.raises(ValueError):
        CellProblem(LAMINATE, domain_grid(8), [1.0])


def test_table_quadratic_constant_and_interpolation():
    f = Integrand(CoefficientField("constant", a0=3.0))
    t = tabulate_fhom(f, cell_grid(16), (-2.0, 2.0), 5)
    assert t.complete
    assert np.allclose(t.values, 3.0 * t.axes[0] ** 2, atol=1e-12)
    assert t(np.array([0.5])) == pytest.approx(3.0 * 0.5)  # linear interpolation between 0 and 1
    assert t.gradient(np.array([1.5]))[0] == pytest.approx(3.0 * (4.0 - 1.0))
    with pytest.raises(ExtrapolationError):
        t(np.array([2.5]))
    assert fhom_convexity_check(t).ok


def test_table_2d_and_parallel_determinism():
    f = Integrand(CoefficientField("checkerboard", a1=1.0, a2=4.0), potential="power", p=3.0)
    serial = tabulate_fhom(f, cell_grid(16, 2), [(-1.0, 1.0), (0.0, 1.0)], [3, 2])
    threaded = tabulate_fhom(f, cell_grid(16, 2), [(-1.0, 1.0), (0.0, 1.0)], [3, 2], workers=3)
    assert serial.values.shape == (3, 2)
    assert np.array_equal(serial.values, threaded.values)
    assert serial(np.array([0.0, 0.0])) == pytest.approx(0.0, abs=1e-15)


def test_convexity_check_detects_concave_table():
    ax = (np.linspace(0, 1, 5),)
    ones = np.ones(5, dtype=bool)
    bad = HomogenizedDensity(ax, -ax[0] ** 2, ones, np.zeros(5), np.zeros(5))
    chk = fhom_convexity_check(bad)
    assert not chk.ok and chk.location[0] == 0


# ---------------------------------------------------------------- properties

seeds = st.integers(0, 2**32 - 1)


def random_problem(seed):
    r = np.random.default_rng(seed)
    dim = int(r.integers(1, 3))
    kinds = ["constant", "sine", "laminate"] + (["checkerboard"] if dim == 2 else [])
    kind = kinds[int(r.integers(len(kinds)))]
    a1, a2 = r.uniform(0.5, 5.0, 2)
    coef = CoefficientField(kind, a0=a1, alpha=a1 + 1.0, beta=r.uniform(-1.0, 1.0), a1=a1, a2=a2)
    pot = [dict(potential="quadratic"), dict(potential="power", p=float(r.uniform(2.0, 4.0))),
           dict(potential="orlicz", nfunction=nf.power_log(2.0))][int(r.integers(3))]
    f = Integrand(coef, **pot)
    n = 16 if dim == 2 else int(r.choice([16, 32, 64]))
    xi = r.standard_normal(dim) * r.uniform(0.2, 2.0)
    return CellProblem(f, cell_grid(n, dim), xi, tol=1e-10), r


@given(seed=seeds)
def test_cell_properties(seed):
    p, r = random_problem(seed)
    sol = solve_cell(p)
    assert sol.converged
    f = p.integrand
    W = float(f.W(p.xi))
    a = p.coefficients()
    # sandwich between Jensen's lower bound and the energy of u = 0
    upper = discrete_energy(p, ScalarField.constant(p.grid, 0.0))
    assert sol.value <= upper + 1e-12 * (1 + upper)
    assert sol.value >= a.min() * W - 1e-9 * (1 + W)
    # gauge: zero mean, and constants do not change the energy
    assert abs(integrate(sol.corrector)) <= 1e-12 * (1 + np.max(np.abs(sol.corrector.values)))
    shifted = sol.corrector + float(r.uniform(-5, 5))
    assert discrete_energy(p, shifted) == pytest.approx(sol.value, rel=1e-12, abs=1e-13)
    # certificate: directional derivatives along zero-mean directions vanish
    u = sol.corrector.values
    h = 1e-6
    for _ in range(20):
        v = r.standard_normal(p.grid.shape)
        v -= v.mean()
        v /= np.sqrt(p.grid.cell_volume * np.sum(v * v))
        dE = (energy_and_gradient(p, u + h * v)[0] - energy_and_gradient(p, u - h * v)[0]) / (2 * h)
        assert abs(dE) <= 1e-6
