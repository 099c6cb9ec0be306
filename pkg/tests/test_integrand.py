import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orlhom import nfunc as nf
from orlhom.integrand import (
    CoefficientField,
    Integrand,
    check_convexity,
    check_growth,
    coefficient_from_spec,
    integrand_from_spec,
)


def builtin_integrands(dim):
    coeffs = [
        CoefficientField("constant", a0=2.5),
        CoefficientField("sine", alpha=2.0, beta=1.0),
        CoefficientField("laminate", a1=1.0, a2=4.0),
    ]
    if dim == 2:
        coeffs.append(CoefficientField("checkerboard", a1=1.0, a2=4.0))
    pots = [
        dict(potential="quadratic"),
        dict(potential="power", p=3.0),
        dict(potential="power", p=2.0),
        dict(potential="orlicz", nfunction=nf.power_log(2.0)),
        dict(potential="orlicz", nfunction=nf.power(3.0)),
    ]
    return [Integrand(c, **p) for c in coeffs for p in pots]


INTEGRANDS = {d: builtin_integrands(d) for d in (1, 2)}


def test_coefficient_values():
    lam = CoefficientField("laminate", a1=1.0, a2=4.0)
    assert lam(np.array([[0.25], [0.75], [1.25]])).tolist() == [1.0, 4.0, 1.0]
    chk = CoefficientField("checkerboard", a1=1.0, a2=4.0)
    pts = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
    assert chk(pts).tolist() == [1.0, 4.0, 4.0, 1.0]
    sine = CoefficientField("sine")
    assert sine(np.array([[0.25]]))[0] == pytest.approx(3.0)


def test_coefficient_validation():
    with pytest.raises(ValueError):
        CoefficientField("sine", alpha=1.0, beta=1.0)
    with pytest.raises(ValueError):
        CoefficientField("stripes")
    with pytest.raises(ValueError):
        CoefficientField("checkerboard")(np.array([[0.1]]))


def test_integrand_validation():
    c = CoefficientField("constant")
    with pytest.raises(ValueError):
        Integrand(c, potential="power", p=1.5)
    with pytest.raises(ValueError):
        Integrand(c, potential="orlicz")
    with pytest.raises(ValueError):
        Integrand(c, potential="custom")
    with pytest.raises(ValueError):
        Integrand(c, potential="cubic")


def test_potentials_closed_form():
    c = CoefficientField("constant", a0=2.0)
    xi = np.array([3.0, 4.0])
    y = np.zeros(2)
    assert Integrand(c).eval(y, xi) == pytest.approx(50.0)
    assert Integrand(c, potential="power", p=3.0).eval(y, xi) == pytest.approx(2.0 * 125.0 / 3.0)
    B = nf.power_log(2.0)
    assert Integrand(c, potential="orlicz", nfunction=B).eval(y, xi) == pytest.approx(2.0 * 25.0 * np.log(6.0), rel=1e-12)


def test_custom_potential():
    c = CoefficientField("constant")
    f = Integrand(c, potential="custom", value_fn=lambda x: np.sum(x**4, axis=-1), grad_fn=lambda x: 4 * x**3)
    assert f.eval(np.zeros(1), np.array([2.0])) == 16.0
    assert not f.even


def test_from_spec():
    f = integrand_from_spec({"coefficient": "laminate", "a1": 1.0, "a2": 4.0, "potential": "quadratic"})
    assert f.coefficient.kind == "laminate" and f.potential == "quadratic"
    assert coefficient_from_spec({"coefficient": "checkerboard-2d"}).kind == "checkerboard"
    g = integrand_from_spec({"coefficient": "sine", "potential": "orlicz"}, nf.power(3))
    assert g.nfunction is not None


def test_growth_check_passes_and_fails():
    f = Integrand(CoefficientField("laminate", a1=1.0, a2=4.0), potential="power", p=3.0)
    P = nf.power(3.0, coef=1.0 / 3.0)
    good = nf.GrowthConstants(c=1.0, c_prime=0.0, C=4.0, lower=P, upper=P)
    rep = check_growth(f, good, samples=500, dim=1, seed=1)
    assert rep.ok and rep.discontinuous_coefficient
    bad = nf.GrowthConstants(c=2.0, c_prime=0.0, C=4.0, lower=P, upper=P)
    rep = check_growth(f, bad, samples=500, dim=1, seed=1)
    assert not rep.ok and rep.lower_slack < 0


def test_convexity_check_flags_nonconvex_custom():
    c = CoefficientField("constant")
    bad = Integrand(c, potential="custom", value_fn=lambda x: np.cos(np.sum(x, axis=-1)), grad_fn=lambda x: -np.sin(x))
    assert not check_convexity(bad, samples=200, dim=1, seed=0).ok
    assert check_convexity(Integrand(c, potential="power", p=4.0), samples=200, dim=2, seed=0).ok


# ---------------------------------------------------------------- properties

seeds = st.integers(0, 2**32 - 1)


def _sample(seed, dim, rmin=0.1, rmax=10.0):
    r = np.random.default_rng(seed)
    y = r.uniform(-2.0, 3.0, dim)
    d = r.standard_normal(dim)
    d /= np.linalg.norm(d)
    xi = d * np.exp(r.uniform(np.log(rmin), np.log(rmax)))
    return r, y, xi


@given(seed=seeds, dim=st.sampled_from([1, 2]))
def test_zero_at_origin(seed, dim):
    _, y, _ = _sample(seed, dim)
    for f in INTEGRANDS[dim]:
        assert abs(f.eval(y, np.zeros(dim))) <= 1e-12
        assert np.all(np.abs(f.grad_xi(y, np.zeros(dim))) <= 1e-12)


@given(seed=seeds, dim=st.sampled_from([1, 2]))
def test_gradient_matches_central_differences(seed, dim):
    _, y, xi = _sample(seed, dim)
    for f in INTEGRANDS[dim]:
        g = f.grad_xi(y, xi)
        h = 1e-5 * max(1.0, np.linalg.norm(xi))
        fd = np.array([(f.eval(y, xi + h * e) - f.eval(y, xi - h * e)) / (2 * h) for e in np.eye(dim)])
        assert np.allclose(g, fd, rtol=1e-6, atol=1e-6 * np.max(np.abs(fd)))


@given(seed=seeds, dim=st.sampled_from([1, 2]), j=st.sampled_from([0, 1]), shift=st.integers(-3, 3))
def test_periodicity(seed, dim, j, shift):
    _, y, xi = _sample(seed, dim)
    e = np.zeros(dim)
    e[j % dim] = shift
    for f in INTEGRANDS[dim]:
        assert f.eval(y + e, xi) == f.eval(y, xi) or abs(f.eval(y + e, xi) - f.eval(y, xi)) <= 1e-12 * abs(f.eval(y, xi))


@given(seed=seeds, dim=st.sampled_from([1, 2]), t=st.floats(0.0, 1.0))
def test_convex_along_segments(seed, dim, t):
    r, y, xi = _sample(seed, dim)
    eta = r.standard_normal(dim) * 3
    for f in INTEGRANDS[dim]:
        mid = f.eval(y, t * xi + (1 - t) * eta)
        ends = t * f.eval(y, xi) + (1 - t) * f.eval(y, eta)
        assert mid <= ends + 1e-10 * (1 + abs(ends))
