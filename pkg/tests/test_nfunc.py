import math

import numpy as np
import pytest

from orlhom import nfunc as nf


def brute_force_conjugate(B, t, s_max, samples=2_000_001):
    s = np.linspace(0.0, s_max, samples)
    return float(np.max(s * t - B(s)))


def test_cube_conjugate_matches_brute_force():
    B = nf.power(3, coef=1.0 / 3.0)
    oracle = brute_force_conjugate(lambda s: s**3 / 3.0, 1.0, 3.0)
    assert abs(oracle - 2.0 / 3.0) < 1e-10
    assert nf.conjugate(B, 1.0) == pytest.approx(2.0 / 3.0, abs=1e-9)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.5])
@pytest.mark.parametrize("t", [0.1, 1.0, 7.0])
def test_power_conjugate_closed_form(p, t):
    # (t^p / p)~ = t^q / q with 1/p + 1/q = 1
    q = p / (p - 1.0)
    B = nf.power(p, coef=1.0 / p)
    assert nf.conjugate(B, t) == pytest.approx(t**q / q, rel=1e-9)


def test_quadratic_is_self_conjugate():
    Q = nf.quadratic()
    for t in [0.0, 0.3, 2.0, 50.0]:
        assert nf.conjugate(Q, t) == pytest.approx(t * t / 2.0, rel=1e-10, abs=1e-14)


def test_exponential_conjugate_closed_form():
    # (e^s - s - 1)~(t) = (1 + t) log(1 + t) - t
    E = nf.exponential()
    for t in [0.01, 1.0, 10.0, 1e3]:
        assert nf.conjugate(E, t) == pytest.approx((1 + t) * math.log1p(t) - t, rel=1e-9)


@pytest.mark.parametrize(
    "B", [nf.power(3), nf.power(2.5, coef=0.4), nf.power_log(2.0), nf.quadratic(), nf.exponential()], ids=lambda b: b.label
)
def test_double_conjugation(B):
    pair = nf.ConjugatePair.of(B)
    for t in [0.1, 1.0, 10.0]:
        assert nf.conjugate(pair.dual, t) == pytest.approx(float(B(t)), rel=1e-6)


@pytest.mark.parametrize("B", [nf.power(3), nf.power_log(1.5), nf.exponential()], ids=lambda b: b.label)
def test_young_equality_at_density(B):
    pair = nf.ConjugatePair.of(B)
    for s in np.geomspace(1e-2, 20.0, 25):
        t = float(B.density(s))
        slack = float(nf.young_slack(pair, s, t))
        assert abs(slack) <= 1e-8 * max(1.0, s * t)


def test_young_inequality_random(rng):
    pair = nf.ConjugatePair.of(nf.power_log(2.0))
    s = rng.uniform(0, 10, 300)
    t = rng.uniform(0, 50, 300)
    assert np.all(np.asarray(nf.young_slack(pair, s, t)) >= -1e-9 * (1 + s * t))


def test_conjugate_monotone_and_convex():
    B = nf.power_log(2.0)
    t = np.linspace(0.0, 20.0, 201)
    v = nf.conjugate(B, t)
    assert np.all(np.diff(v) >= -1e-12)
    assert np.all(v[:-2] + v[2:] - 2 * v[1:-1] >= -1e-9)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 6.0])
@pytest.mark.parametrize("rng_", [(0.0, 1.0), (1e-6, 1e6), (3.0, 4.0)])
def test_delta2_of_power_is_two_to_p(p, rng_):
    assert nf.delta2_estimate(nf.power(p), *rng_) == pytest.approx(2.0**p, rel=1e-12)


def test_delta2_exponential_blows_up():
    assert nf.delta2_estimate(nf.exponential(), 1e-2, 50.0) > 1e3


@pytest.mark.parametrize("B", [nf.power(3), nf.power(1.5), nf.power_log(1.0), nf.power_log(3.0)], ids=lambda b: b.label)
def test_chain_inequality(B):
    pair = nf.ConjugatePair.of(B)
    for t in np.geomspace(1e-3, 1e3, 100):
        a, b, c = nf.conjugate_chain(pair, float(t))
        assert a <= b * (1 + 1e-9) + 1e-300
        assert b <= c * (1 + 1e-12)


def test_equivalence_check():
    # 3 t^2 lies between t^2 and (2t)^2; t^2 log(1+t) outgrows every dilation of t^2
    B = nf.power(2, coef=3.0)
    Bp = nf.power(2)
    assert nf.equivalence_check(B, Bp, 1.0, 2.0, 1e-3, 1e3)
    assert not nf.equivalence_check(B, Bp, 1.0, 1.5, 1e-3, 1e3)
    assert not nf.equivalence_check(nf.power_log(2), Bp, 0.1, 10.0, 1e-3, 1e6)


def test_domain_and_family_errors():
    with pytest.raises(nf.DomainError):
        nf.power(2)(-1.0)
    with pytest.raises(nf.DomainError):
        nf.conjugate(nf.power(2), float("nan"))
    with pytest.raises(nf.InvalidNFunctionError):
        nf.power(1.0)
    with pytest.raises(nf.InvalidNFunctionError):
        nf.power_log(0.5)
    with pytest.raises(nf.InvalidNFunctionError):
        nf.from_spec({"family": "cosh"})
    with pytest.raises(nf.InvalidNFunctionError):
        nf.from_spec({"family": "power", "p": 2, "q": 3})


def test_linear_growth_has_unbounded_conjugate():
    lin = nf.custom(lambda t: 2.0 * np.asarray(t), lambda t: 2.0 + 0 * np.asarray(t), label="linear")
    with pytest.raises(nf.UnboundedConjugateError):
        nf.conjugate(lin, 3.0)


def test_from_spec_roundtrip():
    B = nf.from_spec({"family": "power", "p": 3, "coef": 0.5})
    assert float(B(2.0)) == pytest.approx(4.0)
    assert nf.from_spec({"family": "quadratic"})(3.0) == pytest.approx(4.5)


def test_growth_constants_validation():
    P = nf.power(2)
    with pytest.raises(ValueError):
        nf.GrowthConstants(0.0, 0.0, 1.0, P, P)
    with pytest.raises(ValueError):
        nf.GrowthConstants(1.0, -1.0, 1.0, P, P)
