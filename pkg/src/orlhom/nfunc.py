"""N-functions (Young functions) and their numerical calculus.

An N-function is stored as a pair of vectorized callables: the function
``B`` itself and its right-continuous density ``b = B'``.  Builtin families
have closed forms for both; custom ones must supply both maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "DomainError",
    "InvalidNFunctionError",
    "UnboundedConjugateError",
    "NFunction",
    "ConjugatePair",
    "GrowthConstants",
    "power",
    "power_log",
    "quadratic",
    "exponential",
    "custom",
    "from_spec",
    "conjugate",
    "conjugate_density",
    "conjugate_nfunction",
    "delta2_estimate",
    "conjugate_chain",
    "lemma21_check",
    "equivalence_check",
    "young_slack",
]

TAU_MIN = 1e-12
MAX_BRACKET_EXPONENT = 60


class DomainError(ValueError):
    """Argument outside the domain [0, inf) or not finite."""


class InvalidNFunctionError(ValueError):
    pass


class UnboundedConjugateError(ArithmeticError):
    """The supremum defining the conjugate could not be bracketed."""


def _check_domain(t):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"argument must be finite, got {t!r}")
    if np.any(arr < 0):
        raise DomainError(f"argument must be non-negative, got {t!r}")
    return arr


@dataclass(frozen=True, eq=False)
class NFunction:
    """A Young function ``B`` together with its density ``b``.

    Calling the object evaluates ``B``; :meth:`density` evaluates ``b``.
    Both accept scalars or arrays.  ``strict`` records whether ``b`` is known
    to be strictly increasing (used to pick the conjugation strategy).
    """

    label: str
    family: str
    B: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    b: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    params: Mapping[str, float] = field(default_factory=dict)
    strict: bool = True

    def __call__(self, t):
        arr = _check_domain(t)
        out = self.B(arr)
        return float(out) if np.ndim(out) == 0 else out

    def density(self, t):
        arr = _check_domain(t)
        out = self.b(arr)
        return float(out) if np.ndim(out) == 0 else out

    # unchecked fast paths for inner loops (callers guarantee t >= 0)
    def _eval(self, t):
        return self.B(t)

    def _dens(self, t):
        return self.b(t)


def power(p: float, coef: float = 1.0) -> NFunction:
    """``B(t) = coef * t**p`` with ``p > 1``."""
    if not p > 1:
        raise InvalidNFunctionError(f"power family needs p > 1, got {p}")
    if not coef > 0:
        raise InvalidNFunctionError(f"power family needs coef > 0, got {coef}")
    label = f"power(p={p:g})" if coef == 1.0 else f"power(p={p:g}, coef={coef:g})"
    return NFunction(
        label=label,
        family="power",
        B=lambda t: coef * np.power(t, p),
        b=lambda t: coef * p * np.power(t, p - 1.0),
        params={"p": float(p), "coef": float(coef)},
    )


def power_log(p: float) -> NFunction:
    """``B(t) = t**p * log(1 + t)`` with ``p >= 1``."""
    if not p >= 1:
        raise InvalidNFunctionError(f"power-log family needs p >= 1, got {p}")
    return NFunction(
        label=f"power-log(p={p:g})",
        family="power-log",
        B=lambda t: np.power(t, p) * np.log1p(t),
        b=lambda t: p * np.power(t, p - 1.0) * np.log1p(t) + np.power(t, p) / (1.0 + t),
        params={"p": float(p)},
    )


def quadratic() -> NFunction:
    """``B(t) = t**2 / 2``, the self-conjugate N-function."""
    return NFunction(
        label="quadratic",
        family="quadratic",
        B=lambda t: 0.5 * np.square(t),
        b=lambda t: np.asarray(t, dtype=float) * 1.0,
    )


def exponential() -> NFunction:
    """``B(t) = exp(t) - t - 1``; fails the doubling condition, kept for diagnostics."""
    return NFunction(
        label="exponential",
        family="exponential",
        B=lambda t: np.expm1(t) - t,
        b=lambda t: np.expm1(t),
    )


def custom(B, b, label: str = "custom", strict: bool = True) -> NFunction:
    return NFunction(label=label, family="custom", B=B, b=b, strict=strict)


_FAMILIES = {
    "power": (power, {"p", "coef"}),
    "power-log": (power_log, {"p"}),
    "quadratic": (quadratic, set()),
    "exponential": (exponential, set()),
}


def from_spec(spec: Mapping) -> NFunction:
    """Build a builtin N-function from a config mapping like ``{"family": "power", "p": 2.0}``."""
    spec = dict(spec)
    try:
        family = spec.pop("family")
    except KeyError:
        raise InvalidNFunctionError("N-function spec needs a 'family' key") from None
    if family not in _FAMILIES:
        raise InvalidNFunctionError(
            f"unknown N-function family {family!r}; expected one of {sorted(_FAMILIES)}"
        )
    factory, allowed = _FAMILIES[family]
    unknown = set(spec) - allowed
    if unknown:
        raise InvalidNFunctionError(f"unknown parameter(s) {sorted(unknown)} for family {family!r}")
    return factory(**{k: float(v) for k, v in spec.items()})


# --------------------------------------------------------------------------
# conjugation


def _maximizer(nf: NFunction, t: float) -> float:
    """Smallest ``s`` with ``b(s) >= t``, i.e. a maximizer of ``s*t - B(s)``."""
    if t == 0.0:
        return 0.0
    hi = 1.0
    k = 0
    while float(nf._dens(hi)) < t:
        k += 1
        if k > MAX_BRACKET_EXPONENT:
            raise UnboundedConjugateError(
                f"b(s) < {t} for all s <= 2**{MAX_BRACKET_EXPONENT}; {nf.label} is not superlinear"
            )
        hi *= 2.0
    lo = 0.0 if k == 0 else hi / 2.0
    # bisection keeps the invariant b(lo) < t <= b(hi); works for jumps in b
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if float(nf._dens(mid)) < t:
            lo = mid
        else:
            hi = mid
    return hi


def _golden_max(nf: NFunction, t: float, lo: float, hi: float) -> float:
    g = 0.5 * (math.sqrt(5.0) - 1.0)

    def phi(s):
        return s * t - float(nf._eval(s))

    a, c = lo, hi
    x1 = c - g * (c - a)
    x2 = a + g * (c - a)
    f1, f2 = phi(x1), phi(x2)
    for _ in range(300):
        if c - a <= 1e-15 * max(1.0, c):
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (c - a)
            f2 = phi(x2)
        else:
            c, x2, f2 = x2, x1, f1
            x1 = c - g * (c - a)
            f1 = phi(x1)
    return 0.5 * (a + c)


def _conjugate_scalar(nf: NFunction, t: float) -> float:
    if t == 0.0:
        return 0.0
    s = _maximizer(nf, t)
    val = s * t - float(nf._eval(s))
    if not nf.strict:
        # flat pieces of b: polish with a derivative-free search on the bracket
        s2 = _golden_max(nf, t, 0.5 * s, 2.0 * s + 1e-300)
        val = max(val, s2 * t - float(nf._eval(s2)))
    return max(val, 0.0)


def conjugate(nf: NFunction, t):
    """Complementary function ``sup_{s >= 0} (s t - B(s))``.

    Solved through the first-order condition ``b(s) = t`` on an expanding
    bracket ``[0, 2**k]``.
    """
    arr = _check_domain(t)
    if arr.ndim == 0:
        return _conjugate_scalar(nf, float(arr))
    return np.array([_conjugate_scalar(nf, float(v)) for v in arr.ravel()]).reshape(arr.shape)


def conjugate_density(nf: NFunction, t):
    """Density of the conjugate: the generalized inverse of ``b``."""
    arr = _check_domain(t)
    if arr.ndim == 0:
        return _maximizer(nf, float(arr))
    return np.array([_maximizer(nf, float(v)) for v in arr.ravel()]).reshape(arr.shape)


def conjugate_nfunction(nf: NFunction) -> NFunction:
    """The conjugate as a (numerically defined) N-function object."""
    return NFunction(
        label=f"conj[{nf.label}]",
        family="custom",
        B=lambda t: conjugate(nf, t),
        b=lambda t: conjugate_density(nf, t),
        strict=nf.strict,
    )


@dataclass(frozen=True)
class ConjugatePair:
    primal: NFunction
    dual: NFunction
    tol: float = 1e-10

    @classmethod
    def of(cls, nf: NFunction, tol: float = 1e-10) -> "ConjugatePair":
        return cls(nf, conjugate_nfunction(nf), tol)


def young_slack(pair: ConjugatePair, s, t):
    """``B(s) + B~(t) - s t``; non-negative by Young's inequality."""
    s = _check_domain(s)
    t = _check_domain(t)
    return pair.primal(s) + pair.dual(t) - s * t


@dataclass(frozen=True)
class GrowthConstants:
    """Constants of the two-sided bound ``c B'(|xi|) - c' <= f <= C (1 + B(|xi|))``."""

    c: float
    c_prime: float
    C: float
    lower: NFunction
    upper: NFunction

    def __post_init__(self):
        if not (self.c > 0 and self.C > 0):
            raise ValueError("growth constants c and C must be strictly positive")
        if self.c_prime < 0:
            raise ValueError("growth constant c' must be non-negative")


# --------------------------------------------------------------------------
# diagnostics


def delta2_estimate(nf: NFunction, t0: float, T: float, samples: int = 2001) -> float:
    """Sampled ``sup B(2t)/B(t)`` over ``[max(t0, 1e-12), T]`` (log grid)."""
    if not 0 <= t0 < T:
        raise DomainError(f"need 0 <= t0 < T, got t0={t0}, T={T}")
    lo = max(t0, TAU_MIN)
    t = np.geomspace(lo, T, samples)
    Bt = np.asarray(nf._eval(t), dtype=float)
    if np.any(Bt <= 0):
        bad = t[np.argmax(Bt <= 0)]
        raise InvalidNFunctionError(f"B({bad:g}) = 0 with t > 0; {nf.label} is not an N-function")
    return float(np.max(np.asarray(nf._eval(2.0 * t), dtype=float) / Bt))


def conjugate_chain(pair: ConjugatePair, t: float) -> tuple[float, float, float]:
    """Return ``(B~(b(t)), t b(t), B(2t))``, which should be non-decreasing."""
    if not t > 0:
        raise DomainError(f"need t > 0, got {t}")
    bt = pair.primal.density(t)
    return float(pair.dual(bt)), float(t * bt), float(pair.primal(2.0 * t))


def equivalence_check(
    B: NFunction,
    Bp: NFunction,
    k1: float,
    k2: float,
    t0: float,
    T: float,
    samples: int = 1001,
) -> bool:
    """Two-sided dilation equivalence ``Bp(k1 t) <= B(t) <= Bp(k2 t)`` on a log sample."""
    if not (0 < k1 <= k2):
        raise ValueError(f"need 0 < k1 <= k2, got k1={k1}, k2={k2}")
    t = np.geomspace(max(t0, TAU_MIN), T, samples)
    Bt = np.asarray(B._eval(t))
    slack = 1e-12 * np.maximum(1.0, np.abs(Bt))
    return bool(
        np.all(np.asarray(Bp._eval(k1 * t)) <= Bt + slack)
        and np.all(Bt <= np.asarray(Bp._eval(k2 * t)) + slack)
    )


lemma21_check = conjugate_chain
