"""Angular-momentum coefficients and spherical Bessel functions.

All angular momenta are passed as *doubled* integers (``twice_j = 2 j``) so
that half-integers never go through floating point.  The 3j and 6j symbols
are evaluated with the Racah sums in exact rational arithmetic; only the
final square root is taken in double precision.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

import numpy as np

__all__ = [
    "AngularMomentum",
    "wigner3j",
    "wigner6j",
    "clebsch_gordan",
    "spherical_bessel",
    "spherical_bessel_derivative",
]


@dataclass(frozen=True)
class AngularMomentum:
    twice_j: int
    twice_m: int

    def __post_init__(self):
        if self.twice_j < 0:
            raise ValueError(f"negative angular momentum 2j={self.twice_j}")
        if abs(self.twice_m) > self.twice_j:
            raise ValueError(f"|m| > j for 2j={self.twice_j}, 2m={self.twice_m}")
        if (self.twice_j - self.twice_m) % 2:
            raise ValueError("j and m must both be integer or both half-integer")

    @property
    def j(self) -> float:
        return self.twice_j / 2

    @property
    def m(self) -> float:
        return self.twice_m / 2


def _triangle(ta: int, tb: int, tc: int) -> bool:
    """Triangle rule for doubled momenta, including integer perimeter."""
    if ta < 0 or tb < 0 or tc < 0:
        return False
    if (ta + tb + tc) % 2:
        return False
    return abs(ta - tb) <= tc <= ta + tb


def _delta_sq(ta: int, tb: int, tc: int) -> Fraction:
    # (a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)!, arguments doubled
    return Fraction(
        factorial((ta + tb - tc) // 2)
        * factorial((ta - tb + tc) // 2)
        * factorial((-ta + tb + tc) // 2),
        factorial((ta + tb + tc) // 2 + 1),
    )


def _signed_sqrt(total: Fraction, prefactor_sq: Fraction) -> float:
    if total == 0:
        return 0.0
    mag = sqrt(float(total * total * prefactor_sq))
    return mag if total > 0 else -mag


@lru_cache(maxsize=65536)
def wigner3j(tj1: int, tj2: int, tj3: int, tm1: int, tm2: int, tm3: int) -> float:
    """Wigner 3j symbol with doubled arguments.

    Returns 0 whenever a selection rule (triangle, projection sum, |m| <= j,
    parity of j - m) fails.
    """
    if tm1 + tm2 + tm3 != 0:
        return 0.0
    if not _triangle(tj1, tj2, tj3):
        return 0.0
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tj3, tm3)):
        if abs(tm) > tj or (tj - tm) % 2:
            return 0.0

    # integer combinations (all even by the checks above)
    k1 = (tj3 - tj2 + tm1) // 2
    k2 = (tj3 - tj1 - tm2) // 2
    k3 = (tj1 + tj2 - tj3) // 2
    k4 = (tj1 - tm1) // 2
    k5 = (tj2 + tm2) // 2
    tmin = max(0, -k1, -k2)
    tmax = min(k3, k4, k5)

    total = Fraction(0)
    for t in range(tmin, tmax + 1):
        den = (
            factorial(t)
            * factorial(k1 + t)
            * factorial(k2 + t)
            * factorial(k3 - t)
            * factorial(k4 - t)
            * factorial(k5 - t)
        )
        total += Fraction(-1 if t % 2 else 1, den)

    pref = _delta_sq(tj1, tj2, tj3) * (
        factorial((tj1 + tm1) // 2)
        * factorial((tj1 - tm1) // 2)
        * factorial((tj2 + tm2) // 2)
        * factorial((tj2 - tm2) // 2)
        * factorial((tj3 + tm3) // 2)
        * factorial((tj3 - tm3) // 2)
    )
    phase = (tj1 - tj2 - tm3) // 2
    if phase % 2:
        total = -total
    return _signed_sqrt(total, pref)


@lru_cache(maxsize=65536)
def wigner6j(tj1: int, tj2: int, tj3: int, tj4: int, tj5: int, tj6: int) -> float:
    """Wigner 6j symbol {j1 j2 j3; j4 j5 j6} with doubled arguments."""
    triads = ((tj1, tj2, tj3), (tj1, tj5, tj6), (tj4, tj2, tj6), (tj4, tj5, tj3))
    if not all(_triangle(*t) for t in triads):
        return 0.0

    a = [sum(t) // 2 for t in triads]
    b = [
        (tj1 + tj2 + tj4 + tj5) // 2,
        (tj2 + tj3 + tj5 + tj6) // 2,
        (tj3 + tj1 + tj6 + tj4) // 2,
    ]
    total = Fraction(0)
    for t in range(max(a), min(b) + 1):
        num = factorial(t + 1)
        den = 1
        for ai in a:
            den *= factorial(t - ai)
        for bi in b:
            den *= factorial(bi - t)
        total += Fraction(-num if t % 2 else num, den)

    pref = Fraction(1)
    for t in triads:
        pref *= _delta_sq(*t)
    return _signed_sqrt(total, pref)


def clebsch_gordan(tj1: int, tm1: int, tj2: int, tm2: int, tj: int, tm: int) -> float:
    """<j1 m1; j2 m2 | j m> (Condon-Shortley phase), doubled arguments."""
    w = wigner3j(tj1, tj2, tj, tm1, tm2, -tm)
    if w == 0.0:
        return 0.0
    phase = -1.0 if ((tj1 - tj2 + tm) // 2) % 2 else 1.0
    return phase * sqrt(tj + 1) * w


# ---------------------------------------------------------------------------
# spherical Bessel functions


def _series(L: int, x: np.ndarray) -> np.ndarray:
    # j_L(x) = x^L/(2L+1)!! * sum_k (-x^2/2)^k / (k! (2L+3)(2L+5)...(2L+2k+1))
    dfact = 1.0
    for i in range(1, 2 * L + 2, 2):
        dfact *= i
    term = np.ones_like(x)
    total = np.ones_like(x)
    h = -0.5 * x * x
    for k in range(1, 60):
        term = term * h / (k * (2 * L + 2 * k + 1))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return x**L / dfact * total


def _upward(L: int, x: np.ndarray) -> np.ndarray:
    s, c = np.sin(x), np.cos(x)
    j0 = s / x
    if L == 0:
        return j0
    j1 = s / (x * x) - c / x
    for ell in range(1, L):
        j0, j1 = j1, (2 * ell + 1) / x * j1 - j0
    return j1


def _downward(L: int, x: np.ndarray) -> np.ndarray:
    # Miller recurrence normalised with sum_l (2l+1) j_l^2 = 1
    start = L + 20 + int(np.sqrt(40.0 * (L + float(np.max(x)))))
    jp1 = np.zeros_like(x)
    jl = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    out = np.zeros_like(x)
    for ell in range(start, -1, -1):
        norm += (2 * ell + 1) * jl * jl
        if ell == L:
            out = jl.copy()
        if ell == 0:
            break
        jm1 = (2 * ell + 1) / x * jl - jp1
        jp1, jl = jl, jm1
        big = np.abs(jl) > 1e150
        if np.any(big):
            scale = np.where(big, 1e-150, 1.0)
            jl, jp1, norm, out = jl * scale, jp1 * scale, norm * scale**2, out * scale
    return out / np.sqrt(norm)


def spherical_bessel(L: int, x):
    """Spherical Bessel function of the first kind, j_L(x), for x >= 0.

    Series expansion for small arguments, upward recurrence from the closed
    forms when x >= L, and normalised downward recurrence in between.
    Accepts scalars or arrays.
    """
    if L < 0:
        raise ValueError("L must be non-negative")
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    out = np.empty_like(xa)

    small = xa * xa <= 2 * L + 3
    up = ~small & (xa >= L)
    down = ~small & ~up
    if np.any(small):
        out[small] = _series(L, xa[small])
    if np.any(up):
        out[up] = _upward(L, xa[up])
    if np.any(down):
        out[down] = _downward(L, xa[down])
    return float(out[0]) if scalar else out


def spherical_bessel_derivative(L: int, x):
    """d j_L / dx via (L j_{L-1} - (L+1) j_{L+1}) / (2L+1)."""
    if L == 0:
        return -spherical_bessel(1, x)
    return (L * spherical_bessel(L - 1, x) - (L + 1) * spherical_bessel(L + 1, x)) / (
        2 * L + 1
    )
