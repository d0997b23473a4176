"""Dirac-Coulomb bound states, multipole transition amplitudes and rates.

Internally everything is in natural units (hbar = c = m_e = 1; lengths in
reduced Compton wavelengths).  The public surface speaks eV for energies and
atomic units for lengths and matrix elements.

Radial functions follow the large/small component convention

    psi = (1/r) [ G(r) Omega_{kappa m},  i F(r) Omega_{-kappa m} ]

with int (G^2 + F^2) dr = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import lgamma, log, exp, sqrt
from typing import Literal

import numpy as np
from scipy.special import roots_genlaguerre

from . import constants as const
from .angular import spherical_bessel, wigner3j, wigner6j

Gauge = Literal["transverse", "babushkin"]


class QuadratureError(RuntimeError):
    """Radial quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved relative tolerance {achieved:.3g})")
        self.achieved = achieved


def kappa_to_l(kappa: int) -> int:
    return kappa if kappa > 0 else -kappa - 1


def kappa_to_twice_j(kappa: int) -> int:
    return 2 * abs(kappa) - 1


_SPECTROSCOPIC = "spdfghiklmnoqrtuv"


@dataclass(frozen=True)
class BoundStateLabel:
    Z: int
    n: int
    kappa: int
    twice_m: int | None = None

    def __post_init__(self):
        if not 1 <= self.Z <= 137:
            raise ValueError(f"nuclear charge Z={self.Z} outside 1..137")
        if self.n < 1:
            raise ValueError("principal quantum number must be >= 1")
        if self.kappa == 0 or abs(self.kappa) > self.n:
            raise ValueError(f"kappa={self.kappa} invalid for n={self.n}")
        if abs(self.kappa) == self.n and self.kappa > 0:
            raise ValueError(f"kappa=+{self.n} does not exist for n={self.n}")
        if abs(self.kappa) == 1 and self.Z * const.ALPHA >= 1.0:
            raise ValueError(f"Z={self.Z} is supercritical for |kappa|=1")
        if self.twice_m is not None:
            tj = kappa_to_twice_j(self.kappa)
            if abs(self.twice_m) > tj or (tj - self.twice_m) % 2:
                raise ValueError(f"invalid projection 2m={self.twice_m} for 2j={tj}")

    @property
    def l(self) -> int:
        return kappa_to_l(self.kappa)

    @property
    def twice_j(self) -> int:
        return kappa_to_twice_j(self.kappa)

    @property
    def name(self) -> str:
        return f"{self.n}{_SPECTROSCOPIC[self.l]}{self.twice_j}/2"


def parse_state(text: str, Z: int) -> BoundStateLabel:
    """Parse spectroscopic labels like ``2p3/2`` or ``1s``."""
    s = text.strip().lower().replace("_", "")
    i = 0
    while i < len(s) and s[i].isdigit():
        i += 1
    n = int(s[:i])
    l = _SPECTROSCOPIC.index(s[i])
    rest = s[i + 1 :]
    if rest:
        twice_j = int(rest.split("/")[0])
    else:
        if l != 0:
            raise ValueError(f"state {text!r} needs an explicit j")
        twice_j = 1
    kappa = -(l + 1) if twice_j == 2 * l + 1 else l
    if twice_j not in (2 * l - 1, 2 * l + 1):
        raise ValueError(f"j={twice_j}/2 incompatible with l={l} in {text!r}")
    return BoundStateLabel(Z, n, kappa)


def _quantum_defects(Z: int, n: int, kappa: int):
    za = Z * const.ALPHA
    gamma = sqrt(kappa * kappa - za * za)
    nr = n - abs(kappa)
    big_n = sqrt(nr * nr + 2 * nr * gamma + kappa * kappa)
    return za, gamma, nr, big_n


def dirac_energy(Z: int, n: int, kappa: int) -> float:
    """Total Dirac-Coulomb energy in eV (rest mass included)."""
    BoundStateLabel(Z, n, kappa)
    _, gamma, nr, big_n = _quantum_defects(Z, n, kappa)
    return const.ELECTRON_MASS_EV * (nr + gamma) / big_n


def binding_energy(Z: int, n: int, kappa: int) -> float:
    """Binding energy m c^2 - E in eV, computed without cancellation."""
    za, gamma, nr, big_n = _quantum_defects(Z, n, kappa)
    eps = (nr + gamma) / big_n
    # 1 - eps = (1 - eps^2)/(1 + eps) and 1 - eps^2 = (Z alpha / N)^2
    return const.ELECTRON_MASS_EV * (za / big_n) ** 2 / (1.0 + eps)


def _hypergeometric_poly(a: int, b: float) -> np.ndarray:
    """Coefficients of the terminating 1F1(-a; b; x), a >= 0, lowest order first."""
    coeffs = np.empty(a + 1)
    coeffs[0] = 1.0
    for k in range(a):
        coeffs[k + 1] = coeffs[k] * (k - a) / ((b + k) * (k + 1))
    return coeffs


@dataclass(frozen=True)
class RadialOrbital:
    """Analytic Dirac-Coulomb radial functions of one bound state.

    ``G(r)`` and ``F(r)`` take radii in bohr; ``energy`` is the total energy
    in eV and ``binding`` the cancellation-free m c^2 - energy.  The
    natural-unit representation used for integrals is

        G = A_G * x^gamma * exp(-x/2) * P_G(x),   x = 2 lam r
    """

    label: BoundStateLabel
    energy: float
    binding: float
    gamma: float
    lam: float
    norm_g: float
    norm_f: float
    poly_g: np.ndarray = field(repr=False)
    poly_f: np.ndarray = field(repr=False)

    @property
    def normalization(self) -> float:
        return self.norm_g

    def _parts(self, r_nat):
        x = 2.0 * self.lam * np.asarray(r_nat, dtype=float)
        pg = np.polynomial.polynomial.polyval(x, self.poly_g)
        pf = np.polynomial.polynomial.polyval(x, self.poly_f)
        return x, pg, pf

    def reduced(self, r_nat):
        """G and F divided by the common factor x^gamma exp(-x/2)."""
        _, pg, pf = self._parts(r_nat)
        return self.norm_g * pg, self.norm_f * pf

    def radial_natural(self, r_nat):
        x, pg, pf = self._parts(r_nat)
        env = x**self.gamma * np.exp(-0.5 * x)
        return self.norm_g * env * pg, self.norm_f * env * pf

    def G(self, r):
        g, _ = self.radial_natural(np.asarray(r) / const.ALPHA)
        return g / sqrt(const.ALPHA)

    def F(self, r):
        _, f = self.radial_natural(np.asarray(r) / const.ALPHA)
        return f / sqrt(const.ALPHA)


@lru_cache(maxsize=1024)
def radial_orbital(Z: int, n: int, kappa: int) -> RadialOrbital:
    """Normalised analytic Dirac-Coulomb orbital for a point nucleus."""
    label = BoundStateLabel(Z, n, kappa)
    za, gamma, nr, big_n = _quantum_defects(Z, n, kappa)
    eps = (nr + gamma) / big_n
    lam = za / big_n
    b = 2.0 * gamma + 1.0

    m0 = _hypergeometric_poly(nr, b)
    if nr > 0:
        m1 = np.concatenate([_hypergeometric_poly(nr - 1, b), [0.0]])
    else:
        m1 = np.zeros(1)
    poly_g = (big_n - kappa) * m0 - nr * m1
    poly_f = -((big_n - kappa) * m0 + nr * m1)

    # (2 lam)^{3/2}/Gamma(2gamma+1) sqrt((1 +- eps) Gamma(2gamma+nr+1)/(4N(N-kappa) nr!)),
    # times 1/(2 lam) for G = r g
    log_common = (
        0.5 * log(2.0 * lam)
        - lgamma(b)
        + 0.5 * (lgamma(b + nr) - log(4.0 * big_n * (big_n - kappa)) - lgamma(nr + 1.0))
    )
    norm_g = exp(log_common) * sqrt(1.0 + eps)
    norm_f = exp(log_common) * sqrt((za / big_n) ** 2 / (1.0 + eps))  # sqrt(1 - eps)
    return RadialOrbital(
        label=label,
        energy=const.ELECTRON_MASS_EV * eps,
        binding=const.ELECTRON_MASS_EV * lam**2 / (1.0 + eps),
        gamma=gamma,
        lam=lam,
        norm_g=norm_g,
        norm_f=norm_f,
        poly_g=poly_g,
        poly_f=poly_f,
    )


# ---------------------------------------------------------------------------
# radial quadrature


@lru_cache(maxsize=256)
def _laguerre_rule(n: int, s: float):
    return roots_genlaguerre(n, s)


def _radial_integrate(a: RadialOrbital, b: RadialOrbital, integrand, rtol=1e-10):
    """Integrate integrand(r, Ga, Fa, Gb, Fb) against the common weight.

    The orbitals share the factor r^{gamma_a+gamma_b} exp(-(lam_a+lam_b) r),
    so generalized Gauss-Laguerre with that weight integrates the remaining
    polynomial-times-Bessel factor essentially exactly.  Convergence is
    checked by doubling the node count.
    """
    s = a.gamma + b.gamma
    beta = a.lam + b.lam
    scale = (2 * a.lam) ** a.gamma * (2 * b.lam) ** b.gamma / beta ** (s + 1.0)

    def rule(n):
        x, w = _laguerre_rule(n, s)
        r = x / beta
        ga, fa = a.reduced(r)
        gb, fb = b.reduced(r)
        vals = integrand(r, ga, fa, gb, fb)
        return scale * np.dot(w, vals), scale * np.dot(w, np.abs(vals))

    prev, _ = rule(24)
    for n in (40, 64, 96, 128):
        cur, mag = rule(n)
        err = abs(cur - prev)
        # second clause: cancellation-limited integrals stop at the round-off floor
        if err <= rtol * max(abs(cur), 1e-300) or err <= 64 * np.finfo(float).eps * mag:
            return cur
        prev = cur
    achieved = err / max(abs(cur), 1e-300)
    raise QuadratureError("radial integral did not converge", achieved)


def overlap(a: RadialOrbital, b: RadialOrbital) -> float:
    """int (Ga Gb + Fa Fb) dr."""
    return _radial_integrate(a, b, lambda r, ga, fa, gb, fb: ga * gb + fa * fb)


def radial_moment(a: RadialOrbital, b: RadialOrbital, power: int) -> float:
    """int r^power (Ga Gb + Fa Fb) dr in atomic units (bohr^power)."""
    val = _radial_integrate(a, b, lambda r, ga, fa, gb, fb: r**power * (ga * gb + fa * fb))
    return val * const.ALPHA**power


# ---------------------------------------------------------------------------
# multipole amplitudes


def reduced_c(kappa_a: int, kappa_b: int, J: int) -> float:
    """<kappa_a || C^J || kappa_b>, zero unless l_a + J + l_b is even."""
    la, lb = kappa_to_l(kappa_a), kappa_to_l(kappa_b)
    if (la + J + lb) % 2:
        return 0.0
    tja, tjb = kappa_to_twice_j(kappa_a), kappa_to_twice_j(kappa_b)
    phase = -1.0 if ((tja + 1) // 2) % 2 else 1.0
    return phase * sqrt((tja + 1) * (tjb + 1)) * wigner3j(tja, 2 * J, tjb, -1, 0, 1)


def _double_factorial(k: int) -> float:
    out = 1.0
    for i in range(k, 0, -2):
        out *= i
    return out


@dataclass(frozen=True)
class MultipoleAmplitude:
    J: int
    lam: int  # 0 magnetic, 1 electric
    gauge: str
    photon_energy: float  # eV
    reduced_me: float  # atomic units, e a0^J
    initial: BoundStateLabel
    final: BoundStateLabel

    @property
    def kind(self) -> str:
        return ("M" if self.lam == 0 else "E") + str(self.J)


def multipole_reduced_me(
    a: RadialOrbital,
    b: RadialOrbital,
    J: int,
    lam: int,
    gauge: Gauge = "babushkin",
    omega: float | None = None,
) -> MultipoleAmplitude:
    """Reduced matrix element <a || q_J^(lam) || b> of the relativistic multipole.

    Normalised so that the long-wavelength limit of the electric operator is
    r^J C^J; the magnetic operator is normalised the same way.  ``omega`` is
    the photon energy in eV, defaulting to |E_a - E_b|.
    """
    if J < 1:
        raise ValueError("multipole order J must be >= 1")
    if lam not in (0, 1):
        raise ValueError("lam must be 0 (magnetic) or 1 (electric)")
    if gauge not in ("transverse", "babushkin"):
        raise ValueError(f"unknown gauge {gauge!r}")
    if omega is None:
        # total energies carry ~511 keV; differencing them loses the fine structure
        omega = abs(b.binding - a.binding)
    if not omega > 0:
        raise ValueError("photon energy must be positive")

    if a.binding < b.binding:
        # the radial formulas below hold for bra = lower state; transpose
        swapped = multipole_reduced_me(b, a, J, lam, gauge, omega)
        phase = -1.0 if ((a.label.twice_j - b.label.twice_j) // 2) % 2 else 1.0
        return MultipoleAmplitude(
            J, lam, gauge, omega, phase * swapped.reduced_me, a.label, b.label
        )

    ka, kb = a.label.kappa, b.label.kappa
    k = omega / const.ELECTRON_MASS_EV  # natural units
    pref = _double_factorial(2 * J + 1) / k**J

    def result(val):
        return MultipoleAmplitude(
            J, lam, gauge, omega, val * const.ALPHA**J, a.label, b.label
        )

    tja, tjb = a.label.twice_j, b.label.twice_j
    if not (abs(tja - tjb) <= 2 * J <= tja + tjb):
        return result(0.0)

    if lam == 0:
        ang = reduced_c(-ka, kb, J)
        if ang == 0.0 or ka + kb == 0:
            return result(0.0)

        def f(r, ga, fa, gb, fb):
            return spherical_bessel(J, k * r) * (ga * fb + fa * gb)

        radial = _radial_integrate(a, b, f)
        return result(pref * ang * (ka + kb) / (J + 1) * radial)

    ang = reduced_c(ka, kb, J)
    if ang == 0.0:
        return result(0.0)
    dk = (ka - kb) / (J + 1)

    if gauge == "babushkin":

        def f(r, ga, fa, gb, fb):
            x = k * r
            jj = spherical_bessel(J, x)
            jn = spherical_bessel(J + 1, x)
            return jj * (ga * gb + fa * fb) + jn * (
                dk * (ga * fb + fa * gb) + (ga * fb - fa * gb)
            )

    else:

        def f(r, ga, fa, gb, fb):
            x = k * r
            jm = spherical_bessel(J - 1, x)
            jp = spherical_bessel(J + 1, x)
            # j' + j/x and J j/x written without division by x
            d_plus = ((J + 1) * jm - J * jp) / (2 * J + 1)
            j_over_x = (jm + jp) / (2 * J + 1)
            return -dk * d_plus * (ga * fb + fa * gb) + J * j_over_x * (ga * fb - fa * gb)

    radial = _radial_integrate(a, b, f)
    return result(pref * ang * radial)


def _rate_prefactor(J: int) -> float:
    return 2.0 * (2 * J + 1) * (J + 1) / (J * _double_factorial(2 * J + 1) ** 2)


def rate_from_amplitude(amp: MultipoleAmplitude, twice_j_initial: int) -> float:
    """Partial width in eV from a reduced amplitude, averaged over initial m."""
    k = amp.photon_energy / const.ELECTRON_MASS_EV
    q_nat = amp.reduced_me / const.ALPHA**amp.J
    width = (
        _rate_prefactor(amp.J)
        * const.ALPHA
        * k ** (2 * amp.J + 1)
        * q_nat**2
        / (twice_j_initial + 1)
    )
    return width * const.ELECTRON_MASS_EV


def radiative_rate(
    a: RadialOrbital,
    b: RadialOrbital,
    J: int,
    lam: int,
    omega: float | None = None,
    gauge: Gauge = "babushkin",
) -> float:
    """Partial radiative width (eV) of the a -> b multipole decay."""
    if a.binding >= b.binding:
        raise ValueError("radiative decay needs E_a > E_b")
    amp = multipole_reduced_me(a, b, J, lam, gauge, omega)
    return rate_from_amplitude(amp, a.label.twice_j)


# ---------------------------------------------------------------------------
# hyperfine geometry


@dataclass(frozen=True)
class HyperfineState:
    twice_I: int
    twice_j: int
    twice_F: int
    twice_MF: int

    def __post_init__(self):
        if not (abs(self.twice_I - self.twice_j) <= self.twice_F <= self.twice_I + self.twice_j):
            raise ValueError("F must satisfy |I - j| <= F <= I + j")
        if (self.twice_I + self.twice_j + self.twice_F) % 2:
            raise ValueError("I + j + F must be an integer")
        if abs(self.twice_MF) > self.twice_F or (self.twice_F - self.twice_MF) % 2:
            raise ValueError("invalid M_F")


def hyperfine_geometry(initial: HyperfineState, final: HyperfineState, J: int, q: int) -> float:
    """Amplitude factor of the F, M_F resolved decay initial -> final.

    Photon component ``q = M_F(initial) - M_F(final)``.  Normalised so that
    the squared factors summed over all final F', M_F' and q equal one; the
    partial width of a hyperfine channel is then (fine-structure width) x
    factor^2.  The nuclear spin is a spectator.
    """
    if initial.twice_I != final.twice_I:
        return 0.0
    if initial.twice_MF - final.twice_MF != 2 * q:
        return 0.0
    tI = initial.twice_I
    tja, tjb = initial.twice_j, final.twice_j
    tFa, tFb = initial.twice_F, final.twice_F
    tMa, tMb = initial.twice_MF, final.twice_MF
    three = wigner3j(tFb, 2 * J, tFa, -tMb, -2 * q, tMa)
    six = wigner6j(tjb, tFb, tI, tFa, tja, 2 * J)
    if three == 0.0 or six == 0.0:
        return 0.0
    phase = -1.0 if ((tFb - tMb + tjb + tI + tFa + 2 * J) // 2) % 2 else 1.0
    return phase * sqrt((tja + 1) * (tFa + 1) * (tFb + 1)) * three * six


def hyperfine_branching(initial: HyperfineState, final: HyperfineState, J: int) -> float:
    """Fraction of the fine-structure width going into one final sublevel."""
    q = (initial.twice_MF - final.twice_MF) // 2
    if (initial.twice_MF - final.twice_MF) % 2 or abs(q) > J:
        return 0.0
    return hyperfine_geometry(initial, final, J, q) ** 2


# ---------------------------------------------------------------------------
# field strength


def field_amplitude_au(intensity_w_cm2: float) -> float:
    """Peak electric field (atomic units) of a plane wave of given intensity."""
    if intensity_w_cm2 < 0:
        raise ValueError("intensity must be non-negative")
    i_si = intensity_w_cm2 * 1e4
    e_si = sqrt(2.0 * i_si / (const.VACUUM_PERMITTIVITY * const.SPEED_OF_LIGHT_M_S))
    return e_si / const.ATOMIC_UNIT_FIELD_V_PER_M


def rabi_frequency(mu_au: float, intensity_w_cm2: float) -> float:
    """Coupling g = mu * E(I) in eV, mu being the projected moment in atomic units."""
    return abs(mu_au) * field_amplitude_au(intensity_w_cm2) * const.HARTREE_EV
