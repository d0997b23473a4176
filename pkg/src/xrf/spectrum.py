"""Fluorescence power spectra of the driven three-level system.

Two independent routes to the incoherent spectrum:

* ``correlation`` + ``power_spectrum`` diagonalise the Liouvillian and sum
  complex Lorentzians in closed form (quantum regression);
* ``spectrum_fft_oracle`` samples the correlation function in time with the
  propagator exp(L dtau) and takes a one-sided discrete Fourier transform,
  never diagonalising anything.

Frequencies are measured from the carrier of the chosen band (the laser
frequency, which coincides with the atomic line on resonance).  The elastic
(coherent) part is kept out of band as a single weight at the carrier.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import pi, sin

import numpy as np
from scipy import linalg, optimize

from .dynamics import DIM, LevelScheme, Liouvillian, sigma, vec

_BANDS = {"xray": (1, 3), "optical": (1, 2)}


@dataclass(frozen=True)
class DetectionGeometry:
    """Observation geometry.

    ``include_prefactor`` multiplies the correlation function by the squared
    far-field factor (omega^2 sin(eta) / (4 pi r))^2; off by default, so
    spectra come in arbitrary units with |dipole|^2 as the only scale.
    """

    eta: float = pi / 2
    r: float = 1.0
    band: str = "xray"
    dipole: float = 1.0
    include_prefactor: bool = False

    def __post_init__(self):
        if self.band not in _BANDS:
            raise ValueError(f"band must be one of {sorted(_BANDS)}")
        if not 0 <= self.eta <= pi:
            raise ValueError("eta must lie in [0, pi]")
        if not self.r > 0:
            raise ValueError("observation distance must be positive")

    def lowering(self) -> np.ndarray:
        return sigma(*_BANDS[self.band])

    def carrier(self, scheme: LevelScheme) -> float:
        return scheme.omega31 if self.band == "xray" else scheme.omega21

    def scale(self, scheme: LevelScheme) -> float:
        s = self.dipole**2
        if self.include_prefactor:
            w = self.carrier(scheme)
            s *= (w * w * sin(self.eta) / (4 * pi * self.r)) ** 2
        return s


@dataclass(frozen=True)
class CorrelationFunction:
    """Incoherent part C(tau) = sum_k c_k exp(lambda_k tau) plus elastic offset."""

    amplitudes: np.ndarray
    rates: np.ndarray
    coherent: float
    total_c0: float
    defective: bool = False

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.exp(np.multiply.outer(tau, self.rates)) @ self.amplitudes

    def full(self, tau):
        return self(tau) + self.coherent

    def density(self, omega):
        """(1/pi) Re sum_k c_k / (-lambda_k - i omega)."""
        w = np.asarray(omega, dtype=float)
        den = -self.rates[None, :] - 1j * w.reshape(-1, 1)
        out = (self.amplitudes[None, :] / den).sum(axis=1).real / pi
        return out.reshape(w.shape)

    def density_slope(self, omega):
        """d/d omega of ``density``."""
        w = np.asarray(omega, dtype=float)
        den = -self.rates[None, :] - 1j * w.reshape(-1, 1)
        out = (1j * self.amplitudes[None, :] / den**2).sum(axis=1).real / pi
        return out.reshape(w.shape)


def _fluctuation_vectors(rho_ss: np.ndarray, geometry: DetectionGeometry):
    d = geometry.lowering()
    dp = d.conj().T
    mean_dp = np.trace(rho_ss @ dp)
    x0 = vec(rho_ss @ dp) - mean_dp * vec(rho_ss)
    a = vec(d.T)
    coherent = abs(np.trace(d @ rho_ss)) ** 2
    total = np.trace(d @ rho_ss @ dp).real
    return a, x0, coherent, total


def correlation(
    L: Liouvillian, rho_ss: np.ndarray, geometry: DetectionGeometry | None = None
) -> CorrelationFunction:
    """Eigen-mode form of <D+(t) D-(t+tau)> via the quantum regression theorem."""
    geometry = geometry or DetectionGeometry()
    scale = geometry.scale(L.scheme)
    a, x0, coherent, total = _fluctuation_vectors(rho_ss, geometry)

    lam, v = linalg.eig(L.matrix)
    defective = np.linalg.cond(v) > 1e12
    y = np.linalg.solve(v, x0)
    amps = (a @ v) * y
    # drop the stationary mode; x0 is traceless so its weight is round-off
    keep = np.ones(lam.size, dtype=bool)
    keep[np.argmin(np.abs(lam))] = False
    amps, lam = amps[keep], lam[keep]

    inc0 = (a @ x0).real
    if abs(amps.sum() - inc0) > 1e-8 * max(abs(inc0), 1e-300) + 1e-14 * max(total, 0):
        defective = True
    order = np.lexsort((lam.real, lam.imag))
    return CorrelationFunction(
        amplitudes=amps[order] * scale,
        rates=lam[order],
        coherent=coherent * scale,
        total_c0=total * scale,
        defective=bool(defective),
    )


@dataclass
class SpectrumResult:
    omega: np.ndarray  # eV from the carrier
    density: np.ndarray  # 1/eV, arbitrary overall scale
    coherent_weight: float
    coherent_position: float = 0.0
    correlation: CorrelationFunction | None = field(default=None, repr=False)
    flags: tuple = ()

    def evaluate(self, omega):
        if self.correlation is None:
            return np.interp(omega, self.omega, self.density)
        return self.correlation.density(omega)


def power_spectrum(corr: CorrelationFunction, grid) -> SpectrumResult:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    flags = ("defective",) if corr.defective else ()
    return SpectrumResult(grid, corr.density(grid), corr.coherent, 0.0, corr, flags)


def default_grid(
    scheme: LevelScheme,
    g31: float,
    g21: float,
    n_points: int = 4001,
    corr: CorrelationFunction | None = None,
    detuning: float = 0.0,
    dt: float = 1.5e-3,
) -> np.ndarray:
    """Uniform grid over +-1.5 (2G + 5 Gamma31), refined around every mode.

    Every mode gets a patch centre + hwhm * sinh(k dt): uniform across the
    core and geometric in the tails, so the trapezoid rule keeps a local
    error of order dt^2 out to the grid edge whatever the line width.
    """
    big_g = float(np.hypot(g31, g21))
    half = 1.5 * (2 * big_g + 5 * scheme.gamma31 + abs(detuning))
    if half <= 0:
        half = 1.0
    grid = np.linspace(-half, half, n_points)
    if corr is None:
        return grid
    patches = [grid]
    heights = np.abs(corr.amplitudes) / np.maximum(-corr.rates.real, 1e-300)
    hmax = heights.max() if heights.size else 0.0
    for lam, h in zip(corr.rates, heights):
        hwhm = -lam.real
        centre = -lam.imag
        if hwhm <= 0 or h < 1e-14 * hmax or abs(centre) > half:
            continue
        reach = np.arcsinh(2 * half / hwhm)
        k = np.arange(-np.ceil(reach / dt), np.ceil(reach / dt) + 1)
        patches.append(centre + hwhm * np.sinh(k * dt))
    out = np.unique(np.concatenate(patches))
    return out[(out >= -half) & (out <= half)]


def integrated_power(spec: SpectrumResult) -> float:
    """Trapezoid integral of the sampled density plus analytic Lorentzian tails."""
    w, s = spec.omega, spec.density
    inside = float(np.sum(0.5 * (s[1:] + s[:-1]) * np.diff(w)))
    corr = spec.correlation
    if corr is None:
        return inside
    c, lam = corr.amplitudes, corr.rates
    gam = -lam.real
    ok = gam > 0
    c, lam, gam = c[ok], lam[ok], gam[ok]

    def antiderivative_tail(edge, side):
        u = edge + lam.imag
        # (Re c/pi) arctan(u/gamma) - (Im c / 2pi) ln(gamma^2 + u^2); the log terms
        # cancel at infinity because sum Im c = 0, hence the ln|edge|^2 offset
        atan_part = c.real / pi * (side * pi / 2 - np.arctan(u / gam))
        log_part = -c.imag / (2 * pi) * (2 * np.log(abs(edge)) - np.log(gam**2 + u**2))
        return side * float(np.sum(atan_part + log_part))

    return inside + antiderivative_tail(w[-1], +1) + antiderivative_tail(w[0], -1)


# ---------------------------------------------------------------------------
# time-domain oracle


def _derivative_moments(a, Lm, x):
    """a.x, a.Lx, a.L^2 x, a.L^3 x for the Euler-Maclaurin end corrections."""
    out = []
    for _ in range(4):
        out.append(a @ x)
        x = Lm @ x
    return out


def _end_correction(moments, omega, dtau):
    # f(tau) = a.exp(L tau)x e^{i w tau}:  f' = a.(L + iw)x,  f''' = a.(L + iw)^3 x
    m0, m1, m2, m3 = moments
    iw = 1j * np.asarray(omega)
    f1 = m1 + iw * m0
    f3 = m3 + 3 * iw * m2 + 3 * iw**2 * m1 + iw**3 * m0
    return dtau**2 / 12.0 * f1 - dtau**4 / 720.0 * f3


def oracle_sampling(L: Liouvillian, grid=None, decay: float = 40.0, step: float = 0.3):
    """(tau_max, n_samples) for ``spectrum_fft_oracle`` from the spectrum of L.

    tau_max covers ``decay`` e-foldings of the slowest non-stationary mode;
    the step resolves the fastest oscillation plus the largest grid
    frequency with ``step`` radians per sample.
    """
    lam = np.linalg.eigvals(L.matrix)
    big = float(np.max(np.abs(lam))) if lam.size else 0.0
    if big == 0.0:
        return 1.0, 2
    moving = lam[np.abs(lam) > 1e-12 * big]
    slow = float(np.min(-moving.real)) if moving.size else big
    slow = max(slow, 1e-15 * big)
    fast = float(np.max(np.abs(lam.imag)))
    if grid is not None and np.size(grid):
        fast += float(np.max(np.abs(grid)))
    dtau = step / max(fast, slow)
    n = 2 ** int(np.clip(np.ceil(np.log2(decay / slow / dtau)), 1, 60))
    return n * dtau, n


def spectrum_fft_oracle(
    L: Liouvillian,
    rho_ss: np.ndarray,
    geometry: DetectionGeometry | None = None,
    tau_max: float = 1.0,
    n_samples: int = 1024,
    grid=None,
    plateau_tol: float = 1e-6,
) -> SpectrumResult:
    """Spectrum from the sampled correlation function on tau_n = n tau_max / N.

    Without ``grid`` the samples C_n are generated by repeated application of
    the one-step propagator and transformed with an FFT (output on the FFT
    frequencies).  With ``grid`` the same one-sided trapezoid sum is
    evaluated at arbitrary frequencies by summing the geometric series of
    the propagator in closed form, which allows sample counts far beyond
    memory.  Both routes apply Euler-Maclaurin end corrections.
    """
    geometry = geometry or DetectionGeometry()
    if n_samples < 2 or n_samples & (n_samples - 1):
        raise ValueError("n_samples must be a power of two")
    if not tau_max > 0:
        raise ValueError("tau_max must be positive")
    scale = geometry.scale(L.scheme)
    a, x0, coherent, total = _fluctuation_vectors(rho_ss, geometry)
    dtau = tau_max / n_samples
    n = DIM * DIM
    trace_row = vec(np.eye(DIM))
    # deflate the stationary mode; the fluctuation vector is traceless
    deflate = np.outer(vec(rho_ss), trace_row)
    prop = linalg.expm(L.matrix * dtau) - deflate
    prop_end = linalg.expm(L.matrix * tau_max) - deflate
    x_end = prop_end @ x0

    flags = []
    plateau = abs(a @ x_end) / max(abs(a @ x0), 1e-300)
    if plateau > plateau_tol:
        flags.append("tau_max_insufficient")
        warnings.warn(
            f"correlation has not decayed at tau_max (|C(tau_max)/C(0)| = {plateau:.2e})",
            RuntimeWarning,
            stacklevel=2,
        )

    if grid is None:
        samples = np.empty(n_samples + 1, dtype=complex)
        block = min(n_samples, 4096)
        powers = np.empty((n, block), dtype=complex)
        powers[:, 0] = x0
        for k in range(1, block):
            powers[:, k] = prop @ powers[:, k - 1]
        jump = np.linalg.matrix_power(prop, block)
        cur = powers
        for start in range(0, n_samples, block):
            samples[start : start + block] = a @ cur
            cur = jump @ cur
        samples[n_samples] = a @ x_end
        weights = samples[:n_samples].copy()
        weights[0] *= 0.5
        # sum_n w_n e^{i w_m n dtau} with w_m = 2 pi m / tau_max
        summed = n_samples * np.fft.ifft(weights)
        omega = 2 * pi * np.fft.fftfreq(n_samples, d=dtau)
        z_end = np.exp(1j * omega * tau_max)  # equals 1 on the FFT grid
        summed = summed + 0.5 * samples[n_samples] * z_end
        order = np.argsort(omega)
        omega, summed, z_end = omega[order], summed[order], z_end[order]
    else:
        omega = np.asarray(grid, dtype=float)
        z = np.exp(1j * omega * dtau)
        z_end = np.exp(1j * omega * tau_max)
        # sum_{k<N} (z P)^k x0 = (I - z P)^{-1} (x0 - z^N P^N x0)
        mats = np.eye(n)[None, :, :] - z[:, None, None] * prop[None, :, :]
        rhs = x0[None, :] - z_end[:, None] * x_end[None, :]
        partial = np.linalg.solve(mats, rhs[..., None])[..., 0]
        summed = partial @ a - 0.5 * (a @ x0) + 0.5 * z_end * (a @ x_end)

    integral = dtau * summed
    integral += _end_correction(_derivative_moments(a, L.matrix, x0), omega, dtau)
    integral -= z_end * _end_correction(_derivative_moments(a, L.matrix, x_end), omega, dtau)
    density = integral.real * scale / pi
    return SpectrumResult(omega, density, coherent * scale, 0.0, None, tuple(flags))


# ---------------------------------------------------------------------------
# analytic line shapes


@dataclass(frozen=True)
class Linewidths:
    """Closed-form widths and sideband positions of the doubly driven scheme (eV)."""

    R: float
    G: float
    gamma_c: float
    gamma_sb: float
    sideband_distance: float  # 4G, secular limit on resonance
    quadratic_coefficient: float  # (G/2)(4R - 3R^2)

    def distance(self, delta: float) -> float:
        """Outer sideband distance for x-ray detuning delta, to order delta^2."""
        return self.sideband_distance + self.quadratic_coefficient * (delta / self.G) ** 2


def analytic_linewidths(scheme: LevelScheme, g31: float, g21: float) -> Linewidths:
    g_sq = g31 * g31 + g21 * g21
    if g_sq <= 0:
        raise ValueError("at least one Rabi frequency must be non-zero")
    R = g31 * g31 / g_sq
    G = np.sqrt(g_sq)
    g31w, g32w, g21w, gd = scheme.gamma31, scheme.gamma32, scheme.gamma21, scheme.gamma_d
    gamma_c = (g31w + g32w + gd) * R + g21w * (1 - R)
    gamma_sb = abs(
        1.5 * (g31w - gd / 3.0) * R + 0.5 * g32w * (R + R * R) + 1.5 * g21w * (1 - R)
    )
    return Linewidths(
        R=R,
        G=float(G),
        gamma_c=gamma_c,
        gamma_sb=gamma_sb,
        sideband_distance=4 * float(G),
        quadratic_coefficient=0.5 * float(G) * (4 * R - 3 * R * R),
    )


# ---------------------------------------------------------------------------
# peak extraction


@dataclass(frozen=True)
class PeakEstimate:
    center: float
    fwhm: float
    height: float
    under_resolved: bool = False


def _half_crossing(f, center, half, direction, start):
    """Locate f = half on one side of center, expanding the step geometrically."""
    d = start
    for _ in range(200):
        if f(center + direction * d) < half:
            lo, hi = sorted((center + direction * d / 2, center + direction * d))
            if f(center + direction * d / 2) < half:
                d /= 2
                continue
            return optimize.brentq(lambda w: f(w) - half, lo, hi, xtol=1e-15 * max(1, abs(center)), rtol=1e-14)
        d *= 2
    return None


def find_peaks(spec: SpectrumResult, rel_threshold: float = 1e-6) -> list[PeakEstimate]:
    """Local maxima above rel_threshold * max, with half-height widths.

    When the spectrum carries its correlation function the centre and the
    half-height points are located on the analytic line shape; otherwise
    they are interpolated from the grid and peaks sampled by fewer than
    eight points per FWHM are flagged as under-resolved.
    """
    w, s = spec.omega, spec.density
    if s.size < 3:
        return []
    smax = float(np.max(s))
    if smax <= 0:
        return []
    idx = np.where((s[1:-1] > s[:-2]) & (s[1:-1] >= s[2:]) & (s[1:-1] > rel_threshold * smax))[0] + 1
    peaks = []
    for i in idx:
        if spec.correlation is not None:
            f = spec.correlation.density
            slope = spec.correlation.density_slope
            lo, hi = w[i - 1], w[i + 1]
            if slope(lo) > 0 > slope(hi):
                center = optimize.brentq(lambda x: float(slope(x)), lo, hi, xtol=1e-15, rtol=1e-15)
            else:
                center = float(w[i])
            height = float(f(center))
            start = 0.25 * min(w[i + 1] - w[i], w[i] - w[i - 1])
            left = _half_crossing(f, center, height / 2, -1, start)
            right = _half_crossing(f, center, height / 2, +1, start)
            if left is None and right is None:
                continue
            if left is None:
                left = 2 * center - right
            if right is None:
                right = 2 * center - left
            peaks.append(PeakEstimate(center, right - left, height))
        else:
            # parabolic vertex and linear half-height interpolation on the grid
            x = w[i - 1 : i + 2]
            y = s[i - 1 : i + 2]
            coef = np.polyfit(x - w[i], y, 2)
            center = w[i] - coef[1] / (2 * coef[0]) if coef[0] < 0 else w[i]
            height = s[i]
            half = height / 2
            j = i
            while j > 0 and s[j] > half:
                j -= 1
            k = i
            while k < s.size - 1 and s[k] > half:
                k += 1
            left = np.interp(half, [s[j], s[j + 1]], [w[j], w[j + 1]])
            right = np.interp(half, [s[k], s[k - 1]], [w[k], w[k - 1]])
            fwhm = right - left
            under = (k - j) < 8
            peaks.append(PeakEstimate(float(center), float(fwhm), float(height), under))
    return peaks


def sideband_distance(peaks: list[PeakEstimate]) -> float:
    """Separation of the outermost pair of peaks."""
    if len(peaks) < 2:
        raise ValueError("need at least two peaks for a sideband distance")
    centers = sorted(p.center for p in peaks)
    return centers[-1] - centers[0]
