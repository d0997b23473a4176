from math import pi

import numpy as np
import pytest
from scipy.linalg import expm

from xrf.dynamics import DriveSpec, LevelScheme, build_liouvillian, sigma, steady_state, vec
from xrf.presets import TABLE_ROWS, get_preset
from xrf.spectrum import (
    CorrelationFunction,
    DetectionGeometry,
    SpectrumResult,
    analytic_linewidths,
    correlation,
    default_grid,
    find_peaks,
    integrated_power,
    oracle_sampling,
    power_spectrum,
    sideband_distance,
    spectrum_fft_oracle,
)

BI = get_preset("bi_fig1b")


def two_level(gamma=0.1, g=1.0, delta=0.0, gamma_d=0.0):
    # level 2 stays empty: no drive and no feeding from level 3
    s = LevelScheme(1.0, 10.0, gamma, 0.0, 1.0, gamma_d)
    L = build_liouvillian(s, DriveSpec(g, 0.0, delta, 0.0))
    return s, L, steady_state(L)


def regression_direct(L, rho, tau, op=None):
    """<D+(0) D-(tau)> from the propagator, without any eigen-decomposition."""
    d = sigma(1, 3) if op is None else op
    x = vec(rho @ d.conj().T)
    out = []
    for t in np.atleast_1d(tau):
        y = expm(L.matrix * t) @ x
        out.append(np.trace(d @ y.reshape(3, 3, order="F")))
    return np.array(out)


class TestGeometry:
    def test_validation(self):
        with pytest.raises(ValueError):
            DetectionGeometry(band="uv")
        with pytest.raises(ValueError):
            DetectionGeometry(eta=4.0)
        with pytest.raises(ValueError):
            DetectionGeometry(r=0.0)

    def test_prefactor(self):
        s = BI.scheme()
        geo = DetectionGeometry(eta=pi / 6, r=2.0, include_prefactor=True, dipole=3.0)
        expect = 9.0 * (s.omega31**2 * 0.5 / (8 * pi)) ** 2
        assert geo.scale(s) == pytest.approx(expect, rel=1e-14)
        assert DetectionGeometry().scale(s) == 1.0

    def test_bands(self):
        s = BI.scheme()
        assert DetectionGeometry(band="optical").carrier(s) == s.omega21
        assert np.array_equal(DetectionGeometry().lowering(), sigma(1, 3))


class TestCorrelation:
    def test_equal_time(self):
        L = build_liouvillian(BI.scheme(), BI.drives())
        rho = steady_state(L)
        c = correlation(L, rho, DetectionGeometry(dipole=2.0))
        assert c.total_c0 == pytest.approx(4.0 * rho[2, 2].real, rel=1e-10)
        assert c(0.0).real + c.coherent == pytest.approx(c.total_c0, rel=1e-10)
        assert c.total_c0 >= c.coherent - 1e-10

    def test_plateau(self):
        _, L, rho = two_level(g=0.3)
        c = correlation(L, rho)
        assert abs(c.full(2000.0) - c.coherent) < 1e-12
        assert c.coherent == pytest.approx(abs(rho[0, 2]) ** 2, rel=1e-12)

    def test_rates_subset_of_spectrum(self):
        L = build_liouvillian(BI.scheme(), BI.drives())
        c = correlation(L, steady_state(L))
        ev = L.eigvals()
        assert c.rates.size <= 9
        assert np.all(c.rates.real <= 0)
        for lam in c.rates:
            assert np.min(np.abs(ev - lam)) < 1e-9 * np.max(np.abs(ev))

    def test_against_direct_propagation(self):
        for row in ("tl_1", "u_1"):
            p = get_preset(row)
            L = build_liouvillian(p.scheme(), p.drives(delta_x=0.01))
            rho = steady_state(L)
            c = correlation(L, rho)
            tau = np.array([0.0, 0.3, 7.0, 100.0])
            np.testing.assert_allclose(c.full(tau), regression_direct(L, rho, tau), rtol=1e-8, atol=1e-14)

    def test_optical_band(self):
        s = LevelScheme(1.0, 10.0, 0.1, 0.2, 0.05)
        L = build_liouvillian(s, DriveSpec(0.5, 0.3))
        rho = steady_state(L)
        c = correlation(L, rho, DetectionGeometry(band="optical"))
        tau = np.array([0.0, 1.0, 5.0])
        np.testing.assert_allclose(c.full(tau), regression_direct(L, rho, tau, sigma(1, 2)), rtol=1e-9, atol=1e-14)


class TestPowerSpectrum:
    def test_mollow_triplet(self):
        gamma, g = 0.01, 1.0
        s, L, rho = two_level(gamma, g)
        c = correlation(L, rho)
        spec = power_spectrum(c, default_grid(s, g, 0.0, corr=c))
        peaks = find_peaks(spec)
        assert len(peaks) == 3
        centers = sorted(p.center for p in peaks)
        step = np.max(np.diff(spec.omega))
        assert centers[0] == pytest.approx(-2 * g, abs=1e-3 * g)
        assert centers[2] == pytest.approx(2 * g, abs=1e-3 * g)
        assert abs(centers[0] + centers[2]) < step
        # textbook widths: sidebands 3 Gamma / 2, centre Gamma
        widths = [p.fwhm for p in sorted(peaks, key=lambda p: p.center)]
        assert widths[0] == pytest.approx(1.5 * gamma, rel=1e-3)
        assert widths[1] == pytest.approx(gamma, rel=1e-3)

    def test_bi_outer_sidebands(self):
        s, d = BI.scheme(), BI.drives()
        L = build_liouvillian(s, d)
        c = correlation(L, steady_state(L))
        peaks = find_peaks(power_spectrum(c, default_grid(s, d.g31, d.g21, corr=c)))
        G = np.hypot(d.g31, d.g21)
        assert len(peaks) == 3
        assert sideband_distance(peaks) == pytest.approx(4 * G, rel=2e-3)
        assert 4 * G == pytest.approx(11.6, rel=1e-3)

    def test_monotone_grid_required(self):
        _, L, rho = two_level()
        c = correlation(L, rho)
        with pytest.raises(ValueError):
            power_spectrum(c, [0.0, 1.0, 0.5])

    def test_coherent_part_off_grid(self):
        _, L, rho = two_level(g=0.05)
        c = correlation(L, rho)
        spec = power_spectrum(c, np.linspace(-1, 1, 101))
        assert spec.coherent_weight == pytest.approx(c.coherent)
        assert spec.coherent_position == 0.0

    @pytest.mark.parametrize("g", [0.02, 0.3, 3.0])
    def test_parseval_two_level(self, g):
        s, L, rho = two_level(0.1, g)
        c = correlation(L, rho)
        spec = power_spectrum(c, np.linspace(-20, 20, 40001))
        inc0 = c.total_c0 - c.coherent
        assert integrated_power(spec) == pytest.approx(inc0, rel=1e-6)

    def test_parseval_presets(self):
        for p in TABLE_ROWS:
            s, d = p.scheme(), p.drives()
            L = build_liouvillian(s, d)
            c = correlation(L, steady_state(L))
            spec = power_spectrum(c, default_grid(s, d.g31, d.g21, corr=c))
            assert integrated_power(spec) == pytest.approx(c.total_c0 - c.coherent, rel=1e-6)

    def test_non_negative(self):
        for p in TABLE_ROWS:
            s, d = p.scheme(), p.drives()
            L = build_liouvillian(s, d)
            c = correlation(L, steady_state(L))
            S = power_spectrum(c, default_grid(s, d.g31, d.g21, corr=c)).density
            assert S.min() >= -1e-12 * S.max()

    def test_weak_drive_line_shape(self):
        # fourth-order result: incoherent part ~ 1/(w^2 + Gamma^2/4)^2
        gamma, g = 0.1, 1e-4
        _, L, rho = two_level(gamma, g)
        c = correlation(L, rho)
        w = np.linspace(-1, 1, 2001)
        S = power_spectrum(c, w).density
        shape = 1 / (w**2 + gamma**2 / 4) ** 2
        shape *= S[1000] / shape[1000]
        np.testing.assert_allclose(S, shape, rtol=1e-5, atol=1e-6 * S.max())
        (peak,) = find_peaks(power_spectrum(c, w))
        assert peak.fwhm == pytest.approx(gamma * np.sqrt(np.sqrt(2) - 1), rel=1e-3)

    def test_dephasing_dominated_line(self):
        # with gamma_d >> Gamma the inelastic line is a Lorentzian of FWHM Gamma + 2 gamma_d
        gamma, gd = 0.01, 0.5
        _, L, rho = two_level(gamma, 1e-4, gamma_d=gd)
        c = correlation(L, rho)
        (peak,) = find_peaks(power_spectrum(c, np.linspace(-20, 20, 4001)))
        assert peak.fwhm == pytest.approx(gamma + 2 * gd, rel=1e-3)


class TestOracle:
    def test_fft_branch_matches(self):
        s, L, rho = two_level(0.2, 1.0)
        c = correlation(L, rho)
        tau_max, n = 400.0, 2**15
        o = spectrum_fft_oracle(L, rho, tau_max=tau_max, n_samples=n)
        band = np.abs(o.omega) < 5
        ref = c.density(o.omega[band])
        err = np.linalg.norm(o.density[band] - ref) / np.linalg.norm(ref)
        assert err < 1e-6
        assert o.flags == ()

    def test_grid_branch_matches(self):
        for row in ("bi_1", "tl_2"):
            p = get_preset(row)
            s, d = p.scheme(), p.drives()
            L = build_liouvillian(s, d)
            rho = steady_state(L)
            c = correlation(L, rho)
            grid = default_grid(s, d.g31, d.g21, corr=c)
            tau_max, n = oracle_sampling(L, grid)
            o = spectrum_fft_oracle(L, rho, tau_max=tau_max, n_samples=n, grid=grid)
            ref = c.density(grid)
            assert np.linalg.norm(o.density - ref) / np.linalg.norm(ref) < 1e-4

    def test_branches_agree(self):
        s, L, rho = two_level(0.2, 0.7, delta=0.1)
        o1 = spectrum_fft_oracle(L, rho, tau_max=300.0, n_samples=2**14)
        sel = slice(None, None, 97)
        o2 = spectrum_fft_oracle(L, rho, tau_max=300.0, n_samples=2**14, grid=o1.omega[sel])
        np.testing.assert_allclose(o2.density, o1.density[sel], atol=1e-9 * np.max(o1.density))

    def test_weak_drive_oracle(self):
        gamma = 0.1
        _, L, rho = two_level(gamma, 1e-4)
        o = spectrum_fft_oracle(L, rho, tau_max=800.0, n_samples=2**14)
        keep = np.abs(o.omega) < 2
        spec = SpectrumResult(o.omega[keep], o.density[keep], o.coherent_weight)
        (peak,) = find_peaks(spec)
        assert abs(peak.center) < 1e-3
        assert peak.fwhm == pytest.approx(gamma * np.sqrt(np.sqrt(2) - 1), rel=1e-2)

    def test_zero_drives(self):
        s = LevelScheme(1.0, 10.0, 0.1, 0.05, 0.01)
        L = build_liouvillian(s, DriveSpec(0.0, 0.0))
        rho = steady_state(L)
        o = spectrum_fft_oracle(L, rho, tau_max=100.0, n_samples=256)
        assert np.all(o.density == 0.0)
        spec = power_spectrum(correlation(L, rho), np.linspace(-1, 1, 11))
        assert np.all(spec.density == 0.0)
        assert find_peaks(spec) == []

    def test_short_window_flagged(self):
        _, L, rho = two_level(0.01, 1.0)
        with pytest.warns(RuntimeWarning):
            o = spectrum_fft_oracle(L, rho, tau_max=10.0, n_samples=256)
        assert "tau_max_insufficient" in o.flags

    @pytest.mark.parametrize("n", [0, 3, 1000])
    def test_power_of_two(self, n):
        _, L, rho = two_level()
        with pytest.raises(ValueError):
            spectrum_fft_oracle(L, rho, tau_max=1.0, n_samples=n)


class TestLinewidths:
    def test_tl_row(self):
        p = get_preset("tl_1")
        lw = analytic_linewidths(p.scheme(gamma32_mev=0.0), 180e-3, 2100e-3)
        R = 180.0**2 / (180.0**2 + 2100.0**2)
        assert lw.R == pytest.approx(R, rel=1e-14)
        # the tiny Gamma21 term is kept; it changes nothing at this precision
        assert lw.gamma_sb == pytest.approx(1.5 * 6.6e-3 * R, rel=1e-9)
        assert lw.gamma_sb == pytest.approx(7.1e-5, rel=0.03)

    def test_limits(self):
        s = LevelScheme(1.0, 10.0, 0.3, 0.2, 0.01, gamma_d=0.05)
        lw = analytic_linewidths(s, 1.0, 0.0)
        assert lw.R == 1.0
        assert lw.gamma_c == pytest.approx(0.3 + 0.2 + 0.05)
        lw = analytic_linewidths(s, 1e-9, 1e3)
        assert lw.gamma_sb == pytest.approx(1.5 * 0.01, rel=1e-9)
        assert lw.gamma_c == pytest.approx(0.01, rel=1e-9)

    def test_distance_expansion(self):
        lw = analytic_linewidths(BI.scheme(), 0.083, 2.9)
        assert lw.sideband_distance == pytest.approx(4 * np.hypot(0.083, 2.9))
        d = 0.072
        expect = 4 * lw.G + lw.G / 2 * (4 * lw.R - 3 * lw.R**2) * (d / lw.G) ** 2
        assert lw.distance(d) == pytest.approx(expect, rel=1e-15)

    def test_zero_drives(self):
        with pytest.raises(ValueError):
            analytic_linewidths(BI.scheme(), 0.0, 0.0)


class TestPeaks:
    def test_synthetic_lorentzian(self):
        gam = 1e-3
        w = np.linspace(-0.02, 0.02, 801)
        S = (gam / 2 / pi) / (w**2 + gam**2 / 4)
        (p,) = find_peaks(SpectrumResult(w, S, 0.0))
        assert p.fwhm == pytest.approx(gam, rel=1e-2)
        assert abs(p.center) < 1e-9
        assert not p.under_resolved

    def test_synthetic_with_modes(self):
        gam = 1e-3
        c = CorrelationFunction(np.array([1.0 + 0j]), np.array([-gam / 2 + 0.002j]), 0.0, 1.0)
        (p,) = find_peaks(power_spectrum(c, np.linspace(-0.01, 0.01, 201)))
        assert p.fwhm == pytest.approx(gam, rel=1e-10)
        assert p.center == pytest.approx(-0.002, abs=1e-12)

    def test_under_resolved_flag(self):
        gam = 1e-3
        w = np.linspace(-0.05, 0.05, 41)
        S = 1 / (w**2 + gam**2 / 4)
        (p,) = find_peaks(SpectrumResult(w, S, 0.0))
        assert p.under_resolved

    def test_threshold(self):
        w = np.linspace(-1, 1, 2001)
        S = np.exp(-((w - 0.5) ** 2) / 2e-3) + 1e-7 * np.exp(-((w + 0.5) ** 2) / 2e-3)
        assert len(find_peaks(SpectrumResult(w, S, 0.0))) == 1
        assert len(find_peaks(SpectrumResult(w, S, 0.0), rel_threshold=1e-9)) == 2

    def test_symmetric_mollow_centres(self):
        s, L, rho = two_level(0.05, 0.8)
        c = correlation(L, rho)
        grid = np.linspace(-3, 3, 3001)
        peaks = find_peaks(power_spectrum(c, grid))
        cs = sorted(p.center for p in peaks)
        assert abs(cs[0] + cs[-1]) < grid[1] - grid[0]

    def test_sideband_distance_needs_two(self):
        with pytest.raises(ValueError):
            sideband_distance([])


class TestDefaultGrid:
    def test_span(self):
        s = BI.scheme()
        g = default_grid(s, 0.083, 2.9)
        G = np.hypot(0.083, 2.9)
        assert g.size == 4001
        assert g[-1] == pytest.approx(1.5 * (2 * G + 5 * s.gamma31))

    def test_refinement_resolves_narrow_lines(self):
        s, d = BI.scheme(), BI.drives()
        L = build_liouvillian(s, d)
        c = correlation(L, steady_state(L))
        grid = default_grid(s, d.g31, d.g21, corr=c)
        lw = analytic_linewidths(s, d.g31, d.g21)
        for centre in (-2 * lw.G, 0.0, 2 * lw.G):
            inside = np.sum(np.abs(grid - centre) <= lw.gamma_sb / 2)
            assert inside >= 16
