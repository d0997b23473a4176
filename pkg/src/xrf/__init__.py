"""Resonance fluorescence of x-ray and optically driven highly charged ions.

Submodules: ``angular`` (3j/6j symbols, spherical Bessel functions),
``structure`` (Dirac-Coulomb orbitals, multipole amplitudes, rates),
``dynamics`` (three-level Lindblad master equation), ``spectrum``
(fluorescence spectra and line-shape analysis), ``presets``, ``config``
and ``cli``.
"""
from .dynamics import DriveSpec, LevelScheme, build_liouvillian, steady_state
from .spectrum import (
    DetectionGeometry,
    analytic_linewidths,
    correlation,
    default_grid,
    find_peaks,
    power_spectrum,
    spectrum_fft_oracle,
)
from .structure import dirac_energy, multipole_reduced_me, radial_orbital, radiative_rate

__version__ = "0.1.0"

__all__ = [
    "DetectionGeometry",
    "DriveSpec",
    "LevelScheme",
    "analytic_linewidths",
    "build_liouvillian",
    "correlation",
    "default_grid",
    "dirac_energy",
    "find_peaks",
    "multipole_reduced_me",
    "power_spectrum",
    "radial_orbital",
    "radiative_rate",
    "spectrum_fft_oracle",
    "steady_state",
]
