"""Physical constants (CODATA 2018) and unit conversions.

Every other module takes its numbers from here so that outputs are
bit-reproducible across runs and machines.
"""

ALPHA = 1.0 / 137.035999084          # fine-structure constant
HBAR_C_EV_NM = 197.3269804           # eV nm
ELECTRON_MASS_EV = 510998.95         # m_e c^2 in eV
BOHR_RADIUS_ANGSTROM = 0.529177210903
HARTREE_EV = 27.211386245988
HBAR_EV_S = 6.582119569e-16          # eV s
ATOMIC_UNIT_TIME_S = 2.4188843265857e-17
ATOMIC_UNIT_FIELD_V_PER_M = 5.14220674763e11
SPEED_OF_LIGHT_M_S = 299792458.0
VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m


def ev_to_rate(width_ev):
    """Convert an energy width in eV into a decay rate in s^-1."""
    return width_ev / HBAR_EV_S


def rate_to_ev(rate_per_s):
    return rate_per_s * HBAR_EV_S
