"""Scenario presets for the Li-like 2s - 2p3/2 three-level schemes.

Widths and Rabi frequencies are stored in meV exactly as tabulated and
converted to eV on access.  The metastable decay 3 -> 2 is not tabulated;
each ion carries an assumed value obtained by splitting the 3 -> 1 width
between the two ground hyperfine sublevels with the hyperfine branching
factors (``assumed_gamma32``).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

from .dynamics import DriveSpec, LevelScheme
from .structure import HyperfineState, hyperfine_branching

MEV = 1e-3


@dataclass(frozen=True)
class IonData:
    name: str
    omega31_ev: float
    omega21_mev: float
    gamma31_mev: float
    gamma21_mev: float
    twice_I: int
    # (2F, 2M_F) of levels 1 and 2 (2s) and level 3 (2p3/2)
    level1: tuple[int, int]
    level2: tuple[int, int]
    level3: tuple[int, int]


IONS = {
    "Tl": IonData("Tl", 2236.5, 499.0, 6.6, 1.1e-12, 1, (0, 0), (2, 2), (2, 2)),
    "Bi": IonData("Bi", 2788.1, 797.0, 72.0, 7.7e-12, 9, (8, 8), (10, 10), (10, 10)),
    "U": IonData("U", 4459.4, 136.0, 24.0, 3.7e-14, 7, (6, 6), (8, 8), (8, 8)),
}


@lru_cache(maxsize=None)
def assumed_gamma32(ion: str) -> float:
    """Gamma31 * b(3->2)/b(3->1) in meV, b being E1 hyperfine branching fractions."""
    d = IONS[ion]
    upper = HyperfineState(d.twice_I, 3, *d.level3)
    to1 = hyperfine_branching(upper, HyperfineState(d.twice_I, 1, *d.level1), 1)
    to2 = hyperfine_branching(upper, HyperfineState(d.twice_I, 1, *d.level2), 1)
    return d.gamma31_mev * to2 / to1


@dataclass(frozen=True)
class Preset:
    name: str
    ion: str
    gamma_sb_mev: float  # tabulated narrowed sideband width
    g31_mev: float
    g21_mev: float
    intensity_x: float  # W/cm^2
    intensity_o: float

    @property
    def data(self) -> IonData:
        return IONS[self.ion]

    @property
    def gamma32_mev(self) -> float:
        return assumed_gamma32(self.ion)

    def scheme(self, gamma32_mev: float | None = None, gamma_d: float = 0.0) -> LevelScheme:
        d = self.data
        g32 = self.gamma32_mev if gamma32_mev is None else gamma32_mev
        return LevelScheme(
            omega21=d.omega21_mev * MEV,
            omega31=d.omega31_ev,
            gamma31=d.gamma31_mev * MEV,
            gamma32=g32 * MEV,
            gamma21=d.gamma21_mev * MEV,
            gamma_d=gamma_d,
        )

    def drives(self, delta_x: float = 0.0, delta_o: float = 0.0) -> DriveSpec:
        return DriveSpec(self.g31_mev * MEV, self.g21_mev * MEV, delta_x, delta_o)


TABLE_ROWS = (
    Preset("tl_1", "Tl", 7.1e-2, 1.8e2, 2.1e3, 1e12, 1e16),
    Preset("tl_2", "Tl", 7.2e-4, 1.8e2, 2.1e4, 1e12, 1e18),
    Preset("bi_1", "Bi", 9.7e-2, 8.3e1, 2.9e3, 5e11, 1e16),
    Preset("bi_2", "Bi", 1.9e-1, 1.2e3, 2.9e4, 1e14, 1e18),
    Preset("u_1", "U", 3.7e-2, 7.7e1, 2.8e3, 5e11, 1e16),
    Preset("u_2", "U", 1.3, 3.3e4, 1.9e5, 9e16, 5e19),
)

PRESETS = {p.name: p for p in TABLE_ROWS}
PRESETS["bi_fig1b"] = replace(PRESETS["bi_1"], name="bi_fig1b")
# x-ray drive alone: the optical coupling is switched off
PRESETS["bi_fig1a"] = replace(PRESETS["bi_1"], name="bi_fig1a", g21_mev=0.0, intensity_o=0.0)


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
