"""Scenario files.

An INI-style text file with the sections below; every section and key is
optional unless a preset is absent, in which case [levels] and [drives]
must describe the system completely.

    [scenario]
    preset = bi_fig1b          ; tabulated ion row, see xrf.presets
    units  = meV               ; default unit for bare energies (eV or meV)

    [levels]                   ; override or define the level scheme
    omega31 = 2788.1 eV
    omega21 = 797
    gamma31 = 7.2(1)           ; x(y) means x * 10^y
    gamma32 = 0
    gamma21 = 7.7(-12)
    gamma_d = 0

    [drives]                   ; per drive either g or intensity (+ mu)
    g31 = 8.3(1)
    intensity_o = 1(16)        ; W/cm^2
    mu21 = 0.02                ; projected moment, atomic units
    delta_x = 0
    delta_o = 0

    [detection]
    band = xray                ; or optical
    eta = 1.5707963267948966
    r = 1
    dipole = 1
    prefactor = no

    [grid]
    points = 4001
    refine = yes

    [scan]
    delta_min = -3             ; x-ray detuning omega_x - omega31, units of Gamma31
    delta_max = 3
    delta_steps = 61
    g21_min = 1(3)             ; optional log-spaced optical Rabi scan
    g21_max = 3(4)
    g21_steps = 10

    [structure]
    Z = 83
    states = 2s, 2p3/2
    multipoles = E1, M1, E2
    intensity = 1(16)          ; optional, W/cm^2

    [output]
    dir = out

Energies accept an explicit unit suffix (``797 meV``, ``2.7881 keV``).
With a preset, an intensity given without ``mu`` is converted with the
moment implied by the tabulated (g, I) pair of that preset.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import DriveSpec, LevelScheme
from .presets import MEV, Preset, get_preset
from .spectrum import DetectionGeometry
from .structure import field_amplitude_au, parse_state, rabi_frequency
from .constants import HARTREE_EV

_UNITS = {"ev": 1.0, "mev": MEV, "kev": 1e3}
_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_SHORTHAND = re.compile(rf"^({_NUMBER})\(([+-]?\d+)\)$")

SECTIONS = {
    "scenario": {"preset", "units"},
    "levels": {"omega31", "omega21", "gamma31", "gamma32", "gamma21", "gamma_d"},
    "drives": {
        "g31", "g21", "intensity_x", "intensity_o", "mu31", "mu21", "delta_x", "delta_o",
    },
    "detection": {"band", "eta", "r", "dipole", "prefactor"},
    "grid": {"points", "refine"},
    "scan": {"delta_min", "delta_max", "delta_steps", "g21_min", "g21_max", "g21_steps"},
    "structure": {"z", "states", "multipoles", "intensity"},
    "output": {"dir"},
}


class ConfigError(ValueError):
    """Invalid scenario file; the message names file, line and key."""


def parse_number(text: str) -> float:
    """Float from plain or x(y) notation: ``7.7(-12)`` -> 7.7e-12."""
    s = text.strip().replace(" ", "")
    m = _SHORTHAND.match(s)
    if m:
        s = f"{m.group(1)}e{m.group(2)}"
    try:
        value = float(s)
    except ValueError:
        raise ValueError(f"not a number: {text!r}") from None
    if not np.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


def parse_energy(text: str, default_unit: str = "eV") -> float:
    """Energy in eV from ``<number> [eV|meV|keV]``."""
    parts = text.split()
    unit = default_unit
    if len(parts) == 2:
        unit = parts[1]
    elif len(parts) != 1:
        raise ValueError(f"expected '<number> [unit]', got {text!r}")
    if unit.lower() not in _UNITS:
        raise ValueError(f"unknown energy unit {unit!r}")
    return parse_number(parts[0]) * _UNITS[unit.lower()]


@dataclass(frozen=True)
class ScanSpec:
    deltas: tuple = ()  # units of Gamma31
    g21_values: tuple = ()  # eV


@dataclass(frozen=True)
class StructureSpec:
    Z: int
    states: tuple
    multipoles: tuple = ("E1",)
    intensity: float | None = None


@dataclass(frozen=True)
class Scenario:
    scheme: LevelScheme
    drives: DriveSpec
    geometry: DetectionGeometry = DetectionGeometry()
    grid_points: int = 4001
    refine: bool = True
    scan: ScanSpec = ScanSpec()
    structure: StructureSpec | None = None
    output_dir: Path = Path("xrf_out")
    preset: str | None = None
    gamma_sb_reference: float | None = None  # eV, tabulated value if any
    source: str = "<preset>"


@dataclass
class _Reader:
    parser: configparser.ConfigParser
    path: str
    lines: list = field(default_factory=list)

    def where(self, section: str, key: str | None = None) -> str:
        current = None
        for i, raw in enumerate(self.lines, 1):
            text = raw.strip()
            if text.startswith("[") and text.endswith("]"):
                current = text[1:-1].strip().lower()
                if key is None and current == section:
                    return f"{self.path}:{i}"
            elif current == section and key is not None:
                name = re.split(r"[=:]", text, 1)[0].strip().lower()
                if name == key:
                    return f"{self.path}:{i}"
        return self.path

    def fail(self, section, key, msg):
        loc = self.where(section, key)
        label = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{loc}: {label}: {msg}")

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def get(self, section, key, conv=str, default=None):
        if not self.has(section, key):
            return default
        raw = self.parser.get(section, key)
        try:
            return conv(raw)
        except (ValueError, KeyError) as exc:
            self.fail(section, key, str(exc).strip("'\""))


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("yes", "true", "on", "1"):
        return True
    if t in ("no", "false", "off", "0"):
        return False
    raise ValueError(f"expected yes/no, got {text!r}")


def _int(text: str) -> int:
    v = parse_number(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _reader_from_text(text: str, path: str) -> _Reader:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=(";", "#"), comment_prefixes=(";", "#"), interpolation=None
    )
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        loc = f"{path}:{line}" if line else path
        first = str(exc).splitlines()[0]
        raise ConfigError(f"{loc}: {first}") from None
    reader = _Reader(parser, path, text.splitlines())
    for section in parser.sections():
        if section not in SECTIONS:
            reader.fail(section.lower(), None, f"unknown section (expected one of {', '.join(SECTIONS)})")
        for key in parser[section]:
            if key not in SECTIONS[section]:
                reader.fail(section, key, "unknown key")
    return reader


def _drive_coupling(rd: _Reader, units, which, preset: Preset | None):
    """Rabi frequency (eV) of drive ``which`` ('31' or '21')."""
    g_key, i_key, mu_key = f"g{which}", f"intensity_{'x' if which == '31' else 'o'}", f"mu{which}"
    has_g, has_i = rd.has("drives", g_key), rd.has("drives", i_key)
    if has_g and has_i:
        rd.fail("drives", i_key, f"give either {g_key} or {i_key}, not both")
    if rd.has("drives", mu_key) and not has_i:
        rd.fail("drives", mu_key, f"{mu_key} needs {i_key}")
    if has_g:
        return rd.get("drives", g_key, lambda t: parse_energy(t, units))
    if has_i:
        intensity = rd.get("drives", i_key, parse_number)
        if intensity < 0:
            rd.fail("drives", i_key, "intensity must be non-negative")
        mu = rd.get("drives", mu_key, parse_number)
        if mu is None:
            if preset is None:
                rd.fail("drives", i_key, f"{i_key} without a preset needs {mu_key}")
            mu = preset_moment(preset, which)
        return rabi_frequency(mu, intensity)
    if preset is None:
        rd.fail("drives", None, f"one of {g_key} or {i_key} is required")
    return (preset.g31_mev if which == "31" else preset.g21_mev) * MEV


def preset_moment(preset: Preset, which: str) -> float:
    """Projected moment (a.u.) implied by the preset's tabulated g and intensity."""
    if which == "31":
        g, intensity = preset.g31_mev * MEV, preset.intensity_x
    else:
        g, intensity = preset.g21_mev * MEV, preset.intensity_o
    if intensity <= 0:
        raise ValueError(f"preset {preset.name} has no drive on the {which} transition")
    return g / (field_amplitude_au(intensity) * HARTREE_EV)


def _scheme(rd: _Reader, units, preset: Preset | None) -> LevelScheme:
    base = preset.scheme() if preset is not None else None
    values = {}
    for key in SECTIONS["levels"]:
        v = rd.get("levels", key, lambda t: parse_energy(t, units))
        if v is None:
            if base is None:
                if key in ("omega31", "omega21", "gamma31"):
                    rd.fail("levels", key, "required without a preset")
                v = 0.0
            else:
                v = getattr(base, key)
        values[key] = v
    try:
        return LevelScheme(**values)
    except ValueError as exc:
        rd.fail("levels", None, str(exc))


def _geometry(rd: _Reader) -> DetectionGeometry:
    kw = {}
    band = rd.get("detection", "band")
    if band is not None:
        kw["band"] = band.strip().lower()
    for key in ("eta", "r", "dipole"):
        v = rd.get("detection", key, parse_number)
        if v is not None:
            kw[key] = v
    pre = rd.get("detection", "prefactor", _bool)
    if pre is not None:
        kw["include_prefactor"] = pre
    try:
        return DetectionGeometry(**kw)
    except ValueError as exc:
        rd.fail("detection", None, str(exc))


def _scan(rd: _Reader, units) -> ScanSpec:
    deltas = ()
    if any(rd.has("scan", k) for k in ("delta_min", "delta_max", "delta_steps")):
        lo = rd.get("scan", "delta_min", parse_number, -3.0)
        hi = rd.get("scan", "delta_max", parse_number, 3.0)
        steps = rd.get("scan", "delta_steps", _int, 61)
        if steps < 1 or hi < lo:
            rd.fail("scan", "delta_steps", "need delta_steps >= 1 and delta_max >= delta_min")
        deltas = tuple(float(x) for x in np.linspace(lo, hi, steps))
    g21 = ()
    if any(rd.has("scan", k) for k in ("g21_min", "g21_max", "g21_steps")):
        lo = rd.get("scan", "g21_min", lambda t: parse_energy(t, units))
        hi = rd.get("scan", "g21_max", lambda t: parse_energy(t, units))
        steps = rd.get("scan", "g21_steps", _int, 10)
        if lo is None or hi is None:
            rd.fail("scan", "g21_min", "g21 scan needs both g21_min and g21_max")
        if not 0 < lo <= hi or steps < 1:
            rd.fail("scan", "g21_steps", "need 0 < g21_min <= g21_max and g21_steps >= 1")
        g21 = tuple(float(x) for x in np.geomspace(lo, hi, steps))
    return ScanSpec(deltas, g21)


def _structure(rd: _Reader) -> StructureSpec | None:
    if not rd.parser.has_section("structure"):
        return None
    Z = rd.get("structure", "z", _int)
    if Z is None:
        rd.fail("structure", "z", "nuclear charge Z is required")
    states_txt = rd.get("structure", "states", str, "")
    states = tuple(s.strip() for s in states_txt.split(",") if s.strip())
    if len(states) < 2:
        rd.fail("structure", "states", "list at least two states, e.g. '1s, 2p3/2'")
    for s in states:
        try:
            parse_state(s, Z)
        except ValueError as exc:
            rd.fail("structure", "states", str(exc))
    mult = rd.get("structure", "multipoles", str, "E1")
    mult = tuple(m.strip().upper() for m in mult.split(",") if m.strip())
    for m in mult:
        if not re.fullmatch(r"[EM][1-9]", m):
            rd.fail("structure", "multipoles", f"bad multipole {m!r} (use E1, M1, E2, ...)")
    intensity = rd.get("structure", "intensity", parse_number)
    if intensity is not None and intensity < 0:
        rd.fail("structure", "intensity", "intensity must be non-negative")
    return StructureSpec(Z, states, mult, intensity)


def _reference_width(pre: Preset | None, scheme: LevelScheme, drives: DriveSpec):
    """Tabulated sideband width, only while the preset's own couplings are in use."""
    if pre is None or pre.g21_mev == 0:
        return None
    same = (
        scheme == pre.scheme()
        and drives.g31 == pre.g31_mev * MEV
        and drives.g21 == pre.g21_mev * MEV
    )
    return pre.gamma_sb_mev * MEV if same else None


def load_scenario(
    path=None, preset: str | None = None, text: str | None = None, require_dynamics: bool = True
) -> Scenario:
    """Read a scenario file (or ``text``); ``preset`` overrides [scenario] preset.

    With ``require_dynamics=False`` a file holding only a [structure]
    section is accepted and the scheme and drives are left as None.
    """
    if text is None:
        if path is None:
            text, path = "", "<preset>"
        else:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"{path}: cannot read: {exc.strerror}") from None
    rd = _reader_from_text(text, str(path or "<string>"))

    units = rd.get("scenario", "units", str, "eV").strip()
    if units.lower() not in _UNITS:
        rd.fail("scenario", "units", f"unknown unit {units!r}")
    name = preset or rd.get("scenario", "preset")
    pre = None
    if name:
        try:
            pre = get_preset(name.strip())
        except KeyError as exc:
            rd.fail("scenario", "preset", exc.args[0])

    if not require_dynamics and pre is None and not (
        rd.parser.has_section("levels") or rd.parser.has_section("drives")
    ):
        return Scenario(
            scheme=None,
            drives=None,
            structure=_structure(rd),
            output_dir=Path(rd.get("output", "dir", str, "xrf_out").strip()),
            source=str(path or "<string>"),
        )

    scheme = _scheme(rd, units, pre)
    try:
        g31 = _drive_coupling(rd, units, "31", pre)
        g21 = _drive_coupling(rd, units, "21", pre)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        rd.fail("drives", None, str(exc))
    dx = rd.get("drives", "delta_x", lambda t: parse_energy(t, units), 0.0)
    do = rd.get("drives", "delta_o", lambda t: parse_energy(t, units), 0.0)
    drives = DriveSpec(g31, g21, dx, do)

    points = rd.get("grid", "points", _int, 4001)
    if points < 3:
        rd.fail("grid", "points", "need at least 3 grid points")
    out = rd.get("output", "dir", str, "xrf_out")
    return Scenario(
        scheme=scheme,
        drives=drives,
        geometry=_geometry(rd),
        grid_points=points,
        refine=rd.get("grid", "refine", _bool, True),
        scan=_scan(rd, units),
        structure=_structure(rd),
        output_dir=Path(out.strip()),
        preset=pre.name if pre else None,
        gamma_sb_reference=_reference_width(pre, scheme, drives),
        source=str(path or "<string>"),
    )


__all__ = [
    "ConfigError",
    "Scenario",
    "ScanSpec",
    "StructureSpec",
    "load_scenario",
    "parse_energy",
    "parse_number",
    "preset_moment",
]
