"""Command-line front end: ``xrf structure|spectrum|linewidths|scan <config>``.

Exit status 0 on success, 2 for configuration problems and 3 when a
numerical stage fails (the stage is named on stderr).
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import constants as const
from .angular import wigner3j
from .config import ConfigError, Scenario, load_scenario
from .dynamics import NonUniqueSteadyState, build_liouvillian, steady_state, trapped_population
from .spectrum import (
    CorrelationFunction,
    SpectrumResult,
    analytic_linewidths,
    correlation,
    default_grid,
    find_peaks,
    oracle_sampling,
    power_spectrum,
    sideband_distance,
    spectrum_fft_oracle,
)
from .structure import (
    QuadratureError,
    multipole_reduced_me,
    parse_state,
    rabi_frequency,
    radial_orbital,
    rate_from_amplitude,
)

FMT = "%.12g"


class NumericalError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, str):
        return x
    return FMT % x


def _write_table(path: Path, header: list[str], columns: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("# " + "\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def worker_count() -> int:
    raw = os.environ.get("XRF_THREADS")
    if raw is None:
        return max(1, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"XRF_THREADS must be a positive integer, got {raw!r}")
    return n


# ---------------------------------------------------------------------------
# spectrum of one operating point


@dataclass
class PointResult:
    rho: np.ndarray
    corr: CorrelationFunction
    spectrum: SpectrumResult
    peaks: list
    flags: tuple


def solve_point(scen: Scenario, drives=None, grid=None) -> PointResult:
    """Steady state, correlation and spectrum for one set of drives."""
    drives = drives or scen.drives
    L = build_liouvillian(scen.scheme, drives)
    try:
        rho = steady_state(L)
    except NonUniqueSteadyState as exc:
        raise NumericalError("steady_state", str(exc)) from None
    try:
        corr = correlation(L, rho, scen.geometry)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("correlation", str(exc)) from None
    if grid is None:
        grid = default_grid(
            scen.scheme,
            drives.g31,
            drives.g21,
            n_points=scen.grid_points,
            corr=corr if scen.refine else None,
            detuning=drives.delta_x,
        )
    flags = []
    if corr.defective:
        # eigenvectors unreliable: fall back to the time-domain route
        tau_max, n = oracle_sampling(L, grid)
        spec = spectrum_fft_oracle(L, rho, scen.geometry, tau_max, n, grid=grid)
        flags.append("oracle_fallback")
        flags.extend(spec.flags)
    else:
        spec = power_spectrum(corr, grid)
    try:
        peaks = find_peaks(spec)
    except ValueError as exc:
        raise NumericalError("peaks", str(exc)) from None
    return PointResult(rho, corr, spec, peaks, tuple(flags))


def _linewidths(scen: Scenario, drives=None):
    drives = drives or scen.drives
    try:
        return analytic_linewidths(scen.scheme, drives.g31, drives.g21)
    except ValueError:
        return None


def _scheme_header(scen: Scenario) -> list[str]:
    s, d = scen.scheme, scen.drives
    head = [f"preset {scen.preset}"] if scen.preset else []
    head.append(
        "levels_eV omega31=%s omega21=%s gamma31=%s gamma32=%s gamma21=%s gamma_d=%s"
        % tuple(_fmt(v) for v in (s.omega31, s.omega21, s.gamma31, s.gamma32, s.gamma21, s.gamma_d))
    )
    head.append(
        "drives_eV g31=%s g21=%s delta_x=%s delta_o=%s"
        % tuple(_fmt(v) for v in (d.g31, d.g21, d.delta_x, d.delta_o))
    )
    head.append(f"band {scen.geometry.band}")
    return head


def run_scenario(scen: Scenario, out: Path) -> dict:
    """Write spectrum.tsv and summary.tsv; returns the paths."""
    res = solve_point(scen)
    spec = res.spectrum
    paths = {"spectrum": out / "spectrum.tsv", "summary": out / "summary.tsv"}
    # frequencies relative to omega31: laser carrier sits at -delta_x
    absc = spec.omega - scen.drives.delta_x
    _write_table(
        paths["spectrum"],
        _scheme_header(scen) + ["incoherent spectrum, coherent part listed in summary"],
        ["omega_f_minus_omega31_eV", "S_arb"],
        zip(absc, spec.density),
    )

    lw = _linewidths(scen)
    rows = [
        ("rho_11", res.rho[0, 0].real, "1"),
        ("rho_22", res.rho[1, 1].real, "1"),
        ("rho_33", res.rho[2, 2].real, "1"),
        ("coherent_weight", spec.coherent_weight, "arb"),
        ("coherent_position", spec.coherent_position - scen.drives.delta_x, "eV"),
        ("incoherent_C0", res.corr.total_c0 - res.corr.coherent, "arb"),
        ("R", lw.R if lw else None, "1"),
        ("G", lw.G if lw else None, "eV"),
        ("Gamma_C", lw.gamma_c if lw else None, "eV"),
        ("Gamma_SB", lw.gamma_sb if lw else None, "eV"),
        ("Gamma_SB_table", scen.gamma_sb_reference, "eV"),
        ("Ds0_4G", lw.sideband_distance if lw else None, "eV"),
        ("Ds_quadratic_coefficient", lw.quadratic_coefficient if lw else None, "eV"),
        ("n_peaks", float(len(res.peaks)), "1"),
        (
            "D_peaks",
            sideband_distance(res.peaks) if len(res.peaks) >= 2 else None,
            "eV",
        ),
    ]
    flags = res.flags + spec.flags
    with open(paths["summary"], "w", encoding="utf-8", newline="\n") as fh:
        for line in _scheme_header(scen):
            fh.write(f"# {line}\n")
        fh.write(f"# flags {','.join(sorted(set(flags))) or 'none'}\n")
        fh.write("# quantity\tvalue\tunit\n")
        for key, val, unit in rows:
            fh.write(f"{key}\t{_fmt(val)}\t{unit}\n")
        fh.write("# peak\tcenter_minus_omega31_eV\tfwhm_eV\theight_arb\tunder_resolved\n")
        for i, p in enumerate(res.peaks, 1):
            c = p.center - scen.drives.delta_x
            fh.write(
                f"peak_{i}\t{_fmt(c)}\t{_fmt(p.fwhm)}\t{_fmt(p.height)}\t{int(p.under_resolved)}\n"
            )
    return paths


# ---------------------------------------------------------------------------
# scans


def _map(fn, items):
    items = list(items)
    n = min(worker_count(), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def scan_detuning(scen: Scenario, out: Path) -> dict:
    """Density map over the x-ray detuning Delta = omega_x - omega31 plus D(Delta)."""
    deltas = scen.scan.deltas or tuple(float(x) for x in np.linspace(-3, 3, 61))
    g31w = scen.scheme.gamma31
    if not g31w > 0:
        raise ConfigError(f"{scen.source}: [levels] gamma31: detuning scan needs gamma31 > 0")
    base = replace(scen.drives, delta_x=0.0)
    # the uniform coarse grid of the Delta = 0 spectrum; its nodes are a subset of spectrum.tsv
    grid0 = default_grid(scen.scheme, base.g31, base.g21, n_points=scen.grid_points)

    def row(delta_units):
        delta = delta_units * g31w
        drives = replace(scen.drives, delta_x=-delta)
        res = solve_point(scen, drives)
        # fixed abscissa omega_f - omega31; density argument is relative to the laser
        if res.corr.defective:
            s_map = np.interp(grid0 - delta, res.spectrum.omega, res.spectrum.density)
        else:
            s_map = res.corr.density(grid0 - delta)
        d = sideband_distance(res.peaks) if len(res.peaks) >= 2 else None
        return s_map, d, len(res.peaks)

    rows = _map(row, deltas)
    paths = {"map": out / "scan_map.tsv", "distance": out / "scan_distance.tsv"}
    head = _scheme_header(scen) + ["Delta = omega_x - omega31; spectra on a common omega_f grid"]
    tiny = np.finfo(float).tiny

    def map_rows():
        for du, (s_map, _, _) in zip(deltas, rows):
            logs = np.log10(np.maximum(s_map, tiny))
            for w, ls in zip(grid0 / g31w, logs):
                yield du, w, ls

    _write_table(paths["map"], head, ["Delta_over_Gamma31", "omega_f_over_Gamma31", "log10_S"], map_rows())

    lw = _linewidths(scen, base)
    dist_rows = []
    for du, (_, d, npk) in zip(deltas, rows):
        ds = lw.distance(du * g31w) if lw else None
        dist_rows.append((du, d, ds, (d - lw.sideband_distance) if (d is not None and lw) else None, float(npk)))
    _write_table(
        paths["distance"],
        head,
        ["Delta_over_Gamma31", "D_eV", "Ds_formula_eV", "D_minus_4G_eV", "n_peaks"],
        dist_rows,
    )

    if scen.scan.g21_values:
        paths["g21"] = scan_g21(scen, out)
    return paths


def scan_g21(scen: Scenario, out: Path) -> Path:
    """Sideband width-to-distance ratio and detuning sensitivity versus g21."""
    g31w = scen.scheme.gamma31

    def row(g21):
        d0 = _with_g21(scen.drives, g21, 0.0)
        d1 = _with_g21(scen.drives, g21, -g31w)
        r0 = solve_point(scen, d0)
        r1 = solve_point(scen, d1)
        lw = analytic_linewidths(scen.scheme, d0.g31, g21)
        pk = sorted(r0.peaks, key=lambda p: p.center)
        fwhm = pk[-1].fwhm if len(pk) >= 2 else None
        D0 = sideband_distance(r0.peaks) if len(r0.peaks) >= 2 else None
        D1 = sideband_distance(r1.peaks) if len(r1.peaks) >= 2 else None
        ds0 = lw.sideband_distance
        return (
            g21,
            lw.R,
            lw.gamma_sb,
            ds0,
            lw.gamma_sb / ds0,
            fwhm,
            fwhm / ds0 if fwhm is not None else None,
            lw.distance(g31w) - ds0,
            D1 - D0 if None not in (D0, D1) else None,
            D0 - ds0 if D0 is not None else None,
        )

    rows = _map(row, scen.scan.g21_values)
    path = out / "scan_g21.tsv"
    _write_table(
        path,
        _scheme_header(scen) + ["ratio = Gamma_SB / Ds(0); Ds(0) = 4G"],
        [
            "g21_eV",
            "R",
            "Gamma_SB_formula_eV",
            "Ds0_eV",
            "ratio_formula",
            "sideband_fwhm_eV",
            "ratio_numeric",
            "Ds_Gamma31_minus_Ds0_formula_eV",
            "D_Gamma31_minus_D0_eV",
            "D0_minus_Ds0_eV",
        ],
        rows,
    )
    return path


def _with_g21(drives, g21, delta_x):
    return replace(drives, g21=g21, delta_x=delta_x)


# ---------------------------------------------------------------------------
# structure and closed-form reports


def _stretched_moment(amp, twice_ja, twice_jb) -> float:
    """|<a, m=j_a| q^J_p |b, m_b>| for the largest accessible component."""
    best = 0.0
    tJ = 2 * amp.J
    for tq in range(-tJ, tJ + 1, 2):
        tmb = twice_ja - tq
        if abs(tmb) <= twice_jb:
            best = max(best, abs(wigner3j(twice_ja, tJ, twice_jb, -twice_ja, tq, tmb)))
    return best * abs(amp.reduced_me)


def structure_report(scen: Scenario, out: Path) -> dict:
    spec = scen.structure
    if spec is None:
        raise ConfigError(f"{scen.source}: [structure]: section required for 'structure'")
    labels = [parse_state(s, spec.Z) for s in spec.states]
    orbitals = [radial_orbital(spec.Z, lb.n, lb.kappa) for lb in labels]
    paths = {"levels": out / "structure_levels.tsv", "transitions": out / "structure_transitions.tsv"}
    _write_table(
        paths["levels"],
        [f"Z {spec.Z}; Dirac-Coulomb point nucleus"],
        ["state", "energy_eV", "binding_eV"],
        [
            (lb.name, o.energy, o.binding)
            for lb, o in zip(labels, orbitals)
        ],
    )
    rows = []
    for i in range(len(orbitals)):
        for j in range(i + 1, len(orbitals)):
            a, b = orbitals[i], orbitals[j]
            if a.binding == b.binding:
                continue
            up, lo = (a, b) if a.binding < b.binding else (b, a)
            for m in spec.multipoles:
                J, lam = int(m[1:]), (1 if m[0] == "E" else 0)
                try:
                    amps = {
                        gauge: multipole_reduced_me(up, lo, J, lam, gauge)
                        for gauge in ("babushkin", "transverse")
                    }
                except QuadratureError as exc:
                    raise NumericalError("structure", f"{exc} (achieved {exc.achieved:.2e})") from None
                mb, mt = amps["babushkin"].reduced_me, amps["transverse"].reduced_me
                if mb == 0.0 and mt == 0.0:
                    continue
                rel = abs(mb - mt) / max(abs(mb), abs(mt))
                rate = rate_from_amplitude(amps["babushkin"], up.label.twice_j)
                g = None
                if spec.intensity is not None and m == "E1":
                    mu = _stretched_moment(amps["babushkin"], up.label.twice_j, lo.label.twice_j)
                    g = rabi_frequency(mu, spec.intensity)
                rows.append(
                    (up.label.name, lo.label.name, m, amps["babushkin"].photon_energy,
                     mb, mt, rel, rate, const.ev_to_rate(rate), g)
                )
    head = [f"Z {spec.Z}; reduced matrix elements in atomic units (e a0^J)"]
    if spec.intensity is not None:
        head.append(f"g_stretched for I = {_fmt(spec.intensity)} W/cm^2, E1 only")
    _write_table(
        paths["transitions"],
        head,
        ["upper", "lower", "multipole", "omega_eV", "me_babushkin_au", "me_transverse_au",
         "gauge_rel_diff", "width_eV", "rate_per_s", "g_stretched_eV"],
        rows,
    )
    return paths


def linewidths_report(scen: Scenario, out: Path) -> dict:
    lw = _linewidths(scen)
    if lw is None:
        raise NumericalError("linewidths", "both Rabi frequencies are zero")
    s = scen.scheme
    try:
        trapped = trapped_population(s)
    except ValueError:
        trapped = None
    rows = [
        ("R", lw.R, "1"),
        ("G", lw.G, "eV"),
        ("Gamma_C", lw.gamma_c, "eV"),
        ("Gamma_SB", lw.gamma_sb, "eV"),
        ("Gamma_SB_table", scen.gamma_sb_reference, "eV"),
        ("Gamma_SB_over_Ds0", lw.gamma_sb / lw.sideband_distance, "1"),
        ("Ds0_4G", lw.sideband_distance, "eV"),
        ("Ds_quadratic_coefficient", lw.quadratic_coefficient, "eV"),
        ("Ds_at_Gamma31", lw.distance(s.gamma31), "eV"),
        ("trapped_rho33_xray_only", trapped, "1"),
    ]
    path = out / "linewidths.tsv"
    _write_table(path, _scheme_header(scen), ["quantity", "value", "unit"], rows)
    return {"linewidths": path}


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {
    "structure": structure_report,
    "spectrum": run_scenario,
    "linewidths": linewidths_report,
    "scan": scan_detuning,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xrf", description="Resonance fluorescence of driven highly charged ions.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", nargs="?", help="scenario file (optional with --preset)")
    p.add_argument("--preset", help="tabulated scenario, overrides [scenario] preset")
    p.add_argument("--out", help="output directory, overrides [output] dir")
    p.add_argument("--grid-points", type=int, help="coarse spectrum grid size")
    p.add_argument("--seed", type=int, default=None, help="reserved; no stochastic paths")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is None and args.preset is None:
            raise ConfigError("a config file or --preset is required")
        scen = load_scenario(
            args.config, preset=args.preset, require_dynamics=args.command != "structure"
        )
        if args.grid_points is not None:
            if args.grid_points < 3:
                raise ConfigError("--grid-points must be at least 3")
            scen = replace(scen, grid_points=args.grid_points)
        out = Path(args.out) if args.out else scen.output_dir
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"[output] dir: cannot create {out}: {exc.strerror}") from None
        if not os.access(out, os.W_OK):
            raise ConfigError(f"[output] dir: {out} is not writable")
        worker_count()
        paths = COMMANDS[args.command](scen, out)
    except ConfigError as exc:
        print(f"xrf: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"xrf: numerical failure in stage {exc.stage}: {exc}", file=sys.stderr)
        return 3
    except (np.linalg.LinAlgError, FloatingPointError, QuadratureError) as exc:
        print(f"xrf: numerical failure in stage {args.command}: {exc}", file=sys.stderr)
        return 3
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
