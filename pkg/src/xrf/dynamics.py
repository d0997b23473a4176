"""Driven, damped three-level master equation in the double rotating frame.

Levels: 1 ground, 2 metastable partner (optical drive 1<->2), 3 upper state
(x-ray drive 1<->3).  Decay channels 3->1, 3->2 and 2->1.  The x-ray
dephasing rate is added to the decay of the 1-3 coherence only.

Density matrices are vectorised column-major (``rho.flatten(order="F")``),
so that vec(A rho B) = (B^T kron A) vec(rho).  Basis index i (0-based)
corresponds to level i + 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.linalg import expm

DIM = 3


class NonUniqueSteadyState(RuntimeError):
    """The Liouvillian has more than one stationary state."""


@dataclass(frozen=True)
class LevelScheme:
    """Energies and widths in eV."""

    omega21: float
    omega31: float
    gamma31: float
    gamma32: float = 0.0
    gamma21: float = 0.0
    gamma_d: float = 0.0

    def __post_init__(self):
        for name in ("gamma31", "gamma32", "gamma21", "gamma_d"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.omega31 > self.omega21 > 0:
            raise ValueError("need omega31 > omega21 > 0")

    @property
    def gamma13(self) -> float:
        """Decay rate of the 1-3 coherence, dephasing included."""
        return 0.5 * (self.gamma31 + self.gamma32) + self.gamma_d


@dataclass(frozen=True)
class DriveSpec:
    """Rabi couplings and detunings (eV); delta = atomic - laser frequency."""

    g31: float
    g21: float
    delta_x: float = 0.0
    delta_o: float = 0.0

    def __post_init__(self):
        for v in (self.g31, self.g21, self.delta_x, self.delta_o):
            if not np.isfinite(v):
                raise ValueError("drive parameters must be finite")


def sigma(a: int, b: int) -> np.ndarray:
    """|a><b| with 1-based level labels."""
    m = np.zeros((DIM, DIM), dtype=complex)
    m[a - 1, b - 1] = 1.0
    return m


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).flatten(order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape((DIM, DIM), order="F")


def hamiltonian(drives: DriveSpec) -> np.ndarray:
    """Time-independent Hamiltonian in the frame rotating with both lasers."""
    h = drives.delta_x * sigma(3, 3) + drives.delta_o * sigma(2, 2)
    h += drives.g31 * (sigma(3, 1) + sigma(1, 3))
    h += drives.g21 * (sigma(2, 1) + sigma(1, 2))
    return h


def jump_operators(scheme: LevelScheme):
    return [
        np.sqrt(scheme.gamma31) * sigma(1, 3),
        np.sqrt(scheme.gamma32) * sigma(2, 3),
        np.sqrt(scheme.gamma21) * sigma(1, 2),
    ]


@dataclass(frozen=True)
class Liouvillian:
    matrix: np.ndarray
    scheme: LevelScheme
    drives: DriveSpec

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)


def build_liouvillian(scheme: LevelScheme, drives: DriveSpec) -> Liouvillian:
    eye = np.eye(DIM)
    h = hamiltonian(drives)
    mat = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for c in jump_operators(scheme):
        cdc = c.conj().T @ c
        mat += np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye)
    # extra x-ray dephasing on rho_13 and rho_31 only
    for i, j in ((0, 2), (2, 0)):
        k = i + DIM * j
        mat[k, k] -= scheme.gamma_d
    return Liouvillian(mat, scheme, drives)


def steady_state(L: Liouvillian, dps: int = 40) -> np.ndarray:
    """Unique trace-one null vector of L.

    Solved in extended precision: the metastable width can be 1e-13 of the
    fast widths, which puts the bordered system far beyond what double
    precision LU resolves.
    """
    n = DIM * DIM
    # private context: mpmath.workdps changes global state and races across threads
    mp = mpmath.MPContext()
    mp.dps = dps
    a = mp.matrix(n + 1, n + 1)
    for i in range(n):
        for j in range(n):
            z = L.matrix[i, j]
            if z != 0:
                a[i, j] = mp.mpc(z.real, z.imag)
    # bordered system [[L, t], [trace, 0]] is regular iff the null space is 1-d
    for k in range(DIM):
        a[n, k + DIM * k] = 1
        a[k + DIM * k, n] = 1
    b = mp.matrix(n + 1, 1)
    b[n] = 1
    scale = max(1.0, float(np.max(np.abs(L.matrix))))
    try:
        x = mp.lu_solve(a, b)
    except (ZeroDivisionError, TypeError) as exc:
        # mpmath raises TypeError when a pivot column is identically zero
        raise NonUniqueSteadyState("Liouvillian has a degenerate null space") from exc
    tol = mp.mpf(10) ** (-(dps // 2))
    residual = mp.norm(a * x - b)
    # the border multiplier vanishes up to the round-off already present in L
    if residual > tol * scale or abs(x[n]) > 1e-10 * scale or mp.norm(x) > 1e8:
        raise NonUniqueSteadyState("Liouvillian has a degenerate null space")
    rho = np.array([complex(x[i]) for i in range(n)])
    rho = unvec(rho)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def evolve(L: Liouvillian, rho0: np.ndarray, t_grid) -> np.ndarray:
    """rho(t) = exp(L t) rho0 on the given times; returns shape (len(t), 3, 3)."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(np.diff(t_grid) < 0) or (t_grid.size and t_grid[0] < 0):
        raise ValueError("t_grid must be non-negative and non-decreasing")
    out = np.empty((t_grid.size, DIM, DIM), dtype=complex)
    v = vec(rho0).astype(complex)
    t_prev = 0.0
    cache: dict[float, np.ndarray] = {}
    for i, t in enumerate(t_grid):
        dt = t - t_prev
        if dt > 0:
            prop = cache.get(dt)
            if prop is None:
                prop = expm(L.matrix * dt)
                cache[dt] = prop
            v = prop @ v
        out[i] = unvec(v)
        t_prev = t
    return out


def trapped_population(scheme: LevelScheme) -> float:
    """Upper-state population Gamma21/(Gamma32 + 2 Gamma21) left by a lone x-ray drive."""
    den = scheme.gamma32 + 2.0 * scheme.gamma21
    if den <= 0:
        raise ValueError("trapped population undefined for Gamma32 + 2 Gamma21 = 0")
    return scheme.gamma21 / den
