"""Closed-form limiting cases of the crossed-field lattice problem.

Covers the two solvable corners of parameter space -- zero magnetic field
(Wannier-Stark ladders, Bessel-product eigenstates) and zero electric field
(Harper magnetic bands) -- plus the checkerboard double-periodic dispersion.
Bessel functions of the first kind are computed in-house (ascending series
at small argument, Miller backward recurrence otherwise) so the package has
no special-function dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.linalg

from hallsim.core import TWO_PI, HallConfig, WaveFunction2D

MAX_ORDER = 200
MAX_ARG = 500.0
_SERIES_CUT = 10.0


# ---------------------------------------------------------------------------
# Bessel functions
# ---------------------------------------------------------------------------

def _bessel_series(n: int, z: float) -> float:
    # ascending series, adequate for |z| <= _SERIES_CUT
    half = 0.5 * z
    term = 1.0
    for k in range(1, n + 1):
        term *= half / k
    total = term
    zz = -half * half
    for k in range(1, 400):
        term *= zz / (k * (n + k))
        total += term
        if abs(term) < 1e-18 * (abs(total) + 1e-300):
            return total
    raise RuntimeError("Bessel series failed to converge")


def _bessel_miller(n: int, z: float) -> float:
    # backward recurrence normalized with J_0 + 2 sum_k J_{2k} = 1
    start = max(n, int(math.ceil(z))) + 40 + int(16.0 * (max(z, 1.0) / 2.0) ** (1.0 / 3.0))
    if start % 2:
        start += 1
    jp, jc = 0.0, 1e-300
    norm = 0.0
    target = 0.0
    for k in range(start, 0, -1):
        jm = (2.0 * k / z) * jc - jp
        jp, jc = jc, jm
        if k - 1 == n:
            target = jc
        if (k - 1) % 2 == 0:
            norm += jc if k - 1 == 0 else 2.0 * jc
        if abs(jc) > 1e250:
            jc *= 1e-250
            jp *= 1e-250
            norm *= 1e-250
            target *= 1e-250
    return target / norm


def bessel_j(order: int, z: float) -> float:
    """First-kind Bessel J_order(z) for |order| <= 200, |z| <= 500."""
    n, x = int(order), float(z)
    if abs(n) > MAX_ORDER:
        raise ValueError(f"order {n} outside supported range +-{MAX_ORDER}")
    if abs(x) > MAX_ARG:
        raise ValueError(f"argument {x} outside supported range +-{MAX_ARG}")
    sign = 1.0
    if n < 0:
        n = -n
        if n % 2:
            sign = -sign
    if x < 0:
        x = -x
        if n % 2:
            sign = -sign
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    if x <= _SERIES_CUT:
        return sign * _bessel_series(n, x)
    return sign * _bessel_miller(n, x)


def bessel_j_array(orders: Sequence[int], z: float) -> np.ndarray:
    return np.array([bessel_j(n, z) for n in orders])


def first_zero_j1() -> float:
    """First positive zero of J_1, from the in-house series by bisection."""
    from scipy.optimize import brentq

    return float(brentq(lambda x: bessel_j(1, x), 3.0, 4.5, xtol=1e-14))


# ---------------------------------------------------------------------------
# spectrum containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LadderSpectrum:
    """Discrete energies E = Fx n + Fy k labeled by integer ladder indices."""

    entries: list[tuple[int, int, float]]
    tolerance: float = 1e-9

    def energies(self) -> np.ndarray:
        return np.array([e for (_, _, e) in self.entries])

    def nearest(self, energy: float) -> tuple[int, int, float]:
        """Ladder entry closest to ``energy``."""
        best = min(self.entries, key=lambda t: abs(t[2] - energy))
        return best


def ws_ladder(cfg: HallConfig, n_range: Sequence[int], k_range: Sequence[int]) -> LadderSpectrum:
    fx, fy = cfg.field_components
    entries = [(n, k, fx * n + fy * k) for n in n_range for k in k_range]
    entries.sort(key=lambda t: t[2])
    return LadderSpectrum(entries)


@dataclass(frozen=True, eq=False)
class BandStructure:
    """Energies E_nu(kappa) on a quasimomentum grid, ascending per kappa.

    ``bands[i, nu]`` is the nu-th energy at ``kappa_grid[i]``;
    ``brillouin_period`` is the kappa period of the spectrum.
    """

    kappa_grid: np.ndarray
    bands: np.ndarray
    brillouin_period: float

    def band(self, nu: int) -> np.ndarray:
        return self.bands[:, nu]

    def bandwidth(self, nu: int) -> float:
        b = self.bands[:, nu]
        return float(b.max() - b.min())

    @property
    def num_bands(self) -> int:
        return self.bands.shape[1]


# ---------------------------------------------------------------------------
# Wannier-Stark states (alpha = 0)
# ---------------------------------------------------------------------------

def _ws_half_width(z: float, pad: int = 30) -> int:
    return int(math.ceil(abs(z))) + pad


def ws_state(n: int, k: int, cfg: HallConfig, pad: int = 30) -> WaveFunction2D:
    """Bessel-product eigenstate Psi_{l,m} = J_{l-n}(Jx/Fx) J_{m-k}(Jy/Fy).

    Requires alpha = 0 and both field components positive; with a vanishing
    component the states are extended and :func:`ws_ladder_band` applies
    instead.  The window is sized so the truncated tail is below 1e-12.
    """
    if cfg.alpha != 0.0:
        raise ValueError("Wannier-Stark states require alpha = 0")
    fx, fy = cfg.field_components
    if fx == 0.0 or fy == 0.0:
        raise ValueError("field component vanishes: extended regime, use ws_ladder_band")
    zx, zy = cfg.Jx / fx, cfg.Jy / fy
    hx, hy = _ws_half_width(zx, pad), _ws_half_width(zy, pad)
    bx = bessel_j_array(range(-hx, hx + 1), zx)
    by = bessel_j_array(range(-hy, hy + 1), zy)
    amps = np.outer(bx, by).astype(complex)
    return WaveFunction2D((n - hx, k - hy), amps)


def ws_ladder_band(cfg: HallConfig, kappa_grid: np.ndarray,
                   nu_range: Sequence[int] = range(-2, 3)) -> BandStructure:
    """Ladder of cosine bands E_nu(kappa) = F nu - J cos(kappa).

    Valid for alpha = 0 when exactly one field component vanishes; the
    hopping along the free axis sets the band shape.
    """
    if cfg.alpha != 0.0:
        raise ValueError("ladder bands require alpha = 0")
    fx, fy = cfg.field_components
    if (fx == 0.0) == (fy == 0.0):
        raise ValueError("exactly one field component must vanish")
    j_free = cfg.Jx if fx == 0.0 else cfg.Jy
    kappa = np.asarray(kappa_grid, dtype=float)
    cols = [cfg.F * nu - j_free * np.cos(kappa) for nu in nu_range]
    bands = np.sort(np.stack(cols, axis=1), axis=1)
    return BandStructure(kappa, bands, TWO_PI)


# ---------------------------------------------------------------------------
# Harper magnetic bands (F = 0)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlochBC:
    kappa_x: float = 0.0


@dataclass(frozen=True)
class DirichletBC:
    Lx: int = 40


def rational_alpha(alpha: float, max_q: int = 2000) -> tuple[int, int]:
    """(r, q) with alpha = r/q, rejecting non-rational input."""
    frac = Fraction(alpha).limit_denominator(max_q)
    if abs(float(frac) - alpha) > 1e-12:
        raise ValueError(f"alpha={alpha} is not rational with denominator <= {max_q}")
    return frac.numerator, frac.denominator


def harper_matrix_bloch(cfg: HallConfig, kappa_x: float, kappa_y: float) -> np.ndarray:
    """q x q Bloch block of the Harper equation at (kappa_x, kappa_y)."""
    _, q = rational_alpha(cfg.alpha)
    diag = -cfg.Jy * np.cos(TWO_PI * cfg.alpha * np.arange(q) + kappa_y)
    h = np.diag(diag).astype(complex)
    hop = -0.5 * cfg.Jx * np.exp(1j * kappa_x)
    for j in range(q):
        h[j, (j + 1) % q] += hop
        h[(j + 1) % q, j] += np.conj(hop)
    return h


def harper_matrix_dirichlet(cfg: HallConfig, Lx: int, kappa_y: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the open-chain Harper matrix, l = 1..Lx."""
    diag = -cfg.Jy * np.cos(TWO_PI * cfg.alpha * np.arange(1, Lx + 1) + kappa_y)
    off = np.full(Lx - 1, -0.5 * cfg.Jx)
    return diag, off


def harper_bands(cfg: HallConfig, kappa_y_grid: np.ndarray,
                 bc: BlochBC | DirichletBC = BlochBC()) -> BandStructure:
    """Harper-equation spectrum along a kappa_y grid.

    Bloch boundary conditions need rational alpha = r/q and yield q bands;
    Dirichlet conditions (finite chain of Lx sites) yield Lx levels per
    kappa_y and are what the ribbon geometry of the ``finite`` module uses.
    """
    kappa = np.asarray(kappa_y_grid, dtype=float)
    if isinstance(bc, BlochBC):
        _, q = rational_alpha(cfg.alpha)
        if q > 2000:
            raise ValueError("denominator q > 2000 not supported")
        bands = np.empty((kappa.size, q))
        for i, ky in enumerate(kappa):
            bands[i] = scipy.linalg.eigvalsh(harper_matrix_bloch(cfg, bc.kappa_x, ky))
        period = TWO_PI / q
    else:
        bands = np.empty((kappa.size, bc.Lx))
        for i, ky in enumerate(kappa):
            diag, off = harper_matrix_dirichlet(cfg, bc.Lx, ky)
            bands[i] = scipy.linalg.eigh_tridiagonal(diag, off, eigvals_only=True)
        period = TWO_PI
    return BandStructure(kappa, bands, period)


# ---------------------------------------------------------------------------
# double-periodic (checkerboard) lattice
# ---------------------------------------------------------------------------

def double_periodic_dispersion(kx, ky, J: float, delta: float):
    """Two-subband dispersion of the checkerboard lattice.

    E_{1,2} = -+ sqrt(J^2 cos^2(d kx) cos^2(d ky) + delta^2) with
    d = sqrt(2); quasimomenta refer to the primary axes of the
    double-periodic lattice.  Returns (lower, upper), vectorized.
    """
    d = math.sqrt(2.0)
    root = np.sqrt((J * np.cos(d * np.asarray(kx)) * np.cos(d * np.asarray(ky))) ** 2
                   + delta * delta)
    return -root, root
