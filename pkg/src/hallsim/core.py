"""Lattice data model and elementary operators.

Everything downstream builds on the single-band tight-binding Hamiltonian

    (H psi)_{l,m} = -Jx/2 (psi_{l+1,m} + psi_{l-1,m})
                    -Jy/2 (e^{+i 2 pi alpha l} psi_{l,m+1}
                           + e^{-i 2 pi alpha l} psi_{l,m-1})
                    + (Fx l + Fy m + gamma/2 (l^2 + m^2)) psi_{l,m}

in the Landau gauge A = B(0, x).  Units: e = a = hbar = 1, energies in units
of the hopping J, time in units of T_J = 2 pi / J.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

TWO_PI = 2.0 * math.pi


class Gauge(Enum):
    LANDAU_X = "landau_x"    # phases e^{i 2 pi alpha l} on y-hops
    LANDAU_Y = "landau_y"    # phases e^{-i 2 pi alpha m} on x-hops
    ROTATED = "rotated"      # field-aligned gauge, see hallsim.lsx
    SYMMETRIC = "symmetric"  # half phases on both axes, see hallsim.finite


@dataclass(frozen=True)
class Rational:
    """Field orientation beta = r/q with coprime non-negative integers."""

    r: int
    q: int

    def __post_init__(self):
        if (self.r, self.q) == (0, 0):
            raise ValueError("direction (0, 0) is not a direction")
        if self.r < 0 or self.q < 0:
            raise ValueError("direction integers must be non-negative")
        if math.gcd(self.r, self.q) != 1:
            raise ValueError(f"direction ({self.r}, {self.q}) is not coprime")

    @property
    def norm2(self) -> int:
        return self.r * self.r + self.q * self.q


@dataclass(frozen=True)
class Irrational:
    """Field orientation given directly as beta = Fx/Fy."""

    beta: float

    def __post_init__(self):
        if not math.isfinite(self.beta) or self.beta < 0:
            raise ValueError("beta must be finite and non-negative")


Direction = Union[Rational, Irrational]


@dataclass(frozen=True)
class HallConfig:
    """Physical parameters of one lattice-in-crossed-fields setup.

    Parameters
    ----------
    alpha : float
        Peierls phase (magnetic flux per plaquette in flux quanta),
        restricted to -1/2 < alpha <= 1/2.
    Jx, Jy : float
        Hopping energies along x and y, both positive.
    F : float
        Electric field magnitude (Stark energy per lattice period).
    direction : Rational or Irrational
        Orientation of the field; ``Rational(r, q)`` puts
        Fx = F r / sqrt(r^2 + q^2), Fy = F q / sqrt(r^2 + q^2),
        ``Irrational(beta)`` uses Fx = F beta / sqrt(1 + beta^2).
    gauge : Gauge
        Gauge convention used by stencil operators (LANDAU_X unless a
        module states otherwise).
    staggered_phase : float
        Extra phase phi on the y-hops of every second column; phi = pi
        together with alpha = 1/2 is the uniform half-flux case.  Only
        the ``piflux`` module reads it.
    confinement_gamma : float
        Strength gamma >= 0 of the parabolic trap gamma/2 (l^2 + m^2);
        only the ``finite`` module switches it on.
    """

    alpha: float = 0.0
    Jx: float = 1.0
    Jy: float = 1.0
    F: float = 0.0
    direction: Direction = field(default_factory=lambda: Rational(0, 1))
    gauge: Gauge = Gauge.LANDAU_X
    staggered_phase: float = math.pi
    confinement_gamma: float = 0.0

    def __post_init__(self):
        if not (-0.5 < self.alpha <= 0.5):
            raise ValueError(f"alpha={self.alpha} outside (-1/2, 1/2]")
        if self.Jx <= 0 or self.Jy <= 0:
            raise ValueError("hoppings Jx, Jy must be positive")
        if self.F < 0:
            raise ValueError("field magnitude F must be non-negative")
        if self.confinement_gamma < 0:
            raise ValueError("confinement gamma must be non-negative")

    @property
    def beta(self) -> float:
        """Orientation Fx/Fy (inf when the field is along x)."""
        if isinstance(self.direction, Rational):
            if self.direction.q == 0:
                return math.inf
            return self.direction.r / self.direction.q
        return self.direction.beta

    @property
    def field_components(self) -> tuple[float, float]:
        """(Fx, Fy) with Fx^2 + Fy^2 = F^2."""
        if isinstance(self.direction, Rational):
            n = math.sqrt(self.direction.norm2)
            return self.F * self.direction.r / n, self.F * self.direction.q / n
        b = self.direction.beta
        n = math.sqrt(1.0 + b * b)
        return self.F * b / n, self.F / n

    @property
    def Fx(self) -> float:
        return self.field_components[0]

    @property
    def Fy(self) -> float:
        return self.field_components[1]


@dataclass(frozen=True, eq=False)
class WaveFunction2D:
    """Complex amplitudes psi_{l,m} on a finite rectangular window.

    ``amps[i, j]`` holds the amplitude at lattice site
    ``(l, m) = (origin[0] + i, origin[1] + j)``; amplitudes outside the
    window are zero (Dirichlet truncation).  Library functions never
    mutate ``amps`` in place.
    """

    origin: tuple[int, int]
    amps: np.ndarray

    def __post_init__(self):
        if self.amps.ndim != 2:
            raise ValueError("amps must be a 2D array")
        if not np.iscomplexobj(self.amps):
            object.__setattr__(self, "amps", self.amps.astype(complex))

    @property
    def dims(self) -> tuple[int, int]:
        return self.amps.shape

    def l_values(self) -> np.ndarray:
        return self.origin[0] + np.arange(self.amps.shape[0])

    def m_values(self) -> np.ndarray:
        return self.origin[1] + np.arange(self.amps.shape[1])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "WaveFunction2D":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize a zero state")
        return WaveFunction2D(self.origin, self.amps / n)

    def boundary_probability(self, ring: int = 2) -> float:
        """Probability carried by the outermost ``ring`` sites of the window.

        Callers use this to certify that Dirichlet truncation is harmless
        (< 1e-6 is the accepted leakage in this package).
        """
        p = np.abs(self.amps) ** 2
        interior = p[ring:-ring, ring:-ring] if min(p.shape) > 2 * ring else 0.0
        return float(p.sum() - np.sum(interior))

    def overlap(self, other: "WaveFunction2D") -> complex:
        """<self|other> on the intersection of the two windows."""
        lo_l = max(self.origin[0], other.origin[0])
        lo_m = max(self.origin[1], other.origin[1])
        hi_l = min(self.origin[0] + self.amps.shape[0], other.origin[0] + other.amps.shape[0])
        hi_m = min(self.origin[1] + self.amps.shape[1], other.origin[1] + other.amps.shape[1])
        if lo_l >= hi_l or lo_m >= hi_m:
            return 0.0j
        a = self.amps[lo_l - self.origin[0]:hi_l - self.origin[0],
                      lo_m - self.origin[1]:hi_m - self.origin[1]]
        b = other.amps[lo_l - other.origin[0]:hi_l - other.origin[0],
                       lo_m - other.origin[1]:hi_m - other.origin[1]]
        return complex(np.vdot(a, b))


def delta_state(l: int = 0, m: int = 0, half_lx: int = 10, half_ly: int = 10) -> WaveFunction2D:
    """Single-site state delta_{l,m} on a window centered at (l, m)."""
    amps = np.zeros((2 * half_lx + 1, 2 * half_ly + 1), dtype=complex)
    amps[half_lx, half_ly] = 1.0
    return WaveFunction2D((l - half_lx, m - half_ly), amps)


def _check_gauge(cfg: HallConfig):
    if cfg.gauge is not Gauge.LANDAU_X:
        raise ValueError("stencil operators are implemented in the LANDAU_X gauge")


def onsite_energies(cfg: HallConfig, l: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Diagonal part Fx l + Fy m + gamma/2 (l^2 + m^2) on a meshgrid."""
    fx, fy = cfg.field_components
    diag = fx * l + fy * m
    if cfg.confinement_gamma:
        diag = diag + 0.5 * cfg.confinement_gamma * (l * l + m * m)
    return diag


def apply_hamiltonian(psi: WaveFunction2D, cfg: HallConfig) -> WaveFunction2D:
    """Apply the tight-binding Hamiltonian to ``psi`` on its own window.

    Sites outside the window contribute zero (Dirichlet truncation); the
    caller is responsible for keeping boundary amplitudes negligible.
    """
    _check_gauge(cfg)
    a = psi.amps
    lv = psi.l_values()[:, None].astype(float)
    mv = psi.m_values()[None, :].astype(float)
    phase = np.exp(1j * TWO_PI * cfg.alpha * lv)

    out = onsite_energies(cfg, lv, mv) * a
    # x-hops
    out[:-1, :] += -0.5 * cfg.Jx * a[1:, :]
    out[1:, :] += -0.5 * cfg.Jx * a[:-1, :]
    # y-hops with Peierls phases e^{+-i 2 pi alpha l}
    out[:, :-1] += -0.5 * cfg.Jy * phase[:, :1] * a[:, 1:]
    out[:, 1:] += -0.5 * cfg.Jy * np.conj(phase[:, :1]) * a[:, :-1]
    return WaveFunction2D(psi.origin, out)


def apply_velocity(psi: WaveFunction2D, cfg: HallConfig, axis: str) -> WaveFunction2D:
    """Apply the velocity operator v_x or v_y (Heisenberg i[H0, r])."""
    _check_gauge(cfg)
    a = psi.amps
    out = np.zeros_like(a)
    if axis == "x":
        c = cfg.Jx / 2j
        out[:-1, :] += c * a[1:, :]
        out[1:, :] += -c * a[:-1, :]
    elif axis == "y":
        lv = psi.l_values()[:, None].astype(float)
        phase = np.exp(1j * TWO_PI * cfg.alpha * lv)
        c = cfg.Jy / 2j
        out[:, :-1] += c * phase * a[:, 1:]
        out[:, 1:] += -c * np.conj(phase) * a[:, :-1]
    else:
        raise ValueError("axis must be 'x' or 'y'")
    return WaveFunction2D(psi.origin, out)


def gauge_translate(psi: WaveFunction2D, n: int, k: int, alpha: float) -> WaveFunction2D:
    """Magnetic translation psi~_{l,m} = psi_{l-n,m-k} e^{-i 2 pi alpha n m}.

    Maps an eigenstate of energy E to one of energy E + Fx n + Fy k; the
    window moves with the state, so the operation is exactly norm- and
    participation-preserving.
    """
    new_origin = (psi.origin[0] + n, psi.origin[1] + k)
    m_abs = (new_origin[1] + np.arange(psi.amps.shape[1]))[None, :]
    phase = np.exp(-1j * TWO_PI * alpha * n * m_abs)
    return WaveFunction2D(new_origin, psi.amps * phase)


@dataclass(frozen=True)
class Observables:
    norm: float
    M1x: float
    M1y: float
    M2: float
    sigma: float
    participation: float


def observables(psi: WaveFunction2D) -> Observables:
    """First/second position moments, dispersion and participation ratio.

    The state is normalized defensively; the raw norm is reported so
    propagation loops can monitor unitarity.
    """
    raw = psi.norm()
    if raw == 0.0:
        raise ValueError("observables of a zero-norm state are undefined")
    p = np.abs(psi.amps) ** 2 / raw**2
    lv = psi.l_values()[:, None].astype(float)
    mv = psi.m_values()[None, :].astype(float)
    m1x = float(np.sum(lv * p))
    m1y = float(np.sum(mv * p))
    m2 = float(np.sum((lv * lv + mv * mv) * p))
    sigma = math.sqrt(max(m2 - m1x * m1x - m1y * m1y, 0.0))
    participation = 1.0 / float(np.sum(p * p))
    return Observables(raw, m1x, m1y, m2, sigma, participation)


@dataclass(frozen=True)
class CharacteristicScales:
    """Derived frequencies, periods and critical values.

    Fields that require alpha != 0 (or gamma != 0, or F != 0) are NaN when
    undefined.
    """

    omega_c: float
    omega_B: float
    F_cr: float
    v_star: float
    Omega: float
    E_cr: float
    T_J: float
    T_B: float
    T_y: float
    T_c: float


def characteristic_scales(cfg: HallConfig) -> CharacteristicScales:
    """Closed-form scales: omega_c = 2 pi alpha sqrt(Jx Jy), etc."""
    j = math.sqrt(cfg.Jx * cfg.Jy)
    omega_c = TWO_PI * cfg.alpha * j
    omega_b = cfg.F
    v_star = cfg.F / (TWO_PI * cfg.alpha) if cfg.alpha != 0 else math.nan
    omega = cfg.confinement_gamma / (TWO_PI * cfg.alpha) if cfg.alpha != 0 else math.nan
    if cfg.alpha != 0 and cfg.confinement_gamma > 0:
        e_cr = (TWO_PI * cfg.alpha * j) ** 2 / (2.0 * cfg.confinement_gamma)
    else:
        e_cr = math.nan
    fy = cfg.Fy
    return CharacteristicScales(
        omega_c=omega_c,
        omega_B=omega_b,
        F_cr=omega_c,
        v_star=v_star,
        Omega=omega,
        E_cr=e_cr,
        T_J=TWO_PI / j,
        T_B=TWO_PI / cfg.F if cfg.F > 0 else math.inf,
        T_y=TWO_PI / fy if fy > 0 else math.inf,
        T_c=TWO_PI / omega_c if omega_c != 0 else math.inf,
    )


# ---------------------------------------------------------------------------
# dense/sparse window matrices for diagonalization oracles
# ---------------------------------------------------------------------------

def window_sites(origin: tuple[int, int], dims: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Absolute (l, m) coordinates of a window, row-major flattened."""
    lv = origin[0] + np.arange(dims[0])
    mv = origin[1] + np.arange(dims[1])
    ll, mm = np.meshgrid(lv, mv, indexing="ij")
    return ll.ravel(), mm.ravel()


def hamiltonian_matrix(cfg: HallConfig, origin: tuple[int, int], dims: tuple[int, int],
                       sparse: bool = False):
    """Matrix of the windowed Hamiltonian, row-major site ordering.

    Used by eigenstate oracles and the finite-lattice module; agrees
    elementwise with :func:`apply_hamiltonian` on the same window.
    """
    _check_gauge(cfg)
    import scipy.sparse as sp

    lx, ly = dims
    n = lx * ly
    ll, mm = window_sites(origin, dims)
    diag = onsite_energies(cfg, ll.astype(float), mm.astype(float))

    rows, cols, vals = [np.arange(n)], [np.arange(n)], [diag.astype(complex)]

    idx = np.arange(n).reshape(lx, ly)
    # x-hops: (l, m) -> (l+1, m)
    r = idx[:-1, :].ravel()
    c = idx[1:, :].ravel()
    v = np.full(r.size, -0.5 * cfg.Jx, dtype=complex)
    rows += [r, c]
    cols += [c, r]
    vals += [v, np.conj(v)]
    # y-hops: (l, m) -> (l, m+1), phase e^{i 2 pi alpha l}
    r = idx[:, :-1].ravel()
    c = idx[:, 1:].ravel()
    lr = ll[r].astype(float)
    v = -0.5 * cfg.Jy * np.exp(1j * TWO_PI * cfg.alpha * lr)
    rows += [r, c]
    cols += [c, r]
    vals += [v, np.conj(v)]

    h = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    return h if sparse else h.toarray()
