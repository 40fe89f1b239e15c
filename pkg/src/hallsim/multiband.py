"""Magnetic bands beyond tight binding and their field-induced decay.

The x direction is treated in tight binding (chain hopping J_x between
Wannier sites l = 1..q at rational flux alpha = r/q) while the y direction
keeps its full Bloch structure, expanded in plane waves e^{i(n + kappa_y)y}
with |n| <= n_max.  Dimensionless units: lengths in a/(2 pi), energies in
the recoil energy, so the one-dimensional blocks are

    (n + kappa_y + alpha l)^2 / 2 + (V_y/2)(n-shift couplings),

coupled by -J_x/2 between neighboring l with the magnetic Bloch corner
c^(q+1)_n = e^{i 2 pi kappa_x} c^(1)_{n-r}.

Switching on the field sweeps kappa_y -> kappa_y - F t.  The propagator
over one Bloch period T_B = 1/F, computed in a larger plane-wave window
and then truncated to |n| <= n_max, is sub-unitary: its spectrum gives the
metastable magnetic bands' decay rates |lambda_j|^2 = exp(-Gamma_j T_B).
Truncation is the only loss channel, exactly as the opening of the system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from hallsim.core import TWO_PI
from hallsim.limits import BandStructure


@dataclass(frozen=True)
class MultibandBasis:
    """Mixed Wannier (x) times plane-wave (y) basis at flux alpha = r/q."""

    r: int
    q: int
    V_y: float
    J_x: float
    n_max: int = 7
    kappa_x: float = 0.0

    def __post_init__(self):
        if self.q < 1 or math.gcd(self.r, self.q) != 1:
            raise ValueError("flux must be r/q in lowest terms")
        if self.n_max < 7:
            raise ValueError("plane-wave cutoff below n_max = 7 is not converged")

    @property
    def alpha(self) -> float:
        return self.r / self.q

    @property
    def dim(self) -> int:
        return self.q * (2 * self.n_max + 1)

    def with_cutoff(self, n_max: int) -> "MultibandBasis":
        return MultibandBasis(self.r, self.q, self.V_y, self.J_x, n_max, self.kappa_x)


def multiband_matrix(basis: MultibandBasis, kappa_y: float,
                     n_max: int | None = None) -> np.ndarray:
    """Hermitian Bloch matrix over (l = 1..q) x (|n| <= n_max)."""
    if n_max is None:
        n_max = basis.n_max
    nn = 2 * n_max + 1
    q = basis.q
    size = q * nn
    h = np.zeros((size, size), dtype=complex)

    def idx(l, n):
        return (l - 1) * nn + (n + n_max)

    ns = np.arange(-n_max, n_max + 1)
    for l in range(1, q + 1):
        base = (l - 1) * nn
        kin = 0.5 * (ns + kappa_y + basis.alpha * l) ** 2
        h[base + np.arange(nn), base + np.arange(nn)] = kin
        h[base + np.arange(nn - 1), base + np.arange(1, nn)] += 0.5 * basis.V_y
        h[base + np.arange(1, nn), base + np.arange(nn - 1)] += 0.5 * basis.V_y
    for l in range(1, q):
        for n in ns:
            h[idx(l, n), idx(l + 1, n)] += -0.5 * basis.J_x
            h[idx(l + 1, n), idx(l, n)] += -0.5 * basis.J_x
    # magnetic Bloch corner: c^(q+1)_n = e^{i 2 pi kappa_x} c^(1)_{n-r}
    phase = np.exp(1j * TWO_PI * basis.kappa_x)
    for n in ns:
        if -n_max <= n - basis.r <= n_max:
            c = -0.5 * basis.J_x * phase
            h[idx(q, n), idx(1, n - basis.r)] += c
            h[idx(1, n - basis.r), idx(q, n)] += np.conj(c)
    return h


def multiband_bands(basis: MultibandBasis, kappa_y_grid: np.ndarray,
                    num_bands: int | None = None) -> BandStructure:
    """Lowest magnetic bands (and the spectrum above the gap) per kappa_y."""
    kappa = np.asarray(kappa_y_grid, dtype=float)
    if num_bands is None:
        num_bands = 2 * basis.q
    bands = np.empty((kappa.size, num_bands))
    for i, ky in enumerate(kappa):
        vals = scipy.linalg.eigvalsh(multiband_matrix(basis, ky))
        bands[i] = vals[:num_bands]
    return BandStructure(kappa, bands, 1.0 / basis.q if basis.q > 1 else 1.0)


# ---------------------------------------------------------------------------
# truncated Floquet propagator
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FloquetResult:
    """Eigenvalues of the truncated one-Bloch-period propagator.

    ``eigenvalues`` are the per-band lambda_j (|lambda| <= 1 within
    tolerance), Gamma_j = -F ln |lambda_j|^2 the decay rates, labeled by
    the static magnetic band they overlap most with, lambda_j[0] being the
    lowest band.
    """

    F: float
    eigenvalues: np.ndarray
    Gamma: np.ndarray
    norm_loss: float

    @property
    def T_B(self) -> float:
        return 1.0 / self.F


def _comoving_shift(q: int, n_max: int) -> np.ndarray:
    """Block-diagonal (in l) matrix shifting n -> n + 1 slots down."""
    nn = 2 * n_max + 1
    s = np.zeros((nn, nn))
    s[np.arange(nn - 1), np.arange(1, nn)] = 1.0  # (S c)_n = c_{n+1}
    return np.kron(np.eye(q), s)


def floquet_propagator(basis: MultibandBasis, F: float, steps: int = 2000,
                       n_buffer: int = 8, kappa_y0: float = 0.0) -> np.ndarray:
    """Truncated co-moving one-period propagator P V^dag U(T_B) P.

    U is integrated with midpoint exponentials in an enlarged plane-wave
    window (n_max + n_buffer) so nothing reflects off the working window
    within one period; the co-moving shift V undoes the n-relabeling that
    the swept kappa_y accumulates, and P projects back to |n| <= n_max.
    """
    if F <= 0:
        raise ValueError("needs F > 0")
    big = basis.n_max + n_buffer
    nn_big = 2 * big + 1
    dim_big = basis.q * nn_big
    t_b = 1.0 / F
    dt = t_b / steps
    u = np.eye(dim_big, dtype=complex)
    for j in range(steps):
        tm = (j + 0.5) * dt
        h = multiband_matrix(basis, kappa_y0 - F * tm, n_max=big)
        vals, vecs = scipy.linalg.eigh(h)
        u = (vecs * np.exp(-1j * dt * vals)) @ (vecs.conj().T @ u)
    u = _comoving_shift(basis.q, big) @ u
    # project to the working window
    keep = np.concatenate([
        (l * nn_big) + np.arange(n_buffer, nn_big - n_buffer)
        for l in range(basis.q)
    ])
    return u[np.ix_(keep, keep)]


def floquet_decay(basis: MultibandBasis, F: float, steps: int = 2000,
                  n_buffer: int = 8, kappa_y0: float = 0.0) -> FloquetResult:
    """Per-band decay rates from the truncated Floquet spectrum.

    The q eigenvalues are identified by maximal overlap with the static
    ground magnetic-band eigenvectors at kappa_y0 (the natural resolution
    of "closest to the unit circle" when rates are comparable).
    """
    u = floquet_propagator(basis, F, steps, n_buffer, kappa_y0)
    evals, evecs = scipy.linalg.eig(u)
    if np.max(np.abs(evals)) > 1.0 + 1e-8:
        raise RuntimeError("truncated propagator has |lambda| > 1")
    h0 = multiband_matrix(basis, kappa_y0)
    _, static = scipy.linalg.eigh(h0, subset_by_index=[0, basis.q - 1], driver="evr")
    overlaps = np.abs(static.conj().T @ evecs) ** 2  # (q, dim)
    chosen = []
    used = set()
    for j in range(basis.q):
        order = np.argsort(-overlaps[j])
        pick = next(int(k) for k in order if int(k) not in used)
        used.add(pick)
        chosen.append(pick)
    lam = evals[chosen]
    gamma = -F * np.log(np.clip(np.abs(lam) ** 2, 1e-300, None))
    gamma = np.where(gamma < 0, 0.0, gamma)
    rng = np.random.default_rng(0)
    probe = rng.normal(size=u.shape[0]) + 1j * rng.normal(size=u.shape[0])
    probe /= np.linalg.norm(probe)
    norm_loss = 1.0 - float(np.linalg.norm(u @ probe) ** 2)
    return FloquetResult(F, lam, gamma, norm_loss)


def floquet_converged(basis: MultibandBasis, F: float, tol: float = 1e-8,
                      max_steps: int = 8000, **kwargs) -> FloquetResult:
    """Decay rates with the step count doubled until eigenphases settle."""
    steps = kwargs.pop("steps", 2000)
    res = floquet_decay(basis, F, steps=steps, **kwargs)
    while steps < max_steps:
        steps *= 2
        finer = floquet_decay(basis, F, steps=steps, **kwargs)
        if np.max(np.abs(np.angle(finer.eigenvalues / res.eigenvalues))) < tol:
            return finer
        res = finer
    return res


# ---------------------------------------------------------------------------
# Landau-Zener decomposition of the rates
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LZFit:
    b: float
    prefactor: float
    residual: np.ndarray  # oscillatory part Gamma - fit
    correlation: float    # of ln(Gamma/F) against 1/F


def lz_decompose(F_values: np.ndarray, rates: np.ndarray) -> LZFit:
    """Fit Gamma(F) = c F exp(-b/F) and split off the oscillatory residue.

    Requires at least 8 positive-rate field values spanning a decade;
    ln(Gamma/F) is linear in 1/F for a pure Landau-Zener law, with b
    proportional to the squared gap.
    """
    f = np.asarray(F_values, dtype=float)
    g = np.asarray(rates, dtype=float)
    if f.size < 8:
        raise ValueError("need at least 8 field values")
    if f.max() / f.min() < 9.99:
        raise ValueError("field values should span a decade")
    if np.any(g <= 0):
        raise ValueError("rates must be positive for the logarithmic fit")
    xs = 1.0 / f
    ys = np.log(g / f)
    slope, intercept = np.polyfit(xs, ys, 1)
    corr = float(np.corrcoef(xs, ys)[0, 1])
    fit = np.exp(intercept) * f * np.exp(slope / f)
    return LZFit(b=-slope, prefactor=math.exp(intercept), residual=g - fit,
                 correlation=corr)


def synthetic_lz_rates(F_values, b: float, c: float) -> np.ndarray:
    """Exact Landau-Zener law c F exp(-b/F), for round-trip fit checks."""
    f = np.asarray(F_values, dtype=float)
    return c * f * np.exp(-b / f)


def emit_rates_csv(path, F_values, gammas):
    from hallsim.lsx import _write_csv

    rows = []
    for i, f in enumerate(F_values):
        for j, g in enumerate(np.atleast_2d(gammas)[i]):
            rows.append((f, j + 1, g))
    _write_csv(path, ("F", "band", "Gamma"), rows)
