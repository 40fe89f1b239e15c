"""Finite-lattice physics: traps, ribbons, inserted flux and edge-enhanced decay.

Two boundary types matter in practice.  Harmonic confinement (gamma > 0)
keeps the spectrum discrete with no gaps; its eigenstates sort into regular
transporting states encircling the trap at the frequency
Omega = gamma / (2 pi alpha), chaotic states, and -- above the critical
energy E_cr = (2 pi alpha J)^2 / (2 gamma) -- angularly localized states.
Dirichlet walls instead support chiral edge states which short-circuit the
magnetic-band gaps and raise interband depletion from exponentially small
to linear in field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from hallsim.core import TWO_PI, HallConfig, Rational, WaveFunction2D, hamiltonian_matrix
from hallsim.limits import BlochBC, harper_bands, harper_matrix_dirichlet


# ---------------------------------------------------------------------------
# parabolic lattices
# ---------------------------------------------------------------------------

def parabolic_spectrum(cfg: HallConfig, half_window: int, num_levels: int | None = None,
                       return_vectors: bool = False):
    """Ascending spectrum of the harmonically confined lattice.

    The window must be generous enough that the trap wall sits at least
    4 J above the highest requested level; eigenvalues are bounded below
    by -2 J.
    """
    if cfg.confinement_gamma <= 0:
        raise ValueError("parabolic spectra need confinement_gamma > 0")
    if cfg.F != 0:
        raise ValueError("the uniform field is absorbed into the trap center")
    dims = (2 * half_window + 1, 2 * half_window + 1)
    h = hamiltonian_matrix(cfg, (-half_window, -half_window), dims)
    n = h.shape[0]
    if num_levels is None or num_levels >= n:
        sel = None
    else:
        sel = [0, num_levels - 1]
    if return_vectors:
        vals, vecs = scipy.linalg.eigh(h, subset_by_index=sel, driver="evr" if sel else None)
        return vals, vecs
    vals = scipy.linalg.eigh(h, eigvals_only=True, subset_by_index=sel,
                             driver="evr" if sel else None)
    return vals


def wall_clearance(cfg: HallConfig, half_window: int, top_energy: float) -> float:
    """gamma R^2/2 - top_energy: should exceed ~4 J for converged levels."""
    return 0.5 * cfg.confinement_gamma * half_window**2 - top_energy


def density_of_states_plateau(energies: np.ndarray, e_min: float, e_max: float) -> float:
    """Mean level density in [e_min, e_max] (approaches 2 pi / gamma above 2J)."""
    count = int(np.sum((energies >= e_min) & (energies <= e_max)))
    return count / (e_max - e_min)


# ---------------------------------------------------------------------------
# inserted point flux (symmetric gauge, plaquette-centered trap)
# ---------------------------------------------------------------------------

def _point_flux_phase(l: np.ndarray, m: np.ndarray) -> np.ndarray:
    # phase picked up on the x-hop (l, m) -> (l+1, m) per unit inserted flux
    return (np.arctan2(2 * l - 1, 2 * m - 1) - np.arctan2(2 * l + 1, 2 * m - 1))


def flux_insertion_matrix(cfg: HallConfig, phi: float, half_window: int) -> np.ndarray:
    """Confined lattice in the symmetric gauge with a point flux at the origin.

    Sites run over [1-R, R]^2 so the trap center and the flux tube sit at
    the plaquette center (1/2, 1/2); ``phi`` counts inserted flux quanta.
    """
    if cfg.confinement_gamma <= 0:
        raise ValueError("flux insertion is set up for the confined lattice")
    r = half_window
    lv = np.arange(1 - r, r + 1)
    mv = np.arange(1 - r, r + 1)
    lx = lv.size
    ll, mm = np.meshgrid(lv, mv, indexing="ij")
    n = lx * lx
    idx = np.arange(n).reshape(lx, lx)
    h = np.zeros((n, n), dtype=complex)
    diag = 0.5 * cfg.confinement_gamma * ((ll - 0.5) ** 2 + (mm - 0.5) ** 2)
    h[np.arange(n), np.arange(n)] = diag.ravel()

    # x-hops: -J/2 e^{-i pi alpha m} e^{-i phi theta(l, m)}
    theta_x = _point_flux_phase(ll[:-1, :], mm[:-1, :])
    cx = -0.5 * cfg.Jx * np.exp(-1j * (math.pi * cfg.alpha * mm[:-1, :] + phi * theta_x))
    h[idx[:-1, :].ravel(), idx[1:, :].ravel()] = cx.ravel()
    h[idx[1:, :].ravel(), idx[:-1, :].ravel()] = np.conj(cx).ravel()
    # y-hops: -J/2 e^{+i pi alpha l} e^{+i phi theta(m, l)}
    theta_y = _point_flux_phase(mm[:, :-1], ll[:, :-1])
    cy = -0.5 * cfg.Jy * np.exp(1j * (math.pi * cfg.alpha * ll[:, :-1] + phi * theta_y))
    h[idx[:, :-1].ravel(), idx[:, 1:].ravel()] = cy.ravel()
    h[idx[:, 1:].ravel(), idx[:, :-1].ravel()] = np.conj(cy).ravel()
    return h


@dataclass(frozen=True, eq=False)
class SpectralFlow:
    """Level flow under inserted flux with diabatic continuation bookkeeping.

    ``levels[i, j]`` is the j-th tracked level at ``phi_grid[i]`` (columns
    follow one continued level each, ignoring avoided crossings narrower
    than the tracking resolution); ``winding[j]`` counts how many sorted
    positions level j advanced between phi = 0 and phi = 1.
    """

    phi_grid: np.ndarray
    levels: np.ndarray
    winding: np.ndarray


def flux_spectral_flow(cfg: HallConfig, half_window: int, num_levels: int = 24,
                       num_phi: int = 41) -> SpectralFlow:
    """Track the lowest levels as one flux quantum is threaded through."""
    from scipy.optimize import linear_sum_assignment

    phis = np.linspace(0.0, 1.0, num_phi)
    raw = []
    for phi in phis:
        h = flux_insertion_matrix(cfg, phi, half_window)
        raw.append(scipy.linalg.eigh(h, eigvals_only=True,
                                     subset_by_index=[0, num_levels + 4], driver="evr"))
    raw = np.array(raw)

    tracked = np.empty((num_phi, num_levels))
    tracked[0] = raw[0, :num_levels]
    prev = tracked[0].copy()
    slope = np.zeros(num_levels)
    for i in range(1, num_phi):
        predicted = prev + slope * (phis[i] - phis[i - 1])
        cost = np.abs(predicted[:, None] - raw[i][None, :])
        rows, cols = linear_sum_assignment(cost)
        new = raw[i][cols[np.argsort(rows)]]
        slope = (new - prev) / (phis[i] - phis[i - 1])
        prev = new
        tracked[i] = new
    # one flux quantum permutes the level set: identify each tracked
    # endpoint with its nearest phi = 0 level (spacings far exceed the
    # tracking error, so the match is unambiguous)
    base = tracked[0]
    winding = np.array([int(np.argmin(np.abs(base - e))) for e in tracked[-1]]) \
        - np.arange(num_levels)
    return SpectralFlow(phis, tracked, winding)


# ---------------------------------------------------------------------------
# Dirichlet ribbons
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RibbonBands:
    kappa_grid: np.ndarray
    energies: np.ndarray      # (num_kappa, Lx)
    edge_flags: np.ndarray    # bool, same shape
    group_velocity: np.ndarray  # <v_y> per state, same shape


def ribbon_bands(cfg: HallConfig, Lx: int, kappa_y_grid: np.ndarray,
                 edge_depth: int = 3, edge_weight: float = 0.9) -> RibbonBands:
    """Dirichlet-ribbon levels with edge flags and analytic group velocities.

    A state is flagged as an edge state when more than ``edge_weight`` of
    its probability sits within ``edge_depth`` sites of either wall; the
    group velocity equals the current expectation Jy sum |b_l|^2
    sin(2 pi alpha l + kappa).
    """
    if cfg.F != 0:
        raise ValueError("ribbon band structure is defined at zero field")
    kappa = np.asarray(kappa_y_grid, dtype=float)
    lv = np.arange(1, Lx + 1)
    energies = np.empty((kappa.size, Lx))
    flags = np.zeros((kappa.size, Lx), dtype=bool)
    vg = np.empty((kappa.size, Lx))
    for i, ky in enumerate(kappa):
        diag, off = harper_matrix_dirichlet(cfg, Lx, ky)
        vals, vecs = scipy.linalg.eigh_tridiagonal(diag, off)
        energies[i] = vals
        w = np.abs(vecs) ** 2
        edge_w = w[:edge_depth, :].sum(axis=0) + w[-edge_depth:, :].sum(axis=0)
        flags[i] = edge_w > edge_weight
        vg[i] = cfg.Jy * (w * np.sin(TWO_PI * cfg.alpha * lv + ky)[:, None]).sum(axis=0)
    return RibbonBands(kappa, energies, flags, vg)


def bulk_gaps(cfg: HallConfig, num_gaps: int = 3, nk: int = 24) -> list[tuple[float, float]]:
    """(bottom, top) of the lowest bulk band gaps from the Bloch problem."""
    from hallsim.limits import rational_alpha

    _, q = rational_alpha(cfg.alpha)
    ky = np.linspace(-math.pi, math.pi, nk, endpoint=False)
    bands = np.concatenate([harper_bands(cfg, ky, BlochBC(kx)).bands
                            for kx in np.linspace(-math.pi / q, math.pi / q, nk,
                                                  endpoint=False)])
    gaps = []
    for nu in range(num_gaps):
        lo = float(bands[:, nu].max())
        hi = float(bands[:, nu + 1].min())
        if hi > lo:
            gaps.append((lo, hi))
    return gaps


# ---------------------------------------------------------------------------
# finite-lattice eigenstates with the field along the wall
# ---------------------------------------------------------------------------

def finite_ls_matrix(cfg: HallConfig, Lx: int, m_half: int) -> sp.csr_matrix:
    """Sparse ribbon Hamiltonian with the Stark tilt along y (beta = 0)."""
    return hamiltonian_matrix(cfg, (1, -m_half), (Lx, 2 * m_half + 1), sparse=True)


def finite_ls_states(cfg: HallConfig, Lx: int, m_half: int | None = None,
                     y_ring: int = 4, y_tol: float = 1e-8):
    """Eigenstates of the Dirichlet strip in the fundamental window |E| <= F/2.

    The spectrum repeats with period F under y-translation, so the window
    holds exactly Lx states once the y-truncation is converged; states
    touching the y-boundary ring are rejected.
    Returns (energies, states) with states shaped (Lx, 2 m_half + 1).
    """
    direction = cfg.direction
    if not (isinstance(direction, Rational) and direction.r == 0):
        raise ValueError("the finite-lattice ladder assumes the field along y")
    if cfg.F <= 0:
        raise ValueError("needs a finite field")
    if m_half is None:
        m_half = int(math.ceil(2.5 * (cfg.Jx + cfg.Jy) / cfg.F + 20))
    h = finite_ls_matrix(cfg, Lx, m_half)
    k = min(3 * Lx, h.shape[0] - 2)
    vals, vecs = sp.linalg.eigsh(h, k=k, sigma=0.0, which="LM")
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    my = 2 * m_half + 1
    keep_vals, keep_states = [], []
    for j in range(vals.size):
        if abs(vals[j]) > 0.5 * cfg.F:
            continue
        state = vecs[:, j].reshape(Lx, my)
        leak = np.sum(np.abs(state[:, :y_ring]) ** 2) + np.sum(np.abs(state[:, -y_ring:]) ** 2)
        if leak > y_tol:
            raise RuntimeError(f"strip state leaks {leak:.2e} into the y-boundary; "
                               "enlarge m_half")
        keep_vals.append(float(vals[j]))
        keep_states.append(state)
    if len(keep_vals) != Lx:
        raise RuntimeError(f"found {len(keep_vals)} strip states, expected Lx={Lx}")
    return np.array(keep_vals), np.array(keep_states)


def strip_density(states: np.ndarray) -> np.ndarray:
    """Mean spatial density (1/Lx) sum_nu |Psi^(nu)|^2 of the strip states."""
    return np.mean(np.abs(states) ** 2, axis=0)


def unfolded_spacings(energies: np.ndarray, fit_degree: int = 5) -> np.ndarray:
    """Nearest-neighbor spacings after polynomial unfolding of the staircase."""
    e = np.sort(np.asarray(energies, dtype=float))
    staircase = np.arange(1, e.size + 1, dtype=float)
    coeffs = np.polyfit(e, staircase, fit_degree)
    unfolded = np.polyval(coeffs, e)
    s = np.diff(unfolded)
    return s[s > 0]


def ks_distance(samples: np.ndarray, cdf) -> float:
    s = np.sort(samples)
    n = s.size
    grid = cdf(s)
    upper = np.max(np.abs(np.arange(1, n + 1) / n - grid))
    lower = np.max(np.abs(np.arange(0, n) / n - grid))
    return float(max(upper, lower))


def wigner_dyson_cdf(s):
    return 1.0 - np.exp(-math.pi * np.asarray(s) ** 2 / 4.0)


def poisson_cdf(s):
    return 1.0 - np.exp(-np.asarray(s))


# ---------------------------------------------------------------------------
# edge-enhanced interband depletion
# ---------------------------------------------------------------------------

def _ribbon_eig(cfg: HallConfig, Lx: int, ky: float):
    diag, off = harper_matrix_dirichlet(cfg, Lx, ky)
    return scipy.linalg.eigh_tridiagonal(diag, off)


def _ring_eig(cfg: HallConfig, Lx: int, ky: float):
    h = harper_ring_matrix(cfg, Lx, ky)
    return np.linalg.eigh(h)


def harper_ring_matrix(cfg: HallConfig, Lx: int, ky: float) -> np.ndarray:
    """Periodic-x Harper chain (needs q | Lx for single-valued phases)."""
    diag = -cfg.Jy * np.cos(TWO_PI * cfg.alpha * np.arange(1, Lx + 1) + ky)
    h = np.diag(diag).astype(complex)
    for j in range(Lx):
        h[j, (j + 1) % Lx] += -0.5 * cfg.Jx
        h[(j + 1) % Lx, j] += -0.5 * cfg.Jx
    return h


def depletion_series(cfg_zero_field: HallConfig, Lx: int, F: float, t_final: float,
                     dt: float = 0.1, kappa0: float = 0.0, record_every: int = 20,
                     periodic: bool = False):
    """Ground-band population under the y-field drive kappa(t) = kappa0 - F t.

    The initial state is the lowest ribbon level at kappa0; the "ground
    band" projector collects all instantaneous levels below the middle of
    the first bulk gap.  Returns (times, population).
    """
    gaps = bulk_gaps(cfg_zero_field, num_gaps=1)
    cut = 0.5 * (gaps[0][0] + gaps[0][1])
    solver = _ring_eig if periodic else _ribbon_eig
    vals, vecs = solver(cfg_zero_field, Lx, kappa0)
    b = vecs[:, 0].astype(complex)
    steps = int(round(t_final / dt))
    times, pops = [0.0], [1.0]
    for j in range(1, steps + 1):
        tm = (j - 0.5) * dt
        vals, vecs = solver(cfg_zero_field, Lx, kappa0 - F * tm)
        phases = np.exp(-1j * dt * vals)
        b = vecs @ (phases * (vecs.conj().T @ b))
        if j % record_every == 0 or j == steps:
            t = j * dt
            vals, vecs = solver(cfg_zero_field, Lx, kappa0 - F * t)
            low = vecs[:, vals < cut]
            amps = low.conj().T @ b
            times.append(t)
            pops.append(float(np.sum(np.abs(amps) ** 2)))
    return np.array(times), np.array(pops)


def depletion_rate(cfg_zero_field: HallConfig, Lx: int, F: float, t_final: float,
                   drop_target: float = 0.25, **kwargs) -> float:
    """Linear depletion rate tau^-1 of the ground band (about v*/Lx).

    The loss proceeds in one step per Bloch period (each sweep through the
    gap hands a population quantum to the edge channel), so the linear
    rate is read off as the secant through the first quarter-drop, which
    spans an integer number of steps.  Raises when the loss never reaches
    the target within t_final (the periodic-wall regime).
    """
    times, pops = depletion_series(cfg_zero_field, Lx, F, t_final, **kwargs)
    drop = 1.0 - pops
    above = np.flatnonzero(drop >= drop_target)
    if above.size == 0:
        raise RuntimeError(f"depletion never reaches {drop_target:.2f} by t={t_final}")
    i = int(above[0])
    t_star = np.interp(drop_target, [drop[i - 1], drop[i]], [times[i - 1], times[i]]) \
        if i > 0 and drop[i] > drop[i - 1] else times[i]
    return float(drop_target / t_star)


def depletion_drop(cfg_zero_field: HallConfig, Lx: int, F: float, t_final: float,
                   **kwargs) -> float:
    """Total ground-band loss by t_final (for the periodic-BC control)."""
    _, pops = depletion_series(cfg_zero_field, Lx, F, t_final, **kwargs)
    return float(1.0 - pops[-1])


# ---------------------------------------------------------------------------
# dipole oscillations in the trap
# ---------------------------------------------------------------------------

def displaced_gaussian(r0: float, width: float, half_window: int) -> WaveFunction2D:
    """Narrow Gaussian displaced by r0 along x from the trap center."""
    lv = np.arange(-half_window, half_window + 1)[:, None].astype(float)
    mv = np.arange(-half_window, half_window + 1)[None, :].astype(float)
    mag = np.exp(-(((lv - r0) ** 2 + mv**2) / (2.0 * width * width)))
    psi = WaveFunction2D((-half_window, -half_window), mag.astype(complex))
    return WaveFunction2D(psi.origin, psi.amps / psi.norm())


def dipole_oscillation(cfg: HallConfig, r0: float, n_periods: float = 1.0,
                       width: float = 2.0, half_window: int | None = None,
                       dt: float | None = None):
    """Evolve a displaced packet for ``n_periods`` trap-encircling periods.

    Returns (series, snapshots, fidelity) with one snapshot per period
    and fidelity = |<psi(T)|psi(0)>|^2 after the first period.
    """
    from hallsim.dynamics import propagate

    if cfg.confinement_gamma <= 0 or cfg.alpha == 0:
        raise ValueError("dipole oscillations need a trap and a magnetic field")
    omega = cfg.confinement_gamma / (TWO_PI * cfg.alpha)
    t_omega = TWO_PI / omega
    if half_window is None:
        half_window = int(math.ceil(abs(r0) + 6 * width + 8))
    psi0 = displaced_gaussian(r0, width, half_window)
    snap_times = tuple(k * t_omega for k in range(1, int(n_periods) + 1))
    series, snaps = propagate(psi0, cfg, n_periods * t_omega, dt=dt,
                              record_every=50, snapshot_times=snap_times,
                              boundary_tol=1e-5)
    fid = abs(snaps[0][1].overlap(psi0)) ** 2 if snaps else math.nan
    return series, snaps, fid
