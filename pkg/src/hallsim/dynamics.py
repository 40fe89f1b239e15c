"""Time propagation and wave-packet experiments on the 2D lattice.

The propagator is a symmetric split of the Hamiltonian into its diagonal
part and the two hopping directions,

    U(dt) = e^{-i dt D/2} e^{-i dt Hx/2} e^{-i dt Hy} e^{-i dt Hx/2} e^{-i dt D/2},

with every factor applied exactly: the hopping exponentials are dense
one-dimensional matrices prepared once per step size (the Peierls phases on
the y-hops gauge away column by column), so each step is exactly unitary
and costs O(Lx Ly (Lx + Ly)).  A Yoshida composition of the same factors
provides a fourth-order variant for tight energy-conservation work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from hallsim.core import (
    TWO_PI,
    HallConfig,
    Rational,
    WaveFunction2D,
    apply_hamiltonian,
    apply_velocity,
    observables,
    onsite_energies,
)

_YOSHIDA_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_YOSHIDA_W0 = 1.0 - 2.0 * _YOSHIDA_W1


def default_dt(cfg: HallConfig) -> float:
    """T_J / 200 with T_J = 2 pi / sqrt(Jx Jy)."""
    return TWO_PI / math.sqrt(cfg.Jx * cfg.Jy) / 200.0


def _tridiag_expm(n: int, hop: float, dt: float) -> np.ndarray:
    """Dense expm(-i dt T) for the open chain T with hopping -hop/2."""
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    vals, vecs = scipy.linalg.eigh_tridiagonal(np.zeros(n), np.full(n - 1, -0.5 * hop))
    return (vecs * np.exp(-1j * dt * vals)) @ vecs.T


class Propagator2D:
    """Split-step unitary propagation of one window.

    ``onsite`` overrides the diagonal (Stark plus optional confinement)
    when the experiment shifts the trap center or adds extra terms.
    ``order`` 2 is the production default; 4 composes the same symmetric
    step into a fourth-order scheme (three substeps per step).
    """

    def __init__(self, cfg: HallConfig, origin: tuple[int, int], dims: tuple[int, int],
                 dt: float | None = None, onsite: np.ndarray | None = None, order: int = 2):
        if order not in (2, 4):
            raise ValueError("order must be 2 or 4")
        self.cfg = cfg
        self.origin = origin
        self.dims = dims
        self.dt = default_dt(cfg) if dt is None else float(dt)
        self.order = order
        lv = (origin[0] + np.arange(dims[0]))[:, None].astype(float)
        mv = (origin[1] + np.arange(dims[1]))[None, :].astype(float)
        if onsite is None:
            onsite = onsite_energies(cfg, lv, mv)
        self.onsite = np.broadcast_to(onsite, dims)
        # column gauge removing e^{i 2 pi alpha l} from the y-hops
        self._py = np.exp(1j * TWO_PI * cfg.alpha * lv * mv)
        scales = [1.0] if order == 2 else [_YOSHIDA_W1, _YOSHIDA_W0, _YOSHIDA_W1]
        self._stages = []
        for w in scales:
            h = w * self.dt
            self._stages.append((
                np.exp(-0.5j * h * self.onsite),
                _tridiag_expm(dims[0], cfg.Jx, 0.5 * h),
                _tridiag_expm(dims[1], cfg.Jy, h).T,
            ))

    def step(self, amps: np.ndarray) -> np.ndarray:
        p = self._py
        for dphase, ex_half, eyt in self._stages:
            amps = dphase * amps
            amps = ex_half @ amps
            amps = np.conj(p) * ((p * amps) @ eyt)
            amps = ex_half @ amps
            amps = dphase * amps
        return amps


@dataclass(frozen=True, eq=False)
class ObservableSeries:
    """Named observable traces on a strictly increasing time grid (units T_J)."""

    times: np.ndarray
    series: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.series[name]


def propagate(psi0: WaveFunction2D, cfg: HallConfig, t_final: float,
              dt: float | None = None, record_every: int = 20,
              onsite: np.ndarray | None = None, order: int = 2,
              snapshot_times: tuple = (), boundary_tol: float = 1e-6,
              track_energy: bool = False):
    """Evolve ``psi0`` under the windowed Hamiltonian and record observables.

    Returns (ObservableSeries, snapshots); times are reported in units of
    T_J.  Raises when probability within two sites of the window edge
    exceeds ``boundary_tol`` (enlarge the window, don't trust the tail).
    Snapshots are taken at the recorded instants nearest the requested
    times.
    """
    prop = Propagator2D(cfg, psi0.origin, psi0.dims, dt, onsite, order)
    steps = int(round(t_final / prop.dt))
    t_j = TWO_PI / math.sqrt(cfg.Jx * cfg.Jy)
    amps = psi0.amps.astype(complex)

    times, sig, part, m1x, m1y, norms, energies = [], [], [], [], [], [], []
    snapshots = []
    snap_left = sorted(snapshot_times)

    def record(step_index: int):
        t = step_index * prop.dt
        wf = WaveFunction2D(psi0.origin, amps)
        leak = wf.boundary_probability(2)
        if leak > boundary_tol:
            raise RuntimeError(f"boundary leakage {leak:.2e} at t={t / t_j:.1f} T_J; "
                               "enlarge the window")
        obs = observables(wf)
        times.append(t / t_j)
        sig.append(obs.sigma)
        part.append(obs.participation)
        m1x.append(obs.M1x)
        m1y.append(obs.M1y)
        norms.append(obs.norm)
        if track_energy:
            energies.append(float(np.real(wf.overlap(apply_hamiltonian(wf, cfg))))
                            if onsite is None else _energy_with_onsite(wf, cfg, prop.onsite))
        while snap_left and t >= snap_left[0] - 0.5 * prop.dt:
            snapshots.append((t / t_j, WaveFunction2D(psi0.origin, amps.copy())))
            snap_left.pop(0)

    record(0)
    for j in range(1, steps + 1):
        amps = prop.step(amps)
        if j % record_every == 0 or j == steps:
            record(j)

    series = {"sigma": np.array(sig), "participation": np.array(part),
              "M1x": np.array(m1x), "M1y": np.array(m1y), "norm": np.array(norms)}
    if track_energy:
        series["energy"] = np.array(energies)
    return ObservableSeries(np.array(times), series), snapshots


def _energy_with_onsite(wf: WaveFunction2D, cfg: HallConfig, onsite: np.ndarray) -> float:
    # hopping part from the F=0, gamma=0 stencil plus the explicit diagonal
    bare = HallConfig(alpha=cfg.alpha, Jx=cfg.Jx, Jy=cfg.Jy, F=0.0)
    hop = wf.overlap(apply_hamiltonian(wf, bare))
    diag = np.sum(onsite * np.abs(wf.amps) ** 2)
    return float(np.real(hop) + diag)


def convergence_check(psi0: WaveFunction2D, cfg: HallConfig, t_final: float,
                      dt: float, record_every: int = 20, **kwargs) -> float:
    """Max observable shift between dt and dt/2 runs on matching time grids."""
    a, _ = propagate(psi0, cfg, t_final, dt=dt, record_every=record_every, **kwargs)
    b, _ = propagate(psi0, cfg, t_final, dt=0.5 * dt,
                     record_every=2 * record_every, **kwargs)
    worst = 0.0
    for key in ("sigma", "M1x", "M1y"):
        worst = max(worst, float(np.max(np.abs(a[key] - b[key]))))
    return worst


# ---------------------------------------------------------------------------
# Bloch-oscillation velocity of a Bloch wave (alpha = 0)
# ---------------------------------------------------------------------------

def bloch_velocity_analytic(kappa0: tuple[float, float], cfg: HallConfig,
                            t_grid: np.ndarray) -> np.ndarray:
    """Field-projected velocity E'(kappa - F t) of the cosine band."""
    fx, fy = cfg.field_components
    kx = kappa0[0] - fx * np.asarray(t_grid)
    ky = kappa0[1] - fy * np.asarray(t_grid)
    return (cfg.Jx * np.sin(kx) * fx + cfg.Jy * np.sin(ky) * fy) / cfg.F


def bloch_velocity_series(kappa0: tuple[float, float], cfg: HallConfig,
                          t_grid: np.ndarray, size: int = 32,
                          substeps_per_unit: int = 400) -> tuple[np.ndarray, np.ndarray]:
    """(analytic, propagated) velocity series for a Bloch-wave start.

    Propagation runs on a periodized patch in the time-dependent gauge
    (uniform field as a vector potential), where alpha = 0 makes the
    Hamiltonian diagonal in momentum space; kappa0 must sit on the
    size x size momentum grid.
    """
    if cfg.alpha != 0.0:
        raise ValueError("Bloch-wave propagation assumes alpha = 0")
    t_grid = np.asarray(t_grid, dtype=float)
    fx, fy = cfg.field_components
    kxg = TWO_PI * np.arange(size) / size
    kyg = TWO_PI * np.arange(size) / size
    ix = int(round(kappa0[0] * size / TWO_PI)) % size
    iy = int(round(kappa0[1] * size / TWO_PI)) % size
    if not (abs(kxg[ix] - kappa0[0] % TWO_PI) < 1e-12 and
            abs(kyg[iy] - kappa0[1] % TWO_PI) < 1e-12):
        raise ValueError("kappa0 must lie on the periodized momentum grid")
    psi_k = np.zeros((size, size), dtype=complex)
    psi_k[ix, iy] = 1.0

    kx2d = kxg[:, None]
    ky2d = kyg[None, :]
    numeric = np.empty_like(t_grid)
    t_now = 0.0
    for i, t in enumerate(t_grid):
        span = t - t_now
        if span > 0:
            n = max(1, int(math.ceil(span * substeps_per_unit)))
            h = span / n
            for j in range(n):
                tm = t_now + (j + 0.5) * h
                band = (-cfg.Jx * np.cos(kx2d - fx * tm)
                        - cfg.Jy * np.cos(ky2d - fy * tm))
                psi_k = psi_k * np.exp(-1j * h * band)
            t_now = t
        w = np.abs(psi_k) ** 2
        vx = np.sum(w * cfg.Jx * np.sin(kx2d - fx * t))
        vy = np.sum(w * cfg.Jy * np.sin(ky2d - fy * t))
        numeric[i] = (vx * fx + vy * fy) / cfg.F
    return bloch_velocity_analytic(kappa0, cfg, t_grid), numeric


# ---------------------------------------------------------------------------
# two-band Landau-Zener dynamics at alpha = 1/2
# ---------------------------------------------------------------------------

def band_population_series(cfg: HallConfig, t_grid: np.ndarray, grid: int = 48,
                           dt: float | None = None):
    """Upper-band population p2(t) for a filled lower half-flux band.

    Every quasimomentum cell evolves as a two-level system along
    kappa(t) = kappa0 - F t with the Bloch matrix of the doubled cell;
    the result is averaged over a uniform Brillouin-zone grid.  Returns
    (p2_series, resolved) with resolved[t_index, i, j] the per-cell
    populations.
    """
    fx, fy = cfg.field_components
    t_grid = np.asarray(t_grid, dtype=float)
    if dt is None:
        dt = default_dt(cfg) / 4.0
    kx0 = -0.5 * math.pi + math.pi * (np.arange(grid) + 0.5) / grid
    ky0 = -math.pi + TWO_PI * (np.arange(grid) + 0.5) / grid
    kx = np.broadcast_to(kx0[:, None], (grid, grid)).copy()
    ky = np.broadcast_to(ky0[None, :], (grid, grid)).copy()

    def h_fields(kxv, kyv):
        a = -cfg.Jy * np.cos(kyv)
        b = -0.5 * cfg.Jx * (1.0 + np.exp(-2j * kxv))
        return a, b

    def lower_state(kxv, kyv):
        a, b = h_fields(kxv, kyv)
        w = np.sqrt(a * a + np.abs(b) ** 2)
        # lower eigenvector of [[a, b], [b*, -a]] (w > 0 off the Dirac points)
        c1 = b
        c2 = -(a + w)
        n = np.sqrt(np.abs(c1) ** 2 + c2 * c2)
        return c1 / n, c2 / n

    u1, u2 = lower_state(kx, ky)
    resolved = np.empty((t_grid.size, grid, grid))
    p2 = np.empty(t_grid.size)
    t_now = 0.0
    for i, t in enumerate(t_grid):
        span = t - t_now
        if span > 0:
            n = max(1, int(math.ceil(span / dt)))
            h = span / n
            for j in range(n):
                tm = t_now + (j + 0.5) * h
                a, b = h_fields(kx - fx * tm, ky - fy * tm)
                w = np.sqrt(a * a + np.abs(b) ** 2)
                cos = np.cos(h * w)
                sinc = np.where(w > 1e-300, np.sin(h * w) / w, h)
                n1 = cos * u1 - 1j * sinc * (a * u1 + b * u2)
                n2 = cos * u2 - 1j * sinc * (np.conj(b) * u1 - a * u2)
                u1, u2 = n1, n2
            t_now = t
        # project on the instantaneous upper band
        v1, v2 = lower_state(kx - fx * t, ky - fy * t)
        # upper state orthogonal to (v1, v2): (-conj(v2), conj(v1))
        amp = -v2 * u1 + v1 * u2
        resolved[i] = np.abs(amp) ** 2
        p2[i] = resolved[i].mean()
    return p2, resolved


def band_population_refined(cfg: HallConfig, t_grid, grid: int = 48, tol: float = 1e-3):
    """p2(t) with the BZ grid doubled once; raises if it moved more than tol."""
    a, _ = band_population_series(cfg, t_grid, grid=grid)
    b, _ = band_population_series(cfg, t_grid, grid=2 * grid)
    if np.max(np.abs(a - b)) > tol:
        raise RuntimeError("Brillouin-zone grid too coarse for p2(t)")
    return b


# ---------------------------------------------------------------------------
# transporting wave packets (field along a lattice axis)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransportingLine:
    kappas: np.ndarray
    energies: np.ndarray
    velocities: np.ndarray
    vectors: np.ndarray  # (num_kept, chain_dim), overlap-aligned
    p_values: np.ndarray


def follow_transporting_line(cfg: HallConfig, kappa_grid: np.ndarray,
                             p_half: int | None = None, min_overlap: float = 0.9,
                             min_velocity_fraction: float = 0.5) -> TransportingLine:
    """Extract one transporting spectral line of the field-along-y fibers.

    Seeds at the grid center with the interior eigenstate whose velocity
    expectation is closest to the drift velocity v* = F / (2 pi alpha) and
    continues outward along the diabatic line E ~ E0 + v* kappa.  Grid
    points where the line hybridizes with counter-propagating states (no
    candidate keeps a velocity above ``min_velocity_fraction`` v*) are
    skipped; a kept continuation whose overlap with the previous state
    falls below ``min_overlap`` aborts (avoided-crossing proliferation).
    """
    from hallsim import lsx

    direction = cfg.direction
    if not (isinstance(direction, Rational) and (direction.r, direction.q) == (0, 1)):
        raise ValueError("transporting packets are built for the (0, 1) direction")
    if cfg.alpha == 0.0:
        raise ValueError("transporting lines need a magnetic field")
    v_star = cfg.F / (TWO_PI * cfg.alpha)
    frame = lsx.default_frame(cfg, 5) if p_half is None else lsx.RotatedFrame(0, 1, -p_half, p_half)
    p_vals = frame.p_values().astype(float)
    kappa_grid = np.asarray(kappa_grid, dtype=float)

    def solve(kappa):
        vals, vecs = scipy.linalg.eigh(lsx.assemble_rotated(cfg, kappa, frame))
        good = lsx._interior_filter(frame, vecs)
        vx = cfg.Jx * np.einsum("ij,i->j", np.abs(vecs) ** 2,
                                np.sin(kappa - TWO_PI * cfg.alpha * p_vals))
        return vals, vecs, vx, good

    mid = kappa_grid.size // 2
    vals, vecs, vx, good = solve(kappa_grid[mid])
    cands = np.flatnonzero(good & (np.abs(vals) < 3.0 * cfg.F))
    if cands.size == 0:
        raise RuntimeError("no interior states found; enlarge the p-window")
    j = cands[np.argmin(np.abs(vx[cands] - v_star))]
    if vx[j] < min_velocity_fraction * v_star:
        raise RuntimeError("no transporting state at the seed point "
                           f"(best velocity {vx[j]:.3f} vs v*={v_star:.3f})")
    kept = {mid: (vals[j], vx[j], vecs[:, j])}

    for direction_step in (1, -1):
        prev_k, prev_e, prev_vec = kappa_grid[mid], vals[j], vecs[:, j]
        rng = range(mid + 1, kappa_grid.size) if direction_step > 0 else range(mid - 1, -1, -1)
        for i in rng:
            va, ve, vxs, gd = solve(kappa_grid[i])
            e_pred = prev_e + v_star * (kappa_grid[i] - prev_k)
            cand = np.flatnonzero(gd & (np.abs(va - e_pred) < 0.45 * cfg.F)
                                  & (vxs > min_velocity_fraction * v_star))
            if cand.size == 0:
                continue  # hybridized crossing, skip this grid point
            ov = prev_vec.conj() @ ve[:, cand]
            jj = cand[np.argmax(np.abs(ov))]
            best = np.abs(prev_vec.conj() @ ve[:, jj])
            if best < min_overlap:
                raise RuntimeError("avoided-crossing proliferation: line overlap "
                                   f"{best:.3f} at kappa={kappa_grid[i]:.4f}")
            phase = np.angle(prev_vec.conj() @ ve[:, jj])
            kept[i] = (va[jj], vxs[jj], ve[:, jj] * np.exp(-1j * phase))
            prev_k, prev_e, prev_vec = kappa_grid[i], va[jj], kept[i][2]

    order = sorted(kept)
    kappas = kappa_grid[order]
    energies = np.array([kept[i][0] for i in order])
    velocities = np.array([kept[i][1] for i in order])
    vectors = np.array([kept[i][2] for i in order])
    return TransportingLine(kappas, energies, velocities, vectors, frame.p_values())


def transporting_packet(cfg: HallConfig, line: TransportingLine,
                        envelope: np.ndarray, l_origin_span: tuple[int, int]) -> WaveFunction2D:
    """Localize transporting states with a quasimomentum envelope g(kappa).

    The fiber states live in the field-aligned gauge (phases on the
    x-hops); the returned state is mapped back to the Landau gauge of
    :func:`hallsim.core.apply_hamiltonian` via psi -> psi e^{-i 2 pi
    alpha l m}.
    """
    g = np.asarray(envelope, dtype=complex)
    if g.shape != line.kappas.shape:
        raise ValueError("envelope must match the kappa grid")
    g = g / math.sqrt(float(np.sum(np.abs(g) ** 2)))
    l_lo, l_hi = l_origin_span
    lv = np.arange(l_lo, l_hi + 1)
    # psi[l, m] = sum_j g_j e^{i kappa_j l} b^j_m  (transverse plane wave)
    phases = np.exp(1j * np.outer(lv, line.kappas)) * g[None, :]
    amps = phases @ line.vectors
    mv = line.p_values[None, :]
    gauge = np.exp(-1j * TWO_PI * cfg.alpha * lv[:, None] * mv)
    psi = WaveFunction2D((l_lo, int(line.p_values[0])), amps * gauge)
    return WaveFunction2D(psi.origin, psi.amps / psi.norm())


def expectation_vx(psi: WaveFunction2D, cfg: HallConfig) -> float:
    return float(np.real(psi.overlap(apply_velocity(psi, cfg, "x"))))


# ---------------------------------------------------------------------------
# incoherent initial packets
# ---------------------------------------------------------------------------

def scrambled_gaussian(width: float, seed: int, half_lx: int, half_ly: int) -> WaveFunction2D:
    """Gaussian magnitudes with independent uniform random phases.

    Deterministic per seed; the participation ratio of the clean envelope
    is about 2 pi width^2 (the effective support area).
    """
    if width < 5:
        raise ValueError("scrambled packets need width >= 5 sites")
    rng = np.random.default_rng(seed)
    lv = np.arange(-half_lx, half_lx + 1)[:, None].astype(float)
    mv = np.arange(-half_ly, half_ly + 1)[None, :].astype(float)
    mag = np.exp(-(lv**2 + mv**2) / (2.0 * width * width))
    phase = np.exp(1j * TWO_PI * rng.random((lv.size, mv.size)))
    psi = WaveFunction2D((-half_lx, -half_ly), mag * phase)
    return WaveFunction2D(psi.origin, psi.amps / psi.norm())


def emit_series_csv(path, series: ObservableSeries):
    from hallsim.lsx import _write_csv

    names = sorted(series.series)
    rows = [(t, *[series[n][i] for n in names]) for i, t in enumerate(series.times)]
    _write_csv(path, ("time_TJ", *names), rows)
