"""Half-flux (alpha = 1/2) and uniaxial staggered magnetic fields.

At alpha = 1/2 the Peierls factor is +-1 and the lattice splits into A/B
columns; generalizing the B-column hop to Jy e^{i phi} covers staggered
fields, with phi = pi recovering the uniform half-flux case.  The coupled
A/B equations in the field-aligned frame read (q even, direction (r, q)
measured in cells of the doubled lattice)

  -Jx/2 (b^B_{p-q} e^{-i r dt k} + b^B_p) - Jy/2 (b^A_{p-r} e^{i q dt k}
      + b^A_{p+r} e^{-i q dt k}) + dt Ft p b^A_p = E b^A_p
  -Jx/2 (b^A_{p+q} e^{+i r dt k} + b^A_p) - Jy/2 (e^{i phi} b^B_{p-r}
      e^{i q dt k} + e^{-i phi} b^B_{p+r} e^{-i q dt k})
      + dt Ft (p + q/2) b^B_p = E b^B_p

with dt = 1/sqrt(r^2+q^2) and Ft = F sqrt((r^2+q^2)/(r^2+(q/2)^2)).
A generating-function transform turns the same system into a 2x2 ODE in
the angle conjugate to p whose monodromy quantizes the spectrum, and an
averaging (KBM) expansion of that ODE gives analytic bandwidths such as
dE = |Jy sin(phi/2) J_1(2 sqrt(2) Jx / F)| for the diagonal direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from hallsim.core import TWO_PI, HallConfig, Rational
from hallsim.limits import BandStructure, bessel_j

EDGE_WEIGHT_MAX = 1e-8


@dataclass(frozen=True)
class SublatticeSystem:
    """Staggered-field problem in the doubled-lattice frame.

    ``r, q`` give the field direction in units of the doubled-lattice
    primary axes (q even; the diagonal of the original lattice is (1, 2)),
    ``phi`` the extra hop phase on B columns.
    """

    r: int
    q: int
    F: float
    phi: float = math.pi
    Jx: float = 1.0
    Jy: float = 1.0

    def __post_init__(self):
        if self.q % 2:
            raise ValueError("the staggered-frame direction needs even q")
        if (self.r, self.q) == (0, 0) or self.r < 0 or self.q < 0:
            raise ValueError("invalid direction")
        if self.F <= 0:
            raise ValueError("staggered chains need F > 0")

    @property
    def d_tilde(self) -> float:
        return 1.0 / math.sqrt(self.r**2 + self.q**2)

    @property
    def F_tilde(self) -> float:
        return self.F * math.sqrt((self.r**2 + self.q**2) / (self.r**2 + (self.q / 2) ** 2))

    @property
    def ladder_spacing(self) -> float:
        return self.d_tilde * self.F_tilde


def staggered_chain_matrix(sys: SublatticeSystem, kappa: float, p_half: int) -> np.ndarray:
    """Coupled A/B chain at transverse quasimomentum kappa.

    Basis ordering: index 2*(p - p_min) for A_p, +1 for B_p.
    """
    r, q = sys.r, sys.q
    dt = sys.d_tilde
    dft = sys.ladder_spacing
    ps = np.arange(-p_half, p_half + 1)
    npts = ps.size
    size = 2 * npts
    h = np.zeros((size, size), dtype=complex)

    def a_idx(ip):
        return 2 * ip

    def b_idx(ip):
        return 2 * ip + 1

    exq = np.exp(1j * q * dt * kappa)
    exr = np.exp(1j * r * dt * kappa)
    for ip, p in enumerate(ps):
        h[a_idx(ip), a_idx(ip)] = dft * p
        h[b_idx(ip), b_idx(ip)] = dft * (p + 0.5 * q)
        # A <- B couplings (x-hops): b^B_{p-q} e^{-i r dt k} and b^B_p
        h[a_idx(ip), b_idx(ip)] += -0.5 * sys.Jx
        h[b_idx(ip), a_idx(ip)] += -0.5 * sys.Jx
        if ip - q >= 0:
            c = -0.5 * sys.Jx * np.conj(exr)
            h[a_idx(ip), b_idx(ip - q)] += c
            h[b_idx(ip - q), a_idx(ip)] += np.conj(c)
        # A <- A couplings (y-hops)
        if ip - r >= 0:
            c = -0.5 * sys.Jy * exq
            h[a_idx(ip), a_idx(ip - r)] += c
            h[a_idx(ip - r), a_idx(ip)] += np.conj(c)
        # B <- B couplings (y-hops with the staggered phase)
        if ip - r >= 0:
            c = -0.5 * sys.Jy * np.exp(1j * sys.phi) * exq
            h[b_idx(ip), b_idx(ip - r)] += c
            h[b_idx(ip - r), b_idx(ip)] += np.conj(c)
    return h


def _interior_levels(sys: SublatticeSystem, kappa: float, p_half: int,
                     num_levels: int) -> np.ndarray:
    h = staggered_chain_matrix(sys, kappa, p_half)
    vals, vecs = scipy.linalg.eigh(h)
    edge = max(2, int(0.05 * h.shape[0]))
    w = (np.abs(vecs[:edge, :]) ** 2).sum(axis=0) + (np.abs(vecs[-edge:, :]) ** 2).sum(axis=0)
    good = w < EDGE_WEIGHT_MAX
    ev = vals[good]
    if ev.size < num_levels:
        raise RuntimeError("p-window too small for the requested levels")
    sel = np.argsort(np.abs(ev))[:num_levels]
    return np.sort(ev[sel])


def default_p_half(sys: SublatticeSystem, num_levels: int = 6) -> int:
    return 10 * max(sys.r, sys.q) + 2 * num_levels + int(
        math.ceil(6.0 * (sys.Jx + sys.Jy) / sys.ladder_spacing))


def piflux_bands(sys: SublatticeSystem, kappa_grid: np.ndarray, num_bands: int = 6,
                 p_half: int | None = None) -> BandStructure:
    """Interior bands of the staggered A/B chain, ascending per kappa.

    Columns are the ``num_bands`` interior levels closest to E = 0; when
    dispersive bands sweep across that selection boundary (strong-tilt
    transporting lines), per-column statistics mix bands -- use
    :func:`central_pair_width` or tracked continuation for widths there.
    """
    if p_half is None:
        p_half = default_p_half(sys, num_bands)
    kappa = np.asarray(kappa_grid, dtype=float)
    bands = np.empty((kappa.size, num_bands))
    for i, k in enumerate(kappa):
        bands[i] = _interior_levels(sys, k, p_half, num_bands)
    return BandStructure(kappa, bands, TWO_PI * sys.d_tilde)


def halfflux_xy_bands(cfg_like: HallConfig, kappa_grid: np.ndarray, num_bands: int = 6):
    """Uniform half-flux bands for a direction given in original-lattice axes.

    Directions with odd q (e.g. beta = 1/3) have no even-q representation
    in the doubled-lattice frame, so they are solved directly as the
    alpha = 1/2 field-aligned chain.
    """
    from hallsim import lsx

    cfg = HallConfig(alpha=0.5, Jx=cfg_like.Jx, Jy=cfg_like.Jy, F=cfg_like.F,
                     direction=cfg_like.direction)
    return lsx.extended_bands(cfg, kappa_grid, num_bands)


def halfflux_xy_bandwidth_scan(cfg_like: HallConfig, F_list, num_kappa: int = 192):
    """Central-band width versus F for the uniform half-flux problem."""
    from hallsim import lsx

    cfg = HallConfig(alpha=0.5, Jx=cfg_like.Jx, Jy=cfg_like.Jy, F=1.0,
                     direction=cfg_like.direction)
    return lsx.bandwidth_scan(cfg, F_list, num_kappa=num_kappa)


def central_pair_levels(sys: SublatticeSystem, kappa: float,
                        p_half: int | None = None) -> tuple[float, float]:
    """The +-lambda(kappa) level pair of the central ladder rung.

    The A and B ladders interleave at integer multiples of the spacing, so
    the two levels nearest E = 0 bracket it; they are the staggered-field
    splitting of one flat rung.
    """
    if p_half is None:
        p_half = default_p_half(sys)
    levels = _interior_levels(sys, kappa, p_half, 2)
    return float(levels[0]), float(levels[1])


def central_pair_width(sys: SublatticeSystem, num_kappa: int = 128,
                       p_half: int | None = None) -> float:
    """Width (max - min over kappa) of the upper central-pair band."""
    kappa = np.linspace(0.0, TWO_PI * sys.d_tilde, num_kappa, endpoint=False)
    upper = np.array([central_pair_levels(sys, k, p_half)[1] for k in kappa])
    return float(upper.max() - upper.min())


def tracked_bandwidth(sys: SublatticeSystem, num_kappa: int = 128,
                      p_half: int | None = None, seed_energy: float | None = None) -> float:
    """Width of one band tracked by eigenvector overlap across kappa."""
    if p_half is None:
        p_half = default_p_half(sys)
    kappa = np.linspace(0.0, TWO_PI * sys.d_tilde, num_kappa, endpoint=False)
    prev = None
    energies = np.empty(kappa.size)
    for i, k in enumerate(kappa):
        h = staggered_chain_matrix(sys, k, p_half)
        vals, vecs = scipy.linalg.eigh(h)
        if prev is None:
            edge = max(2, int(0.05 * h.shape[0]))
            w = (np.abs(vecs[:edge, :]) ** 2).sum(axis=0) \
                + (np.abs(vecs[-edge:, :]) ** 2).sum(axis=0)
            good = np.flatnonzero(w < EDGE_WEIGHT_MAX)
            target = 0.0 if seed_energy is None else seed_energy
            j = good[np.argmin(np.abs(vals[good] - target))]
        else:
            j = int(np.argmax(np.abs(prev.conj() @ vecs)))
        energies[i] = vals[j]
        prev = vecs[:, j]
    return float(energies.max() - energies.min())


# ---------------------------------------------------------------------------
# generating-function (monodromy) quantization
# ---------------------------------------------------------------------------

def _ode_matrix(sys: SublatticeSystem, kappa: float, theta: float) -> np.ndarray:
    dt = sys.d_tilde
    u = dt * (sys.q * kappa + sys.r * theta)
    w = dt * (sys.q * theta - sys.r * kappa)
    off = 0.5 * sys.Jx * (1.0 + np.exp(1j * w))
    return np.array([
        [sys.Jy * math.cos(u), off],
        [np.conj(off), -0.5 * sys.ladder_spacing * sys.q + sys.Jy * math.cos(u + sys.phi)],
    ])


def quantization_monodromy(sys: SublatticeSystem, kappa: float,
                           rtol: float = 1e-11) -> np.ndarray:
    """Monodromy of the 2x2 generating-function ODE over one angle period."""
    from scipy.integrate import solve_ivp

    theta_max = TWO_PI / sys.d_tilde

    def rhs(theta, y):
        z = y.reshape(2, 2)
        return ((1j / sys.F_tilde) * (_ode_matrix(sys, kappa, theta) @ z)).ravel()

    sol = solve_ivp(rhs, (0.0, theta_max), np.eye(2, dtype=complex).ravel(),
                    method="DOP853", rtol=rtol, atol=rtol)
    if not sol.success:
        raise RuntimeError(f"monodromy integration failed: {sol.message}")
    return sol.y[:, -1].reshape(2, 2)


def ode_quantized_levels(sys: SublatticeSystem, kappa: float,
                         level_window: float | None = None) -> np.ndarray:
    """Energies from the periodicity condition on the generating functions.

    The energy enters the ODE only through a global phase, so the two
    monodromy eigenphases mu give the complete pair of ladders
    E = dt Ft (k - mu / 2 pi), k integer.
    """
    w0 = quantization_monodromy(sys, kappa)
    det = np.linalg.det(w0)
    if abs(abs(det) - 1.0) > 1e-10:
        raise RuntimeError("monodromy lost unitarity; tighten tolerances")
    mus = np.angle(np.linalg.eigvals(w0))
    spacing = sys.ladder_spacing
    if level_window is None:
        level_window = 3.0 * spacing
    kmax = int(math.ceil(level_window / spacing)) + 1
    levels = [spacing * (k - mu / TWO_PI) for mu in mus for k in range(-kmax, kmax + 1)]
    levels = np.sort([e for e in levels if abs(e) <= level_window])
    return levels


def ode_quantized_bands(sys: SublatticeSystem, kappa_grid: np.ndarray,
                        num_bands: int = 6) -> BandStructure:
    """Band structure from the monodromy quantization (cross-method oracle)."""
    kappa = np.asarray(kappa_grid, dtype=float)
    bands = np.empty((kappa.size, num_bands))
    for i, k in enumerate(kappa):
        levels = ode_quantized_levels(sys, k)
        sel = np.argsort(np.abs(levels))[:num_bands]
        bands[i] = np.sort(levels[sel])
    return BandStructure(kappa, bands, TWO_PI * sys.d_tilde)


# ---------------------------------------------------------------------------
# KBM averaging bandwidths
# ---------------------------------------------------------------------------

def _kbm_g(sys: SublatticeSystem, kappa: float, theta: np.ndarray) -> np.ndarray:
    dt = sys.d_tilde
    lam1 = dt * (sys.q * kappa - sys.r * theta)
    lam2 = 0.5 * dt * (sys.r * kappa + sys.q * theta)
    amp = (4.0 * sys.Jx / sys.F) * math.sqrt(sys.r**2 + (sys.q / 2) ** 2) / sys.q
    return (-sys.Jy * math.sin(0.5 * sys.phi) * np.sin(lam1 + 0.5 * sys.phi)
            * np.exp(1j * amp * np.sin(lam2)))


def kbm_correction(sys: SublatticeSystem, kappa: float, second_order: bool = False,
                   samples: int = 4096) -> float:
    """Averaged flat-band correction lambda(kappa) of the staggered chain."""
    theta = np.linspace(0.0, TWO_PI / sys.d_tilde, samples, endpoint=False)
    g = _kbm_g(sys, kappa, theta)
    mean = g.mean()
    lam2 = abs(mean) ** 2
    if second_order:
        prev = None
        cutoff = 64
        while True:
            coeffs = np.fft.fft(g) / samples
            gp = np.zeros_like(g)
            for nu in range(1, cutoff + 1):
                gp += coeffs[nu] * np.exp(1j * nu * sys.d_tilde * theta) / (1j * nu * sys.d_tilde)
                gp += coeffs[-nu] * np.exp(-1j * nu * sys.d_tilde * theta) / (-1j * nu * sys.d_tilde)
            corr = np.mean(gp * np.conj(g))
            lam = math.sqrt(lam2 + (abs(corr) / sys.F_tilde) ** 2)
            if prev is not None and abs(lam - prev) < 1e-10:
                return lam
            prev = lam
            cutoff *= 2
            if cutoff > 1024:
                return lam
    return math.sqrt(lam2)


def kbm_bandwidth(sys: SublatticeSystem, second_order: bool = False,
                  num_kappa: int = 128) -> float:
    """Analytic (averaging) bandwidth of the staggered-field bands.

    For the diagonal direction (1, 2) the first-order result is the closed
    form |Jy sin(phi/2) J_1(2 sqrt(2) Jx / F)|; other directions are
    averaged numerically.
    """
    if (sys.r, sys.q) == (1, 2) and not second_order:
        return abs(sys.Jy * math.sin(0.5 * sys.phi)
                   * bessel_j(1, 2.0 * math.sqrt(2.0) * sys.Jx / sys.F))
    kappa = np.linspace(0.0, TWO_PI * sys.d_tilde, num_kappa, endpoint=False)
    lam = np.array([kbm_correction(sys, k, second_order) for k in kappa])
    return float(lam.max() - lam.min())


def first_collapse_inverse_field(sys: SublatticeSystem) -> float:
    """1/F of the first band collapse, j_{1,1} / (2 sqrt(2) Jx) for (1, 2)."""
    from hallsim.limits import first_zero_j1

    if (sys.r, sys.q) != (1, 2):
        raise ValueError("closed-form collapse known for direction (1, 2) only")
    return first_zero_j1() / (2.0 * math.sqrt(2.0) * sys.Jx)


# ---------------------------------------------------------------------------
# half-flux dispersion and the two-component lattice
# ---------------------------------------------------------------------------

def piflux_dispersion(kx, ky, Jx: float = 1.0, Jy: float = 1.0):
    """Two-band half-flux dispersion -+ sqrt(Jx^2 cos^2 kx + Jy^2 cos^2 ky).

    Quasimomenta are in original-lattice units; Dirac cones sit at
    cos kx = cos ky = 0.  Returns (lower, upper), vectorized.
    """
    root = np.sqrt((Jx * np.cos(np.asarray(kx))) ** 2 + (Jy * np.cos(np.asarray(ky))) ** 2)
    return -root, root


def halfflux_bloch_matrix(kx: float, ky: float, Jx: float = 1.0, Jy: float = 1.0) -> np.ndarray:
    """2x2 Bloch block of the A/B system at F = 0 (doubled cell along x)."""
    off = -0.5 * Jx * (1.0 + np.exp(-2j * kx))
    return np.array([[-Jy * math.cos(ky), off],
                     [np.conj(off), Jy * math.cos(ky)]])


def halfflux_patch_matrix(cfg: HallConfig, origin: tuple[int, int], dims: tuple[int, int],
                          phi: float = math.pi) -> np.ndarray:
    """Real-space A/B-column lattice on a window (columns alternate with l).

    With phi = pi this is exactly the alpha = 1/2 Hamiltonian in the
    Landau gauge; general phi staggers the y-hop phase on odd columns.
    """
    import scipy.sparse as sp

    lx, ly = dims
    n = lx * ly
    lv = origin[0] + np.arange(lx)
    mv = origin[1] + np.arange(ly)
    ll, mm = np.meshgrid(lv, mv, indexing="ij")
    fx, fy = cfg.field_components
    diag = (fx * ll + fy * mm).astype(complex).ravel()
    idx = np.arange(n).reshape(lx, ly)
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [diag]
    r = idx[:-1, :].ravel()
    c = idx[1:, :].ravel()
    v = np.full(r.size, -0.5 * cfg.Jx, dtype=complex)
    rows += [r, c]
    cols += [c, r]
    vals += [v, np.conj(v)]
    r = idx[:, :-1].ravel()
    c = idx[:, 1:].ravel()
    odd = (ll[:, :-1].ravel() % 2).astype(bool)
    v = np.where(odd, -0.5 * cfg.Jy * np.exp(1j * phi), -0.5 * cfg.Jy + 0j)
    rows += [r, c]
    cols += [c, r]
    vals += [v, np.conj(v)]
    h = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return h.toarray()


def emit_comparison_csv(path, inv_F, widths_numeric, widths_kbm):
    from hallsim.lsx import _write_csv

    _write_csv(path, ("inv_F", "bandwidth_numeric", "bandwidth_kbm"),
               list(zip(inv_F, widths_numeric, widths_kbm)))
