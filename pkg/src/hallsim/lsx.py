"""Extended eigenstates for rational field orientation beta = r/q.

Rotating coordinates so the electric field points along one axis embeds the
lattice into a finer square lattice of spacing d = 1/sqrt(r^2+q^2); a plane
wave in the transverse direction then reduces the 2D problem to a banded
Hermitian chain over the field-direction index p, with off-diagonals at
offsets r and q:

    -Jx/2 [Q(p) e^{+i q d kappa} b_{p+r} + Q*(p-r) e^{-i q d kappa} b_{p-r}]
    -Jy/2 [R(p) e^{-i r d kappa} b_{p+q} + R*(p-q) e^{+i r d kappa} b_{p-q}]
    + d F p b_p = E b_p,

    Q(p) = exp(-i 2 pi alpha q p / N),  R(p) = exp(+i 2 pi alpha r p / N).

Diagonalizing per transverse quasimomentum kappa gives the energy bands;
their widths collapse as F^-(r+q-1) at strong field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from hallsim.core import TWO_PI, HallConfig, Rational
from hallsim.limits import BandStructure

EDGE_FRACTION = 0.05          # outer share of the p-window treated as edge
EDGE_WEIGHT_MAX = 1e-8        # interior states keep less than this out there
AMBIGUITY_GAP = 1e-10         # adjacent-band distance that flags tracking


def _rational_direction(cfg: HallConfig) -> Rational:
    if not isinstance(cfg.direction, Rational):
        raise ValueError("extended-state routines need a rational direction")
    return cfg.direction


@dataclass(frozen=True)
class RotatedFrame:
    """Geometry of the field-aligned frame for direction (r, q)."""

    r: int
    q: int
    p_min: int
    p_max: int

    def __post_init__(self):
        if (self.r, self.q) == (0, 0):
            raise ValueError("direction (0, 0) is invalid")
        if self.p_max <= self.p_min:
            raise ValueError("empty p-window")

    @property
    def N(self) -> int:
        return self.r**2 + self.q**2

    @property
    def d(self) -> float:
        return 1.0 / math.sqrt(self.N)

    @property
    def size(self) -> int:
        return self.p_max - self.p_min + 1

    def p_values(self) -> np.ndarray:
        return np.arange(self.p_min, self.p_max + 1)


def default_frame(cfg: HallConfig, num_bands: int = 5) -> RotatedFrame:
    """p-window sized so the requested central bands are truncation-free."""
    d = _rational_direction(cfg)
    dd = 1.0 / math.sqrt(d.norm2)
    stark = max(cfg.F * dd, 1e-6)
    half = 10 * max(d.r, d.q) + 4 * num_bands + int(math.ceil(6.0 * (cfg.Jx + cfg.Jy) / stark))
    half = min(half, 1200)
    return RotatedFrame(d.r, d.q, -half, half)


def assemble_rotated(cfg: HallConfig, kappa: float, frame: RotatedFrame) -> np.ndarray:
    """Banded Hermitian matrix of the field-aligned chain at quasimomentum kappa."""
    r, q, n = frame.r, frame.q, frame.N
    d = frame.d
    p = frame.p_values().astype(float)
    size = frame.size
    h = np.zeros((size, size), dtype=complex)
    h[np.arange(size), np.arange(size)] = d * cfg.F * p

    def add_hops(offset: int, coeff: np.ndarray):
        # coeff[i] couples p_i -> p_i + offset; conjugate added for Hermiticity
        if offset == 0:
            h[np.arange(size), np.arange(size)] += 2.0 * np.real(coeff)
            return
        idx = np.arange(size - offset)
        h[idx, idx + offset] += coeff[idx]
        h[idx + offset, idx] += np.conj(coeff[idx])

    qx = np.exp(-1j * TWO_PI * cfg.alpha * q * p / n)     # Q(p)
    add_hops(r, -0.5 * cfg.Jx * qx * np.exp(1j * q * d * kappa))
    ry = np.exp(1j * TWO_PI * cfg.alpha * r * p / n)      # R(p)
    add_hops(q, -0.5 * cfg.Jy * ry * np.exp(-1j * r * d * kappa))
    return h


def rotated_gauge_patch(cfg: HallConfig, origin: tuple[int, int], dims: tuple[int, int]) -> np.ndarray:
    """Window Hamiltonian in the field-aligned gauge (same sites as core).

    Gauge-equivalent to :func:`hallsim.core.hamiltonian_matrix` on any
    window, hence with an identical spectrum; the x-hops carry
    exp(-i 2 pi alpha q (r l + q m)/N), the y-hops exp(+i 2 pi alpha r
    (r l + q m)/N), and the diagonal is the same Stark term.
    """
    d = _rational_direction(cfg)
    r, q, n = d.r, d.q, d.norm2
    lx, ly = dims
    lv = origin[0] + np.arange(lx)
    mv = origin[1] + np.arange(ly)
    ll, mm = np.meshgrid(lv, mv, indexing="ij")
    proj = (r * ll + q * mm).astype(float)  # = p index of each site
    size = lx * ly
    idx = np.arange(size).reshape(lx, ly)
    h = np.zeros((size, size), dtype=complex)
    h[np.arange(size), np.arange(size)] = cfg.F * proj.ravel() / math.sqrt(n)

    ax = -0.5 * cfg.Jx * np.exp(-1j * TWO_PI * cfg.alpha * q * proj[:-1, :] / n)
    h[idx[:-1, :].ravel(), idx[1:, :].ravel()] = ax.ravel()
    h[idx[1:, :].ravel(), idx[:-1, :].ravel()] = np.conj(ax).ravel()
    ay = -0.5 * cfg.Jy * np.exp(1j * TWO_PI * cfg.alpha * r * proj[:, :-1] / n)
    h[idx[:, :-1].ravel(), idx[:, 1:].ravel()] = ay.ravel()
    h[idx[:, 1:].ravel(), idx[:, :-1].ravel()] = np.conj(ay).ravel()
    return h


def extended_patch_matrix(cfg: HallConfig, s_period: int, frame: RotatedFrame) -> np.ndarray:
    """Extended-lattice Hamiltonian, periodic in s, Dirichlet in p.

    All N sublattices are solved simultaneously; the spectrum equals the
    union of :func:`assemble_rotated` spectra over the quantized
    quasimomenta kappa_j = 2 pi j / (d s_period).
    """
    r, q, n = frame.r, frame.q, frame.N
    d = frame.d
    ps = frame.p_values()
    size_p = frame.size
    size = s_period * size_p

    def site(s: int, ip: int) -> int:
        return (s % s_period) * size_p + ip

    h = np.zeros((size, size), dtype=complex)
    for ip, p in enumerate(ps):
        for s in range(s_period):
            h[site(s, ip), site(s, ip)] = d * cfg.F * p
            if ip + r < size_p:  # x-hop: (s, p) -> (s+q, p+r)
                c = -0.5 * cfg.Jx * np.exp(-1j * TWO_PI * cfg.alpha * q * p / n)
                h[site(s, ip), site(s + q, ip + r)] += c
                h[site(s + q, ip + r), site(s, ip)] += np.conj(c)
            if ip + q < size_p:  # y-hop: (s, p) -> (s-r, p+q)
                c = -0.5 * cfg.Jy * np.exp(1j * TWO_PI * cfg.alpha * r * p / n)
                h[site(s, ip), site(s - r, ip + q)] += c
                h[site(s - r, ip + q), site(s, ip)] += np.conj(c)
    return h


# ---------------------------------------------------------------------------
# band structures
# ---------------------------------------------------------------------------

def _interior_filter(frame: RotatedFrame, vecs: np.ndarray) -> np.ndarray:
    edge = max(1, int(math.ceil(EDGE_FRACTION * frame.size)))
    weight = (np.abs(vecs[:edge, :]) ** 2).sum(axis=0) \
        + (np.abs(vecs[-edge:, :]) ** 2).sum(axis=0)
    return weight < EDGE_WEIGHT_MAX


def extended_bands(cfg: HallConfig, kappa_grid: np.ndarray, num_bands: int = 5,
                   frame: RotatedFrame | None = None) -> BandStructure:
    """Interior energy bands E_nu(kappa), ascending per kappa.

    The ``num_bands`` interior eigenvalues closest to E = 0 are kept; the
    spectrum is periodic in kappa with period 2 pi / sqrt(N) and forms
    ladder families offset by d F.
    """
    if frame is None:
        frame = default_frame(cfg, num_bands)
    kappa = np.asarray(kappa_grid, dtype=float)
    bands = np.empty((kappa.size, num_bands))
    for i, k in enumerate(kappa):
        vals, vecs = scipy.linalg.eigh(assemble_rotated(cfg, k, frame))
        good = _interior_filter(frame, vecs)
        if good.sum() < num_bands:
            raise RuntimeError("p-window too small: not enough interior states")
        ev = vals[good]
        sel = np.argsort(np.abs(ev))[:num_bands]
        bands[i] = np.sort(ev[sel])
    return BandStructure(kappa, bands, TWO_PI * frame.d)


def tracked_band(cfg: HallConfig, kappa_grid: np.ndarray, seed_energy: float = 0.0,
                 frame: RotatedFrame | None = None) -> tuple[np.ndarray, bool]:
    """One band followed across kappa by maximal eigenvector overlap.

    Returns (energies, ambiguous); ``ambiguous`` is set when an adjacent
    eigenvalue approaches the tracked one within 1e-10, in which case the
    continuation is not trustworthy.
    """
    if frame is None:
        frame = default_frame(cfg, 5)
    kappa = np.asarray(kappa_grid, dtype=float)
    energies = np.empty(kappa.size)
    ambiguous = False
    prev_vec = None
    for i, k in enumerate(kappa):
        vals, vecs = scipy.linalg.eigh(assemble_rotated(cfg, k, frame))
        if prev_vec is None:
            good = np.flatnonzero(_interior_filter(frame, vecs))
            j = good[np.argmin(np.abs(vals[good] - seed_energy))]
        else:
            j = int(np.argmax(np.abs(prev_vec.conj() @ vecs)))
        others = np.delete(vals, j)
        if others.size and np.min(np.abs(others - vals[j])) < AMBIGUITY_GAP:
            ambiguous = True
        energies[i] = vals[j]
        prev_vec = vecs[:, j]
    return energies, ambiguous


@dataclass(frozen=True)
class ScanPoint:
    F: float
    width: float
    ambiguous: bool


def bandwidth_scan(cfg_template: HallConfig, F_list, num_kappa: int = 256,
                   max_refine: int = 3) -> list[ScanPoint]:
    """Width of the tracked central band for each field magnitude.

    The kappa grid is doubled until the width changes by less than 1e-8,
    starting from ``num_kappa`` points per Brillouin period.
    """
    direction = _rational_direction(cfg_template)
    out = []
    for f in F_list:
        cfg = HallConfig(alpha=cfg_template.alpha, Jx=cfg_template.Jx, Jy=cfg_template.Jy,
                         F=float(f), direction=direction, gauge=cfg_template.gauge)
        frame = default_frame(cfg, 5)
        n = num_kappa
        prev_width = None
        ambiguous = False
        for _ in range(max_refine + 1):
            kappa = np.linspace(0.0, TWO_PI * frame.d, n, endpoint=False)
            energies, ambiguous = tracked_band(cfg, kappa, 0.0, frame)
            width = float(energies.max() - energies.min())
            if prev_width is not None and abs(width - prev_width) < 1e-8:
                break
            prev_width = width
            n *= 2
        out.append(ScanPoint(float(f), width, ambiguous))
    return out


def fit_loglog_slope(F_values, widths) -> float:
    """Least-squares slope of log(width) versus log(F)."""
    f = np.log(np.asarray(F_values, dtype=float))
    w = np.log(np.asarray(widths, dtype=float))
    return float(np.polyfit(f, w, 1)[0])


def asymptotic_exponent(direction: Rational) -> int:
    """Perturbative order of the first non-vanishing width, r + q - 1."""
    return direction.r + direction.q - 1


def perturbative_bandwidth(cfg: HallConfig) -> float:
    """Closed-form large-F bandwidth for the directions that admit one.

    (0, 1): the first-order cosine band survives, width 2 Jx.
    (1, 1): first order vanishes; the second-order width is
            2 Jx Jy |sin(pi alpha)| / (d F) with d = 1/sqrt(2).
    Other directions have no closed form here; use
    :func:`asymptotic_exponent` for the decay power.
    """
    d = _rational_direction(cfg)
    if (d.r, d.q) == (0, 1):
        return 2.0 * cfg.Jx
    if (d.r, d.q) == (1, 1):
        dd = 1.0 / math.sqrt(2.0)
        return 2.0 * cfg.Jx * cfg.Jy * abs(math.sin(math.pi * cfg.alpha)) / (dd * cfg.F)
    raise ValueError(f"no closed-form width for direction ({d.r}, {d.q})")


def emit_band_csv(path, band_structure: BandStructure):
    """CSV columns (kappa, band_index, energy), one row per point."""
    rows = []
    for i, k in enumerate(band_structure.kappa_grid):
        for nu in range(band_structure.num_bands):
            rows.append((k, nu, band_structure.bands[i, nu]))
    _write_csv(path, ("kappa", "band_index", "energy"), rows)


def emit_scan_csv(path, points: list[ScanPoint]):
    """CSV columns (F, bandwidth)."""
    _write_csv(path, ("F", "bandwidth"), [(p.F, p.width) for p in points])


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")
