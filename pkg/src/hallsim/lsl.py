"""Localized eigenstates for irrational field orientation.

For beta = Fx/Fy irrational the spectrum is the discrete two-index ladder
E_{n,k} = Fx n + Fy k and the eigenstates are localized.  They are computed
here by the fiber evolution-operator method: a plane-wave substitution in
the y direction reduces the 2D Schroedinger equation to a kappa-labeled
family of driven 1D chains,

    i db_l/dt = -Jx/2 (b_{l+1} + b_{l-1})
                - Jy cos(2 pi alpha l + kappa - Fy t) b_l + Fx l b_l,

whose one-period (T_y = 2 pi / Fy) propagator U^(kappa) has kappa-independent
eigenphases exp(-i 2 pi beta n).  Its eigenvectors b^(n)(kappa), transported
smoothly around the kappa circle, assemble the 2D eigenstates by a Fourier
integral in kappa.

The transport uses the exact identity U^(kappa - Fy t) = W U^(kappa) W^-1
with W the partial propagator up to time t: propagating an eigenvector in
time *is* the analytic continuation in kappa (up to the trivial ladder phase
e^{i Fx n t}, removed below).  This sidesteps any per-kappa phase fixing and
closes exactly around the circle.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from hallsim.core import TWO_PI, HallConfig, WaveFunction2D

LABEL_RESOLUTION = 1e-6   # two ladder phases closer than this are ambiguous
UNITARITY_TOL = 1e-9


def default_l_half(cfg: HallConfig) -> int:
    """Truncation half-width, validated by doubling in the tests."""
    fx = cfg.Fx
    if fx <= 0:
        raise ValueError("fiber method needs Fx > 0 (tilt both axes)")
    return int(math.ceil(4.0 * (cfg.Jx / fx + 10.0)))


def _fiber_diag(cfg: HallConfig, kappa: float, l_values: np.ndarray, t: float) -> np.ndarray:
    return (-cfg.Jy * np.cos(TWO_PI * cfg.alpha * l_values + kappa - cfg.Fy * t)
            + cfg.Fx * l_values)


def _apply_expm_tridiag(diag: np.ndarray, off: float, x: np.ndarray) -> np.ndarray:
    """exp(-i T) x for real symmetric tridiagonal T, by scaled Taylor series."""
    scale = np.max(np.abs(diag)) + 2.0 * abs(off)
    squarings = max(0, int(math.ceil(math.log2(scale / 0.5))) if scale > 0.5 else 0)
    d = diag / (1 << squarings) if squarings else diag
    o = off / (1 << squarings) if squarings else off

    def tmul(v):
        out = d[:, None] * v if v.ndim == 2 else d * v
        if v.ndim == 2:
            out[:-1] += o * v[1:]
            out[1:] += o * v[:-1]
        else:
            out[:-1] += o * v[1:]
            out[1:] += o * v[:-1]
        return out

    for _ in range(1 << squarings):
        term = x
        y = x.copy()
        for k in range(1, 40):
            term = (-1j / k) * tmul(term)
            y += term
            if np.max(np.abs(term)) < 1e-16 * max(np.max(np.abs(y)), 1e-300):
                break
        x = y
    return x


_GAUSS_SHIFT = math.sqrt(3.0) / 6.0
_CF4_A = 0.25 + _GAUSS_SHIFT
_CF4_B = 0.25 - _GAUSS_SHIFT


class FiberStepper:
    """Fourth-order commutator-free Magnus stepper for the fiber chain.

    Each step combines the instantaneous Hamiltonians at the two
    Gauss-Legendre nodes into two tridiagonal exponentials; every factor is
    unitary to machine precision, so unitarity of the accumulated propagator
    is automatic.
    """

    def __init__(self, cfg: HallConfig, kappa: float, l_half: int, steps: int):
        self.cfg = cfg
        self.kappa = kappa
        self.l_values = np.arange(-l_half, l_half + 1).astype(float)
        self.period = TWO_PI / cfg.Fy
        self.steps = steps
        self.dt = self.period / steps
        self.off = -0.5 * cfg.Jx

    def apply_step(self, j: int, x: np.ndarray) -> np.ndarray:
        t = j * self.dt
        d1 = _fiber_diag(self.cfg, self.kappa, self.l_values, t + (0.5 - _GAUSS_SHIFT) * self.dt)
        d2 = _fiber_diag(self.cfg, self.kappa, self.l_values, t + (0.5 + _GAUSS_SHIFT) * self.dt)
        x = _apply_expm_tridiag(self.dt * (_CF4_A * d1 + _CF4_B * d2),
                                self.dt * 0.5 * self.off, x)
        x = _apply_expm_tridiag(self.dt * (_CF4_B * d1 + _CF4_A * d2),
                                self.dt * 0.5 * self.off, x)
        return x


@dataclass(frozen=True, eq=False)
class FiberOperator:
    """One-period fiber propagator U^(kappa) on a truncated l-window."""

    cfg: HallConfig
    kappa: float
    l_half: int
    steps: int
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.l_half + 1

    @property
    def period(self) -> float:
        return TWO_PI / self.cfg.Fy

    def l_values(self) -> np.ndarray:
        return np.arange(-self.l_half, self.l_half + 1)

    def unitarity_defect(self) -> float:
        u = self.matrix
        return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


def fiber_evolution(cfg: HallConfig, kappa: float, l_half: int | None = None,
                    steps: int | None = None) -> FiberOperator:
    """Time-ordered one-period propagator of the fiber chain.

    ``steps`` defaults to 1000 (dt = T_y/1000); raise it when a halving
    check (see :func:`fiber_evolution_converged`) says so.
    """
    if cfg.Fy <= 0:
        raise ValueError("fiber evolution needs Fy > 0")
    if l_half is None:
        l_half = default_l_half(cfg)
    if steps is None:
        steps = 1000
    stepper = FiberStepper(cfg, kappa, l_half, steps)
    u = np.eye(2 * l_half + 1, dtype=complex)
    for j in range(steps):
        u = stepper.apply_step(j, u)
    op = FiberOperator(cfg, kappa, l_half, steps, u)
    defect = op.unitarity_defect()
    if defect > UNITARITY_TOL:
        raise RuntimeError(f"propagator unitarity defect {defect:.2e}: "
                           "reduce dt or enlarge the l-window")
    return op


def fiber_evolution_converged(cfg: HallConfig, kappa: float, l_half: int | None = None,
                              tol: float = 1e-8, max_doublings: int = 3) -> FiberOperator:
    """Propagator with the step count doubled until it moves by < tol."""
    op = fiber_evolution(cfg, kappa, l_half, steps=1000)
    for _ in range(max_doublings):
        finer = fiber_evolution(cfg, kappa, op.l_half, steps=2 * op.steps)
        if np.linalg.norm(finer.matrix - op.matrix) < tol:
            return finer
        op = finer
    raise RuntimeError("fiber propagator did not converge under dt halving")


# ---------------------------------------------------------------------------
# eigenstates and ladder labels
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FiberState:
    n: int
    vector: np.ndarray
    eigenvalue: complex
    phase_error: float  # circle distance to exp(-i 2 pi beta n)


def _unitary_eig(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Schur of a normal matrix gives exactly orthonormal eigenvectors
    t, z = scipy.linalg.schur(u, output="complex")
    return np.diag(t).copy(), z


def fiber_eigenstates(op: FiberOperator, interior_margin: int | None = None,
                      edge_band: int = 10, edge_tol: float = 1e-4) -> list[FiberState]:
    """Eigenvectors of U^(kappa) labeled by the ladder index n.

    The label matches the eigenphase to exp(-i 2 pi beta n), the nearest
    point on the circle.  States are kept only when they are truncation
    clean: centered within ``interior_margin`` of the window edge and with
    less than ``edge_tol`` probability on the outer ``edge_band`` sites
    (the eigenphase error tracks that weight).  Raises if two candidate
    labels compete within 1e-6 of each other.
    """
    beta = op.cfg.beta
    lv = op.l_values().astype(float)
    if interior_margin is None:
        interior_margin = min(int(math.ceil(op.cfg.Jx / op.cfg.Fx + 15)),
                              max(2, op.l_half // 2))
    vals, vecs = _unitary_eig(op.matrix)
    keep = op.l_half - interior_margin
    band = min(edge_band, op.l_half)
    states = []
    for j in range(vals.size):
        w = np.abs(vecs[:, j]) ** 2
        if w[:band].sum() + w[-band:].sum() > edge_tol:
            continue
        center = float(np.sum(lv * w))
        if abs(center) > keep:
            continue
        measured = -cmath.phase(vals[j]) / TWO_PI  # so that beta n ~ measured (mod 1)
        lo = int(math.floor(center - interior_margin))
        hi = int(math.ceil(center + interior_margin))
        cands = np.arange(lo, hi + 1)
        dist = np.abs((beta * cands - measured + 0.5) % 1.0 - 0.5)
        order = np.argsort(dist)
        if dist.size > 1 and dist[order[1]] - dist[order[0]] < LABEL_RESOLUTION:
            raise RuntimeError("ladder-label assignment ambiguous: "
                               f"phases for n={cands[order[0]]} and n={cands[order[1]]} "
                               "compete within 1e-6")
        n = int(cands[order[0]])
        states.append(FiberState(n, vecs[:, j].copy(), vals[j], float(dist[order[0]]) * TWO_PI))
    states.sort(key=lambda s: s.n)
    return states


def state_with_label(states: list[FiberState], n: int) -> FiberState:
    for s in states:
        if s.n == n:
            return s
    raise KeyError(f"no fiber eigenstate with ladder index {n}")


# ---------------------------------------------------------------------------
# transport around the kappa circle and 2D assembly
# ---------------------------------------------------------------------------

def transported_fiber_state(op: FiberOperator, state: FiberState) -> tuple[np.ndarray, np.ndarray]:
    """b^(n) on the full kappa circle from time transport of one eigenvector.

    Returns (kappas, vectors) with vectors[j] the correctly-phased
    eigenvector of U^(kappa_j) at kappa_j = kappa_0 - Fy t_j (mod 2 pi);
    one Bloch period of transport sweeps the circle exactly once.  A
    residual closure phase (integrator error) is spread uniformly.
    """
    cfg = op.cfg
    stepper = FiberStepper(cfg, op.kappa, op.l_half, op.steps)
    dt = stepper.dt
    vecs = np.empty((op.steps, state.vector.size), dtype=complex)
    kappas = np.empty(op.steps)
    b = state.vector.astype(complex)
    for j in range(op.steps):
        t = j * dt
        kappas[j] = (op.kappa - cfg.Fy * t) % TWO_PI
        vecs[j] = b * cmath.exp(1j * cfg.Fx * state.n * t)
        b = stepper.apply_step(j, b)
    closure = b * cmath.exp(1j * cfg.Fx * state.n * op.period)
    overlap = complex(np.vdot(state.vector, closure))
    if abs(overlap) < 0.9:
        raise RuntimeError("transported eigenvector does not close around the "
                           "kappa circle; enlarge the window or reduce dt")
    mismatch = cmath.phase(overlap)
    vecs *= np.exp(-1j * mismatch * np.arange(op.steps) / op.steps)[:, None]
    return kappas, vecs


def localized_state(cfg: HallConfig, n: int, k: int = 0, l_half: int | None = None,
                    m_half: int | None = None, steps: int | None = None) -> WaveFunction2D:
    """2D localized eigenstate of energy Fx n + Fy k by Fourier assembly.

    The fiber eigenvector with label n is transported around the kappa
    circle and integrated against e^{i kappa (m - k)}.
    """
    op = fiber_evolution(cfg, 0.0, l_half, steps)
    states = fiber_eigenstates(op)
    st = state_with_label(states, n)
    kappas, vecs = transported_fiber_state(op, st)
    if m_half is None:
        m_half = int(math.ceil(4.0 * (cfg.Jy / cfg.Fy + 10.0)))
    m_rel = np.arange(-m_half, m_half + 1)
    # Psi_{l, k+dm} = (1/M) sum_j b_l(kappa_j) e^{i kappa_j dm}
    kernel = np.exp(1j * np.outer(kappas, m_rel))
    amps = (vecs.T @ kernel) / kappas.size
    psi = WaveFunction2D((-op.l_half, k - m_half), amps)
    return WaveFunction2D(psi.origin, psi.amps / psi.norm())


def transverse_density(cfg: HallConfig, n: int, kappa_samples: int = 8,
                       seed: int = 0, l_half: int | None = None,
                       steps: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Monte-Carlo x-profile rho_l of the localized states with label n.

    Averages |b^(n)_l(kappa)|^2 over ``kappa_samples`` uniform random kappa
    (no phase matching involved); returns (l_values, rho, stderr) with rho
    normalized to unit sum.
    """
    if kappa_samples < 2:
        raise ValueError("need at least two kappa samples")
    rng = np.random.default_rng(seed)
    if l_half is None:
        l_half = default_l_half(cfg)
    profiles = []
    for kappa in rng.uniform(0.0, TWO_PI, size=kappa_samples):
        op = fiber_evolution(cfg, float(kappa), l_half, steps)
        st = state_with_label(fiber_eigenstates(op), n)
        profiles.append(np.abs(st.vector) ** 2)
    profiles = np.array(profiles)
    rho = profiles.mean(axis=0)
    stderr = profiles.std(axis=0, ddof=1) / math.sqrt(kappa_samples)
    total = rho.sum()
    return np.arange(-l_half, l_half + 1), rho / total, stderr / total


def profile_participation(rho: np.ndarray) -> float:
    """Participation length of a normalized 1D profile, (sum rho^2)^-1."""
    return float(1.0 / np.sum(rho**2))


@dataclass(frozen=True)
class ParticipationPoint:
    F: float
    participation: float
    reliable: bool


def participation_vs_F(cfg_template: HallConfig, F_list, l_half: int | None = None,
                       m_half: int | None = None, steps: int | None = None,
                       boundary_tol: float = 1e-6) -> list[ParticipationPoint]:
    """Participation ratio of one localized state per field magnitude.

    All states at fixed F share the same participation ratio (magnetic
    translations are unimodular), so a single (n, k) = (0, 0) state
    suffices.  Points whose state touches the window boundary are flagged
    unreliable rather than silently reported.
    """
    from hallsim.core import observables

    out = []
    for f in F_list:
        cfg = HallConfig(alpha=cfg_template.alpha, Jx=cfg_template.Jx, Jy=cfg_template.Jy,
                         F=float(f), direction=cfg_template.direction, gauge=cfg_template.gauge)
        psi = localized_state(cfg, 0, 0, l_half=l_half, m_half=m_half, steps=steps)
        ok = psi.boundary_probability(2) < boundary_tol
        out.append(ParticipationPoint(float(f), observables(psi).participation, ok))
    return out


# ---------------------------------------------------------------------------
# CSV emission (consumed by the figure toolchain)
# ---------------------------------------------------------------------------

def emit_density_csv(path, l_values, rho, stderr):
    from hallsim.lsx import _write_csv

    _write_csv(path, ("l", "rho", "stderr"), list(zip(l_values, rho, stderr)))


def emit_participation_csv(path, points: list[ParticipationPoint]):
    from hallsim.lsx import _write_csv

    _write_csv(path, ("F", "participation"),
               [(p.F, p.participation) for p in points])


def emit_state_csv(path, psi: WaveFunction2D):
    """Dense probability dump, columns (l, m, prob)."""
    from hallsim.lsx import _write_csv

    rows = []
    p = np.abs(psi.amps) ** 2
    for i, l in enumerate(psi.l_values()):
        for j, m in enumerate(psi.m_values()):
            rows.append((l, m, p[i, j]))
    _write_csv(path, ("l", "m", "prob"), rows)
