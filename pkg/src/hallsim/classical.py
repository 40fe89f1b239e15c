"""Classical limit: the driven Harper model and parabolic-lattice motion.

Taking the Peierls phase as an effective Planck constant, the lattice
problem has the classical Hamiltonian

    H(t) = -Jx' cos(p + Fx t) - Jy' cos(x - Fy t),   Jxy' = 2 pi alpha Jxy,

whose phase space develops transporting islands (stable comoving orbits
drifting at dx/dt = -Fy) below the bifurcation field F_cr = omega_c.  All
integrators here are explicit symplectic compositions of exactly solvable
sub-flows (the time dependence of each piece integrates in closed form),
so the invariant

    H' = -Jx' cos(p + Fx t) - Jy' cos(x - Fy t) - Fx (x - Fy t) - Fy (p + Fx t)

is conserved to composition accuracy and phase-space volume exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hallsim.core import TWO_PI, HallConfig

_W1_4 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0_4 = 1.0 - 2.0 * _W1_4
_W1_6 = 1.0 / (2.0 - 2.0 ** (1.0 / 5.0))
_W0_6 = 1.0 - 2.0 * _W1_6


def _compose(weights_outer, weights_inner):
    return [w * v for w in weights_outer for v in weights_inner]


def _stage_weights(order: int) -> list[float]:
    if order == 2:
        return [1.0]
    if order == 4:
        return [_W1_4, _W0_4, _W1_4]
    if order == 6:
        return _compose([_W1_6, _W0_6, _W1_6], [_W1_4, _W0_4, _W1_4])
    raise ValueError("order must be 2, 4 or 6")


@dataclass(frozen=True)
class DrivenHarper:
    """Classical driven Harper parameters (scaled hoppings Jxy' = 2 pi alpha Jxy)."""

    jx: float
    jy: float
    Fx: float
    Fy: float

    @classmethod
    def from_config(cls, cfg: HallConfig) -> "DrivenHarper":
        fx, fy = cfg.field_components
        return cls(TWO_PI * cfg.alpha * cfg.Jx, TWO_PI * cfg.alpha * cfg.Jy, fx, fy)

    @property
    def F(self) -> float:
        return math.hypot(self.Fx, self.Fy)

    @property
    def critical_field(self) -> float:
        return math.sqrt(self.jx * self.jy)

    def period_y(self) -> float:
        if self.Fy <= 0:
            raise ValueError("stroboscopic constructions need Fy > 0")
        return TWO_PI / self.Fy

    def invariant(self, x, p, t):
        xs = np.asarray(x) - self.Fy * t
        ps = np.asarray(p) + self.Fx * t
        return (-self.jx * np.cos(ps) - self.jy * np.cos(xs)
                - self.Fx * xs - self.Fy * ps)


class DrivenHarperIntegrator:
    """Symplectic composition of exact sub-flows for the driven Harper model.

    The x-update integrates sin(p + Fx t) in closed form while time
    advances; the p-kick acts at frozen time.  ``order`` 2/4/6 select the
    Strang step and its Yoshida compositions.
    """

    def __init__(self, sys: DrivenHarper, dt: float, order: int = 6):
        self.sys = sys
        self.dt = dt
        self.weights = _stage_weights(order)

    def _x_flow(self, x, p, t, h):
        s = self.sys
        if s.Fx != 0.0:
            x += (s.jx / s.Fx) * (np.cos(p + s.Fx * t) - np.cos(p + s.Fx * (t + h)))
        else:
            x += s.jx * np.sin(p) * h
        return x, t + h

    def step(self, x, p, t):
        s = self.sys
        for w in self.weights:
            h = w * self.dt
            x, t_mid = self._x_flow(x, p, t, 0.5 * h)
            p = p - s.jy * np.sin(x - s.Fy * t_mid) * h
            x, t = self._x_flow(x, p, t_mid, 0.5 * h)
        return x, p, t

    def run(self, x, p, t, n_steps, callback=None):
        for j in range(n_steps):
            x, p, t = self.step(x, p, t)
            if callback is not None:
                callback(j, x, p, t)
        return x, p, t


def integrate_driven_harper(state0: tuple[float, float], sys: DrivenHarper, t_final: float,
                            dt: float | None = None, order: int = 6):
    """Trajectory (t, x, p) of a single driven-Harper initial condition."""
    if dt is None:
        dt = sys.period_y() / 400.0 if sys.Fy > 0 else 0.01
    n = int(round(t_final / dt))
    xs = np.empty(n + 1)
    ps = np.empty(n + 1)
    ts = np.empty(n + 1)
    x, p, t = float(state0[0]), float(state0[1]), 0.0
    xs[0], ps[0], ts[0] = x, p, t
    integ = DrivenHarperIntegrator(sys, dt, order)

    def cb(j, xv, pv, tv):
        xs[j + 1], ps[j + 1], ts[j + 1] = xv, pv, tv

    integ.run(x, p, t, n, cb)
    return ts, xs, ps


def stroboscopic_map(sys: DrivenHarper, initial_points: np.ndarray, n_periods: int,
                     steps_per_period: int = 400, order: int = 6) -> np.ndarray:
    """Phase-space points sampled every T_y = 2 pi / Fy.

    ``initial_points`` has shape (N, 2) with columns (x, p); the result has
    shape (n_periods + 1, N, 2) with x reduced to (-pi, pi] for display.
    """
    pts = np.asarray(initial_points, dtype=float)
    x = pts[:, 0].copy()
    p = pts[:, 1].copy()
    t = 0.0
    dt = sys.period_y() / steps_per_period
    integ = DrivenHarperIntegrator(sys, dt, order)
    out = np.empty((n_periods + 1, x.size, 2))

    def fold(v):
        return (v + math.pi) % TWO_PI - math.pi

    out[0, :, 0] = fold(x)
    out[0, :, 1] = fold(p)
    for k in range(n_periods):
        x, p, t = integ.run(x, p, t, steps_per_period)
        out[k + 1, :, 0] = fold(x)
        out[k + 1, :, 1] = fold(p)
    return out


def island_size(sys: DrivenHarper, resolution: int = 100, n_periods: int = 50,
                capture_tol: float = 0.1, steps_per_period: int = 200,
                order: int = 4) -> float:
    """Fraction of the elementary cell captured by transporting islands.

    A trajectory counts as captured when its drift over ``n_periods``
    Bloch periods stays within ``capture_tol`` of the island velocity:
    the comoving frame x' = x - Fy t is autonomous, so captured orbits
    ride forward at dx/dt = +Fy (the lattice-frame drift velocity v*,
    matching the sign of the quantum transporting states).
    """
    if resolution < 10:
        raise ValueError("resolution too coarse")
    g = -math.pi + TWO_PI * (np.arange(resolution) + 0.5) / resolution
    x0, p0 = [a.ravel() for a in np.meshgrid(g, g, indexing="ij")]
    x = x0.copy()
    p = p0.copy()
    dt = sys.period_y() / steps_per_period
    integ = DrivenHarperIntegrator(sys, dt, order)
    t_final = n_periods * sys.period_y()
    x, p, _ = integ.run(x, p, 0.0, n_periods * steps_per_period)
    drift_err = np.abs(x - x0 - sys.Fy * t_final)
    captured = drift_err < capture_tol * sys.Fy * t_final
    return float(np.mean(captured))


def ensemble_spreading(sys: DrivenHarper, n_particles: int, t_final: float, seed: int,
                       dt: float | None = None, n_records: int = 60,
                       order: int = 4) -> tuple[np.ndarray, np.ndarray, float]:
    """Ballistic spreading rate of a uniform phase-space ensemble.

    Particles start uniformly over the elementary cell -pi <= x, p < pi;
    returns (times, sigma(t), A) with A the least-squares slope over the
    asymptotic (second) half of the run.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-math.pi, math.pi, n_particles)
    p = rng.uniform(-math.pi, math.pi, n_particles)
    if dt is None:
        base = sys.period_y() if sys.Fy > 0 else TWO_PI / max(sys.F, 1e-6)
        dt = base / 100.0
    steps = int(round(t_final / dt))
    record_at = np.unique(np.linspace(0, steps, n_records + 1).astype(int))
    integ = DrivenHarperIntegrator(sys, dt, order)
    times = [0.0]
    sigmas = [float(np.std(x))]
    t = 0.0
    done = 0
    for target in record_at[1:]:
        x, p, t = integ.run(x, p, t, int(target - done))
        done = target
        times.append(t)
        sigmas.append(float(np.std(x)))
    times = np.array(times)
    sigmas = np.array(sigmas)
    late = times >= 0.5 * t_final
    slope = float(np.polyfit(times[late], sigmas[late], 1)[0])
    return times, sigmas, slope


# ---------------------------------------------------------------------------
# parabolic lattice
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParabolicLattice:
    """Scaled classical Hamiltonian of the harmonically confined lattice.

    H = -J cos(px) - J cos(py + 2 pi alpha x) + gamma/2 (x^2 + y^2).
    """

    J: float
    alpha: float
    gamma: float

    @property
    def encircling_frequency(self) -> float:
        return self.gamma / (TWO_PI * self.alpha)

    @property
    def critical_energy(self) -> float:
        return (TWO_PI * self.alpha * self.J) ** 2 / (2.0 * self.gamma)

    def energy(self, state) -> np.ndarray:
        x, y, px, py = state
        return (-self.J * np.cos(px) - self.J * np.cos(py + TWO_PI * self.alpha * x)
                + 0.5 * self.gamma * (x * x + y * y))


class ParabolicIntegrator:
    """Symplectic splitting into three exactly solvable pieces.

    A: -J cos(px) moves x; B: -J cos(py + 2 pi alpha x) moves y and kicks
    px (its argument is conserved by its own flow); C: the harmonic kick.
    """

    def __init__(self, sys: ParabolicLattice, dt: float, order: int = 6):
        self.sys = sys
        self.dt = dt
        self.weights = _stage_weights(order)

    def step(self, state):
        x, y, px, py = state
        s = self.sys
        two_pi_alpha = TWO_PI * s.alpha
        for w in self.weights:
            h = w * self.dt
            x = x + s.J * np.sin(px) * (0.5 * h)
            u = py + two_pi_alpha * x
            sin_u = s.J * np.sin(u) * (0.5 * h)
            y = y + sin_u
            px = px - two_pi_alpha * sin_u
            px = px - s.gamma * x * h
            py = py - s.gamma * y * h
            u = py + two_pi_alpha * x
            sin_u = s.J * np.sin(u) * (0.5 * h)
            y = y + sin_u
            px = px - two_pi_alpha * sin_u
            x = x + s.J * np.sin(px) * (0.5 * h)
        return x, y, px, py


def integrate_parabolic(sys: ParabolicLattice, state0, t_final: float,
                        dt: float = 0.02, order: int = 6, record_every: int = 1):
    """Trajectory arrays (t, x, y, px, py) of the confined lattice motion."""
    steps = int(round(t_final / dt))
    integ = ParabolicIntegrator(sys, dt, order)
    state = tuple(np.asarray(v, dtype=float) for v in state0)
    recs = [(0.0, *state)]
    for j in range(1, steps + 1):
        state = integ.step(state)
        if j % record_every == 0:
            recs.append((j * dt, *state))
    cols = list(zip(*recs))
    return tuple(np.asarray(c) for c in cols)


def sample_energy_shell(sys: ParabolicLattice, energy: float, n: int, seed: int,
                        max_tries: int = 10000) -> np.ndarray:
    """Section-plane initial conditions (x=0, y>0) at the given energy."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(max_tries):
        if len(out) >= n:
            break
        px, py = rng.uniform(-math.pi, math.pi, 2)
        rest = energy + sys.J * math.cos(px) + sys.J * math.cos(py)
        if rest < 0:
            continue
        y = math.sqrt(2.0 * rest / sys.gamma)
        out.append((0.0, y, px, py))
    if len(out) < n:
        raise RuntimeError(f"energy shell sampling failed at E={energy}")
    return np.array(out)


def parabolic_poincare(sys: ParabolicLattice, energy: float, n_trajectories: int,
                       seed: int = 0, n_crossings: int = 200, dt: float = 0.02,
                       t_max: float | None = None, order: int = 4):
    """Section points (px, py) on the half-plane x = 0, y > 0, dx/dt > 0.

    Returns a list of per-trajectory arrays; crossings are located by
    linear interpolation between steps.
    """
    starts = sample_energy_shell(sys, energy, n_trajectories, seed)
    if t_max is None:
        t_max = 80.0 * TWO_PI / max(sys.encircling_frequency, 1e-9)
    integ = ParabolicIntegrator(sys, dt, order)
    sections = []
    for x0, y0, px0, py0 in starts:
        state = (np.float64(x0), np.float64(y0), np.float64(px0), np.float64(py0))
        pts = [(px0, py0)]
        prev = state
        steps = int(t_max / dt)
        for _ in range(steps):
            state = integ.step(prev)
            x_a, x_b = float(prev[0]), float(state[0])
            if x_a < 0.0 <= x_b and float(state[1]) > 0:
                w = -x_a / (x_b - x_a)
                pts.append((float(prev[2] + w * (state[2] - prev[2])),
                            float(prev[3] + w * (state[3] - prev[3]))))
                if len(pts) >= n_crossings:
                    break
            prev = state
        sections.append(np.array(pts))
    return sections


def section_cell_fill(points: np.ndarray, bins: int = 40) -> float:
    """Fraction of section cells visited: low for curves, high for chaos.

    Diagnostic only -- matches the qualitative regular/chaotic reading of
    section scatter, not a rigorous chaos indicator.
    """
    if len(points) < 2:
        return 0.0
    h, _, _ = np.histogram2d(points[:, 0], points[:, 1],
                             bins=bins, range=[[-math.pi, math.pi]] * 2)
    return float(np.count_nonzero(h)) / len(points)


def winding_angle(x: np.ndarray, y: np.ndarray) -> float:
    """Total unwrapped angle swept by (x, y) around the origin."""
    theta = np.unwrap(np.arctan2(x, y))
    return float(theta[-1] - theta[0])


def emit_points_csv(path, points: np.ndarray, header=("px", "py")):
    from hallsim.lsx import _write_csv

    _write_csv(path, header, [tuple(row) for row in np.asarray(points)])
