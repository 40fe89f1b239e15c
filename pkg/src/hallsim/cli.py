"""Command-line front end: every solver behind one executable.

Each subcommand resolves its parameters (defaults < config file < flags),
runs the corresponding module, writes CSV/JSON into a run directory and
drops a ``manifest.json`` recording the resolved parameters, seed, version
and produced files.  Re-running with identical parameters reproduces the
CSV outputs byte for byte.

Exit codes: 0 success, 2 parameter/validation error, 3 numerical
convergence failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

import hallsim
from hallsim.core import HallConfig, Irrational, Rational, TWO_PI

NAMED_DIRECTIONS = {
    "golden4": (math.sqrt(5.0) - 1.0) / 4.0,
    "golden8": (math.sqrt(5.0) - 1.0) / 8.0,
}


def parse_direction(text: str):
    """'r/q' -> Rational, float or named constant -> Irrational."""
    text = text.strip()
    if text in NAMED_DIRECTIONS:
        return Irrational(NAMED_DIRECTIONS[text])
    if "/" in text:
        num, den = text.split("/", 1)
        frac = Fraction(int(num), int(den))
        if frac == 0:
            return Rational(0, 1)
        return Rational(frac.numerator, frac.denominator)
    value = float(text)
    if value == 0.0:
        return Rational(0, 1)
    if value == int(value) and abs(value) <= 8:
        return Rational(int(value), 1)
    return Irrational(value)


def parse_alpha(text: str) -> float:
    if "/" in text:
        num, den = text.split("/", 1)
        return float(Fraction(int(num), int(den)))
    return float(text)


def parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _load_config_file(path: str) -> dict:
    """key=value lines, optionally under [section] headers (sections merge)."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def build_hall_config(ns) -> HallConfig:
    return HallConfig(
        alpha=ns.alpha,
        Jx=ns.Jx if ns.Jx is not None else ns.J,
        Jy=ns.Jy if ns.Jy is not None else ns.J,
        F=ns.F,
        direction=parse_direction(ns.direction),
        staggered_phase=ns.phi,
        confinement_gamma=ns.gamma,
    )


class RunDirectory:
    def __init__(self, base: str | None, token: str):
        if base is None:
            stamp = time.strftime("%Y%m%d-%H%M%S")
            digest = hashlib.sha1(token.encode()).hexdigest()[:8]
            base = os.path.join("runs", f"{stamp}-{digest}")
        self.path = Path(base)
        self.path.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []

    def file(self, name: str) -> str:
        self.outputs.append(name)
        return str(self.path / name)

    def write_json(self, name: str, payload: dict) -> None:
        with open(self.file(name), "w") as fh:
            json.dump(_json_sanitize(payload), fh, indent=2, sort_keys=True,
                      default=_json_default)
            fh.write("\n")

    def manifest(self, command: str, params: dict, seed: int, wall: float) -> None:
        payload = {
            "subcommand": command,
            "parameters": params,
            "seed": seed,
            "version": hallsim.__version__,
            "outputs": sorted(self.outputs),
            "wall_clock_s": round(wall, 3),
        }
        with open(self.path / "manifest.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _json_sanitize(obj):
    """Replace non-finite floats by null so emitted JSON stays strict."""
    if isinstance(obj, dict):
        return {k: _json_sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_sanitize(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return None
    return obj


def _write_csv(path, header, rows):
    from hallsim.lsx import _write_csv as write

    write(path, header, rows)


def _pool_map(fn, items, jobs: int):
    """Map preserving input order; items are (index, payload) pairs."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    import concurrent.futures as cf

    with cf.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def cmd_scales(ns, run: RunDirectory) -> dict:
    from hallsim.core import characteristic_scales

    cfg = build_hall_config(ns)
    s = characteristic_scales(cfg)
    summary = {k: getattr(s, k) for k in
               ("omega_c", "omega_B", "F_cr", "v_star", "Omega", "E_cr",
                "T_J", "T_B", "T_y", "T_c")}
    run.write_json("scales.json", summary)
    return summary


def cmd_ws(ns, run: RunDirectory) -> dict:
    from hallsim.limits import ws_state
    from hallsim.lsl import emit_state_csv

    cfg = build_hall_config(ns)
    psi = ws_state(ns.n, ns.k, cfg)
    emit_state_csv(run.file("ws_state.csv"), psi)
    return {"norm": psi.norm(), "window": list(psi.dims)}


def cmd_harper(ns, run: RunDirectory) -> dict:
    from hallsim.limits import BlochBC, DirichletBC, harper_bands

    cfg = build_hall_config(ns)
    kappa = np.linspace(-math.pi, math.pi, ns.grid, endpoint=False)
    bc = DirichletBC(ns.Lx) if ns.dirichlet else BlochBC(ns.kappa_x)
    bs = harper_bands(cfg, kappa, bc)
    from hallsim.lsx import emit_band_csv

    emit_band_csv(run.file("harper_bands.csv"), bs)
    return {"num_bands": bs.num_bands, "min": float(bs.bands.min()),
            "max": float(bs.bands.max())}


def cmd_lsx_bands(ns, run: RunDirectory) -> dict:
    from hallsim import lsx

    cfg = build_hall_config(ns)
    frame = lsx.default_frame(cfg, ns.bands)
    kappa = np.linspace(0.0, TWO_PI * frame.d, ns.grid, endpoint=False)
    bs = lsx.extended_bands(cfg, kappa, ns.bands, frame)
    lsx.emit_band_csv(run.file("lsx_bands.csv"), bs)
    return {"num_bands": bs.num_bands,
            "bandwidths": [bs.bandwidth(i) for i in range(bs.num_bands)]}


def cmd_lsx_scan(ns, run: RunDirectory) -> dict:
    from hallsim import lsx

    cfg = build_hall_config(ns)
    points = lsx.bandwidth_scan(cfg, parse_float_list(ns.F_list), num_kappa=ns.grid)
    lsx.emit_scan_csv(run.file("bandwidth_scan.csv"), points)
    slope = lsx.fit_loglog_slope([p.F for p in points], [p.width for p in points])
    return {"fitted_exponent": slope, "num_points": len(points)}


def cmd_lsl_state(ns, run: RunDirectory) -> dict:
    from hallsim import lsl

    cfg = build_hall_config(ns)
    psi = lsl.localized_state(cfg, ns.n, ns.k)
    lsl.emit_state_csv(run.file("lsl_state.csv"), psi)
    from hallsim.core import observables

    return {"participation": observables(psi).participation,
            "boundary_probability": psi.boundary_probability()}


def cmd_lsl_density(ns, run: RunDirectory) -> dict:
    from hallsim import lsl

    cfg = build_hall_config(ns)
    lv, rho, err = lsl.transverse_density(cfg, ns.n, kappa_samples=ns.samples,
                                          seed=ns.seed)
    lsl.emit_density_csv(run.file("transverse_density.csv"), lv, rho, err)
    return {"participation_length": lsl.profile_participation(rho)}


def cmd_lsl_participation(ns, run: RunDirectory) -> dict:
    from hallsim import lsl

    cfg = build_hall_config(ns)
    points = lsl.participation_vs_F(cfg, parse_float_list(ns.F_list))
    lsl.emit_participation_csv(run.file("participation.csv"), points)
    return {"reliable": all(p.reliable for p in points),
            "participation": [p.participation for p in points]}


def cmd_piflux_bands(ns, run: RunDirectory) -> dict:
    from hallsim import piflux
    from hallsim.lsx import emit_band_csv

    sys_ = piflux.SublatticeSystem(ns.r, ns.q, F=ns.F, phi=ns.phi, Jx=ns.J, Jy=ns.J)
    kappa = np.linspace(0.0, TWO_PI * sys_.d_tilde, ns.grid, endpoint=False)
    bs = piflux.piflux_bands(sys_, kappa, ns.bands)
    emit_band_csv(run.file("piflux_bands.csv"), bs)
    return {"ladder_spacing": sys_.ladder_spacing,
            "bandwidths": [bs.bandwidth(i) for i in range(bs.num_bands)]}


def cmd_kbm(ns, run: RunDirectory) -> dict:
    from hallsim import piflux

    inv_f = parse_float_list(ns.inv_F_list)
    rows = []
    for x in inv_f:
        sys_ = piflux.SublatticeSystem(ns.r, ns.q, F=1.0 / x, phi=ns.phi,
                                       Jx=ns.J, Jy=ns.J)
        rows.append((x, piflux.central_pair_width(sys_, num_kappa=ns.grid),
                     piflux.kbm_bandwidth(sys_, second_order=ns.second_order)))
    piflux.emit_comparison_csv(run.file("kbm_comparison.csv"),
                               [r[0] for r in rows], [r[1] for r in rows],
                               [r[2] for r in rows])
    return {"first_collapse_inv_F": piflux.first_collapse_inverse_field(
        piflux.SublatticeSystem(ns.r, ns.q, F=1.0, phi=ns.phi))
        if (ns.r, ns.q) == (1, 2) else None}


def cmd_propagate(ns, run: RunDirectory) -> dict:
    from hallsim import dynamics
    from hallsim.core import delta_state

    cfg = build_hall_config(ns)
    t_j = TWO_PI / math.sqrt(cfg.Jx * cfg.Jy)
    if ns.initial == "delta":
        psi0 = delta_state(0, 0, ns.half_lx, ns.half_ly)
    else:
        psi0 = dynamics.scrambled_gaussian(ns.width, ns.seed, ns.half_lx, ns.half_ly)
    snap_times = tuple(t * t_j for t in parse_float_list(ns.snapshots)) if ns.snapshots else ()
    series, snaps = dynamics.propagate(psi0, cfg, ns.t_final * t_j,
                                       snapshot_times=snap_times,
                                       boundary_tol=ns.boundary_tol)
    dynamics.emit_series_csv(run.file("observables.csv"), series)
    from hallsim.lsl import emit_state_csv

    for t_tj, wf in snaps:
        emit_state_csv(run.file(f"snapshot_t{t_tj:.1f}.csv"), wf)
    return {"sigma_final": float(series["sigma"][-1]),
            "participation_final": float(series["participation"][-1])}


def cmd_band_pop(ns, run: RunDirectory) -> dict:
    from hallsim import dynamics

    cfg = build_hall_config(ns)
    t_j = TWO_PI / math.sqrt(cfg.Jx * cfg.Jy)
    t = np.linspace(0.0, ns.t_final * t_j, ns.points)
    p2, _ = dynamics.band_population_series(cfg, t, grid=ns.grid)
    _write_csv(run.file("band_population.csv"), ("time_TJ", "p2"),
               list(zip(t / t_j, p2)))
    return {"p2_max": float(p2.max()), "p2_final": float(p2[-1])}


def cmd_classical_map(ns, run: RunDirectory) -> dict:
    from hallsim import classical

    cfg = build_hall_config(ns)
    sys_ = classical.DrivenHarper.from_config(cfg)
    g = np.linspace(-math.pi, math.pi, ns.grid, endpoint=False)
    pts = np.array([[x, p] for x in g for p in g])
    strobe = classical.stroboscopic_map(sys_, pts, ns.periods)
    rows = [(x, p) for frame in strobe for (x, p) in frame]
    _write_csv(run.file("stroboscopic.csv"), ("x", "p"), rows)
    return {"points": len(rows)}


def cmd_classical_spread(ns, run: RunDirectory) -> dict:
    from hallsim import classical

    rows = []
    for f in parse_float_list(ns.F_list):
        cfg = HallConfig(alpha=ns.alpha, Jx=ns.J, Jy=ns.J, F=f,
                         direction=parse_direction(ns.direction))
        sys_ = classical.DrivenHarper.from_config(cfg)
        _, _, rate = classical.ensemble_spreading(sys_, ns.particles, ns.t_final,
                                                  seed=ns.seed)
        rows.append((f, rate))
    _write_csv(run.file("spreading.csv"), ("F", "A"), rows)
    return {"rates": dict((str(f), r) for f, r in rows)}


def cmd_island_size(ns, run: RunDirectory) -> dict:
    from hallsim import classical

    rows = []
    for f in parse_float_list(ns.F_list):
        cfg = HallConfig(alpha=ns.alpha, Jx=ns.J, Jy=ns.J, F=f,
                         direction=parse_direction(ns.direction))
        sys_ = classical.DrivenHarper.from_config(cfg)
        rows.append((f, classical.island_size(sys_, resolution=ns.resolution,
                                              n_periods=ns.periods)))
    _write_csv(run.file("island_size.csv"), ("F", "S"), rows)
    return {"S": dict((str(f), s) for f, s in rows)}


def cmd_parabolic_spec(ns, run: RunDirectory) -> dict:
    from hallsim import finite

    cfg = build_hall_config(ns)
    vals = finite.parabolic_spectrum(cfg, ns.window // 2, num_levels=ns.levels)
    _write_csv(run.file("parabolic_spectrum.csv"), ("index", "energy"),
               [(i + 1, e) for i, e in enumerate(vals)])
    summary = {"ground": float(vals[0]), "count": int(vals.size)}
    if vals.size >= 25:
        summary["eigenvalue_25"] = float(vals[24])
    return summary


def cmd_flux_flow(ns, run: RunDirectory) -> dict:
    from hallsim import finite

    cfg = build_hall_config(ns)
    flow = finite.flux_spectral_flow(cfg, ns.window // 2, num_levels=ns.levels,
                                     num_phi=ns.grid)
    rows = []
    for i, phi in enumerate(flow.phi_grid):
        for j in range(flow.levels.shape[1]):
            rows.append((phi, j, flow.levels[i, j]))
    _write_csv(run.file("spectral_flow.csv"), ("phi", "level_id", "energy"), rows)
    return {"winding": flow.winding.tolist()}


def cmd_ribbon(ns, run: RunDirectory) -> dict:
    from hallsim import finite

    cfg = build_hall_config(ns)
    kappa = np.linspace(-math.pi, math.pi, ns.grid)
    rb = finite.ribbon_bands(cfg, ns.Lx, kappa)
    rows = []
    for i, ky in enumerate(rb.kappa_grid):
        for j in range(ns.Lx):
            rows.append((ky, j, rb.energies[i, j], int(rb.edge_flags[i, j]),
                         rb.group_velocity[i, j]))
    _write_csv(run.file("ribbon_bands.csv"),
               ("kappa", "level", "energy", "edge_flag", "v_g"), rows)
    return {"edge_fraction": float(rb.edge_flags.mean())}


def cmd_finite_ls(ns, run: RunDirectory) -> dict:
    from hallsim import finite

    cfg = build_hall_config(ns)
    vals, states = finite.finite_ls_states(cfg, ns.Lx, m_half=ns.m_half)
    _write_csv(run.file("strip_levels.csv"), ("index", "energy"),
               [(i + 1, e) for i, e in enumerate(np.sort(vals))])
    dens = finite.strip_density(states)
    rows = []
    for i in range(dens.shape[0]):
        for j in range(dens.shape[1]):
            rows.append((i + 1, j - (dens.shape[1] // 2), dens[i, j]))
    _write_csv(run.file("strip_density.csv"), ("l", "m", "prob"), rows)
    return {"count": int(vals.size)}


def cmd_depletion(ns, run: RunDirectory) -> dict:
    from hallsim import finite

    cfg = build_hall_config(ns)
    times, pops = finite.depletion_series(cfg, ns.Lx, ns.F_drive, ns.t_final,
                                          periodic=ns.periodic)
    _write_csv(run.file("depletion.csv"), ("time", "ground_population"),
               list(zip(times, pops)))
    summary = {"final_population": float(pops[-1])}
    try:
        summary["rate"] = finite.depletion_rate(cfg, ns.Lx, ns.F_drive, ns.t_final,
                                                periodic=ns.periodic)
    except RuntimeError:
        summary["rate"] = None
    return summary


def cmd_dipole(ns, run: RunDirectory) -> dict:
    from hallsim import finite
    from hallsim.lsl import emit_state_csv

    cfg = build_hall_config(ns)
    series, snaps, fid = finite.dipole_oscillation(cfg, ns.r0, n_periods=ns.periods)
    from hallsim.dynamics import emit_series_csv

    emit_series_csv(run.file("dipole_series.csv"), series)
    for t_tj, wf in snaps:
        emit_state_csv(run.file(f"dipole_snapshot_t{t_tj:.1f}.csv"), wf)
    return {"return_fidelity": fid}


def cmd_multiband(ns, run: RunDirectory) -> dict:
    from hallsim import multiband
    from hallsim.lsx import emit_band_csv

    basis = multiband.MultibandBasis(ns.r, ns.q, V_y=ns.V_y, J_x=ns.J_x,
                                     n_max=ns.n_max, kappa_x=ns.kappa_x)
    kappa = np.linspace(-0.5 / max(ns.q, 1), 0.5 / max(ns.q, 1), ns.grid)
    bs = multiband.multiband_bands(basis, kappa, ns.bands)
    emit_band_csv(run.file("multiband_bands.csv"), bs)
    return {"bandwidths": [bs.bandwidth(i) for i in range(bs.num_bands)]}


def cmd_floquet_decay(ns, run: RunDirectory) -> dict:
    from hallsim import multiband

    basis = multiband.MultibandBasis(ns.r, ns.q, V_y=ns.V_y, J_x=ns.J_x,
                                     n_max=ns.n_max, kappa_x=ns.kappa_x)
    fs = parse_float_list(ns.F_list)
    gammas = []
    for f in fs:
        res = multiband.floquet_decay(basis, f, steps=ns.steps)
        gammas.append(res.Gamma)
    multiband.emit_rates_csv(run.file("decay_rates.csv"), fs, np.array(gammas))
    summary = {"num_fields": len(fs)}
    if len(fs) >= 8:
        fits = [multiband.lz_decompose(np.array(fs), np.array(gammas)[:, j]).b
                for j in range(basis.q)]
        _write_csv(run.file("lz_fit.csv"), ("band", "b"),
                   [(j + 1, b) for j, b in enumerate(fits)])
        summary["b"] = fits
    return summary


# ---------------------------------------------------------------------------
# self tests (the per-command smoke checks behind --selftest)
# ---------------------------------------------------------------------------

def _selftest(command: str) -> int:
    import hallsim.core as core
    import hallsim.limits as limits

    checks = []
    if command in ("scales",):
        s = core.characteristic_scales(HallConfig(alpha=0.1, F=0.3))
        checks.append(("omega_c", abs(s.omega_c - 0.6283185307) < 1e-9))
        checks.append(("v_star", abs(s.v_star - 0.4774648293) < 1e-9))
    elif command in ("ws",):
        checks.append(("bessel_at_zero", limits.bessel_j(0, 0.0) == 1.0))
        checks.append(("bessel_norm", abs(sum(limits.bessel_j(n, 3.7) ** 2
                                              for n in range(-40, 41)) - 1) < 1e-10))
    elif command == "harper":
        import scipy.linalg

        cfg = HallConfig(alpha=0.5)
        v = scipy.linalg.eigvalsh(limits.harper_matrix_bloch(cfg, 0.3, 0.7))
        ref = math.hypot(math.cos(0.3), math.cos(0.7))
        checks.append(("halfflux_dispersion", abs(v[1] - ref) < 1e-12))
    elif command.startswith("piflux") or command == "kbm":
        from hallsim import piflux

        lo, hi = piflux.piflux_dispersion(0.0, 0.0)
        checks.append(("band_edges", abs(hi - math.sqrt(2)) < 1e-12))
        checks.append(("dirac_point",
                       abs(piflux.piflux_dispersion(math.pi / 2, math.pi / 2)[1]) < 1e-12))
    else:
        psi = core.delta_state()
        obs = core.observables(psi)
        checks.append(("delta_sigma", obs.sigma == 0.0))
        checks.append(("delta_participation", abs(obs.participation - 1.0) < 1e-12))
        out = core.apply_hamiltonian(psi, HallConfig(alpha=0.1))
        checks.append(("stencil", abs(out.amps[11, 10] + 0.5) < 1e-12))
    ok = True
    for name, passed in checks:
        print(f"selftest {command}/{name}: {'ok' if passed else 'FAIL'}")
        ok &= passed
    return 0 if ok else 3


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

COMMANDS = {
    "scales": cmd_scales,
    "ws": cmd_ws,
    "harper": cmd_harper,
    "lsx-bands": cmd_lsx_bands,
    "lsx-scan": cmd_lsx_scan,
    "lsl-state": cmd_lsl_state,
    "lsl-density": cmd_lsl_density,
    "lsl-participation": cmd_lsl_participation,
    "piflux-bands": cmd_piflux_bands,
    "kbm": cmd_kbm,
    "propagate": cmd_propagate,
    "band-pop": cmd_band_pop,
    "classical-map": cmd_classical_map,
    "classical-spread": cmd_classical_spread,
    "island-size": cmd_island_size,
    "parabolic-spec": cmd_parabolic_spec,
    "flux-flow": cmd_flux_flow,
    "ribbon": cmd_ribbon,
    "finite-ls": cmd_finite_ls,
    "depletion": cmd_depletion,
    "dipole": cmd_dipole,
    "multiband": cmd_multiband,
    "floquet-decay": cmd_floquet_decay,
}


def _add_common(sub):
    sub.add_argument("--alpha", type=parse_alpha, default=0.1,
                     help="Peierls phase, float or fraction like 1/6")
    sub.add_argument("--J", type=float, default=1.0)
    sub.add_argument("--Jx", type=float, default=None)
    sub.add_argument("--Jy", type=float, default=None)
    sub.add_argument("--F", type=float, default=0.0)
    sub.add_argument("--direction", default="0/1",
                     help="field orientation: 'r/q', a float beta, or "
                          "'golden4'/'golden8'")
    sub.add_argument("--phi", type=float, default=math.pi)
    sub.add_argument("--gamma", type=float, default=0.0)
    sub.add_argument("--out", default=None, help="run directory (default: runs/<stamp>)")
    sub.add_argument("--config", default=None, help="key=value parameter file")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--jobs", type=int,
                     default=int(os.environ.get("HALLSIM_JOBS", "0")) or None)
    sub.add_argument("--selftest", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hallsim", description=__doc__)
    subs = p.add_subparsers(dest="command", required=True)

    def sub(name, **extra):
        sp = subs.add_parser(name)
        _add_common(sp)
        for flag, kw in extra.items():
            sp.add_argument(f"--{flag.replace('_', '-')}", dest=flag, **kw)
        return sp

    sub("scales")
    sub("ws", n=dict(type=int, default=0), k=dict(type=int, default=0))
    sub("harper", grid=dict(type=int, default=128),
        kappa_x=dict(type=float, default=0.0),
        dirichlet=dict(action="store_true"), Lx=dict(type=int, default=40))
    sub("lsx-bands", grid=dict(type=int, default=128), bands=dict(type=int, default=5))
    sub("lsx-scan", F_list=dict(type=str, default="5 8 13 21 34"),
        grid=dict(type=int, default=128))
    sub("lsl-state", n=dict(type=int, default=0), k=dict(type=int, default=0))
    sub("lsl-density", n=dict(type=int, default=0), samples=dict(type=int, default=8))
    sub("lsl-participation", F_list=dict(type=str, default="0.8 1.2 1.8"))
    sub("piflux-bands", r=dict(type=int, default=1), q=dict(type=int, default=2),
        grid=dict(type=int, default=96), bands=dict(type=int, default=6))
    sub("kbm", r=dict(type=int, default=1), q=dict(type=int, default=2),
        inv_F_list=dict(type=str, default="0.2 0.6 1.0 1.4 1.8"),
        grid=dict(type=int, default=96),
        second_order=dict(action="store_true"))
    sub("propagate", t_final=dict(type=float, default=20.0),
        initial=dict(choices=("delta", "gaussian"), default="delta"),
        width=dict(type=float, default=6.0),
        half_lx=dict(type=int, default=40), half_ly=dict(type=int, default=40),
        snapshots=dict(type=str, default=""),
        boundary_tol=dict(type=float, default=1e-6))
    sub("band-pop", t_final=dict(type=float, default=20.0),
        points=dict(type=int, default=101), grid=dict(type=int, default=48))
    sub("classical-map", grid=dict(type=int, default=12),
        periods=dict(type=int, default=30))
    sub("classical-spread", F_list=dict(type=str, default="2 4 8"),
        particles=dict(type=int, default=4000), t_final=dict(type=float, default=300.0))
    sub("island-size", F_list=dict(type=str, default="0.5 0.9"),
        resolution=dict(type=int, default=100), periods=dict(type=int, default=50))
    sub("parabolic-spec", window=dict(type=int, default=51),
        levels=dict(type=int, default=400))
    sub("flux-flow", window=dict(type=int, default=41),
        levels=dict(type=int, default=14), grid=dict(type=int, default=33))
    sub("ribbon", Lx=dict(type=int, default=40), grid=dict(type=int, default=61))
    sub("finite-ls", Lx=dict(type=int, default=40), m_half=dict(type=int, default=150))
    sub("depletion", Lx=dict(type=int, default=40),
        F_drive=dict(type=float, default=0.03),
        t_final=dict(type=float, default=700.0),
        periodic=dict(action="store_true"))
    sub("dipole", r0=dict(type=float, default=10.0), periods=dict(type=float, default=1.0))
    sub("multiband", r=dict(type=int, default=1), q=dict(type=int, default=8),
        V_y=dict(type=float, default=0.25), J_x=dict(type=float, default=0.0431),
        n_max=dict(type=int, default=7), kappa_x=dict(type=float, default=0.0),
        grid=dict(type=int, default=17), bands=dict(type=int, default=16))
    sub("floquet-decay", r=dict(type=int, default=0), q=dict(type=int, default=1),
        V_y=dict(type=float, default=0.25), J_x=dict(type=float, default=0.0431),
        n_max=dict(type=int, default=7), kappa_x=dict(type=float, default=0.0),
        F_list=dict(type=str, default="0.02 0.05 0.1"),
        steps=dict(type=int, default=1500))
    return p


def run(argv=None) -> int:
    """Dispatch one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.config:
        overrides = _load_config_file(ns.config)
        supplied = {a.split("=")[0].lstrip("-").replace("-", "_")
                    for a in (argv or sys.argv[1:]) if a.startswith("--")}
        for key, raw in overrides.items():
            if key in supplied or not hasattr(ns, key):
                continue  # explicit flags win; unknown keys are errors below
            current = getattr(ns, key)
            if isinstance(current, bool):
                setattr(ns, key, raw.lower() in ("1", "true", "yes"))
            elif isinstance(current, int) and not isinstance(current, bool):
                setattr(ns, key, int(raw))
            elif isinstance(current, float):
                setattr(ns, key, float(raw) if key != "alpha" else parse_alpha(raw))
            else:
                setattr(ns, key, raw)
        unknown = [k for k in overrides if not hasattr(ns, k)]
        if unknown:
            print(f"error: unknown config keys {unknown}", file=sys.stderr)
            return 2
    if ns.selftest:
        return _selftest(ns.command)
    token = json.dumps({k: repr(v) for k, v in sorted(vars(ns).items())})
    started = time.time()
    run_dir = RunDirectory(ns.out, token)
    try:
        summary = COMMANDS[ns.command](ns, run_dir)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    params = {k: (v if isinstance(v, (int, float, str, bool, type(None))) else repr(v))
              for k, v in vars(ns).items() if k not in ("out", "config")}
    run_dir.write_json("summary.json", summary)
    run_dir.manifest(ns.command, params, ns.seed, time.time() - started)
    print(json.dumps({"run_dir": str(run_dir.path), **summary},
                     sort_keys=True, default=_json_default))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
