import math

import numpy as np
import pytest

from hallsim.core import (
    HallConfig,
    Irrational,
    Rational,
    WaveFunction2D,
    apply_hamiltonian,
    delta_state,
    observables,
)
from hallsim.dynamics import (
    band_population_series,
    bloch_velocity_analytic,
    bloch_velocity_series,
    convergence_check,
    default_dt,
    expectation_vx,
    follow_transporting_line,
    propagate,
    scrambled_gaussian,
    transporting_packet,
)

GOLDEN4 = (math.sqrt(5.0) - 1.0) / 4.0
T_J = 2.0 * math.pi


class TestPropagator:
    def test_norm_and_energy_conservation(self):
        # closed propagation of a localized packet over 100 T_J
        cfg = HallConfig(alpha=1 / 3, F=1.5, direction=Irrational(GOLDEN4))
        psi0 = delta_state(0, 0, 26, 26)
        series, _ = propagate(psi0, cfg, 100 * T_J, record_every=100, track_energy=True)
        assert np.max(np.abs(series["norm"] - 1.0)) < 1e-8
        assert np.ptp(series["energy"]) < 1e-7
        assert np.all(np.diff(series.times) > 0)

    def test_fourth_order_composition_agrees(self):
        cfg = HallConfig(alpha=1 / 3, F=1.5, direction=Irrational(GOLDEN4))
        psi0 = delta_state(0, 0, 26, 26)
        a, _ = propagate(psi0, cfg, 6 * T_J, record_every=40)
        b, _ = propagate(psi0, cfg, 6 * T_J, record_every=40, order=4)
        # they differ by the second-order splitting error at this step size
        assert np.max(np.abs(a["sigma"] - b["sigma"])) < 1e-3

    def test_dt_halving_convergence(self):
        cfg = HallConfig(alpha=1 / 3, F=1.5, direction=Irrational(GOLDEN4))
        psi0 = delta_state(0, 0, 26, 26)
        dt = default_dt(cfg)
        shift1 = convergence_check(psi0, cfg, 4 * T_J, dt=dt)
        shift2 = convergence_check(psi0, cfg, 4 * T_J, dt=0.5 * dt)
        # halving scales the observable shift down by ~4 (second order) ...
        assert 2.5 < shift1 / shift2 < 6.0
        # ... and the fourth-order composition is essentially converged
        assert convergence_check(psi0, cfg, 4 * T_J, dt=dt, order=4) < 5e-6

    def test_boundary_breach_raises(self):
        cfg = HallConfig(alpha=0.5, F=0.5, direction=Rational(1, 3))
        psi0 = delta_state(0, 0, 6, 6)  # deliberately too small
        with pytest.raises(RuntimeError):
            propagate(psi0, cfg, 20 * T_J)

    def test_snapshots_returned(self):
        cfg = HallConfig(alpha=1 / 3, F=1.5, direction=Irrational(GOLDEN4))
        psi0 = delta_state(0, 0, 26, 26)
        _, snaps = propagate(psi0, cfg, 4 * T_J, record_every=10,
                             snapshot_times=(2 * T_J,))
        assert len(snaps) == 1
        t_snap, wf = snaps[0]
        assert t_snap == pytest.approx(2.0, abs=0.1)
        assert wf.norm() == pytest.approx(1.0, abs=1e-9)


class TestSpreadingRegimes:
    def test_rational_ballistic_irrational_saturates(self):
        # delta start at half flux: beta = 1/3 spreads linearly, the nearby
        # irrational orientation saturates (field 0.5, the reference case of
        # the packet-dynamics figures)
        runs = {}
        for name, direction in [("rational", Rational(1, 3)),
                                ("irrational", Irrational(GOLDEN4))]:
            cfg = HallConfig(alpha=0.5, F=0.5, direction=direction)
            psi0 = delta_state(0, 0, 70, 35)
            series, _ = propagate(psi0, cfg, 40 * T_J, record_every=125)
            runs[name] = series
        sig_r = runs["rational"]["sigma"]
        sig_i = runs["irrational"]["sigma"]
        t = runs["rational"].times
        late = t > 20
        slope_r = np.polyfit(t[late], sig_r[late], 1)[0]
        slope_i = np.polyfit(t[late], sig_i[late], 1)[0]
        assert sig_r[-1] > 1.3 * sig_i[-1]
        assert slope_r > 2.5 * slope_i
        # participation saturates as well for the irrational orientation
        part_i = runs["irrational"]["participation"]
        assert part_i[-1] < 1.25 * part_i[np.searchsorted(t, 20.0)]

    def test_scrambled_gaussian_properties(self):
        a = scrambled_gaussian(8.0, seed=5, half_lx=40, half_ly=40)
        b = scrambled_gaussian(8.0, seed=5, half_lx=40, half_ly=40)
        assert np.array_equal(a.amps, b.amps)
        c = scrambled_gaussian(8.0, seed=6, half_lx=40, half_ly=40)
        assert not np.array_equal(a.amps, c.amps)
        # scrambling the phases leaves the Gaussian support area
        assert observables(a).participation == pytest.approx(2 * math.pi * 64.0, rel=0.02)
        with pytest.raises(ValueError):
            scrambled_gaussian(3.0, seed=0, half_lx=10, half_ly=10)

    def test_incoherent_packet_growth_set_by_orientation(self):
        # above the cyclotron frequency only the rational orientation spreads
        results = {}
        for name, direction in [("rational", Rational(1, 3)),
                                ("irrational", Irrational(GOLDEN4))]:
            cfg = HallConfig(alpha=0.1, F=0.9, direction=direction)
            psi0 = scrambled_gaussian(6.0, seed=11, half_lx=78, half_ly=45)
            series, _ = propagate(psi0, cfg, 20 * T_J, record_every=200)
            results[name] = series["sigma"]
        growth_r = results["rational"][-1] - results["rational"][0]
        growth_i = results["irrational"][-1] - results["irrational"][0]
        assert growth_r > 10.0
        assert abs(growth_i) < 0.25 * growth_r


class TestBlochVelocity:
    def test_matches_analytic(self):
        cfg = HallConfig(alpha=0.0, Jx=1.0, Jy=1.0, F=0.4, direction=Rational(1, 2))
        size = 32
        kappa0 = (2 * math.pi * 3 / size, 2 * math.pi * 5 / size)
        t = np.linspace(0.0, 30.0, 25)
        ana, num = bloch_velocity_series(kappa0, cfg, t, size=size)
        assert np.max(np.abs(ana - num)) < 1e-6

    def test_band_bottom_is_stationary(self):
        cfg = HallConfig(alpha=0.0, F=0.3, direction=Rational(0, 1))
        v = bloch_velocity_analytic((0.0, 0.0), cfg, np.array([0.0]))
        assert v[0] == pytest.approx(0.0, abs=1e-14)

    def test_bloch_period(self):
        cfg = HallConfig(alpha=0.0, F=0.35, direction=Rational(0, 1))
        tb = 2 * math.pi / cfg.F
        t = np.linspace(0.0, 2 * tb, 64)
        v = bloch_velocity_analytic((0.4, 1.1), cfg, t)
        assert np.allclose(v, bloch_velocity_analytic((0.4, 1.1), cfg, t + tb), atol=1e-12)


class TestBandPopulations:
    def test_flat_band_field_gives_persistent_oscillations(self):
        # at the band-collapse field the drive is recurrent: the averaged
        # upper-band population keeps swinging and revives to near zero
        cfg = HallConfig(alpha=0.5, F=1 / 1.7, direction=Rational(1, 3))
        t_common = 2 * math.pi * math.sqrt(10.0) * 1.7
        t = np.linspace(0.0, 4 * t_common, 161)
        p2, _ = band_population_series(cfg, t, grid=40)
        assert p2.max() > 0.5
        first = p2[t < t_common]
        late = p2[t >= t_common]
        assert late.min() < 0.06
        assert np.ptp(late) > 0.5 * np.ptp(first)

    def test_dispersive_bands_saturate(self):
        cfg = HallConfig(alpha=0.5, F=1 / 8, direction=Rational(1, 3))
        t = np.linspace(0.0, 16 * T_J, 49)
        p2, _ = band_population_series(cfg, t, grid=40)
        late = p2[t > 8 * T_J]
        assert np.std(late) < 0.15 * np.mean(late)

    def test_irrational_revivals(self):
        # quasi-periodic dynamics with the population dropping back low
        cfg = HallConfig(alpha=0.5, F=1 / 1.7, direction=Irrational(GOLDEN4))
        t = np.linspace(0.0, 40 * T_J, 161)
        p2, _ = band_population_series(cfg, t, grid=40)
        peak = p2.max()
        ipeak = int(np.argmax(p2 > 0.5 * peak))
        assert p2[ipeak:].min() < 0.25 * peak


class TestTransportingPackets:
    def setup_method(self):
        self.cfg = HallConfig(alpha=0.1, F=0.3, direction=Rational(0, 1))
        self.v_star = 0.3 / (2 * math.pi * 0.1)

    def test_line_slope_and_state_velocity(self):
        kgrid = np.arange(0.05, 0.5501, 0.0125)
        line = follow_transporting_line(self.cfg, kgrid)
        slope = np.polyfit(line.kappas, line.energies, 1)[0]
        assert slope == pytest.approx(self.v_star, rel=0.01)
        assert line.velocities.max() == pytest.approx(self.v_star, rel=0.01)

    def test_packet_drifts_at_v_star(self):
        kgrid = np.arange(0.05, 0.5501, 0.0125)
        line = follow_transporting_line(self.cfg, kgrid)
        g = np.exp(-(line.kappas - 0.30) ** 2 / (2 * 0.09**2))
        psi = transporting_packet(self.cfg, line, g, (-70, 110))
        assert psi.norm() == pytest.approx(1.0, abs=1e-12)
        assert expectation_vx(psi, self.cfg) == pytest.approx(self.v_star, rel=0.01)
        tb = 2 * math.pi / self.cfg.F
        series, _ = propagate(psi, self.cfg, 2 * tb, record_every=40)
        slope = np.polyfit(series.times * T_J, series["M1x"], 1)[0]
        assert slope == pytest.approx(self.v_star, rel=0.02)

    def test_requires_axis_aligned_field(self):
        cfg = HallConfig(alpha=0.1, F=0.3, direction=Rational(1, 3))
        with pytest.raises(ValueError):
            follow_transporting_line(cfg, np.linspace(0, 0.5, 9))
