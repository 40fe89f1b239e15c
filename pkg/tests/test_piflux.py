import math

import numpy as np
import pytest
import scipy.linalg

from hallsim.core import TWO_PI, HallConfig, Rational, hamiltonian_matrix
from hallsim import lsx
from hallsim.piflux import (
    SublatticeSystem,
    central_pair_levels,
    central_pair_width,
    first_collapse_inverse_field,
    halfflux_bloch_matrix,
    halfflux_patch_matrix,
    halfflux_xy_bandwidth_scan,
    kbm_bandwidth,
    kbm_correction,
    ode_quantized_bands,
    ode_quantized_levels,
    piflux_bands,
    piflux_dispersion,
    quantization_monodromy,
    staggered_chain_matrix,
    tracked_bandwidth,
)
from oracles import bessel_series_oracle


class TestChain:
    def test_hermitian(self):
        sys = SublatticeSystem(1, 2, F=1.3, phi=0.7)
        h = staggered_chain_matrix(sys, 0.41, 18)
        assert np.max(np.abs(h - h.conj().T)) < 1e-14

    def test_even_q_required(self):
        with pytest.raises(ValueError):
            SublatticeSystem(1, 3, F=1.0)

    def test_zero_phase_bands_are_flat(self):
        sys = SublatticeSystem(1, 2, F=1.0, phi=0.0)
        assert tracked_bandwidth(sys, num_kappa=48) < 1e-8

    def test_zero_phase_ladder_degeneracy(self):
        # phi=0 is a tilted square lattice: doubly degenerate rungs
        # separated by the ladder spacing
        sys = SublatticeSystem(1, 2, F=2.0, phi=0.0)
        h = staggered_chain_matrix(sys, 0.3, 40)
        vals = scipy.linalg.eigvalsh(h)
        central = vals[np.abs(vals) < 2.5 * sys.ladder_spacing]
        pairs = central.reshape(-1, 2)
        assert np.max(np.abs(pairs[:, 0] - pairs[:, 1])) < 1e-9
        rungs = pairs.mean(axis=1)
        assert np.allclose(np.diff(rungs), sys.ladder_spacing, atol=1e-9)

    def test_brillouin_periodicity(self):
        sys = SublatticeSystem(1, 2, F=1.7, phi=math.pi / 3)
        kappa = np.linspace(0.0, 1.0, 5)
        a = piflux_bands(sys, kappa, 4).bands
        b = piflux_bands(sys, kappa + TWO_PI * sys.d_tilde, 4).bands
        assert np.allclose(a, b, atol=1e-9)


class TestQuantization:
    def test_agrees_with_chain_diagonalization(self):
        sys = SublatticeSystem(1, 2, F=1.0, phi=math.pi / 5)
        kappa = np.array([0.0, 0.7, 1.9])
        chain = piflux_bands(sys, kappa, 4)
        ode = ode_quantized_bands(sys, kappa, 4)
        assert np.max(np.abs(chain.bands - ode.bands)) < 1e-6

    def test_monodromy_unimodular(self):
        sys = SublatticeSystem(1, 2, F=0.8, phi=math.pi / 5)
        w0 = quantization_monodromy(sys, 0.52)
        assert abs(abs(np.linalg.det(w0)) - 1.0) < 1e-10

    def test_zero_phase_equidistant(self):
        sys = SublatticeSystem(1, 2, F=1.2, phi=0.0)
        levels = ode_quantized_levels(sys, 0.9, level_window=3.0 * sys.ladder_spacing)
        # flat doubly degenerate rungs spaced by the ladder constant
        pairs = levels.reshape(-1, 2)
        assert np.max(np.abs(pairs[:, 0] - pairs[:, 1])) < 1e-9
        assert np.allclose(np.diff(pairs.mean(axis=1)), sys.ladder_spacing, atol=1e-9)


class TestKBM:
    def test_zero_phase_vanishes(self):
        assert kbm_bandwidth(SublatticeSystem(1, 2, F=1.0, phi=0.0)) == 0.0

    def test_closed_form_matches_averaged_integral(self):
        # |<G>|(kappa) = Jy sin(phi/2) |J1(2 sqrt2 Jx/F) cos(sqrt5 kappa/2 + phi/2)|
        sys = SublatticeSystem(1, 2, F=1.0, phi=math.pi / 5)
        j1 = bessel_series_oracle(1, 2.0 * math.sqrt(2.0))
        for kappa in (0.0, 0.5, 1.3):
            a = math.sqrt(5.0) / 2.0 * kappa + sys.phi / 2.0
            expected = abs(math.sin(sys.phi / 2.0) * j1 * math.cos(a))
            assert kbm_correction(sys, kappa) == pytest.approx(expected, abs=1e-10)

    def test_collapse_position_from_bessel_zero(self):
        sys = SublatticeSystem(1, 2, F=1.0, phi=math.pi / 5)
        from scipy.optimize import brentq

        oracle = brentq(lambda x: bessel_series_oracle(1, x), 3.0, 4.5, xtol=1e-13)
        assert first_collapse_inverse_field(sys) == pytest.approx(
            oracle / (2.0 * math.sqrt(2.0)), abs=1e-12)
        assert first_collapse_inverse_field(sys) == pytest.approx(1.3547, abs=1e-4)

    def test_matches_numerics_lightly(self):
        # spot version of the full comparison done in the acceptance suite
        widths = {}
        for inv_f in (0.5, 1.0, 1.8):
            sys = SublatticeSystem(1, 2, F=1.0 / inv_f, phi=math.pi / 5)
            widths[inv_f] = (central_pair_width(sys, num_kappa=96),
                             kbm_bandwidth(sys, second_order=True))
        peak = max(n for (n, _) in widths.values())
        for n, k in widths.values():
            assert abs(n - k) < 0.1 * peak


class TestDispersion:
    def test_band_extrema(self):
        lo, hi = piflux_dispersion(0.0, 0.0)
        assert lo == pytest.approx(-math.sqrt(2.0)) and hi == pytest.approx(math.sqrt(2.0))

    def test_dirac_point(self):
        lo, hi = piflux_dispersion(math.pi / 2, math.pi / 2)
        assert lo == pytest.approx(0.0, abs=1e-14) and hi == pytest.approx(0.0, abs=1e-14)

    def test_cone_is_linear(self):
        # finite-difference slope around the Dirac point is constant
        eps = np.array([1e-3, 2e-3, 4e-3])
        _, up = piflux_dispersion(math.pi / 2 + eps, math.pi / 2)
        slopes = up / eps
        assert np.max(np.abs(slopes - slopes[0])) < 1e-5

    def test_bloch_matrix_reproduces_dispersion(self):
        for kx in (0.1, 0.8):
            for ky in (0.0, 2.1):
                vals = scipy.linalg.eigvalsh(halfflux_bloch_matrix(kx, ky, 1.2, 0.8))
                lo, hi = piflux_dispersion(kx, ky, 1.2, 0.8)
                assert vals[0] == pytest.approx(lo, abs=1e-12)
                assert vals[1] == pytest.approx(hi, abs=1e-12)


class TestCrossFrame:
    def test_pi_phase_patch_equals_uniform_halfflux(self):
        cfg = HallConfig(alpha=0.5, F=0.9, direction=Rational(1, 3))
        a = scipy.linalg.eigvalsh(hamiltonian_matrix(cfg, (-4, -4), (9, 8)))
        b = scipy.linalg.eigvalsh(halfflux_patch_matrix(cfg, (-4, -4), (9, 8), phi=math.pi))
        assert np.allclose(a, b, atol=1e-12)

    def test_diagonal_direction_band_edge_matches_rotated_gauge(self):
        # same spectral edge of the central band from the staggered chain
        # (doubled-lattice frame) and the alpha=1/2 field-aligned chain
        from scipy.optimize import minimize_scalar

        F = 8.0
        sysd = SublatticeSystem(1, 2, F=F, phi=math.pi)

        def stagg_upper(kappa):
            return central_pair_levels(sysd, float(kappa))[1]

        cfg = HallConfig(alpha=0.5, F=F, direction=Rational(1, 1))
        frame = lsx.default_frame(cfg, 5)

        def lsx_upper(kappa):
            # one central-rung level per kappa here (the pair partner sits
            # in the complementary sublattice momentum sector)
            vals, vecs = scipy.linalg.eigh(lsx.assemble_rotated(cfg, float(kappa), frame))
            good = lsx._interior_filter(frame, vecs)
            ev = vals[good]
            sel = ev[np.abs(ev) < 0.45 * F * frame.d]
            return float(sel.max())

        edge_a = -minimize_scalar(lambda k: -stagg_upper(k),
                                  bounds=(0.0, TWO_PI * sysd.d_tilde), method="bounded",
                                  options={"xatol": 1e-10}).fun
        edge_b = -minimize_scalar(lambda k: -lsx_upper(k),
                                  bounds=(0.0, TWO_PI * frame.d), method="bounded",
                                  options={"xatol": 1e-10}).fun
        assert edge_a == pytest.approx(edge_b, abs=1e-6)


class TestFieldAlongOneThird:
    """beta = 1/3 in lattice axes has no even-q doubled-frame direction,
    so the uniform half-flux solver handles it directly."""

    def test_relative_width_peaks_near_the_collapse_sequence_start(self):
        cfg = HallConfig(alpha=0.5, F=1.0, direction=Rational(1, 3))
        inv_f = [0.3, 0.9, 1.5, 1.85, 2.0]
        pts = halfflux_xy_bandwidth_scan(cfg, [1.0 / x for x in inv_f], num_kappa=96)
        rel = {x: p.width / (p.F / math.sqrt(10.0)) for x, p in zip(inv_f, pts)}
        assert all(rel[1.85] > rel[x] for x in inv_f if x != 1.85)

    def test_width_doubles_between_the_two_quoted_fields(self):
        cfg = HallConfig(alpha=0.5, F=1.0, direction=Rational(1, 3))
        pts = halfflux_xy_bandwidth_scan(cfg, [1.0 / 1.85, 0.5], num_kappa=96)
        assert pts[0].width / pts[1].width == pytest.approx(2.0, abs=0.3)

    def test_cubic_decay_at_strong_field(self):
        cfg = HallConfig(alpha=0.5, F=1.0, direction=Rational(1, 3))
        pts = halfflux_xy_bandwidth_scan(cfg, [8.0, 16.0], num_kappa=96)
        assert pts[0].width / pts[1].width == pytest.approx(8.0, rel=0.25)
