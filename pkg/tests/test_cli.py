import json
import math
from pathlib import Path

import pytest

from hallsim.cli import COMMANDS, NAMED_DIRECTIONS, parse_direction, run
from hallsim.core import Irrational, Rational


def read_manifest(out: Path) -> dict:
    return json.loads((out / "manifest.json").read_text())


def csv_header(path: Path) -> list[str]:
    return path.read_text().splitlines()[0].split(",")


class TestParsing:
    def test_direction_fraction(self):
        d = parse_direction("1/3")
        assert isinstance(d, Rational) and (d.r, d.q) == (1, 3)
        d = parse_direction("2/6")
        assert (d.r, d.q) == (1, 3)
        assert parse_direction("0") == Rational(0, 1)

    def test_named_constants(self):
        d = parse_direction("golden4")
        assert isinstance(d, Irrational)
        assert d.beta == pytest.approx((math.sqrt(5.0) - 1.0) / 4.0, abs=1e-15)

    def test_float_direction(self):
        d = parse_direction("0.41")
        assert isinstance(d, Irrational) and d.beta == 0.41


class TestExitCodes:
    def test_validation_error_is_2(self, capsys, tmp_path):
        code = run(["scales", "--alpha", "0.75", "--out", str(tmp_path / "x")])
        assert code == 2
        assert "alpha" in capsys.readouterr().err

    def test_convergence_error_is_3(self, capsys, tmp_path):
        # a y-window too small for the strip states trips the leak guard
        code = run(["finite-ls", "--alpha", "0.1", "--F", "0.02",
                    "--direction", "0/1", "--Lx", "12", "--m-half", "40",
                    "--out", str(tmp_path / "x")])
        assert code == 3

    def test_success_is_0(self, tmp_path):
        assert run(["scales", "--alpha", "0.1", "--out", str(tmp_path / "x")]) == 0


class TestSelftests:
    @pytest.mark.parametrize("command", sorted(COMMANDS))
    def test_every_command_has_a_selftest(self, command):
        assert run([command, "--selftest"]) == 0


class TestReproducibility:
    def test_identical_args_reproduce_csv_bytes(self, tmp_path):
        args = ["harper", "--alpha", "1/10", "--grid", "32"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(args + ["--out", str(a)]) == 0
        assert run(args + ["--out", str(b)]) == 0
        assert (a / "harper_bands.csv").read_bytes() == (b / "harper_bands.csv").read_bytes()
        ma, mb = read_manifest(a), read_manifest(b)
        assert ma["parameters"] == mb["parameters"]
        assert ma["outputs"] == mb["outputs"]

    def test_manifest_lists_outputs(self, tmp_path):
        out = tmp_path / "r"
        assert run(["scales", "--alpha", "0.1", "--out", str(out)]) == 0
        m = read_manifest(out)
        assert m["subcommand"] == "scales"
        assert "scales.json" in m["outputs"]
        assert m["version"]


class TestConfigFile:
    def test_file_values_and_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("[physics]\nalpha = 1/5\nF = 0.4\n")
        out = tmp_path / "r"
        code = run(["scales", "--config", str(cfg), "--F", "0.6",
                    "--out", str(out)])
        assert code == 0
        data = json.loads((out / "scales.json").read_text())
        # alpha from the file, F from the explicit flag
        assert data["omega_c"] == pytest.approx(2 * math.pi / 5, rel=1e-12)
        assert data["omega_B"] == pytest.approx(0.6)

    def test_unknown_keys_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("nonsense = 12\n")
        assert run(["scales", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2


class TestCommandSurfaces:
    """Every emitting subcommand produces its documented CSV schema."""

    def run_ok(self, tmp_path, args):
        out = tmp_path / "run"
        assert run(args + ["--out", str(out)]) == 0
        return out

    def test_ws(self, tmp_path):
        out = self.run_ok(tmp_path, ["ws", "--alpha", "0", "--F", "1.4",
                                     "--direction", "1/1"])
        assert csv_header(out / "ws_state.csv") == ["l", "m", "prob"]

    def test_lsx_bands_and_scan(self, tmp_path):
        out = self.run_ok(tmp_path, ["lsx-bands", "--alpha", "1/6", "--F", "4",
                                     "--direction", "1/2", "--grid", "16",
                                     "--bands", "3"])
        assert csv_header(out / "lsx_bands.csv") == ["kappa", "band_index", "energy"]
        out = self.run_ok(tmp_path, ["lsx-scan", "--alpha", "1/6",
                                     "--direction", "1/1",
                                     "--F-list", "8 16", "--grid", "48"])
        assert csv_header(out / "bandwidth_scan.csv") == ["F", "bandwidth"]

    def test_lsl_family(self, tmp_path):
        base = ["--alpha", "1/3", "--F", "1.5", "--direction", "golden4"]
        out = self.run_ok(tmp_path, ["lsl-state", *base])
        assert csv_header(out / "lsl_state.csv") == ["l", "m", "prob"]
        out = self.run_ok(tmp_path, ["lsl-density", *base, "--samples", "3"])
        assert csv_header(out / "transverse_density.csv") == ["l", "rho", "stderr"]
        out = self.run_ok(tmp_path, ["lsl-participation", *base,
                                     "--F-list", "1.5 2.5"])
        assert csv_header(out / "participation.csv") == ["F", "participation"]

    def test_piflux_and_kbm(self, tmp_path):
        out = self.run_ok(tmp_path, ["piflux-bands", "--r", "1", "--q", "2",
                                     "--F", "1.2", "--phi", "0.6283",
                                     "--grid", "24", "--bands", "4"])
        assert csv_header(out / "piflux_bands.csv") == ["kappa", "band_index", "energy"]
        out = self.run_ok(tmp_path, ["kbm", "--inv-F-list", "0.5 1.0",
                                     "--phi", "0.6283", "--grid", "48"])
        assert csv_header(out / "kbm_comparison.csv") == \
            ["inv_F", "bandwidth_numeric", "bandwidth_kbm"]
        data = json.loads((out / "summary.json").read_text())
        assert data["first_collapse_inv_F"] == pytest.approx(1.3547, abs=1e-3)

    def test_propagate_with_snapshot(self, tmp_path):
        out = self.run_ok(tmp_path, ["propagate", "--alpha", "1/3", "--F", "1.5",
                                     "--direction", "golden4", "--t-final", "4",
                                     "--half-lx", "26", "--half-ly", "26",
                                     "--snapshots", "4"])
        assert csv_header(out / "observables.csv")[0] == "time_TJ"
        snaps = list(out.glob("snapshot_*.csv"))
        assert len(snaps) == 1

    def test_band_pop(self, tmp_path):
        out = self.run_ok(tmp_path, ["band-pop", "--alpha", "0.5", "--F", "0.588",
                                     "--direction", "1/3", "--t-final", "6",
                                     "--points", "25", "--grid", "24"])
        assert csv_header(out / "band_population.csv") == ["time_TJ", "p2"]

    def test_classical_surfaces(self, tmp_path):
        out = self.run_ok(tmp_path, ["classical-map", "--alpha", "0.1545",
                                     "--F", "0.3", "--direction", "1/3",
                                     "--grid", "4", "--periods", "5"])
        assert csv_header(out / "stroboscopic.csv") == ["x", "p"]
        out = self.run_ok(tmp_path, ["classical-spread", "--alpha", "0.1545",
                                     "--direction", "0/1", "--F-list", "8",
                                     "--particles", "2000", "--t-final", "60"])
        assert csv_header(out / "spreading.csv") == ["F", "A"]
        out = self.run_ok(tmp_path, ["island-size", "--alpha", "0.1545",
                                     "--direction", "1/3", "--F-list", "0.5",
                                     "--resolution", "30", "--periods", "10"])
        assert csv_header(out / "island_size.csv") == ["F", "S"]

    def test_finite_family(self, tmp_path):
        out = self.run_ok(tmp_path, ["parabolic-spec", "--alpha", "1/6",
                                     "--gamma", "0.05", "--window", "31",
                                     "--levels", "40"])
        assert csv_header(out / "parabolic_spectrum.csv") == ["index", "energy"]
        out = self.run_ok(tmp_path, ["flux-flow", "--alpha", "0.1",
                                     "--gamma", "0.018", "--window", "29",
                                     "--levels", "8", "--grid", "9"])
        assert csv_header(out / "spectral_flow.csv") == ["phi", "level_id", "energy"]
        out = self.run_ok(tmp_path, ["ribbon", "--alpha", "1/10",
                                     "--Lx", "20", "--grid", "13"])
        assert csv_header(out / "ribbon_bands.csv") == \
            ["kappa", "level", "energy", "edge_flag", "v_g"]
        out = self.run_ok(tmp_path, ["depletion", "--alpha", "0.1",
                                     "--F-drive", "0.06", "--t-final", "300",
                                     "--Lx", "40"])
        assert csv_header(out / "depletion.csv") == ["time", "ground_population"]

    def test_finite_ls_and_dipole(self, tmp_path):
        out = self.run_ok(tmp_path, ["finite-ls", "--alpha", "0.1", "--F", "0.05",
                                     "--direction", "0/1", "--Lx", "20",
                                     "--m-half", "90"])
        assert csv_header(out / "strip_levels.csv") == ["index", "energy"]
        assert csv_header(out / "strip_density.csv") == ["l", "m", "prob"]
        out = self.run_ok(tmp_path, ["dipole", "--alpha", "0.1", "--gamma", "0.05",
                                     "--r0", "6", "--periods", "1"])
        assert (out / "dipole_series.csv").exists()
        assert list(out.glob("dipole_snapshot_*.csv"))

    def test_multiband_family(self, tmp_path):
        out = self.run_ok(tmp_path, ["multiband", "--r", "1", "--q", "8",
                                     "--grid", "7", "--bands", "10"])
        assert csv_header(out / "multiband_bands.csv") == ["kappa", "band_index", "energy"]
        out = self.run_ok(tmp_path, ["floquet-decay", "--r", "0", "--q", "1",
                                     "--F-list", "0.05", "--steps", "400"])
        assert csv_header(out / "decay_rates.csv") == ["F", "band", "Gamma"]
