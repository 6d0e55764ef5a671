"""Tests for the binary field dump, config loading, and the CLI commands."""

import csv
import json

import numpy as np
import pytest

from taperlith.cli import main
from taperlith.config import ConfigError, DEFAULTS, from_dict, load_config
from taperlith.fielddump import read_field_dump, write_field_dump
from taperlith.geometry import Grid2D
from taperlith.modes import FieldSlice


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestFieldDump:
    def test_round_trip_bit_exact(self, tmp_path):
        g = Grid2D(nx=23, ny=17, dx=0.1, dy=0.21, x0=-1.1, y0=-1.7)
        rng = np.random.default_rng(3)
        E = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
        field = FieldSlice(grid=g, E=E, wavelength=1.55, polarization="te")
        p = tmp_path / "snap.fld"
        write_field_dump(p, field, z=123.456)
        back, z = read_field_dump(p)
        assert z == 123.456
        assert back.grid == g
        assert back.wavelength == 1.55
        assert back.polarization == "te"
        assert np.array_equal(back.E, E)

    def test_rejects_bad_magic(self, tmp_path):
        p = tmp_path / "bad.fld"
        p.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
        with pytest.raises(ValueError, match="magic"):
            read_field_dump(p)

    def test_rejects_truncated_payload(self, tmp_path):
        g = Grid2D(nx=8, ny=8, dx=0.1, dy=0.1)
        field = FieldSlice(grid=g, E=np.ones(g.shape, dtype=complex), wavelength=1.0)
        p = tmp_path / "snap.fld"
        write_field_dump(p, field, z=0.0)
        p.write_bytes(p.read_bytes()[:-16])
        with pytest.raises(ValueError, match="payload"):
            read_field_dump(p)


class TestConfig:
    def test_defaults_load_and_validate(self):
        cfg = from_dict({})
        assert cfg.mask().w_long == DEFAULTS["mask"]["w_long_um"]
        assert cfg.exposure().tilt_deg == 10.0
        assert cfg.bpm_settings().polarization == "te"

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key: mask.w_mid_um"):
            from_dict({"mask": {"w_mid_um": 5.0}})
        with pytest.raises(ConfigError, match="unknown config key: typo"):
            from_dict({"typo": {}})

    def test_invariants_revalidated_at_load(self):
        with pytest.raises(ConfigError):
            from_dict({"exposure": {"dose_threshold": 0.9}})  # above dose_clear
        with pytest.raises(ConfigError):
            from_dict({"frustum": {"n_core": 1.0}})  # no guiding
        with pytest.raises(ConfigError):
            from_dict({"litho_grid": {"dx_um": 0.5}})  # coarser than lambda/2

    def test_type_checking(self):
        with pytest.raises(ConfigError, match="must be a number"):
            from_dict({"exposure": {"gap0_um": "wide"}})
        with pytest.raises(ConfigError, match="list of numbers"):
            from_dict({"sweep": {"gap0_um_list": "all"}})

    def test_effective_json_round_trip(self):
        cfg = from_dict({"exposure": {"gap0_um": 321.0}})
        again = from_dict(json.loads(cfg.effective_json()))
        assert again.data == cfg.data
        assert again.config_hash() == cfg.config_hash()

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.json")

    def test_invalid_json_is_config_error(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(p)


SMALL_LITHO = {
    "mask": {"w_short_um": 7.5, "w_long_um": 14.0, "altitude_um": 120.0},
    "exposure": {"gap0_um": 150.0, "tilt_deg": 10.0},
}

SMALL_BPM = {
    "frustum": {"w_in_um": 3.0, "w_out_um": 8.0, "h_in_um": 2.0, "h_out_um": 8.0,
                "length_um": 60.0},
    "bpm": {"dx_um": 0.25, "dy_um": 0.25, "dz_um": 2.0, "domain_x_um": 25.0,
            "domain_y_um": 25.0, "y_min_um": -8.0,
            "snapshot_zs_um": [0.0, 30.0, 60.0]},
}


class TestCmdLitho:
    def test_outputs_and_determinism(self, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(SMALL_LITHO))
        out1 = tmp_path / "out1"
        assert main(["litho", "--config", str(cfg_path), "--out", str(out1)]) == 0
        for name in ("height_map.csv", "crest_line.csv", "litho_summary.csv",
                     "effective_config.json"):
            assert (out1 / name).exists()
        rows = _read_csv(out1 / "litho_summary.csv")
        assert rows[0][0] == "profile_class"
        assert rows[1][0] in ("FlatTop", "HemiFrustum", "Blurred")

        # byte-identical rerun from the emitted effective config
        out2 = tmp_path / "out2"
        assert main(["litho", "--config", str(out1 / "effective_config.json"),
                     "--out", str(out2)]) == 0
        for name in ("height_map.csv", "crest_line.csv", "litho_summary.csv",
                     "effective_config.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_bad_config_exits_one(self, tmp_path):
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text(json.dumps({"exposure": {"tilt_deg": 95.0}}))
        assert main(["litho", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 1

    def test_missing_config_exits_one(self, tmp_path):
        assert main(["litho", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 1


class TestCmdBpm:
    def test_outputs_snapshots_and_breakdown(self, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(SMALL_BPM))
        out = tmp_path / "out"
        assert main(["bpm", "--config", str(cfg_path), "--out", str(out)]) == 0

        power = _read_csv(out / "power_vs_z.csv")
        assert power[0] == ["z_um", "power_fraction"]
        fractions = [float(r[1]) for r in power[1:]]
        assert len(fractions) == 31  # launch plus one entry per step
        assert all(0.0 < p <= 1.0 + 1e-9 for p in fractions)

        loss = _read_csv(out / "loss_breakdown.csv")
        assert loss[0] == ["facet_db", "taper_db", "exit_db", "total_db"]
        vals = [float(v) for v in loss[1]]
        assert vals[3] == pytest.approx(vals[0] + vals[1] + vals[2], abs=1e-9)

        for z in (0.0, 30.0, 60.0):
            p = out / f"field_z{z:.2f}um.fld"
            assert p.exists()
            field, z_read = read_field_dump(p)
            assert z_read == z
            assert field.grid.nx == 101

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(SMALL_BPM))
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert main(["bpm", "--config", str(cfg_path), "--out", str(out1)]) == 0
        assert main(["bpm", "--config", str(out1 / "effective_config.json"),
                     "--out", str(out2)]) == 0
        for p1 in sorted(out1.iterdir()):
            assert p1.read_bytes() == (out2 / p1.name).read_bytes()


class TestCmdSweep:
    def test_small_sweep_outputs(self, tmp_path):
        cfg = dict(SMALL_BPM)
        cfg["mask"] = {"w_short_um": 10.0, "w_long_um": 10.0, "altitude_um": 120.0}
        cfg["sweep"] = {
            "tilt_deg_list": [0.0, 10.0],
            "gap0_um_list": [150.0, 400.0],
            "wavelength_um_list": [1.55],
        }
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(cfg_path), "--out", str(out),
                     "--jobs", "1"]) == 0

        tilt = _read_csv(out / "tilt_gap.csv")
        assert tilt[0] == ["tilt_deg", "gap0_um", "taper_angle_deg", "profile_class",
                           "error"]
        assert len(tilt) == 1 + 4  # 2 tilts x 2 gaps
        wl = _read_csv(out / "wavelength_loss.csv")
        assert wl[0][0] == "wavelength_um"
        assert len(wl) == 2

    def test_single_wavelength_matches_cmd_bpm(self, tmp_path):
        cfg = dict(SMALL_BPM)
        cfg["sweep"] = {"tilt_deg_list": [], "gap0_um_list": [],
                        "wavelength_um_list": [1.55], "fiber_n_core": 1.450}
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(cfg))
        out_sweep = tmp_path / "sweep"
        out_bpm = tmp_path / "bpm"
        assert main(["sweep", "--config", str(cfg_path), "--out", str(out_sweep)]) == 0
        assert main(["bpm", "--config", str(cfg_path), "--out", str(out_bpm)]) == 0
        wl = _read_csv(out_sweep / "wavelength_loss.csv")
        loss = _read_csv(out_bpm / "loss_breakdown.csv")
        assert float(wl[1][4]) == pytest.approx(float(loss[1][3]), abs=1e-9)

    def test_empty_axes_exit_one(self, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(
            {"sweep": {"tilt_deg_list": [], "gap0_um_list": [], "wavelength_um_list": []}}))
        assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 1

    def test_all_failed_cells_exit_two(self, tmp_path):
        cfg = {"sweep": {"tilt_deg_list": [-20.0, -10.0], "gap0_um_list": [100.0],
                         "wavelength_um_list": []}}
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "o"
        assert main(["sweep", "--config", str(cfg_path), "--out", str(out)]) == 2
        rows = _read_csv(out / "tilt_gap.csv")
        assert all(r[4] for r in rows[1:])
