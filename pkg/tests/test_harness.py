import csv
import io
import json

import numpy as np
import pytest
import yaml

from cerom import ConfigError, RomInstabilityError, save_snapshots
from cerom.harness import ExperimentConfig, build_pipeline, run_ce_table, run_rom_table
from cerom.harness import experiments
from cerom.harness.cli import main
from cerom.harness.config import parse_override

COARSE = {
    "problem": "burgers_smooth",
    "nu": 0.1,
    "n_cells": 128,
    "dt": 0.01,
    "t_end": 0.5,
    "pod": {"n_modes": 4},
    "filters": [{"kind": "projection"}],
    "r": [2, 4],
}


def write_config(tmp_path, mapping, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(mapping))
    return path


class TestConfig:
    def test_defaults_fill_in(self):
        cfg = ExperimentConfig.from_mapping({"r": [2]})
        assert cfg.closure["rcond"] == 1e-5
        assert cfg.rom["method"] == "bdf2"
        assert cfg.filters[0].kind == "projection"

    def test_overrides(self):
        cfg = ExperimentConfig.from_mapping(COARSE, ["nu=0.05", "closure.rcond=1e-6", "r=[1, 2]"])
        assert cfg.nu == 0.05 and cfg.closure["rcond"] == 1e-6 and cfg.r == [1, 2]

    def test_bad_override_syntax(self):
        with pytest.raises(ConfigError):
            parse_override("nu")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping(COARSE, ["nu.x=1"])

    @pytest.mark.parametrize(
        "patch",
        [
            {"problem": "channel"},
            {"r": []},
            {"filters": [{"kind": "differential", "delta": -0.1}]},
            {"variants": ["les"]},
            {"unknown_key": 1},
            {"pod": {"n_modes": 2}, "r": [3]},
            {"problem": "external"},
            {"t_end": 0.505},
        ],
    )
    def test_rejected(self, patch):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping({**COARSE, **patch})

    def test_hash_tracks_content(self):
        a = ExperimentConfig.from_mapping(COARSE)
        b = ExperimentConfig.from_mapping(COARSE)
        c = ExperimentConfig.from_mapping(COARSE, ["seed=7"])
        assert a.config_hash() == b.config_hash() != c.config_hash()

    def test_load_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.load(tmp_path / "missing.yaml")
        bad = tmp_path / "bad.yaml"
        bad.write_text("r: [1,\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.load(bad)

    def test_shipped_presets_validate(self):
        from pathlib import Path

        presets = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))
        assert presets
        for path in presets:
            ExperimentConfig.load(path)


class TestTables:
    def test_ce_table_shape(self):
        report = run_ce_table(ExperimentConfig.from_mapping(COARSE))
        rows = list(csv.reader(io.StringIO(report.csv_text())))
        assert rows[0] == ["r", "delta", "metric", "value"]
        assert [r[0] for r in rows[1:]] == ["2", "4"]
        assert float(rows[-1][3]) <= 1e-12
        assert report.manifest()["config_hash"] == report.config.config_hash()

    def test_rom_table_full_rank_variants_equal(self):
        report = run_rom_table(ExperimentConfig.from_mapping(COARSE))
        vals = [report.value(4, f"error_{v}") for v in ("grom", "ddc", "ice_ddc", "ce_ddc")]
        assert max(vals) - min(vals) <= 1e-12 * max(vals)

    def test_jobs_do_not_change_output(self):
        cfg = ExperimentConfig.from_mapping({**COARSE, "filters": [
            {"kind": "projection"}, {"kind": "differential", "delta": 0.01}]})
        assert run_rom_table(cfg, jobs=1).csv_text() == run_rom_table(cfg, jobs=3).csv_text()

    def test_best_delta_mode_records_choice(self):
        cfg = ExperimentConfig.from_mapping({
            **COARSE,
            "r": [2],
            "filters": [{"kind": "differential", "delta": d} for d in (0.1, 0.01, 0.001)],
            "rom": {"delta_mode": "best"},
        })
        fixed = run_rom_table(ExperimentConfig.from_mapping(cfg.raw, ["rom.delta_mode=fixed"]))
        best = run_rom_table(cfg)
        assert len(best.rows) == 4
        for _, delta, metric, value in best.rows:
            candidates = [row[3] for row in fixed.rows if row[2] == metric]
            assert value == min(candidates)
            assert fixed.value(2, metric, delta) == value

    def test_unstable_cell_is_marked(self, monkeypatch):
        real = experiments.integrate

        def flaky(model, *args, **kw):
            if model.variant == "ce_ddc":
                raise RomInstabilityError("ROM instability", step=3)
            return real(model, *args, **kw)

        monkeypatch.setattr(experiments, "integrate", flaky)
        report = run_rom_table(ExperimentConfig.from_mapping(COARSE))
        assert report.value(2, "error_ce_ddc") is None
        assert "2,,error_ce_ddc,unstable" in report.csv_text()
        assert len(report.manifest()["unstable_cells"]) == 2
        assert report.value(2, "error_grom") > 0

    def test_external_snapshots(self, tmp_path):
        pipe = build_pipeline(ExperimentConfig.from_mapping(COARSE))
        path = tmp_path / "ext.roms"
        save_snapshots(pipe.snapshots, path)
        ext = {**COARSE, "problem": "external", "snapshot_file": str(path), "r": [4]}
        report = run_ce_table(ExperimentConfig.from_mapping(ext))
        assert report.rows[0][3] <= 1e-12
        internal = run_rom_table(ExperimentConfig.from_mapping(COARSE))
        external = run_rom_table(ExperimentConfig.from_mapping({**ext, "r": [2, 4]}))
        assert [row[:3] for row in internal.rows] == [row[:3] for row in external.rows]
        np.testing.assert_allclose([row[3] for row in external.rows], [row[3] for row in internal.rows], rtol=1e-9)
        no_conv = ExperimentConfig.from_mapping({**ext, "convection": "none"})
        with pytest.raises(ConfigError):
            run_rom_table(no_conv)

    def test_r_beyond_rank(self):
        with pytest.raises(ConfigError):
            build_pipeline(ExperimentConfig.from_mapping({**COARSE, "pod": {"n_modes": None}, "r": [90]}))


class TestCli:
    def test_ce_table_writes_reports(self, tmp_path, capsys):
        cfg = write_config(tmp_path, COARSE)
        out = tmp_path / "out"
        assert main(["ce-table", "--config", str(cfg), "--out", str(out)]) == 0
        text = (out / "ce_table.csv").read_text()
        assert text == capsys.readouterr().out
        manifest = json.loads((out / "ce_table.json").read_text())
        assert manifest["config"]["output_dir"] == str(out)
        assert len(manifest["config_hash"]) == 64

    def test_rom_table_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, COARSE)
        for sub in ("a", "b"):
            assert main(["rom-table", "--config", str(cfg), "--out", str(tmp_path / sub), "--jobs", "2"]) == 0
        assert (tmp_path / "a" / "rom_table.csv").read_bytes() == (tmp_path / "b" / "rom_table.csv").read_bytes()

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {**COARSE, "nu": -1.0})
        assert main(["ce-table", "--config", str(cfg)]) == 2
        assert "config error" in capsys.readouterr().err
        assert main(["pod", "--set", "r=[]", "--out", str(tmp_path)]) == 2
        assert main(["ce-table", "--config", str(tmp_path / "nope.yaml")]) == 2
        assert main(["dns", "--jobs", "0"]) == 2

    def test_numerical_error_exit_code(self, tmp_path, capsys):
        pipe = build_pipeline(ExperimentConfig.from_mapping(COARSE))
        snaps = pipe.snapshots
        path = tmp_path / "zero.roms"
        save_snapshots(type(snaps)(Y=np.zeros_like(snaps.Y), mass=snaps.mass, stiffness=snaps.stiffness, dt=snaps.dt), path)
        cfg = write_config(tmp_path, {**COARSE, "problem": "external", "snapshot_file": str(path)})
        assert main(["pod", "--config", str(cfg), "--out", str(tmp_path)]) == 3
        assert "zero-energy" in capsys.readouterr().err

    def test_dns_and_external_pod(self, tmp_path):
        cfg = write_config(tmp_path, COARSE)
        assert main(["dns", "--config", str(cfg), "--out", str(tmp_path / "dns")]) == 0
        snap = tmp_path / "dns" / "snapshots.roms"
        assert snap.exists()
        code = main(["pod", "--config", str(cfg), "--set", "problem=external",
                     "--set", f"snapshot_file={snap}", "--out", str(tmp_path / "pod")])
        assert code == 0
        report = json.loads((tmp_path / "pod" / "pod.json").read_text())
        assert report["n_modes"] == 4 and float(report["orthonormality_defect"]) < 1e-10

    def test_dns_rejects_external(self, tmp_path):
        code = main(["dns", "--set", "problem=external", "--set", "snapshot_file=x.roms"])
        assert code == 2

    def test_verify(self, tmp_path, capsys):
        cfg = write_config(tmp_path, COARSE)
        assert main(["verify", "--config", str(cfg), "--seed", "3"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 8 and all(line.startswith("PASS") for line in lines)
