"""End-to-end CLI runs against small campaigns."""

import numpy as np
import pytest

from uwqkd import arrivals_store
from uwqkd.cli import main
from uwqkd.config import canonical_text, default_config

SMALL_CONFIG = """
receiver.link_distance_m = 10
campaign.n_photons = 200000
campaign.seed = 42
"""


@pytest.fixture(scope="module")
def arrivals_file(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    cfg_path = base / "link.cfg"
    cfg_path.write_text(SMALL_CONFIG)
    out = base / "arrivals.uqkd"
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
    return out


class TestSimulate:
    def test_deterministic_output_file(self, tmp_path):
        cfg_path = tmp_path / "c.cfg"
        cfg_path.write_text("campaign.n_photons = 50000\ncampaign.seed = 7\n")
        a, b = tmp_path / "a.uqkd", tmp_path / "b.uqkd"
        assert main(["simulate", "--config", str(cfg_path), "--out", str(a)]) == 0
        assert main(["simulate", "--config", str(cfg_path), "--out", str(b),
                     "--workers", "2"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_dry_run_prints_config(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.cfg"
        cfg_path.write_text("campaign.seed = 5\n")
        assert main(["simulate", "--config", str(cfg_path), "--dry-run"]) == 0
        out = capsys.readouterr().out
        assert "campaign.seed = 5" in out
        assert "config hash" in out

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        cfg_path = tmp_path / "bad.cfg"
        cfg_path.write_text("medium.scattering_1_m = -1\n")
        assert main(["simulate", "--config", str(cfg_path), "--dry-run"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file_exit_code(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == 3

    def test_flag_overrides(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.cfg"
        cfg_path.write_text("campaign.n_photons = 999\n")
        assert main(["simulate", "--config", str(cfg_path), "--photons", "123",
                     "--dry-run"]) == 0
        assert "campaign.n_photons = 123" in capsys.readouterr().out


class TestAnalyze:
    def test_reports_and_csvs(self, arrivals_file, tmp_path, capsys):
        out_dir = tmp_path / "rep"
        assert main(["analyze", "--arrivals", str(arrivals_file),
                     "--out-dir", str(out_dir)]) == 0
        out = capsys.readouterr().out
        assert "bit period" in out and "field of view" in out
        assert (out_dir / "delay_cdf.csv").exists()
        assert (out_dir / "aoa_cdf.csv").exists()
        assert (out_dir / "delay_cdf.png").exists()
        assert (out_dir / "aoa_cdf.png").exists()

    def test_no_figures_flag(self, arrivals_file, tmp_path):
        out_dir = tmp_path / "nofig"
        assert main(["analyze", "--arrivals", str(arrivals_file),
                     "--out-dir", str(out_dir), "--no-figures"]) == 0
        assert not (out_dir / "delay_cdf.png").exists()

    def test_median_level(self, arrivals_file, tmp_path, capsys):
        assert main(["analyze", "--arrivals", str(arrivals_file),
                     "--out-dir", str(tmp_path), "--level", "0.5",
                     "--no-figures"]) == 0
        assert "quantile level: 0.5" in capsys.readouterr().out

    def test_missing_arrivals_exit_code(self, tmp_path):
        assert main(["analyze", "--arrivals", str(tmp_path / "none.uqkd"),
                     "--out-dir", str(tmp_path)]) == 3

    def test_empty_arrivals_rejected(self, tmp_path):
        empty = arrivals_store.ArrivalSet(
            canonical_text(default_config()), 10, 1, np.empty((0, 5)), 10, 0, 0.0
        )
        path = tmp_path / "empty.uqkd"
        arrivals_store.persist(empty, path)
        assert main(["analyze", "--arrivals", str(path),
                     "--out-dir", str(tmp_path)]) == 4


class TestOptimize:
    def test_default_run(self, arrivals_file, tmp_path, capsys):
        out_dir = tmp_path / "opt"
        assert main(["optimize", "--arrivals", str(arrivals_file),
                     "--out-dir", str(out_dir)]) == 0
        out = capsys.readouterr().out
        assert "optimal gate" in out
        assert (out_dir / "gate_sweep.csv").exists()
        assert (out_dir / "gate_sweep.png").exists()

    def test_single_point_grid(self, arrivals_file, tmp_path, capsys):
        assert main(["optimize", "--arrivals", str(arrivals_file),
                     "--out-dir", str(tmp_path), "--gate-grid", "9",
                     "--no-figures"]) == 0
        assert "optimal gate 9 ps" in capsys.readouterr().out

    def test_noiseless_override_gives_zero_qber(self, arrivals_file, tmp_path, capsys):
        assert main(["optimize", "--arrivals", str(arrivals_file),
                     "--out-dir", str(tmp_path), "--surface-irradiance", "0",
                     "--dark-count-rate", "0", "--no-figures"]) == 0
        assert "QBER 0" in capsys.readouterr().out

    def test_pinned_selection(self, arrivals_file, tmp_path, capsys):
        assert main(["optimize", "--arrivals", str(arrivals_file),
                     "--out-dir", str(tmp_path), "--bit-period-ns", "1",
                     "--fov-deg", "27", "--no-figures"]) == 0
        out = capsys.readouterr().out
        assert "bit period 1 ns" in out
        assert "FoV 27 deg" in out

    def test_bad_gate_grid_exit_code(self, arrivals_file, tmp_path):
        assert main(["optimize", "--arrivals", str(arrivals_file),
                     "--out-dir", str(tmp_path), "--gate-grid", "abc"]) == 2


class TestTable2:
    def test_single_row_matrix_with_cache(self, tmp_path, capsys):
        matrix = tmp_path / "m.csv"
        matrix.write_text("r0_cm,theta0_max_deg,L_m\n0.3,20,10\n")
        cache = tmp_path / "cache"
        args = ["table2", "--matrix", str(matrix), "--photons", "100000",
                "--seed", "42", "--cache-dir", str(cache),
                "--out-dir", str(tmp_path), "--no-figures"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert "cache hit" not in first
        assert (tmp_path / "table2.txt").exists()
        assert (tmp_path / "table2.csv").exists()
        assert len(list(cache.glob("*.uqkd"))) == 1
        # second run hits the cache
        assert main(args) == 0
        assert "cache hit" in capsys.readouterr().out

    def test_table_csv_columns(self, tmp_path):
        matrix = tmp_path / "m.csv"
        matrix.write_text("r0_cm,theta0_max_deg,L_m\n0.3,0,10\n")
        assert main(["table2", "--matrix", str(matrix), "--photons", "100000",
                     "--out-dir", str(tmp_path), "--no-figures"]) == 0
        lines = (tmp_path / "table2.csv").read_text().strip().split("\n")
        assert lines[0].startswith("r0_cm,theta0_max_deg,L_m,bit_period_ns")
        assert len(lines) == 2

    def test_bad_matrix_exit_code(self, tmp_path):
        matrix = tmp_path / "bad.csv"
        matrix.write_text("wrong,headers\n1,2\n")
        assert main(["table2", "--matrix", str(matrix),
                     "--out-dir", str(tmp_path)]) == 2

    def test_figure_rendered(self, tmp_path):
        matrix = tmp_path / "m.csv"
        matrix.write_text("r0_cm,theta0_max_deg,L_m\n0.3,20,5\n")
        assert main(["table2", "--matrix", str(matrix), "--photons", "50000",
                     "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "table2.png").exists()
