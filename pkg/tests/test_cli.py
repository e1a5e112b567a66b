import json
import subprocess
import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

from boxopt.cli import cli, make_report
from boxopt.errors import ConfigurationError

DATA = Path(__file__).parent / "data"


@pytest.fixture
def runner():
    return CliRunner()


class TestReportMath:
    def test_paper_table_values(self):
        # Best Score 0.829 <-> Empty Volume 45.3%; 0.836 <-> 45.5%
        V = 10**12
        r = make_report(int(0.829 * V), V)
        assert abs(100 * r.kpi - 45.33) < 0.01
        r = make_report(int(0.836 * V), V)
        assert abs(100 * r.kpi - 45.53) < 0.01

    def test_zero_score(self):
        r = make_report(0, 100)
        assert r.score == 0 and r.kpi == 0

    def test_round_trip_identity(self):
        r = make_report(829, 1000)
        assert abs(r.kpi / (1 - r.kpi) - r.score) < 1e-12

    def test_kpi_strictly_increasing(self):
        kpis = [make_report(obj, 1000).kpi for obj in range(0, 5000, 250)]
        assert all(a < b for a, b in zip(kpis, kpis[1:]))

    def test_zero_total_volume_rejected(self):
        with pytest.raises(ConfigurationError):
            make_report(5, 0)


def _run(runner, args):
    result = runner.invoke(cli, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def desk_scale_pipeline(runner, workdir) -> dict:
    """The bundled desk-scale instance: fixed seeds, returns the result JSON
    with timing fields stripped."""
    d = Path(workdir)
    boxes = d / "boxes.csv"
    _run(runner, ["gen-boxes", "--min", "100x100x100", "--max", "400x400x400",
                  "--step", "100", "--out", str(boxes)])
    _run(runner, ["gen-cartons", "--boxes", str(boxes),
                  "--out-cartons", str(d / "cartons.csv"),
                  "--out-rel", str(d / "rel.csv")])
    _run(runner, ["gen-units", "--seed", "5", "--count", "12",
                  "--boxes", str(boxes), "--min-dim", "60", "--max-dim", "250",
                  "--max-items", "3", "--out", str(d / "units.jsonl")])
    _run(runner, ["compute-fit", "--units", str(d / "units.jsonl"),
                  "--boxes", str(boxes), "--mode", "kdtree",
                  "--out", str(d / "fit.bin"), "--stats", str(d / "stats.json")])
    _run(runner, ["optimize", "--mode", "benders-xy", "--fit", str(d / "fit.bin"),
                  "--boxes", str(boxes), "--units", str(d / "units.jsonl"),
                  "--cartons", str(d / "cartons.csv"), "--rel", str(d / "rel.csv"),
                  "-M", "3", "--out", str(d / "result.json")])
    payload = json.loads((d / "result.json").read_text())
    for record in payload.get("iterations", []):
        record.pop("elapsed_s", None)
    payload.pop("elapsed_s", None)
    return payload


class TestPipeline:
    def test_full_pipeline_deterministic(self, runner, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        a = desk_scale_pipeline(runner, tmp_path / "a")
        b = desk_scale_pipeline(runner, tmp_path / "b")
        assert a == b
        assert a["gap"] == 0.0
        assert a["report"]["kpi"] < 1.0

    def test_pipeline_matches_golden_result(self, runner, tmp_path):
        payload = desk_scale_pipeline(runner, tmp_path)
        golden = json.loads((DATA / "golden_result.json").read_text())
        assert payload == golden

    def test_cut_pool_dump(self, runner, tmp_path):
        desk_scale_pipeline(runner, tmp_path)
        _run(runner, ["optimize", "--mode", "benders-xy",
                      "--fit", str(tmp_path / "fit.bin"),
                      "--boxes", str(tmp_path / "boxes.csv"),
                      "--units", str(tmp_path / "units.jsonl"),
                      "--cartons", str(tmp_path / "cartons.csv"),
                      "--rel", str(tmp_path / "rel.csv"),
                      "-M", "3", "--cuts-out", str(tmp_path / "cuts.jsonl"),
                      "--out", str(tmp_path / "r2.json")])
        lines = (tmp_path / "cuts.jsonl").read_text().splitlines()
        assert lines
        first = json.loads(lines[0])
        assert {"iter", "s", "w"} <= set(first)

    def test_gen_boxes_paper_scale_row_count(self, runner, tmp_path):
        out = tmp_path / "boxes.csv"
        _run(runner, ["gen-boxes", "--min", "155x155x105", "--max", "995x595x595",
                      "--step", "10", "--out", str(out)])
        rows = out.read_text().splitlines()
        assert len(rows) == 71_790 + 1  # header

    def test_grid_and_kdtree_modes_agree(self, runner, tmp_path):
        boxes = tmp_path / "boxes.csv"
        units = tmp_path / "units.jsonl"
        _run(runner, ["gen-boxes", "--min", "100x100x100", "--max", "300x300x300",
                      "--step", "100", "--out", str(boxes)])
        _run(runner, ["gen-units", "--seed", "2", "--count", "8", "--boxes", str(boxes),
                      "--min-dim", "50", "--max-dim", "200", "--max-items", "2",
                      "--out", str(units)])
        _run(runner, ["compute-fit", "--units", str(units), "--boxes", str(boxes),
                      "--mode", "grid", "--out", str(tmp_path / "grid.bin")])
        _run(runner, ["compute-fit", "--units", str(units), "--boxes", str(boxes),
                      "--mode", "kdtree", "--out", str(tmp_path / "kd.bin")])
        assert (tmp_path / "grid.bin").read_bytes() == (tmp_path / "kd.bin").read_bytes()

    def test_direct_mode_single_unit(self, runner, tmp_path):
        boxes = tmp_path / "boxes.csv"
        _run(runner, ["gen-boxes", "--min", "100x100x100", "--max", "200x200x200",
                      "--step", "100", "--out", str(boxes)])
        _run(runner, ["gen-cartons", "--boxes", str(boxes),
                      "--out-cartons", str(tmp_path / "cartons.csv"),
                      "--out-rel", str(tmp_path / "rel.csv")])
        units = tmp_path / "units.jsonl"
        units.write_text('{"id":"u0","items":[{"l":90,"w":90,"h":90}]}\n')
        _run(runner, ["compute-fit", "--units", str(units), "--boxes", str(boxes),
                      "--out", str(tmp_path / "fit.bin")])
        result = _run(runner, ["optimize", "--mode", "direct",
                               "--fit", str(tmp_path / "fit.bin"), "--boxes", str(boxes),
                               "--units", str(units),
                               "--cartons", str(tmp_path / "cartons.csv"),
                               "--rel", str(tmp_path / "rel.csv"), "-M", "2"])
        payload = json.loads(result.output)
        assert payload["gap"] == 0.0
        # the largest box is forced; the second carton provides the snug box
        assert payload["incumbent_mm3"] == 100**3 - 90**3

    def test_rejection_report(self, runner, tmp_path):
        boxes = tmp_path / "boxes.csv"
        _run(runner, ["gen-boxes", "--min", "100x100x100", "--max", "200x200x200",
                      "--step", "100", "--out", str(boxes)])
        units = tmp_path / "units.jsonl"
        units.write_text(
            '{"id":"big","items":[{"l":900,"w":900,"h":900}]}\n'
            '{"id":"ok","items":[{"l":50,"w":50,"h":50}]}\n'
        )
        rejects = tmp_path / "rejects.jsonl"
        _run(runner, ["compute-fit", "--units", str(units), "--boxes", str(boxes),
                      "--out", str(tmp_path / "fit.bin"), "--rejects", str(rejects)])
        recorded = [json.loads(line) for line in rejects.read_text().splitlines()]
        assert recorded == [{"id": "big", "line": 1, "reason": "exceeds largest box"}]


class TestSubcommands:
    def test_fits_command(self, runner):
        result = _run(runner, ["fits", "--items", "2x1x1,2x1x1", "--box", "2x2x1"])
        payload = json.loads(result.output)
        assert payload["fits"] is True
        assert payload["exhausted"] is False
        assert payload["nodes"] >= 1

    def test_report_command(self, runner):
        result = _run(runner, ["report", "--objective", "829", "--total-volume", "1000"])
        payload = json.loads(result.output)
        assert abs(payload["kpi_percent"] - 45.33) < 0.01

    def test_bench_fit_suite(self, runner, tmp_path):
        out = tmp_path / "bench.json"
        _run(runner, ["bench", "--suite", "fit", "--sizes", "8,16",
                      "--repetitions", "1", "--out", str(out)])
        rows = json.loads(out.read_text())
        assert [r["n"] for r in rows] == [8, 16]
        assert all(r["kd_calls"] < r["grid_calls"] for r in rows)

    def test_bench_dual_suite_csv(self, runner, tmp_path):
        out = tmp_path / "bench.csv"
        _run(runner, ["bench", "--suite", "dual", "--sizes", "200", "--dual-b", "256",
                      "--repetitions", "1", "--format", "csv", "--out", str(out)])
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        assert "speedup" in lines[0]

    def test_config_file_defaults(self, runner, tmp_path):
        cfg = tmp_path / "boxopt.ini"
        cfg.write_text("[gen-boxes]\nmin_dims = 100x100x100\nmax_dims = 200x200x200\n"
                       "step = 100\n")
        out = tmp_path / "boxes.csv"
        _run(runner, ["--config", str(cfg), "gen-boxes", "--out", str(out)])
        assert len(out.read_text().splitlines()) == 5  # header + 4 boxes

    def test_usage_error_exit_code(self, runner):
        result = runner.invoke(cli, ["bench", "--suite", "nope"])
        assert result.exit_code == 2

    def test_domain_error_exit_code(self):
        # min exceeds max: a domain error must exit 1, not crash
        proc = subprocess.run(
            [sys.executable, "-m", "boxopt.cli", "gen-boxes",
             "--min", "300x300x300", "--max", "200x200x200", "--step", "100"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
        assert "error:" in proc.stderr
