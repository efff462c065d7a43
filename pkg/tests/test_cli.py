import json
import subprocess
import sys

import numpy as np
import pytest

from abhmm import output, presets
from abhmm.cli import main

X_INF_M2 = -2.7497267355076506536


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def small_ne4(tmp_path, name="cfg.json", **extra):
    cfg = {"preset": "fig-ne4", "runs": 30, "horizon": 25, "sigmas": [1.0, 2.0], **extra}
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestListPresets:
    def test_lists_every_preset(self, capsys):
        code, out, _ = run(["list-presets"], capsys)
        assert code == 0
        for name in list(presets.PRESETS) + list(presets.BOUNDS_PRESETS):
            assert name in out


class TestFixedPoint:
    def test_example(self, capsys):
        code, out, _ = run(["fixed-point", "--alpha", "0.1", "--beta", "1", "--d", "1", "--M", "2"], capsys)
        assert code == 0
        res = json.loads(out)
        assert res["x_inf"][0] == pytest.approx(X_INF_M2, abs=1e-10)
        assert res["residual"] < 1e-11 and res["iterations"] > 0

    def test_alpha_zero_rejected(self, capsys):
        code, _, err = run(["fixed-point", "--alpha", "0", "--beta", "1", "--d", "1"], capsys)
        assert code == 2
        assert "alpha must be in (0, 1/M)" in err

    def test_symmetric_d_equal_components(self, capsys):
        code, out, _ = run(["fixed-point", "--alpha", "0.05", "--beta", "1", "--d", "1.5", "--M", "4"], capsys)
        x = json.loads(out)["x_inf"]
        assert code == 0 and len(x) == 3
        np.testing.assert_allclose(x, x[0], atol=1e-13)

    def test_d_length_mismatch(self, capsys):
        code, _, err = run(["fixed-point", "--alpha", "0.05", "--beta", "1", "--d", "1", "2", "--M", "4"], capsys)
        assert code == 2 and err.startswith("error: d:")

    def test_iteration_cap_is_numeric_failure(self, capsys):
        code, _, err = run(["fixed-point", "--alpha", "0.01", "--beta", "0.1", "--d", "0.1",
                            "--max-iterations", "3"], capsys)
        assert code == 1 and "numeric failure" in err

    def test_writes_json_file(self, capsys, tmp_path):
        dest = tmp_path / "fp.json"
        code, _, _ = run(["fixed-point", "--alpha", "0.1", "--beta", "1", "--d", "1", "--C", "2",
                          "--out", str(dest)], capsys)
        assert code == 0
        data = json.loads(dest.read_text())
        assert data["bounds"]["lambda1"] == pytest.approx(0.843614363675203, abs=1e-12)


class TestBounds:
    def test_single_tuple_one_row(self, capsys, tmp_path):
        dest = tmp_path / "b.csv"
        code, _, _ = run(["bounds", "--alphas", "0.1", "--betas", "1", "--d-mins", "1", "--d-ratios", "1",
                          "--Ms", "2", "--Cs", "2", "--out", str(dest)], capsys)
        assert code == 0
        rows = output.read_rows(dest)
        assert len(rows) == 1
        for col in ("lam", "gamma", "gamma1", "mu_lower", "mu_upper", "lambda1", "error_prob_steady"):
            assert col in rows[0]
        assert float(rows[0]["lambda1"]) == pytest.approx(0.843614363675203, abs=1e-12)

    def test_empty_grid_exit_two(self, capsys, tmp_path):
        code, _, err = run(["bounds", "--alphas", "0.6", "--betas", "1", "--d-mins", "1", "--d-ratios", "1",
                            "--Ms", "2", "--out", str(tmp_path / "b.csv")], capsys)
        assert code == 2 and "no valid tuple" in err

    def test_missing_list_named(self, capsys):
        code, _, err = run(["bounds", "--alphas", "0.1"], capsys)
        assert code == 2 and "betas" in err

    def test_fig2_monotone_in_alpha(self, capsys, tmp_path):
        dest = tmp_path / "fig2.csv"
        assert run(["bounds", "--preset", "fig-2", "--out", str(dest)], capsys)[0] == 0
        rows = output.read_rows(dest)
        groups = {}
        for r in rows:
            if r["mu_lower_vacuous"] == "0":
                groups.setdefault((r["d_min"], r["d_max"]), []).append((float(r["alpha"]), float(r["mu_lower"])))
        assert groups
        for pts in groups.values():
            pts.sort()
            assert np.all(np.diff([m for _, m in pts]) < 0)

    def test_vacuous_rows_flagged(self, capsys, tmp_path):
        dest = tmp_path / "v.csv"
        run(["bounds", "--alphas", "0.15", "--betas", "0.5", "--d-mins", "0.05", "--d-ratios", "2",
             "--Ms", "5", "--out", str(dest)], capsys)
        row = output.read_rows(dest)[0]
        assert row["mu_lower_vacuous"] == "1" and float(row["mu_lower"]) == 0.0
        assert row["mu_upper_clamped"] == "1"


class TestSimulate:
    def test_rerun_from_manifest_is_byte_identical(self, capsys, tmp_path):
        cfg = small_ne4(tmp_path)
        assert run(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")], capsys)[0] == 0
        man = tmp_path / "a" / "manifest.json"
        assert run(["simulate", "--config", str(man), "--out", str(tmp_path / "b")], capsys)[0] == 0
        files = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
        assert files
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_manifest_contents(self, capsys, tmp_path):
        run(["simulate", "--config", str(small_ne4(tmp_path)), "--out", str(tmp_path / "o")], capsys)
        man = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert man["schema_version"] == output.SCHEMA_VERSION
        assert man["library_version"]
        assert man["seed"] == presets.PRESETS["fig-ne4"]["seed"]
        assert man["config"]["runs"] == 30
        assert "summary.csv" in man["files"]

    def test_metrics_csv_columns(self, capsys, tmp_path):
        run(["simulate", "--config", str(small_ne4(tmp_path)), "--out", str(tmp_path / "o")], capsys)
        csvs = [p for p in (tmp_path / "o").glob("sigma=*.csv")]
        assert len(csvs) == 2 * 4
        rows = output.read_rows(csvs[0])
        assert list(rows[0]) == list(output.METRICS_COLUMNS)
        assert len(rows) == 25
        for r in rows:
            assert float(r["accuracy"]) + float(r["p_e"]) == 1.0
            assert np.isfinite(float(r["mean_gap"]))

    def test_flags_override_config(self, capsys, tmp_path):
        cfg = small_ne4(tmp_path)
        run(["simulate", "--config", str(cfg), "--seed", "5", "--runs", "10", "--out", str(tmp_path / "o")], capsys)
        man = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert man["config"]["seed"] == 5 and man["config"]["runs"] == 10

    def test_unknown_key_named(self, capsys, tmp_path):
        cfg = small_ne4(tmp_path, bogus_key=1)
        code, _, err = run(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
        assert code == 2 and "bogus_key" in err

    def test_invalid_alpha_named(self, capsys, tmp_path):
        cfg = small_ne4(tmp_path, alphas=[0.5])
        code, _, err = run(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
        assert code == 2 and "alphas" in err

    def test_unknown_preset(self, capsys, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"preset": "fig-99"}))
        code, _, err = run(["simulate", "--config", str(path)], capsys)
        assert code == 2 and "preset" in err

    def test_unreadable_config(self, capsys, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        code, _, err = run(["simulate", "--config", str(path)], capsys)
        assert code == 2 and err.startswith("error: config:")

    def test_reference_preset(self, capsys, tmp_path):
        assert run(["simulate", "--preset", "fig-ne3", "--out", str(tmp_path / "r")], capsys)[0] == 0
        env = output.read_rows(tmp_path / "r" / "envelope.csv")
        for r in env:
            assert float(r["gap_inf"]) <= float(r["lambda_envelope"]) + 1e-12
        traj = output.read_rows(tmp_path / "r" / "trajectories.csv")
        # after the switch to the last state, its ratio ends positive
        last = [r for r in traj if r["alpha"] == "0.1" and r["beta"] == "1.0"][-1]
        assert float(last["x_4"]) > 0

    def test_adaptation_preset(self, capsys, tmp_path):
        assert run(["simulate", "--preset", "example-1", "--out", str(tmp_path / "e")], capsys)[0] == 0
        rows = output.read_rows(tmp_path / "e" / "adaptation.csv")
        assert [int(r["T1"]) for r in rows] == [10, 50, 200, 1000]
        assert all(int(r["bayes_measured"]) > float(r["bayes_lower_bound"]) for r in rows)

    def test_seed_rejected_for_reference_kind(self, capsys, tmp_path):
        code, _, err = run(["simulate", "--preset", "fig-ne3", "--seed", "3", "--out", str(tmp_path)], capsys)
        assert code == 2 and "seed" in err

    def test_console_script_module(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "abhmm.cli", "list-presets"],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "fig-ne1" in proc.stdout
