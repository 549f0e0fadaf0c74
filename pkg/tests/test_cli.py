from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from envarkit import StructuralModel, TimeSeries, to_reduced_form
from envarkit.cli import main
from envarkit.errors import DataFormatError
from envarkit.formats import (
    load_manifest,
    read_model_json,
    read_series_csv,
    read_truth_json,
    write_model_json,
    write_series_csv,
)
from envarkit.synth import GeneratorConfig, generate_instance

from conftest import random_admissible


def write_manifest(path: Path, output_dir: Path, **over) -> Path:
    payload = {
        "format_version": "envar-kit/1",
        "generator": {"p": 3, "t_len": 120, "seed": 7, "episodes": 2,
                      "edge_prob": 0.3},
        "envar": {"max_steps": 300, "restarts": 2},
        "baselines": [{"name": "eqvar-gds", "params": {}},
                      {"name": "ols-only", "params": {}}],
        "metrics": {"eta": 1.0, "binarize_mass": 0.85, "alpha": 0.05},
        "output_dir": str(output_dir),
    }
    payload.update(over)
    path.write_text(json.dumps(payload))
    return path


class TestSeriesRoundTrip:
    def test_exact_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        ts = TimeSeries(values=rng.normal(size=(3, 40)))
        path = tmp_path / "series.csv"
        write_series_csv(path, ts)
        back = read_series_csv(path)
        np.testing.assert_array_equal(back.values, ts.values)

    def test_header_validation(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,a,b\n1,0,0\n2,0,0\n")
        with pytest.raises(DataFormatError, match="header"):
            read_series_csv(path)

    def test_row_length_error_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x1,x2\n1,0.0,0.0\n2,0.0\n")
        with pytest.raises(DataFormatError, match="line 3"):
            read_series_csv(path)

    def test_time_must_increase(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x1\n1,0.0\n1,0.5\n")
        with pytest.raises(DataFormatError, match="increase"):
            read_series_csv(path)


class TestModelRoundTrip:
    def test_exact_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        m = random_admissible(3, rng)
        path = tmp_path / "model.json"
        write_model_json(path, m, method="envar")
        back, meta = read_model_json(path)
        np.testing.assert_array_equal(back.a0, m.a0)
        np.testing.assert_array_equal(back.a1, m.a1)
        assert back.sigma == m.sigma
        assert meta["method"] == "envar"

    def test_version_check(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"format_version": "other/9", "a0": [[0]],
                                    "a1": [[0]], "sigma": 1.0}))
        with pytest.raises(DataFormatError, match="format_version"):
            read_model_json(path)


class TestSimulateCommand:
    def test_minimal_manifest(self, tmp_path):
        out = tmp_path / "out"
        manifest = write_manifest(
            tmp_path / "m.json", out,
            generator={"p": 2, "t_len": 10, "seed": 1, "episodes": 1},
        )
        assert main(["simulate", "--manifest", str(manifest)]) == 0
        run_dir = out / "p2_s0_e0"
        series = read_series_csv(run_dir / "series.csv")
        assert series.values.shape == (2, 10)
        truth = read_truth_json(run_dir / "truth_model.json")
        assert truth.model.p == 2

    def test_five_episodes_make_five_directories(self, tmp_path):
        out = tmp_path / "out"
        manifest = write_manifest(
            tmp_path / "m.json", out,
            generator={"p": 2, "t_len": 10, "seed": 1, "episodes": 5},
        )
        assert main(["simulate", "--manifest", str(manifest)]) == 0
        assert sorted(d.name for d in out.iterdir()) == [
            f"p2_s0_e{k}" for k in range(5)
        ]

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "out"
        manifest = write_manifest(
            tmp_path / "m.json", out,
            generator={"p": 2, "t_len": 10, "seed": 1, "episodes": 1},
        )
        main(["simulate", "--manifest", str(manifest)])
        first = (out / "p2_s0_e0" / "series.csv").read_bytes()
        main(["simulate", "--manifest", str(manifest)])
        assert (out / "p2_s0_e0" / "series.csv").read_bytes() == first


class TestFitCommand:
    def test_ols_only_recovers_phi_on_noiseless_data(self, tmp_path):
        # quarter-turn rotation: the trajectory is periodic with exact zero
        # mean over whole periods, so centering leaves the recursion intact
        phi = np.array([[0.0, -1.0], [1.0, 0.0]])
        x = np.empty((2, 28))
        x[:, 0] = [1.0, 0.25]
        for t in range(1, 28):
            x[:, t] = phi @ x[:, t - 1]
        write_series_csv(tmp_path / "series.csv", TimeSeries(values=x))
        code = main([
            "fit", "--series", str(tmp_path / "series.csv"),
            "--method", "ols-only", "--output", str(tmp_path),
        ])
        assert code == 0
        report = json.loads((tmp_path / "fit_report.json").read_text())
        np.testing.assert_allclose(np.asarray(report["phi_hat"]), phi, atol=1e-8)

    def test_envar_fit_passes_postconditions(self, tmp_path):
        inst = generate_instance(GeneratorConfig(p=3, t_len=200, seed=2), episode=0)
        write_series_csv(tmp_path / "series.csv", inst.series)
        code = main([
            "fit", "--series", str(tmp_path / "series.csv"), "--method", "envar",
            "--output", str(tmp_path), "--max-steps", "400",
        ])
        assert code == 0
        model, _ = read_model_json(tmp_path / "model.json")
        report = json.loads((tmp_path / "fit_report.json").read_text())
        rf = to_reduced_form(model)
        np.testing.assert_allclose(
            rf.phi, np.asarray(report["phi_hat"]), atol=1e-8
        )
        np.testing.assert_allclose(
            rf.sigma_u, np.asarray(report["sigma_u_hat"]), atol=1e-8
        )

    def test_missing_file_exits_2(self, capsys):
        assert main(["fit", "--series", "no-such-file.csv"]) == 2
        assert "data error" in capsys.readouterr().err

    def test_usage_error_exits_1(self, capsys):
        assert main(["fit", "--series", "x.csv", "--method", "bogus"]) == 1

    def test_zscore_flag(self, tmp_path):
        rng = np.random.default_rng(3)
        values = rng.normal(2.0, 5.0, size=(2, 200))
        write_series_csv(tmp_path / "series.csv", TimeSeries(values=values))
        code = main([
            "fit", "--series", str(tmp_path / "series.csv"), "--method", "ols-only",
            "--output", str(tmp_path), "--zscore",
        ])
        assert code == 0

    def test_uncentered_data_without_centering_exits_3(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        values = rng.normal(5.0, 1.0, size=(2, 50))
        write_series_csv(tmp_path / "series.csv", TimeSeries(values=values))
        code = main([
            "fit", "--series", str(tmp_path / "series.csv"), "--method", "ols-only",
            "--output", str(tmp_path), "--no-center",
        ])
        assert code == 3
        assert "numerical error" in capsys.readouterr().err


class TestEvaluateCommand:
    def test_truth_scores_zero(self, tmp_path):
        inst = generate_instance(GeneratorConfig(p=3, t_len=50, seed=4), episode=0)
        from envarkit.formats import write_truth_json

        write_truth_json(tmp_path / "truth.json", inst, seed=4)
        write_model_json(tmp_path / "model.json", inst.model, method="self")
        out = tmp_path / "score.json"
        code = main([
            "evaluate", "--model", str(tmp_path / "model.json"),
            "--truth", str(tmp_path / "truth.json"), "--output", str(out),
        ])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["sf_oad"] == pytest.approx(0.0, abs=1e-10)
        assert "centralities" in payload
        assert payload["binarize_mass"] == 0.85

    def test_orbit_transformed_truth_scores_near_zero(self, tmp_path):
        from envarkit import OrbitElement, orbit_transform
        from envarkit.formats import write_truth_json
        from conftest import random_orthogonal

        inst = generate_instance(GeneratorConfig(p=3, t_len=50, seed=5), episode=0)
        rng = np.random.default_rng(6)
        member = orbit_transform(
            inst.model, OrbitElement(q=random_orthogonal(3, rng), c=1.6)
        )
        write_truth_json(tmp_path / "truth.json", inst, seed=5)
        write_model_json(tmp_path / "model.json", member, method="orbit")
        out = tmp_path / "score.json"
        code = main([
            "evaluate", "--model", str(tmp_path / "model.json"),
            "--truth", str(tmp_path / "truth.json"), "--output", str(out),
        ])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["sf_oad"] <= 1e-8
        for field in ("sf_oad", "obs_oad", "pearson_phi", "pearson_sigma_u",
                      "pearson_a0", "pearson_a1", "p_values", "method_name",
                      "p", "episode", "centralities", "format_version"):
            assert field in payload

    def test_schema_mismatch_exits_2(self, tmp_path, capsys):
        (tmp_path / "model.json").write_text("{}")
        (tmp_path / "truth.json").write_text("{}")
        code = main([
            "evaluate", "--model", str(tmp_path / "model.json"),
            "--truth", str(tmp_path / "truth.json"),
        ])
        assert code == 2


class TestBenchmarkCommand:
    def test_small_grid_row_counts(self, tmp_path):
        out = tmp_path / "bench"
        manifest = write_manifest(tmp_path / "m.json", out)
        assert main(["benchmark", "--manifest", str(manifest)]) == 0
        lines = (out / "summary.csv").read_text().splitlines()
        header = lines[0].split(",")
        assert header[:4] == ["p", "sigma_std", "method", "episode"]
        assert "wall_ms" not in header
        # 1 p x 1 sigma x 2 episodes x 3 methods
        assert len(lines) == 1 + 6
        timing_lines = (out / "timings.csv").read_text().splitlines()
        assert timing_lines[0].split(",")[-1] == "wall_ms"
        assert len(timing_lines) == 1 + 6
        agg = (out / "aggregate.csv").read_text().splitlines()
        assert len(agg) == 1 + 3  # one row per method
        # per-run artifacts exist
        assert (out / "runs" / "p3_s0_e0" / "envar" / "score.json").exists()
        # aggregate SEM is the sample standard deviation over episodes / sqrt(n)
        sf_col = header.index("sf_oad")
        method_col = header.index("method")
        envar_sf = [
            float(line.split(",")[sf_col])
            for line in lines[1:]
            if line.split(",")[method_col] == "envar"
        ]
        agg_header = agg[0].split(",")
        agg_envar = next(
            line.split(",") for line in agg[1:] if line.split(",")[2] == "envar"
        )
        mean = float(agg_envar[agg_header.index("sf_oad_mean")])
        sem = float(agg_envar[agg_header.index("sf_oad_sem")])
        assert mean == pytest.approx(np.mean(envar_sf), rel=1e-12)
        assert sem == pytest.approx(
            np.std(envar_sf, ddof=1) / np.sqrt(len(envar_sf)), rel=1e-12
        )

    def test_manifest_validation_errors(self, tmp_path, capsys):
        bad = tmp_path / "m.json"
        bad.write_text(json.dumps({"format_version": "envar-kit/1"}))
        assert main(["benchmark", "--manifest", str(bad)]) == 2
        err = capsys.readouterr().err
        assert "generator" in err

    def test_unknown_baseline_rejected(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "m.json", tmp_path / "o",
            baselines=[{"name": "dynotears", "params": {}}],
        )
        assert main(["benchmark", "--manifest", str(manifest)]) == 2

    def test_manifest_round_trip(self, tmp_path):
        manifest_path = write_manifest(tmp_path / "m.json", tmp_path / "o")
        manifest = load_manifest(manifest_path)
        assert manifest.generator.p == 3
        assert manifest.methods() == ("envar", "eqvar-gds", "ols-only")
        assert manifest.grid_p == (3,)
        assert manifest.metrics.binarize_mass == 0.85

    def test_partial_failure_records_error_rows(self, tmp_path):
        # T = 3 makes the Gram matrix rank deficient at p = 3: every run errors
        out = tmp_path / "bench"
        manifest = write_manifest(
            tmp_path / "m.json", out,
            generator={"p": 3, "t_len": 3, "seed": 1, "episodes": 1},
        )
        assert main(["benchmark", "--manifest", str(manifest)]) == 0
        lines = (out / "summary.csv").read_text().splitlines()
        assert len(lines) == 1 + 3
        header = lines[0].split(",")
        error_col = header.index("error")
        for line in lines[1:]:
            assert "RankError" in line.split(",")[error_col]
