import csv
import json
from pathlib import Path

import numpy as np
import pytest

from surreval.cli import main
from surreval.errors import ConfigError
from surreval.harness import (
    ExperimentConfig,
    emit_bound_table,
    load_errors_csv,
    mean_ci95,
    run_backtest,
    run_scene,
    run_shapley,
    t_quantile,
)


def tiny_scene_config(out_dir, **overrides):
    doc = {
        "seed": 77,
        "replicates": 2,
        "out_dir": str(out_dir),
        "scene": {"kind": "synthetic", "task": "regression", "rows": 240, "input_dim": 3,
                  "noise_std": 2.0, "target_metric": "r2"},
        "n_agents": 320,
        "proxy": {"holdout_fractions": [1.0, 0.5, 0.2, 0.1], "cv_folds": [5, 10], "bootstrap": True},
        "learners": [{"kind": "linear"}],
        "sigmas": [0.5, 0.05],
        "assess": {"n_subsets": 10, "subset_frac": 0.5, "alpha": 0.05},
    }
    doc.update(overrides)
    return doc


def tiny_backtest_config(out_dir, **overrides):
    doc = {
        "seed": 99,
        "replicates": 2,
        "out_dir": str(out_dir),
        "learners": [{"kind": "linear"}, {"kind": "gbt", "trees": 20, "depth": 3}],
        "market": {
            "n_stocks": 8,
            "n_days": 60,
            "n_agents": 20,
            "slot_len": 10,
            "train_days": [14, 17],
            "test_days": [22, 24],
        },
        "attribution": {"enabled": True, "max_rows": 400, "learner": {"kind": "linear"}},
    }
    doc.update(overrides)
    return doc


def read_report(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "# schema"
    header = rows[1]
    return [dict(zip(header, r)) for r in rows[2:]]


def test_run_scene_outputs(tmp_path):
    config = ExperimentConfig.from_json(tiny_scene_config(tmp_path / "out"))
    result = run_scene(config)
    rows = read_report(tmp_path / "out" / "scene_rmse.csv")
    methods = [r["method"] for r in rows]
    for expect in ("Holdout-100", "Holdout-50", "Holdout-20", "Holdout-10", "CV-5", "CV-10", "Bootstrap", "Het-Linear"):
        assert expect in methods
    assert all(float(r["rmse_mean"]) >= 0 for r in rows)
    norm = {r["method"]: float(r["norm_neg_rmse"]) for r in rows}
    assert max(norm.values()) == 1.0 and min(norm.values()) == 0.0
    bounds_rows = read_report(tmp_path / "out" / "bounds.csv")
    kinds = {r["kind"] for r in bounds_rows}
    assert kinds == {"generalization", "causal_non_positivity"}
    # one loss per held-out agent: 20% of 320
    assert all(int(r["n"]) == 64 for r in bounds_rows)
    for r in bounds_rows:
        if r["kind"] == "causal_non_positivity":
            assert float(r["bound"]) == pytest.approx(
                2.0 * (float(r["e_emp"]) + float(r["epsilon"])), abs=1e-12
            )
    assumptions = json.loads((tmp_path / "out" / "assumptions.json").read_text())
    assert "Het(Linear)-IID-R2" in assumptions
    assert "Het(Linear)-GroupBias-R2" in assumptions
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["root_seed"] == 77
    assert len(manifest["replicate_seeds"]) == 2
    assert result["rmse_mean"]["Het-Linear"] > 0


def test_run_scene_byte_determinism(tmp_path):
    cfg_a = ExperimentConfig.from_json(tiny_scene_config(tmp_path / "a"))
    cfg_b = ExperimentConfig.from_json(tiny_scene_config(tmp_path / "b"))
    run_scene(cfg_a)
    run_scene(cfg_b)
    for name in ("scene_rmse.csv", "bounds.csv", "assumptions.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_run_backtest_outputs(tmp_path):
    config = ExperimentConfig.from_json(tiny_backtest_config(tmp_path / "bt"))
    result = run_backtest(config)
    rows = read_report(tmp_path / "bt" / "trade_rmse.csv")
    methods = [r["method"] for r in rows]
    assert methods[0] == "Baseline(Last10Days)"
    assert "HetEM(Linear)" in methods and "HetEM(GBT)" in methods
    att = json.loads((tmp_path / "bt" / "attribution.json").read_text())
    assert set(att["shapley"]) == {"condition", "subject", "proxy"}
    assert att["baseline"] == "Last10Days"
    total = att["values"]["condition+proxy+subject"] - att["values"]["(empty)"]
    assert sum(att["shapley"].values()) == pytest.approx(total, abs=1e-9)
    assert result["rmse_mean"]["Baseline(Last10Days)"] > 0


def test_run_backtest_byte_determinism(tmp_path):
    cfg_a = ExperimentConfig.from_json(tiny_backtest_config(tmp_path / "a"))
    cfg_b = ExperimentConfig.from_json(tiny_backtest_config(tmp_path / "b"))
    run_backtest(cfg_a)
    run_backtest(cfg_b)
    for name in ("trade_rmse.csv", "attribution.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_scene_requires_market_for_backtest(tmp_path):
    config = ExperimentConfig.from_json(tiny_scene_config(tmp_path / "x"))
    with pytest.raises(ConfigError):
        run_backtest(config)


def test_emit_bound_table(tmp_path):
    gen_path, causal_path = emit_bound_table(tmp_path)
    gen = read_report(gen_path)
    causal = read_report(causal_path)
    assert len(gen) == 11 and len(causal) == 11
    row10 = next(r for r in gen if r["samples"] == "10")
    assert row10["conf=0.95"] == "E+0.387"
    crow30 = next(r for r in causal if r["samples"] == "30")
    assert crow30["conf=0.99"] == "2E+0.554"


def test_shapley_scene_report(tmp_path):
    doc = tiny_scene_config(tmp_path / "shap", n_agents=80, replicates=1)
    config = ExperimentConfig.from_json(doc)
    report = run_shapley(config)
    assert set(report["shapley"]) == {"subject", "proxy"}
    assert report["baseline"] == "Holdout-100"
    assert (tmp_path / "shap" / "shapley.json").exists()


def test_t_quantile_and_ci():
    # classic two-sided critical values
    assert t_quantile(0.05, 10) == pytest.approx(2.228, abs=2e-3)
    assert t_quantile(0.05, 4) == pytest.approx(2.776, abs=2e-3)
    mean, hw = mean_ci95([1.0, 2.0, 3.0])
    assert mean == 2.0
    assert hw == pytest.approx(2.4841, abs=2e-3)
    assert mean_ci95([5.0]) == (5.0, 0.0)


def test_load_errors_csv(tmp_path):
    path = tmp_path / "errors.csv"
    path.write_text("loss,residual\n0.1,0.3\n0.2,-0.1\n0.4,0.2\n")
    errors = load_errors_csv(path, iide_claimed=True)
    assert errors.n == 3
    assert errors.signed_residuals is not None
    from surreval.errors import IngestionError

    bad = tmp_path / "bad.csv"
    bad.write_text("value\n0.1\n")
    with pytest.raises(IngestionError):
        load_errors_csv(bad)
    big = tmp_path / "big.csv"
    big.write_text("loss\n1.5\n0.2\n")
    with pytest.raises(IngestionError):
        load_errors_csv(big)
    scaled = load_errors_csv(big, loss_scale=2.0)
    assert scaled.n == 2


# ---------------------------------------------------------------------------
# CLI surface
# ---------------------------------------------------------------------------

def test_cli_emit_bound_table(tmp_path, capsys):
    assert main(["emit-bound-table", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "generalization_bounds.csv").exists()


def test_cli_run_scene_and_exit_codes(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(tiny_scene_config(tmp_path / "out", replicates=1)))
    assert main(["run-scene", "--config", str(cfg_path)]) == 0
    assert (tmp_path / "out" / "scene_rmse.csv").exists()
    assert main(["run-scene", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"replicates": 0}))
    assert main(["run-scene", "--config", str(bad)]) == 2


def test_cli_assess(tmp_path):
    errors_path = tmp_path / "errors.csv"
    rng = np.random.default_rng(0)
    losses = np.clip(rng.normal(0.3, 0.1, 400), 0, 1)
    residuals = rng.normal(0, 0.1, 400)
    with errors_path.open("w") as fh:
        fh.write("loss,residual\n")
        for l, r in zip(losses, residuals):
            fh.write(f"{l},{r}\n")
    out = tmp_path / "report.json"
    rc = main([
        "assess", "--errors", str(errors_path), "--out", str(out),
        "--model-name", "Het(GBT)", "--metric-name", "ACC", "--iide-claimed",
    ])
    assert rc == 0
    report = json.loads(out.read_text())
    assert "Het(GBT)-IID-ACC" in report["results"]
    assert "Het(GBT)-Bias-ACC" in report["results"]
    for entry in report["results"].values():
        assert 0.0 <= entry["p_value"] <= 1.0
    # constant-offset residuals: bias test rejects
    off_path = tmp_path / "biased.csv"
    with off_path.open("w") as fh:
        fh.write("loss,residual\n")
        for l, r in zip(losses, residuals):
            fh.write(f"{l},{r + 0.5}\n")
    rc = main(["assess", "--errors", str(off_path), "--out", str(tmp_path / "r2.json"), "--tests", "Bias"])
    assert rc == 0
    rep2 = json.loads((tmp_path / "r2.json").read_text())
    key = next(iter(rep2["results"]))
    assert rep2["results"][key]["rejected"] is True


def test_cli_shapley(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(tiny_scene_config(tmp_path / "out", replicates=1)))
    assert main(["shapley", "--config", str(cfg_path)]) == 0
    assert (tmp_path / "out" / "shapley.json").exists()


def test_cli_jobs_parallel_matches_serial(tmp_path):
    cfg_a = tmp_path / "a.json"
    cfg_a.write_text(json.dumps(tiny_scene_config(tmp_path / "pa")))
    cfg_b = tmp_path / "b.json"
    cfg_b.write_text(json.dumps(tiny_scene_config(tmp_path / "pb")))
    assert main(["run-scene", "--config", str(cfg_a), "--jobs", "1"]) == 0
    assert main(["run-scene", "--config", str(cfg_b), "--jobs", "2"]) == 0
    assert (tmp_path / "pa" / "scene_rmse.csv").read_bytes() == (tmp_path / "pb" / "scene_rmse.csv").read_bytes()


def test_run_scene_dump_samples(tmp_path):
    doc = tiny_scene_config(tmp_path / "dump", replicates=1, dump_samples=True)
    config = ExperimentConfig.from_json(doc)
    run_scene(config)
    from surreval.scenes import samples_from_csv

    samples, meta = samples_from_csv(tmp_path / "dump" / "samples_rep0_train.csv")
    assert meta["iris_claimed"] is True
    assert "scene_hash" in meta
    assert len(samples) > 0
    assert samples[0].proxies.size == len(meta["proxy_columns"])


def test_cli_runtime_error_exit_code(tmp_path):
    # valid file, but the requested check cannot run on 30 measurements
    path = tmp_path / "short.csv"
    path.write_text("loss\n" + "\n".join(["0.5"] * 30) + "\n")
    rc = main(["assess", "--errors", str(path), "--out", str(tmp_path / "r.json"), "--tests", "IID"])
    assert rc == 3


def test_csv_scene_path_validated_at_load(tmp_path):
    doc = tiny_scene_config(tmp_path / "x")
    doc["scene"] = {"kind": "csv", "path": str(tmp_path / "nope.csv"), "schema": {"target": "y"}}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(doc)
