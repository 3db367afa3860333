"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
The two end-to-end desk-scale runs take a few minutes each.
"""

import itertools
import math
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest
import scipy.special
import scipy.stats

from surreval.bounds import (
    BoundKind,
    ErrorMeasurements,
    TABLE_NS,
    TABLE_SIGMAS,
    causal_bound_nonpositivity,
    causal_bound_positivity,
    epsilon,
    generalization_bound,
)
from surreval.harness import ExperimentConfig, emit_bound_table, run_backtest, run_scene
from surreval.learners import BaseLearnerConfig
from surreval.metrics import classification_summary, pr_auc, roc_auc
from surreval.shapley import CoalitionGame, shapley_values
from surreval.special import ks_sf, std_normal_sf
from surreval.stattests import bias_check, group_bias_check, id_check, iid_check, tail_probability

from test_bounds import GOLDEN_CAUSAL, GOLDEN_GENERALIZATION, printed_ulp
from test_metrics import confusion_oracle, pr_auc_oracle, random_binary_instance, roc_auc_oracle


def report(name: str) -> None:
    print(f"\nACCEPTANCE {name}: PASS")


# ---------------------------------------------------------------------------
# Frozen experiment configs (the "acceptance jobs").
# ---------------------------------------------------------------------------

REGRESSION_SCENE = {
    "seed": 20240801,
    "replicates": 5,
    "scene": {
        "kind": "synthetic",
        "task": "regression",
        "rows": 1500,
        "input_dim": 3,
        "noise_std": 3.0,
        "target_metric": "r2",
        "space": {"type_probability": 1.0},
    },
    "n_agents": 2000,
    "learners": [{"kind": "linear"}],
    "sigmas": [0.5, 0.05],
}

CLASSIFICATION_SCENE = {
    "seed": 20240802,
    "replicates": 5,
    "scene": {
        "kind": "synthetic",
        "task": "classification",
        "rows": 1500,
        "input_dim": 2,
        "target_metric": "roc_auc",
    },
    "n_agents": 2000,
    "learners": [{"kind": "gbt"}],
    "sigmas": [0.5, 0.05],
}

BACKTEST = {
    "seed": 20240803,
    "replicates": 5,
    "learners": [
        {"kind": "linear", "ridge_strength": 1.0},
        {"kind": "gbt", "trees": 60, "depth": 4, "subsample": 0.7},
    ],
    "market": {
        "n_stocks": 200,
        "n_days": 60,
        "n_agents": 200,
        "slot_len": 10,
        "train_days": [16, 20],
        "test_days": [20, 22],
        "generator": {"mean_reversion": 0.5, "vol_of_vol": 0.05, "vol_trend": 0.98},
    },
    "attribution": {"enabled": True, "max_rows": 8000, "learner": {"kind": "linear", "ridge_strength": 1.0}},
}


def test_app_h_golden_tables(tmp_path):
    t0 = time.perf_counter()
    for n, cells in GOLDEN_GENERALIZATION.items():
        for sigma, cell in zip(TABLE_SIGMAS, cells):
            assert abs(epsilon(n, sigma) - float(cell)) <= printed_ulp(cell), (n, sigma)
    for n, cells in GOLDEN_CAUSAL.items():
        for sigma, cell in zip(TABLE_SIGMAS, cells):
            assert abs(2.0 * epsilon(n, sigma) - float(cell)) <= printed_ulp(cell), (n, sigma)
    gen_path, causal_path = emit_bound_table(tmp_path, TABLE_SIGMAS, TABLE_NS)
    slack = 1e-9  # guards the comparison itself against float subtraction noise
    gen_cells = {r.split(",")[0]: r.strip().split(",")[1:] for r in gen_path.read_text().splitlines()[2:]}
    for n, cells in GOLDEN_GENERALIZATION.items():
        for emitted, cell in zip(gen_cells[str(n)], cells):
            value = float(emitted.removeprefix("E+"))
            assert abs(value - float(cell)) <= printed_ulp(cell) * (1.0 + slack)
    causal_cells = {r.split(",")[0]: r.strip().split(",")[1:] for r in causal_path.read_text().splitlines()[2:]}
    for n, cells in GOLDEN_CAUSAL.items():
        for emitted, cell in zip(causal_cells[str(n)], cells):
            value = float(emitted.removeprefix("2E+"))
            assert abs(value - float(cell)) <= printed_ulp(cell) * (1.0 + slack)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"bound tables took {elapsed:.2f}s"
    report(f"App-H golden tables (88 cells, {elapsed * 1e3:.0f} ms)")


def test_hoeffding_coverage():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240804)
    trials = 2000
    worst = []
    for p, n, sigma in itertools.product((0.1, 0.5), (30, 100), (0.05, 0.5)):
        eps = epsilon(n, sigma)
        means = rng.binomial(n, p, trials) / n
        violations = float(np.mean(p >= means + eps))
        limit = sigma + 2.0 * math.sqrt(sigma * (1.0 - sigma) / trials)
        assert violations <= limit, (p, n, sigma, violations, limit)
        worst.append(violations / limit)
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    report(f"Hoeffding coverage (max violation/limit {max(worst):.2f}, {elapsed:.1f}s)")


def test_causal_bound_structure():
    rng = np.random.default_rng(20240805)
    mpmath.mp.dps = 50
    for _ in range(100):
        losses = rng.random(int(rng.integers(2, 200)))
        sigma = float(rng.uniform(0.001, 0.9))
        m = ErrorMeasurements(losses=losses, iide_claimed=True, iris_claimed=True)
        gen = generalization_bound(m, sigma)
        causal = causal_bound_nonpositivity(m, sigma)
        assert causal.bound == 2.0 * gen.bound
    for _ in range(100):
        la = rng.random(int(rng.integers(2, 300)))
        lb = rng.random(int(rng.integers(2, 300)))
        sigma = float(rng.uniform(0.001, 0.9))
        ma = ErrorMeasurements(losses=la, iide_claimed=True)
        mb = ErrorMeasurements(losses=lb, iide_claimed=True)
        got = causal_bound_positivity(ma, mb, sigma).bound
        term_a = mpmath.mpf(float(la.mean())) + mpmath.sqrt(mpmath.log(2.0 / mpmath.mpf(sigma)) / (2 * la.size))
        term_b = mpmath.mpf(float(lb.mean())) + mpmath.sqrt(mpmath.log(2.0 / mpmath.mpf(sigma)) / (2 * lb.size))
        oracle = 2 * max(term_a, term_b)
        assert abs(got - float(oracle)) <= 1e-9
    report("causal bound structure (doubling exact, positivity vs 50-digit oracle <= 1e-9)")


def test_statistical_calibration_and_special_functions():
    t0 = time.perf_counter()
    # special functions against the high-precision oracle grids
    for z in np.linspace(-8, 8, 200):
        assert abs(2.0 * std_normal_sf(abs(z)) - 2.0 * scipy.stats.norm.sf(abs(z))) <= 1e-6
    for df in (3, 10, 100):
        for t in np.linspace(-20, 20, 200):
            assert abs(tail_probability("student_t", float(t), df=df) - 2 * scipy.stats.t.sf(abs(t), df)) <= 1e-6
    for df in (1, 2, 10):
        for x in np.linspace(0, 60, 200):
            assert abs(tail_probability("chi_square", float(x), df=df) - scipy.stats.chi2.sf(x, df)) <= 1e-6
    for lam in np.linspace(0.05, 3.0, 200):
        assert abs(ks_sf(float(lam)) - scipy.special.kolmogorov(lam)) <= 1e-6

    trials = 1000
    alpha = 0.05

    def errors(x):
        return ErrorMeasurements(losses=x, iide_claimed=True, iris_claimed=True)

    rng = np.random.default_rng(20240806)
    iid_rej = 0
    for t in range(trials):
        x = np.clip(rng.normal(0.2, 0.05, 5000), 0.0, 1.0)
        iid_rej += iid_check(errors(x), seed=t).rejected
    iid_size = iid_rej / trials
    assert 0.02 <= iid_size <= 0.09, iid_size

    id_raw = []
    for t in range(trials):
        x = rng.random(3000)
        r = id_check(errors(x), seed=t)
        id_raw.append(np.mean([p < alpha for _, p in r.sub_results]))
    id_size = float(np.mean(id_raw))
    assert 0.02 <= id_size <= 0.09, id_size

    bias_rej = 0
    for t in range(trials):
        bias_rej += bias_check(rng.normal(size=1000)).rejected
    bias_size = bias_rej / trials
    assert 0.03 <= bias_size <= 0.07, bias_size

    gb_raw = []
    for t in range(trials):
        r = group_bias_check(rng.normal(size=1000), seed=t)
        gb_raw.append(1.0 - r.pass_ratio)
    gb_size = float(np.mean(gb_raw))
    assert 0.03 <= gb_size <= 0.07, gb_size
    elapsed = time.perf_counter() - t0
    report(
        "statistical calibration (sizes: IID %.3f, ID %.3f, Bias %.3f, GroupBias %.3f; %.0fs)"
        % (iid_size, id_size, bias_size, gb_size, elapsed)
    )


def test_metric_oracles():
    rng = np.random.default_rng(20240807)
    for i in range(200):
        scores, labels = random_binary_instance(rng, max_n=50, ties=(i % 2 == 0))
        assert roc_auc(scores, labels) == roc_auc_oracle(scores, labels)
        assert pr_auc(scores, labels) == pytest.approx(pr_auc_oracle(scores, labels), abs=1e-12)
        mv = classification_summary(scores, labels)
        acc, recall, precision, f1 = confusion_oracle(scores, labels)
        assert (mv["acc"], mv["recall"], mv["precision"], mv["f1"]) == pytest.approx(
            (acc, recall, precision, f1), abs=1e-12
        )
    report("metric oracles (200 instances, ROC-AUC exact with midrank ties)")


def test_shapley_axioms():
    rng = np.random.default_rng(20240808)
    players = ("condition", "subject", "proxy")
    for _ in range(100):
        values = {frozenset(): float(rng.normal())}
        for r in range(1, 4):
            for coalition in itertools.combinations(players, r):
                values[frozenset(coalition)] = float(rng.normal())
        game = CoalitionGame(players=players, values=values)
        phi = shapley_values(game)
        total = values[frozenset(players)] - values[frozenset()]
        assert abs(sum(phi.values()) - total) <= 1e-12
    f = frozenset
    game = CoalitionGame(
        players=("a", "b", "c"),
        values={
            f(): 0.0, f("a"): 1.0, f("b"): 2.0, f("c"): 0.0,
            f(("a", "b")): 4.0, f(("a", "c")): 1.0, f(("b", "c")): 3.0,
            f(("a", "b", "c")): 5.0,
        },
    )
    phi = shapley_values(game)
    assert (phi["a"], phi["b"], phi["c"]) == (1.5, 3.0, 0.5)
    report("Shapley axioms (efficiency <= 1e-12 on 100 games; derived game exact)")


@pytest.fixture(scope="module")
def regression_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene_regression")
    config = ExperimentConfig.from_json({**REGRESSION_SCENE, "out_dir": str(out)})
    t0 = time.perf_counter()
    result = run_scene(config)
    result["elapsed"] = time.perf_counter() - t0
    return result


@pytest.fixture(scope="module")
def classification_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene_classification")
    config = ExperimentConfig.from_json({**CLASSIFICATION_SCENE, "out_dir": str(out)})
    t0 = time.perf_counter()
    result = run_scene(config)
    result["elapsed"] = time.perf_counter() - t0
    return result


def test_scene_regression_analogue(regression_run):
    rmse = regression_run["rmse_mean"]
    ratio = rmse["Het-Linear"] / rmse["Holdout-100"]
    assert regression_run["elapsed"] < 600.0
    assert ratio <= 0.5, f"Het-Linear/Holdout-100 = {ratio:.3f}"
    report(
        "scene analogue, regression (Het-Linear %.4f vs Holdout-100 %.4f, ratio %.3f, %.0fs)"
        % (rmse["Het-Linear"], rmse["Holdout-100"], ratio, regression_run["elapsed"])
    )


def test_scene_classification_analogue(classification_run):
    rmse = classification_run["rmse_mean"]
    ratio = rmse["Het-GBT"] / rmse["Holdout-100"]
    assert classification_run["elapsed"] < 600.0
    assert ratio <= 0.75, f"Het-GBT/Holdout-100 = {ratio:.3f}"
    report(
        "scene analogue, classification (Het-GBT %.4f vs Holdout-100 %.4f, ratio %.3f, %.0fs)"
        % (rmse["Het-GBT"], rmse["Holdout-100"], ratio, classification_run["elapsed"])
    )


def test_scene_report_rows(regression_run):
    methods = set(regression_run["rmse_mean"])
    for expect in ("Holdout-100", "Holdout-50", "Holdout-20", "Holdout-10", "CV-5", "CV-10", "Bootstrap"):
        assert expect in methods
    report("scene report carries all seven reference estimators")


def test_backtest_analogue(tmp_path):
    config = ExperimentConfig.from_json({**BACKTEST, "out_dir": str(tmp_path / "bt")})
    t0 = time.perf_counter()
    result = run_backtest(config)
    elapsed = time.perf_counter() - t0
    rmse = result["rmse_mean"]
    ratio = rmse["HetEM(GBT)"] / rmse["Baseline(Last10Days)"]
    assert elapsed < 600.0, f"backtest took {elapsed:.0f}s"
    assert ratio <= 0.7, f"HetEM(GBT)/Baseline = {ratio:.3f}"
    assert (tmp_path / "bt" / "attribution.json").exists()
    report(
        "backtest analogue (HetEM(GBT) %.4f vs Last10Days %.4f, ratio %.3f, %.0fs)"
        % (rmse["HetEM(GBT)"], rmse["Baseline(Last10Days)"], ratio, elapsed)
    )


def test_thm2_efficiency_property():
    from surreval.agents import SpaceConfig, TaskKind, sample_agents
    from surreval.evalmodel import meta_fit, meta_predict_batch
    from surreval.proxies import ProxyConfig
    from surreval.scenes import build_eval_dataset, build_system, make_synthetic_scene

    holds = 0
    informative = 0
    for rep in range(20):
        seed = 20240809 + rep * 101
        scene = make_synthetic_scene("regression", rows=400, input_dim=3, seed=seed, noise_std=3.0)
        system = build_system(scene, seed=seed + 1)
        space = SpaceConfig(
            input_dim=3, output_dim=1, task_kind=TaskKind.REGRESSION, type_probability=1.0
        )
        agents = sample_agents(space, 300, np.random.default_rng(seed + 2))
        train, test = build_eval_dataset(
            system, agents, ProxyConfig(cv_folds=(5,)), space, seed=seed + 3, target_metric="r2"
        )
        truth = np.array([s.true_metric for s in test])
        rmse = {}
        eff_rmse = {}
        rng = np.random.default_rng(seed + 4)
        idx_a = rng.integers(0, len(test), 500)
        idx_b = rng.integers(0, len(test), 500)
        for kind in ("linear", "gbt"):
            em = meta_fit(train, BaseLearnerConfig(kind=kind, trees=40, seed=5))
            pred = meta_predict_batch(em, test)
            rmse[kind] = float(np.sqrt(np.mean((pred - truth) ** 2)))
            err = (pred[idx_a] - pred[idx_b]) - (truth[idx_a] - truth[idx_b])
            eff_rmse[kind] = float(np.sqrt(np.mean(err**2)))
        better, worse = ("linear", "gbt") if rmse["linear"] <= rmse["gbt"] else ("gbt", "linear")
        if rmse[better] < 0.9 * rmse[worse]:
            informative += 1
            holds += eff_rmse[better] < eff_rmse[worse]
        else:
            holds += 1  # implication vacuously true
    assert holds >= 18, f"{holds}/20"
    report(f"efficiency property ({holds}/20 replicates, {informative} informative)")


def test_determinism_byte_for_byte(tmp_path):
    small_scene = {
        **REGRESSION_SCENE,
        "replicates": 2,
        "n_agents": 320,
        "scene": {**REGRESSION_SCENE["scene"], "rows": 300},
    }
    a = ExperimentConfig.from_json({**small_scene, "out_dir": str(tmp_path / "a")})
    b = ExperimentConfig.from_json({**small_scene, "out_dir": str(tmp_path / "b")})
    run_scene(a)
    run_scene(b)
    for name in ("scene_rmse.csv", "bounds.csv", "assumptions.json", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    small_bt = {
        **BACKTEST,
        "replicates": 2,
        "market": {**BACKTEST["market"], "n_stocks": 12, "n_agents": 24},
        "attribution": {"enabled": True, "max_rows": 500, "learner": {"kind": "linear"}},
    }
    a = ExperimentConfig.from_json({**small_bt, "out_dir": str(tmp_path / "bta")})
    b = ExperimentConfig.from_json({**small_bt, "out_dir": str(tmp_path / "btb")})
    run_backtest(a)
    run_backtest(b)
    for name in ("trade_rmse.csv", "attribution.json", "manifest.json"):
        assert (tmp_path / "bta" / name).read_bytes() == (tmp_path / "btb" / name).read_bytes(), name
    report("determinism (scene and backtest reports byte-identical on re-run)")
