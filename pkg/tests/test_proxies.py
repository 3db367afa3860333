import numpy as np
import pytest

from surreval.agents import AgentSpec, AgentType, SpaceConfig, TaskKind, sample_agent
from surreval.errors import DegenerateInputError, InputError
from surreval.metrics import classification_summary
from surreval.proxies import (
    DataPool,
    ProxyConfig,
    bootstrap_proxy,
    holdout_proxy,
    kfold_proxy,
    proxy_index,
    proxy_names,
    proxy_vector,
)


@pytest.fixture(scope="module")
def class_pool():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(400, 3))
    y = (x[:, 0] + 0.5 * rng.normal(size=400) > 0).astype(float)
    return DataPool(x, y, "classification")


@pytest.fixture(scope="module")
def agent():
    cfg = SpaceConfig(input_dim=3, output_dim=1, task_kind=TaskKind.BINARY_CLASSIFICATION)
    return sample_agent(cfg, np.random.default_rng(5))


def test_proxy_config():
    cfg = ProxyConfig()
    assert cfg.estimators == ("holdout-100", "holdout-50", "holdout-20", "holdout-10", "cv-5", "cv-10", "bootstrap")
    with pytest.raises(Exception):
        ProxyConfig(holdout_fractions=(0.0,))
    with pytest.raises(Exception):
        ProxyConfig(cv_folds=(1,))


def test_holdout_full_pool_equals_direct_metric(class_pool, agent):
    from surreval.agents import forward_batch

    mv = holdout_proxy(class_pool, agent, 1.0, seed=1)
    direct = classification_summary(forward_batch(agent, class_pool.features), class_pool.targets)
    assert np.array_equal(mv.as_array(), direct.as_array())


def test_holdout_determinism_and_fraction(class_pool, agent):
    a = holdout_proxy(class_pool, agent, 0.5, seed=42)
    b = holdout_proxy(class_pool, agent, 0.5, seed=42)
    assert np.array_equal(a.as_array(), b.as_array())
    c = holdout_proxy(class_pool, agent, 0.5, seed=43)
    assert not np.array_equal(a.as_array(), c.as_array())
    with pytest.raises(InputError):
        holdout_proxy(class_pool, agent, 0.0, seed=1)


def test_holdout_small_fraction_concentration():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(10_000, 3))
    y = (x[:, 0] > 0).astype(float)
    pool = DataPool(x, y, "classification")
    cfg = SpaceConfig(input_dim=3, output_dim=1, task_kind=TaskKind.BINARY_CLASSIFICATION)
    agent = sample_agent(cfg, np.random.default_rng(2))
    full_acc = holdout_proxy(pool, agent, 1.0, seed=0)["acc"]
    hits = 0
    for seed in range(100):
        sub_acc = holdout_proxy(pool, agent, 0.1, seed=seed)["acc"]
        hits += abs(sub_acc - full_acc) < 0.1
    assert hits >= 95


def test_kfold_mean_acc_equals_pool_acc(class_pool, agent):
    # equal fold sizes: 400 rows, 5 folds
    mv = kfold_proxy(class_pool, agent, 5, seed=3)
    full = holdout_proxy(class_pool, agent, 1.0, seed=0)
    assert mv["acc"] == pytest.approx(full["acc"], abs=1e-12)
    again = kfold_proxy(class_pool, agent, 5, seed=3)
    assert np.array_equal(mv.as_array(), again.as_array())
    with pytest.raises(InputError):
        kfold_proxy(class_pool, agent, 1, seed=0)


def test_kfold_degenerate_folds_are_skipped():
    x = np.random.default_rng(4).normal(size=(12, 2))
    y = np.array([1.0] + [0.0] * 11)  # lone positive: most folds lack it
    pool = DataPool(x, y, "classification")
    agent = AgentSpec(
        AgentType.LINEAR, 2, 1, (), np.array([1.0, 0.0]), np.zeros(1), TaskKind.BINARY_CLASSIFICATION
    )
    mv = kfold_proxy(pool, agent, 4, seed=1)
    assert np.isfinite(mv.as_array()).all()
    # single-class pool: ranking metrics undefined on every fold, accuracy kept
    all_neg = DataPool(x, np.zeros(12), "classification")
    mv = kfold_proxy(all_neg, agent, 4, seed=1)
    assert np.isnan(mv["roc_auc"]) and np.isnan(mv["recall"])
    assert np.isfinite(mv["acc"])


def test_bootstrap(class_pool, agent):
    a = bootstrap_proxy(class_pool, agent, seed=7)
    b = bootstrap_proxy(class_pool, agent, seed=7)
    assert np.array_equal(a.as_array(), b.as_array())
    # identical rows: resample metric equals pool metric
    x = np.tile([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]], (10, 1))
    y = np.tile([1.0, 0.0], 10)
    pool = DataPool(x, y, "classification")
    mv = bootstrap_proxy(pool, agent, seed=8)
    full = holdout_proxy(pool, agent, 1.0, seed=0)
    assert mv["roc_auc"] == full["roc_auc"]


def test_bootstrap_mean_concentration():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(5000, 3))
    y = (x[:, 0] > 0).astype(float)
    pool = DataPool(x, y, "classification")
    cfg = SpaceConfig(input_dim=3, output_dim=1, task_kind=TaskKind.BINARY_CLASSIFICATION)
    agent = sample_agent(cfg, np.random.default_rng(10))
    full_acc = holdout_proxy(pool, agent, 1.0, seed=0)["acc"]
    accs = [bootstrap_proxy(pool, agent, seed=s)["acc"] for s in range(300)]
    assert abs(np.mean(accs) - full_acc) < 0.02


def test_proxy_vector_layout_and_determinism(class_pool, agent):
    cfg = ProxyConfig()
    names = proxy_names(cfg, "classification")
    assert len(names) == 7 * 6
    assert names[0] == "holdout-100.roc_auc"
    assert names[-1] == "bootstrap.pr_auc"
    vec = proxy_vector(class_pool, agent, cfg, seed=11)
    assert vec.size == len(names)
    assert np.array_equal(vec, proxy_vector(class_pool, agent, cfg, seed=11))
    i = proxy_index(cfg, "classification", "holdout-100", "acc")
    assert vec[i] == holdout_proxy(class_pool, agent, 1.0, seed=0)["acc"]
    with pytest.raises(InputError):
        proxy_index(cfg, "classification", "cv-7", "acc")


def test_kfold_leave_one_out_regression():
    rng = np.random.default_rng(12)
    x = rng.normal(size=(12, 3))
    y = rng.normal(size=12)
    pool = DataPool(x, y, "regression")
    cfg = SpaceConfig(input_dim=3, output_dim=1, task_kind=TaskKind.REGRESSION)
    agent = sample_agent(cfg, np.random.default_rng(13))
    mv = kfold_proxy(pool, agent, k=12, seed=1)
    from surreval.agents import forward_batch

    preds = forward_batch(agent, x)
    # leave-one-out fold means: rmse and mae per fold are the row's absolute error
    assert mv["mae"] == pytest.approx(np.mean(np.abs(preds - y)), abs=1e-12)
    assert mv["rmse"] == pytest.approx(np.mean(np.abs(preds - y)), abs=1e-12)
    assert np.isnan(mv["r2"])  # undefined on single-row folds
