"""Dataset-based proxy metrics: holdout-p subsampling, k-fold splits, and the
bootstrap, all computed for a frozen agent on the scene's proxy pool.

Agents are never trained, so holdout-p means "score the agent on a p-fraction
subsample of the pool", not a train/test split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .agents import AgentSpec, TaskKind, forward_batch
from .errors import ConfigError, DegenerateInputError, InputError
from .metrics import MetricVector, metric_names, summarize, summarize_lenient

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DataPool:
    """Rows an estimator may score an agent on, with their metric kind."""

    features: np.ndarray
    targets: np.ndarray
    kind: str  # "classification" | "regression"

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "targets", np.asarray(self.targets, dtype=np.float64))
        if self.features.shape[0] != self.targets.size:
            raise InputError("features and targets disagree in length")

    @property
    def n(self) -> int:
        return int(self.targets.size)


@dataclass(frozen=True)
class ProxyConfig:
    holdout_fractions: tuple = (1.0, 0.5, 0.2, 0.1)
    cv_folds: tuple = (5, 10)
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "holdout_fractions", tuple(float(f) for f in self.holdout_fractions))
        object.__setattr__(self, "cv_folds", tuple(int(k) for k in self.cv_folds))
        if any(not (0.0 < f <= 1.0) for f in self.holdout_fractions):
            raise ConfigError("holdout fractions must lie in (0, 1]")
        if any(k < 2 for k in self.cv_folds):
            raise ConfigError("cv fold counts must be >= 2")

    @property
    def estimators(self) -> tuple:
        names = [f"holdout-{int(round(100 * f))}" for f in self.holdout_fractions]
        names += [f"cv-{k}" for k in self.cv_folds]
        if self.bootstrap:
            names.append("bootstrap")
        return tuple(names)

    def to_json(self) -> dict:
        return {
            "holdout_fractions": list(self.holdout_fractions),
            "cv_folds": list(self.cv_folds),
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ProxyConfig":
        doc = dict(doc)
        doc["holdout_fractions"] = tuple(doc.get("holdout_fractions", (1.0, 0.5, 0.2, 0.1)))
        doc["cv_folds"] = tuple(doc.get("cv_folds", (5, 10)))
        return cls(**doc)


def _predict(pool: DataPool, agent: AgentSpec, idx=None) -> MetricVector:
    features = pool.features if idx is None else pool.features[idx]
    targets = pool.targets if idx is None else pool.targets[idx]
    scores = forward_batch(agent, features)
    return summarize(scores, targets, pool.kind)


def holdout_proxy(pool: DataPool, agent: AgentSpec, fraction: float, seed) -> MetricVector:
    """Score the agent on a uniformly drawn fraction of the pool
    (fraction 1.0 scores the whole pool)."""
    if not (0.0 < fraction <= 1.0):
        raise InputError("fraction must lie in (0, 1]")
    if fraction == 1.0:
        return _predict(pool, agent)
    rng = np.random.default_rng(seed)
    m = max(1, int(round(fraction * pool.n)))
    idx = rng.permutation(pool.n)[:m]
    return _predict(pool, agent, idx)


def kfold_proxy(pool: DataPool, agent: AgentSpec, k: int, seed) -> MetricVector:
    """Per-metric fold means over one seeded shuffle into k near-equal folds.

    Folds where a metric is undefined are skipped for that metric (with a
    warning count); a metric undefined on every fold comes back NaN, and if
    that happens to all metrics the call fails.
    """
    if k < 2:
        raise InputError("k must be >= 2")
    if pool.n < k:
        raise InputError(f"pool of {pool.n} rows cannot make {k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(pool.n)
    names = metric_names(pool.kind)
    rows = []
    for fold in np.array_split(perm, k):
        scores = forward_batch(agent, pool.features[fold])
        rows.append(summarize_lenient(scores, pool.targets[fold], pool.kind))
    table = np.vstack(rows)
    valid = ~np.isnan(table)
    if not valid.any():
        raise DegenerateInputError(f"all {k} folds degenerate for every metric")
    skipped = int(np.sum(~valid))
    if skipped:
        logger.warning("kfold_proxy skipped %d degenerate fold-metric cells", skipped)
    with np.errstate(invalid="ignore"):
        means = np.where(valid.any(axis=0), np.nansum(table, axis=0) / np.maximum(valid.sum(axis=0), 1), np.nan)
    return MetricVector(pool.kind, dict(zip(names, means)))


def bootstrap_proxy(pool: DataPool, agent: AgentSpec, seed) -> MetricVector:
    """Metric on one with-replacement resample of pool size; degenerate
    resamples are redrawn up to 10 times."""
    if pool.n == 0:
        raise InputError("pool is empty")
    rng = np.random.default_rng(seed)
    for _ in range(10):
        idx = rng.integers(0, pool.n, pool.n)
        try:
            return _predict(pool, agent, idx)
        except DegenerateInputError:
            continue
    raise DegenerateInputError("bootstrap resample degenerate after 10 redraws")


def proxy_vector(pool: DataPool, agent: AgentSpec, cfg: ProxyConfig, seed) -> np.ndarray:
    """Concatenated proxy metrics in estimator order, each estimator
    contributing the scene's full metric list."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(len(cfg.estimators))
    parts = []
    i = 0
    for f in cfg.holdout_fractions:
        parts.append(holdout_proxy(pool, agent, f, children[i]).as_array())
        i += 1
    for k in cfg.cv_folds:
        parts.append(kfold_proxy(pool, agent, k, children[i]).as_array())
        i += 1
    if cfg.bootstrap:
        parts.append(bootstrap_proxy(pool, agent, children[i]).as_array())
    return np.concatenate(parts)


def proxy_names(cfg: ProxyConfig, kind: str) -> list:
    """Column names "<estimator>.<metric>" matching proxy_vector order."""
    return [f"{est}.{m}" for est in cfg.estimators for m in metric_names(kind)]


def proxy_index(cfg: ProxyConfig, kind: str, estimator: str, metric: str) -> int:
    """Position of one estimator/metric pair inside the proxy vector."""
    names = proxy_names(cfg, kind)
    try:
        return names.index(f"{estimator}.{metric}")
    except ValueError as exc:
        raise InputError(f"no proxy column {estimator}.{metric}") from exc


def task_metric_kind(task_kind: TaskKind) -> str:
    if task_kind is TaskKind.BINARY_CLASSIFICATION:
        return "classification"
    if task_kind is TaskKind.REGRESSION:
        return "regression"
    raise InputError(f"no metric kind for task {task_kind}")
