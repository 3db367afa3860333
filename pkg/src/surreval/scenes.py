"""Evaluation scenes: dataset ingestion/synthesis, the 20/80 system/proxy
split, true-metric computation, and evaluation-sample datasets."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .agents import AgentSpec, SpaceConfig, SubjectVector, TaskKind, forward_batch, vectorize
from .errors import ConfigError, InputError, IngestionError
from .metrics import MetricVector, metric_names, summarize
from .proxies import DataPool, ProxyConfig, proxy_vector, task_metric_kind

SAMPLES_SCHEMA = "surreval.eval_samples/1"

_MISSING = {"", "na", "nan", "null", "none"}


@dataclass(frozen=True)
class SceneDataset:
    name: str
    features: np.ndarray
    targets: np.ndarray
    task_kind: TaskKind

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "targets", np.asarray(self.targets, dtype=np.float64))
        if self.features.ndim != 2:
            raise InputError("features must be a 2-D matrix")
        if self.features.shape[0] != self.targets.size:
            raise InputError("row counts disagree between features and targets")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.targets))):
            raise InputError("dataset must be finite after ingestion")

    @property
    def n_rows(self) -> int:
        return int(self.targets.size)

    @property
    def input_dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def metric_kind(self) -> str:
        return task_metric_kind(self.task_kind)

    def config_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.name.encode())
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.targets).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class SceneSystem:
    """A scene split into the rows that define true metrics (the "real
    system") and the pool the proxy estimators may use."""

    dataset: SceneDataset
    system_idx: np.ndarray
    proxy_idx: np.ndarray
    noise_seed: int

    def __post_init__(self):
        object.__setattr__(self, "system_idx", np.asarray(self.system_idx, dtype=np.int64))
        object.__setattr__(self, "proxy_idx", np.asarray(self.proxy_idx, dtype=np.int64))
        if np.intersect1d(self.system_idx, self.proxy_idx).size:
            raise ConfigError("system and proxy rows must be disjoint")

    @property
    def system_pool(self) -> DataPool:
        return DataPool(
            self.dataset.features[self.system_idx],
            self.dataset.targets[self.system_idx],
            self.dataset.metric_kind,
        )

    @property
    def proxy_pool(self) -> DataPool:
        return DataPool(
            self.dataset.features[self.proxy_idx],
            self.dataset.targets[self.proxy_idx],
            self.dataset.metric_kind,
        )


@dataclass(frozen=True)
class EvaluationSample:
    """One row for evaluation-model fitting: optional condition block,
    subject encoding, proxy metrics, and the true metric value."""

    condition: Optional[np.ndarray]
    subject: SubjectVector
    proxies: np.ndarray
    true_metric: Optional[float]

    def __post_init__(self):
        if self.condition is not None:
            object.__setattr__(self, "condition", np.asarray(self.condition, dtype=np.float64))
        object.__setattr__(self, "proxies", np.asarray(self.proxies, dtype=np.float64))

    @property
    def condition_dim(self) -> int:
        return 0 if self.condition is None else int(self.condition.size)


def _logistic(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def make_synthetic_scene(
    kind: str,
    rows: int,
    input_dim: int,
    seed: int,
    noise_std: float = 0.3,
    treatment_col: bool = False,
    name: Optional[str] = None,
) -> SceneDataset:
    """Stand-in scene: standard-normal features and a sparse nonlinear signal.

    Regression targets add Normal noise to the standardized signal; binary
    targets are Bernoulli draws through a logistic link.  When
    ``treatment_col`` is set, column 0 becomes a Bernoulli(0.5) 0/1 column
    standing in for a randomized treatment flag.
    """
    if kind not in ("regression", "classification"):
        raise ConfigError(f"unknown scene kind {kind!r}")
    if rows < 50:
        raise ConfigError("synthetic scenes need at least 50 rows")
    if input_dim < 2:
        raise ConfigError("synthetic scenes need input_dim >= 2")
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, 1.0, (rows, input_dim))
    if treatment_col:
        x[:, 0] = rng.integers(0, 2, rows).astype(np.float64)
    k = max(2, input_dim // 3)
    active = rng.choice(input_dim, size=k, replace=False)
    coefs = rng.normal(0.0, 1.0, k)
    partners = rng.choice(input_dim, size=k, replace=True)
    raw = np.zeros(rows)
    for j, (fi, a) in enumerate(zip(active, coefs)):
        col = x[:, fi]
        basis = j % 4
        if basis == 0:
            raw += a * col
        elif basis == 1:
            raw += a * (col**2 - 1.0)
        elif basis == 2:
            raw += a * np.tanh(col)
        else:
            raw += a * col * x[:, partners[j]]
    std = raw.std()
    raw = (raw - raw.mean()) / (std if std > 1e-12 else 1.0)
    scene_name = name or f"synthetic-{kind}-{seed}"
    if kind == "regression":
        targets = raw + noise_std * rng.normal(0.0, 1.0, rows)
        return SceneDataset(scene_name, x, targets, TaskKind.REGRESSION)
    p = _logistic(1.5 * raw)
    for _ in range(10):
        targets = (rng.random(rows) < p).astype(np.float64)
        if 0.0 < targets.mean() < 1.0:
            return SceneDataset(scene_name, x, targets, TaskKind.BINARY_CLASSIFICATION)
    raise ConfigError("failed to draw a two-class target; widen the scene")


def _parse_float(value: str, row: int, col: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise IngestionError(f"row {row}, column {col!r}: cannot parse {value!r} as a number") from exc


def load_csv(path, schema: dict) -> SceneDataset:
    """Ingest a CSV per the declared column roles.

    ``schema`` keys: target (required column name), task ("classification" or
    "regression"), features (optional list, default all other columns),
    ordinal (optional {column: [ordered values]}), onehot_max (default 32).
    Rows with any missing cell are dropped; text columns are one-hot encoded
    in sorted-value order unless declared ordinal.
    """
    path = Path(path)
    target_col = schema.get("target")
    if not target_col:
        raise IngestionError("schema must name a target column")
    task = schema.get("task", "regression")
    if task not in ("classification", "regression"):
        raise IngestionError(f"unknown task {task!r}")
    ordinal = schema.get("ordinal", {})
    onehot_max = int(schema.get("onehot_max", 32))

    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if target_col not in header:
        raise IngestionError(f"missing target column {target_col!r}")
    feature_cols = schema.get("features") or [c for c in header if c != target_col]
    for c in feature_cols:
        if c not in header:
            raise IngestionError(f"missing feature column {c!r}")
    col_of = {c: header.index(c) for c in header}

    kept = []
    for row in rows:
        if len(row) != len(header):
            continue
        cells = [row[col_of[c]] for c in (*feature_cols, target_col)]
        if any(c.strip().lower() in _MISSING for c in cells):
            continue
        kept.append(row)
    if not kept:
        raise IngestionError(f"{path}: no complete rows after dropping missing values")

    columns = []
    names = []
    for c in feature_cols:
        values = [r[col_of[c]].strip() for r in kept]
        if c in ordinal:
            order = {v: i for i, v in enumerate(ordinal[c])}
            col = np.empty(len(values))
            for i, v in enumerate(values):
                if v not in order:
                    raise IngestionError(f"row {i}, column {c!r}: {v!r} not in declared ordinal order")
                col[i] = order[v]
            columns.append(col)
            names.append(c)
            continue
        try:
            col = np.array([float(v) for v in values])
            columns.append(col)
            names.append(c)
            continue
        except ValueError:
            pass
        cats = sorted(set(values))
        if len(cats) > onehot_max:
            raise IngestionError(f"column {c!r} has {len(cats)} categories, above onehot_max={onehot_max}")
        for cat in cats:
            columns.append(np.array([1.0 if v == cat else 0.0 for v in values]))
            names.append(f"{c}={cat}")

    raw_targets = [r[col_of[target_col]].strip() for r in kept]
    if task == "regression":
        targets = np.array([_parse_float(v, i, target_col) for i, v in enumerate(raw_targets)])
        task_kind = TaskKind.REGRESSION
    else:
        cats = sorted(set(raw_targets))
        if set(cats) <= {"0", "1"} or set(cats) <= {"0.0", "1.0"}:
            targets = np.array([float(v) for v in raw_targets])
        elif len(cats) == 2:
            targets = np.array([float(cats.index(v)) for v in raw_targets])
        else:
            raise IngestionError(f"classification target {target_col!r} must be binary, got {cats[:5]}")
        task_kind = TaskKind.BINARY_CLASSIFICATION
    features = np.column_stack(columns)
    return SceneDataset(path.stem, features, targets, task_kind)


def build_system(data: SceneDataset, seed: int) -> SceneSystem:
    """Uniform seed-deterministic 20/80 split into system rows and proxy pool."""
    n = data.n_rows
    if n < 10:
        raise ConfigError("need at least 10 rows to build a system")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_sys = min(max(int(round(0.2 * n)), 1), n - 1)
    noise_seed = int(rng.integers(0, 2**63 - 1))
    return SceneSystem(
        dataset=data,
        system_idx=np.sort(perm[:n_sys]),
        proxy_idx=np.sort(perm[n_sys:]),
        noise_seed=noise_seed,
    )


def true_metric(system: SceneSystem, agent: AgentSpec) -> MetricVector:
    """Agent's metric on the system rows only."""
    data = system.dataset
    if agent.input_dim != data.input_dim:
        raise InputError(f"agent expects {agent.input_dim} features, scene has {data.input_dim}")
    pool = system.system_pool
    scores = forward_batch(agent, pool.features)
    return summarize(scores, pool.targets, data.metric_kind)


def default_target_metric(kind: str) -> str:
    return "roc_auc" if kind == "classification" else "rmse"


def build_eval_dataset(
    system: SceneSystem,
    agents: list,
    proxy_cfg: ProxyConfig,
    space_cfg: SpaceConfig,
    train_frac: float = 0.8,
    seed: int = 0,
    target_metric: Optional[str] = None,
):
    """One evaluation sample per agent, split into train/test agent sets.

    Returns (train, test) lists of EvaluationSample; the split is over agents,
    seed-deterministic, with no agent on both sides.
    """
    if not agents:
        raise ConfigError("agent list is empty")
    if not (0.0 < train_frac < 1.0):
        raise ConfigError("train_frac must lie in (0, 1)")
    kind = system.dataset.metric_kind
    target = target_metric or default_target_metric(kind)
    if target not in metric_names(kind):
        raise ConfigError(f"target metric {target!r} not available for {kind} scenes")
    ss = np.random.SeedSequence(seed)
    proxy_root, split_seq = ss.spawn(2)
    agent_seqs = proxy_root.spawn(len(agents))
    pool = system.proxy_pool
    samples = []
    for agent, seq in zip(agents, agent_seqs):
        proxies = proxy_vector(pool, agent, proxy_cfg, seq)
        tm = true_metric(system, agent)[target]
        samples.append(
            EvaluationSample(
                condition=None,
                subject=vectorize(agent, space_cfg),
                proxies=proxies,
                true_metric=float(tm),
            )
        )
    split_rng = np.random.default_rng(split_seq)
    perm = split_rng.permutation(len(samples))
    n_train = int(round(train_frac * len(samples)))
    train = [samples[i] for i in perm[:n_train]]
    test = [samples[i] for i in perm[n_train:]]
    return train, test


def samples_to_csv(samples, path, provenance: dict, proxy_cols=None) -> None:
    """Columnar CSV plus a JSON provenance sidecar (<path>.meta.json)."""
    if not samples:
        raise InputError("no samples to persist")
    path = Path(path)
    cond_dim = samples[0].condition_dim
    subj_dim = samples[0].subject.width
    n_proxy = samples[0].proxies.size
    proxy_cols = list(proxy_cols) if proxy_cols else [f"proxy_{i}" for i in range(n_proxy)]
    if len(proxy_cols) != n_proxy:
        raise InputError("proxy column names disagree with proxy width")
    header = (
        [f"condition_{i}" for i in range(cond_dim)]
        + [f"subject_{i}" for i in range(subj_dim)]
        + proxy_cols
        + ["true_metric"]
    )
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# schema", SAMPLES_SCHEMA])
        writer.writerow(header)
        for s in samples:
            cond = [] if s.condition is None else [repr(float(v)) for v in s.condition]
            row = (
                cond
                + [repr(float(v)) for v in s.subject.values]
                + [repr(float(v)) for v in s.proxies]
                + [repr(float(s.true_metric))]
            )
            writer.writerow(row)
    meta = dict(provenance)
    meta.setdefault("schema", SAMPLES_SCHEMA)
    meta["condition_dim"] = cond_dim
    meta["subject_width"] = subj_dim
    meta["proxy_columns"] = proxy_cols
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def samples_from_csv(path):
    """Inverse of samples_to_csv; returns (samples, provenance)."""
    path = Path(path)
    meta = json.loads(Path(str(path) + ".meta.json").read_text())
    cond_dim = int(meta["condition_dim"])
    subj_dim = int(meta["subject_width"])
    n_proxy = len(meta["proxy_columns"])
    samples = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        schema_row = next(reader)
        if schema_row[0] != "# schema" or schema_row[1] != SAMPLES_SCHEMA:
            raise IngestionError(f"{path}: unexpected sample schema {schema_row!r}")
        next(reader)  # header
        for row in reader:
            vals = np.array([float(v) for v in row], dtype=np.float64)
            cond = vals[:cond_dim] if cond_dim else None
            subj = vals[cond_dim : cond_dim + subj_dim]
            proxies = vals[cond_dim + subj_dim : cond_dim + subj_dim + n_proxy]
            samples.append(
                EvaluationSample(
                    condition=cond,
                    subject=SubjectVector(type_id=int(subj[0]), values=subj),
                    proxies=proxies,
                    true_metric=float(vals[-1]),
                )
            )
    return samples, meta
