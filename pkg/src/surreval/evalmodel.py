"""Meta-learner over heterogeneous subjects: per-type base regressors mapping
(condition?, subject vector, proxies) -> true metric, with routed inference
and pairwise effect estimation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, InputError, RoutingError
from .learners import BaseLearnerConfig, fit_base, regressor_from_json
from .scenes import EvaluationSample

MODEL_SCHEMA = "surreval.eval_model/1"

# Below this many rows a subject type shares the pooled fallback model.
MIN_GROUP_ROWS = 5


@dataclass(frozen=True)
class FeatureLayout:
    condition_dim: int
    subject_dim: int
    proxy_dim: int

    @property
    def width(self) -> int:
        return self.condition_dim + self.subject_dim + self.proxy_dim

    def to_json(self) -> dict:
        return {
            "condition_dim": self.condition_dim,
            "subject_dim": self.subject_dim,
            "proxy_dim": self.proxy_dim,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FeatureLayout":
        return cls(int(doc["condition_dim"]), int(doc["subject_dim"]), int(doc["proxy_dim"]))


def sample_layout(sample: EvaluationSample) -> FeatureLayout:
    return FeatureLayout(sample.condition_dim, sample.subject.width, int(sample.proxies.size))


def sample_row(sample: EvaluationSample, layout: FeatureLayout) -> np.ndarray:
    if sample_layout(sample) != layout:
        raise InputError(f"sample layout {sample_layout(sample)} != model layout {layout}")
    parts = []
    if layout.condition_dim:
        parts.append(sample.condition)
    parts.append(sample.subject.values)
    parts.append(sample.proxies)
    return np.concatenate(parts)


def assemble_matrix(samples, layout: FeatureLayout) -> np.ndarray:
    out = np.empty((len(samples), layout.width), dtype=np.float64)
    for i, s in enumerate(samples):
        out[i] = sample_row(s, layout)
    return out


@dataclass
class EvaluationModel:
    per_type: dict
    fallback: Optional[object]
    base_kind: str
    layout: FeatureLayout
    target_range: Optional[tuple]
    training_report: dict

    def route(self, type_id: int):
        model = self.per_type.get(int(type_id))
        if model is None:
            model = self.fallback
        if model is None:
            raise RoutingError(f"no model for subject type {type_id} and no fallback")
        return model

    def to_json(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "base_kind": self.base_kind,
            "layout": self.layout.to_json(),
            "target_range": list(self.target_range) if self.target_range else None,
            "per_type": {str(t): m.to_json() for t, m in sorted(self.per_type.items())},
            "fallback": self.fallback.to_json() if self.fallback is not None else None,
            "training_report": self.training_report,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "EvaluationModel":
        if doc.get("schema") != MODEL_SCHEMA:
            raise InputError(f"unexpected model schema {doc.get('schema')!r}")
        return cls(
            per_type={int(t): regressor_from_json(m) for t, m in doc["per_type"].items()},
            fallback=regressor_from_json(doc["fallback"]) if doc["fallback"] else None,
            base_kind=doc["base_kind"],
            layout=FeatureLayout.from_json(doc["layout"]),
            target_range=tuple(doc["target_range"]) if doc["target_range"] else None,
            training_report=doc["training_report"],
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "EvaluationModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def _rmse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def meta_fit(
    train,
    cfg: BaseLearnerConfig,
    target_range: Optional[tuple] = None,
) -> EvaluationModel:
    """Group samples by subject type and fit one base regressor per group.

    Groups below MIN_GROUP_ROWS rows are folded into a pooled all-types
    fallback model, which is also trained whenever fewer than two types are
    seen; the training report records per-type empirical RMSE.
    """
    if not train:
        raise ConfigError("training set is empty")
    layout = sample_layout(train[0])
    x = assemble_matrix(train, layout)
    y = np.array([float(s.true_metric) for s in train], dtype=np.float64)
    type_ids = np.array([s.subject.type_id for s in train], dtype=np.int64)

    groups = {}
    for tid in sorted(set(int(t) for t in type_ids)):
        groups[tid] = np.flatnonzero(type_ids == tid)
    small = [tid for tid, idx in groups.items() if idx.size < MIN_GROUP_ROWS]
    fitted_types = [tid for tid in groups if tid not in small]

    per_type = {}
    report = {"per_type_rmse": {}, "per_type_rows": {}, "pooled_fallback": False, "small_groups": small}
    for k, tid in enumerate(fitted_types):
        idx = groups[tid]
        model = fit_base(x[idx], y[idx], cfg.with_seed(cfg.seed + 1 + k))
        per_type[tid] = model
        report["per_type_rmse"][str(tid)] = _rmse(model.predict(x[idx]), y[idx])
        report["per_type_rows"][str(tid)] = int(idx.size)

    fallback = None
    if small or len(fitted_types) < 2:
        fallback = fit_base(x, y, cfg.with_seed(cfg.seed))
        report["pooled_fallback"] = True
        report["fallback_rmse"] = _rmse(fallback.predict(x), y)
    if not per_type and fallback is None:
        raise ConfigError("no trainable groups")

    return EvaluationModel(
        per_type=per_type,
        fallback=fallback,
        base_kind=cfg.kind,
        layout=layout,
        target_range=tuple(target_range) if target_range else None,
        training_report=report,
    )


def _clamp(value: float, rng: Optional[tuple]) -> float:
    if rng is None:
        return value
    return min(max(value, rng[0]), rng[1])


def meta_predict(em: EvaluationModel, sample: EvaluationSample) -> float:
    """Route the sample to its type's model (or the pooled fallback) and
    clamp bounded-metric outputs into range."""
    row = sample_row(sample, em.layout)
    model = em.route(sample.subject.type_id)
    return _clamp(float(model.predict(row)), em.target_range)


def meta_predict_batch(em: EvaluationModel, samples) -> np.ndarray:
    """Vectorized meta_predict over a sample list."""
    if not samples:
        return np.empty(0)
    x = assemble_matrix(samples, em.layout)
    type_ids = np.array([s.subject.type_id for s in samples], dtype=np.int64)
    out = np.empty(len(samples), dtype=np.float64)
    for tid in np.unique(type_ids):
        idx = np.flatnonzero(type_ids == tid)
        model = em.route(int(tid))
        out[idx] = model.predict(x[idx])
    if em.target_range is not None:
        np.clip(out, em.target_range[0], em.target_range[1], out=out)
    return out


def estimate_effect(
    em: EvaluationModel,
    condition,
    subject_a,
    subject_b,
    proxies_a,
    proxies_b,
) -> float:
    """Predicted metric difference between two subjects under one condition;
    antisymmetric under swapping the subjects."""
    sample_a = EvaluationSample(condition=condition, subject=subject_a, proxies=proxies_a, true_metric=None)
    sample_b = EvaluationSample(condition=condition, subject=subject_b, proxies=proxies_b, true_metric=None)
    return meta_predict(em, sample_a) - meta_predict(em, sample_b)
