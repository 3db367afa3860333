"""Base regressors for the evaluation models: ridge linear, small MLP, and
gradient-boosted trees.

All three fit real-valued targets, are deterministic given their seed, and
serialize to JSON documents that replay predictions exactly.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import ConfigError, InputError, NumericError

LEARNER_KINDS = ("linear", "mlp", "gbt")

_N_BINS = 64


@dataclass(frozen=True)
class BaseLearnerConfig:
    kind: str = "linear"
    # linear
    ridge_strength: float = 1e-6
    # mlp
    hidden: tuple = (32,)
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 64
    # gbt
    trees: int = 100
    depth: int = 4
    shrinkage: float = 0.1
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.kind not in LEARNER_KINDS:
            raise ConfigError(f"unknown learner kind {self.kind!r}")
        if self.ridge_strength < 0.0:
            raise ConfigError("ridge_strength must be >= 0")
        if not self.hidden or len(self.hidden) > 2 or any(h < 1 for h in self.hidden):
            raise ConfigError("hidden must hold 1 or 2 positive widths")
        if self.learning_rate <= 0.0 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("learning_rate, epochs, batch_size must be positive")
        if self.trees < 1 or self.depth < 1:
            raise ConfigError("trees and depth must be positive")
        if not (0.0 < self.shrinkage <= 1.0):
            raise ConfigError("shrinkage must lie in (0, 1]")
        if not (0.0 < self.subsample <= 1.0):
            raise ConfigError("subsample must lie in (0, 1]")

    def with_seed(self, seed: int) -> "BaseLearnerConfig":
        return replace(self, seed=int(seed))

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "ridge_strength": self.ridge_strength,
            "hidden": list(self.hidden),
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "trees": self.trees,
            "depth": self.depth,
            "shrinkage": self.shrinkage,
            "subsample": self.subsample,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BaseLearnerConfig":
        doc = dict(doc)
        doc["hidden"] = tuple(doc.get("hidden", (32,)))
        return cls(**doc)


def _validate_training_data(rows, targets):
    x = np.asarray(rows, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if x.ndim != 2:
        raise InputError("rows must be a 2-D matrix")
    if x.shape[0] != y.size:
        raise InputError("rows and targets disagree in length")
    if x.shape[0] < 2:
        raise InputError("need at least 2 rows")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("training data must be finite")
    return x, y


def _validate_predict_input(x, width):
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise InputError(f"expected rows of width {width}, got shape {x.shape}")
    return x, squeeze


class LinearRegressor:
    """Ridge least squares on [X, 1], solved by normal equations with
    ridge_strength added to the whole diagonal."""

    kind = "linear"

    def __init__(self, coef: np.ndarray, intercept: float, width: int):
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)
        self.width = int(width)

    def predict(self, x):
        x, squeeze = _validate_predict_input(x, self.width)
        out = x @ self.coef + self.intercept
        return float(out[0]) if squeeze else out

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "width": self.width,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "LinearRegressor":
        return cls(np.array(doc["coef"], dtype=np.float64), doc["intercept"], doc["width"])


def _fit_linear(x, y, cfg: BaseLearnerConfig) -> LinearRegressor:
    n, d = x.shape
    z = np.concatenate([x, np.ones((n, 1))], axis=1)
    if cfg.ridge_strength == 0.0:
        a = z.T @ z
        try:
            np.linalg.cholesky(a)
        except np.linalg.LinAlgError as exc:
            raise NumericError("normal equations are singular; set ridge_strength > 0") from exc
        w = np.linalg.solve(a, z.T @ y)
    else:
        # Same minimizer as the ridge normal equations, solved through the
        # stacked system [Z; sqrt(l) I] to avoid squaring the condition number.
        root = math.sqrt(cfg.ridge_strength)
        zz = np.concatenate([z, root * np.eye(d + 1)], axis=0)
        yy = np.concatenate([y, np.zeros(d + 1)])
        w = np.linalg.lstsq(zz, yy, rcond=None)[0]
    return LinearRegressor(coef=w[:-1], intercept=w[-1], width=d)


class MlpRegressor:
    """One- or two-hidden-layer ReLU regressor trained with mini-batch Adam
    on standardized inputs and target."""

    kind = "mlp"

    def __init__(self, layers, x_mean, x_scale, y_mean, y_scale, width):
        self.layers = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)) for w, b in layers]
        self.x_mean = np.asarray(x_mean, dtype=np.float64)
        self.x_scale = np.asarray(x_scale, dtype=np.float64)
        self.y_mean = float(y_mean)
        self.y_scale = float(y_scale)
        self.width = int(width)

    def _forward(self, z):
        h = z
        for w, b in self.layers[:-1]:
            h = np.maximum(h @ w + b, 0.0)
        w, b = self.layers[-1]
        return (h @ w + b)[:, 0]

    def predict(self, x):
        x, squeeze = _validate_predict_input(x, self.width)
        z = (x - self.x_mean) / self.x_scale
        out = self._forward(z) * self.y_scale + self.y_mean
        return float(out[0]) if squeeze else out

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "layers": [[w.tolist(), b.tolist()] for w, b in self.layers],
            "x_mean": self.x_mean.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_mean": self.y_mean,
            "y_scale": self.y_scale,
            "width": self.width,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MlpRegressor":
        layers = [(np.array(w), np.array(b)) for w, b in doc["layers"]]
        return cls(layers, doc["x_mean"], doc["x_scale"], doc["y_mean"], doc["y_scale"], doc["width"])


def _fit_mlp(x, y, cfg: BaseLearnerConfig) -> MlpRegressor:
    rng = np.random.default_rng(cfg.seed)
    n, d = x.shape
    x_mean = x.mean(axis=0)
    x_scale = x.std(axis=0)
    x_scale[x_scale < 1e-12] = 1.0
    y_mean = float(y.mean())
    y_scale = float(y.std())
    if y_scale < 1e-12:
        y_scale = 1.0
    z = (x - x_mean) / x_scale
    t = (y - y_mean) / y_scale

    dims = [d, *cfg.hidden, 1]
    params = []
    for fi, fo in zip(dims[:-1], dims[1:]):
        params.append(rng.normal(0.0, np.sqrt(2.0 / fi), (fi, fo)))
        params.append(np.zeros(fo))

    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps_adam = 0.9, 0.999, 1e-8
    step = 0

    def forward_cache(zb):
        acts = [zb]
        h = zb
        for li in range(0, len(params) - 2, 2):
            h = np.maximum(h @ params[li] + params[li + 1], 0.0)
            acts.append(h)
        out = h @ params[-2] + params[-1]
        return acts, out[:, 0]

    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            zb, tb = z[batch], t[batch]
            acts, pred = forward_cache(zb)
            grad_out = (2.0 / batch.size) * (pred - tb)[:, None]
            grads = [None] * len(params)
            delta = grad_out
            grads[-2] = acts[-1].T @ delta
            grads[-1] = delta.sum(axis=0)
            upstream = delta @ params[-2].T
            for li in range(len(params) - 4, -1, -2):
                act = acts[li // 2 + 1]
                delta = upstream * (act > 0.0)
                grads[li] = acts[li // 2].T @ delta
                grads[li + 1] = delta.sum(axis=0)
                upstream = delta @ params[li].T
            step += 1
            bc1 = 1.0 - beta1**step
            bc2 = 1.0 - beta2**step
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= beta1
                mi += (1.0 - beta1) * g
                vi *= beta2
                vi += (1.0 - beta2) * g * g
                p -= cfg.learning_rate * (mi / bc1) / (np.sqrt(vi / bc2) + eps_adam)

    layers = [(params[i], params[i + 1]) for i in range(0, len(params), 2)]
    return MlpRegressor(layers, x_mean, x_scale, y_mean, y_scale, d)


class GbtRegressor:
    """Additive regression trees on residuals with shrinkage, grown on
    quantile-binned features."""

    kind = "gbt"

    def __init__(self, feat, thr_value, value, shrinkage, init, width):
        self.feat = np.asarray(feat, dtype=np.int32)
        self.thr_value = np.asarray(thr_value, dtype=np.float64)
        self.value = np.asarray(value, dtype=np.float64)
        self.shrinkage = float(shrinkage)
        self.init = float(init)
        self.width = int(width)

    def predict(self, x):
        x, squeeze = _validate_predict_input(x, self.width)
        out = _kernels.predict_forest_raw(
            np.ascontiguousarray(x), self.feat, self.thr_value, self.value, self.shrinkage, self.init
        )
        return float(out[0]) if squeeze else out

    def _tree_to_nested(self, t: int, node: int) -> dict:
        if self.feat[t, node] < 0:
            return {"value": float(self.value[t, node])}
        return {
            "feature": int(self.feat[t, node]),
            "threshold": float(self.thr_value[t, node]),
            "value": float(self.value[t, node]),
            "left": self._tree_to_nested(t, 2 * node + 1),
            "right": self._tree_to_nested(t, 2 * node + 2),
        }

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "shrinkage": self.shrinkage,
            "init": self.init,
            "width": self.width,
            "n_nodes": int(self.feat.shape[1]),
            "trees": [self._tree_to_nested(t, 0) for t in range(self.feat.shape[0])],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GbtRegressor":
        n_trees = len(doc["trees"])
        n_nodes = int(doc["n_nodes"])
        feat = np.full((n_trees, n_nodes), -1, dtype=np.int32)
        thr = np.zeros((n_trees, n_nodes), dtype=np.float64)
        value = np.zeros((n_trees, n_nodes), dtype=np.float64)

        def fill(t, node, d):
            value[t, node] = d.get("value", 0.0)
            if "feature" in d:
                feat[t, node] = d["feature"]
                thr[t, node] = d["threshold"]
                fill(t, 2 * node + 1, d["left"])
                fill(t, 2 * node + 2, d["right"])

        for t, tree in enumerate(doc["trees"]):
            fill(t, 0, tree)
        return cls(feat, thr, value, doc["shrinkage"], doc["init"], doc["width"])


def _bin_columns(x: np.ndarray):
    """Per-feature quantile cut points and the binned uint8 matrix.

    bin(v) counts cut points strictly below v, so "bin <= b" on binned data
    and "v <= cut[b]" on raw data pick the same side.
    """
    n, d = x.shape
    cuts = []
    binned = np.empty((n, d), dtype=np.uint8)
    qs = np.arange(1, _N_BINS) / _N_BINS
    for f in range(d):
        col = x[:, f]
        c = np.unique(np.quantile(col, qs))
        if c.size > _N_BINS - 1:
            c = c[: _N_BINS - 1]
        cuts.append(c)
        binned[:, f] = np.searchsorted(c, col, side="left").astype(np.uint8)
    return cuts, binned


def _fit_gbt(x, y, cfg: BaseLearnerConfig) -> GbtRegressor:
    rng = np.random.default_rng(cfg.seed)
    n, d = x.shape
    cuts, binned = _bin_columns(x)
    n_nodes = 2 ** (cfg.depth + 1) - 1
    feat = np.full((cfg.trees, n_nodes), -1, dtype=np.int32)
    thr_bin = np.full((cfg.trees, n_nodes), -1, dtype=np.int32)
    value = np.zeros((cfg.trees, n_nodes), dtype=np.float64)
    init = float(y.mean())
    pred = np.full(n, init, dtype=np.float64)
    all_rows = np.arange(n, dtype=np.int64)
    m_sub = max(1, int(round(cfg.subsample * n)))
    for t in range(cfg.trees):
        rows = all_rows if m_sub == n else np.sort(rng.permutation(n)[:m_sub]).astype(np.int64)
        resid = y - pred
        tf, tb, tv = _kernels.grow_tree(binned, resid, rows, cfg.depth, 1, _N_BINS)
        feat[t], thr_bin[t], value[t] = tf, tb, tv
        contrib = np.zeros(n, dtype=np.float64)
        _kernels.predict_tree_binned(binned, tf, tb, tv, contrib)
        pred += cfg.shrinkage * contrib
    # Bin thresholds to raw cut values for inference on unbinned features.
    thr_value = np.zeros_like(value)
    for t in range(cfg.trees):
        for node in range(n_nodes):
            f = feat[t, node]
            if f >= 0:
                c = cuts[f]
                b = min(thr_bin[t, node], c.size - 1)
                thr_value[t, node] = c[b] if c.size else np.inf
    return GbtRegressor(feat, thr_value, value, cfg.shrinkage, init, d)


def fit_base(rows, targets, cfg: BaseLearnerConfig):
    """Fit the configured base regressor; seed-deterministic."""
    x, y = _validate_training_data(rows, targets)
    if cfg.kind == "linear":
        return _fit_linear(x, y, cfg)
    if cfg.kind == "mlp":
        return _fit_mlp(x, y, cfg)
    return _fit_gbt(x, y, cfg)


def predict(model, row) -> float:
    """Single-row prediction; raises InputError on width mismatch."""
    out = model.predict(np.asarray(row, dtype=np.float64).ravel())
    if not np.isfinite(out):
        raise NumericError("non-finite prediction")
    return float(out)


_MODEL_CLASSES = {"linear": LinearRegressor, "mlp": MlpRegressor, "gbt": GbtRegressor}


def regressor_from_json(doc: dict):
    try:
        cls = _MODEL_CLASSES[doc["kind"]]
    except KeyError as exc:
        raise InputError(f"unknown regressor kind {doc.get('kind')!r}") from exc
    return cls.from_json(doc)
