"""Heterogeneous mini-agent space: sampling, forward execution, vectorization.

Agents are frozen random parameterizations, either affine maps or narrow MLPs
(hidden widths capped at 8, depth drawn from {1, 2}).  Hidden activations are
rectified linear.  Each space has a fixed-width numeric encoding so that
subjects of both types can share one feature matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path

import numpy as np

from .errors import ConfigError, EncodingError, InputError

SPACE_SCHEMA = "surreval.space_config/1"
AGENT_SCHEMA = "surreval.agent/1"


class AgentType(IntEnum):
    LINEAR = 0
    MLP = 1


class TaskKind(str, Enum):
    REGRESSION = "regression"
    BINARY_CLASSIFICATION = "binary_classification"
    TERNARY_DECISION = "ternary_decision"


def layer_shapes(input_dim: int, hidden_dims: tuple, output_dim: int) -> list:
    dims = [input_dim, *hidden_dims, output_dim]
    return [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]


@dataclass(frozen=True)
class AgentSpec:
    """One sampled mini agent: typed shape plus flat parameter arrays
    (weights layer-major, each layer's matrix in C order)."""

    agent_type: AgentType
    input_dim: int
    output_dim: int
    hidden_dims: tuple
    weights: np.ndarray
    bias: np.ndarray
    task_kind: TaskKind

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "bias", np.asarray(self.bias, dtype=np.float64))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigError("input_dim and output_dim must be positive")
        if (self.agent_type is AgentType.MLP) != bool(self.hidden_dims):
            raise InputError("hidden_dims must be nonempty exactly for MLP agents")
        if any(not (1 <= h <= 8) for h in self.hidden_dims):
            raise InputError("hidden widths must lie in [1, 8]")
        shapes = layer_shapes(self.input_dim, self.hidden_dims, self.output_dim)
        n_w = sum(fi * fo for fi, fo in shapes)
        n_b = sum(fo for _, fo in shapes)
        if self.weights.shape != (n_w,):
            raise InputError(f"expected {n_w} weights, got {self.weights.shape}")
        if self.bias.shape != (n_b,):
            raise InputError(f"expected {n_b} biases, got {self.bias.shape}")

    def layers(self) -> list:
        """Per-layer (W, b) views, W of shape (fan_in, fan_out)."""
        out = []
        wi = bi = 0
        for fi, fo in layer_shapes(self.input_dim, self.hidden_dims, self.output_dim):
            out.append((self.weights[wi : wi + fi * fo].reshape(fi, fo), self.bias[bi : bi + fo]))
            wi += fi * fo
            bi += fo
        return out

    def to_json(self) -> dict:
        return {
            "schema": AGENT_SCHEMA,
            "agent_type": int(self.agent_type),
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden_dims": list(self.hidden_dims),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "task_kind": self.task_kind.value,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "AgentSpec":
        if doc.get("schema") != AGENT_SCHEMA:
            raise InputError(f"unexpected agent schema {doc.get('schema')!r}")
        return cls(
            agent_type=AgentType(doc["agent_type"]),
            input_dim=int(doc["input_dim"]),
            output_dim=int(doc["output_dim"]),
            hidden_dims=tuple(doc["hidden_dims"]),
            weights=np.array(doc["weights"], dtype=np.float64),
            bias=np.array(doc["bias"], dtype=np.float64),
            task_kind=TaskKind(doc["task_kind"]),
        )


@dataclass(frozen=True)
class SpaceConfig:
    """Parameters of one heterogeneous agent space.

    ``type_probability`` is the chance of drawing the affine type; parameters
    are i.i.d. Normal(param_mean, param_std).  ``max_depth`` bounds the MLP
    hidden-layer count (drawn uniformly from 1..max_depth).
    """

    input_dim: int
    output_dim: int
    task_kind: TaskKind = TaskKind.REGRESSION
    max_hidden: int = 8
    max_depth: int = 2
    type_probability: float = 0.5
    param_mean: float = 0.0
    param_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "task_kind", TaskKind(self.task_kind))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigError("input_dim and output_dim must be positive")
        if not (0.0 <= self.type_probability <= 1.0):
            raise ConfigError("type_probability must lie in [0, 1]")
        if self.param_std <= 0.0:
            raise ConfigError("param_std must be positive")
        if not (1 <= self.max_hidden <= 8):
            raise ConfigError("max_hidden must lie in [1, 8]")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")

    @property
    def max_weights(self) -> int:
        h, d = self.max_hidden, self.max_depth
        deepest = h * self.input_dim + (d - 1) * h * h + h * self.output_dim
        return max(self.input_dim * self.output_dim, deepest)

    @property
    def max_biases(self) -> int:
        return self.max_depth * self.max_hidden + self.output_dim

    @property
    def subject_width(self) -> int:
        # [type, input_dim, output_dim, n_hidden, widths..., weights..., biases...]
        return 4 + self.max_depth + self.max_weights + self.max_biases

    def to_json(self) -> dict:
        return {
            "schema": SPACE_SCHEMA,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "task_kind": self.task_kind.value,
            "max_hidden": self.max_hidden,
            "max_depth": self.max_depth,
            "type_probability": self.type_probability,
            "param_mean": self.param_mean,
            "param_std": self.param_std,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SpaceConfig":
        if doc.get("schema") != SPACE_SCHEMA:
            raise InputError(f"unexpected space schema {doc.get('schema')!r}")
        fields = {k: v for k, v in doc.items() if k != "schema"}
        fields["task_kind"] = TaskKind(fields["task_kind"])
        return cls(**fields)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "SpaceConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SubjectVector:
    """Fixed-width numeric encoding of an agent within one space."""

    type_id: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    @property
    def width(self) -> int:
        return int(self.values.size)


def sample_agent(cfg: SpaceConfig, rng: np.random.Generator) -> AgentSpec:
    """Draw one agent: type first, then shape, then i.i.d. normal parameters."""
    is_linear = rng.random() < cfg.type_probability
    if is_linear:
        hidden = ()
        agent_type = AgentType.LINEAR
    else:
        depth = int(rng.integers(1, cfg.max_depth + 1))
        hidden = tuple(int(w) for w in rng.integers(1, cfg.max_hidden + 1, size=depth))
        agent_type = AgentType.MLP
    weights = []
    biases = []
    for fi, fo in layer_shapes(cfg.input_dim, hidden, cfg.output_dim):
        weights.append(rng.normal(cfg.param_mean, cfg.param_std, fi * fo))
        biases.append(rng.normal(cfg.param_mean, cfg.param_std, fo))
    return AgentSpec(
        agent_type=agent_type,
        input_dim=cfg.input_dim,
        output_dim=cfg.output_dim,
        hidden_dims=hidden,
        weights=np.concatenate(weights),
        bias=np.concatenate(biases),
        task_kind=cfg.task_kind,
    )


def sample_agents(cfg: SpaceConfig, n: int, rng: np.random.Generator) -> list:
    return [sample_agent(cfg, rng) for _ in range(n)]


def _logistic(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(agent: AgentSpec, features: np.ndarray) -> np.ndarray:
    """Evaluate the agent on a (rows, input_dim) matrix.

    Returns (rows,) for single-output heads, else (rows, output_dim).
    Binary-classification outputs are logistic-squashed; ternary heads return
    raw three-way scores.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != agent.input_dim:
        raise InputError(f"expected (rows, {agent.input_dim}) features, got {x.shape}")
    h = x
    layers = agent.layers()
    for w, b in layers[:-1]:
        h = np.maximum(h @ w + b, 0.0)
    w, b = layers[-1]
    out = h @ w + b
    if agent.task_kind is TaskKind.BINARY_CLASSIFICATION:
        out = _logistic(out)
    if agent.output_dim == 1 and agent.task_kind is not TaskKind.TERNARY_DECISION:
        return out[:, 0]
    return out


def forward(agent: AgentSpec, features) -> np.ndarray:
    """Single-vector forward pass; see forward_batch for head semantics."""
    x = np.asarray(features, dtype=np.float64).ravel()
    if x.size != agent.input_dim:
        raise InputError(f"expected {agent.input_dim} features, got {x.size}")
    out = forward_batch(agent, x[None, :])
    return np.atleast_1d(out[0]) if out.ndim == 1 else out[0]


def decide_batch(agent: AgentSpec, features: np.ndarray) -> np.ndarray:
    """Ternary decisions: argmax over the three raw scores, ties to the
    lowest index."""
    if agent.task_kind is not TaskKind.TERNARY_DECISION:
        raise InputError("decide_batch requires a ternary-decision agent")
    scores = forward_batch(agent, features)
    return np.argmax(scores, axis=1).astype(np.int64)


def vectorize(agent: AgentSpec, cfg: SpaceConfig) -> SubjectVector:
    """Deterministic fixed-width encoding:
    [type, input_dim, output_dim, n_hidden, widths (0-padded), weights,
    biases, zero padding]."""
    if agent.input_dim != cfg.input_dim or agent.output_dim != cfg.output_dim:
        raise EncodingError("agent dimensions do not match the space")
    if len(agent.hidden_dims) > cfg.max_depth:
        raise EncodingError("agent depth exceeds the space maximum")
    if agent.weights.size > cfg.max_weights or agent.bias.size > cfg.max_biases:
        raise EncodingError("agent parameters exceed the space-wide layout")
    vec = np.zeros(cfg.subject_width, dtype=np.float64)
    vec[0] = float(int(agent.agent_type))
    vec[1] = float(agent.input_dim)
    vec[2] = float(agent.output_dim)
    vec[3] = float(len(agent.hidden_dims))
    for i, h in enumerate(agent.hidden_dims):
        vec[4 + i] = float(h)
    w_off = 4 + cfg.max_depth
    vec[w_off : w_off + agent.weights.size] = agent.weights
    b_off = w_off + cfg.max_weights
    vec[b_off : b_off + agent.bias.size] = agent.bias
    return SubjectVector(type_id=int(agent.agent_type), values=vec)


def decode_subject(sv: SubjectVector, cfg: SpaceConfig) -> AgentSpec:
    """Invert vectorize; the round trip preserves forward semantics exactly."""
    vec = sv.values
    if vec.size != cfg.subject_width:
        raise EncodingError(f"expected width {cfg.subject_width}, got {vec.size}")
    agent_type = AgentType(int(vec[0]))
    input_dim = int(vec[1])
    output_dim = int(vec[2])
    n_hidden = int(vec[3])
    hidden = tuple(int(vec[4 + i]) for i in range(n_hidden))
    shapes = layer_shapes(input_dim, hidden, output_dim)
    n_w = sum(fi * fo for fi, fo in shapes)
    n_b = sum(fo for _, fo in shapes)
    w_off = 4 + cfg.max_depth
    b_off = w_off + cfg.max_weights
    return AgentSpec(
        agent_type=agent_type,
        input_dim=input_dim,
        output_dim=output_dim,
        hidden_dims=hidden,
        weights=vec[w_off : w_off + n_w].copy(),
        bias=vec[b_off : b_off + n_b].copy(),
        task_kind=cfg.task_kind,
    )
