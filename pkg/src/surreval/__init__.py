"""surreval: surrogate evaluation of sampled mini agents.

Samples heterogeneous frozen agents (affine maps and narrow MLPs), computes
cheap dataset-based proxy metrics, fits per-type surrogate models that predict
true metrics from (condition, subject encoding, proxies), wraps the results in
closed-form probabilistic error certificates, and statistically audits the
assumptions those certificates rest on.
"""

from . import _kernels
from .agents import (
    AgentSpec,
    AgentType,
    SpaceConfig,
    SubjectVector,
    TaskKind,
    decode_subject,
    forward,
    forward_batch,
    sample_agent,
    sample_agents,
    vectorize,
)
from .bounds import (
    BoundKind,
    BoundReport,
    ErrorMeasurements,
    causal_bound_nonpositivity,
    causal_bound_positivity,
    epsilon,
    generalization_bound,
    required_n,
)
from .errors import (
    ConfigError,
    DegenerateInputError,
    EncodingError,
    IngestionError,
    InputError,
    NumericError,
    PartitionError,
    RoutingError,
    SurrevalError,
)
from .evalmodel import (
    EvaluationModel,
    FeatureLayout,
    estimate_effect,
    meta_fit,
    meta_predict,
    meta_predict_batch,
)
from .harness import ExperimentConfig, emit_bound_table, run_backtest, run_scene, run_shapley
from .learners import BaseLearnerConfig, fit_base, predict
from .market import (
    FloatModel,
    MarketData,
    SlotResult,
    build_conditional_dataset,
    build_float_model,
    float_rate,
    generate_market,
    last10_proxy,
    simulate_slot,
)
from .metrics import MetricVector, classification_summary, pr_auc, regression_summary, roc_auc
from .proxies import DataPool, ProxyConfig, bootstrap_proxy, holdout_proxy, kfold_proxy, proxy_vector
from .scenes import (
    EvaluationSample,
    SceneDataset,
    SceneSystem,
    build_eval_dataset,
    build_system,
    load_csv,
    make_synthetic_scene,
    true_metric,
)
from .shapley import CoalitionGame, attribution_report, coalition_values, shapley_values
from .stattests import (
    TestReport,
    bias_check,
    group_bias_check,
    id_check,
    iid_check,
    tail_probability,
)

__version__ = "0.1.0"

HAS_NUMBA = _kernels.HAS_NUMBA
