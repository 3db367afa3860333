"""Batch experiment drivers: seeded replicated scene runs, the conditional
backtest run, bound-table emission, and assumption assessment, all writing
CSV/JSON reports whose bytes are reproducible from the manifest seeds."""

from __future__ import annotations

import concurrent.futures
import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds as bounds_mod
from .agents import SpaceConfig, TaskKind, sample_agents
from .bounds import BoundKind, ErrorMeasurements, TABLE_NS, TABLE_SIGMAS, bound_table
from .errors import ConfigError, IngestionError, InputError, SurrevalError
from .evalmodel import meta_fit, meta_predict_batch
from .learners import BaseLearnerConfig
from .metrics import metric_range
from .proxies import ProxyConfig, proxy_index
from .scenes import (
    SceneDataset,
    build_eval_dataset,
    build_system,
    default_target_metric,
    load_csv,
    make_synthetic_scene,
)
from .shapley import attribution_report, coalition_values
from .stattests import run_assumption_suite, tail_probability
from . import market as market_mod

CONFIG_SCHEMA = "surreval.experiment/1"

logger = logging.getLogger(__name__)

_KIND_LABEL = {"linear": "Linear", "mlp": "MLP", "gbt": "GBT"}


def seed_int(seq: np.random.SeedSequence) -> int:
    state = seq.generate_state(2)
    return int(state[0]) << 32 | int(state[1])


def estimator_label(name: str) -> str:
    if name.startswith("holdout-"):
        return "Holdout-" + name.split("-", 1)[1]
    if name.startswith("cv-"):
        return "CV-" + name.split("-", 1)[1]
    return name.capitalize()


def metric_label(name: str) -> str:
    return name.replace("_", "").upper()


def learner_label(cfg: BaseLearnerConfig, style: str = "scene") -> str:
    kind = _KIND_LABEL[cfg.kind]
    return f"Het-{kind}" if style == "scene" else f"HetEM({kind})"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    replicates: int = 30
    out_dir: str = "out"
    scene: dict = field(default_factory=dict)
    n_agents: int = 2000
    train_frac: float = 0.8
    proxy: ProxyConfig = field(default_factory=ProxyConfig)
    learners: tuple = (BaseLearnerConfig(kind="linear"),)
    sigmas: tuple = (0.5, 0.05, 0.01, 0.001)
    assess: dict = field(default_factory=lambda: {"n_subsets": 30, "subset_frac": 0.5, "alpha": 0.05})
    market: Optional[dict] = None
    attribution: dict = field(default_factory=lambda: {"enabled": True, "max_rows": 20000})
    dump_samples: bool = False

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.learners:
            raise ConfigError("at least one learner is required")
        if any(not (0.0 < s < 1.0) for s in self.sigmas):
            raise ConfigError("sigmas must lie in (0, 1)")
        if self.scene.get("kind") == "csv":
            path = self.scene.get("path")
            if not path or not Path(path).exists():
                raise ConfigError(f"scene CSV path {path!r} does not exist")

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        if doc.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
            raise ConfigError(f"unexpected config schema {doc.get('schema')!r}")
        kwargs = {k: v for k, v in doc.items() if k != "schema"}
        if "proxy" in kwargs:
            kwargs["proxy"] = ProxyConfig.from_json(kwargs["proxy"])
        if "learners" in kwargs:
            kwargs["learners"] = tuple(BaseLearnerConfig.from_json(l) for l in kwargs["learners"])
        if "sigmas" in kwargs:
            kwargs["sigmas"] = tuple(float(s) for s in kwargs["sigmas"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad config field: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_json(doc)

    def to_json(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA,
            "seed": self.seed,
            "replicates": self.replicates,
            "out_dir": self.out_dir,
            "scene": self.scene,
            "n_agents": self.n_agents,
            "train_frac": self.train_frac,
            "proxy": self.proxy.to_json(),
            "learners": [l.to_json() for l in self.learners],
            "sigmas": list(self.sigmas),
            "assess": self.assess,
            "market": self.market,
            "attribution": self.attribution,
            "dump_samples": self.dump_samples,
        }


def _manifest_config(config: ExperimentConfig) -> dict:
    """Config echo for manifests: everything that determines the numbers
    (the output directory does not)."""
    doc = config.to_json()
    doc.pop("out_dir", None)
    return doc


def t_quantile(two_sided_alpha: float, df: int) -> float:
    """Two-sided Student-t critical value by bisection on the p-value kernel."""
    lo, hi = 0.0, 1e8
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tail_probability("student_t", mid, df=df) > two_sided_alpha:
            lo = mid
        else:
            hi = mid
    return hi


def mean_ci95(values) -> tuple:
    x = np.asarray(values, dtype=np.float64)
    mean = float(x.mean())
    if x.size < 2:
        return mean, 0.0
    hw = t_quantile(0.05, x.size - 1) * float(x.std(ddof=1)) / math.sqrt(x.size)
    return mean, hw


def _build_scene(scene_cfg: dict, seed: int) -> SceneDataset:
    kind = scene_cfg.get("kind", "synthetic")
    if kind == "synthetic":
        return make_synthetic_scene(
            kind=scene_cfg.get("task", "regression"),
            rows=int(scene_cfg.get("rows", 1500)),
            input_dim=int(scene_cfg.get("input_dim", 12)),
            seed=seed,
            noise_std=float(scene_cfg.get("noise_std", 0.3)),
            treatment_col=bool(scene_cfg.get("treatment_col", False)),
        )
    if kind == "csv":
        return load_csv(scene_cfg["path"], scene_cfg.get("schema", {}))
    raise ConfigError(f"unknown scene kind {kind!r}")


def _scene_space_cfg(dataset: SceneDataset, seed: int, scene_cfg: dict) -> SpaceConfig:
    task = (
        TaskKind.BINARY_CLASSIFICATION
        if dataset.metric_kind == "classification"
        else TaskKind.REGRESSION
    )
    space = scene_cfg.get("space", {})
    return SpaceConfig(
        input_dim=dataset.input_dim,
        output_dim=1,
        task_kind=task,
        max_hidden=int(space.get("max_hidden", 8)),
        max_depth=int(space.get("max_depth", 2)),
        type_probability=float(space.get("type_probability", 0.5)),
        seed=seed,
    )


def _normalized_losses(pred: np.ndarray, truth: np.ndarray, target: str):
    """Squared errors scaled into [0, 1]; bounded metrics are already unit
    range, unbounded ones divide by the observed maximum (declared scale)."""
    sq = (pred - truth) ** 2
    if metric_range(target) is not None:
        scale = 1.0
    else:
        scale = float(sq.max())
        if scale <= 0.0:
            scale = 1.0
    return np.minimum(sq / scale, 1.0), scale


def scene_replicate(config: ExperimentConfig, rep: int) -> dict:
    """One seeded replicate: sample agents, build the system, compute proxies,
    fit every learner, and score everything on the held-out agents."""
    rep_seq = np.random.SeedSequence(config.seed).spawn(config.replicates)[rep]
    scene_seq, system_seq, agents_seq, data_seq, learner_seq = rep_seq.spawn(5)
    dataset = _build_scene(config.scene, seed_int(scene_seq))
    target = config.scene.get("target_metric") or default_target_metric(dataset.metric_kind)
    space_cfg = _scene_space_cfg(dataset, seed_int(agents_seq), config.scene)
    system = build_system(dataset, seed_int(system_seq))
    agents = sample_agents(space_cfg, config.n_agents, np.random.default_rng(agents_seq))
    train, test = build_eval_dataset(
        system,
        agents,
        config.proxy,
        space_cfg,
        train_frac=config.train_frac,
        seed=seed_int(data_seq),
        target_metric=target,
    )
    truth = np.array([s.true_metric for s in test])
    if config.dump_samples:
        from .proxies import proxy_names
        from .scenes import samples_to_csv

        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        provenance = {
            "replicate": rep,
            "seed": seed_int(rep_seq),
            "iris_claimed": True,
            "scene_hash": dataset.config_hash(),
            "target_metric": target,
        }
        cols = proxy_names(config.proxy, dataset.metric_kind)
        samples_to_csv(train, out / f"samples_rep{rep}_train.csv", provenance, cols)
        samples_to_csv(test, out / f"samples_rep{rep}_test.csv", provenance, cols)
    result = {
        "replicate": rep,
        "seed": seed_int(rep_seq),
        "target_metric": target,
        "metric_kind": dataset.metric_kind,
        "rmse": {},
        "bounds": [],
        "assumptions": {},
    }
    for est in config.proxy.estimators:
        col = proxy_index(config.proxy, dataset.metric_kind, est, target)
        pred = np.array([s.proxies[col] for s in test])
        result["rmse"][estimator_label(est)] = float(np.sqrt(np.mean((pred - truth) ** 2)))

    assess_cfg = config.assess
    for i, lcfg in enumerate(config.learners):
        em = meta_fit(
            train,
            lcfg.with_seed(seed_int(learner_seq) % 2**31 + i),
            target_range=metric_range(target),
        )
        pred = meta_predict_batch(em, test)
        label = learner_label(lcfg)
        result["rmse"][label] = float(np.sqrt(np.mean((pred - truth) ** 2)))
        losses, scale = _normalized_losses(pred, truth, target)
        errors = ErrorMeasurements(
            losses=losses,
            signed_residuals=pred - truth,
            iide_claimed=True,
            iris_claimed=True,
            loss_scale=scale,
        )
        for sigma in config.sigmas:
            gen = bounds_mod.generalization_bound(errors, sigma)
            causal = bounds_mod.causal_bound_nonpositivity(errors, sigma)
            for rpt in (gen, causal):
                result["bounds"].append({"learner": label, **rpt.to_json(), "loss_scale": scale})
        suite = run_assumption_suite(
            errors,
            n_subsets=int(assess_cfg.get("n_subsets", 30)),
            subset_frac=float(assess_cfg.get("subset_frac", 0.5)),
            seed=seed_int(rep_seq.spawn(1)[0]),
            alpha=float(assess_cfg.get("alpha", 0.05)),
        )
        result["assumptions"][lcfg.kind] = {name: rpt.to_json() for name, rpt in suite.items()}
    return result


def _write_csv(path: Path, schema: str, header: list, rows: list) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# schema", schema])
        writer.writerow(header)
        writer.writerows(rows)


def _run_replicates(fn, config: ExperimentConfig, jobs: int) -> list:
    """Run replicates, dropping any that fail (with a logged diagnostic); at
    least one replicate must survive."""
    results = []
    if jobs <= 1:
        outcomes = []
        for r in range(config.replicates):
            try:
                outcomes.append(fn(config, r))
            except SurrevalError as exc:
                outcomes.append(exc)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(fn, config, r) for r in range(config.replicates)]
            outcomes = []
            for f in futures:
                try:
                    outcomes.append(f.result())
                except SurrevalError as exc:
                    outcomes.append(exc)
    for r, outcome in enumerate(outcomes):
        if isinstance(outcome, Exception):
            logger.warning("replicate %d failed: %s", r, outcome)
        else:
            results.append(outcome)
    if not results:
        raise ConfigError(f"all {config.replicates} replicates failed; last error: {outcomes[-1]}")
    return results


def run_scene(config: ExperimentConfig, jobs: int = 1) -> dict:
    """Replicated scene experiment; writes scene_rmse.csv, bounds.csv,
    assumptions.json, and manifest.json under config.out_dir."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reps = _run_replicates(scene_replicate, config, jobs)

    methods = list(reps[0]["rmse"].keys())
    rmse_by_method = {m: [r["rmse"][m] for r in reps] for m in methods}
    summary = {m: mean_ci95(v) for m, v in rmse_by_method.items()}
    neg = {m: -summary[m][0] for m in methods}
    lo, hi = min(neg.values()), max(neg.values())
    span = hi - lo if hi > lo else 1.0
    rows = [
        [m, repr(summary[m][0]), repr(summary[m][1]), repr((neg[m] - lo) / span), len(reps)]
        for m in methods
    ]
    _write_csv(
        out / "scene_rmse.csv",
        "surreval.scene_report/1",
        ["method", "rmse_mean", "rmse_ci95", "norm_neg_rmse", "n_replicates"],
        rows,
    )

    bound_rows = []
    for r in reps:
        for b in r["bounds"]:
            bound_rows.append(
                [
                    r["replicate"],
                    b["learner"],
                    b["kind"],
                    repr(b["sigma"]),
                    b["n"],
                    repr(b["e_emp"]),
                    repr(b["epsilon"]),
                    repr(b["bound"]),
                    repr(b["loss_scale"]),
                    ";".join(b["warnings"]),
                ]
            )
    _write_csv(
        out / "bounds.csv",
        "surreval.bounds/1",
        ["replicate", "learner", "kind", "sigma", "n", "e_emp", "epsilon", "bound", "loss_scale", "warnings"],
        bound_rows,
    )

    target_label = metric_label(reps[0]["target_metric"])
    assumptions = {}
    for lcfg in config.learners:
        kind_label = _KIND_LABEL[lcfg.kind]
        for test_name in ("IID", "ID", "Bias", "GroupBias"):
            key = f"Het({kind_label})-{test_name}-{target_label}"
            per_rep = [r["assumptions"][lcfg.kind][test_name] for r in reps]
            entry = {
                "p_values": [p["p_value"] for p in per_rep],
                "pass_ratio": float(np.mean([not p["rejected"] for p in per_rep])),
            }
            if per_rep[0].get("pass_ratio") is not None:
                entry["mean_subset_pass_ratio"] = float(np.mean([p["pass_ratio"] for p in per_rep]))
            assumptions[key] = entry
    (out / "assumptions.json").write_text(json.dumps(assumptions, indent=2, sort_keys=True) + "\n")

    manifest = {
        "schema": "surreval.manifest/1",
        "kind": "scene",
        "root_seed": config.seed,
        "replicate_seeds": [r["seed"] for r in reps],
        "config": _manifest_config(config),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {
        "out_dir": str(out),
        "rmse_mean": {m: summary[m][0] for m in methods},
        "rmse_ci95": {m: summary[m][1] for m in methods},
        "replicates": reps,
    }


def _market_pieces(config: ExperimentConfig, rep: int):
    mcfg = config.market or {}
    rep_seq = np.random.SeedSequence(config.seed).spawn(config.replicates)[rep]
    market_seq, agents_seq, float_seq = rep_seq.spawn(3)
    gen_kwargs = dict(mcfg.get("generator", {}))
    market = market_mod.generate_market(
        n_stocks=int(mcfg.get("n_stocks", 200)),
        n_days=int(mcfg.get("n_days", 80)),
        seed=seed_int(market_seq),
        **gen_kwargs,
    )
    space_cfg = SpaceConfig(
        input_dim=market_mod.N_FEATURES,
        output_dim=3,
        task_kind=TaskKind.TERNARY_DECISION,
        seed=seed_int(agents_seq) % 2**31,
    )
    agents = sample_agents(space_cfg, int(mcfg.get("n_agents", 200)), np.random.default_rng(agents_seq))
    fm = market_mod.build_float_model(space_cfg, market, seed_int(float_seq))
    slot_len = int(mcfg.get("slot_len", 10))
    train, test = market_mod.build_conditional_dataset(
        agents,
        market,
        fm,
        train_day_range=tuple(mcfg.get("train_days", (21, 24))),
        test_day_range=tuple(mcfg.get("test_days", (25, 27))),
        slot_len=slot_len,
        space_cfg=space_cfg,
        train_agent_frac=config.train_frac,
    )
    return rep_seq, market, space_cfg, agents, fm, train, test


def backtest_replicate(config: ExperimentConfig, rep: int) -> dict:
    rep_seq, _, _, _, _, train, test = _market_pieces(config, rep)
    truth = np.array([s.true_metric for s in test])
    baseline_pred = np.array([s.proxies[0] for s in test])
    result = {
        "replicate": rep,
        "seed": seed_int(rep_seq),
        "rmse": {"Baseline(Last10Days)": float(np.sqrt(np.mean((baseline_pred - truth) ** 2)))},
    }
    learner_seq = rep_seq.spawn(4)[3]
    for i, lcfg in enumerate(config.learners):
        em = meta_fit(train, lcfg.with_seed(seed_int(learner_seq) % 2**31 + i))
        pred = meta_predict_batch(em, test)
        result["rmse"][learner_label(lcfg, style="backtest")] = float(
            np.sqrt(np.mean((pred - truth) ** 2))
        )
    return result


def _backtest_attribution(config: ExperimentConfig) -> dict:
    """Shapley attribution over (condition, subject, proxy) on replicate 0,
    row-capped to keep coalition refits tractable."""
    att = config.attribution or {}
    rep_seq, _, _, _, _, train, test = _market_pieces(config, 0)
    max_rows = int(att.get("max_rows", 20000))
    rng = np.random.default_rng(seed_int(rep_seq.spawn(5)[4]))
    if len(train) > max_rows:
        keep = np.sort(rng.permutation(len(train))[:max_rows])
        train = [train[i] for i in keep]
    if len(test) > max_rows:
        keep = np.sort(rng.permutation(len(test))[:max_rows])
        test = [test[i] for i in keep]
    truth = np.array([s.true_metric for s in test])
    baseline_pred = np.array([s.proxies[0] for s in test])
    baseline_value = -float(np.sqrt(np.mean((baseline_pred - truth) ** 2)))
    lcfg = BaseLearnerConfig.from_json(att["learner"]) if "learner" in att else config.learners[0]
    game = coalition_values(
        train,
        test,
        players=("condition", "subject", "proxy"),
        learner_cfg=lcfg,
        baseline_value=baseline_value,
    )
    report = attribution_report(game)
    report["baseline"] = "Last10Days"
    report["rows_used"] = {"train": len(train), "test": len(test)}
    return report


def run_backtest(config: ExperimentConfig, jobs: int = 1) -> dict:
    """Replicated conditional-evaluation backtest; writes trade_rmse.csv,
    attribution.json, and manifest.json."""
    if config.market is None:
        raise ConfigError("run_backtest needs a market section in the config")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reps = _run_replicates(backtest_replicate, config, jobs)

    methods = list(reps[0]["rmse"].keys())
    summary = {m: mean_ci95([r["rmse"][m] for r in reps]) for m in methods}
    rows = [[m, repr(summary[m][0]), repr(summary[m][1]), len(reps)] for m in methods]
    _write_csv(
        out / "trade_rmse.csv",
        "surreval.trade_report/1",
        ["method", "roi_rmse_mean", "roi_rmse_ci95", "n_replicates"],
        rows,
    )

    if (config.attribution or {}).get("enabled", True):
        report = _backtest_attribution(config)
        (out / "attribution.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    manifest = {
        "schema": "surreval.manifest/1",
        "kind": "backtest",
        "root_seed": config.seed,
        "replicate_seeds": [r["seed"] for r in reps],
        "config": _manifest_config(config),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {
        "out_dir": str(out),
        "rmse_mean": {m: summary[m][0] for m in methods},
        "replicates": reps,
    }


def emit_bound_table(out_dir, sigmas=TABLE_SIGMAS, ns=TABLE_NS) -> tuple:
    """Quick-reference certificate tables as a CSV pair."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = ["samples"] + [f"conf={1.0 - s:g}" for s in sigmas]
    gen_path = out / "generalization_bounds.csv"
    causal_path = out / "causal_bounds.csv"
    _write_csv(gen_path, "surreval.bound_table/1", header, bound_table(BoundKind.GENERALIZATION, sigmas, ns))
    _write_csv(
        causal_path,
        "surreval.bound_table/1",
        header,
        bound_table(BoundKind.CAUSAL_NON_POSITIVITY, sigmas, ns),
    )
    return gen_path, causal_path


def load_errors_csv(path, iide_claimed=False, iris_claimed=False, loss_scale=1.0) -> ErrorMeasurements:
    """Errors file: CSV with a ``loss`` column and optional ``residual``."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"errors file {path} does not exist")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise IngestionError(f"{path}: empty errors file")
        header = [h.strip().lower() for h in header]
        if "loss" not in header:
            raise IngestionError(f"{path}: missing 'loss' column")
        li = header.index("loss")
        ri = header.index("residual") if "residual" in header else None
        losses, residuals = [], []
        for i, row in enumerate(reader):
            try:
                losses.append(float(row[li]) / loss_scale)
                if ri is not None:
                    residuals.append(float(row[ri]))
            except (ValueError, IndexError) as exc:
                raise IngestionError(f"{path}: row {i + 2} malformed: {exc}") from exc
    try:
        return ErrorMeasurements(
            losses=np.array(losses),
            signed_residuals=np.array(residuals) if residuals else None,
            iide_claimed=iide_claimed,
            iris_claimed=iris_claimed,
            loss_scale=loss_scale,
        )
    except InputError as exc:
        raise IngestionError(f"{path}: {exc}") from exc


def assess_errors(
    errors: ErrorMeasurements,
    out_path,
    tests=("IID", "ID", "Bias", "GroupBias"),
    model_name: str = "Het(Linear)",
    metric_name: str = "RMSE",
    n_subsets: int = 30,
    subset_frac: float = 0.5,
    alpha: float = 0.05,
    seed: int = 0,
) -> dict:
    """Run the assumption suite and emit the JSON report."""
    if errors.signed_residuals is None:
        tests = tuple(t for t in tests if t not in ("Bias", "GroupBias"))
    suite = run_assumption_suite(
        errors, n_subsets=n_subsets, subset_frac=subset_frac, seed=seed, alpha=alpha, tests=tuple(tests)
    )
    report = {
        "schema": "surreval.assessment/1",
        "alpha": alpha,
        "results": {f"{model_name}-{name}-{metric_name}": rpt.to_json() for name, rpt in suite.items()},
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def run_shapley(config: ExperimentConfig) -> dict:
    """Attribution for the configured experiment: (subject, proxy) on plain
    scenes, (condition, subject, proxy) on the trade scene."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.market is not None:
        report = _backtest_attribution(config)
    else:
        rep = scene_replicate  # reuse seeding layout for consistency
        del rep
        rep_seq = np.random.SeedSequence(config.seed).spawn(config.replicates)[0]
        scene_seq, system_seq, agents_seq, data_seq, learner_seq = rep_seq.spawn(5)
        dataset = _build_scene(config.scene, seed_int(scene_seq))
        target = config.scene.get("target_metric") or default_target_metric(dataset.metric_kind)
        space_cfg = _scene_space_cfg(dataset, seed_int(agents_seq), config.scene)
        system = build_system(dataset, seed_int(system_seq))
        agents = sample_agents(space_cfg, config.n_agents, np.random.default_rng(agents_seq))
        train, test = build_eval_dataset(
            system,
            agents,
            config.proxy,
            space_cfg,
            train_frac=config.train_frac,
            seed=seed_int(data_seq),
            target_metric=target,
        )
        truth = np.array([s.true_metric for s in test])
        col = proxy_index(config.proxy, dataset.metric_kind, "holdout-100", target)
        base_pred = np.array([s.proxies[col] for s in test])
        baseline_value = -float(np.sqrt(np.mean((base_pred - truth) ** 2)))
        game = coalition_values(
            train,
            test,
            players=("subject", "proxy"),
            learner_cfg=config.learners[0].with_seed(seed_int(learner_seq) % 2**31),
            baseline_value=baseline_value,
            target_range=metric_range(target),
        )
        report = attribution_report(game)
        report["baseline"] = "Holdout-100"
    (out / "shapley.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report
