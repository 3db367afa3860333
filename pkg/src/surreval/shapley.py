"""Exact Shapley attribution over the evaluation model's input blocks
(condition, subject, proxies), with the empty coalition anchored to the
scene's reference baseline."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from math import factorial

import numpy as np

from .errors import ConfigError, InputError
from .evalmodel import meta_fit, meta_predict_batch
from .scenes import EvaluationSample

PLAYERS = ("condition", "subject", "proxy")


@dataclass(frozen=True)
class CoalitionGame:
    """Value of every coalition of input blocks (2^k entries, k <= 3)."""

    players: tuple
    values: dict  # frozenset of players -> float

    def __post_init__(self):
        object.__setattr__(self, "players", tuple(self.players))
        if len(self.players) > 3:
            raise InputError("at most 3 players supported")
        if len(set(self.players)) != len(self.players):
            raise InputError("duplicate players")
        need = 2 ** len(self.players)
        if len(self.values) != need:
            raise InputError(f"game needs {need} coalition values, got {len(self.values)}")
        for coalition in _all_coalitions(self.players):
            if coalition not in self.values:
                raise InputError(f"missing coalition {sorted(coalition)}")

    def to_json(self) -> dict:
        return {
            "players": list(self.players),
            "values": {"+".join(sorted(c)) or "(empty)": v for c, v in sorted(self.values.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))},
        }


def _all_coalitions(players) -> list:
    out = [frozenset()]
    for p in players:
        out += [c | {p} for c in out]
    return out


def _mask_sample(sample: EvaluationSample, coalition: frozenset) -> EvaluationSample:
    """Keep only the coalition's feature blocks; absent blocks collapse to a
    single zero column so the learner always sees at least one feature."""
    cond = sample.condition if "condition" in coalition and sample.condition is not None else None
    subject = sample.subject
    if "subject" not in coalition:
        from .agents import SubjectVector

        subject = SubjectVector(type_id=subject.type_id, values=np.zeros(1))
    proxies = sample.proxies if "proxy" in coalition else np.zeros(1)
    return EvaluationSample(condition=cond, subject=subject, proxies=proxies, true_metric=sample.true_metric)


def coalition_values(
    train,
    test,
    players,
    learner_cfg,
    baseline_value: float,
    target_range=None,
) -> CoalitionGame:
    """Fit one evaluation model per nonempty coalition (on exactly that
    coalition's feature blocks) and score it as negative test RMSE; the empty
    coalition takes the designated baseline value."""
    players = tuple(players)
    for p in players:
        if p not in PLAYERS:
            raise InputError(f"unknown player {p!r}")
    if "condition" in players and train and train[0].condition is None:
        raise ConfigError("condition player requested but samples carry no condition block")
    y_test = np.array([s.true_metric for s in test], dtype=np.float64)
    values = {frozenset(): float(baseline_value)}
    for coalition in _all_coalitions(players):
        if not coalition:
            continue
        masked_train = [_mask_sample(s, coalition) for s in train]
        masked_test = [_mask_sample(s, coalition) for s in test]
        try:
            em = meta_fit(masked_train, learner_cfg, target_range=target_range)
            pred = meta_predict_batch(em, masked_test)
        except Exception as exc:
            raise ConfigError(f"coalition {sorted(coalition)} failed to fit: {exc}") from exc
        rmse = float(np.sqrt(np.mean((pred - y_test) ** 2)))
        values[coalition] = -rmse
    return CoalitionGame(players=players, values=values)


def shapley_values(game: CoalitionGame) -> dict:
    """Exact Shapley values by averaging marginal contributions over all
    player orderings."""
    players = game.players
    totals = {p: 0.0 for p in players}
    for order in permutations(players):
        current = frozenset()
        for p in order:
            nxt = current | {p}
            totals[p] += game.values[nxt] - game.values[current]
            current = nxt
    k = factorial(len(players))
    return {p: t / k for p, t in totals.items()}


def attribution_report(game: CoalitionGame) -> dict:
    """JSON-ready report: per-player value, contribution share, and the
    coalition table."""
    phi = shapley_values(game)
    total = sum(phi.values())
    shares = {p: (phi[p] / total if total != 0.0 else float("nan")) for p in game.players}
    out = game.to_json()
    out["shapley"] = {p: phi[p] for p in game.players}
    out["contribution_pct"] = {p: 100.0 * shares[p] for p in game.players}
    return out
