"""Synthetic daily market and agent-in-the-loop slot backtesting.

Stocks follow a multiplicative price process with stochastic volatility and a
mean-reverting pull toward their trailing average cost, so part of each
future slot's move is predictable from the prior slot's features.  A
subject-dependent float model perturbs every open an agent observes within
+/-0.1%, standing in for the agent's own market impact.

Trading rules: one lot per order at the (perturbed) open, buys blocked on
limit-up days, sells on limit-down days; at the end of a slot all holdings
liquidate at the next open, at 90% of it when that open is limit-down.
Return on investment is net cash over peak committed capital.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .agents import AgentSpec, SpaceConfig, SubjectVector, TaskKind, forward_batch, vectorize
from .errors import ConfigError, InputError
from .scenes import EvaluationSample

MARKET_SCHEMA = "surreval.market/1"

FEATURE_NAMES = (
    "profit_ratio",
    "average_cost",
    "cost_90_low",
    "cost_90_high",
    "cost_90_medium",
    "cost_70_low",
    "cost_70_high",
    "cost_70_medium",
    "closing",
    "opening",
    "highest",
    "lowest",
    "volume",
    "amount",
    "amplitude",
)
N_FEATURES = len(FEATURE_NAMES)
F_CLOSE = FEATURE_NAMES.index("closing")
F_OPEN = FEATURE_NAMES.index("opening")

LOT_SIZE = 100.0
ACTIONS = ("buy", "sell", "hold")
HOLD = 2


@dataclass(frozen=True)
class MarketData:
    """Per-stock, per-day feature rows plus the limit band that constrains
    day-over-day opens."""

    features: np.ndarray  # (n_stocks, n_days, N_FEATURES)
    limit_band: float = 0.10

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", f)
        if f.ndim != 3 or f.shape[2] != N_FEATURES:
            raise InputError(f"features must be (stocks, days, {N_FEATURES})")

    @property
    def n_stocks(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_days(self) -> int:
        return int(self.features.shape[1])

    @property
    def opens(self) -> np.ndarray:
        return self.features[:, :, F_OPEN]

    @property
    def closes(self) -> np.ndarray:
        return self.features[:, :, F_CLOSE]

    def limit_flags(self) -> tuple:
        """(limit_up, limit_down) boolean masks; day 0 is never a limit day."""
        opens = self.opens
        closes = self.closes
        up = np.zeros(opens.shape, dtype=bool)
        down = np.zeros(opens.shape, dtype=bool)
        hi = closes[:, :-1] * (1.0 + self.limit_band)
        lo = closes[:, :-1] * (1.0 - self.limit_band)
        up[:, 1:] = opens[:, 1:] >= hi * (1.0 - 1e-12)
        down[:, 1:] = opens[:, 1:] <= lo * (1.0 + 1e-12)
        return up, down


def generate_market(
    n_stocks: int,
    n_days: int,
    seed: int,
    base_vol: float = 0.02,
    vol_persistence: float = 0.9,
    vol_of_vol: float = 0.15,
    mean_reversion: float = 0.35,
    ema_window: int = 20,
    gap_fraction: float = 0.35,
    gap_vol: float = 0.004,
    jump_prob: float = 0.01,
    jump_scale: float = 18.0,
    limit_band: float = 0.10,
    vol_trend: float = 1.0,
) -> MarketData:
    """Seed-deterministic synthetic market.

    Log closes follow a random walk with stochastic daily volatility plus a
    pull of strength ``mean_reversion`` toward the trailing EMA that also
    serves as the average-cost feature.  Opens gap from the prior close,
    clipped to the limit band (hitting the clip marks a limit day);
    occasional jump gaps make limit days actually occur.  ``vol_trend``
    below 1 cools the volatility regime day by day (a nonstationary
    market); 1.0 keeps it stationary.
    """
    if n_days < 30:
        raise ConfigError("markets need at least 30 days")
    if n_stocks < 1:
        raise ConfigError("need at least one stock")
    rng = np.random.default_rng(seed)
    alpha = 2.0 / (ema_window + 1.0)
    log_close = np.empty((n_stocks, n_days))
    log_close[:, 0] = np.log(rng.uniform(5.0, 60.0, n_stocks))
    ema = log_close[:, 0].copy()
    log_vol = np.full(n_stocks, np.log(base_vol)) + 0.5 * vol_of_vol * rng.normal(size=n_stocks)
    vol = np.empty((n_stocks, n_days))
    vol[:, 0] = np.exp(log_vol)
    log_trend = np.log(vol_trend)
    for d in range(1, n_days):
        log_vol = (
            (1.0 - vol_persistence) * (np.log(base_vol) + d * log_trend)
            + vol_persistence * log_vol
            + vol_of_vol * rng.normal(size=n_stocks)
        )
        sigma = np.exp(log_vol)
        vol[:, d] = sigma
        ret = mean_reversion * (ema - log_close[:, d - 1]) + sigma * rng.normal(size=n_stocks)
        log_close[:, d] = log_close[:, d - 1] + ret
        ema = alpha * log_close[:, d] + (1.0 - alpha) * ema

    closes = np.exp(log_close)
    # Opens gap from the prior close toward the coming close, with jumps.
    day_ret = np.diff(log_close, axis=1)
    jump = rng.random((n_stocks, n_days - 1)) < jump_prob
    gap_noise = gap_vol * rng.normal(size=(n_stocks, n_days - 1)) * np.where(jump, jump_scale, 1.0)
    gap = np.exp(gap_fraction * day_ret + gap_noise)
    opens = np.empty_like(closes)
    opens[:, 0] = closes[:, 0] * np.exp(gap_vol * rng.normal(size=n_stocks))
    opens[:, 1:] = closes[:, :-1] * np.clip(gap, 1.0 - limit_band, 1.0 + limit_band)

    span = 0.6 * vol * np.abs(rng.normal(size=(n_stocks, n_days)))
    highs = np.maximum(opens, closes) * np.exp(span)
    lows = np.minimum(opens, closes) * np.exp(-span)
    prev_close = np.concatenate([closes[:, :1], closes[:, :-1]], axis=1)
    amplitude = (highs - lows) / prev_close

    # Average cost is the trailing EMA of closes; band widths follow the
    # rolling return dispersion, giving lognormal-style holder-cost bands.
    avg_cost = np.empty_like(closes)
    avg_cost[:, 0] = closes[:, 0]
    for d in range(1, n_days):
        avg_cost[:, d] = alpha * closes[:, d] + (1.0 - alpha) * avg_cost[:, d - 1]
    width = np.empty_like(closes)
    width[:, 0] = base_vol * np.sqrt(10.0)
    for d in range(1, n_days):
        lo_d = max(0, d - ema_window)
        width[:, d] = np.std(day_ret[:, lo_d:d], axis=1) * np.sqrt(10.0) + 1e-6
    dev = (log_close - np.log(avg_cost)) / width
    profit_ratio = 0.5 * (1.0 + np.tanh(0.5 * dev))

    # Volume in units of 1e4 lots and amount in units of 1e6 so that all
    # feature columns live within a couple of orders of magnitude of the
    # price scale; random agent weights then see every column.
    base_volume = rng.lognormal(mean=1.2, sigma=0.7, size=(n_stocks, 1))
    abs_ret = np.concatenate([np.zeros((n_stocks, 1)), np.abs(day_ret)], axis=1)
    volume = base_volume * np.exp(0.4 * rng.normal(size=(n_stocks, n_days)) + 2.0 * abs_ret / base_vol * 0.1)
    typical = (opens + closes + highs + lows) / 4.0
    amount = volume * typical / 10.0

    features = np.empty((n_stocks, n_days, N_FEATURES))
    features[:, :, 0] = profit_ratio
    features[:, :, 1] = avg_cost
    features[:, :, 2] = avg_cost * np.exp(-1.645 * width)
    features[:, :, 3] = avg_cost * np.exp(1.645 * width)
    features[:, :, 4] = avg_cost
    features[:, :, 5] = avg_cost * np.exp(-1.036 * width)
    features[:, :, 6] = avg_cost * np.exp(1.036 * width)
    features[:, :, 7] = avg_cost
    features[:, :, 8] = closes
    features[:, :, 9] = opens
    features[:, :, 10] = highs
    features[:, :, 11] = lows
    features[:, :, 12] = volume
    features[:, :, 13] = amount
    features[:, :, 14] = amplitude
    return MarketData(features=features, limit_band=limit_band)


@dataclass(frozen=True)
class FloatModel:
    """Bounded perturbation of observed opens: scale * tanh(w . (subject,
    last-day features))."""

    weights: np.ndarray
    scale: float = 0.001

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))


def build_float_model(space_cfg: SpaceConfig, market: MarketData, seed: int, scale: float = 0.001) -> FloatModel:
    """Random projection normalized per input dimension so the squash does
    not saturate on price-scale features."""
    width = space_cfg.subject_width + N_FEATURES
    rng = np.random.default_rng(seed)
    raw = rng.normal(0.0, 1.0, width)
    scales = np.ones(width)
    day_rms = np.sqrt(np.mean(market.features.reshape(-1, N_FEATURES) ** 2, axis=0))
    scales[space_cfg.subject_width :] = np.maximum(day_rms, 1e-12)
    return FloatModel(weights=raw / (scales * np.sqrt(width)), scale=scale)


def float_rate(fm: FloatModel, subject: SubjectVector, day_features) -> float:
    """Open-price float ratio in (-scale, +scale)."""
    day = np.asarray(day_features, dtype=np.float64).ravel()
    x = np.concatenate([subject.values, day])
    if x.size != fm.weights.size:
        raise InputError(f"float model expects width {fm.weights.size}, got {x.size}")
    return float(fm.scale * np.tanh(fm.weights @ x))


def _rate_matrix(fm: FloatModel, subject: SubjectVector, market: MarketData) -> np.ndarray:
    """(stocks, days) float rates; day d reacts to day d-1 features, day 0
    has no perturbation."""
    s_dot = float(fm.weights[: subject.width] @ subject.values)
    w_day = fm.weights[subject.width :]
    flat = market.features.reshape(-1, N_FEATURES) @ w_day
    proj = flat.reshape(market.n_stocks, market.n_days)
    rates = np.zeros_like(proj)
    rates[:, 1:] = fm.scale * np.tanh(s_dot + proj[:, :-1])
    return rates


def effective_opens(fm: FloatModel, subject: SubjectVector, market: MarketData) -> np.ndarray:
    return market.opens * (1.0 + _rate_matrix(fm, subject, market))


def decision_matrix(agent: AgentSpec, market: MarketData) -> np.ndarray:
    """(stocks, days) decisions; day d decided from day d-1 features, day 0
    defaults to hold."""
    if agent.task_kind is not TaskKind.TERNARY_DECISION:
        raise InputError("market agents must be ternary-decision agents")
    flat = market.features[:, :-1, :].reshape(-1, N_FEATURES)
    scores = forward_batch(agent, flat)
    decided = np.argmax(scores, axis=1).reshape(market.n_stocks, market.n_days - 1)
    out = np.full((market.n_stocks, market.n_days), HOLD, dtype=np.int64)
    out[:, 1:] = decided
    return out


@dataclass(frozen=True)
class TradeRecord:
    day: int
    action: str
    executed: bool
    price: float


@dataclass(frozen=True)
class SlotResult:
    roi: float
    trades: tuple
    forced_holds: int
    end_liquidation_price: float


def _validate_slot(market: MarketData, start_day: int, slot_len: int) -> None:
    if slot_len < 1:
        raise InputError("slot_len must be >= 1")
    if start_day < 1:
        raise InputError("slots must start at day >= 1 (decisions need a prior day)")
    if start_day + slot_len > market.n_days - 1:
        raise InputError("slot (plus its liquidation open) must fit inside the market")


def simulate_slot(
    agent: AgentSpec,
    stock: int,
    start_day: int,
    market: MarketData,
    fm: FloatModel,
    slot_len: int = 10,
    space_cfg: Optional[SpaceConfig] = None,
    subject: Optional[SubjectVector] = None,
) -> SlotResult:
    """Run one agent on one stock for one slot, with full trade records.

    The subject encoding feeding the float model is derived from the agent
    unless passed in; ``space_cfg`` is required to derive it.
    """
    _validate_slot(market, start_day, slot_len)
    if not (0 <= stock < market.n_stocks):
        raise InputError(f"stock index {stock} out of range")
    if subject is None:
        if space_cfg is None:
            raise InputError("simulate_slot needs either a subject vector or a space_cfg")
        subject = vectorize(agent, space_cfg)
    eff_open = effective_opens(fm, subject, market)[stock]
    limit_up, limit_down = market.limit_flags()
    decisions = decision_matrix(agent, market)[stock]

    cash = 0.0
    committed = 0.0
    pos = 0
    forced = 0
    trades = []
    for d in range(start_day, start_day + slot_len):
        a = int(decisions[d])
        px = float(eff_open[d])
        executed = True
        if a == 0:
            if limit_up[stock, d]:
                executed = False
                forced += 1
            else:
                pos += 1
                cash -= LOT_SIZE * px
                committed = max(committed, -cash)
        elif a == 1:
            if limit_down[stock, d]:
                executed = False
                forced += 1
            elif pos > 0:
                pos -= 1
                cash += LOT_SIZE * px
        trades.append(TradeRecord(day=d, action=ACTIONS[a], executed=executed, price=px))
    end_day = start_day + slot_len
    price = float(eff_open[end_day])
    if limit_down[stock, end_day]:
        price *= 0.9
    cash += pos * LOT_SIZE * price
    roi = cash / committed if committed > 0.0 else 0.0
    return SlotResult(roi=roi, trades=tuple(trades), forced_holds=forced, end_liquidation_price=price)


def slot_roi_matrix(
    agent: AgentSpec,
    market: MarketData,
    fm: FloatModel,
    starts: np.ndarray,
    slot_len: int,
    subject: SubjectVector,
) -> np.ndarray:
    """(stocks, starts) slot returns via the batched kernel."""
    starts = np.asarray(starts, dtype=np.int64)
    for s in starts:
        _validate_slot(market, int(s), slot_len)
    eff_open = effective_opens(fm, subject, market)
    limit_up, limit_down = market.limit_flags()
    decisions = decision_matrix(agent, market)
    roi, _ = _kernels.simulate_slots(eff_open, limit_up, limit_down, decisions, starts, slot_len, LOT_SIZE)
    return roi


def last10_proxy(
    agent: AgentSpec,
    stock: int,
    slot_start: int,
    market: MarketData,
    fm: FloatModel,
    slot_len: int = 10,
    space_cfg: Optional[SpaceConfig] = None,
    subject: Optional[SubjectVector] = None,
) -> float:
    """Return of the slot immediately before ``slot_start``; doubles as the
    reference backtesting predictor of the coming slot's return."""
    if slot_start - slot_len < 1:
        raise InputError(f"slot_start must be >= {slot_len + 1}")
    return simulate_slot(
        agent, stock, slot_start - slot_len, market, fm, slot_len, space_cfg=space_cfg, subject=subject
    ).roi


def build_conditional_dataset(
    agents: list,
    market: MarketData,
    fm: FloatModel,
    train_day_range: tuple,
    test_day_range: tuple,
    slot_len: int = 10,
    space_cfg: Optional[SpaceConfig] = None,
    train_agent_frac: float = 0.8,
):
    """Evaluation samples for the conditional scene.

    One sample per (agent, stock, slot start): condition is the flattened
    prior-slot feature block, proxies hold the prior-slot return, the target
    is the coming slot's return.  Day ranges are half-open [lo, hi) over slot
    starts; the test range must start after the train range ends, and the
    train/test agent sets are disjoint by construction.
    """
    if space_cfg is None:
        raise ConfigError("build_conditional_dataset needs the agents' space_cfg")
    if not agents:
        raise ConfigError("agent list is empty")
    tr_lo, tr_hi = map(int, train_day_range)
    te_lo, te_hi = map(int, test_day_range)
    if not (tr_lo < tr_hi and te_lo < te_hi):
        raise ConfigError("day ranges must be nonempty half-open intervals")
    if te_lo < tr_hi:
        raise ConfigError("test range must start at or after the train range ends")
    for lo, hi in ((tr_lo, tr_hi), (te_lo, te_hi)):
        if lo - slot_len < 1:
            raise ConfigError(f"slot starts must be >= {slot_len + 1} for the prior-slot proxy")
        try:
            _validate_slot(market, hi - 1, slot_len)
        except InputError as exc:
            raise ConfigError(str(exc)) from exc

    n_train_agents = int(round(train_agent_frac * len(agents)))
    if not (0 < n_train_agents < len(agents)):
        raise ConfigError("train_agent_frac leaves an empty agent split")

    def block(lo, hi, agent_list):
        starts = np.arange(lo, hi, dtype=np.int64)
        samples = []
        for agent in agent_list:
            subject = vectorize(agent, space_cfg)
            roi = slot_roi_matrix(agent, market, fm, starts, slot_len, subject)
            prior = slot_roi_matrix(agent, market, fm, starts - slot_len, slot_len, subject)
            for s in range(market.n_stocks):
                for k, t in enumerate(starts):
                    condition = market.features[s, t - slot_len : t, :].reshape(-1)
                    samples.append(
                        EvaluationSample(
                            condition=condition,
                            subject=subject,
                            proxies=np.array([prior[s, k]]),
                            true_metric=float(roi[s, k]),
                        )
                    )
        return samples

    train = block(tr_lo, tr_hi, agents[:n_train_agents])
    test = block(te_lo, te_hi, agents[n_train_agents:])
    return train, test


def market_to_csv(market: MarketData, path) -> None:
    """One row per stock-day, columns in FEATURE_NAMES order."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# schema", MARKET_SCHEMA, f"limit_band={market.limit_band!r}"])
        writer.writerow(["stock", "day", *FEATURE_NAMES])
        for s in range(market.n_stocks):
            for d in range(market.n_days):
                writer.writerow([s, d, *[repr(float(v)) for v in market.features[s, d]]])


def market_from_csv(path) -> MarketData:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        schema_row = next(reader)
        if schema_row[0] != "# schema" or schema_row[1] != MARKET_SCHEMA:
            raise InputError(f"{path}: unexpected market schema {schema_row!r}")
        limit_band = float(schema_row[2].split("=", 1)[1])
        next(reader)
        rows = [(int(r[0]), int(r[1]), [float(v) for v in r[2:]]) for r in reader]
    n_stocks = max(r[0] for r in rows) + 1
    n_days = max(r[1] for r in rows) + 1
    features = np.empty((n_stocks, n_days, N_FEATURES))
    for s, d, vals in rows:
        features[s, d] = vals
    return MarketData(features=features, limit_band=limit_band)
