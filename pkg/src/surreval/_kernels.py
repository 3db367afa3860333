"""Hot numeric kernels with two interchangeable backends.

Each kernel has a pure-numpy implementation and, when numba is importable and
not disabled, an @njit twin.  Set SURREVAL_NUMBA=0 to force the numpy path.
Both paths visit rows in identical order, so results agree to floating-point
round-off; tests pin that equivalence and benchmarks/bench_kernels.py
compares their speed.
"""

from __future__ import annotations

import os

import numpy as np


def _env_enabled(name: str, default: str = "1") -> bool:
    return os.environ.get(name, default).strip().lower() not in ("0", "false", "no", "off")

NUMBA_REQUESTED = _env_enabled("SURREVAL_NUMBA")

try:
    if not NUMBA_REQUESTED:
        raise ImportError("numba disabled via SURREVAL_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA

_GAIN_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Gradient-boosted tree kernels.  Trees live in implicit full-binary layout:
# node i has children 2i+1 / 2i+2; feat < 0 marks a leaf.
# ---------------------------------------------------------------------------

def _grow_tree_numpy(binned, grad, rows, max_depth, min_leaf, n_bins):
    n_nodes = 2 ** (max_depth + 1) - 1
    d = binned.shape[1]
    feat = np.full(n_nodes, -1, dtype=np.int32)
    thr = np.full(n_nodes, -1, dtype=np.int32)
    value = np.zeros(n_nodes, dtype=np.float64)
    node_lo = np.zeros(n_nodes, dtype=np.int64)
    node_hi = np.full(n_nodes, -1, dtype=np.int64)
    node_depth = np.zeros(n_nodes, dtype=np.int64)
    idx = np.array(rows, dtype=np.int64, copy=True)
    node_lo[0] = 0
    node_hi[0] = idx.size
    offsets = (np.arange(d, dtype=np.int64) * n_bins)[None, :]
    for node in range(n_nodes):
        lo, hi = node_lo[node], node_hi[node]
        if hi <= lo:
            continue
        count = hi - lo
        sub_rows = idx[lo:hi]
        g = grad[sub_rows]
        total = float(g.sum())
        value[node] = total / count
        if node_depth[node] >= max_depth or count < 2 * min_leaf:
            continue
        sub = binned[sub_rows].astype(np.int64)
        flat = (sub + offsets).ravel()
        cnt = np.bincount(flat, minlength=d * n_bins).reshape(d, n_bins)
        wsum = np.bincount(flat, weights=np.repeat(g, d), minlength=d * n_bins).reshape(d, n_bins)
        cl = np.cumsum(cnt[:, :-1], axis=1)
        sl = np.cumsum(wsum[:, :-1], axis=1)
        cr = count - cl
        sr = total - sl
        ok = (cl >= min_leaf) & (cr >= min_leaf)
        base = total * total / count
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = np.where(ok, sl * sl / np.maximum(cl, 1) + sr * sr / np.maximum(cr, 1) - base, -np.inf)
        flat_best = int(np.argmax(gain))
        best_gain = gain.ravel()[flat_best]
        if not (best_gain > _GAIN_FLOOR):
            continue
        best_f, best_b = divmod(flat_best, n_bins - 1)
        feat[node] = best_f
        thr[node] = best_b
        go_left = binned[sub_rows, best_f] <= best_b
        idx[lo:hi] = np.concatenate([sub_rows[go_left], sub_rows[~go_left]])
        mid = lo + int(go_left.sum())
        left, right = 2 * node + 1, 2 * node + 2
        node_lo[left], node_hi[left], node_depth[left] = lo, mid, node_depth[node] + 1
        node_lo[right], node_hi[right], node_depth[right] = mid, hi, node_depth[node] + 1
    return feat, thr, value


def _grow_tree_impl(binned, grad, rows, max_depth, min_leaf, n_bins):
    n_nodes = 2 ** (max_depth + 1) - 1
    d = binned.shape[1]
    feat = np.full(n_nodes, -1, dtype=np.int32)
    thr = np.full(n_nodes, -1, dtype=np.int32)
    value = np.zeros(n_nodes, dtype=np.float64)
    node_lo = np.zeros(n_nodes, dtype=np.int64)
    node_hi = np.full(n_nodes, -1, dtype=np.int64)
    node_depth = np.zeros(n_nodes, dtype=np.int64)
    idx = rows.copy()
    tmp = np.empty_like(idx)
    node_lo[0] = 0
    node_hi[0] = idx.size
    hist_cnt = np.zeros(n_bins, dtype=np.int64)
    hist_sum = np.zeros(n_bins, dtype=np.float64)
    for node in range(n_nodes):
        lo, hi = node_lo[node], node_hi[node]
        if hi <= lo:
            continue
        count = hi - lo
        total = 0.0
        for p in range(lo, hi):
            total += grad[idx[p]]
        value[node] = total / count
        if node_depth[node] >= max_depth or count < 2 * min_leaf:
            continue
        base = total * total / count
        best_gain = _GAIN_FLOOR
        best_f = -1
        best_b = -1
        for f in range(d):
            for b in range(n_bins):
                hist_cnt[b] = 0
                hist_sum[b] = 0.0
            for p in range(lo, hi):
                i = idx[p]
                b = binned[i, f]
                hist_cnt[b] += 1
                hist_sum[b] += grad[i]
            cl = 0
            sl = 0.0
            for b in range(n_bins - 1):
                cl += hist_cnt[b]
                sl += hist_sum[b]
                if cl < min_leaf:
                    continue
                cr = count - cl
                if cr < min_leaf:
                    break
                sr = total - sl
                gain = sl * sl / cl + sr * sr / cr - base
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_b = b
        if best_f < 0:
            continue
        feat[node] = best_f
        thr[node] = best_b
        pos = lo
        for p in range(lo, hi):
            i = idx[p]
            if binned[i, best_f] <= best_b:
                tmp[pos] = i
                pos += 1
        mid = pos
        for p in range(lo, hi):
            i = idx[p]
            if binned[i, best_f] > best_b:
                tmp[pos] = i
                pos += 1
        for p in range(lo, hi):
            idx[p] = tmp[p]
        left, right = 2 * node + 1, 2 * node + 2
        node_lo[left], node_hi[left], node_depth[left] = lo, mid, node_depth[node] + 1
        node_lo[right], node_hi[right], node_depth[right] = mid, hi, node_depth[node] + 1
    return feat, thr, value


def _predict_tree_binned_impl(binned, feat, thr, value, out):
    n = binned.shape[0]
    for r in range(n):
        node = 0
        while feat[node] >= 0:
            if binned[r, feat[node]] <= thr[node]:
                node = 2 * node + 1
            else:
                node = 2 * node + 2
        out[r] += value[node]


def _predict_tree_binned_numpy(binned, feat, thr, value, out):
    n = binned.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = feat[node] >= 0
    while active.any():
        f = feat[node]
        safe_f = np.where(active, f, 0)
        go_left = binned[np.arange(n), safe_f] <= thr[node]
        node = np.where(active, np.where(go_left, 2 * node + 1, 2 * node + 2), node)
        active = feat[node] >= 0
    out += value[node]


def _predict_forest_raw_impl(x, feat, thr_value, value, shrinkage, init, out):
    n = x.shape[0]
    n_trees = feat.shape[0]
    for r in range(n):
        acc = init
        for t in range(n_trees):
            node = 0
            while feat[t, node] >= 0:
                if x[r, feat[t, node]] <= thr_value[t, node]:
                    node = 2 * node + 1
                else:
                    node = 2 * node + 2
            acc += shrinkage * value[t, node]
        out[r] = acc


def _predict_forest_raw_numpy(x, feat, thr_value, value, shrinkage, init, out):
    n = x.shape[0]
    out[:] = init
    rows = np.arange(n)
    for t in range(feat.shape[0]):
        node = np.zeros(n, dtype=np.int64)
        active = feat[t, node] >= 0
        while active.any():
            f = feat[t, node]
            safe_f = np.where(active, f, 0)
            go_left = x[rows, safe_f] <= thr_value[t, node]
            node = np.where(active, np.where(go_left, 2 * node + 1, 2 * node + 2), node)
            active = feat[t, node] >= 0
        out += shrinkage * value[t, node]


# ---------------------------------------------------------------------------
# Trading-slot accounting kernel.  Decisions: 0 = buy one lot, 1 = sell one
# lot, 2 = hold.  Limit-up blocks buys, limit-down blocks sells; holdings
# liquidate at the first open after the slot (90% of it on a limit-down day).
# ---------------------------------------------------------------------------

def _simulate_slots_impl(open_eff, limit_up, limit_down, decisions, starts, slot_len, lot):
    n_stocks, _ = open_eff.shape
    n_starts = starts.size
    roi = np.zeros((n_stocks, n_starts), dtype=np.float64)
    forced = np.zeros((n_stocks, n_starts), dtype=np.int64)
    for s in range(n_stocks):
        for k in range(n_starts):
            start = starts[k]
            cash = 0.0
            committed = 0.0
            pos = 0
            nf = 0
            for d in range(start, start + slot_len):
                a = decisions[s, d]
                if a == 0:
                    if limit_up[s, d]:
                        nf += 1
                    else:
                        pos += 1
                        cash -= lot * open_eff[s, d]
                        if -cash > committed:
                            committed = -cash
                elif a == 1:
                    if limit_down[s, d]:
                        nf += 1
                    elif pos > 0:
                        pos -= 1
                        cash += lot * open_eff[s, d]
            end_day = start + slot_len
            price = open_eff[s, end_day]
            if limit_down[s, end_day]:
                price = 0.9 * price
            cash += pos * lot * price
            roi[s, k] = cash / committed if committed > 0.0 else 0.0
            forced[s, k] = nf
    return roi, forced


def _simulate_slots_numpy(open_eff, limit_up, limit_down, decisions, starts, slot_len, lot):
    n_stocks, _ = open_eff.shape
    n_starts = starts.size
    cash = np.zeros((n_stocks, n_starts), dtype=np.float64)
    committed = np.zeros_like(cash)
    pos = np.zeros((n_stocks, n_starts), dtype=np.int64)
    forced = np.zeros((n_stocks, n_starts), dtype=np.int64)
    for off in range(slot_len):
        days = starts + off
        a = decisions[:, days]
        up = limit_up[:, days]
        down = limit_down[:, days]
        px = open_eff[:, days]
        buy = a == 0
        sell = a == 1
        buy_ok = buy & ~up
        sell_ok = sell & ~down & (pos > 0)
        forced += (buy & up).astype(np.int64) + (sell & down).astype(np.int64)
        pos = pos + buy_ok - sell_ok
        cash = cash - np.where(buy_ok, lot * px, 0.0) + np.where(sell_ok, lot * px, 0.0)
        committed = np.maximum(committed, -cash)
    end_days = starts + slot_len
    price = open_eff[:, end_days] * np.where(limit_down[:, end_days], 0.9, 1.0)
    cash = cash + pos * lot * price
    roi = np.where(committed > 0.0, cash / np.where(committed > 0.0, committed, 1.0), 0.0)
    return roi, forced


if HAS_NUMBA:
    _grow_tree_numba = njit(cache=True)(_grow_tree_impl)
    _predict_tree_binned_numba = njit(cache=True)(_predict_tree_binned_impl)
    _predict_forest_raw_numba = njit(cache=True)(_predict_forest_raw_impl)
    _simulate_slots_numba = njit(cache=True)(_simulate_slots_impl)


def grow_tree(binned, grad, rows, max_depth, min_leaf, n_bins):
    """Fit one regression tree on binned features; returns flat node arrays
    (feature, threshold bin, leaf/internal value)."""
    if USE_NUMBA:
        return _grow_tree_numba(binned, grad, rows, max_depth, min_leaf, n_bins)
    return _grow_tree_numpy(binned, grad, rows, max_depth, min_leaf, n_bins)


def predict_tree_binned(binned, feat, thr, value, out):
    """Add one tree's leaf values to ``out`` for every row of ``binned``."""
    if USE_NUMBA:
        _predict_tree_binned_numba(binned, feat, thr, value, out)
    else:
        _predict_tree_binned_numpy(binned, feat, thr, value, out)


def predict_forest_raw(x, feat, thr_value, value, shrinkage, init):
    """Evaluate a whole forest on raw (unbinned) features."""
    out = np.empty(x.shape[0], dtype=np.float64)
    if USE_NUMBA:
        _predict_forest_raw_numba(x, feat, thr_value, value, shrinkage, init, out)
    else:
        _predict_forest_raw_numpy(x, feat, thr_value, value, shrinkage, init, out)
    return out


def simulate_slots(open_eff, limit_up, limit_down, decisions, starts, slot_len, lot=100.0):
    """Slot returns and forced-hold counts for every (stock, start) pair."""
    open_eff = np.ascontiguousarray(open_eff, dtype=np.float64)
    decisions = np.ascontiguousarray(decisions, dtype=np.int64)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    lu = np.ascontiguousarray(limit_up, dtype=np.bool_)
    ld = np.ascontiguousarray(limit_down, dtype=np.bool_)
    if USE_NUMBA:
        return _simulate_slots_numba(open_eff, lu, ld, decisions, starts, slot_len, lot)
    return _simulate_slots_numpy(open_eff, lu, ld, decisions, starts, slot_len, lot)
