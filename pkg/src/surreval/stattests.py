"""Statistical audits of the certificate assumptions.

Four refutation-style checks: subset-mean normality ("IID"), cross-subset
distribution equality ("ID"), global zero-mean residuals ("Bias"), and
per-subset zero-mean residuals ("GroupBias").  None of them can prove the
assumptions; each can only reject.  P-values come from the in-package special
function kernel via tail_probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bounds import ErrorMeasurements
from .errors import DegenerateInputError, InputError, PartitionError
from .special import betainc_reg, gammainc_upper_reg, ks_sf, std_normal_sf


@dataclass(frozen=True)
class TestReport:
    test_name: str
    statistic: float
    p_value: float
    alpha: float
    rejected: bool
    sub_results: Optional[tuple] = None
    pass_ratio: Optional[float] = None

    def to_json(self) -> dict:
        out = {
            "test_name": self.test_name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "rejected": self.rejected,
        }
        if self.sub_results is not None:
            out["sub_results"] = [{"statistic": s, "p_value": p} for s, p in self.sub_results]
        if self.pass_ratio is not None:
            out["pass_ratio"] = self.pass_ratio
        return out


def tail_probability(dist: str, statistic: float, df: Optional[int] = None) -> float:
    """P-value kernel.

    "std_normal" and "student_t" return two-sided probabilities,
    "chi_square" the upper tail, and "ks" the asymptotic Kolmogorov survival
    function of the given statistic.
    """
    if not math.isfinite(statistic):
        raise InputError("statistic must be finite")
    if dist == "std_normal":
        return min(1.0, 2.0 * std_normal_sf(abs(statistic)))
    if dist == "student_t":
        if df is None or df < 1:
            raise InputError("student_t needs df >= 1")
        return betainc_reg(df / 2.0, 0.5, df / (df + statistic * statistic))
    if dist == "chi_square":
        if df is None or df < 1:
            raise InputError("chi_square needs df >= 1")
        if statistic < 0.0:
            raise InputError("chi_square statistic must be >= 0")
        return gammainc_upper_reg(df / 2.0, statistic / 2.0)
    if dist == "ks":
        return ks_sf(statistic)
    raise InputError(f"unknown distribution {dist!r}")


def _skew_z(x: np.ndarray) -> float:
    """Transformed skewness statistic, standard normal under normality."""
    n = x.size
    if n < 8:
        raise InputError("skewness transform needs n >= 8")
    m = x.mean()
    d = x - m
    m2 = np.mean(d**2)
    if m2 <= 0.0:
        raise DegenerateInputError("zero variance")
    b1 = np.mean(d**3) / m2**1.5
    y = b1 * math.sqrt((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0)))
    beta2 = 3.0 * (n**2 + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) / (
        (n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0)
    )
    w2 = -1.0 + math.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / math.sqrt(0.5 * math.log(w2))
    alpha = math.sqrt(2.0 / (w2 - 1.0))
    return delta * math.asinh(y / alpha)


def _kurtosis_z(x: np.ndarray) -> float:
    """Transformed kurtosis statistic, standard normal under normality."""
    n = x.size
    if n < 5:
        raise InputError("kurtosis transform needs n >= 5")
    m = x.mean()
    d = x - m
    m2 = np.mean(d**2)
    if m2 <= 0.0:
        raise DegenerateInputError("zero variance")
    b2 = np.mean(d**4) / (m2 * m2)
    e_b2 = 3.0 * (n - 1.0) / (n + 1.0)
    var_b2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) ** 2 * (n + 3.0) * (n + 5.0))
    xx = (b2 - e_b2) / math.sqrt(var_b2)
    sqrt_beta1 = (
        6.0
        * (n * n - 5.0 * n + 2.0)
        / ((n + 7.0) * (n + 9.0))
        * math.sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)))
    )
    a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + math.sqrt(1.0 + 4.0 / sqrt_beta1**2))
    denom = 1.0 + xx * math.sqrt(2.0 / (a - 4.0))
    if denom == 0.0:
        denom = 1e-300
    term = math.copysign(abs((1.0 - 2.0 / a) / denom) ** (1.0 / 3.0), denom)
    return (1.0 - 2.0 / (9.0 * a) - term) / math.sqrt(2.0 / (9.0 * a))


def normality_k2(x: np.ndarray) -> tuple:
    """Omnibus normality statistic (squared skew and kurtosis transforms)
    and its chi-square(2) p-value."""
    zs = _skew_z(x)
    zk = _kurtosis_z(x)
    k2 = zs * zs + zk * zk
    return k2, tail_probability("chi_square", k2, df=2)


def _random_subsets(n: int, n_subsets: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """(n_subsets, m) index matrix; each row an independent draw without
    replacement."""
    tiled = np.tile(np.arange(n), (n_subsets, 1))
    rng.permuted(tiled, axis=1, out=tiled)
    return tiled[:, :m]


def iid_check(
    errors: ErrorMeasurements,
    n_subsets: int = 30,
    subset_frac: float = 0.5,
    seed: int = 0,
    alpha: float = 0.05,
) -> TestReport:
    """Normality of studentized subset means.

    Draws random subsets, studentizes each subset mean against the grand
    mean and standard deviation, and applies the omnibus normality test to
    the resulting scores.
    """
    x = errors.losses
    n = x.size
    if n < 60:
        raise InputError("iid_check needs at least 60 measurements")
    m = int(round(subset_frac * n))
    if not (2 <= m < n):
        raise InputError("subset_frac must leave 2 <= m < n rows per subset")
    grand_mean = x.mean()
    grand_std = x.std(ddof=1)
    if grand_std <= 0.0:
        raise DegenerateInputError("zero grand standard deviation")
    rng = np.random.default_rng(seed)
    idx = _random_subsets(n, n_subsets, m, rng)
    means = x[idx].mean(axis=1)
    z = (means - grand_mean) / (grand_std / math.sqrt(m))
    k2, p = normality_k2(z)
    return TestReport("IID", float(k2), float(p), alpha, p < alpha)


def _ks_two_sample(a_sorted: np.ndarray, b_sorted: np.ndarray) -> tuple:
    """Two-sample KS distance and its asymptotic p-value (with the usual
    finite-sample correction of the effective size)."""
    pooled = np.concatenate([a_sorted, b_sorted])
    pooled.sort(kind="mergesort")
    cdf_a = np.searchsorted(a_sorted, pooled, side="right") / a_sorted.size
    cdf_b = np.searchsorted(b_sorted, pooled, side="right") / b_sorted.size
    d = float(np.abs(cdf_a - cdf_b).max())
    ne = a_sorted.size * b_sorted.size / (a_sorted.size + b_sorted.size)
    lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    return d, ks_sf(lam)


def id_check(
    errors: ErrorMeasurements,
    n_subsets: int = 30,
    seed: int = 0,
    alpha: float = 0.05,
) -> TestReport:
    """Distribution equality across a random equal partition.

    Each group is KS-tested against the union of the others; the headline
    p-value is the Bonferroni-corrected minimum, pass_ratio the fraction of
    raw sub-test p-values at or above alpha.
    """
    x = errors.losses
    n = x.size
    if n < 2 * n_subsets:
        raise InputError(f"id_check needs at least {2 * n_subsets} measurements")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    groups = np.array_split(perm, n_subsets)
    if any(g.size == 0 for g in groups):
        raise PartitionError("empty group in partition")
    sorted_x = [np.sort(x[g]) for g in groups]
    sub = []
    for j in range(n_subsets):
        rest = np.sort(np.concatenate([sorted_x[i] for i in range(n_subsets) if i != j]))
        sub.append(_ks_two_sample(sorted_x[j], rest))
    stats = np.array([s for s, _ in sub])
    ps = np.array([p for _, p in sub])
    headline = min(1.0, float(ps.min()) * n_subsets)
    return TestReport(
        "ID",
        float(stats.max()),
        headline,
        alpha,
        headline < alpha,
        sub_results=tuple(sub),
        pass_ratio=float(np.mean(ps >= alpha)),
    )


def bias_check(signed_residuals, alpha: float = 0.05) -> TestReport:
    """One-sample two-sided t-test of zero mean residual."""
    x = np.asarray(signed_residuals, dtype=np.float64).ravel()
    if x.size < 2:
        raise InputError("bias_check needs at least 2 residuals")
    if not np.all(np.isfinite(x)):
        raise InputError("residuals must be finite")
    sd = x.std(ddof=1)
    if sd <= 0.0:
        raise DegenerateInputError("zero residual variance")
    t = float(x.mean() / (sd / math.sqrt(x.size)))
    p = tail_probability("student_t", t, df=x.size - 1)
    return TestReport("Bias", t, p, alpha, p < alpha)


def group_bias_check(
    signed_residuals,
    n_subsets: int = 30,
    subset_frac: float = 0.5,
    seed: int = 0,
    alpha: float = 0.05,
) -> TestReport:
    """bias_check over random subsets; pass_ratio is the headline figure."""
    x = np.asarray(signed_residuals, dtype=np.float64).ravel()
    if x.size < 4:
        raise InputError("group_bias_check needs at least 4 residuals")
    m = int(round(subset_frac * x.size))
    if not (2 <= m < x.size):
        raise InputError("subset_frac must leave 2 <= m < n rows per subset")
    rng = np.random.default_rng(seed)
    idx = _random_subsets(x.size, n_subsets, m, rng)
    sub = []
    for j in range(n_subsets):
        r = bias_check(x[idx[j]], alpha=alpha)
        sub.append((r.statistic, r.p_value))
    stats = np.array([abs(s) for s, _ in sub])
    ps = np.array([p for _, p in sub])
    headline = min(1.0, float(ps.min()) * n_subsets)
    return TestReport(
        "GroupBias",
        float(stats.max()),
        headline,
        alpha,
        headline < alpha,
        sub_results=tuple(sub),
        pass_ratio=float(np.mean(ps >= alpha)),
    )


def run_assumption_suite(
    errors: ErrorMeasurements,
    n_subsets: int = 30,
    subset_frac: float = 0.5,
    seed: int = 0,
    alpha: float = 0.05,
    tests: tuple = ("IID", "ID", "Bias", "GroupBias"),
) -> dict:
    """Run the selected checks; bias checks need signed residuals."""
    ss = np.random.SeedSequence(seed)
    seeds = {name: s.generate_state(1)[0] for name, s in zip(("IID", "ID", "GroupBias"), ss.spawn(3))}
    out = {}
    for name in tests:
        if name == "IID":
            out[name] = iid_check(errors, n_subsets, subset_frac, seeds["IID"], alpha)
        elif name == "ID":
            out[name] = id_check(errors, n_subsets, seeds["ID"], alpha)
        elif name == "Bias":
            if errors.signed_residuals is None:
                raise InputError("Bias check needs signed residuals")
            out[name] = bias_check(errors.signed_residuals, alpha)
        elif name == "GroupBias":
            if errors.signed_residuals is None:
                raise InputError("GroupBias check needs signed residuals")
            out[name] = group_bias_check(
                errors.signed_residuals, n_subsets, subset_frac, seeds["GroupBias"], alpha
            )
        else:
            raise InputError(f"unknown test {name!r}")
    return out
