"""Closed-form probabilistic certificates for surrogate evaluation error.

All bounds assume per-measurement losses in [0, 1].  The half-width uses the
one-sided Hoeffding constant sqrt(ln(1/sigma) / (2n)); the effect-error bounds
double it (non-positivity) or take twice the worse of two per-arm terms with
ln(2/sigma) (positivity).  Losses above the unit range must be normalized by
the caller with a declared scale, which is carried along as provenance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import InputError


class BoundKind(str, Enum):
    GENERALIZATION = "generalization"
    CAUSAL_POSITIVITY = "causal_positivity"
    CAUSAL_NON_POSITIVITY = "causal_non_positivity"


@dataclass(frozen=True)
class ErrorMeasurements:
    """Per-sample evaluation losses, optionally with signed residuals.

    ``iide_claimed`` records whether the caller asserts the losses are
    independent and identically distributed; ``iris_claimed`` whether the
    evaluated subjects were independently, randomly, identically sampled.
    ``loss_scale`` is the declared divisor that brought raw losses into
    [0, 1] (1.0 when they were already in range).
    """

    losses: np.ndarray
    signed_residuals: Optional[np.ndarray] = None
    iide_claimed: bool = False
    iris_claimed: bool = False
    loss_scale: float = 1.0

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=np.float64)
        object.__setattr__(self, "losses", losses)
        if losses.ndim != 1 or losses.size < 1:
            raise InputError("losses must be a nonempty 1-D array")
        if not np.all(np.isfinite(losses)):
            raise InputError("losses must be finite")
        if losses.min() < 0.0 or losses.max() > 1.0:
            raise InputError("losses must lie in [0, 1]; normalize first")
        if self.signed_residuals is not None:
            res = np.asarray(self.signed_residuals, dtype=np.float64)
            object.__setattr__(self, "signed_residuals", res)
            if res.shape != losses.shape:
                raise InputError("signed_residuals must parallel losses")
        if not (self.loss_scale > 0.0 and math.isfinite(self.loss_scale)):
            raise InputError("loss_scale must be positive and finite")

    @property
    def n(self) -> int:
        return int(self.losses.size)

    @property
    def e_emp(self) -> float:
        return float(self.losses.mean())


@dataclass(frozen=True)
class BoundReport:
    kind: BoundKind
    e_emp: float
    n: int
    sigma: float
    epsilon: float
    bound: float
    n_a: Optional[int] = None
    n_b: Optional[int] = None
    e_emp_a: Optional[float] = None
    e_emp_b: Optional[float] = None
    warnings: tuple = field(default=())

    def to_json(self) -> dict:
        out = {
            "kind": self.kind.value,
            "e_emp": self.e_emp,
            "n": self.n,
            "sigma": self.sigma,
            "epsilon": self.epsilon,
            "bound": self.bound,
            "warnings": list(self.warnings),
        }
        if self.kind is BoundKind.CAUSAL_POSITIVITY:
            out.update(n_a=self.n_a, n_b=self.n_b, e_emp_a=self.e_emp_a, e_emp_b=self.e_emp_b)
        return out


def epsilon(n: int, sigma: float) -> float:
    """Hoeffding half-width sqrt(ln(1/sigma) / (2n)) for losses in [0, 1]."""
    if n < 1:
        raise InputError("n must be >= 1")
    if not (0.0 < sigma <= 1.0):
        raise InputError("sigma must lie in (0, 1]")
    return math.sqrt(math.log(1.0 / sigma) / (2.0 * n))


def _check_sigma(sigma: float) -> None:
    if not (0.0 < sigma < 1.0):
        raise InputError("sigma must lie in (0, 1)")


def generalization_bound(errors: ErrorMeasurements, sigma: float) -> BoundReport:
    """Upper bound on expected loss: holds with probability >= 1 - sigma."""
    _check_sigma(sigma)
    warnings = () if errors.iide_claimed else ("iide_not_claimed",)
    eps = epsilon(errors.n, sigma)
    return BoundReport(
        kind=BoundKind.GENERALIZATION,
        e_emp=errors.e_emp,
        n=errors.n,
        sigma=sigma,
        epsilon=eps,
        bound=errors.e_emp + eps,
        warnings=warnings,
    )


def causal_bound_nonpositivity(errors: ErrorMeasurements, sigma: float) -> BoundReport:
    """Bound on the error of predicted pairwise effects when neither subject of
    the pair has its own error measurements; losses must be squared errors."""
    _check_sigma(sigma)
    warnings = []
    if not errors.iide_claimed:
        warnings.append("iide_not_claimed")
    if not errors.iris_claimed:
        warnings.append("iris_not_claimed")
    eps = epsilon(errors.n, sigma)
    return BoundReport(
        kind=BoundKind.CAUSAL_NON_POSITIVITY,
        e_emp=errors.e_emp,
        n=errors.n,
        sigma=sigma,
        epsilon=eps,
        bound=2.0 * (errors.e_emp + eps),
        warnings=tuple(warnings),
    )


def causal_bound_positivity(
    errors_a: ErrorMeasurements, errors_b: ErrorMeasurements, sigma: float
) -> BoundReport:
    """Effect-error bound when both subjects have their own measurements:
    twice the worse of the two per-arm terms, each at confidence ln(2/sigma)."""
    _check_sigma(sigma)
    warnings = []
    if not (errors_a.iide_claimed and errors_b.iide_claimed):
        warnings.append("iide_not_claimed")
    half_log = math.log(2.0 / sigma)
    term_a = errors_a.e_emp + math.sqrt(half_log / (2.0 * errors_a.n))
    term_b = errors_b.e_emp + math.sqrt(half_log / (2.0 * errors_b.n))
    binding = errors_a if term_a >= term_b else errors_b
    binding_term = max(term_a, term_b)
    return BoundReport(
        kind=BoundKind.CAUSAL_POSITIVITY,
        e_emp=binding.e_emp,
        n=binding.n,
        sigma=sigma,
        epsilon=binding_term - binding.e_emp,
        bound=2.0 * binding_term,
        n_a=errors_a.n,
        n_b=errors_b.n,
        e_emp_a=errors_a.e_emp,
        e_emp_b=errors_b.e_emp,
        warnings=tuple(warnings),
    )


def required_n(target_epsilon: float, sigma: float) -> int:
    """Smallest n with epsilon(n, sigma) <= target_epsilon."""
    if not (target_epsilon > 0.0):
        raise InputError("target_epsilon must be positive")
    if not (0.0 < sigma <= 1.0):
        raise InputError("sigma must lie in (0, 1]")
    if sigma == 1.0:
        return 1
    n = max(1, math.ceil(math.log(1.0 / sigma) / (2.0 * target_epsilon**2)))
    # Guard the ceiling against floating-point edge cases.
    while epsilon(n, sigma) > target_epsilon:
        n += 1
    while n > 1 and epsilon(n - 1, sigma) <= target_epsilon:
        n -= 1
    return n


# Grid used by the quick-reference tables: sample counts and confidences.
TABLE_NS = (10, 20, 30, 100, 1000, 10**4, 10**5, 10**6, 10**7, 10**8, 10**9)
TABLE_SIGMAS = (0.5, 0.05, 0.01, 0.001)


def format_3sig(x: float) -> str:
    """Format to three significant figures without scientific notation."""
    if x == 0.0:
        return "0.00"
    decimals = max(0, 2 - math.floor(math.log10(abs(x))))
    return f"{x:.{decimals}f}"


def bound_table(
    kind: BoundKind,
    sigmas: Sequence[float] = TABLE_SIGMAS,
    ns: Sequence[int] = TABLE_NS,
) -> list[list[str]]:
    """Rows of formatted cells, one row per n: generalization cells read
    "E+<eps>", effect cells "2E+<2 eps>"."""
    if kind is BoundKind.CAUSAL_POSITIVITY:
        raise InputError("tables are defined for generalization and non-positivity kinds")
    rows = []
    for n in ns:
        row = [str(n)]
        for sigma in sigmas:
            eps = epsilon(n, sigma)
            if kind is BoundKind.GENERALIZATION:
                row.append("E+" + format_3sig(eps))
            else:
                row.append("2E+" + format_3sig(2.0 * eps))
        rows.append(row)
    return rows
