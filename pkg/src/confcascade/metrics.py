"""Macro-F1, per-fold summaries with 95% confidence intervals, paired t-tests.

All effectiveness numbers in this package flow through macro_f1; the
cross-fold reporting mirrors the usual mean +/- t-interval layout. Critical
t values come from a built-in two-sided 95% table (df 1-30, normal
approximation beyond) so the metric contract carries no numerical-library
dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

# Two-sided 95% Student t critical values, df 1..30.
_T_CRIT_95 = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
    2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
]
_Z_95 = 1.960


class MetricsError(ValueError):
    pass


def critical_t(df: int, alpha: float = 0.05) -> float:
    """Two-sided critical t value; tabled for df 1-30, normal beyond."""
    if alpha != 0.05:
        raise MetricsError(f"only alpha=0.05 is supported, got {alpha}")
    if df < 1:
        raise MetricsError(f"degrees of freedom must be >= 1, got {df}")
    return _T_CRIT_95[df - 1] if df <= 30 else _Z_95


def macro_f1(y_true: list[int], y_pred: list[int], n_classes: int) -> float:
    """Unweighted mean of per-class F1 over all n_classes classes.

    A class whose precision+recall is zero (or undefined) contributes F1=0;
    classes absent from both y_true and y_pred still count in the mean.
    """
    if len(y_true) != len(y_pred):
        raise MetricsError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if not y_true:
        raise MetricsError("empty input")
    if n_classes < 1:
        raise MetricsError("n_classes must be >= 1")
    tp = [0] * n_classes
    fp = [0] * n_classes
    fn = [0] * n_classes
    for t, p in zip(y_true, y_pred):
        if not (0 <= t < n_classes and 0 <= p < n_classes):
            raise MetricsError(f"label out of range for {n_classes} classes: true={t} pred={p}")
        if t == p:
            tp[t] += 1
        else:
            fp[p] += 1
            fn[t] += 1
    total = 0.0
    for c in range(n_classes):
        denom = 2 * tp[c] + fp[c] + fn[c]
        total += (2 * tp[c] / denom) if denom else 0.0
    return total / n_classes


@dataclass(frozen=True)
class FoldScores:
    method: str
    values: tuple[float, ...]
    mean: float
    ci_half_width: float


def fold_summary(values: list[float], method: str = "") -> FoldScores:
    """Mean and 95% CI half-width (t_{0.975,k-1} * s / sqrt(k)) over k folds."""
    k = len(values)
    if k < 2:
        raise MetricsError(f"need >= 2 fold values, got {k}")
    mean = sum(values) / k
    var = sum((v - mean) ** 2 for v in values) / (k - 1)
    s = math.sqrt(var)
    half = critical_t(k - 1) * s / math.sqrt(k)
    return FoldScores(method=method, values=tuple(values), mean=mean, ci_half_width=half)


class TTestVerdict(Enum):
    A_BETTER = "A_BETTER"
    TIE = "TIE"
    B_BETTER = "B_BETTER"


def paired_t_test(a: list[float], b: list[float], alpha: float = 0.05) -> tuple[TTestVerdict, float]:
    """Paired two-sided t-test on per-fold values.

    Returns (verdict, t). All-zero differences give TIE with t=0; zero
    variance with nonzero mean resolves by the sign of the mean (t is the
    limit, +/-inf).
    """
    if len(a) != len(b):
        raise MetricsError(f"length mismatch: {len(a)} vs {len(b)}")
    k = len(a)
    if k < 2:
        raise MetricsError(f"need >= 2 paired values, got {k}")
    d = [x - y for x, y in zip(a, b)]
    d_mean = sum(d) / k
    var = sum((x - d_mean) ** 2 for x in d) / (k - 1)
    if var == 0.0:
        if d_mean == 0.0:
            return TTestVerdict.TIE, 0.0
        t = math.inf if d_mean > 0 else -math.inf
        return (TTestVerdict.A_BETTER if d_mean > 0 else TTestVerdict.B_BETTER), t
    t = d_mean / (math.sqrt(var) / math.sqrt(k))
    if abs(t) <= critical_t(k - 1, alpha):
        return TTestVerdict.TIE, t
    return (TTestVerdict.A_BETTER if d_mean > 0 else TTestVerdict.B_BETTER), t
