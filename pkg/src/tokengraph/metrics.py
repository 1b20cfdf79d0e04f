"""Accuracy, macro F1, and Welch's t-test with Bonferroni correction.

The two-sided p-value comes from the regularized incomplete beta
function, evaluated with the continued-fraction expansion (accurate to
about 1e-10 for df >= 1), so no external statistics package is needed at
runtime; the test suite cross-checks against one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ValidationError

VARIANCE_FLOOR = 1e-12


@dataclass
class ConfusionCounts:
    """Per-class TP/FP/FN tallies over a fixed label set of size n_classes."""

    tp: list[int]
    fp: list[int]
    fn: list[int]
    n_classes: int


def _check_labels(preds: Sequence[int], golds: Sequence[int], n_classes: int) -> None:
    for name, values in (("preds", preds), ("golds", golds)):
        for v in values:
            if not 0 <= v < n_classes:
                raise ValidationError(f"{name} contain label {v} outside [0, {n_classes})")


def confusion_counts(preds: Sequence[int], golds: Sequence[int], n_classes: int) -> ConfusionCounts:
    if len(preds) != len(golds):
        raise ValidationError(f"length mismatch: {len(preds)} preds vs {len(golds)} golds")
    _check_labels(preds, golds, n_classes)
    tp = [0] * n_classes
    fp = [0] * n_classes
    fn = [0] * n_classes
    for p, g in zip(preds, golds):
        if p == g:
            tp[p] += 1
        else:
            fp[p] += 1
            fn[g] += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, n_classes=n_classes)


def accuracy(preds: Sequence[int], golds: Sequence[int]) -> float:
    if len(preds) != len(golds):
        raise ValidationError(f"length mismatch: {len(preds)} preds vs {len(golds)} golds")
    if not preds:
        raise ValidationError("accuracy of an empty prediction list is undefined")
    return sum(p == g for p, g in zip(preds, golds)) / len(preds)


def macro_f1(preds: Sequence[int], golds: Sequence[int], n_classes: int) -> float:
    """Unweighted mean of per-class F1 over all n_classes classes.

    A class with no true positives scores F1 = 0, including classes absent
    from both predictions and gold labels, so the average always runs over
    the fixed label set.
    """
    counts = confusion_counts(preds, golds, n_classes)
    total = 0.0
    for c in range(n_classes):
        tp, fp, fn = counts.tp[c], counts.fp[c], counts.fn[c]
        if tp > 0:
            total += 2.0 * tp / (2.0 * tp + fp + fn)
    return total / n_classes


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    max_iter = 300
    eps = 1e-15
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        num = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + num * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + num / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        num = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + num * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + num / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the continued fraction, symmetric form for stability."""
    if a <= 0 or b <= 0:
        raise ValidationError("incomplete beta requires a > 0 and b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided tail probability of Student's t via I_x(df/2, 1/2)."""
    if df <= 0:
        raise ValidationError(f"degrees of freedom must be positive, got {df}")
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


@dataclass
class WelchResult:
    t: float
    df: float
    p: float
    significant: bool
    variance_floored: bool


def welch_t_test(
    samples_a: Sequence[float],
    samples_b: Sequence[float],
    alpha: float = 0.05,
    bonferroni_m: int = 1,
) -> WelchResult:
    """Unpaired two-sample Welch t-test with Bonferroni-corrected verdict.

    Variances are floored at 1e-12 so all-constant inputs stay defined:
    equal constants give t = 0, different constants a very large |t|.
    """
    na, nb = len(samples_a), len(samples_b)
    if na < 2 or nb < 2:
        raise ValidationError("welch_t_test needs at least 2 samples per group")
    if bonferroni_m < 1:
        raise ValidationError(f"bonferroni_m must be >= 1, got {bonferroni_m}")
    mean_a = sum(samples_a) / na
    mean_b = sum(samples_b) / nb
    var_a = sum((x - mean_a) ** 2 for x in samples_a) / (na - 1)
    var_b = sum((x - mean_b) ** 2 for x in samples_b) / (nb - 1)
    floored = var_a < VARIANCE_FLOOR or var_b < VARIANCE_FLOOR
    var_a = max(var_a, VARIANCE_FLOOR)
    var_b = max(var_b, VARIANCE_FLOOR)
    sa, sb = var_a / na, var_b / nb
    t = (mean_a - mean_b) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa * sa / (na - 1) + sb * sb / (nb - 1))
    p = student_t_sf_two_sided(t, df)
    return WelchResult(
        t=t,
        df=df,
        p=p,
        significant=p < alpha / bonferroni_m,
        variance_floored=floored,
    )
