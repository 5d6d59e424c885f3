"""Repeated-measures ANOVA, Bonferroni post hoc tests, Pearson correlation.

Tail probabilities come from a self-contained regularized incomplete beta
implementation (continued fraction with the standard symmetry switch), so the
module carries no statistics dependency and the df1=2 closed form stays
testable exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError

_BETA_TOL = 1e-12
_BETA_MAX_ITER = 500


@dataclass(frozen=True)
class WithinSubjectsTable:
    """n x k matrix of one metric: rows are subjects, columns conditions."""

    values: np.ndarray
    condition_labels: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D matrix")
        n, k = values.shape
        # n == 1 is representable so incomplete experiments can still be
        # tabulated; the ANOVA itself rejects it (no error df)
        if n < 1 or k < 2:
            raise ValueError("need at least 1 subject and 2 conditions")
        if len(self.condition_labels) != k:
            raise ValueError("one label per condition required")
        if not np.isfinite(values).all():
            raise ValueError("table has missing or non-finite cells")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "condition_labels", tuple(self.condition_labels))


@dataclass(frozen=True)
class AnovaResult:
    F: float
    df_effect: int
    df_error: int
    p: float
    eta_g_squared: float
    ss_effect: float
    ss_subjects: float
    ss_error: float
    ss_total: float


@dataclass(frozen=True)
class PairResult:
    pair: tuple[str, str]
    t: float
    df: int
    p_raw: float
    p_adjusted: float
    error: str | None = None


@dataclass(frozen=True)
class PosthocResult:
    pairs: tuple[PairResult, ...]


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_TOL:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_upper_tail(f_value: float, df1: int, df2: int) -> float:
    """P(F_{df1, df2} > f_value)."""
    if df1 < 1 or df2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if f_value < 0:
        raise ValueError("F statistic must be nonnegative")
    if f_value == 0.0:
        return 1.0
    if math.isinf(f_value):
        return 0.0
    x = df2 / (df2 + df1 * f_value)
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x)


def t_two_sided(t_value: float, df: int) -> float:
    """Two-sided p for a t statistic."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if math.isinf(t_value):
        return 0.0
    x = df / (df + t_value * t_value)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def rm_anova(table: WithinSubjectsTable) -> AnovaResult:
    """One-way repeated-measures ANOVA with generalized eta squared.

    Sums of squares partition as SS_total = SS_effect + SS_subjects +
    SS_error with df = (k-1, (n-1)(k-1)); eta_g^2 uses
    SS_effect / (SS_effect + SS_subjects + SS_error).
    """
    x = table.values
    n, k = x.shape
    grand = x.mean()
    row_means = x.mean(axis=1)
    col_means = x.mean(axis=0)
    ss_subjects = k * float(((row_means - grand) ** 2).sum())
    ss_effect = n * float(((col_means - grand) ** 2).sum())
    ss_total = float(((x - grand) ** 2).sum())
    ss_error = ss_total - ss_subjects - ss_effect
    df_effect = k - 1
    df_error = (n - 1) * (k - 1)
    if df_error < 1:
        raise DegenerateDataError("no error degrees of freedom")
    if ss_error <= 1e-12 * max(ss_total, 1.0):
        raise DegenerateDataError("zero error variance: F undefined")
    f_value = (ss_effect / df_effect) / (ss_error / df_error)
    denom = ss_effect + ss_subjects + ss_error
    return AnovaResult(
        F=f_value,
        df_effect=df_effect,
        df_error=df_error,
        p=f_upper_tail(f_value, df_effect, df_error),
        eta_g_squared=ss_effect / denom if denom > 0 else 0.0,
        ss_effect=ss_effect,
        ss_subjects=ss_subjects,
        ss_error=ss_error,
        ss_total=ss_total,
    )


def paired_t(a: np.ndarray, b: np.ndarray) -> tuple[float, int, float]:
    """Paired t test; returns (t, df, two-sided p)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("inputs must be equal-length 1-D arrays with n >= 2")
    d = a - b
    n = len(d)
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise DegenerateDataError("zero variance of differences")
    t_value = float(d.mean()) / (sd / math.sqrt(n))
    df = n - 1
    return t_value, df, t_two_sided(t_value, df)


def bonferroni_posthoc(table: WithinSubjectsTable) -> PosthocResult:
    """Paired t tests for all condition pairs with Bonferroni adjustment."""
    x = table.values
    labels = table.condition_labels
    k = x.shape[1]
    m = k * (k - 1) // 2
    results = []
    for j1 in range(k):
        for j2 in range(j1 + 1, k):
            pair = (labels[j1], labels[j2])
            try:
                t_value, df, p_raw = paired_t(x[:, j1], x[:, j2])
            except (DegenerateDataError, ValueError) as exc:
                results.append(PairResult(pair, math.nan, x.shape[0] - 1, math.nan,
                                          math.nan, error=str(exc)))
                continue
            results.append(PairResult(pair, t_value, df, p_raw, min(1.0, m * p_raw)))
    return PosthocResult(pairs=tuple(results))


def pearson_r(a: np.ndarray, b: np.ndarray) -> float:
    """Sample Pearson correlation coefficient."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("inputs must be equal-length 1-D arrays with n >= 2")
    da = a - a.mean()
    db = b - b.mean()
    na = float(np.sqrt((da**2).sum()))
    nb = float(np.sqrt((db**2).sum()))
    if na == 0.0 or nb == 0.0:
        raise DegenerateDataError("constant input: correlation undefined")
    return float(np.clip((da @ db) / (na * nb), -1.0, 1.0))


def summarize_conditions(
    tables: dict[str, WithinSubjectsTable],
) -> tuple[str, str]:
    """Mean +/- sd of each metric per condition, as (csv, aligned text).

    All tables must share one condition-label tuple; rows are metrics.
    """
    if not tables:
        raise ValueError("no metrics to summarize")
    labels = None
    for t in tables.values():
        if labels is None:
            labels = t.condition_labels
        elif t.condition_labels != labels:
            raise ValueError("metric tables disagree on condition labels")
    csv_lines = ["metric," + ",".join(f"{lab}_mean,{lab}_sd" for lab in labels)]
    name_w = max(len(m) for m in tables) + 2
    col_w = 19
    text_lines = [
        "".ljust(name_w) + "".join(lab.center(col_w) for lab in labels),
    ]
    for metric, t in tables.items():
        means = t.values.mean(axis=0)
        sds = t.values.std(axis=0, ddof=1 if t.values.shape[0] > 1 else 0)
        csv_lines.append(
            metric + "," + ",".join(f"{m:.6g},{s:.6g}" for m, s in zip(means, sds))
        )
        text_lines.append(
            metric.ljust(name_w)
            + "".join(f"{m:.4f} ± {s:.4f}".center(col_w) for m, s in zip(means, sds))
        )
    return "\n".join(csv_lines) + "\n", "\n".join(text_lines) + "\n"
