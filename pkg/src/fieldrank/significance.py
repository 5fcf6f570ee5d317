"""Significance testing over per-fold metrics.

Two procedures: a paired t-test for two-model comparisons (the p-value
comes from the Student t CDF, evaluated through a hand-rolled regularized
incomplete beta) and Tukey's HSD for comparing several models at once (the
studentized range distribution is approximated by seeded Monte Carlo).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, UsageError

DEGENERATE_VARIANCE = "degenerate-variance"


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Lentz's continued fraction for the incomplete beta integral."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300

    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise NumericError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not (a > 0 and b > 0):
        raise UsageError(f"beta parameters must be positive, got a={a}, b={b}")
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
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T_df| >= |t|) through the incomplete beta identity."""
    if df < 1:
        raise UsageError(f"degrees of freedom must be >= 1, got {df}")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


@dataclass
class TTestResult:
    t: float
    df: int
    p: float
    flags: tuple[str, ...] = ()


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test on aligned per-fold metrics.

    Zero-variance differences are reported explicitly instead of NaN:
    all-equal differences give t=0, p=1 when the common value is zero and
    p=0 otherwise, both flagged.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise UsageError(f"paired samples must be equal-length vectors, got {a.shape}, {b.shape}")
    n = len(a)
    if n < 2:
        raise UsageError(f"paired t-test needs n >= 2, got n={n}")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, df=df, p=1.0, flags=(DEGENERATE_VARIANCE,))
        return TTestResult(
            t=math.copysign(math.inf, mean), df=df, p=0.0, flags=(DEGENERATE_VARIANCE,)
        )
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t=t, df=df, p=student_t_two_sided_p(t, df))


@dataclass
class TukeyPair:
    i: int
    j: int
    q: float
    p: float
    flags: tuple[str, ...] = ()


def tukey_hsd(groups, draws: int = 200_000, seed: int = 0) -> list[TukeyPair]:
    """Tukey's multiple comparison over equal-size groups of fold metrics.

    The adjusted p-value of each unordered pair is the Monte Carlo tail
    probability of the studentized range: max-min of m standard normals
    divided by sqrt(chi2_df / df), df = m(n-1). All pairs share one seeded
    set of null draws.
    """
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    m = len(arrays)
    if m < 2:
        raise UsageError(f"Tukey's test needs at least 2 groups, got {m}")
    sizes = {len(g) for g in arrays}
    if len(sizes) != 1:
        raise UsageError(f"Tukey's test needs equal group sizes, got {sorted(len(g) for g in arrays)}")
    n = len(arrays[0])
    if n < 2:
        raise UsageError(f"Tukey's test needs group size >= 2, got {n}")
    if draws < 1:
        raise UsageError("Monte Carlo draw count must be positive")

    means = np.array([g.mean() for g in arrays])
    ss_within = float(sum(((g - g.mean()) ** 2).sum() for g in arrays))
    df = m * (n - 1)
    msw = ss_within / df

    # constant groups leave only rounding dust in the within-group deviations
    scale = max(float(np.max(np.abs(a), initial=0.0)) for a in arrays)
    degenerate = msw <= (1e-13 * max(scale, 1e-300)) ** 2

    out: list[TukeyPair] = []
    if degenerate:
        for i in range(m):
            for j in range(i + 1, m):
                equal = means[i] == means[j]
                out.append(
                    TukeyPair(
                        i=i,
                        j=j,
                        q=0.0 if equal else math.inf,
                        p=1.0 if equal else 0.0,
                        flags=(DEGENERATE_VARIANCE,),
                    )
                )
        return out

    se = math.sqrt(msw / n)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((draws, m))
    ranges = z.max(axis=1) - z.min(axis=1)
    scale = np.sqrt(rng.chisquare(df, size=draws) / df)
    null_q = ranges / scale

    for i in range(m):
        for j in range(i + 1, m):
            q = abs(means[i] - means[j]) / se
            p = float(np.mean(null_q >= q))
            out.append(TukeyPair(i=i, j=j, q=q, p=p))
    return out
