"""
Validation statistics: Spearman's rank correlation and the paired Student t-test.

Only numpy/pandas are used at runtime; p-values come from a Student t survival
function built on the regularized incomplete beta function.
"""
import itertools
import logging
import math
from typing import Sequence, Tuple
import numpy as np
import pandas as pd
from tldrisk.exceptions import (
    ConvergenceError,
    DegenerateInputError,
    LengthMismatchError,
    ScoreRangeError,
)
from tldrisk.types.tldr import StatMethodEnum, StatResult

logger = logging.getLogger(__name__)

INCOMPLETE_BETA_MAX_ITERATIONS = 300
INCOMPLETE_BETA_TOLERANCE = 1e-12
# Guards the continued fraction's denominators against zero.
_LENTZ_FLOOR = 1e-300
EXACT_PERMUTATION_MAX_N = 10
_PERMUTATION_CHUNK = 50_000
# Paired differences whose spread is this small relative to their size count as constant.
_CONSTANT_SPREAD_RATIO = 1e-12

def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """
    Continued fraction for the incomplete beta function, by the modified Lentz scheme.
    """
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _LENTZ_FLOOR:
        d = _LENTZ_FLOOR
    d = 1.0 / d
    h = d

    for m in range(1, INCOMPLETE_BETA_MAX_ITERATIONS + 1):
        m2 = 2 * m
        # Even step.
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _LENTZ_FLOOR:
            d = _LENTZ_FLOOR
        c = 1.0 + aa / c
        if abs(c) < _LENTZ_FLOOR:
            c = _LENTZ_FLOOR
        d = 1.0 / d
        h *= d * c
        # Odd step.
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _LENTZ_FLOOR:
            d = _LENTZ_FLOOR
        c = 1.0 + aa / c
        if abs(c) < _LENTZ_FLOOR:
            c = _LENTZ_FLOOR
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < INCOMPLETE_BETA_TOLERANCE:
            return h

    raise ConvergenceError(
        f"incomplete beta continued fraction did not converge in {INCOMPLETE_BETA_MAX_ITERATIONS} "
        f"iterations (a={a}, b={b}, x={x})"
    )

def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """
    Computes the regularized incomplete beta function I_x(a, b).

    Args:
        x (float): Upper integration limit, in [0, 1].
        a (float): First shape parameter, > 0.
        b (float): Second shape parameter, > 0.

    Returns:
        value (float): I_x(a, b), in [0, 1].
    """
    if a <= 0 or b <= 0:
        raise ScoreRangeError(f"beta shape parameters must be positive (a={a}, b={b})")
    if not 0.0 <= x <= 1.0:
        raise ScoreRangeError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0

    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # The fraction converges fast on this side of the mean; use symmetry otherwise.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b

def student_t_sf(t: float, df: float) -> float:
    """
    Upper-tail probability P(T > t) of Student's t distribution.

    Args:
        t (float): The statistic.
        df (float): Degrees of freedom, >= 1.

    Returns:
        p (float): Survival function value in [0, 1].
    """
    if df < 1:
        raise ScoreRangeError(f"degrees of freedom must be >= 1, got {df}")
    if math.isnan(t):
        raise DegenerateInputError("t statistic is NaN")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0

    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(x, df / 2.0, 0.5)
    return tail if t >= 0 else 1.0 - tail

def _as_pair(x: Sequence[float], y: Sequence[float], min_n: int) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise LengthMismatchError("expected one-dimensional vectors")
    if len(x) != len(y):
        raise LengthMismatchError(f"vectors differ in length ({len(x)} vs {len(y)})")
    if len(x) < min_n:
        raise DegenerateInputError(f"need at least {min_n} pairs, got {len(x)}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise DegenerateInputError("vectors must be finite")
    return x, y

def average_ranks(values: Sequence[float]) -> np.ndarray:
    """Fractional ranks starting at 1; tied values share the mean of their ranks."""
    return pd.Series(values, dtype=float).rank(method="average").to_numpy()

def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Spearman's rank correlation: the Pearson correlation of average ranks.

    Args:
        x (Sequence[float]): First vector, length n >= 3, not constant.
        y (Sequence[float]): Second vector, same length, not constant.

    Returns:
        rho (float): Correlation in [-1, 1].
    """
    x, y = _as_pair(x, y, min_n=3)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInputError("Spearman's rho is undefined for a constant vector")

    rx = average_ranks(x)
    ry = average_ranks(y)
    n = len(rx)
    # Identical or mirrored rankings are exactly monotone; skip round-off.
    if np.array_equal(rx, ry):
        return 1.0
    if np.array_equal(rx, n + 1 - ry):
        return -1.0

    rho = np.corrcoef(rx, ry)[0, 1]
    return float(np.clip(rho, -1.0, 1.0))

def spearman_pvalue(rho: float, n: int) -> float:
    """
    Two-sided p-value of Spearman's rho via the t approximation with n - 2 degrees of freedom.

    Args:
        rho (float): Observed correlation.
        n (int): Sample size, >= 4.

    Returns:
        p (float): Two-sided p-value; 0.0 when |rho| = 1.
    """
    if n < 4:
        raise DegenerateInputError(f"the t approximation needs n >= 4, got {n}")
    if abs(rho) > 1.0:
        raise ScoreRangeError(f"rho must lie in [-1, 1], got {rho}")
    if abs(rho) == 1.0:
        return 0.0

    df = n - 2
    t = rho * math.sqrt(df / (1.0 - rho * rho))
    return min(1.0, 2.0 * student_t_sf(abs(t), df))

def spearman_test(x: Sequence[float], y: Sequence[float]) -> StatResult:
    """
    Spearman's rho with its t-approximation p-value.

    Returns:
        result (StatResult): `exact_monotone` is set when the rankings agree (or mirror) exactly.
    """
    rho = spearman_rho(x, y)
    n = len(x)
    return {
        "statistic": rho,
        "p_value": spearman_pvalue(rho, n),
        "df": n - 2,
        "method": StatMethodEnum.SPEARMAN_T_APPROX,
        "exact_monotone": abs(rho) == 1.0,
    }

def spearman_exact_pvalue(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Two-sided permutation p-value of Spearman's rho, enumerating every reordering of `y`.

    Only practical for small samples (n <= 10).

    Returns:
        p (float): Share of permutations with |rho| at least the observed |rho|.
    """
    x, y = _as_pair(x, y, min_n=3)
    n = len(x)
    if n > EXACT_PERMUTATION_MAX_N:
        raise ScoreRangeError(f"exact permutation test supports n <= {EXACT_PERMUTATION_MAX_N}, got {n}")
    observed = abs(spearman_rho(x, y))

    # The Pearson denominator is permutation invariant, so only the cross product varies.
    cx = average_ranks(x)
    cx = cx - cx.mean()
    cy = average_ranks(y)
    cy = cy - cy.mean()
    denominator = math.sqrt(float(cx @ cx) * float(cy @ cy))

    extreme = 0
    total = 0
    permutations = itertools.permutations(cy)
    while True:
        chunk = np.array(list(itertools.islice(permutations, _PERMUTATION_CHUNK)))
        if chunk.size == 0:
            break
        rhos = np.abs(chunk @ cx) / denominator
        extreme += int(np.count_nonzero(rhos >= observed - 1e-12))
        total += len(chunk)

    return extreme / total

def paired_t_test(x: Sequence[float], y: Sequence[float]) -> StatResult:
    """
    Paired Student t-test on d = x - y, with the sample (n - 1) standard deviation.

    Args:
        x (Sequence[float]): First vector, length n >= 2.
        y (Sequence[float]): Second vector, same length.

    Returns:
        result (StatResult): t, its two-sided p-value, and df = n - 1. Identical vectors give t = 0, p = 1.
    """
    x, y = _as_pair(x, y, min_n=2)
    n = len(x)
    d = x - y
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    scale = float(np.max(np.abs(d)))

    if scale == 0.0:
        t, p = 0.0, 1.0
    elif sd <= _CONSTANT_SPREAD_RATIO * scale:
        raise DegenerateInputError(
            f"paired differences are constant ({mean:g}); the t statistic is undefined"
        )
    else:
        t = mean / (sd / math.sqrt(n))
        p = min(1.0, 2.0 * student_t_sf(abs(t), n - 1))

    return {
        "statistic": t,
        "p_value": p,
        "df": n - 1,
        "method": StatMethodEnum.PAIRED_T,
        "exact_monotone": False,
    }
