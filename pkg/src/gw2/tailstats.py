"""Empirical tail estimation and prediction diagnostics.

Asymptotic equivalences are checked on a finite window: a threshold enters
the verdict window when it has at least ``min_exceedances`` exceedances and
lies at or above a calibration floor.  Wilson 99% intervals are used
throughout because exceedance counts near the window edge are small.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2 as _chi2

from . import _kernels as _k
from .asymptotics import random_sum_prediction
from .errors import GW2Error
from .laws import pack_laws

WILSON_Z99 = 2.5758293035489004   # two-sided 99% normal quantile


def wilson_interval(count, n, z=WILSON_Z99):
    """Wilson score interval for a binomial proportion."""
    if n <= 0 or not 0 <= count <= n:
        raise GW2Error("need 0 <= count <= n with n > 0")
    phat = count / n
    zz = z * z
    denom = 1.0 + zz / n
    center = (phat + zz / (2.0 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + zz / (4.0 * n * n)) / denom
    # at the boundary counts the interval ends exactly at 0 or 1; the
    # clamped formula can land a rounding error inside
    lo = 0.0 if count == 0 else max(center - half, 0.0)
    hi = 1.0 if count == n else min(center + half, 1.0)
    return lo, hi


@dataclass
class SurvivalEstimate:
    threshold: float
    count: int
    replicates: int
    estimate: float
    ci_low: float
    ci_high: float


def empirical_survival(summary):
    """One Wilson-interval estimate per threshold of an ensemble summary."""
    out = []
    for x, count in zip(summary.thresholds, summary.counts):
        lo, hi = wilson_interval(count, summary.replicates)
        out.append(SurvivalEstimate(
            threshold=x, count=count, replicates=summary.replicates,
            estimate=count / summary.replicates, ci_low=lo, ci_high=hi))
    return out


@dataclass
class RatioRow:
    threshold: float
    estimate: float
    ci_low: float
    ci_high: float
    predicted: float
    ratio: float            # nan when the prediction evaluates to zero
    in_window: bool


@dataclass
class RatioDiagnostic:
    rows: list
    window: tuple           # (x_lo, x_hi) or None
    insufficient_data: bool

    def windowed(self):
        return [r for r in self.rows if r.in_window]

    def max_abs_deviation(self):
        """max |ratio - 1| over the verdict window (nan if empty)."""
        rows = self.windowed()
        if not rows:
            return math.nan
        return max(abs(r.ratio - 1.0) for r in rows)

    def passes(self, tolerance):
        return (not self.insufficient_data) and self.max_abs_deviation() <= tolerance


def ratio_diagnostic(estimates, prediction, law_map, min_exceedances=50, x_floor=0.0):
    """Empirical/predicted survival ratios with a verdict window.

    ``law_map`` maps prediction base names to laws with exact survival
    functions (e.g. ``scenario.base_laws()``).  Thresholds where the
    prediction evaluates to zero are flagged, not crashed on.
    """
    rows = []
    for est in estimates:
        predicted = prediction.evaluate(law_map, est.threshold)
        if predicted > 0.0:
            ratio = est.estimate / predicted
        else:
            ratio = math.nan
        in_window = (predicted > 0.0
                     and est.count >= min_exceedances
                     and est.threshold >= x_floor)
        rows.append(RatioRow(
            threshold=est.threshold, estimate=est.estimate,
            ci_low=est.ci_low, ci_high=est.ci_high,
            predicted=predicted, ratio=ratio, in_window=in_window))
    windowed = [r.threshold for r in rows if r.in_window]
    if windowed:
        return RatioDiagnostic(rows=rows, window=(min(windowed), max(windowed)),
                               insufficient_data=False)
    return RatioDiagnostic(rows=rows, window=None, insufficient_data=True)


def hill_estimate(sample, k):
    """Hill tail-index estimator over the top k order statistics."""
    sample = np.asarray(sample)
    if k < 1 or k >= sample.size:
        raise GW2Error("need 1 <= k < sample size")
    top = np.partition(sample, sample.size - (k + 1))[-(k + 1):]
    top = np.sort(top)
    pivot = top[0]
    if pivot <= 0:
        raise GW2Error("top-(k+1) order statistics must be positive")
    spacings = np.log(top[1:].astype(np.float64)) - math.log(pivot)
    mean_spacing = float(np.mean(spacings))
    if mean_spacing <= 0.0:
        raise GW2Error("degenerate sample: zero log-spacings in the tail")
    return 1.0 / mean_spacing


def sample_random_sum(count_law, summand_law, n_reps, master_seed, workers=None):
    """Random-sum draws S = sum of `count` iid summands, one per replicate."""
    if workers is not None:
        _k.set_workers(workers)
    codes, params, tables, offs = pack_laws([count_law, summand_law])
    return _k.ensemble_random_sum(int(n_reps), codes, params, tables, offs,
                                  np.uint64(master_seed))


def check_random_sum(count_law, summand_law, which, n_reps, thresholds,
                     master_seed=0, min_exceedances=50, x_floor=0.0, workers=None):
    """Simulate a random sum and compare its tail against the predicted one."""
    prediction = random_sum_prediction(count_law, summand_law, which)
    values = sample_random_sum(count_law, summand_law, n_reps, master_seed, workers)
    ovf = values < 0
    estimates = []
    for x in thresholds:
        count = int(np.count_nonzero((values > x) | ovf))
        lo, hi = wilson_interval(count, n_reps)
        estimates.append(SurvivalEstimate(
            threshold=float(x), count=count, replicates=n_reps,
            estimate=count / n_reps, ci_low=lo, ci_high=hi))
    law_map = {"count": count_law, "summand": summand_law}
    diag = ratio_diagnostic(estimates, prediction, law_map,
                            min_exceedances=min_exceedances, x_floor=x_floor)
    return diag, prediction


def two_sample_chi2(hist_a, hist_b, min_expected=5.0):
    """Two-sample chi-square p-value from value histograms.

    Histograms are count arrays indexed by value (align with np.bincount).
    Adjacent bins are pooled left to right until every pooled bin has expected
    count >= ``min_expected`` in both samples; raises when pooling cannot
    reach at least two bins.
    """
    a = np.asarray(hist_a, dtype=np.float64)
    b = np.asarray(hist_b, dtype=np.float64)
    size = max(a.size, b.size)
    a = np.pad(a, (0, size - a.size))
    b = np.pad(b, (0, size - b.size))
    na, nb = a.sum(), b.sum()
    if na <= 0 or nb <= 0:
        raise GW2Error("both histograms must be non-empty")

    pooled_a, pooled_b = [], []
    acc_a = acc_b = 0.0
    for i in range(size):
        acc_a += a[i]
        acc_b += b[i]
        tot = acc_a + acc_b
        if (na * tot / (na + nb) >= min_expected
                and nb * tot / (na + nb) >= min_expected):
            pooled_a.append(acc_a)
            pooled_b.append(acc_b)
            acc_a = acc_b = 0.0
    if acc_a + acc_b > 0:
        if pooled_a:
            pooled_a[-1] += acc_a
            pooled_b[-1] += acc_b
        else:
            raise GW2Error("cannot pool histograms to the expected-count floor")
    if len(pooled_a) < 2:
        raise GW2Error("cannot pool histograms to the expected-count floor")

    pa = np.array(pooled_a)
    pb = np.array(pooled_b)
    tot = pa + pb
    stat = float(np.sum((nb * pa - na * pb) ** 2 / (na * nb * tot)))
    df = len(pooled_a) - 1
    return float(_chi2.sf(stat, df))
