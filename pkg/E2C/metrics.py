"""Evaluation statistics: R2, RMSE, MAPE, MASE, truncated means, averaged correlations and descriptive tables"""

import logging
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import stats

from E2C.exceptions import DomainError

log = logging.getLogger(__name__)

BY_FIRM = 'by_firm'
BY_DATE = 'by_date'

MASE_NOTE = ("MASE scale: per-firm mean absolute one-step (lag-1 by date) naive error of the observed CDS, "
             "averaged over firms with at least two dates")


@dataclass(frozen=True, eq=False)
class PairedSeries:
    """
    Observed and predicted spreads (bps) with the (firm, date) key of each row

    :param firm_ids: firm of each row
    :param dates: date of each row (any sortable representation, e.g. ISO strings)
    :param actual: observed values
    :param predicted: predicted values
    """

    firm_ids: np.ndarray
    dates: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):

        n = self.actual.shape[0]

        if n == 0 or self.predicted.shape[0] != n or self.firm_ids.shape[0] != n or self.dates.shape[0] != n:

            raise DomainError("Paired series need equal lengths >= 1")

        if not (np.all(np.isfinite(self.actual)) and np.all(np.isfinite(self.predicted))):

            raise DomainError("Paired series contain non-finite values")

    @classmethod
    def build(cls, actual, predicted, firm_ids=None, dates=None):

        actual = np.asarray(actual, dtype=float)
        predicted = np.asarray(predicted, dtype=float)

        n = actual.shape[0]

        firm_ids = np.asarray(firm_ids if firm_ids is not None else ['firm'] * n)
        dates = np.asarray(dates if dates is not None else np.arange(n))

        return cls(firm_ids=firm_ids, dates=dates, actual=actual, predicted=predicted)

    def __len__(self):

        return self.actual.shape[0]

    def take(self, rows):

        return PairedSeries(self.firm_ids[rows], self.dates[rows], self.actual[rows], self.predicted[rows])


def r_squared(series):
    """
    1 - sum((y - y_hat)^2) / sum((y - mean(y))^2). It can be negative for predictors worse than the mean.

    :param series: a PairedSeries with at least 2 rows and non-constant actual values
    :return: the R2
    """

    y, y_hat = series.actual, series.predicted

    if y.shape[0] < 2:

        raise DomainError("R2 needs at least 2 rows")

    total = np.sum((y - y.mean()) ** 2)

    if total == 0:

        raise DomainError("R2 is undefined when the actual values are all equal")

    return float(1.0 - np.sum((y - y_hat) ** 2) / total)


def rmse(series):
    """Root mean squared error"""

    return float(np.sqrt(np.mean((series.actual - series.predicted) ** 2)))


def mape(series):
    """Mean of |y - y_hat| / |y| (a fraction, not a percentage)"""

    if np.any(series.actual == 0):

        raise DomainError("MAPE is undefined when an actual value is 0")

    return float(np.mean(np.abs(series.actual - series.predicted) / np.abs(series.actual)))


def naive_scale(series):
    """
    Denominator of the MASE: for each firm with at least 2 dates, the mean absolute difference between consecutive
    (date-sorted) observed values, then averaged over those firms.
    """

    scales = []

    for firm in np.unique(series.firm_ids):

        rows = np.nonzero(series.firm_ids == firm)[0]

        if rows.shape[0] < 2:

            continue

        values = series.actual[rows[np.argsort(series.dates[rows], kind='stable')]]

        scales.append(np.mean(np.abs(np.diff(values))))

    if len(scales) == 0:

        raise DomainError("MASE needs at least one firm observed on two dates")

    return float(np.mean(scales))


def mase(series):
    """Mean absolute error scaled by naive_scale (see MASE_NOTE)"""

    scale = naive_scale(series)

    if scale == 0:

        raise DomainError("MASE is undefined when every firm's observed series is constant")

    return float(np.mean(np.abs(series.actual - series.predicted)) / scale)


def truncated_mean(values, trim_frac=0.1):
    """
    Mean after sorting and dropping floor(trim_frac * n) values at each end

    :param values: non-empty sequence
    :param trim_frac: fraction cut at each end, in [0, 0.5)
    :return: the truncated mean
    """

    values = np.asarray(values, dtype=float)

    if values.size == 0:

        raise DomainError("Truncated mean of an empty list")

    if not 0 <= trim_frac < 0.5:

        raise DomainError("Trim fraction must be in [0, 0.5), got %s" % trim_frac)

    return float(stats.trim_mean(values, trim_frac))


def trim_extremes(values, trim_frac=0.1):
    """Indices of the values left after dropping the floor(trim_frac * n) smallest and largest ones"""

    values = np.asarray(values, dtype=float)

    cut = int(np.floor(trim_frac * values.shape[0]))

    order = np.argsort(values, kind='stable')

    return np.sort(order[cut:values.shape[0] - cut])


def _pearson(a, b):

    return float(np.corrcoef(a, b)[0, 1])


def avg_correlation(series_by_group, mode=BY_FIRM):
    """
    Mean over groups of the Pearson correlation between two vectors. Groups with less than 2 points or with a
    constant vector are skipped with a warning.

    :param series_by_group: mapping group -> (vector a, vector b)
    :param mode: BY_FIRM or BY_DATE (only used in messages)
    :return: the averaged correlation
    """

    correlations = []
    skipped = 0

    for group in sorted(series_by_group):

        a, b = (np.asarray(v, dtype=float) for v in series_by_group[group])

        if a.shape[0] < 2 or np.all(a == a[0]) or np.all(b == b[0]):

            skipped += 1

            continue

        correlations.append(_pearson(a, b))

    if skipped > 0:

        log.warning("Correlation %s: %s degenerate group(s) skipped out of %s" % (mode, skipped, len(series_by_group)))

    if len(correlations) == 0:

        raise DomainError("Correlation %s: every group is degenerate" % mode)

    return float(np.mean(correlations))


def grouped_correlation(series, mode=BY_FIRM):
    """
    Average correlation between actual and predicted values, computed per firm over time (BY_FIRM) or per date over
    firms (BY_DATE)

    :param series: a PairedSeries
    :param mode: BY_FIRM or BY_DATE
    :return: the averaged correlation
    """

    if mode == BY_FIRM:

        keys = series.firm_ids

    elif mode == BY_DATE:

        keys = series.dates

    else:

        raise DomainError("Unknown correlation mode %s" % mode)

    groups = {}

    for key in np.unique(keys):

        rows = keys == key

        groups[key] = (series.actual[rows], series.predicted[rows])

    return avg_correlation(groups, mode)


def descriptive_statistics(values, firm_ids, dates):
    """
    Descriptive statistics of a panel variable: counts, mean, overall/between/within standard deviations,
    quartiles, skewness and kurtosis (not in excess).

    The between std is the std of the firm means; the within std is the std of the deviations from the firm means
    (re-centered on the grand mean).

    :param values: observations
    :param firm_ids: firm of each observation
    :param dates: date of each observation
    :return: an OrderedDict statistic name -> value
    """

    values = np.asarray(values, dtype=float)
    firm_ids = np.asarray(firm_ids)

    if values.size == 0:

        raise DomainError("No observation to describe")

    firms, inverse = np.unique(firm_ids, return_inverse=True)

    firm_means = np.bincount(inverse, weights=values) / np.bincount(inverse)

    within = values - firm_means[inverse] + values.mean()

    ddof = 1 if values.size > 1 else 0

    result = OrderedDict()

    result['obs'] = int(values.size)
    result['firms'] = int(firms.size)
    result['periods'] = int(np.unique(np.asarray(dates)).size)
    result['mean'] = float(values.mean())
    result['std_overall'] = float(values.std(ddof=ddof))
    result['std_between'] = float(firm_means.std(ddof=1 if firms.size > 1 else 0))
    result['std_within'] = float(within.std(ddof=ddof))
    result['min'] = float(values.min())
    result['q25'] = float(np.percentile(values, 25))
    result['q50'] = float(np.median(values))
    result['q75'] = float(np.percentile(values, 75))
    result['max'] = float(values.max())
    result['skew'] = float(stats.skew(values)) if values.size > 2 else float('nan')
    result['kurt'] = float(stats.kurtosis(values, fisher=False)) if values.size > 3 else float('nan')

    return result
