"""Comparison reports of the observed CDS against the E2C, CreditGrades and forest approximations"""

import logging
import os
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from astropy.table import Table

from E2C import metrics
from E2C.exceptions import DomainError
from E2C.ratings import BUCKET_NAMES
from E2C.table_io import write_csv

log = logging.getLogger(__name__)

OBSERVED = 'cds'

BY_RATING = 'rating'
BY_SECTOR = 'sector'
BY_COUNTRY = 'country'

CORRELATION_PAIRS = ((OBSERVED, 'e2c'), (OBSERVED, 'creditgrades'), (OBSERVED, 'forest'), ('e2c', 'creditgrades'))


def model_values(matrix, predictions=None):
    """
    Observed and approximated spreads of every row of an encoded matrix

    :param matrix: a FeatureMatrix built from records
    :param predictions: forest predictions for the rows (omitted from the result when None)
    :return: OrderedDict name -> array (missing approximations are NaN)
    """

    def column(name):

        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in matrix.records],
                        dtype=float)

    values = OrderedDict()

    values[OBSERVED] = np.array(matrix.y, dtype=float)
    values['e2c'] = column('e2c_bps')
    values['creditgrades'] = column('creditgrades_bps')

    if predictions is not None:

        values['forest'] = np.asarray(predictions, dtype=float)

    return values


def bucket_labels(matrix, by):
    """Bucket of each row: coarse rating bucket, sector or country"""

    if by == BY_RATING:

        return np.array([r.rating_bucket for r in matrix.records], dtype=object)

    if by in (BY_SECTOR, BY_COUNTRY):

        return np.array([getattr(r, by) for r in matrix.records], dtype=object)

    raise DomainError("Unknown bucket kind %s" % by)


def _bucket_order(labels, by):

    present = set(labels.tolist())

    if by == BY_RATING:

        return [name for name in BUCKET_NAMES if name in present]

    return sorted(present)


def _table(rows, names, n_text=1):
    """Table from rows; an empty one keeps its column names (n_text leading text columns, then obs, then floats)"""

    if len(rows) > 0:

        return Table(rows=rows, names=names)

    dtypes = [str] * n_text + [int] + [float] * (len(names) - n_text - 1)

    return Table(names=names, dtype=dtypes)


def _large_enough(n, trim_frac, bucket):

    if trim_frac > 0 and n < 1.0 / trim_frac:

        log.warning("Bucket %s skipped: %s rows are too few to trim %s%% at each end"
                    % (bucket, n, 100 * trim_frac))

        return False

    return True


def bucket_summary(matrix, values, by, trim_frac=0.1):
    """
    Median and truncated mean of every series, per bucket

    :param matrix: a FeatureMatrix built from records
    :param values: output of model_values
    :param by: BY_RATING, BY_SECTOR or BY_COUNTRY
    :param trim_frac: fraction trimmed at each end for the truncated means
    :return: an astropy Table (bucket, obs, median_<series>, tmean_<series>)
    """

    labels = bucket_labels(matrix, by)

    rows = []

    for bucket in _bucket_order(labels, by):

        selected = labels == bucket

        if not _large_enough(int(selected.sum()), trim_frac, bucket):

            continue

        row = [bucket, int(selected.sum())]

        for name, series in values.items():

            kept = series[selected]
            kept = kept[np.isfinite(kept)]

            row.append(float(np.median(kept)) if kept.size > 0 else np.nan)
            row.append(metrics.truncated_mean(kept, trim_frac) if kept.size > 0 else np.nan)

        rows.append(row)

    names = [by, 'obs'] + [prefix + name for name in values for prefix in ('median_', 'tmean_')]

    return _table(rows, names)


def _safe(function, series, label):

    try:

        return function(series)

    except DomainError as e:

        log.warning("%s: %s" % (label, e))

        return np.nan


def _paired(matrix, values, name, rows=None):

    rows = np.arange(matrix.n_rows) if rows is None else rows

    predicted = values[name][rows]

    finite = np.isfinite(predicted)

    rows = rows[finite]

    return metrics.PairedSeries.build(values[OBSERVED][rows], predicted[finite], matrix.firm_ids[rows],
                                      matrix.dates[rows])


def bucket_errors(matrix, values, by, trim_frac=0.1):
    """
    RMSE, MAPE and MASE of every approximation per bucket, after removing the trim_frac top and bottom observed
    CDS of the bucket

    :return: an astropy Table (bucket, obs, rmse_<model>, mape_<model>, mase_<model>)
    """

    labels = bucket_labels(matrix, by)

    models = [name for name in values if name != OBSERVED]

    rows = []

    for bucket in _bucket_order(labels, by):

        selected = np.nonzero(labels == bucket)[0]

        if not _large_enough(selected.size, trim_frac, bucket):

            continue

        kept = selected[metrics.trim_extremes(values[OBSERVED][selected], trim_frac)]

        row = [bucket, int(kept.size)]

        for name in models:

            try:

                series = _paired(matrix, values, name, kept)

            except DomainError as e:

                log.warning("%s %s: %s" % (bucket, name, e))

                row.extend([np.nan] * 3)

                continue

            label = "%s %s" % (bucket, name)

            row.extend([_safe(metrics.rmse, series, label), _safe(metrics.mape, series, label),
                        _safe(metrics.mase, series, label)])

        rows.append(row)

    names = [by, 'obs'] + [prefix + name for name in models for prefix in ('rmse_', 'mape_', 'mase_')]

    return _table(rows, names)


def overall_metrics(matrix, values):
    """R2, RMSE, MAPE, MASE and averaged correlations of every approximation against the observed CDS"""

    rows = []

    for name in values:

        if name == OBSERVED:

            continue

        try:

            series = _paired(matrix, values, name)

        except DomainError as e:

            log.warning("%s: %s" % (name, e))

            continue

        rows.append([name, len(series),
                     _safe(metrics.r_squared, series, name),
                     _safe(metrics.rmse, series, name),
                     _safe(metrics.mape, series, name),
                     _safe(metrics.mase, series, name),
                     _safe(lambda s: metrics.grouped_correlation(s, metrics.BY_FIRM), series, name),
                     _safe(lambda s: metrics.grouped_correlation(s, metrics.BY_DATE), series, name)])

    return _table(rows, ['model', 'obs', 'r2', 'rmse', 'mape', 'mase', 'corr_by_firm', 'corr_by_date'])


def correlation_table(matrix, values):
    """Averaged correlations of firms over time and of dates over firms, for every pair of series"""

    rows = []

    for a, b in CORRELATION_PAIRS:

        if a not in values or b not in values:

            continue

        finite = np.isfinite(values[a]) & np.isfinite(values[b])

        label = "%s/%s" % (a, b)

        if not np.any(finite):

            log.warning("%s: no row where both series are available" % label)

            continue

        series = metrics.PairedSeries.build(values[a][finite], values[b][finite], matrix.firm_ids[finite],
                                            matrix.dates[finite])

        rows.append([a, b,
                     _safe(lambda s: metrics.grouped_correlation(s, metrics.BY_FIRM), series, label),
                     _safe(lambda s: metrics.grouped_correlation(s, metrics.BY_DATE), series, label)])

    if len(rows) > 0:

        return Table(rows=rows, names=['series_a', 'series_b', metrics.BY_FIRM, metrics.BY_DATE])

    return Table(names=['series_a', 'series_b', metrics.BY_FIRM, metrics.BY_DATE], dtype=[str, str, float, float])


def descriptive_table(matrix, values):
    """One row per statistic, one column per series"""

    columns = OrderedDict()

    for name, series in values.items():

        finite = np.isfinite(series)

        if not np.any(finite):

            continue

        columns[name] = metrics.descriptive_statistics(series[finite], matrix.firm_ids[finite],
                                                       matrix.dates[finite])

    statistics = list(next(iter(columns.values())).keys())

    table = Table()

    table['statistic'] = statistics

    for name, described in columns.items():

        table[name] = [float(described[s]) for s in statistics]

    return table


def descriptive_by_country(matrix, values):
    """Observations, mean and std of every series per country"""

    labels = bucket_labels(matrix, BY_COUNTRY)

    rows = []

    for country in sorted(set(labels.tolist())):

        selected = labels == country

        row = [country, int(selected.sum())]

        for series in values.values():

            kept = series[selected]
            kept = kept[np.isfinite(kept)]

            row.extend([float(kept.mean()) if kept.size > 0 else np.nan,
                        float(kept.std(ddof=1)) if kept.size > 1 else np.nan])

        rows.append(row)

    names = [BY_COUNTRY, 'obs'] + [prefix + name for name in values for prefix in ('mean_', 'std_')]

    return _table(rows, names)


def timeseries_table(matrix, values):
    """Every series per firm and date, sorted by firm then date (plot-ready)"""

    order = np.lexsort((matrix.dates, matrix.firm_ids))

    table = Table()

    table['firm_id'] = matrix.firm_ids[order]
    table['date'] = matrix.dates[order]

    for name, series in values.items():

        table[name] = series[order]

    return table


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    """The set of comparison tables, by output file stem"""

    tables: OrderedDict = field(default_factory=OrderedDict)

    def write(self, out_dir, provenance=()):
        """
        Write every table as '<stem>.csv' in out_dir

        :return: list of the written paths
        """

        paths = []

        for stem, table in self.tables.items():

            path = os.path.join(out_dir, "%s.csv" % stem)

            extra = [('note', metrics.MASE_NOTE)] if any(c.startswith('mase') for c in table.colnames) else []

            write_csv(table, path, provenance, extra)

            paths.append(path)

        return paths


def build_report(matrix, predictions=None, trim_frac=0.1):
    """
    Assemble every comparison table

    :param matrix: a FeatureMatrix built from records
    :param predictions: forest predictions for its rows (None to compare the structural models only)
    :param trim_frac: fraction trimmed at each end in bucket tables
    :return: an EvaluationReport
    """

    values = model_values(matrix, predictions)

    tables = OrderedDict()

    tables['metrics_overall'] = overall_metrics(matrix, values)
    tables['correlations'] = correlation_table(matrix, values)
    tables['descriptive'] = descriptive_table(matrix, values)
    tables['descriptive_by_country'] = descriptive_by_country(matrix, values)

    for by in (BY_RATING, BY_SECTOR):

        tables['buckets_%s' % by] = bucket_summary(matrix, values, by, trim_frac)
        tables['errors_%s' % by] = bucket_errors(matrix, values, by, trim_frac)

    tables['timeseries'] = timeseries_table(matrix, values)

    return EvaluationReport(tables=tables)
