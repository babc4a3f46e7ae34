import logging

import numpy as np
import pytest

from E2C.exceptions import DomainError
from E2C.metrics import BY_DATE, BY_FIRM, PairedSeries, avg_correlation, descriptive_statistics, grouped_correlation, \
    mape, mase, naive_scale, r_squared, rmse, trim_extremes, truncated_mean


def test_r_squared_examples():

    assert r_squared(PairedSeries.build([1, 2, 3], [1, 2, 3])) == 1.0
    assert r_squared(PairedSeries.build([1, 2, 3], [2, 2, 2])) == 0.0
    assert r_squared(PairedSeries.build([1, 2, 3], [1, 2, 4])) == pytest.approx(0.5)

    # Worse than the mean
    assert r_squared(PairedSeries.build([1, 2, 3], [3, 2, 1])) < 0


def test_r_squared_undefined():

    with pytest.raises(DomainError):

        r_squared(PairedSeries.build([4, 4, 4], [1, 2, 3]))

    with pytest.raises(DomainError):

        r_squared(PairedSeries.build([4], [4]))


def test_rmse_and_mape():

    assert rmse(PairedSeries.build([0, 0], [5, 0])) == pytest.approx(3.5355, abs=1e-4)
    assert mape(PairedSeries.build([100, 200], [110, 180])) == pytest.approx(0.10)

    perfect = PairedSeries.build([10, 20, 30], [10, 20, 30])

    assert rmse(perfect) == 0.0 and mape(perfect) == 0.0

    with pytest.raises(DomainError):

        mape(PairedSeries.build([0, 1], [1, 1]))


def test_paired_series_domain():

    with pytest.raises(DomainError):

        PairedSeries.build([], [])

    with pytest.raises(DomainError):

        PairedSeries.build([1, 2], [1])

    with pytest.raises(DomainError):

        PairedSeries.build([1, np.nan], [1, 2])


def test_mase():

    series = PairedSeries.build(actual=[16, 10, 12, 5], predicted=[16, 11, 12, 5], firm_ids=['A', 'A', 'A', 'B'],
                                dates=['2017-01-03', '2017-01-01', '2017-01-02', '2017-01-01'])

    # Firm A sorted by date is 10, 12, 16; firm B has a single date
    assert naive_scale(series) == pytest.approx(3.0)
    assert mase(series) == pytest.approx(0.25 / 3.0)

    assert mase(PairedSeries.build([1, 2, 4], [1, 2, 4], firm_ids=['A'] * 3)) == 0.0


def test_mase_undefined():

    with pytest.raises(DomainError):

        mase(PairedSeries.build([1, 2], [1, 2], firm_ids=['A', 'B']))

    with pytest.raises(DomainError):

        mase(PairedSeries.build([3, 3, 3], [1, 2, 3], firm_ids=['A'] * 3))


def test_truncated_mean():

    assert truncated_mean(np.arange(1, 11), 0.1) == pytest.approx(5.5)
    assert truncated_mean([1, 2, 3, 1000], 0.0) == pytest.approx(251.5)
    assert truncated_mean([7.0], 0.1) == 7.0

    with pytest.raises(DomainError):

        truncated_mean([], 0.1)

    with pytest.raises(DomainError):

        truncated_mean([1, 2], 0.5)


def test_trim_extremes():

    assert list(trim_extremes([5, 1, 3, 2, 4], 0.2)) == [2, 3, 4]
    assert list(trim_extremes([5, 1, 3], 0.1)) == [0, 1, 2]


def test_avg_correlation(caplog):

    groups = {'a': ([1, 2, 3], [2, 4, 6]), 'b': ([1, 2, 3], [3, 2, 1])}

    assert avg_correlation(groups) == pytest.approx(0.0, abs=1e-12)
    assert avg_correlation({'a': groups['a']}) == pytest.approx(1.0)

    with caplog.at_level(logging.WARNING):

        value = avg_correlation(dict(groups, c=([1.0], [1.0]), d=([1, 2], [5, 5])))

    assert value == pytest.approx(0.0, abs=1e-12)
    assert "2 degenerate group(s)" in caplog.text

    with pytest.raises(DomainError):

        avg_correlation({'c': ([1.0], [1.0])})


def test_grouped_correlation():

    series = PairedSeries.build(actual=[1, 2, 3, 10, 20, 30], predicted=[1, 2, 3, 30, 20, 10],
                                firm_ids=['A', 'A', 'A', 'B', 'B', 'B'], dates=['d1', 'd2', 'd3'] * 2)

    assert grouped_correlation(series, BY_FIRM) == pytest.approx(0.0, abs=1e-12)

    # By date each group has two points, firm A and firm B
    assert grouped_correlation(PairedSeries.build(actual=[1, 2, 10, 20], predicted=[1, 2, 10, 20],
                                                  firm_ids=['A', 'A', 'B', 'B'], dates=['d1', 'd2'] * 2),
                               BY_DATE) == pytest.approx(1.0)

    with pytest.raises(DomainError):

        grouped_correlation(series, 'by_sector')


def test_descriptive_statistics():

    result = descriptive_statistics([1.0, 2.0, 3.0, 4.0], ['a', 'a', 'b', 'b'], ['d1', 'd2', 'd1', 'd2'])

    assert (result['obs'], result['firms'], result['periods']) == (4, 2, 2)
    assert result['mean'] == 2.5
    assert result['std_overall'] == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
    assert result['std_between'] == pytest.approx(np.sqrt(2.0))
    assert result['std_within'] == pytest.approx(np.sqrt(1.0 / 3.0))
    assert (result['min'], result['q50'], result['max']) == (1.0, 2.5, 4.0)
    assert result['skew'] == pytest.approx(0.0, abs=1e-12)
    assert result['kurt'] == pytest.approx(1.64)

    with pytest.raises(DomainError):

        descriptive_statistics([], [], [])
