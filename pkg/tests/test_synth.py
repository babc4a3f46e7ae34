import numpy as np
import pytest

from E2C.cli import fit_split
from E2C.config import RunConfig
from E2C.dataset import SNAPSHOT_COLUMNS, build_records, drop_incomplete, prepare_matrix, snapshots_from_table
from E2C.exceptions import DomainError
from E2C.forest import predict_matrix
from E2C.importance import mdi_importance, permutation_importance
from E2C.metrics import PairedSeries, rmse
from E2C.structural import ModelParams
from E2C.synth import MIN_LABEL, generate_panel


def same_table(a, b):

    return a.colnames == b.colnames and all(a[name].tolist() == b[name].tolist() for name in a.colnames)


def test_panel_shape_and_columns():

    table = generate_panel(n_firms=10, n_dates=5, seed=0)

    assert len(table) == 50
    assert table.colnames == list(SNAPSHOT_COLUMNS)
    assert len(set(table['firm_id'])) == 10
    assert len(set(table['date'])) == 5
    assert np.all(np.asarray(table['cds_5y_bps'], dtype=float) >= MIN_LABEL)


def test_panel_is_deterministic():

    assert same_table(generate_panel(n_firms=8, n_dates=6, seed=3), generate_panel(n_firms=8, n_dates=6, seed=3))
    assert not same_table(generate_panel(n_firms=8, n_dates=6, seed=3), generate_panel(n_firms=8, n_dates=6, seed=4))


def test_panel_feeds_the_pipeline():

    table = generate_panel(n_firms=12, n_dates=8, seed=1)

    records = build_records(snapshots_from_table(table), ModelParams())

    assert len(records) == 96
    assert all(r.e2c_bps is not None and r.creditgrades_bps is not None for r in records)
    assert len(drop_incomplete(records)) == 96


def test_missing_rate():

    table = generate_panel(n_firms=20, n_dates=10, seed=2, missing_rate=0.3)

    records = build_records(snapshots_from_table(table), ModelParams())

    lost = len(records) - len(drop_incomplete(records))

    assert 20 < lost < 110
    assert np.sum(table['cds_5y_bps'].mask) > 0
    assert np.sum(table['ig_cdx_bps'].mask) > 0


@pytest.mark.parametrize("kwargs", [dict(n_firms=0), dict(n_dates=0), dict(missing_rate=1.0), dict(bayes_r2=0.0),
                                    dict(bayes_r2=1.5)])
def test_panel_domain(kwargs):

    with pytest.raises(DomainError):

        generate_panel(**kwargs)


def synthetic_matrix(n_firms, n_dates, seed, bayes_r2):

    table = generate_panel(n_firms=n_firms, n_dates=n_dates, seed=seed, bayes_r2=bayes_r2)

    return prepare_matrix(build_records(snapshots_from_table(table), ModelParams()))


def test_small_noiseless_panel_is_learned():

    matrix = synthetic_matrix(40, 20, seed=5, bayes_r2=1.0)

    config = RunConfig(n_trees=20, n_features=min(10, matrix.n_features))

    split, fitted, r2_in, r2_out = fit_split(matrix, config, seed=0)

    assert r2_in > 0.9
    assert r2_out > 0.0
    assert split.in_sample.n_rows + split.out_of_sample.n_rows == matrix.n_rows


@pytest.mark.slow
def test_acceptance_panel():

    matrix = synthetic_matrix(300, 150, seed=0, bayes_r2=0.9)

    config = RunConfig(workers=-1)

    split, fitted, r2_in, r2_out = fit_split(matrix, config, seed=0)

    assert r2_out >= 0.85

    oos = split.out_of_sample

    e2c_only = PairedSeries.build(oos.y, [r.e2c_bps for r in oos.records])

    assert rmse(PairedSeries.build(oos.y, predict_matrix(fitted, oos.x))) < rmse(e2c_only)

    # E2C is the first column
    assert mdi_importance(fitted, split.in_sample).mdi_ranking[0] == 0
    assert permutation_importance(fitted, split.in_sample, workers=-1).vi_ranking[0] == 0


@pytest.mark.slow
def test_acceptance_panel_noiseless():

    matrix = synthetic_matrix(300, 150, seed=0, bayes_r2=1.0)

    _, _, _, r2_out = fit_split(matrix, RunConfig(workers=-1), seed=0)

    assert r2_out >= 0.95
