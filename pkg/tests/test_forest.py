import datetime
import hashlib
import itertools

import numpy as np
import pytest
from astropy.io import fits

from E2C.dataset import FeatureMatrix, RawRecord, encode_features
from E2C.exceptions import CompatibilityError, DomainError
from E2C.forest import LEAF, Forest, RegressionTree, best_split, fit_forest, grow_tree, load_forest, predict, \
    predict_matrix, save_forest, suggested_feature_counts

FOUR_X = np.array([[1.0], [2.0], [3.0], [4.0]])
FOUR_Y = np.array([1.0, 1.0, 5.0, 5.0])


def brute_force_split(x, y):

    best = None

    for j in range(x.shape[1]):

        values = np.unique(x[:, j])

        for lower, upper in zip(values[:-1], values[1:]):

            s = 0.5 * (lower + upper)

            left = x[:, j] <= s

            sse = np.sum((y[left] - y[left].mean()) ** 2) + np.sum((y[~left] - y[~left].mean()) ** 2)

            candidate = (sse, j, s)

            if best is None or sse < best[0] - 1e-9 * max(1.0, best[0]):

                best = candidate

    return best


def synthetic(n=200, p=4, seed=0, noise=0.1):

    rng = np.random.default_rng(seed)

    x = rng.uniform(0, 10, size=(n, p))
    y = 3.0 * x[:, 0] + noise * rng.normal(size=n)

    return FeatureMatrix.from_arrays(x, y)


def test_best_split_examples():

    split = best_split(FOUR_X, FOUR_Y, [0])

    assert (split.feature, split.threshold, split.sse) == (0, 2.5, 0.0)
    assert (split.left_mean, split.right_mean) == (1.0, 5.0)

    constant = best_split(FOUR_X, np.ones(4), [0])

    assert constant.threshold == 1.5

    rng = np.random.default_rng(3)

    x = np.column_stack([[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], rng.normal(size=6)])

    assert best_split(x, np.array([0.0, 0.0, 0.0, 9.0, 9.0, 9.0]), [0, 1]).feature == 0


def test_best_split_ties_within_tolerance():

    # 1.5 and 3.5 both leave an SSE of 2/3, up to rounding of the running sums
    x = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])
    y = np.array([0.0, 1.0, 1.0, 0.0])

    split = best_split(x, y, [1, 0])

    assert (split.feature, split.threshold) == (0, 1.5)
    assert split.sse == pytest.approx(2.0 / 3.0)


def test_best_split_edge_cases():

    with pytest.raises(DomainError):

        best_split(np.empty((0, 1)), np.empty(0), [0])

    assert best_split(np.array([[1.0], [1.0], [1.0]]), np.array([1.0, 2.0, 3.0]), [0]) is None
    assert best_split(np.array([[2.0]]), np.array([1.0]), [0]) is None


def test_best_split_matches_brute_force():

    rng = np.random.default_rng(2024)

    for _ in range(500):

        n = int(rng.integers(2, 31))
        p = int(rng.integers(1, 5))

        x = rng.integers(0, 8, size=(n, p)).astype(float)
        y = rng.normal(size=n)

        expected = brute_force_split(x, y)

        split = best_split(x, y, list(range(p)))

        if expected is None:

            assert split is None

            continue

        assert (split.feature, split.threshold) == (expected[1], expected[2])
        assert split.sse == pytest.approx(expected[0], abs=1e-9)


def test_grow_tree_single_split():

    tree = grow_tree(FOUR_X, FOUR_Y, 1, 1, np.random.default_rng(0))

    assert tree.n_nodes == 3
    assert tree.feature[0] == 0 and tree.threshold[0] == 2.5
    assert list(tree.value[1:]) == [1.0, 5.0]
    assert tree.improvement[0] == pytest.approx(16.0)
    assert tree.depth == 1


def test_grow_tree_memorizes_and_single_row():

    rng = np.random.default_rng(5)

    x = rng.normal(size=(40, 3))
    y = rng.normal(size=40)

    tree = grow_tree(x, y, 3, 100, rng)

    assert np.allclose(tree.predict(x), y)

    single = grow_tree(np.array([[1.0, 2.0]]), np.array([7.0]), 2, 5, rng)

    assert single.n_nodes == 1 and single.feature[0] == LEAF and single.value[0] == 7.0


def test_grow_tree_invariants():

    rng = np.random.default_rng(8)

    x = rng.normal(size=(150, 5))
    y = x[:, 0] ** 2 + rng.normal(size=150)

    tree = grow_tree(x, y, 2, 6, rng)

    assert tree.depth <= 6

    internal = tree.feature != LEAF

    assert np.all(tree.improvement >= 0)
    assert np.all(tree.left[internal] > 0) and np.all(tree.right[internal] > 0)

    # Depth-first preorder: the left child follows its parent
    assert np.array_equal(tree.left[internal], np.flatnonzero(internal) + 1)
    assert np.all(np.isfinite(tree.value))

    # Leaf values are the mean of the rows reaching them
    leaves = tree.apply(x)

    for leaf in np.unique(leaves):

        assert tree.value[leaf] == pytest.approx(y[leaves == leaf].mean(), rel=1e-9, abs=1e-12)
        assert tree.n_samples[leaf] == np.sum(leaves == leaf)


def test_grow_tree_domain():

    with pytest.raises(DomainError):

        grow_tree(FOUR_X, FOUR_Y, 2, 3, np.random.default_rng(0))

    with pytest.raises(DomainError):

        grow_tree(FOUR_X, FOUR_Y, 1, 0, np.random.default_rng(0))


def test_grow_tree_deeper_than_the_interpreter_stack():

    n = 1200

    x = np.arange(n, dtype=float)[:, np.newaxis]

    # Alternating labels: the best split of any run isolates one end row, so the tree is a chain
    y = (np.arange(n) % 2).astype(float)

    tree = grow_tree(x, y, 1, 10 ** 6, np.random.default_rng(0))

    assert tree.depth == n - 1
    assert tree.n_nodes == 2 * n - 1
    assert np.array_equal(tree.predict(x), y)


def test_fit_forest_defaults_and_bootstrap():

    forest = fit_forest(synthetic(n=100, p=15), master_seed=4)

    assert forest.n_trees == 50 and forest.n_features == 15 and forest.max_depth == 15

    for b in range(forest.n_trees):

        assert forest.bootstrap_rows[b].shape == (100,)

        oob = forest.oob_rows(b)

        assert not np.any(np.isin(oob, forest.bootstrap_rows[b]))
        assert set(oob) | set(forest.bootstrap_rows[b]) == set(range(100))


def test_oob_fraction():

    matrix = synthetic(n=100, p=1)

    forest = fit_forest(matrix, n_trees=1000, n_features=1, max_depth=1, master_seed=0)

    fraction = np.mean([forest.oob_rows(b).size / 100 for b in range(forest.n_trees)])

    assert 0.35 <= fraction <= 0.39


def test_identity_forest_is_a_single_cart():

    matrix = FeatureMatrix.from_arrays(FOUR_X, FOUR_Y)

    forest = fit_forest(matrix, n_trees=1, n_features=1, max_depth=1, bootstrap=False)

    assert predict(forest, [1.5]) == 1.0
    assert predict(forest, [3.5]) == 5.0

    tree = grow_tree(FOUR_X, FOUR_Y, 1, 1, np.random.default_rng(0))

    assert np.array_equal(forest.trees[0].threshold, tree.threshold)


def test_prediction_is_the_mean_of_the_trees():

    matrix = synthetic(n=80, p=3)

    forest = fit_forest(matrix, n_trees=7, n_features=2, max_depth=4, master_seed=1)

    expected = np.mean([tree.predict(matrix.x) for tree in forest.trees], axis=0)

    assert np.allclose(predict_matrix(forest, matrix.x), expected, rtol=0, atol=1e-12)
    assert predict(forest, matrix.x[0]) == pytest.approx(expected[0], abs=1e-12)


def constant_tree(value):

    return RegressionTree(feature=np.array([LEAF]), threshold=np.zeros(1), left=np.array([-1]),
                          right=np.array([-1]), value=np.array([value]), n_samples=np.array([1]),
                          improvement=np.zeros(1), max_depth=1)


def test_predict_two_trees():

    forest = Forest(trees=[constant_tree(100.0), constant_tree(200.0)], bootstrap_rows=[np.zeros(1, dtype=int)] * 2,
                    n_rows=1, n_features=1, max_depth=1, master_seed=0,
                    columns=FeatureMatrix.from_arrays([[0.0]], [0.0]).columns)

    assert predict(forest, [42.0]) == 150.0

    with pytest.raises(DomainError):

        predict(forest, [1.0, 2.0])

    with pytest.raises(DomainError):

        predict_matrix(forest, np.zeros((3, 2)))


def test_fit_forest_domain():

    matrix = synthetic(n=20, p=3)

    with pytest.raises(DomainError):

        fit_forest(matrix, n_features=4)

    with pytest.raises(DomainError):

        fit_forest(matrix, n_trees=0, n_features=2)

    with pytest.raises(DomainError):

        fit_forest(matrix.take(np.zeros(20, dtype=bool)), n_features=2)


def test_suggested_feature_counts():

    low, high = suggested_feature_counts(27)

    assert (low, high) == (10, 15)
    assert low <= 15 <= high


def file_hash(filename):

    with open(filename, 'rb') as f:

        return hashlib.sha256(f.read()).hexdigest()


def test_determinism_across_workers(tmp_path):

    matrix = synthetic(n=120, p=5)

    hashes = set()

    for run, workers in itertools.product(range(5), (1, 2, -1)):

        forest = fit_forest(matrix, n_trees=8, n_features=3, max_depth=6, master_seed=11, workers=workers)

        filename = str(tmp_path / ('forest_%s_%s.fits' % (run, workers)))

        save_forest(forest, filename)

        hashes.add(file_hash(filename))

    assert len(hashes) == 1


def test_save_and_load_round_trip(tmp_path):

    matrix = synthetic(n=60, p=3)

    forest = fit_forest(matrix, n_trees=3, n_features=2, max_depth=5, master_seed=2)

    filename = str(tmp_path / 'forest.fits')

    save_forest(forest, filename, [('FIRMFRAC', 0.2, 'test card')])

    loaded, header = load_forest(filename)

    assert header['FIRMFRAC'] == 0.2
    assert loaded.n_trees == 3 and loaded.n_rows == 60 and loaded.master_seed == 2
    assert loaded.columns == forest.columns

    for a, b in zip(forest.trees, loaded.trees):

        for name in ('feature', 'threshold', 'left', 'right', 'value', 'n_samples', 'improvement'):

            assert np.array_equal(getattr(a, name), getattr(b, name))

    assert np.array_equal(predict_matrix(forest, matrix.x), predict_matrix(loaded, matrix.x))

    for b in range(3):

        assert np.array_equal(forest.oob_rows(b), loaded.oob_rows(b))


def test_load_rejects_other_files(tmp_path):

    filename = str(tmp_path / 'other.fits')

    fits.PrimaryHDU().writeto(filename)

    with pytest.raises(CompatibilityError):

        load_forest(filename)

    forest = fit_forest(synthetic(n=30, p=2), n_trees=1, n_features=1, max_depth=2)

    save_forest(forest, filename)

    with fits.open(filename, mode='update') as hdul:

        hdul[0].header['FMTVER'] = 99

    with pytest.raises(CompatibilityError):

        load_forest(filename)


def test_layout_travels_with_the_forest(tmp_path):

    records = [RawRecord(firm_id="%s%s" % (country, i), date=datetime.date(2017, 3, 3), e2c_bps=10.0 * i,
                         cds5y_bps=20.0 + i, ig_cdx_bps=70.0, market_cap=1e9, sp_rating='BBB', sector='Energy',
                         country=country)
               for country, count in (('US', 5), ('EU', 3), ('JP', 1)) for i in range(count)]

    matrix = encode_features(records)

    forest = fit_forest(matrix, n_trees=2, n_features=2, max_depth=3)

    filename = str(tmp_path / 'forest.fits')

    save_forest(forest, filename)

    loaded, _ = load_forest(filename)

    assert loaded.dropped == matrix.layout.dropped
    assert [c.name for c in loaded.columns] == matrix.names


def test_monotone_transform_invariance():

    rng = np.random.default_rng(17)

    x = rng.uniform(0.5, 5.0, size=(100, 3))
    y = 2.0 * x[:, 0] - x[:, 1] + rng.normal(scale=0.2, size=100)

    cubed = x.copy()
    cubed[:, 0] = x[:, 0] ** 3

    a = fit_forest(FeatureMatrix.from_arrays(x, y), n_trees=10, n_features=2, max_depth=8, master_seed=5,
                   bootstrap=False)
    b = fit_forest(FeatureMatrix.from_arrays(cubed, y), n_trees=10, n_features=2, max_depth=8, master_seed=5,
                   bootstrap=False)

    assert np.allclose(predict_matrix(a, x), predict_matrix(b, cubed), rtol=0, atol=1e-9)

    for tree_a, tree_b in zip(a.trees, b.trees):

        assert np.array_equal(tree_a.feature, tree_b.feature)
