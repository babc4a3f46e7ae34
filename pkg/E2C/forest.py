"""Random forest regression: bootstrap-aggregated, depth-limited CART trees with a random subset of the features
drawn at every node.

Every tree b uses its own generator numpy.random.default_rng([master_seed, b]), so the forest does not depend on
how many workers trained it."""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from astropy.io import fits
from joblib import Parallel, delayed

from E2C.dataset import Column
from E2C.exceptions import CompatibilityError, DomainError

log = logging.getLogger(__name__)

LEAF = -1

# Splits whose SSE is within this relative distance of the best one are ties
TIE_TOLERANCE = 1e-12

FORMAT_NAME = 'E2C-FOREST'
FORMAT_VERSION = 1

SplitResult = namedtuple('SplitResult', ['feature', 'threshold', 'sse', 'left_mean', 'right_mean'])


def _sse(y):

    return float(np.sum((y - y.mean()) ** 2)) if y.shape[0] > 0 else 0.0


def best_split(x, y, features):
    """
    Greedy search of the split (j, s) minimizing the sum of squared errors of the two regions x_j <= s and x_j > s,
    each predicted by its mean.

    Candidate thresholds are the midpoints between consecutive distinct values of a feature. Candidates whose SSE is
    within TIE_TOLERANCE * sum((y - mean(y)) ** 2) of the lowest one are ties; among them the lowest feature index wins,
    then the lowest threshold.

    :param x: (n, p) array of features
    :param y: (n,) array of labels
    :param features: indices of the features that may be used
    :return: a SplitResult, or None if no feature in the subset takes two distinct values
    """

    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)

    n = y.shape[0]

    if n == 0:

        raise DomainError("Cannot split an empty region")

    features = np.sort(np.asarray(features, dtype=int))

    if features.size == 0:

        raise DomainError("Cannot split on an empty set of features")

    if n < 2:

        return None

    columns = x[:, features]

    order = np.argsort(columns, axis=0, kind='stable')
    sorted_x = np.take_along_axis(columns, order, axis=0)

    # Centering keeps the running sums small
    centered = y - y.mean()
    sorted_y = centered[order]

    left_sum = np.cumsum(sorted_y, axis=0)[:-1]
    left_squares = np.cumsum(sorted_y ** 2, axis=0)[:-1]

    total = centered.sum()
    total_squares = np.sum(centered ** 2)

    n_left = np.arange(1, n, dtype=float)[:, np.newaxis]
    n_right = n - n_left

    left_sse = np.maximum(left_squares - left_sum ** 2 / n_left, 0.0)
    right_sse = np.maximum((total_squares - left_squares) - (total - left_sum) ** 2 / n_right, 0.0)

    sse = np.where(sorted_x[1:] > sorted_x[:-1], left_sse + right_sse, np.inf)

    best = sse.min()

    if not np.isfinite(best):

        return None

    ties = sse <= best + TIE_TOLERANCE * total_squares

    # First column (lowest feature index) holding a tie, then its first row (lowest threshold)
    k = int(np.argmax(ties.any(axis=0)))
    i = int(np.argmax(ties[:, k]))

    lower, upper = sorted_x[i, k], sorted_x[i + 1, k]

    threshold = 0.5 * (lower + upper)

    if not lower <= threshold < upper:

        # Adjacent floating point values
        threshold = lower

    j = int(features[k])

    left = x[:, j] <= threshold

    y_left, y_right = y[left], y[~left]

    return SplitResult(j, float(threshold), _sse(y_left) + _sse(y_right), float(y_left.mean()),
                       float(y_right.mean()))


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """
    A fitted CART tree stored as node arrays (node 0 is the root, nodes are in depth-first order).

    :param feature: split feature of each node, LEAF (-1) for leaves
    :param threshold: split threshold (rows with x_j <= threshold go left)
    :param left: index of the left child (-1 for leaves)
    :param right: index of the right child (-1 for leaves)
    :param value: mean label of the training rows reaching the node (the prediction at leaves)
    :param n_samples: number of training rows reaching the node
    :param improvement: SSE of the node minus the SSE of its two children (0 for leaves)
    :param max_depth: depth limit used when growing the tree
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    improvement: np.ndarray
    max_depth: int

    @property
    def n_nodes(self):

        return self.feature.shape[0]

    @property
    def depth(self):

        depths = np.zeros(self.n_nodes, dtype=int)

        for node in range(self.n_nodes):

            if self.feature[node] != LEAF:

                depths[self.left[node]] = depths[self.right[node]] = depths[node] + 1

        return int(depths.max())

    def used_features(self):

        return set(int(j) for j in self.feature[self.feature != LEAF])

    def apply(self, x):
        """Index of the leaf reached by each row of x"""

        x = np.asarray(x, dtype=float)

        nodes = np.zeros(x.shape[0], dtype=int)

        active = self.feature[nodes] != LEAF

        while np.any(active):

            rows = np.nonzero(active)[0]
            current = nodes[rows]

            go_left = x[rows, self.feature[current]] <= self.threshold[current]

            nodes[rows] = np.where(go_left, self.left[current], self.right[current])

            active[rows] = self.feature[nodes[rows]] != LEAF

        return nodes

    def predict(self, x):

        return self.value[self.apply(x)]


def grow_tree(x, y, m, max_depth, rng):
    """
    Grow a CART tree, drawing a fresh subset of m features (without replacement) at every node.

    A node becomes a leaf when it is pure, has less than 2 rows, admits no valid split or sits at max_depth (the
    root is at depth 0).

    :param x: (n, p) features of the bootstrap rows
    :param y: (n,) labels of the bootstrap rows
    :param m: number of features tried at each node, 1 <= m <= p
    :param max_depth: maximum depth, >= 1
    :param rng: a numpy Generator
    :return: a RegressionTree
    """

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    p = x.shape[1]

    if not 1 <= m <= p:

        raise DomainError("The number of features per node must be in [1, %s], got %s" % (p, m))

    if max_depth < 1:

        raise DomainError("Maximum depth must be >= 1, got %s" % max_depth)

    if y.shape[0] == 0:

        raise DomainError("Cannot grow a tree on an empty sample")

    nodes = []

    # Depth-first, left child first: (rows, depth, parent node, slot of the parent record)
    stack = [(np.arange(y.shape[0]), 0, None, None)]

    while len(stack) > 0:

        rows, depth, parent, slot = stack.pop()

        node = len(nodes)

        if parent is not None:

            nodes[parent][slot] = node

        y_node = y[rows]

        record = [LEAF, 0.0, -1, -1, float(y_node.mean()), rows.shape[0], 0.0]

        nodes.append(record)

        if depth >= max_depth or rows.shape[0] < 2 or np.all(y_node == y_node[0]):

            continue

        subset = rng.choice(p, size=m, replace=False)

        split = best_split(x[rows], y_node, subset)

        if split is None:

            continue

        go_left = x[rows, split.feature] <= split.threshold

        record[0] = split.feature
        record[1] = split.threshold
        record[6] = max(_sse(y_node) - split.sse, 0.0)

        stack.append((rows[~go_left], depth + 1, node, 3))
        stack.append((rows[go_left], depth + 1, node, 2))

    columns = list(zip(*nodes))

    return RegressionTree(feature=np.array(columns[0], dtype=int),
                          threshold=np.array(columns[1], dtype=float),
                          left=np.array(columns[2], dtype=int),
                          right=np.array(columns[3], dtype=int),
                          value=np.array(columns[4], dtype=float),
                          n_samples=np.array(columns[5], dtype=int),
                          improvement=np.array(columns[6], dtype=float),
                          max_depth=max_depth)


@dataclass(frozen=True, eq=False)
class Forest:
    """
    An ensemble of regression trees and the bootstrap draws that trained them.

    :param trees: list of RegressionTree
    :param bootstrap_rows: for each tree, the n row indices drawn with replacement
    :param n_rows: number of rows of the training matrix
    :param n_features: m, features tried at each node
    :param max_depth: depth limit
    :param master_seed: seed the per-tree generators derive from
    :param columns: Column metadata of the training matrix
    :param dropped: (group, dropped category) pairs of the feature layout
    """

    trees: list
    bootstrap_rows: list
    n_rows: int
    n_features: int
    max_depth: int
    master_seed: int
    columns: tuple
    dropped: tuple = ()

    @property
    def n_trees(self):

        return len(self.trees)

    @property
    def p(self):

        return len(self.columns)

    def oob_rows(self, b):
        """Rows never drawn by the bootstrap of tree b"""

        drawn = np.zeros(self.n_rows, dtype=bool)
        drawn[self.bootstrap_rows[b]] = True

        return np.nonzero(~drawn)[0]


def suggested_feature_counts(p):
    """Range of m recommended with categorical and dummy variables: two to three times int(log2(p) + 1)"""

    base = int(math.log2(p) + 1)

    return 2 * base, 3 * base


def _fit_one_tree(x, y, b, m, max_depth, master_seed, bootstrap):

    rng = np.random.default_rng([master_seed, b])

    n = y.shape[0]

    rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)

    tree = grow_tree(x[rows], y[rows], m, max_depth, rng)

    log.debug("Tree %s: %s nodes, depth %s" % (b, tree.n_nodes, tree.depth))

    return tree, rows


def fit_forest(train, n_trees=50, n_features=15, max_depth=15, master_seed=0, workers=1, bootstrap=True):
    """
    Train a random forest.

    :param train: a FeatureMatrix
    :param n_trees: B, number of trees
    :param n_features: m, number of features drawn at each node (1 <= m <= p)
    :param max_depth: depth limit of each tree
    :param master_seed: the seed every per-tree generator derives from
    :param workers: number of concurrent workers (joblib n_jobs); the result does not depend on it
    :param bootstrap: draw the rows with replacement (False uses every row once, in order)
    :return: a Forest
    """

    if train.n_rows == 0:

        raise DomainError("Cannot train a forest on an empty training set")

    if n_trees < 1:

        raise DomainError("The forest needs at least one tree, got %s" % n_trees)

    if not 1 <= n_features <= train.n_features:

        raise DomainError("The number of features per node must be in [1, %s], got %s"
                          % (train.n_features, n_features))

    log.info("Training %s trees (m = %s, max depth = %s) on %s rows with %s worker(s)"
             % (n_trees, n_features, max_depth, train.n_rows, workers))

    results = Parallel(n_jobs=workers)(delayed(_fit_one_tree)(train.x, train.y, b, n_features, max_depth,
                                                              master_seed, bootstrap)
                                       for b in range(n_trees))

    dropped = train.layout.dropped if train.layout is not None else ()

    return Forest(trees=[tree for tree, _ in results],
                  bootstrap_rows=[rows for _, rows in results],
                  n_rows=train.n_rows,
                  n_features=n_features,
                  max_depth=max_depth,
                  master_seed=master_seed,
                  columns=tuple(train.columns),
                  dropped=dropped)


def _check_dimension(forest, x):

    if x.shape[-1] != forest.p:

        raise DomainError("Expected %s features, got %s" % (forest.p, x.shape[-1]))


def predict_matrix(forest, x):
    """
    Predictions for many rows: the mean of the tree predictions

    :param forest: a Forest
    :param x: (n, p) array
    :return: (n,) array of predicted spreads
    """

    x = np.asarray(x, dtype=float)

    if x.ndim != 2:

        raise DomainError("Expected a 2-dimensional array of features, got shape %s" % (x.shape,))

    _check_dimension(forest, x)

    return np.mean([tree.predict(x) for tree in forest.trees], axis=0)


def predict(forest, x):
    """
    Prediction of the forest on one point: (1/B) * sum of the tree outputs

    :param forest: a Forest
    :param x: feature vector with p entries
    :return: the predicted spread
    """

    x = np.asarray(x, dtype=float)

    if x.ndim != 1:

        raise DomainError("Expected a feature vector, got shape %s" % (x.shape,))

    return float(predict_matrix(forest, x[np.newaxis, :])[0])


def _tree_hdu(tree, b):

    columns = [fits.Column(name='FEATURE', format='K', array=tree.feature),
               fits.Column(name='THRESH', format='D', array=tree.threshold),
               fits.Column(name='LEFT', format='K', array=tree.left),
               fits.Column(name='RIGHT', format='K', array=tree.right),
               fits.Column(name='VALUE', format='D', array=tree.value),
               fits.Column(name='NSAMPLE', format='K', array=tree.n_samples),
               fits.Column(name='IMPROVE', format='D', array=tree.improvement)]

    hdu = fits.BinTableHDU.from_columns(columns, name='TREE')

    hdu.header.set('EXTVER', b + 1)
    hdu.header.set('MAXDEPTH', tree.max_depth)

    return hdu


def save_forest(forest, filename, extra_header=()):
    """
    Write a forest to a FITS file: primary header with the hyperparameters, a LAYOUT table with the feature columns,
    then a TREE table (node arrays) and a BOOT table (bootstrap rows) per tree. Nothing time-dependent is written.

    :param forest: a Forest
    :param filename: output path
    :param extra_header: (keyword, value, comment) cards added to the primary header (e.g. split settings)
    """

    primary = fits.PrimaryHDU()

    primary.header.set('FORMAT', FORMAT_NAME, 'File format')
    primary.header.set('FMTVER', FORMAT_VERSION, 'File format version')
    primary.header.set('NTREES', forest.n_trees, 'Number of trees B')
    primary.header.set('MFEAT', forest.n_features, 'Features drawn at each node m')
    primary.header.set('MAXDEPTH', forest.max_depth, 'Maximum tree depth')
    primary.header.set('SEED', forest.master_seed, 'Master seed')
    primary.header.set('NROWS', forest.n_rows, 'Rows of the training matrix')
    primary.header.set('NFEAT', forest.p, 'Number of feature columns p')

    for i, (group, category) in enumerate(forest.dropped):

        primary.header.set('DROPG%s' % i, group, 'One-hot group')
        primary.header.set('DROPC%s' % i, category, 'Category dropped from the group')

    for card in extra_header:

        primary.header.set(*card)

    layout = fits.BinTableHDU.from_columns([fits.Column(name='NAME', format='128A',
                                                        array=np.array([c.name for c in forest.columns])),
                                            fits.Column(name='KIND', format='16A',
                                                        array=np.array([c.kind for c in forest.columns]))],
                                           name='LAYOUT')

    hdus = [primary, layout]

    for b, (tree, rows) in enumerate(zip(forest.trees, forest.bootstrap_rows)):

        hdus.append(_tree_hdu(tree, b))

        boot = fits.BinTableHDU.from_columns([fits.Column(name='ROW', format='K', array=np.asarray(rows))],
                                             name='BOOT')
        boot.header.set('EXTVER', b + 1)

        hdus.append(boot)

    fits.HDUList(hdus).writeto(filename, overwrite=True)

    log.info("Forest of %s trees saved to %s" % (forest.n_trees, filename))


def load_forest(filename):
    """
    Read a forest written by save_forest

    :param filename: path of the FITS file
    :return: (Forest, primary header)
    """

    with fits.open(filename) as hdul:

        header = hdul[0].header.copy()

        if header.get('FORMAT') != FORMAT_NAME:

            raise CompatibilityError("%s is not a forest file" % filename)

        if header.get('FMTVER') != FORMAT_VERSION:

            raise CompatibilityError("Forest file format version %s is not supported (expected %s)"
                                     % (header.get('FMTVER'), FORMAT_VERSION))

        layout = hdul['LAYOUT'].data

        columns = tuple(Column(str(name).strip(), str(kind).strip())
                        for name, kind in zip(layout.field('NAME'), layout.field('KIND')))

        trees = []
        bootstrap_rows = []

        for b in range(header['NTREES']):

            data = hdul['TREE', b + 1].data

            trees.append(RegressionTree(feature=np.array(data.field('FEATURE'), dtype=int),
                                        threshold=np.array(data.field('THRESH'), dtype=float),
                                        left=np.array(data.field('LEFT'), dtype=int),
                                        right=np.array(data.field('RIGHT'), dtype=int),
                                        value=np.array(data.field('VALUE'), dtype=float),
                                        n_samples=np.array(data.field('NSAMPLE'), dtype=int),
                                        improvement=np.array(data.field('IMPROVE'), dtype=float),
                                        max_depth=int(hdul['TREE', b + 1].header['MAXDEPTH'])))

            bootstrap_rows.append(np.array(hdul['BOOT', b + 1].data.field('ROW'), dtype=int))

    dropped = []

    i = 0

    while 'DROPG%s' % i in header:

        dropped.append((header['DROPG%s' % i], header['DROPC%s' % i]))

        i += 1

    forest = Forest(trees=trees,
                    bootstrap_rows=bootstrap_rows,
                    n_rows=int(header['NROWS']),
                    n_features=int(header['MFEAT']),
                    max_depth=int(header['MAXDEPTH']),
                    master_seed=int(header['SEED']),
                    columns=columns,
                    dropped=tuple(dropped))

    if forest.p != header['NFEAT']:

        raise CompatibilityError("Forest file declares %s features but lists %s columns"
                                 % (header['NFEAT'], forest.p))

    return forest, header
