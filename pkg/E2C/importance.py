"""Feature importance of a fitted forest.

MDI: for every node split on a feature, the number of training rows reaching the node times the SSE improvement of
the split; summed per tree, averaged over trees and normalized to sum to 1.

Permutation: VI(A) = (1/B) * sum over trees of (R2_b - R2_b,permuted) / R2_b, where R2_b is computed on the
out-of-bag rows of tree b and the permuted version shuffles column A within those rows."""

import logging
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from E2C.exceptions import CompatibilityError, PipelineError

log = logging.getLogger(__name__)

MIN_OOB_ROWS = 2


def _ranking(scores):

    # Descending score, ties by feature index
    return tuple(int(j) for j in np.lexsort((np.arange(len(scores)), -np.asarray(scores))))


@dataclass(frozen=True, eq=False)
class ImportanceReport:
    """
    :param names: feature names
    :param mdi: normalized MDI score of each feature (None if not computed)
    :param vi: permutation importance of each feature (None if not computed)
    :param n_trees_used: trees that entered the permutation average
    """

    names: tuple
    mdi: np.ndarray = None
    vi: np.ndarray = None
    n_trees_used: int = 0

    @property
    def mdi_ranking(self):

        return _ranking(self.mdi) if self.mdi is not None else ()

    @property
    def vi_ranking(self):

        return _ranking(self.vi) if self.vi is not None else ()

    def merged(self, other):

        return ImportanceReport(names=self.names,
                                mdi=self.mdi if self.mdi is not None else other.mdi,
                                vi=self.vi if self.vi is not None else other.vi,
                                n_trees_used=max(self.n_trees_used, other.n_trees_used))


def _check_matrix(forest, train):

    if train.n_features != forest.p or train.n_rows != forest.n_rows:

        raise CompatibilityError("Forest was trained on %s rows x %s features, got %s x %s"
                                 % (forest.n_rows, forest.p, train.n_rows, train.n_features))


def mdi_importance(forest, train):
    """
    Improvement-weighted split counting

    :param forest: a fitted Forest
    :param train: the FeatureMatrix the forest was trained on (only its shape and names are used)
    :return: an ImportanceReport with the mdi part
    """

    _check_matrix(forest, train)

    totals = np.zeros(forest.p)

    for tree in forest.trees:

        split = tree.feature >= 0

        totals += np.bincount(tree.feature[split], weights=tree.n_samples[split] * tree.improvement[split],
                              minlength=forest.p)

    totals /= forest.n_trees

    if totals.sum() > 0:

        totals = totals / totals.sum()

    else:

        log.warning("No split improves any tree: every MDI score is 0")

    return ImportanceReport(names=tuple(train.names), mdi=totals)


def _r2(y, y_hat):

    return 1.0 - np.sum((y - y_hat) ** 2) / np.sum((y - y.mean()) ** 2)


def _tree_permutation_terms(tree, x, y, b, seed, shuffle):
    """(R2_b - R2_b,permuted) / R2_b for every feature, or None when R2_b is undefined or null"""

    if y.shape[0] < MIN_OOB_ROWS or np.all(y == y[0]):

        return None

    reference = _r2(y, tree.predict(x))

    if reference == 0:

        return None

    terms = np.zeros(x.shape[1])

    used = tree.used_features()

    for feature in range(x.shape[1]):

        # A column the tree never tests cannot change its predictions
        if feature not in used or not shuffle:

            continue

        rng = np.random.default_rng([seed, b, feature])

        permuted = x.copy()
        permuted[:, feature] = x[rng.permutation(x.shape[0]), feature]

        terms[feature] = (reference - _r2(y, tree.predict(permuted))) / reference

    return terms


def permutation_importance(forest, train, seed=0, workers=1, shuffle=True):
    """
    Out-of-bag permutation importance VI(A)

    Trees with less than 2 out-of-bag rows, constant out-of-bag labels or a null out-of-bag R2 are skipped with a
    warning. The training matrix is never modified.

    :param forest: a fitted Forest
    :param train: the FeatureMatrix the forest was trained on (out-of-bag rows index into it)
    :param seed: seed of the permutations
    :param workers: number of concurrent workers
    :param shuffle: permute the columns (False keeps the identity permutation)
    :return: an ImportanceReport with the vi part
    """

    _check_matrix(forest, train)

    jobs = []

    for b, tree in enumerate(forest.trees):

        oob = forest.oob_rows(b)

        jobs.append(delayed(_tree_permutation_terms)(tree, train.x[oob], train.y[oob], b, seed, shuffle))

    results = Parallel(n_jobs=workers)(jobs)

    used = [terms for terms in results if terms is not None]

    skipped = len(results) - len(used)

    if skipped > 0:

        log.warning("%s tree(s) skipped in the permutation importance: out-of-bag R2 undefined" % skipped)

    if len(used) == 0:

        raise PipelineError("Every tree has a degenerate out-of-bag sample, the permutation importance is undefined")

    return ImportanceReport(names=tuple(train.names), vi=np.mean(used, axis=0), n_trees_used=len(used))
