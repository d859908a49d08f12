"""Histogram gradient boosting for multiclass problems on sparse features.

Features are discretized once: every feature gets a dedicated zero bin plus
up to ``n_bins`` (``n_bins - 1`` when zeros occur) quantile bins for its
non-zero values. Trees grow leaf-wise, always expanding the leaf with the
largest split gain, and each boosting round adds one tree per class fitted
to the softmax gradients and diagonal hessians.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_labels, log_softmax, softmax
from .linear import DivergenceError

log = logging.getLogger(__name__)

_MAX_BACKTRACK = 10


def _feature_edges(values, n_rows, n_bins):
    """Thresholds separating the non-zero bins of one feature."""
    values = values[values != 0]
    if values.size == 0:
        return np.empty(0)
    has_zero = values.size < n_rows
    max_bins = n_bins - 1 if has_zero else n_bins
    distinct = np.unique(values)
    if distinct.size <= max_bins:
        return (distinct[:-1] + distinct[1:]) / 2.0
    cuts = np.quantile(values, np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
    # snap each cut between two neighbouring distinct values so no bin is empty
    pos = np.searchsorted(distinct, cuts, side="right")
    pos = np.unique(np.clip(pos, 1, distinct.size - 1))
    return (distinct[pos - 1] + distinct[pos]) / 2.0


def build_histograms(X, n_bins=255):
    """Per-feature bin edges for ``X``.

    Returns a list with one strictly increasing threshold array per feature.
    A feature with ``m`` thresholds has ``m + 1`` non-zero bins; a non-zero
    value ``v`` falls in bin ``count(thresholds < v)``, so values equal to a
    threshold land in the lower bin. The zero bin is implicit.
    """
    if not 2 <= n_bins <= 255:
        raise ValueError("n_bins must be in [2, 255]")
    X = sp.csc_matrix(check_features(X))
    edges = []
    for f in range(X.shape[1]):
        col = X.data[X.indptr[f]:X.indptr[f + 1]]
        edges.append(_feature_edges(col, X.shape[0], n_bins))
    return edges


def n_nonzero_bins(X, edges):
    """Number of non-zero bins per feature (0 for an all-zero feature)."""
    X = sp.csc_matrix(X)
    X.eliminate_zeros()
    has_values = np.diff(X.indptr) > 0
    return [len(e) + 1 if present else 0 for e, present in zip(edges, has_values)]


class _BinnedMatrix:
    """Non-zero entries of ``X`` mapped to global bin ids, in CSR and CSC order."""

    def __init__(self, X, edges, n_nonzero_bins):
        Xc = sp.csc_matrix(X)
        Xc.eliminate_zeros()
        Xc.sort_indices()
        n, d = Xc.shape
        self.n_rows = n
        self.n_nonzero_bins = np.asarray(n_nonzero_bins, dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.n_nonzero_bins)])
        self.feat_of_bin = np.repeat(np.arange(d), self.n_nonzero_bins)
        col_bin = np.empty(Xc.nnz, dtype=np.int64)
        for f in range(d):
            lo, hi = Xc.indptr[f], Xc.indptr[f + 1]
            col_bin[lo:hi] = np.searchsorted(edges[f], Xc.data[lo:hi], side="left")
        # column view, used to route samples at a split
        self.col_indptr = Xc.indptr.astype(np.int64)
        self.col_rows = Xc.indices.astype(np.int64)
        self.col_bin = col_bin
        # row view, used to build histograms for a subset of rows
        Br = sp.csc_matrix((col_bin + 1, Xc.indices, Xc.indptr), shape=(n, d)).tocsr()
        Br.sort_indices()
        self.indptr = Br.indptr.astype(np.int64)
        self.rows = np.repeat(np.arange(n), np.diff(Br.indptr))
        feats = Br.indices.astype(np.int64)
        self.global_bin = self.offsets[feats] + (Br.data.astype(np.int64) - 1)

    def entries_for(self, rows):
        starts = self.indptr[rows]
        lengths = self.indptr[rows + 1] - starts
        total = int(lengths.sum())
        if total == 0:
            return np.empty(0, dtype=np.int64)
        shift = np.repeat(starts - np.concatenate([[0], np.cumsum(lengths)[:-1]]), lengths)
        return shift + np.arange(total)

    def histogram(self, rows, g, h):
        """Occupied global bins for ``rows`` with their gradient, hessian and count sums."""
        idx = self.entries_for(rows)
        bins, inv = np.unique(self.global_bin[idx], return_inverse=True)
        r = self.rows[idx]
        return (
            bins,
            np.bincount(inv, weights=g[r], minlength=bins.size),
            np.bincount(inv, weights=h[r], minlength=bins.size),
            np.bincount(inv, minlength=bins.size).astype(np.float64),
        )

    def goes_left(self, rows, feature, split_bin, zero_left):
        in_node = np.zeros(self.n_rows, dtype=bool)
        in_node[rows] = True
        left = np.full(self.n_rows, zero_left, dtype=bool)
        lo, hi = self.col_indptr[feature], self.col_indptr[feature + 1]
        col_rows = self.col_rows[lo:hi]
        col_bins = self.col_bin[lo:hi]
        keep = in_node[col_rows]
        left[col_rows[keep]] = col_bins[keep] < split_bin
        return left[rows]


@dataclass
class _Split:
    gain: float
    feature: int
    split_bin: int
    zero_left: bool


def _split_gain(GL, HL, GR, HR, lam):
    G, H = GL + GR, HL + HR
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam))


def find_best_split(binned, rows, g, h, l2_leaf, min_samples_leaf):
    """Best split for the samples ``rows`` or ``None`` when none has gain > 0.

    Candidates cover every feature, every cut between consecutive non-zero
    bins (including "all non-zero bins right" and "all left") and both
    placements of the zero bin.
    """
    if len(rows) < 2 * max(min_samples_leaf, 1):
        return None
    Gt, Ht, Nt = g[rows].sum(), h[rows].sum(), float(len(rows))
    offsets = binned.offsets
    d = len(offsets) - 1
    # only occupied bins matter: a cut after an empty bin gives the same
    # partition as the cut after the previous occupied bin, which comes first
    occ, og, oh, on = binned.histogram(rows, g, h)
    feat = binned.feat_of_bin[occ]
    sg = np.bincount(feat, weights=og, minlength=d)
    sh = np.bincount(feat, weights=oh, minlength=d)
    sn = np.bincount(feat, weights=on, minlength=d)
    zero_g, zero_h, zero_n = Gt - sg, Ht - sh, Nt - sn

    first = np.searchsorted(feat, feat, side="left")

    def prefix(a):
        c = np.concatenate([[0.0], np.cumsum(a)])
        return c[1:] - c[first]

    # candidate s sends the first s non-zero bins left: s = 0 for every
    # feature, then s = local index + 1 for every occupied bin
    pg = np.concatenate([np.zeros(d), prefix(og)])
    ph = np.concatenate([np.zeros(d), prefix(oh)])
    pn = np.concatenate([np.zeros(d), prefix(on)])
    cand_feat = np.concatenate([np.arange(d), feat])
    cand_bin = np.concatenate([np.zeros(d, dtype=np.int64), occ - offsets[feat] + 1])

    best = None
    for zero_left in (True, False):
        if zero_left:
            GL, HL, NL = pg + zero_g[cand_feat], ph + zero_h[cand_feat], pn + zero_n[cand_feat]
        else:
            GL, HL, NL = pg, ph, pn
        GR, HR, NR = Gt - GL, Ht - HL, Nt - NL
        NL_r, NR_r = np.rint(NL), np.rint(NR)
        with np.errstate(divide="ignore", invalid="ignore"):  # empty sides are masked below
            gain = _split_gain(GL, HL, GR, HR, l2_leaf)
        valid = (NL_r >= min_samples_leaf) & (NR_r >= min_samples_leaf) & (NL_r > 0) & (NR_r > 0)
        gain = np.where(valid, gain, -np.inf)
        if gain.size == 0:
            continue
        j = int(np.argmax(gain))
        if gain[j] > 0 and (best is None or gain[j] > best.gain):
            best = _Split(float(gain[j]), int(cand_feat[j]), int(cand_bin[j]), zero_left)
    return best


@dataclass
class RegressionTree:
    """Array-backed binary tree.

    Internal nodes route a sample left when its value is zero and
    ``zero_left`` is set, or when it is non-zero and ``<= threshold``.
    Leaves have ``feature == -1``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    zero_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    gain: np.ndarray

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def depth(self):
        depths = np.zeros(len(self.feature), dtype=int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def apply_dense(self, Xd):
        node = np.zeros(Xd.shape[0], dtype=np.int64)
        rows = np.arange(Xd.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[active]
            v = Xd[r, self.feature[nd]]
            go_left = np.where(v == 0, self.zero_left[nd], v <= self.threshold[nd])
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict_dense(self, Xd):
        return self.value[self.apply_dense(Xd)]


def _grow_tree(binned, edges, g, h, cfg, all_rows):
    """Leaf-wise growth; returns the tree and the leaf id of each training row."""
    feature, threshold, zero_left, left, right, value, n_samples, gain = ([] for _ in range(8))
    leaf_rows = {}

    def new_node(rows):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        zero_left.append(False)
        left.append(-1)
        right.append(-1)
        value.append(-g[rows].sum() / (h[rows].sum() + cfg.l2_leaf) * cfg.learning_rate)
        n_samples.append(len(rows))
        gain.append(0.0)
        leaf_rows[node] = rows
        return node

    heap = []
    depth = {}

    def push(node):
        if cfg.max_depth is not None and depth[node] >= cfg.max_depth:
            return
        split = find_best_split(binned, leaf_rows[node], g, h, cfg.l2_leaf, cfg.min_samples_leaf)
        if split is not None:
            heapq.heappush(heap, (-split.gain, node, split))

    root = new_node(all_rows)
    depth[root] = 0
    push(root)
    n_leaves = 1
    while heap and n_leaves < cfg.max_leaves:
        _, node, split = heapq.heappop(heap)
        rows = leaf_rows.pop(node)
        mask = binned.goes_left(rows, split.feature, split.split_bin, split.zero_left)
        lchild, rchild = new_node(rows[mask]), new_node(rows[~mask])
        e = edges[split.feature]
        if split.split_bin == 0:
            thr = -np.inf
        elif split.split_bin > len(e):
            thr = np.inf
        else:
            thr = e[split.split_bin - 1]
        feature[node], threshold[node], zero_left[node] = split.feature, thr, split.zero_left
        left[node], right[node], gain[node] = lchild, rchild, split.gain
        depth[lchild] = depth[rchild] = depth[node] + 1
        n_leaves += 1
        push(lchild)
        push(rchild)

    tree = RegressionTree(
        np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
        np.array(zero_left, dtype=bool), np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64), np.array(n_samples, dtype=np.int64), np.array(gain, dtype=np.float64),
    )
    return tree, leaf_rows


def multiclass_log_loss(scores, y):
    return float(-np.mean(log_softmax(scores)[np.arange(len(y)), y]))


class GBDTClassifier(ClassifierMixin, BaseEstimator):
    """Leaf-wise histogram gradient boosting with a softmax objective.

    Each round computes ``p = softmax(scores)``, gradients ``p_k - [y == k]``
    and hessians ``p_k (1 - p_k)``, then grows one tree per class. Leaf
    values are ``-G / (H + l2_leaf)`` times ``learning_rate``. If a round
    would raise the training log-loss, its leaf values are halved (up to ten
    times) and boosting stops when that does not help.

    Parameters
    ----------
    n_rounds : int, default=100
    learning_rate : float, default=0.1
    max_leaves : int, default=31
    min_samples_leaf : int, default=20
    n_bins : int, default=255
    l2_leaf : float, default=1.0
    max_depth : int or None, default=None
    random_state : int, default=0
        Unused by the deterministic learner; kept so tuning code can pass it.
    n_classes : int, default=3
    """

    def __init__(self, n_rounds=100, learning_rate=0.1, max_leaves=31, min_samples_leaf=20, n_bins=255,
                 l2_leaf=1.0, max_depth=None, random_state=0, n_classes=3):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_leaves = max_leaves
        self.min_samples_leaf = min_samples_leaf
        self.n_bins = n_bins
        self.l2_leaf = l2_leaf
        self.max_depth = max_depth
        self.random_state = random_state
        self.n_classes = n_classes

    def _check_config(self):
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2")
        if not 2 <= self.n_bins <= 255:
            raise ValueError("n_bins must be in [2, 255]")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")

    def fit(self, X, y):
        self._check_config()
        X = check_features(X)
        self.classes_, yi = check_labels(y, self.n_classes, X.shape[0])
        n, d = X.shape
        self.n_features_in_ = d
        self.bin_edges_ = build_histograms(X, self.n_bins)
        binned = _BinnedMatrix(X, self.bin_edges_, n_nonzero_bins(X, self.bin_edges_))
        K = self.n_classes
        Y = np.zeros((n, K))
        Y[np.arange(n), yi] = 1.0
        scores = np.zeros((n, K))
        loss = multiclass_log_loss(scores, yi)
        all_rows = np.arange(n)
        self.trees_ = []
        self.training_log_ = []
        for rnd in range(self.n_rounds):
            p = softmax(scores)
            grad = p - Y
            hess = p * (1.0 - p)
            round_trees, deltas = [], np.zeros((n, K))
            for k in range(K):
                tree, leaf_rows = _grow_tree(binned, self.bin_edges_, grad[:, k], hess[:, k], self, all_rows)
                for leaf, rows in leaf_rows.items():
                    deltas[rows, k] = tree.value[leaf]
                round_trees.append(tree)
            factor = 1.0
            for _ in range(_MAX_BACKTRACK + 1):
                new_loss = multiclass_log_loss(scores + factor * deltas, yi)
                if not np.isfinite(new_loss):
                    raise DivergenceError()
                if new_loss <= loss:
                    break
                factor *= 0.5
            else:
                log.info("round %d could not reduce the training loss; stopping", rnd)
                break
            if factor != 1.0:
                for tree in round_trees:
                    tree.value = tree.value * factor
            scores = scores + factor * deltas
            loss = new_loss
            self.trees_.extend(round_trees)
            self.training_log_.append(loss)
        return self

    @property
    def n_rounds_completed_(self):
        return len(self.trees_) // self.n_classes

    def decision_function(self, X):
        check_is_fitted(self, "trees_")
        X = check_features(X, self.n_features_in_)
        n = X.shape[0]
        scores = np.zeros((n, self.n_classes))
        chunk = max(1, 2_000_000 // max(1, X.shape[1]))
        for start in range(0, n, chunk):
            block = X[start:start + chunk]
            Xd = block.toarray() if sp.issparse(block) else np.asarray(block)
            for i, tree in enumerate(self.trees_):
                scores[start:start + chunk, i % self.n_classes] += tree.predict_dense(Xd)
        return scores

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
