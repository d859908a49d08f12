"""Input checks shared by the estimators."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.utils.validation import check_array, check_consistent_length


def check_features(X, n_features=None, dtype=np.float64):
    """Return ``X`` as CSR (sparse input) or C-ordered 2d array of ``dtype``."""
    X = check_array(X, accept_sparse="csr", dtype=dtype, ensure_all_finite=True)
    if sp.issparse(X):
        X = sp.csr_matrix(X)
        X.sort_indices()
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, model expects {n_features}")
    return X


def check_labels(y, n_classes=3, n_samples=None):
    """Encode ``y`` to 0..n_classes-1; every class must be present.

    Returns ``(classes, encoded)``.
    """
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("y must be one-dimensional")
    if n_samples is not None:
        check_consistent_length(np.empty(n_samples), y)
    classes, encoded = np.unique(y, return_inverse=True)
    if len(classes) != n_classes:
        raise ValueError(
            f"expected {n_classes} classes in y, found {len(classes)} ({list(classes)}): a class is missing"
        )
    return classes, encoded.astype(np.int64)


def softmax(scores):
    scores = np.asarray(scores)
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(scores):
    z = scores - scores.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
