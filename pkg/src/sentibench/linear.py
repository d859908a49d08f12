"""Linear classifiers over sparse TF-IDF rows.

:class:`SoftmaxRegression` is multinomial logistic regression trained by
mini-batch gradient descent. :class:`PegasosSVM` is a one-vs-rest linear SVM
trained with the Pegasos stochastic subgradient scheme.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_labels, log_softmax, softmax

log = logging.getLogger(__name__)

MAX_HALVINGS = 5
MONOTONE_TOL = 1e-6


class DivergenceError(RuntimeError):
    """Training produced a non-finite objective."""

    def __init__(self, what="diverged"):
        super().__init__(what)


def _one_hot(y, n_classes):
    Y = np.zeros((len(y), n_classes))
    Y[np.arange(len(y)), y] = 1.0
    return Y


def logistic_objective(W, b, X, Y, l2):
    """Mean softmax cross-entropy plus ``l2/2 * ||W||^2`` and its gradient.

    ``W`` is (classes, features), ``Y`` one-hot. Returns ``(loss, dW, db)``.
    The bias is not penalized.
    """
    scores = np.asarray(X @ W.T) + b
    logp = log_softmax(scores)
    n = X.shape[0]
    loss = -np.sum(Y * logp) / n + 0.5 * l2 * np.sum(W * W)
    G = (np.exp(logp) - Y) / n
    dW = np.asarray(G.T @ X) if not sp.issparse(X) else np.asarray((X.T @ G).T)
    return loss, dW + l2 * W, G.sum(axis=0)


class _LinearBase(ClassifierMixin, BaseEstimator):
    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_features(X, self.coef_.shape[1])
        return np.asarray(X @ self.coef_.T) + self.intercept_

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


class SoftmaxRegression(_LinearBase):
    """Multinomial logistic regression.

    Each epoch shuffles the rows and takes one step per mini-batch. The data
    term uses a plain gradient step and the L2 term an implicit one,
    ``W <- (W - lr * grad) / (1 + lr * l2)``, which keeps large penalties
    stable. If the full training objective rises by more than ``1e-6`` over
    an epoch, the epoch is replayed with half the step size, up to five
    times; after that training stops at the previous weights.

    Parameters
    ----------
    lr : float, default=0.1
    l2 : float, default=1e-4
    epochs : int, default=50
    batch_size : int, default=32
    random_state : int, default=0
    n_classes : int, default=3
    """

    def __init__(self, lr=0.1, l2=1e-4, epochs=50, batch_size=32, random_state=0, n_classes=3):
        self.lr = lr
        self.l2 = l2
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state
        self.n_classes = n_classes

    def fit(self, X, y):
        X = check_features(X)
        self.classes_, yi = check_labels(y, self.n_classes, X.shape[0])
        n, d = X.shape
        Y = _one_hot(yi, self.n_classes)
        rng = np.random.default_rng(self.random_state)
        W = np.zeros((self.n_classes, d))
        b = np.zeros(self.n_classes)
        lr = float(self.lr)
        prev, _, _ = logistic_objective(W, b, X, Y, self.l2)
        self.training_log_ = []
        self.n_halvings_ = 0
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            for attempt in range(MAX_HALVINGS + 1):
                W_new, b_new = self._epoch(W, b, X, Y, order, lr)
                obj, _, _ = logistic_objective(W_new, b_new, X, Y, self.l2)
                if not np.isfinite(obj):
                    if attempt == MAX_HALVINGS:
                        raise DivergenceError()
                elif obj <= prev + MONOTONE_TOL:
                    break
                if attempt < MAX_HALVINGS:
                    lr *= 0.5
                    self.n_halvings_ += 1
            else:
                log.info("objective stopped decreasing at epoch %d; keeping previous weights", epoch)
                break
            W, b, prev = W_new, b_new, obj
            self.training_log_.append(float(obj))
        if not self.training_log_:
            self.training_log_.append(float(prev))
        self.coef_, self.intercept_ = W, b
        self.final_lr_ = lr
        return self

    def _epoch(self, W, b, X, Y, order, lr):
        W = W.copy()
        b = b.copy()
        shrink = 1.0 / (1.0 + lr * self.l2)
        for start in range(0, len(order), self.batch_size):
            idx = order[start:start + self.batch_size]
            Xb = X[idx]
            _, dW, db = logistic_objective(W, b, Xb, Y[idx], 0.0)
            W = (W - lr * dW) * shrink
            b = b - lr * db
        return W, b

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict_log_proba(self, X):
        return log_softmax(self.decision_function(X))


def pegasos_step_size(l2, t):
    return 1.0 / (l2 * t)


def svm_objective(W, b, X, Ypm, l2):
    """Mean over classes of ``l2/2 * ||[w, b]||^2 + mean hinge``."""
    margins = Ypm * (np.asarray(X @ W.T) + b)
    hinge = np.maximum(0.0, 1.0 - margins).mean(axis=0)
    reg = 0.5 * l2 * (np.sum(W * W, axis=1) + b * b)
    return float(np.mean(reg + hinge))


class PegasosSVM(_LinearBase):
    """One-vs-rest linear SVM trained by mini-batch Pegasos.

    Step ``t`` uses learning rate ``1 / (l2 * t)``. The bias is handled as a
    weight on a constant feature, so it is regularized and shrunk together
    with the coefficients. No probabilities are produced.

    Parameters
    ----------
    l2 : float, default=1e-4
    epochs : int, default=100
    batch_size : int, default=16
    random_state : int, default=0
    n_classes : int, default=3
    """

    def __init__(self, l2=1e-4, epochs=100, batch_size=16, random_state=0, n_classes=3):
        self.l2 = l2
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state
        self.n_classes = n_classes

    def fit(self, X, y):
        if self.l2 <= 0:
            raise ValueError("l2 must be positive")
        X = check_features(X)
        self.classes_, yi = check_labels(y, self.n_classes, X.shape[0])
        n, d = X.shape
        Ypm = 2.0 * _one_hot(yi, self.n_classes) - 1.0
        rng = np.random.default_rng(self.random_state)
        W = np.zeros((self.n_classes, d))
        b = np.zeros(self.n_classes)
        t = 0
        self.training_log_ = []
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                t += 1
                eta = pegasos_step_size(self.l2, t)
                Xb = X[idx]
                Yb = Ypm[idx]
                active = ((Yb * (np.asarray(Xb @ W.T) + b)) < 1.0) * Yb
                scale = 1.0 - eta * self.l2
                step = eta / len(idx)
                W = scale * W + step * np.asarray((Xb.T @ active).T if sp.issparse(Xb) else active.T @ Xb)
                b = scale * b + step * active.sum(axis=0)
            obj = svm_objective(W, b, X, Ypm, self.l2)
            if not np.isfinite(obj):
                raise DivergenceError()
            self.training_log_.append(obj)
        self.coef_, self.intercept_ = W, b
        self.n_updates_ = t
        self.last_step_size_ = pegasos_step_size(self.l2, t) if t else None
        return self
