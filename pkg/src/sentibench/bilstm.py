"""Bidirectional LSTM sentiment classifier in plain numpy.

Architecture: embedding -> spatial dropout -> forward and backward LSTM ->
concatenated final hidden states -> dropout -> dense + ReLU -> dense ->
softmax. Gradients are derived by hand (backpropagation through time) and
checked against finite differences by :func:`gradient_check`.

PAD (id 0) steps are masked: the recurrent state passes through them
unchanged, so trailing padding never changes the output.
"""
from __future__ import annotations

import csv
import io
import logging
from collections import Counter

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_labels, softmax
from .linear import DivergenceError
from .text import CleanDocument

log = logging.getLogger(__name__)

PAD, OOV = 0, 1
PARAM_LIMIT = 10_000_000
PARAM_NAMES = ("embedding", "fwd_W", "fwd_b", "bwd_W", "bwd_b", "dense1_W", "dense1_b", "dense2_W", "dense2_b")


class SequenceEncoder(TransformerMixin, BaseEstimator):
    """Map token lists to fixed-length id arrays.

    The vocabulary holds PAD (0), OOV (1) and the ``max_size - 2`` most
    frequent training tokens (ties broken lexicographically). Sequences are
    truncated on the right and right-padded with PAD.
    """

    def __init__(self, max_size=10_000, max_seq_len=64):
        self.max_size = max_size
        self.max_seq_len = max_seq_len

    def fit(self, X, y=None):
        if self.max_size < 3:
            raise ValueError("max_size must leave room for at least one token besides PAD/OOV")
        counts = Counter()
        for doc in X:
            counts.update(doc.tokens if isinstance(doc, CleanDocument) else doc)
        if not counts:
            raise ValueError("empty token stream: cannot build a vocabulary")
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[: self.max_size - 2]
        self.token_to_id_ = {"<pad>": PAD, "<oov>": OOV}
        for i, (token, _) in enumerate(ranked, start=2):
            self.token_to_id_[token] = i
        return self

    @property
    def vocab_size_(self):
        return len(self.token_to_id_)

    def encode(self, tokens):
        vocab = self.token_to_id_
        ids = np.zeros(self.max_seq_len, dtype=np.int64)
        seq = [vocab.get(t, OOV) for t in list(tokens)[: self.max_seq_len]]
        ids[: len(seq)] = seq
        return ids

    def transform(self, X):
        check_is_fitted(self, "token_to_id_")
        docs = [d.tokens if isinstance(d, CleanDocument) else d for d in X]
        out = np.zeros((len(docs), self.max_seq_len), dtype=np.int64)
        for i, doc in enumerate(docs):
            out[i] = self.encode(doc)
        return out

    def oov_rate(self, X):
        check_is_fitted(self, "token_to_id_")
        total = oov = 0
        for doc in X:
            for t in (doc.tokens if isinstance(doc, CleanDocument) else doc):
                total += 1
                oov += t not in self.token_to_id_
        return oov / total if total else 0.0


def param_count(vocab_size, emb_dim=128, hidden=64, dense_hidden=64, n_classes=3):
    lstm = 4 * ((emb_dim + hidden) * hidden + hidden)
    return vocab_size * emb_dim + 2 * lstm + (2 * hidden * dense_hidden + dense_hidden) + (dense_hidden * n_classes + n_classes)


def init_params(vocab_size, emb_dim, hidden, dense_hidden, n_classes, rng, dtype=np.float32):
    """Glorot-uniform weights, zero biases except forget-gate bias 1."""
    def glorot(shape):
        limit = np.sqrt(6.0 / (shape[0] + shape[1]))
        return rng.uniform(-limit, limit, size=shape)

    params = {"embedding": rng.uniform(-0.05, 0.05, size=(vocab_size, emb_dim))}
    for side in ("fwd", "bwd"):
        params[f"{side}_W"] = glorot((emb_dim + hidden, 4 * hidden))
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0
        params[f"{side}_b"] = b
    params["dense1_W"] = glorot((2 * hidden, dense_hidden))
    params["dense1_b"] = np.zeros(dense_hidden)
    params["dense2_W"] = glorot((dense_hidden, n_classes))
    params["dense2_b"] = np.zeros(n_classes)
    return {k: np.ascontiguousarray(params[k], dtype=dtype) for k in PARAM_NAMES}


def _sigmoid(z):
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def lstm_scan(x, mask, W, b, reverse=False):
    """Run one LSTM direction over ``x`` (B, T, D); returns final h and a cache.

    ``mask`` is (B, T) boolean; masked steps carry (h, c) through unchanged.
    Gate layout along the last axis of ``W``/``b``: input, forget, cell, output.
    """
    B, T, D = x.shape
    H = W.shape[1] // 4
    Wx, Wh = W[:D], W[D:]
    xproj = x @ Wx + b
    h = np.zeros((B, H), dtype=x.dtype)
    c = np.zeros((B, H), dtype=x.dtype)
    steps = range(T - 1, -1, -1) if reverse else range(T)
    cache = []
    for t in steps:
        m = mask[:, t:t + 1]
        z = xproj[:, t] + h @ Wh
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache.append((t, m, h, c, i, f, g, o, tc))
        h = np.where(m, h_new, h)
        c = np.where(m, c_new, c)
    return h, (x, W, cache)


def lstm_scan_backward(dh, lstm_cache):
    """Gradients of one direction given the gradient at its final hidden state."""
    x, W, cache = lstm_cache
    B, T, D = x.shape
    H = W.shape[1] // 4
    Wh = W[D:]
    dc = np.zeros_like(dh)
    dz_all = np.zeros((B, T, 4 * H), dtype=dh.dtype)
    dWh = np.zeros_like(Wh)
    for t, m, h_prev, c_prev, i, f, g, o, tc in reversed(cache):
        mf = m.astype(dh.dtype)
        dh_new = dh * mf
        dc_new = dc * mf + dh_new * o * (1.0 - tc * tc)
        dz = np.concatenate([
            dc_new * g * i * (1.0 - i),
            dc_new * c_prev * f * (1.0 - f),
            dc_new * i * (1.0 - g * g),
            dh_new * tc * o * (1.0 - o),
        ], axis=1)
        dz_all[:, t] = dz
        dWh += h_prev.T @ dz
        dh = dz @ Wh.T + dh * (1.0 - mf)
        dc = dc_new * f + dc * (1.0 - mf)
    flat = dz_all.reshape(B * T, 4 * H)
    dWx = x.reshape(B * T, D).T @ flat
    dx = (flat @ W[:D].T).reshape(B, T, D)
    return dx, np.concatenate([dWx, dWh], axis=0), flat.sum(axis=0)


def _trim(ids):
    """Drop trailing all-PAD columns; masked steps do not change the result."""
    used = np.flatnonzero((ids != PAD).any(axis=0))
    return ids[:, : used[-1] + 1] if used.size else ids[:, :1]


def forward(params, ids, train=False, dropout=0.0, rng=None):
    """Class probabilities for a batch of id sequences.

    Returns ``(probs, cache)``; the cache feeds :func:`backward`.
    """
    E = params["embedding"]
    if ids.size and (ids.min() < 0 or ids.max() >= E.shape[0]):
        raise ValueError(f"token id out of range [0, {E.shape[0]})")
    ids = _trim(ids)
    mask = ids != PAD
    emb = E[ids]
    B, _, D = emb.shape
    drop = train and dropout > 0
    keep = 1.0 - dropout
    if drop:
        spatial = (rng.random((B, 1, D)) < keep).astype(emb.dtype) / emb.dtype.type(keep)
        x = emb * spatial
    else:
        spatial = None
        x = emb
    hf, cache_f = lstm_scan(x, mask, params["fwd_W"], params["fwd_b"], reverse=False)
    hb, cache_b = lstm_scan(x, mask, params["bwd_W"], params["bwd_b"], reverse=True)
    feats = np.concatenate([hf, hb], axis=1)
    if drop:
        dmask = (rng.random(feats.shape) < keep).astype(feats.dtype) / feats.dtype.type(keep)
        feats_d = feats * dmask
    else:
        dmask = None
        feats_d = feats
    a1 = feats_d @ params["dense1_W"] + params["dense1_b"]
    r1 = np.maximum(a1, 0)
    logits = r1 @ params["dense2_W"] + params["dense2_b"]
    probs = softmax(logits)
    cache = dict(ids=ids, spatial=spatial, cache_f=cache_f, cache_b=cache_b, dmask=dmask,
                 feats_d=feats_d, a1=a1, r1=r1, probs=probs, H=hf.shape[1])
    return probs, cache


def cross_entropy(probs, y):
    p = probs[np.arange(len(y)), y].astype(np.float64)
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


def backward(params, cache, y, loss_weight=1.0):
    """Gradients of ``loss_weight * mean cross-entropy`` for every parameter."""
    probs = cache["probs"]
    B = probs.shape[0]
    dlogits = probs.copy()
    dlogits[np.arange(B), y] -= 1.0
    dlogits *= probs.dtype.type(loss_weight / B)
    grads = {
        "dense2_W": cache["r1"].T @ dlogits,
        "dense2_b": dlogits.sum(axis=0),
    }
    da1 = (dlogits @ params["dense2_W"].T) * (cache["a1"] > 0)
    grads["dense1_W"] = cache["feats_d"].T @ da1
    grads["dense1_b"] = da1.sum(axis=0)
    dfeats = da1 @ params["dense1_W"].T
    if cache["dmask"] is not None:
        dfeats = dfeats * cache["dmask"]
    H = cache["H"]
    dx_f, grads["fwd_W"], grads["fwd_b"] = lstm_scan_backward(np.ascontiguousarray(dfeats[:, :H]), cache["cache_f"])
    dx_b, grads["bwd_W"], grads["bwd_b"] = lstm_scan_backward(np.ascontiguousarray(dfeats[:, H:]), cache["cache_b"])
    dx = dx_f + dx_b
    if cache["spatial"] is not None:
        dx = dx * cache["spatial"]
    dE = np.zeros_like(params["embedding"])
    np.add.at(dE, cache["ids"].ravel(), dx.reshape(-1, dx.shape[-1]))
    grads["embedding"] = dE
    return {k: grads[k] for k in PARAM_NAMES}


def loss_and_grads(params, ids, y, loss_weight=1.0):
    """Eval-mode (no dropout) loss and gradients; used for verification."""
    probs, cache = forward(params, ids, train=False)
    return loss_weight * cross_entropy(probs, y), backward(params, cache, y, loss_weight)


def gradient_check(seed=0, vocab_size=7, emb_dim=3, hidden=2, dense_hidden=4, seq_len=4, batch=2, step=1e-5):
    """Largest relative error between analytic and central-difference gradients.

    The error of a tensor is ``||analytic - numeric|| / (||analytic|| + ||numeric||)``;
    the maximum over all parameter tensors is returned together with the
    per-tensor values. Everything runs in float64 with dropout off.
    """
    rng = np.random.default_rng(seed)
    params = init_params(vocab_size, emb_dim, hidden, dense_hidden, 3, rng, dtype=np.float64)
    for k in params:
        params[k] = params[k] + rng.normal(0.0, 0.3, size=params[k].shape)
    ids = rng.integers(1, vocab_size, size=(batch, seq_len))
    ids[-1, seq_len - 1:] = PAD
    y = rng.integers(0, 3, size=batch)
    _, grads = loss_and_grads(params, ids, y)
    errors = {}
    for name in PARAM_NAMES:
        theta = params[name]
        numeric = np.zeros_like(theta)
        for idx in np.ndindex(theta.shape):
            orig = theta[idx]
            theta[idx] = orig + step
            up, _ = forward(params, ids)
            theta[idx] = orig - step
            down, _ = forward(params, ids)
            theta[idx] = orig
            numeric[idx] = (cross_entropy(up, y) - cross_entropy(down, y)) / (2 * step)
        denom = np.linalg.norm(grads[name]) + np.linalg.norm(numeric)
        errors[name] = 0.0 if denom == 0 else float(np.linalg.norm(grads[name] - numeric) / denom)
    return max(errors.values()), errors


def clip_global_norm(grads, max_norm):
    total = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values())))
    if max_norm is not None and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for k in grads:
            grads[k] *= grads[k].dtype.type(scale)
    return total


class Adam:
    """Adam with bias-corrected moments."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)
            params[k] -= update.astype(params[k].dtype)


def _macro_f1(y_true, y_pred, n_classes):
    f1s = []
    for k in range(n_classes):
        tp = np.sum((y_true == k) & (y_pred == k))
        fp = np.sum((y_true != k) & (y_pred == k))
        fn = np.sum((y_true == k) & (y_pred != k))
        f1s.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
    return float(np.mean(f1s))


CURVE_FIELDS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc", "val_macro_f1")


class BiLSTMClassifier(ClassifierMixin, BaseEstimator):
    """Bidirectional LSTM over id sequences produced by :class:`SequenceEncoder`.

    Training uses mini-batch Adam on mean cross-entropy with global-norm
    gradient clipping, shuffles every epoch, keeps the epoch with the best
    validation macro-F1 and stops after ``patience`` epochs without
    improvement. Pass ``validation_data=(ids, y)`` to :meth:`fit`; otherwise
    a stratified ``validation_fraction`` of the training rows is held out.

    Parameters
    ----------
    vocab_size : int or None
        Embedding rows; ``None`` infers ``max id + 1`` from the training data.
    emb_dim, hidden, dense_hidden : int
        Embedding width (128), per-direction LSTM state (64), dense head (64).
    dropout : float, default=0.3
    batch_size, max_epochs, patience : int
    lr, beta1, beta2, eps : float
        Adam settings.
    clip_norm : float, default=5.0
    dtype : str, default="float32"
    """

    def __init__(self, vocab_size=None, emb_dim=128, hidden=64, dense_hidden=64, dropout=0.3, batch_size=32,
                 max_epochs=20, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, patience=3, clip_norm=5.0,
                 validation_fraction=0.1, random_state=0, dtype="float32", n_classes=3):
        self.vocab_size = vocab_size
        self.emb_dim = emb_dim
        self.hidden = hidden
        self.dense_hidden = dense_hidden
        self.dropout = dropout
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.patience = patience
        self.clip_norm = clip_norm
        self.validation_fraction = validation_fraction
        self.random_state = random_state
        self.dtype = dtype
        self.n_classes = n_classes

    def count_params(self):
        check_is_fitted(self, "params_")
        return int(sum(p.size for p in self.params_.values()))

    def init(self, vocab_size):
        """Allocate fresh parameters without training."""
        rng = np.random.default_rng(self.random_state)
        self.params_ = init_params(vocab_size, self.emb_dim, self.hidden, self.dense_hidden, self.n_classes,
                                   rng, dtype=np.dtype(self.dtype))
        n = param_count(vocab_size, self.emb_dim, self.hidden, self.dense_hidden, self.n_classes)
        if n >= PARAM_LIMIT:
            raise ValueError(f"model has {n:,} parameters, limit is {PARAM_LIMIT:,}")
        return self

    def _holdout(self, X, y):
        from .corpus import SplitMix64

        rng = SplitMix64(self.random_state)
        val = []
        for k in range(self.n_classes):
            members = rng.shuffle(list(np.flatnonzero(y == k)))
            val.extend(members[: max(1, int(round(len(members) * self.validation_fraction)))])
        val_mask = np.zeros(len(y), dtype=bool)
        val_mask[val] = True
        return X[~val_mask], y[~val_mask], X[val_mask], y[val_mask]

    def fit(self, X, y, validation_data=None):
        X = np.asarray(X, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("X must be a 2d array of token ids")
        self.classes_, yi = check_labels(y, self.n_classes, X.shape[0])
        if validation_data is None:
            X, yi, Xv, yv = self._holdout(X, yi)
        else:
            Xv = np.asarray(validation_data[0], dtype=np.int64)
            yv = np.searchsorted(self.classes_, np.asarray(validation_data[1]))
            if not np.array_equal(self.classes_[np.clip(yv, 0, len(self.classes_) - 1)], np.asarray(validation_data[1])):
                raise ValueError("validation labels contain a class unseen in training")
        if len(Xv) == 0:
            raise ValueError("empty validation set")
        vocab_size = self.vocab_size if self.vocab_size is not None else int(max(X.max(), Xv.max())) + 1
        self.init(vocab_size)
        self.n_params_ = self.count_params()
        log.info("bilstm parameters: %d", self.n_params_)

        params = self.params_
        opt = Adam(params, self.lr, self.beta1, self.beta2, self.eps)
        rng = np.random.default_rng([self.random_state, 1])
        best_f1, best_params, since_best = -1.0, None, 0
        self.curves_ = []
        n = len(X)
        for epoch in range(1, self.max_epochs + 1):
            order = rng.permutation(n)
            loss_sum, correct = 0.0, 0
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                probs, cache = forward(params, X[idx], train=True, dropout=self.dropout, rng=rng)
                loss = cross_entropy(probs, yi[idx])
                if not np.isfinite(loss):
                    raise DivergenceError()
                grads = backward(params, cache, yi[idx])
                clip_global_norm(grads, self.clip_norm)
                opt.step(params, grads)
                loss_sum += loss * len(idx)
                correct += int(np.sum(np.argmax(probs, axis=1) == yi[idx]))
            val_probs = self._predict_proba_ids(Xv)
            val_loss = cross_entropy(val_probs, yv)
            if not np.isfinite(val_loss):
                raise DivergenceError()
            val_pred = np.argmax(val_probs, axis=1)
            val_f1 = _macro_f1(yv, val_pred, self.n_classes)
            self.curves_.append({
                "epoch": epoch,
                "train_loss": loss_sum / n,
                "train_acc": correct / n,
                "val_loss": val_loss,
                "val_acc": float(np.mean(val_pred == yv)),
                "val_macro_f1": val_f1,
            })
            if val_f1 > best_f1:
                best_f1, since_best = val_f1, 0
                best_params = {k: v.copy() for k, v in params.items()}
                self.best_epoch_ = epoch
            else:
                since_best += 1
                if since_best >= self.patience:
                    break
        self.params_ = best_params
        return self

    def _predict_proba_ids(self, X, chunk=512):
        out = np.empty((len(X), self.n_classes), dtype=np.float64)
        for start in range(0, len(X), chunk):
            probs, _ = forward(self.params_, X[start:start + chunk], train=False)
            out[start:start + chunk] = probs
        return out

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        X = np.asarray(X, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("X must be a 2d array of token ids")
        return self._predict_proba_ids(X)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def curves_csv(self):
        check_is_fitted(self, "curves_")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CURVE_FIELDS)
        for row in self.curves_:
            w.writerow([row["epoch"]] + [f"{row[k]:.6f}" for k in CURVE_FIELDS[1:]])
        return buf.getvalue()


def plot_curves(curves, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [c["epoch"] for c in curves]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(epochs, [c["train_loss"] for c in curves], label="train")
    ax1.plot(epochs, [c["val_loss"] for c in curves], label="validation")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend()
    ax2.plot(epochs, [c["train_acc"] for c in curves], label="train")
    ax2.plot(epochs, [c["val_acc"] for c in curves], label="validation")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("accuracy")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
