import time

import numpy as np
import pytest

from sentibench.bilstm import (
    OOV,
    PAD,
    PARAM_LIMIT,
    PARAM_NAMES,
    BiLSTMClassifier,
    SequenceEncoder,
    forward,
    gradient_check,
    init_params,
    loss_and_grads,
    lstm_scan,
    param_count,
)
from sentibench.linear import DivergenceError
from sentibench.synthetic import make_corpus
from sentibench.text import TextPreprocessor


def tiny_params(seed=0, V=7, emb=3, hidden=2, dense=4):
    rng = np.random.default_rng(seed)
    params = init_params(V, emb, hidden, dense, 3, rng, dtype=np.float64)
    return {k: v + rng.normal(0, 0.3, v.shape) for k, v in params.items()}


def test_param_count_formula():
    assert param_count(10_000) == 1_387_267
    assert param_count(10_000) == 1_280_000 + 98_816 + 8_256 + 195
    assert param_count(0) == 107_267
    assert param_count(77_000) < PARAM_LIMIT


def test_stored_parameters_match_formula():
    model = BiLSTMClassifier(vocab_size=10_000).init(10_000)
    assert model.count_params() == param_count(10_000) == 1_387_267
    assert set(model.params_) == set(PARAM_NAMES)


def test_gradient_check():
    start = time.perf_counter()
    err, per_tensor = gradient_check()
    assert err < 1e-4
    assert set(per_tensor) == set(PARAM_NAMES)
    assert time.perf_counter() - start < 30


@pytest.mark.parametrize("seed", [1, 2])
def test_gradient_check_other_seeds(seed):
    assert gradient_check(seed=seed)[0] < 1e-4


def test_loss_weight_linearity():
    params = tiny_params()
    ids = np.array([[1, 2, 3, 0], [4, 5, 6, 2]])
    y = np.array([0, 2])
    _, g1 = loss_and_grads(params, ids, y)
    _, g2 = loss_and_grads(params, ids, y, loss_weight=2.0)
    for k in PARAM_NAMES:
        np.testing.assert_allclose(g2[k], 2 * g1[k], atol=1e-10)


def test_all_pad_gives_zero_lstm_gradients():
    params = tiny_params()
    _, grads = loss_and_grads(params, np.zeros((2, 4), dtype=np.int64), np.array([0, 1]))
    for k in ("fwd_W", "fwd_b", "bwd_W", "bwd_b", "embedding"):
        assert not grads[k].any()


def test_trailing_pad_does_not_change_output():
    params = tiny_params(3)
    ids = np.array([[1, 2, 3], [4, 5, 0]])
    padded = np.concatenate([ids, np.zeros((2, 5), dtype=np.int64)], axis=1)
    a, _ = forward(params, ids)
    b, _ = forward(params, padded)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_reversal_symmetry():
    rng = np.random.default_rng(4)
    params = tiny_params(4)
    x = rng.normal(size=(3, 5, 3))
    mask = np.ones((3, 5), dtype=bool)
    mask[1, 3:] = False
    hb, _ = lstm_scan(x, mask, params["bwd_W"], params["bwd_b"], reverse=True)
    hr, _ = lstm_scan(x[:, ::-1], mask[:, ::-1], params["bwd_W"], params["bwd_b"], reverse=False)
    np.testing.assert_allclose(hb, hr, atol=1e-14)


def test_forward_contracts():
    params = init_params(50, 8, 4, 6, 3, np.random.default_rng(0), dtype=np.float64)
    ids = np.random.default_rng(1).integers(0, 50, size=(32, 64))
    probs, _ = forward(params, ids)
    assert probs.shape == (32, 3)
    assert np.all(np.abs(probs.sum(axis=1) - 1) <= 1e-9) and np.all((probs > 0) & (probs < 1))
    again, _ = forward(params, ids)
    assert np.array_equal(probs, again)
    zero = {k: np.zeros_like(v) for k, v in params.items()}
    np.testing.assert_allclose(forward(zero, ids)[0], 1 / 3)
    with pytest.raises(ValueError):
        forward(params, np.array([[50]]))


def test_dropout_expectation():
    """Mean of train-mode activations over 10,000 masks equals eval mode within 3 SE."""
    params = tiny_params(5)
    p = 0.3
    n = 10_000
    ids = np.tile(np.array([[1, 2, 3]]), (n, 1))
    _, cache = forward(params, ids, train=True, dropout=p, rng=np.random.default_rng(0))
    se = np.sqrt(p / (1 - p) / n)
    spatial_mean = cache["spatial"].mean(axis=0).ravel()
    dense_mean = cache["dmask"].mean(axis=0)
    assert np.all(np.abs(spatial_mean - 1) <= 3 * se)
    assert np.all(np.abs(dense_mean - 1) <= 3 * se)
    # embedding channel values: E[emb * mask] == emb
    emb = params["embedding"][ids[0]]
    dropped = (emb[None] * cache["spatial"]).mean(axis=0)
    assert np.all(np.abs(dropped - emb) <= 3 * se * np.abs(emb) + 1e-15)


def test_vocab_examples():
    enc = SequenceEncoder(max_size=4, max_seq_len=4).fit([["a", "a", "b"], ["a", "b", "c"]])
    assert enc.token_to_id_ == {"<pad>": PAD, "<oov>": OOV, "a": 2, "b": 3}
    assert enc.encode(["zzz"])[0] == OOV
    assert enc.encode([]).tolist() == [0, 0, 0, 0]
    assert enc.encode(["a"] * 9).tolist() == [2, 2, 2, 2]
    enc2 = SequenceEncoder(max_size=10, max_seq_len=4).fit([["yang", "bagus"]])
    assert enc2.encode(["yang", "bagus"]).tolist() == [enc2.token_to_id_["yang"], enc2.token_to_id_["bagus"], 0, 0]
    assert SequenceEncoder(4, 4).fit([["a", "a", "b"], ["a", "b", "c"]]).token_to_id_ == enc.token_to_id_
    with pytest.raises(ValueError):
        SequenceEncoder().fit([[], []])
    assert enc.oov_rate([["a", "zzz"]]) == 0.5


def _encoded(n_train=200, n_val=150, seed=11):
    corpus = make_corpus(n_train + n_val, seed=seed)
    prep = TextPreprocessor().fit()
    toks = prep.transform([ex.text for ex in corpus])
    y = np.array([ex.label for ex in corpus])
    enc = SequenceEncoder(max_size=10_000, max_seq_len=32).fit(toks[:n_train])
    X = enc.transform(toks)
    return enc, X[:n_train], y[:n_train], X[n_train:], y[n_train:]


def test_small_synthetic_reaches_95_percent():
    enc, X, y, Xv, yv = _encoded()
    model = BiLSTMClassifier(vocab_size=enc.vocab_size_, random_state=0).fit(X, y, validation_data=(Xv, yv))
    assert len(model.curves_) <= 20
    assert max(row["val_acc"] for row in model.curves_) >= 0.95
    assert (model.predict(Xv) == yv).mean() >= 0.95


def test_zero_learning_rate_keeps_parameters():
    enc, X, y, Xv, yv = _encoded(60, 30)
    model = BiLSTMClassifier(vocab_size=enc.vocab_size_, lr=0.0, max_epochs=1, emb_dim=8, hidden=4, dense_hidden=4)
    model.fit(X, y, validation_data=(Xv, yv))
    fresh = BiLSTMClassifier(vocab_size=enc.vocab_size_, emb_dim=8, hidden=4, dense_hidden=4).init(enc.vocab_size_)
    for k in PARAM_NAMES:
        assert np.array_equal(model.params_[k], fresh.params_[k])


def test_determinism_and_curves_csv():
    enc, X, y, Xv, yv = _encoded(90, 30)
    kw = dict(vocab_size=enc.vocab_size_, emb_dim=8, hidden=4, dense_hidden=4, max_epochs=3, random_state=5)
    a = BiLSTMClassifier(**kw).fit(X, y, validation_data=(Xv, yv))
    b = BiLSTMClassifier(**kw).fit(X, y, validation_data=(Xv, yv))
    assert a.curves_csv() == b.curves_csv()
    lines = a.curves_csv().splitlines()
    assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc,val_macro_f1"
    assert len(lines) == 1 + len(a.curves_)


def test_internal_holdout_and_errors():
    enc, X, y, Xv, yv = _encoded(90, 30)
    model = BiLSTMClassifier(emb_dim=4, hidden=2, dense_hidden=2, max_epochs=1).fit(X, y)
    assert model.predict(X[:5]).shape == (5,)
    with pytest.raises(ValueError):
        BiLSTMClassifier(max_epochs=1).fit(X, y, validation_data=(Xv[:0], yv[:0]))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    enc, X, y, Xv, yv = _encoded(90, 30)
    with pytest.raises(DivergenceError, match="diverged"):
        BiLSTMClassifier(emb_dim=4, hidden=2, dense_hidden=2, lr=np.inf, clip_norm=None).fit(
            X, y, validation_data=(Xv, yv))
