import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.feature_extraction.text import TfidfVectorizer as SkTfidf

from sentibench.text import CleanDocument
from sentibench.tfidf import TfidfVectorizer

IDF_B = math.log(3 / 2) + 1


def brute_force_tfidf(train, docs, max_features):
    """Dense reference: explicit df/idf tables and per-document loops."""
    n = len(train)
    df = Counter()
    for doc in train:
        for tok in set(doc):
            df[tok] += 1
    ranked = sorted(df, key=lambda t: (-df[t], t))[:max_features]
    vocab = sorted(ranked)
    idf = {t: math.log((1 + n) / (1 + df[t])) + 1 for t in vocab}
    out = np.zeros((len(docs), len(vocab)))
    for r, doc in enumerate(docs):
        counts = Counter(doc)
        row = [counts[t] * idf[t] for t in vocab]
        norm = math.sqrt(sum(v * v for v in row))
        if norm > 0:
            out[r] = [v / norm for v in row]
    return vocab, out


def test_idf_examples():
    vec = TfidfVectorizer().fit([["a", "b"], ["a", "c"]])
    idf = dict(zip(vec.get_feature_names_out(), vec.idf_))
    assert abs(idf["a"] - 1.0) <= 1e-12
    assert abs(idf["b"] - IDF_B) <= 1e-12 and abs(idf["c"] - IDF_B) <= 1e-12
    row = vec.transform([["a", "b"]]).toarray()[0]
    assert row[vec.vocabulary_["a"]] == pytest.approx(0.579739, abs=1e-6)
    assert row[vec.vocabulary_["b"]] == pytest.approx(0.814802, abs=1e-6)
    norm = math.hypot(1.0, IDF_B)
    assert abs(row[vec.vocabulary_["a"]] - 1.0 / norm) <= 1e-12


def test_cap_and_determinism():
    docs = [["a", "b"], ["a", "c"]]
    assert TfidfVectorizer(max_features=1).fit(docs).vocabulary_ == {"a": 0}
    a, b = TfidfVectorizer().fit(docs), TfidfVectorizer().fit(docs)
    assert a.vocabulary_ == b.vocabulary_ and np.array_equal(a.idf_, b.idf_)


def test_tie_break_is_lexicographic():
    vec = TfidfVectorizer(max_features=2).fit([["z", "y", "x"], ["q"]])
    assert list(vec.get_feature_names_out()) == ["q", "x"]
    # a higher df beats the alphabet
    vec = TfidfVectorizer(max_features=2).fit([["z", "y", "x"], ["q", "z"]])
    assert list(vec.get_feature_names_out()) == ["q", "z"]


def test_empty_and_oov_rows():
    vec = TfidfVectorizer().fit([["a", "b"], ["a", "c"]])
    X = vec.transform([[], ["zzz", "yyy"], CleanDocument(("a",))])
    assert X.shape == (3, 3)
    assert X[0].nnz == 0 and X[1].nnz == 0
    assert X[2].toarray()[0].tolist() == [1.0, 0.0, 0.0]


def test_errors():
    with pytest.raises(ValueError, match="empty vocabulary"):
        TfidfVectorizer().fit([[], []])
    with pytest.raises(ValueError):
        TfidfVectorizer().fit([])
    with pytest.raises(TypeError):
        TfidfVectorizer().fit(["raw text"])


def test_matches_sklearn_without_cap():
    rng = np.random.default_rng(0)
    docs = [[f"w{rng.integers(20)}" for _ in range(rng.integers(1, 15))] for _ in range(40)]
    ours = TfidfVectorizer(max_features=10_000).fit(docs)
    sk = SkTfidf(analyzer=lambda d: d, smooth_idf=True, norm="l2", sublinear_tf=False).fit(docs)
    assert list(ours.get_feature_names_out()) == list(sk.get_feature_names_out())
    np.testing.assert_allclose(ours.transform(docs).toarray(), sk.transform(docs).toarray(), atol=1e-12)


corpora = st.lists(
    st.lists(st.sampled_from([f"t{i}" for i in range(30)]), max_size=30),
    min_size=1,
    max_size=50,
).filter(lambda docs: any(docs))


def oracle_check(train, test, max_features):
    vec = TfidfVectorizer(max_features=max_features).fit(train)
    vocab, expected = brute_force_tfidf(train, train + test, max_features)
    got = vec.transform(train + test).toarray()
    assert list(vec.get_feature_names_out()) == vocab
    return float(np.max(np.abs(got - expected))) if got.size else 0.0


@settings(max_examples=200, deadline=None)
@given(corpora, st.lists(st.lists(st.sampled_from([f"t{i}" for i in range(40)]), max_size=30), max_size=5),
       st.integers(1, 40))
def test_oracle_equivalence(train, test, max_features):
    assert oracle_check(train, test, max_features) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(corpora)
def test_norm_and_idf_invariants(train):
    vec = TfidfVectorizer().fit(train)
    assert np.all(vec.idf_ >= 1.0)
    X = vec.transform(train)
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    nonzero = norms > 0
    assert np.all(np.abs(norms[nonzero] - 1.0) <= 1e-12)
    assert np.all(X.data > 0)
    df = vec.document_frequency_
    for i in range(len(df)):
        for j in range(len(df)):
            if df[i] > df[j]:
                assert vec.idf_[i] < vec.idf_[j]
    assert len(vec.vocabulary_) == min(5000, len({t for d in train for t in d}))
