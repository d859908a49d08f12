"""Capped-vocabulary TF-IDF over pre-tokenized documents."""
from __future__ import annotations

import math
from collections import Counter

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .text import CleanDocument


def _tokens(doc):
    if isinstance(doc, CleanDocument):
        return doc.tokens
    if isinstance(doc, str):
        raise TypeError("documents must be token sequences; run TextPreprocessor first")
    return doc


class TfidfVectorizer(TransformerMixin, BaseEstimator):
    """TF-IDF with smoothed idf and L2-normalized rows.

    ``idf(t) = ln((1 + N) / (1 + df(t))) + 1``. The vocabulary keeps the
    ``max_features`` tokens with the highest document frequency, ties broken
    lexicographically; column indices follow lexicographic token order.

    Documents with no in-vocabulary token become all-zero rows.
    """

    def __init__(self, max_features=5000):
        self.max_features = max_features

    def fit(self, X, y=None):
        if self.max_features < 1:
            raise ValueError("max_features must be >= 1")
        docs = [_tokens(d) for d in X]
        if not docs:
            raise ValueError("no documents to fit")
        df = Counter()
        for tokens in docs:
            df.update(set(tokens))
        if not df:
            raise ValueError("empty vocabulary")
        ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[: self.max_features]
        kept = sorted(token for token, _ in ranked)
        n_docs = len(docs)
        self.vocabulary_ = {token: i for i, token in enumerate(kept)}
        self.document_frequency_ = np.array([df[t] for t in kept], dtype=np.int64)
        self.idf_ = np.array([math.log((1 + n_docs) / (1 + df[t])) + 1.0 for t in kept])
        self.n_docs_fit_ = n_docs
        return self

    @property
    def n_features_out_(self):
        return len(self.vocabulary_)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "vocabulary_")
        return np.array(sorted(self.vocabulary_, key=self.vocabulary_.get), dtype=object)

    def transform(self, X):
        check_is_fitted(self, "vocabulary_")
        vocab = self.vocabulary_
        indptr = [0]
        indices: list[int] = []
        values: list[float] = []
        for doc in X:
            counts = Counter(vocab[t] for t in _tokens(doc) if t in vocab)
            cols = sorted(counts)
            row = np.array([counts[c] * self.idf_[c] for c in cols], dtype=np.float64)
            norm = math.sqrt(float(np.dot(row, row)))
            if norm > 0:
                row /= norm
            indices.extend(cols)
            values.extend(row.tolist())
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.array(values, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
            shape=(len(indptr) - 1, len(vocab)),
        )
