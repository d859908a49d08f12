"""Model families as scikit-learn pipelines, and prediction records."""
from __future__ import annotations

import numpy as np
from sklearn.pipeline import Pipeline

from .bilstm import BiLSTMClassifier, SequenceEncoder
from .gbdt import GBDTClassifier
from .linear import PegasosSVM, SoftmaxRegression
from .text import TextPreprocessor
from .tfidf import TfidfVectorizer

CLASSICAL = ("logistic", "svm_linear", "gbdt")
FAMILY_ALIASES = {"svm": "svm_linear", "lr": "logistic", "lightgbm": "gbdt", "lstm": "bilstm"}
DISPLAY_NAMES = {
    "gbdt": "Gradient Boosting (histogram)",
    "logistic": "Logistic Regression",
    "svm_linear": "SVM - Linear Kernel",
    "bilstm": "BiLSTM",
}
ESTIMATORS = {
    "logistic": SoftmaxRegression,
    "svm_linear": PegasosSVM,
    "gbdt": GBDTClassifier,
    "bilstm": BiLSTMClassifier,
}
NO_SIGNAL_LABEL = "neutral"


def canonical_family(name: str) -> str:
    name = name.strip().lower().replace("-", "_")
    name = FAMILY_ALIASES.get(name, name)
    if name not in ESTIMATORS:
        raise ValueError(f"unknown model family {name!r}; choose from {', '.join(ESTIMATORS)}")
    return name


def make_classifier(family: str, **params):
    return ESTIMATORS[canonical_family(family)](**params)


def make_pipeline(family: str, params=None, max_features=5000, max_vocab=10_000, max_seq_len=64,
                  lexicon=None, stopwords=None) -> Pipeline:
    family = canonical_family(family)
    params = dict(params or {})
    if family == "bilstm":
        features = SequenceEncoder(max_size=max_vocab, max_seq_len=max_seq_len)
    else:
        features = TfidfVectorizer(max_features=max_features)
    return Pipeline([
        ("prep", TextPreprocessor(lexicon, stopwords)),
        ("features", features),
        ("model", make_classifier(family, **params)),
    ])


class Predictor:
    """Prediction records for raw texts from a fitted pipeline.

    A text that cleans down to no tokens gets ``no_signal: true``, uniform
    probabilities and the label ``"neutral"``.
    """

    def __init__(self, pipeline: Pipeline, family: str):
        self.pipeline = pipeline
        self.family = family
        self.prep = pipeline.named_steps["prep"]
        self.labels = [str(c) for c in pipeline.steps[-1][1].classes_]

    def _scores(self, token_lists):
        tail = self.pipeline[1:]
        if hasattr(tail, "predict_proba") and self.family != "svm_linear":
            return tail.predict_proba(token_lists), True
        return tail.decision_function(token_lists), False

    def predict_tokens(self, token_lists):
        token_lists = [list(t) for t in token_lists]
        records = [None] * len(token_lists)
        live = [i for i, t in enumerate(token_lists) if t]
        if live:
            scores, is_proba = self._scores([token_lists[i] for i in live])
            for row, i in zip(scores, live):
                values = {label: float(v) for label, v in zip(self.labels, row)}
                records[i] = {
                    "label": self.labels[int(np.argmax(row))],
                    "probabilities": values if is_proba else None,
                    "model_family": self.family,
                    "no_signal": False,
                }
                if not is_proba:
                    records[i]["scores"] = values
        uniform = 1.0 / len(self.labels)
        for i, rec in enumerate(records):
            if rec is None:
                label = NO_SIGNAL_LABEL if NO_SIGNAL_LABEL in self.labels else self.labels[0]
                records[i] = {
                    "label": label,
                    "probabilities": {label_: uniform for label_ in self.labels},
                    "model_family": self.family,
                    "no_signal": True,
                }
        return records

    def predict_texts(self, texts):
        return self.predict_tokens(self.prep.transform(list(texts)))

    def predict_text(self, text: str):
        return self.predict_texts([text])[0]
