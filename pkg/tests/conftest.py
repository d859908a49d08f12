import sys
import numpy as np
import pytest

from sentibench.corpus import load_corpus
from sentibench.synthetic import bundled_path
from sentibench.text import TextPreprocessor


@pytest.fixture(scope="session")
def synthetic_corpus():
    return load_corpus(str(bundled_path()))


@pytest.fixture(scope="session")
def synthetic_tokens(synthetic_corpus):
    docs = TextPreprocessor().fit().transform([ex.text for ex in synthetic_corpus])
    return docs, np.array([ex.y for ex in synthetic_corpus])


@pytest.fixture(scope="session")
def small_corpus(synthetic_corpus):
    """300 documents, 100 per class."""
    return synthetic_corpus[:300]


def _fit_family(family, corpus):
    from sentibench.pipeline import make_pipeline

    params = {"random_state": 3}
    if family == "gbdt":
        params.update(n_rounds=8, max_leaves=7)
    elif family == "bilstm":
        params.update(emb_dim=8, hidden=4, dense_hidden=8, max_epochs=2)
    elif family == "logistic":
        params.update(epochs=10)
    pipe = make_pipeline(family, params, max_features=300, max_vocab=400, max_seq_len=24)
    return pipe.fit([ex.text for ex in corpus], [ex.label for ex in corpus])


@pytest.fixture(scope="session")
def fitted_artifacts(small_corpus):
    """One small fitted artifact per model family."""
    from sentibench.store import make_artifact

    return {
        family: make_artifact(_fit_family(family, small_corpus), seed=3)
        for family in ("logistic", "svm_linear", "gbdt", "bilstm")
    }


def random_texts(corpus, n, seed=0):
    """Corpus words, slang, emoji and junk shuffled into ``n`` new strings."""
    rng = np.random.default_rng(seed)
    words = sorted({w for ex in corpus for w in ex.text.split()})
    extras = ["gk", "bgt", "😊", "😡", "http://x.id/a", "<b>", "!!!", "12", "Ü", ""]
    pool = words + extras
    return [" ".join(rng.choice(pool, size=int(rng.integers(0, 15)))) for _ in range(n)]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
