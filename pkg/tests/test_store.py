import os
import struct

import numpy as np
import pytest

from conftest import random_texts
from sentibench import store
from sentibench.bilstm import BiLSTMClassifier, SequenceEncoder, param_count
from sentibench.pipeline import Predictor
from sentibench.text import TextPreprocessor
from sklearn.pipeline import Pipeline

FAMILIES = ("logistic", "svm_linear", "gbdt", "bilstm")


def raw_scores(artifact, texts):
    tail = artifact.pipeline[1:]
    tokens = artifact.pipeline.named_steps["prep"].transform(texts)
    if artifact.family == "svm_linear":
        return tail.decision_function(tokens)
    return tail.predict_proba(tokens)


@pytest.mark.parametrize("family", FAMILIES)
def test_roundtrip_bit_exact(family, fitted_artifacts, small_corpus, tmp_path):
    art = fitted_artifacts[family]
    path = tmp_path / f"{family}.sentib"
    store.save(art, path)
    back = store.load(path)
    texts = random_texts(small_corpus, 100, seed=FAMILIES.index(family))
    before, after = raw_scores(art, texts), raw_scores(back, texts)
    assert before.dtype == after.dtype and before.tobytes() == after.tobytes()
    assert Predictor(art.pipeline, family).predict_texts(texts) == Predictor(back.pipeline, family).predict_texts(texts)
    assert back.family == family and back.labels == art.labels and back.metadata == art.metadata
    assert back.n_params() == art.n_params()
    # bytes are reproducible too
    assert store.dumps(back) == store.dumps(art)


def test_logistic_weight_bytes(fitted_artifacts):
    art = fitted_artifacts["logistic"]
    back = store.loads(store.dumps(art))
    assert back.classifier.coef_.tobytes() == art.classifier.coef_.tobytes()
    assert back.classifier.intercept_.tobytes() == art.classifier.intercept_.tobytes()


def test_self_contained_preprocessing(fitted_artifacts):
    back = store.loads(store.dumps(fitted_artifacts["logistic"]))
    prep = back.pipeline.named_steps["prep"]
    assert prep.lexicon_.source == "artifact"
    assert prep.transform(["gk bgt"]) == TextPreprocessor().fit().transform(["gk bgt"])


def test_full_size_bilstm_file_size(tmp_path):
    model = BiLSTMClassifier(vocab_size=10_000).init(10_000)
    model.classes_ = np.array(["negative", "neutral", "positive"])
    model.curves_ = []
    enc = SequenceEncoder(max_size=10_000, max_seq_len=64).fit([[f"w{i}" for i in range(9_998)]])
    pipe = Pipeline([("prep", TextPreprocessor().fit()), ("features", enc), ("model", model)])
    path = tmp_path / "big.sentib"
    store.save(store.make_artifact(pipe, seed=0), path)
    size = path.stat().st_size
    weights = 4 * param_count(10_000)
    assert weights < size < weights + 512 * 1024
    assert store.load(path).n_params() == 1_387_267


def test_header_layout(fitted_artifacts):
    data = store.dumps(fitted_artifacts["gbdt"])
    assert data[:8] == b"SENTIBv1"
    (n,) = struct.unpack("<H", data[8:10])
    assert data[10:10 + n] == b"header"
    (end_len,) = struct.unpack("<H", data[-17:-15])
    assert end_len == 3 and data[-15:-12] == b"end" and struct.unpack("<Q", data[-12:-4]) == (4,)


def test_bad_magic(tmp_path):
    p = tmp_path / "x.sentib"
    p.write_bytes(b"PK\x03\x04 definitely a zip")
    with pytest.raises(store.NotAModelFile, match="not a model file"):
        store.load(p)
    p.write_bytes(b"")
    with pytest.raises(store.NotAModelFile):
        store.load(p)


def test_future_version(fitted_artifacts):
    data = bytearray(store.dumps(fitted_artifacts["logistic"]))
    data[7:8] = b"9"
    with pytest.raises(store.VersionError, match="version '9'"):
        store.loads(bytes(data))


def test_truncation_names_section(fitted_artifacts):
    data = store.dumps(fitted_artifacts["svm_linear"])
    with pytest.raises(store.ArtifactError, match="truncated model file in section 'model'"):
        store.loads(data[: len(data) - 200])
    with pytest.raises(store.ArtifactError, match="truncated"):
        store.loads(data[:12])


def test_checksum(fitted_artifacts):
    data = bytearray(store.dumps(fitted_artifacts["logistic"]))
    data[len(data) // 2] ^= 0xFF
    with pytest.raises(store.ArtifactError):
        store.loads(bytes(data))


def test_unwritable_path(fitted_artifacts, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        store.save(fitted_artifacts["logistic"], blocker / "m.sentib")


def test_missing_directory_and_no_partial_file(fitted_artifacts, tmp_path):
    with pytest.raises(OSError):
        store.save(fitted_artifacts["logistic"], tmp_path / "nope" / "m.sentib")
    target = tmp_path / "m.sentib"
    store.save(fitted_artifacts["logistic"], target)
    assert sorted(os.listdir(tmp_path)) == ["m.sentib"]


def test_unsupported_estimator():
    with pytest.raises(store.ArtifactError, match="unsupported"):
        store.family_of(object())
