"""Binary model artifacts.

Layout (all integers little-endian)::

    magic      8 bytes   b"SENTIBv1"
    section*   u16 name length, name (utf-8), u64 payload length, payload
    "end"      u32 CRC-32 of every byte before the "end" section

Sections, in order: ``header`` (JSON: family, labels, metadata, step
names), then one section per pipeline step (``prep``, ``features``,
``model``). A step payload is a u32-prefixed JSON config followed by a u32
array count and the arrays, each written as u16 name length, name, u8 dtype
code, u8 ndim, u64 per dimension and the raw little-endian buffer.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import io
import json
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.pipeline import Pipeline

from . import __version__
from .bilstm import PARAM_NAMES, BiLSTMClassifier, SequenceEncoder
from .gbdt import GBDTClassifier, RegressionTree
from .linear import PegasosSVM, SoftmaxRegression
from .text import SlangLexicon, StopwordList, TextPreprocessor
from .tfidf import TfidfVectorizer

MAGIC_PREFIX = b"SENTIBv"
FORMAT_VERSION = 1
MAGIC = MAGIC_PREFIX + str(FORMAT_VERSION).encode()

FAMILIES = {
    SoftmaxRegression: "logistic",
    PegasosSVM: "svm_linear",
    GBDTClassifier: "gbdt",
    BiLSTMClassifier: "bilstm",
}

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i4"), 3: np.dtype("<i8"), 4: np.dtype("|b1")}


def _dtype_code(dtype):
    for code, ref in _DTYPES.items():
        if dtype.kind == ref.kind and dtype.itemsize == ref.itemsize:
            return code
    return None


class ArtifactError(ValueError):
    pass


class NotAModelFile(ArtifactError):
    def __init__(self, path):
        super().__init__(f"{path}: not a model file")


class VersionError(ArtifactError):
    pass


@dataclass
class ModelArtifact:
    """A fitted preprocessing + feature + classifier pipeline."""

    pipeline: Pipeline
    family: str
    labels: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def classifier(self):
        return self.pipeline.steps[-1][1]

    def n_params(self) -> int:
        clf = self.classifier
        if isinstance(clf, BiLSTMClassifier):
            return clf.count_params()
        if isinstance(clf, GBDTClassifier):
            return int(sum(len(t.feature) for t in clf.trees_))
        return int(clf.coef_.size + clf.intercept_.size)


def family_of(estimator) -> str:
    for cls, name in FAMILIES.items():
        if isinstance(estimator, cls):
            return name
    raise ArtifactError(f"unsupported estimator {type(estimator).__name__}")


def config_hash(pipeline: Pipeline) -> str:
    parts = []
    for name, step in pipeline.steps:
        params = {k: v for k, v in step.get_params(deep=False).items() if isinstance(v, (int, float, str, type(None)))}
        parts.append([name, type(step).__name__, sorted(params.items())])
    return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()[:16]


def make_artifact(pipeline: Pipeline, seed=None, **extra) -> ModelArtifact:
    clf = pipeline.steps[-1][1]
    metadata = {
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "seed": seed,
        "config_hash": config_hash(pipeline),
        "sentibench_version": __version__,
        **extra,
    }
    return ModelArtifact(pipeline, family_of(clf), tuple(clf.classes_.tolist()), metadata)


# -- component state ------------------------------------------------------

def _plain_params(est):
    return {k: v for k, v in est.get_params(deep=False).items()}


def _state(est):
    """(json config, arrays) for one pipeline step."""
    kind = type(est).__name__
    if isinstance(est, TextPreprocessor):
        lex, sw = est._resolved() if not hasattr(est, "lexicon_") else (est.lexicon_, est.stopwords_)
        return {"kind": kind, "lexicon": dict(sorted(lex.entries.items())), "stopwords": sorted(sw.words)}, {}
    if isinstance(est, TfidfVectorizer):
        tokens = sorted(est.vocabulary_, key=est.vocabulary_.get)
        cfg = {"kind": kind, "params": _plain_params(est), "tokens": tokens, "n_docs_fit": est.n_docs_fit_}
        return cfg, {"idf": est.idf_, "df": est.document_frequency_}
    if isinstance(est, SequenceEncoder):
        tokens = sorted(est.token_to_id_, key=est.token_to_id_.get)
        return {"kind": kind, "params": _plain_params(est), "tokens": tokens}, {}
    base = {"kind": kind, "params": _plain_params(est), "classes": est.classes_.tolist()}
    if isinstance(est, (SoftmaxRegression, PegasosSVM)):
        base["training_log"] = list(est.training_log_)
        for attr in ("n_halvings_", "final_lr_", "n_updates_", "last_step_size_"):
            if hasattr(est, attr):
                base[attr] = getattr(est, attr)
        return base, {"coef": est.coef_, "intercept": est.intercept_}
    if isinstance(est, GBDTClassifier):
        base["training_log"] = list(est.training_log_)
        base["n_features_in"] = est.n_features_in_
        arrays = {
            "edge_offsets": np.concatenate([[0], np.cumsum([len(e) for e in est.bin_edges_])]).astype(np.int64),
            "edges": np.concatenate([np.asarray(e, dtype=np.float64) for e in est.bin_edges_] or [np.empty(0)]),
            "tree_offsets": np.concatenate([[0], np.cumsum([len(t.feature) for t in est.trees_])]).astype(np.int64),
        }
        for fname in ("feature", "threshold", "zero_left", "left", "right", "value", "n_samples", "gain"):
            parts = [getattr(t, fname) for t in est.trees_]
            arrays[f"tree_{fname}"] = np.concatenate(parts) if parts else np.empty(0)
        arrays["tree_zero_left"] = arrays["tree_zero_left"].astype(bool)
        return base, arrays
    if isinstance(est, BiLSTMClassifier):
        base["curves"] = est.curves_
        base["n_params"] = est.count_params()
        base["best_epoch"] = getattr(est, "best_epoch_", None)
        return base, {k: est.params_[k] for k in PARAM_NAMES}
    raise ArtifactError(f"cannot serialize {kind}")


def _restore(cfg, arrays):
    kind = cfg["kind"]
    if kind == "TextPreprocessor":
        est = TextPreprocessor(SlangLexicon(cfg["lexicon"], "artifact"), StopwordList(frozenset(cfg["stopwords"]), "artifact"))
        return est.fit()
    if kind == "TfidfVectorizer":
        est = TfidfVectorizer(**cfg["params"])
        est.vocabulary_ = {t: i for i, t in enumerate(cfg["tokens"])}
        est.idf_ = arrays["idf"]
        est.document_frequency_ = arrays["df"]
        est.n_docs_fit_ = cfg["n_docs_fit"]
        return est
    if kind == "SequenceEncoder":
        est = SequenceEncoder(**cfg["params"])
        est.token_to_id_ = {t: i for i, t in enumerate(cfg["tokens"])}
        return est
    classes = np.array(cfg["classes"])
    if kind in ("SoftmaxRegression", "PegasosSVM"):
        est = (SoftmaxRegression if kind == "SoftmaxRegression" else PegasosSVM)(**cfg["params"])
        est.classes_ = classes
        est.coef_, est.intercept_ = arrays["coef"], arrays["intercept"]
        est.training_log_ = cfg["training_log"]
        for attr in ("n_halvings_", "final_lr_", "n_updates_", "last_step_size_"):
            if attr in cfg:
                setattr(est, attr, cfg[attr])
        return est
    if kind == "GBDTClassifier":
        est = GBDTClassifier(**cfg["params"])
        est.classes_ = classes
        est.n_features_in_ = cfg["n_features_in"]
        est.training_log_ = cfg["training_log"]
        eo = arrays["edge_offsets"]
        est.bin_edges_ = [arrays["edges"][eo[i]:eo[i + 1]] for i in range(len(eo) - 1)]
        to = arrays["tree_offsets"]
        est.trees_ = [
            RegressionTree(*(arrays[f"tree_{f}"][to[i]:to[i + 1]]
                             for f in ("feature", "threshold", "zero_left", "left", "right", "value", "n_samples", "gain")))
            for i in range(len(to) - 1)
        ]
        return est
    if kind == "BiLSTMClassifier":
        est = BiLSTMClassifier(**cfg["params"])
        est.classes_ = classes
        est.params_ = {k: arrays[k] for k in PARAM_NAMES}
        est.curves_ = cfg["curves"]
        est.n_params_ = cfg["n_params"]
        if cfg.get("best_epoch") is not None:
            est.best_epoch_ = cfg["best_epoch"]
        return est
    raise ArtifactError(f"unknown component kind {kind!r}")


# -- byte encoding --------------------------------------------------------

def _encode_array(buf, name, arr):
    arr = np.asarray(arr)
    code = _dtype_code(arr.dtype)
    if code is None:
        arr = arr.astype(np.float64 if arr.dtype.kind == "f" else np.int64)
        code = _dtype_code(arr.dtype)
    raw = name.encode()
    buf.write(struct.pack("<H", len(raw)) + raw)
    buf.write(struct.pack("<BB", code, arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    buf.write(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())


def _encode_step(cfg, arrays):
    buf = io.BytesIO()
    raw = json.dumps(cfg, ensure_ascii=False, sort_keys=True).encode()
    buf.write(struct.pack("<I", len(raw)) + raw)
    buf.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        _encode_array(buf, name, arrays[name])
    return buf.getvalue()


class _Reader:
    def __init__(self, data, section):
        self.data, self.pos, self.section = data, 0, section

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ArtifactError(f"truncated model file in section {self.section!r}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _decode_step(payload, section):
    r = _Reader(payload, section)
    (n,) = r.unpack("<I")
    try:
        cfg = json.loads(r.take(n).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"corrupt config in section {section!r}: {exc}") from None
    (count,) = r.unpack("<I")
    arrays = {}
    for _ in range(count):
        (ln,) = r.unpack("<H")
        name = r.take(ln).decode("utf-8")
        code, ndim = r.unpack("<BB")
        if code not in _DTYPES:
            raise ArtifactError(f"unknown dtype code {code} in section {section!r}")
        shape = r.unpack(f"<{ndim}Q") if ndim else ()
        dtype = _DTYPES[code]
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        arr = np.frombuffer(r.take(size), dtype=dtype).reshape(shape)
        arrays[name] = arr.astype(dtype.newbyteorder("="), copy=True)
    return cfg, arrays


def dumps(artifact: ModelArtifact) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC)

    def section(name, payload):
        raw = name.encode()
        out.write(struct.pack("<H", len(raw)) + raw + struct.pack("<Q", len(payload)) + payload)

    header = {
        "family": artifact.family,
        "labels": list(artifact.labels),
        "metadata": artifact.metadata,
        "steps": [name for name, _ in artifact.pipeline.steps],
    }
    section("header", json.dumps(header, sort_keys=True).encode())
    for name, step in artifact.pipeline.steps:
        section(name, _encode_step(*_state(step)))
    crc = zlib.crc32(out.getvalue())
    section("end", struct.pack("<I", crc))
    return out.getvalue()


def loads(data: bytes, source="<bytes>") -> ModelArtifact:
    if len(data) < len(MAGIC) or not data.startswith(MAGIC_PREFIX):
        raise NotAModelFile(source)
    tag = data[len(MAGIC_PREFIX):len(MAGIC)]
    if tag != MAGIC[len(MAGIC_PREFIX):]:
        raise VersionError(f"{source}: model format version {tag.decode('ascii', 'replace')!r} "
                           f"is not supported (this build reads version {FORMAT_VERSION})")
    r = _Reader(data, "header")
    r.pos = len(MAGIC)
    sections = {}
    order = []
    while True:
        start = r.pos
        r.section = order[-1] if order else "header"
        (ln,) = r.unpack("<H")
        name = r.take(ln).decode("utf-8", "replace")
        r.section = name
        (size,) = r.unpack("<Q")
        payload = r.take(size)
        if name == "end":
            (crc,) = struct.unpack("<I", payload)
            if zlib.crc32(data[:start]) != crc:
                raise ArtifactError(f"{source}: checksum mismatch")
            break
        sections[name] = payload
        order.append(name)
    try:
        header = json.loads(sections["header"].decode("utf-8"))
    except (KeyError, ValueError) as exc:
        raise ArtifactError(f"{source}: bad header section ({exc})") from None
    steps = []
    for name in header["steps"]:
        if name not in sections:
            raise ArtifactError(f"{source}: missing section {name!r}")
        steps.append((name, _restore(*_decode_step(sections[name], name))))
    pipeline = Pipeline(steps)
    return ModelArtifact(pipeline, header["family"], tuple(header["labels"]), header["metadata"])


def save(artifact: ModelArtifact, path) -> None:
    """Write atomically: a temp file in the target directory, then rename."""
    path = Path(path)
    data = dumps(artifact)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load(path) -> ModelArtifact:
    path = Path(path)
    return loads(path.read_bytes(), str(path))
