"""Indonesian review normalization.

The cleaning pipeline runs case folding, noise stripping, character filtering,
whitespace tokenization, slang normalization and stopword removal, always in
that order. :class:`TextPreprocessor` wraps it as a scikit-learn transformer
so it can sit at the head of a :class:`sklearn.pipeline.Pipeline`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

_URL_RE = re.compile(r"(?:\b[a-z][a-z0-9+.\-]*://|\bwww\.)\S*", re.IGNORECASE)
_TAG_RE = re.compile(r"<[^<>]*>")
_SPACE_RE = re.compile(r"\s+")


def _read_data_file(name: str) -> str:
    return resources.files("sentibench.data").joinpath(name).read_text(encoding="utf-8")


def _content_lines(text: str) -> Iterable[str]:
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            yield line


@dataclass(frozen=True)
class SlangLexicon:
    """Slang token to canonical form mapping.

    Lookup is total: a token missing from the lexicon maps to itself.
    Canonical forms may hold several words ("gaada" -> "tidak ada").
    """

    entries: Mapping[str, str]
    source: str | None = None

    def __post_init__(self):
        entries = {}
        for key, value in self.entries.items():
            key = key.strip().lower()
            value = " ".join(value.lower().split())
            if not key or not value:
                raise ValueError(f"empty slang entry: {key!r} -> {value!r}")
            if key == value:
                raise ValueError(f"slang entry maps to itself: {key!r}")
            entries[key] = value
        # a canonical word that is also a key would make cleaning non-idempotent
        chained = sorted({w for v in entries.values() for w in v.split()} & entries.keys())
        if chained:
            raise ValueError(f"canonical forms must not be slang keys: {chained[:5]}")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def lookup(self, token: str) -> str:
        return self.entries.get(token, token)

    @classmethod
    def parse(cls, text: str, source: str | None = None) -> "SlangLexicon":
        entries = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) != 2:
                raise ValueError(f"{source or 'lexicon'}:{lineno}: expected 'slang<TAB>canonical'")
            entries[parts[0]] = parts[1]
        return cls(entries, source)

    @classmethod
    def from_file(cls, path) -> "SlangLexicon":
        path = Path(path)
        return cls.parse(path.read_text(encoding="utf-8"), str(path))

    @classmethod
    @lru_cache(maxsize=None)
    def bundled(cls) -> "SlangLexicon":
        return cls.parse(_read_data_file("slang_id.tsv"), "bundled:slang_id.tsv")


@dataclass(frozen=True)
class StopwordList:
    words: frozenset = field(default_factory=frozenset)
    source: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "words", frozenset(w.strip().lower() for w in self.words if w.strip()))

    def __contains__(self, token):
        return token in self.words

    def __len__(self):
        return len(self.words)

    @classmethod
    def parse(cls, text: str, source: str | None = None) -> "StopwordList":
        return cls(frozenset(_content_lines(text)), source)

    @classmethod
    def from_file(cls, path) -> "StopwordList":
        path = Path(path)
        return cls.parse(path.read_text(encoding="utf-8"), str(path))

    @classmethod
    @lru_cache(maxsize=None)
    def bundled(cls) -> "StopwordList":
        return cls.parse(_read_data_file("stopwords_id.txt"), "bundled:stopwords_id.txt")


def load_emoji_map(text: str | None = None) -> dict[str, str]:
    """Parse an ``emoji<TAB>token`` table; defaults to the bundled one."""
    if text is None:
        text = _read_data_file("emoji_id.tsv")
    mapping = {}
    for line in _content_lines(text):
        emoji, token = line.split("\t")
        mapping[emoji] = token.strip().lower()
    return mapping


_EMOJI_MAP = load_emoji_map()


@dataclass(frozen=True)
class CleanDocument:
    tokens: tuple
    original_id: int | None = None

    def __len__(self):
        return len(self.tokens)

    def text(self) -> str:
        return " ".join(self.tokens)


def case_fold(text: str) -> str:
    return text.lower()


def strip_noise(text: str) -> str:
    """Remove URLs and HTML tags, then collapse whitespace."""
    text = _TAG_RE.sub(" ", text)
    text = _URL_RE.sub(" ", text)
    return _SPACE_RE.sub(" ", text).strip()


def filter_chars(text: str, emoji_map: Mapping[str, str] | None = None) -> str:
    """Keep letters, digits and single spaces.

    Mapped emoji become sentiment tokens first; every other character that is
    not alphanumeric turns into a space.
    """
    if emoji_map is None:
        emoji_map = _EMOJI_MAP
    out = []
    for ch in text:
        if ch.isalnum():
            out.append(ch)
        elif ch in emoji_map:
            out.append(f" {emoji_map[ch]} ")
        else:
            out.append(" ")
    return " ".join("".join(out).split())


def tokenize(text: str) -> list[str]:
    return text.split()


def normalize_slang(tokens: Sequence[str], lexicon: SlangLexicon) -> list[str]:
    out = []
    for tok in tokens:
        out.extend(lexicon.lookup(tok).split())
    return out


def remove_stopwords(tokens: Sequence[str], stopwords: StopwordList) -> list[str]:
    return [t for t in tokens if t not in stopwords]


def preprocess(
    text: str,
    lexicon: SlangLexicon | None = None,
    stopwords: StopwordList | None = None,
    original_id: int | None = None,
) -> CleanDocument:
    if lexicon is None:
        lexicon = SlangLexicon.bundled()
    if stopwords is None:
        stopwords = StopwordList.bundled()
    text = filter_chars(strip_noise(case_fold(text)))
    tokens = normalize_slang(tokenize(text), lexicon)
    return CleanDocument(tuple(remove_stopwords(tokens, stopwords)), original_id)


class TextPreprocessor(TransformerMixin, BaseEstimator):
    """Turn raw review strings into lists of clean tokens.

    Parameters
    ----------
    lexicon : SlangLexicon, dict or None
        Slang map. ``None`` uses the bundled Indonesian lexicon.
    stopwords : StopwordList, iterable of str or None
        ``None`` uses the bundled Indonesian list.
    """

    def __init__(self, lexicon=None, stopwords=None):
        self.lexicon = lexicon
        self.stopwords = stopwords

    def _resolved(self):
        lexicon = self.lexicon
        if lexicon is None:
            lexicon = SlangLexicon.bundled()
        elif not isinstance(lexicon, SlangLexicon):
            lexicon = SlangLexicon(dict(lexicon))
        stopwords = self.stopwords
        if stopwords is None:
            stopwords = StopwordList.bundled()
        elif not isinstance(stopwords, StopwordList):
            stopwords = StopwordList(frozenset(stopwords))
        return lexicon, stopwords

    def fit(self, X=None, y=None):
        self.lexicon_, self.stopwords_ = self._resolved()
        return self

    def clean(self, texts: Iterable[str]) -> list[CleanDocument]:
        if not hasattr(self, "lexicon_"):
            self.fit()
        return [preprocess(t, self.lexicon_, self.stopwords_, i) for i, t in enumerate(texts)]

    def transform(self, X):
        if isinstance(X, str):
            raise TypeError("expected an iterable of strings, got a single string")
        return [list(doc.tokens) for doc in self.clean(X)]
