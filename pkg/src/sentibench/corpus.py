"""Corpus ingestion, stratified splitting and cross-validation fold plans."""
from __future__ import annotations

import csv
import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

LABELS = ("negative", "neutral", "positive")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}

_MASK64 = (1 << 64) - 1


class CorpusError(ValueError):
    """Raised for unreadable or schema-violating corpus files."""


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood 2014), 64-bit state.

    Used for every split and fold shuffle so plans are identical on any
    platform and numpy version.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def shuffle(self, items: list) -> list:
        """Fisher-Yates shuffle, in place; returns ``items``."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items


def derive_seed(seed: int, *keys: int) -> int:
    """Mix extra integers into ``seed``; used for per-fold and per-trial seeds."""
    value = seed & _MASK64
    for key in keys:
        value = SplitMix64(value ^ ((key * 0x9E3779B97F4A7C15) & _MASK64)).next_u64()
    return value >> 1  # keep it a non-negative int63 for numpy


@dataclass(frozen=True)
class LabeledExample:
    id: int
    text: str
    label: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.label not in LABEL_INDEX:
            raise CorpusError(f"unknown label {self.label!r}")
        if not unicodedata.normalize("NFC", self.text).strip():
            raise CorpusError(f"example {self.id}: empty text")

    @property
    def y(self) -> int:
        return LABEL_INDEX[self.label]


def parse_label(value, row: int) -> str:
    name = str(value).strip().lower()
    if name not in LABEL_INDEX:
        raise CorpusError(f"row {row}: unknown label {value!r} (expected one of {', '.join(LABELS)})")
    return name


def _make_examples(records, text_field, label_field, source):
    examples = []
    for row, record in records:
        if text_field not in record:
            raise CorpusError(f"{source}: missing field {text_field!r}")
        if label_field not in record:
            raise CorpusError(f"{source}: missing field {label_field!r}")
        text = record[text_field]
        if text is None or not unicodedata.normalize("NFC", str(text)).strip():
            raise CorpusError(f"row {row}: empty text")
        label = parse_label(record[label_field], row)
        meta = {k: v for k, v in record.items() if k not in (text_field, label_field)}
        examples.append(LabeledExample(len(examples), str(text), label, meta))
    if not examples:
        raise CorpusError("empty corpus")
    return examples


def load_corpus(path, format: str | None = None, text_field: str = "comment",
                label_field: str = "sentiment") -> list[LabeledExample]:
    """Read a CSV or JSON-lines corpus.

    Row numbers in error messages are 1-based data rows (the CSV header is
    not counted). Columns other than the text and label go to ``meta``.
    """
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix.lower() in (".jsonl", ".json", ".ndjson") else "csv"
    format = format.lower()
    if format == "csv":
        with path.open(newline="", encoding="utf-8-sig") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames
            if header is None:
                raise CorpusError("empty corpus")
            for name in (text_field, label_field):
                if name not in header:
                    raise CorpusError(f"{path}: missing column {name!r}")
            return _make_examples(enumerate(reader, 1), text_field, label_field, path)
    if format == "jsonl":
        def records():
            with path.open(encoding="utf-8") as fh:
                row = 0
                for line in fh:
                    if not line.strip():
                        continue
                    row += 1
                    try:
                        obj = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise CorpusError(f"row {row}: invalid JSON ({exc.msg})") from None
                    if not isinstance(obj, dict):
                        raise CorpusError(f"row {row}: expected a JSON object")
                    yield row, obj
        return _make_examples(records(), text_field, label_field, path)
    raise CorpusError(f"unsupported corpus format {format!r}")


def write_jsonl(examples: Sequence[LabeledExample], path, text_field="comment", label_field="sentiment"):
    with Path(path).open("w", encoding="utf-8") as fh:
        for ex in examples:
            record = {text_field: ex.text, label_field: ex.label, **ex.meta}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _largest_remainder(total: int, ratios: Sequence[float]) -> list[int]:
    quotas = [total * r for r in ratios]
    counts = [int(np.floor(q)) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    # earlier parts win ties so the rule is deterministic
    order = sorted(range(len(ratios)), key=lambda i: (-remainders[i], i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def _group_by_label(ids, labels):
    groups: dict = {}
    for i, label in zip(ids, labels):
        groups.setdefault(label, []).append(i)
    return {label: groups[label] for label in sorted(groups, key=str)}


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    validation: list
    test: list
    seed: int
    ratios: tuple

    @property
    def parts(self) -> dict:
        return {"train": self.train, "validation": self.validation, "test": self.test}

    def to_json(self) -> str:
        doc = {"seed": self.seed, "ratios": list(self.ratios), **self.parts}
        return json.dumps(doc, indent=None, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetSplit":
        doc = json.loads(text)
        return cls(doc["train"], doc["validation"], doc["test"], doc["seed"], tuple(doc["ratios"]))


def stratified_split(corpus: Sequence[LabeledExample], ratios=(0.8, 0.1, 0.1), seed: int = 0) -> DatasetSplit:
    """Stratified three-way split with per-class largest-remainder allocation.

    Each class is shuffled with :class:`SplitMix64` seeded by ``seed`` and
    cut into consecutive runs sized by its allocation. Ids inside each part
    are returned in ascending order.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive fractions summing to 1, got {ratios}")
    groups = _group_by_label([ex.id for ex in corpus], [ex.label for ex in corpus])
    if len({ex.id for ex in corpus}) != len(corpus):
        raise ValueError("example ids must be unique")
    rng = SplitMix64(seed)
    parts: list[list] = [[], [], []]
    for label, ids in groups.items():
        if len(ids) < len(ratios):
            raise ValueError(f"class {label!r} has {len(ids)} examples, fewer than {len(ratios)} split parts")
        counts = _largest_remainder(len(ids), ratios)
        shuffled = rng.shuffle(sorted(ids))
        start = 0
        for part, n in zip(parts, counts):
            part.extend(shuffled[start:start + n])
            start += n
    train, validation, test = (sorted(p) for p in parts)
    return DatasetSplit(train, validation, test, seed, ratios)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: dict
    seed: int

    def fold_ids(self, fold: int) -> list:
        return [i for i, f in self.assignments.items() if f == fold]

    def train_test(self, fold: int) -> tuple[list, list]:
        """Ids used for fitting and for scoring in ``fold``."""
        train = [i for i, f in self.assignments.items() if f != fold]
        test = [i for i, f in self.assignments.items() if f == fold]
        return train, test

    def to_json(self) -> str:
        folds = [self.fold_ids(f) for f in range(self.k)]
        return json.dumps({"seed": self.seed, "k": self.k, "folds": folds}, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FoldPlan":
        doc = json.loads(text)
        assignments = {i: f for f, ids in enumerate(doc["folds"]) for i in ids}
        return cls(doc["k"], dict(sorted(assignments.items())), doc["seed"])


def make_folds(ids: Sequence, labels: Sequence, k: int = 10, seed: int = 0) -> FoldPlan:
    """Stratified k-fold assignment.

    Each class is shuffled, then dealt round-robin; the starting fold for a
    class continues where the previous class stopped, which keeps total fold
    sizes within one of each other as well.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(ids) != len(labels):
        raise ValueError("ids and labels differ in length")
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    groups = _group_by_label(ids, labels)
    for label, members in groups.items():
        if len(members) < k:
            raise ValueError(f"class {label!r} has {len(members)} examples, fewer than k={k}")
    rng = SplitMix64(seed)
    assignments = {}
    offset = 0
    for members in groups.values():
        for pos, i in enumerate(rng.shuffle(sorted(members))):
            assignments[i] = (offset + pos) % k
        offset = (offset + len(members)) % k
    return FoldPlan(k, dict(sorted(assignments.items())), seed)
