"""Cross-validated benchmarking, random-search tuning and leaderboards."""
from __future__ import annotations

import csv
import io
import itertools
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .corpus import FoldPlan, SplitMix64, derive_seed, make_folds
from .metrics import NA, evaluate
from .pipeline import CLASSICAL, DISPLAY_NAMES, canonical_family, make_classifier
from .tfidf import TfidfVectorizer

METRICS = ("accuracy", "auc", "recall", "precision", "f1", "macro_f1", "kappa")
LEADERBOARD_COLUMNS = ("Model", "Accuracy", "AUC", "Recall", "Prec.", "F1", "Kappa", "TT (Sec)")
TIME_TIE_TOLERANCE = 0.25
_COLUMN_METRIC = {"Accuracy": "accuracy", "AUC": "auc", "Recall": "recall", "Prec.": "precision",
                  "F1": "f1", "Kappa": "kappa"}


@dataclass
class FoldResult:
    fold: int
    report: object
    seconds: float
    vocabulary: frozenset = frozenset()


@dataclass
class CVResult:
    family: str
    params: dict
    folds: list
    wall_time_s: float

    def values(self, metric):
        return [getattr(f.report, "as_dict")()[metric] for f in self.folds]

    def mean(self, metric):
        vals = self.values(metric)
        if any(v == NA for v in vals):
            return NA
        return float(np.mean(vals))

    def std(self, metric):
        vals = self.values(metric)
        if any(v == NA for v in vals):
            return NA
        return float(np.std(vals))

    def summary(self):
        return {m: {"mean": self.mean(m), "std": self.std(m)} for m in METRICS}


def _run_fold(family, params, docs, y, plan, fold, seed, max_features):
    train_ids, test_ids = plan.train_test(fold)
    start = time.perf_counter()
    vec = TfidfVectorizer(max_features=max_features).fit([docs[i] for i in train_ids])
    Xtr = vec.transform([docs[i] for i in train_ids])
    Xte = vec.transform([docs[i] for i in test_ids])
    clf = make_classifier(family, **{**params, "random_state": derive_seed(seed, fold)})
    clf.fit(Xtr, y[train_ids])
    pred = clf.predict(Xte)
    probs = clf.predict_proba(Xte) if hasattr(clf, "predict_proba") else None
    seconds = time.perf_counter() - start
    report = evaluate(y[test_ids], pred, probs, seconds)
    return FoldResult(fold, report, seconds, frozenset(vec.vocabulary_))


def cross_validate(family, docs, y, plan: FoldPlan, params=None, seed=0, max_features=5000, n_jobs=1):
    """Stratified k-fold CV of one classical family on token lists.

    TF-IDF is refit on each fold's training rows. Fold ``f`` seeds its
    classifier with ``derive_seed(seed, f)``, so any ``n_jobs`` gives the
    same metrics.
    """
    family = canonical_family(family)
    if family not in CLASSICAL:
        raise ValueError(f"{family} is not a TF-IDF family")
    params = dict(params or {})
    y = np.asarray(y)
    start = time.perf_counter()
    run = lambda f: _run_fold(family, params, docs, y, plan, f, seed, max_features)  # noqa: E731
    try:
        if n_jobs == 1:
            folds = [run(f) for f in range(plan.k)]
        else:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                folds = list(pool.map(run, range(plan.k)))
    except Exception as exc:
        raise type(exc)(f"[{family}] {exc}") from exc
    return CVResult(family, params, folds, time.perf_counter() - start)


@dataclass
class BenchmarkRun:
    models: list
    cv_k: int
    seed: int
    tuned: bool
    results: list = field(default_factory=list)

    def ranked(self):
        return sorted(self.results, key=lambda r: (-r.mean("accuracy"), DISPLAY_NAMES[r.family]))

    def to_dict(self):
        return {
            "models": self.models, "cv_k": self.cv_k, "seed": self.seed, "tuned": self.tuned,
            "results": [
                {"family": r.family, "model": DISPLAY_NAMES[r.family], "params": r.params,
                 "metrics": r.summary(), "wall_time_s": r.wall_time_s}
                for r in self.ranked()
            ],
        }


def benchmark(docs, y, models=CLASSICAL, cv_k=10, seed=0, params=None, max_features=5000, n_jobs=1,
              tuned=False):
    """Cross-validate every family on the same fold plan."""
    params = params or {}
    y = np.asarray(y)
    plan = make_folds(list(range(len(y))), y.tolist(), cv_k, seed)
    run = BenchmarkRun([canonical_family(m) for m in models], cv_k, seed, tuned)
    for family in run.models:
        run.results.append(cross_validate(family, docs, y, plan, params.get(family), seed, max_features, n_jobs))
    return run


def _fmt(value, digits=4):
    return value if isinstance(value, str) else f"{value:.{digits}f}"


def leaderboard_rows(run: BenchmarkRun):
    rows = []
    for r in run.ranked():
        row = [DISPLAY_NAMES[r.family]]
        row += [_fmt(r.mean(_COLUMN_METRIC[c])) for c in LEADERBOARD_COLUMNS[1:-1]]
        row.append(f"{r.wall_time_s:.3f}")
        rows.append(row)
    return rows


def leaderboard_csv(run: BenchmarkRun) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEADERBOARD_COLUMNS)
    w.writerows(leaderboard_rows(run))
    return buf.getvalue()


def leaderboard_text(run: BenchmarkRun) -> str:
    rows = [list(LEADERBOARD_COLUMNS)] + leaderboard_rows(run)
    widths = [max(len(r[i]) for r in rows) for i in range(len(LEADERBOARD_COLUMNS))]
    lines = []
    for n, r in enumerate(rows):
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# -- tuning ---------------------------------------------------------------

@dataclass
class TuneSpec:
    family: str
    search_space: dict
    budget: int = 20
    seed: int = 0
    objective: str = "macro_f1"

    def points(self):
        """Every grid point, keys sorted, values in declared order."""
        keys = sorted(self.search_space)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.search_space[k] for k in keys))]


@dataclass
class TuneResult:
    family: str
    best_params: dict
    best_score: float
    best_cv: CVResult
    trials: list

    def to_dict(self):
        return {
            "family": self.family,
            "objective": "macro_f1",
            "best_params": self.best_params,
            "best_score": self.best_score,
            "best_metrics": self.best_cv.summary(),
            "trials": [{"params": p, "score": s, "wall_time_s": t} for p, s, t in self.trials],
        }


def _config_key(params):
    return json.dumps(params, sort_keys=True, default=str)


def sample_grid(spec: TuneSpec, default=None):
    """Seeded sample of ``budget`` distinct grid points.

    When ``default`` lies in the grid it is always the first trial.
    """
    points = spec.points()
    if not points or any(len(v) == 0 for v in spec.search_space.values()):
        raise ValueError("empty search grid")
    if spec.budget < 1:
        raise ValueError("budget must be >= 1")
    order = SplitMix64(spec.seed).shuffle(list(range(len(points))))
    chosen = [points[i] for i in order]
    if default is not None:
        restricted = {k: default[k] for k in spec.search_space if k in default}
        if restricted in points:
            chosen.remove(restricted)
            chosen.insert(0, restricted)
    return chosen[: spec.budget]


def tune(docs, y, spec: TuneSpec, cv_k=10, max_features=5000, n_jobs=1, base_params=None):
    """Random search scored by mean CV macro-F1.

    Ties go to the clearly faster trial, then to the lexicographically
    smaller configuration (see :func:`_pick_best`).
    """
    family = canonical_family(spec.family)
    defaults = {**make_classifier(family).get_params(), **(base_params or {})}
    y = np.asarray(y)
    plan = make_folds(list(range(len(y))), y.tolist(), cv_k, spec.seed)
    trials, results = [], []
    for point in sample_grid(spec, defaults):
        params = {**(base_params or {}), **point}
        cv = cross_validate(family, docs, y, plan, params, spec.seed, max_features, n_jobs)
        score = cv.mean(spec.objective)
        trials.append((params, score, cv.wall_time_s))
        results.append(cv)
    best = _pick_best(trials)
    return TuneResult(family, trials[best][0], trials[best][1], results[best], trials)


def _pick_best(trials):
    """Index of the winning ``(params, score, seconds)`` trial.

    Highest score wins. Among equal scores, trials within
    ``TIME_TIE_TOLERANCE`` of the fastest count as equally fast, so timing
    jitter cannot change the winner; the smallest configuration key decides.
    """
    top = max(t[1] for t in trials)
    tied = [i for i, t in enumerate(trials) if t[1] == top]
    fastest = min(trials[i][2] for i in tied)
    quick = [i for i in tied if trials[i][2] <= fastest * (1 + TIME_TIE_TOLERANCE)]
    return min(quick, key=lambda i: _config_key(trials[i][0]))
