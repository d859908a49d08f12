"""Command-line entry point: ``sentibench <command> [options]``."""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np
from sklearn.pipeline import Pipeline

from . import store
from .bench import TuneSpec, benchmark, leaderboard_csv, leaderboard_text, tune
from .bilstm import PARAM_LIMIT, BiLSTMClassifier, SequenceEncoder, plot_curves
from .config import ConfigError, as_list, load_config, section
from .corpus import LABEL_INDEX, LABELS, CorpusError, load_corpus, make_folds, stratified_split
from .linear import DivergenceError
from .metrics import evaluate, plot_confusion
from .pipeline import CLASSICAL, Predictor, canonical_family, make_pipeline
from .synthetic import bundled_path
from .text import SlangLexicon, StopwordList, TextPreprocessor

log = logging.getLogger("sentibench")


# -- helpers --------------------------------------------------------------

def _run_dir(args, cfg) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
        out = Path("runs") / f"{stamp}-seed{cfg['seed']}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="")
    return path


def _corpus(args, cfg):
    path = args.corpus or str(bundled_path())
    return load_corpus(path, text_field=cfg["corpus.text_field"], label_field=cfg["corpus.label_field"])


def _lexicons(args):
    slang = getattr(args, "slang", None)
    stop = getattr(args, "stopwords", None)
    return (SlangLexicon.from_file(slang) if slang else None,
            StopwordList.from_file(stop) if stop else None)


def _preprocessor(args):
    return TextPreprocessor(*_lexicons(args)).fit()


def _model_params(cfg, family):
    params = section(cfg, family)
    if family == "bilstm":
        for key in ("max_vocab", "max_seq_len"):
            params.pop(key, None)
    return params


def _split(corpus, cfg):
    ratios = tuple(float(r) for r in as_list(cfg["split.ratios"]))
    split = stratified_split(corpus, ratios, cfg["seed"])
    by_id = {ex.id: ex for ex in corpus}
    return split, {name: [by_id[i] for i in ids] for name, ids in split.parts.items()}


def _write_report(out: Path, rep, plots: bool):
    _write(out / "report.txt", rep.render())
    _write(out / "report.csv", rep.to_csv())
    _write(out / "confusion.csv", rep.confusion.to_csv())
    if plots:
        plot_confusion(rep.confusion, out / "confusion.png")


def _evaluate_pipeline(pipeline, examples):
    texts = [ex.text for ex in examples]
    y = np.array([ex.y for ex in examples])
    clf = pipeline.steps[-1][1]
    pred = np.array([LABEL_INDEX[str(p)] for p in pipeline.predict(texts)])
    probs = None
    if hasattr(clf, "predict_proba") and hasattr(pipeline, "predict_proba"):
        probs = pipeline.predict_proba(texts)
        # columns follow classes_; reorder into label order for AUC
        order = [list(map(str, clf.classes_)).index(lab) for lab in LABELS]
        probs = probs[:, order]
    return evaluate(y, pred, probs)


# -- commands -------------------------------------------------------------

def cmd_prep(args, cfg):
    prep = _preprocessor(args)
    if args.text is not None:
        print(" ".join(prep.clean([args.text])[0].tokens))
        return 0
    corpus = _corpus(args, cfg)
    out = _run_dir(args, cfg)
    lines = ["id\tlabel\ttokens"]
    for ex, doc in zip(corpus, prep.clean([ex.text for ex in corpus])):
        lines.append(f"{ex.id}\t{ex.label}\t{' '.join(doc.tokens)}")
    _write(out / "clean.tsv", "\n".join(lines) + "\n")
    print(f"wrote {len(corpus)} cleaned documents to {out / 'clean.tsv'}")
    return 0


def cmd_split(args, cfg):
    corpus = _corpus(args, cfg)
    out = _run_dir(args, cfg)
    split, _ = _split(corpus, cfg)
    folds = make_folds([ex.id for ex in corpus], [ex.label for ex in corpus], cfg["cv_k"], cfg["seed"])
    _write(out / "split.json", split.to_json() + "\n")
    _write(out / "folds.json", folds.to_json() + "\n")
    sizes = ", ".join(f"{k}={len(v)}" for k, v in split.parts.items())
    print(f"split {sizes}; {folds.k} folds written to {out}")
    return 0


def _prepared(args, cfg):
    corpus = _corpus(args, cfg)
    docs = _preprocessor(args).transform([ex.text for ex in corpus])
    return docs, np.array([ex.y for ex in corpus])


def cmd_benchmark(args, cfg):
    models = [canonical_family(m) for m in (args.models.split(",") if args.models else as_list(cfg["models"]))]
    docs, y = _prepared(args, cfg)
    out = _run_dir(args, cfg)
    params = {m: _model_params(cfg, m) for m in models}
    tuned = False
    if args.params:
        best = json.loads(Path(args.params).read_text(encoding="utf-8"))
        for fam, p in best.items():
            params[canonical_family(fam)].update(p)
        tuned = True
    run = benchmark(docs, y, models, cfg["cv_k"], cfg["seed"], params, cfg["max_features"],
                    args.jobs or cfg["n_jobs"], tuned)
    text = leaderboard_text(run)
    _write(out / "leaderboard.txt", text)
    _write(out / "leaderboard.csv", leaderboard_csv(run))
    _write(out / "benchmark.json", json.dumps(run.to_dict(), indent=2) + "\n")
    print(text, end="")
    return 0


def cmd_tune(args, cfg):
    family = canonical_family(args.family or cfg["tune.family"])
    docs, y = _prepared(args, cfg)
    out = _run_dir(args, cfg)
    grid = {k: as_list(v) for k, v in section(cfg, f"tune.{family}").items()}
    spec = TuneSpec(family, grid, args.budget or cfg["tune.budget"], cfg["seed"])
    result = tune(docs, y, spec, cfg["cv_k"], cfg["max_features"], args.jobs or cfg["n_jobs"],
                  base_params=_model_params(cfg, family))
    _write(out / "tune.json", json.dumps(result.to_dict(), indent=2) + "\n")
    _write(out / "best_params.json", json.dumps({family: result.best_params}, indent=2, sort_keys=True) + "\n")
    print(f"best {family} config (mean CV macro-F1 {result.best_score:.4f}):")
    print(json.dumps(result.best_params, sort_keys=True))
    return 0


def cmd_train(args, cfg):
    family = canonical_family(args.family)
    if family not in CLASSICAL:
        raise ValueError("use train-dl for the bilstm family")
    corpus = _corpus(args, cfg)
    out = _run_dir(args, cfg)
    _, parts = _split(corpus, cfg)
    params = {**_model_params(cfg, family), "random_state": cfg["seed"]}
    lexicon, stopwords = _lexicons(args)
    pipe = make_pipeline(family, params, max_features=cfg["max_features"], lexicon=lexicon, stopwords=stopwords)
    pipe.fit([ex.text for ex in parts["train"]], [ex.label for ex in parts["train"]])
    rep = _evaluate_pipeline(pipe, parts["test"])
    art = store.make_artifact(pipe, seed=cfg["seed"])
    store.save(art, out / "model.sentib")
    _write_report(out, rep, cfg["plots"])
    print(rep.render(), end="")
    print(f"saved {family} model to {out / 'model.sentib'}")
    return 0


def train_bilstm(train, validation, cfg, prep=None):
    """Fit the neural pipeline on ``train`` with early stopping on ``validation``."""
    bl = section(cfg, "bilstm")
    prep = prep or TextPreprocessor().fit()
    enc = SequenceEncoder(max_size=bl["max_vocab"], max_seq_len=bl["max_seq_len"])
    tokens_train = prep.transform([ex.text for ex in train])
    enc.fit(tokens_train)
    params = {**_model_params(cfg, "bilstm"), "vocab_size": enc.vocab_size_, "random_state": cfg["seed"]}
    model = BiLSTMClassifier(**params)
    n_params = model.init(enc.vocab_size_).count_params()
    print(f"bilstm parameters: {n_params:,}")
    if n_params >= PARAM_LIMIT:
        raise ValueError(f"bilstm has {n_params:,} parameters; the limit is {PARAM_LIMIT:,}")
    model.fit(
        enc.transform(tokens_train), np.array([ex.label for ex in train]),
        validation_data=(enc.transform(prep.transform([ex.text for ex in validation])),
                         np.array([ex.label for ex in validation])),
    )
    return Pipeline([("prep", prep), ("features", enc), ("model", model)])


def cmd_train_dl(args, cfg):
    corpus = _corpus(args, cfg)
    out = _run_dir(args, cfg)
    _, parts = _split(corpus, cfg)
    pipe = train_bilstm(parts["train"], parts["validation"], cfg, _preprocessor(args))
    model = pipe.named_steps["model"]
    rep = _evaluate_pipeline(pipe, parts["test"])
    store.save(store.make_artifact(pipe, seed=cfg["seed"]), out / "model.sentib")
    _write(out / "curves.csv", model.curves_csv())
    _write_report(out, rep, cfg["plots"])
    if cfg["plots"]:
        plot_curves(model.curves_, out / "curves.png")
    print(rep.render(), end="")
    print(f"{len(model.curves_)} epochs, best epoch {model.best_epoch_}; outputs in {out}")
    return 0


def cmd_evaluate(args, cfg):
    art = store.load(args.model)
    corpus = _corpus(args, cfg)
    if args.split != "all":
        corpus = _split(corpus, cfg)[1][args.split]
    out = _run_dir(args, cfg)
    rep = _evaluate_pipeline(art.pipeline, corpus)
    _write_report(out, rep, cfg["plots"])
    print(rep.render(), end="")
    return 0


def cmd_predict(model_path, texts):
    """Prediction records for ``texts``, the same objects the HTTP endpoint returns."""
    art = store.load(model_path)
    return Predictor(art.pipeline, art.family).predict_texts(texts)


def _cmd_predict(args, cfg):
    if args.text is not None:
        texts = [args.text]
    elif args.file == "-":
        texts = sys.stdin.read().splitlines()
    else:
        texts = Path(args.file).read_text(encoding="utf-8").splitlines()
    for rec in cmd_predict(args.model, texts):
        if rec["no_signal"]:
            print("warning: no tokens left after preprocessing; emitting the no-signal label", file=sys.stderr)
        print(json.dumps(rec, ensure_ascii=False))
    return 0


def _cmd_serve(args, cfg):
    from .server import serve

    host, _, port = args.bind.rpartition(":")
    serve(args.model, host or "127.0.0.1", int(port))
    return 0


# -- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default from config)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value config file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default runs/<time>-seed<seed>)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="sentibench", parents=[common],
                                     description="Sentiment classification workbench.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, corpus=True, lexicons=False):
        p = sub.add_parser(name, parents=[common], help=help_)
        if corpus:
            p.add_argument("--corpus", help="CSV or JSONL corpus (default: bundled synthetic corpus)")
        if lexicons:
            p.add_argument("--slang", help="slang lexicon TSV replacing the bundled one")
            p.add_argument("--stopwords", help="stopword list replacing the bundled one")
        p.set_defaults(func=func)
        return p

    p = add("prep", cmd_prep, "clean a corpus, or one --text", lexicons=True)
    p.add_argument("--text")
    add("split", cmd_split, "write the stratified split and fold plan")
    p = add("benchmark", cmd_benchmark, "k-fold leaderboard of the TF-IDF families", lexicons=True)
    p.add_argument("--models", help="comma-separated families")
    p.add_argument("--params", help="best_params.json from tune")
    p.add_argument("--jobs", type=int, help="parallel folds")
    p = add("tune", cmd_tune, "seeded random search scored by CV macro-F1", lexicons=True)
    p.add_argument("--family")
    p.add_argument("--budget", type=int)
    p.add_argument("--jobs", type=int)
    p = add("train", cmd_train, "train and save one TF-IDF family", lexicons=True)
    p.add_argument("--family", required=True)
    add("train-dl", cmd_train_dl, "train, evaluate and save the BiLSTM", lexicons=True)
    p = add("evaluate", cmd_evaluate, "evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--split", choices=("all", "train", "validation", "test"), default="test")
    p = add("predict", _cmd_predict, "predict labels as JSON lines", corpus=False)
    p.add_argument("--model", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--file", help="one text per line, '-' for stdin")
    p = add("serve", _cmd_serve, "JSON-over-HTTP prediction endpoint", corpus=False)
    p.add_argument("--model", required=True)
    p.add_argument("--bind", default="127.0.0.1:8000")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("seed", None), ("config", None), ("out", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        overrides = {"seed": args.seed} if args.seed is not None else {}
        cfg = load_config(args.config, overrides)
        return args.func(args, cfg)
    except (ConfigError, CorpusError, store.ArtifactError, DivergenceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
