"""Command-line pipeline: prepare, seeds, train, topics, classify, evaluate, synth.

Every command reads and writes plain files, so the stages compose without
hidden state.  Settings come from flags, then an optional ``--config`` file of
``key = value`` lines, then built-in defaults.
"""
import argparse
import configparser
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import LabelMap, evaluate
from .inference import NonFiniteError, TrainConfig, TrainingDiverged, train
from .model import ModelSpec, PriorConfig, SeedLexicon, generate_synthetic
from .persistence import ModelFormatError, load_model, save_model
from .posterior import (
    FOLD_IN_CONFIG, Assignment, VocabularyMismatch, classify, posterior_means, score_new_documents, top_terms,
)
from .statmath import make_rng
from .textprep import (
    DocTermMatrix, EmptyCorpusError, PreprocessOptions, Vocabulary, build_dtm, default_stop_words,
    preprocess, read_corpus, read_doc_index, read_stop_words, tfidf_seed_suggestion, vectorize,
    write_doc_index,
)

logger = logging.getLogger("seededpf")

DTM_FILE, VOCAB_FILE, DOCS_FILE = "dtm.txt", "vocab.txt", "docs.csv"

# exit codes by error category
EXIT_USAGE, EXIT_INPUT, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, category, message, code):
        super().__init__(message)
        self.category = category
        self.code = code


def input_error(msg):
    return CliError("input error", msg, EXIT_INPUT)


def data_error(msg):
    return CliError("data error", msg, EXIT_DATA)


# key -> (type, default); flags and config share these names
SETTINGS = {
    "lowercase": (bool, True),
    "stop_words": (str, None),
    "min_term_freq": (int, 2),
    "min_doc_length": (int, 7),
    **{k: (float, getattr(PriorConfig(), k)) for k in "abcdef"},
    "epochs": (int, TrainConfig.epochs),
    "batch_size": (int, TrainConfig.batch_size),
    "learning_rate": (float, TrainConfig.learning_rate),
    "mc_samples": (int, TrainConfig.mc_samples),
    "estimator": (str, TrainConfig.estimator),
    "baseline": (str, TrainConfig.baseline),
    "average_tail": (float, TrainConfig.average_tail),
    "unseeded": (int, 0),
    "length_normalized": (bool, False),
    "top_n": (int, 10),
    "drop": (str, None),
    "seed": (int, 0),
}


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key, raw):
    kind = SETTINGS[key][0]
    try:
        return _parse_bool(raw) if kind is bool else kind(raw)
    except ValueError as exc:
        raise CliError("config error", f"{key}: {exc}", EXIT_USAGE) from None


def read_config(path):
    """Flat ``key = value`` file; ``#`` comments, no sections."""
    path = Path(path)
    if not path.is_file():
        raise input_error(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = lambda s: s.strip().lower().replace("-", "_")
    parser.read_string("[run]\n" + path.read_text(encoding="utf-8"), source=str(path))
    out = {}
    for key, raw in parser["run"].items():
        if key not in SETTINGS:
            raise CliError("config error", f"{path}: unknown key {key!r}", EXIT_USAGE)
        out[key] = _convert(key, raw)
    return out


def resolve(args, defaults=None):
    """Merge flags over config over defaults into a plain dict.

    ``defaults`` replaces built-in defaults for one command.
    """
    conf = read_config(args.config) if getattr(args, "config", None) else {}
    defaults = defaults or {}
    merged = {}
    for key, (_, default) in SETTINGS.items():
        flag = getattr(args, key, None)
        merged[key] = flag if flag is not None else conf.get(key, defaults.get(key, default))
    return merged


def _priors(s):
    try:
        return PriorConfig(*(s[k] for k in "abcdef"))
    except ValueError as exc:
        raise CliError("config error", str(exc), EXIT_USAGE) from None


def _train_config(s, stream):
    try:
        return TrainConfig(
            epochs=s["epochs"], batch_size=s["batch_size"], learning_rate=s["learning_rate"],
            mc_samples=s["mc_samples"], estimator=s["estimator"], baseline=s["baseline"],
            average_tail=s["average_tail"], rng_seed=_stream_seed(s["seed"], stream),
        )
    except ValueError as exc:
        raise CliError("config error", str(exc), EXIT_USAGE) from None


def _stream_seed(seed, name):
    """Integer seed for a named sub-stream of the run seed."""
    return int(make_rng(seed, name).integers(2**63))


def _require(path, what):
    path = Path(path)
    if not path.exists():
        raise input_error(f"{what} not found: {path}")
    return path


def load_data_dir(path):
    """Read the ``prepare`` output directory: DTM, vocabulary and document index."""
    path = _require(path, "data directory")
    vocab = Vocabulary.load(_require(path / VOCAB_FILE, "vocabulary"))
    ids, labels = read_doc_index(_require(path / DOCS_FILE, "document index"))
    try:
        dtm = DocTermMatrix.load_triplets(_require(path / DTM_FILE, "DTM"), ids, labels)
    except ValueError as exc:
        raise data_error(str(exc)) from None
    if dtm.V != len(vocab):
        raise data_error(f"DTM has {dtm.V} columns but vocabulary has {len(vocab)} terms")
    return vocab, dtm


def write_data_dir(path, vocab, dtm):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    dtm.save_triplets(path / DTM_FILE)
    vocab.save(path / VOCAB_FILE)
    write_doc_index(path / DOCS_FILE, dtm.doc_ids, dtm.labels)


def _preprocess_options(s):
    stop = read_stop_words(_require(s["stop_words"], "stop-word list")) if s["stop_words"] else default_stop_words()
    return PreprocessOptions(lowercase=s["lowercase"], stop_words=stop,
                             min_term_freq=s["min_term_freq"], min_doc_length=s["min_doc_length"])


def cmd_prepare(args):
    s = resolve(args)
    raw = read_corpus(_require(args.corpus, "corpus"))
    docs = preprocess(raw, _preprocess_options(s))
    vocab, dtm = build_dtm(docs)
    write_data_dir(args.out, vocab, dtm)
    print(f"kept {dtm.D} of {len(raw)} documents, V={dtm.V}, nnz={dtm.nnz}")


def cmd_seeds(args):
    s = resolve(args)
    vocab, dtm = load_data_dir(args.data)
    if dtm.labels is None or any(l is None for l in dtm.labels):
        raise data_error("seed suggestion needs a label for every document")
    lexicon = tfidf_seed_suggestion(dtm, dtm.labels, s["top_n"], vocab)
    lexicon.save(args.out)
    print(f"wrote {lexicon.K} topics x {s['top_n']} seed words to {args.out}")


def cmd_train(args):
    s = resolve(args)
    vocab, dtm = load_data_dir(args.data)
    if args.seeds:
        try:
            lexicon = SeedLexicon.load(_require(args.seeds, "seed lexicon"), vocab)
        except ValueError as exc:
            raise data_error(str(exc)) from None
    else:
        lexicon = SeedLexicon([], [], vocab)
    if s["unseeded"]:
        lexicon = lexicon.with_unseeded(s["unseeded"])
    if lexicon.K == 0:
        raise CliError("config error", "no topics: give a seed lexicon or unseeded > 0", EXIT_USAGE)
    spec = ModelSpec(dtm.D, dtm.V, lexicon.K, _priors(s), lexicon)
    cfg = _train_config(s, "train")

    def report(epoch, elbo, _params):
        logger.info("epoch %d/%d  elbo %.6g", epoch, cfg.epochs, elbo)

    params, trace = train(dtm, spec, cfg, progress=report)
    settings = {k: v for k, v in s.items() if k not in ("top_n", "drop")}
    model = posterior_means(params, spec, dtm, vocab, metadata={"settings": settings, "version": __version__},
                            length_normalized=s["length_normalized"])
    save_model(args.out, model)
    trace_path = args.trace or str(Path(args.out).with_suffix(".trace.csv"))
    trace.to_csv(trace_path)
    final = trace.epoch_elbo()[-1] if len(trace) else float("nan")
    print(f"trained K={spec.K} on D={dtm.D}, V={dtm.V} for {cfg.epochs} epochs; final epoch ELBO {final:.6g}")


def _drop_list(spec):
    if not spec:
        return set()
    p = Path(spec)
    if p.is_file():
        return {w.strip() for w in p.read_text(encoding="utf-8").split() if w.strip()}
    return {w.strip() for w in spec.split(",") if w.strip()}


def format_topics(model, n, drop=None):
    """Per-topic table of rank, term, intensity (2 decimals) and seed flag."""
    blocks = []
    for k, name in enumerate(model.topic_names):
        rows = top_terms(model, k, n, drop)
        width = max([4] + [len(t) for t, _, _ in rows])
        lines = [f"== {name} ==", f"{'rank':>4}  {'term':<{width}}  intensity  seed"]
        for r, (term, val, is_seed) in enumerate(rows, 1):
            lines.append(f"{r:>4}  {term:<{width}}  {val:>9.2f}  {'*' if is_seed else ''}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def _load_model(path):
    try:
        return load_model(_require(path, "model file"))
    except (ModelFormatError, KeyError, ValueError) as exc:
        raise data_error(f"cannot read model {path}: {exc}") from None


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_topics(args):
    s = resolve(args)
    model = _load_model(args.model)
    _emit(format_topics(model, s["top_n"], _drop_list(s["drop"])), args.out)


def write_assignments(path, assignments, topic_names):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", "topic_name", "certainty"])
        for a in assignments:
            w.writerow([a.doc_id, topic_names[a.topic], repr(a.certainty)])


def read_assignments(path, topic_names=None):
    """Read an assignments CSV; topics are indexed into ``topic_names`` (grown as needed)."""
    topic_names = list(topic_names or [])
    out = []
    with open(_require(path, "assignments"), encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                name, cert = row["topic_name"], float(row["certainty"])
            except (KeyError, TypeError, ValueError):
                raise data_error(f"{path}: expected columns doc_id,topic_name,certainty") from None
            if name not in topic_names:
                topic_names.append(name)
            out.append(Assignment(row["doc_id"], topic_names.index(name), cert))
    return out, topic_names


def cmd_classify(args):
    fold_in = {k: getattr(FOLD_IN_CONFIG, k) for k in ("epochs", "batch_size", "mc_samples", "average_tail")}
    s = resolve(args, fold_in)
    model = _load_model(args.model)
    if args.corpus:
        if model.vocabulary is None:
            raise data_error("model has no vocabulary; cannot vectorize new text")
        raw = read_corpus(_require(args.corpus, "corpus"))
        dtm = vectorize(raw, model.vocabulary, _preprocess_options(s))
    elif args.data:
        vocab, dtm = load_data_dir(args.data)
        if model.vocabulary is not None and vocab != model.vocabulary:
            raise data_error("data directory vocabulary differs from the model's")
    else:
        dtm = None
    if dtm is None:
        assignments = classify(model)
    else:
        theta = score_new_documents(model, dtm, _train_config(s, "fold-in"))
        assignments = classify(model, theta, dtm.doc_ids)
    out = args.out or "assignments.csv"
    write_assignments(out, assignments, model.topic_names)
    print(f"wrote {len(assignments)} assignments to {out}")


def _read_label_map(path, topic_names):
    mapping = {}
    for n, line in enumerate(Path(_require(path, "label map")).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise data_error(f"{path}:{n}: expected 'topic_name = label'")
        topic, label = (x.strip() for x in line.split("=", 1))
        if topic not in topic_names:
            topic_names.append(topic)
        mapping[topic_names.index(topic)] = label
    return LabelMap(mapping)


def cmd_evaluate(args):
    assignments, names = read_assignments(args.assignments)
    ids, labels = read_doc_index(_require(args.gold, "gold labels"))
    if labels is None:
        raise data_error(f"{args.gold}: no labels")
    gold = dict(zip(ids, labels))
    missing = [a.doc_id for a in assignments if a.doc_id not in gold]
    if missing:
        raise data_error(f"{len(missing)} assigned documents have no gold label (e.g. {missing[0]!r})")
    gold_labels = [gold[a.doc_id] for a in assignments]
    if args.label_map:
        label_map = _read_label_map(args.label_map, names)
    else:
        label_map = LabelMap.from_topic_names(names, gold_labels)
    try:
        report = evaluate(assignments, gold_labels, label_map)
    except ValueError as exc:
        raise data_error(str(exc)) from None
    if args.json:
        report.to_json(args.json)
    if args.csv:
        report.to_csv(args.csv)
    _emit(report.render() + "\n", args.out)


def cmd_synth(args):
    s = resolve(args)
    if min(args.docs, args.terms, args.topics) < 1 or args.seeds_per_topic < 0:
        raise CliError("config error", "docs, terms and topics must be >= 1", EXIT_USAGE)
    if args.seeds_per_topic > args.terms:
        raise CliError("config error", "seeds_per_topic exceeds the number of terms", EXIT_USAGE)
    rng_seeds = make_rng(s["seed"], "synth", "seeds")
    seeds = [rng_seeds.choice(args.terms, args.seeds_per_topic, replace=False) for _ in range(args.topics)]
    vocab = Vocabulary([f"term{v:0{len(str(args.terms - 1))}d}" for v in range(args.terms)])
    names = [f"topic{k + 1}" for k in range(args.topics)]
    lexicon = SeedLexicon(names, seeds, vocab)
    spec = ModelSpec(args.docs, args.terms, args.topics, _priors(s), lexicon)
    dtm, theta, beta = generate_synthetic(spec, make_rng(s["seed"], "synth", "corpus"))
    doc_ids = [f"doc{d}" for d in range(args.docs)]
    labels = [names[k] for k in np.argmax(theta, axis=1)]
    out = Path(args.out)
    write_data_dir(out, vocab, DocTermMatrix(dtm.counts, doc_ids, labels))
    lexicon.save(out / "seeds.txt")
    np.savez(out / "truth.npz", theta=theta, beta=beta)
    print(f"wrote synthetic corpus D={spec.D}, V={spec.V}, K={spec.K}, nnz={dtm.nnz} to {out}")


def _add_settings(p, keys):
    for key in keys:
        kind = SETTINGS[key][0]
        flag = "--" + key.replace("_", "-")
        if kind is bool:
            p.add_argument(flag, dest=key, type=_parse_bool, metavar="BOOL")
        else:
            p.add_argument(flag, dest=key, type=kind)


def build_parser():
    parser = argparse.ArgumentParser(prog="seededpf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    prep_keys = ("lowercase", "stop_words", "min_term_freq", "min_doc_length")

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value settings file")
        p.set_defaults(func=func)
        return p

    p = command("prepare", cmd_prepare, "tokenize a labeled CSV into a DTM directory")
    p.add_argument("corpus")
    p.add_argument("--out", required=True, help="output directory")
    _add_settings(p, prep_keys)

    p = command("seeds", cmd_seeds, "suggest seed words per label by TF-IDF")
    p.add_argument("data", help="directory written by 'prepare'")
    p.add_argument("--out", required=True)
    _add_settings(p, ("top_n",))

    p = command("train", cmd_train, "fit the model")
    p.add_argument("data")
    p.add_argument("--seeds", help="seed lexicon file ('topic: w1, w2')")
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--trace", help="per-step ELBO CSV (default: next to the model)")
    _add_settings(p, ("unseeded", *"abcdef", "epochs", "batch_size", "learning_rate", "mc_samples",
                      "estimator", "baseline", "average_tail", "length_normalized", "seed"))

    p = command("topics", cmd_topics, "print high-intensity terms per topic")
    p.add_argument("model")
    p.add_argument("--out")
    _add_settings(p, ("top_n", "drop"))

    p = command("classify", cmd_classify, "assign documents to topics")
    p.add_argument("model")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="DTM directory of new documents (same vocabulary)")
    src.add_argument("--corpus", help="CSV of new documents")
    p.add_argument("--out")
    _add_settings(p, ("epochs", "batch_size", "learning_rate", "mc_samples", "estimator", "baseline",
                      "average_tail", "seed", *prep_keys))

    p = command("evaluate", cmd_evaluate, "score assignments against gold labels")
    p.add_argument("assignments")
    p.add_argument("--gold", required=True, help="doc_id,label CSV")
    p.add_argument("--label-map", help="lines of 'topic_name = label' (default: match by name)")
    p.add_argument("--out")
    p.add_argument("--json")
    p.add_argument("--csv")

    p = command("synth", cmd_synth, "sample a corpus from the generative model")
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=int, default=2000)
    p.add_argument("--terms", type=int, default=500)
    p.add_argument("--topics", type=int, default=3)
    p.add_argument("--seeds-per-topic", type=int, default=5)
    _add_settings(p, (*"abcdef", "seed"))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        args.func(args)
    except CliError as exc:
        print(f"seededpf: {exc.category}: {exc}", file=sys.stderr)
        return exc.code
    except (EmptyCorpusError, VocabularyMismatch, ModelFormatError) as exc:
        print(f"seededpf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDiverged, NonFiniteError) as exc:
        print(f"seededpf: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"seededpf: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
