"""Classify Amazon product reviews into six categories with a fixed seed lexicon.

Usage::

    python demos/amazon_reviews.py reviews.csv [workdir]

``reviews.csv`` has columns ``doc_id,text,label`` where the labels are the
topic names in ``amazon_seeds.txt``.  The dataset is not bundled.
"""
import sys
from pathlib import Path

from seededpf import (
    LabelMap, ModelSpec, PriorConfig, SeedLexicon, TrainConfig, build_dtm, classify, evaluate, posterior_means,
    preprocess, read_corpus, save_model, train,
)

SEEDS = Path(__file__).with_name("amazon_seeds.txt")


def run_pipeline(csv_path, workdir, epochs=150, seed=0):
    """Preprocess, train, classify and print the report; returns accuracy."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    vocab, dtm = build_dtm(preprocess(read_corpus(csv_path)))
    lexicon = SeedLexicon.load(SEEDS, vocab)
    spec = ModelSpec(dtm.D, dtm.V, lexicon.K, PriorConfig(), lexicon)
    print(f"{dtm.D} documents, {dtm.V} terms, {dtm.nnz} nonzero counts")

    params, trace = train(dtm, spec, TrainConfig(epochs=epochs, rng_seed=seed))
    model = posterior_means(params, spec, dtm, vocabulary=vocab)
    save_model(workdir / "amazon.spf", model)
    trace.to_csv(workdir / "amazon.trace.csv")

    report = evaluate(classify(model), dtm.labels, LabelMap.from_topic_names(lexicon.topic_names, dtm.labels))
    print(report.render())
    return report.accuracy


if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    run_pipeline(Path(sys.argv[1]), Path(sys.argv[2] if len(sys.argv) > 2 else "amazon_run"))
