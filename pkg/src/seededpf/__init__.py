"""Seeded Poisson factorization topic model fitted by black-box variational inference."""
__version__ = "0.1.0"

from .evaluation import ClassificationReport, LabelMap, evaluate
from .inference import TrainConfig, TrainTrace, train
from .model import ModelSpec, PriorConfig, SeedLexicon, VariationalParams, compose_beta, generate_synthetic
from .persistence import load_model, save_model
from .posterior import (
    Assignment, FittedModel, assign_topics, classify, posterior_means, score_new_documents, top_terms,
)
from .statmath import make_rng
from .textprep import (
    DocTermMatrix, PreprocessOptions, RawCorpus, Vocabulary, build_dtm, preprocess, read_corpus,
    tfidf_seed_suggestion, vectorize,
)

__all__ = [
    "Assignment", "ClassificationReport", "DocTermMatrix", "FittedModel", "LabelMap", "ModelSpec",
    "PreprocessOptions", "PriorConfig", "RawCorpus", "SeedLexicon", "TrainConfig", "TrainTrace",
    "VariationalParams", "Vocabulary", "assign_topics", "build_dtm", "classify", "compose_beta",
    "evaluate", "generate_synthetic", "load_model", "make_rng", "posterior_means", "preprocess",
    "read_corpus", "save_model", "score_new_documents", "tfidf_seed_suggestion", "top_terms", "train",
    "vectorize",
]
