"""Posterior summaries of a fitted SPF model: intensities, top terms, topic assignments."""
from dataclasses import dataclass, field

import numpy as np

from .inference import TrainConfig, train
from .model import ModelSpec, VariationalParams


class VocabularyMismatch(ValueError):
    pass


# Fold-in runs against fixed topics, so it can afford more draws and an
# averaged final estimate; this makes repeated fold-ins agree closely.
FOLD_IN_CONFIG = TrainConfig(epochs=200, mc_samples=8, average_tail=0.5)


@dataclass
class FittedModel:
    """Posterior-mean intensities together with everything needed to reuse them.

    ``theta_hat`` follows ``shape / rate`` of the stored variational factors;
    when ``length_normalized`` is set it is additionally divided by the
    document length, giving the mean of ``q(theta)``.
    """

    theta_hat: np.ndarray
    beta_hat: np.ndarray
    beta_star_hat: np.ndarray
    beta_tilde_hat: np.ndarray
    spec: ModelSpec
    params: VariationalParams
    vocabulary: object = None
    doc_ids: list = None
    doc_lengths: np.ndarray = None
    metadata: dict = field(default_factory=dict)
    length_normalized: bool = False

    @property
    def topic_names(self):
        return self.spec.lexicon.topic_names

    @property
    def K(self):
        return self.spec.K

    def term(self, v):
        return self.vocabulary.terms[v] if self.vocabulary is not None else str(v)


def posterior_means(params, spec, dtm=None, vocabulary=None, metadata=None, length_normalized=False,
                    doc_lengths=None, doc_ids=None):
    """Means of the variational factors.

    ``theta_hat = theta_shp / theta_rte`` and
    ``beta_hat = beta_shp / beta_rte`` plus ``betatilde_shp / betatilde_rte``
    on seeded cells.  Document lengths and ids come from ``dtm`` when given.
    """
    theta_hat = params.theta_shp / params.theta_rte
    if dtm is not None:
        doc_lengths, doc_ids = dtm.N, dtm.doc_ids
    lengths = None if doc_lengths is None else np.asarray(doc_lengths, dtype=np.int64)
    if length_normalized:
        if lengths is None:
            raise ValueError("document lengths are needed for the length-normalized means")
        theta_hat = theta_hat / np.maximum(lengths, 1)[:, None]
    beta_star_hat = params.beta_shp / params.beta_rte
    beta_tilde_hat = np.zeros_like(beta_star_hat)
    ks, vs = spec.lexicon.pairs()
    beta_tilde_hat[ks, vs] = params.betatilde_shp / params.betatilde_rte
    return FittedModel(
        theta_hat=theta_hat,
        beta_hat=beta_star_hat + beta_tilde_hat,
        beta_star_hat=beta_star_hat,
        beta_tilde_hat=beta_tilde_hat,
        spec=spec,
        params=params,
        vocabulary=vocabulary,
        doc_ids=list(doc_ids) if doc_ids is not None else [str(i) for i in range(spec.D)],
        doc_lengths=lengths,
        metadata=dict(metadata or {}),
        length_normalized=length_normalized,
    )


def top_terms(model, k, n, drop=None):
    """Highest-intensity terms of topic ``k`` as ``(term, intensity, is_seed)``.

    Sorted by intensity, ties by lower term id; terms in ``drop`` are removed
    before truncating to ``n``.
    """
    if not 0 <= k < model.K:
        raise IndexError(f"topic {k} out of range for K={model.K}")
    row = model.beta_hat[k]
    order = np.lexsort((np.arange(row.size), -row))
    seeds = set(model.spec.lexicon.seeds[k])
    drop = set(drop or ())
    out = []
    for v in order:
        term = model.term(v)
        if term in drop:
            continue
        out.append((term, float(row[v]), int(v) in seeds))
        if len(out) == n:
            break
    return out


@dataclass(frozen=True)
class Assignment:
    doc_id: str
    topic: int
    certainty: float


def assign_topics(theta_hat):
    """Argmax topic per row (lowest index on ties) and its share of the row total."""
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    topic = np.argmax(theta_hat, axis=1)
    certainty = theta_hat[np.arange(theta_hat.shape[0]), topic] / theta_hat.sum(axis=1)
    return topic, certainty


def classify(model, theta_hat=None, doc_ids=None):
    theta_hat = model.theta_hat if theta_hat is None else theta_hat
    doc_ids = model.doc_ids if doc_ids is None else doc_ids
    topic, certainty = assign_topics(theta_hat)
    return [Assignment(d, int(t), float(c)) for d, t, c in zip(doc_ids, topic, certainty)]


def score_new_documents(model, new_dtm, cfg=None):
    """Fold unseen documents into a fitted model.

    Topic-term factors stay at their fitted values; only the new documents'
    document-topic factors are optimized, with the same stochastic machinery.
    Returns ``theta_hat`` for the new documents on the model's convention.
    """
    spec = model.spec
    if new_dtm.V != spec.V:
        raise VocabularyMismatch(f"documents have V={new_dtm.V}, model has V={spec.V}")
    cfg = cfg or FOLD_IN_CONFIG
    fold_spec = ModelSpec(new_dtm.D, spec.V, spec.K, spec.priors, spec.lexicon)
    g = model.params
    init = VariationalParams(
        theta_shp=np.ones((new_dtm.D, spec.K)),
        # same starting scale as the training documents had
        theta_rte=np.full((new_dtm.D, spec.K), spec.D / 1000.0),
        beta_shp=g.beta_shp, beta_rte=g.beta_rte,
        betatilde_shp=g.betatilde_shp, betatilde_rte=g.betatilde_rte,
    )
    params, _ = train(new_dtm, fold_spec, cfg, init=init, freeze_globals=True)
    theta_hat = params.theta_shp / params.theta_rte
    if model.length_normalized:
        theta_hat = theta_hat / np.maximum(new_dtm.N, 1)[:, None]
    return theta_hat
