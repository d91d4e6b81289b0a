"""SPF model specification, variational state and forward sampler."""
import re
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .statmath import gamma_logpdf, gamma_sample


@dataclass(frozen=True)
class PriorConfig:
    """Gamma hyperparameters (shape, rate) of the three latent blocks.

    ``a, b`` for the neutral topic-term part, ``c, d`` for the seeded part and
    ``e, f`` for the document-topic intensities.
    """

    a: float = 0.3
    b: float = 0.3
    c: float = 1.0
    d: float = 0.3
    e: float = 0.3
    f: float = 0.3

    def __post_init__(self):
        for fld in fields(self):
            if not getattr(self, fld.name) > 0:
                raise ValueError(f"prior parameter {fld.name} must be > 0")
        if self.c <= self.a:
            warnings.warn(f"seeded shape c={self.c} does not exceed neutral shape a={self.a}; seeds add little prior mass")


class SeedLexicon:
    """Per-topic seed word sets.

    ``seeds[k]`` is a sorted tuple of term ids (possibly empty, for an
    unseeded topic).  The seeded index set is enumerated row-major by topic,
    then term id; this order aligns every seeded-parameter vector.
    """

    def __init__(self, topic_names, seeds, vocab=None):
        self.topic_names = list(topic_names)
        self.seeds = [tuple(sorted(set(int(v) for v in s))) for s in seeds]
        if len(self.seeds) != len(self.topic_names):
            raise ValueError("one seed set per topic required")
        self.vocab = vocab

    @property
    def K(self):
        return len(self.topic_names)

    @property
    def size(self):
        return sum(len(s) for s in self.seeds)

    def pairs(self):
        """``(topics, terms)`` index arrays of the seeded set, row-major."""
        ks = np.array([k for k, s in enumerate(self.seeds) for _ in s], dtype=np.int64)
        vs = np.array([v for s in self.seeds for v in s], dtype=np.int64)
        return ks, vs

    def mask(self, V):
        m = np.zeros((self.K, V), dtype=bool)
        ks, vs = self.pairs()
        m[ks, vs] = True
        return m

    def with_unseeded(self, n, prefix="unseeded"):
        names = self.topic_names + [f"{prefix}_{i + 1}" for i in range(n)]
        return SeedLexicon(names, self.seeds + [()] * n, self.vocab)

    def words(self, k):
        if self.vocab is None:
            return [str(v) for v in self.seeds[k]]
        return [self.vocab.terms[v] for v in self.seeds[k]]

    def __eq__(self, other):
        return isinstance(other, SeedLexicon) and self.topic_names == other.topic_names and self.seeds == other.seeds

    def __repr__(self):
        return f"SeedLexicon(K={self.K}, |S|={self.size})"

    @classmethod
    def from_words(cls, topic_words, vocab, strict=False):
        """Build from ``{topic_name: [word, ...]}``; unknown words warn or raise."""
        names, seeds = [], []
        for name, words in topic_words.items():
            ids = []
            for w in words:
                if w in vocab:
                    ids.append(vocab[w])
                elif strict:
                    raise KeyError(f"seed word {w!r} (topic {name}) not in vocabulary")
                else:
                    warnings.warn(f"seed word {w!r} (topic {name}) not in vocabulary; skipped")
            names.append(name)
            seeds.append(ids)
        return cls(names, seeds, vocab)

    def to_text(self):
        return "".join(f"{name}: {', '.join(self.words(k))}\n" for k, name in enumerate(self.topic_names))

    def save(self, path):
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @staticmethod
    def parse_text(text):
        """Parse ``topic: w1, w2, ...`` lines into an ordered dict."""
        topics = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ValueError(f"seed lexicon line {n}: expected 'topic: w1, w2, ...'")
            name, rest = line.split(":", 1)
            words = [w for w in re.split(r"[,\s]+", rest.strip()) if w]
            topics[name.strip()] = words
        return topics

    @classmethod
    def load(cls, path, vocab, strict=False):
        return cls.from_words(cls.parse_text(Path(path).read_text(encoding="utf-8")), vocab, strict)


@dataclass
class ModelSpec:
    D: int
    V: int
    K: int
    priors: PriorConfig = field(default_factory=PriorConfig)
    lexicon: SeedLexicon = None

    def __post_init__(self):
        if self.lexicon is None:
            self.lexicon = SeedLexicon([f"topic_{k}" for k in range(self.K)], [()] * self.K)
        if self.lexicon.K != self.K:
            raise ValueError(f"lexicon has {self.lexicon.K} topics, spec has K={self.K}")
        if any(v >= self.V or v < 0 for s in self.lexicon.seeds for v in s):
            raise ValueError("seed term id out of range")


@dataclass
class VariationalParams:
    """Shape/rate of the gamma factors of q.

    The document-topic rate is stored without the document-length factor:
    ``q(theta_dk) = Gamma(theta_shp[d, k], N_d * theta_rte[d, k])``.
    """

    theta_shp: np.ndarray
    theta_rte: np.ndarray
    beta_shp: np.ndarray
    beta_rte: np.ndarray
    betatilde_shp: np.ndarray
    betatilde_rte: np.ndarray

    NAMES = ("theta_shp", "theta_rte", "beta_shp", "beta_rte", "betatilde_shp", "betatilde_rte")

    def arrays(self):
        return [getattr(self, n) for n in self.NAMES]

    def copy(self):
        return VariationalParams(*(a.copy() for a in self.arrays()))

    def check(self):
        for n in self.NAMES:
            a = getattr(self, n)
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise ValueError(f"variational parameter {n} left the positive reals")


def init_variational(spec):
    D, K, V, S = spec.D, spec.K, spec.V, spec.lexicon.size
    return VariationalParams(
        theta_shp=np.ones((D, K)),
        theta_rte=np.full((D, K), D / 1000.0),
        beta_shp=np.ones((K, V)),
        beta_rte=np.full((K, V), 2.0 * D / 1000.0),
        betatilde_shp=np.ones(S),
        betatilde_rte=np.ones(S),
    )


def compose_beta(beta_star, beta_tilde, lexicon):
    """``beta = beta_star`` plus ``beta_tilde`` on the seeded cells."""
    beta = np.array(beta_star, dtype=np.float64, copy=True)
    ks, vs = lexicon.pairs()
    # seeded pairs are unique, so fancy-index accumulation is safe
    beta[ks, vs] += beta_tilde
    return beta


def log_prior(theta, beta_star, beta_tilde, spec, theta_scale=1.0):
    """Joint gamma log prior; the theta block is multiplied by ``theta_scale``."""
    p = spec.priors
    lp_theta = np.sum(gamma_logpdf(theta, p.e, p.f))
    lp_beta = np.sum(gamma_logpdf(beta_star, p.a, p.b))
    lp_tilde = np.sum(gamma_logpdf(beta_tilde, p.c, p.d)) if np.size(beta_tilde) else 0.0
    return float(theta_scale * lp_theta + lp_beta + lp_tilde)


def sample_counts(theta, beta, rng, chunk=2048):
    """Poisson counts with rates ``theta @ beta``, generated in row chunks."""
    D = theta.shape[0]
    blocks = []
    for lo in range(0, D, chunk):
        lam = theta[lo:lo + chunk] @ beta
        blocks.append(sp.csr_matrix(rng.poisson(lam)))
    if not blocks:
        return sp.csr_matrix((0, beta.shape[1]), dtype=np.int64)
    return sp.vstack(blocks, format="csr")


def generate_synthetic(spec, rng):
    """Forward-sample a corpus from the SPF generative process.

    Returns
    -------
    dtm : DocTermMatrix
    theta : ndarray, shape (D, K)
    beta : ndarray, shape (K, V)
        Composed topic-term intensities (neutral plus seeded parts).
    """
    from .textprep import DocTermMatrix

    p = spec.priors
    theta = gamma_sample(np.full((spec.D, spec.K), p.e), p.f, rng)
    beta_star = gamma_sample(np.full((spec.K, spec.V), p.a), p.b, rng)
    beta_tilde = gamma_sample(np.full(spec.lexicon.size, p.c), p.d, rng)
    beta = compose_beta(beta_star, beta_tilde, spec.lexicon)
    counts = sample_counts(theta, beta, rng)
    return DocTermMatrix(counts), theta, beta
