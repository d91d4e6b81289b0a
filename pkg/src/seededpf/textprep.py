"""Corpus preprocessing, document-term matrices and TF-IDF seed suggestion."""
import csv
import logging
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class EmptyCorpusError(ValueError):
    """No documents survive preprocessing."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    label: Optional[str] = None
    tokens: Optional[tuple] = None


@dataclass
class RawCorpus:
    docs: list

    def __post_init__(self):
        ids = [d.doc_id for d in self.docs]
        if len(set(ids)) != len(ids):
            dupes = sorted(k for k, n in Counter(ids).items() if n > 1)
            raise ValueError(f"duplicate doc_ids: {dupes[:5]}")

    def __len__(self):
        return len(self.docs)

    @property
    def doc_ids(self):
        return [d.doc_id for d in self.docs]

    @property
    def labels(self):
        return [d.label for d in self.docs]


def default_stop_words():
    text = resources.files("seededpf").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    return frozenset(w for w in text.split() if w)


def read_stop_words(path):
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip().lower() for line in fh if line.strip() and not line.startswith("#"))


@dataclass
class PreprocessOptions:
    lowercase: bool = True
    stop_words: frozenset = field(default_factory=default_stop_words)
    min_term_freq: int = 2
    min_doc_length: int = 7


def tokenize(text, lowercase=True):
    """Split on non-alphanumeric boundaries, keep alphabetic tokens of length >= 2."""
    if lowercase:
        text = text.lower()
    return [t for t in _TOKEN_RE.findall(text) if len(t) >= 2 and t.isalpha()]


def preprocess(raw, opts=None):
    """Tokenize, drop stop words and rare terms, then drop short documents.

    The frequency filter runs before the length filter, so a document can be
    dropped because its rare words were removed.
    """
    opts = opts or PreprocessOptions()
    stop = opts.stop_words
    token_lists = [[t for t in tokenize(d.text, opts.lowercase) if t not in stop] for d in raw.docs]
    freq = Counter(t for toks in token_lists for t in toks)
    keep_term = {t for t, n in freq.items() if n >= opts.min_term_freq}
    out = []
    short = 0
    for doc, toks in zip(raw.docs, token_lists):
        toks = tuple(t for t in toks if t in keep_term)
        if len(toks) < opts.min_doc_length:
            short += 1
            continue
        out.append(replace(doc, text=" ".join(toks), tokens=toks))
    if short:
        logger.info("dropped %d documents shorter than %d tokens", short, opts.min_doc_length)
    if not out:
        raise EmptyCorpusError("empty corpus after filtering")
    return RawCorpus(out)


class Vocabulary:
    """Ordered, bijective mapping between term strings and column ids."""

    def __init__(self, terms):
        self.terms = list(terms)
        self.index = {t: i for i, t in enumerate(self.terms)}
        if len(self.index) != len(self.terms):
            raise ValueError("vocabulary terms must be unique")

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.index

    def __getitem__(self, term):
        return self.index[term]

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.terms == other.terms

    def save(self, path):
        Path(path).write_text("".join(t + "\n" for t in self.terms), encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls(Path(path).read_text(encoding="utf-8").splitlines())


class DocTermMatrix:
    """Sparse ``D x V`` count matrix with per-document totals ``N``.

    ``counts`` is a CSR matrix without explicit zeros.
    """

    def __init__(self, counts, doc_ids=None, labels=None):
        counts = sp.csr_matrix(counts, dtype=np.int64)
        counts.eliminate_zeros()
        counts.sort_indices()
        if counts.nnz and counts.data.min() < 0:
            raise ValueError("counts must be nonnegative")
        self.counts = counts
        self.doc_ids = list(doc_ids) if doc_ids is not None else [str(i) for i in range(counts.shape[0])]
        self.labels = list(labels) if labels is not None else None
        if len(self.doc_ids) != self.D or (self.labels is not None and len(self.labels) != self.D):
            raise ValueError("doc_ids/labels length must equal D")
        self.N = np.asarray(counts.sum(axis=1)).ravel()

    @property
    def D(self):
        return self.counts.shape[0]

    @property
    def V(self):
        return self.counts.shape[1]

    @property
    def nnz(self):
        return self.counts.nnz

    @property
    def log_factorial(self):
        """Per-document ``sum_v lgamma(y_dv + 1)``, computed once."""
        if getattr(self, "_log_factorial", None) is None:
            from .statmath import lgamma

            data = self.counts.data
            table = lgamma(np.arange(data.max() + 1 if data.size else 1, dtype=np.float64) + 1.0)
            table = np.atleast_1d(table)
            per_entry = sp.csr_matrix((table[data], self.counts.indices, self.counts.indptr), shape=self.counts.shape)
            self._log_factorial = np.asarray(per_entry.sum(axis=1)).ravel()
        return self._log_factorial

    def row(self, d):
        """Sparse ``(term_id, count)`` pairs of document ``d``."""
        lo, hi = self.counts.indptr[d], self.counts.indptr[d + 1]
        return list(zip(self.counts.indices[lo:hi].tolist(), self.counts.data[lo:hi].tolist()))

    def subset(self, rows):
        rows = np.asarray(rows)
        return DocTermMatrix(
            self.counts[rows],
            [self.doc_ids[i] for i in rows],
            None if self.labels is None else [self.labels[i] for i in rows],
        )

    def save_triplets(self, path):
        """Write ``D V NNZ`` then one ``d v count`` line per nonzero, 0-indexed."""
        coo = self.counts.tocoo()
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{self.D} {self.V} {self.nnz}\n")
            for d, v, y in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
                fh.write(f"{d} {v} {y}\n")

    @classmethod
    def load_triplets(cls, path, doc_ids=None, labels=None):
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 3:
                raise ValueError(f"{path}: expected header 'D V NNZ'")
            D, V, nnz = map(int, header)
            body = np.loadtxt(fh, dtype=np.int64, ndmin=2) if nnz else np.zeros((0, 3), np.int64)
        if body.shape[0] != nnz:
            raise ValueError(f"{path}: header says {nnz} nonzeros, found {body.shape[0]}")
        counts = sp.csr_matrix((body[:, 2], (body[:, 0], body[:, 1])), shape=(D, V))
        return cls(counts, doc_ids, labels)


def build_dtm(raw):
    """Count token multiplicities; terms are ordered by first occurrence."""
    if not raw.docs:
        raise EmptyCorpusError("empty corpus")
    index = {}
    rows, cols, vals = [], [], []
    for d, doc in enumerate(raw.docs):
        toks = doc.tokens if doc.tokens is not None else tuple(doc.text.split())
        for term, n in Counter(toks).items():
            rows.append(d)
            cols.append(index.setdefault(term, len(index)))
            vals.append(n)
    vocab = Vocabulary(index)
    counts = sp.csr_matrix((vals, (rows, cols)), shape=(len(raw.docs), len(vocab)), dtype=np.int64)
    labels = raw.labels if any(l is not None for l in raw.labels) else None
    return vocab, DocTermMatrix(counts, raw.doc_ids, labels)


def category_tfidf(dtm, labels):
    """TF-IDF over one pseudo-document per category.

    tf is the summed count of a term in the category, idf is
    ``ln((1 + C) / (1 + df)) + 1`` with ``df`` the number of categories using it.

    Returns
    -------
    categories : list of str, sorted
    tfidf : ndarray, shape (C, V)
    tf : ndarray, shape (C, V)
    """
    labels = list(labels)
    if len(labels) != dtm.D or any(l is None for l in labels):
        raise ValueError("every document needs a label")
    categories = sorted(set(labels))
    cat_idx = np.array([categories.index(l) for l in labels]) if categories else np.zeros(0, int)
    member = sp.csr_matrix((np.ones(dtm.D), (cat_idx, np.arange(dtm.D))), shape=(len(categories), dtm.D))
    tf = np.asarray((member @ dtm.counts).todense(), dtype=np.float64)
    df = (tf > 0).sum(axis=0)
    idf = np.log((1.0 + len(categories)) / (1.0 + df)) + 1.0
    return categories, tf * idf, tf


def tfidf_seed_suggestion(dtm, labels, top_n, vocab=None):
    """Top ``top_n`` words per category by category-level TF-IDF.

    Ties are broken by higher corpus frequency, then by term string (or term
    id when no vocabulary is given).
    """
    from .model import SeedLexicon

    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    categories, scores, tf = category_tfidf(dtm, labels)
    global_freq = tf.sum(axis=0)
    if vocab is not None:
        lex_rank = np.empty(dtm.V, dtype=np.int64)
        lex_rank[np.argsort(np.array(vocab.terms, dtype=object), kind="stable")] = np.arange(dtm.V)
    else:
        lex_rank = np.arange(dtm.V)
    seeds = []
    for c, name in enumerate(categories):
        present = np.flatnonzero(tf[c] > 0)
        if present.size < top_n:
            warnings.warn(f"category {name!r} has only {present.size} distinct terms (< top_n={top_n})")
        order = np.lexsort((lex_rank[present], -global_freq[present], -scores[c, present]))
        seeds.append(tuple(sorted(present[order[:top_n]].tolist())))
    return SeedLexicon(categories, seeds, vocab=vocab)


def read_corpus(path, delimiter=None):
    """Read a CSV/TSV with columns ``doc_id, text[, label]``.

    A header row naming the columns is used when present; otherwise column
    order is taken as given.
    """
    path = Path(path)
    if delimiter is None:
        delimiter = "\t" if path.suffix.lower() in (".tsv", ".tab") else ","
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    if not rows:
        raise EmptyCorpusError(f"{path}: no rows")
    head = [h.strip().lower() for h in rows[0]]
    if "text" in head:
        i_id = head.index("doc_id") if "doc_id" in head else None
        i_text = head.index("text")
        i_label = head.index("label") if "label" in head else None
        rows = rows[1:]
    else:
        i_id, i_text = 0, 1
        i_label = 2 if len(rows[0]) > 2 else None
    docs = []
    for n, r in enumerate(rows):
        if not r:
            continue
        doc_id = r[i_id] if i_id is not None else str(n)
        label = r[i_label] if i_label is not None and i_label < len(r) and r[i_label] != "" else None
        docs.append(Document(doc_id, r[i_text], label))
    return RawCorpus(docs)


def write_doc_index(path, doc_ids, labels=None):
    """Row-ordered ``doc_id,label`` file accompanying a triplet DTM."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", "label"])
        for i, doc_id in enumerate(doc_ids):
            w.writerow([doc_id, "" if labels is None or labels[i] is None else labels[i]])


def read_doc_index(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    ids = [r["doc_id"] for r in rows]
    labels = [r.get("label") or None for r in rows]
    return ids, (labels if any(l is not None for l in labels) else None)


def vectorize(raw, vocab, opts=None):
    """Count matrix of new documents over a fixed vocabulary.

    Tokens outside ``vocab`` are ignored and no document is dropped, so rows
    line up with ``raw.docs``.
    """
    opts = opts or PreprocessOptions()
    rows, cols, vals = [], [], []
    for d, doc in enumerate(raw.docs):
        toks = doc.tokens if doc.tokens is not None else tokenize(doc.text, opts.lowercase)
        counts = Counter(vocab.index[t] for t in toks if t in vocab and t not in opts.stop_words)
        for v, n in counts.items():
            rows.append(d)
            cols.append(v)
            vals.append(n)
    counts = sp.csr_matrix((vals, (rows, cols)), shape=(len(raw.docs), len(vocab)), dtype=np.int64)
    labels = raw.labels if any(l is not None for l in raw.labels) else None
    return DocTermMatrix(counts, raw.doc_ids, labels)
