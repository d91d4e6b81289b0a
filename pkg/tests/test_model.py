import math

import numpy as np
import pytest

from seededpf.model import (
    ModelSpec, PriorConfig, SeedLexicon, VariationalParams, compose_beta, generate_synthetic,
    init_variational, log_prior, sample_counts,
)
from seededpf.statmath import gamma_logpdf, make_rng
from seededpf.textprep import Vocabulary


def test_prior_defaults_and_validation():
    p = PriorConfig()
    assert (p.a, p.b, p.c, p.d, p.e, p.f) == (0.3, 0.3, 1.0, 0.3, 0.3, 0.3)
    with pytest.raises(ValueError):
        PriorConfig(a=0.0)
    with pytest.warns(UserWarning):
        PriorConfig(c=0.2)


def test_lexicon_pairs_row_major():
    lex = SeedLexicon(["x", "y", "z"], [[4, 1], [], [0]])
    ks, vs = lex.pairs()
    assert ks.tolist() == [0, 0, 2] and vs.tolist() == [1, 4, 0]
    assert lex.size == 3 and lex.K == 3
    assert lex.mask(5).sum() == 3


def test_lexicon_text_roundtrip(tmp_path):
    vocab = Vocabulary(["toy", "game", "book", "read"])
    lex = SeedLexicon.from_words({"Toys": ["toy", "game"], "Books": ["read", "book"]}, vocab)
    lex.save(tmp_path / "s.txt")
    assert (tmp_path / "s.txt").read_text() == "Toys: toy, game\nBooks: book, read\n"
    assert SeedLexicon.load(tmp_path / "s.txt", vocab) == lex


def test_lexicon_unknown_words():
    vocab = Vocabulary(["a"])
    with pytest.warns(UserWarning):
        lex = SeedLexicon.from_words({"t": ["a", "zz"]}, vocab)
    assert lex.seeds == [(0,)]
    with pytest.raises(KeyError):
        SeedLexicon.from_words({"t": ["zz"]}, vocab, strict=True)
    with pytest.raises(ValueError):
        SeedLexicon.parse_text("no colon here")


def test_with_unseeded():
    lex = SeedLexicon(["a"], [[0]]).with_unseeded(2)
    assert lex.topic_names == ["a", "unseeded_1", "unseeded_2"]
    assert lex.seeds[1:] == [(), ()]


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(2, 3, 1, PriorConfig(), SeedLexicon(["a"], [[3]]))
    with pytest.raises(ValueError):
        ModelSpec(2, 3, 2, PriorConfig(), SeedLexicon(["a"], [[0]]))
    assert ModelSpec(2, 3, 2).lexicon.size == 0


def test_init_formulas():
    p = init_variational(ModelSpec(30000, 2, 1))
    assert np.all(p.theta_rte == 30.0) and np.all(p.beta_rte == 60.0)
    assert np.all(p.theta_shp == 1.0) and np.all(p.beta_shp == 1.0)
    assert np.all(init_variational(ModelSpec(1000, 2, 1)).theta_rte == 1.0)
    empty = init_variational(ModelSpec(10, 4, 2))
    assert empty.betatilde_shp.shape == (0,) and empty.betatilde_rte.shape == (0,)
    seeded = init_variational(ModelSpec(10, 4, 2, lexicon=SeedLexicon(["a", "b"], [[1], [2, 3]])))
    assert np.all(seeded.betatilde_shp == 1.0) and np.all(seeded.betatilde_rte == 1.0)
    assert seeded.betatilde_shp.shape == (3,)


def test_variational_check():
    p = init_variational(ModelSpec(3, 2, 1))
    p.theta_rte[0, 0] = np.nan
    with pytest.raises(ValueError):
        p.check()


def test_compose_beta():
    lex = SeedLexicon(["a", "b"], [[0], []])
    bs = np.ones((2, 3))
    out = compose_beta(bs, np.array([2.5]), lex)
    assert out[0, 0] == 3.5
    assert np.array_equal(out[:, 1:], bs[:, 1:]) and np.array_equal(out[1], bs[1])
    assert np.array_equal(compose_beta(bs, np.zeros(0), SeedLexicon(["a", "b"], [[], []])), bs)


def test_log_prior_sum_oracle():
    lex = SeedLexicon(["a", "b"], [[0], [2]])
    spec = ModelSpec(2, 3, 2, PriorConfig(), lex)
    theta = np.full((2, 2), 0.3 / 0.3)
    bstar = np.full((2, 3), 1.0)
    btil = np.array([1.0 / 0.3, 1.0 / 0.3])
    manual = sum(gamma_logpdf(x, 0.3, 0.3) for x in theta.ravel())
    manual += sum(gamma_logpdf(x, 0.3, 0.3) for x in bstar.ravel())
    manual += sum(gamma_logpdf(x, 1.0, 0.3) for x in btil)
    assert log_prior(theta, bstar, btil, spec) == pytest.approx(manual, rel=1e-14)


def test_log_prior_scalar_model():
    spec = ModelSpec(1, 1, 1)
    expected = gamma_logpdf(0.7, 0.3, 0.3) + gamma_logpdf(1.9, 0.3, 0.3)
    assert log_prior(np.array([[0.7]]), np.array([[1.9]]), np.zeros(0), spec) == pytest.approx(expected)
    expected2 = 2 * gamma_logpdf(0.7, 0.3, 0.3) + gamma_logpdf(1.9, 0.3, 0.3)
    assert log_prior(np.array([[0.7]]), np.array([[1.9]]), np.zeros(0), spec, theta_scale=2) == pytest.approx(expected2)


def test_tiny_theta_gives_empty_matrix():
    spec = ModelSpec(50, 20, 2, PriorConfig(e=1.0, f=1e6))
    dtm, theta, beta = generate_synthetic(spec, make_rng(0))
    assert dtm.nnz == 0 and theta.shape == (50, 2) and beta.shape == (2, 20)


def test_synthetic_reproducible():
    spec = ModelSpec(30, 10, 2, lexicon=SeedLexicon(["a", "b"], [[0], [1]]))
    a = generate_synthetic(spec, make_rng(5))
    b = generate_synthetic(spec, make_rng(5))
    assert (a[0].counts != b[0].counts).nnz == 0 and np.array_equal(a[1], b[1])


def test_synthetic_mean_counts_monte_carlo():
    # E[y] = sum_k E[theta] E[beta_k]; topic 0 has a seed on term 0
    p = PriorConfig()
    spec = ModelSpec(1, 2, 2, p, SeedLexicon(["a", "b"], [[0], []]))
    rng = make_rng(9)
    ys = np.array([generate_synthetic(spec, rng)[0].counts.toarray()[0] for _ in range(10**4)], dtype=float)
    m_theta, m_beta, m_tilde = p.e / p.f, p.a / p.b, p.c / p.d
    expected = np.array([m_theta * (m_beta + m_tilde) + m_theta * m_beta, 2 * m_theta * m_beta])
    se = ys.std(axis=0) / math.sqrt(len(ys))
    assert np.all(np.abs(ys.mean(axis=0) - expected) < 3 * se)


def test_sample_counts_chunks_match():
    theta = np.abs(np.random.default_rng(0).normal(size=(7, 2)))
    beta = np.ones((2, 3))
    a = sample_counts(theta, beta, make_rng(1), chunk=2)
    b = sample_counts(theta, beta, make_rng(1), chunk=2)
    assert a.shape == (7, 3) and (a != b).nnz == 0
