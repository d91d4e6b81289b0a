import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seededpf.textprep import (
    Document, DocTermMatrix, EmptyCorpusError, PreprocessOptions, RawCorpus, Vocabulary, build_dtm,
    category_tfidf, default_stop_words, preprocess, read_corpus, read_doc_index, tfidf_seed_suggestion,
    tokenize, vectorize, write_doc_index,
)


def corpus(*texts, labels=None):
    labels = labels or [None] * len(texts)
    return RawCorpus([Document(str(i), t, l) for i, (t, l) in enumerate(zip(texts, labels))])


def tokens_of(raw):
    return [list(d.tokens) for d in raw.docs]


def test_lowercase_and_stop_words():
    opts = PreprocessOptions(stop_words=frozenset({"the"}), min_term_freq=1, min_doc_length=0)
    assert tokens_of(preprocess(corpus("The DOG ran"), opts)) == [["dog", "ran"]]


def test_rare_terms_removed():
    opts = PreprocessOptions(stop_words=frozenset(), min_term_freq=2, min_doc_length=0)
    out = tokens_of(preprocess(corpus("zebra dog cat", "dog cat"), opts))
    assert all("zebra" not in toks for toks in out)
    assert out == [["dog", "cat"], ["dog", "cat"]]


def test_short_documents_dropped_after_frequency_filter(caplog):
    opts = PreprocessOptions(stop_words=frozenset(), min_term_freq=2, min_doc_length=2)
    with caplog.at_level(logging.INFO, logger="seededpf.textprep"):
        out = preprocess(corpus("dog cat", "dog cat", "dog unique"), opts)
    assert [d.doc_id for d in out.docs] == ["0", "1"]
    assert "dropped 1 documents" in caplog.text


def test_empty_result_raises():
    with pytest.raises(EmptyCorpusError):
        preprocess(corpus("a b"), PreprocessOptions(min_doc_length=5))


def test_tokenizer_rules():
    assert tokenize("Don't stop-me now_ok 42 x café") == ["don", "stop", "me", "now", "ok", "café"]
    assert tokenize("ABC", lowercase=False) == ["ABC"]


def test_default_stop_words_loaded():
    sw = default_stop_words()
    assert {"the", "and", "of"} <= sw
    assert "toy" not in sw


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        RawCorpus([Document("a", "x"), Document("a", "y")])


def test_build_dtm_counts():
    raw = RawCorpus([Document("0", "", tokens=("a", "b", "a")), Document("1", "", tokens=("b",))])
    vocab, dtm = build_dtm(raw)
    assert vocab.terms == ["a", "b"]
    assert dtm.D == 1 + 1 and dtm.V == 2
    assert dtm.row(0) == [(0, 2), (1, 1)]
    assert dtm.row(1) == [(1, 1)]
    assert dtm.N.tolist() == [3, 1]


def test_single_document():
    vocab, dtm = build_dtm(RawCorpus([Document("0", "", tokens=("x",))]))
    assert (dtm.D, dtm.V) == (1, 1)
    assert dtm.counts.toarray().tolist() == [[1]]


def test_disjoint_documents_vocab_adds_up():
    docs = [("a", "b"), ("c",), ("d", "e", "f")]
    vocab, dtm = build_dtm(RawCorpus([Document(str(i), "", tokens=t) for i, t in enumerate(docs)]))
    assert dtm.V == 6 and dtm.nnz == 6
    assert (dtm.counts.toarray() > 0).sum(axis=0).tolist() == [1] * 6


@given(st.lists(st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=12), min_size=1, max_size=8))
def test_dtm_row_sums_are_lengths(docs):
    vocab, dtm = build_dtm(RawCorpus([Document(str(i), "", tokens=tuple(t)) for i, t in enumerate(docs)]))
    assert dtm.N.tolist() == [len(t) for t in docs]
    assert dtm.V == len({w for t in docs for w in t})


def test_log_factorial_cached():
    dtm = DocTermMatrix(np.array([[3, 0, 1], [0, 0, 0]]))
    np.testing.assert_allclose(dtm.log_factorial, [np.log(6.0), 0.0], atol=1e-13)


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        DocTermMatrix(np.array([[1, -1]]))


def test_triplet_roundtrip(tmp_path):
    dtm = DocTermMatrix(np.array([[1, 0, 2], [0, 0, 0], [0, 5, 0]]), ["x", "y", "z"])
    p = tmp_path / "dtm.txt"
    dtm.save_triplets(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "3 3 3"
    assert lines[1:] == ["0 0 1", "0 2 2", "2 1 5"]
    back = DocTermMatrix.load_triplets(p, dtm.doc_ids)
    assert (back.counts != dtm.counts).nnz == 0 and back.doc_ids == ["x", "y", "z"]


def test_triplet_nnz_mismatch(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 2 2\n0 0 1\n")
    with pytest.raises(ValueError):
        DocTermMatrix.load_triplets(p)


def test_vocabulary_roundtrip(tmp_path):
    v = Vocabulary(["b", "a", "c"])
    v.save(tmp_path / "v.txt")
    assert Vocabulary.load(tmp_path / "v.txt") == v
    assert v["a"] == 1 and "c" in v and "z" not in v
    with pytest.raises(ValueError):
        Vocabulary(["a", "a"])


def labeled(pairs):
    raw = RawCorpus([Document(str(i), "", label=l, tokens=tuple(t.split())) for i, (l, t) in enumerate(pairs)])
    return build_dtm(raw)


def test_seed_suggestion_disjoint():
    vocab, dtm = labeled([("A", " ".join(["dog"] * 10)), ("B", " ".join(["cat"] * 10))])
    lex = tfidf_seed_suggestion(dtm, dtm.labels, 1, vocab)
    assert lex.topic_names == ["A", "B"]
    assert [lex.words(0), lex.words(1)] == [["dog"], ["cat"]]


def test_shared_term_ranks_below_exclusive_term():
    # "the" occurs equally in all three categories; "bark" only in A, same frequency
    vocab, dtm = labeled([("A", "the the bark bark"), ("B", "the the meow"), ("C", "the the moo")])
    cats, scores, tf = category_tfidf(dtm, dtm.labels)
    # brute force: idf = ln((1+C)/(1+df)) + 1
    idf_the = np.log(4 / 4) + 1
    idf_bark = np.log(4 / 2) + 1
    assert scores[0, vocab["the"]] == pytest.approx(2 * idf_the)
    assert scores[0, vocab["bark"]] == pytest.approx(2 * idf_bark)
    lex = tfidf_seed_suggestion(dtm, dtm.labels, 1, vocab)
    assert lex.words(0) == ["bark"]


def test_seed_suggestion_tie_break_by_string():
    vocab, dtm = labeled([("A", "y x"), ("B", "q")])
    assert tfidf_seed_suggestion(dtm, dtm.labels, 1, vocab).words(0) == ["x"]


def test_seed_suggestion_tie_break_by_corpus_frequency():
    # x and y score the same in A, y is more frequent overall
    vocab, dtm = labeled([("A", "x y"), ("B", "x q y y")])
    assert tfidf_seed_suggestion(dtm, dtm.labels, 1, vocab).words(0) == ["y"]


def test_seed_suggestion_warns_on_small_category():
    vocab, dtm = labeled([("A", "dog"), ("B", "cat cow")])
    with pytest.warns(UserWarning):
        lex = tfidf_seed_suggestion(dtm, dtm.labels, 2, vocab)
    assert lex.words(0) == ["dog"]


def test_seed_suggestion_six_by_ten():
    rng = np.random.default_rng(0)
    pairs = [(f"c{c}", " ".join(f"w{c}_{rng.integers(30)}" for _ in range(80))) for c in range(6)]
    vocab, dtm = labeled(pairs)
    lex = tfidf_seed_suggestion(dtm, dtm.labels, 10, vocab)
    assert lex.K == 6 and all(len(s) == 10 for s in lex.seeds)
    assert lex.to_text().count("\n") == 6
    assert tfidf_seed_suggestion(dtm, dtm.labels, 10, vocab).to_text() == lex.to_text()


def test_read_corpus_with_and_without_header(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text('label,doc_id,text\nA,d1,"hello, world"\nB,d2,bye\n')
    raw = read_corpus(p)
    assert raw.doc_ids == ["d1", "d2"] and raw.labels == ["A", "B"]
    assert raw.docs[0].text == "hello, world"
    q = tmp_path / "c.tsv"
    q.write_text("d1\tsome text\n")
    raw = read_corpus(q)
    assert raw.doc_ids == ["d1"] and raw.labels == [None]


def test_doc_index_roundtrip(tmp_path):
    write_doc_index(tmp_path / "d.csv", ["a", "b"], ["X", None])
    assert read_doc_index(tmp_path / "d.csv") == (["a", "b"], ["X", None])
    write_doc_index(tmp_path / "e.csv", ["a"])
    assert read_doc_index(tmp_path / "e.csv") == (["a"], None)


def test_vectorize_uses_fixed_vocabulary():
    vocab = Vocabulary(["dog", "cat"])
    dtm = vectorize(corpus("Dog dog bird the", "nothing here"), vocab)
    assert dtm.counts.toarray().tolist() == [[2, 0], [0, 0]]
    assert dtm.D == 2
