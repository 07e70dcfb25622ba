import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recipe_hmm.corpus import (AnnotatedSentence, Corpus, CorpusParseError, build_lexicon,
                               corpus_stats, extract_prefix, format_corpus, oov_rate,
                               parse_corpus, read_corpus, split_folds)

TABLE1 = "رشة\tC\t0\nملح\tD\t1\nو\tJ\t0\nفلفل\tE\t1\nاسود\tF\t2\n"


def test_parse_single_sentence():
    corpus = parse_corpus(TABLE1)
    assert len(corpus) == 1
    sent = corpus.sentences[0]
    assert sent.ing_states == ("0", "1", "0", "1", "2")
    assert sent.pos_labels == ("C", "D", "J", "E", "F")
    assert corpus.state_set == ("0", "1", "2")


def test_parse_two_sentences_and_comments():
    text = "# header\n" + TABLE1 + "\n\n" + "ملح\tA\t1\n.\t.\t0\n"
    corpus = parse_corpus(text)
    assert len(corpus) == 2
    assert corpus.n_tokens == 7
    assert corpus.provenance["comment_lines"] == 1


@pytest.mark.parametrize("text, line", [
    ("a\tB\t0\nb\tB\n", 2),
    ("a\tB\t0\nb\tB\t7\n", 2),
    ("a\tB\t0\tx\n", 1),
])
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(CorpusParseError) as err:
        parse_corpus(text)
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}:")


def test_empty_document():
    with pytest.raises(CorpusParseError, match="no sentences"):
        parse_corpus("# only a comment\n\n")


def test_orphan_continuation_strict_and_lenient():
    text = "a\tB\t0\nb\tB\t2\n"
    with pytest.raises(CorpusParseError):
        parse_corpus(text)
    corpus = parse_corpus(text, strict=False)
    assert corpus.provenance["continuation_violations"] == 1


def test_sentence_validation():
    with pytest.raises(ValueError):
        AnnotatedSentence(("a", "b"), ("X",), ("0", "0"))
    with pytest.raises(ValueError):
        AnnotatedSentence(("a",), ("X",), ("5",))
    with pytest.raises(ValueError):
        AnnotatedSentence((), (), ())


def test_format_round_trip(tmp_path):
    corpus = parse_corpus(TABLE1 + "\n" + "ملح\tA\t1\n")
    path = tmp_path / "c.tsv"
    path.write_text(format_corpus(corpus), encoding="utf-8")
    assert read_corpus(path) == corpus


@pytest.mark.parametrize("token, prefix", [
    ("البرتقال", "ال"), ("و", "و"), ("أو", "أو"), ("250", "25")])
def test_extract_prefix(token, prefix):
    assert extract_prefix(token) == prefix


def test_extract_prefix_empty():
    with pytest.raises(ValueError):
        extract_prefix("")


def test_prefix_counts_code_points_not_bytes():
    # a decomposed letter: base character plus combining mark
    assert extract_prefix("éx") == "é"


def test_lexicon_order_and_dedup():
    corpus = Corpus([AnnotatedSentence(["2", "البرتقال", "أو", "الاكليل"], "BCMC", "0000")])
    lex = build_lexicon(corpus)
    assert lex.words == ("2", "البرتقال", "أو", "الاكليل")
    assert lex.prefixes == ("2", "ال", "أو")
    assert "أو" in lex and "x" not in lex
    repeated = Corpus([AnnotatedSentence(["ملح"] * 100, ["A"] * 100, ["1"] * 100)])
    assert len(build_lexicon(repeated)) == 1


def test_split_folds_deterministic_and_balanced():
    plan = split_folds(10, 5, seed=7)
    assert plan == split_folds(10, 5, seed=7)
    assert [len(f) for f in plan.folds()] == [2] * 5
    sizes = {len(f) for f in split_folds(1973, 10, seed=0).folds()}
    assert sizes == {197, 198}
    train, test = plan.train_test(0)
    assert sorted(train + test) == list(range(10))


@pytest.mark.parametrize("k", [1, 11])
def test_split_folds_range(k):
    with pytest.raises(ValueError):
        split_folds(10, k, seed=0)


def test_stats_and_oov():
    corpus = parse_corpus(TABLE1)
    stats = corpus_stats(corpus, reference=corpus)
    assert stats["sentences"] == 1 and stats["tokens"] == 5
    assert stats["lexicon_size"] == 5 and stats["pos_tags"] == 5
    assert stats["state_histogram"] == {"0": 2, "1": 2, "2": 1, "3": 0}
    assert stats["oov_rate"] == 0.0
    other = parse_corpus("ملح\tD\t1\nزيت\tD\t1\n")
    assert oov_rate(other, build_lexicon(corpus)) == 0.5


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.tuples(st.text("ابتثج", min_size=1, max_size=4),
                                   st.sampled_from("ABC"), st.sampled_from("013")),
                         min_size=1, max_size=5), min_size=1, max_size=5))
def test_format_parse_round_trip_property(rows):
    corpus = Corpus([AnnotatedSentence(*zip(*r)) for r in rows])
    assert parse_corpus(format_corpus(corpus)) == corpus
