import json
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keyreader import synthetic
from keyreader.textproc import (
    CorpusStats, KeywordStats, Vocabulary, keywordify, load_stopwords, tfidf_scores, tokenize, words,
)
from keyreader.textproc import skipgram
from keyreader.textproc.squad import char_span_to_tokens, examples_from_json, read_dataset, write_dataset
from keyreader.textproc.tagging import GazetteerNERTagger, RulePOSTagger, match_bits, suffix_lemma
from keyreader.textproc.vocab import EmbeddingParseError, load_embeddings

import oracles

STOP = load_stopwords()


def _corpus_lines():
    lines = [r[0] for r in synthetic.purchase_records(40, seed=9)]
    lines += [r[1] for r in synthetic.trade_records(30, seed=9)]
    lines += [
        "Who was this season's NFL MVP?", "red-gold, yes", "  leading   and trailing  ", "(nested [brackets])",
        "Tesla's \"alternating current\" -- 1888.", "naïve café, déjà vu!", "e.g. U.S.A. and 3.14 etc.",
        "tab\tseparated\nlines", "", "?!", "'quoted' words", "don't stop", "50%", "a/b c-d", "end...",
    ]
    rng = np.random.default_rng(0)
    alphabet = list("abcXYZ019 ,.;:!?'\"()-") + ["é", "\u2014"]
    while len(lines) < 100:
        lines.append("".join(rng.choice(alphabet, size=int(rng.integers(1, 30)))))
    return lines


# --- tokenize ---------------------------------------------------------------


def test_tokenize_question():
    assert words("Who was MVP?") == ["Who", "was", "MVP", "?"]


def test_tokenize_keeps_inner_hyphen():
    assert words("red-gold, yes") == ["red-gold", ",", "yes"]


@pytest.mark.parametrize("line", _corpus_lines())
def test_offsets_reconstruct_source(line):
    toks = tokenize(line)
    rebuilt, pos = [], 0
    for t in toks:
        assert line[t.start:t.end] == t.text
        gap = line[pos:t.start]
        assert gap.strip() == ""
        rebuilt.append(gap + t.text)
        pos = t.end
    assert line[pos:].strip() == ""
    assert "".join(rebuilt) + line[pos:] == line


def test_corpus_has_100_lines():
    assert len(_corpus_lines()) == 100


def test_clitic_split():
    assert words("season's") == ["season", "'s"]


# --- vocabulary / embeddings ------------------------------------------------


def test_vocab_specials_and_order():
    v = Vocabulary.build([["b", "a", "b"], ["c"]])
    assert v.itos == ["<pad>", "<unk>", "<eos>", "b", "a", "c"]
    assert v.id("b") == 3 and v.id("zzz") == 1
    assert Vocabulary.from_json(json.loads(json.dumps(v.to_json()))).itos == v.itos


def test_embeddings_missing_token_gets_random_row(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("alpha 1 2\nbeta 3 4\n")
    v = Vocabulary(["alpha", "beta", "gamma"])
    table = load_embeddings(path, v, np.random.default_rng(0))
    assert table.shape == (len(v), 2)
    assert table[v.id("alpha")].tolist() == [1.0, 2.0]
    assert table[v.id("beta")].tolist() == [3.0, 4.0]
    assert not np.allclose(table[v.id("gamma")], 0.0)


def test_embeddings_duplicate_first_wins(tmp_path, caplog):
    path = tmp_path / "e.txt"
    path.write_text("alpha 1 2\nalpha 9 9\n")
    v = Vocabulary(["alpha"])
    with caplog.at_level(logging.WARNING):
        table = load_embeddings(path, v, np.random.default_rng(0))
    assert table[v.id("alpha")].tolist() == [1.0, 2.0]
    assert any("alpha" in r.message for r in caplog.records)


def test_embeddings_dimension_mismatch_names_line(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("alpha 1 2\nbeta 3\n")
    with pytest.raises(EmbeddingParseError, match="2"):
        load_embeddings(path, Vocabulary(["alpha", "beta"]), np.random.default_rng(0))


def test_embeddings_match_reference_parse(tmp_path):
    rng = np.random.default_rng(4)
    names = [f"w{k}" for k in range(10)]
    rows = rng.standard_normal((10, 4)).round(6)
    path = tmp_path / "fixture.txt"
    path.write_text("".join(f"{n} {' '.join(repr(float(x)) for x in r)}\n" for n, r in zip(names, rows)))
    v = Vocabulary(names + ["missing"])
    table = load_embeddings(path, v, np.random.default_rng(0))
    reference = {}
    for line in path.read_text().splitlines():
        parts = line.split(" ")
        reference[parts[0]] = [float(x) for x in parts[1:]]
    for n in names:
        assert table[v.id(n)].tolist() == reference[n]


# --- tf-idf / keywordify ----------------------------------------------------


def test_idf_zero_when_token_in_every_document():
    stats = CorpusStats([["x", "a"], ["x"], ["x", "b"], ["x"]])
    assert tfidf_scores(["x"], stats) == [0.0]


def test_tfidf_single_occurrence():
    stats = CorpusStats([["y"], ["a"], ["b"], ["c"]])
    assert tfidf_scores(["y"], stats)[0] == pytest.approx(math.log(5 / 2))
    assert tfidf_scores(["y"], stats)[0] == pytest.approx(0.916, abs=1e-3)


def test_duplicate_token_doubles_weight():
    stats = CorpusStats([["y"], ["a"], ["b"], ["c"]])
    once = tfidf_scores(["y", "a"], stats)[0]
    twice = tfidf_scores(["y", "y", "a"], stats)[0]
    assert twice == pytest.approx(2 * once)


KEYWORD_PAIRS = [
    ("Who was this season's NFL MVP?", "season NFL MVP"),
    ("What kind of weapon did Tesla talk about?", "kind weapon Tesla talk"),
    ("To which technology type that Tesla worked on did the caption refer to?",
     "technology type Tesla worked caption refer"),
    ("The two AAA clubs divided the state into a northern and southern California as opposed to what point of"
     " view?", "AAA divided state northern California opposed point view"),
    ("Which element is mixed with gold to make red gold?", "element mixed gold make red gold"),
    ("What was the original use of the building which now houses the Tate Modern Art Gallery in London?",
     "original use building houses Tate Modern Art London"),
]
# filler documents make "two", "clubs", "southern" and "gallery" common, so they prune first
PAIR_FILLER = ["how many two clubs won", "which southern clubs", "the two southern teams", "a gallery of art",
                 "gallery opening two", "what clubs did southern gallery host"]
PAIR_SEED = 12  # first seed under the default rates whose draws drop every stopword in these six


def pair_corpus():
    return CorpusStats([words(q) for q, _ in KEYWORD_PAIRS] + [words(f) for f in PAIR_FILLER])


def test_keyword_pairs_forced_drop():
    corpus = pair_corpus()
    for q, expected in KEYWORD_PAIRS:
        out = keywordify(words(q), np.random.default_rng(0), STOP, corpus, stop_drop=1.0, noise=0.0)
        assert " ".join(out) == expected


def test_keyword_pairs_under_default_rates_with_fixed_seed():
    corpus = pair_corpus()
    rng = np.random.default_rng(PAIR_SEED)
    assert [" ".join(keywordify(words(q), rng, STOP, corpus)) for q, _ in KEYWORD_PAIRS] == [e for _, e in KEYWORD_PAIRS]


def test_three_content_words_unchanged():
    corpus = CorpusStats([["gold", "price", "london"]])
    assert keywordify(["gold", "price", "london"], np.random.default_rng(0), STOP, corpus) == [
        "gold", "price", "london"]


def test_preserved_words_survive():
    corpus = CorpusStats([["when"]])
    for seed in range(20):
        out = keywordify(words("when and where did the war end ?"), np.random.default_rng(seed), STOP, corpus)
        assert out[0] == "when" and "where" in out


def test_all_stopwords_falls_back_to_one_token():
    stats = KeywordStats()
    corpus = CorpusStats([["what", "is", "it"], ["it"]])
    out = keywordify(["what", "is", "it", "?"], np.random.default_rng(0), STOP, corpus, stop_drop=1.0,
                     stats=stats)
    assert len(out) == 1 and stats.fallbacks == 1


def test_empty_question_is_an_error():
    with pytest.raises(ValueError):
        keywordify([], np.random.default_rng(0), STOP, CorpusStats())


_word = st.sampled_from(sorted(STOP)[:40] + ["gold", "red", "tesla", "coil", "london", "art", "war", "river",
                                               "when", "where", "?", ","])


@settings(max_examples=200, deadline=None)
@given(st.lists(_word, min_size=1, max_size=30), st.integers(0, 2 ** 31))
def test_keywordify_properties(tokens, seed):
    corpus = CorpusStats([tokens, ["gold", "art"], ["war"]])
    out = keywordify(tokens, np.random.default_rng(seed), STOP, corpus)
    assert 1 <= len(out) <= 8
    it = iter(tokens)
    assert all(any(t == u for u in it) for t in out)  # subsequence, order kept
    content = [t for t in tokens if t not in (",", "?")]
    if len(content) <= 8 and any(t in ("when", "where") for t in tokens):
        assert {"when", "where"} & set(tokens) <= set(out)


@settings(max_examples=100, deadline=None)
@given(st.lists(_word, min_size=1, max_size=30), st.integers(0, 2 ** 31))
def test_keywordify_matches_reference(tokens, seed):
    docs = [tokens, ["gold", "art"], ["war", "gold"]]
    ours = keywordify(tokens, np.random.default_rng(seed), STOP, CorpusStats(docs))
    ref = oracles.reference_keywordify(tokens, np.random.default_rng(seed), STOP, docs)
    assert ours == ref


# --- tagging ----------------------------------------------------------------


def _names(tagger, tokens):
    return [tagger.tags[i] for i in tagger.tag(tokens)]


def test_gazetteer_person():
    assert _names(GazetteerNERTagger(), ["Yesterday", "Obama", "spoke"]) == ["O", "PERSON", "O"]


def test_ing_is_verb():
    assert _names(RulePOSTagger(), ["running"]) == ["VERB"]


def test_pos_rules():
    assert _names(RulePOSTagger(), ["The", "famous", "Tesla", "quickly", "played", "7", "?"]) == [
        "DET", "ADJ", "PROPN", "ADV", "VERB", "NUM", "PUNCT"]


def test_tag_lengths_match():
    rng = np.random.default_rng(2)
    vocab = ["the", "Obama", "ran", "quickly", "7", "?", "Paris", "golden", "played", "x1"]
    pos, ner = RulePOSTagger(), GazetteerNERTagger()
    for _ in range(100):
        sent = list(rng.choice(vocab, size=int(rng.integers(1, 15))))
        assert len(pos.tag(sent)) == len(sent) == len(ner.tag(sent))
        assert all(0 <= i < len(pos.tags) for i in pos.tag(sent))
        assert all(0 <= i < len(ner.tags) for i in ner.tag(sent))


def test_match_bits():
    assert match_bits(["Obama"], ["who", "is", "obama"]) == [(0, 1, 1)]
    assert match_bits(["ran"], ["running"]) == [(0, 0, 0)]
    assert match_bits(["gold"], ["gold"]) == [(1, 1, 1)]


def test_suffix_lemma():
    assert suffix_lemma("running") == "run"
    assert suffix_lemma("boxes") == "box"
    assert suffix_lemma("glass") == "glass"


# --- skip-gram --------------------------------------------------------------


def test_skipgram_pairs_window_two():
    assert set(skipgram.skipgram_pairs(list("ABC"), 2)) == {
        ("A", "B"), ("A", "C"), ("B", "A"), ("B", "C"), ("C", "A"), ("C", "B")}


def test_short_sentences_filtered():
    assert skipgram.filter_sentences([[0] * 8, [0] * 9]) == [[0] * 9]


def test_empty_after_filter_is_configuration_error():
    with pytest.raises(skipgram.ConfigurationError):
        skipgram.train_tag_embeddings([[0] * 3], [[0] * 12], 2, 2)


def test_cooccurring_tags_end_up_closer():
    rng = np.random.default_rng(0)
    # X=0 and Y=1 always appear among the same neighbours {4,5}; Z=2 only among {6,7}
    corpus = [list(rng.choice([0, 1, 4, 5], size=10)) for _ in range(150)]
    corpus += [list(rng.choice([2, 3, 6, 7], size=10)) for _ in range(150)]
    E = skipgram.train_skipgram(corpus, 8, dim=10, window=2, epochs=3, seed=1)

    def cos(a, b):
        return E[a] @ E[b] / (np.linalg.norm(E[a]) * np.linalg.norm(E[b]))
    assert cos(0, 1) > cos(0, 2)
    assert cos(0, 1) > 0.5


def test_tag_tables_have_requested_shape():
    pos = [[0, 1, 2] * 4] * 10
    ner = [[0, 0, 1] * 4] * 10
    tp, tn = skipgram.train_tag_embeddings(pos, ner, 5, 3, dim=6, epochs=1)
    assert tp.shape == (5, 6) and tn.shape == (3, 6)


# --- SQuAD I/O --------------------------------------------------------------


def test_char_span_alignment():
    toks = tokenize("It is red gold here.")
    start = "It is red gold here.".index("red gold")
    assert char_span_to_tokens(toks, start, start + len("red gold")) == (2, 3)


def _fixture_blob():
    recs = synthetic.purchase_records(5, seed=11)
    return synthetic.qa_blob(recs, "fixture")


def test_read_write_read_idempotent(tmp_path):
    p1 = tmp_path / "a.json"
    p1.write_text(json.dumps(_fixture_blob()))
    first = read_dataset(p1)
    p2 = tmp_path / "b.json"
    write_dataset(first, p2)
    second = read_dataset(p2)
    p3 = tmp_path / "c.json"
    write_dataset(second, p3)
    assert len(first) == 5
    assert p2.read_text() == p3.read_text()
    assert [(e.id, e.question, e.answers) for e in first] == [(e.id, e.question, e.answers) for e in second]


def test_malformed_offset_excluded():
    blob = _fixture_blob()
    blob["data"][0]["paragraphs"][1]["qas"][0]["answers"][0]["answer_start"] = 9999
    stats = {}
    ex = examples_from_json(blob, stats)
    assert len(ex) == 4
    assert sum(v for v in stats.values() if isinstance(v, int)) >= 1


def test_keyword_round_trip(tmp_path):
    ex = synthetic.purchase_corpus(5, seed=2)
    path = tmp_path / "kw.json"
    write_dataset(ex, path)
    back = read_dataset(path)
    assert [e.keyword for e in back] == [e.keyword for e in ex]
    assert [e.question for e in back] == [e.question for e in ex]
    assert back[0].query_tokens == ex[0].keyword_tokens
