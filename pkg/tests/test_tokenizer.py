import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alignemb.corpus import CorpusConfig, Sentence, generate_corpus
from alignemb.tokenizer import CLS, MASK, PAD, UNK, Tokenizer


def _tok(words, max_word_chars=6, max_seq_len=32):
    return Tokenizer.build([Sentence(0, words)], max_word_chars, max_seq_len)


def test_specials_have_reserved_ids():
    t = _tok(["aa"])
    assert (t.vocab["<pad>"], t.vocab["<cls>"], t.vocab["<mask>"], t.vocab["<unk>"]) == (
        PAD, CLS, MASK, UNK,
    )
    assert sorted(t.vocab.values()) == list(range(len(t)))


def test_three_single_token_words():
    t = _tok(["aa", "bb", "cc"])
    ids, spans = t.tokenize(Sentence(0, ["aa", "bb", "cc"]))
    assert len(ids) == 4
    assert ids[0] == CLS
    assert spans == [(1, 2), (2, 3), (3, 4)]


def test_long_word_splits_into_two_subwords():
    t = _tok(["abcdefgh"], max_word_chars=4)
    assert t.split_word("abcdefgh", 4) == ["abcd", "##efgh"]
    ids, spans = t.tokenize(Sentence(0, ["abcdefgh"]))
    assert spans == [(1, 3)]
    assert len(ids) == 3


def test_truncation_drops_trailing_whole_words():
    words = [f"w{i}" for i in range(40)]
    t = _tok(words, max_seq_len=32)
    ids, spans = t.tokenize(Sentence(0, words))
    assert len(spans) == 31
    assert len(ids) == 32


def test_truncation_never_splits_a_span():
    words = ["x"] * 29 + ["abcdefgh", "zz"]  # the split word would need slots 31-32
    t = _tok(words, max_word_chars=4, max_seq_len=31)
    ids, spans = t.tokenize(Sentence(0, words))
    assert len(ids) == 30  # cls + 29 singles; the two-piece word is dropped whole
    assert len(spans) == 29


def test_empty_after_truncation_is_error():
    t = _tok(["abcdefgh"], max_word_chars=4, max_seq_len=2)
    with pytest.raises(ValueError, match="truncation"):
        t.tokenize(Sentence(0, ["abcdefgh"]))


def test_unknown_pieces_map_to_unk():
    t = _tok(["aa"])
    ids, spans = t.tokenize(Sentence(0, ["zz", "aa"]))
    assert ids[1] == UNK
    assert ids[2] == t.vocab["aa"]
    assert spans == [(1, 2), (2, 3)]


def test_tokenize_deterministic():
    t = _tok(["aa", "bb", "abcdefgh"], max_word_chars=4)
    s = Sentence(0, ["aa", "abcdefgh", "bb"])
    ids1, sp1 = t.tokenize(s)
    ids2, sp2 = t.tokenize(s)
    assert np.array_equal(ids1, ids2) and sp1 == sp2


@settings(max_examples=25, deadline=None)
@given(
    vocab=st.integers(10, 200),
    fert=st.sampled_from([0.0, 0.5]),
    chars=st.integers(4, 7),
    seed=st.integers(0, 500),
)
def test_spans_tile_token_range(vocab, fert, chars, seed):
    cfg = CorpusConfig(languages=[(1, vocab, 5)], fertility_prob=fert,
                       sentence_length_range=(1, 9))
    corpus = generate_corpus(cfg, seed=seed)[(0, 1)]
    sents = [s for p in corpus for s in (p.src, p.tgt)]
    t = Tokenizer.build(sents, max_word_chars=chars, max_seq_len=32)
    for s in sents:
        ids, spans = t.tokenize(s)
        assert spans[0][0] == 1
        assert spans[-1][1] == len(ids)
        for (a, b), (c, d) in zip(spans, spans[1:]):
            assert a < b == c < d
        assert len(ids) <= 32
