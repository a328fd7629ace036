import gzip
from collections import Counter

import numpy as np
import pytest

from compoundlm.corpus import (BOS, EOS, UNK, Corpus, CorpusFormatError, Vocabulary,
                               build_vocabulary, ngram_array, ngram_stream, read_sentences)


def test_min_count_one_keeps_all_types():
    v = build_vocabulary([["a", "b", "a"]], 1)
    assert set(v.symbols) == {"a", "b", UNK, BOS, EOS}
    assert v.encode_word("c") == v.unk_id


def test_min_count_two_prunes_singletons():
    v = build_vocabulary([["a", "b", "a"]], 2)
    assert v.encode_word("b") == v.unk_id
    assert v.encode_word("a") != v.unk_id
    assert v.counts[v.unk_id] == 1


def test_empty_input_gives_specials_only():
    v = build_vocabulary([], 1)
    assert v.symbols == [UNK, BOS, EOS]
    assert len({v.unk_id, v.bos_id, v.eos_id}) == 3


def test_index_is_bijection_and_specials_not_stored_twice():
    v = build_vocabulary([["x", "<s>", "y", "</s>", "<unk>", "x"]], 1)
    assert all(v.index[s] == i for i, s in enumerate(v.symbols))
    assert v.symbols.count(BOS) == 1 and v.symbols.count(UNK) == 1
    # surface strings of the specials in the text are unknown words
    assert v.encode_word("<s>") == v.unk_id


def test_vocabulary_rejects_special_as_type():
    with pytest.raises(ValueError):
        Vocabulary([UNK, BOS, EOS, BOS])


def test_encode_decode_roundtrip():
    v = build_vocabulary([["a", "b", "c"]], 1)
    assert v.decode(v.encode(["a", "c", "b"])) == ["a", "c", "b"]
    assert v.decode(v.encode(["zzz"])) == [UNK]


def test_trigram_events_of_two_word_sentence():
    v = build_vocabulary([["x", "y"]])
    c = Corpus.from_tokens([["x", "y"]], v)
    x, y = v.index["x"], v.index["y"]
    assert list(ngram_stream(c, 3)) == [((1, 1), x), ((1, x), y), ((x, y), 2)]


def test_unigram_events_have_empty_context():
    v = build_vocabulary([["x"]])
    c = Corpus.from_tokens([["x"]], v)
    assert list(ngram_stream(c, 1)) == [((), v.index["x"]), ((), v.eos_id)]


def test_event_count_matches_independent_pass():
    sents = [["a", "b"], [], ["c", "a", "a"], ["d"]]
    v = build_vocabulary(sents)
    c = Corpus.from_tokens(sents, v)
    expected = sum(len(s) + 1 for s in sents)
    for n in (1, 2, 4):
        assert len(ngram_array(c, n)) == expected == c.event_count


def test_targets_do_not_depend_on_order():
    sents = [["a", "b", "c"], ["c"], ["b", "a"]]
    v = build_vocabulary(sents)
    c = Corpus.from_tokens(sents, v)
    t1 = ngram_array(c, 1)[:, -1]
    for n in (2, 3, 5):
        assert np.array_equal(ngram_array(c, n)[:, -1], t1)


def test_read_sentences_skips_blank_lines(tmp_path):
    p = tmp_path / "c.txt.gz"
    with gzip.open(p, "wt", encoding="utf-8") as fh:
        fh.write("a b\n\n  \nc\n")
    assert read_sentences(p) == [["a", "b"], ["c"]]


def test_invalid_utf8_is_a_load_error(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_bytes(b"ok line\n\xff\xfe bad\n")
    with pytest.raises(CorpusFormatError, match=":2"):
        read_sentences(p)


def test_vocabulary_dump_load(tmp_path):
    v = build_vocabulary([["b", "a", "b"]])
    v.dump(tmp_path / "v.tsv")
    lines = (tmp_path / "v.tsv").read_text().splitlines()
    assert lines[3] == "b\t3\t2"
    assert Vocabulary.load(tmp_path / "v.tsv") == v


def test_min_count_two_shrinks_german_vocabulary(data_dir):
    sents = read_sentences(data_dir / "train_1m.txt.gz")
    freq = Counter(w for s in sents for w in s)   # independent frequency table
    v1 = build_vocabulary(sents, 1)
    v2 = build_vocabulary(sents, 2)
    assert len(v1) - 3 == len(freq)
    assert len(v2) - 3 == sum(1 for c in freq.values() if c >= 2)
    assert len(v2) < len(v1)
