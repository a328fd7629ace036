import math

import numpy as np
import pytest

from compoundlm.corpus import build_vocabulary, ngram_array
from compoundlm.evaluation import (AlignmentError, EvalReport, HitLengthIndex,
                                   ZeroProbabilityError, breakdown, compare_breakdown,
                                   margin_ranking, perplexity, write_table)
from compoundlm.hpylm import HPYLM
from compoundlm.segmentation import SegmentationDictionary, parse_segments

from conftest import make_corpus
from oracles import padded_events


class Stub:
    """Assigns fixed probabilities by target position in the flat event list."""
    kind = "stub"

    def __init__(self, vocab, order, probs):
        self.vocab, self.order, self.probs = vocab, order, probs

    def prob_events(self, events):
        return np.resize(np.asarray(self.probs, float), len(events))


def test_uniform_over_eight_has_perplexity_eight():
    v = build_vocabulary([list("abcdefg")])
    r = perplexity(Stub(v, 2, [1 / 8]), [list("abc"), list("gfed")])
    assert len(r) == 9
    assert r.perplexity == pytest.approx(8.0, abs=1e-12)
    assert r.cross_entropy == pytest.approx(3.0, abs=1e-15)


def test_two_token_hand_value():
    v = build_vocabulary([["x"]])
    r = perplexity(Stub(v, 2, [0.5, 0.125]), [["x"]])
    assert r.perplexity == pytest.approx(4.0, abs=1e-12)


def test_zero_probability_raises():
    v = build_vocabulary([["x"]])
    with pytest.raises(ZeroProbabilityError, match="position 1"):
        perplexity(Stub(v, 2, [0.5, 0.0]), [["x"]])


def test_oov_flagged_and_counted():
    v = build_vocabulary([["x"]])
    r = perplexity(Stub(v, 2, [0.25]), [["x", "nope"]])
    assert list(r.is_oov) == [False, True, False]
    assert len(r.without_oov()) == 2


def test_planted_trigram_hit_length():
    c = make_corpus("a b c\nd e")
    hits = HitLengthIndex.from_events(ngram_array(c, 3), len(c.vocab))
    v = c.vocab
    test = [["a", "b", "c"], ["c", "b", "a", "zzz"]]
    events = np.concatenate([ngram_array(make_corpus_ids(v, s), 3) for s in test])
    h = hits.hit_lengths(events)
    assert list(h[:4]) == [3, 3, 3, 3]          # the whole first sentence was seen
    assert list(h[4:]) == [1, 1, 1, 1, 1]
    # perturb the context of the planted trigram: at most the bigram survives
    pert = np.array([[v.index["d"], v.index["b"], v.index["c"]]])
    assert hits.hit_lengths(pert)[0] == 2


def make_corpus_ids(vocab, words):
    from compoundlm.corpus import Corpus
    return Corpus.from_tokens([words], vocab)


def test_hit_length_brute_force(rng):
    words = list("abcdef")
    train = [list(rng.choice(words, rng.integers(1, 8))) for _ in range(40)]
    test = [list(rng.choice(words + ["q"], rng.integers(1, 8))) for _ in range(40)]
    n = 4
    c = make_corpus("\n".join(" ".join(s) for s in train))
    v = c.vocab
    hits = HitLengthIndex.from_events(ngram_array(c, n), len(v))
    seen = set()
    for ctx, w in padded_events(train, n):
        g = ctx + (w,)
        for k in range(1, n + 1):
            seen.add(g[n - k:])
    mapped = [[t if t in v.index else "<unk>" for t in s] for s in test]
    expect = []
    for ctx, w in padded_events(mapped, n):
        g = ctx + (w,)
        expect.append(max([k for k in range(1, n + 1) if g[n - k:] in seen], default=1))
    r = perplexity(Stub(v, n, [0.1]), test, hits=hits)
    assert list(r.h) == expect


def trained(text="a b c a b\nb c a\nc c a b\na a a d\nd b", n=3):
    c = make_corpus(text)
    return c, HPYLM.train(c, n, 5, np.random.default_rng(0))


def test_sentence_order_invariance():
    c, m = trained()
    test = [["a", "b"], ["d", "c", "c"], ["b"], ["a", "x", "a"]]
    r1 = perplexity(m, test)
    r2 = perplexity(m, test[::-1])
    assert r1.cross_entropy == r2.cross_entropy


def test_breakdown_partitions_report(rng):
    c, m = trained()
    seg = SegmentationDictionary({"d": parse_segments("d")})
    test = [list(rng.choice(list("abcdz"), 6)) for _ in range(20)]
    hits = HitLengthIndex.from_events(ngram_array(c, 3), len(c.vocab))
    r = perplexity(m, test, hits=hits, seg=seg)
    rows = breakdown(r)
    assert len(rows) == 3 * 2 + 1
    body = rows[:-1]
    assert sum(x[2] for x in body) == len(r)
    tot = math.fsum(x[2] * x[3] for x in body if x[2])
    assert tot / len(r) == pytest.approx(r.cross_entropy, rel=1e-12)
    assert rows[-1][:2] == ("oov", "-") and rows[-1][2] == int(r.is_oov.sum())
    for h, cflag, k, x, p in body:
        if k == 0:
            assert math.isnan(x)


def test_compare_against_self_is_zero():
    c, m = trained()
    r = perplexity(m, [["a", "b"], ["c"]])
    for row in compare_breakdown(r, r):
        assert row[-1] == 0.0
    other = perplexity(m, [["a", "b"]])
    with pytest.raises(AlignmentError):
        compare_breakdown(r, other)


def test_margin_ranking_brute_force(rng):
    c, m = trained()
    _, m2 = trained(n=2)
    seg = SegmentationDictionary({"a": parse_segments("a"), "b": parse_segments("b")})
    test = [list(rng.choice(list("abcd"), 5)) for _ in range(10)]
    seg.is_compound = lambda w: w in ("a", "b")   # treat a and b as compounds
    ra = perplexity(m, test, seg=seg)
    rb = perplexity(m2, test, seg=seg)
    rows = margin_ranking(ra, rb)
    recs = [(2 ** ra.log2p[i] - 2 ** rb.log2p[i], i) for i in range(len(ra))
            if ra.tokens[i] in ("a", "b")]
    recs.sort(key=lambda t: (-t[0], t[1]))
    assert [(r[1], r[2]) for r in rows] == [(int(ra.sent[i]), int(ra.pos[i])) for _, i in recs]
    assert [r[0] for r in rows] == list(range(1, len(rows) + 1))
    first = rows[0]
    assert first[7] == pytest.approx(first[5] - first[6])
    assert len(first[3].split()) == 2
    assert len(margin_ranking(ra, rb, compounds_only=False)) == len(ra)
    assert len(rows) == int(ra.is_compound.sum())


def test_report_round_trip(tmp_path):
    c, m = trained()
    r = perplexity(m, [["a", "b"], ["c", "zz"]], name="toy")
    r.write(tmp_path / "r.tsv")
    back = EvalReport.read(tmp_path / "r.tsv")
    assert back.aligned_with(r)
    assert np.array_equal(back.log2p, r.log2p)
    assert np.array_equal(back.is_oov, r.is_oov)
    assert back.meta["model"] == "toy" and back.meta["event_space"] == "words"
    assert back.cross_entropy == r.cross_entropy
    text = (tmp_path / "r.tsv").read_text()
    assert "np.float64" not in text and f"# ppl={r.perplexity!r}" in text
    assert r.summary().startswith("model=toy tokens=6 oov=1")


def test_write_table_float_format(tmp_path):
    write_table(tmp_path / "t.tsv", ("a", "b"), [(1, np.float64(0.1)), ("x", math.nan)])
    assert (tmp_path / "t.tsv").read_text() == "a\tb\n1\t0.1\nx\tnan\n"


def test_no_compounds_means_empty_compound_cells():
    c, m = trained()
    r = perplexity(m, [["a", "b"], ["c", "d"]], seg=SegmentationDictionary())
    for h, cflag, k, x, p in breakdown(r):
        if cflag == 1:
            assert k == 0
