import math

import numpy as np
import pytest

from compoundlm.corpus import ngram_array
from compoundlm.mkn import FALLBACK, MKN, arpa_prob, chen_goodman, read_arpa

from conftest import make_corpus
from oracles import FractionMKN, padded_events

SMALL = "a b\na c"
TRIGRAM = """the cat sat on the mat
the dog sat on the log
a cat and a dog sat
the cat saw the dog
on the mat the cat sat
dog"""


def test_hand_bigram_value():
    c = make_corpus(SMALL)
    m = MKN.estimate(c, 2, discounts=[[0.5] * 3] * 2)
    v = c.vocab
    # unigram continuation counts: a 1, b 1, c 1, </s> 2 -> T = 5, gamma = 0.4
    assert m.prob((v.index["a"],), v.index["b"]) == pytest.approx(0.34, abs=1e-15)
    # unseen context falls through to the unigram level
    # P_1(b) = 0.5 / 5 + 0.4 / 5
    assert m.prob((v.unk_id,), v.index["b"]) == pytest.approx(0.18, abs=1e-15)


def test_chen_goodman_fallbacks():
    assert chen_goodman([0, 0, 0, 0, 0]) == FALLBACK
    D = chen_goodman([0, 4, 0, 0, 0])   # only n1: D1 = 1, others fall back
    assert D == (1.0, 1.0, 1.5)
    D = chen_goodman([0, 10, 5, 3, 2])
    Y = 10 / 20
    assert D == pytest.approx((1 - 2 * Y * 5 / 10, 2 - 3 * Y * 3 / 5, 3 - 4 * Y * 2 / 3))


@pytest.mark.parametrize("text,n", [(SMALL, 2), (TRIGRAM, 3), (TRIGRAM, 2), (TRIGRAM, 4)])
def test_matches_fraction_oracle(text, n):
    c = make_corpus(text)
    v = c.vocab
    m = MKN.estimate(c, n)
    sents = [line.split() for line in text.splitlines()]
    ref = FractionMKN(sents, n, v.support_size)
    for d in range(n):
        assert m.discounts[d] == pytest.approx([float(x) for x in ref.D[d + 1]], abs=1e-15)
    words = [s for s in v.symbols if s != "<s>"]
    ctxs = {ctx for ctx, _ in padded_events(sents, n)}
    ctxs |= {("cat", "the", "zzz")[:n - 1], ("<unk>",) * (n - 1)}
    for ctx in sorted(ctxs):
        ids = [v.index.get(t, v.unk_id) for t in ctx]
        for w in words:
            assert m.prob(ids, v.index[w]) == pytest.approx(
                float(ref.prob(ctx, w)), rel=1e-12), (ctx, w)


def test_normalised_over_vocabulary():
    c = make_corpus(TRIGRAM)
    m = MKN.estimate(c, 3)
    V = len(c.vocab)
    for ctx in [(1, 1), (c.vocab.index["the"], c.vocab.index["cat"]), (0, 0), (4, 4)]:
        p = m.prob_vector(ctx)
        assert math.fsum(p) == pytest.approx(1.0, abs=1e-12)
        q = m.prob_many(np.tile(ctx, (V, 1)), np.arange(V))
        q[c.vocab.bos_id] = 0
        assert np.allclose(p, q, rtol=1e-13, atol=0)


def test_continuation_count_of_fixed_phrase():
    text = "\n".join(["in los angeles"] * 20 + ["the weather", "the weather"])
    c = make_corpus(text)
    m = MKN.estimate(c, 2)
    v = c.vocab
    ang = m.index.entries([0], [v.index["angeles"]])[0]
    wea = m.index.entries([0], [v.index["weather"]])[0]
    assert m.adj[ang] == 1 and m.adj[wea] == 1
    assert m.prob((v.index["los"],), v.index["angeles"]) > 0.9


def test_zero_discount_top_order_is_maximum_likelihood():
    c = make_corpus(TRIGRAM)
    D = np.array([[0.5, 1.0, 1.5], [0.5, 1.0, 1.5], [0.0, 0.0, 0.0]])
    m = MKN.estimate(c, 3, discounts=D)
    events = ngram_array(c, 3)
    ctx = tuple(events[0, :-1])
    sel = events[(events[:, :-1] == ctx).all(1)]
    for w in set(sel[:, -1]):
        assert m.prob(ctx, w) == pytest.approx(np.mean(sel[:, -1] == w), abs=1e-15)


def test_arpa_round_trip(tmp_path):
    c = make_corpus(TRIGRAM)
    m = MKN.estimate(c, 3)
    path = tmp_path / "lm.arpa"
    m.write_arpa(path)
    table, order = read_arpa(path)
    assert order == 3
    v = c.vocab
    sents = [line.split() for line in TRIGRAM.splitlines()]
    for ctx, w in padded_events(sents, 3) + [(("on", "zzz"), "cat"), (("dog", "sat"), "mat")]:
        ids = [v.index.get(t, v.unk_id) for t in ctx]
        ctx = tuple(t if t in v.index else "<unk>" for t in ctx)
        assert arpa_prob(table, ctx, w) == pytest.approx(m.prob(ids, v.index[w]), rel=1e-5)


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        MKN.from_events(make_corpus("a").vocab, np.zeros((0, 2), np.int64), 2)


def test_full_corpus_perplexity_is_sane(data_dir):
    from compoundlm.corpus import Corpus, build_vocabulary, read_sentences
    from compoundlm.evaluation import perplexity
    sents = read_sentences(data_dir / "train_1m.txt.gz")
    v = build_vocabulary(sents)
    m = MKN.estimate(Corpus.from_tokens(sents, v), 4)
    ppl = perplexity(m, read_sentences(data_dir / "test.txt.gz")).perplexity
    assert math.isfinite(ppl) and ppl > 1
