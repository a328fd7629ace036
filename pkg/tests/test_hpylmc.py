import math

import numpy as np
import pytest

from compoundlm.corpus import Corpus, build_vocabulary, ngram_array
from compoundlm.hpylm import HPYLM
from compoundlm.hpylmc import HPYLMC
from compoundlm.segmentation import SegmentationDictionary, parse_segments

from conftest import make_corpus

SEG = SegmentationDictionary({
    "schulhof": parse_segments("schul hof"),
    "friedhof": parse_segments("fried hof"),
    "küchentisch": parse_segments("küche +n tisch"),
})


def tiny(order=3, **kw):
    c = make_corpus("dem alten schulhof\nder friedhof ist alt\ndem alten friedhof\nein küchentisch")
    return c, HPYLMC(c.vocab, SEG, order, ngram_array(c, order), **kw)


def test_empty_model_base_is_uniform_product():
    c = make_corpus("x y")
    m = HPYLMC(c.vocab, SegmentationDictionary(), 2, ngram_array(c, 2))
    assert m.comp_support == 4
    x = c.vocab.index["x"]
    assert m.base_prob((1,), x) == pytest.approx(1 / 20)
    assert m.prob((1,), x) == pytest.approx(1 / 20)


def test_base_prob_is_product_of_factors(rng):
    c, m = tiny()
    m.fit(5, rng)
    cv = m.comp_vocab
    w = c.vocab.index["schulhof"]
    ctx = (c.vocab.index["dem"], c.vocab.index["alten"])
    hof, schul, end = cv.index["hof"], cv.index["schul"], m.end_id
    expect = m.g_prob([ctx], [hof])[0] * m.f_prob([hof], [schul])[0] * m.f_prob([schul], [end])[0]
    assert m.base_prob(ctx, w) == pytest.approx(expect, rel=1e-14)
    single = c.vocab.index["ist"]
    ist = cv.index["ist"]
    assert m.base_prob(ctx, single) == pytest.approx(
        m.g_prob([ctx], [ist])[0] * m.f_prob([ist], [end])[0], rel=1e-14)


def test_schulhof_single_insert_hand_expansion(rng):
    c = make_corpus("dem alten schulhof")
    m = HPYLMC(c.vocab, SEG, 3, ngram_array(c, 3), a=0.5, b=1.0)
    dem, alten, w = (c.vocab.index[x] for x in ("dem", "alten", "schulhof"))
    m.insert((dem, alten), w, rng)
    m.audit()
    M = m.comp_support
    assert M == 6   # dem alten schul hof </s> <unk>
    one = lambda p: (0.5 + 1.5 * p) / 2  # noqa: E731  one customer at one table
    g = one(one(one(1 / M)))
    # F root holds two customers (schul, $) at two tables
    f_root = lambda p: (0.5 + 2.0 * p) / 3  # noqa: E731
    f_schul = one(f_root(1 / (M + 1)))
    f_end = one(f_root(1 / (M + 1)))
    assert m.prob((dem, alten), w) == pytest.approx(one(g * f_schul * f_end), rel=1e-14)


def test_shared_head_customers(rng):
    c = make_corpus("dem alten schulhof\nder alte friedhof")
    m = HPYLMC(c.vocab, SEG, 3, ngram_array(c, 3))
    v = c.vocab
    m.insert((v.index["dem"], v.index["alten"]), v.index["schulhof"], rng)
    m.insert((v.index["der"], v.index["alte"]), v.index["friedhof"], rng)
    m.audit()
    hof = m.comp_vocab.index["hof"]
    root = m.g_index.entries([m.g_index.node_offset], [hof])[0]
    assert m.A.ent_N[root] == 2


def test_unnormalised_mass_below_one_and_renormalisation(rng):
    c, m = tiny()
    m.fit(5, rng)
    m.audit()
    v = c.vocab
    for ctx in [(v.index["dem"], v.index["alten"]), (1, 1), (0, 0)]:
        p = m.prob_vector(ctx)
        assert math.fsum(p) < 1.0
        z = m.normalizer(ctx)
        words = np.array([i for i in range(len(v)) if i != v.bos_id])   # <unk> included
        r = m.renormalized_prob_many(np.tile(ctx, (len(words), 1)), words)
        assert math.fsum(r) == pytest.approx(1.0, abs=1e-12)
        assert np.all(r >= m.prob_many(np.tile(ctx, (len(words), 1)), words))
        assert z < 1


def test_vector_and_pointwise_agree(rng):
    c, m = tiny()
    m.fit(3, rng)
    V = len(c.vocab)
    ctx = (c.vocab.index["dem"], c.vocab.index["alten"])
    q = m.prob_many(np.tile(ctx, (V, 1)), np.arange(V))
    q[c.vocab.bos_id] = 0
    assert np.allclose(m.prob_vector(ctx), q, rtol=1e-13, atol=0)


def test_insert_remove_k_times_restores_empty(rng):
    c, m = tiny()
    empty = m.state()
    v = c.vocab
    ctx, w = (v.index["dem"], v.index["alten"]), v.index["friedhof"]
    for _ in range(5):
        m.insert(ctx, w, rng)
        m.audit()
    for _ in range(5):
        m.remove(ctx, w, rng)
        m.audit()
    assert m.same_state(m.state(), empty)


def test_directions_differ(rng):
    c = make_corpus("dem alten schulhof\nder friedhof ist alt\ndem alten friedhof\nein küchentisch")
    ling = HPYLMC.train(c, SEG, 3, 5, np.random.default_rng(1))
    inv_seg = SegmentationDictionary(SEG.entries, direction="inv")
    inv = HPYLMC.train(c, inv_seg, 3, 5, np.random.default_rng(1))
    ctx = (c.vocab.index["dem"], c.vocab.index["alten"])
    assert not np.allclose(ling.prob_vector(ctx), inv.prob_vector(ctx))
    ling.audit()
    inv.audit()


def test_bypass_without_end_matches_hpylm():
    text = "a b c a b\nb c a\nc c a b\na a a d\nd b"
    c = make_corpus(text)
    ev = ngram_array(c, 3)
    h = HPYLM(c.vocab, 3, ev)
    h.fit(6, np.random.default_rng(3), resample=False)
    x = HPYLMC(c.vocab, SegmentationDictionary(), 3, ev, bypass=True, include_end=False)
    x.fit(6, np.random.default_rng(3), resample=False)
    x.audit()
    assert x.comp_vocab.symbols == c.vocab.symbols
    V = len(c.vocab)
    for ctx in [(3, 4), (1, 1), (4, 4), (6, 3)]:
        words = np.arange(V)
        a = h.prob_many(np.tile(ctx, (V, 1)), words)
        b = x.prob_many(np.tile(ctx, (V, 1)), words)
        assert np.array_equal(a, b)


def test_audit_each_sweep(rng):
    c, m = tiny()
    m.fit(4, rng, callback=lambda model, it: model.audit())
    hp = m.hyperparameters()
    assert set(hp) == {"G_depth0", "G_depth1", "G_depth2", "F_depth0", "F_depth1", "H"}


def test_unk_is_single_component():
    c, m = tiny()
    assert len(m.components(c.vocab.unk_id)) == 1
    assert isinstance(c, Corpus)
    assert build_vocabulary([]).support_size == 2


def test_inverse_order_factorisation(rng):
    e = {"regenschirmhersteller": parse_segments("regen schirm hersteller")}
    c = make_corpus("der regenschirmhersteller ist pleite\nder regen fällt")
    m = HPYLMC(c.vocab, SegmentationDictionary(e, direction="inv"), 2, ngram_array(c, 2))
    m.fit(3, rng)
    cv = m.comp_vocab
    regen, schirm, her = (cv.index[x] for x in ("regen", "schirm", "hersteller"))
    ctx = (c.vocab.index["der"],)
    expect = (m.g_prob([ctx], [regen])[0] * m.f_prob([regen], [schirm])[0]
              * m.f_prob([schirm], [her])[0] * m.f_prob([her], [m.end_id])[0])
    assert m.base_prob(ctx, c.vocab.index["regenschirmhersteller"]) == pytest.approx(expect, rel=1e-14)


def test_renormalised_perplexity_not_above_unnormalised(rng):
    from compoundlm.evaluation import perplexity
    c, m = tiny()
    m.fit(5, rng)
    test = [["dem", "alten", "friedhof"], ["ein", "schulhof", "ist", "alt"], ["der", "küchentisch"]]
    un = perplexity(m, test)
    re_ = perplexity(m, test, renormalize=True)
    assert un.meta["event_space"] == "extended" and re_.meta["event_space"] == "words"
    assert re_.perplexity <= un.perplexity
    assert np.all(re_.log2p >= un.log2p)
