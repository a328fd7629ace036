# %% [markdown]
# Compound-aware n-gram model on a toy corpus.
#
# A compound like "schulhof" is generated head first ("hof", conditioned on
# the word context), then its modifiers right to left ("schul" given "hof"),
# then an end symbol.  The word-level restaurants use that product as base.

# %%
import numpy as np
from compoundlm.corpus import Corpus, build_vocabulary, ngram_array
from compoundlm.hpylm import HPYLM
from compoundlm.hpylmc import HPYLMC
from compoundlm.mkn import MKN
from compoundlm.segmentation import SegmentationDictionary, parse_segments

text = """wir gehen über den schulhof
der friedhof liegt hinter dem bahnhof
wir warten am bahnhof
der hof ist leer
die schule ist neu
auf dem schulhof spielen kinder
der bahnhof ist alt"""
sents = [s.split() for s in text.splitlines()]
vocab = build_vocabulary(sents)
corpus = Corpus.from_tokens(sents, vocab)

seg = SegmentationDictionary({
    "schulhof": parse_segments("schul hof"),
    "friedhof": parse_segments("fried hof"),
    "bahnhof": parse_segments("bahn hof"),
})
print("generation order for schulhof:", seg.ordered("schulhof"))

# %%
rng = np.random.default_rng(1)
hpylm = HPYLM.train(corpus, order=3, burn_in=50, rng=rng)
hpylmc = HPYLMC.train(corpus, seg, order=3, burn_in=50, rng=rng)
mkn = MKN.estimate(corpus, order=3)

# %%
# after "über den" only "schulhof" was seen; the other words share its head
# "hof", and the compound model passes some of that evidence on to them
ctx = (vocab.index["über"], vocab.index["den"])
for w in ("schulhof", "bahnhof", "friedhof", "hof"):
    wid = vocab.index[w]
    print(f"{w:10s} HPYLM {hpylm.prob(ctx, wid):.4f}  HPYLM+c {hpylmc.prob(ctx, wid):.4f}"
          f"  MKN {mkn.prob(ctx, wid):.4f}")

# %%
# the base of the word restaurants factorises over components
cv = hpylmc.comp_vocab
hof, schul = cv.index["hof"], cv.index["schul"]
g = hpylmc.g_prob([ctx], [hof])[0]
f1 = hpylmc.f_prob([hof], [schul])[0]
f2 = hpylmc.f_prob([schul], [hpylmc.end_id])[0]
print("G(hof|ctx) F(schul|hof) F($|schul) =", g * f1 * f2, " base_prob:", hpylmc.base_prob(ctx, vocab.index["schulhof"]))

# %%
# some mass goes to component strings that are not words; renormalising
# over the vocabulary gives a proper distribution again
print("sum over vocabulary, unnormalised:", hpylmc.prob_vector(ctx).sum())
words = np.array([i for i in range(len(vocab)) if i != vocab.bos_id])
print("renormalised:", hpylmc.renormalized_prob_many(np.tile(ctx, (len(words), 1)), words).sum())
print("hyperparameters:", {k: {kk: round(vv, 3) for kk, vv in v.items()} for k, v in hpylmc.hyperparameters().items()})
