# %% [markdown]
# Which component order helps?  ling (head generated first) vs inv.
#
# Trains HPYLM+c twice on ~100k German tokens, scores the held-out set,
# then splits the cross-entropy by hit length and compound status and lists
# the compounds where ling beats inv by the widest margin.
#
#     python demos/04_direction_and_breakdown.py [sweeps]

# %%
import sys
from pathlib import Path

import numpy as np
from compoundlm.corpus import Corpus, build_vocabulary, ngram_array, read_sentences
from compoundlm.evaluation import (HitLengthIndex, compare_breakdown, margin_ranking,
                                   perplexity)
from compoundlm.hpylmc import HPYLMC
from compoundlm.mkn import MKN
from compoundlm.segmentation import load_dictionary

DATA = Path(__file__).resolve().parents[1] / "data" / "de"
sweeps = int(sys.argv[1]) if len(sys.argv) > 1 else 20

sents = read_sentences(DATA / "parl_100k.txt.gz")
vocab = build_vocabulary(sents)
corpus = Corpus.from_tokens(sents, vocab)
events = ngram_array(corpus, 4)
hits = HitLengthIndex.from_events(events, len(vocab))
test = read_sentences(DATA / "test.txt.gz")

# %%
reports = {}
for d in ("ling", "inv"):
    seg = load_dictionary(DATA / "seg.tsv.gz", direction=d)
    m = HPYLMC(vocab, seg, 4, events)
    m.fit(sweeps, np.random.default_rng(0), trace=False)
    reports[d] = perplexity(m, test, hits=hits, name=d)
    print(reports[d].summary())
reports["mkn"] = perplexity(MKN.from_events(vocab, events, 4), test, hits=hits,
                            seg=load_dictionary(DATA / "seg.tsv.gz"), name="mkn")
print(reports["mkn"].summary())

# %%
# relative cross-entropy change of ling against inv per (h, compound) cell
print("h  compound  tokens   xent_ling  xent_inv   rel")
for h, c, n, xa, xb, rel in compare_breakdown(reports["ling"], reports["inv"]):
    print(f"{h!s:4s}{c!s:>6s}  {n:7d}   {xa:8.3f}  {xb:8.3f}  {rel:+.4f}")

# %%
print("\ncompounds where ling gains most over inv")
for row in margin_ranking(reports["ling"], reports["inv"])[:10]:
    rank, s, p, ctx, tok, pa, pb, delta = row
    print(f"{rank:3d}  {ctx:35s} {tok:25s} {pa:.4f} {pb:.4f} {delta:+.4f}")
