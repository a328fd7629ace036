# %% [markdown]
# Sampler burn-in on ~100k tokens of German parliamentary speech.
#
# Needs data/de (see scripts/prepare_german_data.py).  The joint
# log-likelihood of the seating arrangement climbs quickly and flattens;
# 300 sweeps take a few minutes per seed on one core.
#
#     python demos/03_german_burn_in.py [sweeps] [seeds]

# %%
import sys
import time
from pathlib import Path

import numpy as np
from compoundlm.corpus import Corpus, build_vocabulary, ngram_array, read_sentences
from compoundlm.hpylm import HPYLM

DATA = Path(__file__).resolve().parents[1] / "data" / "de"
sweeps = int(sys.argv[1]) if len(sys.argv) > 1 else 50
seeds = int(sys.argv[2]) if len(sys.argv) > 2 else 2

sents = read_sentences(DATA / "parl_100k.txt.gz")
vocab = build_vocabulary(sents)
events = ngram_array(Corpus.from_tokens(sents, vocab), 4)
print(f"{len(events)} events, |W| = {vocab.support_size}")

# %%
for seed in range(seeds):
    t = time.time()
    m = HPYLM(vocab, 4, events)
    m.fit(sweeps, np.random.default_rng(seed))
    tr = np.array(m.ll_trace)
    marks = [0, 1, 5, 10, 25, 50, 100, 200, 300]
    print(f"seed {seed} ({time.time() - t:.0f}s):",
          "  ".join(f"{k}:{tr[k]:.0f}" for k in marks if k < len(tr)))
    print("   final a/b per depth:",
          [(round(g["a"], 2), round(g["b"], 2)) for g in m.hyperparameters().values()])
