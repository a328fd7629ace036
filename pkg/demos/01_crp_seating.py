# %% [markdown]
# Seating customers in a Pitman-Yor restaurant.
#
# A restaurant keeps, per dish, a histogram occupancy -> number of tables.
# That is all the sampler needs: tables of equal size are exchangeable.

# %%
import math
import numpy as np
from compoundlm.crp import PypParams, Restaurant, log_joint_seating, sequential_log_seating

rng = np.random.default_rng(0)

# %%
# one dish, lots of customers: the number of tables grows like n^a
for a in (0.0, 0.5, 0.9):
    r = Restaurant(PypParams(a, 1.0))
    ms = []
    for i in range(1, 20001):
        r.seat("w", 1.0, rng)
        if i in (100, 1000, 10000, 20000):
            ms.append(r.m)
    print(f"a={a:.1f}  tables after 1e2/1e3/1e4/2e4 customers:", ms)

# %%
# the histogram itself, for a = 0.5 (occupancy -> count), largest tables first
print(sorted(r.hist["w"].items(), key=lambda kv: -kv[0])[:8])

# %%
# the probability of a seating does not depend on the arrival order:
# closed form over table sizes vs the sequential product
a, b = 0.4, 1.3
order = [0, 0, 1, 0, 2, 1, 0, 3]
sizes = np.bincount(order)
print("closed form ", log_joint_seating(sizes, a, b))
print("sequential  ", sequential_log_seating(order, a, b))

# %%
# predictive probability of a dish given the seating and a base probability
r = Restaurant(PypParams(0.5, 1.0))
for d in "aaabbc":
    r.seat(d, 1 / 3, rng)
for d in "abcz":
    print(d, round(r.predictive(d, 1 / 3), 4))
print("sum over a, b, c:", math.fsum(r.predictive(d, 1 / 3) for d in "abc"))
