"""Single Pitman-Yor Chinese restaurant with histogram bookkeeping.

Tables are not stored individually.  For every dish the restaurant keeps a
histogram ``occupancy -> number of tables``; exchangeability makes table
identity irrelevant.  Seating a customer of dish w joins a table of
occupancy t with weight (t - a) * hist[w][t] or opens a new table with
weight (a*m + b) * p_base.  Unseating picks a table with weight
t * hist[w][t].

The heavy lifting during training is done by the compiled engine in
``_engine``; this class is the readable reference implementation it is tested
against (both consume the same uniforms and visit histogram bins in the same
insertion order, so results are identical draw for draw).
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


@dataclass
class PypParams:
    a: float = 0.5
    b: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.a < 1.0):
            raise ValueError(f"discount must lie in [0, 1), got {self.a}")
        if not (self.b > -self.a):
            raise ValueError(f"strength must exceed -discount, got {self.b}")


def _draw(rng, u):
    if u is not None:
        return u
    return rng.random()


class Restaurant:

    def __init__(self, params=None):
        self.params = params if params is not None else PypParams()
        self.hist = {}     # dish -> {occupancy: n tables}
        self.N = {}        # dish -> customers
        self.M = {}        # dish -> tables
        self.n = 0
        self.m = 0

    def __len__(self):
        return self.n

    def copy(self):
        r = Restaurant(self.params)
        r.hist = {w: dict(h) for w, h in self.hist.items()}
        r.N, r.M = dict(self.N), dict(self.M)
        r.n, r.m = self.n, self.m
        return r

    def _move(self, h, t, delta):
        """Shift one table of occupancy t to t+delta (t+delta == 0 removes it)."""
        c = h[t] - 1
        if c:
            h[t] = c
        else:
            del h[t]
        if t + delta > 0:
            h[t + delta] = h.get(t + delta, 0) + 1

    def seat(self, dish, p_base, rng=None, u=None):
        """Add a customer; returns True when a new table was opened."""
        if not (0.0 <= p_base <= 1.0):
            raise ValueError(f"p_base must be a probability, got {p_base}")
        a, b = self.params.a, self.params.b
        Nw = self.N.get(dish, 0)
        if Nw == 0:
            self.hist[dish] = {1: 1}
            self.N[dish] = 1
            self.M[dish] = 1
            self.n += 1
            self.m += 1
            return True
        h = self.hist[dish]
        join = Nw - a * self.M[dish]
        new = (a * self.m + b) * p_base
        r = _draw(rng, u) * (join + new)
        self.N[dish] = Nw + 1
        self.n += 1
        if r < join:
            last = None
            for t, c in h.items():
                last = t
                r -= (t - a) * c
                if r < 0:
                    break
            self._move(h, last, 1)
            return False
        h[1] = h.get(1, 0) + 1
        self.M[dish] += 1
        self.m += 1
        return True

    def unseat(self, dish, rng=None, u=None):
        """Remove a customer; returns True when its table became empty."""
        Nw = self.N.get(dish, 0)
        if Nw == 0:
            raise KeyError(f"no customer of dish {dish!r} to remove")
        h = self.hist[dish]
        r = _draw(rng, u) * Nw
        last = None
        for t, c in h.items():
            last = t
            r -= t * c
            if r < 0:
                break
        self._move(h, last, -1)
        self.n -= 1
        if Nw == 1:
            del self.hist[dish], self.N[dish], self.M[dish]
            self.m -= 1
            return True
        self.N[dish] = Nw - 1
        if last == 1:
            self.M[dish] -= 1
            self.m -= 1
            return True
        return False

    def predictive(self, dish, p_base):
        if self.n == 0:
            return p_base
        a, b = self.params.a, self.params.b
        return (self.N.get(dish, 0) - a * self.M.get(dish, 0) + (a * self.m + b) * p_base) / (self.n + b)

    def tables(self):
        """Occupancy multiset as a sorted list."""
        out = []
        for h in self.hist.values():
            for t, c in h.items():
                out.extend([t] * c)
        return sorted(out)

    def audit(self):
        n = m = 0
        for w, h in self.hist.items():
            assert h, f"empty histogram kept for {w!r}"
            assert all(t > 0 and c > 0 for t, c in h.items())
            Nw = sum(t * c for t, c in h.items())
            mw = sum(h.values())
            assert Nw == self.N[w] and mw == self.M[w], w
            assert mw <= Nw
            n += Nw
            m += mw
        assert set(self.N) == set(self.hist) == set(self.M)
        assert n == self.n and m == self.m and self.m <= self.n


def log_joint_seating(tables, a, b):
    """Log probability of a table-occupancy multiset (one seating arrangement).

    log[ G(1+b)/G(n+b) * prod_{k=1}^{m-1} (a k + b) * prod_k G(n_k - a)/G(1 - a) ]
    """
    t = np.asarray(tables, dtype=float)
    if t.size == 0:
        return 0.0
    n, m = t.sum(), t.size
    out = gammaln(1 + b) - gammaln(n + b)
    if m > 1:
        out += np.log(a * np.arange(1, m) + b).sum()
    out += (gammaln(t - a) - gammaln(1 - a)).sum()
    return float(out)


def sequential_log_seating(order, a, b):
    """Log probability of seating customers one at a time.

    ``order`` lists, per customer, the index of the table it sits at; a new
    index (equal to the current number of tables) opens a table.
    """
    counts = []
    n = 0
    lp = 0.0
    for k in order:
        if n > 0:
            if k == len(counts):
                lp += math.log((a * len(counts) + b) / (n + b))
            else:
                lp += math.log((counts[k] - a) / (n + b))
        if k == len(counts):
            counts.append(1)
        else:
            counts[k] += 1
        n += 1
    return lp
