"""Hierarchical Pitman-Yor n-gram language model.

Each context u of length 0..n-1 owns a restaurant whose base distribution is
the restaurant of u with its leftmost word dropped; the empty context backs
off to a uniform distribution over the predictable vocabulary (everything
but ``<s>``).  Discount and strength are tied per context length and
resampled by slice sampling after every Gibbs sweep (priors a ~ Beta(1, 1),
b ~ Gamma(shape 10, scale 0.1)).

Restaurants are created for every context/word pair reachable from the
training events; training reseats every event once per sweep in a freshly
shuffled order.  Prediction uses the single final sample.
"""
import logging
import math

import numpy as np

from . import _engine as eng
from .corpus import Vocabulary, ngram_array
from .slicesample import log_beta11, log_gamma_shape_scale, slice_sample

log = logging.getLogger(__name__)

A_WIDTH, B_WIDTH, MAX_STEPS = 0.1, 1.0, 100
GROW_MARGIN = 4096


def build_tree(ctx, tgt, B, T, node_offset=0, ent_offset=0):
    """Back-off trie over the rows of ``ctx`` (E, k) predicting ``tgt`` (E,).

    Nodes are keyed by parent_node * B + word, entries by node * T + dish,
    both with global ids (offsets added).  Returns a dict of arrays; ``leaf``
    holds the deepest entry of every row and ``ent_parent`` the back-off
    entry of every entry (-1 at the root).
    """
    ctx = np.asarray(ctx, np.int64)
    tgt = np.asarray(tgt, np.int64)
    E, k = ctx.shape
    node_of = np.full(E, node_offset, np.int64)
    node_key = [np.array([-1], np.int64)]
    node_depth = [np.zeros(1, np.int64)]
    nn = node_offset + 1
    ne = ent_offset
    ent_node, ent_dish, ent_parent = [], [], []
    prev = None
    for d in range(k + 1):
        if d > 0:
            key = node_of * B + ctx[:, k - d]
            uk, inv = np.unique(key, return_inverse=True)
            node_of = inv.reshape(-1) + nn
            node_key.append(uk)
            node_depth.append(np.full(len(uk), d, np.int64))
            nn += len(uk)
        ekey = node_of * T + tgt
        uek, einv = np.unique(ekey, return_inverse=True)
        einv = einv.reshape(-1)
        par = np.full(len(uek), -1, np.int64)
        if prev is not None:
            par[einv] = prev
        ent_node.append(uek // T)
        ent_dish.append(uek % T)
        ent_parent.append(par)
        prev = einv + ne
        ne += len(uek)
    return {
        "node_key": np.concatenate(node_key), "node_depth": np.concatenate(node_depth),
        "ent_node": np.concatenate(ent_node), "ent_dish": np.concatenate(ent_dish),
        "ent_parent": np.concatenate(ent_parent),
        "leaf": prev if prev is not None else np.zeros(0, np.int64),
        "depth": k, "B": B, "T": T, "node_offset": node_offset, "ent_offset": ent_offset,
    }


def context_rows(ctx, k, n=None):
    """``ctx`` as a (rows, k) int64 array.  For k = 0 the row count is ``n``."""
    ctx = np.asarray(ctx, np.int64)
    if k == 0:
        rows = n if n is not None else (len(ctx) if ctx.ndim == 2 else 1)
        return np.zeros((rows, 0), np.int64)
    return ctx.reshape(-1, k)


class ContextIndex:
    """Vectorised lookup of trie nodes/entries built by :func:`build_tree`."""

    def __init__(self, node_key, ent_node, ent_dish, depth, B, T, node_offset, ent_offset):
        self.depth, self.B, self.T = int(depth), int(B), int(T)
        self.node_offset, self.ent_offset = int(node_offset), int(ent_offset)
        self.node_key = np.asarray(node_key, np.int64)
        self.ent_node = np.asarray(ent_node, np.int64)
        self.ent_dish = np.asarray(ent_dish, np.int64)
        order = np.argsort(self.node_key, kind="stable")
        self._nk = self.node_key[order]
        self._nid = order + self.node_offset
        ek = self.ent_node * self.T + self.ent_dish
        order = np.argsort(ek, kind="stable")
        self._ek = ek[order]
        self._eid = order + self.ent_offset

    @classmethod
    def from_tree(cls, tree):
        return cls(tree["node_key"], tree["ent_node"], tree["ent_dish"], tree["depth"],
                   tree["B"], tree["T"], tree["node_offset"], tree["ent_offset"])

    def to_arrays(self, prefix):
        return {prefix + "node_key": self.node_key, prefix + "ent_node": self.ent_node,
                prefix + "ent_dish": self.ent_dish,
                prefix + "shape": np.array([self.depth, self.B, self.T, self.node_offset,
                                            self.ent_offset], np.int64)}

    @classmethod
    def from_arrays(cls, arrs, prefix):
        d, B, T, no, eo = (int(x) for x in arrs[prefix + "shape"])
        return cls(arrs[prefix + "node_key"], arrs[prefix + "ent_node"],
                   arrs[prefix + "ent_dish"], d, B, T, no, eo)

    @staticmethod
    def _find(sorted_keys, ids, key, valid):
        if len(sorted_keys) == 0:
            return np.full(len(key), -1, np.int64)
        idx = np.searchsorted(sorted_keys, key)
        idx = np.minimum(idx, len(sorted_keys) - 1)
        hit = valid & (sorted_keys[idx] == key)
        return np.where(hit, ids[idx], -1)

    def nodes(self, ctx):
        """(T, depth+1) node ids for each context suffix length; -1 if absent."""
        ctx = context_rows(ctx, self.depth)
        out = np.full((len(ctx), self.depth + 1), -1, np.int64)
        if len(self.node_key) == 0:
            return out
        cur = np.full(len(ctx), self.node_offset, np.int64)
        out[:, 0] = cur
        for d in range(1, self.depth + 1):
            key = cur * self.B + ctx[:, self.depth - d]
            cur = self._find(self._nk, self._nid, key, cur >= 0)
            out[:, d] = cur
        return out

    def entries(self, nodes, dish):
        nodes = np.asarray(nodes, np.int64)
        key = nodes * self.T + np.asarray(dish, np.int64)
        return self._find(self._ek, self._eid, key, nodes >= 0)

    def node_entries(self, node):
        """Entry id range of one node (entries are sorted by node)."""
        lo = np.searchsorted(self.ent_node, node, "left")
        hi = np.searchsorted(self.ent_node, node, "right")
        return lo + self.ent_offset, hi + self.ent_offset


def chain_predict(A, nodes, ents, p):
    """Vectorised back-off recursion from the root (column 0) downwards."""
    p = np.array(p, np.float64, copy=True)
    for d in range(nodes.shape[1]):
        nd = nodes[:, d]
        ok = nd >= 0
        ndc = np.where(ok, nd, 0)
        n = A.node_n[ndc]
        ok &= n > 0
        e = ents[:, d]
        has = e >= 0
        ec = np.where(has, e, 0)
        N = np.where(has, A.ent_N[ec], 0)
        M = np.where(has, A.ent_m[ec], 0)
        g = A.node_g[ndc]
        a, b = A.grp_a[g], A.grp_b[g]
        with np.errstate(invalid="ignore", divide="ignore"):
            q = (N - a * M + (a * A.node_m[ndc] + b) * p) / (n + b)
        p = np.where(ok, q, p)
    return p


def node_vector(A, index, node, p):
    """Apply one restaurant's predictive to a dense base vector ``p``."""
    if node < 0 or A.node_n[node] == 0:
        return p
    lo, hi = index.node_entries(node)
    dish = index.ent_dish[lo - index.ent_offset:hi - index.ent_offset]
    g = A.node_g[node]
    a, b = A.grp_a[g], A.grp_b[g]
    out = (a * A.node_m[node] + b) * p
    out[dish] += A.ent_N[lo:hi] - a * A.ent_m[lo:hi]
    return out / (A.node_n[node] + b)


class ArenaModel:
    """Training/bookkeeping machinery shared by HPYLM and HPYLM+c.

    Subclasses provide ``self.A`` (the arena), ``self.group_names`` and
    ``self.data`` (the data entry of every training event).
    """

    def _init_bookkeeping(self):
        self.data_count = np.zeros(len(self.A.ent_N), np.int64)
        self.ll_trace = []

    # ---- low level -------------------------------------------------------
    def _run(self, data, mode, rng=None, random_init=False, us=None, order=None):
        data = np.asarray(data, np.int32)
        if order is None:
            order = np.arange(len(data), dtype=np.int64)
        if us is None:
            us = np.zeros(0)
            eng.seed_numba(int(rng.integers(2**31 - 1)))
        pos = np.zeros(1, np.int64)
        start = 0
        while True:
            status, start = eng.run_events(self.A, data, order, start, mode, random_init,
                                           us, pos, GROW_MARGIN)
            if status == eng.STATUS_DONE:
                break
            self.A = eng.grow_bins(self.A, max(len(self.A.bins), 1 << 16))
        return int(pos[0])

    def _ensure_bins(self, k):
        if self.A.meta[1] < k:
            self.A = eng.grow_bins(self.A, max(len(self.A.bins), k))

    def insert_entry(self, e, rng=None, us=None, random_init=False, receipt=False):
        """Add one data customer at entry e.  With ``receipt`` return an undo token."""
        self._ensure_bins(GROW_MARGIN)
        if us is None:
            eng.seed_numba(int(rng.integers(2**31 - 1)))
            us = np.zeros(0)
        rec = np.zeros((4 * eng.MAX_DEPTH, 2), np.int64) if receipt else np.zeros((0, 2), np.int64)
        nrec = np.zeros(1, np.int64)
        eng.insert(self.A, int(e), us, np.zeros(1, np.int64), random_init, rec, nrec)
        self.data_count[e] += 1
        if receipt:
            if nrec[0] > len(rec):
                raise RuntimeError("receipt buffer too small")
            return int(e), rec[:nrec[0]].copy()

    def remove_entry(self, e, rng=None, us=None):
        if self.data_count[e] <= 0:
            raise KeyError(f"entry {e} holds no data customer")
        if us is None:
            eng.seed_numba(int(rng.integers(2**31 - 1)))
            us = np.zeros(0)
        eng.remove(self.A, int(e), us, np.zeros(1, np.int64))
        self.data_count[e] -= 1

    def undo(self, receipt):
        """Exactly invert the insert that produced ``receipt``."""
        e, rec = receipt
        eng.undo(self.A, rec, len(rec))
        self.data_count[e] -= 1

    # ---- training --------------------------------------------------------
    def initialize(self, rng, random_init=True):
        """Seat every training event once, in random order."""
        order = rng.permutation(len(self.data)).astype(np.int64)
        self._run(self.data, 0, rng, random_init=random_init, order=order)
        np.add.at(self.data_count, self.data, 1)
        self.compact()

    def sweep(self, rng):
        order = rng.permutation(len(self.data)).astype(np.int64)
        self._run(self.data, 2, rng, order=order)
        self.compact()

    def compact(self):
        """Re-lay the histogram cells contiguously (no change to the state)."""
        out = np.empty_like(self.A.bins)
        eng.compact(self.A, out)
        self.A = self.A._replace(bins=out)

    def fit(self, burn_in, rng, init="random", resample=True, trace=True, callback=None):
        """Initialise and run ``burn_in`` Gibbs sweeps (+ hyperparameter moves)."""
        if burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if init not in ("random", "sequential"):
            raise ValueError(f"unknown init {init!r}")
        self.initialize(rng, random_init=(init == "random"))
        if trace:
            self.ll_trace.append(self.log_likelihood())
        for it in range(burn_in):
            self.sweep(rng)
            if resample:
                self.resample_hyperparameters(rng)
            if trace:
                self.ll_trace.append(self.log_likelihood())
            if callback is not None:
                callback(self, it)
            log.debug("sweep %d ll=%s", it + 1, self.ll_trace[-1] if trace else "-")
        return self

    # ---- likelihood ------------------------------------------------------
    def group_stats(self):
        """Per group: (Cm, Cn, Ct) counts-of-counts in cumulative form.

        Cm[k] = #restaurants with m-1 >= k, Cn[j] = #restaurants with
        n-1 >= j, Ct[j] = #tables with occupancy-1 >= j (index 0 unused).
        """
        A = self.A
        ent, t, c = eng.live_bins(A)
        grp_of_bin = A.node_g[A.ent_node[ent]]
        live = A.node_n > 0
        out = []
        for g in range(len(A.grp_a)):
            sel = live & (A.node_g == g)

            def cum(x, w=None):
                if len(x) == 0:
                    return np.zeros(1)
                h = np.bincount(x - 1, weights=w)
                return np.cumsum(h[::-1])[::-1]

            Cm = cum(A.node_m[sel])
            Cn = cum(A.node_n[sel])
            bs = grp_of_bin == g
            Ct = cum(t[bs], c[bs].astype(float))
            out.append((Cm, Cn, Ct))
        return out

    @staticmethod
    def _group_ll_fn(stats):
        Cm, Cn, Ct = stats
        km = np.nonzero(Cm[1:])[0] + 1
        jn = np.nonzero(Cn[1:])[0] + 1
        jt = np.nonzero(Ct[1:])[0] + 1
        wm, wn, wt = Cm[km].astype(float), Cn[jn].astype(float), Ct[jt].astype(float)
        km, jn, jt = km.astype(float), jn.astype(float), jt.astype(float)

        def ll(a, b):
            if not (0.0 <= a < 1.0) or b <= 0.0:
                return -math.inf
            return float(wm @ np.log(a * km + b) - wn @ np.log(jn + b) + wt @ np.log(jt - a))
        return ll

    def label_log_prob(self):
        """Root-level table labels drawn from the uniform bases."""
        A = self.A
        roots = A.ent_fl == 0
        base = A.grp_base[A.node_g[A.ent_node[roots]]]
        return float(np.sum(A.ent_m[roots] * np.log(base)))

    def log_likelihood(self):
        """Joint log probability of the current seating arrangement."""
        A = self.A
        total = self.label_log_prob()
        for g, st in enumerate(self.group_stats()):
            total += self._group_ll_fn(st)(A.grp_a[g], A.grp_b[g])
        return total

    def resample_hyperparameters(self, rng, groups=None):
        A = self.A
        stats = self.group_stats()
        for g in (range(len(A.grp_a)) if groups is None else groups):
            ll = self._group_ll_fn(stats[g])
            a, b = float(A.grp_a[g]), float(A.grp_b[g])
            a, _ = slice_sample(a, lambda x: log_beta11(x) + ll(x, b), A_WIDTH, rng, MAX_STEPS)
            b, _ = slice_sample(b, lambda x: log_gamma_shape_scale(x) + ll(a, x), B_WIDTH, rng, MAX_STEPS)
            A.grp_a[g], A.grp_b[g] = a, b

    def hyperparameters(self):
        return {name: {"a": float(self.A.grp_a[g]), "b": float(self.A.grp_b[g])}
                for g, name in enumerate(self.group_names)}

    # ---- checks ----------------------------------------------------------
    def audit(self):
        """Raise AssertionError unless every bookkeeping identity holds."""
        A = self.A
        ent, t, c = eng.live_bins(A)
        ne = len(A.ent_N)
        assert np.all(t >= 1) and np.all(c >= 1), "empty histogram cell stored"
        assert np.array_equal(np.bincount(ent, weights=t * c, minlength=ne), A.ent_N), "N_w != sum t*hist"
        assert np.array_equal(np.bincount(ent, weights=c, minlength=ne), A.ent_m), "m_w != sum hist"
        assert np.all(A.ent_m <= A.ent_N) and np.all((A.ent_m == 0) == (A.ent_N == 0))
        nn = len(A.node_n)
        assert np.array_equal(np.bincount(A.ent_node, weights=A.ent_N, minlength=nn), A.node_n)
        assert np.array_equal(np.bincount(A.ent_node, weights=A.ent_m, minlength=nn), A.node_m)
        assert np.all(A.node_m <= A.node_n)
        # tables below = customers above
        owner = np.repeat(np.arange(ne), A.ent_fl)
        fed = np.bincount(A.fac, weights=A.ent_m[owner], minlength=ne) + self.data_count
        assert np.array_equal(fed, A.ent_N), "hierarchy consistency violated"
        free = eng.count_free(A)
        assert free == A.meta[1] and free + len(ent) == len(A.bins), "bin free list corrupted"

    def state(self):
        """Hashable-ish snapshot: count arrays + histograms as sorted cells."""
        A = self.A
        ent, t, c = eng.live_bins(A)
        order = np.lexsort((t, ent))
        return {
            "node_n": A.node_n.copy(), "node_m": A.node_m.copy(),
            "ent_N": A.ent_N.copy(), "ent_m": A.ent_m.copy(),
            "cells": np.stack([ent[order], t[order], c[order]]),
            "data_count": self.data_count.copy(),
        }

    @staticmethod
    def same_state(s1, s2):
        return all(np.array_equal(s1[k], s2[k]) for k in s1)

    # ---- persistence -----------------------------------------------------
    def _arena_arrays(self):
        A = self.A
        ent, t, c = eng.live_bins(A)
        return {
            "node_n": A.node_n, "node_m": A.node_m, "node_g": A.node_g,
            "ent_node": A.ent_node, "ent_N": A.ent_N, "ent_m": A.ent_m,
            "ent_fs": A.ent_fs, "ent_fl": A.ent_fl, "fac": A.fac,
            "bin_ent": ent, "bin_t": t, "bin_c": c,
            "grp_a": A.grp_a, "grp_b": A.grp_b, "grp_base": A.grp_base,
            "data_count": self.data_count,
        }

    @staticmethod
    def _arena_from_arrays(arrs):
        A = eng.new_arena(arrs["node_g"], arrs["ent_node"], arrs["ent_fs"], arrs["ent_fl"],
                          arrs["fac"], arrs["grp_base"], n_bins=len(arrs["bin_t"]) + GROW_MARGIN)
        A.node_n[:] = arrs["node_n"]
        A.node_m[:] = arrs["node_m"]
        A.ent_N[:] = arrs["ent_N"]
        A.ent_m[:] = arrs["ent_m"]
        A.grp_a[:] = arrs["grp_a"]
        A.grp_b[:] = arrs["grp_b"]
        eng.load_bins(A, np.asarray(arrs["bin_ent"], np.int64), np.asarray(arrs["bin_t"], np.int64),
                      np.asarray(arrs["bin_c"], np.int64))
        return A


class HPYLM(ArenaModel):
    """Hierarchical Pitman-Yor n-gram model over a word vocabulary.

    ``events`` is an (E, n) id array (context columns then the target), as
    produced by :func:`corpus.ngram_array`; it fixes which restaurants
    exist.  ``support`` overrides the size of the uniform root base.
    """

    kind = "hpylm"

    def __init__(self, vocab, order=4, events=None, a=0.5, b=1.0, support=None):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.vocab = vocab
        self.order = order
        self.support = int(support if support is not None else vocab.support_size)
        if events is None:
            events = np.zeros((0, order), np.int64)
        events = np.asarray(events, np.int64).reshape(-1, order)
        V = len(vocab)
        tree = build_tree(events[:, :-1], events[:, -1], V, V)
        self.index = ContextIndex.from_tree(tree)
        par = tree["ent_parent"]
        fl = (par >= 0).astype(np.int32)
        fs = np.cumsum(fl) - fl
        node_g = tree["node_depth"]
        self.A = eng.new_arena(node_g, tree["ent_node"], fs, fl, par[par >= 0],
                               np.full(order, 1.0 / self.support), n_bins=len(par) + GROW_MARGIN,
                               a=a, b=b)
        self.group_names = [f"depth{d}" for d in range(order)]
        self.data = tree["leaf"].astype(np.int32)
        self.events = events
        self._init_bookkeeping()

    @classmethod
    def train(cls, corpus, order=4, burn_in=300, rng=None, init="random", a=0.5, b=1.0,
              resample=True, trace=True, callback=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        model = cls(corpus.vocab, order, ngram_array(corpus, order), a=a, b=b)
        model.fit(burn_in, rng, init=init, resample=resample, trace=trace, callback=callback)
        return model

    # ---- single-event API -------------------------------------------------
    def entry_of(self, context, word):
        ctx = context_rows(context, self.order - 1, 1)
        nodes = self.index.nodes(ctx)
        e = int(self.index.entries(nodes[:, -1], [word])[0])
        if e < 0:
            raise KeyError(f"({tuple(context)}, {word}) is not a training event of this model")
        return e

    def insert(self, context, word, rng=None, us=None, receipt=False):
        return self.insert_entry(self.entry_of(context, word), rng, us, receipt=receipt)

    def remove(self, context, word, rng=None, us=None):
        self.remove_entry(self.entry_of(context, word), rng, us)

    # ---- prediction --------------------------------------------------------
    def prob_many(self, ctx, words):
        words = np.asarray(words, np.int64)
        ctx = context_rows(ctx, self.order - 1, len(words))
        nodes = self.index.nodes(ctx)
        ents = self.index.entries(nodes, words[:, None])
        return chain_predict(self.A, nodes, ents, np.full(len(words), 1.0 / self.support))

    def prob(self, context, word):
        return float(self.prob_many([context], [word])[0])

    def prob_events(self, events, **kw):
        events = np.asarray(events, np.int64).reshape(-1, self.order)
        return self.prob_many(events[:, :-1], events[:, -1])

    def prob_vector(self, context):
        """P(. | context) over all vocabulary ids (``<s>`` gets 0)."""
        nodes = self.index.nodes(context_rows(context, self.order - 1, 1))[0]
        p = np.full(len(self.vocab), 1.0 / self.support)
        p[self.vocab.bos_id] = 0.0
        for nd in nodes:
            p = node_vector(self.A, self.index, int(nd), p)
        return p

    # ---- persistence -------------------------------------------------------
    def to_arrays(self):
        arrs = self._arena_arrays()
        arrs.update(self.index.to_arrays("idx_"))
        return arrs

    def header(self):
        return {"kind": self.kind, "order": self.order, "support": self.support,
                "groups": self.group_names, "vocab": self.vocab.to_dict()}

    @classmethod
    def from_parts(cls, header, arrs):
        m = cls.__new__(cls)
        m.vocab = Vocabulary.from_dict(header["vocab"])
        m.order = header["order"]
        m.support = header["support"]
        m.group_names = header["groups"]
        m.index = ContextIndex.from_arrays(arrs, "idx_")
        m.A = cls._arena_from_arrays(arrs)
        m.data = np.zeros(0, np.int32)
        m.events = np.zeros((0, m.order), np.int64)
        m._init_bookkeeping()
        m.data_count[:] = arrs["data_count"]
        return m
