"""Interpolated modified Kneser-Ney baseline.

P(w | h) = max(a(hw) - D(a(hw)), 0) / T(h) + gamma(h) * P(w | h')

with h' = h minus its leftmost word, T(h) = sum_w a(hw) and
gamma(h) = (D1 N1(h) + D2 N2(h) + D3+ N3+(h)) / T(h).  The empty context
interpolates with Uniform(|W|).  a(.) is the raw count at the highest order
and the continuation count (number of distinct left extensions) below it,
except for n-grams starting with ``<s>``, which cannot be extended to the
left and keep their raw count.

Discounts follow Chen & Goodman from the counts-of-counts n_1..n_4 of
each order:  Y = n1/(n1 + 2 n2), D1 = 1 - 2Y n2/n1, D2 = 2 - 3Y n3/n2,
D3+ = 3 - 4Y n4/n3, each clipped to [0, m]; a level whose formula has a
zero denominator falls back to 0.5 / 1.0 / 1.5.  No count pruning.
"""
import math

import numpy as np

from .corpus import Vocabulary, ngram_array
from .hpylm import ContextIndex, build_tree, context_rows

FALLBACK = (0.5, 1.0, 1.5)


def chen_goodman(nr):
    """Discounts (D1, D2, D3+) from counts-of-counts ``nr[1..4]``."""
    n1, n2, n3, n4 = (float(nr[i]) for i in (1, 2, 3, 4))
    if n1 + 2 * n2 == 0:
        return FALLBACK
    Y = n1 / (n1 + 2 * n2)
    D = list(FALLBACK)
    if n1 > 0:
        D[0] = 1 - 2 * Y * n2 / n1
    if n2 > 0:
        D[1] = 2 - 3 * Y * n3 / n2
    if n3 > 0:
        D[2] = 3 - 4 * Y * n4 / n3
    return tuple(min(max(d, 0.0), m) for d, m in zip(D, (1.0, 2.0, 3.0)))


class MKN:

    kind = "mkn"

    def __init__(self, vocab, order, index, adj, node_T, node_gamma, discounts):
        self.vocab = vocab
        self.order = order
        self.index = index
        self.adj = adj               # adjusted count per entry
        self.node_T = node_T
        self.node_gamma = node_gamma
        self.discounts = np.asarray(discounts, np.float64)   # (order, 3)
        self.support = vocab.support_size

    @classmethod
    def estimate(cls, corpus, order=4, discounts=None):
        """Count and discount.  ``discounts`` overrides (order, 3) D values."""
        return cls.from_events(corpus.vocab, ngram_array(corpus, order), order, discounts)

    @classmethod
    def from_events(cls, vocab, events, order, discounts=None):
        events = np.asarray(events, np.int64).reshape(-1, order)
        if len(events) == 0:
            raise ValueError("cannot estimate from an empty corpus")
        V = len(vocab)
        tree = build_tree(events[:, :-1], events[:, -1], V, V)
        index = ContextIndex.from_tree(tree)
        ent_node, par = tree["ent_node"], tree["ent_parent"]
        nnodes, nents = len(tree["node_key"]), len(ent_node)
        node_depth = tree["node_depth"]
        ent_depth = node_depth[ent_node]

        # raw counts: every event hits exactly one entry per depth
        raw = np.zeros(nents, np.int64)
        leaf = tree["leaf"]
        cur = leaf
        for d in range(order - 1, -1, -1):
            np.add.at(raw, cur, 1)
            cur = par[cur]
        # continuation counts = number of distinct children
        cont = np.bincount(par[par >= 0], minlength=nents)
        node_word = np.where(tree["node_key"] >= 0, tree["node_key"] % V, -1)
        starts_bos = node_word[ent_node] == vocab.bos_id
        adj = np.where((ent_depth == order - 1) | starts_bos, raw, cont)

        D = np.zeros((order, 3))
        for d in range(order):
            sel = adj[ent_depth == d]
            nr = np.bincount(np.minimum(sel, 5), minlength=6)
            D[d] = chen_goodman(nr)
        if discounts is not None:
            D = np.asarray(discounts, np.float64).reshape(order, 3)

        dj = D[ent_depth]
        lvl = np.minimum(adj, 3) - 1
        disc = np.where(adj > 0, dj[np.arange(nents), np.maximum(lvl, 0)], 0.0)
        node_T = np.bincount(ent_node, weights=adj, minlength=nnodes)
        node_gamma_num = np.bincount(ent_node, weights=disc, minlength=nnodes)
        with np.errstate(invalid="ignore", divide="ignore"):
            node_gamma = np.where(node_T > 0, node_gamma_num / node_T, 1.0)
        return cls(vocab, order, index, adj, node_T, node_gamma, D)

    def discount_of(self, depth, c):
        c = np.asarray(c)
        D = self.discounts[depth]
        return np.where(c <= 0, 0.0, D[np.clip(c, 1, 3) - 1])

    def prob_many(self, ctx, words):
        words = np.asarray(words, np.int64)
        ctx = context_rows(ctx, self.order - 1, len(words))
        nodes = self.index.nodes(ctx)
        ents = self.index.entries(nodes, words[:, None])
        p = np.full(len(words), 1.0 / self.support)
        for d in range(self.order):
            nd, e = nodes[:, d], ents[:, d]
            ok = nd >= 0
            ndc = np.where(ok, nd, 0)
            T = self.node_T[ndc]
            ok &= T > 0
            c = np.where(e >= 0, self.adj[np.where(e >= 0, e, 0)], 0)
            with np.errstate(invalid="ignore", divide="ignore"):
                alpha = np.maximum(c - self.discount_of(d, c), 0.0) / T
            p = np.where(ok, alpha + self.node_gamma[ndc] * p, p)
        return p

    def prob(self, context, word):
        return float(self.prob_many([context], [word])[0])

    def prob_events(self, events, **kw):
        events = np.asarray(events, np.int64).reshape(-1, self.order)
        return self.prob_many(events[:, :-1], events[:, -1])

    def prob_vector(self, context):
        nodes = self.index.nodes(context_rows(context, self.order - 1, 1))[0]
        p = np.full(len(self.vocab), 1.0 / self.support)
        p[self.vocab.bos_id] = 0.0
        for d, nd in enumerate(nodes):
            if nd < 0 or self.node_T[nd] <= 0:
                continue
            lo, hi = self.index.node_entries(nd)
            c = self.adj[lo:hi]
            alpha = np.maximum(c - self.discount_of(d, c), 0.0) / self.node_T[nd]
            p = self.node_gamma[nd] * p
            p[self.index.ent_dish[lo:hi]] += alpha
        return p

    # ---- persistence -------------------------------------------------------
    def to_arrays(self):
        arrs = self.index.to_arrays("idx_")
        arrs.update({"adj": self.adj, "node_T": self.node_T, "node_gamma": self.node_gamma,
                     "discounts": self.discounts})
        return arrs

    def header(self):
        return {"kind": self.kind, "order": self.order, "vocab": self.vocab.to_dict()}

    @classmethod
    def from_parts(cls, header, arrs):
        return cls(Vocabulary.from_dict(header["vocab"]), header["order"],
                   ContextIndex.from_arrays(arrs, "idx_"), np.asarray(arrs["adj"]),
                   np.asarray(arrs["node_T"]), np.asarray(arrs["node_gamma"]),
                   np.asarray(arrs["discounts"]))

    # ---- ARPA ----------------------------------------------------------------
    def _grams(self):
        """{k-gram tuple: [entry id or -1, node id or -1]} over entries and contexts."""
        idx = self.index
        V = idx.B
        # reconstruct every node's context words from the trie keys
        nkey = idx.node_key
        nn = len(nkey)
        parent = np.full(nn, -1, np.int64)
        word = np.full(nn, -1, np.int64)
        has = nkey >= 0
        parent[has] = nkey[has] // V
        word[has] = nkey[has] % V
        ctx = [None] * nn
        ctx[0] = ()
        for i in range(1, nn):
            ctx[i] = (int(word[i]),) + ctx[parent[i]]
        out = {}
        for e in range(len(idx.ent_node)):
            g = ctx[idx.ent_node[e]] + (int(idx.ent_dish[e]),)
            out.setdefault(g, [-1, -1])[0] = e
        for i in range(1, nn):
            out.setdefault(ctx[i], [-1, -1])[1] = i
        return out

    def write_arpa(self, path):
        """ARPA export: log10 interpolated probabilities and log10 gamma as back-off."""
        grams = self._grams()
        sym = self.vocab.symbols
        # unigrams: the whole support plus <s>
        for w in range(len(sym)):
            grams.setdefault((w,), [-1, -1])
        ctx_node = {}
        for g, (e, nd) in grams.items():
            if nd >= 0:
                ctx_node[g] = nd
        by_order = {}
        for g in grams:
            by_order.setdefault(len(g), []).append(g)

        def lg(x):
            return repr(math.log10(x)) if x > 0 else "-99"

        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\\data\\\n")
            for k in sorted(by_order):
                fh.write(f"ngram {k}={len(by_order[k])}\n")
            for k in sorted(by_order):
                fh.write(f"\n\\{k}-grams:\n")
                for g in sorted(by_order[k], key=lambda g: [sym[i] for i in g]):
                    w = g[-1]
                    if w == self.vocab.bos_id:
                        lp = "-99"
                    else:
                        # the explicit (possibly short) context only
                        lp = lg(self._prob_prefix(g[:-1], w))
                    line = lp + "\t" + " ".join(sym[i] for i in g)
                    if k < self.order:
                        nd = ctx_node.get(g, -1) if k > 0 else -1
                        bow = self.node_gamma[nd] if nd >= 0 else None
                        if bow is not None:
                            line += "\t" + lg(bow)
                    fh.write(line + "\n")
            fh.write("\n\\end\\\n")

    def _prob_prefix(self, h, w):
        """P(w | h) for an explicit (possibly short) context h."""
        h = tuple(h)
        p = 1.0 / self.support
        for d in range(len(h) + 1):
            ctx = np.asarray(h[len(h) - d:], np.int64).reshape(1, d)
            if d == 0:
                nd = 0
            else:
                full = np.zeros((1, self.order - 1), np.int64)
                full[0, self.order - 1 - d:] = ctx
                nd = int(self.index.nodes(full)[0, d])
            if nd < 0 or self.node_T[nd] <= 0:
                continue
            e = int(self.index.entries([nd], [w])[0])
            c = self.adj[e] if e >= 0 else 0
            alpha = max(c - float(self.discount_of(d, c)), 0.0) / self.node_T[nd]
            p = alpha + self.node_gamma[nd] * p
        return p


def read_arpa(path):
    """Parse an ARPA file into ({ngram tuple: (log10 p, log10 bow)}, order)."""
    table = {}
    order = 0
    section = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line in ("\\data\\", "\\end\\") or line.startswith("ngram "):
                continue
            if line.startswith("\\") and line.endswith("-grams:"):
                section = int(line[1:line.index("-")])
                order = max(order, section)
                continue
            parts = line.split("\t")
            toks = tuple(parts[1].split(" "))
            if len(toks) != section:
                raise ValueError(f"malformed ARPA line: {line!r}")
            bow = float(parts[2]) if len(parts) > 2 else 0.0
            table[toks] = (float(parts[0]), bow)
    return table, order


def arpa_prob(table, context, word):
    """Back-off probability (natural scale) from a parsed ARPA table."""
    context = tuple(context)
    if context + (word,) in table:
        return 10 ** table[context + (word,)][0]
    if not context:
        return 0.0
    bow = table.get(context, (0.0, 0.0))[1]
    return 10 ** bow * arpa_prob(table, context[1:], word)
