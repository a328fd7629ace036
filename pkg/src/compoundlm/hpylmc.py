"""HPYLM with compound-aware word generation.

A word w in context u (|u| = n-1) is drawn from a Pitman-Yor restaurant H_u
whose base distribution generates the word from its components, head first:

    base(w | u) = G_u(c_1) * F(c_2 | c_1) * ... * F(c_L | c_{L-1}) * F($ | c_L)

where c_1..c_L are the components in generation order (see
``segmentation``), G is an ordinary n-gram HPYLM over components conditioned
on the surface-word history u, and F is a bigram HPYLM over components plus
the end symbol $.  G backs off to Uniform(|M|) and F to Uniform(|M| + 1) so
that $ also receives base mass.

Opening a table in H_u sends one customer to G (for the head) and one to F
for every modifier and for $, each of which may open tables further up its
own hierarchy.  Only the predicted word is decomposed; history words stay
surface forms.

Hyperparameter groups: G per context length, F per context length (0, 1)
and one group for the H level.
"""
import numpy as np

from . import _engine as eng
from .corpus import Vocabulary, ngram_array
from .hpylm import (GROW_MARGIN, ArenaModel, ContextIndex, build_tree, chain_predict,
                    context_rows, node_vector)
from .segmentation import (SegmentationDictionary, build_component_vocabulary,
                           decomposition_table)


class HPYLMC(ArenaModel):
    """Compound HPYLM.

    ``bypass`` drops the H level (diagnostic mode): each training event then
    seats its customers directly in the G chain and the F chains, and
    P(w | u) is the plain product of the factors.  ``include_end`` controls
    the F($ | c_L) factor.
    """

    kind = "hpylmc"

    def __init__(self, vocab, seg, order=4, events=None, a=0.5, b=1.0, comp_vocab=None,
                 bypass=False, include_end=True):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.vocab = vocab
        self.seg = seg
        self.order = order
        self.bypass = bool(bypass)
        self.include_end = bool(include_end)
        self.comp_vocab = comp_vocab or build_component_vocabulary(vocab, seg)
        V, C = len(vocab), len(self.comp_vocab)
        self.end_id = C
        self.comp_support = self.comp_vocab.support_size
        self.dec_off, self.dec_flat, self.is_compound = decomposition_table(vocab, self.comp_vocab, seg)
        if events is None:
            events = np.zeros((0, order), np.int64)
        events = np.asarray(events, np.int64).reshape(-1, order)
        words = events[:, -1]
        heads = self.dec_flat[self.dec_off[words]]

        # G: n-gram tree over components with word histories
        gt = build_tree(events[:, :-1], heads, V, C)
        # F: bigram tree over all (previous component, next) pairs of the
        # training word types
        types = np.unique(words)
        prev, nxt, own = self._pairs(types)
        ft = build_tree(prev[:, None], nxt, C + 1, C + 1,
                        node_offset=len(gt["node_key"]), ent_offset=len(gt["ent_node"]))
        f_leaf_of_pair = ft["leaf"]
        n_gf_nodes = len(gt["node_key"]) + len(ft["node_key"])
        n_gf_ents = len(gt["ent_node"]) + len(ft["ent_node"])
        self.g_index = ContextIndex.from_tree(gt)
        self.f_index = ContextIndex.from_tree(ft)

        node_g = [gt["node_depth"], ft["node_depth"] + order]
        ent_node = [gt["ent_node"], ft["ent_node"]]
        fl = [(gt["ent_parent"] >= 0).astype(np.int64), (ft["ent_parent"] >= 0).astype(np.int64)]
        fac = [gt["ent_parent"][gt["ent_parent"] >= 0], ft["ent_parent"][ft["ent_parent"] >= 0]]

        # F leaf entries of every word type (in generation order)
        type_fac_start = np.searchsorted(own, np.arange(len(types)))
        type_fac_len = np.bincount(own, minlength=len(types))

        g_leaf = gt["leaf"]
        if self.bypass:
            # data customers go straight into every factor chain
            tix = np.searchsorted(types, words)
            data = []
            for i in range(len(words)):
                s, l = type_fac_start[tix[i]], type_fac_len[tix[i]]
                data.append(g_leaf[i])
                data.extend(f_leaf_of_pair[s:s + l])
            self.data = np.asarray(data, np.int32)
            self.h_index = ContextIndex(np.zeros(0, np.int64), np.zeros(0, np.int64),
                                        np.zeros(0, np.int64), 0, 1, V, n_gf_nodes, n_gf_ents)
            self.h_leaf_nodes = np.zeros(0, np.int64)
            self.h_nodes = np.zeros(0, np.int64)
        else:
            # one H node per full-length context (= per G leaf node)
            g_node_of_event = gt["ent_node"][g_leaf]
            leaf_nodes, h_local = np.unique(g_node_of_event, return_inverse=True)
            h_node = h_local.reshape(-1) + n_gf_nodes
            key = h_node * V + words
            hk, first, hinv = np.unique(key, return_index=True, return_inverse=True)
            hinv = hinv.reshape(-1)
            h_ent_node = hk // V
            h_word = hk % V
            h_g = g_leaf[first]
            h_type = np.searchsorted(types, h_word)
            h_fl = 1 + type_fac_len[h_type]
            h_fac = np.empty(int(h_fl.sum()), np.int64)
            pos = 0
            for j in range(len(hk)):
                h_fac[pos] = h_g[j]
                s, l = type_fac_start[h_type[j]], type_fac_len[h_type[j]]
                h_fac[pos + 1:pos + 1 + l] = f_leaf_of_pair[s:s + l]
                pos += 1 + l
            node_g.append(np.full(len(leaf_nodes), order + 2, np.int64))
            ent_node.append(h_ent_node)
            fl.append(h_fl)
            fac.append(h_fac)
            self.data = (hinv + n_gf_ents).astype(np.int32)
            self.h_index = ContextIndex(np.zeros(0, np.int64), h_ent_node, h_word, 0, 1, V,
                                        n_gf_nodes, n_gf_ents)
            self.h_leaf_nodes = leaf_nodes            # sorted G leaf node ids
            self.h_nodes = np.arange(len(leaf_nodes)) + n_gf_nodes

        fl = np.concatenate(fl)
        fs = np.cumsum(fl) - fl
        grp_base = np.empty(order + 3)
        grp_base[:order] = 1.0 / self.comp_support
        grp_base[order:order + 2] = 1.0 / (self.comp_support + 1)
        grp_base[order + 2] = 1.0
        self.A = eng.new_arena(np.concatenate(node_g), np.concatenate(ent_node), fs, fl,
                               np.concatenate(fac), grp_base,
                               n_bins=int(1.5 * len(fl)) + GROW_MARGIN, a=a, b=b)
        self.group_names = ([f"G_depth{d}" for d in range(order)] + ["F_depth0", "F_depth1", "H"])
        self.events = events
        self._init_bookkeeping()
        self._fprod = None

    def _pairs(self, types):
        """(prev, next, owner) component pairs for each word type."""
        prev, nxt, own = [], [], []
        for i, w in enumerate(types):
            comps = self.dec_flat[self.dec_off[w]:self.dec_off[w + 1]]
            for j in range(1, len(comps)):
                prev.append(comps[j - 1])
                nxt.append(comps[j])
                own.append(i)
            if self.include_end:
                prev.append(comps[-1])
                nxt.append(self.end_id)
                own.append(i)
        return (np.asarray(prev, np.int64), np.asarray(nxt, np.int64), np.asarray(own, np.int64))

    @classmethod
    def train(cls, corpus, seg, order=4, burn_in=300, rng=None, init="random", a=0.5, b=1.0,
              resample=True, trace=True, callback=None, **kw):
        rng = rng if rng is not None else np.random.default_rng(0)
        model = cls(corpus.vocab, seg, order, ngram_array(corpus, order), a=a, b=b, **kw)
        model.fit(burn_in, rng, init=init, resample=resample, trace=trace, callback=callback)
        return model

    # ---- single-event API -------------------------------------------------
    def entry_of(self, context, word):
        if self.bypass:
            raise NotImplementedError("single-event updates need the H level")
        ctx = context_rows(context, self.order - 1, 1)
        h = self._h_nodes(ctx)
        e = int(self.h_index.entries(h, [word])[0])
        if e < 0:
            raise KeyError(f"({tuple(context)}, {word}) is not a training event of this model")
        return e

    def insert(self, context, word, rng=None, us=None, receipt=False):
        self._fprod = None
        return self.insert_entry(self.entry_of(context, word), rng, us, receipt=receipt)

    def remove(self, context, word, rng=None, us=None):
        self._fprod = None
        self.remove_entry(self.entry_of(context, word), rng, us)

    def undo(self, receipt):
        self._fprod = None
        super().undo(receipt)

    def _run(self, *args, **kw):
        self._fprod = None
        return super()._run(*args, **kw)

    def resample_hyperparameters(self, rng, groups=None):
        self._fprod = None
        super().resample_hyperparameters(rng, groups)

    # ---- prediction --------------------------------------------------------
    def components(self, word):
        return self.dec_flat[self.dec_off[word]:self.dec_off[word + 1]]

    def _h_nodes(self, ctx):
        g_nodes = self.g_index.nodes(ctx)[:, -1]
        if len(self.h_leaf_nodes) == 0:
            return np.full(len(ctx), -1, np.int64)
        i = np.searchsorted(self.h_leaf_nodes, g_nodes)
        i = np.minimum(i, len(self.h_leaf_nodes) - 1)
        hit = (g_nodes >= 0) & (self.h_leaf_nodes[i] == g_nodes)
        return np.where(hit, self.h_nodes[i], -1)

    def f_prob(self, prev, nxt):
        prev = np.asarray(prev, np.int64)
        nxt = np.asarray(nxt, np.int64)
        nodes = self.f_index.nodes(prev[:, None])
        ents = self.f_index.entries(nodes, nxt[:, None])
        return chain_predict(self.A, nodes, ents, np.full(len(prev), 1.0 / (self.comp_support + 1)))

    def g_prob(self, ctx, comp):
        comp = np.asarray(comp, np.int64)
        ctx = context_rows(ctx, self.order - 1, len(comp))
        nodes = self.g_index.nodes(ctx)
        ents = self.g_index.entries(nodes, comp[:, None])
        return chain_predict(self.A, nodes, ents, np.full(len(comp), 1.0 / self.comp_support))

    def modifier_prob(self):
        """Per word id: product of its F factors (context independent)."""
        if self._fprod is None:
            V = len(self.vocab)
            lens = np.diff(self.dec_off)
            prev, nxt, own = [], [], []
            starts = self.dec_off[:-1]
            for j in range(1, lens.max() if V else 1):
                w = np.nonzero(lens > j)[0]
                prev.append(self.dec_flat[starts[w] + j - 1])
                nxt.append(self.dec_flat[starts[w] + j])
                own.append(w)
            if self.include_end:
                w = np.arange(V)
                prev.append(self.dec_flat[self.dec_off[1:] - 1])
                nxt.append(np.full(V, self.end_id))
                own.append(w)
            f = np.ones(V)
            if prev:
                p = self.f_prob(np.concatenate(prev), np.concatenate(nxt))
                np.multiply.at(f, np.concatenate(own), p)
            self._fprod = f
        return self._fprod

    def base_prob_many(self, ctx, words):
        words = np.asarray(words, np.int64)
        heads = self.dec_flat[self.dec_off[words]]
        return self.g_prob(ctx, heads) * self.modifier_prob()[words]

    def base_prob(self, context, word):
        return float(self.base_prob_many([context], [word])[0])

    def prob_many(self, ctx, words):
        words = np.asarray(words, np.int64)
        ctx = context_rows(ctx, self.order - 1, len(words))
        base = self.base_prob_many(ctx, words)
        if self.bypass:
            return base
        h = self._h_nodes(ctx)
        ents = self.h_index.entries(h, words)
        return chain_predict(self.A, h[:, None], ents[:, None], base)

    def prob(self, context, word):
        return float(self.prob_many([context], [word])[0])

    def prob_vector(self, context):
        """Unnormalised P(. | context) over all word ids (``<s>`` gets 0)."""
        ctx = context_rows(context, self.order - 1, 1)
        g = np.full(len(self.comp_vocab), 1.0 / self.comp_support)
        g[self.comp_vocab.bos_id] = 0.0
        for nd in self.g_index.nodes(ctx)[0]:
            g = node_vector(self.A, self.g_index, int(nd), g)
        p = g[self.dec_flat[self.dec_off[:-1]]] * self.modifier_prob()
        p[self.vocab.bos_id] = 0.0
        if not self.bypass:
            p = node_vector(self.A, self.h_index, int(self._h_nodes(ctx)[0]), p)
        return p

    def normalizer(self, context):
        return float(self.prob_vector(context).sum())

    def renormalized_prob_many(self, ctx, words, cache=None):
        """P(w | u) / sum over the finite vocabulary of P(. | u)."""
        ctx = context_rows(ctx, self.order - 1, len(np.atleast_1d(words)))
        cache = {} if cache is None else cache
        uniq, inv = np.unique(ctx, axis=0, return_inverse=True)
        z = np.empty(len(uniq))
        for i, u in enumerate(uniq):
            key = u.tobytes()
            if key not in cache:
                cache[key] = self.normalizer(u)
            z[i] = cache[key]
        return self.prob_many(ctx, words) / z[inv.reshape(-1)]

    def renormalized_prob(self, context, word):
        return float(self.renormalized_prob_many([context], [word])[0])

    def prob_events(self, events, renormalize=False):
        events = np.asarray(events, np.int64).reshape(-1, self.order)
        if renormalize:
            return self.renormalized_prob_many(events[:, :-1], events[:, -1])
        return self.prob_many(events[:, :-1], events[:, -1])

    # ---- audit -------------------------------------------------------------
    def audit(self):
        super().audit()
        # every H table is matched by its head and F customers: checked by the
        # generic factor identity; here make sure no factor list is truncated
        if not self.bypass:
            A = self.A
            h = A.node_g[A.ent_node] == self.order + 2
            assert np.all(A.ent_fl[h] >= (2 if self.include_end else 1))

    # ---- persistence -------------------------------------------------------
    def to_arrays(self):
        arrs = self._arena_arrays()
        arrs.update(self.g_index.to_arrays("g_"))
        arrs.update(self.f_index.to_arrays("f_"))
        arrs.update(self.h_index.to_arrays("h_"))
        arrs.update({"h_leaf_nodes": self.h_leaf_nodes, "h_nodes": self.h_nodes,
                     "dec_off": self.dec_off, "dec_flat": self.dec_flat})
        return arrs

    def header(self):
        return {"kind": self.kind, "order": self.order, "bypass": self.bypass,
                "include_end": self.include_end, "groups": self.group_names,
                "vocab": self.vocab.to_dict(), "comp_vocab": self.comp_vocab.to_dict(),
                "seg": self.seg.to_dict()}

    @classmethod
    def from_parts(cls, header, arrs):
        m = cls.__new__(cls)
        m.vocab = Vocabulary.from_dict(header["vocab"])
        m.comp_vocab = Vocabulary.from_dict(header["comp_vocab"])
        m.seg = SegmentationDictionary.from_dict(header["seg"])
        m.order = header["order"]
        m.bypass = header["bypass"]
        m.include_end = header["include_end"]
        m.group_names = header["groups"]
        m.end_id = len(m.comp_vocab)
        m.comp_support = m.comp_vocab.support_size
        m.dec_off = np.asarray(arrs["dec_off"], np.int64)
        m.dec_flat = np.asarray(arrs["dec_flat"], np.int64)
        m.is_compound = np.diff(m.dec_off) > 1
        m.g_index = ContextIndex.from_arrays(arrs, "g_")
        m.f_index = ContextIndex.from_arrays(arrs, "f_")
        m.h_index = ContextIndex.from_arrays(arrs, "h_")
        m.h_leaf_nodes = np.asarray(arrs["h_leaf_nodes"], np.int64)
        m.h_nodes = np.asarray(arrs["h_nodes"], np.int64)
        m.A = cls._arena_from_arrays(arrs)
        m.data = np.zeros(0, np.int32)
        m.events = np.zeros((0, m.order), np.int64)
        m._init_bookkeeping()
        m.data_count[:] = arrs["data_count"]
        m._fprod = None
        return m
