"""Perplexity reports, hit-length / compound breakdowns and margin ranking.

Reports are in bits: every record carries log2 P(target | context), the
hit-length h (longest surface n-gram ending at the target that occurred in
training, 1..n) and two flags.  Out-of-vocabulary targets are scored as
``<unk>`` and counted in every total; ``is_oov`` lets callers drop them.
"""
import math

import numpy as np

from .corpus import EOS, SPECIALS, padded
from .hpylm import ContextIndex, build_tree


class ZeroProbabilityError(ArithmeticError):
    """A smoothed model assigned probability 0 (or NaN) to a test event."""


class AlignmentError(ValueError):
    """Two reports do not cover the same events."""


# ---- hit-length ----------------------------------------------------------
class HitLengthIndex:
    """Surface n-gram membership for the UNK-mapped, padded training stream."""

    def __init__(self, index, order):
        self.index = index
        self.order = order

    @classmethod
    def from_events(cls, events, vocab_size):
        events = np.asarray(events, np.int64)
        order = events.shape[1]
        tree = build_tree(events[:, :-1], events[:, -1], vocab_size, vocab_size)
        return cls(ContextIndex.from_tree(tree), order)

    def hit_lengths(self, events):
        events = np.asarray(events, np.int64).reshape(-1, self.order)
        nodes = self.index.nodes(events[:, :-1])
        ents = self.index.entries(nodes, events[:, -1:])
        # the trie is suffix closed, so matches form a prefix of the columns
        return np.maximum((ents >= 0).sum(axis=1), 1)

    def to_arrays(self, prefix="hit_"):
        arrs = self.index.to_arrays(prefix)
        arrs[prefix + "order"] = np.array([self.order], np.int64)
        return arrs

    @classmethod
    def from_arrays(cls, arrs, prefix="hit_"):
        return cls(ContextIndex.from_arrays(arrs, prefix), int(arrs[prefix + "order"][0]))


# ---- reports -------------------------------------------------------------
REPORT_COLUMNS = ("sent", "pos", "token", "log2p", "h", "is_compound", "is_oov")


class EvalReport:
    """Per-token records plus provenance (model kind, event space)."""

    def __init__(self, sent, pos, tokens, log2p, h, is_compound, is_oov, meta=None):
        self.sent = np.asarray(sent, np.int64)
        self.pos = np.asarray(pos, np.int64)
        self.tokens = list(tokens)
        self.log2p = np.asarray(log2p, np.float64)
        self.h = np.asarray(h, np.int64)
        self.is_compound = np.asarray(is_compound, bool)
        self.is_oov = np.asarray(is_oov, bool)
        self.meta = dict(meta or {})

    def __len__(self):
        return len(self.log2p)

    @property
    def cross_entropy(self):
        if len(self) == 0:
            return math.nan
        return -float(math.fsum(self.log2p)) / len(self)

    @property
    def perplexity(self):
        return 2.0 ** self.cross_entropy

    def subset(self, mask):
        mask = np.asarray(mask, bool)
        return EvalReport(self.sent[mask], self.pos[mask],
                          [t for t, k in zip(self.tokens, mask) if k], self.log2p[mask],
                          self.h[mask], self.is_compound[mask], self.is_oov[mask], self.meta)

    def without_oov(self):
        return self.subset(~self.is_oov)

    def summary(self):
        m = self.meta
        return (f"model={m.get('model', '?')} tokens={len(self)} oov={int(self.is_oov.sum())} "
                f"xent={self.cross_entropy:.6f} ppl={self.perplexity:.4f} "
                f"event_space={m.get('event_space', 'words')}")

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\t".join(REPORT_COLUMNS) + "\n")
            for i in range(len(self)):
                fh.write(f"{self.sent[i]}\t{self.pos[i]}\t{self.tokens[i]}\t{float(self.log2p[i])!r}\t"
                         f"{self.h[i]}\t{int(self.is_compound[i])}\t{int(self.is_oov[i])}\n")
            for k in sorted(self.meta):
                fh.write(f"# {k}={self.meta[k]}\n")
            fh.write(f"# tokens={len(self)}\n# xent={self.cross_entropy!r}\n"
                     f"# ppl={self.perplexity!r}\n")

    @classmethod
    def read(cls, path):
        cols = {c: [] for c in REPORT_COLUMNS}
        meta = {}
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            if tuple(header) != REPORT_COLUMNS:
                raise ValueError(f"{path}: not a report file")
            for lineno, line in enumerate(fh, 2):
                line = line.rstrip("\n")
                if line.startswith("# "):
                    k, _, v = line[2:].partition("=")
                    meta[k] = v
                    continue
                parts = line.split("\t")
                if len(parts) != len(REPORT_COLUMNS):
                    raise ValueError(f"{path}:{lineno}: expected {len(REPORT_COLUMNS)} fields")
                for c, v in zip(REPORT_COLUMNS, parts):
                    cols[c].append(v)
        for k in ("tokens", "xent", "ppl"):
            meta.pop(k, None)
        return cls(np.array(cols["sent"], np.int64), np.array(cols["pos"], np.int64),
                   cols["token"], np.array(cols["log2p"], np.float64),
                   np.array(cols["h"], np.int64), np.array(cols["is_compound"], np.int64) == 1,
                   np.array(cols["is_oov"], np.int64) == 1, meta)

    def aligned_with(self, other):
        return (len(self) == len(other) and np.array_equal(self.sent, other.sent)
                and np.array_equal(self.pos, other.pos) and self.tokens == other.tokens)


def perplexity(model, sentences, hits=None, seg=None, renormalize=False, name=None):
    """Score every target (``</s>`` included) of token-string ``sentences``.

    ``hits`` is a :class:`HitLengthIndex` over the training data (h = 1
    everywhere when omitted); ``seg`` flags compound targets (defaults to
    the model's own dictionary when it has one).
    """
    vocab, n = model.vocab, model.order
    if seg is None:
        seg = getattr(model, "seg", None)
    rows, sent, pos, toks, oov, comp = [], [], [], [], [], []
    for si, words in enumerate(sentences):
        ids = vocab.encode(words)
        rows.append(np.lib.stride_tricks.sliding_window_view(
            padded(ids, n, vocab.bos_id, vocab.eos_id), n))
        for j, w in enumerate(list(words) + [EOS]):
            sent.append(si)
            pos.append(j)
            toks.append(w)
            is_eos = j == len(words)
            oov.append(not is_eos and ids[j] == vocab.unk_id)
            comp.append(bool(seg is not None and not is_eos and w not in SPECIALS
                             and seg.is_compound(w)))
    events = np.concatenate(rows) if rows else np.zeros((0, n), np.int64)
    if renormalize:
        if getattr(model, "kind", "") != "hpylmc":
            raise ValueError("renormalize applies to hpylmc models only")
        p = model.prob_events(events, renormalize=True)
    else:
        p = model.prob_events(events)
    bad = ~(p > 0) | ~np.isfinite(p)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ZeroProbabilityError(f"P={p[i]} for token {toks[i]!r} at sentence {sent[i]}, "
                                   f"position {pos[i]}")
    h = hits.hit_lengths(events) if hits is not None else np.ones(len(events), np.int64)
    kind = getattr(model, "kind", "model")
    space = "words"
    if kind == "hpylmc" and not renormalize and not getattr(model, "bypass", False):
        space = "extended"   # mass also goes to unseen component strings
    meta = {"model": name or kind, "order": n, "event_space": space}
    return EvalReport(sent, pos, toks, np.log2(p), h, comp, oov, meta)


# ---- breakdown -----------------------------------------------------------
BREAKDOWN_COLUMNS = ("h", "compound", "tokens", "xent", "ppl")


def breakdown(report, order=None, seg=None):
    """Rows (h, compound, tokens, xent, ppl) for h = 1..n x {0, 1}, then an OOV row.

    The first n*2 rows partition the report; the OOV row (h = "oov") is an
    extra overlapping slice.  Empty subsets have NaN cross-entropy.
    """
    n = int(order or report.meta.get("order") or max(report.h.max(initial=1), 1))
    comp = report.is_compound
    if seg is not None:
        comp = np.array([t not in SPECIALS and seg.is_compound(t) for t in report.tokens], bool)
    rows = []
    for h in range(1, n + 1):
        for c in (False, True):
            mask = (report.h == h) & (comp == c)
            rows.append(_row(h, int(c), report.log2p[mask]))
    rows.append(_row("oov", "-", report.log2p[report.is_oov]))
    return rows


def _row(h, c, lp):
    if len(lp) == 0:
        return (h, c, 0, math.nan, math.nan)
    x = -math.fsum(lp) / len(lp)
    return (h, c, len(lp), x, 2.0 ** x)


def compare_breakdown(report_a, report_b, order=None, seg=None):
    """Per-subset relative cross-entropy change (xent_a - xent_b) / xent_b.

    Subsets without tokens get a delta of 0.
    """
    if not report_a.aligned_with(report_b):
        raise AlignmentError("reports cover different test events")
    out = []
    for ra, rb in zip(breakdown(report_a, order, seg), breakdown(report_b, order, seg)):
        if ra[2] == 0:
            rel = 0.0
        else:
            rel = (ra[3] - rb[3]) / rb[3] if rb[3] != 0 else (0.0 if ra[3] == rb[3] else math.inf)
        out.append((ra[0], ra[1], ra[2], ra[3], rb[3], rel))
    return out


def write_table(path_or_fh, header, rows):
    def fmt(x):
        return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)
    text = "\t".join(header) + "\n" + "".join("\t".join(fmt(x) for x in r) + "\n" for r in rows)
    if hasattr(path_or_fh, "write"):
        path_or_fh.write(text)
    else:
        with open(path_or_fh, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# ---- margin ranking ------------------------------------------------------
MARGIN_COLUMNS = ("rank", "sent", "pos", "context", "token", "p_a", "p_b", "delta")


def margin_ranking(report_a, report_b, compounds_only=True, order=None):
    """Tokens sorted by P_a - P_b (descending; ties keep test order)."""
    if not report_a.aligned_with(report_b):
        raise AlignmentError("reports cover different test events")
    n = int(order or report_a.meta.get("order") or 4)
    pa = np.exp2(report_a.log2p)
    pb = np.exp2(report_b.log2p)
    delta = pa - pb
    idx = np.arange(len(delta))
    if compounds_only:
        idx = idx[report_a.is_compound]
    idx = idx[np.argsort(-delta[idx], kind="stable")]
    out = []
    for r, i in enumerate(idx, 1):
        out.append((r, int(report_a.sent[i]), int(report_a.pos[i]), _context(report_a, i, n),
                    report_a.tokens[i], float(pa[i]), float(pb[i]), float(delta[i])))
    return out


def _context(report, i, n):
    k = int(report.pos[i])
    ctx = report.tokens[i - min(k, n - 1):i]
    return " ".join(["<s>"] * (n - 1 - len(ctx)) + ctx)
