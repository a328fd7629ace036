"""Compound segmentation dictionaries and component orderings.

Dictionary file format (UTF-8, ``#`` starts a comment line)::

    küchentisch<TAB>küche +n tisch

Segments are separated by single spaces; linking elements carry a leading
``+``.  The segments of an entry, linkers included, must concatenate to the
surface word.

Linkers never become components of their own.  They are merged onto a
neighbouring component (``merge-left`` onto the preceding one,
``merge-right`` onto the following one) or dropped (``delete``):

    merge-left   küchen . tisch
    merge-right  küche . ntisch
    delete       küche . tisch

Independently of the dictionary every word-internal hyphen is a split point
and the hyphen itself is dropped (``keep_hyphen=True`` keeps it attached to
the preceding component instead).

The generation order of the components is given by ``direction``: ``ling``
generates the rightmost component (the head in German) first and then walks
leftwards; ``inv`` starts with the leftmost one.
"""
from collections import Counter, namedtuple

import numpy as np

from .corpus import SPECIALS, CorpusFormatError, Vocabulary, iter_lines

SCHEMES = ("merge-left", "merge-right", "delete")
DIRECTIONS = ("ling", "inv")
# linker attachment that keeps the head component set unfragmented
DEFAULT_SCHEME = {"ling": "merge-left", "inv": "merge-right"}

Segment = namedtuple("Segment", "text is_linker")
CompoundWord = namedtuple("CompoundWord", "components lam")


def parse_segments(field):
    segs = []
    for tok in field.split(" "):
        if not tok:
            raise ValueError("empty segment")
        if tok.startswith("+"):
            if len(tok) == 1:
                raise ValueError("bare '+' linker")
            segs.append(Segment(tok[1:], True))
        else:
            segs.append(Segment(tok, False))
    if all(s.is_linker for s in segs):
        raise ValueError("entry has no non-linker segment")
    return segs


def merge_linkers(segs, scheme):
    """Fold linker segments into their neighbours; returns component strings."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown linking scheme {scheme!r}")
    out = []
    pending = ""   # linker text waiting for a right neighbour
    for i, s in enumerate(segs):
        if not s.is_linker:
            out.append(pending + s.text)
            pending = ""
            continue
        if scheme == "delete":
            continue
        if scheme == "merge-left" and out:
            out[-1] += s.text
        elif scheme == "merge-right" and not any(not t.is_linker for t in segs[i + 1:]):
            # trailing linker has nothing on its right
            out[-1] += s.text
        else:
            pending += s.text
    if pending:
        out[-1] += pending
    return out


def split_hyphens(parts, keep_hyphen=False):
    out = []
    for p in parts:
        pieces = p.split("-")
        if keep_hyphen:
            pieces = [q + "-" for q in pieces[:-1]] + pieces[-1:]
        out.extend(q for q in pieces if q and q != "-")
    # a word made only of hyphens stays whole
    return out if out else list(parts)


def lambda_order(L, direction):
    """1-based positions in generation order; element 0 is the head."""
    if direction == "ling":
        return list(range(L, 0, -1))
    if direction == "inv":
        return list(range(1, L + 1))
    raise ValueError(f"unknown direction {direction!r}")


class SegmentationDictionary:

    def __init__(self, entries=None, scheme=None, direction="ling", keep_hyphen=False):
        if direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {direction!r}")
        scheme = scheme or DEFAULT_SCHEME[direction]
        if scheme not in SCHEMES:
            raise ValueError(f"unknown linking scheme {scheme!r}")
        self.entries = dict(entries or {})
        self.scheme = scheme
        self.direction = direction
        self.keep_hyphen = keep_hyphen
        self._cache = {}

    def __len__(self):
        return len(self.entries)

    def components(self, word):
        """Components of a surface word in surface order."""
        hit = self._cache.get(word)
        if hit is not None:
            return hit
        if word in SPECIALS:
            parts = [word]
        elif word in self.entries:
            parts = merge_linkers(self.entries[word], self.scheme)
        else:
            parts = [word]
        if word not in SPECIALS:
            parts = split_hyphens(parts, self.keep_hyphen)
        self._cache[word] = parts
        return parts

    def ordered(self, word):
        """Components in generation order (head first)."""
        parts = self.components(word)
        return [parts[j - 1] for j in lambda_order(len(parts), self.direction)]

    def is_compound(self, word):
        return len(self.components(word)) > 1

    def decompose(self, word_id, vocab, comp_vocab):
        parts = self.components(vocab.symbols[word_id])
        return CompoundWord([comp_vocab.index[p] for p in parts],
                            lambda_order(len(parts), self.direction))

    def to_dict(self):
        return {
            "scheme": self.scheme, "direction": self.direction, "keep_hyphen": self.keep_hyphen,
            "entries": {w: [("+" if s.is_linker else "") + s.text for s in segs]
                        for w, segs in sorted(self.entries.items())},
        }

    @classmethod
    def from_dict(cls, d):
        entries = {w: parse_segments(" ".join(segs)) for w, segs in d["entries"].items()}
        return cls(entries, d["scheme"], d["direction"], d["keep_hyphen"])


def load_dictionary(path, scheme=None, direction="ling", keep_hyphen=False):
    """Read a segmentation TSV; errors carry the offending line number."""
    entries = {}
    for lineno, line in iter_lines(path):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0]:
            raise CorpusFormatError(f"{path}:{lineno}: expected surface<TAB>segments")
        word, field = fields
        try:
            segs = parse_segments(field)
        except ValueError as exc:
            raise CorpusFormatError(f"{path}:{lineno}: {exc}") from None
        if "".join(s.text for s in segs) != word:
            raise CorpusFormatError(f"{path}:{lineno}: segments do not concatenate to {word!r}")
        entries[word] = segs
    return SegmentationDictionary(entries, scheme, direction, keep_hyphen)


def build_component_vocabulary(vocab, seg):
    """Component vocabulary over every word type of ``vocab``.

    Component counts are token-weighted by the word counts so the ordering
    follows the same frequency rule as word vocabularies.
    """
    freq = Counter()
    for w, c in zip(vocab.symbols[3:], vocab.counts[3:]):
        for p in seg.components(w):
            freq[p] += c
    for s in SPECIALS:
        freq.pop(s, None)
    kept = sorted(freq.items(), key=lambda pc: (-pc[1], pc[0]))
    return Vocabulary(list(SPECIALS) + [p for p, _ in kept],
                      list(vocab.counts[:3]) + [c for _, c in kept], vocab.min_count)


def decomposition_table(vocab, comp_vocab, seg):
    """Per word id, component ids in generation order (head first).

    Returns (offsets, flat, is_compound) as int64/bool arrays.
    """
    offsets = np.zeros(len(vocab) + 1, dtype=np.int64)
    flat = []
    for i, w in enumerate(vocab.symbols):
        ids = [comp_vocab.index[p] for p in seg.ordered(w)]
        flat.extend(ids)
        offsets[i + 1] = len(flat)
    lengths = np.diff(offsets)
    return offsets, np.asarray(flat, dtype=np.int64), lengths > 1
