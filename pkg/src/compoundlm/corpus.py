"""Vocabularies, corpora and boundary-padded n-gram streams.

Input text is taken as-is: one sentence per line, tokens separated by
whitespace, UTF-8.  No lowercasing or tokenisation happens here.  Files ending
in ``.gz`` are decompressed transparently.

Id layout of a :class:`Vocabulary` is fixed: ``<unk>`` = 0, ``<s>`` = 1,
``</s>`` = 2, then the retained types ordered by decreasing training
frequency (ties broken by the token string), so ids are deterministic.
"""
import gzip
from collections import Counter
from pathlib import Path

import numpy as np

UNK, BOS, EOS = "<unk>", "<s>", "</s>"
SPECIALS = (UNK, BOS, EOS)


class CorpusFormatError(ValueError):
    """Malformed input data (bad encoding, bad TSV line, ...)."""


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def iter_lines(path):
    """Yield (line number, decoded line without newline); strict UTF-8."""
    with _open_text(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid UTF-8 ({exc.reason})") from None
            yield lineno, line.rstrip("\r\n")


def read_sentences(path):
    """Whitespace-tokenised sentences of a corpus file.  Blank lines are skipped."""
    out = []
    for _, line in iter_lines(path):
        toks = line.split()
        if toks:
            out.append(toks)
    return out


class Vocabulary:
    """Bidirectional word <-> id map with UNK and boundary symbols.

    Tokens in the input that spell one of the special surface strings are
    never stored as ordinary types; they encode to ``unk_id``.
    """

    def __init__(self, symbols, counts=None, min_count=1):
        symbols = list(symbols)
        if tuple(symbols[:3]) != SPECIALS:
            raise ValueError("first three symbols must be %s" % (SPECIALS,))
        if len(set(symbols)) != len(symbols):
            raise ValueError("duplicate symbols in vocabulary")
        if any(s in SPECIALS for s in symbols[3:]):
            raise ValueError("special surface string stored as an ordinary type")
        self.symbols = symbols
        self.index = {s: i for i, s in enumerate(symbols)}
        self.counts = list(counts) if counts is not None else [0] * len(symbols)
        self.min_count = int(min_count)
        self.unk_id, self.bos_id, self.eos_id = 0, 1, 2

    def __len__(self):
        return len(self.symbols)

    def __contains__(self, word):
        return word in self.index and word not in SPECIALS

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.symbols == other.symbols

    @property
    def support_size(self):
        """Number of predictable outcomes: every symbol except ``<s>``."""
        return len(self.symbols) - 1

    def encode_word(self, word):
        if word in SPECIALS:
            return self.unk_id
        return self.index.get(word, self.unk_id)

    def encode(self, words):
        return [self.encode_word(w) for w in words]

    def decode(self, ids):
        return [self.symbols[i] for i in ids]

    def is_oov(self, word):
        return self.encode_word(word) == self.unk_id

    def dump(self, path):
        """Write ``token<TAB>id<TAB>count`` lines sorted by id."""
        with open(path, "w", encoding="utf-8") as fh:
            for i, (s, c) in enumerate(zip(self.symbols, self.counts)):
                fh.write(f"{s}\t{i}\t{c}\n")

    @classmethod
    def load(cls, path, min_count=1):
        symbols, counts = [], []
        for lineno, line in iter_lines(path):
            parts = line.split("\t")
            if len(parts) != 3 or not parts[1].isdigit() or int(parts[1]) != len(symbols):
                raise CorpusFormatError(f"{path}:{lineno}: expected token<TAB>id<TAB>count in id order")
            symbols.append(parts[0])
            counts.append(int(parts[2]))
        return cls(symbols, counts, min_count)

    def to_dict(self):
        return {"symbols": self.symbols, "counts": self.counts, "min_count": self.min_count}

    @classmethod
    def from_dict(cls, d):
        return cls(d["symbols"], d["counts"], d["min_count"])


def build_vocabulary(sentences, min_count=1):
    """Vocabulary over token-string sentences keeping types seen >= min_count times.

    Counts of the specials: ``<unk>`` gets the token mass that was pruned,
    ``<s>`` and ``</s>`` the number of sentences.
    """
    if min_count < 0:
        raise ValueError("min_count must be non-negative")
    freq = Counter()
    nsent = 0
    for sent in sentences:
        nsent += 1
        freq.update(sent)
    pruned = 0
    kept = []
    for w, c in freq.items():
        if w in SPECIALS or c < min_count:
            pruned += c
        else:
            kept.append((w, c))
    kept.sort(key=lambda wc: (-wc[1], wc[0]))
    symbols = list(SPECIALS) + [w for w, _ in kept]
    counts = [pruned, nsent, nsent] + [c for _, c in kept]
    return Vocabulary(symbols, counts, min_count)


class Corpus:
    """Encoded sentences.  ``token_count`` excludes the implicit ``</s>``."""

    def __init__(self, sentences, vocab):
        self.vocab = vocab
        self.sentences = [np.asarray(s, dtype=np.int64) for s in sentences]
        nv = len(vocab)
        for s in self.sentences:
            if len(s) and (s.min() < 0 or s.max() >= nv):
                raise ValueError("token id outside the vocabulary")
        self.token_count = int(sum(len(s) for s in self.sentences))
        self.type_count = len(np.unique(np.concatenate(self.sentences))) if self.token_count else 0

    @classmethod
    def from_tokens(cls, sentences, vocab):
        return cls([vocab.encode(s) for s in sentences], vocab)

    @classmethod
    def from_file(cls, path, vocab):
        return cls.from_tokens(read_sentences(path), vocab)

    def __len__(self):
        return len(self.sentences)

    @property
    def event_count(self):
        return self.token_count + len(self.sentences)


def padded(sentence, n, bos_id=1, eos_id=2):
    return np.concatenate([np.full(n - 1, bos_id, dtype=np.int64),
                           np.asarray(sentence, dtype=np.int64), [eos_id]])


def ngram_array(corpus, n):
    """All events as an (E, n) int64 array; the last column is the target.

    Row order is sentence order, then position.  Each sentence of length L
    contributes L+1 rows, the last one predicting ``</s>``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    v = corpus.vocab
    blocks = [np.lib.stride_tricks.sliding_window_view(padded(s, n, v.bos_id, v.eos_id), n)
              for s in corpus.sentences]
    if not blocks:
        return np.zeros((0, n), dtype=np.int64)
    return np.ascontiguousarray(np.concatenate(blocks))


def ngram_stream(corpus, n):
    """Yield (context tuple of length n-1, target id) for every event."""
    for row in ngram_array(corpus, n):
        yield tuple(int(x) for x in row[:-1]), int(row[-1])
