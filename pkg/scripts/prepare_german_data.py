"""Build the German evaluation corpora used by the slow acceptance tests.

Text source: two samples of German Bundestag plenary speeches shipped inside
the ``tmtoolkit`` wheels on PyPI (0.9.0: ``bt18_speeches_sample``; 0.12.0:
``parlspeech-v2-sample-bundestag``).  Speeches are sentence split, lowercased
and tokenised (punctuation split off, word-internal hyphens kept), matching
the usual LM preprocessing.

The compound segmentation dictionary is produced with a frequency-based
splitter in the style of Koehn & Knight (2003): a word is split into parts
that are themselves frequent corpus words, optionally joined by a linking
element (-s-, -es-, -n-, -en-, -er-, -e-).  Words are split only when the
geometric mean of the part frequencies beats the frequency of the whole.
Only nouns are split and the head must itself be a noun; a word counts as a
noun when it is mostly capitalised in non-sentence-initial positions of the
raw text (German orthography), which keeps verbs like "betreibenden" whole.

Outputs (all gzip-compressed UTF-8, one sentence per line):

    data/de/parl_100k.txt.gz   ~100k tokens, sampler burn-in experiments
    data/de/train_1m.txt.gz    >=1M tokens, training
    data/de/test.txt.gz        held-out sentences
    data/de/seg.tsv.gz         segmentation dictionary for train_1m

Usage: python scripts/prepare_german_data.py [--workdir /tmp/tmtk]
"""
import argparse
import collections
import gzip
import io
import math
import re
import subprocess
import sys
import zipfile
from pathlib import Path

import pandas as pd

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "de"

WHEELS = {
    "0.9.0": "tmtoolkit/data/german/bt18_speeches_sample.zip",
    "0.12.0": "tmtoolkit/data/de/parlspeech-v2-sample-bundestag.zip",
}

TOKEN_RE = re.compile(r"\d+(?:[.,]\d+)*|\w+(?:[-'’]\w+)*-?|[^\w\s]", re.UNICODE)
SENT_SPLIT_RE = re.compile(r"(?<=[.!?])\s+(?=[\"„“A-ZÄÖÜ])")
LINKERS = ("", "s", "es", "n", "en", "er", "e")


def fetch(workdir):
    workdir.mkdir(parents=True, exist_ok=True)
    texts = {}
    for version, member in WHEELS.items():
        wheel = workdir / f"tmtoolkit-{version}-py3-none-any.whl"
        if not wheel.exists():
            subprocess.run(
                [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                 "-d", str(workdir), f"tmtoolkit=={version}"],
                check=True,
            )
        inner = zipfile.ZipFile(io.BytesIO(zipfile.ZipFile(wheel).read(member)))
        frame = pd.read_csv(inner.open(inner.namelist()[0]))
        texts[version] = [str(t) for t in frame["text"] if isinstance(t, str)]
    return texts


def raw_sentences(speech):
    speech = re.sub(r"(?<=\s)_(?=\s)", "-", speech)
    for para in speech.split("\n"):
        para = para.strip()
        if not para:
            continue
        # parlspeech text is pre-tokenised ("wurden ."), rejoin before splitting
        para = re.sub(r"\s+([.!?,;:])", r"\1", para)
        for sent in SENT_SPLIT_RE.split(para):
            toks = TOKEN_RE.findall(sent)
            if len(toks) >= 2:
                yield toks


def noun_counts(raw):
    """Per lowercased type: (capitalised, total) over non-initial positions."""
    cap = collections.Counter()
    tot = collections.Counter()
    for toks in raw:
        for t in toks[1:]:
            if t[:1].isalpha():
                low = t.lower()
                tot[low] += 1
                cap[low] += t[:1].isupper()
    return cap, tot


def write(path, lines):
    # mtime=0 keeps the archives byte-reproducible
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
        gz.write(("\n".join(lines) + "\n").encode("utf-8"))


def split_word(word, freq, nouns, min_part=3, min_freq=3, memo=None):
    """Best frequency-based split of ``word`` into surface segments."""
    if memo is None:
        memo = {}
    if word in memo:
        return memo[word]
    best = ([word], freq.get(word, 0))
    for i in range(min_part, len(word) - 3):
        head = word[i:]
        if freq.get(head, 0) < min_freq or head not in nouns:
            continue
        left = word[:i]
        for linker in LINKERS:
            if linker and not left.endswith(linker):
                continue
            stem = left[: len(left) - len(linker)] if linker else left
            if len(stem) < min_part or freq.get(stem, 0) < min_freq:
                continue
            stem_parts, _ = split_word(stem, freq, nouns, min_part, min_freq, memo)
            parts = [p for p in stem_parts if p]
            segs = parts + (["+" + linker] if linker else []) + [head]
            words = parts + [head]
            score = math.exp(sum(math.log(max(freq.get(p, 1), 1)) for p in words) / len(words))
            if score > best[1]:
                best = (segs, score)
    memo[word] = best
    return best


def build_segmentation(vocab_counts, cap, tot):
    freq = {w: c for w, c in vocab_counts.items() if w.isalpha()}
    nouns = {w for w in freq if tot[w] and cap[w] / tot[w] >= 0.5}
    memo = {}
    rows = []
    for word in sorted(vocab_counts):
        if not word.isalpha() or len(word) < 7 or word not in nouns:
            continue
        segs, _ = split_word(word, freq, nouns, memo=memo)
        if len(segs) > 1:
            rows.append(f"{word}\t{' '.join(segs)}")
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--workdir", type=Path, default=Path("/tmp/tmtoolkit-wheels"))
    parser.add_argument("--test-sentences", type=int, default=2500)
    args = parser.parse_args(argv)

    texts = fetch(args.workdir)
    parl_raw = [s for speech in texts["0.12.0"] for s in raw_sentences(speech)]
    bt18_raw = [s for speech in texts["0.9.0"] for s in raw_sentences(speech)]
    parl = [" ".join(toks).lower() for toks in parl_raw]
    bt18 = [" ".join(toks).lower() for toks in bt18_raw]

    small, n = [], 0
    for s in parl:
        if n >= 100_000:
            break
        small.append(s)
        n += len(s.split())
    write(OUT / "parl_100k.txt.gz", small)

    # held-out sentences are taken from the tail of each source
    test = bt18[-args.test_sentences // 2:] + parl[-args.test_sentences // 2:]
    train = bt18[: -args.test_sentences // 2] + parl[: -args.test_sentences // 2]
    write(OUT / "train_1m.txt.gz", train)
    write(OUT / "test.txt.gz", test)

    counts = collections.Counter(t for s in train for t in s.split())
    half = args.test_sentences // 2
    cap, tot = noun_counts(bt18_raw[:-half] + parl_raw[:-half])
    seg = build_segmentation(counts, cap, tot)
    write(OUT / "seg.tsv.gz", ["# frequency-based compound splits of train_1m"] + seg)

    ntrain = sum(counts.values())
    ntest = sum(len(s.split()) for s in test)
    print(f"parl_100k: {len(small)} sentences, {n} tokens")
    print(f"train_1m: {len(train)} sentences, {ntrain} tokens, {len(counts)} types")
    print(f"test: {len(test)} sentences, {ntest} tokens")
    print(f"seg: {len(seg)} compound entries")


if __name__ == "__main__":
    main()
