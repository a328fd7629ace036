import os
from pathlib import Path

import numpy as np
import pytest

from compoundlm.corpus import Corpus, build_vocabulary

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data" / "de"

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def make_corpus(text, min_count=1):
    sents = [line.split() for line in text.strip().splitlines()]
    vocab = build_vocabulary(sents, min_count)
    return Corpus.from_tokens(sents, vocab)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def data_dir():
    if not (DATA / "parl_100k.txt.gz").exists():
        pytest.skip("German data not prepared (scripts/prepare_german_data.py)")
    return DATA


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 12):
        if k not in ACCEPTANCE:
            terminalreporter.write_line(f"criterion {k:2d}: NOT RUN")
            continue
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("COMPOUNDLM_SKIP_SLOW"):
        skip = pytest.mark.skip(reason="COMPOUNDLM_SKIP_SLOW set")
        for it in items:
            if "slow" in it.keywords:
                it.add_marker(skip)
