import struct

import numpy as np
import pytest

from compoundlm.corpus import ngram_array
from compoundlm.evaluation import HitLengthIndex
from compoundlm.hpylm import HPYLM
from compoundlm.hpylmc import HPYLMC
from compoundlm.mkn import MKN
from compoundlm.modelio import MAGIC, ModelFormatError, load, load_model, save, save_model
from compoundlm.segmentation import SegmentationDictionary, parse_segments

from conftest import make_corpus

TEXT = "dem alten schulhof\nder friedhof ist alt\ndem alten friedhof"
SEG = SegmentationDictionary({"schulhof": parse_segments("schul hof"),
                              "friedhof": parse_segments("fried hof")})


def models():
    c = make_corpus(TEXT)
    yield c, HPYLM.train(c, 3, 3, np.random.default_rng(0))
    yield c, HPYLMC.train(c, SEG, 3, 3, np.random.default_rng(0))
    yield c, MKN.estimate(c, 3)


@pytest.mark.parametrize("i", [0, 1, 2])
def test_round_trip_preserves_predictions(tmp_path, i):
    c, m = list(models())[i]
    hits = HitLengthIndex.from_events(ngram_array(c, 3), len(c.vocab))
    p = tmp_path / "m.bin"
    save_model(p, m, hits, extra={"seed": 0})
    m2, h2, header = load_model(p)
    assert header["extra"] == {"seed": 0} and m2.kind == m.kind
    for ctx in [(1, 1), (c.vocab.index["dem"], c.vocab.index["alten"]), (0, 5)]:
        assert np.array_equal(m.prob_vector(ctx), m2.prob_vector(ctx))
    ev = ngram_array(c, 3)
    assert np.array_equal(hits.hit_lengths(ev), h2.hit_lengths(ev))
    q = tmp_path / "m2.bin"
    save_model(q, m2, h2, extra={"seed": 0})
    assert p.read_bytes() == q.read_bytes()


def test_array_dtypes_and_shapes(tmp_path):
    arrs = {"b": np.arange(6, dtype=">i4").reshape(2, 3), "a": np.array([0.5]), "e": np.zeros((0, 2))}
    save(tmp_path / "x", {"kind": "none"}, arrs)
    header, back = load(tmp_path / "x")
    assert header == {"kind": "none"}
    for k, a in arrs.items():
        assert np.array_equal(back[k], a) and back[k].shape == a.shape


def test_newer_version_rejected(tmp_path):
    save(tmp_path / "x", {}, {"a": np.zeros(3)})
    buf = bytearray((tmp_path / "x").read_bytes())
    struct.pack_into("<I", buf, len(MAGIC), 99)
    (tmp_path / "y").write_bytes(bytes(buf))
    with pytest.raises(ModelFormatError, match="newer"):
        load(tmp_path / "y")


def test_bad_magic_and_truncation(tmp_path):
    (tmp_path / "x").write_bytes(b"not a model at all")
    with pytest.raises(ModelFormatError):
        load(tmp_path / "x")
    save(tmp_path / "y", {}, {"a": np.zeros(10)})
    (tmp_path / "z").write_bytes((tmp_path / "y").read_bytes()[:-8])
    with pytest.raises(ModelFormatError, match="truncated"):
        load(tmp_path / "z")


def test_unknown_kind(tmp_path):
    save(tmp_path / "x", {"kind": "ngram9000"}, {})
    with pytest.raises(ModelFormatError, match="unknown model kind"):
        load_model(tmp_path / "x")
