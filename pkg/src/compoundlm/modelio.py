"""Versioned single-file model container.

Layout: 8-byte magic, uint32 format version, uint64 header length, a JSON
header (sorted keys, no whitespace) and then the raw little-endian bytes of
every array in header order.  Identical models give identical bytes.
"""
import json
import struct

import numpy as np

MAGIC = b"CMPDLM\x00\x01"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def save(path, header, arrays):
    specs, blobs = [], []
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        if a.dtype.byteorder == ">":
            a = a.astype(a.dtype.newbyteorder("<"))
        specs.append([name, a.dtype.str, list(a.shape)])
        blobs.append(a.tobytes())
    head = dict(header, arrays=specs)
    js = json.dumps(head, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(js)))
        fh.write(js)
        for b in blobs:
            fh.write(b)


def load(path):
    """Return (header, {name: array})."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{path}: not a model file")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<IQ", buf, off)
    if version > FORMAT_VERSION:
        raise ModelFormatError(f"{path}: format version {version} is newer than supported "
                               f"version {FORMAT_VERSION}; upgrade the package")
    off += struct.calcsize("<IQ")
    header = json.loads(buf[off:off + hlen].decode())
    off += hlen
    arrays = {}
    for name, dt, shape in header.pop("arrays"):
        dt = np.dtype(dt)
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dt.itemsize
        if off + nbytes > len(buf):
            raise ModelFormatError(f"{path}: truncated at array {name!r}")
        arrays[name] = np.frombuffer(buf, dt, count, off).reshape(shape).copy()
        off += nbytes
    return header, arrays


def save_model(path, model, hits=None, extra=None):
    arrs = dict(model.to_arrays())
    if hits is not None:
        arrs.update(hits.to_arrays("hit_"))
    header = dict(model.header())
    if extra:
        header["extra"] = extra
    save(path, header, arrs)


def load_model(path):
    """Return (model, HitLengthIndex or None, header)."""
    from .evaluation import HitLengthIndex
    from .hpylm import HPYLM
    from .hpylmc import HPYLMC
    from .mkn import MKN
    header, arrs = load(path)
    kinds = {"hpylm": HPYLM, "hpylmc": HPYLMC, "mkn": MKN}
    kind = header.get("kind")
    if kind not in kinds:
        raise ModelFormatError(f"{path}: unknown model kind {kind!r}")
    model = kinds[kind].from_parts(header, arrs)
    hits = HitLengthIndex.from_arrays(arrs, "hit_") if "hit_order" in arrs else None
    return model, hits, header
