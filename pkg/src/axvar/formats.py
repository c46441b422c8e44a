"""On-disk formats: tensor files and binary PGM images.

Tensor file layout::

    b"AXIM"                       magic
    uint32 little-endian          header length in bytes
    UTF-8 header                  ``key=value`` lines (ndim, dims, order, dtype, tag)
    float64 little-endian values  payload

2D images are stored column-major. A 3-axis tensor with dims
``[count, rows, cols]`` (a kernel stack is ``[m_t, m_k, n_k]``) stores its
``count`` slices one after another, each slice column-major, so the
fastest axis is ``rows``, then ``cols``, then the slice index.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

MAGIC = b"AXIM"
TAGS = ("trf", "rf", "kernel-stack", "map", "reconstruction")


class FormatError(ValueError):
    pass


@dataclass
class TensorFile:
    data: np.ndarray
    tag: Optional[str] = None
    extra: Dict[str, str] = field(default_factory=dict)


def _payload(a: np.ndarray) -> bytes:
    if a.ndim == 2:
        flat = a.ravel(order="F")
    elif a.ndim == 3:
        flat = np.ascontiguousarray(a.transpose(0, 2, 1)).ravel()
    elif a.ndim == 1:
        flat = a
    else:
        raise FormatError(f"unsupported tensor rank {a.ndim}")
    return np.asarray(flat, dtype="<f8").tobytes()


def encode_tensor(data, tag: Optional[str] = None, extra: Optional[Dict[str, str]] = None) -> bytes:
    a = np.asarray(data, dtype=np.float64)
    if tag is not None and tag not in TAGS:
        raise FormatError(f"unknown tag {tag!r}")
    lines = [
        f"ndim={a.ndim}",
        "dims=" + ",".join(str(d) for d in a.shape),
        "order=col-major",
        "dtype=f64",
    ]
    if tag is not None:
        lines.append(f"tag={tag}")
    for k, v in (extra or {}).items():
        if "=" in k or "\n" in k or "\n" in str(v):
            raise FormatError(f"bad header entry {k!r}")
        lines.append(f"{k}={v}")
    header = ("\n".join(lines) + "\n").encode("utf-8")
    return MAGIC + struct.pack("<I", len(header)) + header + _payload(a)


def decode_tensor(buf: bytes) -> TensorFile:
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise FormatError("not a tensor file (bad magic)")
    (hlen,) = struct.unpack("<I", buf[4:8])
    if len(buf) < 8 + hlen:
        raise FormatError("truncated header")
    try:
        text = buf[8:8 + hlen].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"header is not UTF-8: {exc}") from None
    meta = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        if "=" not in line:
            raise FormatError(f"malformed header line {line!r}")
        k, v = line.split("=", 1)
        meta[k.strip()] = v.strip()
    try:
        ndim = int(meta.pop("ndim"))
        dims = tuple(int(d) for d in meta.pop("dims").split(","))
        order = meta.pop("order")
        dtype = meta.pop("dtype")
    except (KeyError, ValueError) as exc:
        raise FormatError(f"incomplete header: {exc}") from None
    if order != "col-major" or dtype != "f64":
        raise FormatError(f"unsupported order/dtype {order}/{dtype}")
    if len(dims) != ndim or any(d < 0 for d in dims):
        raise FormatError(f"dims {dims} inconsistent with ndim={ndim}")
    count = int(np.prod(dims, dtype=np.int64))
    payload = buf[8 + hlen:]
    if len(payload) != 8 * count:
        raise FormatError(f"payload is {len(payload)} bytes, expected {8 * count}")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if ndim == 2:
        data = flat.reshape(dims, order="F")
    elif ndim == 3:
        data = flat.reshape((dims[0], dims[2], dims[1])).transpose(0, 2, 1).copy()
    elif ndim == 1:
        data = flat
    else:
        raise FormatError(f"unsupported tensor rank {ndim}")
    tag = meta.pop("tag", None)
    return TensorFile(data=data, tag=tag, extra=meta)


def write_tensor(path, data, tag: Optional[str] = None, extra: Optional[Dict[str, str]] = None):
    Path(path).write_bytes(encode_tensor(data, tag, extra))


def read_tensor(path) -> TensorFile:
    return decode_tensor(Path(path).read_bytes())


def write_pgm(path, img):
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise FormatError("PGM output needs a 2D uint8 image")
    rows, cols = img.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    Path(path).write_bytes(header + np.ascontiguousarray(img).tobytes())


def read_pgm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        fields.append(buf[start:pos])
    if fields[0] != b"P5" or int(fields[3]) != 255:
        raise FormatError("only 8-bit binary PGM (P5) is supported")
    cols, rows = int(fields[1]), int(fields[2])
    data = buf[pos + 1:]
    if len(data) != rows * cols:
        raise FormatError("PGM payload size mismatch")
    return np.frombuffer(data, dtype=np.uint8).reshape(rows, cols).copy()
