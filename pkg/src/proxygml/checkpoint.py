"""Binary checkpoint container.

Layout (little-endian)::

    b"PGCK"  u32 version  u32 c  u32 n  u32 d_in  u32 d_out  u8 head_kind
    f64[c*n*d_out] proxies            row-major
    f64[d_in*d_out] head weight       linear heads only
    zero or more tagged sections, currently only b"ADAM":
        u32 group_count, then per group:
        u8 name_len, name, u32 t, f64 base_lr, u32 size, u8 has_buffers,
        f64[size] m, f64[size] v      when has_buffers
    u32 crc32 of every byte between the magic and this tail
"""
import io
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import IntegrityError
from .model import EmbeddingHead, ProxySet, proxy_labels_for
from .optim import AdamState

MAGIC = b"PGCK"
VERSION = 1
HEAD_KINDS = {"identity": 0, "linear": 1}
HEAD_NAMES = {v: k for k, v in HEAD_KINDS.items()}


def _f64(a):
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def dumps(proxies, head, optim_states=None):
    c, n = proxies.num_classes, proxies.per_class
    body = io.BytesIO()
    body.write(struct.pack("<IIIIIB", VERSION, c, n, head.d_in, head.d_out, HEAD_KINDS[head.kind]))
    body.write(_f64(proxies.raw))
    if head.kind == "linear":
        body.write(_f64(head.weight))
    if optim_states:
        body.write(b"ADAM")
        body.write(struct.pack("<I", len(optim_states)))
        for name, st in optim_states.items():
            raw_name = name.encode()
            size = 0 if st.m is None else st.m.size
            body.write(struct.pack("<B", len(raw_name)) + raw_name)
            body.write(struct.pack("<IdIB", st.t, st.base_lr, size, st.m is not None))
            if st.m is not None:
                body.write(_f64(st.m) + _f64(st.v))
    payload = body.getvalue()
    return MAGIC + payload + struct.pack("<I", zlib.crc32(payload))


class _Reader:
    def __init__(self, buf):
        self.buf, self.pos = buf, 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise IntegrityError(f"checkpoint truncated at offset {self.pos + 4}")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count, shape=None):
        a = np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)
        return a.reshape(shape) if shape else a


def loads(data):
    """Returns ``(proxies, head, optim_states)``."""
    if len(data) < 8 or data[:4] != MAGIC:
        raise IntegrityError("not a checkpoint: bad magic")
    payload, (crc,) = data[4:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(payload) != crc:
        raise IntegrityError("checkpoint CRC mismatch: file is corrupted")
    r = _Reader(payload)
    version, c, n, d_in, d_out, kind = r.unpack("<IIIIIB")
    if version != VERSION:
        raise IntegrityError(f"unsupported checkpoint version {version}")
    if kind not in HEAD_NAMES:
        raise IntegrityError(f"unknown head kind code {kind}")
    proxies = ProxySet(raw=r.floats(c * n * d_out, (c * n, d_out)),
                       proxy_labels=proxy_labels_for(c, n), num_classes=c, per_class=n)
    weight = r.floats(d_in * d_out, (d_in, d_out)) if HEAD_NAMES[kind] == "linear" else None
    head = EmbeddingHead(HEAD_NAMES[kind], d_in, d_out, weight)
    shapes = {"proxies": proxies.raw.shape, "head": (d_in, d_out)}
    states = {}
    while r.pos < len(payload):
        tag = r.take(4)
        if tag != b"ADAM":
            raise IntegrityError(f"unknown section {tag!r}")
        (groups,) = r.unpack("<I")
        for _ in range(groups):
            (name_len,) = r.unpack("<B")
            name = r.take(name_len).decode()
            t, base_lr, size, has = r.unpack("<IdIB")
            st = AdamState(base_lr=base_lr, t=t)
            if has:
                shape = shapes.get(name, (size,))
                st.m, st.v = r.floats(size, shape), r.floats(size, shape)
            states[name] = st
    return proxies, head, states


def save(path, proxies, head, optim_states=None):
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(proxies, head, optim_states))
    tmp.replace(path)


def load(path):
    return loads(Path(path).read_bytes())
