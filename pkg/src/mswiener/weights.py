"""Framework-neutral binary weight container ("WNB1").

Layout, all little-endian:

    magic   4 bytes  "WNB1"
    role    u8       0 = sigma network, 1 = coring network
    depth   u8       conv-layer count (total across stages for coring nets)
    width   u16      channels per hidden layer
    count   u32      tensor record count
    records          u8 kind, u32 ndim, ndim * u32 dims, raw float32 payload
    crc     u32      CRC32 of every preceding byte

Record kinds: 0 conv weight, 1 conv bias, 2 BN gamma, 3 BN beta,
4 BN running mean, 5 BN running variance.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import DataError

MAGIC = b"WNB1"

ROLE_SIGMA = 0
ROLE_CORING = 1

KIND_CONV_WEIGHT = 0
KIND_CONV_BIAS = 1
KIND_BN_GAMMA = 2
KIND_BN_BETA = 3
KIND_BN_MEAN = 4
KIND_BN_VAR = 5

KIND_NAMES = {
    KIND_CONV_WEIGHT: "conv.weight",
    KIND_CONV_BIAS: "conv.bias",
    KIND_BN_GAMMA: "bn.gamma",
    KIND_BN_BETA: "bn.beta",
    KIND_BN_MEAN: "bn.mean",
    KIND_BN_VAR: "bn.var",
}


@dataclass
class WeightBundle:
    role: int
    depth: int
    channels: int
    records: list  # [(kind, float32 ndarray), ...] in layer order

    def tensor_count(self) -> int:
        return len(self.records)

    def value_count(self) -> int:
        return int(sum(arr.size for _, arr in self.records))


def write_bundle(bundle: WeightBundle, path: str) -> None:
    body = bytearray()
    body += MAGIC
    body += struct.pack("<BBHI", bundle.role, bundle.depth, bundle.channels, len(bundle.records))
    for kind, arr in bundle.records:
        arr = np.ascontiguousarray(arr, dtype="<f4")
        body += struct.pack("<BI", kind, arr.ndim)
        body += struct.pack(f"<{arr.ndim}I", *arr.shape)
        body += arr.tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(body))


def read_bundle(path: str) -> WeightBundle:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read weight bundle {path}: {exc}") from exc
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise DataError(f"{path}: not a WNB1 weight bundle")
    (crc_stored,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != crc_stored:
        raise DataError(f"{path}: CRC32 mismatch, bundle is corrupt")
    role, depth, channels, count = struct.unpack_from("<BBHI", raw, 4)
    offset = 12
    records = []
    for i in range(count):
        kind, ndim = struct.unpack_from("<BI", raw, offset)
        offset += 5
        shape = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f4", count=size, offset=offset).reshape(shape)
        offset += 4 * size
        records.append((kind, arr.copy()))
    if offset != len(raw) - 4:
        raise DataError(f"{path}: trailing bytes after record {count}")
    return WeightBundle(role=role, depth=depth, channels=channels, records=records)


def validate_records(bundle: WeightBundle, expected: list, context: str) -> None:
    """Check record kinds and shapes against an expected (kind, shape) list."""
    if len(bundle.records) != len(expected):
        raise DataError(
            f"{context}: bundle has {len(bundle.records)} tensors, expected {len(expected)}"
        )
    for i, ((kind, arr), (want_kind, want_shape)) in enumerate(zip(bundle.records, expected)):
        if kind != want_kind or tuple(arr.shape) != tuple(want_shape):
            raise DataError(
                f"{context}: record {i} is {KIND_NAMES.get(kind, kind)}{tuple(arr.shape)}, "
                f"expected {KIND_NAMES.get(want_kind, want_kind)}{tuple(want_shape)}"
            )
