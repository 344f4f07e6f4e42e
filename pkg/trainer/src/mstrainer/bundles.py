"""Reader/writer for the framework-neutral "WNB1" weight container.

This is the interchange file format between the trainer and the inference
engine; the two sides share only these bytes, so the layout is implemented
independently here. All fields are little-endian:

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

MAGIC = b"WNB1"

ROLE_SIGMA = 0
ROLE_CORING = 1

KIND_CONV_WEIGHT = 0
KIND_CONV_BIAS = 1
KIND_BN_GAMMA = 2
KIND_BN_BETA = 3
KIND_BN_MEAN = 4
KIND_BN_VAR = 5


class BundleError(ValueError):
    pass


@dataclass
class Bundle:
    role: int
    depth: int
    channels: int
    records: list  # [(kind, float32 ndarray), ...] in layer order


def write_bundle(bundle: Bundle, path) -> None:
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<BBHI", bundle.role, bundle.depth, bundle.channels,
                           len(bundle.records))
    for kind, arr in bundle.records:
        arr = np.ascontiguousarray(arr, dtype="<f4")
        payload += struct.pack("<BI", kind, arr.ndim)
        payload += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += arr.tobytes()
    payload += struct.pack("<I", zlib.crc32(bytes(payload)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(payload))


def read_bundle(path) -> Bundle:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise BundleError(f"{path}: not a WNB1 weight bundle")
    (stored_crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise BundleError(f"{path}: CRC mismatch, file is corrupt")
    role, depth, channels, count = struct.unpack("<BBHI", raw[4:12])
    offset = 12
    records = []
    for _ in range(count):
        kind, ndim = struct.unpack("<BI", raw[offset : offset + 5])
        offset += 5
        shape = struct.unpack(f"<{ndim}I", raw[offset : offset + 4 * ndim])
        offset += 4 * ndim
        size = int(np.prod(shape)) * 4
        arr = np.frombuffer(raw[offset : offset + size], dtype="<f4").reshape(shape)
        offset += size
        records.append((kind, arr.copy()))
    if offset != len(raw) - 4:
        raise BundleError(f"{path}: trailing bytes after the last record")
    return Bundle(role=role, depth=depth, channels=channels, records=records)
