"""Flat binary weight snapshots with a content checksum.

Layout: magic, little-endian uint32 header length, JSON header listing
(name, shape) per parameter in order, raw little-endian float64 payload,
then a trailing sha256 digest of everything before it.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from trendlag.nn.layers import Network

MAGIC = b"TLW1"


def weights_to_bytes(network: Network) -> bytes:
    params = network.parameters()
    header = json.dumps(
        [{"name": p.name, "shape": list(p.value.shape)} for p in params],
        separators=(",", ":"),
    ).encode()
    payload = b"".join(np.ascontiguousarray(p.value, dtype="<f8").tobytes() for p in params)
    body = MAGIC + struct.pack("<I", len(header)) + header + payload
    return body + hashlib.sha256(body).digest()


def weight_checksum(network: Network) -> str:
    """Hex digest identifying the exact weight values (determinism audits)."""
    return hashlib.sha256(weights_to_bytes(network)).hexdigest()


def save_weights(network: Network, path: str | Path) -> None:
    Path(path).write_bytes(weights_to_bytes(network))


def load_weights(network: Network, path: str | Path) -> None:
    """Restore a snapshot into an identically-shaped network; verifies checksum."""
    blob = Path(path).read_bytes()
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ValueError(f"weight snapshot {path} failed its checksum")
    if body[:4] != MAGIC:
        raise ValueError(f"{path} is not a weight snapshot (bad magic)")
    (header_len,) = struct.unpack("<I", body[4:8])
    header = json.loads(body[8 : 8 + header_len].decode())
    offset = 8 + header_len
    params = network.parameters()
    if [p.name for p in params] != [h["name"] for h in header]:
        raise ValueError(f"snapshot {path} does not match the network's layer table")
    for param, entry in zip(params, header):
        shape = tuple(entry["shape"])
        if param.value.shape != shape:
            raise ValueError(
                f"snapshot shape {shape} != parameter {param.name} shape {param.value.shape}"
            )
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(body, dtype="<f8", count=count, offset=offset)
        offset += 8 * count
        param.value = data.reshape(shape).astype(np.float64)
        param.grad = np.zeros_like(param.value)
