"""Checkpoint container: named float32 parameters plus the architecture.

Byte layout: 8-byte magic, u32 little-endian format version, u64
little-endian JSON header length, JSON header (architecture and a parameter
directory of name/shape/offset/nbytes), then the concatenated little-endian
float32 payloads. Offsets are relative to the payload start.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import (
    AlphaOutOfRange,
    BadMagic,
    CorruptDirectory,
    IncompatibleCheckpoint,
    VersionUnsupported,
)
from .generator import GeneratorConfig, parameter_shapes

MAGIC = b"SRGENCKP"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """Ordered parameter store for one generator architecture."""

    params: dict[str, np.ndarray]
    config: GeneratorConfig

    def validate(self):
        """Raise IncompatibleCheckpoint unless params exactly fit the config."""
        expected = parameter_shapes(self.config)
        missing = [n for n in expected if n not in self.params]
        extra = [n for n in self.params if n not in expected]
        if missing:
            raise IncompatibleCheckpoint(f"missing parameters: {missing[:5]}")
        if extra:
            raise IncompatibleCheckpoint(f"unexpected parameters: {extra[:5]}")
        for name, shape in expected.items():
            have = tuple(self.params[name].shape)
            if have != shape:
                raise IncompatibleCheckpoint(
                    f"parameter {name} has shape {have}, expected {shape}"
                )

    def copy(self) -> "Checkpoint":
        return Checkpoint(
            params={n: p.copy() for n, p in self.params.items()},
            config=self.config,
        )


def save_checkpoint(ckpt: Checkpoint) -> bytes:
    directory = []
    payload = bytearray()
    for name, array in ckpt.params.items():
        data = np.ascontiguousarray(array, dtype="<f4").tobytes()
        directory.append({
            "name": name,
            "shape": list(array.shape),
            "offset": len(payload),
            "nbytes": len(data),
        })
        payload += data
    header = json.dumps(
        {"config": ckpt.config.to_dict(), "params": directory},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    return (
        MAGIC
        + struct.pack("<I", FORMAT_VERSION)
        + struct.pack("<Q", len(header))
        + header
        + bytes(payload)
    )


def load_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < len(MAGIC) + 12 or data[:len(MAGIC)] != MAGIC:
        raise BadMagic("not a generator checkpoint container")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"container version {version}, expected {FORMAT_VERSION}")
    (header_len,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    if pos + header_len > len(data):
        raise CorruptDirectory("header length exceeds file size")
    try:
        header = json.loads(data[pos:pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptDirectory(f"unreadable header: {exc}") from exc
    pos += header_len
    payload = data[pos:]

    try:
        config = GeneratorConfig.from_dict(header["config"])
        directory = header["params"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptDirectory(f"invalid header contents: {exc}") from exc

    params: dict[str, np.ndarray] = {}
    for entry in directory:
        name = entry["name"]
        shape = tuple(int(v) for v in entry["shape"])
        offset = int(entry["offset"])
        nbytes = int(entry["nbytes"])
        expected = int(np.prod(shape)) * 4 if shape else 4
        if offset < 0 or nbytes < 0 or offset + nbytes > len(payload):
            raise CorruptDirectory(
                f"parameter {name}: [{offset}, {offset + nbytes}) outside payload "
                f"of {len(payload)} bytes"
            )
        if nbytes != expected:
            raise CorruptDirectory(
                f"parameter {name}: {nbytes} bytes inconsistent with shape {shape}"
            )
        if name in params:
            raise CorruptDirectory(f"duplicate parameter name {name}")
        arr = np.frombuffer(payload, dtype="<f4", count=nbytes // 4, offset=offset)
        params[name] = arr.reshape(shape).copy()
    return Checkpoint(params=params, config=config)


def interpolate_checkpoints(psnr: Checkpoint, gan: Checkpoint,
                            alpha: float) -> Checkpoint:
    """Element-wise blend (1 - alpha) * psnr + alpha * gan.

    Endpoints alpha = 0 and alpha = 1 return bit-exact copies of the
    respective input.
    """
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must be in [0, 1], got {alpha}")
    if psnr.config != gan.config:
        raise IncompatibleCheckpoint(
            f"architectures differ: {psnr.config} vs {gan.config}"
        )
    if list(psnr.params.keys()) != list(gan.params.keys()):
        raise IncompatibleCheckpoint("parameter name sets differ")
    for name in psnr.params:
        if psnr.params[name].shape != gan.params[name].shape:
            raise IncompatibleCheckpoint(f"parameter {name} shapes differ")
    if alpha == 0.0:
        return psnr.copy()
    if alpha == 1.0:
        return gan.copy()
    blended = {
        name: ((1.0 - alpha) * psnr.params[name].astype(np.float64)
               + alpha * gan.params[name].astype(np.float64)).astype(np.float32)
        for name in psnr.params
    }
    return Checkpoint(params=blended, config=psnr.config)
