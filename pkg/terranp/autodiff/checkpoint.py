"""
SNPM checkpoints, little-endian::

    magic "SNPM" | u32 version | u32 tensor count
    per tensor: u16 name length | UTF-8 name | u8 rank | rank x u32 dims | f64 payload
"""
import logging
import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from terranp.core.exceptions import DataError

logger = logging.getLogger(__name__)

MAGIC = b"SNPM"
VERSION = 1

_HEADER = struct.Struct("<4sII")
_NAME = struct.Struct("<H")
_RANK = struct.Struct("<B")


def dumps_checkpoint(tensors: Mapping[str, np.ndarray]) -> bytes:
    chunks = [_HEADER.pack(MAGIC, VERSION, len(tensors))]
    for name, value in tensors.items():
        encoded = name.encode("utf-8")
        value = np.asarray(value, dtype=np.float64)
        chunks.append(_NAME.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_RANK.pack(value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(chunks)


def loads_checkpoint(data: bytes, source: str = "<bytes>") -> Dict[str, np.ndarray]:
    view = memoryview(data)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise DataError(f"{source}: truncated checkpoint")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    magic, version, count = _HEADER.unpack(take(_HEADER.size))
    if magic != MAGIC:
        raise DataError(f"{source}: not a SNPM checkpoint")
    if version != VERSION:
        raise DataError(f"{source}: unsupported checkpoint version {version}")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (length,) = _NAME.unpack(take(_NAME.size))
        try:
            name = bytes(take(length)).decode("utf-8")
        except UnicodeDecodeError as e:
            raise DataError(f"{source}: bad tensor name") from e
        (rank,) = _RANK.unpack(take(_RANK.size))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(shape)) if rank else 1
        tensors[name] = np.frombuffer(take(8 * size), dtype="<f8").astype(np.float64).reshape(shape)
    if pos != len(view):
        raise DataError(f"{source}: trailing bytes after the last tensor")
    return tensors


def save_checkpoint(path: Union[str, Path], tensors: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(dumps_checkpoint(tensors))
    except OSError as e:
        raise DataError(f"can't write checkpoint {path}: {e}") from e
    logger.info("saved %d tensors to %s", len(tensors), path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DataError(f"can't read checkpoint {path}: {e}") from e
    return loads_checkpoint(data, source=str(path))
