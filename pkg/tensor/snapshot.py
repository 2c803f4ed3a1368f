"""Binary snapshot format for named float64 arrays.

Layout (all integers little-endian uint64 unless noted):

    magic      8 bytes  b"CGSNAP01"
    version    uint32   SNAPSHOT_VERSION
    count      uint64   number of tensors
    per tensor:
        name_len   uint64
        name       name_len bytes, UTF-8
        rank       uint64
        extents    rank x uint64
        data       product(extents) x float64 (little-endian, row-major)
"""

import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from utils.exceptions import DataError

MAGIC = b"CGSNAP01"
SNAPSHOT_VERSION = 1

PathLike = Union[str, Path]


def save_tensors(path: PathLike, tensors: Mapping[str, np.ndarray]) -> Path:
    """
    Write named arrays to ``path``.

    Args:
        path: Destination file
        tensors: Ordered mapping of name to array (order is preserved on disk)

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", SNAPSHOT_VERSION))
        f.write(struct.pack("<Q", len(tensors)))
        for name, array in tensors.items():
            encoded = name.encode("utf-8")
            array = np.require(array, dtype="<f8", requirements="C")
            f.write(struct.pack("<Q", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<Q", array.ndim))
            if array.ndim:
                f.write(struct.pack(f"<{array.ndim}Q", *array.shape))
            f.write(array.tobytes(order="C"))
    return path


def _read_exact(f, size: int, path: Path) -> bytes:
    chunk = f.read(size)
    if len(chunk) != size:
        raise DataError(f"{path}: truncated snapshot")
    return chunk


def load_tensors(path: PathLike) -> Dict[str, np.ndarray]:
    """
    Read a snapshot written by ``save_tensors``.

    Raises:
        DataError: missing file, bad magic, unsupported version or truncation
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: snapshot not found")
    tensors: Dict[str, np.ndarray] = {}
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise DataError(f"{path}: not a tensor snapshot (bad magic {magic!r})")
        (version,) = struct.unpack("<I", _read_exact(f, 4, path))
        if version != SNAPSHOT_VERSION:
            raise DataError(
                f"{path}: snapshot version {version} is not supported (expected {SNAPSHOT_VERSION})"
            )
        (count,) = struct.unpack("<Q", _read_exact(f, 8, path))
        for _ in range(count):
            (name_len,) = struct.unpack("<Q", _read_exact(f, 8, path))
            name = _read_exact(f, name_len, path).decode("utf-8")
            (rank,) = struct.unpack("<Q", _read_exact(f, 8, path))
            shape = struct.unpack(f"<{rank}Q", _read_exact(f, 8 * rank, path)) if rank else ()
            size = int(np.prod(shape)) if shape else 1
            raw = _read_exact(f, 8 * size, path)
            tensors[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    return tensors
