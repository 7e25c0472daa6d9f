"""Reader and writer for the IDX container used by the MNIST distribution.

Layout (all integers big-endian)::

    offset  type     description
    0       u32      magic: 0x00000800 | ndim, element type u8
    4       u32[n]   dimension sizes
    4+4n    u8[]     payload, row-major
"""

import gzip
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..exceptions import BadMagic, DimensionMismatch, TruncatedPayload

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
_KNOWN_MAGIC = {IMAGES_MAGIC: 3, LABELS_MAGIC: 1}


def parse_idx(payload: bytes) -> np.ndarray:
    """Decode an IDX byte string into a ``uint8`` array with the declared dimensions.

    Raises ``BadMagic``, ``TruncatedPayload`` or ``DimensionMismatch``; each names the byte
    offset where decoding failed.
    """
    if len(payload) < 4:
        raise TruncatedPayload("IDX header ends before the magic number", offset=len(payload))
    (magic,) = struct.unpack_from(">I", payload, 0)
    if magic not in _KNOWN_MAGIC:
        raise BadMagic(f"Unsupported IDX magic 0x{magic:08x}", offset=0)

    ndim = _KNOWN_MAGIC[magic]
    header_size = 4 + 4 * ndim
    if len(payload) < header_size:
        raise TruncatedPayload("IDX header ends before all dimension sizes", offset=len(payload))
    dims = struct.unpack_from(f">{ndim}I", payload, 4)
    if ndim == 3 and (dims[1] == 0 or dims[2] == 0):
        raise DimensionMismatch(f"IDX image dimensions {dims} contain a zero extent", offset=8)

    expected = int(np.prod(dims, dtype=np.int64))
    available = len(payload) - header_size
    if available < expected:
        raise TruncatedPayload(
            f"IDX payload declares {expected} bytes but only {available} are present",
            offset=len(payload),
        )
    if available > expected:
        raise DimensionMismatch(
            f"IDX payload has {available - expected} bytes beyond the declared dimensions {dims}",
            offset=header_size + expected,
        )
    data = np.frombuffer(payload, dtype=np.uint8, count=expected, offset=header_size)
    return data.reshape(dims).copy()


def serialize_idx(array: np.ndarray) -> bytes:
    """Encode a 1-D (labels) or 3-D (images) ``uint8`` array as IDX bytes."""
    array = np.asarray(array)
    if array.dtype != np.uint8 or array.ndim not in (1, 3):
        raise DimensionMismatch(
            f"IDX writer needs a 1-D or 3-D uint8 array, got {array.ndim}-D {array.dtype}",
            offset=0,
        )
    magic = LABELS_MAGIC if array.ndim == 1 else IMAGES_MAGIC
    header = struct.pack(f">I{array.ndim}I", magic, *array.shape)
    return header + np.ascontiguousarray(array).tobytes()


def read_idx_file(path: Union[str, Path]) -> np.ndarray:
    """Read a plain or gzip-compressed (``.gz``) IDX file."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fobj:
        return parse_idx(fobj.read())


def images_to_tensor(images: np.ndarray) -> np.ndarray:
    """``N × H × W`` bytes to an ``N × 1 × H × W`` float tensor scaled to [0, 1]."""
    return images.astype(np.float64)[:, None, :, :] / 255.0
