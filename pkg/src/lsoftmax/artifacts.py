"""On-disk artifacts written by training runs.

``final_params.bin`` layout (all integers little-endian)::

    b"LMSX"   magic
    u32       format version (1)
    u32       entry count
    per entry:
        u16   name length, then the UTF-8 name
        u32   ndim, then ndim u32 extents
    payloads: every entry's float64 values, little-endian, row-major, in table order
"""

import csv
import logging
import struct
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from .exceptions import ParamsFormatError
from .optim import IterationRecord

PARAMS_MAGIC = b"LMSX"
PARAMS_VERSION = 1
METRICS_COLUMNS = ["iteration", "lambda", "learning_rate", "train_loss", "val_error"]

logger = logging.getLogger("lsoftmax")


# PARAMETER TABLES


def serialize_params(params: Dict[str, np.ndarray]) -> bytes:
    header = [PARAMS_MAGIC, struct.pack("<II", PARAMS_VERSION, len(params))]
    payloads = []
    for name, value in params.items():
        encoded = name.encode("utf-8")
        value = np.asarray(value, dtype=np.float64)
        header.append(struct.pack("<H", len(encoded)) + encoded)
        header.append(struct.pack(f"<I{value.ndim}I", value.ndim, *value.shape))
        payloads.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(header + payloads)


def _unpack(fmt: str, payload: bytes, offset: int):
    try:
        return struct.unpack_from(fmt, payload, offset), offset + struct.calcsize(fmt)
    except struct.error as error:
        raise ParamsFormatError(f"Parameter file truncated at byte {offset}") from error


def parse_params(payload: bytes) -> Dict[str, np.ndarray]:
    """Inverse of :func:`serialize_params`; values round-trip bit for bit."""
    if payload[:4] != PARAMS_MAGIC:
        raise ParamsFormatError(f"Bad magic {payload[:4]!r}, expected {PARAMS_MAGIC!r}")
    (version, count), offset = _unpack("<II", payload, 4)
    if version != PARAMS_VERSION:
        raise ParamsFormatError(f"Unsupported parameter file version {version}")

    table = []
    for _ in range(count):
        (length,), offset = _unpack("<H", payload, offset)
        if offset + length > len(payload):
            raise ParamsFormatError(f"Parameter name truncated at byte {len(payload)}")
        try:
            name = payload[offset : offset + length].decode("utf-8")
        except UnicodeDecodeError as error:
            raise ParamsFormatError(f"Parameter name at byte {offset} is not UTF-8") from error
        offset += length
        (ndim,), offset = _unpack("<I", payload, offset)
        shape, offset = _unpack(f"<{ndim}I", payload, offset)
        table.append((name, shape))

    params = {}
    for name, shape in table:
        size = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * size
        if end > len(payload):
            raise ParamsFormatError(f"Payload of '{name}' truncated at byte {len(payload)}")
        params[name] = np.frombuffer(payload, dtype="<f8", count=size, offset=offset).reshape(
            shape
        ).astype(np.float64)
        offset = end
    if offset != len(payload):
        raise ParamsFormatError(f"{len(payload) - offset} trailing bytes after the last payload")
    return params


def write_params(params: Dict[str, np.ndarray], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize_params(params))
    logger.info("WriteParams %s entries=%s", path, len(params))
    return path


def read_params(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    return parse_params(Path(path).read_bytes())


# METRICS LOG


def write_metrics(records: List[IterationRecord], path: Union[str, Path]) -> Path:
    """One row per iteration; ``val_error`` is left blank when it was not evaluated."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fobj:
        writer = csv.writer(fobj, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for record in records:
            writer.writerow(
                [
                    record.iteration,
                    repr(float(record.lambda_)),
                    repr(float(record.learning_rate)),
                    repr(float(record.train_loss)),
                    "" if record.val_error is None else repr(float(record.val_error)),
                ]
            )
    logger.info("WriteMetrics %s rows=%s", path, len(records))
    return path


def read_metrics(path: Union[str, Path]) -> List[IterationRecord]:
    with open(path, "r", newline="") as fobj:
        reader = csv.DictReader(fobj)
        if reader.fieldnames != METRICS_COLUMNS:
            raise ParamsFormatError(f"{path} has columns {reader.fieldnames}")
        return [
            IterationRecord(
                iteration=int(row["iteration"]),
                lambda_=float(row["lambda"]),
                learning_rate=float(row["learning_rate"]),
                train_loss=float(row["train_loss"]),
                val_error=float(row["val_error"]) if row["val_error"] else None,
            )
            for row in reader
        ]
