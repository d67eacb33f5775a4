"""``VOXF`` container for multi-channel feature maps.

Layout (all little-endian)::

    offset  size  field
    0       4     magic  b"VOXF"
    4       4     version (u32, currently 1)
    8       12    dims X, Y, Z (3 x u32)
    20      4     channels C (u32)
    24      4     dtype tag b"f32\\0"
    28      12    spacing in mm (3 x f32)
    40      ...   X*Y*Z*C float32 values

Values are ordered with the channel index fastest, then x, then y, then z:
flat index ``((z * Y + y) * X + x) * C + c``.
"""

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import (BadMagicError, FormatError, ShapeError, TruncatedFileError,
                      UnsupportedDatatypeError)

MAGIC = b"VOXF"
VERSION = 1
DTYPE_TAG = b"f32\x00"
_HEADER = struct.Struct("<4sI3II4s3f")
HEADER_SIZE = _HEADER.size


@dataclass
class FeatureFile:
    data: np.ndarray  # (X, Y, Z, C) float32
    spacing: tuple = (1.0, 1.0, 1.0)


def write_feat(feat, path, spacing=(1.0, 1.0, 1.0)):
    """Store an ``(X, Y, Z, C)`` (or scalar ``(X, Y, Z)``) array as float32."""
    data = np.asarray(feat.data if isinstance(feat, FeatureFile) else feat)
    if isinstance(feat, FeatureFile):
        spacing = feat.spacing
    if data.ndim == 3:
        data = data[..., None]
    if data.ndim != 4:
        raise ShapeError(f"feature maps must be (X, Y, Z, C), got {data.shape}")
    X, Y, Z, C = data.shape
    head = _HEADER.pack(MAGIC, VERSION, X, Y, Z, C, DTYPE_TAG, *map(float, spacing))
    body = np.ascontiguousarray(data.transpose(2, 1, 0, 3), dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(body)


def read_feat(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read feature file: {exc}") from exc
    if len(raw) < HEADER_SIZE:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes is shorter than a VOXF header")
    magic, version, X, Y, Z, C, tag, *spacing = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad feature-file magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported VOXF version {version}")
    if tag != DTYPE_TAG:
        raise UnsupportedDatatypeError(f"{path}: unsupported dtype tag {tag!r}")
    if min(X, Y, Z, C) < 1:
        raise FormatError(f"{path}: empty grid {X}x{Y}x{Z}x{C}")
    count = X * Y * Z * C
    if len(raw) != HEADER_SIZE + 4 * count:
        raise TruncatedFileError(
            f"{path}: payload is {len(raw) - HEADER_SIZE} bytes, expected {4 * count}")
    flat = np.frombuffer(raw, dtype="<f4", count=count, offset=HEADER_SIZE)
    data = flat.reshape(Z, Y, X, C).transpose(2, 1, 0, 3).astype(np.float32)
    return FeatureFile(np.ascontiguousarray(data), tuple(float(s) for s in spacing))
