"""Single-file NIfTI-1 (``.nii`` / ``.nii.gz``) reading and writing.

Only what registration needs is interpreted: dimensions, voxel sizes,
datatype, intensity scaling and the vector-field layout (``dim[0] = 5``,
``dim[5] = 3``). Every other header field, orientation included, is kept
verbatim so a read-modify-write cycle preserves it.

Written files are little-endian with the data at byte 352. Big-endian
files are detected from ``sizeof_hdr`` and read correctly.
"""

import gzip
from dataclasses import dataclass

import numpy as np

from ..errors import (BadMagicError, FormatError, ShapeError, TruncatedFileError,
                      UnsupportedDatatypeError, UnsupportedFormatError)

HEADER_SIZE = 348
VOX_OFFSET = 352
INTENT_VECTOR = 1007

HEADER_DTYPE = np.dtype([
    ("sizeof_hdr", "i4"), ("data_type", "S10"), ("db_name", "S18"), ("extents", "i4"),
    ("session_error", "i2"), ("regular", "S1"), ("dim_info", "u1"), ("dim", "i2", (8,)),
    ("intent_p1", "f4"), ("intent_p2", "f4"), ("intent_p3", "f4"), ("intent_code", "i2"),
    ("datatype", "i2"), ("bitpix", "i2"), ("slice_start", "i2"), ("pixdim", "f4", (8,)),
    ("vox_offset", "f4"), ("scl_slope", "f4"), ("scl_inter", "f4"), ("slice_end", "i2"),
    ("slice_code", "u1"), ("xyzt_units", "u1"), ("cal_max", "f4"), ("cal_min", "f4"),
    ("slice_duration", "f4"), ("toffset", "f4"), ("glmax", "i4"), ("glmin", "i4"),
    ("descrip", "S80"), ("aux_file", "S24"), ("qform_code", "i2"), ("sform_code", "i2"),
    ("quatern_b", "f4"), ("quatern_c", "f4"), ("quatern_d", "f4"),
    ("qoffset_x", "f4"), ("qoffset_y", "f4"), ("qoffset_z", "f4"),
    ("srow_x", "f4", (4,)), ("srow_y", "f4", (4,)), ("srow_z", "f4", (4,)),
    ("intent_name", "S16"), ("magic", "S4"),
])
assert HEADER_DTYPE.itemsize == HEADER_SIZE

# NIfTI datatype code -> numpy dtype
DATATYPES = {2: np.dtype("u1"), 4: np.dtype("i2"), 8: np.dtype("i4"),
             16: np.dtype("f4"), 64: np.dtype("f8")}
CODES = {dt.type: code for code, dt in DATATYPES.items()}


@dataclass
class NiftiImage:
    """Decoded volume.

    ``data`` is ``(X, Y, Z)`` for scalar and label volumes and
    ``(X, Y, Z, 3)`` for vector fields. ``header`` is the raw header record
    (little-endian) used as a template when writing.
    """

    data: np.ndarray
    spacing: tuple
    header: np.ndarray = None

    @property
    def is_vector(self):
        return self.data.ndim == 4

    @property
    def is_integer(self):
        return np.issubdtype(self.data.dtype, np.integer)


def _gz(path):
    return str(path).endswith(".gz")


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        return gzip.decompress(raw) if _gz(path) else raw
    except (OSError, EOFError) as exc:
        raise FormatError(f"{path}: cannot read file: {exc}") from exc


def _write_bytes(path, raw):
    if _gz(path):
        # gzip.compress stores no file name; a fixed mtime keeps output reproducible
        raw = gzip.compress(raw, mtime=0)
    with open(path, "wb") as fh:
        fh.write(raw)


def empty_header():
    hdr = np.zeros((), dtype=HEADER_DTYPE)
    hdr["sizeof_hdr"] = HEADER_SIZE
    hdr["regular"] = b"r"
    hdr["pixdim"] = [1.0] * 8
    hdr["vox_offset"] = VOX_OFFSET
    hdr["scl_slope"] = 1.0
    hdr["xyzt_units"] = 2  # mm
    hdr["magic"] = b"n+1\x00"
    return hdr


def parse_header(raw, path="<bytes>"):
    """Decode 348 header bytes; returns ``(header, byteorder)``."""
    if len(raw) < HEADER_SIZE:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes is shorter than a NIfTI-1 header")
    for order in "<>":
        hdr = np.frombuffer(raw[:HEADER_SIZE], dtype=HEADER_DTYPE.newbyteorder(order))[0]
        if hdr["sizeof_hdr"] == HEADER_SIZE:
            break
    else:
        raise FormatError(f"{path}: sizeof_hdr is not 348 in either byte order")
    magic = bytes(hdr["magic"]).ljust(4, b"\x00")
    if magic == b"ni1\x00":
        raise UnsupportedFormatError(f"{path}: detached header/image pairs (ni1) are not supported")
    if magic != b"n+1\x00":
        raise BadMagicError(f"{path}: bad NIfTI-1 magic {magic!r}")
    ndim = int(hdr["dim"][0])
    if not 3 <= ndim <= 5:
        raise FormatError(f"{path}: dim[0]={ndim}, expected 3 to 5")
    return np.array(hdr, dtype=HEADER_DTYPE), order


def read_nifti(path):
    """Read a scalar, label or 3-vector NIfTI-1 volume.

    Intensities are mapped through ``scl_slope``/``scl_inter`` when the slope
    is non-zero and the scaling is not the identity (then the result is
    float64); otherwise the stored dtype is kept.
    """
    raw = _read_bytes(path)
    hdr, order = parse_header(raw, path)
    code = int(hdr["datatype"])
    if code not in DATATYPES:
        raise UnsupportedDatatypeError(f"{path}: unsupported NIfTI datatype code {code}")
    dtype = DATATYPES[code].newbyteorder(order)
    dim = [int(d) for d in hdr["dim"]]
    ndim = dim[0]
    shape = [max(1, d) for d in dim[1:ndim + 1]]
    if ndim == 5:
        if shape[3] != 1 or shape[4] != 3:
            raise FormatError(f"{path}: vector fields need dim[4]=1 and dim[5]=3, got {shape}")
    elif ndim == 4 and shape[3] != 1:
        raise FormatError(f"{path}: 4D time series are not supported")
    count = int(np.prod(shape))
    offset = int(hdr["vox_offset"])
    if offset < HEADER_SIZE:
        raise FormatError(f"{path}: vox_offset {offset} overlaps the header")
    need = offset + count * dtype.itemsize
    if len(raw) < need:
        raise TruncatedFileError(f"{path}: payload needs {need} bytes, file has {len(raw)}")
    flat = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    # x varies fastest on disk
    data = flat.reshape(shape, order="F").astype(dtype.newbyteorder("="))
    data = data.reshape(shape[:3] + ([3] if ndim == 5 else []))
    slope, inter = float(hdr["scl_slope"]), float(hdr["scl_inter"])
    if np.isfinite(slope) and slope != 0 and not (slope == 1 and inter == 0):
        data = data.astype(np.float64) * slope + inter
    spacing = tuple(float(p) for p in hdr["pixdim"][1:4])
    return NiftiImage(np.ascontiguousarray(data), spacing, hdr)


def write_nifti(image, path, spacing=None):
    """Write ``image`` (a :class:`NiftiImage` or a bare array) as little-endian NIfTI-1.

    Arrays of shape ``(X, Y, Z, 3)`` are stored as vector fields. Supported
    dtypes are uint8, int16, int32, float32 and float64; other integer or
    boolean arrays must be converted first.
    """
    if isinstance(image, NiftiImage):
        data, header = image.data, image.header
        spacing = image.spacing if spacing is None else spacing
    else:
        data, header = np.asarray(image), None
    spacing = (1.0, 1.0, 1.0) if spacing is None else tuple(float(s) for s in spacing)
    if data.dtype.type not in CODES:
        raise UnsupportedDatatypeError(f"cannot store dtype {data.dtype} in NIfTI-1")
    if data.ndim == 3:
        shape = list(data.shape)
    elif data.ndim == 4 and data.shape[3] == 3:
        shape = list(data.shape[:3]) + [1, 3]
    else:
        raise ShapeError(f"expected (X, Y, Z) or (X, Y, Z, 3) data, got {data.shape}")
    if any(s <= 0 for s in spacing):
        raise ValueError(f"voxel spacing must be positive, got {spacing}")

    hdr = empty_header() if header is None else np.array(header, dtype=HEADER_DTYPE)
    dtype = np.dtype(data.dtype.type)
    hdr["sizeof_hdr"] = HEADER_SIZE
    hdr["magic"] = b"n+1\x00"
    dim = [len(shape)] + shape + [1] * (7 - len(shape))
    hdr["dim"] = dim
    hdr["datatype"] = CODES[dtype.type]
    hdr["bitpix"] = dtype.itemsize * 8
    pixdim = np.array(hdr["pixdim"], dtype=np.float32)
    pixdim[0] = pixdim[0] if pixdim[0] in (-1.0, 1.0) else 1.0
    pixdim[1:4] = spacing
    pixdim[4:] = np.where(pixdim[4:] > 0, pixdim[4:], 1.0)
    hdr["pixdim"] = pixdim
    hdr["vox_offset"] = VOX_OFFSET
    hdr["scl_slope"] = 1.0
    hdr["scl_inter"] = 0.0
    if data.ndim == 4:
        hdr["intent_code"] = INTENT_VECTOR
    elif int(hdr["intent_code"]) == INTENT_VECTOR:
        hdr["intent_code"] = 0
    payload = np.asarray(data, dtype=dtype.newbyteorder("<")).reshape(shape, order="C")
    body = payload.tobytes(order="F")
    head = hdr.astype(HEADER_DTYPE.newbyteorder("<")).tobytes()
    _write_bytes(path, head + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + body)
