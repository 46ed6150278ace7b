"""Bit-exact on-disk formats: .fbm matrices, .fbk masks, the session catalog,
and CSV export. Every stage output is replayable and diffable.

.fbm layout: magic ``FBM1`` | rows u32le | cols u32le | dtype byte
(0 = float32, 1 = float64) | 3 zero pad bytes | row-major little-endian payload.

.fbk layout: magic ``FBK1`` | H u32le | W u32le | H*W bytes, each 0 or 1.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import BrainMask, DataMatrix, DEFAULT_FPS

MATRIX_MAGIC = b"FBM1"
MASK_MAGIC = b"FBK1"
_U32_MAX = 2**32 - 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {"float32": 0, "float64": 1}
ROLES = ("train", "val", "test")


class FileFormatError(ValueError):
    """A file does not conform to its declared binary format."""


class BadMagicError(FileFormatError):
    pass


class BadDtypeError(FileFormatError):
    pass


class PayloadSizeError(FileFormatError):
    pass


def atomic_write_bytes(path, data: bytes) -> None:
    """Write bytes via a temp file + rename so readers never see partial output."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _encode_fbm(array: np.ndarray, dtype: str) -> bytes:
    if dtype not in _DTYPE_CODES:
        raise ValueError(f"dtype must be 'float32' or 'float64', got {dtype!r}")
    array = np.asarray(array)
    if array.ndim != 2:
        raise ValueError(f"matrix file payload must be 2-D, got shape {array.shape}")
    rows, cols = array.shape
    if rows > _U32_MAX or cols > _U32_MAX:
        raise ValueError(f"dimensions {rows}x{cols} overflow the u32 header fields")
    code = _DTYPE_CODES[dtype]
    header = MATRIX_MAGIC + struct.pack("<IIB3x", rows, cols, code)
    payload = np.ascontiguousarray(array, dtype=_DTYPES[code]).tobytes()
    return header + payload


def write_fbm(array: np.ndarray, path, dtype: str = "float64") -> None:
    """Write any 2-D real array as a .fbm file."""
    atomic_write_bytes(path, _encode_fbm(array, dtype))


def read_fbm(path) -> np.ndarray:
    """Read a .fbm file back into a 2-D array of the stored precision."""
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise PayloadSizeError(
            f"{path}: file too short for header (16 bytes needed, {len(blob)} present)"
        )
    if blob[:4] != MATRIX_MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}, expected {MATRIX_MAGIC!r}")
    rows, cols, code = struct.unpack("<IIB", blob[4:13])
    if blob[13:16] != b"\x00\x00\x00":
        raise FileFormatError(f"{path}: nonzero header padding {blob[13:16]!r}")
    if code not in _DTYPES:
        raise BadDtypeError(f"{path}: dtype byte {code} outside {{0, 1}}")
    dt = _DTYPES[code]
    expected = rows * cols * dt.itemsize
    actual = len(blob) - 16
    if actual != expected:
        raise PayloadSizeError(
            f"{path}: payload is {actual} bytes, expected {expected} "
            f"({rows}x{cols} x {dt.itemsize} bytes)"
        )
    return np.frombuffer(blob[16:], dtype=dt).reshape(rows, cols).copy()


def save_matrix(m: DataMatrix, path, dtype: str = "float64") -> None:
    write_fbm(m.values, path, dtype=dtype)


def load_matrix(path, fps: float = DEFAULT_FPS) -> DataMatrix:
    """Load a .fbm data matrix; fps is not stored in the file and comes from
    the caller (normally the session catalog)."""
    return DataMatrix(values=read_fbm(path).astype(np.float64), fps=fps)


def save_mask(mask: BrainMask, path) -> None:
    h, w = mask.bits.shape
    if h > _U32_MAX or w > _U32_MAX:
        raise ValueError(f"mask dimensions {h}x{w} overflow the u32 header fields")
    header = MASK_MAGIC + struct.pack("<II", h, w)
    atomic_write_bytes(path, header + mask.bits.astype(np.uint8).tobytes())


def load_mask(path) -> BrainMask:
    blob = Path(path).read_bytes()
    if len(blob) < 12:
        raise PayloadSizeError(
            f"{path}: file too short for header (12 bytes needed, {len(blob)} present)"
        )
    if blob[:4] != MASK_MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}, expected {MASK_MAGIC!r}")
    h, w = struct.unpack("<II", blob[4:12])
    expected = h * w
    actual = len(blob) - 12
    if actual != expected:
        raise PayloadSizeError(f"{path}: payload is {actual} bytes, expected {expected}")
    raw = np.frombuffer(blob[12:], dtype=np.uint8)
    if np.any(raw > 1):
        bad = int(np.flatnonzero(raw > 1)[0])
        raise FileFormatError(f"{path}: mask byte at offset {bad} is {raw[bad]}, not 0/1")
    return BrainMask(bits=raw.reshape(h, w).astype(bool))


@dataclass
class SessionRecord:
    """One catalog row: a 5-min-style session and its on-disk artifacts."""

    subject_id: str
    session_id: str
    role: str
    fps: float
    matrix_path: str
    mask_path: str

    @property
    def key(self) -> tuple[str, str]:
        return (self.subject_id, self.session_id)


_CATALOG_FIELDS = ("subject_id", "session_id", "role", "fps", "matrix_path", "mask_path")


def load_catalog(path, check_paths: bool = True) -> list[SessionRecord]:
    """Load and validate a catalog.json; relative artifact paths are resolved
    against the catalog's directory. Order-preserving."""
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError(f"{path}: catalog must be a JSON array")
    records: list[SessionRecord] = []
    seen: set[tuple[str, str]] = set()
    for i, row in enumerate(data):
        if not isinstance(row, dict):
            raise ValueError(f"{path}: catalog entry {i} is not an object")
        missing = [f for f in _CATALOG_FIELDS if f not in row]
        if missing:
            raise ValueError(f"{path}: entry {i} missing fields {missing}")
        role = str(row["role"])
        if role not in ROLES:
            raise ValueError(
                f"{path}: entry {i} role {role!r} unknown; allowed roles: {list(ROLES)}"
            )
        fps = float(row["fps"])
        if fps <= 0:
            raise ValueError(f"{path}: entry {i} fps must be > 0, got {fps}")
        rec = SessionRecord(
            subject_id=str(row["subject_id"]),
            session_id=str(row["session_id"]),
            role=role,
            fps=fps,
            matrix_path=str(path.parent / row["matrix_path"]),
            mask_path=str(path.parent / row["mask_path"]),
        )
        if rec.key in seen:
            raise ValueError(f"{path}: duplicate (subject_id, session_id) {rec.key}")
        seen.add(rec.key)
        if check_paths:
            for p in (rec.matrix_path, rec.mask_path):
                if not Path(p).exists():
                    raise FileNotFoundError(f"{path}: entry {i} references missing file {p}")
        records.append(rec)
    return records


def save_catalog(records: list[SessionRecord], path) -> None:
    """Write a catalog.json with artifact paths relative to the catalog dir."""
    path = Path(path)
    rows = []
    for rec in records:
        rows.append(
            {
                "subject_id": rec.subject_id,
                "session_id": rec.session_id,
                "role": rec.role,
                "fps": rec.fps,
                "matrix_path": os.path.relpath(rec.matrix_path, path.parent),
                "mask_path": os.path.relpath(rec.mask_path, path.parent),
            }
        )
    atomic_write_bytes(path, (json.dumps(rows, indent=2) + "\n").encode("utf-8"))


def _csv_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        text = format(float(value), ".17g")
    else:
        text = str(value)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def export_csv(path, header: list[str], rows) -> None:
    """Write a rectangular table as RFC-4180-style CSV (UTF-8, LF endings).

    Reals are written with 17 significant digits so a reload reproduces
    them to the last bit.
    """
    width = len(header)
    lines = [",".join(_csv_cell(h) for h in header)]
    for i, row in enumerate(rows):
        row = list(row)
        if len(row) != width:
            raise ValueError(f"row {i} has {len(row)} cells, header has {width}")
        lines.append(",".join(_csv_cell(c) for c in row))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))
