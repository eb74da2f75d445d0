"""Binary exchange formats for tensors, parameter bundles, and descriptors.

Three little-endian container formats plus a JSON ground-truth document:

* ``FTX1`` tensor:  magic | dtype u8 (1 = f32) | ndim u8 (1..4) |
  ndim x u64 dims | row-major f32 payload.
* ``FTP1`` bundle:  magic | count u32 | count x { name_len u16, UTF-8 name,
  embedded FTX tensor }.
* ``ADB1`` descriptor DB:  magic | dim u32 | count u64 | count x
  { id_len u16, UTF-8 id, dim x f32 }.
* ground truth: ``{"queries": [{"id": ..., "positives": [...]}, ...]}``.

Writers validate invariants (finite payloads, unit-norm descriptors,
unique names) and readers raise :class:`FormatError` on any malformed
input rather than crashing, so files can be exchanged across platforms
bit-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .errors import FormatError

TENSOR_MAGIC = b"FTX1"
PARAMS_MAGIC = b"FTP1"
DESCRIPTOR_MAGIC = b"ADB1"

_DTYPE_F32 = 1
_MAX_NDIM = 4

UNIT_NORM_TOL = 1e-4

ParamBundle = dict[str, np.ndarray]


def _read_exact(source: BinaryIO, count: int, what: str) -> bytes:
    data = source.read(count)
    if len(data) != count:
        raise FormatError(f"truncated stream while reading {what}: "
                          f"wanted {count} bytes, got {len(data)}")
    return data


def _as_f32(t: np.ndarray | Sequence) -> np.ndarray:
    arr = np.asarray(t)
    if arr.dtype != np.float32:
        arr = arr.astype(np.float32)
    return arr


def write_tensor(t: np.ndarray | Sequence, sink: BinaryIO) -> int:
    """Write one tensor in FTX format; returns the number of bytes written."""
    arr = _as_f32(t)
    if arr.ndim < 1 or arr.ndim > _MAX_NDIM:
        raise FormatError(f"tensor must have 1..{_MAX_NDIM} dims, got {arr.ndim}")
    if any(d < 1 for d in arr.shape):
        raise FormatError(f"all dims must be >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FormatError("tensor payload contains NaN or Inf")
    header = TENSOR_MAGIC + struct.pack("<BB", _DTYPE_F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload = np.ascontiguousarray(arr).tobytes()
    sink.write(header)
    sink.write(payload)
    return len(header) + len(payload)


def read_tensor(source: BinaryIO) -> np.ndarray:
    """Read one FTX tensor; inverse of :func:`write_tensor`."""
    magic = _read_exact(source, 4, "magic")
    if magic != TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic {magic!r}")
    dtype_code, ndim = struct.unpack("<BB", _read_exact(source, 2, "header"))
    if dtype_code != _DTYPE_F32:
        raise FormatError(f"unknown dtype code {dtype_code}")
    if ndim < 1 or ndim > _MAX_NDIM:
        raise FormatError(f"dim count must be 1..{_MAX_NDIM}, got {ndim}")
    dims = struct.unpack(f"<{ndim}Q", _read_exact(source, 8 * ndim, "dims"))
    if any(d < 1 for d in dims):
        raise FormatError(f"all dims must be >= 1, got {dims}")
    count = 1
    for d in dims:
        count *= d
    payload = _read_exact(source, 4 * count, "payload")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def write_params(params: ParamBundle, sink: BinaryIO) -> int:
    """Write a named tensor bundle in FTP format."""
    if any(not name for name in params):
        raise FormatError("parameter names must be nonempty")
    written = len(PARAMS_MAGIC) + 4
    sink.write(PARAMS_MAGIC)
    sink.write(struct.pack("<I", len(params)))
    for name, tensor in params.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise FormatError(f"parameter name too long: {name[:40]}...")
        sink.write(struct.pack("<H", len(encoded)))
        sink.write(encoded)
        written += 2 + len(encoded) + write_tensor(tensor, sink)
    return written


def read_params(source: BinaryIO) -> ParamBundle:
    """Read an FTP bundle; duplicate names are rejected."""
    magic = _read_exact(source, 4, "magic")
    if magic != PARAMS_MAGIC:
        raise FormatError(f"bad bundle magic {magic!r}")
    (count,) = struct.unpack("<I", _read_exact(source, 4, "entry count"))
    params: ParamBundle = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", _read_exact(source, 2, "name length"))
        raw = _read_exact(source, name_len, "name")
        try:
            name = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"parameter name is not valid UTF-8: {raw!r}") from exc
        if not name:
            raise FormatError("parameter name must be nonempty")
        if name in params:
            raise FormatError(f"duplicate parameter name {name!r}")
        params[name] = read_tensor(source)
    return params


@dataclass
class DescriptorRecord:
    """One (id, unit-norm f32 vector) entry of a descriptor database."""

    id: str
    descriptor: np.ndarray

    def __post_init__(self) -> None:
        self.descriptor = _as_f32(self.descriptor).reshape(-1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DescriptorRecord):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.descriptor, other.descriptor)


def _check_record(rec: DescriptorRecord, dim: int) -> None:
    if not rec.id:
        raise FormatError("descriptor id must be nonempty")
    if rec.descriptor.shape != (dim,):
        raise FormatError(f"descriptor {rec.id!r} has dim {rec.descriptor.shape[0]}, "
                          f"expected {dim}")
    if not np.all(np.isfinite(rec.descriptor)):
        raise FormatError(f"descriptor {rec.id!r} contains NaN or Inf")
    norm = float(np.linalg.norm(rec.descriptor.astype(np.float64)))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise FormatError(f"descriptor {rec.id!r} is not unit-norm (|v| = {norm:.6g})")


def write_descriptor_db(records: Sequence[DescriptorRecord], sink: BinaryIO) -> int:
    """Write descriptor records in ADB format, preserving order."""
    dim = records[0].descriptor.shape[0] if records else 0
    seen: set[str] = set()
    sink.write(DESCRIPTOR_MAGIC)
    sink.write(struct.pack("<IQ", dim, len(records)))
    written = len(DESCRIPTOR_MAGIC) + 12
    for rec in records:
        _check_record(rec, dim)
        if rec.id in seen:
            raise FormatError(f"duplicate descriptor id {rec.id!r}")
        seen.add(rec.id)
        encoded = rec.id.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise FormatError(f"descriptor id too long: {rec.id[:40]}...")
        sink.write(struct.pack("<H", len(encoded)))
        sink.write(encoded)
        payload = np.ascontiguousarray(rec.descriptor).tobytes()
        sink.write(payload)
        written += 2 + len(encoded) + len(payload)
    return written


def read_descriptor_db(source: BinaryIO) -> list[DescriptorRecord]:
    """Read an ADB file back into ordered records."""
    magic = _read_exact(source, 4, "magic")
    if magic != DESCRIPTOR_MAGIC:
        raise FormatError(f"bad descriptor DB magic {magic!r}")
    dim, count = struct.unpack("<IQ", _read_exact(source, 12, "header"))
    records: list[DescriptorRecord] = []
    seen: set[str] = set()
    for _ in range(count):
        (id_len,) = struct.unpack("<H", _read_exact(source, 2, "id length"))
        raw = _read_exact(source, id_len, "id")
        try:
            rec_id = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"descriptor id is not valid UTF-8: {raw!r}") from exc
        payload = _read_exact(source, 4 * dim, f"descriptor {rec_id!r}")
        rec = DescriptorRecord(rec_id, np.frombuffer(payload, dtype="<f4").copy())
        _check_record(rec, dim)
        if rec.id in seen:
            raise FormatError(f"duplicate descriptor id {rec.id!r}")
        seen.add(rec.id)
        records.append(rec)
    return records


@dataclass
class GroundTruth:
    """Positive database ids per query, in query order."""

    positives: dict[str, list[str]] = field(default_factory=dict)

    def query_ids(self) -> list[str]:
        return list(self.positives)

    def to_json_dict(self) -> dict:
        return {"queries": [{"id": q, "positives": list(p)}
                            for q, p in self.positives.items()]}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GroundTruth":
        if not isinstance(doc, dict) or "queries" not in doc:
            raise FormatError("ground truth document must have a 'queries' list")
        queries = doc["queries"]
        if not isinstance(queries, list) or not queries:
            raise FormatError("ground truth query list must be nonempty")
        positives: dict[str, list[str]] = {}
        for entry in queries:
            if not isinstance(entry, dict) or "id" not in entry or "positives" not in entry:
                raise FormatError(f"malformed ground truth entry: {entry!r}")
            qid = entry["id"]
            pos = entry["positives"]
            if not isinstance(qid, str) or not qid:
                raise FormatError(f"query id must be a nonempty string, got {qid!r}")
            if not isinstance(pos, list) or not all(isinstance(p, str) for p in pos):
                raise FormatError(f"positives of {qid!r} must be a list of ids")
            if qid in positives:
                raise FormatError(f"duplicate query id {qid!r}")
            positives[qid] = list(pos)
        return cls(positives)


def read_ground_truth(source: str | Path) -> GroundTruth:
    text = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"ground truth is not valid JSON: {exc}") from exc
    return GroundTruth.from_json_dict(doc)


def write_ground_truth(gt: GroundTruth, sink: str | Path) -> None:
    Path(sink).write_text(json.dumps(gt.to_json_dict(), indent=2) + "\n", encoding="utf-8")


# path-based conveniences used by the CLI and the synthetic generator


def save_tensor(t: np.ndarray, path: str | Path) -> int:
    with open(path, "wb") as f:
        return write_tensor(t, f)


def load_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        return read_tensor(f)


def save_params(params: ParamBundle, path: str | Path) -> int:
    with open(path, "wb") as f:
        return write_params(params, f)


def load_params(path: str | Path) -> ParamBundle:
    with open(path, "rb") as f:
        return read_params(f)


def save_descriptor_db(records: Sequence[DescriptorRecord], path: str | Path) -> int:
    with open(path, "wb") as f:
        return write_descriptor_db(records, f)


def load_descriptor_db(path: str | Path) -> list[DescriptorRecord]:
    with open(path, "rb") as f:
        return read_descriptor_db(f)
