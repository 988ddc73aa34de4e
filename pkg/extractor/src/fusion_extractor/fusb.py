"""Standalone writer (and minimal reader) for FUSB v1 feature files.

The extractor deliberately does not import the benchmark package; the binary
format is the contract between the two. Layout, little-endian throughout:

    header: magic b"FUSB" | version u32 | record_count u64
            | text_dim u32 | image_dim u32
    record: id_len u16 | id utf-8 | label u8 | ocr_len u32 | ocr utf-8
            | text_dim float32 | image_dim float32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"FUSB"
FORMAT_VERSION = 1
TEXT_DIM = 768
IMAGE_DIM = 4096

HEADER = struct.Struct("<4sIQII")


@dataclass(frozen=True)
class FeatureRecord:
    """One extracted example, ready for serialization."""

    id: str
    label: int
    ocr_text: str
    text_vec: np.ndarray
    image_vec: np.ndarray

    def validate(self) -> None:
        if not self.id:
            raise ValueError("record id must be non-empty")
        if len(self.id.encode("utf-8")) > 0xFFFF:
            raise ValueError(f"record id too long: {self.id[:32]!r}...")
        if self.label not in (0, 1):
            raise ValueError(f"record {self.id!r}: label must be 0 or 1, got {self.label}")
        if self.text_vec.shape != (TEXT_DIM,):
            raise ValueError(
                f"record {self.id!r}: text vector has shape {self.text_vec.shape}, "
                f"expected ({TEXT_DIM},)"
            )
        if self.image_vec.shape != (IMAGE_DIM,):
            raise ValueError(
                f"record {self.id!r}: image vector has shape {self.image_vec.shape}, "
                f"expected ({IMAGE_DIM},)"
            )
        for name, vec in (("text", self.text_vec), ("image", self.image_vec)):
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"record {self.id!r}: non-finite values in {name} vector")


def serialize(records: list[FeatureRecord]) -> bytes:
    """Serialize records in order. Activations are truncated to float32 here."""
    seen: set[str] = set()
    out = bytearray()
    out += HEADER.pack(MAGIC, FORMAT_VERSION, len(records), TEXT_DIM, IMAGE_DIM)
    for rec in records:
        rec.validate()
        if rec.id in seen:
            raise ValueError(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
        id_bytes = rec.id.encode("utf-8")
        ocr_bytes = rec.ocr_text.encode("utf-8")
        out += struct.pack("<H", len(id_bytes))
        out += id_bytes
        out += struct.pack("<B", rec.label)
        out += struct.pack("<I", len(ocr_bytes))
        out += ocr_bytes
        out += rec.text_vec.astype("<f4", copy=False).tobytes()
        out += rec.image_vec.astype("<f4", copy=False).tobytes()
    return bytes(out)


def write_feature_file(path: str | Path, records: list[FeatureRecord]) -> None:
    Path(path).write_bytes(serialize(records))


def read_feature_file(path: str | Path) -> list[FeatureRecord]:
    """Parse a FUSB file back into records. Used for self-checks, not training."""
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise ValueError(f"file too short for header: {len(data)} bytes")
    magic, version, record_count, text_dim, image_dim = HEADER.unpack_from(data, 0)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise ValueError(f"bad magic/version: {magic!r} v{version}")
    if (text_dim, image_dim) != (TEXT_DIM, IMAGE_DIM):
        raise ValueError(f"unexpected dims: text={text_dim} image={image_dim}")
    records = []
    off = HEADER.size
    for _ in range(record_count):
        (id_len,) = struct.unpack_from("<H", data, off)
        off += 2
        rec_id = data[off : off + id_len].decode("utf-8")
        off += id_len
        label = data[off]
        off += 1
        (ocr_len,) = struct.unpack_from("<I", data, off)
        off += 4
        ocr = data[off : off + ocr_len].decode("utf-8")
        off += ocr_len
        text_vec = np.frombuffer(data, dtype="<f4", count=text_dim, offset=off).copy()
        off += 4 * text_dim
        image_vec = np.frombuffer(data, dtype="<f4", count=image_dim, offset=off).copy()
        off += 4 * image_dim
        records.append(FeatureRecord(rec_id, label, ocr, text_vec, image_vec))
    if off != len(data):
        raise ValueError(f"{len(data) - off} trailing bytes after last record")
    return records
