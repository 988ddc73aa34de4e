"""Feature records, the FUSB feature-file format, and stratified splitting.

A FeatureRecord carries one item's id, binary label, 768-d text embedding
and 4096-d image embedding.  Embeddings are produced elsewhere (or
synthesized); this module never looks at pixels or raw text beyond the
audit-only OCR string.

FUSB v1 layout, little-endian throughout:

    header (24 bytes): magic "FUSB" | version u32 = 1 | record_count u64
                       | text_dim u32 = 768 | image_dim u32 = 4096
    record:            id_len u16 | id (UTF-8) | label u8 | ocr_len u32
                       | ocr (UTF-8) | text_dim float32 | image_dim float32

Files store float32; all training math happens in float64.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .rng import SplitMix64, derive_seed

TEXT_DIM = 768
IMAGE_DIM = 4096
FUSED_DIM = TEXT_DIM + IMAGE_DIM

MAGIC = b"FUSB"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIQII")
HEADER_SIZE = HEADER.size  # 24

MODALITIES = ("text", "image", "multimodal")

# Stream tag for split shuffling, see rng.derive_seed.
_SPLIT_STREAM = 0x5350


class FeatureFileError(ValueError):
    """Base error for corrupt or inconsistent feature data.

    ``offset`` is the byte position the problem was detected at (when it
    comes from a file) and ``record_id`` the offending id (when known).
    """

    def __init__(self, message: str, *, offset: int | None = None,
                 record_id: str | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        if record_id is not None:
            message = f"{message} (record id {record_id!r})"
        super().__init__(message)
        self.offset = offset
        self.record_id = record_id


class MalformedHeaderError(FeatureFileError):
    pass


class TruncatedRecordError(FeatureFileError):
    pass


class DimensionMismatchError(FeatureFileError):
    pass


class DuplicateIdError(FeatureFileError):
    pass


class StratificationError(ValueError):
    """Raised when a stratified split is impossible (single-class data)."""


def _as_feature_vector(value, dim: int, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float32)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise DimensionMismatchError(
            f"{what} must have shape ({dim},), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{what} contains non-finite components")
    if arr.flags.writeable:
        arr = arr.copy()
        arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FeatureRecord:
    """One item: id, weak binary label (1 = hate), and its two embeddings.

    Vectors are stored read-only as float32, mirroring the file format.
    ``ocr_text`` is kept for audit only; the empty string means absent.
    Equality is defined manually because numpy arrays do not compare to a
    single bool.
    """

    id: str
    label: int
    text_vec: np.ndarray
    image_vec: np.ndarray
    ocr_text: str = ""

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("record id must be a non-empty string")
        if len(self.id.encode("utf-8")) > 0xFFFF:
            raise ValueError(f"record id too long for format: {self.id!r:.40}")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "text_vec",
                           _as_feature_vector(self.text_vec, TEXT_DIM, "text_vec"))
        object.__setattr__(self, "image_vec",
                           _as_feature_vector(self.image_vec, IMAGE_DIM, "image_vec"))
        if self.ocr_text is None:
            object.__setattr__(self, "ocr_text", "")
        elif not isinstance(self.ocr_text, str):
            raise ValueError("ocr_text must be a string or None")

    def __eq__(self, other):
        if not isinstance(other, FeatureRecord):
            return NotImplemented
        return (self.id == other.id
                and self.label == other.label
                and self.ocr_text == other.ocr_text
                and np.array_equal(self.text_vec, other.text_vec)
                and np.array_equal(self.image_vec, other.image_vec))


@dataclass(frozen=True)
class Dataset:
    """Immutable ordered collection of records with unique ids.

    ``provenance`` is a free-text source note for humans; it takes no part
    in equality and is not persisted by the file format.
    """

    records: tuple[FeatureRecord, ...]
    provenance: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        index: dict[str, FeatureRecord] = {}
        for rec in self.records:
            if rec.id in index:
                raise DuplicateIdError("duplicate record id", record_id=rec.id)
            index[rec.id] = rec
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def get(self, record_id: str) -> FeatureRecord:
        try:
            return self._index[record_id]
        except KeyError:
            raise ValueError(f"unknown record id {record_id!r}") from None

    def ids(self) -> tuple[str, ...]:
        return tuple(rec.id for rec in self.records)

    def class_counts(self) -> tuple[int, int]:
        """(n_label0, n_label1)."""
        n1 = sum(rec.label for rec in self.records)
        return len(self.records) - n1, n1

    def majority_fraction(self) -> float:
        n0, n1 = self.class_counts()
        if n0 + n1 == 0:
            raise ValueError("empty dataset has no majority fraction")
        return max(n0, n1) / (n0 + n1)


@dataclass(frozen=True)
class DatasetSplit:
    """Stratified train/validation partition, identified by record ids."""

    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]
    seed: int
    train_fraction: float

    def __post_init__(self):
        object.__setattr__(self, "train_ids", tuple(self.train_ids))
        object.__setattr__(self, "val_ids", tuple(self.val_ids))
        overlap = set(self.train_ids) & set(self.val_ids)
        if overlap:
            raise ValueError(f"train/val ids overlap: {sorted(overlap)[:3]}")
        if len(set(self.train_ids)) != len(self.train_ids):
            raise ValueError("duplicate ids in train_ids")
        if len(set(self.val_ids)) != len(self.val_ids):
            raise ValueError("duplicate ids in val_ids")

    def validate_against(self, ds: Dataset) -> None:
        """Check that this split partitions exactly the ids of ``ds``."""
        have = set(self.train_ids) | set(self.val_ids)
        want = set(ds.ids())
        if have != want:
            missing = sorted(want - have)[:3]
            extra = sorted(have - want)[:3]
            raise ValueError(
                f"split does not partition dataset ids "
                f"(missing {missing}, unknown {extra})")

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "train_ids": list(self.train_ids),
            "val_ids": list(self.val_ids),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DatasetSplit":
        try:
            return cls(
                train_ids=tuple(obj["train_ids"]),
                val_ids=tuple(obj["val_ids"]),
                seed=int(obj["seed"]),
                train_fraction=float(obj["train_fraction"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"invalid split document: {exc}") from None

    def save(self, path) -> None:
        text = json.dumps(self.to_json_dict(), indent=2, sort_keys=True)
        Path(path).write_text(text + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "DatasetSplit":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def read_feature_file(path) -> Dataset:
    """Parse a FUSB v1 file into a Dataset, order preserved."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < HEADER_SIZE:
        raise MalformedHeaderError(
            f"file too short for header: {len(data)} bytes", offset=0)
    magic, version, record_count, text_dim, image_dim = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise MalformedHeaderError(f"bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise MalformedHeaderError(f"unsupported format version {version}", offset=4)
    if text_dim != TEXT_DIM:
        raise DimensionMismatchError(
            f"header text_dim {text_dim}, expected {TEXT_DIM}", offset=16)
    if image_dim != IMAGE_DIM:
        raise DimensionMismatchError(
            f"header image_dim {image_dim}, expected {IMAGE_DIM}", offset=20)

    def take(off: int, n: int, what: str, rec_index: int) -> bytes:
        if off + n > len(data):
            raise TruncatedRecordError(
                f"record {rec_index}: file ends inside {what}", offset=off)
        return data[off:off + n]

    records = []
    off = HEADER_SIZE
    for i in range(record_count):
        (id_len,) = struct.unpack("<H", take(off, 2, "id length", i))
        off += 2
        id_bytes = take(off, id_len, "id", i)
        off += id_len
        try:
            rec_id = id_bytes.decode("utf-8")
        except UnicodeDecodeError:
            raise FeatureFileError(
                f"record {i}: id is not valid UTF-8", offset=off - id_len) from None
        label = take(off, 1, "label", i)[0]
        if label not in (0, 1):
            raise FeatureFileError(
                f"record {i}: label byte must be 0 or 1, got {label}", offset=off)
        off += 1
        (ocr_len,) = struct.unpack("<I", take(off, 4, "ocr length", i))
        off += 4
        ocr_bytes = take(off, ocr_len, "ocr text", i)
        off += ocr_len
        try:
            ocr_text = ocr_bytes.decode("utf-8")
        except UnicodeDecodeError:
            raise FeatureFileError(
                f"record {i}: ocr text is not valid UTF-8", offset=off - ocr_len) from None
        text_raw = take(off, 4 * TEXT_DIM, "text vector", i)
        text_vec = np.frombuffer(text_raw, dtype="<f4")
        off += 4 * TEXT_DIM
        image_raw = take(off, 4 * IMAGE_DIM, "image vector", i)
        image_vec = np.frombuffer(image_raw, dtype="<f4")
        off += 4 * IMAGE_DIM
        try:
            records.append(FeatureRecord(
                id=rec_id, label=int(label),
                text_vec=text_vec, image_vec=image_vec, ocr_text=ocr_text))
        except ValueError as exc:
            raise FeatureFileError(f"record {i}: {exc}", record_id=rec_id) from None
    if off != len(data):
        raise FeatureFileError(
            f"{len(data) - off} trailing bytes after last record", offset=off)
    return Dataset(records=tuple(records), provenance=f"fusb:{path.name}")


def write_feature_file(ds: Dataset, path) -> None:
    """Serialize a Dataset to FUSB v1; read-back is bit-exact."""
    out = bytearray()
    out += HEADER.pack(MAGIC, FORMAT_VERSION, len(ds.records), TEXT_DIM, IMAGE_DIM)
    for rec in ds.records:
        id_bytes = rec.id.encode("utf-8")
        ocr_bytes = rec.ocr_text.encode("utf-8")
        out += struct.pack("<H", len(id_bytes))
        out += id_bytes
        out += struct.pack("<B", rec.label)
        out += struct.pack("<I", len(ocr_bytes))
        out += ocr_bytes
        out += rec.text_vec.astype("<f4", copy=False).tobytes()
        out += rec.image_vec.astype("<f4", copy=False).tobytes()
    Path(path).write_bytes(bytes(out))


def _apportion(total: int, counts: list[int]) -> list[int]:
    """Largest-remainder apportionment of ``total`` across class counts.

    Exact quotas total*counts[c]/sum(counts) guarantee each allocation is
    within 1 of its quota, which is what makes the split stratified.
    Remainder ties go to the larger class, then to the smaller label.
    """
    n = sum(counts)
    quotas = [Fraction(total * c, n) for c in counts]
    floors = [int(q) for q in quotas]
    leftover = total - sum(floors)
    order = sorted(
        range(len(counts)),
        key=lambda c: (quotas[c] - floors[c], counts[c], -c),
        reverse=True,
    )
    alloc = list(floors)
    for c in order[:leftover]:
        alloc[c] += 1
    return alloc


def stratified_split(ds: Dataset, train_fraction: float, seed: int) -> DatasetSplit:
    """Seeded stratified partition of ``ds`` into train and validation ids.

    Each class is shuffled independently with the portable generator and
    cut proportionally, so per-class ratios in both subsets match the
    global ratio to within one record.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n0, n1 = ds.class_counts()
    if n0 == 0 or n1 == 0:
        raise StratificationError(
            "stratified split requires both classes present "
            f"(counts: label0={n0}, label1={n1})")
    total = n0 + n1
    # Banker-free rounding: T = floor(f*N + 1/2), computed exactly.
    train_total = int(Fraction(train_fraction) * total + Fraction(1, 2))
    alloc = _apportion(train_total, [n0, n1])

    by_class = {0: [], 1: []}
    for idx, rec in enumerate(ds.records):
        by_class[rec.label].append(idx)
    rng = SplitMix64(derive_seed(seed, _SPLIT_STREAM))
    train_idx: list[int] = []
    val_idx: list[int] = []
    for label in (0, 1):
        indices = by_class[label]
        rng.shuffle(indices)
        train_idx += indices[:alloc[label]]
        val_idx += indices[alloc[label]:]
    train_idx.sort()
    val_idx.sort()
    all_ids = ds.ids()
    return DatasetSplit(
        train_ids=tuple(all_ids[i] for i in train_idx),
        val_ids=tuple(all_ids[i] for i in val_idx),
        seed=seed,
        train_fraction=train_fraction,
    )


def modality_dim(modality: str) -> int:
    if modality == "text":
        return TEXT_DIM
    if modality == "image":
        return IMAGE_DIM
    if modality == "multimodal":
        return FUSED_DIM
    raise ValueError(f"unknown modality {modality!r}, expected one of {MODALITIES}")


def select_modality(rec: FeatureRecord, modality: str) -> np.ndarray:
    """The record's input vector for one modality, as a fresh float64 copy.

    Multimodal is text followed by image (768 + 4096 = 4864 components).
    """
    if modality == "text":
        return rec.text_vec.astype(np.float64)
    if modality == "image":
        return rec.image_vec.astype(np.float64)
    if modality == "multimodal":
        out = np.empty(FUSED_DIM, dtype=np.float64)
        out[:TEXT_DIM] = rec.text_vec
        out[TEXT_DIM:] = rec.image_vec
        return out
    raise ValueError(f"unknown modality {modality!r}, expected one of {MODALITIES}")


def feature_matrix(ds: Dataset, ids, modality: str) -> tuple[np.ndarray, np.ndarray]:
    """Stack (X, y) for the given ids in the given order, float64."""
    ids = list(ids)
    if not ids:
        raise ValueError("empty id list")
    recs = [ds.get(i) for i in ids]
    x = np.empty((len(recs), modality_dim(modality)), dtype=np.float64)
    for row, rec in enumerate(recs):
        x[row] = select_modality(rec, modality)
    y = np.array([rec.label for rec in recs], dtype=np.float64)
    return x, y
