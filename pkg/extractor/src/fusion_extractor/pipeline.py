"""Manifest-driven extraction into a FUSB feature file.

The manifest is JSON Lines; every row names an image on disk:

    {"id": "meme-0001", "path": "images/0001.png", "label": 1}

Rows are processed independently (optionally in parallel) and written in
manifest order. An unreadable image skips its row with a logged warning
rather than aborting the run; a manifest that is empty or whose rows all
fail is an error, since the resulting file would be useless downstream.

Alongside the output, a ``<name>.lock.json`` sidecar pins the exact model
identities and library versions the vectors came from. Extraction is
deterministic for a fixed lock file.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .fusb import FeatureRecord, write_feature_file

logger = logging.getLogger("fusion_extractor")

_ROW_KEYS = {"id", "path", "label"}


class ManifestError(ValueError):
    """The manifest file itself is malformed."""


class ExtractionError(ValueError):
    """Extraction produced nothing worth writing."""


@dataclass(frozen=True)
class ManifestRow:
    id: str
    path: Path
    label: int


def load_manifest(path: str | Path) -> list[ManifestRow]:
    """Parse and validate a JSONL manifest. Relative image paths are resolved
    against the manifest's own directory."""
    path = Path(path)
    base = path.resolve().parent
    rows: list[ManifestRow] = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict) or set(obj) != _ROW_KEYS:
            raise ManifestError(
                f"manifest line {lineno}: expected exactly the keys id, path, label"
            )
        rec_id, img_path, label = obj["id"], obj["path"], obj["label"]
        if not isinstance(rec_id, str) or not rec_id:
            raise ManifestError(f"manifest line {lineno}: id must be a non-empty string")
        if not isinstance(img_path, str) or not img_path:
            raise ManifestError(f"manifest line {lineno}: path must be a non-empty string")
        if isinstance(label, bool) or label not in (0, 1):
            raise ManifestError(f"manifest line {lineno}: label must be 0 or 1")
        if rec_id in seen:
            raise ManifestError(f"manifest line {lineno}: duplicate id {rec_id!r}")
        seen.add(rec_id)
        resolved = Path(img_path)
        if not resolved.is_absolute():
            resolved = base / resolved
        rows.append(ManifestRow(id=rec_id, path=resolved, label=label))
    if not rows:
        raise ManifestError(f"manifest {path} has no rows")
    return rows


@dataclass
class ExtractionSummary:
    out_path: str
    total: int
    written: int
    class_counts: dict[int, int]
    skipped: list[dict[str, str]] = field(default_factory=list)
    models: dict[str, str] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "out_path": self.out_path,
            "total": self.total,
            "written": self.written,
            "class_counts": {str(k): v for k, v in sorted(self.class_counts.items())},
            "skipped": self.skipped,
            "models": self.models,
        }


def _library_versions() -> dict[str, str]:
    import PIL
    import torch
    import torchvision
    import transformers

    return {
        "torch": torch.__version__,
        "torchvision": torchvision.__version__,
        "transformers": transformers.__version__,
        "pillow": PIL.__version__,
    }


def lock_path_for(out_path: str | Path) -> Path:
    out_path = Path(out_path)
    return out_path.with_name(out_path.name + ".lock.json")


def build_feature_file(
    manifest_path: str | Path,
    out_path: str | Path,
    *,
    jobs: int = 1,
    ocr=None,
    text_encoder=None,
    image_encoder=None,
) -> ExtractionSummary:
    """Extract every manifest row and write the feature file plus its lock
    sidecar. Engines are constructed on demand so tests can inject stubs."""
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    rows = load_manifest(manifest_path)

    if ocr is None:
        from .ocr import default_engine

        ocr = default_engine()
    if text_encoder is None:
        from .text_encoder import TextEncoder

        text_encoder = TextEncoder()
    if image_encoder is None:
        from .image_encoder import ImageEncoder

        image_encoder = ImageEncoder()

    def extract_one(row: ManifestRow):
        try:
            with Image.open(row.path) as img:
                img.load()
                text = ocr.read(img)
                record = FeatureRecord(
                    id=row.id,
                    label=row.label,
                    ocr_text=text,
                    text_vec=text_encoder.embed(text),
                    image_vec=image_encoder.embed(img),
                )
        except (OSError, ValueError) as exc:
            return row, None, f"{type(exc).__name__}: {exc}"
        return row, record, None

    if jobs == 1:
        outcomes = [extract_one(row) for row in rows]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(extract_one, rows))

    records: list[FeatureRecord] = []
    skipped: list[dict[str, str]] = []
    counts = {0: 0, 1: 0}
    for row, record, error in outcomes:
        if record is None:
            logger.warning("skipping %s (%s): %s", row.id, row.path, error)
            skipped.append({"id": row.id, "path": str(row.path), "error": error})
        else:
            records.append(record)
            counts[row.label] += 1
    if not records:
        raise ExtractionError(f"all {len(rows)} manifest rows failed extraction")

    write_feature_file(out_path, records)

    models = {
        "ocr": ocr.name,
        "text_encoder": getattr(text_encoder, "identifier", type(text_encoder).__name__),
        "image_encoder": getattr(image_encoder, "identifier", type(image_encoder).__name__),
    }
    lock = {
        "format": "FUSB v1",
        "models": models,
        "libraries": _library_versions(),
        "preprocessing": {
            "image": "RGB, resize short side 256, center crop 224, scale to [0,1], "
            "normalize mean=(0.485,0.456,0.406) std=(0.229,0.224,0.225)",
            "text": "OCR text, hashed word tokens, final-layer mean pooling "
            "excluding boundary tokens, empty text maps to the zero vector",
        },
    }
    lock_path_for(out_path).write_text(json.dumps(lock, indent=2) + "\n", encoding="utf-8")

    return ExtractionSummary(
        out_path=str(out_path),
        total=len(rows),
        written=len(records),
        class_counts=counts,
        skipped=skipped,
        models=models,
    )
