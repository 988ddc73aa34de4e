"""Image-to-feature extraction pipeline producing FUSB files.

Feeds the fusion benchmark through its file format only; nothing here
imports the benchmark package.
"""

from .fusb import (FeatureRecord, IMAGE_DIM, TEXT_DIM, read_feature_file,
                   serialize, write_feature_file)
from .image_encoder import ImageEncoder
from .ocr import TemplateOcr, TesseractOcr, default_engine
from .pipeline import (ExtractionError, ExtractionSummary, ManifestError,
                       ManifestRow, build_feature_file, load_manifest,
                       lock_path_for)
from .text_encoder import TextEncoder

__all__ = [
    "FeatureRecord",
    "IMAGE_DIM",
    "TEXT_DIM",
    "read_feature_file",
    "serialize",
    "write_feature_file",
    "ImageEncoder",
    "TemplateOcr",
    "TesseractOcr",
    "default_engine",
    "ExtractionError",
    "ExtractionSummary",
    "ManifestError",
    "ManifestRow",
    "build_feature_file",
    "load_manifest",
    "lock_path_for",
    "TextEncoder",
]
