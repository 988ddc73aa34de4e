"""Text recovery from card-style images.

Two engines share one duck-typed interface (``name`` attribute plus a
``read(image) -> str`` method). ``TesseractOcr`` shells out to a system
tesseract binary when one is installed. ``TemplateOcr`` is a self-contained
fallback that segments dark-on-light glyphs and matches them against
templates rendered from a bundled monospace font; it targets clean,
high-contrast card text and degrades to garbage, never to an exception, on
noisy or low-resolution input.
"""

from __future__ import annotations

import shutil
import subprocess
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

DEFAULT_FONT = "/usr/share/fonts/truetype/dejavu/DejaVuSansMono-Bold.ttf"
DEFAULT_CHARSET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789!?"

# Images whose intensity range is narrower than this are treated as blank.
_MIN_CONTRAST = 30
# Blank-row/column tolerance when grouping ink into lines and glyph cells.
_LINE_MERGE_GAP = 2
_CELL_MERGE_GAP = 1
# Ink runs wider than this many estimated advances hold more than one glyph.
_SPLIT_THRESHOLD = 1.3


def _runs(mask: np.ndarray, merge_gap: int) -> list[tuple[int, int]]:
    """Inclusive [start, end] runs of True, merging runs merge_gap or closer."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    runs = []
    start = prev = int(idx[0])
    for i in idx[1:]:
        i = int(i)
        if i - prev > merge_gap + 1:
            runs.append((start, prev))
            start = i
        prev = i
    runs.append((start, prev))
    return runs


def _normalize_cell(ink: np.ndarray, box: tuple[int, int]) -> np.ndarray:
    """Tight-crop an ink mask and rescale it to a fixed float grid in [0, 1]."""
    rows = _runs(ink.any(axis=1), merge_gap=ink.shape[0])
    cols = _runs(ink.any(axis=0), merge_gap=ink.shape[1])
    if not rows or not cols:
        return np.zeros((box[1], box[0]))
    r0, r1 = rows[0][0], rows[-1][1]
    c0, c1 = cols[0][0], cols[-1][1]
    crop = (ink[r0 : r1 + 1, c0 : c1 + 1] * 255).astype(np.uint8)
    resized = Image.fromarray(crop, mode="L").resize(box, Image.Resampling.BILINEAR)
    return np.asarray(resized, dtype=np.float64) / 255.0


class TemplateOcr:
    """Glyph-template matcher over a fixed uppercase charset."""

    name = "glyph-template"

    def __init__(
        self,
        font_path: str = DEFAULT_FONT,
        charset: str = DEFAULT_CHARSET,
        render_size: int = 48,
        cell_box: tuple[int, int] = (20, 28),
    ):
        from PIL import ImageDraw, ImageFont

        self.font_path = font_path
        self.charset = charset
        self.cell_box = cell_box
        font = ImageFont.truetype(font_path, render_size)
        self._templates = []
        caps_height = None
        ink_widths = []
        for ch in charset:
            canvas = Image.new("L", (3 * render_size, 3 * render_size), 255)
            ImageDraw.Draw(canvas).text((render_size, render_size), ch, fill=0, font=font)
            ink = np.asarray(canvas, dtype=np.float64) < 128
            cols = _runs(ink.any(axis=0), merge_gap=ink.shape[1])
            ink_widths.append(cols[-1][1] - cols[0][0] + 1)
            if ch == "M":
                rows = _runs(ink.any(axis=1), merge_gap=ink.shape[0])
                caps_height = rows[-1][1] - rows[0][0] + 1
            self._templates.append((ch, _normalize_cell(ink, cell_box)))
        # Monospace geometry scales linearly with font size. These two ratios
        # let read() estimate the column advance of unseen text from its line
        # height and from the widths of isolated glyphs.
        advance = float(font.getlength("M"))
        self._advance_per_caps = advance / float(caps_height)
        self._ink_width_per_advance = float(np.median(ink_widths)) / advance

    def _classify(self, cell: np.ndarray) -> str:
        grid = _normalize_cell(cell, self.cell_box)
        scores = [float(np.mean(np.abs(grid - tmpl))) for _, tmpl in self._templates]
        return self._templates[int(np.argmin(scores))][0]

    def read(self, image: Image.Image) -> str:
        gray = np.asarray(image.convert("L"), dtype=np.float64)
        lo, hi = float(gray.min()), float(gray.max())
        if hi - lo < _MIN_CONTRAST:
            return ""
        ink = gray < (lo + hi) / 2.0
        if ink.mean() > 0.5:
            # Text covers a minority of pixels; a majority-ink mask means the
            # card is light-on-dark, so flip it.
            ink = ~ink
        lines = []
        for r0, r1 in _runs(ink.any(axis=1), _LINE_MERGE_GAP):
            band = ink[r0 : r1 + 1]
            advance = (r1 - r0 + 1) * self._advance_per_caps
            raw = _runs(band.any(axis=0), _CELL_MERGE_GAP)
            # The height-based estimate overshoots on lines with descenders
            # (Q drops below the baseline); when the band has enough isolated
            # glyphs, their median width gives a tighter estimate.
            singles = [c1 - c0 + 1 for c0, c1 in raw
                       if c1 - c0 + 1 <= _SPLIT_THRESHOLD * advance]
            if len(singles) >= 3:
                refined = float(np.median(singles)) / self._ink_width_per_advance
                if 0.7 * advance <= refined <= 1.15 * advance:
                    advance = refined
            cells = []
            for c0, c1 in raw:
                width = c1 - c0 + 1
                if width > _SPLIT_THRESHOLD * advance:
                    # Touching glyphs: cut the run into equal advance-sized slices.
                    pieces = max(2, round(width / advance))
                    bounds = np.linspace(c0, c1 + 1, pieces + 1)
                    cells += [
                        (int(bounds[j]), int(bounds[j + 1]) - 1) for j in range(pieces)
                    ]
                else:
                    cells.append((c0, c1))
            if not cells:
                continue
            chars = []
            prev_center = None
            for c0, c1 in cells:
                center = (c0 + c1) / 2.0
                if prev_center is not None:
                    # Monospace centers sit one advance apart; extra advances
                    # between neighbors are spaces.
                    chars.append(" " * max(0, round((center - prev_center) / advance) - 1))
                chars.append(self._classify(band[:, c0 : c1 + 1]))
                prev_center = center
            lines.append("".join(chars))
        return "\n".join(lines)


class TesseractOcr:
    """Wrapper around a system tesseract binary."""

    name = "tesseract"

    def __init__(self, binary: str = "tesseract"):
        self.binary = binary

    def read(self, image: Image.Image) -> str:
        with tempfile.TemporaryDirectory() as tmp:
            png = Path(tmp) / "page.png"
            image.save(png)
            proc = subprocess.run(
                [self.binary, str(png), "stdout", "--psm", "6"],
                capture_output=True,
                text=True,
                check=True,
            )
        return proc.stdout.strip()


def default_engine() -> TemplateOcr | TesseractOcr:
    """Prefer a system tesseract; fall back to the bundled template matcher."""
    if shutil.which("tesseract"):
        return TesseractOcr()
    return TemplateOcr()
