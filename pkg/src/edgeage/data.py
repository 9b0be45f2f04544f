"""Dataset manifest ingestion, age-group splitting, and identity provisioning."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .edge2face import EMBED_DIM, IdentityEmbedding, load_embedding
from .edgemap import BoundingBox, load_landmarks
from .errors import DataError
from .images import Image, crop, load_image, luma, resize_bilinear

log = logging.getLogger(__name__)

YOUNG_MAX_AGE = 28
OLD_MIN_AGE = 60

MANIFEST_COLUMNS = ("image", "landmarks", "x", "y", "w", "h", "age")
FALLBACK_EMBEDDER_SEED = 0xFACE


def age_group(age: int):
    """'young' (<= 28), 'old' (>= 60), or None for the excluded band."""
    if age <= YOUNG_MAX_AGE:
        return "young"
    if age >= OLD_MIN_AGE:
        return "old"
    return None


@dataclass
class ManifestEntry:
    image_path: str
    landmark_path: str
    box: BoundingBox
    age: int
    embedding_path: str | None = None


@dataclass
class IngestReport:
    total_rows: int = 0
    accepted: int = 0
    excluded: list = field(default_factory=list)  # (line_number, reason)

    def summary(self):
        lines = [f"{self.accepted} of {self.total_rows} entries accepted"]
        if self.total_rows == 0:
            lines = ["0 entries"]
        for lineno, reason in self.excluded:
            lines.append(f"  line {lineno}: skipped ({reason})")
        if self.excluded:
            lines.append(f"{len(self.excluded)} entries excluded")
        return "\n".join(lines)


def ingest(manifest_path):
    """Validate a manifest CSV into ManifestEntry records plus a report.

    Structurally malformed rows (wrong column count, non-numeric fields) are
    hard errors naming the line; per-entry problems (missing files, wrong
    landmark count, box outside image, negative age) skip the entry with a
    recorded reason.
    """
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if not rows:
        return [], IngestReport()
    header = [c.strip() for c in rows[0]]
    if header[:7] != list(MANIFEST_COLUMNS) or len(header) > 8 or (len(header) == 8 and header[7] != "embedding"):
        raise DataError(
            f"{manifest_path}:1: header must be image,landmarks,x,y,w,h,age[,embedding], got {','.join(header)}")

    base = manifest_path.parent
    entries = []
    report = IngestReport()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        report.total_rows += 1
        if len(row) not in (7, 8):
            raise DataError(f"{manifest_path}:{lineno}: expected 7 or 8 columns, got {len(row)}")
        try:
            x, y, w, h = (int(row[i]) for i in range(2, 6))
            age = int(row[6])
        except ValueError as exc:
            raise DataError(f"{manifest_path}:{lineno}: {exc}") from exc

        def resolve(p):
            p = p.strip()
            path = Path(p)
            return str(path if path.is_absolute() else base / path)

        image_path = resolve(row[0])
        landmark_path = resolve(row[1])
        embedding_path = resolve(row[7]) if len(row) == 8 and row[7].strip() else None

        if age < 0:
            report.excluded.append((lineno, "age"))
            continue
        if w <= 0 or h <= 0:
            report.excluded.append((lineno, "box extents"))
            continue
        try:
            img = load_image(image_path)
        except DataError:
            report.excluded.append((lineno, "image file"))
            continue
        if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
            report.excluded.append((lineno, "box outside image"))
            continue
        try:
            load_landmarks(landmark_path)
        except DataError as exc:
            reason = "landmark count" if "expected 68" in str(exc) else "landmark file"
            report.excluded.append((lineno, reason))
            continue
        if embedding_path is not None and not Path(embedding_path).is_file():
            report.excluded.append((lineno, "embedding file"))
            continue

        entries.append(ManifestEntry(image_path, landmark_path, BoundingBox(x, y, w, h), age, embedding_path))
        report.accepted += 1
    return entries, report


def split_by_age(entries):
    """Partition into (young, old, excluded) by the age-group predicates."""
    young = [e for e in entries if age_group(e.age) == "young"]
    old = [e for e in entries if age_group(e.age) == "old"]
    excluded = [e for e in entries if age_group(e.age) is None]
    log.info("age split: %d young, %d old, %d excluded", len(young), len(old), len(excluded))
    return young, old, excluded


class FallbackEmbedder:
    """Deterministic stand-in identity model: a fixed seeded random projection
    of the 64x64 grayscale face crop, L2-normalized."""

    CROP_SIZE = 64

    def __init__(self, seed=FALLBACK_EMBEDDER_SEED):
        rng = np.random.default_rng(seed)
        n = self.CROP_SIZE * self.CROP_SIZE
        self.projection = rng.standard_normal((EMBED_DIM, n)).astype(np.float32) / np.sqrt(n)

    def embed_crop(self, face_crop: Image) -> IdentityEmbedding:
        gray = luma(resize_bilinear(face_crop, self.CROP_SIZE, self.CROP_SIZE))
        flat = gray.astype(np.float32).reshape(-1) / 255.0
        vec = self.projection @ flat
        return IdentityEmbedding(vec, source="fallback")


def embed(entry: ManifestEntry, embedder: FallbackEmbedder | None = None) -> IdentityEmbedding:
    """Identity embedding for a manifest entry: from file when declared,
    otherwise the fallback projection of the face crop."""
    if entry.embedding_path is not None:
        return load_embedding(entry.embedding_path)
    embedder = embedder or FallbackEmbedder()
    img = load_image(entry.image_path)
    face = crop(img, entry.box.x, entry.box.y, entry.box.w, entry.box.h)
    return embedder.embed_crop(face)
