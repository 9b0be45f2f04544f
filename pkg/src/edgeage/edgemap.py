"""Edge-map extraction: ROI expansion, canny, landmark contour rasterization,
composition, and the interior-stroke coloring scheme with its inverse.

Every decision made after the float Gaussian blur (gradients, non-maximum
suppression, thresholds, hysteresis) is integer-exact so that independent
implementations of the same recipe agree pixel-for-pixel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DataError, ShapeError
from .images import Image

log = logging.getLogger(__name__)

BLACK = (0, 0, 0)
WHITE = (255, 255, 255)
RED = (255, 0, 0)
GREEN = (0, 255, 0)

CLASS_NONE = 0
CLASS_CONTOUR = 1
CLASS_INTERIOR = 2
CLASS_EXTERIOR = 3

# 68-point landmark topology: (first, last, closed)
LANDMARK_GROUPS = (
    (0, 16, False),   # jaw
    (17, 21, False),  # right brow
    (22, 26, False),  # left brow
    (27, 30, False),  # nose bridge
    (31, 35, True),   # nose base
    (36, 41, True),   # right eye
    (42, 47, True),   # left eye
    (48, 59, True),   # outer mouth
    (60, 67, True),   # inner mouth
)


@dataclass
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ContractError(f"bounding box needs positive extents, got {self}")


@dataclass
class LandmarkSet:
    points: np.ndarray  # (68, 2) float, canonical order

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (68, 2):
            raise ContractError(f"landmark set needs exactly 68 (x, y) points, got shape {pts.shape}")
        self.points = pts


@dataclass
class EdgeMap:
    """3-channel stroke image restricted to BLACK/WHITE/RED/GREEN plus a
    per-pixel stroke-class mask (contour / interior-canny / exterior-canny)."""

    pixels: np.ndarray                    # (h, w, 3) uint8
    classes: np.ndarray                   # (h, w) uint8, CLASS_* values
    polygon: np.ndarray | None = field(default=None)  # face region, (n, 2) float

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        self.classes = np.asarray(self.classes, dtype=np.uint8)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ShapeError(f"edge map pixels must be (h, w, 3), got {self.pixels.shape}")
        if self.classes.shape != self.pixels.shape[:2]:
            raise ShapeError(f"class mask {self.classes.shape} does not match pixels {self.pixels.shape}")
        if self.polygon is not None:
            self.polygon = np.asarray(self.polygon, dtype=np.float64)

    @property
    def size(self):
        return self.pixels.shape[1], self.pixels.shape[0]


def admissible_colors_only(edge: EdgeMap) -> bool:
    px = edge.pixels.reshape(-1, 3)
    ok = np.zeros(px.shape[0], dtype=bool)
    for color in (BLACK, WHITE, RED, GREEN):
        ok |= (px == np.array(color, dtype=np.uint8)).all(axis=1)
    return bool(ok.all())


# -- ROI ----------------------------------------------------------------------


def expand_roi(box: BoundingBox, factor: float, image_bounds: BoundingBox) -> BoundingBox:
    """Scale side lengths by `factor` about the box center, then clip to the image."""
    if factor < 1.0:
        raise ContractError(f"roi expansion factor must be >= 1, got {factor}")
    cx = box.x + box.w / 2.0
    cy = box.y + box.h / 2.0
    nw = int(math.floor(box.w * factor + 0.5))
    nh = int(math.floor(box.h * factor + 0.5))
    nx = int(math.floor(cx - nw / 2.0 + 0.5))
    ny = int(math.floor(cy - nh / 2.0 + 0.5))
    x0 = max(nx, image_bounds.x)
    y0 = max(ny, image_bounds.y)
    x1 = min(nx + nw, image_bounds.x + image_bounds.w)
    y1 = min(ny + nh, image_bounds.y + image_bounds.h)
    if x1 <= x0 or y1 <= y0:
        raise DataError(f"expanded roi {nx, ny, nw, nh} has empty intersection with image {image_bounds}")
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


# -- canny --------------------------------------------------------------------


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(3.0 * sigma)
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    k = np.exp(-(xx * xx + yy * yy) / (2.0 * sigma * sigma))
    return k / k.sum()


def canny(gray: np.ndarray, sigma: float = 1.0, low: float = 50.0, high: float = 150.0) -> np.ndarray:
    """Classic five-stage canny on an (h, w) uint8 array; returns a {0, 255} mask.

    Recipe: direct 2-d Gaussian blur (radius ceil(3*sigma), edge-replicated
    border), blurred values quantized to round(v*256) integers, 3x3 Sobel,
    non-maximum suppression over 4 integer-decided direction bins comparing
    squared magnitudes (strict > toward the x-1/y-1 neighbor, >= toward the
    other), double threshold on squared magnitude, 8-connected hysteresis.
    """
    if low < 0 or high < low:
        raise ContractError(f"canny thresholds need high >= low >= 0, got low={low}, high={high}")
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise ShapeError(f"canny expects a grayscale (h, w) array, got {gray.shape}")
    h, w = gray.shape
    radius = math.ceil(3.0 * sigma)
    kernel = gaussian_kernel(sigma)
    padded = np.pad(gray.astype(np.float64), radius, mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(padded, kernel.shape)
    blurred = np.einsum("yxuv,uv->yx", win, kernel, optimize=True)
    bq = np.floor(blurred * 256.0 + 0.5).astype(np.int64)

    bp = np.pad(bq, 1, mode="edge")
    gx = (bp[:-2, 2:] + 2 * bp[1:-1, 2:] + bp[2:, 2:]) - (bp[:-2, :-2] + 2 * bp[1:-1, :-2] + bp[2:, :-2])
    gy = (bp[2:, :-2] + 2 * bp[2:, 1:-1] + bp[2:, 2:]) - (bp[:-2, :-2] + 2 * bp[:-2, 1:-1] + bp[:-2, 2:])
    mag2 = gx * gx + gy * gy

    ax = np.abs(gx)
    ay = np.abs(gy)
    s2 = (ax + ay) ** 2
    horiz = s2 < 2 * ax * ax           # gradient within 22.5 deg of the x axis
    vert = s2 < 2 * ay * ay
    diag = ~(horiz | vert)
    d45 = diag & ((gx > 0) == (gy > 0))
    d135 = diag & ~((gx > 0) == (gy > 0))

    m = np.zeros((h + 2, w + 2), dtype=np.int64)
    m[1:-1, 1:-1] = mag2
    west, east = m[1:-1, :-2], m[1:-1, 2:]
    north, south = m[:-2, 1:-1], m[2:, 1:-1]
    nw, se = m[:-2, :-2], m[2:, 2:]
    ne, sw = m[:-2, 2:], m[2:, :-2]
    na = np.select([horiz, vert, d45, d135], [west, north, nw, ne])
    nb = np.select([horiz, vert, d45, d135], [east, south, se, sw])
    keep = (mag2 > na) & (mag2 >= nb)

    low_sq = (low * 256.0) ** 2
    high_sq = (high * 256.0) ** 2
    weak = keep & (mag2 >= low_sq)
    strong = keep & (mag2 >= high_sq)

    visited = strong.copy()
    frontier = strong.copy()
    while frontier.any():
        f = np.zeros((h + 2, w + 2), dtype=bool)
        f[1:-1, 1:-1] = frontier
        dil = (
            f[:-2, :-2] | f[:-2, 1:-1] | f[:-2, 2:]
            | f[1:-1, :-2] | f[1:-1, 2:]
            | f[2:, :-2] | f[2:, 1:-1] | f[2:, 2:]
        )
        new = dil & weak & ~visited
        visited |= new
        frontier = new
    return np.where(visited, 255, 0).astype(np.uint8)


# -- landmark contour ---------------------------------------------------------


def _bresenham(x0: int, y0: int, x1: int, y1: int):
    pts = []
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        pts.append((x0, y0))
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy
    return pts


def rasterize_landmark_contour(landmarks: LandmarkSet, size) -> np.ndarray:
    """Rasterize the canonical landmark topology; returns a {0, 255} mask.

    Segment endpoints are rounded with floor(v+0.5), clamped into the image,
    and canonically ordered (lexicographic by (x, y)) before the Bresenham
    walk, so reversed polylines light the same pixels.
    """
    w, h = size
    if w <= 0 or h <= 0:
        raise ContractError(f"rasterize needs a positive size, got {size}")
    mask = np.zeros((h, w), dtype=bool)
    pts = np.floor(landmarks.points + 0.5).astype(np.int64)
    pts[:, 0] = np.clip(pts[:, 0], 0, w - 1)
    pts[:, 1] = np.clip(pts[:, 1], 0, h - 1)
    for first, last, closed in LANDMARK_GROUPS:
        idx = list(range(first, last + 1))
        pairs = list(zip(idx[:-1], idx[1:]))
        if closed:
            pairs.append((idx[-1], idx[0]))
        for i, j in pairs:
            a = (int(pts[i, 0]), int(pts[i, 1]))
            b = (int(pts[j, 0]), int(pts[j, 1]))
            if b < a:
                a, b = b, a
            for x, y in _bresenham(a[0], a[1], b[0], b[1]):
                mask[y, x] = True
    return np.where(mask, 255, 0).astype(np.uint8)


def face_polygon(landmarks: LandmarkSet) -> np.ndarray:
    """Face region: jaw 0..16 closed across the forehead by brows 26..17."""
    pts = landmarks.points
    return np.vstack([pts[0:17], pts[26:16:-1]])


def points_in_polygon(polygon: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Even-odd crossing test for pixel centers (px, py) against a float polygon."""
    polygon = np.asarray(polygon, dtype=np.float64)
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    inside = np.zeros(px.shape, dtype=bool)
    x0, y0 = polygon[-1]
    for x1, y1 in polygon:
        cond = (y1 > py) != (y0 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (x0 - x1) * (py - y1) / (y0 - y1) + x1
            hit = cond & (px < xint)
        inside ^= hit
        x0, y0 = x1, y1
    return inside


# -- composition and coloring -------------------------------------------------


def compose_edge_map(canny_mask: np.ndarray, contour_mask: np.ndarray, face_region: np.ndarray) -> EdgeMap:
    """Union of strokes on black, all WHITE; classes record contour (which wins
    on overlap), interior canny (strictly inside face_region), exterior canny."""
    canny_b = np.asarray(canny_mask) > 0
    contour_b = np.asarray(contour_mask) > 0
    if canny_b.shape != contour_b.shape:
        raise ShapeError(f"mask sizes differ: {canny_b.shape} vs {contour_b.shape}")
    h, w = canny_b.shape
    classes = np.zeros((h, w), dtype=np.uint8)
    classes[contour_b] = CLASS_CONTOUR
    canny_only = canny_b & ~contour_b
    ys, xs = np.nonzero(canny_only)
    if len(ys):
        inside = points_in_polygon(face_region, xs, ys)
        classes[ys[inside], xs[inside]] = CLASS_INTERIOR
        classes[ys[~inside], xs[~inside]] = CLASS_EXTERIOR
    pixels = np.zeros((h, w, 3), dtype=np.uint8)
    pixels[classes != CLASS_NONE] = WHITE
    return EdgeMap(pixels, classes, polygon=face_region)


def colorize_interior_canny(edge: EdgeMap, color) -> EdgeMap:
    if tuple(color) not in (RED, GREEN):
        raise ContractError(f"interior canny color must be RED or GREEN, got {color}")
    pixels = np.zeros_like(edge.pixels)
    pixels[edge.classes != CLASS_NONE] = WHITE
    pixels[edge.classes == CLASS_INTERIOR] = color
    return EdgeMap(pixels, edge.classes.copy(), polygon=edge.polygon)


def decolorize(edge: EdgeMap) -> EdgeMap:
    """Every non-black pixel becomes WHITE."""
    pixels = np.zeros_like(edge.pixels)
    pixels[edge.pixels.any(axis=2)] = WHITE
    return EdgeMap(pixels, edge.classes.copy(), polygon=edge.polygon)


def filter_interior_canny(edge: EdgeMap) -> EdgeMap:
    """Drop interior-canny strokes; contour and exterior canny untouched."""
    pixels = edge.pixels.copy()
    classes = edge.classes.copy()
    interior = classes == CLASS_INTERIOR
    pixels[interior] = BLACK
    classes[interior] = CLASS_NONE
    return EdgeMap(pixels, classes, polygon=edge.polygon)


def edge_map_from_soft(soft: np.ndarray, polygon: np.ndarray) -> EdgeMap:
    """Binarize a generated (3, h, w) map in [-1, 1] at 0.5 on the per-pixel
    channel max (after rescaling to [0, 1]) and re-classify strokes against
    the face polygon; output strokes are WHITE (decolorized form)."""
    soft = np.asarray(soft)
    if soft.ndim != 3 or soft.shape[0] != 3:
        raise ShapeError(f"soft edge map must be (3, h, w), got {soft.shape}")
    v01 = (soft + 1.0) / 2.0
    stroke = v01.max(axis=0) >= 0.5
    h, w = stroke.shape
    classes = np.zeros((h, w), dtype=np.uint8)
    ys, xs = np.nonzero(stroke)
    if len(ys):
        inside = points_in_polygon(polygon, xs, ys)
        classes[ys[inside], xs[inside]] = CLASS_INTERIOR
        classes[ys[~inside], xs[~inside]] = CLASS_EXTERIOR
    pixels = np.zeros((h, w, 3), dtype=np.uint8)
    pixels[stroke] = WHITE
    return EdgeMap(pixels, classes, polygon=polygon)


def interior_stroke_count(edge: EdgeMap) -> int:
    """Non-black pixels strictly inside the face polygon (class-agnostic)."""
    if edge.polygon is None:
        raise ContractError("edge map carries no face polygon")
    ys, xs = np.nonzero(edge.pixels.any(axis=2))
    if not len(ys):
        return 0
    return int(points_in_polygon(edge.polygon, xs, ys).sum())


# -- tensor bridging ----------------------------------------------------------


def edge_to_array(edge: EdgeMap) -> np.ndarray:
    """(3, h, w) float32 in [-1, 1]."""
    return (edge.pixels.astype(np.float32) / 127.5 - 1.0).transpose(2, 0, 1)


def image_to_array(img: Image) -> np.ndarray:
    """(3, h, w) float32 in [-1, 1]; single-channel images are broadcast."""
    px = img.pixels if img.channels == 3 else np.repeat(img.pixels, 3, axis=2)
    return (px.astype(np.float32) / 127.5 - 1.0).transpose(2, 0, 1)


def array_to_image(arr: np.ndarray) -> Image:
    """(3, h, w) float in [-1, 1] to an 8-bit image, rounding half up."""
    px = np.clip(np.floor((np.asarray(arr) + 1.0) * 127.5 + 0.5), 0, 255)
    return Image(px.astype(np.uint8).transpose(1, 2, 0))


# -- files --------------------------------------------------------------------


def load_landmarks(path, image_size=None) -> LandmarkSet:
    """68 lines of "x y" decimals; blank lines and '#' comments ignored.

    With image_size=(w, h), out-of-bounds points are clamped with a warning.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read landmarks {path}: {exc}") from exc
    pts = []
    for lineno, line in enumerate(raw.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise DataError(f"{path}:{lineno}: expected 'x y', got {line!r}")
        try:
            pts.append((float(fields[0]), float(fields[1])))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    if len(pts) != 68:
        raise DataError(f"{path}: expected 68 landmarks, got {len(pts)}")
    arr = np.array(pts, dtype=np.float64)
    if image_size is not None:
        w, h = image_size
        clamped = np.clip(arr, [0.0, 0.0], [w - 1.0, h - 1.0])
        if not np.array_equal(clamped, arr):
            log.warning("%s: %d landmark(s) outside %dx%d image, clamped",
                        path, int((clamped != arr).any(axis=1).sum()), w, h)
            arr = clamped
    return LandmarkSet(arr)


def save_landmarks(landmarks: LandmarkSet, path):
    with open(path, "w", encoding="utf-8") as fh:
        for x, y in landmarks.points:
            fh.write(f"{x:.4f} {y:.4f}\n")


def save_edge_map(edge: EdgeMap, stem):
    """Write <stem>.png (pixels), <stem>.classes.pgm, and <stem>.poly.txt."""
    from .images import Image, save_image

    stem = str(stem)
    save_image(Image(edge.pixels), stem + ".png")
    save_image(Image(edge.classes[:, :, None]), stem + ".classes.pgm")
    if edge.polygon is not None:
        with open(stem + ".poly.txt", "w", encoding="utf-8") as fh:
            for x, y in edge.polygon:
                fh.write(f"{float(x)!r} {float(y)!r}\n")


def load_edge_map(stem) -> EdgeMap:
    import os

    from .images import load_image

    stem = str(stem)
    pixels = load_image(stem + ".png").pixels
    classes = load_image(stem + ".classes.pgm").pixels[:, :, 0]
    polygon = None
    if os.path.exists(stem + ".poly.txt"):
        rows = []
        with open(stem + ".poly.txt", "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    x, y = line.split()
                    rows.append((float(x), float(y)))
        polygon = np.array(rows, dtype=np.float64)
    return EdgeMap(pixels, classes, polygon=polygon)
