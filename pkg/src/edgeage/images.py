"""8-bit image container and file I/O (PNG via Pillow, ASCII PPM/PGM fallback)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError


@dataclass
class Image:
    """Row-major 8-bit pixels, shape (height, width, channels), channels 1 or 3."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ShapeError(f"image pixels must be (h, w, 1|3), got {px.shape}")
        self.pixels = px.astype(np.uint8, copy=False)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def channels(self):
        return self.pixels.shape[2]


def to_rgb(img: Image) -> Image:
    if img.channels == 3:
        return img
    return Image(np.repeat(img.pixels, 3, axis=2))


def luma(img: Image) -> np.ndarray:
    """Integer-exact ITU-R 601 grayscale, (h, w) uint8."""
    if img.channels == 1:
        return img.pixels[:, :, 0].copy()
    px = img.pixels.astype(np.int64)
    gray = (299 * px[:, :, 0] + 587 * px[:, :, 1] + 114 * px[:, :, 2] + 500) // 1000
    return gray.astype(np.uint8)


def crop(img: Image, x: int, y: int, w: int, h: int) -> Image:
    if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise ShapeError(f"crop ({x},{y},{w},{h}) outside {img.width}x{img.height} image")
    return Image(img.pixels[y:y + h, x:x + w].copy())


def resize_bilinear(img: Image, out_w: int, out_h: int) -> Image:
    """Bilinear resize with half-pixel centers, rounding half up."""
    src = img.pixels.astype(np.float64)
    h, w = img.height, img.width
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    top = src[y0[:, None], x0[None, :]] * (1 - fx) + src[y0[:, None], x1[None, :]] * fx
    bot = src[y1[:, None], x0[None, :]] * (1 - fx) + src[y1[:, None], x1[None, :]] * fx
    out = top * (1 - fy) + bot * fy
    return Image(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))


# -- file formats -------------------------------------------------------------


def load_image(path) -> Image:
    path = str(path)
    lower = path.lower()
    if lower.endswith((".ppm", ".pgm")):
        return _load_pnm(path)
    try:
        from PIL import Image as PILImage
    except ImportError as exc:  # pragma: no cover - Pillow is a declared dep
        raise DataError(f"Pillow unavailable and {path} is not PPM/PGM: {exc}") from exc
    try:
        with PILImage.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            arr = np.asarray(im)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return Image(arr)


def save_image(img: Image, path):
    path = str(path)
    lower = path.lower()
    if lower.endswith((".ppm", ".pgm")):
        _save_pnm(img, path)
        return
    from PIL import Image as PILImage

    arr = img.pixels[:, :, 0] if img.channels == 1 else img.pixels
    PILImage.fromarray(arr).save(path)


def _load_pnm(path) -> Image:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("ascii")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens:
        raise DataError(f"{path}: empty PNM file")
    magic = tokens.pop(0)
    if magic not in ("P2", "P3"):
        raise DataError(f"{path}: unsupported PNM magic {magic!r} (ASCII P2/P3 only)")
    channels = 3 if magic == "P3" else 1
    try:
        w, h, maxval = int(tokens[0]), int(tokens[1]), int(tokens[2])
        values = np.array(tokens[3:3 + w * h * channels], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed PNM header/data: {exc}") from exc
    if maxval != 255 or values.size != w * h * channels:
        raise DataError(f"{path}: expected maxval 255 and {w * h * channels} samples")
    return Image(values.reshape(h, w, channels).astype(np.uint8))


def _save_pnm(img: Image, path):
    if str(path).lower().endswith(".pgm"):
        if img.channels != 1:
            raise ShapeError("PGM output requires a single-channel image")
        magic = "P2"
        flat = img.pixels[:, :, 0].reshape(-1)
    else:
        magic = "P3"
        flat = to_rgb(img).pixels.reshape(-1)
    lines = [magic, f"{img.width} {img.height}", "255"]
    for start in range(0, flat.size, 16):
        lines.append(" ".join(str(v) for v in flat[start:start + 16]))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
