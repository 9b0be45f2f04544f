"""Procedural toy-face corpus: drawn faces with exact landmarks and manifest.

Young faces are smooth; old faces carry wrinkle arcs inside the face region,
giving the two domains a measurable interior-stroke-density gap under the
default canny settings. Landmarks are emitted exactly at construction
coordinates, so preprocessing is fully testable end to end.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .edgemap import LandmarkSet, save_landmarks
from .errors import ContractError
from .images import Image, save_image

CANVAS = 96


def _fill_ellipse(canvas, cx, cy, a, b, color):
    h, w, _ = canvas.shape
    yy, xx = np.mgrid[0:h, 0:w]
    mask = ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2 <= 1.0
    canvas[mask] = color


def _stamp(canvas, x, y, color, thickness):
    h, w, _ = canvas.shape
    for dy in range(thickness):
        for dx in range(thickness):
            px, py = x + dx, y + dy
            if 0 <= px < w and 0 <= py < h:
                canvas[py, px] = color


def _draw_polyline(canvas, pts, color, thickness=1, closed=False):
    rounded = [(int(math.floor(x + 0.5)), int(math.floor(y + 0.5))) for x, y in pts]
    chain = rounded + [rounded[0]] if closed else rounded
    for (x0, y0), (x1, y1) in zip(chain[:-1], chain[1:]):
        dx = abs(x1 - x0)
        dy = -abs(y1 - y0)
        sx = 1 if x0 < x1 else -1
        sy = 1 if y0 < y1 else -1
        err = dx + dy
        while True:
            _stamp(canvas, x0, y0, color, thickness)
            if x0 == x1 and y0 == y1:
                break
            e2 = 2 * err
            if e2 >= dy:
                err += dy
                x0 += sx
            if e2 <= dx:
                err += dx
                y0 += sy


def _ellipse_arc(cx, cy, a, b, deg_from, deg_to, n):
    theta = np.deg2rad(np.linspace(deg_from, deg_to, n))
    return np.stack([cx + a * np.cos(theta), cy + b * np.sin(theta)], axis=1)


def make_landmarks(cx, cy, a, b) -> LandmarkSet:
    """68 canonical points on an ellipse-parameterized face."""
    pts = np.zeros((68, 2))
    pts[0:17] = _ellipse_arc(cx, cy, a, b, 200.0, -20.0, 17)                     # jaw
    brow_y = cy - 0.45 * b
    lift = 1.5 * np.sin(np.linspace(0, np.pi, 5))
    pts[17:22, 0] = np.linspace(cx - 0.7 * a, cx - 0.15 * a, 5)
    pts[17:22, 1] = brow_y - lift
    pts[22:27, 0] = np.linspace(cx + 0.15 * a, cx + 0.7 * a, 5)
    pts[22:27, 1] = brow_y - lift
    pts[27:31, 0] = cx
    pts[27:31, 1] = np.linspace(cy - 0.25 * b, cy + 0.05 * b, 4)                 # nose bridge
    pts[31:36] = _ellipse_arc(cx, cy + 0.16 * b, 0.12 * a, 0.05 * b, 0, 288, 5)  # nose base
    pts[36:42] = _ellipse_arc(cx - 0.4 * a, cy - 0.25 * b, 0.16 * a, 0.08 * b, 0, 300, 6)
    pts[42:48] = _ellipse_arc(cx + 0.4 * a, cy - 0.25 * b, 0.16 * a, 0.08 * b, 0, 300, 6)
    pts[48:60] = _ellipse_arc(cx, cy + 0.5 * b, 0.28 * a, 0.1 * b, 0, 330, 12)   # outer mouth
    pts[60:68] = _ellipse_arc(cx, cy + 0.5 * b, 0.16 * a, 0.04 * b, 0, 315, 8)   # inner mouth
    return LandmarkSet(pts)


def _wrinkle_arcs(cx, cy, a, b):
    """Arc strokes kept well inside the jaw+brow polygon (cheeks, under-eye,
    chin, nasolabial); the forehead sits outside that polygon. Deterministic
    given the face geometry, so wrinkle placement is predictable from the
    contour -- both translation directions stay information-preserving."""
    arcs = []
    for side in (-1.0, 1.0):
        for k in range(3):  # cheek arcs
            ax = cx + side * 0.45 * a
            ay = cy + (0.02 + 0.11 * k) * b
            arcs.append(_ellipse_arc(ax, ay, 0.18 * a, 0.05 * b, 200, 340, 7))
        arcs.append(_ellipse_arc(cx + side * 0.4 * a, cy - 0.12 * b, 0.15 * a, 0.05 * b, 20, 160, 7))  # under-eye
        start = np.array([cx + side * 0.16 * a, cy + 0.22 * b])
        end = np.array([cx + side * 0.3 * a, cy + 0.42 * b])
        arcs.append(np.stack([start, (start + end) / 2 + [side * 0.03 * a, 0.0], end]))  # nasolabial
    arcs.append(_ellipse_arc(cx, cy + 0.72 * b, 0.2 * a, 0.05 * b, 200, 340, 7))  # chin
    arcs.append(_ellipse_arc(cx, cy + 0.3 * b, 0.08 * a, 0.03 * b, 200, 340, 5))  # above lip
    return arcs


def draw_face(rng, old: bool):
    """One toy face: (Image, LandmarkSet, face box (x, y, w, h))."""
    cx = CANVAS / 2 + rng.uniform(-3, 3)
    cy = CANVAS / 2 + 2 + rng.uniform(-3, 3)
    a = 20.0 + rng.uniform(-2, 2)
    b = 25.0 + rng.uniform(-2, 2)

    bg = np.array([208, 210, 216], float) + rng.uniform(-6, 6, 3)
    skin = np.array([188, 172, 158], float) + rng.uniform(-12, 12, 3)
    hair = np.array([72, 60, 52], float) + rng.uniform(-18, 18, 3)
    feature = skin - 65.0          # soft strokes: visible but below the canny thresholds
    wrinkle = np.array([52, 44, 40], float)

    canvas = np.empty((CANVAS, CANVAS, 3), float)
    canvas[:] = bg
    _fill_ellipse(canvas, cx, cy - 0.15 * b, a * 1.05, b * 1.1, hair)  # hair cap behind the face
    _fill_ellipse(canvas, cx, cy, a, b, skin)

    lm = make_landmarks(cx, cy, a, b)
    pts = lm.points
    _draw_polyline(canvas, _ellipse_arc(cx, cy, a, b, 200, -20, 33), feature)       # face outline
    _draw_polyline(canvas, pts[17:22], feature)                                      # brows
    _draw_polyline(canvas, pts[22:27], feature)
    _draw_polyline(canvas, pts[27:31], feature)                                      # nose bridge
    _draw_polyline(canvas, pts[31:36], feature, closed=True)                         # nose base
    _draw_polyline(canvas, pts[36:42], feature, closed=True)                         # eyes
    _draw_polyline(canvas, pts[42:48], feature, closed=True)
    _draw_polyline(canvas, pts[48:60], feature, closed=True)                         # mouth
    if old:
        for arc in _wrinkle_arcs(cx, cy, a, b, rng):
            _draw_polyline(canvas, arc, wrinkle, thickness=2)

    img = Image(np.clip(np.floor(canvas + 0.5), 0, 255).astype(np.uint8))
    x0 = max(int(cx - a) - 2, 0)
    y0 = max(int(cy - b) - 2, 0)
    x1 = min(int(cx + a) + 3, CANVAS)
    y1 = min(int(cy + b) + 3, CANVAS)
    return img, lm, (x0, y0, x1 - x0, y1 - y0)


def synth_toy_data(n_per_group: int, seed: int, out_dir) -> Path:
    """Write images/, landmarks/, and manifest.csv; returns the manifest path."""
    if n_per_group < 1:
        raise ContractError(f"n_per_group must be >= 1, got {n_per_group}")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "landmarks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    rows = []
    for group, old in (("young", False), ("old", True)):
        for idx in range(n_per_group):
            img, lm, (x, y, w, h) = draw_face(rng, old)
            age = int(rng.integers(18, 29)) if group == "young" else int(rng.integers(60, 86))
            stem = f"{group}_{idx:03d}"
            save_image(img, out_dir / "images" / f"{stem}.png")
            save_landmarks(lm, out_dir / "landmarks" / f"{stem}.txt")
            rows.append([f"images/{stem}.png", f"landmarks/{stem}.txt", x, y, w, h, age])

    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image", "landmarks", "x", "y", "w", "h", "age"])
        writer.writerows(rows)
    return manifest
