"""Independent scalar reference implementations used as test oracles.

Everything here is written with plain python loops against the published
recipes, deliberately avoiding the vectorized code paths in the package.
"""

import math
from collections import deque


def reference_canny(gray, sigma=1.0, low=50.0, high=150.0):
    """Scalar five-stage canny; returns a set of (x, y) edge pixels.

    Same recipe as the production detector: direct 2-d Gaussian blur with
    edge-replicated borders, x256 integer quantization of the blurred image,
    integer 3x3 Sobel, squared-magnitude NMS over four integer-decided
    direction bins (strict > toward the x-1/y-1 side), double threshold,
    8-connected hysteresis.
    """
    h = len(gray)
    w = len(gray[0])
    radius = math.ceil(3.0 * sigma)

    kernel = {}
    norm = 0.0
    for u in range(-radius, radius + 1):
        for v in range(-radius, radius + 1):
            kernel[(u, v)] = math.exp(-(u * u + v * v) / (2.0 * sigma * sigma))
            norm += kernel[(u, v)]
    for key in kernel:
        kernel[key] /= norm

    def src(y, x):
        yy = min(max(y, 0), h - 1)
        xx = min(max(x, 0), w - 1)
        return float(gray[yy][xx])

    bq = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for u in range(-radius, radius + 1):
                for v in range(-radius, radius + 1):
                    acc += kernel[(u, v)] * src(y + u, x + v)
            bq[y][x] = math.floor(acc * 256.0 + 0.5)

    def bval(y, x):
        yy = min(max(y, 0), h - 1)
        xx = min(max(x, 0), w - 1)
        return bq[yy][xx]

    gx = [[0] * w for _ in range(h)]
    gy = [[0] * w for _ in range(h)]
    mag2 = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            right = bval(y - 1, x + 1) + 2 * bval(y, x + 1) + bval(y + 1, x + 1)
            left = bval(y - 1, x - 1) + 2 * bval(y, x - 1) + bval(y + 1, x - 1)
            down = bval(y + 1, x - 1) + 2 * bval(y + 1, x) + bval(y + 1, x + 1)
            up = bval(y - 1, x - 1) + 2 * bval(y - 1, x) + bval(y - 1, x + 1)
            gx[y][x] = right - left
            gy[y][x] = down - up
            mag2[y][x] = gx[y][x] ** 2 + gy[y][x] ** 2

    def mag_at(y, x):
        if 0 <= y < h and 0 <= x < w:
            return mag2[y][x]
        return 0

    low_sq = (low * 256.0) ** 2
    high_sq = (high * 256.0) ** 2
    weak = set()
    strong = set()
    for y in range(h):
        for x in range(w):
            gxv, gyv = gx[y][x], gy[y][x]
            axv, ayv = abs(gxv), abs(gyv)
            s2 = (axv + ayv) ** 2
            if s2 < 2 * axv * axv:
                na, nb = (y, x - 1), (y, x + 1)
            elif s2 < 2 * ayv * ayv:
                na, nb = (y - 1, x), (y + 1, x)
            elif (gxv > 0) == (gyv > 0):
                na, nb = (y - 1, x - 1), (y + 1, x + 1)
            else:
                na, nb = (y - 1, x + 1), (y + 1, x - 1)
            m = mag2[y][x]
            if not (m > mag_at(*na) and m >= mag_at(*nb)):
                continue
            if m >= low_sq:
                weak.add((x, y))
            if m >= high_sq:
                strong.add((x, y))

    edges = set(strong)
    queue = deque(strong)
    while queue:
        x, y = queue.popleft()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                cand = (x + dx, y + dy)
                if cand in weak and cand not in edges:
                    edges.add(cand)
                    queue.append(cand)
    return edges


def reference_rasterize(points, size):
    """Scalar landmark-contour rasterizer; returns a set of (x, y) pixels.

    Topology: open polylines for jaw 0-16, brows 17-21 / 22-26, nose bridge
    27-30; closed loops for nose base 31-35, eyes 36-41 / 42-47, outer mouth
    48-59, inner mouth 60-67. Endpoints floor(v+0.5)-rounded, clamped, and
    segment endpoints lexicographically ordered before the integer Bresenham
    error walk.
    """
    w, h = size
    rounded = []
    for px, py in points:
        xi = int(math.floor(px + 0.5))
        yi = int(math.floor(py + 0.5))
        rounded.append((min(max(xi, 0), w - 1), min(max(yi, 0), h - 1)))

    groups = [
        (list(range(0, 17)), False),
        (list(range(17, 22)), False),
        (list(range(22, 27)), False),
        (list(range(27, 31)), False),
        (list(range(31, 36)), True),
        (list(range(36, 42)), True),
        (list(range(42, 48)), True),
        (list(range(48, 60)), True),
        (list(range(60, 68)), True),
    ]
    out = set()
    for idx, closed in groups:
        chain = idx + [idx[0]] if closed else idx
        for i, j in zip(chain[:-1], chain[1:]):
            a, b = rounded[i], rounded[j]
            if b < a:
                a, b = b, a
            x0, y0 = a
            x1, y1 = b
            dx = abs(x1 - x0)
            dy = -abs(y1 - y0)
            step_x = 1 if x0 < x1 else -1
            step_y = 1 if y0 < y1 else -1
            err = dx + dy
            while True:
                out.add((x0, y0))
                if x0 == x1 and y0 == y1:
                    break
                twice = 2 * err
                if twice >= dy:
                    err += dy
                    x0 += step_x
                if twice <= dx:
                    err += dx
                    y0 += step_y
    return out


def point_in_polygon(polygon, px, py):
    """Scalar even-odd crossing test (same formula the package vectorizes)."""
    inside = False
    x0, y0 = polygon[-1]
    for x1, y1 in polygon:
        if (y1 > py) != (y0 > py):
            xint = (x0 - x1) * (py - y1) / (y0 - y1) + x1
            if px < xint:
                inside = not inside
        x0, y0 = x1, y1
    return inside


def scalar_gan_losses(d_real, d_fake, eps=1e-7):
    """Loop evaluation of the discriminator/generator log losses."""
    def clamped(v):
        return min(max(float(v), eps), 1.0 - eps)

    real = [clamped(v) for v in d_real]
    fake = [clamped(v) for v in d_fake]
    loss_d = -sum(math.log(v) for v in real) / len(real)
    loss_d += -sum(math.log(1.0 - v) for v in fake) / len(fake)
    loss_g = -sum(math.log(v) for v in fake) / len(fake)
    return loss_d, loss_g


def scalar_l1(a, b):
    a = list(a)
    b = list(b)
    return sum(abs(x - y) for x, y in zip(a, b)) / len(a)


def adam_single_step(value, grad, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8):
    """One hand-rolled bias-corrected update from zero moments."""
    m = (1.0 - beta1) * grad
    v = (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1)
    vhat = v / (1.0 - beta2)
    return value - lr * mhat / (math.sqrt(vhat) + eps)
