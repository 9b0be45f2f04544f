"""Finite-difference verification suite over every differentiable op."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, check_gradients
from .nn import gan_log_losses, l1_loss


def _t(rng, shape, scale=1.0, off_kinks=False):
    vals = rng.normal(0.0, scale, size=shape)
    if off_kinks:
        vals = np.where(np.abs(vals) < 0.05 * scale, 0.25 * scale, vals)
    return Tensor(vals, requires_grad=True, dtype=np.float64)


def _proj(rng, shape):
    return Tensor(rng.normal(size=shape), dtype=np.float64)


def run_gradient_suite(seed=0, instances=20):
    """Max relative error per op over `instances` random cases (float64).

    Returns a list of (op name, worst relative error) pairs; every entry is
    expected to come in under 1e-3.
    """
    rng = np.random.default_rng(seed)
    results = []

    def record(name, build):
        worst = 0.0
        for _ in range(instances):
            f, tensors = build()
            worst = max(worst, check_gradients(f, tensors))
        results.append((name, worst))

    def conv_case():
        n, ci, co = int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
        k = int(rng.choice([1, 3, 4]))
        s = int(rng.choice([1, 2]))
        p = int(rng.integers(0, 2))
        h = int(rng.integers(max(k, 4), 8))
        x = _t(rng, (n, ci, h, h))
        w = _t(rng, (co, ci, k, k), scale=0.5)
        b = _t(rng, (co,))
        oh = (h + 2 * p - k) // s + 1
        pr = _proj(rng, (n, co, oh, oh))

        def f():
            return ad.mean(ad.mul(ad.conv2d(x, w, b, stride=s, padding=p), pr))

        return f, [x, w, b]

    record("conv2d", conv_case)

    def convt_case():
        n, ci, co = int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
        k = int(rng.choice([2, 3, 4]))
        s = int(rng.choice([1, 2]))
        p = int(rng.integers(0, 2))
        h = int(rng.integers(2, 6))
        oh = (h - 1) * s + k - 2 * p
        if oh <= 0:
            return convt_case()
        x = _t(rng, (n, ci, h, h))
        w = _t(rng, (ci, co, k, k), scale=0.5)
        pr = _proj(rng, (n, co, oh, oh))

        def f():
            return ad.mean(ad.mul(ad.conv_transpose2d(x, w, stride=s, padding=p), pr))

        return f, [x, w]

    record("conv_transpose2d", convt_case)

    def inorm_case():
        n, c, h = int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(3, 7))
        x = _t(rng, (n, c, h, h))
        g = _t(rng, (c,))
        b = _t(rng, (c,))
        pr = _proj(rng, (n, c, h, h))

        def f():
            return ad.mean(ad.mul(ad.instance_norm(x, g, b), pr))

        return f, [x, g, b]

    record("instance_norm", inorm_case)

    kinds = {
        "relu": (ad.relu, True),
        "leaky_relu": (lambda t: ad.leaky_relu(t, 0.2), True),
        "tanh": (ad.tanh, False),
        "sigmoid": (ad.sigmoid, False),
    }
    for name, (fn, kinky) in kinds.items():
        def act_case(fn=fn, kinky=kinky):
            x = _t(rng, (int(rng.integers(5, 60)),), off_kinks=kinky)
            pr = _proj(rng, x.shape)

            def f():
                return ad.mean(ad.mul(fn(x), pr))

            return f, [x]

        record(name, act_case)

    def l1_case():
        n = int(rng.integers(5, 50))
        a = _t(rng, (n,))
        b = _t(rng, (n,))
        if np.any(np.abs(a.data - b.data) < 1e-3):  # keep away from |.| ties
            b.data += 0.1

        def f():
            return l1_loss(a, b)

        return f, [a, b]

    record("l1_loss", l1_case)

    def gan_case():
        n = int(rng.integers(4, 30))
        real = Tensor(rng.uniform(0.05, 0.95, size=n), requires_grad=True, dtype=np.float64)
        fake = Tensor(rng.uniform(0.05, 0.95, size=n), requires_grad=True, dtype=np.float64)

        def f():
            loss_d, loss_g = gan_log_losses(real, fake)
            return loss_d + 0.5 * loss_g

        return f, [real, fake]

    record("gan_log_losses", gan_case)

    def pool_case():
        n, c, h = int(rng.integers(1, 3)), int(rng.integers(1, 3)), int(rng.choice([4, 6]))
        x = _t(rng, (n, c, h, h))
        pr = _proj(rng, (n, c, h // 2, h // 2))

        def f():
            return ad.mean(ad.mul(ad.avg_pool2d(x, 2), pr))

        return f, [x]

    record("avg_pool2d", pool_case)

    return results
