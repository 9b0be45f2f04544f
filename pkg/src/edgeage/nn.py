"""Network building blocks and loss functions on top of the autodiff engine."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, ShapeError

SCORE_EPS = 1e-7  # log-loss clamp; keeps scores out of {0, 1}


class Parameter(Tensor):
    """A trainable tensor; its dotted path name is stamped by Module traversal."""

    __slots__ = ("name",)

    def __init__(self, data, name=""):
        super().__init__(data, requires_grad=True)
        self.name = name


class Module:
    """Minimal container: child modules and parameters found by attribute walk."""

    def __init__(self):
        self.training = True

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix=""):
        for key, value in vars(self).items():
            path = f"{prefix}.{key}" if prefix else key
            if isinstance(value, Parameter):
                value.name = path
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path)
            elif isinstance(value, (list, tuple)):
                for idx, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{idx}")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def train(self, mode=True):
        self.training = mode
        for value in vars(self).values():
            if isinstance(value, Module):
                value.train(mode)
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        item.train(mode)
        return self

    def eval(self):
        return self.train(False)


class Conv2d(Module):
    def __init__(self, in_ch, out_ch, kernel, stride=1, padding=0, bias=True, rng=None, init_std=0.02):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        w = rng.normal(0.0, init_std, size=(out_ch, in_ch, kernel, kernel)).astype(np.float32)
        self.weight = Parameter(w)
        self.bias = Parameter(np.zeros(out_ch, dtype=np.float32)) if bias else None
        self.stride = stride
        self.padding = padding

    def forward(self, x):
        return ad.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class ConvTranspose2d(Module):
    def __init__(self, in_ch, out_ch, kernel, stride=1, padding=0, rng=None, init_std=0.02):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        w = rng.normal(0.0, init_std, size=(in_ch, out_ch, kernel, kernel)).astype(np.float32)
        self.weight = Parameter(w)
        self.stride = stride
        self.padding = padding

    def forward(self, x):
        return ad.conv_transpose2d(x, self.weight, stride=self.stride, padding=self.padding)


class InstanceNorm2d(Module):
    def __init__(self, channels, eps=1e-5):
        super().__init__()
        self.gamma = Parameter(np.ones(channels, dtype=np.float32))
        self.beta = Parameter(np.zeros(channels, dtype=np.float32))
        self.eps = eps

    def forward(self, x):
        return ad.instance_norm(x, self.gamma, self.beta, eps=self.eps)


class Dropout(Module):
    """Generator noise source; identity in eval mode so inference is deterministic."""

    def __init__(self, rate, rng):
        super().__init__()
        self.rate = rate
        self.rng = rng

    def forward(self, x):
        return ad.dropout(x, self.rate, self.rng, training=self.training)


# -- losses -------------------------------------------------------------------


def _check_scores(t: Tensor, label: str):
    lo = float(t.data.min()) if t.data.size else 0.5
    hi = float(t.data.max()) if t.data.size else 0.5
    if lo < 0.0 or hi > 1.0:
        raise ContractError(f"{label} scores outside [0, 1]: min={lo}, max={hi}")


def gan_log_losses(d_real: Tensor, d_fake: Tensor):
    """Log-loss pair for a sigmoid discriminator score grid.

    loss_D = -E[log D(real)] - E[log(1 - D(fake))]; loss_G uses the
    non-saturating -E[log D(fake)]. Scores are clamped to
    [SCORE_EPS, 1 - SCORE_EPS] after a [0, 1] contract check.
    """
    _check_scores(d_real, "d_real")
    _check_scores(d_fake, "d_fake")
    r = ad.clamp(d_real, SCORE_EPS, 1.0 - SCORE_EPS)
    f = ad.clamp(d_fake, SCORE_EPS, 1.0 - SCORE_EPS)
    loss_d = -ad.mean(ad.log(r)) - ad.mean(ad.log(1.0 - f))
    loss_g = -ad.mean(ad.log(f))
    return loss_d, loss_g


def l1_loss(a: Tensor, b: Tensor):
    if a.data.shape != b.data.shape:
        raise ShapeError(f"l1_loss: shapes {a.data.shape} vs {b.data.shape}")
    return ad.mean(ad.abs_(a - b))


def activation(x: Tensor, kind: str, slope: float = 0.2):
    if kind == "relu":
        return ad.relu(x)
    if kind == "leaky_relu":
        return ad.leaky_relu(x, slope)
    if kind == "tanh":
        return ad.tanh(x)
    if kind == "sigmoid":
        return ad.sigmoid(x)
    raise ContractError(f"unknown activation kind {kind!r}")
