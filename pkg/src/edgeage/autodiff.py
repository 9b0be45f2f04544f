"""Reverse-mode automatic differentiation on numpy arrays.

A Tensor wraps an ndarray (float32 for training, float64 for gradient
checking) and records the op graph through parent links; backward() walks
the recorded operations once in reverse topological order and accumulates
gradients into every reachable tensor with requires_grad set. Gradients
accumulate across calls -- the caller (optimizer) zeroes them between steps.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError, ShapeError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def item(self):
        return float(self.data.item())

    def detach(self):
        """A view of the same buffer, cut off from the recorded graph."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    # -- operator sugar (scalar or same-shape tensor operands) --------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def mean(self):
        return mean(self)

    def sum(self):
        return sum_(self)


def _result(data, parents, backward_fn):
    """Wrap an op result, recording it only if a parent needs gradients."""
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _scalar(value, like: np.ndarray):
    """A python number as a 0-d array of the operand's dtype (no upcasting)."""
    return np.asarray(value, dtype=like.dtype)


def backward(loss: Tensor):
    """Populate grads of every requires_grad ancestor of a scalar loss."""
    if loss.data.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.data.shape}")
    # iterative topological sort; recursion would overflow on deep graphs
    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    if loss.grad is None:
        loss.grad = np.zeros_like(loss.data)
    loss.grad += np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# -- elementwise ops ---------------------------------------------------------


def add(a: Tensor, b):
    if isinstance(b, Tensor):
        if a.data.shape != b.data.shape:
            raise ShapeError(f"add: shapes {a.data.shape} vs {b.data.shape}")
        out_data = a.data + b.data

        def bw(g):
            _accum(a, g)
            _accum(b, g)

        return _result(out_data, (a, b), bw)

    out_data = a.data + _scalar(b, a.data)

    def bw(g):
        _accum(a, g)

    return _result(out_data, (a,), bw)


def mul(a: Tensor, b):
    if isinstance(b, Tensor):
        if a.data.shape != b.data.shape:
            raise ShapeError(f"mul: shapes {a.data.shape} vs {b.data.shape}")
        out_data = a.data * b.data

        def bw(g):
            _accum(a, g * b.data)
            _accum(b, g * a.data)

        return _result(out_data, (a, b), bw)

    s = _scalar(b, a.data)
    out_data = a.data * s

    def bw(g):
        _accum(a, g * s)

    return _result(out_data, (a,), bw)


def log(a: Tensor):
    out_data = np.log(a.data)

    def bw(g):
        _accum(a, g / a.data)

    return _result(out_data, (a,), bw)


def tanh(a: Tensor):
    out_data = np.tanh(a.data)

    def bw(g):
        _accum(a, g * (1.0 - out_data * out_data))

    return _result(out_data, (a,), bw)


def sigmoid(a: Tensor):
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def bw(g):
        _accum(a, g * out_data * (1.0 - out_data))

    return _result(out_data, (a,), bw)


def relu(a: Tensor):
    out_data = np.maximum(a.data, 0)

    def bw(g):
        # subgradient 0 at exactly 0
        _accum(a, g * (a.data > 0))

    return _result(out_data, (a,), bw)


def leaky_relu(a: Tensor, slope=0.2):
    out_data = np.where(a.data > 0, a.data, a.data * _scalar(slope, a.data))

    def bw(g):
        # subgradient 0 at exactly 0 (package-wide kink convention)
        factor = (a.data > 0).astype(a.data.dtype) + (a.data < 0).astype(a.data.dtype) * _scalar(slope, a.data)
        _accum(a, g * factor)

    return _result(out_data, (a,), bw)


def abs_(a: Tensor):
    out_data = np.abs(a.data)

    def bw(g):
        _accum(a, g * np.sign(a.data))

    return _result(out_data, (a,), bw)


def clamp(a: Tensor, lo, hi):
    out_data = np.clip(a.data, lo, hi)

    def bw(g):
        _accum(a, g * ((a.data >= lo) & (a.data <= hi)))

    return _result(out_data, (a,), bw)


def mean(a: Tensor):
    out_data = np.asarray(a.data.mean(dtype=a.data.dtype))
    n = a.data.size

    def bw(g):
        _accum(a, np.full_like(a.data, g / n))

    return _result(out_data, (a,), bw)


def sum_(a: Tensor):
    out_data = np.asarray(a.data.sum(dtype=a.data.dtype))

    def bw(g):
        _accum(a, np.full_like(a.data, g))

    return _result(out_data, (a,), bw)


def concat(tensors, axis=1):
    datas = [t.data for t in tensors]
    out_data = np.concatenate(datas, axis=axis)
    splits = np.cumsum([d.shape[axis] for d in datas])[:-1]

    def bw(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accum(t, piece)

    return _result(out_data, tuple(tensors), bw)


def dropout(a: Tensor, rate: float, rng: np.random.Generator, training: bool = True):
    """Inverted dropout; identity when not training or rate == 0."""
    if not training or rate <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= rate).astype(a.data.dtype)
    scale = _scalar(1.0 / (1.0 - rate), a.data)
    mask = keep * scale
    out_data = a.data * mask

    def bw(g):
        _accum(a, g * mask)

    return _result(out_data, (a,), bw)


# -- spatial ops (NCHW) ------------------------------------------------------


def _windows(padded: np.ndarray, k: int, stride: int):
    win = sliding_window_view(padded, (k, k), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d(x: Tensor, w: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0):
    """Cross-correlation of an NCHW input with OIKK weights."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input/weight, got {x.data.shape} and {w.data.shape}")
    n, c, h, wid = x.data.shape
    o, i, kh, kw = w.data.shape
    if c != i:
        raise ShapeError(f"conv2d: input channels {x.data.shape} do not match weight {w.data.shape}")
    if kh != kw:
        raise ShapeError(f"conv2d: only square kernels supported, got {w.data.shape}")
    k = kh
    hp, wp = h + 2 * padding, wid + 2 * padding
    if k > hp or k > wp:
        raise ShapeError(f"conv2d: kernel {w.data.shape} does not fit padded input {x.data.shape} (padding={padding})")
    if bias is not None and bias.data.shape != (o,):
        raise ShapeError(f"conv2d: bias shape {bias.data.shape} does not match out channels {o}")
    oh = (hp - k) // stride + 1
    ow = (wp - k) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = _windows(xp, k, stride)  # (N, C, OH, OW, K, K)
    out = np.tensordot(win, w.data, axes=((1, 4, 5), (1, 2, 3)))  # (N, OH, OW, O)
    out = np.ascontiguousarray(np.moveaxis(out, 3, 1))
    if bias is not None:
        out += bias.data.reshape(1, o, 1, 1)

    parents = (x, w) if bias is None else (x, w, bias)

    def bw(g):
        if w.requires_grad:
            gw = np.tensordot(win, g, axes=((0, 2, 3), (0, 2, 3)))  # (C, K, K, O)
            _accum(w, np.moveaxis(gw, 3, 0))
        if bias is not None and bias.requires_grad:
            _accum(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for u in range(k):
                for v in range(k):
                    z = np.tensordot(g, w.data[:, :, u, v], axes=((1,), (0,)))  # (N, OH, OW, C)
                    gxp[:, :, u:u + stride * oh:stride, v:v + stride * ow:stride] += np.moveaxis(z, 3, 1)
            if padding:
                gxp = gxp[:, :, padding:padding + h, padding:padding + wid]
            _accum(x, gxp)

    return _result(out, parents, bw)


def conv_transpose2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0):
    """Adjoint of conv2d: maps (N,O,H,W) through OIKK weights to (N,I,H',W')."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv_transpose2d expects 4-d input/weight, got {x.data.shape} and {w.data.shape}")
    n, o, h, wid = x.data.shape
    ow_, i, kh, kw = w.data.shape
    if o != ow_:
        raise ShapeError(f"conv_transpose2d: input channels {x.data.shape} do not match weight {w.data.shape}")
    if kh != kw:
        raise ShapeError(f"conv_transpose2d: only square kernels supported, got {w.data.shape}")
    k = kh
    hf = (h - 1) * stride + k
    wf = (wid - 1) * stride + k
    oh = hf - 2 * padding
    ow = wf - 2 * padding
    if oh <= 0 or ow <= 0:
        raise ShapeError(f"conv_transpose2d: padding {padding} swallows the {hf}x{wf} full output")

    full = np.zeros((n, i, hf, wf), dtype=x.data.dtype)
    for u in range(k):
        for v in range(k):
            z = np.tensordot(x.data, w.data[:, :, u, v], axes=((1,), (0,)))  # (N, H, W, I)
            full[:, :, u:u + stride * h:stride, v:v + stride * wid:stride] += np.moveaxis(z, 3, 1)
    out = full[:, :, padding:padding + oh, padding:padding + ow] if padding else full

    def bw(g):
        gp = np.pad(g, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        win = _windows(gp, k, stride)  # (N, I, H, W, K, K)
        if x.requires_grad:
            gx = np.tensordot(win, w.data, axes=((1, 4, 5), (1, 2, 3)))  # (N, H, W, O)
            _accum(x, np.moveaxis(gx, 3, 1))
        if w.requires_grad:
            gw = np.tensordot(win, x.data, axes=((0, 2, 3), (0, 2, 3)))  # (I, K, K, O)
            _accum(w, np.transpose(gw, (3, 0, 1, 2)))

    return _result(out, (x, w), bw)


def instance_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5):
    """Normalize each (sample, channel) plane to zero mean / unit variance, then scale and shift."""
    if x.data.ndim != 4:
        raise ShapeError(f"instance_norm expects NCHW input, got {x.data.shape}")
    n, c, h, w = x.data.shape
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise ShapeError(f"instance_norm: gamma/beta {gamma.data.shape}/{beta.data.shape} do not match {c} channels")
    mu = x.data.mean(axis=(2, 3), keepdims=True, dtype=x.data.dtype)
    xc = x.data - mu
    var = np.mean(xc * xc, axis=(2, 3), keepdims=True, dtype=x.data.dtype)
    inv = 1.0 / np.sqrt(var + _scalar(eps, x.data))
    xhat = xc * inv
    out = gamma.data.reshape(1, c, 1, 1) * xhat + beta.data.reshape(1, c, 1, 1)

    def bw(g):
        if gamma.requires_grad:
            _accum(gamma, (g * xhat).sum(axis=(0, 2, 3)))
        if beta.requires_grad:
            _accum(beta, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gs = g * gamma.data.reshape(1, c, 1, 1)
            m1 = gs.mean(axis=(2, 3), keepdims=True, dtype=x.data.dtype)
            m2 = (gs * xhat).mean(axis=(2, 3), keepdims=True, dtype=x.data.dtype)
            _accum(x, inv * (gs - m1 - xhat * m2))

    return _result(out, (x, gamma, beta), bw)


def avg_pool2d(x: Tensor, k: int = 2):
    n, c, h, w = x.data.shape
    if h % k or w % k:
        raise ShapeError(f"avg_pool2d: spatial size {(h, w)} not divisible by {k}")
    blocks = x.data.reshape(n, c, h // k, k, w // k, k)
    out = blocks.mean(axis=(3, 5), dtype=x.data.dtype)

    def bw(g):
        gexp = np.repeat(np.repeat(g, k, axis=2), k, axis=3) / _scalar(k * k, x.data)
        _accum(x, gexp)

    return _result(out, (x,), bw)


# -- finite-difference checking ---------------------------------------------


def finite_difference_grads(f, tensors, h=1e-5):
    """Central-difference gradients of scalar f() w.r.t. each tensor's elements.

    Perturbs in place; tensors should be float64 for meaningful precision.
    """
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            step = h * max(1.0, abs(orig))
            flat[idx] = orig + step
            fp = float(f().data.item())
            flat[idx] = orig - step
            fm = float(f().data.item())
            flat[idx] = orig
            gflat[idx] = (fp - fm) / (2.0 * step)
        grads.append(g)
    return grads


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor=1e-4):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(f, tensors, h=1e-5, floor=1e-4):
    """Max relative error between recorded and finite-difference gradients of scalar f()."""
    for t in tensors:
        t.grad = None
    loss = f()
    backward(loss)
    numeric = finite_difference_grads(f, tensors, h=h)
    worst = 0.0
    for t, num in zip(tensors, numeric):
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        worst = max(worst, max_relative_error(analytic, num, floor=floor))
    return worst
