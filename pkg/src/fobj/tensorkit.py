"""Small numpy-backed reverse-mode autodiff kernel.

Covers exactly the ops needed by the policy networks, the point encoder and
the center regressor: dense matmul, broadcasting arithmetic, smooth
activations, reductions, row gather/concat, and the clip/minimum pair used by
the PPO surrogate. Gradients are exact (no approximations), so analytic
derivatives can be validated against central finite differences in 64-bit
mode.

Dtype follows the input arrays: float32 for training, float64 for gradient
checks (`Tensor.astype`).
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A numpy array plus a backward closure into the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad=False, _prev=()):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _prev)
        self._backward = None
        self._prev = _prev

    # ---- graph plumbing ----

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def astype(self, dtype):
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)

    def detach(self):
        return Tensor(self.data)

    def item(self):
        return self.data.item()

    def zero_grad(self):
        self.grad = None

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data, dtype=self.data.dtype)
        self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo, seen = [], set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._prev:
                visit(p)
            topo.append(t)

        visit(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(topo):
            if t._backward is not None and t.requires_grad:
                t._backward()

    # ---- arithmetic ----

    def __add__(self, other):
        other = _wrap(other, self.dtype)
        out = Tensor(self.data + other.data, _prev=(self, other))

        def bw():
            if self.requires_grad:
                self._accum(_unbroadcast(out.grad, self.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(out.grad, other.shape))

        out._backward = bw
        return out

    def __mul__(self, other):
        other = _wrap(other, self.dtype)
        out = Tensor(self.data * other.data, _prev=(self, other))

        def bw():
            if self.requires_grad:
                self._accum(_unbroadcast(out.grad * other.data, self.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(out.grad * self.data, other.shape))

        out._backward = bw
        return out

    def __neg__(self):
        return self * (-1.0)

    def __sub__(self, other):
        return self + (-_wrap(other, self.dtype))

    def __truediv__(self, other):
        other = _wrap(other, self.dtype)
        return self * other.powi(-1.0)

    def __radd__(self, other):
        return self + other

    def __rmul__(self, other):
        return self * other

    def __rsub__(self, other):
        return (-self) + other

    def powi(self, p):
        """Elementwise power with a constant exponent."""
        out = Tensor(self.data ** p, _prev=(self,))

        def bw():
            if self.requires_grad:
                self._accum(out.grad * p * self.data ** (p - 1))

        out._backward = bw
        return out

    def __matmul__(self, other):
        other = _wrap(other, self.dtype)
        out = Tensor(self.data @ other.data, _prev=(self, other))

        def bw():
            if self.requires_grad:
                self._accum(out.grad @ other.data.T)
            if other.requires_grad:
                other._accum(self.data.T @ out.grad)

        out._backward = bw
        return out

    # ---- elementwise functions ----

    def exp(self):
        out = Tensor(np.exp(self.data), _prev=(self,))

        def bw():
            if self.requires_grad:
                self._accum(out.grad * out.data)

        out._backward = bw
        return out

    def log(self):
        out = Tensor(np.log(self.data), _prev=(self,))

        def bw():
            if self.requires_grad:
                self._accum(out.grad / self.data)

        out._backward = bw
        return out

    def tanh(self):
        out = Tensor(np.tanh(self.data), _prev=(self,))

        def bw():
            if self.requires_grad:
                self._accum(out.grad * (1.0 - out.data * out.data))

        out._backward = bw
        return out

    def sigmoid(self):
        # stable two-sided form
        d = self.data
        s = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                     np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d)))).astype(d.dtype)
        out = Tensor(s, _prev=(self,))

        def bw():
            if self.requires_grad:
                self._accum(out.grad * out.data * (1.0 - out.data))

        out._backward = bw
        return out

    def clip(self, lo, hi):
        out = Tensor(np.clip(self.data, lo, hi), _prev=(self,))
        mask = ((self.data >= lo) & (self.data <= hi)).astype(self.data.dtype)

        def bw():
            if self.requires_grad:
                self._accum(out.grad * mask)

        out._backward = bw
        return out

    # ---- reductions ----

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), _prev=(self,))

        def bw():
            if self.requires_grad:
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self._accum(np.broadcast_to(g, self.shape).astype(self.data.dtype))

        out._backward = bw
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def max(self, axis, keepdims=False):
        """Max along one axis; gradient routes to the first argmax."""
        idx = np.argmax(self.data, axis=axis)
        out_data = np.take_along_axis(self.data, np.expand_dims(idx, axis), axis=axis)
        if not keepdims:
            out_data = np.squeeze(out_data, axis=axis)
        out = Tensor(out_data, _prev=(self,))

        def bw():
            if self.requires_grad:
                g = out.grad if keepdims else np.expand_dims(out.grad, axis)
                full = np.zeros_like(self.data)
                np.put_along_axis(full, np.expand_dims(idx, axis), g, axis=axis)
                self._accum(full)

        out._backward = bw
        return out

    # ---- shape / gather ----

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), _prev=(self,))

        def bw():
            if self.requires_grad:
                self._accum(out.grad.reshape(self.shape))

        out._backward = bw
        return out

    @property
    def T(self):
        out = Tensor(self.data.T, _prev=(self,))

        def bw():
            if self.requires_grad:
                self._accum(out.grad.T)

        out._backward = bw
        return out

    def __getitem__(self, key):
        out = Tensor(self.data[key], _prev=(self,))

        def bw():
            if self.requires_grad:
                full = np.zeros_like(self.data)
                np.add.at(full, key, out.grad)
                self._accum(full)

        out._backward = bw
        return out


def _wrap(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def param(data):
    """Leaf tensor that accumulates gradients."""
    return Tensor(np.asarray(data), requires_grad=True)


def concat(tensors, axis=0):
    datas = [t.data for t in tensors]
    out = Tensor(np.concatenate(datas, axis=axis), _prev=tuple(tensors))
    sizes = [d.shape[axis] for d in datas]
    offs = np.cumsum([0] + sizes)

    def bw():
        for t, a, b in zip(tensors, offs[:-1], offs[1:]):
            if t.requires_grad:
                sl = [slice(None)] * out.grad.ndim
                sl[axis] = slice(a, b)
                t._accum(out.grad[tuple(sl)])

    out._backward = bw
    return out


def stack(tensors):
    """Stack scalar tensors into a 1-D tensor."""
    return concat([t.reshape(1) for t in tensors], axis=0)


def minimum(a, b):
    """Elementwise min; on ties the gradient routes to the first argument."""
    b = _wrap(b, a.dtype)
    take_a = a.data <= b.data
    out = Tensor(np.where(take_a, a.data, b.data), _prev=(a, b))

    def bw():
        if a.requires_grad:
            a._accum(_unbroadcast(out.grad * take_a, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(out.grad * ~take_a, b.shape))

    out._backward = bw
    return out


def softmax(x, axis=-1):
    """Numerically stable softmax; the max shift is detached (zero grad)."""
    shift = Tensor(np.max(x.data, axis=axis, keepdims=True))
    e = (x - shift).exp()
    return e / e.sum(axis=axis, keepdims=True)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Per-row layer normalization over the last axis."""
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    xn = xc * (var + eps).powi(-0.5)
    return xn * gamma + beta


def log_clamped(p, floor=1e-12):
    """log of a probability clamped away from zero."""
    return p.clip(floor, 1.0).log()


class Adam:
    """Adaptive moment estimation over a fixed list of leaf tensors."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            mhat = self.m[i] / b1c
            vhat = self.v[i] / b2c
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
