"""Minimal reverse-mode autodiff over float64 numpy buffers.

Tensors form an acyclic tape; backward() walks it in reverse topological
order. Ops are fused at the granularity the model needs (layer norm, masked
softmax, gelu, embedding gathers) so gradients are exact closed forms rather
than long primitive chains. Everything is float64: toy-scale models are
cheap and finite-difference checks stay tight.
"""

from __future__ import annotations

from typing import Optional

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, grad=None):
        if grad is None:
            if self.data.shape != ():
                raise ValueError("backward() without grad needs a scalar")
            grad = np.array(1.0)
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                topo.append(node)
            else:
                stack.append((node, True))
                for p in node._parents:
                    if id(p) not in seen:
                        stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self):
        self.grad = None

    # convenience arithmetic (tape-aware)
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    """Sum gradient g down to the given (broadcast-source) shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _needs(*ts):
    return any(t.requires_grad for t in ts)


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data + b.data, _needs(a, b), (a, b))

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))
    out._backward = back
    return out


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data * b.data, _needs(a, b), (a, b))

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))
    out._backward = back
    return out


def scale(a, s: float):
    a = _wrap(a)
    out = Tensor(a.data * s, a.requires_grad, (a,))

    def back(g):
        if a.requires_grad:
            a._accumulate(g * s)
    out._backward = back
    return out


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data @ b.data, _needs(a, b), (a, b))

    def back(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a._accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b._accumulate(_unbroadcast(gb, b.data.shape))
    out._backward = back
    return out


def reshape(a, shape):
    a = _wrap(a)
    out = Tensor(a.data.reshape(shape), a.requires_grad, (a,))

    def back(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))
    out._backward = back
    return out


def transpose(a, axes):
    a = _wrap(a)
    inv = np.argsort(axes)
    out = Tensor(a.data.transpose(axes), a.requires_grad, (a,))

    def back(g):
        if a.requires_grad:
            a._accumulate(g.transpose(inv))
    out._backward = back
    return out


def gelu(a):
    """tanh-approximation gelu (the GPT-2 flavor)."""
    a = _wrap(a)
    c = np.sqrt(2.0 / np.pi)
    x = a.data
    inner = c * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    out = Tensor(0.5 * x * (1.0 + t), a.requires_grad, (a,))

    def back(g):
        if a.requires_grad:
            dinner = c * (1.0 + 3 * 0.044715 * x ** 2)
            da = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * dinner
            a._accumulate(g * da)
    out._backward = back
    return out


def layer_norm(a, gamma, beta, eps=1e-5):
    """Normalize the last axis, then scale and shift."""
    a, gamma, beta = _wrap(a), _wrap(gamma), _wrap(beta)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor(xhat * gamma.data + beta.data, _needs(a, gamma, beta),
                 (a, gamma, beta))

    def back(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).reshape(-1, x.shape[-1]).sum(axis=0))
        if beta.requires_grad:
            beta._accumulate(g.reshape(-1, x.shape[-1]).sum(axis=0))
        if a.requires_grad:
            n = x.shape[-1]
            gx = g * gamma.data
            da = inv * (gx - gx.mean(axis=-1, keepdims=True)
                        - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
            a._accumulate(da)
    out._backward = back
    return out


def embedding(table, ids):
    """Row gather; ids is an integer array, grad scatter-adds into rows."""
    table = _wrap(table)
    ids = np.asarray(ids)
    out = Tensor(table.data[ids], table.requires_grad, (table,))

    def back(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, ids.reshape(-1),
                      g.reshape(-1, table.data.shape[-1]))
            table._accumulate(acc)
    out._backward = back
    return out


def masked_softmax(scores, allowed):
    """Softmax over the last axis with positions where ``allowed`` is False
    excluded exactly (they get probability 0 and zero gradient)."""
    scores = _wrap(scores)
    s = np.where(allowed, scores.data, -np.inf)
    m = s.max(axis=-1, keepdims=True)
    e = np.exp(s - m)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y, scores.requires_grad, (scores,))

    def back(g):
        if scores.requires_grad:
            dot = (g * y).sum(axis=-1, keepdims=True)
            scores._accumulate(y * (g - dot))
    out._backward = back
    return out


def mean_of(losses):
    """Mean of a list of scalar tensors."""
    total = losses[0]
    for t in losses[1:]:
        total = add(total, t)
    return scale(total, 1.0 / len(losses))
