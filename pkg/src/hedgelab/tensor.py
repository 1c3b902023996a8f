"""Dense float64 tensors with reverse-mode differentiation.

Values are rank-0/1/2 arrays of 64-bit reals, immutable once constructed.
Every operation validates that its result is finite, so a non-finite
intermediate surfaces immediately as a NumericError naming the operation
that produced it.

Each operation records its parent tensors and a vector-Jacobian closure.
Because tensors are immutable, creation order is a valid topological order
of the computation graph; a GradientTape replays it backward to accumulate
gradients with respect to any recorded leaves. The replay is purely
deterministic: identical inputs give bit-identical gradients.

Conventions shared by the whole package: sign(0) = 0 for sign-gradient
steps, and losses over logits are built from the max-subtracted
log-sum-exp, never from the log of a stored probability.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

_UID = itertools.count()


class DenseTensor:
    """Immutable rank-0/1/2 float64 array, optionally part of a gradient graph."""

    __slots__ = ("data", "name", "_uid", "_parents", "_vjp")

    def __init__(self, values, name: str = "tensor"):
        arr = np.array(values, dtype=np.float64)
        self._init_from(arr, name, (), None)

    def _init_from(self, arr, name, parents, vjp):
        if arr.ndim > 2:
            raise ShapeError(f"{name}: rank {arr.ndim} > 2 not supported")
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite values produced by '{name}'")
        arr.setflags(write=False)
        self.data = arr
        self.name = name
        self._uid = next(_UID)
        self._parents = parents
        self._vjp = vjp

    @classmethod
    def _wrap(cls, arr: np.ndarray, name: str, parents=(), vjp=None) -> "DenseTensor":
        # internal: takes ownership of a freshly allocated array, no copy
        out = cls.__new__(cls)
        out._init_from(arr, name, parents, vjp)
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"DenseTensor({self.data!r})"

    # -- arithmetic sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> DenseTensor:
    return x if isinstance(x, DenseTensor) else DenseTensor(x, name="const")


# -- primitive operations ------------------------------------------------


def add(a: DenseTensor, b, name: str = "add") -> DenseTensor:
    if isinstance(b, DenseTensor):
        if a.shape != b.shape:
            raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} differ")
        return DenseTensor._wrap(
            a.data + b.data, name, (a, b), lambda g: (g, g)
        )
    return DenseTensor._wrap(a.data + float(b), name, (a,), lambda g: (g,))


def sub(a: DenseTensor, b, name: str = "sub") -> DenseTensor:
    if isinstance(b, DenseTensor):
        if a.shape != b.shape:
            raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} differ")
        return DenseTensor._wrap(
            a.data - b.data, name, (a, b), lambda g: (g, -g)
        )
    return DenseTensor._wrap(a.data - float(b), name, (a,), lambda g: (g,))


def mul(a: DenseTensor, b, name: str = "mul") -> DenseTensor:
    if isinstance(b, DenseTensor):
        if a.shape != b.shape and a.shape != () and b.shape != ():
            raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} differ")
        ad, bd = a.data, b.data
        return DenseTensor._wrap(
            ad * bd,
            name,
            (a, b),
            lambda g: (_unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)),
        )
    c = float(b)
    return DenseTensor._wrap(a.data * c, name, (a,), lambda g: (g * c,))


def div(a: DenseTensor, b, name: str = "div") -> DenseTensor:
    if isinstance(b, DenseTensor):
        if b.shape != ():
            raise ShapeError(f"{name}: divisor must be a scalar tensor")
        bd = float(b.data)
        if bd == 0.0:
            raise NumericError(f"{name}: division by zero")
        ad = a.data
        return DenseTensor._wrap(
            ad / bd,
            name,
            (a, b),
            lambda g: (g / bd, np.asarray(-np.sum(g * ad) / (bd * bd))),
        )
    c = float(b)
    if c == 0.0:
        raise NumericError(f"{name}: division by zero")
    return DenseTensor._wrap(a.data / c, name, (a,), lambda g: (g / c,))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if shape == ():
        return np.asarray(np.sum(g))
    return g


def matmul(a: DenseTensor, b: DenseTensor, name: str = "matmul") -> DenseTensor:
    """Product of a rank-2 tensor with a rank-1 or rank-2 tensor."""
    if a.data.ndim != 2:
        raise ShapeError(f"{name}: left operand must be rank-2, got rank {a.data.ndim}")
    if b.data.ndim not in (1, 2):
        raise ShapeError(f"{name}: right operand must be rank-1 or rank-2")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"{name}: inner extents {a.shape} x {b.shape} disagree")
    ad, bd = a.data, b.data
    if bd.ndim == 1:
        vjp = lambda g: (np.outer(g, bd), ad.T @ g)
    else:
        vjp = lambda g: (g @ bd.T, ad.T @ g)
    return DenseTensor._wrap(ad @ bd, name, (a, b), vjp)


def relu(a: DenseTensor, name: str = "relu") -> DenseTensor:
    mask = a.data > 0.0
    return DenseTensor._wrap(
        np.where(mask, a.data, 0.0), name, (a,), lambda g: (g * mask,)
    )


def tsum(a: DenseTensor, name: str = "sum") -> DenseTensor:
    return DenseTensor._wrap(
        np.asarray(np.sum(a.data)), name, (a,),
        lambda g: (np.broadcast_to(g, a.shape).copy(),),
    )


def tmean(a: DenseTensor, name: str = "mean") -> DenseTensor:
    n = a.data.size
    if n == 0:
        raise ShapeError(f"{name}: empty tensor")
    return DenseTensor._wrap(
        np.asarray(np.mean(a.data)), name, (a,),
        lambda g: (np.broadcast_to(g / n, a.shape).copy(),),
    )


def dot(a: DenseTensor, b: DenseTensor, name: str = "dot") -> DenseTensor:
    if a.data.ndim != 1 or b.data.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"{name}: needs two rank-1 tensors of equal length")
    ad, bd = a.data, b.data
    return DenseTensor._wrap(
        np.asarray(ad @ bd), name, (a, b), lambda g: (g * bd, g * ad)
    )


def gather(a: DenseTensor, index: int, name: str = "gather") -> DenseTensor:
    if a.data.ndim != 1:
        raise ShapeError(f"{name}: needs a rank-1 tensor")
    if not 0 <= index < a.shape[0]:
        raise ConfigError(f"{name}: index {index} out of range for length {a.shape[0]}")

    def vjp(g):
        out = np.zeros(a.shape)
        out[index] = g
        return (out,)

    return DenseTensor._wrap(np.asarray(a.data[index]), name, (a,), vjp)


def logsumexp(a: DenseTensor, name: str = "logsumexp") -> DenseTensor:
    """Max-subtracted log-sum-exp of a rank-1 tensor; gradient is the softmax."""
    if a.data.ndim != 1 or a.shape[0] == 0:
        raise ShapeError(f"{name}: needs a non-empty rank-1 tensor")
    m = np.max(a.data)
    e = np.exp(a.data - m)
    s = np.sum(e)
    p = e / s
    return DenseTensor._wrap(
        np.asarray(m + np.log(s)), name, (a,), lambda g: (g * p,)
    )


def softmax(z) -> np.ndarray:
    """Softmax probabilities of a rank-1 tensor or array (value only)."""
    zd = z.data if isinstance(z, DenseTensor) else np.asarray(z, dtype=np.float64)
    e = np.exp(zd - np.max(zd))
    return e / np.sum(e)


def softmax_cross_entropy(z: DenseTensor, label: int, name: str = "cross_entropy") -> DenseTensor:
    """-log softmax(z)[label], computed as logsumexp(z) - z[label]."""
    if z.data.ndim != 1:
        raise ShapeError(f"{name}: logits must be rank-1")
    if not 0 <= label < z.shape[0]:
        raise ConfigError(f"{name}: label {label} out of range for {z.shape[0]} classes")
    return sub(logsumexp(z, name=name), gather(z, label, name=name), name=name)


# -- backward pass ---------------------------------------------------------


class GradientTape:
    """Backward executor over the graph reachable from a scalar root.

    The recorded operations are replayed in reverse creation order, which is
    a valid reverse-topological order because tensors are immutable.
    """

    def __init__(self, root: DenseTensor):
        if root.data.ndim != 0:
            raise ConfigError("gradient root must be a scalar tensor")
        self.root = root
        seen: set[int] = set()
        nodes: list[DenseTensor] = []
        stack = [root]
        while stack:
            node = stack.pop()
            if node._uid in seen:
                continue
            seen.add(node._uid)
            nodes.append(node)
            stack.extend(node._parents)
        nodes.sort(key=lambda n: n._uid, reverse=True)
        self._nodes = nodes

    def gradient(self, wrt: Sequence[DenseTensor]) -> list[np.ndarray]:
        grads: dict[int, np.ndarray] = {self.root._uid: np.asarray(1.0)}
        for node in self._nodes:
            g = grads.get(node._uid)
            if g is None or node._vjp is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None:
                    continue
                acc = grads.get(parent._uid)
                grads[parent._uid] = pg if acc is None else acc + pg
        out = []
        for w in wrt:
            g = grads.get(w._uid)
            out.append(np.zeros(w.shape) if g is None else np.asarray(g, dtype=np.float64))
        return out


def gradients(loss: DenseTensor, wrt: Sequence[DenseTensor]) -> list[np.ndarray]:
    """Gradients of a scalar loss with respect to recorded leaf tensors."""
    return GradientTape(loss).gradient(wrt)


def input_gradient(fn: Callable[[DenseTensor], DenseTensor], x) -> np.ndarray:
    """Gradient of fn(x) with respect to x.

    fn must be composed of the operations in this module and return a scalar
    tensor; x may be a DenseTensor or anything convertible to one. The result
    has the same shape as x.
    """
    leaf = DenseTensor(x.data if isinstance(x, DenseTensor) else x, name="input")
    out = fn(leaf)
    if not isinstance(out, DenseTensor) or out.data.ndim != 0:
        raise ConfigError("input_gradient: closure must return a scalar tensor")
    return gradients(out, [leaf])[0]
