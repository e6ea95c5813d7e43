"""Minimal reverse-mode differentiation over numpy arrays.

Every operation records a backward closure on the produced node; calling
:func:`backward` on a scalar result walks the recorded graph in reverse
topological order and accumulates gradients into every reachable tensor that
requires them. Only the primitives needed by the forecaster are provided.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, DimensionError, StateError


class Tensor:
    """Array node on the differentiation tape."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_needs")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = backward
        self._needs = self.requires_grad or any(p._needs for p in self._parents)

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.grad is None:
        tensor.grad = grad.copy() if grad.base is not None else grad
    else:
        tensor.grad = tensor.grad + grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tensor the scalar ``loss`` depends on."""
    if not loss._parents:
        raise StateError("backward requires a result produced by recorded operations")
    if loss.data.size != 1:
        raise ArgumentError("backward expects a scalar loss")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen or not node._needs:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward()


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, parents=(a, b))

    def _bw():
        if a._needs:
            _accumulate(a, _unbroadcast(out.grad, a.data.shape))
        if b._needs:
            _accumulate(b, _unbroadcast(out.grad, b.data.shape))

    out._backward = _bw
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, parents=(a, b))

    def _bw():
        if a._needs:
            _accumulate(a, _unbroadcast(out.grad, a.data.shape))
        if b._needs:
            _accumulate(b, _unbroadcast(-out.grad, b.data.shape))

    out._backward = _bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, parents=(a, b))

    def _bw():
        if a._needs:
            _accumulate(a, _unbroadcast(out.grad * b.data, a.data.shape))
        if b._needs:
            _accumulate(b, _unbroadcast(out.grad * a.data, b.data.shape))

    out._backward = _bw
    return out


def scale(a: Tensor, factor: float) -> Tensor:
    out = Tensor(a.data * factor, parents=(a,))

    def _bw():
        if a._needs:
            _accumulate(a, out.grad * factor)

    out._backward = _bw
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, parents=(a,))

    def _bw():
        if a._needs:
            _accumulate(a, out.grad * (1.0 - y * y))

    out._backward = _bw
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(y, parents=(a,))

    def _bw():
        if a._needs:
            _accumulate(a, out.grad * y * (1.0 - y))

    out._backward = _bw
    return out


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, 0.0), parents=(a,))

    def _bw():
        if a._needs:
            _accumulate(a, out.grad * mask)

    out._backward = _bw
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape), parents=(a,))

    def _bw():
        if a._needs:
            _accumulate(a, out.grad.reshape(a.data.shape))

    out._backward = _bw
    return out


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    out = Tensor(a.data.transpose(axes), parents=(a,))
    inverse = tuple(np.argsort(axes))

    def _bw():
        if a._needs:
            _accumulate(a, out.grad.transpose(inverse))

    out._backward = _bw
    return out


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), parents=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    index = [slice(None)] * out.data.ndim

    def _bw():
        offset = 0
        for t, size in zip(tensors, sizes):
            if t._needs:
                index[axis] = slice(offset, offset + size)
                _accumulate(t, out.grad[tuple(index)])
            offset += size

    out._backward = _bw
    return out


def concat_channels(tensors: list[Tensor]) -> Tensor:
    """Concatenate (B, C, N, L) tensors along the channel axis."""
    return concat(tensors, axis=1)


def pad_last(a: Tensor, total: int) -> Tensor:
    """Zero-pad the last axis at the end up to ``total`` entries."""
    have = a.data.shape[-1]
    if total < have:
        raise ArgumentError(f"cannot pad last axis of {have} down to {total}")
    widths = [(0, 0)] * (a.data.ndim - 1) + [(0, total - have)]
    out = Tensor(np.pad(a.data, widths), parents=(a,))

    def _bw():
        if a._needs:
            _accumulate(a, out.grad[..., :have])

    out._backward = _bw
    return out


def time_suffix(a: Tensor, length: int) -> Tensor:
    """Keep the trailing ``length`` positions of the time axis."""
    full = a.data.shape[-1]
    if not 1 <= length <= full:
        raise ArgumentError(f"suffix length {length} invalid for time axis {full}")
    out = Tensor(a.data[..., full - length :], parents=(a,))

    def _bw():
        if a._needs:
            g = np.zeros_like(a.data)
            g[..., full - length :] = out.grad
            _accumulate(a, g)

    out._backward = _bw
    return out


def _mix_channels(weight: np.ndarray, x: np.ndarray) -> np.ndarray:
    # (C_out, C_in) applied over axis 1 of (B, C_in, N, L)
    b, c, n, length = x.shape
    flat = np.ascontiguousarray(x).reshape(b, c, n * length)
    return np.matmul(weight, flat).reshape(b, weight.shape[0], n, length)


def conv_time(x: Tensor, filters: Tensor) -> Tensor:
    """Causal valid convolution along the time axis with channel mixing.

    ``x`` is (B, C_in, N, L) and ``filters`` is (C_out, C_in, k); the output
    position t sums filters[s] * x[t + k - 1 - s], so it depends only on
    inputs at or before its own time.
    """
    if x.data.ndim != 4 or filters.data.ndim != 3:
        raise DimensionError("conv_time expects a 4-D input and 3-D filters")
    b, c, n, length = x.data.shape
    c_out, c_in, k = filters.data.shape
    if c_in != c:
        raise DimensionError(f"filter expects {c_in} input channels, input has {c}")
    if length < k:
        raise ArgumentError(f"time length {length} shorter than kernel {k}")
    l_out = length - k + 1
    # one matmul over windowed input; window tap j pairs with filter tap k-1-j
    windows = np.lib.stride_tricks.sliding_window_view(x.data, k, axis=3)
    flat = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4)).reshape(
        b, n * l_out, c * k
    )
    f_rev = np.ascontiguousarray(filters.data[:, :, ::-1]).reshape(c_out, c * k)
    data = np.matmul(flat, f_rev.T)  # (B, N*Lout, C_out)
    out = Tensor(
        np.ascontiguousarray(data.transpose(0, 2, 1)).reshape(b, c_out, n, l_out),
        parents=(x, filters),
    )

    def _bw():
        g = np.ascontiguousarray(out.grad.transpose(0, 2, 3, 1)).reshape(
            b, n * l_out, c_out
        )
        if filters._needs:
            gf_rev = np.matmul(g.transpose(0, 2, 1), flat).sum(axis=0)
            _accumulate(filters, gf_rev.reshape(c_out, c, k)[:, :, ::-1])
        if x._needs:
            g_flat = np.matmul(g, f_rev).reshape(b, n, l_out, c, k)
            g_windows = g_flat.transpose(0, 3, 1, 2, 4)  # (B, C, N, Lout, k)
            gx = np.zeros_like(x.data)
            for j in range(k):
                gx[:, :, :, j : j + l_out] += g_windows[:, :, :, :, j]
            _accumulate(x, gx)

    out._backward = _bw
    return out


def channel_mix(x: Tensor, weight: Tensor) -> Tensor:
    """Pointwise linear map over the channel axis: (C_in -> C_out)."""
    if x.data.ndim != 4 or weight.data.ndim != 2:
        raise DimensionError("channel_mix expects a 4-D input and a 2-D weight")
    if weight.data.shape[0] != x.data.shape[1]:
        raise DimensionError(
            f"weight maps {weight.data.shape[0]} channels, input has {x.data.shape[1]}"
        )
    out = Tensor(_mix_channels(weight.data.T, x.data), parents=(x, weight))

    def _bw():
        g = out.grad
        b, c, n, length = x.data.shape
        if weight._needs:
            flat_x = np.ascontiguousarray(x.data).reshape(b, c, n * length)
            flat_g = np.ascontiguousarray(g).reshape(b, weight.data.shape[1], n * length)
            _accumulate(weight, np.matmul(flat_x, flat_g.transpose(0, 2, 1)).sum(axis=0))
        if x._needs:
            _accumulate(x, _mix_channels(weight.data, g))

    out._backward = _bw
    return out


def node_mix(x: Tensor, matrix: np.ndarray) -> Tensor:
    """Left-multiply the node axis by a constant (N, N) matrix."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if x.data.ndim != 4 or matrix.ndim != 2:
        raise DimensionError("node_mix expects a 4-D input and a 2-D matrix")
    if matrix.shape[1] != x.data.shape[2]:
        raise DimensionError(
            f"matrix mixes {matrix.shape[1]} nodes, input has {x.data.shape[2]}"
        )
    out = Tensor(np.matmul(matrix, x.data), parents=(x,))

    def _bw():
        if x._needs:
            _accumulate(x, np.matmul(matrix.T, out.grad))

    out._backward = _bw
    return out


def bias_add(x: Tensor, bias: Tensor) -> Tensor:
    """Add a per-channel bias to a (B, C, N, L) tensor."""
    if bias.data.ndim != 1 or bias.data.shape[0] != x.data.shape[1]:
        raise DimensionError(
            f"bias of length {bias.data.shape} for {x.data.shape[1]} channels"
        )
    out = Tensor(x.data + bias.data[None, :, None, None], parents=(x, bias))

    def _bw():
        if x._needs:
            _accumulate(x, out.grad)
        if bias._needs:
            _accumulate(bias, out.grad.sum(axis=(0, 2, 3)))

    out._backward = _bw
    return out


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(), parents=(a,))

    def _bw():
        if a._needs:
            _accumulate(a, np.broadcast_to(out.grad, a.data.shape).copy())

    out._backward = _bw
    return out
