# Copyright 2024 The ddpe Contributors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""
Dense operations over :class:`ddpe.tensor.Tensor`.

Every function here computes its forward result with numpy, checks it for
finiteness and registers a closure that maps the result's gradient back onto
the operands.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import (
    Tensor,
    ContractError,
    DimensionError,
)


def _require_rank(x: Tensor, rank: int, what: str):
    if x.ndim != rank:
        raise DimensionError(f"{what} must have rank {rank}, got shape {x.shape}")


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    ``x @ weight.T + bias``.

    :param x: ``B×I``
    :param weight: ``O×I``
    :param bias: ``O``
    :returns: ``B×O``
    """
    _require_rank(x, 2, "Linear input")
    _require_rank(weight, 2, "Linear weight")
    if x.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"Linear input has {x.shape[1]} features, weight expects {weight.shape[1]}"
        )
    x_data, w_data = x.data, weight.data
    out = x_data @ w_data.T
    parents: Tuple[Tensor, ...] = (x, weight)
    if bias is not None:
        if bias.shape != (weight.shape[0],):
            raise DimensionError(
                f"Linear bias has shape {bias.shape}, expected ({weight.shape[0]},)"
            )
        out = out + bias.data
        parents = (x, weight, bias)

    def backward(g: np.ndarray):
        grads: List[Optional[np.ndarray]] = [g @ w_data, g.T @ x_data]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    return Tensor.from_op(out, parents, "linear", backward)


def relu(x: Tensor) -> Tensor:
    """
    ``max(x, 0)``. The gradient at exactly 0 is 0.
    """
    mask = x.data > 0
    out = np.where(mask, x.data, np.zeros_like(x.data))

    def backward(g: np.ndarray):
        return (g * mask,)

    return Tensor.from_op(out, (x,), "relu", backward)


def softmax(x: Tensor) -> Tensor:
    """
    Softmax along the last axis.
    """
    if x.ndim < 1:
        raise DimensionError("softmax requires at least one axis")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return Tensor.from_op(out, (x,), "softmax", backward)


def cross_entropy_loss(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """
    Mean over the batch of ``-log softmax(logits)[label]``.

    :param logits: ``B×C``
    :param labels: ``B`` class indices in ``[0, C)``.
    :returns: A scalar tensor.
    """
    _require_rank(logits, 2, "Logits")
    labels_array = np.asarray(labels, dtype=np.int64)
    batch, classes = logits.shape
    if labels_array.shape != (batch,):
        raise DimensionError(
            f"Got {labels_array.shape[0] if labels_array.ndim else 0} labels for a batch of {batch}"
        )
    if batch == 0:
        raise DimensionError("Cross entropy over an empty batch")
    if np.any(labels_array < 0) or np.any(labels_array >= classes):
        raise IndexError(f"Labels must lie in [0, {classes}): {labels_array.tolist()}")

    data = logits.data
    maxima = data.max(axis=1, keepdims=True)
    exp = np.exp(data - maxima)
    sums = exp.sum(axis=1, keepdims=True)
    log_sum_exp = (maxima + np.log(sums))[:, 0]
    rows = np.arange(batch)
    loss = (log_sum_exp - data[rows, labels_array]).mean()
    probabilities = exp / sums

    def backward(g: np.ndarray):
        grad = probabilities.copy()
        grad[rows, labels_array] -= 1
        return (grad * (g / batch),)

    return Tensor.from_op(
        np.asarray(loss, dtype=data.dtype), (logits,), "cross_entropy", backward
    )


def global_avg_pool(x: Tensor) -> Tensor:
    """
    ``B×C×H×W`` to ``B×C``: the spatial mean per channel.
    """
    _require_rank(x, 4, "Pooling input")
    shape = x.shape
    area = shape[2] * shape[3]
    if area == 0:
        raise DimensionError(f"Cannot pool an empty feature map {shape}")

    def backward(g: np.ndarray):
        return (np.broadcast_to(g[:, :, None, None] / area, shape).copy(),)

    return Tensor.from_op(x.data.mean(axis=(2, 3)), (x,), "global_avg_pool", backward)


def avg_pool2x2(x: Tensor) -> Tensor:
    """
    Non-overlapping 2×2 average pooling. An odd trailing row or column is
    dropped.
    """
    _require_rank(x, 4, "Pooling input")
    b, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    if h2 == 0 or w2 == 0:
        raise DimensionError(f"Feature map {x.shape} is too small for 2×2 pooling")
    cropped = x.data[:, :, : 2 * h2, : 2 * w2]
    out = cropped.reshape(b, c, h2, 2, w2, 2).mean(axis=(3, 5))
    shape = x.shape

    def backward(g: np.ndarray):
        grad = np.zeros(shape, dtype=g.dtype)
        spread = np.repeat(np.repeat(g / 4, 2, axis=2), 2, axis=3)
        grad[:, :, : 2 * h2, : 2 * w2] = spread
        return (grad,)

    return Tensor.from_op(out, (x,), "avg_pool2x2", backward)


def instance_norm(
    x: Tensor,
    weight: Tensor,
    bias: Tensor,
    eps: float = 1e-5,
) -> Tensor:
    """
    Standardizes every (instance, channel) feature map over its spatial
    positions, then applies a per-channel affine transform. No running
    statistics are kept.
    """
    _require_rank(x, 4, "Normalization input")
    channels = x.shape[1]
    if weight.shape != (channels,) or bias.shape != (channels,):
        raise DimensionError(
            f"Normalization parameters {weight.shape}/{bias.shape} do not match {channels} channels"
        )
    n = x.shape[2] * x.shape[3]
    mean = x.data.mean(axis=(2, 3), keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    normalized = centered * inv_std
    w = weight.data[None, :, None, None]
    out = normalized * w + bias.data[None, :, None, None]

    def backward(g: np.ndarray):
        grad_weight = (g * normalized).sum(axis=(0, 2, 3))
        grad_bias = g.sum(axis=(0, 2, 3))
        grad_normalized = g * w
        grad_x = (inv_std / n) * (
            n * grad_normalized
            - grad_normalized.sum(axis=(2, 3), keepdims=True)
            - normalized
            * (grad_normalized * normalized).sum(axis=(2, 3), keepdims=True)
        )
        return (grad_x, grad_weight, grad_bias)

    return Tensor.from_op(out, (x, weight, bias), "instance_norm", backward)


def conv2d_per_instance(
    x: Tensor,
    kernels: Tensor,
    stride: int = 1,
    pad: int = 0,
) -> Tensor:
    """
    Cross-correlates every instance of a batch with its own kernel set.

    :param x: ``B×C_in×H×W``
    :param kernels: ``B×C_out×C_in×K×K``
    :param stride: A positive step between output positions.
    :param pad: Zero padding added on every side.
    :returns: ``B×C_out×H'×W'`` where ``H' = (H + 2·pad − K) // stride + 1``.
    """
    _require_rank(x, 4, "Convolution input")
    _require_rank(kernels, 5, "Per-instance kernels")
    if not isinstance(stride, int) or stride < 1:
        raise ContractError(f"Stride must be a positive integer, got {stride}")
    if not isinstance(pad, int) or pad < 0:
        raise ContractError(f"Padding must be a non-negative integer, got {pad}")
    batch, c_in, h, w = x.shape
    k_batch, c_out, k_in, kh, kw = kernels.shape
    if k_batch != batch:
        raise DimensionError(f"Got {k_batch} kernel sets for a batch of {batch}")
    if k_in != c_in:
        raise DimensionError(f"Kernels expect {k_in} input channels, input has {c_in}")
    if h + 2 * pad < kh or w + 2 * pad < kw:
        raise DimensionError(
            f"Kernel {kh}×{kw} does not fit input {h}×{w} with padding {pad}"
        )
    h_out = (h + 2 * pad - kh) // stride + 1
    w_out = (w + 2 * pad - kw) // stride + 1

    padded = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride][:, :, :h_out, :w_out]
    flat_kernels = kernels.data.reshape(batch, c_out, c_in * kh * kw)

    out = np.empty((batch, c_out, h_out, w_out), dtype=np.result_type(x.data, kernels.data))
    columns: List[np.ndarray] = []
    for b in range(batch):
        cols = np.ascontiguousarray(
            windows[b].transpose(1, 2, 0, 3, 4).reshape(h_out * w_out, c_in * kh * kw)
        )
        columns.append(cols)
        out[b] = (flat_kernels[b] @ cols.T).reshape(c_out, h_out, w_out)

    x_shape = x.shape
    padded_shape = padded.shape[1:]

    def backward(g: np.ndarray):
        grad_x = np.empty(x_shape, dtype=g.dtype)
        grad_kernels = np.empty((batch, c_out, c_in * kh * kw), dtype=g.dtype)
        for b in range(batch):
            g_b = g[b].reshape(c_out, h_out * w_out)
            grad_kernels[b] = g_b @ columns[b]
            grad_cols = (flat_kernels[b].T @ g_b).reshape(c_in, kh, kw, h_out, w_out)
            grad_padded = np.zeros(padded_shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    grad_padded[
                        :,
                        i : i + stride * h_out : stride,
                        j : j + stride * w_out : stride,
                    ] += grad_cols[:, i, j]
            grad_x[b] = grad_padded[:, pad : pad + h, pad : pad + w]
        return (grad_x, grad_kernels.reshape(kernels.shape))

    return Tensor.from_op(out, (x, kernels), "conv2d_per_instance", backward)


def pad(x: Tensor, widths: Sequence[Tuple[int, int]]) -> Tensor:
    """
    Zero-pads ``x``; ``widths`` holds one ``(before, after)`` pair per axis.
    """
    if len(widths) != x.ndim:
        raise DimensionError(f"Got {len(widths)} pad widths for rank {x.ndim}")
    out = np.pad(x.data, [tuple(pair) for pair in widths])
    index = tuple(
        slice(before, before + extent)
        for (before, _), extent in zip(widths, x.shape)
    )

    def backward(g: np.ndarray):
        return (np.ascontiguousarray(g[index]),)

    return Tensor.from_op(out, (x,), "pad", backward)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """
    Stacks equally shaped tensors along a new leading axis.
    """
    if len(tensors) == 0:
        raise DimensionError("Cannot stack zero tensors")
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise DimensionError(f"Cannot stack tensors of differing shapes {sorted(shapes)}")
    out = np.stack([t.data for t in tensors])

    def backward(g: np.ndarray):
        return [g[i] for i in range(len(tensors))]

    return Tensor.from_op(out, tuple(tensors), "stack", backward)


def weighted_sum(weights: Tensor, bank: Tensor) -> Tensor:
    """
    ``out[b] = Σ_m weights[b, m] · bank[m]``.

    :param weights: ``B×M``
    :param bank: ``M×…``
    :returns: ``B×…``
    """
    _require_rank(weights, 2, "Weights")
    if bank.ndim < 1 or bank.shape[0] != weights.shape[1]:
        raise DimensionError(
            f"Weights have {weights.shape[1]} columns, bank has shape {bank.shape}"
        )
    w_data, bank_data = weights.data, bank.data
    out = np.tensordot(w_data, bank_data, axes=(1, 0))
    rest = tuple(range(1, bank.ndim))

    def backward(g: np.ndarray):
        return (
            np.tensordot(g, bank_data, axes=(rest, rest)),
            np.tensordot(w_data, g, axes=(0, 0)),
        )

    return Tensor.from_op(out, (weights, bank), "weighted_sum", backward)


def gather_rows(x: Tensor, index: Sequence[int]) -> Tensor:
    """
    ``out[b] = x[index[b]]``. Gradients are scattered back onto the source
    rows, summing where a row is used more than once.
    """
    index_array = np.asarray(index, dtype=np.int64)
    if index_array.ndim != 1 or x.ndim < 1:
        raise DimensionError(f"Cannot gather rows {index_array.shape} from {x.shape}")
    if np.any(index_array < 0) or np.any(index_array >= x.shape[0]):
        raise ContractError(
            f"Row indices must lie in [0, {x.shape[0]}): {index_array.tolist()}"
        )
    shape = x.shape

    def backward(g: np.ndarray):
        grad = np.zeros(shape, dtype=g.dtype)
        np.add.at(grad, index_array, g)
        return (grad,)

    return Tensor.from_op(x.data[index_array], (x,), "gather_rows", backward)


def permute_columns(x: Tensor, permutations: np.ndarray) -> Tensor:
    """
    ``out[b, m] = x[b, permutations[b, m]]`` where every row of
    ``permutations`` is a bijection on the column indices.
    """
    _require_rank(x, 2, "Permuted input")
    perms = np.asarray(permutations, dtype=np.int64)
    if perms.shape != x.shape:
        raise DimensionError(
            f"Permutations have shape {perms.shape}, input has shape {x.shape}"
        )
    expected = np.arange(x.shape[1])
    for row, perm in enumerate(perms):
        if not np.array_equal(np.sort(perm), expected):
            raise ContractError(f"Row {row} is not a permutation: {perm.tolist()}")
    rows = np.arange(x.shape[0])[:, None]
    out = x.data[rows, perms]
    shape = x.shape

    def backward(g: np.ndarray):
        grad = np.zeros(shape, dtype=g.dtype)
        grad[rows, perms] = g
        return (grad,)

    return Tensor.from_op(out, (x,), "permute_columns", backward)
