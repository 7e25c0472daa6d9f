"""Forward and backward passes of the feature-extractor layers.

All functions are pure: caches needed by a backward pass are returned by the forward
pass and handed back by the caller. Image tensors are ``N × C × H × W``.
"""

from typing import Tuple

import numpy as np

from ..exceptions import NonFiniteValue, ShapeMismatch


def ensure_finite(array: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        bad = int(np.count_nonzero(~np.isfinite(array)))
        raise NonFiniteValue(f"{what} contains {bad} non-finite element(s)")
    return array


# DENSE


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """y = x·Wᵀ + b with ``W`` of shape ``Dout × Din``."""
    if x.ndim != 2 or x.shape[1] != weight.shape[1] or bias.shape != (weight.shape[0],):
        raise ShapeMismatch(
            f"dense input {x.shape} incompatible with weight {weight.shape} / bias {bias.shape}"
        )
    return x @ weight.T + bias


def dense_backward(
    grad_out: np.ndarray, x: np.ndarray, weight: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if grad_out.shape != (x.shape[0], weight.shape[0]):
        raise ShapeMismatch(f"dense grad_out {grad_out.shape} does not match output shape")
    return grad_out @ weight, grad_out.T @ x, grad_out.sum(axis=0)


# CONV2D


def conv2d_output_hw(h: int, w: int, kernel: int, stride: int, padding: int) -> Tuple[int, int]:
    out_h = (h + 2 * padding - kernel) // stride + 1
    out_w = (w + 2 * padding - kernel) // stride + 1
    if out_h < 1 or out_w < 1:
        raise ShapeMismatch(
            f"kernel {kernel} (stride {stride}, padding {padding}) does not fit input {h}x{w}"
        )
    return out_h, out_w


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if not padding:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def conv2d_forward(
    x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int = 1, padding: int = 0
) -> np.ndarray:
    """Direct convolution (cross-correlation) with a ``F × C × K × K`` kernel.

    The loop runs over kernel offsets; each offset contributes one strided window of the
    padded input, contracted over channels.
    """
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(f"conv2d input {x.shape} incompatible with weight {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ShapeMismatch(f"conv2d bias {bias.shape} does not match {weight.shape[0]} filters")
    n, _, h, w = x.shape
    filters, _, kh, kw = weight.shape
    out_h, out_w = conv2d_output_hw(h, w, kh, stride, padding)
    xp = _pad(x, padding)

    out = np.zeros((n, filters, out_h, out_w))
    for i in range(kh):
        for j in range(kw):
            window = xp[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride]
            out += np.einsum("nchw,fc->nfhw", window, weight[:, :, i, j])
    return out + bias[None, :, None, None]


def conv2d_backward(
    grad_out: np.ndarray, x: np.ndarray, weight: np.ndarray, stride: int = 1, padding: int = 0
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, _, h, w = x.shape
    _, _, kh, kw = weight.shape
    out_h, out_w = conv2d_output_hw(h, w, kh, stride, padding)
    if grad_out.shape != (n, weight.shape[0], out_h, out_w):
        raise ShapeMismatch(f"conv2d grad_out {grad_out.shape} does not match output shape")
    xp = _pad(x, padding)

    grad_xp = np.zeros_like(xp)
    grad_w = np.zeros_like(weight)
    for i in range(kh):
        for j in range(kw):
            rows = slice(i, i + stride * out_h, stride)
            cols = slice(j, j + stride * out_w, stride)
            grad_w[:, :, i, j] = np.einsum("nfhw,nchw->fc", grad_out, xp[:, :, rows, cols])
            grad_xp[:, :, rows, cols] += np.einsum("nfhw,fc->nchw", grad_out, weight[:, :, i, j])

    grad_x = grad_xp[:, :, padding : padding + h, padding : padding + w] if padding else grad_xp
    return grad_x, grad_w, grad_out.sum(axis=(0, 2, 3))


# MAXPOOL 2x2, STRIDE 2


def maxpool_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """2×2 max pooling with stride 2. Odd trailing rows/columns are truncated.

    Returns the pooled tensor and the in-window argmax (0..3, row-major, first maximum wins)
    needed by :func:`maxpool_backward`.
    """
    if x.ndim != 4:
        raise ShapeMismatch(f"maxpool expects N x C x H x W input, got {x.shape}")
    n, c, h, w = x.shape
    out_h, out_w = h // 2, w // 2
    if out_h < 1 or out_w < 1:
        raise ShapeMismatch(f"maxpool input {h}x{w} is smaller than the 2x2 window")
    windows = (
        x[:, :, : 2 * out_h, : 2 * out_w]
        .reshape(n, c, out_h, 2, out_w, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, out_h, out_w, 4)
    )
    argmax = np.argmax(windows, axis=-1)
    return np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0], argmax


def maxpool_backward(
    grad_out: np.ndarray, argmax: np.ndarray, input_shape: Tuple[int, ...]
) -> np.ndarray:
    if grad_out.shape != argmax.shape:
        raise ShapeMismatch(f"maxpool grad_out {grad_out.shape} does not match {argmax.shape}")
    n, c, h, w = input_shape
    out_h, out_w = argmax.shape[2:]
    windows = np.zeros((n, c, out_h, out_w, 4))
    np.put_along_axis(windows, argmax[..., None], grad_out[..., None], axis=-1)
    grad_x = np.zeros(input_shape)
    grad_x[:, :, : 2 * out_h, : 2 * out_w] = (
        windows.reshape(n, c, out_h, out_w, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, 2 * out_h, 2 * out_w)
    )
    return grad_x


# PRELU


def _slope_view(x: np.ndarray, slope: np.ndarray) -> np.ndarray:
    if x.ndim < 2 or x.shape[1] != slope.shape[0]:
        raise ShapeMismatch(f"prelu input {x.shape} incompatible with {slope.shape[0]} slopes")
    return slope.reshape((1, -1) + (1,) * (x.ndim - 2))


def prelu_forward(x: np.ndarray, slope: np.ndarray) -> np.ndarray:
    """y = x if x > 0 else a·x, one learnable slope per channel (axis 1)."""
    return np.where(x > 0, x, _slope_view(x, slope) * x)


def prelu_backward(
    grad_out: np.ndarray, x: np.ndarray, slope: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    a = _slope_view(x, slope)
    positive = x > 0
    grad_x = np.where(positive, grad_out, a * grad_out)
    axes = (0,) + tuple(range(2, x.ndim))
    grad_slope = np.where(positive, 0.0, x * grad_out).sum(axis=axes)
    return grad_x, grad_slope


# FLATTEN


def flatten_forward(x: np.ndarray) -> np.ndarray:
    return x.reshape(x.shape[0], -1)


def flatten_backward(grad_out: np.ndarray, input_shape: Tuple[int, ...]) -> np.ndarray:
    return grad_out.reshape(input_shape)
