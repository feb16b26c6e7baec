"""Differentiable operations with exact backward rules.

Layout is (batch, channel, height, width) throughout. Broadcasting is limited
to equal-rank operands where one side has size 1 on an axis, which covers the
per-channel scale/shift and singleton-batch cases the network needs.
"""

import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from swformer.errors import DimensionError
from swformer.tensor.core import Tensor, get_default_dtype, record

logger = logging.getLogger(__name__)

Scalar = Union[int, float]
AXIS_NAMES = ("batch", "channel", "height", "width")

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass
class MacCounter:
    """Multiply-accumulate total of the convolutions run inside ``count_macs``."""
    total: int = 0


_mac_counters: List[MacCounter] = []


@contextmanager
def count_macs() -> Iterator[MacCounter]:
    counter = MacCounter()
    _mac_counters.append(counter)
    try:
        yield counter
    finally:
        _mac_counters.remove(counter)


def _add_macs(count: int) -> None:
    for counter in _mac_counters:
        counter.total += int(count)


def _axis_name(axis: int, ndim: int) -> str:
    return AXIS_NAMES[axis] if ndim == 4 else f"axis {axis}"


def _is_scalar(value) -> bool:
    return isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool)


def as_tensor(value, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else get_default_dtype()
    return Tensor(np.asarray(value), dtype=dtype)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    if a.ndim != b.ndim:
        raise DimensionError(f"{op}: rank mismatch, shapes {a.shape} and {b.shape}")
    bad = [
        _axis_name(axis, a.ndim)
        for axis, (da, db) in enumerate(zip(a.shape, b.shape))
        if da != db and da != 1 and db != 1
    ]
    if bad:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} disagree on {', '.join(bad)}")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# Elementwise arithmetic


def add(a, b) -> Tensor:
    if _is_scalar(b):
        return add_scalar(a, b)
    if _is_scalar(a):
        return add_scalar(b, a)
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return record(a.data + b.data, (a, b), _backward, "add")


def sub(a, b) -> Tensor:
    if _is_scalar(b):
        return add_scalar(a, -float(b))
    if _is_scalar(a):
        return add_scalar(scale(b, -1.0), a)
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return record(a.data - b.data, (a, b), _backward, "sub")


def mul(a, b) -> Tensor:
    if _is_scalar(b):
        return scale(a, b)
    if _is_scalar(a):
        return scale(b, a)
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    a_data, b_data = a.data, b.data

    def _backward(g):
        return _unbroadcast(g * b_data, a.shape), _unbroadcast(g * a_data, b.shape)

    return record(a_data * b_data, (a, b), _backward, "mul")


def scale(x: Tensor, factor: Scalar) -> Tensor:
    factor = float(factor)
    return record(x.data * factor, (x,), lambda g: (g * factor,), "scale")


def add_scalar(x: Tensor, value: Scalar) -> Tensor:
    value = float(value)
    return record(x.data + value, (x,), lambda g: (g,), "add_scalar")


def abs(x: Tensor) -> Tensor:  # noqa: A001
    sign = np.sign(x.data)
    return record(np.abs(x.data), (x,), lambda g: (g * sign,), "abs")


# Activations


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x)."""
    data = x.data
    cdf = 0.5 * (1.0 + erf(data / _SQRT2))

    def _backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * data * data)
        return (g * (cdf + data * pdf),)

    return record(data * cdf, (x,), _backward, "gelu")


def sigmoid(x: Tensor) -> Tensor:
    e = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype, copy=False)
    return record(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


# Reductions


def _normalize_axes(axes, ndim: int) -> Tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(sorted(a % ndim for a in axes))


def reduce_sum(x: Tensor, axes=None) -> Tensor:
    """Sum over ``axes`` (all when None), keeping reduced axes as size 1."""
    axes = _normalize_axes(axes, x.ndim)
    shape = x.shape
    return record(
        x.data.sum(axis=axes, keepdims=True),
        (x,),
        lambda g: (np.broadcast_to(g, shape).copy(),),
        "reduce_sum",
    )


def reduce_mean(x: Tensor, axes=None) -> Tensor:
    """Mean over ``axes`` (all when None), keeping reduced axes as size 1."""
    axes = _normalize_axes(axes, x.ndim)
    shape = x.shape
    count = int(np.prod([shape[a] for a in axes])) if axes else 1
    return record(
        x.data.mean(axis=axes, keepdims=True),
        (x,),
        lambda g: (np.broadcast_to(g / count, shape).copy(),),
        "reduce_mean",
    )


# Channel plumbing


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not parts:
        raise DimensionError("concat needs at least one tensor")
    ndim = parts[0].ndim
    axis = axis % ndim
    for p in parts[1:]:
        if p.ndim != ndim:
            raise DimensionError(f"concat: rank mismatch {parts[0].shape} vs {p.shape}")
        bad = [
            _axis_name(i, ndim)
            for i in range(ndim)
            if i != axis and p.shape[i] != parts[0].shape[i]
        ]
        if bad:
            raise DimensionError(
                f"concat: {parts[0].shape} and {p.shape} disagree on {', '.join(bad)}"
            )
    offsets = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def _backward(g):
        return tuple(np.ascontiguousarray(piece) for piece in np.split(g, offsets, axis=axis))

    return record(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), _backward, "concat")


def slice_axis(x: Tensor, start: int, stop: int, axis: int = 1) -> Tensor:
    axis = axis % x.ndim
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    shape, dtype = x.shape, x.dtype

    def _backward(g):
        full = np.zeros(shape, dtype=dtype)
        full[index] = g
        return (full,)

    return record(x.data[index].copy(), (x,), _backward, "slice")


def split(x: Tensor, sizes: Sequence[int], axis: int = 1) -> List[Tensor]:
    axis = axis % x.ndim
    if sum(sizes) != x.shape[axis] or any(s < 0 for s in sizes):
        raise DimensionError(
            f"split sizes {list(sizes)} do not add up to {_axis_name(axis, x.ndim)} length {x.shape[axis]}"
        )
    parts, start = [], 0
    for size in sizes:
        parts.append(slice_axis(x, start, start + size, axis))
        start += size
    return parts


# Convolution


def _tap(arr: np.ndarray, i: int, j: int, stride: int, ho: int, wo: int) -> np.ndarray:
    return arr[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]


def _pad(arr: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return arr
    return np.pad(arr, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _unpad(arr: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return arr
    return np.ascontiguousarray(arr[:, :, padding:-padding, padding:-padding])


def _conv_apply(xp: np.ndarray, w: np.ndarray, stride: int, groups: int) -> np.ndarray:
    """Cross-correlation of an already padded input."""
    n, _, hp, wp = xp.shape
    cout, cin_g, kh, kw = w.shape
    ho, wo = (hp - kh) // stride + 1, (wp - kw) // stride + 1
    dtype = np.result_type(xp, w)

    if cin_g == 1:
        mult = cout // groups
        wr = w.reshape(groups, mult, kh, kw)
        out = np.zeros((n, groups, mult, ho, wo), dtype=dtype)
        for i in range(kh):
            for j in range(kw):
                out += _tap(xp, i, j, stride, ho, wo)[:, :, None] * wr[None, :, :, i, j, None, None]
        return out.reshape(n, cout, ho, wo)

    cout_g = cout // groups
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    outs = []
    for g in range(groups):
        cols = windows[:, g * cin_g:(g + 1) * cin_g].transpose(0, 2, 3, 1, 4, 5)
        cols = cols.reshape(n * ho * wo, cin_g * kh * kw)
        wg = w[g * cout_g:(g + 1) * cout_g].reshape(cout_g, -1)
        outs.append((cols @ wg.T).reshape(n, ho, wo, cout_g))
    out = outs[0] if groups == 1 else np.concatenate(outs, axis=3)
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _conv_adjoint(
    g: np.ndarray, w: np.ndarray, padded_shape: Tuple[int, ...], stride: int, groups: int
) -> np.ndarray:
    """Transpose of ``_conv_apply`` with respect to its input."""
    n, _, ho, wo = g.shape
    cout, cin_g, kh, kw = w.shape
    dxp = np.zeros(padded_shape, dtype=np.result_type(g, w))

    if cin_g == 1:
        mult = cout // groups
        gr = g.reshape(n, groups, mult, ho, wo)
        wr = w.reshape(groups, mult, kh, kw)
        for i in range(kh):
            for j in range(kw):
                _tap(dxp, i, j, stride, ho, wo)[...] += (gr * wr[None, :, :, i, j, None, None]).sum(axis=2)
        return dxp

    cout_g = cout // groups
    for grp in range(groups):
        gmat = g[:, grp * cout_g:(grp + 1) * cout_g].transpose(0, 2, 3, 1).reshape(n * ho * wo, cout_g)
        wg = w[grp * cout_g:(grp + 1) * cout_g].reshape(cout_g, -1)
        dcols = (gmat @ wg).reshape(n, ho, wo, cin_g, kh, kw)
        target = dxp[:, grp * cin_g:(grp + 1) * cin_g]
        for i in range(kh):
            for j in range(kw):
                _tap(target, i, j, stride, ho, wo)[...] += dcols[..., i, j].transpose(0, 3, 1, 2)
    return dxp


def _conv_weight_grad(
    g: np.ndarray, xp: np.ndarray, w_shape: Tuple[int, ...], stride: int, groups: int
) -> np.ndarray:
    n, _, ho, wo = g.shape
    cout, cin_g, kh, kw = w_shape

    if cin_g == 1:
        mult = cout // groups
        gr = g.reshape(n, groups, mult, ho, wo)
        dw = np.zeros((groups, mult, kh, kw), dtype=np.result_type(g, xp))
        for i in range(kh):
            for j in range(kw):
                dw[:, :, i, j] = (gr * _tap(xp, i, j, stride, ho, wo)[:, :, None]).sum(axis=(0, 3, 4))
        return dw.reshape(w_shape)

    cout_g = cout // groups
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    grads = []
    for grp in range(groups):
        cols = windows[:, grp * cin_g:(grp + 1) * cin_g].transpose(0, 2, 3, 1, 4, 5)
        cols = cols.reshape(n * ho * wo, cin_g * kh * kw)
        gmat = g[:, grp * cout_g:(grp + 1) * cout_g].transpose(0, 2, 3, 1).reshape(n * ho * wo, cout_g)
        grads.append((gmat.T @ cols).reshape(cout_g, cin_g, kh, kw))
    return grads[0] if groups == 1 else np.concatenate(grads, axis=0)


def _check_conv_args(
    x: Tensor, weight: Tensor, bias: Optional[Tensor], groups: int, in_c: int, out_c: int, op: str
) -> None:
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"{op}: input {x.shape} and weight {weight.shape} must both be 4-axis")
    if groups < 1 or in_c % groups or out_c % groups:
        raise DimensionError(
            f"{op}: channel counts in={in_c}, out={out_c} are not divisible by groups={groups}"
        )
    if bias is not None and bias.shape != (out_c,):
        raise DimensionError(f"{op}: bias shape {bias.shape} != ({out_c},)")


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """2D cross-correlation; weight is (out_c, in_c // groups, kh, kw)."""
    out_c, cin_g, kh, kw = weight.shape if weight.ndim == 4 else (0, 0, 0, 0)
    _check_conv_args(x, weight, bias, groups, x.shape[1] if x.ndim == 4 else 0, out_c, "conv2d")
    n, in_c, h, w = x.shape
    if cin_g * groups != in_c:
        raise DimensionError(
            f"conv2d: input has {in_c} channels on the channel axis, weight expects {cin_g * groups}"
        )
    bad = [
        name
        for name, size, k in (("height", h, kh), ("width", w, kw))
        if size + 2 * padding - k < 0 or (size + 2 * padding - k) % stride
    ]
    if bad:
        raise DimensionError(
            f"conv2d: {', '.join(bad)} of {x.shape} with kernel {kh}x{kw}, stride {stride}, "
            f"padding {padding} does not give an integer output size"
        )

    xp = _pad(x.data, padding)
    out = _conv_apply(xp, weight.data, stride, groups)
    if bias is not None:
        out += bias.data.reshape(1, -1, 1, 1)
    _add_macs(out.size * cin_g * kh * kw)

    w_data = weight.data

    def _backward(g):
        gx = gw = gb = None
        if x.requires_grad:
            gx = _unpad(_conv_adjoint(g, w_data, xp.shape, stride, groups), padding)
        if weight.requires_grad:
            gw = _conv_weight_grad(g, xp, w_data.shape, stride, groups)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gw, gb)

    inputs = (x, weight, bias) if bias is not None else (x, weight)
    return record(out, inputs, _backward, "conv2d")


def conv2d_transpose(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 2,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """Adjoint of :func:`conv2d` with the same weights.

    Weight is (in_c, out_c // groups, kh, kw), i.e. the weight of the
    convolution that maps the output back onto the input.
    """
    in_c = x.shape[1] if x.ndim == 4 else 0
    _, cout_g, kh, kw = weight.shape if weight.ndim == 4 else (0, 0, 0, 0)
    out_c = cout_g * groups
    _check_conv_args(x, weight, bias, groups, in_c, out_c, "conv2d_transpose")
    if weight.shape[0] != in_c:
        raise DimensionError(
            f"conv2d_transpose: input has {in_c} channels on the channel axis, weight expects {weight.shape[0]}"
        )
    n, _, h, w = x.shape
    hp, wp = (h - 1) * stride + kh, (w - 1) * stride + kw
    if hp - 2 * padding < 1 or wp - 2 * padding < 1:
        raise DimensionError(f"conv2d_transpose: padding {padding} leaves no output for input {x.shape}")

    w_data = weight.data
    full = _conv_adjoint(x.data, w_data, (n, out_c, hp, wp), stride, groups)
    out = _unpad(full, padding)
    if bias is not None:
        out = out + bias.data.reshape(1, -1, 1, 1)
    _add_macs(x.size * cout_g * kh * kw)

    x_data = x.data

    def _backward(g):
        gp = _pad(g, padding)
        gx = gw = gb = None
        if x.requires_grad:
            gx = _conv_apply(gp, w_data, stride, groups)
        if weight.requires_grad:
            gw = _conv_weight_grad(x_data, gp, w_data.shape, stride, groups)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gw, gb)

    inputs = (x, weight, bias) if bias is not None else (x, weight)
    return record(out, inputs, _backward, "conv2d_transpose")


# Normalisation


def _check_affine(x: Tensor, gamma: Tensor, beta: Tensor, op: str) -> int:
    if x.ndim != 4:
        raise DimensionError(f"{op}: input must be (n, c, h, w), got {x.shape}")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(
            f"{op}: gamma {gamma.shape} / beta {beta.shape} must match channel axis length {c}"
        )
    return c


def batchnorm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: Optional[np.ndarray],
    running_var: Optional[np.ndarray],
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalisation over (batch, height, width).

    In training mode the batch statistics are used and the running buffers are
    updated in place (unbiased variance); in eval mode the running buffers are
    used unchanged.
    """
    _check_affine(x, gamma, beta, "batchnorm2d")
    axes = (0, 2, 3)
    data = x.data
    if training:
        mean = data.mean(axis=axes)
        var = data.var(axis=axes)
        count = data.size // data.shape[1]
        if running_mean is not None and running_var is not None:
            unbiased = var * (count / (count - 1)) if count > 1 else var
            running_mean *= 1.0 - momentum
            running_mean += momentum * mean
            running_var *= 1.0 - momentum
            running_var += momentum * unbiased
    else:
        if running_mean is None or running_var is None:
            raise DimensionError("batchnorm2d: eval mode needs running statistics")
        mean, var = running_mean.copy(), running_var.copy()

    inv_std = (1.0 / np.sqrt(var + eps)).astype(data.dtype).reshape(1, -1, 1, 1)
    xhat = (data - mean.reshape(1, -1, 1, 1).astype(data.dtype)) * inv_std
    g_data = gamma.data.reshape(1, -1, 1, 1)
    out = g_data * xhat + beta.data.reshape(1, -1, 1, 1)

    def _backward(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * g_data
        if training:
            dx = inv_std * (
                dxhat
                - dxhat.mean(axis=axes, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=axes, keepdims=True)
            )
        else:
            dx = dxhat * inv_std
        return dx, dgamma, dbeta

    return record(out, (x, gamma, beta), _backward, "batchnorm2d")


def layer_norm2d(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise each (sample, channel) plane over (height, width), then scale and shift."""
    _check_affine(x, gamma, beta, "layer_norm2d")
    data = x.data
    mean = data.mean(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(data.var(axis=(2, 3), keepdims=True) + eps)
    xhat = (data - mean) * inv_std
    g_data = gamma.data.reshape(1, -1, 1, 1)
    out = g_data * xhat + beta.data.reshape(1, -1, 1, 1)

    def _backward(g):
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        dxhat = g * g_data
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=(2, 3), keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=(2, 3), keepdims=True)
        )
        return dx, dgamma, dbeta

    return record(out, (x, gamma, beta), _backward, "layer_norm2d")


# Resampling


def avg_pool(x: Tensor, factor: int) -> Tensor:
    n, c, h, w = x.shape
    bad = [name for name, size in (("height", h), ("width", w)) if size % factor]
    if bad:
        raise DimensionError(f"avg_pool: {', '.join(bad)} of {x.shape} not divisible by {factor}")
    out = x.data.reshape(n, c, h // factor, factor, w // factor, factor).mean(axis=(3, 5))
    area = float(factor * factor)

    def _backward(g):
        return (np.repeat(np.repeat(g, factor, axis=2), factor, axis=3) / area,)

    return record(out, (x,), _backward, "avg_pool")


def _interp_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    """Half-pixel-centred linear interpolation weights, edges clamped."""
    m = np.zeros((n_out, n_in), dtype=np.float64)
    ratio = n_in / n_out
    for o in range(n_out):
        src = min(max((o + 0.5) * ratio - 0.5, 0.0), n_in - 1.0)
        i0 = int(math.floor(src))
        i1 = min(i0 + 1, n_in - 1)
        frac = src - i0
        m[o, i0] += 1.0 - frac
        m[o, i1] += frac
    return m.astype(dtype)


def bilinear_resize(x: Tensor, size: Tuple[int, int]) -> Tensor:
    if x.ndim != 4:
        raise DimensionError(f"bilinear_resize: input must be (n, c, h, w), got {x.shape}")
    oh, ow = size
    if oh < 1 or ow < 1:
        raise DimensionError(f"bilinear_resize: target size {size} must be positive")
    ry = _interp_matrix(x.shape[2], oh, x.dtype)
    rx = _interp_matrix(x.shape[3], ow, x.dtype)
    out = ry @ x.data @ rx.T
    return record(out, (x,), lambda g: (ry.T @ g @ rx,), "bilinear_resize")


def _reflect_indices(n: int, before: int, after: int) -> np.ndarray:
    idx = np.arange(-before, n + after)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = idx % period
    return np.where(idx >= n, period - idx, idx)


def _gather_spatial(x: Tensor, rows: np.ndarray, cols: np.ndarray, op: str) -> Tensor:
    index = (slice(None), slice(None), rows[:, None], cols[None, :])
    shape, dtype = x.shape, x.dtype

    def _backward(g):
        full = np.zeros(shape, dtype=dtype)
        np.add.at(full, index, g)
        return (full,)

    return record(x.data[index], (x,), _backward, op)


def reflect_pad(x: Tensor, bottom: int, right: int, top: int = 0, left: int = 0) -> Tensor:
    """Mirror-pad the spatial axes (edge sample not repeated).

    Pads wider than the axis keep reflecting back and forth.
    """
    if bottom == 0 and right == 0 and top == 0 and left == 0:
        return x
    _, _, h, w = x.shape
    rows = _reflect_indices(h, top, bottom)
    cols = _reflect_indices(w, left, right)
    return _gather_spatial(x, rows, cols, "reflect_pad")


def crop(x: Tensor, height: int, width: int) -> Tensor:
    """Top-left ``height`` x ``width`` window."""
    _, _, h, w = x.shape
    if height > h or width > w:
        raise DimensionError(f"crop: {height}x{width} exceeds height/width of {x.shape}")
    if (height, width) == (h, w):
        return x
    shape, dtype = x.shape, x.dtype

    def _backward(g):
        full = np.zeros(shape, dtype=dtype)
        full[:, :, :height, :width] = g
        return (full,)

    return record(x.data[:, :, :height, :width].copy(), (x,), _backward, "crop")


def pad_to_multiple(x: Tensor, multiple: int) -> Tuple[Tensor, Tuple[int, int]]:
    """Reflect-pad height and width up to ``multiple``; returns the original size too."""
    _, _, h, w = x.shape
    return reflect_pad(x, (-h) % multiple, (-w) % multiple), (h, w)
