"""Rule-based and learned resamplers sharing the reassembly shape contracts.

Every kind maps (n, c, h, w) to the same output size as the content-aware
operator for its direction: ceil(h/sigma) x ceil(w/sigma) down, sigma*h x
sigma*w up. That makes them drop-in slot fillers for the demo nets and the
benchmark roster.

Kinds:
- nearest_up, bilinear_up: interpolation (half-pixel centers, edges clamped)
- max_pool, avg_pool: window k = sigma, stride sigma; odd windows are
  centered like the reassembly neighborhoods, even windows anchor top-left;
  zero padding, and the average always divides by k^2
- strided_conv: 3x3 conv, stride sigma, pad 1
- transposed_conv: kernel 2*sigma - (sigma mod 2), pad (k - sigma) / 2
- nearest_plus_conv, bilinear_plus_conv: interpolation then a 3x3 conv
- spatial_attention: a 1x1-conv sigmoid gate scales x, then decimate/repeat
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GeometryError, ShapeError
from .nn import (ConvLayerParams, conv2d_backward, conv2d_forward,
                 conv_params, sigmoid_array, transposed_conv_backward,
                 transposed_conv_forward, transposed_conv_params)
from .tensor import Tensor

UP_KINDS = ("nearest_up", "bilinear_up", "transposed_conv",
            "nearest_plus_conv", "bilinear_plus_conv")
DOWN_KINDS = ("max_pool", "avg_pool", "strided_conv")
DUAL_KINDS = ("spatial_attention",)
ALL_KINDS = UP_KINDS + DOWN_KINDS + DUAL_KINDS

LEARNED_KINDS = ("strided_conv", "transposed_conv", "nearest_plus_conv",
                 "bilinear_plus_conv", "spatial_attention")


@dataclass
class ResampleOp:
    kind: str
    sigma: int
    direction: str
    params: Optional[ConvLayerParams] = None


def deconv_geometry(sigma: int) -> tuple[int, int]:
    """(kernel, pad) for the transposed-conv baseline; k - 2*pad == sigma."""
    k = 2 * sigma - (sigma % 2)
    return k, (k - sigma) // 2


def make_resample_op(kind: str, sigma: int, channels: int | None = None,
                     rng: np.random.Generator | None = None,
                     dtype=np.float64, direction: str | None = None) -> ResampleOp:
    """Build one roster entry; learned kinds need channels (rng optional)."""
    if kind not in ALL_KINDS:
        raise ValueError(f"unknown resample kind {kind!r}; choose from {ALL_KINDS}")
    if not isinstance(sigma, int) or sigma < 1:
        raise GeometryError(f"sigma must be an integer >= 1, got {sigma!r}")
    if kind in UP_KINDS:
        inferred = "up"
    elif kind in DOWN_KINDS:
        inferred = "down"
    else:
        if direction not in ("down", "up"):
            raise ValueError(f"{kind} needs an explicit direction ('down' or 'up')")
        inferred = direction
    if direction is not None and direction != inferred:
        raise ValueError(f"{kind} resamples {inferred}, not {direction}")
    params = None
    if kind in LEARNED_KINDS:
        if channels is None:
            raise ValueError(f"{kind} is learned; pass the channel count")
        if kind == "strided_conv":
            params = conv_params(channels, channels, 3, rng, dtype)
        elif kind == "transposed_conv":
            k, _ = deconv_geometry(sigma)
            params = transposed_conv_params(channels, channels, k, rng, dtype)
        elif kind in ("nearest_plus_conv", "bilinear_plus_conv"):
            params = conv_params(channels, channels, 3, rng, dtype)
        elif kind == "spatial_attention":
            params = conv_params(1, channels, 1, rng, dtype)
    return ResampleOp(kind=kind, sigma=sigma, direction=inferred, params=params)


def resample_output_hw(op: ResampleOp, h: int, w: int) -> tuple[int, int]:
    if op.direction == "down":
        return (-(-h // op.sigma), -(-w // op.sigma))
    return (op.sigma * h, op.sigma * w)


# ---------------------------------------------------------------------------
# interpolation helpers


def _nearest_indices(sigma: int, size: int) -> np.ndarray:
    return np.arange(sigma * size) // sigma


def _bilinear_axis(sigma: int, size: int, dtype) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(lo index, hi index, hi weight) per output coordinate, half-pixel centers."""
    src = (np.arange(sigma * size, dtype=np.float64) + 0.5) / sigma - 0.5
    src = np.maximum(src, 0.0)
    lo = np.minimum(np.floor(src).astype(np.intp), size - 1)
    t = (src - lo).astype(dtype)
    hi = np.minimum(lo + 1, size - 1)
    return lo, hi, t


def _bilinear_up(xd: np.ndarray, sigma: int) -> tuple[np.ndarray, tuple]:
    n, c, h, w = xd.shape
    i0, i1, ti = _bilinear_axis(sigma, h, xd.dtype)
    j0, j1, tj = _bilinear_axis(sigma, w, xd.dtype)
    one = xd.dtype.type(1)
    rows = xd[:, :, i0, :] * (one - ti)[None, None, :, None] \
        + xd[:, :, i1, :] * ti[None, None, :, None]
    out = rows[:, :, :, j0] * (one - tj)[None, None, None, :] \
        + rows[:, :, :, j1] * tj[None, None, None, :]
    return out, (i0, i1, ti, j0, j1, tj, h, w)


def _bilinear_up_backward(go: np.ndarray, geom: tuple) -> np.ndarray:
    i0, i1, ti, j0, j1, tj, h, w = geom
    n, c = go.shape[:2]
    one = go.dtype.type(1)
    g_rows = np.zeros((n, c, go.shape[2], w), dtype=go.dtype)
    np.add.at(g_rows, (slice(None), slice(None), slice(None), j0),
              go * (one - tj)[None, None, None, :])
    np.add.at(g_rows, (slice(None), slice(None), slice(None), j1),
              go * tj[None, None, None, :])
    gx = np.zeros((n, c, h, w), dtype=go.dtype)
    np.add.at(gx, (slice(None), slice(None), i0, slice(None)),
              g_rows * (one - ti)[None, None, :, None])
    np.add.at(gx, (slice(None), slice(None), i1, slice(None)),
              g_rows * ti[None, None, :, None])
    return gx


# ---------------------------------------------------------------------------
# pooling helpers


def _pool_offsets(k: int) -> list[int]:
    if k % 2:
        r = (k - 1) // 2
        return list(range(-r, r + 1))
    return list(range(k))


def _pool_geometry(h: int, w: int, sigma: int) -> tuple[list[int], int, int, int, int]:
    offs = _pool_offsets(sigma)
    h_out = -(-h // sigma)
    w_out = -(-w // sigma)
    pad_lo = max(0, -offs[0])
    pad_hi_h = max(0, offs[-1] + sigma * (h_out - 1) - (h - 1))
    pad_hi_w = max(0, offs[-1] + sigma * (w_out - 1) - (w - 1))
    return offs, h_out, w_out, pad_lo, max(pad_hi_h, pad_hi_w)


# ---------------------------------------------------------------------------
# forward / backward dispatch


def resample_forward(op: ResampleOp, x: Tensor) -> tuple[Tensor, dict]:
    """Apply the operator; returns (output, cache for resample_backward)."""
    n, c, h, w = x.shape
    xd = x.data
    sig = op.sigma
    kind = op.kind
    if kind == "nearest_up":
        rows = _nearest_indices(sig, h)
        cols = _nearest_indices(sig, w)
        y = xd[:, :, rows[:, None], cols[None, :]]
        return Tensor(y), {"in_hw": (h, w)}
    if kind == "bilinear_up":
        y, geom = _bilinear_up(xd, sig)
        return Tensor(y), {"geom": geom}
    if kind == "max_pool":
        offs, h_out, w_out, pad_lo, pad_hi = _pool_geometry(h, w, sig)
        xp = np.pad(xd, ((0, 0), (0, 0), (pad_lo, pad_hi), (pad_lo, pad_hi)),
                    constant_values=-np.inf)
        cands = np.stack([
            xp[:, :,
               pad_lo + di:pad_lo + di + sig * (h_out - 1) + 1:sig,
               pad_lo + dj:pad_lo + dj + sig * (w_out - 1) + 1:sig]
            for di in offs for dj in offs], axis=0)
        arg = np.argmax(cands, axis=0)
        y = np.take_along_axis(cands, arg[None], axis=0)[0]
        return Tensor(y), {"arg": arg, "in_hw": (h, w)}
    if kind == "avg_pool":
        offs, h_out, w_out, pad_lo, pad_hi = _pool_geometry(h, w, sig)
        xp = np.pad(xd, ((0, 0), (0, 0), (pad_lo, pad_hi), (pad_lo, pad_hi)))
        acc = np.zeros((n, c, h_out, w_out), dtype=x.dtype)
        for di in offs:
            for dj in offs:
                acc += xp[:, :,
                          pad_lo + di:pad_lo + di + sig * (h_out - 1) + 1:sig,
                          pad_lo + dj:pad_lo + dj + sig * (w_out - 1) + 1:sig]
        y = acc / x.dtype.type(sig * sig)
        return Tensor(y), {"in_hw": (h, w)}
    if kind == "strided_conv":
        y = conv2d_forward(x, op.params, stride=sig, pad=1)
        return y, {"x": x}
    if kind == "transposed_conv":
        k, pad = deconv_geometry(sig)
        y = transposed_conv_forward(x, op.params, stride=sig, pad=pad)
        return y, {"x": x}
    if kind in ("nearest_plus_conv", "bilinear_plus_conv"):
        if kind == "nearest_plus_conv":
            rows = _nearest_indices(sig, h)
            cols = _nearest_indices(sig, w)
            up = Tensor(xd[:, :, rows[:, None], cols[None, :]])
            cache = {"up": up, "in_hw": (h, w)}
        else:
            ud, geom = _bilinear_up(xd, sig)
            up = Tensor(ud)
            cache = {"up": up, "geom": geom}
        y = conv2d_forward(up, op.params, stride=1, pad=1)
        return y, cache
    if kind == "spatial_attention":
        z = conv2d_forward(x, op.params, stride=1, pad=0)
        gate = sigmoid_array(z.data)
        att = xd * gate
        if op.direction == "down":
            y = att[:, :, ::sig, ::sig]
        else:
            rows = _nearest_indices(sig, h)
            cols = _nearest_indices(sig, w)
            y = att[:, :, rows[:, None], cols[None, :]]
        return Tensor(np.ascontiguousarray(y)), {"x": x, "gate": gate}
    raise ValueError(f"unknown resample kind {kind!r}")


def _nearest_up_adjoint(go: np.ndarray, sigma: int, h: int, w: int) -> np.ndarray:
    n, c = go.shape[:2]
    return go.reshape(n, c, h, sigma, w, sigma).sum(axis=(3, 5))


def resample_backward(op: ResampleOp, grad_y: Tensor, cache: dict) -> Tensor:
    """Adjoint of resample_forward; accumulates grads of learned params."""
    go = grad_y.data
    sig = op.sigma
    kind = op.kind
    if kind == "nearest_up":
        h, w = cache["in_hw"]
        return Tensor(_nearest_up_adjoint(go, sig, h, w))
    if kind == "bilinear_up":
        return Tensor(_bilinear_up_backward(go, cache["geom"]))
    if kind == "max_pool":
        h, w = cache["in_hw"]
        arg = cache["arg"]
        offs, h_out, w_out, pad_lo, pad_hi = _pool_geometry(h, w, sig)
        gxp = np.zeros((go.shape[0], go.shape[1],
                        h + pad_lo + pad_hi, w + pad_lo + pad_hi), dtype=go.dtype)
        q = 0
        for di in offs:
            for dj in offs:
                gxp[:, :,
                    pad_lo + di:pad_lo + di + sig * (h_out - 1) + 1:sig,
                    pad_lo + dj:pad_lo + dj + sig * (w_out - 1) + 1:sig] += \
                    go * (arg == q)
                q += 1
        return Tensor(gxp[:, :, pad_lo:pad_lo + h, pad_lo:pad_lo + w].copy())
    if kind == "avg_pool":
        h, w = cache["in_hw"]
        offs, h_out, w_out, pad_lo, pad_hi = _pool_geometry(h, w, sig)
        gk = go / go.dtype.type(sig * sig)
        gxp = np.zeros((go.shape[0], go.shape[1],
                        h + pad_lo + pad_hi, w + pad_lo + pad_hi), dtype=go.dtype)
        for di in offs:
            for dj in offs:
                gxp[:, :,
                    pad_lo + di:pad_lo + di + sig * (h_out - 1) + 1:sig,
                    pad_lo + dj:pad_lo + dj + sig * (w_out - 1) + 1:sig] += gk
        return Tensor(gxp[:, :, pad_lo:pad_lo + h, pad_lo:pad_lo + w].copy())
    if kind == "strided_conv":
        return conv2d_backward(grad_y, cache["x"], op.params, stride=sig, pad=1)
    if kind == "transposed_conv":
        k, pad = deconv_geometry(sig)
        return transposed_conv_backward(grad_y, cache["x"], op.params,
                                        stride=sig, pad=pad)
    if kind in ("nearest_plus_conv", "bilinear_plus_conv"):
        up = cache["up"]
        g_up = conv2d_backward(grad_y, up, op.params, stride=1, pad=1)
        if kind == "nearest_plus_conv":
            h, w = cache["in_hw"]
            return Tensor(_nearest_up_adjoint(g_up.data, sig, h, w))
        return Tensor(_bilinear_up_backward(g_up.data, cache["geom"]))
    if kind == "spatial_attention":
        x = cache["x"]
        gate = cache["gate"]
        n, c, h, w = x.shape
        if op.direction == "down":
            g_att = np.zeros((n, c, h, w), dtype=go.dtype)
            g_att[:, :, ::sig, ::sig] = go
        else:
            g_att = _nearest_up_adjoint(go, sig, h, w)
        gx_feat = g_att * gate
        g_gate = (g_att * x.data).sum(axis=1, keepdims=True)
        gz = g_gate * gate * (1.0 - gate)
        gx_pred = conv2d_backward(Tensor(gz), x, op.params, stride=1, pad=0)
        return Tensor(gx_feat + gx_pred.data)
    raise ValueError(f"unknown resample kind {kind!r}")
