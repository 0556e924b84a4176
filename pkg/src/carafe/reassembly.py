"""Content-aware feature reassembly in both resampling directions.

The operator has two halves:

1. Kernel prediction: a 1x1 channel compressor, an optional per-channel
   normalize+ReLU stage, a content-encoder convolution (strided by sigma for
   downsampling; stride 1 followed by depth-to-space for upsampling), and a
   grouped normalizer that turns each k^2 logit group into reassembly
   weights.
2. Reassembly: every output location takes a weighted sum of the k x k
   source neighborhood around its mapped source location, with the same
   per-location kernel shared across all feature channels.

Downsampling maps target (i', j') to source (sigma*i', sigma*j') and emits
ceil(H/sigma) x ceil(W/sigma); upsampling maps to (i'//sigma, j'//sigma) and
emits sigma*H x sigma*W. Borders are zero-padded.

Accumulation orders are fixed so the vectorized code agrees bitwise with the
direct loop nests in reference.py: reassembly folds window offsets row-major
(dn outer, dm inner; kernel channel q = (dn+r)*k + (dm+r)); the backward
scatter into the source map follows the same offset order, iterating
sub-pixel phases row-major within each offset for the upsampling direction;
the kernel-field gradient folds feature channels in ascending order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (ContractError, DTypeError, GeometryError,
                     KernelSizeError, ShapeError)
from .nn import (AffineNormParams, ConvLayerParams, affine_norm,
                 affine_norm_backward, affine_params, conv2d_backward,
                 conv2d_forward, conv_params, pixel_shuffle, pixel_unshuffle,
                 relu, relu_backward, sigmoid_array, softmax_group,
                 softmax_group_backward)
from .tensor import Tensor

DIRECTIONS = ("down", "up")
NORMALIZERS = ("softmax", "sigmoid", "sigmoid_norm")

_C_MID_DEFAULT = {"down": 16, "up": 64}
_COMPRESSOR_NORM_DEFAULT = {"down": True, "up": False}


@dataclass(frozen=True)
class CarafeConfig:
    """Geometry and variant knobs for one reassembly operator.

    c_mid and compressor_norm default by direction (16/True for down,
    64/False for up) when left as None.
    """

    direction: str
    sigma: int
    k_encoder: int = 3
    k_reassembly: int = 5
    c_mid: Optional[int] = None
    normalizer: str = "softmax"
    compressor_norm: Optional[bool] = None

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if not isinstance(self.sigma, int) or isinstance(self.sigma, bool):
            raise GeometryError(f"sigma must be an integer, got {self.sigma!r}")
        if self.sigma < 1:
            raise GeometryError(f"sigma must be >= 1, got {self.sigma}")
        for name in ("k_encoder", "k_reassembly"):
            k = getattr(self, name)
            if not isinstance(k, int) or k < 1 or k % 2 == 0:
                raise KernelSizeError(f"{name} must be odd and >= 1, got {k}")
        if self.c_mid is None:
            object.__setattr__(self, "c_mid", _C_MID_DEFAULT[self.direction])
        if self.c_mid < 1:
            raise ValueError(f"c_mid must be >= 1, got {self.c_mid}")
        if self.normalizer not in NORMALIZERS:
            raise ValueError(f"normalizer must be one of {NORMALIZERS}, got {self.normalizer!r}")
        if self.compressor_norm is None:
            object.__setattr__(self, "compressor_norm",
                               _COMPRESSOR_NORM_DEFAULT[self.direction])

    @property
    def kernel_channels(self) -> int:
        """Channels in the kernel field: k_reassembly^2, independent of C."""
        return self.k_reassembly * self.k_reassembly

    @property
    def encoder_out_channels(self) -> int:
        if self.direction == "down":
            return self.kernel_channels
        return self.sigma * self.sigma * self.kernel_channels

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        if self.direction == "down":
            return (-(-h // self.sigma), -(-w // self.sigma))
        return (self.sigma * h, self.sigma * w)


@dataclass(frozen=True)
class KernelField:
    """All predicted reassembly kernels for one input.

    tensor is (n, k^2, H_out, W_out): channel q holds the weight of window
    offset (dn, dm) with q = (dn+r)*k + (dm+r). normalized means every k^2
    group sums to 1 with positive entries (softmax or sigmoid+renormalize);
    the plain sigmoid variant emits normalized=False.
    """

    tensor: Tensor
    k: int
    normalized: bool

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise KernelSizeError(f"kernel size must be odd and >= 1, got {self.k}")
        if self.tensor.shape[1] != self.k * self.k:
            raise ShapeError(
                f"kernel field needs k^2 = {self.k * self.k} channels, "
                f"got {self.tensor.shape[1]}")


@dataclass
class CarafeParams:
    """Learnables of the kernel-prediction pipeline."""

    compressor: ConvLayerParams
    encoder: ConvLayerParams
    norm: Optional[AffineNormParams] = None

    def param_objects(self) -> list:
        objs = [self.compressor, self.encoder]
        if self.norm is not None:
            objs.append(self.norm)
        return objs

    def slots(self):
        out = []
        for obj in self.param_objects():
            out.extend(obj.slots())
        return out

    def zero_grads(self) -> None:
        for obj in self.param_objects():
            obj.zero_grads()


def carafe_params(c_in: int, cfg: CarafeConfig, rng: np.random.Generator | None,
                  dtype=np.float64) -> CarafeParams:
    """Build the compressor/encoder (and norm, when enabled) for c_in channels.

    With rng=None all conv weights are zero, which makes the predicted
    kernels exactly uniform under the softmax normalizer.
    """
    # With the norm stage on, the compressor's bias would be cancelled by the
    # mean subtraction (identically zero gradient), so it is left untrained.
    compressor = conv_params(cfg.c_mid, c_in, 1, rng, dtype,
                             bias=not cfg.compressor_norm)
    encoder = conv_params(cfg.encoder_out_channels, cfg.c_mid, cfg.k_encoder, rng, dtype)
    norm = affine_params(cfg.c_mid, dtype) if cfg.compressor_norm else None
    return CarafeParams(compressor=compressor, encoder=encoder, norm=norm)


def map_target_to_source(l_prime: tuple[int, int], cfg: CarafeConfig) -> tuple[int, int]:
    """Source location feeding target (i', j'): scale down, floor-divide up."""
    i, j = l_prime
    if i < 0 or j < 0:
        raise GeometryError(f"target location must be non-negative, got {l_prime}")
    if cfg.direction == "down":
        return (cfg.sigma * i, cfg.sigma * j)
    return (i // cfg.sigma, j // cfg.sigma)


def kernel_offsets(k: int) -> list[tuple[int, int]]:
    """Window offsets in kernel-channel order: row-major over (dn, dm)."""
    r = k // 2
    return [(dn, dm) for dn in range(-r, r + 1) for dm in range(-r, r + 1)]


# ---------------------------------------------------------------------------
# kernel prediction


class _PredictCache:
    __slots__ = ("comp", "normed", "enc_in", "enc_raw", "logits", "sig", "sig_sum")

    def __init__(self):
        self.comp = None
        self.normed = None
        self.enc_in = None
        self.enc_raw = None
        self.logits = None
        self.sig = None
        self.sig_sum = None


def _normalize_logits(logits: Tensor, cfg: CarafeConfig, cache: _PredictCache) -> KernelField:
    g = cfg.kernel_channels
    if cfg.normalizer == "softmax":
        return KernelField(softmax_group(logits, g), cfg.k_reassembly, True)
    s = sigmoid_array(logits.data)
    if cfg.normalizer == "sigmoid":
        cache.sig = s
        return KernelField(Tensor(s), cfg.k_reassembly, False)
    n, c, h, w = logits.shape
    sr = s.reshape(n, c // g, g, h, w)
    total = np.zeros((n, c // g, h, w), dtype=logits.dtype)
    for ch in range(g):
        total += sr[:, :, ch]
    y = sr / total[:, :, None]
    cache.sig = s
    cache.sig_sum = total
    return KernelField(Tensor(y.reshape(n, c, h, w)), cfg.k_reassembly, True)


def _predict_forward(x: Tensor, params: CarafeParams, cfg: CarafeConfig
                     ) -> tuple[KernelField, _PredictCache]:
    if x.shape[1] != params.compressor.weights.shape[1]:
        raise ShapeError(
            f"input has {x.shape[1]} channels, compressor expects "
            f"{params.compressor.weights.shape[1]}")
    if params.encoder.weights.shape[0] != cfg.encoder_out_channels:
        raise ShapeError(
            f"encoder emits {params.encoder.weights.shape[0]} channels, config "
            f"needs {cfg.encoder_out_channels}")
    if cfg.compressor_norm and params.norm is None:
        raise ContractError("config enables compressor_norm but params.norm is missing")
    cache = _PredictCache()
    cache.comp = conv2d_forward(x, params.compressor, stride=1, pad=0)
    if cfg.compressor_norm:
        cache.normed = affine_norm(cache.comp, params.norm)
        cache.enc_in = relu(cache.normed)
    else:
        cache.enc_in = cache.comp
    pad = cfg.k_encoder // 2
    if cfg.direction == "down":
        cache.enc_raw = conv2d_forward(cache.enc_in, params.encoder,
                                       stride=cfg.sigma, pad=pad)
        cache.logits = cache.enc_raw
    else:
        cache.enc_raw = conv2d_forward(cache.enc_in, params.encoder, stride=1, pad=pad)
        cache.logits = pixel_shuffle(cache.enc_raw, cfg.sigma)
    kf = _normalize_logits(cache.logits, cfg, cache)
    return kf, cache


def predict_kernels(x: Tensor, params: CarafeParams, cfg: CarafeConfig) -> KernelField:
    """Run the kernel-prediction pipeline and return the kernel field."""
    kf, _ = _predict_forward(x, params, cfg)
    return kf


def _normalize_backward(grad_kf: np.ndarray, cfg: CarafeConfig,
                        cache: _PredictCache, kf: KernelField) -> Tensor:
    g = cfg.kernel_channels
    if cfg.normalizer == "softmax":
        return softmax_group_backward(Tensor(grad_kf), cache.logits, g)
    if cfg.normalizer == "sigmoid":
        s = cache.sig
        return Tensor(grad_kf * s * (1.0 - s))
    n, c, h, w = cache.logits.shape
    s = cache.sig.reshape(n, c // g, g, h, w)
    total = cache.sig_sum
    gr = grad_kf.reshape(n, c // g, g, h, w)
    dot = np.zeros((n, c // g, h, w), dtype=cache.logits.dtype)
    for ch in range(g):
        dot += gr[:, :, ch] * s[:, :, ch]
    gs = gr / total[:, :, None] - (dot / (total * total))[:, :, None]
    gz = gs * s * (1.0 - s)
    return Tensor(gz.reshape(n, c, h, w))


# ---------------------------------------------------------------------------
# reassembly


def _check_reassemble_args(x: Tensor, kf: KernelField, cfg: CarafeConfig,
                           allow_unnormalized: bool) -> None:
    if not allow_unnormalized and not kf.normalized:
        raise ContractError(
            "kernel field is not normalized; pass allow_unnormalized=True to "
            "reassemble with raw gate values")
    if kf.k != cfg.k_reassembly:
        raise KernelSizeError(
            f"kernel field built for k={kf.k}, config says {cfg.k_reassembly}")
    n, _, h, w = x.shape
    h_out, w_out = cfg.output_hw(h, w)
    if kf.tensor.shape != (n, cfg.kernel_channels, h_out, w_out):
        raise ShapeError(
            f"kernel field shape {kf.tensor.shape} != expected "
            f"({n},{cfg.kernel_channels},{h_out},{w_out})")
    if kf.tensor.dtype != x.dtype:
        raise DTypeError(
            f"dtype mismatch: input {x.dtype} vs kernel field {kf.tensor.dtype}")


def _up_gather_indices(cfg: CarafeConfig, h: int, w: int, r: int
                       ) -> tuple[np.ndarray, np.ndarray]:
    rows = np.arange(cfg.sigma * h) // cfg.sigma + r
    cols = np.arange(cfg.sigma * w) // cfg.sigma + r
    return rows, cols


def reassemble(x: Tensor, kf: KernelField, cfg: CarafeConfig,
               allow_unnormalized: bool = False) -> Tensor:
    """Weighted-sum reassembly of source neighborhoods, channel-shared.

    out[b, c, i', j'] = sum over window offsets (dn, dm) of
    kf[b, q, i', j'] * x[b, c, i + dn, j + dm], with (i, j) the mapped source
    location, q = (dn+r)*k + (dm+r), zero padding off the edges, and the fold
    running in ascending q.
    """
    _check_reassemble_args(x, kf, cfg, allow_unnormalized)
    n, c, h, w = x.shape
    h_out, w_out = cfg.output_hw(h, w)
    k = cfg.k_reassembly
    r = k // 2
    sig = cfg.sigma
    xp = np.pad(x.data, ((0, 0), (0, 0), (r, r), (r, r)))
    kd = kf.tensor.data
    out = np.zeros((n, c, h_out, w_out), dtype=x.dtype)
    if cfg.direction == "down":
        for q, (dn, dm) in enumerate(kernel_offsets(k)):
            xs = xp[:, :,
                    r + dn:r + dn + sig * (h_out - 1) + 1:sig,
                    r + dm:r + dm + sig * (w_out - 1) + 1:sig]
            out += kd[:, q][:, None] * xs
    else:
        rows, cols = _up_gather_indices(cfg, h, w, r)
        for q, (dn, dm) in enumerate(kernel_offsets(k)):
            xs = xp[:, :, (rows + dn)[:, None], (cols + dm)[None, :]]
            out += kd[:, q][:, None] * xs
    return Tensor(out)


def reassemble_backward(grad_y: Tensor, x: Tensor, kf: KernelField,
                        cfg: CarafeConfig, allow_unnormalized: bool = False
                        ) -> tuple[Tensor, Tensor]:
    """Adjoint of reassemble: grads wrt the source map and the kernel field.

    Scatter into the source map folds offsets in ascending q; inside one
    offset the downsampling writes are disjoint strided slices, and the
    upsampling direction iterates sub-pixel phases (di, dj) row-major, each
    phase writing one contiguous block. The kernel-field gradient folds
    feature channels in ascending order.
    """
    _check_reassemble_args(x, kf, cfg, allow_unnormalized)
    n, c, h, w = x.shape
    h_out, w_out = cfg.output_hw(h, w)
    if grad_y.shape != (n, c, h_out, w_out):
        raise ShapeError(
            f"grad shape {grad_y.shape} != output shape ({n},{c},{h_out},{w_out})")
    if grad_y.dtype != x.dtype:
        raise DTypeError(f"dtype mismatch: grad {grad_y.dtype} vs input {x.dtype}")
    k = cfg.k_reassembly
    r = k // 2
    sig = cfg.sigma
    go = grad_y.data
    kd = kf.tensor.data
    xp = np.pad(x.data, ((0, 0), (0, 0), (r, r), (r, r)))
    gxp = np.zeros_like(xp)
    gk = np.empty_like(kd)
    if cfg.direction == "down":
        for q, (dn, dm) in enumerate(kernel_offsets(k)):
            sl_i = slice(r + dn, r + dn + sig * (h_out - 1) + 1, sig)
            sl_j = slice(r + dm, r + dm + sig * (w_out - 1) + 1, sig)
            gxp[:, :, sl_i, sl_j] += kd[:, q][:, None] * go
            xs = xp[:, :, sl_i, sl_j]
            acc = np.zeros((n, h_out, w_out), dtype=x.dtype)
            for ch in range(c):
                acc += go[:, ch] * xs[:, ch]
            gk[:, q] = acc
    else:
        rows, cols = _up_gather_indices(cfg, h, w, r)
        for q, (dn, dm) in enumerate(kernel_offsets(k)):
            for di in range(sig):
                for dj in range(sig):
                    go_ph = go[:, :, di::sig, dj::sig]
                    w_ph = kd[:, q, di::sig, dj::sig]
                    gxp[:, :, r + dn:r + dn + h, r + dm:r + dm + w] += \
                        w_ph[:, None] * go_ph
            xs = xp[:, :, (rows + dn)[:, None], (cols + dm)[None, :]]
            acc = np.zeros((n, h_out, w_out), dtype=x.dtype)
            for ch in range(c):
                acc += go[:, ch] * xs[:, ch]
            gk[:, q] = acc
    grad_x = gxp[:, :, r:r + h, r:r + w].copy() if r else gxp
    return Tensor(grad_x), Tensor(gk)


# ---------------------------------------------------------------------------
# fused operator


class CarafeCache:
    """Intermediates retained by carafe_forward for the backward pass."""

    __slots__ = ("x", "cfg", "params", "predict", "kf", "y_shape", "consumed")

    def __init__(self, x, cfg, params, predict, kf, y_shape):
        self.x = x
        self.cfg = cfg
        self.params = params
        self.predict = predict
        self.kf = kf
        self.y_shape = y_shape
        self.consumed = False


def carafe_forward(x: Tensor, params: CarafeParams, cfg: CarafeConfig
                   ) -> tuple[Tensor, CarafeCache]:
    """Predict kernels from content, then reassemble with them."""
    kf, pcache = _predict_forward(x, params, cfg)
    y = reassemble(x, kf, cfg, allow_unnormalized=(cfg.normalizer == "sigmoid"))
    cache = CarafeCache(x, cfg, params, pcache, kf, y.shape)
    return y, cache


def carafe_backward(grad_y: Tensor, cache: CarafeCache) -> Tensor:
    """Full adjoint: both the reassembly-source path and the kernel path.

    Returns grad wrt x (feature path plus prediction path, added in that
    order) and accumulates every parameter gradient in cache.params.
    """
    if cache is None:
        raise ContractError("carafe_backward needs the cache from carafe_forward")
    if cache.consumed:
        raise ContractError("cache already consumed by a previous backward call")
    if grad_y.shape != cache.y_shape:
        raise ShapeError(f"grad shape {grad_y.shape} != forward output {cache.y_shape}")
    cache.consumed = True
    cfg = cache.cfg
    params = cache.params
    pc = cache.predict
    gx_feat, g_kf = reassemble_backward(
        grad_y, cache.x, cache.kf, cfg,
        allow_unnormalized=(cfg.normalizer == "sigmoid"))
    g_logits = _normalize_backward(g_kf.data, cfg, pc, cache.kf)
    if cfg.direction == "down":
        g_raw = g_logits
    else:
        g_raw = pixel_unshuffle(g_logits, cfg.sigma)
    pad = cfg.k_encoder // 2
    stride = cfg.sigma if cfg.direction == "down" else 1
    g_enc_in = conv2d_backward(g_raw, pc.enc_in, params.encoder, stride=stride, pad=pad)
    if cfg.compressor_norm:
        g_normed = relu_backward(g_enc_in, pc.normed)
        g_comp = affine_norm_backward(g_normed, pc.comp, params.norm)
    else:
        g_comp = g_enc_in
    gx_pred = conv2d_backward(g_comp, cache.x, params.compressor, stride=1, pad=0)
    return Tensor(gx_feat.data + gx_pred.data)
