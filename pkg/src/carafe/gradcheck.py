"""Finite-difference gradient oracle and the registry of checked operators.

The oracle is the ground truth every hand-derived backward pass is judged
against: central differences with a per-element step of eps * max(1, |x_i|)
and the relative error metric |a - b| / max(|a|, |b|, 1e-12). Each registry
entry builds a small random problem (seeded), a scalar loss (a fixed random
projection of the operator output), and the analytic gradients, and check_op
compares the two over every input and parameter array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import baselines, nn, reassembly
from .errors import NumericError
from .tensor import Tensor

DEFAULT_TOL = 1e-5
DEFAULT_EPS = 1e-5


@dataclass(frozen=True)
class GradReport:
    """Outcome of one operator check: pass iff max_rel_error < tol."""

    name: str
    max_rel_error: float
    max_abs_error: float
    worst_index: tuple
    tol: float
    passed: bool
    per_target: dict

    def to_payload(self) -> dict:
        return {
            "op": self.name,
            "max_rel_error": self.max_rel_error,
            "max_abs_error": self.max_abs_error,
            "worst_index": list(self.worst_index),
            "tol": self.tol,
            "passed": self.passed,
            "per_target": {k: v for k, v in sorted(self.per_target.items())},
        }


def relative_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|a - b| / max(|a|, |b|, 1e-12), elementwise."""
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12)
    return np.abs(a - b) / denom


def finite_diff_array(loss_fn: Callable[[], float], arr: np.ndarray,
                      eps: float = DEFAULT_EPS) -> np.ndarray:
    """Central-difference gradient of loss_fn wrt arr, perturbing in place.

    Step per element is eps * max(1, |value|). arr is restored exactly.
    """
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    grad = np.zeros(arr.shape, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx].item()
        step = eps * max(1.0, abs(orig))
        flat[idx] = orig + step
        f_plus = loss_fn()
        flat[idx] = orig - step
        f_minus = loss_fn()
        flat[idx] = orig
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise NumericError(
                f"loss is non-finite at perturbed element {idx}: "
                f"f(+)={f_plus}, f(-)={f_minus}")
        gflat[idx] = (f_plus - f_minus) / (2.0 * step)
    return grad


def finite_diff(f: Callable[[Tensor], float], x: Tensor,
                eps: float = DEFAULT_EPS) -> Tensor:
    """Central-difference gradient of a scalar function of one tensor."""
    arr = x.data.copy()
    grad = finite_diff_array(lambda: float(f(Tensor(arr))), arr, eps)
    return Tensor(grad)


@dataclass
class CheckProblem:
    """One prepared gradcheck: a loss over live arrays plus analytic grads.

    targets lists (label, array); the arrays are perturbed in place by the
    oracle, so loss must read them on every call. analytic() returns
    label -> gradient array snapshots computed by the backward under test.
    """

    loss: Callable[[], float]
    targets: list
    analytic: Callable[[], dict]


def check_problem(name: str, problem: CheckProblem, tol: float = DEFAULT_TOL,
                  eps: float = DEFAULT_EPS) -> GradReport:
    analytic = problem.analytic()
    max_rel = 0.0
    max_abs = 0.0
    worst: tuple = ()
    per_target: dict = {}
    for label, arr in problem.targets:
        if label not in analytic:
            raise KeyError(f"analytic grads missing target {label!r}")
        numeric = finite_diff_array(problem.loss, arr, eps)
        ana = np.asarray(analytic[label], dtype=np.float64)
        if ana.shape != numeric.shape:
            raise ValueError(
                f"analytic grad for {label!r} has shape {ana.shape}, "
                f"expected {numeric.shape}")
        rel = relative_error(ana, numeric)
        absdiff = np.abs(ana - numeric)
        t_rel = float(rel.max())
        per_target[label] = t_rel
        if t_rel > max_rel:
            max_rel = t_rel
            multi = np.unravel_index(int(rel.argmax()), rel.shape)
            worst = (label,) + tuple(int(i) for i in multi)
        max_abs = max(max_abs, float(absdiff.max()))
    return GradReport(name=name, max_rel_error=max_rel, max_abs_error=max_abs,
                      worst_index=worst, tol=tol, passed=max_rel < tol,
                      per_target=per_target)


# ---------------------------------------------------------------------------
# problem builders


def _projection(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=shape)


def _proj_loss(y: Tensor, proj: np.ndarray) -> float:
    return float(np.sum(proj * y.data))


def _build_conv2d(seed: int, stride: int, pad: int) -> CheckProblem:
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(1, 2, 5, 5))
    p = nn.conv_params(3, 2, 3, rng)
    h_out, w_out = nn.conv_output_hw(5, 5, 3, stride, pad)
    proj = _projection(rng, (1, 3, h_out, w_out))

    def loss():
        return _proj_loss(nn.conv2d_forward(Tensor(x), p, stride, pad), proj)

    def analytic():
        p.zero_grads()
        gx = nn.conv2d_backward(Tensor(proj), Tensor(x), p, stride, pad)
        return {"x": gx.data.copy(), "weights": p.grad_weights.copy(),
                "bias": p.grad_bias.copy()}

    return CheckProblem(loss=loss, analytic=analytic,
                        targets=[("x", x), ("weights", p.weights), ("bias", p.bias)])


def _build_transposed_conv(seed: int) -> CheckProblem:
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(1, 3, 3, 3))
    p = nn.transposed_conv_params(3, 2, 4, rng)
    h_out, w_out = nn.transposed_conv_output_hw(3, 3, 4, 2, 1)
    proj = _projection(rng, (1, 2, h_out, w_out))

    def loss():
        return _proj_loss(nn.transposed_conv_forward(Tensor(x), p, 2, 1), proj)

    def analytic():
        p.zero_grads()
        gx = nn.transposed_conv_backward(Tensor(proj), Tensor(x), p, 2, 1)
        return {"x": gx.data.copy(), "weights": p.grad_weights.copy(),
                "bias": p.grad_bias.copy()}

    return CheckProblem(loss=loss, analytic=analytic,
                        targets=[("x", x), ("weights", p.weights), ("bias", p.bias)])


def _build_relu(seed: int) -> CheckProblem:
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(1, 4, 5, 5))
    proj = _projection(rng, x.shape)

    def loss():
        return _proj_loss(nn.relu(Tensor(x)), proj)

    def analytic():
        gx = nn.relu_backward(Tensor(proj), Tensor(x))
        return {"x": gx.data.copy()}

    return CheckProblem(loss=loss, analytic=analytic, targets=[("x", x)])


def _build_affine_norm(seed: int) -> CheckProblem:
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(2, 3, 4, 4))
    p = nn.affine_params(3)
    p.gamma[:] = rng.uniform(0.5, 1.5, size=3)
    p.beta[:] = rng.uniform(-0.5, 0.5, size=3)
    proj = _projection(rng, x.shape)

    def loss():
        return _proj_loss(nn.affine_norm(Tensor(x), p), proj)

    def analytic():
        p.zero_grads()
        gx = nn.affine_norm_backward(Tensor(proj), Tensor(x), p)
        return {"x": gx.data.copy(), "gamma": p.grad_gamma.copy(),
                "beta": p.grad_beta.copy()}

    return CheckProblem(loss=loss, analytic=analytic,
                        targets=[("x", x), ("gamma", p.gamma), ("beta", p.beta)])


def _build_softmax_group(seed: int) -> CheckProblem:
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, size=(1, 25, 3, 3))
    proj = _projection(rng, x.shape)

    def loss():
        return _proj_loss(nn.softmax_group(Tensor(x), 25), proj)

    def analytic():
        gx = nn.softmax_group_backward(Tensor(proj), Tensor(x), 25)
        return {"x": gx.data.copy()}

    return CheckProblem(loss=loss, analytic=analytic, targets=[("x", x)])


def _build_pixel_shuffle(seed: int) -> CheckProblem:
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(1, 8, 3, 3))
    proj = _projection(rng, (1, 2, 6, 6))

    def loss():
        return _proj_loss(nn.pixel_shuffle(Tensor(x), 2), proj)

    def analytic():
        gx = nn.pixel_unshuffle(Tensor(proj), 2)
        return {"x": gx.data.copy()}

    return CheckProblem(loss=loss, analytic=analytic, targets=[("x", x)])


def _build_reassemble(seed: int, direction: str) -> CheckProblem:
    rng = np.random.default_rng(seed)
    cfg = reassembly.CarafeConfig(direction=direction, sigma=2, k_reassembly=3,
                                  c_mid=4)
    x = rng.uniform(-1, 1, size=(1, 3, 6, 6))
    h_out, w_out = cfg.output_hw(6, 6)
    logits = rng.uniform(-1, 1, size=(1, 9, h_out, w_out))
    kd = nn.softmax_group(Tensor(logits), 9)
    kf_data = kd.data.copy()
    proj = _projection(rng, (1, 3, h_out, w_out))

    def field():
        return reassembly.KernelField(Tensor(kf_data), 3, True)

    def loss():
        return _proj_loss(reassembly.reassemble(Tensor(x), field(), cfg), proj)

    def analytic():
        gx, gk = reassembly.reassemble_backward(Tensor(proj), Tensor(x), field(), cfg)
        return {"x": gx.data.copy(), "kernels": gk.data.copy()}

    return CheckProblem(loss=loss, analytic=analytic,
                        targets=[("x", x), ("kernels", kf_data)])


def _build_carafe(seed: int, direction: str, normalizer: str = "softmax") -> CheckProblem:
    rng = np.random.default_rng(seed)
    cfg = reassembly.CarafeConfig(direction=direction, sigma=2, k_encoder=3,
                                  k_reassembly=5, c_mid=4, normalizer=normalizer)
    x = rng.uniform(-1, 1, size=(1, 3, 6, 6))
    params = reassembly.carafe_params(3, cfg, rng)
    h_out, w_out = cfg.output_hw(6, 6)
    proj = _projection(rng, (1, 3, h_out, w_out))
    targets = [("x", x),
               ("compressor.weights", params.compressor.weights),
               ("encoder.weights", params.encoder.weights),
               ("encoder.bias", params.encoder.bias)]
    # The compressor bias is untrainable when the norm stage follows it (the
    # norm's mean subtraction makes its true gradient identically zero, which
    # no finite-difference probe can resolve in relative error).
    if params.compressor.trainable_bias:
        targets.insert(2, ("compressor.bias", params.compressor.bias))
    if params.norm is not None:
        targets += [("norm.gamma", params.norm.gamma), ("norm.beta", params.norm.beta)]

    def loss():
        y, _ = reassembly.carafe_forward(Tensor(x), params, cfg)
        return _proj_loss(y, proj)

    def analytic():
        params.zero_grads()
        _, cache = reassembly.carafe_forward(Tensor(x), params, cfg)
        gx = reassembly.carafe_backward(Tensor(proj), cache)
        out = {"x": gx.data.copy(),
               "compressor.weights": params.compressor.grad_weights.copy(),
               "encoder.weights": params.encoder.grad_weights.copy(),
               "encoder.bias": params.encoder.grad_bias.copy()}
        if params.compressor.trainable_bias:
            out["compressor.bias"] = params.compressor.grad_bias.copy()
        if params.norm is not None:
            out["norm.gamma"] = params.norm.grad_gamma.copy()
            out["norm.beta"] = params.norm.grad_beta.copy()
        return out

    return CheckProblem(loss=loss, analytic=analytic, targets=targets)


def _build_baseline(seed: int, kind: str, direction: str | None = None) -> CheckProblem:
    rng = np.random.default_rng(seed)
    op = baselines.make_resample_op(kind, 2, channels=3, rng=rng, direction=direction)
    x = rng.uniform(-1, 1, size=(1, 3, 6, 6))
    h_out, w_out = baselines.resample_output_hw(op, 6, 6)
    proj = _projection(rng, (1, 3, h_out, w_out))
    targets = [("x", x)]
    if op.params is not None:
        targets += [("weights", op.params.weights), ("bias", op.params.bias)]

    def loss():
        y, _ = baselines.resample_forward(op, Tensor(x))
        return _proj_loss(y, proj)

    def analytic():
        if op.params is not None:
            op.params.zero_grads()
        _, cache = baselines.resample_forward(op, Tensor(x))
        gx = baselines.resample_backward(op, Tensor(proj), cache)
        out = {"x": gx.data.copy()}
        if op.params is not None:
            out["weights"] = op.params.grad_weights.copy()
            out["bias"] = op.params.grad_bias.copy()
        return out

    return CheckProblem(loss=loss, analytic=analytic, targets=targets)


REGISTRY: dict[str, Callable[[int], CheckProblem]] = {
    "conv2d": lambda seed: _build_conv2d(seed, 1, 1),
    "conv2d_strided": lambda seed: _build_conv2d(seed, 2, 1),
    "transposed_conv": _build_transposed_conv,
    "relu": _build_relu,
    "affine_norm": _build_affine_norm,
    "softmax_group": _build_softmax_group,
    "pixel_shuffle": _build_pixel_shuffle,
    "reassemble_down": lambda seed: _build_reassemble(seed, "down"),
    "reassemble_up": lambda seed: _build_reassemble(seed, "up"),
    "carafe_down": lambda seed: _build_carafe(seed, "down"),
    "carafe_up": lambda seed: _build_carafe(seed, "up"),
    "carafe_down_sigmoid": lambda seed: _build_carafe(seed, "down", "sigmoid"),
    "carafe_up_sigmoid_norm": lambda seed: _build_carafe(seed, "up", "sigmoid_norm"),
    "nearest_up": lambda seed: _build_baseline(seed, "nearest_up"),
    "bilinear_up": lambda seed: _build_baseline(seed, "bilinear_up"),
    "avg_pool": lambda seed: _build_baseline(seed, "avg_pool"),
    "max_pool": lambda seed: _build_baseline(seed, "max_pool"),
    "strided_conv": lambda seed: _build_baseline(seed, "strided_conv"),
    "deconv_baseline": lambda seed: _build_baseline(seed, "transposed_conv"),
    "nearest_plus_conv": lambda seed: _build_baseline(seed, "nearest_plus_conv"),
    "bilinear_plus_conv": lambda seed: _build_baseline(seed, "bilinear_plus_conv"),
    "spatial_attention_down": lambda seed: _build_baseline(
        seed, "spatial_attention", "down"),
    "spatial_attention_up": lambda seed: _build_baseline(
        seed, "spatial_attention", "up"),
}


def registered_ops() -> list[str]:
    return list(REGISTRY)


def check_op(name: str, seed: int = 0, tol: float = DEFAULT_TOL,
             eps: float = DEFAULT_EPS) -> GradReport:
    """Run the registered finite-difference check for one operator."""
    if name not in REGISTRY:
        raise KeyError(
            f"unknown op {name!r}; registered: {', '.join(sorted(REGISTRY))}")
    problem = REGISTRY[name](seed)
    return check_problem(name, problem, tol=tol, eps=eps)
