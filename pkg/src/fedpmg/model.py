"""Three-layer residual conv net with hand-written backprop, L1 loss and Adam.

Activations are kept channels-last internally; the public API takes and
returns ``N x C x H x W`` arrays. Arithmetic follows the dtype of the
parameter vector, so gradient checks run in float64 and training in float32.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInput, ShapeError

HIDDEN = 16
KSIZE = 3


def layer_shapes(in_ch: int) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter blocks in storage order. Kernels are ``(in, out, kh, kw)``."""
    return [
        ("conv1.weight", (in_ch, HIDDEN, KSIZE, KSIZE)),
        ("conv1.bias", (HIDDEN,)),
        ("conv2.weight", (HIDDEN, HIDDEN, KSIZE, KSIZE)),
        ("conv2.bias", (HIDDEN,)),
        ("conv3.weight", (HIDDEN, 1, KSIZE, KSIZE)),
        ("conv3.bias", (1,)),
    ]


def param_count(in_ch: int) -> int:
    if in_ch not in (1, 2):
        raise InvalidInput(f"in_ch must be 1 or 2, got {in_ch}")
    return sum(int(np.prod(s)) for _, s in layer_shapes(in_ch))


@dataclass
class ModelParams:
    vector: np.ndarray
    in_ch: int

    def __post_init__(self):
        self.vector = np.asarray(self.vector)
        if self.vector.ndim != 1 or self.vector.size != param_count(self.in_ch):
            raise ShapeError(
                f"parameter vector of length {self.vector.size} does not fit in_ch={self.in_ch}"
            )

    def unpack(self) -> dict[str, np.ndarray]:
        out, pos = {}, 0
        for name, shape in layer_shapes(self.in_ch):
            size = int(np.prod(shape))
            out[name] = self.vector[pos:pos + size].reshape(shape)
            pos += size
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(self.vector.copy(), self.in_ch)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.vector.astype(dtype), self.in_ch)


def init_params(in_ch: int, seed: int, dtype=np.float32) -> ModelParams:
    """Uniform(+-sqrt(1/fan_in)) for the hidden layers; the output conv starts
    at zero so the untrained network is the identity on input channel 0."""
    rng = np.random.default_rng(seed)
    blocks = []
    for name, shape in layer_shapes(in_ch):
        if name.startswith("conv3"):
            blocks.append(np.zeros(shape))
            continue
        fan_in = (in_ch if name.startswith("conv1") else HIDDEN) * KSIZE * KSIZE
        bound = np.sqrt(1.0 / fan_in)
        blocks.append(rng.uniform(-bound, bound, size=shape))
    vec = np.concatenate([b.ravel() for b in blocks]).astype(dtype)
    return ModelParams(vec, in_ch)


def _patches(x: np.ndarray) -> np.ndarray:
    # x: N,H,W,C -> (N*H*W, C*9), column order (C, kh, kw)
    n, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    win = sliding_window_view(xp, (KSIZE, KSIZE), axis=(1, 2))
    return win.reshape(n * h * w, c * KSIZE * KSIZE)


def _kernel_matrix(kernel: np.ndarray) -> np.ndarray:
    cin, cout = kernel.shape[:2]
    return kernel.transpose(0, 2, 3, 1).reshape(cin * KSIZE * KSIZE, cout)


def _conv(x, kernel, bias):
    n, h, w, _ = x.shape
    cols = _patches(x)
    out = cols @ _kernel_matrix(kernel) + bias
    return out.reshape(n, h, w, -1), cols


def _conv_backward(dout, cols, kernel, in_shape):
    n, h, w, cin = in_shape
    cout = kernel.shape[1]
    d2 = dout.reshape(-1, cout)
    dk = (cols.T @ d2).reshape(cin, KSIZE, KSIZE, cout).transpose(0, 3, 1, 2)
    db = d2.sum(axis=0)
    dcols = (d2 @ _kernel_matrix(kernel).T).reshape(n, h, w, cin, KSIZE, KSIZE)
    dxp = np.zeros((n, h + 2, w + 2, cin), dtype=dout.dtype)
    for i in range(KSIZE):
        for j in range(KSIZE):
            dxp[:, i:i + h, j:j + w, :] += dcols[..., i, j]
    return dxp[:, 1:-1, 1:-1, :], dk, db


def _check_inputs(params: ModelParams, inputs: np.ndarray) -> None:
    if inputs.ndim != 4:
        raise ShapeError(f"inputs must be N x C x H x W, got shape {inputs.shape}")
    if inputs.shape[1] != params.in_ch:
        raise ShapeError(f"inputs have {inputs.shape[1]} channels, params expect {params.in_ch}")
    if inputs.shape[0] < 1:
        raise ShapeError("empty batch")


def _forward(params: ModelParams, inputs: np.ndarray):
    _check_inputs(params, inputs)
    p = params.unpack()
    x = np.ascontiguousarray(inputs.transpose(0, 2, 3, 1), dtype=params.vector.dtype)
    z1, cols1 = _conv(x, p["conv1.weight"], p["conv1.bias"])
    a1 = np.maximum(z1, 0)
    z2, cols2 = _conv(a1, p["conv2.weight"], p["conv2.bias"])
    a2 = np.maximum(z2, 0)
    z3, cols3 = _conv(a2, p["conv3.weight"], p["conv3.bias"])
    out = z3 + x[..., :1]
    cache = (x.shape, z1, cols1, a1.shape, z2, cols2, a2.shape, cols3)
    return out.transpose(0, 3, 1, 2), cache


def _backward(params: ModelParams, cache, grad_pred: np.ndarray) -> np.ndarray:
    x_shape, z1, cols1, a1_shape, z2, cols2, a2_shape, cols3 = cache
    p = params.unpack()
    g = np.ascontiguousarray(grad_pred.transpose(0, 2, 3, 1), dtype=params.vector.dtype)
    da2, dk3, db3 = _conv_backward(g, cols3, p["conv3.weight"], a2_shape)
    dz2 = da2 * (z2 > 0)
    da1, dk2, db2 = _conv_backward(dz2, cols2, p["conv2.weight"], a1_shape)
    dz1 = da1 * (z1 > 0)
    _, dk1, db1 = _conv_backward(dz1, cols1, p["conv1.weight"], x_shape)
    return np.concatenate([a.ravel() for a in (dk1, db1, dk2, db2, dk3, db3)])


def forward(params: ModelParams, inputs: np.ndarray) -> np.ndarray:
    """Predict ``N x 1 x H x W`` reconstructions for ``N x in_ch x H x W`` inputs."""
    return _forward(params, inputs)[0]


def l1_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error and its subgradient (sign(0) = 0)."""
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size


def backward(params: ModelParams, inputs: np.ndarray, grad_pred: np.ndarray) -> np.ndarray:
    """Gradient of ``sum(grad_pred * forward(params, inputs))`` w.r.t. the parameter vector."""
    _check_inputs(params, inputs)
    n, _, h, w = inputs.shape
    if grad_pred.shape != (n, 1, h, w):
        raise ShapeError(f"grad_pred shape {grad_pred.shape} does not match output {(n, 1, h, w)}")
    _, cache = _forward(params, inputs)
    return _backward(params, cache, grad_pred)


def loss_and_grad(params: ModelParams, inputs: np.ndarray, targets: np.ndarray):
    """One forward/backward pass of the L1 objective."""
    pred, cache = _forward(params, inputs)
    loss, gpred = l1_loss(pred, targets.astype(pred.dtype, copy=False))
    return loss, _backward(params, cache, gpred)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, size: int, lr: float = 1e-4, dtype=np.float32) -> "AdamState":
        return cls(np.zeros(size, dtype=dtype), np.zeros(size, dtype=dtype), 0, lr)


def adam_step(params: ModelParams, grads: np.ndarray, state: AdamState) -> tuple[ModelParams, AdamState]:
    if grads.shape != params.vector.shape or state.m.shape != params.vector.shape:
        raise ShapeError("params, grads and optimizer state must have equal length")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads * grads
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    step = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_vec = (params.vector - step).astype(params.vector.dtype)
    new_state = AdamState(m.astype(state.m.dtype), v.astype(state.v.dtype), t,
                          state.lr, state.beta1, state.beta2, state.eps)
    return ModelParams(new_vec, params.in_ch), new_state
