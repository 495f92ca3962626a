"""Dense-tensor NN layers with exact reverse-mode gradients.

All tensors are channels-last numpy float64 arrays: a batch is (N, H, W, C) and a single
example (H, W, C) is promoted to a batch of one.  Each layer caches what its backward pass
needs on forward; backward consumes the cache of the most recent forward.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericError, ParameterError, ShapeError


def _check_finite(x: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {what}")
    return x


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected (N, H, W, C) or (H, W, C), got shape {x.shape}")


class Conv2D:
    """Same-padded stride-1 convolution, filters (K, kh, kw, C_in), zero padding.

    out[y, x, k] = b[k] + sum_{dy,dx,c} w[k, dy, dx, c] * padded_in[y+dy, x+dx, c]
    Implemented as im2col + one BLAS matmul.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3, *, rng=None):
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ParameterError(f"kernel_size must be odd and >= 1, got {kernel_size}")
        if in_channels < 1 or out_channels < 1:
            raise ParameterError("channel counts must be positive")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        fan_in = kernel_size * kernel_size * in_channels
        if rng is None:
            self.w = np.zeros((out_channels, kernel_size, kernel_size, in_channels))
        else:
            limit = np.sqrt(6.0 / fan_in)  # He-uniform for ReLU stacks
            self.w = rng.uniform(-limit, limit, size=(out_channels, kernel_size, kernel_size, in_channels))
        self.b = np.zeros(out_channels)
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self._cols = None
        self._in_shape = None
        self._single = False

    def _im2col(self, x: np.ndarray) -> np.ndarray:
        k = self.kernel_size
        pad = k // 2
        n, h, w_dim, c = x.shape
        if pad:
            x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
        # (N, H, W, C, kh, kw) -> (N*H*W, kh*kw*C)
        windows = sliding_window_view(x, (k, k), axis=(1, 2))
        cols = windows.transpose(0, 1, 2, 4, 5, 3).reshape(n * h * w_dim, k * k * c)
        return np.ascontiguousarray(cols)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x, single = _as_batch(x)
        if x.shape[3] != self.in_channels:
            raise ShapeError(f"expected {self.in_channels} input channels, got {x.shape[3]}")
        cols = self._im2col(x)
        wmat = self.w.reshape(self.out_channels, -1)
        out = cols @ wmat.T + self.b
        self._cols = cols
        self._in_shape = x.shape
        self._single = single
        out = out.reshape(x.shape[0], x.shape[1], x.shape[2], self.out_channels)
        return out[0] if single else out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cols is None:
            raise ShapeError("backward called before forward")
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if self._single and grad_out.ndim == 3:
            grad_out = grad_out[None]
        n, h, w_dim, c_in = self._in_shape
        if grad_out.shape != (n, h, w_dim, self.out_channels):
            raise ShapeError(
                f"grad_out shape {grad_out.shape} does not match forward output "
                f"{(n, h, w_dim, self.out_channels)}"
            )
        k = self.kernel_size
        pad = k // 2
        gmat = grad_out.reshape(n * h * w_dim, self.out_channels)
        self.grad_b = gmat.sum(axis=0)
        self.grad_w = (gmat.T @ self._cols).reshape(self.w.shape)
        # scatter columns back: col2im as k*k shifted adds
        cols_grad = (gmat @ self.w.reshape(self.out_channels, -1)).reshape(n, h, w_dim, k, k, c_in)
        grad_pad = np.zeros((n, h + 2 * pad, w_dim + 2 * pad, c_in))
        for dy in range(k):
            for dx in range(k):
                grad_pad[:, dy : dy + h, dx : dx + w_dim, :] += cols_grad[:, :, :, dy, dx, :]
        grad_in = grad_pad[:, pad : pad + h, pad : pad + w_dim, :]
        return grad_in[0] if self._single else grad_in

    def named_parameters(self, prefix: str) -> dict:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}

    def named_gradients(self, prefix: str) -> dict:
        return {f"{prefix}.w": self.grad_w, f"{prefix}.b": self.grad_b}


class Dense:
    """Full affine map on flattened inputs; used only by the dense reconstruction variant."""

    def __init__(self, in_features: int, out_features: int, *, rng=None):
        if rng is None:
            self.w = np.zeros((out_features, in_features))
        else:
            limit = np.sqrt(6.0 / in_features)
            self.w = rng.uniform(-limit, limit, size=(out_features, in_features))
        self.b = np.zeros(out_features)
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.w.shape[1]:
            raise ShapeError(f"expected (N, {self.w.shape[1]}), got {x.shape}")
        self._x = x
        return x @ self.w.T + self.b

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if self._x is None or grad_out.shape != (self._x.shape[0], self.w.shape[0]):
            raise ShapeError("grad_out shape does not match forward output")
        self.grad_w = grad_out.T @ self._x
        self.grad_b = grad_out.sum(axis=0)
        return grad_out @ self.w

    def named_parameters(self, prefix: str) -> dict:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}

    def named_gradients(self, prefix: str) -> dict:
        return {f"{prefix}.w": self.grad_w, f"{prefix}.b": self.grad_b}


class BatchNorm2D:
    """Per-channel batch normalization over (N, H, W) with running statistics.

    Train mode normalizes with the batch moments (population variance) and updates the
    running stats with `momentum`; eval mode applies the stored running stats, which makes
    it a deterministic per-channel affine map.  `bypass` turns the layer into an identity
    (used by the linear-analysis mode).
    """

    TRAIN = "train"
    EVAL = "eval"

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        if channels < 1:
            raise ParameterError("channels must be positive")
        if not (0.0 < momentum < 1.0):
            raise ParameterError(f"momentum must lie in (0, 1), got {momentum}")
        if eps <= 0:
            raise ParameterError("eps must be positive")
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.grad_gamma = np.zeros_like(self.gamma)
        self.grad_beta = np.zeros_like(self.beta)
        self.mode = self.TRAIN
        self.bypass = False
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x, single = _as_batch(x)
        if x.shape[3] != self.channels:
            raise ShapeError(f"expected {self.channels} channels, got {x.shape[3]}")
        if self.bypass:
            self._cache = ("bypass", single)
            return x[0] if single else x
        if self.mode == self.TRAIN:
            m = x.shape[0] * x.shape[1] * x.shape[2]
            if m < 2:
                raise ParameterError(f"train-mode batch norm needs N*H*W >= 2, got {m}")
            mean = x.mean(axis=(0, 1, 2))
            var = x.var(axis=(0, 1, 2))
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (self.mode, single, xhat, inv_std, x.shape)
        out = self.gamma * xhat + self.beta
        return out[0] if single else out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise ShapeError("backward called before forward")
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if self._cache[0] == "bypass":
            self.grad_gamma = np.zeros_like(self.gamma)
            self.grad_beta = np.zeros_like(self.beta)
            return grad_out
        mode, single, xhat, inv_std, shape = self._cache
        if single and grad_out.ndim == 3:
            grad_out = grad_out[None]
        if grad_out.shape != shape:
            raise ShapeError(f"grad_out shape {grad_out.shape} does not match forward output {shape}")
        self.grad_gamma = np.sum(grad_out * xhat, axis=(0, 1, 2))
        self.grad_beta = np.sum(grad_out, axis=(0, 1, 2))
        dxhat = grad_out * self.gamma
        if mode == self.TRAIN:
            # standard BN input gradient through the batch statistics; the 1/m factors
            # are absorbed into the two means
            grad_in = (
                dxhat
                - dxhat.mean(axis=(0, 1, 2))
                - xhat * np.mean(dxhat * xhat, axis=(0, 1, 2))
            ) * inv_std
        else:
            grad_in = dxhat * inv_std
        return grad_in[0] if single else grad_in

    def named_parameters(self, prefix: str) -> dict:
        return {f"{prefix}.gamma": self.gamma, f"{prefix}.beta": self.beta}

    def named_gradients(self, prefix: str) -> dict:
        return {f"{prefix}.gamma": self.grad_gamma, f"{prefix}.beta": self.grad_beta}

    def running_stats(self, prefix: str) -> dict:
        return {f"{prefix}.running_mean": self.running_mean, f"{prefix}.running_var": self.running_var}


class ReLU:
    """Elementwise max(0, x); subgradient at 0 is 0.  `identity` disables the nonlinearity."""

    def __init__(self):
        self.identity = False
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.identity:
            self._mask = None
            return x
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if self.identity:
            return grad_out
        if self._mask is None:
            raise ShapeError("backward called before forward")
        if grad_out.shape != self._mask.shape:
            raise ShapeError(f"grad_out shape {grad_out.shape} does not match forward input")
        return np.where(self._mask, grad_out, 0.0)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum-of-squares loss over the whole batch: sum_k ||target_k - pred_k||_F^2.

    Returns (loss, d loss / d pred).  The gradient is 2*(pred - target).
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    with np.errstate(over="ignore"):  # overflow is reported via the finite check below
        loss = float(np.sum(diff * diff))
    _check_finite(np.asarray(loss), "mse loss")
    return loss, 2.0 * diff
