"""Minimal reverse-mode neural layers (float64 numpy).

Each layer caches its forward inputs and exposes params/grads dicts; models
compose them explicitly and call backward in reverse order.  Everything is
deterministic given the seeds handed in.
"""

from __future__ import annotations

import numpy as np


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Dense:
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, bias: bool = True):
        limit = 1.0 / np.sqrt(n_in)
        self.w = rng.uniform(-limit, limit, size=(n_in, n_out))
        self.b = np.zeros(n_out) if bias else None
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b) if bias else None
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        out = x @ self.w
        if self.b is not None:
            out = out + self.b
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self.dw += self._x.T @ grad
        if self.b is not None:
            self.db += grad.sum(axis=0)
        return grad @ self.w.T

    def params(self, prefix: str) -> dict[str, np.ndarray]:
        out = {f"{prefix}.w": self.w}
        if self.b is not None:
            out[f"{prefix}.b"] = self.b
        return out

    def grads(self, prefix: str) -> dict[str, np.ndarray]:
        out = {f"{prefix}.w": self.dw}
        if self.b is not None:
            out[f"{prefix}.b"] = self.db
        return out

    def zero_grad(self) -> None:
        self.dw[:] = 0.0
        if self.db is not None:
            self.db[:] = 0.0


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self._mask


class Dropout:
    """Inverted dropout; active only when forward is called with train=True."""

    def __init__(self, p: float, rng: np.random.Generator):
        self.p = p
        self.rng = rng
        self._mask = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if not train or self.p <= 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.p
        self._mask = (self.rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return grad
        return grad * self._mask


class LSTM:
    """Single-layer LSTM over a fixed-length sequence; returns the last hidden state."""

    def __init__(self, n_in: int, n_hidden: int, rng: np.random.Generator):
        self.n_in = n_in
        self.n_hidden = n_hidden
        limit = 1.0 / np.sqrt(n_in + n_hidden)
        self.wx = rng.uniform(-limit, limit, size=(n_in, 4 * n_hidden))
        self.wh = rng.uniform(-limit, limit, size=(n_hidden, 4 * n_hidden))
        self.b = np.zeros(4 * n_hidden)
        self.dwx = np.zeros_like(self.wx)
        self.dwh = np.zeros_like(self.wh)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        """x: (batch, steps, n_in) -> (batch, n_hidden)."""
        n, steps, _ = x.shape
        h = np.zeros((n, self.n_hidden))
        c = np.zeros((n, self.n_hidden))
        caches = []
        nh = self.n_hidden
        for t in range(steps):
            xt = x[:, t, :]
            z = xt @ self.wx + h @ self.wh + self.b
            i = sigmoid(z[:, :nh])
            f = sigmoid(z[:, nh : 2 * nh])
            g = np.tanh(z[:, 2 * nh : 3 * nh])
            o = sigmoid(z[:, 3 * nh :])
            c_new = f * c + i * g
            tanh_c = np.tanh(c_new)
            h_new = o * tanh_c
            caches.append((xt, h, c, i, f, g, o, c_new, tanh_c))
            h, c = h_new, c_new
        self._cache = (x.shape, caches)
        return h

    def backward(self, grad_h: np.ndarray) -> np.ndarray:
        shape, caches = self._cache
        n, steps, _ = shape
        nh = self.n_hidden
        dx = np.zeros(shape)
        dh = grad_h.copy()
        dc = np.zeros_like(dh)
        for t in range(steps - 1, -1, -1):
            xt, h_prev, c_prev, i, f, g, o, c_new, tanh_c = caches[t]
            do = dh * tanh_c
            dc = dc + dh * o * (1.0 - tanh_c ** 2)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dz = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * (1.0 - g ** 2),
                    do * o * (1.0 - o),
                ],
                axis=1,
            )
            self.dwx += xt.T @ dz
            self.dwh += h_prev.T @ dz
            self.db += dz.sum(axis=0)
            dx[:, t, :] = dz @ self.wx.T
            dh = dz @ self.wh.T
            dc = dc * f
        return dx

    def params(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.wx": self.wx, f"{prefix}.wh": self.wh, f"{prefix}.b": self.b}

    def grads(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.wx": self.dwx, f"{prefix}.wh": self.dwh, f"{prefix}.b": self.db}

    def zero_grad(self) -> None:
        self.dwx[:] = 0.0
        self.dwh[:] = 0.0
        self.db[:] = 0.0


def bce_with_logits(logits: np.ndarray, targets: np.ndarray):
    """Mean binary cross-entropy over all cells; returns (loss, dlogits)."""
    n_cells = logits.size
    p = sigmoid(logits)
    eps = 1e-12
    loss = -np.mean(targets * np.log(p + eps) + (1.0 - targets) * np.log(1.0 - p + eps))
    dlogits = (p - targets) / n_cells
    return float(loss), dlogits
