"""Fully connected tanh networks over a single flat parameter vector, with analytic backprop."""

from __future__ import annotations

import numpy as np


class MLP:
    """tanh hidden layers, linear output.

    All weights and biases live in ``self.params`` (float64, 1-D); per-layer
    ``W`` (in, out) and ``b`` (out,) are views into it, so optimizers and
    checkpoints only ever deal with one array.
    """

    def __init__(self, sizes, params: np.ndarray | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        self._shapes = [(self.sizes[i], self.sizes[i + 1]) for i in range(len(self.sizes) - 1)]
        n = sum(a * b + b for a, b in self._shapes)
        if params is None:
            params = np.zeros(n)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (n,):
            raise ValueError(f"expected {n} parameters for sizes {self.sizes}, got {params.shape}")
        self.params = params.copy()
        self._bind()

    def _bind(self):
        self.weights, self.biases = [], []
        off = 0
        for a, b in self._shapes:
            self.weights.append(self.params[off:off + a * b].reshape(a, b))
            off += a * b
            self.biases.append(self.params[off:off + b])
            off += b

    @property
    def n_params(self) -> int:
        return self.params.size

    def set_params(self, flat: np.ndarray) -> None:
        self.params[:] = flat

    def copy(self) -> "MLP":
        return MLP(self.sizes, self.params)

    @classmethod
    def initialized(cls, sizes, rng: np.random.Generator, output_scale: float = 1.0) -> "MLP":
        """Orthogonal init with gain sqrt(2) on hidden layers and ``output_scale`` on the last."""
        net = cls(sizes)
        for i, w in enumerate(net.weights):
            a, b = w.shape
            q, r = np.linalg.qr(rng.standard_normal((max(a, b), min(a, b))))
            q = q * np.sign(np.diag(r))
            q = q if a >= b else q.T
            gain = output_scale if i == len(net.weights) - 1 else np.sqrt(2.0)
            w[...] = gain * q[:a, :b]
        return net

    def forward(self, x: np.ndarray):
        """Return ``(output, cache)``; ``x`` is (batch, in) or (in,)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {x.shape[1]} does not match network input {self.sizes[0]}")
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        out = h[0] if single else h
        return out, (acts, single)

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out: np.ndarray) -> np.ndarray:
        """Gradient of a scalar loss w.r.t. the flat parameters, given dL/d(output)."""
        acts, single = cache
        g = np.asarray(grad_out, dtype=np.float64)
        if single:
            g = g[None, :]
        grad = np.empty_like(self.params)
        off_end = self.params.size
        for i in range(len(self.weights) - 1, -1, -1):
            a, b = self._shapes[i]
            if i < len(self.weights) - 1:
                g = g * (1.0 - acts[i + 1] ** 2)
            gb = g.sum(axis=0)
            gw = acts[i].T @ g
            grad[off_end - b:off_end] = gb
            grad[off_end - b - a * b:off_end - b] = gw.reshape(-1)
            off_end -= a * b + b
            if i > 0:
                g = g @ self.weights[i].T
        return grad


def mlp_forward(net: MLP, x):
    return net.forward(x)


def mlp_backward(net: MLP, cache, grad_out):
    return net.backward(cache, grad_out)
