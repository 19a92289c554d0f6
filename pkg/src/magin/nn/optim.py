from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)


class Adam:
    """Adam with bias correction, updating a flat parameter array in place."""

    def __init__(self, n_params: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0
        self.skipped = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> bool:
        """Apply one update; returns False (and leaves everything untouched) on non-finite grads."""
        if grads.shape != params.shape:
            raise ValueError("gradient and parameter shapes differ")
        if not np.all(np.isfinite(grads)):
            self.skipped += 1
            log.warning("non-finite gradient; update skipped (%d so far)", self.skipped)
            return False
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1 - self.beta2) * grads * grads
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return True

    def state_dict(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps,
                "t": self.t, "m": self.m.tolist(), "v": self.v.tolist()}

    @classmethod
    def from_state(cls, state: dict) -> "Adam":
        opt = cls(len(state["m"]), state["lr"], state["beta1"], state["beta2"], state["eps"])
        opt.t = int(state["t"])
        opt.m = np.asarray(state["m"], dtype=float)
        opt.v = np.asarray(state["v"], dtype=float)
        return opt


def clip_grad_norm(grads: np.ndarray, max_norm: float) -> float:
    """Rescale ``grads`` in place to at most ``max_norm``; returns the pre-clip norm."""
    norm = float(np.sqrt(np.sum(grads * grads)))
    if norm > max_norm > 0:
        grads *= max_norm / norm
    return norm
