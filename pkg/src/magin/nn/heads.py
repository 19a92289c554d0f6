"""Policy heads mapping raw network outputs to bounded continuous action distributions.

Both heads take logits of width ``2k`` for a ``k``-dimensional action and expose
the same interface: ``params``, ``sample``, ``mode``, ``log_prob``, ``entropy``
and ``grad_logits`` (analytic gradient of a weighted log-prob/entropy sum).
An optional boolean ``mask`` of width ``k`` restricts log-prob and entropy to
the learned dimensions.
"""

from __future__ import annotations

import numpy as np

from .special import digamma, log_beta_fn, sample_beta, trigamma

BETA_SHAPE_CAP = 100.0
U_EPS = 1e-6
GAUSS_MIN_STD = 1e-3
GAUSS_INIT_STD = 0.25
_LOG_2PI = np.log(2.0 * np.pi)


def softplus(x):
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _softplus_inv(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > 30.0, y, np.log(np.expm1(np.maximum(y, 1e-12))))


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _masked_sum(values, mask):
    if mask is None:
        return values.sum(axis=-1)
    return (values * np.asarray(mask, dtype=float)).sum(axis=-1)


def _split(logits, k):
    logits = np.asarray(logits, dtype=float)
    if logits.shape[-1] != 2 * k:
        raise ValueError(f"expected {2 * k} logits, got {logits.shape[-1]}")
    return logits[..., :k], logits[..., k:]


# Beta head

def beta_head(logits, k: int | None = None):
    """Shape parameters ``(alpha, beta)``, each ``1 + min(softplus(logit), cap)``."""
    k = np.shape(logits)[-1] // 2 if k is None else k
    la, lb = _split(logits, k)
    return 1.0 + np.minimum(softplus(la), BETA_SHAPE_CAP), 1.0 + np.minimum(softplus(lb), BETA_SHAPE_CAP)


def beta_sample(alpha, beta, rng: np.random.Generator):
    return np.clip(sample_beta(alpha, beta, rng), U_EPS, 1.0 - U_EPS)


def beta_log_prob(alpha, beta, u, mask=None):
    """Joint log-density over the last axis (masked dims excluded)."""
    u = np.clip(np.asarray(u, dtype=float), U_EPS, 1.0 - U_EPS)
    lp = (alpha - 1.0) * np.log(u) + (beta - 1.0) * np.log1p(-u) - log_beta_fn(alpha, beta)
    return _masked_sum(lp, mask)


def beta_entropy(alpha, beta, mask=None):
    s = alpha + beta
    h = (log_beta_fn(alpha, beta) - (alpha - 1.0) * digamma(alpha) - (beta - 1.0) * digamma(beta)
         + (s - 2.0) * digamma(s))
    return _masked_sum(h, mask)


class BetaHead:
    """Beta policy over ``(0, 1)^k``."""

    kind = "beta"

    def __init__(self, dim: int):
        self.dim = int(dim)
        self.n_logits = 2 * self.dim

    def params(self, logits):
        return beta_head(logits, self.dim)

    def sample(self, params, rng):
        """Returns ``(stored, env_action)``; identical for Beta."""
        u = beta_sample(*params, rng)
        return u, u

    def mode(self, params):
        # deterministic action: the distribution mean
        a, b = params
        return a / (a + b)

    def env_action(self, stored):
        return stored

    def log_prob(self, params, u, mask=None):
        return beta_log_prob(*params, u, mask)

    def entropy(self, params, mask=None):
        return beta_entropy(*params, mask)

    def bias_for_mean(self, means):
        """Logits whose distribution mean is ``means``.

        The shape on the larger side of the mean stays at 1 + log 2 (logit 0)
        and the other is solved for; if that would pass the cap, the capped
        shape is kept and the first one is solved instead.
        """
        m = np.clip(np.asarray(means, dtype=float), 1e-3, 1 - 1e-3)
        base, top = 1.0 + np.log(2.0), 1.0 + BETA_SHAPE_CAP
        small = m <= 0.5
        p = np.where(small, m, 1.0 - m)  # mean measured from the near boundary
        near = np.full_like(m, base)
        far = base * (1.0 - p) / p
        over = far > top
        far = np.where(over, top, far)
        near = np.where(over, np.maximum(p * top / (1.0 - p), 1.0), near)
        a = np.where(small, near, far)
        b = np.where(small, far, near)
        return np.concatenate([_softplus_inv(a - 1.0), _softplus_inv(b - 1.0)])

    def grad_logits(self, logits, u, w_logp, w_ent, mask=None):
        """d/d logits of ``sum_b w_logp[b]*log_prob[b] + w_ent[b]*entropy[b]``."""
        la, lb = _split(logits, self.dim)
        a, b = beta_head(logits, self.dim)
        u = np.clip(np.asarray(u, dtype=float), U_EPS, 1.0 - U_EPS)
        psi_s = digamma(a + b)
        tri_s = trigamma(a + b)
        dlp_da = np.log(u) - digamma(a) + psi_s
        dlp_db = np.log1p(-u) - digamma(b) + psi_s
        dh_da = -(a - 1.0) * trigamma(a) + (a + b - 2.0) * tri_s
        dh_db = -(b - 1.0) * trigamma(b) + (a + b - 2.0) * tri_s
        wl = np.asarray(w_logp, dtype=float)[..., None]
        we = np.asarray(w_ent, dtype=float)[..., None]
        ga = wl * dlp_da + we * dh_da
        gb = wl * dlp_db + we * dh_db
        if mask is not None:
            m = np.asarray(mask, dtype=float)
            ga, gb = ga * m, gb * m
        # softplus' = sigmoid; zero where the cap binds
        ga = ga * sigmoid(la) * (softplus(la) < BETA_SHAPE_CAP)
        gb = gb * sigmoid(lb) * (softplus(lb) < BETA_SHAPE_CAP)
        return np.concatenate([ga, gb], axis=-1)


# Gaussian head

def gaussian_head(logits, k: int | None = None):
    """``(mean, std)`` with mean squashed into [0, 1] and a softplus std."""
    k = np.shape(logits)[-1] // 2 if k is None else k
    lm, ls = _split(logits, k)
    return sigmoid(lm), softplus(ls) + GAUSS_MIN_STD


def gaussian_log_prob(mean, std, x, mask=None):
    z = (np.asarray(x, dtype=float) - mean) / std
    return _masked_sum(-0.5 * z * z - np.log(std) - 0.5 * _LOG_2PI, mask)


def gaussian_entropy(mean, std, mask=None):
    return _masked_sum(np.broadcast_to(0.5 * (_LOG_2PI + 1.0) + np.log(std), np.shape(mean)), mask)


class GaussianHead:
    """Diagonal normal; samples are clipped into [0, 1] only when handed to the environment."""

    kind = "gaussian"

    def __init__(self, dim: int):
        self.dim = int(dim)
        self.n_logits = 2 * self.dim

    def params(self, logits):
        return gaussian_head(logits, self.dim)

    def sample(self, params, rng):
        mean, std = params
        raw = mean + std * rng.standard_normal(np.shape(mean))
        return raw, np.clip(raw, 0.0, 1.0)

    def mode(self, params):
        return params[0]

    def env_action(self, stored):
        return np.clip(stored, 0.0, 1.0)

    def log_prob(self, params, x, mask=None):
        return gaussian_log_prob(*params, x, mask)

    def entropy(self, params, mask=None):
        return gaussian_entropy(*params, mask)

    def bias_for_mean(self, means, std: float = GAUSS_INIT_STD):
        m = np.clip(np.asarray(means, dtype=float), 1e-3, 1 - 1e-3)
        return np.concatenate([np.log(m / (1.0 - m)), np.full_like(m, _softplus_inv(std - GAUSS_MIN_STD))])

    def grad_logits(self, logits, x, w_logp, w_ent, mask=None):
        lm, ls = _split(logits, self.dim)
        mean, std = gaussian_head(logits, self.dim)
        diff = np.asarray(x, dtype=float) - mean
        wl = np.asarray(w_logp, dtype=float)[..., None]
        we = np.asarray(w_ent, dtype=float)[..., None]
        g_mean = wl * diff / std ** 2
        g_std = wl * (diff ** 2 / std ** 3 - 1.0 / std) + we / std
        if mask is not None:
            m = np.asarray(mask, dtype=float)
            g_mean, g_std = g_mean * m, g_std * m
        sm = sigmoid(lm)
        return np.concatenate([g_mean * sm * (1.0 - sm), g_std * sigmoid(ls)], axis=-1)


def make_head(kind: str, dim: int):
    if kind == "beta":
        return BetaHead(dim)
    if kind == "gaussian":
        return GaussianHead(dim)
    raise ValueError(f"unknown policy head '{kind}'")
