"""Log-gamma, digamma, trigamma, and Gamma/Beta sampling on numpy arrays."""

from __future__ import annotations

import numpy as np

# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _lgamma_lanczos(x):
    x = x - 1.0
    a = np.full_like(x, _LANCZOS[0])
    for i in range(1, _LANCZOS.size):
        a = a + _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (x + 0.5) * np.log(t) - t + np.log(a)


def lgamma(x):
    """log|Gamma(x)| for x > 0 (and non-integer x < 0.5 via reflection)."""
    x = np.asarray(x, dtype=float)
    small = x < 0.5
    xr = np.where(small, 1.0 - x, x)
    out = _lgamma_lanczos(xr)
    if np.any(small):
        refl = np.log(np.pi / np.abs(np.sin(np.pi * x))) - out
        out = np.where(small, refl, out)
    return out


def digamma(x):
    """psi(x) for x > 0: upward recurrence to x >= 10, then the asymptotic series."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for _ in range(10):
        low = x < 10.0
        acc = acc - np.where(low, 1.0 / x, 0.0)
        x = np.where(low, x + 1.0, x)
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132)))))
    return acc + np.log(x) - 0.5 * inv - series


def trigamma(x):
    """psi'(x) for x > 0."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for _ in range(10):
        low = x < 10.0
        acc = acc + np.where(low, 1.0 / (x * x), 0.0)
        x = np.where(low, x + 1.0, x)
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv + 0.5 * inv2 + inv * inv2 * (1.0 / 6 - inv2 * (1.0 / 30 - inv2 * (1.0 / 42 - inv2 * (1.0 / 30))))
    return acc + series


def log_beta_fn(a, b):
    return lgamma(a) + lgamma(b) - lgamma(a + b)


def sample_gamma(shape, rng: np.random.Generator):
    """Unit-scale Gamma draws (Marsaglia-Tsang; shapes below 1 use the U^(1/a) boost)."""
    shape = np.asarray(shape, dtype=float)
    flat = shape.reshape(-1)
    boost = flat < 1.0
    a = np.where(boost, flat + 1.0, flat)
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty_like(a)
    todo = np.arange(a.size)
    while todo.size:
        x = rng.standard_normal(todo.size)
        u = rng.random(todo.size)
        v = (1.0 + c[todo] * x) ** 3
        with np.errstate(invalid="ignore", divide="ignore"):
            ok = (v > 0) & (np.log(u) < 0.5 * x * x + d[todo] - d[todo] * v + d[todo] * np.log(np.where(v > 0, v, 1.0)))
        out[todo[ok]] = d[todo[ok]] * v[ok]
        todo = todo[~ok]
    if boost.any():
        idx = np.nonzero(boost)[0]
        out[idx] *= rng.random(idx.size) ** (1.0 / flat[idx])
    return out.reshape(shape.shape)


def sample_beta(alpha, beta, rng: np.random.Generator):
    x = sample_gamma(alpha, rng)
    y = sample_gamma(beta, rng)
    return x / (x + y)
