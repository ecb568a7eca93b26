"""Numerical inverse Laplace transform by two independent routes.

``talbot`` deforms the Bromwich contour (fixed Talbot, Abate & Valko 2004);
``stehfest`` sums samples of F on the positive real axis (Gaver-Stehfest).
They share no code beyond the caller's F, which makes their agreement a
useful accuracy check.  F must accept a complex numpy array of s values.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial, log

import numpy as np

from .errors import NumericalInstabilityError

DEFAULT_TOLERANCE = 5e-3


def talbot(F, t, M=32):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("talbot needs t > 0")
    k = np.arange(1, M)
    theta = k * np.pi / M
    cot = 1.0 / np.tan(theta)
    sigma = theta + (theta * cot - 1.0) * cot
    out = np.empty_like(t)
    for j, tj in enumerate(t):
        r = 2.0 * M / (5.0 * tj)
        s = r * theta * (cot + 1j)
        s0 = np.array([r + 0j])
        head = 0.5 * np.real(F(s0)[0]) * np.exp(r * tj)
        body = np.real(np.exp(tj * s) * F(s) * (1.0 + 1j * sigma)).sum()
        out[j] = r / M * (head + body)
    return out


@lru_cache(maxsize=None)
def _stehfest_weights(N):
    half = N // 2
    V = np.zeros(N)
    for i in range(1, N + 1):
        acc = 0.0
        for k in range((i + 1) // 2, min(i, half) + 1):
            acc += (
                k ** half
                * factorial(2 * k)
                / (factorial(half - k) * factorial(k) * factorial(k - 1)
                   * factorial(i - k) * factorial(2 * k - i))
            )
        V[i - 1] = (-1) ** (i + half) * acc
    return V


def stehfest(F, t, N=16):
    if N % 2:
        raise ValueError("Stehfest needs an even number of terms")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("stehfest needs t > 0")
    V = _stehfest_weights(N)
    ln2 = log(2.0)
    k = np.arange(1, N + 1)
    s = (k[None, :] * ln2 / t[:, None]).astype(complex)
    vals = np.real(F(s.ravel())).reshape(s.shape)
    return ln2 / t * (vals * V[None, :]).sum(axis=1)


@dataclass(frozen=True)
class Inversion:
    """Time samples from both methods; ``values`` holds the contour result."""

    t: np.ndarray
    values: np.ndarray
    alt: np.ndarray
    discrepancy: float

    def trace(self, name, unit):
        from .traces import Trace

        dt = np.diff(self.t)
        if dt.size == 0 or not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
            raise ValueError("inversion grid is not uniform")
        return Trace(name, unit, float(self.t[0]), float(dt[0]), self.values.copy())


def discrepancy(a, b):
    """Largest absolute difference relative to the waveform peak."""
    peak = max(np.max(np.abs(a)), np.max(np.abs(b)))
    if peak == 0.0:
        return 0.0
    return float(np.max(np.abs(a - b)) / peak)


def invert_laplace(F, t_grid, tol=DEFAULT_TOLERANCE, check=True) -> Inversion:
    """Invert F on ``t_grid`` with both methods and compare them."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if np.any(t <= 0):
        raise ValueError("t_grid must be > 0")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    a = talbot(F, t)
    b = stehfest(F, t)
    result = Inversion(t, a, b, discrepancy(a, b))
    if check and result.discrepancy > tol:
        raise NumericalInstabilityError(
            f"inversion methods disagree by {result.discrepancy:.3%} (> {tol:.3%})",
            result,
        )
    return result
