"""Free energies of the scalar Gaussian channel ``y = sqrt(r) x* + z``.

All Gaussian expectations use Gauss-Hermite quadrature against the
standard normal density; expectations over the prior are exact atom sums.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermitenorm

from .prior import Prior, moment

DEFAULT_ORDER = 80
MAX_ORDER = 5120
QUADRATURE_TOL = 1e-10

# stencil bases for the third derivative at zero
D3_STEPS = (1e-2, 5e-3, 2.5e-3)
D3_LEVELS = 4
D3_REJECT_RTOL = 1e-3


class QuadratureWarning(RuntimeWarning):
    pass


class DerivativeError(RuntimeError):
    """Raised when the finite-difference stencils for psi'''(0) disagree."""


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def expect(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """E_z[f(z)] given ``values`` = f(nodes) along ``axis``."""
        return np.tensordot(values, self.weights, axes=([axis], [0]))


@lru_cache(maxsize=None)
def gauss_hermite(order: int) -> QuadratureRule:
    """Gauss-Hermite rule normalized for ``z ~ N(0, 1)``."""
    if order < 1:
        raise ValueError(f"quadrature order must be positive, got {order}")
    nodes, weights = roots_hermitenorm(order)
    weights = weights / np.sqrt(2 * np.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights, order)


def _log_mix(u: np.ndarray, logw: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``log sum_k w_k exp(u_k)`` over the last axis.

    Small exponents go through log1p/expm1 so values near zero keep their
    relative precision; otherwise max-subtraction.
    """
    m = np.max(u, axis=-1, keepdims=True)
    with np.errstate(over="ignore", invalid="ignore"):
        lse = m[..., 0] + np.log(np.sum(np.exp(u - m + logw), axis=-1))
        small = np.log1p(np.sum(w * np.expm1(u), axis=-1))
    use_small = np.max(np.abs(u), axis=-1) < 0.5
    return np.where(use_small, small, lse)


def _channel_average(prior: Prior, r, shift, rule: QuadratureRule) -> np.ndarray:
    """E_z log sum_k p_k exp(sqrt(r) z a_k + shift a_k - r a_k^2 / 2).

    ``r`` and ``shift`` broadcast against each other.
    """
    r, shift = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(shift, dtype=float))
    a = prior.atoms
    sr = np.sqrt(r)[..., None, None]
    u = (
        sr * rule.nodes[:, None] * a
        + shift[..., None, None] * a
        - 0.5 * r[..., None, None] * a**2
    )
    return rule.expect(_log_mix(u, prior.log_weights, prior.weights))


def _adaptive(evaluate, order, tol):
    """Evaluate at a fixed order, or double from the default until converged."""
    if order is not None:
        return evaluate(gauss_hermite(order))
    n = DEFAULT_ORDER
    prev = evaluate(gauss_hermite(n))
    while True:
        n *= 2
        cur = evaluate(gauss_hermite(n))
        if np.max(np.abs(cur - prev), initial=0.0) <= tol:
            return cur
        if n >= MAX_ORDER:
            warnings.warn(
                f"Gauss-Hermite quadrature not converged to {tol:g} at order {n}",
                QuadratureWarning,
                stacklevel=3,
            )
            return cur
        prev = cur


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(~np.isfinite(r)):
        raise ValueError("r must be finite and nonnegative")
    return r


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def psi(prior: Prior, r, *, order: int | None = None, tol: float = QUADRATURE_TOL):
    """Mutual-information potential of the scalar channel at SNR ``r``.

    Equals the KL divergence between the laws of ``sqrt(r) x* + z`` and ``z``.
    Accepts scalar or array ``r``. With ``order=None`` the quadrature order is
    doubled from 80 until successive values agree within ``tol``.
    """
    r = _check_r(r)

    def evaluate(rule):
        total = 0.0
        for xs, ps in zip(prior.atoms, prior.weights):
            total = total + ps * _channel_average(prior, r, r * xs, rule)
        return total

    return _out(_adaptive(evaluate, order, tol), r)


def psi_hat(prior: Prior, r, s, *, order: int | None = None, tol: float = QUADRATURE_TOL):
    """``E_z log E_x exp(sqrt(r) z x + s x - r x^2 / 2)`` for a deterministic field ``s``."""
    r = _check_r(r)
    s = np.asarray(s, dtype=float)
    value = _adaptive(lambda rule: _channel_average(prior, r, s, rule), order, tol)
    return _out(value, np.broadcast_arrays(r, s)[0])


def psi_bar(prior: Prior, r, s, *, order: int | None = None, tol: float = QUADRATURE_TOL):
    """``psi_hat(r, s x*)`` averaged over ``x* ~ prior``; ``psi_bar(r, r) == psi(r)``."""
    r = _check_r(r)
    s = np.asarray(s, dtype=float)

    def evaluate(rule):
        total = 0.0
        for xs, ps in zip(prior.atoms, prior.weights):
            total = total + ps * _channel_average(prior, r, s * xs, rule)
        return total

    return _out(_adaptive(evaluate, order, tol), np.broadcast_arrays(r, s)[0])


def _neville_at_zero(x: np.ndarray, y: np.ndarray) -> float:
    """Polynomial extrapolation of the points (x, y) to x = 0."""
    p = np.array(y, dtype=float)
    n = len(x)
    for k in range(1, n):
        p[: n - k] = (x[k:] * p[: n - k] - x[: n - k] * p[1 : n - k + 1]) / (x[k:] - x[: n - k])
    return float(p[0])


def _third_derivative_estimate(prior: Prior, h: float, d1: float, d2: float) -> float:
    r = h * 2.0 ** -np.arange(D3_LEVELS)
    vals = np.asarray(psi(prior, r, order=DEFAULT_ORDER))
    remainder = 6.0 * (vals - d1 * r - 0.5 * d2 * r**2) / r**3
    return _neville_at_zero(r, remainder)


def psi_derivatives_at_zero(prior: Prior) -> tuple[float, float, float]:
    """Return ``(psi'(0), psi''(0), psi'''(0))``.

    The first two are exact: ``E[X]^2 / 2`` and ``Var(X)^2 / 2``. The third
    comes from Richardson extrapolation of ``6 (psi(r) - d1 r - d2 r^2/2) / r^3``
    on log-spaced points ``r = h 2^-k``, repeated for each base step in
    ``D3_STEPS``.

    Raises:
        DerivativeError: if the extrapolations from different base steps
            disagree by more than ``D3_REJECT_RTOL`` relative.
    """
    m1 = moment(prior, 1)
    var = moment(prior, 2) - m1**2
    d1 = 0.5 * m1**2
    d2 = 0.5 * var**2
    estimates = [_third_derivative_estimate(prior, h, d1, d2) for h in D3_STEPS]
    scale = max(abs(e) for e in estimates) + 1e-7 * var**3
    spread = max(estimates) - min(estimates)
    if spread > D3_REJECT_RTOL * scale:
        raise DerivativeError(
            f"psi'''(0) stencils disagree: {estimates} (spread {spread:.3g})"
        )
    return d1, d2, estimates[-1]
