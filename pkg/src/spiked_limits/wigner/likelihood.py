"""Hamiltonian and log-likelihood ratio of the spiked Wigner model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..prior import Prior
from .observation import Observation

ENUMERATION_CAP = 2**20
BLOCK = 2**14
REPLICATE_CHUNK = 256


class EnumerationCapError(ValueError):
    pass


@dataclass(frozen=True)
class LogLREstimate:
    value: float
    method: str  # "exact" or "mc"
    std_error: float
    m_samples: int


def _pair_index(n: int):
    return np.triu_indices(n, 1)


def _neg_hamiltonian_terms(X, upper, diag, lam, n, sigma):
    """``-H`` for a block of configurations ``X`` (B x n) and observations.

    ``upper`` is (P,) or (R, P); returns (B,) or (B, R).
    """
    iu, ju = _pair_index(n)
    pairs = X[:, iu] * X[:, ju]
    c = math.sqrt(lam / n)
    coupling = pairs @ np.asarray(upper).T
    penalty = (lam / (2 * n)) * np.sum(pairs * pairs, axis=1)
    out = c * coupling - (penalty if coupling.ndim == 1 else penalty[:, None])
    if diag is not None:
        sq = X * X
        quartic = (lam / (2 * n)) * np.sum(sq * sq, axis=1)
        dcoup = c * (sq @ np.asarray(diag).T)
        out = out + (dcoup - (quartic if dcoup.ndim == 1 else quartic[:, None])) / sigma**2
    return out


def hamiltonian(obs: Observation, x, lam: float):
    """Exponent ``-H(x)`` of the posterior for one configuration or a batch.

    ``x`` has shape (n,) or (B, n). The diagonal term is included iff the
    observation keeps its diagonal.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != obs.n:
        raise ValueError(f"configuration length {X.shape[1]} does not match n = {obs.n}")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    out = _neg_hamiltonian_terms(X, obs.upper, obs.diag, lam, obs.n, obs.sigma)
    return float(out[0]) if single else out


class ConfigurationSpace:
    """All ``K^n`` configurations of ``n`` coordinates over the prior's atoms.

    Configurations are produced in blocks in mixed-radix order together with
    their log prior weight, so nothing of size ``K^n x n`` is kept in memory.
    """

    def __init__(self, prior: Prior, n: int, cap: int = ENUMERATION_CAP):
        k = len(prior)
        size = k**n
        if size > cap:
            raise EnumerationCapError(
                f"{k}^{n} = {size} configurations exceeds the enumeration cap {cap}"
            )
        self.prior = prior
        self.n = n
        self.size = size
        self._radix = k ** np.arange(n, dtype=np.int64)

    def blocks(self, block: int = BLOCK) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        k = len(self.prior)
        logw = self.prior.log_weights
        for start in range(0, self.size, block):
            idx = np.arange(start, min(start + block, self.size), dtype=np.int64)
            digits = (idx[:, None] // self._radix) % k
            yield self.prior.atoms[digits], logw[digits].sum(axis=1)

    def log_weights(self, obs: Observation, lam: float) -> np.ndarray:
        """Unnormalized log posterior weight of every configuration."""
        return np.concatenate(
            [
                lp + _neg_hamiltonian_terms(X, obs.upper, obs.diag, lam, obs.n, obs.sigma)
                for X, lp in self.blocks()
            ]
        )


def _streaming_lse(chunks) -> np.ndarray:
    m = s = None
    for v in chunks:
        cm = np.max(v, axis=0)
        if m is None:
            m, s = cm, np.sum(np.exp(v - cm), axis=0)
            continue
        new = np.maximum(m, cm)
        s = s * np.exp(m - new) + np.sum(np.exp(v - new), axis=0)
        m = new
    return m + np.log(s)


def log_lr_exact(obs: Observation, lam: float, prior: Prior, cap: int = ENUMERATION_CAP) -> LogLREstimate:
    """``log L(Y; lam)`` by summing over every configuration of the prior atoms."""
    space = ConfigurationSpace(prior, obs.n, cap)
    if lam == 0:
        return LogLREstimate(0.0, "exact", 0.0, space.size)
    value = _streaming_lse(
        lp + _neg_hamiltonian_terms(X, obs.upper, obs.diag, lam, obs.n, obs.sigma)
        for X, lp in space.blocks()
    )
    return LogLREstimate(float(value), "exact", 0.0, space.size)


def log_lr_exact_batch(
    upper: np.ndarray,
    lam: float,
    prior: Prior,
    n: int,
    diag: np.ndarray | None = None,
    sigma: float = math.inf,
    cap: int = ENUMERATION_CAP,
) -> np.ndarray:
    """Exact ``log L`` for R observations of the same size at once.

    ``upper`` is (R, n(n-1)/2) and ``diag`` is (R, n) or None.
    """
    upper = np.atleast_2d(upper)
    space = ConfigurationSpace(prior, n, cap)
    if lam == 0:
        return np.zeros(upper.shape[0])
    out = np.empty(upper.shape[0])
    for lo in range(0, upper.shape[0], REPLICATE_CHUNK):
        sl = slice(lo, lo + REPLICATE_CHUNK)
        d = None if diag is None else diag[sl]
        out[sl] = _streaming_lse(
            lp[:, None] + _neg_hamiltonian_terms(X, upper[sl], d, lam, n, sigma)
            for X, lp in space.blocks()
        )
    return out


def log_lr_mc(
    obs: Observation,
    lam: float,
    prior: Prior,
    m: int,
    seed: int,
    block: int = BLOCK,
) -> LogLREstimate:
    """``log`` of the prior-sample mean of ``exp(-H(x))`` over ``m`` draws.

    Sums of the weights and their squares are accumulated in log space; the
    standard error is the delta-method error of the log of the mean.
    """
    if m < 100:
        raise ValueError(f"m must be at least 100, got {m}")
    if lam == 0:
        return LogLREstimate(0.0, "mc", 0.0, m)
    rng = np.random.default_rng(seed)

    def chunks():
        done = 0
        while done < m:
            b = min(block, m - done)
            X = prior.sample(rng, (b, obs.n))
            v = _neg_hamiltonian_terms(X, obs.upper, obs.diag, lam, obs.n, obs.sigma)
            yield np.stack([v, 2 * v], axis=1)
            done += b

    log_s1, log_s2 = _streaming_lse(chunks())
    assert np.isfinite(log_s1), "all importance weights underflowed"
    value = log_s1 - math.log(m)
    rel_var = math.exp(log_s2 + math.log(m) - 2 * log_s1) - 1.0
    se = math.sqrt(max(rel_var, 0.0) / m)
    return LogLREstimate(float(value), "mc", se, m)
