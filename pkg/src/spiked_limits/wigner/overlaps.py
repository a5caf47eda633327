"""Posterior overlap moments, exactly or by heat-bath Gibbs sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..prior import Prior
from .likelihood import ENUMERATION_CAP, ConfigurationSpace
from .observation import Observation


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class GibbsParams:
    burn_in: int = 1000
    sweeps: int = 10_000
    thin: int = 10
    pairs: int = 8  # independent replica pairs, i.e. 2 * pairs chains
    seed: int = 0
    check_convergence: bool = True


@dataclass(frozen=True)
class OverlapStats:
    """Gibbs averages of powers of ``R_{1,*}`` and ``R_{1,2}`` for one observation.

    The ``se_*`` fields are zero for the exact method.
    """

    e_r1star_sq: float
    e_r1star_4: float
    e_r12_sq: float
    e_r12_4: float
    method: str
    n: int
    se_r1star_sq: float = 0.0
    se_r1star_4: float = 0.0
    se_r12_sq: float = 0.0
    se_r12_4: float = 0.0


def _exact(obs, spike, lam, prior, cap):
    space = ConfigurationSpace(prior, obs.n, cap)
    logw = space.log_weights(obs, lam)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    n = obs.n
    r2 = r4 = 0.0
    m2 = np.zeros((n, n))
    m4 = np.zeros((n * n, n * n))
    start = 0
    for X, _ in space.blocks():
        wb = w[start : start + len(X)]
        start += len(X)
        r = X @ spike / n
        r2 += wb @ r**2
        r4 += wb @ r**4
        m2 += X.T @ (wb[:, None] * X)
        Q = (X[:, :, None] * X[:, None, :]).reshape(len(X), n * n)
        m4 += Q.T @ (wb[:, None] * Q)
    # <R12^2> = sum_ij <x_i x_j>^2 / n^2 and <R12^4> = sum_ijkl <x_i x_j x_k x_l>^2 / n^4
    return OverlapStats(
        e_r1star_sq=float(r2),
        e_r1star_4=float(r4),
        e_r12_sq=float(np.sum(m2**2) / n**2),
        e_r12_4=float(np.sum(m4**2) / n**4),
        method="exact",
        n=n,
    )


def _heat_bath_sweep(X, Y, diag_field, diag_quartic, lam, prior, rng):
    """One sequential sweep over the sites for all chains at once (in place)."""
    n = X.shape[1]
    a = prior.atoms
    c = math.sqrt(lam / n)
    pen = lam / (2 * n)
    logp = prior.log_weights
    sq = X * X
    total_sq = sq.sum(axis=1)
    for i in range(n):
        h = c * (X @ Y[i])  # Y has zero diagonal
        others = total_sq - sq[:, i]
        logits = logp + h[:, None] * a - pen * others[:, None] * a**2
        if diag_field is not None:
            logits = logits + diag_field[i] * a**2 - diag_quartic * a**4
        logits -= logits.max(axis=1, keepdims=True)
        cdf = np.cumsum(np.exp(logits), axis=1)
        u = rng.random(len(X)) * cdf[:, -1]
        k = np.minimum((cdf < u[:, None]).sum(axis=1), len(a) - 1)
        X[:, i] = a[k]
        sq[:, i] = X[:, i] ** 2
        total_sq = others + sq[:, i]


def _gibbs(obs, spike, lam, prior, params: GibbsParams):
    rng = np.random.default_rng(params.seed)
    n = obs.n
    Y = obs.matrix()
    np.fill_diagonal(Y, 0.0)
    diag_field = diag_quartic = None
    if obs.has_diag:
        s2 = obs.sigma**2
        diag_field = math.sqrt(lam / n) * obs.diag / s2
        diag_quartic = lam / (2 * n) / s2
    chains = 2 * params.pairs
    X = prior.sample(rng, (chains, n))
    for _ in range(params.burn_in):
        _heat_bath_sweep(X, Y, diag_field, diag_quartic, lam, prior, rng)
    samples = []
    for t in range(params.sweeps):
        _heat_bath_sweep(X, Y, diag_field, diag_quartic, lam, prior, rng)
        if (t + 1) % params.thin == 0:
            r1 = X @ spike / n
            r12 = np.sum(X[: params.pairs] * X[params.pairs :], axis=1) / n
            samples.append(np.concatenate([r1**2, r1**4, r12**2, r12**4]))
    S = np.array(samples)  # (measurements, 2*chains + 2*pairs)
    p = params.pairs
    blocks = {
        "r1star_sq": S[:, :chains],
        "r1star_4": S[:, chains : 2 * chains],
        "r12_sq": S[:, 2 * chains : 2 * chains + p],
        "r12_4": S[:, 2 * chains + p :],
    }
    est, se = {}, {}
    for key, vals in blocks.items():
        per_chain = vals.mean(axis=0)
        est[key] = float(per_chain.mean())
        se[key] = float(per_chain.std(ddof=1) / math.sqrt(len(per_chain)))
    if params.check_convergence:
        _split_chain_check(blocks["r1star_sq"])
    return OverlapStats(
        e_r1star_sq=est["r1star_sq"],
        e_r1star_4=est["r1star_4"],
        e_r12_sq=est["r12_sq"],
        e_r12_4=est["r12_4"],
        method="gibbs",
        n=n,
        se_r1star_sq=se["r1star_sq"],
        se_r1star_4=se["r1star_4"],
        se_r12_sq=se["r12_sq"],
        se_r12_4=se["r12_4"],
    )


def _split_chain_check(vals: np.ndarray) -> None:
    half = len(vals) // 2
    first = vals[:half].mean(axis=0)
    second = vals[half : 2 * half].mean(axis=0)
    k = vals.shape[1]
    pooled = math.sqrt((first.var(ddof=1) + second.var(ddof=1)) / k)
    diff = abs(first.mean() - second.mean())
    if diff > 3 * pooled:
        raise ConvergenceError(
            f"split-chain means of R_1*^2 differ by {diff:.3g} > 3 pooled SE ({pooled:.3g})"
        )


def overlap_moments(
    obs: Observation,
    spike: np.ndarray,
    lam: float,
    prior: Prior,
    method: str = "exact",
    params: GibbsParams | None = None,
    cap: int = ENUMERATION_CAP,
) -> OverlapStats:
    """Second and fourth moments of the overlaps under the posterior given ``obs``.

    ``method="exact"`` enumerates all configurations; ``method="gibbs"`` runs
    ``2 * params.pairs`` independent heat-bath chains, pairing chain ``c`` with
    chain ``c + pairs`` as the two replicas. Gibbs standard errors are computed
    from the spread across chains.

    Raises:
        EnumerationCapError: exact method on too many configurations.
        ConvergenceError: split-chain means disagree by more than 3 pooled SE.
    """
    if spike is None:
        raise ValueError("overlap moments need the planted spike")
    spike = np.asarray(spike, dtype=float)
    if spike.shape != (obs.n,):
        raise ValueError("spike length does not match the observation")
    if method == "exact":
        return _exact(obs, spike, lam, prior, cap)
    if method == "gibbs":
        return _gibbs(obs, spike, lam, prior, params or GibbsParams())
    raise ValueError(f"unknown method {method!r}")
