"""Replica-symmetric potential, its maximizer and the reconstruction threshold."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .prior import Prior, moment, sparse_rademacher
from .scalar_channel import psi

GRID_STEP = 1e-3  # relative to E[X^2]
Q_MARGIN = 1.1
GOLDEN_TOL = 1e-8
TIE_TOL = 1e-9
LAMBDA_WIDTH = 1e-5
INVPHI = (math.sqrt(5) - 1) / 2


class SolverError(RuntimeError):
    pass


@dataclass
class RSReport:
    lambda_grid: list[float]
    q_star: list[float]
    phi_rs: list[float]
    lambda_c: float
    spectral_threshold: float
    centered: bool = True
    prior: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["lambda", "q_star", "phi_rs"])
        for row in zip(self.lambda_grid, self.q_star, self.phi_rs):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def rs_potential(prior: Prior, lam, q):
    """``F(lam, q) = psi(lam q) - lam q^2 / 4``; vectorized over ``q``."""
    q = np.asarray(q, dtype=float)
    if lam < 0 or np.any(q < 0):
        raise ValueError("lambda and q must be nonnegative")
    value = np.asarray(psi(prior, lam * q)) - lam * q**2 / 4
    return float(value) if value.ndim == 0 else value


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float = GOLDEN_TOL):
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    candidates = [(f(x), x), (fc, c), (fd, d)]
    fx, x = max(candidates)
    return x, fx


def maximize_rs(prior: Prior, lam: float) -> tuple[float, float]:
    """Global maximizer ``q*`` of ``F(lam, .)`` over ``q >= 0`` and the value ``phi_RS``.

    Dense grid on ``[0, 1.1 E[X^2]]``, then golden-section refinement of every
    grid local maximum. Maxima whose values are within ``TIE_TOL`` of the best
    are ties; the largest ``q`` among them wins.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    m2 = moment(prior, 2)
    if lam == 0 or m2 == 0:
        return 0.0, 0.0
    step = GRID_STEP * m2
    q = np.arange(0.0, Q_MARGIN * m2 + step / 2, step)
    F = np.asarray(rs_potential(prior, lam, q))

    interior = np.flatnonzero((F[1:-1] >= F[:-2]) & (F[1:-1] >= F[2:])) + 1
    peaks = list(interior)
    if F[0] >= F[1]:
        peaks.insert(0, 0)
    if F[-1] >= F[-2]:
        peaks.append(len(q) - 1)

    def f(x):
        return rs_potential(prior, lam, x)

    refined = []
    for i in peaks:
        lo, hi = q[max(i - 1, 0)], q[min(i + 1, len(q) - 1)]
        x, fx = golden_section_max(f, lo, hi)
        if F[i] > fx:
            x, fx = q[i], F[i]
        refined.append((x, fx))
    best = max(fx for _, fx in refined)
    q_star = max(x for x, fx in refined if fx >= best - TIE_TOL)
    return float(q_star), float(max(best, 0.0))


def spectral_threshold(prior: Prior) -> float:
    """``E[X^2]^-2``, the point where the top eigenvalue leaves the bulk."""
    m2 = moment(prior, 2)
    if m2 <= 0:
        raise ValueError("spectral threshold undefined for a zero-variance prior")
    return 1.0 / m2**2


def reconstruction_threshold(prior: Prior, q_tol: float = 1e-6, width: float = LAMBDA_WIDTH) -> float:
    """``lambda_c = sup{lam : q*(lam) = 0}`` by bisection on ``q*(lam) > q_tol E[X^2]``.

    ``q_tol`` and ``width`` are relative to ``E[X^2]`` and to the spectral
    threshold, so the result is invariant under rescaling the prior. A
    non-centered prior has ``lambda_c = 0``; this is returned with a warning.
    """
    spectral = spectral_threshold(prior)
    if not prior.centered:
        warnings.warn("prior is not centered: reconstruction threshold is 0", stacklevel=2)
        return 0.0
    return _bisect_threshold(prior, spectral, q_tol * moment(prior, 2), width * spectral)


@lru_cache(maxsize=64)
def _bisect_threshold(prior: Prior, spectral: float, q_tol: float, width: float) -> float:
    def informative(lam):
        return maximize_rs(prior, lam)[0] > q_tol

    lo, hi = 0.0, 4.0 * spectral
    if not informative(hi):
        raise SolverError(f"q*(lambda) is still zero at the bracket end {hi}")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if informative(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def rs_report(prior: Prior, lambda_grid: Sequence[float]) -> RSReport:
    grid = [float(x) for x in lambda_grid]
    solved = [maximize_rs(prior, lam) for lam in grid]
    return RSReport(
        lambda_grid=grid,
        q_star=[q for q, _ in solved],
        phi_rs=[v for _, v in solved],
        lambda_c=reconstruction_threshold(prior),
        spectral_threshold=spectral_threshold(prior),
        centered=prior.centered,
        prior=prior.to_dict(),
    )


def rho_star(tol: float = 1e-4, q_tol: float = 1e-6) -> float:
    """Critical sparsity of the sparse Rademacher family.

    Largest ``rho`` with ``lambda_c(rho) < 1``. Since ``phi_RS`` is
    nondecreasing in ``lam`` and ``lambda_c <= 1``, this holds exactly when
    ``q*(1) > 0``, so the bisection runs on that indicator.
    """

    def below_spectral(rho):
        return maximize_rs(sparse_rademacher(rho), 1.0)[0] > q_tol

    lo, hi = 0.01, 1.0
    if not below_spectral(lo) or below_spectral(hi):
        raise SolverError("rho* bracket [0.01, 1] is invalid")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if below_spectral(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
