"""Closed-form detection limits below the reconstruction threshold."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

from scipy.special import erfc

from .prior import Prior, moment
from .rs_threshold import reconstruction_threshold


class DomainError(ValueError):
    """Raised when a formula is evaluated outside its range of validity."""


CURVE_COLUMNS = ("lambda", "mu", "mean_null", "mean_alt", "variance", "err_star", "kl", "tv")


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0 <= lam < 1:
        raise DomainError(f"lambda must lie in [0, 1), got {lam}")
    return lam


def mu(lam: float) -> float:
    """Half-variance of the limiting law of log L: ``(-log(1 - lam) - lam) / 4``.

    log L converges to N(+mu, 2 mu) under the planted model and to
    N(-mu, 2 mu) under the null.
    """
    lam = _check_lambda(lam)
    return 0.25 * (-math.log1p(-lam) - lam)


def mu_with_diagonal(prior: Prior, lam: float, sigma: float) -> float:
    """Adjusted ``mu`` when the diagonal is observed with noise level ``sigma``."""
    lam = _check_lambda(lam)
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if math.isinf(sigma):
        return mu(lam)
    kappa = moment(prior, 3) ** 2
    s2 = sigma * sigma
    return mu(lam) * (1 + kappa / s2) + lam / (2 * s2)


def optimal_error(lam: float) -> float:
    """Limit of the minimal total error ``P_lam(L <= 1) + P_0(L > 1)``."""
    return float(erfc(math.sqrt(mu(lam)) / 2))


def optimal_error_closed_form(lam: float) -> float:
    """Same limit written as ``erfc(sqrt(-log(1 - lam) - lam) / 4)``."""
    lam = _check_lambda(lam)
    return float(erfc(0.25 * math.sqrt(-math.log1p(-lam) - lam)))


def per_type_error(lam: float) -> float:
    """Common limit of the Type-I and Type-II errors of the LR test."""
    return 0.5 * optimal_error(lam)


def tv_limit(lam: float) -> float:
    return 1.0 - optimal_error(lam)


def kl_limit(lam: float) -> float:
    return mu(lam)


@dataclass
class DetectionCurves:
    lambda_grid: list[float]
    mu: list[float]
    mean_null: list[float]
    mean_alt: list[float]
    variance: list[float]
    err_star: list[float]
    kl: list[float]
    tv: list[float]

    def rows(self):
        return zip(*(getattr(self, c if c != "lambda" else "lambda_grid") for c in CURVE_COLUMNS))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for row in self.rows():
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def curves(prior: Prior, lambda_grid: Sequence[float], lambda_c: float | None = None) -> DetectionCurves:
    """Tabulate the detection limits on ``lambda_grid``.

    Every grid point must lie in ``[0, lambda_c)``; the formulas say nothing
    beyond the reconstruction threshold.
    """
    if lambda_c is None:
        lambda_c = reconstruction_threshold(prior)
    grid = [float(x) for x in lambda_grid]
    bad = [x for x in grid if not 0 <= x < lambda_c]
    if bad:
        raise DomainError(
            f"grid points {bad} are outside the validity range [0, lambda_c={lambda_c:.6g})"
        )
    mus = [mu(x) for x in grid]
    err = [float(erfc(math.sqrt(m) / 2)) for m in mus]
    return DetectionCurves(
        lambda_grid=grid,
        mu=mus,
        mean_null=[-m for m in mus],
        mean_alt=list(mus),
        variance=[2 * m for m in mus],
        err_star=err,
        kl=[kl_limit(x) for x in grid],
        tv=[1.0 - e for e in err],
    )

