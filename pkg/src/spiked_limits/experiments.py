"""Seeded Monte Carlo experiments checking the limiting laws at desk scale.

Every replicate draws its observation from ``default_rng([seed, n, tag, index])``
and replicates are processed in fixed-size chunks, so results do not depend on
the number of workers.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from .detection import DomainError, mu, mu_with_diagonal, optimal_error, per_type_error
from .prior import Prior, prior_from_spec
from .rs_threshold import reconstruction_threshold
from .wigner.likelihood import ENUMERATION_CAP, ConfigurationSpace, log_lr_exact_batch, log_lr_mc
from .wigner.observation import sample_observation
from .wigner.overlaps import GibbsParams, overlap_moments

CHUNK = 64
NULL, ALT, PLANTED = 0, 1, 2

# finite-size tolerances; the limits are N -> infinity statements
CLT_MEAN_SE = 4.0
CLT_MEAN_REL = 0.1
CLT_VAR_REL = 0.25
CLT_GAP_REL = 0.2
ERROR_ABS = 0.05
STRONG_MIN_FRACTION = 0.95
OVERLAP_BAND = (0.85, 1.15)
FOURTH_MOMENT_SPREAD = 0.5
NISHIMORI_SE = 3.0


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("SPIKED_LIMITS_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


@dataclass
class ExperimentConfig:
    prior: Prior
    lam: float
    n_list: list[int] = field(default_factory=lambda: [12])
    replicates: int = 2000
    seed: int = 0
    lr_method: str = "exact"
    mc_samples: int = 100_000
    sigma: float = math.inf
    workers: int | None = 1

    def __post_init__(self):
        self.prior = prior_from_spec(self.prior)
        self.n_list = [int(n) for n in self.n_list]
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if any(n < 2 for n in self.n_list):
            raise ValueError("every n must be at least 2")
        if self.lr_method not in ("exact", "mc"):
            raise ValueError(f"unknown LR method {self.lr_method!r}")
        if self.lr_method == "exact":
            for n in self.n_list:
                ConfigurationSpace(self.prior, n, ENUMERATION_CAP)
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prior"] = self.prior.to_dict()
        d["sigma"] = "inf" if math.isinf(self.sigma) else self.sigma
        d.pop("workers")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        if "n" in d:
            n = d.pop("n")
            d["n_list"] = n if isinstance(n, list) else [n]
        if "sigma" in d:
            d["sigma"] = float(d["sigma"])
        return cls(**d)

    def content_hash(self) -> str:
        """Git blob hash of the canonical JSON form of the config."""
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha1(b"blob %d\0" % len(payload) + payload).hexdigest()


# ---------------------------------------------------------------- replicates


def _draw(prior, n, lam, sigma, seed, tag, index):
    rng = np.random.default_rng([seed, n, tag, index])
    return sample_observation(prior, n, lam, sigma, seed=seed, rng=rng)


def _sub_seed(*key) -> int:
    # independent stream for the estimator, distinct from the data stream
    return int(np.random.SeedSequence([*key, 1]).generate_state(1)[0])


def _log_lr_chunk(task):
    cfg, n, gen_lam, eval_lam, tag, indices = task
    obs = [_draw(cfg.prior, n, gen_lam, cfg.sigma, cfg.seed, tag, i)[0] for i in indices]
    if cfg.lr_method == "exact":
        upper = np.array([o.upper for o in obs])
        diag = None if math.isinf(cfg.sigma) else np.array([o.diag for o in obs])
        return log_lr_exact_batch(upper, eval_lam, cfg.prior, n, diag, cfg.sigma)
    return np.array(
        [
            log_lr_mc(o, eval_lam, cfg.prior, cfg.mc_samples, seed=_sub_seed(cfg.seed, n, tag, i)).value
            for o, i in zip(obs, indices)
        ]
    )


def _map_chunks(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _chunks(count):
    return [range(lo, min(lo + CHUNK, count)) for lo in range(0, count, CHUNK)]


def simulate_log_lr(cfg: ExperimentConfig, n: int, hypothesis: str) -> np.ndarray:
    """``log L(Y; cfg.lam)`` for ``cfg.replicates`` draws of Y under one hypothesis."""
    tag = NULL if hypothesis == "null" else ALT
    gen_lam = 0.0 if tag == NULL else cfg.lam
    tasks = [(cfg, n, gen_lam, cfg.lam, tag, idx) for idx in _chunks(cfg.replicates)]
    return np.concatenate(_map_chunks(_log_lr_chunk, tasks, worker_count(cfg.workers)))


def _theory_mu(cfg: ExperimentConfig) -> float:
    if math.isinf(cfg.sigma):
        return mu(cfg.lam)
    return mu_with_diagonal(cfg.prior, cfg.lam, cfg.sigma)


def _require_below_threshold(cfg: ExperimentConfig) -> float:
    if not (cfg.prior.centered and cfg.prior.unit_variance):
        raise DomainError("the limiting laws assume a centered, unit-variance prior")
    lam_c = reconstruction_threshold(cfg.prior)
    if not 0 < cfg.lam < lam_c:
        raise DomainError(f"lambda = {cfg.lam} is outside (0, lambda_c = {lam_c:.6g})")
    return lam_c


# ----------------------------------------------------------------------- CLT


@dataclass
class HypothesisSummary:
    hypothesis: str
    n: int
    replicates: int
    mean: float
    variance: float
    se_mean: float
    theory_mean: float
    theory_variance: float
    z_mean: float
    z_variance: float
    ks_statistic: float


@dataclass
class CLTResult:
    mu: float
    lambda_c: float
    rows: list[HypothesisSummary]
    checks: dict

    def to_csv(self) -> str:
        return _csv(self.rows)


def _summarize(values, hypothesis, n, m):
    k = len(values)
    mean = float(values.mean())
    var = float(values.var(ddof=1))
    se = math.sqrt(var / k)
    target = m if hypothesis == "alt" else -m
    # SE of the sample variance from the fourth central moment
    m4 = float(np.mean((values - mean) ** 4))
    se_var = math.sqrt(max(m4 - var**2 * (k - 3) / (k - 1), 0.0) / k)
    ks = stats.kstest(values, "norm", args=(target, math.sqrt(2 * m))).statistic if m > 0 else float("nan")
    return HypothesisSummary(
        hypothesis=hypothesis,
        n=n,
        replicates=k,
        mean=mean,
        variance=var,
        se_mean=se,
        theory_mean=target,
        theory_variance=2 * m,
        z_mean=(mean - target) / se if se > 0 else 0.0,
        z_variance=(var - 2 * m) / se_var if se_var > 0 else 0.0,
        ks_statistic=float(ks),
    )


def run_clt(cfg: ExperimentConfig) -> CLTResult:
    lam_c = _require_below_threshold(cfg)
    m = _theory_mu(cfg)
    rows, checks = [], {}
    for n in cfg.n_list:
        null = _summarize(simulate_log_lr(cfg, n, "null"), "null", n, m)
        alt = _summarize(simulate_log_lr(cfg, n, "alt"), "alt", n, m)
        rows += [null, alt]
        gap = alt.mean - null.mean
        checks[n] = {
            "null_mean_ok": abs(null.mean + m) <= max(CLT_MEAN_SE * null.se_mean, CLT_MEAN_REL * m),
            "null_variance_ok": abs(null.variance - 2 * m) <= CLT_VAR_REL * 2 * m,
            "mean_gap": gap,
            "mean_gap_ok": abs(gap - 2 * m) <= CLT_GAP_REL * 2 * m,
        }
    return CLTResult(mu=m, lambda_c=lam_c, rows=rows, checks=checks)


# ---------------------------------------------------------------- test error


@dataclass
class TestErrorRow:
    n: int
    replicates: int
    type1: float
    type2: float
    total: float
    optimal_error: float
    per_type_limit: float


@dataclass
class TestErrorResult:
    lambda_c: float
    rows: list[TestErrorRow]
    checks: dict

    def to_csv(self) -> str:
        return _csv(self.rows)


def run_test_error(cfg: ExperimentConfig) -> TestErrorResult:
    """Errors of the test rejecting the null iff ``log L > 0``."""
    lam_c = _require_below_threshold(cfg)
    if not math.isinf(cfg.sigma):
        raise DomainError("the error formula is stated for a discarded diagonal")
    rows, checks = [], {}
    for n in cfg.n_list:
        type1 = float(np.mean(simulate_log_lr(cfg, n, "null") > 0))
        type2 = float(np.mean(simulate_log_lr(cfg, n, "alt") <= 0))
        row = TestErrorRow(
            n=n,
            replicates=cfg.replicates,
            type1=type1,
            type2=type2,
            total=type1 + type2,
            optimal_error=optimal_error(cfg.lam),
            per_type_limit=per_type_error(cfg.lam),
        )
        rows.append(row)
        checks[n] = {
            "total_ok": abs(row.total - row.optimal_error) <= ERROR_ABS,
            "type1_ok": abs(type1 - row.per_type_limit) <= ERROR_ABS,
            "type2_ok": abs(type2 - row.per_type_limit) <= ERROR_ABS,
        }
    return TestErrorResult(lambda_c=lam_c, rows=rows, checks=checks)


# ---------------------------------------------------------- strong detection


@dataclass
class StrongDetectionRow:
    n: int
    replicates: int
    correct_null: float
    correct_alt: float
    null_mean_per_n: float
    alt_mean_per_n: float


@dataclass
class StrongDetectionResult:
    lambda_c: float
    rows: list[StrongDetectionRow]
    checks: dict

    def to_csv(self) -> str:
        return _csv(self.rows)


def run_strong_detection(cfg: ExperimentConfig) -> StrongDetectionResult:
    """Fraction of replicates where the sign of ``log L / n`` identifies the hypothesis."""
    lam_c = reconstruction_threshold(cfg.prior)
    if cfg.lam <= lam_c:
        raise DomainError(f"lambda = {cfg.lam} must exceed lambda_c = {lam_c:.6g}")
    rows, checks = [], {}
    for n in cfg.n_list:
        null = simulate_log_lr(cfg, n, "null") / n
        alt = simulate_log_lr(cfg, n, "alt") / n
        row = StrongDetectionRow(
            n=n,
            replicates=cfg.replicates,
            correct_null=float(np.mean(null <= 0)),
            correct_alt=float(np.mean(alt > 0)),
            null_mean_per_n=float(null.mean()),
            alt_mean_per_n=float(alt.mean()),
        )
        rows.append(row)
        checks[n] = {
            "null_ok": row.correct_null >= STRONG_MIN_FRACTION,
            "alt_ok": row.correct_alt >= STRONG_MIN_FRACTION,
        }
    return StrongDetectionResult(lambda_c=lam_c, rows=rows, checks=checks)


# ------------------------------------------------------------------ overlaps


@dataclass
class OverlapRow:
    n: int
    draws: int
    scaled_r1star_sq: float
    se_scaled_r1star_sq: float
    scaled_r1star_4: float
    se_scaled_r1star_4: float
    nishimori_gap: float
    nishimori_pooled_se: float


@dataclass
class OverlapResult:
    lambda_c: float
    rows: list[OverlapRow]
    checks: dict

    def to_csv(self) -> str:
        return _csv(self.rows)


def _overlap_chunk(task):
    cfg, n, indices, gibbs = task
    out = []
    for i in indices:
        obs, spike = _draw(cfg.prior, n, cfg.lam, cfg.sigma, cfg.seed, PLANTED, i)
        method = "exact" if gibbs is None else "gibbs"
        params = None if gibbs is None else replace(gibbs, seed=_sub_seed(cfg.seed, n, PLANTED, i))
        s = overlap_moments(obs, spike, cfg.lam, cfg.prior, method, params)
        out.append((s.e_r1star_sq, s.e_r1star_4, s.e_r12_sq))
    return np.array(out)


def run_overlap(cfg: ExperimentConfig, gibbs: GibbsParams | None = None) -> OverlapResult:
    """Overlap scaling under the planted model, averaged over ``cfg.replicates`` draws.

    Uses exact posterior enumeration unless ``gibbs`` parameters are given.
    """
    lam_c = _require_below_threshold(cfg)
    rows = []
    for n in cfg.n_list:
        tasks = [(cfg, n, idx, gibbs) for idx in _chunks(cfg.replicates)]
        vals = np.concatenate(_map_chunks(_overlap_chunk, tasks, worker_count(cfg.workers)))
        k = len(vals)
        r2, r4, q2 = vals.T
        se = lambda v: float(v.std(ddof=1) / math.sqrt(k)) if k > 1 else float("nan")
        scale2 = n * (1 - cfg.lam)
        rows.append(
            OverlapRow(
                n=n,
                draws=k,
                scaled_r1star_sq=float(scale2 * r2.mean()),
                se_scaled_r1star_sq=scale2 * se(r2),
                scaled_r1star_4=float(n**2 * r4.mean()),
                se_scaled_r1star_4=n**2 * se(r4),
                nishimori_gap=float(abs(q2.mean() - r2.mean())),
                nishimori_pooled_se=math.hypot(se(q2), se(r2)),
            )
        )
    fourth = [r.scaled_r1star_4 for r in rows]
    checks = {
        "cavity_band_ok": all(OVERLAP_BAND[0] <= r.scaled_r1star_sq <= OVERLAP_BAND[1] for r in rows),
        "fourth_moment_spread": (max(fourth) - min(fourth)) / min(fourth),
        "nishimori_ok": all(r.nishimori_gap <= NISHIMORI_SE * r.nishimori_pooled_se for r in rows),
    }
    checks["fourth_moment_ok"] = checks["fourth_moment_spread"] < FOURTH_MOMENT_SPREAD
    return OverlapResult(lambda_c=lam_c, rows=rows, checks=checks)


# --------------------------------------------------------------------- utils


def _csv(rows) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(asdict(rows[0]).keys())
    writer.writerow(names)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in asdict(row).values()])
    return buf.getvalue()
