"""Command-line runner: ``spiked-limits <command> [options]``.

Tables are written as CSV to ``--out`` (stdout when omitted for table-only
commands); a JSON summary with the config echo and its content hash goes to
stdout. Exit codes: 0 success, 2 invalid input or out-of-range lambda,
3 solver or convergence failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import experiments as ex
from .detection import DomainError, curves
from .prior import PriorError, prior_from_spec
from .rs_threshold import SolverError, rs_report
from .scalar_channel import DerivativeError
from .wigner.observation import sample_observation
from .wigner.overlaps import ConvergenceError, GibbsParams

EXIT_OK, EXIT_DOMAIN, EXIT_SOLVER = 0, 2, 3

TOLERANCE_NOTE = {
    "clt": "Gates: H0 mean within max(4 SE, 0.1 mu) of -mu; H0 variance within 25% of 2 mu; "
    "alt-minus-null gap within 20% of 2 mu. KS statistic is reported only.",
    "test-error": "Gates: total error within 0.05 of erfc(sqrt(mu)/2); each error type within 0.05 "
    "of erfc(sqrt(mu)/2)/2.",
    "strong-detection": "Gate: correct sign of log L / n in at least 95% of replicates per hypothesis. "
    "The null-side mean is reported only.",
    "overlap": "Gates: n(1-lambda)E<R1*^2> in [0.85, 1.15]; n^2 E<R1*^4> spread below 50%; "
    "Nishimori gap within 3 pooled SE.",
}


def _parse_sigma(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("sigma must be positive")
    return value


def _grid(args) -> np.ndarray:
    if args.grid:
        return np.array([float(v) for v in args.grid.split(",")])
    return np.linspace(args.grid_min, args.grid_max, args.grid_points)


def _experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--prior", help="prior spec: rademacher, sparse:<rho>, JSON, or a JSON file")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--method", choices=["exact", "mc"])
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--sigma", type=_parse_sigma)
    p.add_argument("--workers", type=int, help="worker processes (capped by SPIKED_LIMITS_THREADS)")
    p.add_argument("--out", help="CSV output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spiked-limits", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", help="RS maximizer, lambda_c and spectral threshold")
    p.add_argument("--prior", default="rademacher")
    p.add_argument("--grid", help="comma-separated lambda values for the CSV table")
    p.add_argument("--grid-min", type=float, default=0.05)
    p.add_argument("--grid-max", type=float, default=3.0)
    p.add_argument("--grid-points", type=int, default=60)
    p.add_argument("--out")

    p = sub.add_parser("curves", help="limiting error, TV and KL curves below lambda_c")
    p.add_argument("--prior", default="rademacher")
    p.add_argument("--grid")
    p.add_argument("--grid-min", type=float, default=0.0)
    p.add_argument("--grid-max", type=float, default=0.99)
    p.add_argument("--grid-points", type=int, default=100)
    p.add_argument("--out")

    for name, text in [
        ("clt", "log-LR fluctuations against the Gaussian limit"),
        ("test-error", "errors of the likelihood-ratio test"),
        ("strong-detection", "sign test of log L / n above lambda_c"),
        ("overlap", "overlap scaling under the posterior"),
    ]:
        p = sub.add_parser(name, help=text, description=f"{text}. {TOLERANCE_NOTE[name]}")
        _experiment_flags(p)
        if name == "overlap":
            p.add_argument("--gibbs", action="store_true", help="Gibbs sampling instead of enumeration")

    p = sub.add_parser("simulate", help="draw one observation and save it in binary form")
    p.add_argument("--prior", default="rademacher")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=_parse_sigma, default=math.inf)
    p.add_argument("--out", required=True)
    return parser


def load_config(args) -> ex.ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    overrides = {
        "prior": args.prior,
        "lam": args.lam,
        "n_list": args.n,
        "replicates": args.replicates,
        "seed": args.seed,
        "lr_method": args.method,
        "mc_samples": args.mc_samples,
        "sigma": args.sigma,
        "workers": args.workers,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    data.setdefault("prior", "rademacher")
    if "lam" not in data and "lambda" not in data:
        raise ValueError("lambda is required (--lambda or config)")
    return ex.ExperimentConfig.from_dict(data)


def _emit(table_csv: str, out: str | None, summary: dict):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(table_csv)
        summary["out"] = out
    json.dump(summary, sys.stdout, indent=2, sort_keys=True, default=_json_default)
    sys.stdout.write("\n")
    if not out:
        sys.stdout.write(table_csv)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _run(args) -> int:
    if args.command == "threshold":
        prior = prior_from_spec(args.prior)
        report = rs_report(prior, _grid(args))
        summary = {
            "command": "threshold",
            "prior": prior.to_dict(),
            "lambda_c": report.lambda_c,
            "spectral_threshold": report.spectral_threshold,
            "centered": report.centered,
        }
        _emit(report.to_csv(), args.out, summary)
        return EXIT_OK

    if args.command == "curves":
        prior = prior_from_spec(args.prior)
        table = curves(prior, _grid(args))
        _emit(table.to_csv(), args.out, {"command": "curves", "prior": prior.to_dict()})
        return EXIT_OK

    if args.command == "simulate":
        prior = prior_from_spec(args.prior)
        obs, _ = sample_observation(prior, args.n, args.lam, args.sigma, seed=args.seed)
        obs.save(args.out)
        summary = {"command": "simulate", "n": args.n, "lambda": args.lam, "seed": args.seed,
                   "sigma": "inf" if math.isinf(args.sigma) else args.sigma, "out": args.out,
                   "top_eigenvalue": obs.top_eigenvalue()}
        json.dump(summary, sys.stdout, indent=2, sort_keys=True, default=_json_default)
        sys.stdout.write("\n")
        return EXIT_OK

    cfg = load_config(args)
    if args.command == "clt":
        result = ex.run_clt(cfg)
        extra = {"mu": result.mu, "lambda_c": result.lambda_c}
    elif args.command == "test-error":
        result = ex.run_test_error(cfg)
        extra = {"lambda_c": result.lambda_c}
    elif args.command == "strong-detection":
        result = ex.run_strong_detection(cfg)
        extra = {"lambda_c": result.lambda_c}
    else:
        result = ex.run_overlap(cfg, GibbsParams() if args.gibbs else None)
        extra = {"lambda_c": result.lambda_c}
    summary = {
        "command": args.command,
        "config": cfg.to_dict(),
        "input_hash": cfg.content_hash(),
        "checks": {str(k): v for k, v in result.checks.items()},
        **extra,
    }
    _emit(result.to_csv(), args.out, summary)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (SolverError, ConvergenceError, DerivativeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except (DomainError, PriorError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
