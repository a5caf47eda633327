"""Discrete spike priors on a bounded support."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

NORMALIZATION_TOL = 1e-12


class PriorError(ValueError):
    pass


@dataclass(frozen=True)
class Prior:
    """Finite discrete probability measure ``sum_k p_k delta_{a_k}``.

    Instances are immutable; ``atoms`` and ``weights`` are read-only arrays.
    """

    atoms: np.ndarray
    weights: np.ndarray
    support_radius: float = field(init=False)
    centered: bool = field(init=False)
    unit_variance: bool = field(init=False)

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        weights = np.array(self.weights, dtype=float)
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "support_radius", float(np.max(np.abs(atoms))))
        m1 = float(np.dot(weights, atoms))
        m2 = float(np.dot(weights, atoms**2))
        object.__setattr__(self, "centered", abs(m1) <= NORMALIZATION_TOL)
        object.__setattr__(self, "unit_variance", abs(m2 - 1.0) <= NORMALIZATION_TOL)

    def __len__(self):
        return len(self.atoms)

    def moment(self, k: int) -> float:
        return moment(self, k)

    @property
    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        idx = rng.choice(len(self.atoms), size=size, p=self.weights)
        return self.atoms[idx]

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def __eq__(self, other):
        if not isinstance(other, Prior):
            return NotImplemented
        return np.array_equal(self.atoms, other.atoms) and np.array_equal(
            self.weights, other.weights
        )

    def __hash__(self):
        return hash((self.atoms.tobytes(), self.weights.tobytes()))


def make_discrete_prior(atoms: Sequence[float], weights: Sequence[float]) -> Prior:
    """Build a normalized :class:`Prior` from atoms and (unnormalized) weights.

    Raises:
        PriorError: on length mismatch, empty input, negative or non-finite
            weights, zero total mass, non-finite or duplicate atoms.
    """
    atoms = np.asarray(atoms, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if atoms.size == 0 or atoms.size != weights.size:
        raise PriorError(
            f"atoms and weights must have the same nonzero length, got {atoms.size} and {weights.size}"
        )
    if not np.all(np.isfinite(atoms)):
        raise PriorError("atoms must be finite (bounded support)")
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise PriorError("weights must be finite and nonnegative")
    total = weights.sum()
    if total <= 0:
        raise PriorError("weights have zero total mass")
    if np.unique(atoms).size != atoms.size:
        raise PriorError("atoms must be distinct")
    return Prior(atoms, weights / total)


def sparse_rademacher(rho: float) -> Prior:
    """Three-point prior ``(rho/2) d_{-1/sqrt(rho)} + (1-rho) d_0 + (rho/2) d_{1/sqrt(rho)}``.

    Centered with unit variance for every ``rho``; ``rho = 1`` drops the zero atom.
    """
    if not 0 < rho <= 1:
        raise PriorError(f"rho must lie in (0, 1], got {rho}")
    if rho == 1:
        return make_discrete_prior([-1.0, 1.0], [0.5, 0.5])
    a = 1.0 / np.sqrt(rho)
    return make_discrete_prior([-a, 0.0, a], [rho / 2, 1 - rho, rho / 2])


def rademacher() -> Prior:
    return sparse_rademacher(1.0)


def moment(prior: Prior, k: int) -> float:
    """Exact ``E[X^k]`` as a finite atom sum."""
    if k < 0:
        raise PriorError(f"moment order must be nonnegative, got {k}")
    return float(np.dot(prior.weights, prior.atoms**k))


def standardize(prior: Prior) -> Prior:
    """Shift and rescale a prior to mean zero and unit variance."""
    m1 = moment(prior, 1)
    var = moment(prior, 2) - m1**2
    if var <= 1e-300:
        raise PriorError("cannot standardize a degenerate prior")
    atoms = (prior.atoms - m1) / np.sqrt(var)
    # remove rounding residue so that the centered flag is exact
    atoms = atoms - float(np.dot(prior.weights, atoms))
    return Prior(atoms, prior.weights)


def discretize_density(density: Callable[[np.ndarray], np.ndarray], grid: Sequence[float]) -> Prior:
    """Discretize a bounded-support density onto a caller-supplied grid."""
    grid = np.asarray(grid, dtype=float)
    return make_discrete_prior(grid, np.asarray(density(grid), dtype=float))


def prior_from_spec(spec) -> Prior:
    """Parse a prior from a dict, a JSON string, or a path to a JSON file.

    Besides ``{"atoms": [...], "weights": [...]}`` the shorthands
    ``"rademacher"`` and ``"sparse:<rho>"`` are accepted.
    """
    if isinstance(spec, Prior):
        return spec
    if isinstance(spec, str):
        text = spec.strip()
        if text == "rademacher":
            return rademacher()
        try:
            if text.startswith("sparse:"):
                return sparse_rademacher(float(text.split(":", 1)[1]))
            if not text.startswith("{"):
                with open(text) as fh:
                    text = fh.read()
            spec = json.loads(text)
        except (OSError, ValueError) as exc:
            if isinstance(exc, PriorError):
                raise
            raise PriorError(f"cannot read prior spec {spec!r}: {exc}") from exc
    try:
        return make_discrete_prior(spec["atoms"], spec["weights"])
    except (KeyError, TypeError) as exc:
        raise PriorError(f"invalid prior spec: {spec!r}") from exc
