"""Spiked Wigner observations and their binary file format."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..prior import Prior

# n, sigma flag (0: diagonal discarded, 1: kept), lambda_true, seed
_HEADER = struct.Struct("<qqdQ")
_F64 = np.dtype("<f8")


@dataclass(frozen=True)
class Observation:
    """Upper triangle ``Y_ij, i < j`` in row-major order, plus the optional diagonal.

    ``sigma = inf`` means the diagonal is discarded and ``diag`` is None.
    """

    n: int
    upper: np.ndarray
    diag: np.ndarray | None = None
    sigma: float = math.inf
    lambda_true: float = 0.0
    seed: int = 0

    def __post_init__(self):
        upper = np.asarray(self.upper, dtype=float)
        if upper.shape != (self.n * (self.n - 1) // 2,):
            raise ValueError(f"upper must have n(n-1)/2 = {self.n * (self.n - 1) // 2} entries")
        upper.setflags(write=False)
        object.__setattr__(self, "upper", upper)
        if math.isinf(self.sigma):
            if self.diag is not None:
                raise ValueError("diag must be absent when sigma is infinite")
        else:
            if not self.sigma > 0:
                raise ValueError("sigma must be positive")
            diag = np.asarray(self.diag, dtype=float)
            if diag.shape != (self.n,):
                raise ValueError(f"diag must have n = {self.n} entries when sigma is finite")
            diag.setflags(write=False)
            object.__setattr__(self, "diag", diag)

    @property
    def has_diag(self) -> bool:
        return self.diag is not None

    def matrix(self) -> np.ndarray:
        """Dense symmetric matrix; the diagonal is zero when discarded."""
        Y = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n, 1)
        Y[iu] = self.upper
        Y = Y + Y.T
        if self.has_diag:
            Y[np.diag_indices(self.n)] = self.diag
        return Y

    def top_eigenvalue(self) -> float:
        """Largest eigenvalue of ``Y / sqrt(n)`` (the bulk edge is 2)."""
        return float(np.linalg.eigvalsh(self.matrix() / np.sqrt(self.n))[-1])

    def to_bytes(self) -> bytes:
        flag = 0 if math.isinf(self.sigma) else 1
        parts = [
            _HEADER.pack(self.n, flag, float(self.lambda_true), int(self.seed) % 2**64),
            self.upper.astype(_F64).tobytes(),
        ]
        if flag:
            parts.append(struct.pack("<d", self.sigma))
            parts.append(self.diag.astype(_F64).tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Observation":
        n, flag, lam, seed = _HEADER.unpack_from(data, 0)
        off = _HEADER.size
        m = n * (n - 1) // 2
        upper = np.frombuffer(data, dtype=_F64, count=m, offset=off).astype(float)
        off += 8 * m
        sigma, diag = math.inf, None
        if flag:
            (sigma,) = struct.unpack_from("<d", data, off)
            off += 8
            diag = np.frombuffer(data, dtype=_F64, count=n, offset=off).astype(float)
        return cls(n=n, upper=upper, diag=diag, sigma=sigma, lambda_true=lam, seed=seed)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Observation":
        return cls.from_bytes(Path(path).read_bytes())


def sample_observation(
    prior: Prior,
    n: int,
    lam: float,
    sigma: float = math.inf,
    seed: int = 0,
    rng: np.random.Generator | None = None,
):
    """Draw ``Y = sqrt(lam/n) x* x*^T + W``.

    Off-diagonal noise is N(0, 1) and diagonal noise N(0, sigma^2); the
    diagonal is only generated when ``sigma`` is finite. Returns
    ``(observation, spike)`` with ``spike = None`` under the null ``lam = 0``.
    The draw is a deterministic function of ``seed`` unless ``rng`` is given.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if rng is None:
        rng = np.random.default_rng(seed)
    spike = prior.sample(rng, n) if lam > 0 else None
    iu, ju = np.triu_indices(n, 1)
    upper = rng.standard_normal(iu.size)
    diag = None
    if not math.isinf(sigma):
        diag = sigma * rng.standard_normal(n)
    if spike is not None:
        c = math.sqrt(lam / n)
        upper = upper + c * spike[iu] * spike[ju]
        if diag is not None:
            diag = diag + c * spike**2
    obs = Observation(n=n, upper=upper, diag=diag, sigma=sigma, lambda_true=lam, seed=seed)
    return obs, spike
