"""Binary memoryless sources on {-1, 1}.

Realizations of length ``d`` are encoded as ``d``-bit integers: bit ``i - 1``
holds coordinate ``i`` and a set bit means ``+1``. Every table, coefficient
array and per-realization mapping in the package uses this encoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_DIM = 16


class InvalidSourceError(ValueError):
    """Raised for degenerate or malformed source distributions."""


def check_dim(d: int) -> int:
    if not isinstance(d, (int, np.integer)) or d < 0 or d > MAX_DIM:
        raise ValueError(f"dimension must be an integer in [0, {MAX_DIM}], got {d!r}")
    return int(d)


def points(d: int) -> np.ndarray:
    """All of {-1, 1}^d as an int array of shape (2**d, d), row k = realization k."""
    d = check_dim(d)
    keys = np.arange(1 << d)[:, None]
    bits = (keys >> np.arange(d)[None, :]) & 1
    return (2 * bits - 1).astype(np.int64)


def encode(x) -> int:
    """Realization key of a ±1 sequence (coordinate 1 first)."""
    key = 0
    for i, xi in enumerate(x):
        if xi == 1:
            key |= 1 << i
        elif xi != -1:
            raise ValueError(f"coordinates must be ±1, got {xi!r}")
    return key


def decode(key: int, d: int) -> tuple[int, ...]:
    return tuple(1 if (key >> i) & 1 else -1 for i in range(d))


@dataclass(frozen=True)
class BiasedBitSource:
    """IID bit with P(+1) = p."""

    p: float

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise InvalidSourceError(f"source must be non-degenerate, got p={self.p!r}")

    @property
    def mu(self) -> float:
        return 2.0 * self.p - 1.0

    @property
    def sigma(self) -> float:
        return 2.0 * math.sqrt(self.p * (1.0 - self.p))

    def pmf(self, d: int) -> np.ndarray:
        """Product probabilities of all 2**d realizations."""
        ones = points(d) == 1
        return np.prod(np.where(ones, self.p, 1.0 - self.p), axis=1)


@dataclass(frozen=True, eq=False)
class BivariateBinarySource:
    """Joint pmf P_{X,Y} on {-1,1}^2.

    ``pmf[i, j]`` is P(X = 2i - 1, Y = 2j - 1), i.e. index 0 is -1.
    """

    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.shape != (2, 2):
            raise InvalidSourceError(f"source pmf must be 2x2, got shape {pmf.shape}")
        if np.any(pmf < -1e-12) or abs(pmf.sum() - 1.0) > 1e-10:
            raise InvalidSourceError("source pmf must be non-negative and sum to 1")
        pmf = np.clip(pmf, 0.0, None)
        pmf = pmf / pmf.sum()
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)

    @classmethod
    def independent(cls, px: float, py: float) -> BivariateBinarySource:
        return cls(np.outer([1 - px, px], [1 - py, py]))

    @classmethod
    def from_marginals_and_rho(cls, px: float, py: float, rho: float) -> BivariateBinarySource:
        """Source with P(X=1)=px, P(Y=1)=py and Pearson correlation rho."""
        sx, sy = 2 * math.sqrt(px * (1 - px)), 2 * math.sqrt(py * (1 - py))
        # E[XY] = mu_x mu_y + rho sx sy and P(1,1) = (1 + mu_x + mu_y + E[XY]) / 4
        mx, my = 2 * px - 1, 2 * py - 1
        p11 = (1 + mx + my + mx * my + rho * sx * sy) / 4
        pmf = np.array([[1 - px - py + p11, py - p11], [px - p11, p11]])
        return cls(pmf)

    @property
    def px(self) -> float:
        return float(self.pmf[1].sum())

    @property
    def py(self) -> float:
        return float(self.pmf[:, 1].sum())

    @property
    def mu_x(self) -> float:
        return 2 * self.px - 1

    @property
    def mu_y(self) -> float:
        return 2 * self.py - 1

    @property
    def sigma_x(self) -> float:
        return 2 * math.sqrt(self.px * (1 - self.px))

    @property
    def sigma_y(self) -> float:
        return 2 * math.sqrt(self.py * (1 - self.py))

    @property
    def pearson_rho(self) -> float:
        sx, sy = self.sigma_x, self.sigma_y
        if sx == 0.0 or sy == 0.0:
            raise InvalidSourceError("Pearson correlation undefined for a degenerate marginal")
        vals = np.array([-1.0, 1.0])
        cov = np.sum(self.pmf * np.outer(vals - self.mu_x, vals - self.mu_y))
        return float(np.clip(cov / (sx * sy), -1.0, 1.0))

    def x_source(self) -> BiasedBitSource:
        return BiasedBitSource(self.px)

    def y_source(self) -> BiasedBitSource:
        return BiasedBitSource(self.py)

    def block_pmf(self, d: int) -> np.ndarray:
        """P_{X^d,Y^d} as a (2**d, 2**d) array indexed by realization keys."""
        d = check_dim(d)
        out = np.ones((1, 1))
        # Build from the most significant coordinate down so key bits line up.
        for _ in range(d):
            out = np.kron(self.pmf, out)
        return out

    def to_dict(self) -> dict:
        return {"pmf": self.pmf.tolist()}

    def __eq__(self, other):
        return isinstance(other, BivariateBinarySource) and np.array_equal(self.pmf, other.pmf)

    def __hash__(self):
        return hash(self.pmf.tobytes())
