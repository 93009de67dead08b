"""Constructive schemes driven by one shared fair bit Z.

An affine scheme outputs U = +1 with probability (1 + f0 + f1 Z) / 2 and V = +1
with probability (1 + g0 + g1 Z) / 2, where f0 = 2a - 1 and g0 = 2b - 1 are
fixed by the marginals. Then E[UV] = f0 g0 + f1 g1, so matching a target only
needs a product f1 g1 inside the box |f1| <= 2 min(a, 1-a), |g1| <= 2 min(b, 1-b).

The patched scheme handles correlated inputs (x^d, y^d): per-realization
affine pairs are dominated by coefficient maxima f+, g+ and a sign-flipped g-,
and Bob mixes g+ / g- with a private bit T ~ Bernoulli(p_ts) so that the
averaged correlation lands exactly on the target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .feasibility import BinaryTarget, check_binary_cr_feasible, zeta_beta
from .quantum import JointDistribution
from .sources import BivariateBinarySource, check_dim

TOL = 1e-10
ZERO_BOX = 1e-12
PTS_GUARD = 1e-12


class InfeasibleTargetError(ValueError):
    """The requested correlation is outside what one shared bit can produce."""


class SchemeInconsistencyError(ValueError):
    pass


class NoSignalingError(ValueError):
    """A party's marginal depends on the other party's input."""


def solve_pair_product(F: float, G: float, c: float, tol: float = TOL) -> tuple[float, float]:
    """Pick (f1, g1) with f1 g1 = c, |f1| <= F, |g1| <= G.

    Alice takes the whole box (f1 = F) and Bob carries the sign.
    """
    if F < 0 or G < 0:
        raise ValueError(f"box half-widths must be non-negative, got F={F}, G={G}")
    if abs(c) > F * G + tol:
        raise InfeasibleTargetError(f"|c|={abs(c):.6g} exceeds F*G={F * G:.6g}")
    if F <= ZERO_BOX:
        if abs(c) > tol:
            raise SchemeInconsistencyError(f"F is zero but c={c:.3g}")
        return 0.0, 0.0
    g1 = float(np.clip(c / F, -G, G))
    return float(F), g1


@dataclass(frozen=True)
class AffineScheme:
    a: float
    b: float
    f1: float
    g1: float

    def __post_init__(self):
        for name, m, k in (("f1", self.a, self.f1), ("g1", self.b, self.g1)):
            if abs(2 * m - 1) + abs(k) > 1 + TOL:
                raise ValueError(f"{name}={k} pushes the conditional outside [0, 1] for marginal {m}")

    @property
    def f0(self) -> float:
        return 2 * self.a - 1

    @property
    def g0(self) -> float:
        return 2 * self.b - 1

    def p_u_plus(self, z: int) -> float:
        return float(np.clip((1 + self.f0 + self.f1 * z) / 2, 0.0, 1.0))

    def p_v_plus(self, z: int) -> float:
        return float(np.clip((1 + self.g0 + self.g1 * z) / 2, 0.0, 1.0))

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b, "f1": self.f1, "g1": self.g1}

    @classmethod
    def from_json(cls, obj: Mapping) -> AffineScheme:
        return cls(float(obj["a"]), float(obj["b"]), float(obj["f1"]), float(obj["g1"]))


def _box(m: float) -> float:
    return 2 * min(m, 1 - m)


def synthesize_binary_scheme(t: BinaryTarget, tol: float = TOL) -> AffineScheme:
    a, b, s = t.a, t.b, t.s
    zeta, _ = zeta_beta(a, b)
    f1, g1 = solve_pair_product(_box(a), _box(b), 2 * (s - zeta), tol)
    return AffineScheme(a, b, f1, g1)


def evaluate_scheme_exact(sch: AffineScheme) -> JointDistribution:
    pmf = np.zeros((2, 2))
    for z in (-1, 1):
        pu = np.array([1 - sch.p_u_plus(z), sch.p_u_plus(z)])
        pv = np.array([1 - sch.p_v_plus(z), sch.p_v_plus(z)])
        pmf += 0.5 * np.outer(pu, pv)
    return JointDistribution((-1, 1), (-1, 1), pmf)


@dataclass(frozen=True, eq=False)
class RealizationTargets:
    """Per-realization binary targets P_{U_x, V_y} for inputs of length d.

    ``per_pair`` maps (x key, y key) to a BinaryTarget; keys follow the
    realization encoding in :mod:`niss.sources`.
    """

    d: int
    source: BivariateBinarySource
    per_pair: Mapping[tuple[int, int], BinaryTarget]

    def __post_init__(self):
        d = check_dim(self.d)
        n = 1 << d
        want = {(x, y) for x in range(n) for y in range(n)}
        if set(self.per_pair) != want:
            raise ValueError(f"per_pair must cover all {n * n} realization pairs for d={d}")
        object.__setattr__(self, "d", d)

    @property
    def size(self) -> int:
        return 1 << self.d

    def alice_means(self, tol: float = TOL) -> np.ndarray:
        """E[U_x] per x, checked to be independent of y."""
        out = np.empty(self.size)
        for x in range(self.size):
            vals = [self.per_pair[(x, y)].moments[0] for y in range(self.size)]
            if max(vals) - min(vals) > tol:
                raise NoSignalingError(f"Alice's mean for x={x} varies with y: {min(vals):.6g}..{max(vals):.6g}")
            out[x] = vals[0]
        return out

    def bob_means(self, tol: float = TOL) -> np.ndarray:
        out = np.empty(self.size)
        for y in range(self.size):
            vals = [self.per_pair[(x, y)].moments[1] for x in range(self.size)]
            if max(vals) - min(vals) > tol:
                raise NoSignalingError(f"Bob's mean for y={y} varies with x: {min(vals):.6g}..{max(vals):.6g}")
            out[y] = vals[0]
        return out

    def correlations(self) -> np.ndarray:
        """E[U_x V_y] as a (2**d, 2**d) array."""
        out = np.empty((self.size, self.size))
        for (x, y), t in self.per_pair.items():
            out[x, y] = t.moments[2]
        return out

    def weighted_moments(self) -> tuple[float, float, float]:
        """Input-averaged (E[U], E[V], E[UV]) the simulation must reproduce."""
        w = self.source.block_pmf(self.d)
        eu = float(w.sum(axis=1) @ self.alice_means())
        ev = float(w.sum(axis=0) @ self.bob_means())
        return eu, ev, float(np.sum(w * self.correlations()))

    def validate(self, tol: float = TOL) -> None:
        self.alice_means(tol)
        self.bob_means(tol)
        for key, t in self.per_pair.items():
            verdict = check_binary_cr_feasible(t, tol)
            if not verdict.feasible:
                raise InfeasibleTargetError(f"target for pair {key} is infeasible (margin {verdict.margin:.3g})")


@dataclass(frozen=True, eq=False)
class PatchedScheme:
    """Rows of f_plus / g_plus / g_minus are (constant, Z-coefficient) per realization key."""

    d: int
    f_plus: np.ndarray
    g_plus: np.ndarray
    g_minus: np.ndarray
    p_ts: float
    source: BivariateBinarySource
    rho_plus: float | None = None
    rho_minus: float | None = None
    rho_prime: float | None = None

    def __post_init__(self):
        d = check_dim(self.d)
        n = 1 << d
        for name in ("f_plus", "g_plus", "g_minus"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (n, 2):
                raise ValueError(f"{name} must have shape ({n}, 2), got {arr.shape}")
            if np.any(np.abs(arr[:, 0]) + np.abs(arr[:, 1]) > 1 + TOL):
                raise ValueError(f"{name} has an affine pair leaving [-1, 1]")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not np.allclose(self.g_minus[:, 1], -self.g_plus[:, 1], atol=0, rtol=0):
            raise ValueError("g_minus must be g_plus with the Z-coefficient negated")
        if not np.array_equal(self.g_minus[:, 0], self.g_plus[:, 0]):
            raise ValueError("g_minus and g_plus must share the constant term")
        if not (0.0 <= self.p_ts <= 1.0):
            raise ValueError(f"p_ts must lie in [0, 1], got {self.p_ts}")
        object.__setattr__(self, "d", d)

    def to_json(self) -> dict:
        out = {
            "d": self.d,
            "f_plus": self.f_plus.tolist(),
            "g_plus": self.g_plus.tolist(),
            "g_minus": self.g_minus.tolist(),
            "p_ts": self.p_ts,
            "source": self.source.pmf.tolist(),
        }
        for name in ("rho_plus", "rho_minus", "rho_prime"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out

    @classmethod
    def from_json(cls, obj: Mapping, source: BivariateBinarySource | None = None) -> PatchedScheme:
        if source is None:
            source = BivariateBinarySource(np.asarray(obj["source"], dtype=float))
        return cls(
            int(obj["d"]),
            np.asarray(obj["f_plus"], dtype=float),
            np.asarray(obj["g_plus"], dtype=float),
            np.asarray(obj["g_minus"], dtype=float),
            float(obj["p_ts"]),
            source,
            obj.get("rho_plus"),
            obj.get("rho_minus"),
            obj.get("rho_prime"),
        )


def split_coefficients(rt: RealizationTargets, tol: float = TOL) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-pair affine splits: (f0 per x, g0 per y, f1[x, y], g1[x, y])."""
    f0 = rt.alice_means(tol)
    g0 = rt.bob_means(tol)
    corr = rt.correlations()
    n = rt.size
    f1 = np.zeros((n, n))
    g1 = np.zeros((n, n))
    for x in range(n):
        F = _box((1 + f0[x]) / 2)
        for y in range(n):
            G = _box((1 + g0[y]) / 2)
            try:
                f1[x, y], g1[x, y] = solve_pair_product(F, G, corr[x, y] - f0[x] * g0[y], tol)
            except InfeasibleTargetError as exc:
                raise InfeasibleTargetError(f"pair (x={x}, y={y}): {exc}") from None
    return f0, g0, f1, g1


def synthesize_patched_scheme(rt: RealizationTargets, tol: float = TOL) -> PatchedScheme:
    f0, g0, f1, g1 = split_coefficients(rt, tol)
    f1_plus = np.max(np.abs(f1), axis=1)
    g1_plus = np.max(np.abs(g1), axis=0)
    w = rt.source.block_pmf(rt.d)
    base = np.outer(f0, g0)
    spread = np.outer(f1_plus, g1_plus)
    rho_plus = float(np.sum(w * (base + spread)))
    rho_minus = float(np.sum(w * (base - spread)))
    rho_prime = float(np.sum(w * rt.correlations()))
    if not (rho_minus - tol <= rho_prime <= rho_plus + tol):
        raise SchemeInconsistencyError(
            f"target correlation {rho_prime:.6g} not within [{rho_minus:.6g}, {rho_plus:.6g}]"
        )
    if rho_plus - rho_minus <= PTS_GUARD:
        p_ts = 1.0
    else:
        p_ts = float(np.clip((rho_prime - rho_minus) / (rho_plus - rho_minus), 0.0, 1.0))
    return PatchedScheme(
        rt.d,
        np.column_stack([f0, f1_plus]),
        np.column_stack([g0, g1_plus]),
        np.column_stack([g0, -g1_plus]),
        p_ts,
        rt.source,
        rho_plus,
        rho_minus,
        rho_prime,
    )


def evaluate_patched_exact(ps: PatchedScheme, p_xyd=None) -> tuple[float, float, float]:
    """Exact (E[U'], E[V'], E[U'V']) of the patched scheme.

    ``p_xyd`` is P_{X^d,Y^d} indexed by realization keys; it defaults to the
    IID extension of the scheme's source.
    """
    w = ps.source.block_pmf(ps.d) if p_xyd is None else np.asarray(p_xyd, dtype=float)
    n = 1 << ps.d
    if w.shape != (n, n):
        raise ValueError(f"input pmf must have shape ({n}, {n}), got {w.shape}")
    px, py = w.sum(axis=1), w.sum(axis=0)
    eu = float(px @ ps.f_plus[:, 0])
    ev = float(ps.p_ts * (py @ ps.g_plus[:, 0]) + (1 - ps.p_ts) * (py @ ps.g_minus[:, 0]))

    def rho(g):
        return float(np.sum(w * (np.outer(ps.f_plus[:, 0], g[:, 0]) + np.outer(ps.f_plus[:, 1], g[:, 1]))))

    return eu, ev, ps.p_ts * rho(ps.g_plus) + (1 - ps.p_ts) * rho(ps.g_minus)


def moments_to_binary_pmf(eu: float, ev: float, euv: float) -> JointDistribution:
    """The unique ±1 pmf with the given first and mixed moments."""
    pmf = np.empty((2, 2))
    for i, u in enumerate((-1, 1)):
        for j, v in enumerate((-1, 1)):
            pmf[i, j] = (1 + u * eu + v * ev + u * v * euv) / 4
    return JointDistribution((-1, 1), (-1, 1), pmf)
