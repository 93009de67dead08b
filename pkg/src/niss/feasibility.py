"""Membership tests for distributions reachable with one shared fair bit.

Binary outputs have an exact characterisation: with a = Q_U(1), b = Q_V(1) and
agreement mass s = Q(-1,-1) + Q(1,1), the target is reachable iff
|s - zeta(a, b)| <= 2 beta(a, b). For larger alphabets only necessary
conditions are available: the diagonal-product identity and rank <= 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quantum import JointDistribution, Povm, bell_joint_distribution

TOL = 1e-10
CONDITION_TOL = 1e-9
RANK_RTOL = 1e-8
MAX_ALPHABET = 8


class OutOfRangeError(ValueError):
    pass


def zeta_beta(a, b):
    """Centre and half-width parameters of the binary region.

    Works elementwise on arrays as well as on scalars.
    """
    a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any((a_arr < -TOL) | (a_arr > 1 + TOL) | (b_arr < -TOL) | (b_arr > 1 + TOL)):
        raise OutOfRangeError(f"marginals must lie in [0, 1], got a={a}, b={b}")
    zeta = 2 * a_arr * b_arr - a_arr - b_arr + 1
    beta = np.minimum(a_arr, 1 - a_arr) * np.minimum(b_arr, 1 - b_arr)
    if zeta.ndim == 0:
        return float(zeta), float(beta)
    return zeta, beta


def region_margin(a, b, s):
    """2 beta - |s - zeta|; non-negative exactly on the binary region."""
    zeta, beta = zeta_beta(a, b)
    return 2 * np.asarray(beta) - np.abs(np.asarray(s, dtype=float) - zeta)


@dataclass(frozen=True, eq=False)
class BinaryTarget:
    """A joint pmf on {-1, 1} x {-1, 1}."""

    q: JointDistribution

    def __post_init__(self):
        if set(self.q.row_alphabet) != {-1, 1} or set(self.q.col_alphabet) != {-1, 1}:
            raise ValueError("binary targets need alphabets {-1, 1} on both sides")

    @classmethod
    def from_pmf(cls, q_mm: float, q_mp: float, q_pm: float, q_pp: float) -> BinaryTarget:
        """Build from Q(-1,-1), Q(-1,1), Q(1,-1), Q(1,1)."""
        return cls(JointDistribution((-1, 1), (-1, 1), [[q_mm, q_mp], [q_pm, q_pp]]))

    @classmethod
    def from_abs(cls, a: float, b: float, s: float) -> BinaryTarget:
        """Build from the marginals a, b and agreement mass s."""
        q_pp = (s + a + b - 1) / 2
        return cls.from_pmf(s - q_pp, b - q_pp, a - q_pp, q_pp)

    @classmethod
    def from_joint(cls, j: JointDistribution) -> BinaryTarget:
        """Accept any 2x2 joint; labels other than ±1 map first -> +1, second -> -1."""
        if j.shape != (2, 2):
            raise ValueError(f"binary target needs a 2x2 pmf, got {j.shape}")

        def order(alpha):
            if set(alpha) == {-1, 1}:
                return [alpha.index(-1), alpha.index(1)]
            return [1, 0]

        pmf = j.pmf[np.ix_(order(j.row_alphabet), order(j.col_alphabet))]
        return cls(JointDistribution((-1, 1), (-1, 1), pmf))

    def p(self, u: int, v: int) -> float:
        return self.q.prob(u, v)

    @property
    def a(self) -> float:
        return self.p(1, -1) + self.p(1, 1)

    @property
    def b(self) -> float:
        return self.p(-1, 1) + self.p(1, 1)

    @property
    def s(self) -> float:
        return self.p(-1, -1) + self.p(1, 1)

    @property
    def moments(self) -> tuple[float, float, float]:
        """(E[U], E[V], E[UV]) in ±1 encoding."""
        return 2 * self.a - 1, 2 * self.b - 1, 2 * self.s - 1

    def to_json(self) -> dict:
        return self.q.to_json()


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    margin: float
    zeta: float
    beta: float
    a: float
    b: float
    s: float

    def to_json(self) -> dict:
        return {
            "feasible": self.feasible,
            "margin": self.margin,
            "zeta": self.zeta,
            "beta": self.beta,
            "a": self.a,
            "b": self.b,
            "s": self.s,
        }


def check_binary_cr_feasible(t: BinaryTarget, tol: float = TOL) -> FeasibilityVerdict:
    a, b, s = t.a, t.b, t.s
    zeta, beta = zeta_beta(a, b)
    margin = 2 * beta - abs(s - zeta)
    return FeasibilityVerdict(margin >= -tol, margin, zeta, beta, a, b, s)


def _jacobi_eigvalsh(m: np.ndarray, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a small real symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(m, dtype=float)
    n = a.shape[0]
    scale = max(float(np.max(np.abs(a))), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1)) if theta != 0 else 1.0
                c = 1 / np.sqrt(t * t + 1)
                sn = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q], rot[q, p] = sn, -sn
                a = rot.T @ a @ rot
    return np.diag(a).copy()


def singular_values(mat) -> np.ndarray:
    """Descending singular values via the Gram matrix's Jacobi eigenvalues."""
    mat = np.asarray(mat, dtype=float)
    if max(mat.shape) > MAX_ALPHABET:
        raise ValueError(f"alphabets are limited to {MAX_ALPHABET} symbols per side")
    gram = mat.T @ mat if mat.shape[0] >= mat.shape[1] else mat @ mat.T
    ev = np.clip(_jacobi_eigvalsh(gram), 0.0, None)
    return np.sort(np.sqrt(ev))[::-1]


def rank_certificate(q: JointDistribution, rtol: float = RANK_RTOL) -> tuple[int, list[float]]:
    sv = singular_values(q.pmf)
    rank = int(np.sum(sv > rtol * sv[0])) if sv[0] > 0 else 0
    return rank, [float(v) for v in sv]


@dataclass(frozen=True)
class ConditionReport:
    labels: tuple
    residuals: dict
    max_abs_residual: float
    rank_estimate: int
    singular_values: tuple[float, ...]
    tol: float = CONDITION_TOL

    @property
    def passed(self) -> bool:
        return self.max_abs_residual <= self.tol

    def residual(self, i, j) -> float:
        return self.residuals[(i, j)]

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "labels": list(self.labels),
            "residuals": [[i, j, r] for (i, j), r in self.residuals.items()],
            "max_abs_residual": self.max_abs_residual,
            "rank_estimate": self.rank_estimate,
            "singular_values": list(self.singular_values),
        }


def check_diagonal_product_condition(q: JointDistribution, tol: float = CONDITION_TOL) -> ConditionReport:
    """Residuals of the identity every single-shared-bit mixture obeys.

    For labels i, j present on both sides, with C(u, v) = Q(u, v) - Q_U(u) Q_V(v):
    residual(i, j) = C(i, i) C(j, j) - C(i, j) C(j, i).
    """
    qu, qv = q.marginals()
    cov = q.pmf - np.outer(qu, qv)
    labels = tuple(lab for lab in q.row_alphabet if lab in q.col_alphabet)
    r = {lab: q.row_alphabet.index(lab) for lab in labels}
    c = {lab: q.col_alphabet.index(lab) for lab in labels}
    residuals = {}
    for i in labels:
        for j in labels:
            residuals[(i, j)] = float(cov[r[i], c[i]] * cov[r[j], c[j]] - cov[r[i], c[j]] * cov[r[j], c[i]])
    max_abs = max((abs(v) for v in residuals.values()), default=0.0)
    rank, sv = rank_certificate(q)
    return ConditionReport(labels, residuals, max_abs, rank, tuple(sv), tol)


@dataclass(frozen=True)
class AdvantageReport:
    advantage: bool
    joint: JointDistribution
    binary_verdict: FeasibilityVerdict | None = None
    condition: ConditionReport | None = None

    @property
    def rank(self) -> int | None:
        return None if self.condition is None else self.condition.rank_estimate

    @property
    def condition_violated(self) -> bool:
        return self.condition is not None and not self.condition.passed

    def summary(self) -> str:
        if self.binary_verdict is not None:
            return f"advantage: {str(self.advantage).lower()}, binary outputs, region margin {self.binary_verdict.margin:.3g}"
        cond = "condition violated" if self.condition_violated else "condition satisfied"
        return f"advantage: {str(self.advantage).lower()}, rank {self.rank}, {cond}"

    def to_json(self) -> dict:
        out = {"advantage": self.advantage, "summary": self.summary(), "joint": self.joint.to_json()}
        if self.binary_verdict is not None:
            out["binary_verdict"] = self.binary_verdict.to_json()
        if self.condition is not None:
            out["condition"] = self.condition.to_json()
            out["rank"] = self.rank
            out["condition_violated"] = self.condition_violated
        return out


def certify_advantage(m1: Povm, m2: Povm, tol: float = TOL, condition_tol: float = CONDITION_TOL) -> AdvantageReport:
    """Witness that the Bell statistics of (m1, m2) cannot come from one shared bit.

    Binary pairs never show an advantage; they are run through the exact
    binary region as a consistency check. Otherwise a violated diagonal-product
    identity or a rank of 3 or more is the certificate (both assume only local
    randomness besides the shared resource).
    """
    joint = bell_joint_distribution(m1, m2, tol)
    if len(m1) == 2 and len(m2) == 2:
        verdict = check_binary_cr_feasible(BinaryTarget.from_joint(joint), tol)
        return AdvantageReport(not verdict.feasible, joint, binary_verdict=verdict)
    cond = check_diagonal_product_condition(joint, condition_tol)
    return AdvantageReport(not cond.passed or cond.rank_estimate >= 3, joint, condition=cond)
