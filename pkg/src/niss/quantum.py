"""Qubit POVMs and their outcome statistics on the Bell state |Phi+>.

For local operators A and B, <Phi+| A (x) B |Phi+> = (1/2) sum_jk A[j,k] B[j,k],
the row-major Vec inner product taken without conjugation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

TOL = 1e-10
NEG_CLAMP = 1e-12


class MalformedPovmError(ValueError):
    """Structural problem: wrong shapes, no outcomes, label/operator mismatch."""


class InvalidPovmError(ValueError):
    """A well-formed POVM that fails Hermiticity, positivity or completeness."""


class NumericInconsistencyError(ArithmeticError):
    pass


class InvalidDistributionError(ValueError):
    pass


def eigvals_2x2(op) -> tuple[float, float]:
    """Closed-form eigenvalues (ascending) of a 2x2 Hermitian matrix."""
    op = np.asarray(op)
    a, d = op[0, 0].real, op[1, 1].real
    b = op[0, 1]
    half_tr = (a + d) / 2
    disc = math.sqrt(((a - d) / 2) ** 2 + abs(b) ** 2)
    return half_tr - disc, half_tr + disc


def _as_operator(op) -> np.ndarray:
    try:
        arr = np.asarray(op, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise MalformedPovmError(f"operator is not numeric: {exc}") from None
    if arr.shape != (2, 2):
        raise MalformedPovmError(f"operators must be 2x2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise MalformedPovmError("operator has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Povm:
    outcomes: tuple
    operators: tuple

    def __post_init__(self):
        outcomes = tuple(self.outcomes)
        ops = tuple(_as_operator(op) for op in self.operators)
        if not outcomes:
            raise MalformedPovmError("POVM has no outcomes")
        if len(outcomes) != len(ops):
            raise MalformedPovmError(f"{len(outcomes)} outcome labels but {len(ops)} operators")
        if len(set(outcomes)) != len(outcomes):
            raise MalformedPovmError(f"duplicate outcome labels: {outcomes}")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "operators", ops)

    def __len__(self):
        return len(self.outcomes)

    def __getitem__(self, label) -> np.ndarray:
        return self.operators[self.outcomes.index(label)]

    @property
    def stacked(self) -> np.ndarray:
        return np.stack(self.operators)

    def to_json(self) -> dict:
        return {
            "outcomes": list(self.outcomes),
            "operators": [[[[float(v.real), float(v.imag)] for v in row] for row in op] for op in self.operators],
        }


@dataclass(frozen=True)
class PovmReport:
    hermiticity_residuals: tuple[float, ...]
    min_eigenvalues: tuple[float, ...]
    max_eigenvalues: tuple[float, ...]
    completeness_residual: float
    tol: float = TOL
    problems: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return not self.problems

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "hermiticity_residuals": list(self.hermiticity_residuals),
            "min_eigenvalues": list(self.min_eigenvalues),
            "max_eigenvalues": list(self.max_eigenvalues),
            "completeness_residual": self.completeness_residual,
            "problems": list(self.problems),
        }


def validate_povm(m: Povm, tol: float = TOL) -> PovmReport:
    if len(m) < 2:
        raise MalformedPovmError("a POVM needs at least two outcomes")
    herm, lo, hi, problems = [], [], [], []
    for label, op in zip(m.outcomes, m.operators):
        h = float(np.max(np.abs(op - op.conj().T)))
        herm.append(h)
        e_lo, e_hi = eigvals_2x2((op + op.conj().T) / 2)
        lo.append(e_lo)
        hi.append(e_hi)
        if h > tol:
            problems.append(f"operator {label!r}: hermiticity residual {h:.3g}")
        if e_lo < -tol:
            problems.append(f"operator {label!r}: minimum eigenvalue {e_lo:.3g}")
        if e_hi > 1 + tol:
            problems.append(f"operator {label!r}: maximum eigenvalue {e_hi:.3g}")
    completeness = float(np.max(np.abs(sum(m.operators) - np.eye(2))))
    if completeness > tol:
        problems.append(f"completeness residual {completeness:.3g}")
    return PovmReport(tuple(herm), tuple(lo), tuple(hi), completeness, tol, tuple(problems))


def _require_valid(m: Povm, tol: float) -> None:
    report = validate_povm(m, tol)
    if not report.passed:
        raise InvalidPovmError("; ".join(report.problems))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """pmf[i, j] = P(row = row_alphabet[i], col = col_alphabet[j])."""

    row_alphabet: tuple
    col_alphabet: tuple
    pmf: np.ndarray

    def __post_init__(self):
        rows, cols = tuple(self.row_alphabet), tuple(self.col_alphabet)
        pmf = np.array(self.pmf, dtype=float)
        if pmf.shape != (len(rows), len(cols)) or pmf.size == 0:
            raise InvalidDistributionError(f"pmf shape {pmf.shape} does not match alphabets {len(rows)}x{len(cols)}")
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise InvalidDistributionError("alphabets must not repeat labels")
        if not np.all(np.isfinite(pmf)):
            raise InvalidDistributionError("pmf has non-finite entries")
        if np.any(pmf < -NEG_CLAMP):
            raise InvalidDistributionError(f"pmf has a negative entry {pmf.min():.3g}")
        if abs(pmf.sum() - 1.0) > TOL:
            raise InvalidDistributionError(f"pmf sums to {pmf.sum():.12g}, not 1")
        if np.any(pmf < 0):
            pmf = np.clip(pmf, 0.0, None)
            pmf /= pmf.sum()
        pmf.setflags(write=False)
        object.__setattr__(self, "row_alphabet", rows)
        object.__setattr__(self, "col_alphabet", cols)
        object.__setattr__(self, "pmf", pmf)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pmf.shape

    def prob(self, u, v) -> float:
        return float(self.pmf[self.row_alphabet.index(u), self.col_alphabet.index(v)])

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.pmf.sum(axis=1), self.pmf.sum(axis=0)

    def transpose(self) -> JointDistribution:
        return JointDistribution(self.col_alphabet, self.row_alphabet, self.pmf.T)

    def to_json(self) -> dict:
        return {
            "row_alphabet": list(self.row_alphabet),
            "col_alphabet": list(self.col_alphabet),
            "pmf": self.pmf.tolist(),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> JointDistribution:
        try:
            pmf = obj["pmf"]
            n_rows = len(pmf)
            n_cols = len(pmf[0]) if n_rows else 0
            rows = obj.get("row_alphabet", list(range(1, n_rows + 1)))
            cols = obj.get("col_alphabet", list(range(1, n_cols + 1)))
        except (KeyError, TypeError, IndexError) as exc:
            raise InvalidDistributionError(f"malformed distribution: {exc!r}") from None
        return cls(tuple(rows), tuple(cols), pmf)


def marginals(j: JointDistribution) -> tuple[np.ndarray, np.ndarray]:
    return j.marginals()


def bell_joint_distribution(m1: Povm, m2: Povm, tol: float = TOL) -> JointDistribution:
    """Outcome statistics of Alice measuring m1 and Bob m2 on |Phi+>."""
    _require_valid(m1, tol)
    _require_valid(m2, tol)
    vals = 0.5 * np.einsum("ajk,bjk->ab", m1.stacked, m2.stacked)
    residue = float(np.max(np.abs(vals.imag)))
    if residue > tol:
        raise NumericInconsistencyError(f"imaginary residue {residue:.3g} in Bell probabilities")
    pmf = vals.real
    if np.any(pmf < -NEG_CLAMP):
        raise NumericInconsistencyError(f"negative Bell probability {pmf.min():.3g}")
    pmf = np.clip(pmf, 0.0, None)
    pmf = pmf / pmf.sum()
    return JointDistribution(m1.outcomes, m2.outcomes, pmf)


def coarse_grain(m: Povm, labeling: Mapping[Hashable, int]) -> Povm:
    """Merge outcomes into a binary POVM with labels +1 / -1.

    Labels appear in order of first use over ``m.outcomes``; a label that no
    outcome maps to gets the zero operator and is appended last.
    """
    missing = [z for z in m.outcomes if z not in labeling]
    if missing:
        raise ValueError(f"labeling does not cover outcomes {missing}")
    order: list[int] = []
    for z in m.outcomes:
        lab = labeling[z]
        if lab not in (1, -1):
            raise ValueError(f"binary labels must be +1 or -1, got {lab!r}")
        if lab not in order:
            order.append(lab)
    order += [lab for lab in (1, -1) if lab not in order]
    ops = []
    for lab in order:
        acc = np.zeros((2, 2), dtype=complex)
        for z, op in zip(m.outcomes, m.operators):
            if labeling[z] == lab:
                acc = acc + op
        ops.append(acc)
    return Povm(tuple(order), tuple(ops))


def trine_povm() -> Povm:
    """Symmetric three-outcome qubit POVM with outcomes 1, 2, 3."""
    r = math.sqrt(3) / 4
    ops = [
        np.array([[0.0, 0.0], [0.0, 1.0]]),
        np.array([[0.75, r], [r, 0.25]]),
        np.array([[0.75, -r], [-r, 0.25]]),
    ]
    return Povm((1, 2, 3), tuple((2.0 / 3.0) * op for op in ops))


def computational_povm(labels: Sequence = (1, -1)) -> Povm:
    """Projective measurement {diag(1,0), diag(0,1)}."""
    return Povm(tuple(labels), (np.diag([1.0, 0.0]), np.diag([0.0, 1.0])))


def _random_hermitian(rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return (g + g.conj().T) / 2


def random_binary_povm(rng: np.random.Generator, labels: Sequence = (1, -1), real: bool = False) -> Povm:
    """Lambda_1 with spectrum clipped to [0, 1]; Lambda_2 = I - Lambda_1."""
    h = _random_hermitian(rng)
    if real:
        h = h.real.astype(complex)
    w, v = np.linalg.eigh(h)
    # Spread eigenvalues over [0, 1] so both clipped and interior spectra occur.
    w = np.clip(0.5 + 0.6 * w / max(np.max(np.abs(w)), 1e-12) * rng.uniform(0.2, 1.0), 0.0, 1.0)
    op = (v * w) @ v.conj().T
    op = (op + op.conj().T) / 2
    return Povm(tuple(labels), (op, np.eye(2) - op))


def random_povm(rng: np.random.Generator, n: int, labels: Sequence | None = None) -> Povm:
    """n random PSD operators normalised by S^{-1/2} (.) S^{-1/2}, S their sum."""
    if n < 2:
        raise ValueError("need at least two outcomes")
    raw = []
    for _ in range(n):
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        raw.append(g @ g.conj().T)
    total = sum(raw)
    w, v = np.linalg.eigh(total)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    ops = []
    for op in raw:
        op = inv_sqrt @ op @ inv_sqrt
        ops.append((op + op.conj().T) / 2)
    # Absorb rounding so completeness holds to machine precision.
    ops[-1] = np.eye(2) - sum(ops[:-1])
    return Povm(tuple(labels) if labels is not None else tuple(range(1, n + 1)), tuple(ops))
