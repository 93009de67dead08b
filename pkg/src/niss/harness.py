"""Monte Carlo execution of schemes and EA-to-CR verification pipelines.

Randomness: one 64-bit seed feeds ``numpy.random.SeedSequence``; its spawned
children drive independent PCG64 streams named source, z, alice, bob and t.
Alice and Bob never draw from the same stream.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .feasibility import BinaryTarget
from .quantum import JointDistribution, Povm, bell_joint_distribution, validate_povm, InvalidPovmError
from .sources import BivariateBinarySource, check_dim
from .synthesis import (
    AffineScheme,
    PatchedScheme,
    RealizationTargets,
    evaluate_patched_exact,
    evaluate_scheme_exact,
    moments_to_binary_pmf,
)

STREAMS = ("source", "z", "alice", "bob", "t")
GENERATOR = "numpy PCG64 via SeedSequence(seed).spawn, streams: " + ", ".join(STREAMS)


@dataclass(frozen=True)
class RunConfig:
    n_samples: int
    seed: int
    d: int = 1

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        check_dim(self.d)


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(STREAMS, children)}


@dataclass(frozen=True)
class EmpiricalReport:
    empirical: JointDistribution
    tv_to_target: float
    n: int
    seed: int
    generator: str = GENERATOR
    moments: tuple[float, float, float] | None = None
    exact_moments: tuple[float, float, float] | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "seed": self.seed,
            "n": self.n,
            "generator": self.generator,
            "empirical": self.empirical.to_json(),
            "tv_to_target": self.tv_to_target,
        }
        if self.moments is not None:
            out["moments"] = dict(zip(("EU", "EV", "EUV"), self.moments))
        if self.exact_moments is not None:
            out["exact_moments"] = dict(zip(("EU", "EV", "EUV"), self.exact_moments))
        out.update(self.extra)
        return out


def total_variation(p: JointDistribution, q: JointDistribution) -> float:
    if p.row_alphabet != q.row_alphabet or p.col_alphabet != q.col_alphabet:
        raise ValueError("total variation needs identical alphabets")
    return float(0.5 * np.sum(np.abs(p.pmf - q.pmf)))


def sample_source(src: BivariateBinarySource, cfg: RunConfig, rng: np.random.Generator | None = None):
    """Draw cfg.n_samples blocks of d IID pairs; returns (xs, ys) of shape (n, d) in ±1."""
    rng = make_streams(cfg.seed)["source"] if rng is None else rng
    cells = rng.choice(4, size=(cfg.n_samples, cfg.d), p=src.pmf.reshape(-1))
    xs = np.where(cells >= 2, 1, -1).astype(np.int8)
    ys = np.where(cells % 2 == 1, 1, -1).astype(np.int8)
    return xs, ys


def realization_keys(block: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(block.shape[1])
    return ((block == 1).astype(np.int64) * weights).sum(axis=1)


def _empirical_binary(u: np.ndarray, v: np.ndarray) -> JointDistribution:
    counts = np.zeros((2, 2))
    np.add.at(counts, ((u == 1).astype(int), (v == 1).astype(int)), 1)
    return JointDistribution((-1, 1), (-1, 1), counts / counts.sum())


def _bernoulli_pm(rng: np.random.Generator, p_plus: np.ndarray) -> np.ndarray:
    return np.where(rng.random(p_plus.shape) < p_plus, 1, -1).astype(np.int8)


def _moments(u: np.ndarray, v: np.ndarray) -> tuple[float, float, float]:
    u = u.astype(float)
    v = v.astype(float)
    return float(u.mean()), float(v.mean()), float((u * v).mean())


def run_affine_monte_carlo(sch: AffineScheme, cfg: RunConfig, target: BinaryTarget | JointDistribution | None = None) -> EmpiricalReport:
    """Sample the shared bit, then each party's output from its own stream.

    Without a target, TV is measured against the scheme's exact output.
    """
    streams = make_streams(cfg.seed)
    n = int(cfg.n_samples)
    z = np.where(streams["z"].random(n) < 0.5, 1, -1)
    u = _bernoulli_pm(streams["alice"], np.clip((1 + sch.f0 + sch.f1 * z) / 2, 0, 1))
    v = _bernoulli_pm(streams["bob"], np.clip((1 + sch.g0 + sch.g1 * z) / 2, 0, 1))
    emp = _empirical_binary(u, v)
    if target is None:
        ref = evaluate_scheme_exact(sch)
    else:
        ref = target.q if isinstance(target, BinaryTarget) else target
    return EmpiricalReport(emp, total_variation(emp, ref), n, int(cfg.seed), moments=_moments(u, v))


def run_patched_monte_carlo(ps: PatchedScheme, src: BivariateBinarySource, cfg: RunConfig) -> EmpiricalReport:
    """Sample inputs from src, the shared bit Z, Bob's mixing bit T, then outputs.

    TV is measured against the exact output pmf implied by the scheme's moments.
    """
    if cfg.d != ps.d:
        raise ValueError(f"run config d={cfg.d} does not match scheme d={ps.d}")
    streams = make_streams(cfg.seed)
    n = int(cfg.n_samples)
    xs, ys = sample_source(src, cfg, streams["source"])
    kx, ky = realization_keys(xs), realization_keys(ys)
    z = np.where(streams["z"].random(n) < 0.5, 1, -1)
    t = np.where(streams["t"].random(n) < ps.p_ts, 1, -1)
    f = ps.f_plus[kx]
    u = _bernoulli_pm(streams["alice"], np.clip((1 + f[:, 0] + f[:, 1] * z) / 2, 0, 1))
    g = np.where((t == 1)[:, None], ps.g_plus[ky], ps.g_minus[ky])
    v = _bernoulli_pm(streams["bob"], np.clip((1 + g[:, 0] + g[:, 1] * z) / 2, 0, 1))
    emp = _empirical_binary(u, v)
    exact = evaluate_patched_exact(ps, src.block_pmf(ps.d))
    ref = moments_to_binary_pmf(*exact)
    return EmpiricalReport(
        emp,
        total_variation(emp, ref),
        n,
        int(cfg.seed),
        moments=_moments(u, v),
        exact_moments=exact,
        extra={"t_plus_fraction": float(np.mean(t == 1))},
    )


def _per_realization(povms, n: int, who: str) -> list[Povm]:
    if isinstance(povms, Povm):
        return [povms] * n
    if isinstance(povms, Mapping):
        out = [povms[k] for k in range(n)]
    else:
        out = list(povms)
    if len(out) != n:
        raise ValueError(f"{who} needs one POVM per realization ({n}), got {len(out)}")
    return out


def ea_instance_to_targets(m1, m2, src: BivariateBinarySource, d: int = 1, tol: float = 1e-10) -> RealizationTargets:
    """Per-pair Bell statistics when each party's measurement may depend on its input.

    ``m1`` / ``m2`` are a single POVM or one POVM per realization key. All
    POVMs must be binary; labels other than ±1 map first -> +1, second -> -1.
    """
    d = check_dim(d)
    n = 1 << d
    alice = _per_realization(m1, n, "Alice")
    bob = _per_realization(m2, n, "Bob")
    for m in alice + bob:
        if len(m) != 2:
            raise ValueError(f"EA instances here use binary POVMs, got {len(m)} outcomes")
        report = validate_povm(m, tol)
        if not report.passed:
            raise InvalidPovmError("; ".join(report.problems))
    per_pair = {
        (x, y): BinaryTarget.from_joint(bell_joint_distribution(alice[x], bob[y], tol))
        for x in range(n)
        for y in range(n)
    }
    rt = RealizationTargets(d, src, per_pair)
    rt.alice_means(tol)
    rt.bob_means(tol)
    return rt


def write_reports_csv(reports: Iterable[EmpiricalReport], path: str | os.PathLike, label: str | None = None) -> None:
    """One row per report: seed, n, TV and moments, for plotting."""
    fields = ["label", "seed", "n", "tv_to_target", "EU", "EV", "EUV"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for rep in reports:
            mom = rep.moments or (None, None, None)
            writer.writerow(
                {
                    "label": label or "",
                    "seed": rep.seed,
                    "n": rep.n,
                    "tv_to_target": rep.tv_to_target,
                    "EU": mom[0],
                    "EV": mom[1],
                    "EUV": mom[2],
                }
            )


def median_tv(reports: Sequence[EmpiricalReport]) -> float:
    return float(np.median([r.tv_to_target for r in reports]))
