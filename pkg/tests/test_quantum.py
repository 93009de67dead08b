import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from niss.quantum import (
    InvalidDistributionError,
    InvalidPovmError,
    JointDistribution,
    MalformedPovmError,
    Povm,
    bell_joint_distribution,
    coarse_grain,
    computational_povm,
    eigvals_2x2,
    marginals,
    random_binary_povm,
    random_povm,
    trine_povm,
    validate_povm,
)

from oracles import bell_prob

TOL = 1e-10


def test_validate_projective():
    assert validate_povm(computational_povm()).passed


def test_validate_trine():
    report = validate_povm(trine_povm())
    assert report.passed
    assert report.completeness_residual <= 1e-12


def test_validate_incomplete():
    report = validate_povm(Povm((1, 2), (np.diag([1.0, 0.0]), np.diag([0.0, 0.5]))))
    assert not report.passed
    assert report.completeness_residual == pytest.approx(0.5)
    assert any("completeness residual" in p for p in report.problems)


def test_validate_flags_non_hermitian_and_negative():
    bad = np.array([[0.5, 0.3], [0.0, 0.5]])
    report = validate_povm(Povm((1, 2), (bad, np.eye(2) - bad)))
    assert not report.passed and report.hermiticity_residuals[0] == pytest.approx(0.3)
    neg = np.diag([-0.2, 0.5])
    report = validate_povm(Povm((1, 2), (neg, np.eye(2) - neg)))
    assert report.min_eigenvalues[0] == pytest.approx(-0.2)
    assert report.max_eigenvalues[1] == pytest.approx(1.2)
    assert not report.passed


@pytest.mark.parametrize(
    "outcomes, ops",
    [
        ((), ()),
        ((1, 2), (np.eye(3), np.eye(3))),
        ((1, 2), (np.eye(2),)),
        ((1, 1), (np.eye(2), np.zeros((2, 2)))),
    ],
)
def test_malformed(outcomes, ops):
    with pytest.raises(MalformedPovmError):
        Povm(outcomes, ops)


def test_single_outcome_is_malformed():
    with pytest.raises(MalformedPovmError):
        validate_povm(Povm((1,), (np.eye(2),)))


def test_eigvals_closed_form(rng):
    for _ in range(50):
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        h = (g + g.conj().T) / 2
        np.testing.assert_allclose(eigvals_2x2(h), np.linalg.eigvalsh(h), atol=1e-12)


def test_bell_common_bit():
    j = bell_joint_distribution(computational_povm(), computational_povm())
    np.testing.assert_allclose(j.pmf, [[0.5, 0.0], [0.0, 0.5]], atol=1e-15)


def test_bell_trine_matches_known_table():
    j = bell_joint_distribution(trine_povm(), trine_povm())
    expected = np.full((3, 3), 1 / 18)
    np.fill_diagonal(expected, 2 / 9)
    np.testing.assert_allclose(j.pmf, expected, atol=1e-12)


def test_bell_maximally_mixed_against_projective():
    half = Povm(("a", "b"), (np.eye(2) / 2, np.eye(2) / 2))
    j = bell_joint_distribution(half, computational_povm())
    np.testing.assert_allclose(j.pmf, np.full((2, 2), 0.25), atol=1e-15)


def test_bell_rejects_invalid():
    inc = Povm((1, 2), (np.diag([1.0, 0.0]), np.diag([0.0, 0.5])))
    with pytest.raises(InvalidPovmError):
        bell_joint_distribution(inc, computational_povm())


def _random_pair(rng, n1, n2):
    m1 = random_binary_povm(rng) if n1 == 2 else random_povm(rng, n1)
    m2 = random_binary_povm(rng) if n2 == 2 else random_povm(rng, n2)
    return m1, m2


@pytest.mark.parametrize("n1, n2", [(2, 2), (2, 3), (3, 3), (4, 2), (5, 4)])
def test_bell_matches_state_vector_oracle(n1, n2, rng):
    for _ in range(20):
        m1, m2 = _random_pair(rng, n1, n2)
        j = bell_joint_distribution(m1, m2)
        oracle = np.array([[bell_prob(A, B) for B in m2.operators] for A in m1.operators])
        np.testing.assert_allclose(j.pmf, oracle, atol=TOL)
        assert np.all(j.pmf >= 0) and abs(j.pmf.sum() - 1) <= TOL


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n1=st.integers(2, 5), n2=st.integers(2, 5))
def test_bell_invariants(seed, n1, n2):
    rng = np.random.default_rng(seed)
    m1, m2 = _random_pair(rng, n1, n2)
    assert validate_povm(m1).passed and validate_povm(m2).passed
    j = bell_joint_distribution(m1, m2)
    assert np.all(j.pmf >= 0)
    assert j.pmf.sum() == pytest.approx(1.0, abs=TOL)
    qu, qv = marginals(j)
    np.testing.assert_allclose(qu, [0.5 * np.trace(op).real for op in m1.operators], atol=TOL)
    np.testing.assert_allclose(qv, [0.5 * np.trace(op).real for op in m2.operators], atol=TOL)
    # Swapping roles evaluates the same Vec formula with arguments exchanged.
    np.testing.assert_allclose(bell_joint_distribution(m2, m1).pmf, j.pmf.T, atol=TOL)


def test_marginals_examples():
    qu, qv = marginals(bell_joint_distribution(trine_povm(), trine_povm()))
    np.testing.assert_allclose(qu, [1 / 3] * 3, atol=TOL)
    np.testing.assert_allclose(qv, [1 / 3] * 3, atol=TOL)
    a, b = np.array([0.2, 0.8]), np.array([0.1, 0.3, 0.6])
    qu, qv = JointDistribution((0, 1), (0, 1, 2), np.outer(a, b)).marginals()
    np.testing.assert_allclose(qu, a)
    np.testing.assert_allclose(qv, b)


def test_trine_traces():
    traces = [np.trace(op).real for op in trine_povm().operators]
    np.testing.assert_allclose(traces, [2 / 3] * 3, atol=1e-15)
    np.testing.assert_allclose(sum(trine_povm().operators), np.eye(2), atol=1e-12)
    expected = (2 / 3) * np.array([[0.75, -math.sqrt(3) / 4], [-math.sqrt(3) / 4, 0.25]])
    np.testing.assert_array_equal(trine_povm()[3], expected)


def test_coarse_grain_trine():
    cg = coarse_grain(trine_povm(), {1: 1, 2: -1, 3: -1})
    assert cg.outcomes == (1, -1)
    np.testing.assert_allclose(cg[1], (2 / 3) * np.array([[0, 0], [0, 1]]), atol=1e-15)
    np.testing.assert_allclose(cg[-1], np.eye(2) - cg[1], atol=1e-15)
    assert validate_povm(cg).passed


def test_coarse_grain_identity_labeling():
    m = random_binary_povm(np.random.default_rng(3))
    cg = coarse_grain(m, {1: 1, -1: -1})
    assert cg.outcomes == m.outcomes
    for a, b in zip(cg.operators, m.operators):
        np.testing.assert_array_equal(a, b)


def test_coarse_grain_all_plus(rng):
    m = random_povm(rng, 3)
    cg = coarse_grain(m, {z: 1 for z in m.outcomes})
    np.testing.assert_allclose(cg[1], np.eye(2), atol=1e-12)
    np.testing.assert_allclose(cg[-1], np.zeros((2, 2)))
    other = random_povm(rng, 4)
    j = bell_joint_distribution(cg, other)
    np.testing.assert_allclose(j.pmf[0], 0.5 * np.array([np.trace(op).real for op in other.operators]), atol=TOL)
    np.testing.assert_allclose(j.pmf[1], 0.0, atol=TOL)


def test_coarse_grain_partial_labeling():
    with pytest.raises(ValueError):
        coarse_grain(trine_povm(), {1: 1, 2: -1})


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 5))
def test_coarse_grain_commutes_with_measurement(seed, n):
    rng = np.random.default_rng(seed)
    m = random_povm(rng, n)
    other = random_povm(rng, 3)
    labeling = {z: int(rng.choice([-1, 1])) for z in m.outcomes}
    cg = coarse_grain(m, labeling)
    fine = bell_joint_distribution(m, other)
    coarse = bell_joint_distribution(cg, other)
    for lab in (1, -1):
        rows = [i for i, z in enumerate(m.outcomes) if labeling[z] == lab]
        grouped = fine.pmf[rows].sum(axis=0) if rows else np.zeros(3)
        np.testing.assert_allclose(coarse.pmf[cg.outcomes.index(lab)], grouped, atol=TOL)


def test_joint_distribution_validation():
    with pytest.raises(InvalidDistributionError):
        JointDistribution((0, 1), (0, 1), [[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(InvalidDistributionError):
        JointDistribution((0, 1), (0, 1), [[1.1, -0.1], [0.0, 0.0]])
    j = JointDistribution((0, 1), (0, 1), [[0.5 + 5e-13, -5e-13], [0.0, 0.5]])
    assert j.pmf.min() == 0.0 and j.pmf.sum() == pytest.approx(1.0, abs=1e-15)


def test_povm_json_round_trip():
    m = trine_povm()
    obj = m.to_json()
    ops = [np.array([[complex(*v) for v in row] for row in op]) for op in obj["operators"]]
    back = Povm(tuple(obj["outcomes"]), tuple(ops))
    for a, b in zip(back.operators, m.operators):
        np.testing.assert_array_equal(a, b)
