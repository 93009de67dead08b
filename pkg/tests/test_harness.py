import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from niss.feasibility import BinaryTarget, check_binary_cr_feasible
from niss.harness import (
    GENERATOR,
    RunConfig,
    ea_instance_to_targets,
    make_streams,
    realization_keys,
    run_affine_monte_carlo,
    run_patched_monte_carlo,
    sample_source,
    total_variation,
    write_reports_csv,
)
from niss.quantum import JointDistribution, bell_joint_distribution, computational_povm, random_binary_povm, trine_povm
from niss.sources import BivariateBinarySource
from niss.synthesis import AffineScheme, PatchedScheme, evaluate_scheme_exact, synthesize_patched_scheme

from oracles import observable_correlation


def _uniform9():
    return JointDistribution((1, 2, 3), (1, 2, 3), np.full((3, 3), 1 / 9))


def test_tv_examples():
    trine = bell_joint_distribution(trine_povm(), trine_povm())
    assert total_variation(trine, trine) == 0.0
    assert total_variation(trine, _uniform9()) == pytest.approx(1 / 3, abs=1e-12)
    p = JointDistribution((0, 1), (0, 1), [[1, 0], [0, 0]])
    q = JointDistribution((0, 1), (0, 1), [[0, 0], [0, 1]])
    assert total_variation(p, q) == 1.0


def test_tv_alphabet_mismatch():
    p = JointDistribution((0, 1), (0, 1), [[1, 0], [0, 0]])
    q = JointDistribution((0, 2), (0, 1), [[1, 0], [0, 0]])
    with pytest.raises(ValueError):
        total_variation(p, q)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4), m=st.integers(1, 4))
def test_tv_axioms(seed, n, m):
    rng = np.random.default_rng(seed)
    p, q, r = (JointDistribution(tuple(range(n)), tuple(range(m)), rng.dirichlet(np.ones(n * m)).reshape(n, m)) for _ in range(3))
    assert 0 <= total_variation(p, q) <= 1
    assert total_variation(p, q) == total_variation(q, p)
    assert total_variation(p, r) <= total_variation(p, q) + total_variation(q, r) + 1e-12


def test_sample_point_mass():
    src = BivariateBinarySource([[0, 0], [0, 1.0]])
    xs, ys = sample_source(src, RunConfig(1000, 5, d=3))
    assert np.all(xs == 1) and np.all(ys == 1)


def test_sample_uniform_frequencies():
    src = BivariateBinarySource.independent(0.5, 0.5)
    xs, ys = sample_source(src, RunConfig(100_000, 11, d=1))
    for x in (-1, 1):
        for y in (-1, 1):
            assert abs(np.mean((xs[:, 0] == x) & (ys[:, 0] == y)) - 0.25) <= 0.01


def test_sample_determinism():
    src = BivariateBinarySource.from_marginals_and_rho(0.3, 0.6, 0.4)
    a = sample_source(src, RunConfig(500, 42, d=2))
    b = sample_source(src, RunConfig(500, 42, d=2))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    c = sample_source(src, RunConfig(500, 43, d=2))
    assert not np.array_equal(a[0], c[0])


def test_streams_are_distinct():
    streams = make_streams(9)
    draws = {name: g.random(4).tolist() for name, g in streams.items()}
    assert len({tuple(v) for v in draws.values()}) == len(draws)


def test_sample_source_converges():
    src = BivariateBinarySource.from_marginals_and_rho(0.35, 0.55, 0.5)
    n = 10_000
    ok = 0
    for seed in range(100):
        xs, ys = sample_source(src, RunConfig(n, seed))
        counts = np.zeros((2, 2))
        np.add.at(counts, ((xs[:, 0] == 1).astype(int), (ys[:, 0] == 1).astype(int)), 1)
        emp = JointDistribution((-1, 1), (-1, 1), counts / n)
        ok += total_variation(emp, JointDistribution((-1, 1), (-1, 1), src.pmf)) <= 2 * np.sqrt(4 / n)
    assert ok >= 95


def test_realization_keys():
    block = np.array([[1, -1, -1], [-1, 1, 1], [1, 1, 1]])
    np.testing.assert_array_equal(realization_keys(block), [1, 6, 7])


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(0, 1)
    with pytest.raises(ValueError):
        RunConfig(10, -1)


SHARED_BIT = JointDistribution((-1, 1), (-1, 1), [[0.5, 0], [0, 0.5]])


def test_affine_shared_bit():
    rep = run_affine_monte_carlo(AffineScheme(0.5, 0.5, 1, 1), RunConfig(100_000, 7), BinaryTarget(SHARED_BIT))
    assert rep.tv_to_target <= 0.01
    assert rep.generator == GENERATOR


def test_affine_product():
    a, b = 0.3, 0.8
    rep = run_affine_monte_carlo(AffineScheme(a, b, 0, 0), RunConfig(100_000, 8))
    product = JointDistribution((-1, 1), (-1, 1), np.outer([1 - a, a], [1 - b, b]))
    assert total_variation(rep.empirical, product) <= 0.01


def test_affine_converges_to_exact():
    sch = AffineScheme(0.3, 0.6, 0.6, 2 / 3)
    small = [run_affine_monte_carlo(sch, RunConfig(10_000, s)).tv_to_target for s in range(20)]
    large = [run_affine_monte_carlo(sch, RunConfig(1_000_000, s)).tv_to_target for s in range(20)]
    assert np.median(large) <= np.median(small)


def test_seed_determinism_bit_identical():
    sch = AffineScheme(0.4, 0.7, 0.5, -0.3)
    a = run_affine_monte_carlo(sch, RunConfig(20_000, 3))
    b = run_affine_monte_carlo(sch, RunConfig(20_000, 3))
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())


def _collapsed():
    src = BivariateBinarySource.independent(0.5, 0.5)
    tab = np.array([[0.0, 1.0], [0.0, 1.0]])
    return PatchedScheme(1, tab, tab, tab * [1, -1], 1.0, src), src


def test_patched_collapsed():
    ps, src = _collapsed()
    rep = run_patched_monte_carlo(ps, src, RunConfig(100_000, 7, d=1))
    assert abs(rep.moments[2] - 1.0) <= 0.01


def test_patched_p_ts_zero_uses_g_minus():
    ps, src = _collapsed()
    ps = PatchedScheme(1, ps.f_plus, ps.g_plus, ps.g_minus, 0.0, src)
    rep = run_patched_monte_carlo(ps, src, RunConfig(50_000, 1, d=1))
    assert rep.extra["t_plus_fraction"] == 0.0
    # g- is the anti-correlated copy, so U' = -V' always.
    assert rep.moments[2] == -1.0


def _within_bands(emp, exact, n, k=3.0):
    for e, m in zip(emp, exact):
        sd = np.sqrt(max(1 - m * m, 1e-12) / n)
        assert abs(e - m) <= k * sd + 1e-12, (emp, exact)


def _random_ea(rng, d, dependent=True):
    n = 1 << d
    src = BivariateBinarySource(rng.dirichlet(np.ones(4)).reshape(2, 2))
    if dependent:
        alice = [random_binary_povm(rng) for _ in range(n)]
        bob = [random_binary_povm(rng) for _ in range(n)]
    else:
        alice, bob = random_binary_povm(rng), random_binary_povm(rng)
    return alice, bob, src


def test_patched_random_instance_bands(rng):
    alice, bob, src = _random_ea(rng, 2)
    ps = synthesize_patched_scheme(ea_instance_to_targets(alice, bob, src, d=2))
    n = 200_000
    rep = run_patched_monte_carlo(ps, src, RunConfig(n, 17, d=2))
    _within_bands(rep.moments, rep.exact_moments, n)


def test_ea_targets_projective():
    src = BivariateBinarySource.from_marginals_and_rho(0.3, 0.4, 0.2)
    rt = ea_instance_to_targets(computational_povm(), computational_povm(), src, d=2)
    for t in rt.per_pair.values():
        np.testing.assert_allclose(t.q.pmf, [[0.5, 0], [0, 0.5]], atol=1e-15)


def test_ea_targets_bob_marginal_constant(rng):
    src = BivariateBinarySource.independent(0.5, 0.5)
    alice = [random_binary_povm(rng), random_binary_povm(rng)]
    rt = ea_instance_to_targets(alice, computational_povm(), src, d=1)
    means = [[rt.per_pair[(x, y)].b for x in range(2)] for y in range(2)]
    for row in means:
        assert row[0] == pytest.approx(row[1], abs=1e-12)


def test_ea_targets_feasible(rng):
    for _ in range(50):
        alice, bob, src = _random_ea(rng, 1)
        rt = ea_instance_to_targets(alice, bob, src, d=1)
        for t in rt.per_pair.values():
            assert check_binary_cr_feasible(t).feasible


def test_ea_targets_require_binary():
    with pytest.raises(ValueError):
        ea_instance_to_targets(trine_povm(), computational_povm(), BivariateBinarySource.independent(0.5, 0.5))


def _ea_moments(alice, bob, src, d):
    """Input-averaged EA moments from the ±1 observables, bypassing pmfs."""
    n = 1 << d
    w = src.block_pmf(d)
    eu = sum(w[x].sum() * (np.trace(alice[x][1]).real - 1) for x in range(n))
    ev = sum(w[:, y].sum() * (np.trace(bob[y][1]).real - 1) for y in range(n))
    euv = sum(w[x, y] * observable_correlation(alice[x][1], bob[y][1]) for x in range(n) for y in range(n))
    return eu, ev, euv


@pytest.mark.parametrize("d", [1, 2])
def test_end_to_end_ea_to_cr(d, rng):
    from niss.synthesis import evaluate_patched_exact

    for trial in range(15):
        alice, bob, src = _random_ea(rng, d, dependent=trial % 3 != 0)
        n = 1 << d
        alice = alice if isinstance(alice, list) else [alice] * n
        bob = bob if isinstance(bob, list) else [bob] * n
        ps = synthesize_patched_scheme(ea_instance_to_targets(alice, bob, src, d=d))
        exact = evaluate_patched_exact(ps)
        np.testing.assert_allclose(exact, _ea_moments(alice, bob, src, d), atol=1e-10)
    rep = run_patched_monte_carlo(ps, src, RunConfig(100_000, 99, d=d))
    _within_bands(rep.moments, exact, 100_000)


def test_csv_export(tmp_path):
    reps = [run_affine_monte_carlo(AffineScheme(0.5, 0.5, 1, 1), RunConfig(1000, s)) for s in range(3)]
    path = tmp_path / "runs.csv"
    write_reports_csv(reps, path, label="shared-bit")
    rows = list(csv.DictReader(open(path)))
    assert [int(r["seed"]) for r in rows] == [0, 1, 2]
    assert rows[0]["label"] == "shared-bit"
    assert float(rows[0]["tv_to_target"]) == reps[0].tv_to_target


def test_report_json_fields():
    rep = run_affine_monte_carlo(AffineScheme(0.5, 0.5, 1, 1), RunConfig(100, 5))
    obj = json.loads(json.dumps(rep.to_json()))
    assert {"seed", "n", "empirical", "tv_to_target", "moments", "generator"} <= obj.keys()
    assert evaluate_scheme_exact(AffineScheme(0.5, 0.5, 1, 1)).pmf.tolist() == [[0.5, 0.0], [0.0, 0.5]]
