import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphsynth.structgen import (
    DegreeDistribution,
    DegreeGenerator,
    InfeasibleError,
    PlantedGenerator,
    RmatGenerator,
    StructureError,
    degree_driven_edges,
    invert_size,
    planted_partition,
    rmat_edges,
)


def test_rmat_counts():
    et = rmat_edges(3, 2, seed=1)
    assert len(et) == 16
    assert et.tails.max() < 8 and et.heads.max() < 8
    assert et.ids.tolist() == list(range(16))


def test_rmat_degenerate_quadrant():
    et = rmat_edges(4, 3, 1.0, 0.0, 0.0, 0.0, seed=5)
    assert not et.tails.any() and not et.heads.any()


def test_rmat_rejects_bad_probabilities():
    with pytest.raises(StructureError):
        rmat_edges(4, 2, 0.5, 0.5, 0.5, 0.0)


def test_rmat_deterministic():
    assert rmat_edges(10, 4, seed=3) == rmat_edges(10, 4, seed=3)
    assert rmat_edges(10, 4, seed=3) != rmat_edges(10, 4, seed=4)


def test_rmat_heavy_tail():
    et = rmat_edges(18, 16, seed=42)
    deg = np.bincount(et.heads, minlength=1 << 18)
    assert deg.max() >= 50 * deg.mean()


def test_rmat_dedup_drops_loops_and_repeats():
    et = rmat_edges(6, 8, seed=2, dedup=True)
    assert not np.any(et.tails == et.heads)
    assert len(set(zip(et.tails.tolist(), et.heads.tolist()))) == len(et)


def _simple(et):
    pairs = set(zip(et.tails.tolist(), et.heads.tolist()))
    return not np.any(et.tails == et.heads) and len(pairs) == len(et)


def test_planted_no_mixing_is_all_internal():
    pp = planted_partition(2000, avg_degree=10, max_degree=30, mixing=0.0, seed=1)
    assert pp.mixing() == 0.0
    assert _simple(pp.edges)


def test_planted_full_mixing_is_near_chance():
    pp = planted_partition(2000, mixing=1.0, seed=1)
    sizes = np.bincount(pp.communities)
    chance = float(np.sum((sizes / sizes.sum()) ** 2))
    assert 1 - pp.mixing() <= chance + 0.05


def test_planted_mixing_and_shape():
    pp = planted_partition(10_000, mixing=0.1, seed=42)
    assert abs(pp.mixing() - 0.1) <= 0.02
    sizes = np.bincount(pp.communities)
    assert sizes.min() >= 10 and sizes.max() <= 50
    assert pp.degrees.min() >= 1 and pp.degrees.max() <= 50
    assert abs(pp.degrees.mean() - 20) < 1.0
    assert _simple(pp.edges)


def test_planted_infeasible_reports_node():
    with pytest.raises(InfeasibleError, match="needs internal degree"):
        planted_partition(200, avg_degree=30, max_degree=50, min_comm=5, max_comm=10, mixing=0.0)


def test_degree_point_mass():
    et = degree_driven_edges(4, DegreeDistribution.point_mass(3))
    assert len(et) == 12
    assert et.heads.tolist() == list(range(12))
    assert np.bincount(et.tails).tolist() == [3, 3, 3, 3]


def test_degree_zero_is_empty():
    assert len(degree_driven_edges(50, DegreeDistribution.point_mass(0))) == 0


def _degree_l1(et, n, dist):
    hist = np.bincount(np.bincount(et.tails, minlength=n)) / n
    size = max(len(hist), len(dist.degrees))
    h, p = np.zeros(size), np.zeros(size)
    h[: len(hist)] = hist
    p[: len(dist.probabilities)] = dist.probabilities
    return float(np.abs(h - p).sum())


def _multinomial_noise_p99(p, n, reps=300):
    rng = np.random.default_rng(0)
    return float(np.percentile([np.abs(rng.multinomial(n, p) / n - p).sum() for _ in range(reps)], 99))


def test_degree_geometric_mean_and_histogram():
    dist = DegreeDistribution.geometric(5.0)
    n = 10_000
    et = degree_driven_edges(n, dist, seed=42)
    assert abs(len(et) / n - 5) <= 0.1
    # an exact sampler's histogram L1 at this n is itself ~0.036
    assert _degree_l1(et, n, dist) <= _multinomial_noise_p99(dist.probabilities, n)
    big = 100_000
    assert _degree_l1(degree_driven_edges(big, dist, seed=42), big, dist) <= 0.02


@given(st.floats(0.1, 200.0))
def test_poisson_pmf_matches_recurrence(mean):
    dist = DegreeDistribution.poisson(mean)
    # p(0) = e^-mean, p(d) = p(d-1) * mean / d, renormalised over the kept support
    ref = [math.exp(-mean)]
    for d in range(1, len(dist.degrees)):
        ref.append(ref[-1] * mean / d)
    dropped = 1.0 - math.fsum(ref)
    ref = np.array(ref) / sum(ref)
    assert dist.degrees.tolist() == list(range(len(ref)))
    assert np.allclose(dist.probabilities, ref, rtol=1e-9, atol=1e-300)
    assert dropped <= 1e-12
    assert abs(dist.mean - mean) <= 1e-9 * max(1.0, mean)


def test_degree_mean_is_poisson():
    gen = DegreeGenerator(mean=5.0)
    assert np.allclose(gen.dist.probabilities, DegreeDistribution.poisson(5.0).probabilities)
    assert DegreeGenerator(geometric=5.0).dist.probabilities[0] == pytest.approx(1 / 6)
    n = 100_000
    et = degree_driven_edges(n, gen.dist, seed=3)
    assert _degree_l1(et, n, gen.dist) <= _multinomial_noise_p99(gen.dist.probabilities, n)
    with pytest.raises(StructureError, match="exactly one"):
        DegreeGenerator(mean=5.0, geometric=5.0)


def test_degree_distribution_validation(tmp_path):
    with pytest.raises(StructureError, match="sum to 1"):
        DegreeDistribution([1, 2], [0.5, 0.2])
    f = tmp_path / "d.csv"
    f.write_text("degree,probability\n1,0.25\n3,0.75\n")
    assert DegreeDistribution.from_csv(f).mean == 2.5


@pytest.mark.parametrize("gen, m, n", [
    (RmatGenerator(edge_factor=16), 1 << 22, 1 << 18),
    (DegreeGenerator(mean=5.0), 100, 20),
    (DegreeGenerator(mean=5.0), 101, 21),
    (DegreeGenerator(constant=5), 0, 0),
])
def test_invert_size_examples(gen, m, n):
    assert invert_size(gen, m) == n


def test_invert_size_needs_positive_mean():
    with pytest.raises(StructureError, match="zero-mean"):
        invert_size(DegreeGenerator(constant=0), 10)


@given(st.integers(0, 5000), st.integers(1, 9))
def test_invert_then_run_degree(m, d):
    g = DegreeGenerator(constant=d)
    got = len(g.run(invert_size(g, m)))
    assert m <= got <= m + d


@given(st.integers(1, 1 << 16), st.sampled_from([1, 4, 16]))
def test_invert_then_run_rmat(m, ef):
    g = RmatGenerator(edge_factor=ef)
    n = invert_size(g, m)
    assert n & (n - 1) == 0
    assert n * ef >= m
    assert n == 2 or (n // 2) * ef < m


def test_planted_generator_sizes_from_average_degree():
    assert invert_size(PlantedGenerator(avg_degree=10, max_degree=30), 5000) == 1000
