import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphsynth.matcher import (
    BipartiteJoint,
    JointDistribution,
    MatchError,
    build_mapping,
    build_target_matrix,
    cdf_report,
    distribution_distance,
    empirical_bipartite,
    empirical_joint,
    frobenius_upper,
    group_sizes,
    ldg_partition,
    load_bipartite_joint_csv,
    load_joint_csv,
    sbm_part,
    sbm_part_bipartite,
    write_cdf_csv,
)
from graphsynth.store import EdgeTable, PropertyTable
from graphsynth.structgen import planted_partition

from oracles import bipartite_choices, greedy_choices, ldg_choices


def et(pairs, name="g"):
    return EdgeTable(name, [a for a, _ in pairs], [b for _, b in pairs])


def traced(edges, q, W, order, **kw):
    steps = []
    state = sbm_part(edges, q, W, order, refine=0,
                     trace=lambda i, v, s: steps.append(int(s.assignment[v])), **kw)
    return steps, state


# ---------------------------------------------------------------- strategies


@st.composite
def compositions(draw, n, k):
    cuts = sorted(draw(st.lists(st.integers(1, n - 1), min_size=k - 1, max_size=k - 1,
                                unique=True))) if k > 1 else []
    b = [0, *cuts, n]
    return [b[i + 1] - b[i] for i in range(k)]


@st.composite
def dyadic_targets(draw, k):
    """Integer symmetric W whose unordered-pair total is a power of two."""
    total = 2 ** draw(st.integers(0, 5))
    cells = [(i, j) for i in range(k) for j in range(i, k)]
    W = [[0] * k for _ in range(k)]
    for _ in range(total):
        i, j = draw(st.sampled_from(cells))
        W[i][j] += 1
        if i != j:
            W[j][i] += 1
    return W


@st.composite
def instances(draw, max_n=8, max_k=3):
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(1, min(max_k, n)))
    q = draw(compositions(n, k))
    edges = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=16))
    W = draw(dyadic_targets(k))
    order = draw(st.permutations(range(n)))
    return n, edges, q, W, list(order)


# ----------------------------------------------------------- target matrix


def test_counts_target():
    P = JointDistribution.from_pairs({("a", "a"): 0.5, ("a", "b"): 0.5})
    assert build_target_matrix(P, 10, [5, 5]).tolist() == [[5, 5], [5, 0]]


def test_density_target():
    P = JointDistribution.from_pairs({("a", "a"): 0.5, ("a", "b"): 0.5})
    W = build_target_matrix(P, 10, [5, 4], mode="density")
    assert W[0, 0] == pytest.approx(2 * 10 * 0.5 / (5 * 4))
    assert W[0, 1] == pytest.approx(2 * 10 * 0.5 / (5 * 4))
    with pytest.raises(MatchError, match="size 1 < 2"):
        build_target_matrix(P, 10, [1, 4], mode="density")


def test_uniform_target():
    k = 4
    P = JointDistribution([str(i) for i in range(k)], np.full((k, k), 1 / 10))
    W = build_target_matrix(P, 50, [1] * k)
    assert np.allclose(W, 5.0)
    assert frobenius_upper(W) == pytest.approx(10 * 25)


# --------------------------------------------------------------- SBM-Part


def test_single_group_takes_everything():
    s = sbm_part(et([(0, 1), (1, 2)]), [3], np.array([[2.0]]))
    assert s.assignment.tolist() == [0, 0, 0]


def test_path_example():
    edges = [(0, 1), (1, 2), (2, 3)]
    W = build_target_matrix(JointDistribution.from_pairs({("x", "y"): 1.0}), 3, [2, 2])
    steps, state = traced(et(edges), [2, 2], W, [0, 1, 2, 3])
    # traced by hand: alternate groups along the path
    assert steps == [0, 1, 0, 1]
    assert steps == greedy_choices(4, edges, [0, 1, 2, 3], [2, 2], W.tolist(), "progressive",
                                   exact=False)
    assert state.counts.tolist() == [[0, 3], [3, 0]]
    assert state.residual == 0.0


def test_isolated_nodes_fill_by_room():
    steps, state = traced(et([]), [2, 1, 1], np.zeros((3, 3)), [0, 1, 2, 3])
    assert steps == [0, 1, 2, 0]
    # divide rule: a zero residual ties every group, so the lowest index wins
    steps, _ = traced(et([]), [2, 1, 1], np.zeros((3, 3)), [0, 1, 2, 3], balance="divide")
    assert steps == [0, 0, 1, 2]
    steps, _ = traced(et([]), [2, 1, 1], np.eye(3), [0, 1, 2, 3], balance="divide")
    assert steps == [0, 1, 2, 0]


@given(instances(), st.sampled_from(["progressive", "divide"]))
def test_each_step_matches_brute_force(inst, rule):
    n, edges, q, W, order = inst
    steps, _ = traced(et(edges), q, np.array(W, float), order, balance=rule)
    assert steps == greedy_choices(n, edges, order, q, W, rule)


@given(instances(), st.sampled_from(["progressive", "divide"]),
       st.lists(st.floats(0, 50), min_size=9, max_size=9))
def test_tracked_residual_is_exact(inst, rule, raw):
    n, edges, q, _, order = inst
    k = len(q)
    W = np.array(raw[: k * k]).reshape(k, k)
    W = (W + W.T) / 2

    def check(i, v, s):
        assert abs(s.residual - s.recompute_residual()) <= 1e-6
        assert np.all(s.fill <= s.capacities)

    state = sbm_part(et(edges), q, W, order, balance=rule, refine=0, trace=check)
    assert state.fill.tolist() == q
    assert abs(state.residual - state.recompute_residual()) <= 1e-6


@given(instances(max_n=30, max_k=4))
def test_refinement_keeps_sizes_and_never_hurts(inst):
    n, edges, q, W, order = inst
    W = np.array(W, float)
    greedy = sbm_part(et(edges), q, W, order, refine=0)
    refined = sbm_part(et(edges), q, W, order)
    assert refined.fill.tolist() == q
    assert np.bincount(refined.assignment, minlength=len(q)).tolist() == q
    assert refined.residual <= greedy.residual + 1e-9
    assert refined.residual == pytest.approx(refined.recompute_residual(), abs=1e-6)


def test_refinement_improves_a_bad_stream():
    # two 4-cliques joined by one edge, streamed so that greedy interleaves them
    a, b = [0, 1, 2, 3], [4, 5, 6, 7]
    edges = [(u, v) for g in (a, b) for i, u in enumerate(g) for v in g[i + 1:]] + [(3, 4)]
    W = np.array([[6.0, 1.0], [1.0, 6.0]])
    refined = sbm_part(et(edges), [4, 4], W, [0, 4, 1, 5, 2, 6, 3, 7])
    assert refined.residual == 0.0
    assert len(set(refined.assignment[a].tolist())) == 1


def test_sbm_part_is_deterministic():
    pp = planted_partition(2000, seed=7)
    q = [500, 700, 800]
    W = np.array([[9000.0, 800, 600], [800, 6000, 500], [600, 500, 2000]])
    a = sbm_part(pp.edges, q, W, seed=3)
    b = sbm_part(pp.edges, q, W, seed=3)
    assert np.array_equal(a.assignment, b.assignment)
    assert a.fill.tolist() == q


def test_sbm_part_errors():
    with pytest.raises(MatchError, match="outside"):
        sbm_part(et([(0, 5)]), [1, 1], np.zeros((2, 2)))
    with pytest.raises(MatchError, match="permutation"):
        sbm_part(et([]), [1, 1], np.zeros((2, 2)), [0, 0])
    with pytest.raises(MatchError, match="2x2"):
        sbm_part(et([]), [1, 1], np.zeros((3, 3)))
    with pytest.raises(MatchError, match="balance"):
        sbm_part(et([]), [1, 1], np.zeros((2, 2)), balance="multiply")


# --------------------------------------------------------------------- LDG


def test_ldg_two_triangles():
    edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
    s = ldg_partition(et(edges), 2, [3, 3], list(range(6)))
    assert len(set(s.assignment[:3].tolist())) == 1
    assert len(set(s.assignment[3:].tolist())) == 1
    assert s.assignment[0] != s.assignment[3]


def test_ldg_without_edges_round_robins():
    s = ldg_partition(et([]), 3, [2, 2, 2], list(range(6)), n=6)
    assert s.assignment.tolist() == [0, 1, 2, 0, 1, 2]
    assert ldg_partition(et([(0, 1)]), 1, [2], [1, 0]).assignment.tolist() == [0, 0]


@given(instances(max_n=12, max_k=4))
def test_ldg_matches_brute_force(inst):
    n, edges, q, _, order = inst
    s = ldg_partition(et(edges), len(q), q, order, n=n)
    assert [int(s.assignment[v]) for v in order] == ldg_choices(n, edges, order, q)


# ----------------------------------------------------------------- mapping


def test_mapping_two_nodes():
    pt = PropertyTable("T.v", "string", ["a", "b"])
    state = sbm_part(et([]), [1, 1], np.zeros((2, 2)), [1, 0])
    assert state.assignment.tolist() == [1, 0]
    assert build_mapping(state, pt, ["a", "b"]).tolist() == [1, 0]


def test_mapping_single_group_is_identity():
    pt = PropertyTable("T.v", "string", ["a"] * 5)
    state = sbm_part(et([(0, 1)]), [5], np.ones((1, 1)))
    assert build_mapping(state, pt).tolist() == [0, 1, 2, 3, 4]


def test_mapping_frequency_mismatch():
    pt = PropertyTable("T.v", "string", ["a", "a"])
    state = sbm_part(et([]), [1, 1], np.zeros((2, 2)))
    with pytest.raises(MatchError, match="table rows"):
        build_mapping(state, pt, ["a", "b"])


@given(st.lists(st.sampled_from("abcd"), min_size=1, max_size=40), st.integers(0, 2**32))
def test_mapping_is_a_value_preserving_bijection(labels, seed):
    pt = PropertyTable("T.v", "string", labels)
    values = sorted(set(labels))
    q = group_sizes(pt, values)
    state = sbm_part(et([]), q, np.zeros((len(q), len(q))), seed=seed)
    f = build_mapping(state, pt, values)
    assert sorted(f.tolist()) == list(range(len(labels)))
    for v in range(len(labels)):
        assert labels[f[v]] == values[state.assignment[v]]


# --------------------------------------------------------------- measuring


def test_empirical_joint_small_cases():
    P = empirical_joint(et([(0, 1)]), np.array([0, 1]), ["a", "b"])
    assert P.prob("a", "b") == 1.0 and P.total() == 1.0
    P = empirical_joint(et([(0, 1), (1, 2)]), np.zeros(3, int), ["a"])
    assert P.prob("a", "a") == 1.0
    with pytest.raises(MatchError, match="empty"):
        empirical_joint(et([]), np.zeros(1, int), ["a"])


def test_empirical_joint_of_planted_communities():
    pp = planted_partition(10_000, mixing=0.1, seed=11)
    P = empirical_joint(pp.edges, pp.communities, pp.k)
    assert abs(np.trace(P.p) - 0.9) <= 0.02


def test_distance_and_cdf(tmp_path):
    P = JointDistribution.from_pairs({("a", "a"): 0.6, ("a", "b"): 0.3, ("b", "b"): 0.1})
    assert distribution_distance(P, P) == 0.0
    rows = cdf_report(P, P)
    assert len(rows) == 3
    assert [r.expected_cdf for r in rows] == [r.observed_cdf for r in rows]
    Q = JointDistribution.from_pairs({("a", "a"): 0.0, ("a", "b"): 0.0, ("b", "b"): 1.0})
    R = JointDistribution.from_pairs({("a", "a"): 1.0, ("a", "b"): 0.0, ("b", "b"): 0.0})
    assert distribution_distance(Q, R) == 2.0
    write_cdf_csv(cdf_report(P, Q), tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == \
        "rank,value_x,value_y,expected_cdf,observed_cdf"


@given(st.integers(1, 6), st.data())
def test_cdf_rows_are_monotone_and_complete(k, data):
    def joint():
        raw = np.array(data.draw(st.lists(st.floats(0.01, 1), min_size=k * k, max_size=k * k)))
        m = np.triu(raw.reshape(k, k))
        m = m / m.sum()
        return JointDistribution([str(i) for i in range(k)], m + np.triu(m, 1).T)

    rows = cdf_report(joint(), joint())
    assert len(rows) == k * (k + 1) // 2
    for col in ("expected_cdf", "observed_cdf"):
        xs = [getattr(r, col) for r in rows]
        assert all(b >= a for a, b in zip(xs, xs[1:]))
        assert xs[-1] == pytest.approx(1.0, abs=1e-9)


def test_joint_csv_validation(tmp_path):
    f = tmp_path / "j.csv"
    f.write_text("valueX,valueY,probability\nES,ES,0.5\nES,US,0.5\n")
    assert load_joint_csv(f).prob("US", "ES") == 0.5
    f.write_text("ES,US,0.5\nUS,ES,0.5\n")
    with pytest.raises(MatchError, match="duplicates"):
        load_joint_csv(f)
    f.write_text("ES,ES,0.5\nES,US,0.4\n")
    with pytest.raises(MatchError, match="sum to"):
        load_joint_csv(f)


# ---------------------------------------------------------------- bipartite


def test_bipartite_single_groups():
    t, h = sbm_part_bipartite(et([(0, 0), (1, 0), (1, 1)]), [2], [2], np.array([[3.0]]))
    assert t.assignment.tolist() == [0, 0] and h.assignment.tolist() == [0, 0]


@pytest.mark.parametrize("rule", ["progressive", "divide"])
def test_bipartite_k22_matches_oracle(rule):
    edges = [(0, 0), (0, 1), (1, 0), (1, 1)]
    W = [[2, 0], [0, 2]]
    for order in ([0, 2, 1, 3], [0, 1, 2, 3], [2, 3, 0, 1], [3, 0, 2, 1]):
        steps = []
        sbm_part_bipartite(et(edges), [1, 1], [1, 1], np.array(W, float), order, balance=rule,
                           refine=0, trace=lambda i, v, ts, hs: steps.append(
                               int(ts.assignment[v] if v < 2 else hs.assignment[v - 2])))
        assert steps == bipartite_choices(2, 2, edges, order, [1, 1], [1, 1], W, rule)


@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_bipartite_steps_match_oracle(nt, nh, data):
    kt = data.draw(st.integers(1, min(3, nt)))
    kh = data.draw(st.integers(1, min(3, nh)))
    qt, qh = data.draw(compositions(nt, kt)), data.draw(compositions(nh, kh))
    edges = data.draw(st.lists(st.tuples(st.integers(0, nt - 1), st.integers(0, nh - 1)),
                               max_size=12))
    total = 2 ** data.draw(st.integers(0, 4))
    W = [[0] * kh for _ in range(kt)]
    for _ in range(total):
        W[data.draw(st.integers(0, kt - 1))][data.draw(st.integers(0, kh - 1))] += 1
    order = list(data.draw(st.permutations(range(nt + nh))))
    rule = data.draw(st.sampled_from(["progressive", "divide"]))
    steps = []

    def rec(i, v, ts, hs):
        steps.append(int(ts.assignment[v] if v < nt else hs.assignment[v - nt]))
        if v < nt:
            assert hs.fill.sum() == sum(1 for u in order[: i + 1] if u >= nt)
        assert abs(ts.residual - ts.recompute_residual()) <= 1e-6

    ts, hs = sbm_part_bipartite(et(edges), qt, qh, np.array(W, float), order, balance=rule,
                                refine=0, trace=rec)
    assert steps == bipartite_choices(nt, nh, edges, order, qt, qh, W, rule)
    assert ts.fill.tolist() == qt and hs.fill.tolist() == qh


def test_bipartite_joint_csv(tmp_path):
    f = tmp_path / "b.csv"
    f.write_text("tailValue,headValue,probability\nx,p,0.75\nx,q,0.25\n")
    jd = load_bipartite_joint_csv(f)
    assert jd.tail_values == ["x"] and jd.head_values == ["p", "q"]
    big = jd.extend(["x", "y"], ["p", "q", "r"])
    assert big.p.sum() == 1.0 and big.p[1].sum() == 0.0
    f.write_text("x,p,0.5\nx,p,0.5\n")
    with pytest.raises(MatchError, match="duplicates"):
        load_bipartite_joint_csv(f)


def test_bipartite_empirical_and_distance():
    e = et([(0, 0), (0, 1), (1, 1)])
    got = empirical_bipartite(e, np.array([0, 1]), np.array([0, 1]), ["x", "y"], ["p", "q"])
    assert got.p.tolist() == [[1 / 3, 1 / 3], [0, 1 / 3]]
    want = BipartiteJoint(["x", "y"], ["p", "q"], [[0.5, 0], [0, 0.5]])
    assert distribution_distance(got, want) == pytest.approx(1 / 6 + 1 / 3 + 1 / 6)
