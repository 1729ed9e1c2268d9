"""Property-to-structure matching with SBM-Part.

Given a property table whose values define groups of sizes ``q`` and a target
joint distribution ``P`` over the values seen at the two endpoints of an edge,
SBM-Part streams the nodes of a graph and puts each one in a group so that
the group-pair edge counts ``C`` approach the target matrix ``W`` in squared
Frobenius distance, with each group's remaining capacity ``1 - s_t / q_t``
steering nodes away from groups that are filling up. Full groups are never
chosen. A swap pass then polishes the partition at fixed group sizes. The
result is turned into a bijection ``f`` from structure node ids to
property-table ids.

Conventions: group pairs are unordered. Symmetric ``k x k`` matrices store
``p({i,j})`` in both ``[i, j]`` and ``[j, i]``; sums and norms run over
``i <= j`` only, so an intra-group edge is counted once on the diagonal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _kernels as _k
from .rng import permutation, stream_for
from .store import EdgeTable, PropertyTable


BALANCE_RULES = ("progressive", "divide")
DEFAULT_REFINE_ROUNDS = 8
REFINE_REL_TOL = 1e-3
# neighbour-histogram cells (nodes x groups) above which refinement is skipped
REFINE_MAX_CELLS = 64_000_000


class MatchError(ValueError):
    pass


# -------------------------------------------------------- joint distributions


def _upper(a: np.ndarray) -> np.ndarray:
    return a[np.triu_indices(a.shape[0])]


@dataclass
class JointDistribution:
    values: list[str]
    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        k = len(self.values)
        if self.p.shape != (k, k):
            raise MatchError(f"joint matrix shape {self.p.shape} does not match {k} values")
        if not np.allclose(self.p, self.p.T, atol=0, rtol=0):
            raise MatchError("joint matrix must be symmetric (unordered pairs)")

    @property
    def k(self) -> int:
        return len(self.values)

    def pair_mass(self) -> np.ndarray:
        return _upper(self.p)

    def total(self) -> float:
        return float(self.pair_mass().sum())

    def validate(self, tol: float = 1e-9) -> None:
        if np.any(self.p < 0):
            raise MatchError("joint probabilities must be non-negative")
        if abs(self.total() - 1.0) > tol:
            raise MatchError(f"joint probabilities sum to {self.total():.12g}, expected 1")

    def prob(self, a: str, b: str) -> float:
        i, j = self.values.index(a), self.values.index(b)
        return float(self.p[i, j])

    @classmethod
    def from_pairs(cls, pairs: dict, values: Sequence[str] | None = None) -> "JointDistribution":
        """Build from ``{(x, y): p}`` with each unordered pair listed once."""
        if values is None:
            values = []
            for x, y in pairs:
                for v in (x, y):
                    if v not in values:
                        values.append(v)
        values = list(values)
        index = {v: i for i, v in enumerate(values)}
        p = np.zeros((len(values), len(values)))
        seen = set()
        for (x, y), prob in pairs.items():
            key = frozenset((x, y))
            if key in seen:
                raise MatchError(f"pair ({x}, {y}) listed twice")
            seen.add(key)
            i, j = index[x], index[y]
            p[i, j] = p[j, i] = prob
        return cls(values, p)


def load_joint_csv(path, tol: float = 1e-6) -> JointDistribution:
    """Read ``valueX,valueY,probability`` rows (header optional), unordered pairs listed once."""
    pairs: dict = {}
    seen: dict[frozenset, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows and rows[0][-1].strip().lower() == "probability":
        rows = rows[1:]
    for lineno, r in enumerate(rows, start=1):
        if len(r) != 3:
            raise MatchError(f"{path}:{lineno}: expected 3 columns, got {len(r)}")
        x, y, raw = r
        key = frozenset((x, y))
        if key in seen:
            raise MatchError(f"{path}:{lineno}: pair ({x}, {y}) duplicates line {seen[key]}")
        seen[key] = lineno
        try:
            pairs[(x, y)] = float(raw)
        except ValueError:
            raise MatchError(f"{path}:{lineno}: bad probability {raw!r}") from None
    jd = JointDistribution.from_pairs(pairs)
    jd.validate(tol)
    return jd


def write_joint_csv(jd: JointDistribution, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["valueX", "valueY", "probability"])
        for i in range(jd.k):
            for j in range(i, jd.k):
                if jd.p[i, j] > 0:
                    w.writerow([jd.values[i], jd.values[j], repr(float(jd.p[i, j]))])


@dataclass
class BipartiteJoint:
    """Ordered joint ``P(tail value, head value)`` for edges between two node types."""

    tail_values: list[str]
    head_values: list[str]
    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        shape = (len(self.tail_values), len(self.head_values))
        if self.p.shape != shape:
            raise MatchError(f"joint matrix shape {self.p.shape} does not match {shape}")

    def validate(self, tol: float = 1e-9) -> None:
        if np.any(self.p < 0):
            raise MatchError("joint probabilities must be non-negative")
        if abs(float(self.p.sum()) - 1.0) > tol:
            raise MatchError(f"joint probabilities sum to {self.p.sum():.12g}, expected 1")

    def extend(self, tail_values: Sequence[str], head_values: Sequence[str]) -> "BipartiteJoint":
        """Same distribution over larger value lists (new values get probability 0)."""
        p = np.zeros((len(tail_values), len(head_values)))
        ti = [list(tail_values).index(v) for v in self.tail_values]
        hi = [list(head_values).index(v) for v in self.head_values]
        p[np.ix_(ti, hi)] = self.p
        return BipartiteJoint(list(tail_values), list(head_values), p)


def load_bipartite_joint_csv(path, tol: float = 1e-6) -> BipartiteJoint:
    """Read ``tailValue,headValue,probability`` rows; ordered pairs listed once."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows and rows[0][-1].strip().lower() == "probability":
        rows = rows[1:]
    tails: list[str] = []
    heads: list[str] = []
    cells: dict[tuple[str, str], float] = {}
    seen: dict[tuple[str, str], int] = {}
    for lineno, r in enumerate(rows, start=1):
        if len(r) != 3:
            raise MatchError(f"{path}:{lineno}: expected 3 columns, got {len(r)}")
        x, y, raw = r
        if (x, y) in seen:
            raise MatchError(f"{path}:{lineno}: pair ({x}, {y}) duplicates line {seen[(x, y)]}")
        seen[(x, y)] = lineno
        try:
            cells[(x, y)] = float(raw)
        except ValueError:
            raise MatchError(f"{path}:{lineno}: bad probability {raw!r}") from None
        if x not in tails:
            tails.append(x)
        if y not in heads:
            heads.append(y)
    p = np.zeros((len(tails), len(heads)))
    for (x, y), v in cells.items():
        p[tails.index(x), heads.index(y)] = v
    jd = BipartiteJoint(tails, heads, p)
    jd.validate(tol)
    return jd


# --------------------------------------------------------------- group sizes


def value_universe(pt: PropertyTable, values: Sequence[str] = ()) -> list[str]:
    """``values`` in order, then any further table values in sorted order."""
    out = [str(v) for v in values]
    known = set(out)
    extra = sorted({str(v) for v in pt.values.tolist()} - known)
    return out + extra


def group_sizes(pt: PropertyTable, values: Sequence[str]) -> np.ndarray:
    """Frequency of each of ``values`` in ``pt``; values absent from the table get 0."""
    index = {v: i for i, v in enumerate(values)}
    labels = np.fromiter((index[str(v)] for v in pt.values.tolist()), dtype=np.int64,
                         count=len(pt))
    return np.bincount(labels, minlength=len(values)).astype(np.int64)


def table_labels(pt: PropertyTable, values: Sequence[str]) -> np.ndarray:
    index = {v: i for i, v in enumerate(values)}
    return np.fromiter((index[str(v)] for v in pt.values.tolist()), dtype=np.int64,
                       count=len(pt))


def build_target_matrix(P: JointDistribution | np.ndarray, m: int, q: Sequence[int],
                        mode: str = "counts") -> np.ndarray:
    """Target group-pair matrix ``W``.

    ``counts``: ``W[i][j] = m * p({i,j})``, the expected number of edges per pair.
    ``density``: ``W[i][i] = 2m p({i,i}) / (q_i (q_i - 1))`` and
    ``W[i][j] = 2m p({i,j}) / (q_i q_j)``.
    """
    p = P.p if isinstance(P, JointDistribution) else np.asarray(P, dtype=np.float64)
    if m <= 0:
        raise MatchError("edge count must be positive")
    q = np.asarray(q, dtype=np.float64)
    if mode == "counts":
        return m * p
    if mode == "density":
        k = len(q)
        W = np.zeros((k, k))
        for i in range(k):
            for j in range(k):
                if p[i, j] == 0:
                    continue
                if i == j:
                    if q[i] < 2:
                        raise MatchError(f"density mode: group {i} has size {int(q[i])} < 2 "
                                         "but non-zero diagonal probability")
                    W[i, i] = 2 * m * p[i, i] / (q[i] * (q[i] - 1))
                else:
                    if q[i] == 0 or q[j] == 0:
                        raise MatchError(f"density mode: empty group in pair ({i}, {j})")
                    W[i, j] = 2 * m * p[i, j] / (q[i] * q[j])
        return W
    raise MatchError(f"unknown target mode {mode!r}")


# ------------------------------------------------------------ partition state


def frobenius_upper(D: np.ndarray) -> float:
    """Squared Frobenius norm over unordered pairs (i <= j) of a symmetric matrix."""
    return float((np.square(D).sum() + np.square(np.diag(D)).sum()) / 2)


@dataclass
class PartitionState:
    assignment: np.ndarray
    fill: np.ndarray
    counts: np.ndarray
    residual: float
    capacities: np.ndarray
    target: np.ndarray
    order: np.ndarray = field(repr=False, default=None)
    symmetric: bool = True
    refine_rounds: int = 0
    swaps: int = 0

    @property
    def k(self) -> int:
        return len(self.capacities)

    def recompute_residual(self) -> float:
        D = self.counts - self.target
        if self.symmetric:
            return frobenius_upper(D)
        return float(np.square(D).sum())


def _adjacency(tails: np.ndarray, heads: np.ndarray, n: int):
    """CSR neighbour lists without self-loops, plus per-node self-loop counts."""
    loop = tails == heads
    t, h = tails[~loop], heads[~loop]
    src = np.concatenate([t, h])
    dst = np.concatenate([h, t])
    order = np.argsort(src, kind="stable")
    nbrs = dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    loops = np.bincount(tails[loop], minlength=n)
    return indptr, nbrs, loops


def _check_edges(edges: EdgeTable, n: int) -> None:
    if len(edges) and (min(edges.tails.min(), edges.heads.min()) < 0
                       or max(edges.tails.max(), edges.heads.max()) >= n):
        raise MatchError(f"edge stream references a node outside [0, {n}) "
                         "(group sizes must sum to the node count)")


def _resolve_order(node_order, n: int, seed: int, tag: str) -> np.ndarray:
    if node_order is None:
        return permutation(stream_for(seed, tag), n)
    order = np.asarray(node_order, dtype=np.int64)
    if len(order) != n or not np.array_equal(np.sort(order), np.arange(n)):
        raise MatchError("node_order must be a permutation of all node ids")
    return order


def _check_balance(balance: str) -> None:
    if balance not in BALANCE_RULES:
        raise MatchError(f"unknown balance rule {balance!r}; expected one of {BALANCE_RULES}")


def _refine_budget(n: int, k: int) -> bool:
    return n * k <= REFINE_MAX_CELLS


def _swap_tol(m: float) -> float:
    # float noise on residual changes grows with the squared counts
    return 1e-12 * (m + 1.0) ** 2 + 1e-9


def sbm_part(
    edges: EdgeTable,
    q: Sequence[int],
    W: np.ndarray,
    node_order: Sequence[int] | None = None,
    *,
    seed: int = 42,
    balance: str = "progressive",
    refine: int = DEFAULT_REFINE_ROUNDS,
    trace: Callable[[int, int, PartitionState], None] | None = None,
) -> PartitionState:
    """Greedy streaming placement of ``sum(q)`` nodes into groups of sizes ``q``.

    Node ``v`` arrives with its edges to already-placed neighbours (plus its
    self-loops); edges to later neighbours are counted when those arrive.
    Two scoring rules are available:

    ``"divide"``
        residual ``||C + dC_t - W||^2`` over ``1 - s_t/q_t``, smallest wins,
        ties to the lowest index.
    ``"progressive"`` (default)
        the target is scaled to the edges seen so far, ``(E + e) W / m``.
        The gain is the drop of that residual if ``v`` joins ``t``; the score
        ``max(gain, 0) * (1 - s_t/q_t)`` is maximised, ties go to the group
        with most spare room, then the lowest index.

    After the stream, up to ``refine`` rounds of pairwise swaps lower
    ``||C - W||^2`` without changing any group size (``refine=0`` keeps the
    pure streaming result). ``state.residual`` always tracks ``||C - W||^2``.
    ``trace(step, node, state)`` is called after every streaming placement.
    """
    q = np.asarray(q, dtype=np.int64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    k = len(q)
    n = int(q.sum())
    if np.any(q < 0):
        raise MatchError("group sizes must be non-negative")
    if W.shape != (k, k) or not np.all(np.isfinite(W)):
        raise MatchError(f"target must be a finite {k}x{k} matrix")
    _check_edges(edges, n)
    _check_balance(balance)
    order = _resolve_order(node_order, n, seed, "sbm-part")
    indptr, nbrs, loops = _adjacency(edges.tails, edges.heads, n)

    assignment = np.full(n, -1, dtype=np.int64)
    fill = np.zeros(k, dtype=np.int64)
    C = np.zeros((k, k), dtype=np.int64)
    D = -W.copy()
    resid = np.array([frobenius_upper(D)])
    seen = np.zeros(1, dtype=np.int64)
    m_target = float(np.triu(W).sum())
    rule = _k.PROGRESSIVE if balance == "progressive" else _k.DIVIDE
    state = PartitionState(assignment, fill, C, float(resid[0]), q, W, order)
    args = (indptr, nbrs, loops, assignment, fill, q, C, D, W, m_target, seen, resid, rule)
    if trace is None:
        done = _k.greedy_steps(order, 0, n, *args)
    else:
        done = 0
        for step in range(n):
            if _k.greedy_steps(order, step, step + 1, *args) == step:
                break
            done = step + 1
            state.residual = float(resid[0])
            trace(step, int(order[step]), state)
    if done < n:
        raise MatchError("all groups are full but nodes remain (sum(q) mismatch)")
    if refine > 0 and k > 1 and _refine_budget(n, k):
        rounds, swaps = _k.refine_symmetric(indptr, nbrs, loops, assignment, q, D,
                                           refine, REFINE_REL_TOL, _swap_tol(m_target), True)
        state.refine_rounds, state.swaps = int(rounds), int(swaps)
        C[:] = _group_pair_counts(edges, assignment, k)
        resid[0] = frobenius_upper(C - W)
    state.residual = float(resid[0])
    return state


def sbm_part_bipartite(
    edges: EdgeTable,
    q_tail: Sequence[int],
    q_head: Sequence[int],
    W: np.ndarray,
    node_order: Sequence[int] | None = None,
    *,
    seed: int = 42,
    balance: str = "progressive",
    refine: int = DEFAULT_REFINE_ROUNDS,
    trace: Callable | None = None,
) -> tuple[PartitionState, PartitionState]:
    """SBM-Part for edges between two node types.

    Tail ids and head ids are separate id spaces. ``node_order`` ranges over
    ``n_tail + n_head`` combined ids: tail ``i`` is ``i``, head ``j`` is
    ``n_tail + j``. ``W`` is ``k_tail x k_head``; a tail placement updates only
    its row of the counts, a head placement only its column. The residual is
    the plain squared Frobenius norm over all entries. ``balance`` and
    ``refine`` behave as in :func:`sbm_part`; refinement alternates between
    swapping tails and swapping heads.
    """
    _check_balance(balance)
    qt = np.asarray(q_tail, dtype=np.int64)
    qh = np.asarray(q_head, dtype=np.int64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    kt, kh = len(qt), len(qh)
    if np.any(qt < 0) or np.any(qh < 0):
        raise MatchError("group sizes must be non-negative")
    if W.shape != (kt, kh) or not np.all(np.isfinite(W)):
        raise MatchError(f"target must be a finite {kt}x{kh} matrix")
    nt, nh = int(qt.sum()), int(qh.sum())
    if len(edges) and (edges.tails.min() < 0 or edges.tails.max() >= nt
                       or edges.heads.min() < 0 or edges.heads.max() >= nh):
        raise MatchError("edge stream references an unknown node")
    order = _resolve_order(node_order, nt + nh, seed, "sbm-part-bipartite")
    # combined adjacency: heads shifted by nt
    indptr, nbrs, _ = _adjacency(edges.tails, edges.heads + nt, nt + nh)

    assign = np.full(nt + nh, -1, dtype=np.int64)
    C = np.zeros((kt, kh), dtype=np.int64)
    D = -W.copy()
    resid = np.array([float(np.square(D).sum())])
    seen = np.zeros(1, dtype=np.int64)
    m_target = float(W.sum())
    rule = _k.PROGRESSIVE if balance == "progressive" else _k.DIVIDE
    fill_t = np.zeros(kt, dtype=np.int64)
    fill_h = np.zeros(kh, dtype=np.int64)
    tail_state = PartitionState(assign[:nt], fill_t, C, float(resid[0]), qt, W, order, False)
    head_state = PartitionState(assign[nt:], fill_h, C, float(resid[0]), qh, W, order, False)
    args = (nt, indptr, nbrs, assign, fill_t, qt, fill_h, qh, C, D, W, m_target, seen, resid, rule)
    total = nt + nh
    if trace is None:
        done = _k.greedy_steps_bipartite(order, 0, total, *args)
    else:
        done = 0
        for step in range(total):
            if _k.greedy_steps_bipartite(order, step, step + 1, *args) == step:
                break
            done = step + 1
            tail_state.residual = head_state.residual = float(resid[0])
            trace(step, int(order[step]), tail_state, head_state)
    if done < total:
        raise MatchError("all groups are full but nodes remain")
    if refine > 0 and (kt > 1 or kh > 1) and _refine_budget(nt, kh) and _refine_budget(nh, kt):
        tol = _swap_tol(m_target)
        rounds = swaps = 0
        for _ in range(refine):
            before = float(np.square(D).sum())
            r1, s1 = _k.refine_rows(indptr, nbrs, assign, 0, nt, kh, qt, D, 1, 0.0, tol, True)
            DT = np.ascontiguousarray(D.T)
            r2, s2 = _k.refine_rows(indptr, nbrs, assign, nt, nt + nh, kt, qh, DT, 1, 0.0, tol, True)
            D[:] = DT.T
            rounds += 1
            swaps += int(s1 + s2)
            after = float(np.square(D).sum())
            if s1 + s2 == 0 or before - after <= REFINE_REL_TOL * before:
                break
        tail_state.refine_rounds = head_state.refine_rounds = rounds
        tail_state.swaps = head_state.swaps = swaps
        C[:] = np.bincount(assign[edges.tails] * kh + assign[nt + edges.heads],
                           minlength=kt * kh).reshape(kt, kh)
        resid[0] = float(np.square(C - W).sum())
    tail_state.residual = head_state.residual = float(resid[0])
    return tail_state, head_state


def ldg_partition(
    edges: EdgeTable,
    k: int,
    capacities: Sequence[int],
    node_order: Sequence[int] | None = None,
    *,
    n: int | None = None,
    seed: int = 42,
) -> PartitionState:
    """Linear deterministic greedy: most placed neighbours times ``1 - s_t/cap_t``.

    Full groups are skipped. Equal scores go to the group with the larger
    remaining capacity fraction, then to the lowest index, so nodes without
    placed neighbours spread over the groups by fill level.
    """
    cap = np.asarray(capacities, dtype=np.int64)
    if len(cap) != k:
        raise MatchError(f"expected {k} capacities, got {len(cap)}")
    if n is None:
        n = int(max(edges.tails.max(initial=-1), edges.heads.max(initial=-1))) + 1
        n = max(n, len(node_order) if node_order is not None else 0)
    if cap.sum() < n:
        raise MatchError(f"capacities sum to {cap.sum()} < {n} nodes")
    _check_edges(edges, n)
    order = _resolve_order(node_order, n, seed, "ldg")
    indptr, nbrs, _ = _adjacency(edges.tails, edges.heads, n)
    assignment = np.full(n, -1, dtype=np.int64)
    fill = np.zeros(k, dtype=np.int64)
    if _k.ldg_steps(order, indptr, nbrs, assignment, fill, cap) < n:
        raise MatchError("all groups are full but nodes remain")
    C = _group_pair_counts(edges, assignment, k)
    return PartitionState(assignment, fill, C, 0.0, cap, np.zeros((k, k)), order)


def _group_pair_counts(edges: EdgeTable, labels: np.ndarray, k: int) -> np.ndarray:
    a = labels[edges.tails]
    b = labels[edges.heads]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    c = np.bincount(lo * k + hi, minlength=k * k).reshape(k, k)
    return c + np.triu(c, 1).T


# ------------------------------------------------------------------- mapping


def build_mapping(state: PartitionState, pt: PropertyTable,
                  values: Sequence[str] | None = None) -> np.ndarray:
    """Bijection ``f[node] -> property-table id`` with ``value(f(v)) == values[group(v)]``.

    Within a group, nodes in ascending id order take the table ids carrying
    that group's value in ascending id order.
    """
    if values is None:
        values = value_universe(pt)
    labels = table_labels(pt, values)
    assignment = np.asarray(state.assignment)
    if len(labels) != len(assignment):
        raise MatchError(f"{len(assignment)} structure nodes but {len(labels)} table rows")
    k = len(values)
    node_freq = np.bincount(assignment, minlength=k)
    row_freq = np.bincount(labels, minlength=k)
    if not np.array_equal(node_freq, row_freq):
        bad = int(np.flatnonzero(node_freq != row_freq)[0])
        raise MatchError(f"group {values[bad]!r}: {node_freq[bad]} nodes but "
                         f"{row_freq[bad]} table rows with that value")
    nodes = np.argsort(assignment, kind="stable")
    rows = np.argsort(labels, kind="stable")
    f = np.empty(len(assignment), dtype=np.int64)
    f[nodes] = rows
    return f


def random_mapping(n: int, seed: int, tag: str) -> np.ndarray:
    """Uncorrelated matching: a seeded permutation of table ids."""
    return permutation(stream_for(seed, tag), n)


# ----------------------------------------------------------------- measuring


def empirical_joint(edges: EdgeTable, labels: np.ndarray,
                    values: Sequence[str] | int) -> JointDistribution:
    """Observed ``P'({x,y})``: fraction of edges whose endpoint labels are ``{x,y}``."""
    if isinstance(values, int):
        values = [str(i) for i in range(values)]
    values = list(values)
    m = len(edges)
    if m == 0:
        raise MatchError("empirical joint distribution of an empty edge set is undefined")
    labels = np.asarray(labels, dtype=np.int64)
    c = _group_pair_counts(edges, labels, len(values))
    return JointDistribution(values, c / m)


def empirical_bipartite(edges: EdgeTable, tail_labels: np.ndarray, head_labels: np.ndarray,
                        tail_values: Sequence[str], head_values: Sequence[str]) -> BipartiteJoint:
    m = len(edges)
    if m == 0:
        raise MatchError("empirical joint distribution of an empty edge set is undefined")
    kt, kh = len(tail_values), len(head_values)
    c = np.bincount(np.asarray(tail_labels)[edges.tails] * kh + np.asarray(head_labels)[edges.heads],
                    minlength=kt * kh).reshape(kt, kh)
    return BipartiteJoint(list(tail_values), list(head_values), c / m)


def distribution_distance(P, Q) -> float:
    """L1 distance over unordered pairs (maximum 2); ordered cells for bipartite joints."""
    if isinstance(P, BipartiteJoint) or isinstance(Q, BipartiteJoint):
        if P.p.shape != Q.p.shape:
            raise MatchError(f"dimension mismatch: {P.p.shape} vs {Q.p.shape}")
        return float(np.abs(P.p - Q.p).sum())
    if P.k != Q.k:
        raise MatchError(f"dimension mismatch: {P.k} vs {Q.k} values")
    return float(np.abs(P.pair_mass() - Q.pair_mass()).sum())


@dataclass(frozen=True)
class CdfRow:
    rank: int
    value_x: str
    value_y: str
    expected_cdf: float
    observed_cdf: float


def cdf_report(P: JointDistribution, Q: JointDistribution) -> list[CdfRow]:
    """Pairs sorted by decreasing expected probability with both running sums."""
    if P.k != Q.k:
        raise MatchError(f"dimension mismatch: {P.k} vs {Q.k} values")
    iu, ju = np.triu_indices(P.k)
    exp = P.p[iu, ju]
    obs = Q.p[iu, ju]
    order = np.argsort(-exp, kind="stable")
    ecdf = np.cumsum(exp[order])
    ocdf = np.cumsum(obs[order])
    return [
        CdfRow(r + 1, P.values[iu[o]], P.values[ju[o]], float(ecdf[r]), float(ocdf[r]))
        for r, o in enumerate(order.tolist())
    ]


def write_cdf_csv(rows: Sequence[CdfRow], path) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "value_x", "value_y", "expected_cdf", "observed_cdf"])
        for r in rows:
            w.writerow([r.rank, r.value_x, r.value_y, f"{r.expected_cdf:.12g}",
                        f"{r.observed_cdf:.12g}"])
