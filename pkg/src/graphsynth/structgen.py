"""Structure generators: RMAT, planted partition, and degree-driven one-to-many.

Each generator exposes ``run(n) -> EdgeTable`` and ``get_num_nodes(m) -> n``.
All randomness is drawn from skip-ahead streams indexed by edge id, tail id or
node id, so output depends only on parameters and the stream seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .params import Param, bind_params
from .rng import RandomStream, stream_for, to_unit
from .store import EdgeTable

RMAT_DEFAULTS = (0.57, 0.19, 0.19, 0.05)


class StructureError(ValueError):
    pass


class InfeasibleError(StructureError):
    pass


# ------------------------------------------------------------------------ RMAT


def _rmat_quadrants(stream: RandomStream, edge_ids: np.ndarray, scale: int, probs):
    a, b, c, _ = probs
    ab, abc = a + b, a + b + c
    tails = np.zeros(len(edge_ids), dtype=np.int64)
    heads = np.zeros(len(edge_ids), dtype=np.int64)
    base = edge_ids.astype(np.uint64) * np.uint64(scale)
    for level in range(scale):
        u = to_unit(stream.values_at(base + np.uint64(level)))
        row = u >= ab
        col = ((u >= a) & (u < ab)) | (u >= abc)
        tails = (tails << 1) | row
        heads = (heads << 1) | col
    return tails, heads


def _check_probs(a, b, c, d):
    probs = (a, b, c, d)
    if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
        raise StructureError(f"RMAT probabilities must be non-negative and sum to 1, got {probs}")
    return probs


def dedup_edges(tails: np.ndarray, heads: np.ndarray, n: int):
    """Drop self-loops and repeated (tail, head) pairs, keeping first occurrences in id order."""
    keep = tails != heads
    key = tails * np.int64(max(n, 1)) + heads
    _, first = np.unique(key, return_index=True)
    mask = np.zeros(len(tails), dtype=bool)
    mask[first] = True
    keep &= mask
    return tails[keep], heads[keep]


def rmat_edges(
    scale: int,
    edge_factor: int = 16,
    a: float = RMAT_DEFAULTS[0],
    b: float = RMAT_DEFAULTS[1],
    c: float = RMAT_DEFAULTS[2],
    d: float = RMAT_DEFAULTS[3],
    seed: int | RandomStream = 42,
    *,
    edge_type: str = "rmat",
    dedup: bool = False,
) -> EdgeTable:
    """Graph500-style RMAT on ``2**scale`` nodes with ``edge_factor * 2**scale`` edges.

    Edge ``e`` draws its ``scale`` quadrant choices from stream positions
    ``e*scale .. e*scale + scale - 1``.
    """
    probs = _check_probs(a, b, c, d)
    if scale < 1:
        raise StructureError(f"scale must be >= 1, got {scale}")
    stream = seed if isinstance(seed, RandomStream) else stream_for(seed, edge_type)
    n = 1 << scale
    m = n * edge_factor
    tails, heads = _rmat_quadrants(stream, np.arange(m, dtype=np.int64), scale, probs)
    if dedup:
        tails, heads = dedup_edges(tails, heads, n)
    return EdgeTable(edge_type, tails, heads)


# ---------------------------------------------------------- planted partition


def _power_law_degrees(avg_degree: float, max_degree: int) -> np.ndarray:
    """Probabilities p(d) proportional to d**-gamma on 1..max_degree with the given mean."""
    if not 1 <= avg_degree <= max_degree:
        raise StructureError(f"avg_degree must lie in [1, max_degree], got {avg_degree}")
    d = np.arange(1, max_degree + 1, dtype=np.float64)
    if max_degree == 1:
        return np.ones(1)

    def mean(g):
        w = np.exp(-g * np.log(d))
        return float((d * w).sum() / w.sum())

    lo, hi = -60.0, 60.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean(mid) > avg_degree:
            lo = mid
        else:
            hi = mid
    w = np.exp(-0.5 * (lo + hi) * np.log(d))
    return w / w.sum()


def _community_sizes(n: int, min_comm: int, max_comm: int, stream: RandomStream) -> list[int]:
    if n <= 0:
        return []
    if n < min_comm:
        return [n]
    max_comm = min(max_comm, n)
    sizes: list[int] = []
    total = 0
    j = 0
    span = max_comm - min_comm + 1
    while total < n:
        s = min_comm + min(int(to_unit(stream.values_at([j]))[0] * span), span - 1)
        j += 1
        if total + s > n:
            break
        sizes.append(s)
        total += s
    rest = n - total
    if rest >= min_comm or not sizes:
        sizes.append(rest)
    else:
        # spread a short remainder over the smallest communities
        i = 0
        order = np.argsort(sizes, kind="stable")
        while rest > 0:
            k = int(order[i % len(order)])
            if sizes[k] < max_comm:
                sizes[k] += 1
                rest -= 1
            i += 1
            if i > len(order) * (max_comm + 1):
                sizes.append(rest)
                rest = 0
    return [s for s in sizes if s > 0]


class _Fenwick:
    def __init__(self, counts):
        self.n = len(counts)
        self.tree = [0] * (self.n + 1)
        for i, c in enumerate(counts):
            self.add(i, c)

    def add(self, i: int, delta: int) -> None:
        i += 1
        while i <= self.n:
            self.tree[i] += delta
            i += i & -i

    def prefix(self, i: int) -> int:
        s = 0
        while i > 0:
            s += self.tree[i]
            i -= i & -i
        return s

    def find(self, r: int) -> int:
        """Smallest index whose inclusive prefix sum exceeds ``r``."""
        pos = 0
        step = 1 << self.n.bit_length()
        while step:
            nxt = pos + step
            if nxt <= self.n and self.tree[nxt] <= r:
                pos = nxt
                r -= self.tree[nxt]
            step >>= 1
        return pos


def _assign_communities(d_in: np.ndarray, sizes: list[int], stream: RandomStream) -> np.ndarray:
    """Place nodes, largest internal degree first, into communities with room for their degree."""
    n = len(d_in)
    order_c = np.argsort(-np.asarray(sizes), kind="stable")
    sorted_sizes = np.asarray(sizes)[order_c]
    fen = _Fenwick(sorted_sizes.tolist())
    tie = stream.substream("tie").values_at(np.arange(n))
    node_order = np.lexsort((tie, -d_in))
    u = to_unit(stream.substream("pick").values_at(np.arange(n)))
    # number of communities (in descending size order) that can hold internal degree x
    neg_sizes = -sorted_sizes
    comm = np.empty(n, dtype=np.int64)
    for v in node_order.tolist():
        need = int(d_in[v])
        prefix_len = int(np.searchsorted(neg_sizes, -need, side="left"))
        free = fen.prefix(prefix_len)
        if free == 0:
            biggest = int(sorted_sizes[0]) if len(sorted_sizes) else 0
            raise InfeasibleError(
                f"node {v} needs internal degree {need} but no community with free room has "
                f"more than {need} members (largest community size {biggest})"
            )
        r = min(int(u[v] * free), free - 1)
        k = fen.find(r)
        fen.add(k, -1)
        comm[v] = int(order_c[k])
    return comm


def _match_stubs(stub_nodes, stub_groups, stream, n, existing, forbid_same=None, rounds=64):
    """Random stub pairing within groups, retrying pairs that are loops, repeats, or forbidden."""
    accepted_t, accepted_h = [], []
    existing = np.asarray(existing, dtype=np.int64)
    order = np.lexsort((stub_nodes, stub_groups))
    nodes, groups = stub_nodes[order], stub_groups[order]
    # make every group even by dropping its last stub
    if len(groups):
        bounds = np.flatnonzero(np.diff(groups)) + 1
        starts = np.concatenate([[0], bounds])
        ends = np.concatenate([bounds, [len(groups)]])
        odd = (ends - starts) % 2 == 1
        keep = np.ones(len(groups), dtype=bool)
        keep[ends[odd] - 1] = False
        nodes, groups = nodes[keep], groups[keep]
    for r in range(rounds):
        if len(nodes) == 0:
            break
        keys = stream.substream(f"round{r}").values_at(np.arange(len(nodes)))
        o = np.lexsort((keys, groups))
        s = nodes[o]
        g = groups[o]
        u, v = s[0::2], s[1::2]
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        key = lo * np.int64(n) + hi
        bad = lo == hi
        if forbid_same is not None:
            bad |= forbid_same[lo] == forbid_same[hi]
        if len(existing):
            pos = np.searchsorted(existing, key)
            pos = np.minimum(pos, len(existing) - 1)
            bad |= existing[pos] == key
        good_idx = np.flatnonzero(~bad)
        _, first = np.unique(key[good_idx], return_index=True)
        ok = np.zeros(len(key), dtype=bool)
        ok[good_idx[first]] = True
        accepted_t.append(lo[ok])
        accepted_h.append(hi[ok])
        existing = np.union1d(existing, key[ok])
        retry = ~ok
        nodes = np.concatenate([u[retry], v[retry]])
        groups = np.concatenate([g[0::2][retry], g[1::2][retry]])
        if ok.sum() == 0 and r >= 8:
            break
    if accepted_t:
        return np.concatenate(accepted_t), np.concatenate(accepted_h), existing
    return np.empty(0, np.int64), np.empty(0, np.int64), existing


@dataclass
class PlantedPartition:
    edges: EdgeTable
    communities: np.ndarray
    degrees: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return int(self.communities.max()) + 1 if len(self.communities) else 0

    def mixing(self) -> float:
        """Fraction of edges whose endpoints lie in different communities."""
        e = self.edges
        if len(e) == 0:
            return 0.0
        return float(np.mean(self.communities[e.tails] != self.communities[e.heads]))


def planted_partition(
    n: int,
    avg_degree: float = 20,
    max_degree: int = 50,
    min_comm: int = 10,
    max_comm: int = 50,
    mixing: float = 0.1,
    seed: int | RandomStream = 42,
    *,
    edge_type: str = "planted",
) -> PlantedPartition:
    """Community graph with LFR's headline knobs: degree range/mean, community sizes, mixing.

    Degrees follow ``p(d) ~ d**-gamma`` on ``1..max_degree`` with gamma fitted
    to ``avg_degree``. Each node sends ``mixing`` of its stubs outside its
    community (stochastic rounding). Self-loops and repeated edges are
    rejected and re-paired; stubs still unmatched after the retry rounds are
    dropped.
    """
    if not 0.0 <= mixing <= 1.0:
        raise StructureError(f"mixing must lie in [0, 1], got {mixing}")
    if min_comm < 1 or max_comm < min_comm:
        raise StructureError(f"need 1 <= min_comm <= max_comm, got {min_comm}, {max_comm}")
    stream = seed if isinstance(seed, RandomStream) else stream_for(seed, edge_type)
    empty = np.empty(0, np.int64)
    if n <= 0:
        return PlantedPartition(EdgeTable(edge_type, empty, empty), empty, empty)
    sizes = _community_sizes(n, min_comm, max_comm, stream.substream("sizes"))
    pd = _power_law_degrees(avg_degree, max_degree)
    cum = np.cumsum(pd)
    cum[-1] = 1.0
    ids = np.arange(n)
    deg = np.searchsorted(cum, stream.substream("degree").uniforms_at(ids), side="right") + 1
    deg = np.minimum(deg, max_degree).astype(np.int64)
    u_out = stream.substream("mix").uniforms_at(ids)
    d_out = np.floor(mixing * deg + u_out).astype(np.int64)
    d_out = np.clip(d_out, 0, deg)
    d_in = deg - d_out
    comm = _assign_communities(d_in, sizes, stream.substream("assign"))

    in_nodes = np.repeat(ids, d_in)
    t_in, h_in, existing = _match_stubs(
        in_nodes, comm[in_nodes], stream.substream("internal"), n, np.empty(0, np.int64)
    )
    out_nodes = np.repeat(ids, d_out)
    forbid = comm if len(sizes) > 1 else None
    t_out, h_out, _ = _match_stubs(
        out_nodes, np.zeros(len(out_nodes), np.int64), stream.substream("external"), n,
        existing, forbid_same=forbid,
    )
    tails = np.concatenate([t_in, t_out])
    heads = np.concatenate([h_in, h_out])
    o = np.lexsort((heads, tails))
    return PlantedPartition(EdgeTable(edge_type, tails[o], heads[o]), comm, deg)


def planted_partition_edges(n, avg_degree=20, max_degree=50, min_comm=10, max_comm=50,
                            mixing=0.1, seed=42, *, edge_type="planted") -> EdgeTable:
    return planted_partition(n, avg_degree, max_degree, min_comm, max_comm, mixing, seed,
                             edge_type=edge_type).edges


# --------------------------------------------------------------- degree-driven


@dataclass
class DegreeDistribution:
    degrees: np.ndarray
    probabilities: np.ndarray
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.degrees = np.asarray(self.degrees, dtype=np.int64)
        self.probabilities = np.asarray(self.probabilities, dtype=np.float64)
        if len(self.degrees) == 0 or len(self.degrees) != len(self.probabilities):
            raise StructureError("degree distribution needs matching, non-empty columns")
        if np.any(self.degrees < 0) or np.any(self.probabilities < 0):
            raise StructureError("degrees and probabilities must be non-negative")
        if abs(self.probabilities.sum() - 1.0) > 1e-9:
            raise StructureError(
                f"degree probabilities must sum to 1, got {self.probabilities.sum():.12g}"
            )
        cum = np.cumsum(self.probabilities)
        cum[-1] = 1.0
        self.cumulative = cum

    @property
    def mean(self) -> float:
        return float((self.degrees * self.probabilities).sum())

    @property
    def max_degree(self) -> int:
        return int(self.degrees[self.probabilities > 0].max())

    def sample(self, u: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.cumulative, u, side="right")
        return self.degrees[np.minimum(idx, len(self.degrees) - 1)]

    @classmethod
    def point_mass(cls, degree: int) -> "DegreeDistribution":
        return cls([degree], [1.0])

    @classmethod
    def geometric(cls, mean: float, tail: float = 1e-15) -> "DegreeDistribution":
        """p(d) = p (1-p)^d on d >= 0 with the given mean, truncated where the tail drops below ``tail``."""
        if mean <= 0:
            raise StructureError("geometric mean must be positive")
        p = 1.0 / (1.0 + mean)
        dmax = int(math.ceil(math.log(tail) / math.log(1.0 - p)))
        d = np.arange(dmax + 1)
        w = p * (1.0 - p) ** d
        return cls(d, w / w.sum())

    @classmethod
    def poisson(cls, mean: float, tail: float = 1e-15) -> "DegreeDistribution":
        """Poisson(mean) on d >= 0, cut once the remaining upper tail is below ``tail``."""
        if mean <= 0:
            raise StructureError("poisson mean must be positive")
        dmax = int(mean + 10 * math.sqrt(mean) + 20)
        d = np.arange(dmax + 1)
        lg = np.array([math.lgamma(x + 1.0) for x in d])
        w = np.exp(d * math.log(mean) - mean - lg)
        keep = max(int(mean), int(np.searchsorted(np.cumsum(w), 1.0 - tail)))
        w = w[: keep + 1]
        return cls(d[: keep + 1], w / w.sum())

    @classmethod
    def from_csv(cls, path) -> "DegreeDistribution":
        """CSV ``degree,probability``; a header row is optional."""
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if rows and rows[0][0].strip().lower() == "degree":
            rows = rows[1:]
        try:
            return cls([int(r[0]) for r in rows], [float(r[1]) for r in rows])
        except (IndexError, ValueError) as exc:
            raise StructureError(f"{path}: bad degree distribution ({exc})") from exc


def degree_driven_edges(n_tail: int, dist: DegreeDistribution, seed: int | RandomStream = 42,
                        *, edge_type: str = "degree") -> EdgeTable:
    """One-to-many edges: tail ``t`` gets ``deg(t)`` fresh heads, numbered densely in tail order."""
    stream = seed if isinstance(seed, RandomStream) else stream_for(seed, edge_type)
    deg = dist.sample(stream.uniforms_at(np.arange(n_tail)))
    tails = np.repeat(np.arange(n_tail, dtype=np.int64), deg)
    return EdgeTable(edge_type, tails, np.arange(len(tails), dtype=np.int64))


# ------------------------------------------------------------ generator objects


class StructureGenerator:
    """Pluggable structure generator: ``run(n)`` builds edges on ``n`` nodes."""

    name = ""
    params: tuple[Param, ...] = ()
    one_to_many = False
    exact_edges = True

    def __init__(self, stream: RandomStream | None = None, edge_type: str | None = None, **kw):
        self.edge_type = edge_type or self.name
        self.stream = stream if stream is not None else stream_for(42, self.edge_type)
        self.initialize(**kw)

    @classmethod
    def from_binding(cls, binding, base_dir=None, *, stream=None, edge_type=None):
        return cls(stream=stream, edge_type=edge_type,
                   **bind_params(cls.params, binding.parameters, base_dir))

    def initialize(self, **kw) -> None:
        pass

    def run(self, n: int) -> EdgeTable:
        raise NotImplementedError

    def get_num_nodes(self, m: int) -> int:
        raise NotImplementedError

    def n_head(self, n: int, et: EdgeTable) -> int:
        """Size of the head id space of ``run(n)``."""
        return len(et) if self.one_to_many else n


class RmatGenerator(StructureGenerator):
    name = "rmat"
    params = (
        Param("edge_factor", "int", 16),
        Param("a", "float", RMAT_DEFAULTS[0]),
        Param("b", "float", RMAT_DEFAULTS[1]),
        Param("c", "float", RMAT_DEFAULTS[2]),
        Param("d", "float", RMAT_DEFAULTS[3]),
        Param("dedup", "bool", False),
    )

    def initialize(self, edge_factor=16, a=RMAT_DEFAULTS[0], b=RMAT_DEFAULTS[1],
                   c=RMAT_DEFAULTS[2], d=RMAT_DEFAULTS[3], dedup=False):
        if edge_factor < 1:
            raise StructureError("edge_factor must be >= 1")
        self.probs = _check_probs(a, b, c, d)
        self.edge_factor = edge_factor
        self.dedup = bool(dedup)
        self.exact_edges = not self.dedup

    def run(self, n: int) -> EdgeTable:
        """``n * edge_factor`` edges; for non-power-of-two ``n`` out-of-range endpoints are redrawn."""
        empty = np.empty(0, np.int64)
        if n <= 0:
            return EdgeTable(self.edge_type, empty, empty)
        scale = max(1, (n - 1).bit_length())
        m = n * self.edge_factor
        eids = np.arange(m, dtype=np.int64)
        tails, heads = _rmat_quadrants(self.stream, eids, scale, self.probs)
        attempt = 0
        bad = np.flatnonzero((tails >= n) | (heads >= n))
        while len(bad):
            attempt += 1
            if attempt > 256:
                raise StructureError(f"rmat: could not place {len(bad)} edges within {n} nodes")
            t, h = _rmat_quadrants(self.stream.substream(f"retry{attempt}"), bad, scale,
                                   self.probs)
            tails[bad], heads[bad] = t, h
            bad = bad[(t >= n) | (h >= n)]
        if self.dedup:
            tails, heads = dedup_edges(tails, heads, n)
        return EdgeTable(self.edge_type, tails, heads)

    def get_num_nodes(self, m: int) -> int:
        if m <= 0:
            return 0
        ratio = m / self.edge_factor
        return 1 << max(1, math.ceil(math.log2(ratio)))


class PlantedGenerator(StructureGenerator):
    name = "planted"
    params = (
        Param("avg_degree", "float", 20.0),
        Param("max_degree", "int", 50),
        Param("min_comm", "int", 10),
        Param("max_comm", "int", 50),
        Param("mixing", "float", 0.1),
    )
    exact_edges = False

    def initialize(self, avg_degree=20.0, max_degree=50, min_comm=10, max_comm=50, mixing=0.1):
        self.avg_degree = avg_degree
        self.max_degree = max_degree
        self.min_comm = min_comm
        self.max_comm = max_comm
        self.mixing = mixing
        _power_law_degrees(avg_degree, max_degree)
        if not 0.0 <= mixing <= 1.0:
            raise StructureError("mixing must lie in [0, 1]")

    def generate(self, n: int) -> PlantedPartition:
        return planted_partition(n, self.avg_degree, self.max_degree, self.min_comm,
                                 self.max_comm, self.mixing, self.stream,
                                 edge_type=self.edge_type)

    def run(self, n: int) -> EdgeTable:
        return self.generate(n).edges

    def get_num_nodes(self, m: int) -> int:
        return max(0, math.ceil(2 * m / self.avg_degree))


class DegreeGenerator(StructureGenerator):
    name = "degree"
    params = (
        Param("file", "path", None),
        Param("constant", "int", None),
        Param("mean", "float", None),
        Param("geometric", "float", None),
    )
    one_to_many = True
    exact_edges = False

    def initialize(self, file=None, constant=None, mean=None, geometric=None,
                   dist: DegreeDistribution | None = None):
        given = [x is not None for x in (file, constant, mean, geometric, dist)]
        if sum(given) != 1:
            raise StructureError("degree: give exactly one of file=, constant=, mean=, geometric=")
        if dist is not None:
            self.dist = dist
        elif file is not None:
            self.dist = DegreeDistribution.from_csv(Path(file))
        elif constant is not None:
            self.dist = DegreeDistribution.point_mass(int(constant))
        elif mean is not None:
            self.dist = DegreeDistribution.poisson(float(mean))
        else:
            self.dist = DegreeDistribution.geometric(float(geometric))
        self.exact_edges = len(self.dist.degrees[self.dist.probabilities > 0]) == 1

    def run(self, n: int) -> EdgeTable:
        return degree_driven_edges(n, self.dist, self.stream, edge_type=self.edge_type)

    def get_num_nodes(self, m: int) -> int:
        mean = self.dist.mean
        if mean <= 0:
            raise StructureError("degree: cannot size a graph from a zero-mean degree distribution")
        x = m / mean
        # truncated distributions carry a mean a few ulps off the nominal one
        return max(0, math.ceil(x - 1e-9 * max(1.0, x)))


STRUCTURE_GENERATORS: dict[str, type[StructureGenerator]] = {
    g.name: g for g in (RmatGenerator, PlantedGenerator, DegreeGenerator)
}


def invert_size(g: StructureGenerator, m: int) -> int:
    if m < 0:
        raise StructureError("edge count must be non-negative")
    return g.get_num_nodes(m)
