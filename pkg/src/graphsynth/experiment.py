"""Matching-quality experiment: plant a partition with LDG, then recover it with SBM-Part.

Protocol:
  1. generate a graph (planted partition or RMAT);
  2. group sizes from a geometric law floored at ``1/k``;
  3. LDG-partition the graph into groups of exactly those sizes;
  4. label nodes by group and measure the joint distribution ``P``;
  5. run SBM-Part with a random node order against ``W = m P``;
  6. compare ``P`` with the observed ``P'``.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .matcher import (
    CdfRow,
    build_target_matrix,
    cdf_report,
    distribution_distance,
    empirical_joint,
    ldg_partition,
    sbm_part,
    write_cdf_csv,
)
from .rng import DEFAULT_SEED, permutation, stream_for
from .structgen import planted_partition, rmat_edges

LFR_LIKE = dict(avg_degree=20, max_degree=50, min_comm=10, max_comm=50, mixing=0.1)


@dataclass
class ExperimentConfig:
    generator: str = "planted"
    nodes: int | None = 10_000
    scale: int | None = None
    values: int = 16
    seed: int = DEFAULT_SEED
    geo_p: float = 0.4
    mixing: float = 0.1
    edge_factor: int = 16
    balance: str = "progressive"
    report: str | None = None

    def __post_init__(self):
        if self.generator not in ("planted", "rmat"):
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.values < 1:
            raise ValueError("need at least one value")
        if self.generator == "rmat" and self.scale is None:
            raise ValueError("rmat experiments need a scale")
        if self.generator == "planted" and self.nodes is None:
            raise ValueError("planted experiments need a node count")
        if not 0 < self.geo_p <= 1:
            raise ValueError("geometric parameter must lie in (0, 1]")
        if self.size < self.values:
            raise ValueError(f"graph size {self.size} is smaller than k={self.values}")

    @property
    def size(self) -> int:
        return (1 << self.scale) if self.generator == "rmat" else int(self.nodes)


@dataclass
class ExperimentReport:
    n: int
    m: int
    k: int
    l1_distance: float
    seconds: float
    group_sizes: list[int] = field(default_factory=list)
    first_pair_expected: float = 0.0
    first_pair_observed: float = 0.0
    capacity_exact: bool = True
    cdf: list[CdfRow] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("cdf")
        return d


def geometric_group_sizes(n: int, k: int, p: float = 0.4) -> np.ndarray:
    """``n * max(geo(p,i), 1/k) / sum_j max(geo(p,j), 1/k)`` for i = 1..k, largest-remainder rounded."""
    i = np.arange(1, k + 1)
    share = np.maximum(p * (1 - p) ** (i - 1), 1.0 / k)
    raw = n * share / share.sum()
    q = np.floor(raw).astype(np.int64)
    rest = int(n - q.sum())
    frac = raw - q
    # stable sort on -frac: equal remainders go to the lower index
    q[np.argsort(-frac, kind="stable")[:rest]] += 1
    return q


def make_graph(cfg: ExperimentConfig):
    if cfg.generator == "planted":
        params = dict(LFR_LIKE, mixing=cfg.mixing)
        return planted_partition(cfg.nodes, seed=stream_for(cfg.seed, "experiment:graph"),
                                 **params).edges
    return rmat_edges(cfg.scale, cfg.edge_factor, seed=stream_for(cfg.seed, "experiment:graph"))


def run_experiment(cfg: ExperimentConfig, edges=None) -> ExperimentReport:
    t0 = time.perf_counter()
    if edges is None:
        edges = make_graph(cfg)
    n, k = cfg.size, cfg.values
    q = geometric_group_sizes(n, k, cfg.geo_p)
    ldg_order = permutation(stream_for(cfg.seed, "experiment:ldg-order"), n)
    planted = ldg_partition(edges, k, q, ldg_order, n=n)
    values = [str(i) for i in range(k)]
    P = empirical_joint(edges, planted.assignment, values)
    W = build_target_matrix(P, len(edges), q)
    sbm_order = permutation(stream_for(cfg.seed, "experiment:sbm-order"), n)
    state = sbm_part(edges, q, W, sbm_order, balance=cfg.balance)
    observed = empirical_joint(edges, state.assignment, values)
    rows = cdf_report(P, observed)
    first = rows[0]
    i, j = values.index(first.value_x), values.index(first.value_y)
    seconds = time.perf_counter() - t0
    return ExperimentReport(
        n=n,
        m=len(edges),
        k=k,
        l1_distance=distribution_distance(P, observed),
        seconds=seconds,
        group_sizes=q.tolist(),
        first_pair_expected=float(P.p[i, j]),
        first_pair_observed=float(observed.p[i, j]),
        capacity_exact=bool(np.array_equal(state.fill, q) and np.array_equal(planted.fill, q)),
        cdf=rows,
    )


def cdf_path_for(report_path) -> Path:
    p = Path(report_path)
    return p.with_name(p.stem + ".cdf.csv")


def write_report(rep: ExperimentReport, path) -> None:
    path = Path(path)
    body = {
        "n": rep.n,
        "m": rep.m,
        "k": rep.k,
        "l1_distance": rep.l1_distance,
        "seconds": round(rep.seconds, 3),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(body, indent=2) + "\n", encoding="utf-8")
    write_cdf_csv(rep.cdf, cdf_path_for(path))
