"""Schema -> task DAG -> sizes -> tables.

Three task kinds: generate one property table, generate one edge type's
structure, and match a correlated edge type's structure to its property
tables. Every task output is a pure function of the master seed and the
task's inputs, so tasks may run concurrently without affecting the result.
"""

from __future__ import annotations

import json
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matcher import (
    JointDistribution,
    build_mapping,
    build_target_matrix,
    distribution_distance,
    empirical_bipartite,
    empirical_joint,
    load_bipartite_joint_csv,
    load_joint_csv,
    random_mapping,
    sbm_part,
    sbm_part_bipartite,
    table_labels,
    value_universe,
)
from .propgen import PropertyEvaluator, generate_property_table
from .registry import Registry, default_registry
from .rng import stream_for
from .schema import MANY_TO_MANY, ONE_TO_MANY, Schema, ScaleDirective
from .store import EdgeTable, PropertyTable, write_table_csv
from .structgen import invert_size

GEN_PROPERTY = "GenProperty"
GEN_STRUCTURE = "GenStructure"
MATCH = "Match"


class PipelineError(RuntimeError):
    pass


class DagCycleError(PipelineError):
    def __init__(self, members: list[str]):
        self.members = members
        super().__init__("task dependency cycle: " + " -> ".join(members))


@dataclass(frozen=True)
class Task:
    kind: str
    target: str

    @property
    def name(self) -> str:
        return f"{self.kind}:{self.target}"

    @property
    def owner(self) -> str:
        return self.target.split(".", 1)[0]

    @property
    def prop(self) -> str | None:
        parts = self.target.split(".", 1)
        return parts[1] if len(parts) == 2 else None


@dataclass
class SizeRule:
    """How a node type's row count is obtained."""

    kind: str  # "scale", "inverse" or "edge"
    count: int | None = None
    edge: str | None = None


@dataclass
class TaskDag:
    schema: Schema
    tasks: list[Task] = field(default_factory=list)
    edges: list[tuple[str, str]] = field(default_factory=list)
    sizes: dict[str, int] = field(default_factory=dict)
    size_rules: dict[str, SizeRule] = field(default_factory=dict)

    def task(self, name: str) -> Task:
        return self._index()[name]

    def _index(self) -> dict[str, Task]:
        return {t.name: t for t in self.tasks}

    def predecessors(self, name: str) -> list[str]:
        return [a for a, b in self.edges if b == name]

    def successors(self, name: str) -> list[str]:
        return [b for a, b in self.edges if a == name]

    def add_edge(self, before: str, after: str) -> None:
        if (before, after) not in self.edges:
            self.edges.append((before, after))

    def order(self) -> list[Task]:
        """Topological order; among ready tasks the earliest declared goes first."""
        index = {t.name: i for i, t in enumerate(self.tasks)}
        indeg = {t.name: 0 for t in self.tasks}
        succ: dict[str, list[str]] = {t.name: [] for t in self.tasks}
        for a, b in self.edges:
            indeg[b] += 1
            succ[a].append(b)
        ready = sorted((n for n, d in indeg.items() if d == 0), key=index.get)
        out: list[Task] = []
        while ready:
            n = ready.pop(0)
            out.append(self.tasks[index[n]])
            for b in succ[n]:
                indeg[b] -= 1
                if indeg[b] == 0:
                    ready.append(b)
            ready.sort(key=index.get)
        if len(out) != len(self.tasks):
            raise DagCycleError(_cycle_members(self.tasks, self.edges, {t.name for t in out}))
        return out


def _cycle_members(tasks, edges, done: set[str]) -> list[str]:
    succ: dict[str, list[str]] = {}
    for a, b in edges:
        if a not in done and b not in done:
            succ.setdefault(a, []).append(b)
    start = next(t.name for t in tasks if t.name not in done)
    path, seen = [start], {start: 0}
    while True:
        nxt = succ[path[-1]][0]
        if nxt in seen:
            cyc = path[seen[nxt]:]
            return cyc + [nxt]
        seen[nxt] = len(path)
        path.append(nxt)


# ------------------------------------------------------------------ building


def _gen_prop(owner: str, prop: str) -> str:
    return f"{GEN_PROPERTY}:{owner}.{prop}"


def build_task_dag(s: Schema) -> TaskDag:
    """Tasks and their data dependencies (size edges are added by :func:`infer_sizes`)."""
    dag = TaskDag(s)
    for nt in s.node_types:
        for p in nt.properties:
            dag.tasks.append(Task(GEN_PROPERTY, f"{nt.name}.{p.name}"))
    for et in s.edge_types:
        dag.tasks.append(Task(GEN_STRUCTURE, et.name))
        if et.correlation is not None:
            dag.tasks.append(Task(MATCH, et.name))
        for p in et.properties:
            dag.tasks.append(Task(GEN_PROPERTY, f"{et.name}.{p.name}"))
    names = {t.name for t in dag.tasks}

    def need(before: str, after: str) -> None:
        if before not in names:
            raise PipelineError(f"{after} needs {before}, which is not declared")
        dag.add_edge(before, after)

    for nt in s.node_types:
        for p in nt.properties:
            for dep in p.depends_on:
                need(_gen_prop(nt.name, dep), _gen_prop(nt.name, p.name))
    for et in s.edge_types:
        final = f"{MATCH}:{et.name}" if et.correlation is not None else f"{GEN_STRUCTURE}:{et.name}"
        if et.correlation is not None:
            need(f"{GEN_STRUCTURE}:{et.name}", final)
            c = et.correlation
            need(_gen_prop(et.tail_type, c.tail_property), final)
            need(_gen_prop(et.head_type, c.head_property), final)
        for p in et.properties:
            me = _gen_prop(et.name, p.name)
            need(final, me)
            for dep in p.depends_on:
                if "." in dep:
                    side, _, pname = dep.partition(".")
                    need(_gen_prop(et.tail_type if side == "tail" else et.head_type, pname), me)
                else:
                    need(_gen_prop(et.name, dep), me)
    dag.order()
    return dag


# ------------------------------------------------------------------ sizes


def _structure_generator(s: Schema, et, seed: int, registry: Registry):
    cls = registry.structure_generator(et.structure.generator_name)
    if cls is None:
        raise PipelineError(f"edge {et.name}: unknown structure generator "
                            f"{et.structure.generator_name!r}")
    try:
        return cls.from_binding(et.structure, s.base_dir,
                                stream=stream_for(seed, f"structure:{et.name}"),
                                edge_type=et.name)
    except ValueError as exc:
        raise PipelineError(f"edge {et.name}: {exc}") from exc


def infer_sizes(dag: TaskDag, scale: ScaleDirective | None = None, *,
                registry: Registry | None = None) -> TaskDag:
    """Decide where every node type's size comes from and add the size edges.

    Sources: the scale directive; the inverse of a structure generator when
    the scale counts edges; or ``|ET|`` for the head type of a one-to-many
    edge whose tail size is known. Fixed sizes are stored in ``dag.sizes``
    right away; edge-derived ones are filled in when the edge is generated.
    """
    s = dag.schema
    registry = registry or default_registry()
    scale = scale or s.scale
    if scale is None:
        raise PipelineError("no scale directive")
    rules: dict[str, SizeRule] = {}
    et_scaled = s.edge_type(scale.target)
    if s.node_type(scale.target) is not None:
        rules[scale.target] = SizeRule("scale", scale.count)
    elif et_scaled is not None:
        g = _structure_generator(s, et_scaled, 0, registry)
        rules[et_scaled.tail_type] = SizeRule("inverse", invert_size(g, scale.count),
                                              et_scaled.name)
    else:
        raise PipelineError(f"scale target {scale.target!r} is not a declared type")

    changed = True
    while changed:
        changed = False
        for et in s.edge_types:
            if et.cardinality != ONE_TO_MANY or et.tail_type not in rules:
                continue
            rule = rules.get(et.head_type)
            if rule is None:
                rules[et.head_type] = SizeRule("edge", edge=et.name)
                changed = True
            elif rule.kind != "edge" or rule.edge != et.name:
                source = f"edge {rule.edge}" if rule.kind == "edge" else "the scale directive"
                raise PipelineError(f"conflicting sizes for {et.head_type}: set by {source} "
                                    f"and by one-to-many edge {et.name}")
    for nt in s.node_types:
        if nt.name not in rules:
            raise PipelineError(f"undetermined size: {nt.name}")

    dag.size_rules = rules
    dag.sizes = {t: r.count for t, r in rules.items() if r.kind != "edge"}
    for t, r in rules.items():
        if r.kind != "edge":
            continue
        src = f"{GEN_STRUCTURE}:{r.edge}"
        for p in s.node_type(t).properties:
            dag.add_edge(src, _gen_prop(t, p.name))
        for et in s.edge_types:
            if t in (et.tail_type, et.head_type) and et.name != r.edge:
                dag.add_edge(src, f"{GEN_STRUCTURE}:{et.name}")
    dag.order()
    return dag


# ------------------------------------------------------------------ execution


@dataclass
class Dataset:
    property_tables: dict[str, PropertyTable] = field(default_factory=dict)
    edge_tables: dict[str, EdgeTable] = field(default_factory=dict)
    mappings: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    report: dict = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)


class _Run:
    def __init__(self, dag: TaskDag, seed: int, parallelism: int, registry: Registry):
        self.dag = dag
        self.s = dag.schema
        self.seed = seed
        self.parallelism = max(1, int(parallelism))
        self.registry = registry
        self.ev = PropertyEvaluator(self.s, seed, registry)
        self.ds = Dataset()
        self.sizes = dict(dag.sizes)
        self.raw: dict[str, EdgeTable] = {}
        self.heads_n: dict[str, int] = {}
        self.fallback: dict[str, int] = {}
        self.matching: dict[str, dict] = {}
        self.lock = threading.Lock()

    # every generator is built up front so configuration errors surface
    # before any work and the evaluator caches are read-only afterwards
    def prepare(self) -> None:
        for t in self.dag.tasks:
            if t.kind == GEN_PROPERTY:
                try:
                    self.ev.prepare(t.owner, t.prop)
                except Exception as exc:  # noqa: BLE001
                    raise PipelineError(f"task {t.name} failed: {exc}") from exc

    def run_task(self, t: Task) -> None:
        t0 = time.perf_counter()
        try:
            if t.kind == GEN_PROPERTY:
                self.gen_property(t)
            elif t.kind == GEN_STRUCTURE:
                self.gen_structure(t)
            else:
                self.match(t)
        except PipelineError:
            raise
        except Exception as exc:  # noqa: BLE001 - any task failure aborts the run
            raise PipelineError(f"task {t.name} failed: {exc}") from exc
        with self.lock:
            self.ds.timings[t.name] = time.perf_counter() - t0

    def gen_property(self, t: Task) -> None:
        owner, prop = t.owner, t.prop
        et = self.s.edge_type(owner)
        stats: dict = {}
        if et is None:
            n = self.sizes[owner]
            pt = generate_property_table(self.ev.decl(owner, prop), n, self.seed, owner=owner,
                                         evaluator=self.ev, parallelism=self.parallelism,
                                         stats=stats)
        else:
            edges = self.ds.edge_tables[owner]
            pt = generate_property_table(self.ev.decl(owner, prop), len(edges), self.seed,
                                         owner=owner, evaluator=self.ev,
                                         parallelism=self.parallelism,
                                         tails=edges.tails, heads=edges.heads, stats=stats)
        with self.lock:
            self.ds.property_tables[t.target] = pt
            if stats.get("fallback"):
                self.fallback[t.target] = int(stats["fallback"])

    def gen_structure(self, t: Task) -> None:
        et = self.s.edge_type(t.target)
        g = _structure_generator(self.s, et, self.seed, self.registry)
        n = self.sizes[et.tail_type]
        edges = g.run(n)
        n_head = g.n_head(n, edges)
        with self.lock:
            rule = self.dag.size_rules.get(et.head_type)
            if et.cardinality == ONE_TO_MANY and rule is not None and rule.kind == "edge" \
                    and rule.edge == et.name:
                self.sizes[et.head_type] = n_head
            self.raw[et.name] = edges
            self.heads_n[et.name] = n_head
        if et.correlation is not None:
            return
        # uncorrelated: structure ids are paired with table ids at random
        f_tail = random_mapping(n, self.seed, f"match:{et.name}:tail")
        if et.cardinality == MANY_TO_MANY:
            f_head = f_tail
        else:
            f_head = random_mapping(n_head, self.seed, f"match:{et.name}:head")
        self._publish(et.name, edges, f_tail, f_head, {"method": "random"})

    def _publish(self, name, edges, f_tail, f_head, info) -> None:
        final = EdgeTable(name, f_tail[edges.tails] if len(edges) else edges.tails,
                          f_head[edges.heads] if len(edges) else edges.heads)
        with self.lock:
            self.ds.edge_tables[name] = final
            self.ds.mappings[name] = {"tail": f_tail, "head": f_head}
            self.matching[name] = info

    def match(self, t: Task) -> None:
        et = self.s.edge_type(t.target)
        c = et.correlation
        edges = self.raw[et.name]
        path = Path(c.distribution_path)
        if not path.is_absolute() and self.s.base_dir:
            path = Path(self.s.base_dir) / path
        order_seed = stream_for(self.seed, f"match:{et.name}").derived_seed
        pt_tail = self.ds.property_tables[f"{et.tail_type}.{c.tail_property}"]
        if len(pt_tail) != self.sizes[et.tail_type]:
            raise PipelineError(f"task {t.name} failed: table size mismatch")
        info: dict = {"method": "sbm-part", "distribution": c.distribution_path}
        if et.cardinality == MANY_TO_MANY:
            jd = load_joint_csv(path)
            values = value_universe(pt_tail, jd.values)
            P = _extend_joint(jd, values)
            labels = table_labels(pt_tail, values)
            q = np.bincount(labels, minlength=len(values))
            if len(edges) == 0:
                f = np.argsort(labels, kind="stable")
                self._publish(et.name, edges, f, f, info)
                return
            W = build_target_matrix(P, len(edges), q)
            state = sbm_part(edges, q, W, seed=order_seed)
            f = build_mapping(state, pt_tail, values)
            observed = empirical_joint(edges, state.assignment, values)
            info.update(l1_distance=distribution_distance(P, observed), swaps=state.swaps)
            self._publish(et.name, edges, f, f, info)
            return
        pt_head = self.ds.property_tables[f"{et.head_type}.{c.head_property}"]
        n_head = self.heads_n[et.name]
        if len(pt_head) != n_head:
            raise PipelineError(f"task {t.name} failed: {et.head_type} has {len(pt_head)} rows "
                                f"but the structure has {n_head} head nodes")
        jd = load_bipartite_joint_csv(path)
        tv = value_universe(pt_tail, jd.tail_values)
        hv = value_universe(pt_head, jd.head_values)
        P = jd.extend(tv, hv)
        lt, lh = table_labels(pt_tail, tv), table_labels(pt_head, hv)
        qt, qh = np.bincount(lt, minlength=len(tv)), np.bincount(lh, minlength=len(hv))
        if len(edges) == 0:
            self._publish(et.name, edges, np.argsort(lt, kind="stable"),
                          np.argsort(lh, kind="stable"), info)
            return
        W = len(edges) * P.p
        st_t, st_h = sbm_part_bipartite(edges, qt, qh, W, seed=order_seed)
        f_tail = build_mapping(st_t, pt_tail, tv)
        f_head = build_mapping(st_h, pt_head, hv)
        observed = empirical_bipartite(edges, st_t.assignment, st_h.assignment, tv, hv)
        info.update(l1_distance=distribution_distance(P, observed), swaps=st_t.swaps)
        self._publish(et.name, edges, f_tail, f_head, info)

    def execute(self) -> Dataset:
        self.prepare()
        order = self.dag.order()
        if self.parallelism == 1:
            for t in order:
                self.run_task(t)
        else:
            self._execute_parallel(order)
        self.ds.report = self.make_report()
        return self.ds

    def _execute_parallel(self, order: list[Task]) -> None:
        pending = {t.name: set(self.dag.predecessors(t.name)) for t in order}
        by_name = {t.name: t for t in order}
        done: set[str] = set()
        running: dict = {}
        with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
            while len(done) < len(order):
                for t in order:
                    if t.name in done or t.name in running.values():
                        continue
                    if pending[t.name] <= done:
                        running[pool.submit(self.run_task, t)] = t.name
                finished, _ = wait(list(running), return_when=FIRST_COMPLETED)
                for fut in finished:
                    name = running.pop(fut)
                    fut.result()
                    done.add(name)
        assert set(by_name) == done

    def make_report(self) -> dict:
        s = self.s
        return {
            "seed": self.seed,
            "scale": {"target": s.scale.target, "count": s.scale.count} if s.scale else None,
            "node_counts": {nt.name: int(self.sizes.get(nt.name, 0)) for nt in s.node_types},
            "edge_counts": {et.name: len(self.ds.edge_tables[et.name]) for et in s.edge_types},
            "size_sources": {
                t: r.kind if r.kind == "scale" else f"{r.kind}:{r.edge}"
                for t, r in sorted(self.dag.size_rules.items())
            },
            # stream tags: every value is value_at(derive_stream(seed, tag), id)
            "streams": sorted(
                [t.target for t in self.dag.tasks if t.kind == GEN_PROPERTY]
                + [f"structure:{et.name}" for et in s.edge_types]
                + [f"match:{et.name}" for et in s.edge_types]
            ),
            "matching": {k: self.matching[k] for k in sorted(self.matching)},
            "fallback_usage": dict(sorted(self.fallback.items())),
        }


def execute_plan(dag: TaskDag, seed: int = 42, parallelism: int = 1, *,
                 registry: Registry | None = None) -> Dataset:
    """Run every task in dependency order and return the finished tables."""
    if not dag.size_rules:
        infer_sizes(dag, registry=registry)
    return _Run(dag, seed, parallelism, registry or default_registry()).execute()


def _extend_joint(jd: JointDistribution, values: list[str]) -> JointDistribution:
    idx = [values.index(v) for v in jd.values]
    p = np.zeros((len(values), len(values)))
    p[np.ix_(idx, idx)] = jd.p
    return JointDistribution(list(values), p)


def generate(schema: Schema, seed: int = 42, parallelism: int = 1, *,
             registry: Registry | None = None) -> Dataset:
    dag = build_task_dag(schema)
    infer_sizes(dag, registry=registry)
    return execute_plan(dag, seed, parallelism, registry=registry)


# ------------------------------------------------------------------ output


def write_dataset(ds: Dataset, out) -> list[Path]:
    """``<Type>.<prop>.csv`` per property, ``<edge>.csv`` per edge type, ``report.json``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(ds.property_tables):
        p = out / f"{name}.csv"
        write_table_csv(ds.property_tables[name], p)
        written.append(p)
    for name in sorted(ds.edge_tables):
        p = out / f"{name}.csv"
        write_table_csv(ds.edge_tables[name], p)
        written.append(p)
    p = out / "report.json"
    p.write_text(json.dumps(ds.report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(p)
    return written
