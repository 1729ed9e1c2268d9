"""Property generators and in-place property evaluation.

A property generator is initialised once from its DSL arguments and then maps
``(id, r(id), dependency values...)`` to a value. Generators here are
vectorised: :meth:`PropertyGenerator.run_batch` takes arrays of ids and draws
and one array per dependency. The scalar :meth:`PropertyGenerator.run` is a
thin wrapper used for spot checks.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .params import Param, bind_params
from .rng import RandomStream, stream_for, to_unit
from .store import PropertyTable, coerce_values

CHUNK = 1 << 16


class GenerationError(RuntimeError):
    pass


# ----------------------------------------------------------------- dictionaries


@dataclass
class WeightedDictionary:
    values: list[str]
    weights: np.ndarray
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.values) == 0:
            raise ValueError("empty dictionary")
        if len(self.values) != len(self.weights):
            raise ValueError("values and weights differ in length")
        if np.any(~np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ValueError("dictionary weights must be positive")
        cum = np.cumsum(self.weights)
        cum = cum / cum[-1]
        cum[-1] = 1.0
        self.cumulative = cum

    @classmethod
    def from_pairs(cls, pairs) -> "WeightedDictionary":
        pairs = list(pairs)
        return cls([v for v, _ in pairs], [w for _, w in pairs])

    def sample(self, u: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.cumulative, u, side="right")
        np.minimum(idx, len(self.values) - 1, out=idx)
        return np.asarray(self.values, dtype=object)[idx]

    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()


def sample_inverse_transform(d: WeightedDictionary, u: float):
    """First entry whose cumulative weight strictly exceeds ``u``."""
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    return d.sample(np.array([u]))[0]


def _read_rows(path: Path) -> list[list[str]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise GenerationError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if rows and rows[0][-1].strip().lower() == "weight":
        rows = rows[1:]
    return rows


def load_dictionary(path) -> WeightedDictionary:
    """CSV ``value,weight``, optional header."""
    rows = _read_rows(Path(path))
    try:
        return WeightedDictionary([r[0] for r in rows], [float(r[1]) for r in rows])
    except (IndexError, ValueError) as exc:
        raise GenerationError(f"{path}: bad dictionary file ({exc})") from exc


@dataclass
class ConditionalDictionary:
    arity: int
    table: dict[tuple[str, ...], WeightedDictionary]
    fallback: WeightedDictionary

    def lookup(self, key: tuple[str, ...]) -> tuple[WeightedDictionary, bool]:
        d = self.table.get(key)
        return (d, False) if d is not None else (self.fallback, True)


FALLBACK = "*"


def load_conditional(path) -> ConditionalDictionary:
    """CSV ``dep1,...,depk,value,weight``; rows whose dep columns are all ``*`` form the fallback."""
    rows = _read_rows(Path(path))
    if not rows:
        raise GenerationError(f"{path}: empty conditional dictionary")
    arity = len(rows[0]) - 2
    if arity < 1:
        raise GenerationError(f"{path}: conditional rows need at least one dependency column")
    groups: dict[tuple[str, ...], list[tuple[str, float]]] = {}
    for lineno, r in enumerate(rows, start=1):
        if len(r) != arity + 2:
            raise GenerationError(f"{path}:{lineno}: expected {arity + 2} columns, got {len(r)}")
        try:
            w = float(r[-1])
        except ValueError:
            raise GenerationError(f"{path}:{lineno}: bad weight {r[-1]!r}") from None
        groups.setdefault(tuple(r[:arity]), []).append((r[arity], w))
    fallback_key = (FALLBACK,) * arity
    if fallback_key not in groups:
        raise GenerationError(f"{path}: missing fallback rows (dependency columns all '*')")
    fallback = WeightedDictionary.from_pairs(groups.pop(fallback_key))
    table = {k: WeightedDictionary.from_pairs(v) for k, v in groups.items()}
    return ConditionalDictionary(arity, table, fallback)


# ------------------------------------------------------------------- generators


class PropertyGenerator:
    """Base class. Subclasses set ``name``, ``params``, ``arity`` and ``value_types``."""

    name = ""
    params: tuple[Param, ...] = ()
    arity: tuple[int, int | None] = (0, 0)
    value_types: tuple[str, ...] = ("string",)

    def __init__(self, **kwargs):
        self.initialize(**kwargs)

    @classmethod
    def from_binding(cls, binding, base_dir: str | None = None) -> "PropertyGenerator":
        return cls(**bind_params(cls.params, binding.parameters, base_dir))

    def initialize(self, **kwargs) -> None:
        pass

    def check_arity(self, n_deps: int) -> None:
        lo, hi = self.arity
        if n_deps < lo or (hi is not None and n_deps > hi):
            want = f"{lo}" if lo == hi else f"{lo}..{hi if hi is not None else ''}"
            raise GenerationError(f"{self.name} takes {want} dependency values, got {n_deps}")

    def run_batch(self, ids, draws, deps: Sequence[np.ndarray], *, tails=None, heads=None,
                  stats: dict | None = None) -> np.ndarray:
        raise NotImplementedError

    def run(self, id: int, draw: int, *deps, tails=None, heads=None) -> Any:
        self.check_arity(len(deps))
        out = self.run_batch(
            np.array([id], dtype=np.int64),
            np.array([draw], dtype=np.uint64),
            [np.array([d], dtype=object if isinstance(d, str) else None) for d in deps],
            tails=None if tails is None else np.array([tails]),
            heads=None if heads is None else np.array([heads]),
        )
        return out[0]


class DictionaryGenerator(PropertyGenerator):
    name = "dictionary"
    params = (Param("file", "path"),)
    value_types = ("string", "integer")

    def initialize(self, file=None, dictionary: WeightedDictionary | None = None):
        self.dictionary = dictionary if dictionary is not None else load_dictionary(file)

    def run_batch(self, ids, draws, deps, *, tails=None, heads=None, stats=None):
        return self.dictionary.sample(to_unit(draws))


class ConditionalGenerator(PropertyGenerator):
    name = "conditional"
    params = (Param("file", "path"),)
    arity = (1, None)
    value_types = ("string", "integer")

    def initialize(self, file=None, conditional: ConditionalDictionary | None = None):
        self.conditional = conditional if conditional is not None else load_conditional(file)
        self.arity = (self.conditional.arity, self.conditional.arity)

    def run_batch(self, ids, draws, deps, *, tails=None, heads=None, stats=None):
        self.check_arity(len(deps))
        u = to_unit(draws)
        out = np.empty(len(u), dtype=object)
        if len(u) == 0:
            return out
        cols = [[str(x) for x in np.asarray(d).tolist()] for d in deps]
        keys = list(zip(*cols))
        uniq: dict[tuple[str, ...], list[int]] = {}
        for i, k in enumerate(keys):
            uniq.setdefault(k, []).append(i)
        misses = 0
        for k, rows in uniq.items():
            d, missed = self.conditional.lookup(k)
            idx = np.asarray(rows, dtype=np.int64)
            out[idx] = d.sample(u[idx])
            if missed:
                misses += len(rows)
        if stats is not None and misses:
            stats["fallback"] = stats.get("fallback", 0) + misses
        return out


class UniformIntGenerator(PropertyGenerator):
    name = "uniformInt"
    params = (Param("lo", "int"), Param("hi", "int"))
    value_types = ("integer", "string")

    def initialize(self, lo, hi):
        if hi < lo:
            raise GenerationError(f"uniformInt: hi ({hi}) < lo ({lo})")
        self.lo, self.hi = lo, hi

    def run_batch(self, ids, draws, deps, *, tails=None, heads=None, stats=None):
        span = self.hi - self.lo + 1
        k = np.floor(to_unit(draws) * span).astype(np.int64)
        return self.lo + np.minimum(k, span - 1)


class UuidGenerator(PropertyGenerator):
    name = "uuid"
    value_types = ("string", "integer")

    def run_batch(self, ids, draws, deps, *, tails=None, heads=None, stats=None):
        return np.array([str(i) for i in np.asarray(ids).tolist()], dtype=object)


def _parse_date(s: str, what: str) -> np.datetime64:
    try:
        return np.datetime64(str(s), "D")
    except ValueError:
        raise GenerationError(f"{what}: bad ISO date {s!r}") from None


class DateGenerator(PropertyGenerator):
    name = "date"
    params = (Param("lo", "str"), Param("hi", "str"))
    value_types = ("date",)

    def initialize(self, lo, hi):
        self.lo = _parse_date(lo, "date.lo")
        self.hi = _parse_date(hi, "date.hi")
        if self.hi < self.lo:
            raise GenerationError("date: hi precedes lo")

    def run_batch(self, ids, draws, deps, *, tails=None, heads=None, stats=None):
        span = int((self.hi - self.lo).astype(np.int64)) + 1
        k = np.minimum(np.floor(to_unit(draws) * span).astype(np.int64), span - 1)
        return self.lo + k.astype("timedelta64[D]")


class AfterGenerator(PropertyGenerator):
    """A date strictly later than every dependency: ``max(deps) + delta``, delta uniform in days."""

    name = "after"
    params = (Param("min_delta", "int", 1), Param("max_delta", "int", 365))
    arity = (1, None)
    value_types = ("date",)

    def initialize(self, min_delta=1, max_delta=365):
        if min_delta < 1 or max_delta < min_delta:
            raise GenerationError("after: need 1 <= min_delta <= max_delta")
        self.min_delta, self.max_delta = min_delta, max_delta

    def run_batch(self, ids, draws, deps, *, tails=None, heads=None, stats=None):
        self.check_arity(len(deps))
        base = np.asarray(deps[0], dtype="datetime64[D]")
        for d in deps[1:]:
            base = np.maximum(base, np.asarray(d, dtype="datetime64[D]"))
        span = self.max_delta - self.min_delta + 1
        k = np.minimum(np.floor(to_unit(draws) * span).astype(np.int64), span - 1)
        return base + (self.min_delta + k).astype("timedelta64[D]")


PROPERTY_GENERATORS: dict[str, type[PropertyGenerator]] = {
    g.name: g
    for g in (
        DictionaryGenerator,
        ConditionalGenerator,
        UniformIntGenerator,
        UuidGenerator,
        DateGenerator,
        AfterGenerator,
    )
}


def run_generator(g: PropertyGenerator, id: int, draw: int, deps: tuple = ()) -> Any:
    return g.run(id, draw, *deps)


# ----------------------------------------------------------- in-place evaluation


class PropertyEvaluator:
    """Regenerates any property value from ids alone.

    Dependency values are never read from stored tables: evaluating
    ``Person.name`` at ids ``I`` evaluates ``Person.country`` and
    ``Person.sex`` at ``I`` first, recursively. Edge properties may reference
    endpoint node properties as ``tail.<prop>`` / ``head.<prop>``; those are
    evaluated at the edge's (final) endpoint ids.
    """

    def __init__(self, schema, seed: int, registry=None):
        if registry is None:
            from .registry import default_registry

            registry = default_registry()
        self.schema = schema
        self.seed = seed
        self.registry = registry
        self._generators: dict[tuple[str, str], PropertyGenerator] = {}
        self._streams: dict[tuple[str, str], RandomStream] = {}

    def decl(self, owner: str, prop: str):
        t = self.schema.node_type(owner) or self.schema.edge_type(owner)
        if t is None:
            raise GenerationError(f"unknown type {owner!r}")
        d = t.property(prop)
        if d is None:
            raise GenerationError(f"unknown property {owner}.{prop}")
        return d

    def generator(self, owner: str, prop: str) -> PropertyGenerator:
        key = (owner, prop)
        g = self._generators.get(key)
        if g is None:
            d = self.decl(owner, prop)
            cls = self.registry.property_generator(d.generator.generator_name)
            if cls is None:
                raise GenerationError(
                    f"{owner}.{prop}: unresolved generator {d.generator.generator_name!r}"
                )
            try:
                g = cls.from_binding(d.generator, self.schema.base_dir)
            except ValueError as exc:
                raise GenerationError(f"{owner}.{prop}: {exc}") from exc
            g.check_arity(len(d.depends_on))
            self._generators[key] = g
        return g

    def stream(self, owner: str, prop: str) -> RandomStream:
        key = (owner, prop)
        s = self._streams.get(key)
        if s is None:
            s = self._streams[key] = stream_for(self.seed, f"{owner}.{prop}")
        return s

    def evaluate(self, owner: str, prop: str, ids, *, tails=None, heads=None,
                 stats: dict | None = None, _active: tuple = ()) -> np.ndarray:
        if (owner, prop) in _active:
            chain = " -> ".join(f"{o}.{p}" for o, p in (*_active, (owner, prop)))
            raise GenerationError(f"dependency cycle: {chain}")
        active = (*_active, (owner, prop))
        d = self.decl(owner, prop)
        g = self.generator(owner, prop)
        ids = np.asarray(ids, dtype=np.int64)
        deps = []
        for dep in d.depends_on:
            if "." in dep:
                side, _, pname = dep.partition(".")
                et = self.schema.edge_type(owner)
                endpoint_ids = tails if side == "tail" else heads
                if et is None or endpoint_ids is None:
                    raise GenerationError(f"{owner}.{prop}: {dep} needs edge endpoints")
                ntype = et.tail_type if side == "tail" else et.head_type
                deps.append(self.evaluate(ntype, pname, endpoint_ids, _active=active))
            else:
                deps.append(self.evaluate(owner, dep, ids, tails=tails, heads=heads,
                                          _active=active))
        draws = self.stream(owner, prop).values_at(ids)
        out = g.run_batch(ids, draws, deps, tails=tails, heads=heads, stats=stats)
        if d.value_type == "integer" and out.dtype == object:
            out = np.array([int(v) for v in out.tolist()], dtype=np.int64)
        elif d.value_type == "string" and out.dtype != object:
            out = np.array([str(v) for v in out.tolist()], dtype=object)
        return coerce_values(out, d.value_type)

    def prepare(self, owner: str, prop: str, _active: tuple = ()) -> None:
        """Instantiate the generators of ``owner.prop`` and its dependency chain."""
        if (owner, prop) in _active:
            return
        self.generator(owner, prop)
        self.stream(owner, prop)
        et = self.schema.edge_type(owner)
        for dep in self.decl(owner, prop).depends_on:
            if "." in dep and et is not None:
                side, _, pname = dep.partition(".")
                self.prepare(et.tail_type if side == "tail" else et.head_type, pname,
                             (*_active, (owner, prop)))
            elif "." not in dep:
                self.prepare(owner, dep, (*_active, (owner, prop)))

    def value(self, owner: str, prop: str, id: int, *, tail=None, head=None):
        """Single value, regenerated in isolation."""
        t = None if tail is None else np.array([tail])
        h = None if head is None else np.array([head])
        return self.evaluate(owner, prop, np.array([id]), tails=t, heads=h)[0]


def generate_property_table(
    decl,
    n: int,
    seed: int = 42,
    *,
    owner: str | None = None,
    evaluator: PropertyEvaluator | None = None,
    parallelism: int = 1,
    tails=None,
    heads=None,
    stats: dict | None = None,
) -> PropertyTable:
    """Build the ``n``-row table of one property from fixed-size id-range chunks.

    Chunk boundaries do not depend on ``parallelism``, and every value is a
    pure function of its id, so the table is identical for any worker count.
    ``decl`` is a PropertyDecl; without an ``evaluator`` it must have no
    dependencies and is evaluated standalone.
    """
    if evaluator is None:
        from .schema import NodeTypeDecl, Schema

        if decl.depends_on:
            raise GenerationError(f"{decl.name}: dependencies need a schema-backed evaluator")
        owner = owner or "_"
        evaluator = PropertyEvaluator(Schema(node_types=[NodeTypeDecl(owner, [decl])]), seed)
    if owner is None:
        raise GenerationError("owner type name required with an evaluator")
    tag = f"{owner}.{decl.name}"
    starts = list(range(0, n, CHUNK))
    chunk_stats: list[dict] = [dict() for _ in starts]

    def work(j: int):
        lo = starts[j]
        hi = min(lo + CHUNK, n)
        ids = np.arange(lo, hi, dtype=np.int64)
        t = None if tails is None else np.asarray(tails)[lo:hi]
        h = None if heads is None else np.asarray(heads)[lo:hi]
        vals = evaluator.evaluate(owner, decl.name, ids, tails=t, heads=h, stats=chunk_stats[j])
        return lo, vals

    evaluator.prepare(owner, decl.name)
    if parallelism > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            parts = list(pool.map(work, range(len(starts))))
    else:
        parts = [work(j) for j in range(len(starts))]
    if stats is not None:
        for cs in chunk_stats:
            for k, v in cs.items():
                stats[k] = stats.get(k, 0) + v
    return PropertyTable.from_partitions(tag, decl.value_type, parts)
