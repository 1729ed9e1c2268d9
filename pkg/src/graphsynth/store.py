"""Id-keyed tables: property tables ``(id, value)`` and edge tables ``(id, tail, head)``.

Ids are implicit: row ``i`` of a table has id ``i``. Tables are numpy-backed and
are assembled from independent id-range partitions.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

VALUE_TYPES = ("string", "integer", "date")

PT_HEADER = ["id", "value"]
ET_HEADER = ["id", "tail", "head"]


class TableError(ValueError):
    pass


def coerce_values(values, value_type: str) -> np.ndarray:
    if value_type == "string":
        return np.asarray(values, dtype=object)
    if value_type == "integer":
        return np.asarray(values, dtype=np.int64)
    if value_type == "date":
        return np.asarray(values, dtype="datetime64[D]")
    raise TableError(f"unknown value type {value_type!r}")


@dataclass
class PropertyTable:
    table_tag: str
    value_type: str
    values: np.ndarray

    def __post_init__(self):
        self.values = coerce_values(self.values, self.value_type)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self.values), dtype=np.int64)

    def rows(self):
        return zip(range(len(self.values)), self.values.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PropertyTable):
            return NotImplemented
        return (
            self.table_tag == other.table_tag
            and self.value_type == other.value_type
            and len(self) == len(other)
            and bool(np.all(self.values == other.values))
        )

    @classmethod
    def from_partitions(
        cls, table_tag: str, value_type: str, parts: Iterable[tuple[int, Sequence]]
    ) -> "PropertyTable":
        """Assemble from ``(start_id, values)`` shards given in any order."""
        parts = sorted(parts, key=lambda p: p[0])
        expected = 0
        for start, vals in parts:
            if start != expected:
                raise TableError(f"{table_tag}: partition gap or overlap at id {start}")
            expected += len(vals)
        if not parts:
            return cls(table_tag, value_type, coerce_values([], value_type))
        return cls(
            table_tag,
            value_type,
            np.concatenate([coerce_values(v, value_type) for _, v in parts]),
        )


@dataclass
class EdgeTable:
    edge_type: str
    tails: np.ndarray
    heads: np.ndarray

    def __post_init__(self):
        self.tails = np.asarray(self.tails, dtype=np.int64)
        self.heads = np.asarray(self.heads, dtype=np.int64)
        if self.tails.shape != self.heads.shape or self.tails.ndim != 1:
            raise TableError(f"{self.edge_type}: tail/head columns differ in shape")

    def __len__(self) -> int:
        return len(self.tails)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self.tails), dtype=np.int64)

    def rows(self):
        return zip(range(len(self.tails)), self.tails.tolist(), self.heads.tolist())

    def check_bounds(self, n_tail: int, n_head: int) -> None:
        if len(self) == 0:
            return
        if self.tails.min() < 0 or self.tails.max() >= n_tail:
            raise TableError(f"{self.edge_type}: tail id out of [0, {n_tail})")
        if self.heads.min() < 0 or self.heads.max() >= n_head:
            raise TableError(f"{self.edge_type}: head id out of [0, {n_head})")

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeTable):
            return NotImplemented
        return (
            self.edge_type == other.edge_type
            and np.array_equal(self.tails, other.tails)
            and np.array_equal(self.heads, other.heads)
        )

    @classmethod
    def from_partitions(cls, edge_type: str, parts) -> "EdgeTable":
        """Assemble from ``(start_id, tails, heads)`` shards given in any order."""
        parts = sorted(parts, key=lambda p: p[0])
        expected = 0
        for start, tails, _ in parts:
            if start != expected:
                raise TableError(f"{edge_type}: partition gap or overlap at id {start}")
            expected += len(tails)
        if not parts:
            return cls(edge_type, np.empty(0, np.int64), np.empty(0, np.int64))
        return cls(
            edge_type,
            np.concatenate([np.asarray(p[1], np.int64) for p in parts]),
            np.concatenate([np.asarray(p[2], np.int64) for p in parts]),
        )


def format_values(values: np.ndarray, value_type: str) -> list[str]:
    if value_type == "date":
        return [str(d) for d in values.astype("datetime64[D]")]
    return [str(v) for v in values.tolist()]


def write_table_csv(table: PropertyTable | EdgeTable, path) -> None:
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(table, PropertyTable):
        w.writerow(PT_HEADER)
        w.writerows(zip(range(len(table)), format_values(table.values, table.value_type)))
    else:
        w.writerow(ET_HEADER)
        w.writerows(zip(range(len(table)), table.tails.tolist(), table.heads.tolist()))
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write table to {path}: {exc.strerror or exc}") from exc


def _parse_id(raw: str, lineno: int, path) -> int:
    try:
        return int(raw)
    except ValueError:
        raise TableError(f"{path}:{lineno}: non-integer id {raw!r}") from None


def _check_ids(ids: list[int], path) -> None:
    seen = set()
    for lineno, i in enumerate(ids, start=2):
        if i in seen:
            raise TableError(f"{path}:{lineno}: duplicate id {i}")
        seen.add(i)
    for expected in range(len(ids)):
        if expected not in seen:
            raise TableError(f"{path}: id gap, missing id {expected}")


def read_table_csv(path, value_type: str = "string", table_tag: str | None = None):
    """Read a table written by :func:`write_table_csv`.

    The header decides the table kind: ``id,value`` gives a PropertyTable,
    ``id,tail,head`` an EdgeTable.
    """
    path = Path(path)
    tag = table_tag if table_tag is not None else path.stem
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = list(reader)
    if header == PT_HEADER:
        ids, vals = [], []
        for lineno, row in enumerate(rows, start=2):
            if len(row) != 2:
                raise TableError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            ids.append(_parse_id(row[0], lineno, path))
            vals.append(row[1])
        _check_ids(ids, path)
        order = np.argsort(np.asarray(ids, dtype=np.int64), kind="stable")
        ordered = [vals[j] for j in order]
        if value_type == "integer":
            try:
                ordered = [int(v) for v in ordered]
            except ValueError as exc:
                raise TableError(f"{path}: non-integer value ({exc})") from None
        return PropertyTable(tag, value_type, coerce_values(ordered, value_type))
    if header == ET_HEADER:
        ids, tails, heads = [], [], []
        for lineno, row in enumerate(rows, start=2):
            if len(row) != 3:
                raise TableError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            ids.append(_parse_id(row[0], lineno, path))
            tails.append(_parse_id(row[1], lineno, path))
            heads.append(_parse_id(row[2], lineno, path))
        _check_ids(ids, path)
        order = np.argsort(np.asarray(ids, dtype=np.int64), kind="stable")
        return EdgeTable(tag, np.asarray(tails, np.int64)[order], np.asarray(heads, np.int64)[order])
    raise TableError(f"{path}: unrecognised header {header!r}")
