"""Binding DSL generator arguments to a generator's declared parameters."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

REQUIRED = object()


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # "int", "float", "str", "path", "bool"
    default: Any = REQUIRED


class ParamError(ValueError):
    pass


def _convert(p: Param, value: Any, base_dir: str | None) -> Any:
    if p.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ParamError(f"parameter {p.name!r} must be an integer, got {value!r}")
        return value
    if p.kind == "float":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ParamError(f"parameter {p.name!r} must be a number, got {value!r}")
    if p.kind == "bool":
        if value in (0, 1, "true", "false", "True", "False"):
            return value in (1, "true", "True")
        raise ParamError(f"parameter {p.name!r} must be a boolean, got {value!r}")
    if p.kind == "path":
        path = Path(str(value))
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return path
    return str(value)


def bind_params(
    params: tuple[Param, ...],
    given: list[tuple[str, Any]],
    base_dir: str | None = None,
    *,
    convert: bool = True,
) -> dict[str, Any]:
    """Resolve positional and keyword arguments against ``params``.

    Raises :class:`ParamError` listing the first problem found.
    """
    by_name = {p.name: p for p in params}
    out: dict[str, Any] = {}
    positional = [v for k, v in given if not k]
    if len(positional) > len(params):
        raise ParamError(f"takes at most {len(params)} arguments, got {len(positional)}")
    for p, v in zip(params, positional):
        out[p.name] = v
    for k, v in given:
        if not k:
            continue
        if k not in by_name:
            raise ParamError(f"unknown parameter {k!r}")
        if k in out:
            raise ParamError(f"parameter {k!r} given twice")
        out[k] = v
    for p in params:
        if p.name not in out:
            if p.default is REQUIRED:
                raise ParamError(f"missing required parameter {p.name!r}")
            out[p.name] = p.default
        elif convert:
            out[p.name] = _convert(p, out[p.name], base_dir)
    return out
