"""Name -> generator class lookup used by validation and execution."""

from __future__ import annotations

from dataclasses import dataclass, field

from .params import ParamError, bind_params
from .propgen import PROPERTY_GENERATORS, PropertyGenerator
from .schema import ONE_TO_MANY
from .structgen import STRUCTURE_GENERATORS, StructureGenerator


@dataclass
class Registry:
    property_generators: dict[str, type[PropertyGenerator]] = field(default_factory=dict)
    structure_generators: dict[str, type[StructureGenerator]] = field(default_factory=dict)

    def property_generator(self, name: str):
        return self.property_generators.get(name)

    def structure_generator(self, name: str):
        return self.structure_generators.get(name)

    def register_property(self, cls: type[PropertyGenerator]) -> None:
        self.property_generators[cls.name] = cls

    def register_structure(self, cls: type[StructureGenerator]) -> None:
        self.structure_generators[cls.name] = cls

    def check_property(self, binding, value_type: str, n_deps: int) -> list[str]:
        cls = self.property_generator(binding.generator_name)
        if cls is None:
            return [f"unknown property generator {binding.generator_name!r}"]
        msgs = []
        try:
            bind_params(cls.params, binding.parameters, convert=False)
        except ParamError as exc:
            msgs.append(f"{binding.generator_name}: {exc}")
        if value_type not in cls.value_types:
            msgs.append(f"{binding.generator_name} cannot produce {value_type} values")
        lo, hi = cls.arity
        if n_deps < lo or (hi is not None and n_deps > hi):
            msgs.append(
                f"{binding.generator_name} takes "
                f"{lo if lo == hi else f'{lo} or more'} correlated properties, got {n_deps}"
            )
        return msgs

    def check_structure(self, binding, cardinality: str) -> list[str]:
        cls = self.structure_generator(binding.generator_name)
        if cls is None:
            return [f"unknown structure generator {binding.generator_name!r}"]
        msgs = []
        try:
            bind_params(cls.params, binding.parameters, convert=False)
        except ParamError as exc:
            msgs.append(f"{binding.generator_name}: {exc}")
        if (cardinality == ONE_TO_MANY) != cls.one_to_many:
            kind = "one-to-many ('->')" if cls.one_to_many else "many-to-many ('--')"
            msgs.append(f"structure generator {binding.generator_name!r} builds {kind} edges")
        return msgs


def default_registry() -> Registry:
    return Registry(dict(PROPERTY_GENERATORS), dict(STRUCTURE_GENERATORS))
