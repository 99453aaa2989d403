"""Structured WSDL stubs.

Scenario files describe services as plain records instead of WSDL XML.
:func:`import_wsdl_record` maps such a record onto :class:`WsdlDescriptor`::

    {"service_name": "WeatherService",
     "description": "local weather forecasts",
     "operations": [{"name": "getForecast",
                     "inputs": ["location"], "outputs": ["forecast"]}],
     "binding_path": "/services/weather",
     "context_source_ref": "ctx-weather"}      # optional
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from .errors import InvalidWsdl


@dataclass(frozen=True)
class WsdlOperation:
    name: str
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"name": self.name, "inputs": list(self.inputs), "outputs": list(self.outputs)}


@dataclass(frozen=True)
class WsdlDescriptor:
    service_name: str
    description: str
    operations: tuple[WsdlOperation, ...]
    binding_path: str
    context_source_ref: str | None = None

    def validate(self, vocabulary: Iterable[str] | None = None) -> None:
        """Raise :class:`InvalidWsdl` unless the descriptor is publishable.

        With ``vocabulary`` given, every concept term must belong to it.
        """
        if not self.service_name or not self.service_name.strip():
            raise InvalidWsdl("service_name must be non-empty")
        if not self.operations:
            raise InvalidWsdl(f"{self.service_name}: at least one operation required")
        for op in self.operations:
            if not op.name:
                raise InvalidWsdl(f"{self.service_name}: operation without a name")
        if vocabulary is not None:
            known = set(vocabulary)
            for term in self.concepts():
                if term not in known:
                    raise InvalidWsdl(f"{self.service_name}: concept {term!r} not in ontology")

    def concepts(self) -> list[str]:
        seen: dict[str, None] = {}
        for op in self.operations:
            for term in (*op.inputs, *op.outputs):
                seen.setdefault(term)
        return list(seen)

    def input_concepts(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(t for op in self.operations for t in op.inputs))

    def output_concepts(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(t for op in self.operations for t in op.outputs))

    def search_text(self) -> str:
        """Text searched when a query extends into the WSDL level."""
        parts = [self.service_name, self.description]
        for op in self.operations:
            parts.append(op.name)
            parts.extend(op.inputs)
            parts.extend(op.outputs)
        return " ".join(parts)

    def to_dict(self) -> dict:
        return {
            "service_name": self.service_name,
            "description": self.description,
            "operations": [op.to_dict() for op in self.operations],
            "binding_path": self.binding_path,
            "context_source_ref": self.context_source_ref,
        }


def _str_list(value: Any, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise InvalidWsdl(f"{where} must be a list of strings")
    return tuple(value)


def import_wsdl_record(record: Mapping[str, Any]) -> WsdlDescriptor:
    """Build a descriptor from a scenario record (or a serialized spec body)."""
    if not isinstance(record, Mapping):
        raise InvalidWsdl("WSDL record must be an object")
    try:
        name = record["service_name"]
        ops_raw = record["operations"]
    except KeyError as exc:
        raise InvalidWsdl(f"missing field {exc.args[0]!r}") from None
    description = record.get("description", "")
    binding_path = record.get("binding_path", "/")
    ref = record.get("context_source_ref")
    if not isinstance(name, str) or not isinstance(description, str) or not isinstance(binding_path, str):
        raise InvalidWsdl("service_name, description and binding_path must be strings")
    if ref is not None and not isinstance(ref, str):
        raise InvalidWsdl("context_source_ref must be a string or null")
    if not isinstance(ops_raw, list):
        raise InvalidWsdl("operations must be a list")
    ops = []
    for i, op in enumerate(ops_raw):
        if not isinstance(op, Mapping) or not isinstance(op.get("name"), str):
            raise InvalidWsdl(f"operations[{i}] needs a string name")
        ops.append(
            WsdlOperation(
                name=op["name"],
                inputs=_str_list(op.get("inputs", []), f"operations[{i}].inputs"),
                outputs=_str_list(op.get("outputs", []), f"operations[{i}].outputs"),
            )
        )
    return WsdlDescriptor(
        service_name=name,
        description=description,
        operations=tuple(ops),
        binding_path=binding_path,
        context_source_ref=ref,
    )
