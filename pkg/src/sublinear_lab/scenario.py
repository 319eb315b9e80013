"""Scenario files: JSON (de)serialization and validation.

Version ``"1"`` layout::

    {
      "version": "1",
      "name": "coin",                       # optional
      "dimension": 1,
      "marginals": [                        # either this ...
        {"label": "X1", "support": [[-1], [1]],
         "generators": [[0.7, 0.3], [0.3, 0.7]]}
      ],
      "iid": {"n": 2, "marginal": {...}},   # ... or this shorthand
      "budgets": {"paths": 10000000, "selections": 10000000},
      "tolerances": {"inequality_rel": 1e-8, ...}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace

import jsonschema

from sublinear_lab.credal_core import (
    DEFAULT_PATH_BUDGET,
    DEFAULT_SELECTION_BUDGET,
    Marginal,
    Sequence,
)
from sublinear_lab.errors import BudgetExceededError, InvalidInputError
from sublinear_lab.inequality_lab import Tolerances

SCHEMA_VERSION = "1"

_MARGINAL_SCHEMA = {
    "type": "object",
    "required": ["support", "generators"],
    "additionalProperties": False,
    "properties": {
        "label": {"type": "string"},
        "support": {
            "type": "array", "minItems": 1,
            "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        },
        "generators": {
            "type": "array", "minItems": 1,
            "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        },
    },
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "dimension"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "marginals": {"type": "array", "minItems": 1, "items": _MARGINAL_SCHEMA},
        "iid": {
            "type": "object",
            "required": ["n", "marginal"],
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "marginal": _MARGINAL_SCHEMA,
            },
        },
        "budgets": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "paths": {"type": "integer", "minimum": 1},
                "selections": {"type": "integer", "minimum": 1},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {f.name: {"type": "number", "minimum": 0} for f in fields(Tolerances)},
        },
    },
    "oneOf": [{"required": ["marginals"]}, {"required": ["iid"]}],
}


@dataclass
class ScenarioFile:
    sequence: Sequence
    name: str = ""
    path_budget: int = DEFAULT_PATH_BUDGET
    selection_budget: int = DEFAULT_SELECTION_BUDGET
    tolerances: Tolerances = field(default_factory=Tolerances)
    iid: bool = False


def _schema_path(err) -> str:
    parts = []
    for p in err.absolute_path:
        if isinstance(p, int):
            parts.append(f"[{p}]")
        else:
            parts.append(("." if parts else "") + str(p))
    return "".join(parts) or "<root>"


def _marginal(obj, where, d) -> Marginal:
    support = obj["support"]
    for j, pt in enumerate(support):
        if len(pt) != d:
            raise InvalidInputError(f"{where}.support[{j}]: has {len(pt)} coordinates, dimension is {d}")
    try:
        return Marginal(support, obj["generators"], obj.get("label", ""))
    except InvalidInputError as exc:
        raise InvalidInputError(f"{where}: {exc}") from None


def parse_scenario_file(data, path_budget: int | None = None) -> ScenarioFile:
    """Parse and validate a scenario document (bytes, str or already-loaded dict).

    ``path_budget`` overrides the budget recorded in the document.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidInputError(f"scenario is not UTF-8: {exc}") from None
    if isinstance(data, str):
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"scenario is not valid JSON: {exc}") from None
    else:
        doc = data
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise InvalidInputError(f"{_schema_path(err)}: {err.message}")

    d = doc["dimension"]
    if "iid" in doc:
        mg = _marginal(doc["iid"]["marginal"], "iid.marginal", d)
        seq = Sequence.iid(mg, doc["iid"]["n"])
    else:
        seq = Sequence(tuple(_marginal(m, f"marginals[{i}]", d) for i, m in enumerate(doc["marginals"])))

    budgets = doc.get("budgets", {})
    out = ScenarioFile(
        sequence=seq,
        name=doc.get("name", ""),
        path_budget=path_budget or budgets.get("paths", DEFAULT_PATH_BUDGET),
        selection_budget=budgets.get("selections", DEFAULT_SELECTION_BUDGET),
        tolerances=replace(Tolerances(), **doc.get("tolerances", {})),
        iid="iid" in doc,
    )
    if seq.path_count > out.path_budget:
        raise BudgetExceededError("path", seq.path_count, out.path_budget)
    return out


def parse_scenario(data) -> Sequence:
    """Parse a scenario document into a validated :class:`Sequence`."""
    return parse_scenario_file(data).sequence


def _marginal_dict(mg: Marginal) -> dict:
    out = {"support": mg.support.tolist(), "generators": mg.generators.tolist()}
    if mg.label:
        out = {"label": mg.label, **out}
    return out


def scenario_dict(seq: Sequence, name: str = "", path_budget: int | None = None,
                  selection_budget: int | None = None, tolerances: Tolerances | None = None) -> dict:
    doc = {"version": SCHEMA_VERSION}
    if name:
        doc["name"] = name
    doc["dimension"] = seq.d
    first = seq.marginals[0]
    if seq.n > 1 and all(mg is first for mg in seq.marginals):
        doc["iid"] = {"n": seq.n, "marginal": _marginal_dict(first)}
    else:
        doc["marginals"] = [_marginal_dict(mg) for mg in seq.marginals]
    budgets = {}
    if path_budget is not None:
        budgets["paths"] = path_budget
    if selection_budget is not None:
        budgets["selections"] = selection_budget
    if budgets:
        doc["budgets"] = budgets
    if tolerances is not None:
        doc["tolerances"] = {f.name: getattr(tolerances, f.name) for f in fields(Tolerances)}
    return doc


def serialize_scenario(seq: Sequence, **kwargs) -> str:
    """JSON text that :func:`parse_scenario` maps back to an equal sequence."""
    return json.dumps(scenario_dict(seq, **kwargs), indent=2) + "\n"
