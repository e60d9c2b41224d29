"""JSON (de)serialization of game specs and solutions.

Floats are written as decimals with 17 significant digits, which is enough for
an exact IEEE-754 double round trip.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .game import DiscountedGameSpec, EpisodicGameSpec, LinearGameSpec

FORMAT_VERSION = 1


class SpecFormatError(ValueError):
    """Raised when a spec file cannot be parsed or does not match the schema."""


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x}")
    return format(x, ".17g")


def dumps_value(v) -> str:
    """Compact JSON for nested lists/arrays/dicts with 17-digit floats."""
    if isinstance(v, np.ndarray):
        v = v.tolist() if v.ndim else v.item()
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(dumps_value(x) for x in v) + "]"
    if v is None:
        return "null"
    if isinstance(v, str):
        return json.dumps(v)
    return _num(v)


def dumps_document(fields: dict) -> str:
    lines = [f"  {json.dumps(k)}: {dumps_value(v)}" for k, v in fields.items()]
    return "{\n" + ",\n".join(lines) + "\n}\n"


def spec_to_fields(spec) -> dict:
    if isinstance(spec, EpisodicGameSpec):
        return {
            "format_version": FORMAT_VERSION, "kind": "episodic", "H": spec.H,
            "S": spec.S, "A1": spec.A1, "A2": spec.A2,
            "transitions": list(spec.transitions), "rewards": list(spec.rewards),
            "initial_state": spec.initial_state,
        }
    if isinstance(spec, DiscountedGameSpec):
        return {
            "format_version": FORMAT_VERSION, "kind": "discounted", "gamma": spec.gamma,
            "S": spec.S, "A1": spec.A1, "A2": spec.A2,
            "transitions": list(spec.transitions), "rewards": list(spec.rewards),
            "initial_state": spec.initial_state,
        }
    if isinstance(spec, LinearGameSpec):
        return {
            "format_version": FORMAT_VERSION, "kind": "linear", "H": spec.H,
            "S": spec.S, "A1": spec.A1, "A2": spec.A2, "d": spec.d,
            "phi": list(spec.phi), "theta": list(spec.theta), "mu": list(spec.mu),
            "initial_state": spec.initial_state,
        }
    raise TypeError(f"not a game spec: {type(spec).__name__}")


def write_spec(spec, path) -> None:
    Path(path).write_text(dumps_document(spec_to_fields(spec)), newline="\n")


def _require(doc, name, kind=None):
    if name not in doc:
        raise SpecFormatError(f"missing field {name!r}")
    value = doc[name]
    if kind is int and (not isinstance(value, int) or isinstance(value, bool)):
        raise SpecFormatError(f"field {name!r} must be an integer")
    return value


def _tables(doc, name, n):
    raw = _require(doc, name)
    if not isinstance(raw, list) or len(raw) != n:
        raise SpecFormatError(f"field {name!r} must be a list of {n} tables")
    out = []
    for i, t in enumerate(raw):
        try:
            out.append(np.array(t, dtype=float))
        except (TypeError, ValueError) as exc:
            raise SpecFormatError(f"field {name!r}[{i}] is not a rectangular numeric array") from exc
    return tuple(out)


def _initial(doc):
    init = _require(doc, "initial_state")
    if isinstance(init, int) and not isinstance(init, bool):
        return init
    if isinstance(init, list):
        return np.array(init, dtype=float)
    raise SpecFormatError("field 'initial_state' must be an index or a probability list")


def spec_from_fields(doc: dict):
    if not isinstance(doc, dict):
        raise SpecFormatError("top-level value must be a JSON object")
    version = _require(doc, "format_version")
    if version != FORMAT_VERSION:
        raise SpecFormatError(f"schema version mismatch: file has {version!r}, expected {FORMAT_VERSION}")
    kind = _require(doc, "kind")
    S, A1, A2 = (_require(doc, k, int) for k in ("S", "A1", "A2"))
    if kind == "episodic":
        H = _require(doc, "H", int)
        return EpisodicGameSpec(
            H, S, A1, A2, _tables(doc, "transitions", 2 * H), _tables(doc, "rewards", 2 * H), _initial(doc)
        )
    if kind == "discounted":
        gamma = float(_require(doc, "gamma"))
        init = _initial(doc)
        if not isinstance(init, int):
            raise SpecFormatError("discounted games need a fixed 'initial_state' index")
        return DiscountedGameSpec(
            S, A1, A2, gamma, _tables(doc, "transitions", 2), _tables(doc, "rewards", 2), init
        )
    if kind == "linear":
        H = _require(doc, "H", int)
        d = _require(doc, "d", int)
        n = 2 * H
        return LinearGameSpec(
            H, S, A1, A2, d, _tables(doc, "phi", n), _tables(doc, "theta", n), _tables(doc, "mu", n), _initial(doc)
        )
    raise SpecFormatError(f"field 'kind' has unknown value {kind!r}")


def read_spec(path):
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return spec_from_fields(doc)
    except SpecFormatError as exc:
        raise SpecFormatError(f"{path}: {exc}") from None


def solution_to_fields(sol) -> dict:
    """Export a NashSolution / DiscountedNashSolution as plain JSON fields."""
    from .solver import DiscountedNashSolution

    gmin = sol.gap_plus_min if sol.gap_plus_min is not None else "all-zero"
    if isinstance(sol, DiscountedNashSolution):
        return {
            "format_version": FORMAT_VERSION, "kind": "discounted",
            "V": sol.Vstar, "Q": list(sol.Qstar), "pi": sol.pi, "mu": sol.mu,
            "gap_plus": list(sol.gap_plus), "gap_plus_min": gmin, "tolerance": sol.tol,
        }
    return {
        "format_version": FORMAT_VERSION, "kind": "episodic",
        "V": sol.Vstar, "Q": list(sol.Qstar),
        "pi": list(sol.policy.pi), "mu": list(sol.policy.mu),
        "gap_plus": list(sol.gap_plus), "gap_plus_min": gmin,
    }


def write_solution(sol, path, extra: dict | None = None) -> None:
    fields = solution_to_fields(sol)
    if extra:
        fields.update(extra)
    Path(path).write_text(dumps_document(fields), newline="\n")
