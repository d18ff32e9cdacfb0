"""Data-driven predicates over observations.

Conditions are JSON-friendly comparison trees so state machines can be
authored in config files and emitted by the tactic miner.  A condition
compiles once into a closure; evaluation stays cheap in per-tick loops.

Grammar:

    {"const": true}
    {"field": "opponent_attacking"}                    truthy test
    {"field": "distance", "op": "<", "value": 10}      comparison
    {"all": [cond, ...]}   {"any": [cond, ...]}   {"not": cond}

Fields are looked up with .get(), so both engine Observations and plain
dicts (e.g. event streams in tests) work.
"""

from __future__ import annotations

import operator
from typing import Callable, Mapping

_OPS = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}


class ConditionError(ValueError):
    pass


def compile_condition(spec) -> Callable:
    """Compile a condition tree into predicate(obs) -> bool."""
    if not isinstance(spec, Mapping):
        raise ConditionError(f"condition must be a mapping, got {spec!r}")
    if "const" in spec:
        val = bool(spec["const"])
        return lambda obs: val
    if "all" in spec:
        subs = [compile_condition(s) for s in spec["all"]]
        if not subs:
            raise ConditionError("empty 'all'")
        return lambda obs: all(s(obs) for s in subs)
    if "any" in spec:
        subs = [compile_condition(s) for s in spec["any"]]
        if not subs:
            raise ConditionError("empty 'any'")
        return lambda obs: any(s(obs) for s in subs)
    if "not" in spec:
        sub = compile_condition(spec["not"])
        return lambda obs: not sub(obs)
    if "field" in spec:
        field = spec["field"]
        if "op" not in spec:
            return lambda obs: bool(obs.get(field))
        op = _OPS.get(spec["op"])
        if op is None:
            raise ConditionError(f"unknown operator {spec['op']!r}")
        if "value" not in spec:
            raise ConditionError(f"comparison on {field!r} needs a value")
        value = spec["value"]
        return lambda obs: op(obs.get(field), value)
    raise ConditionError(f"unrecognized condition: {spec!r}")


def evaluate(spec, obs) -> bool:
    """One-shot evaluation (compiles then applies; tests and tooling)."""
    return compile_condition(spec)(obs)
