"""Declarative JSON game format.

Top-level keys: `types`, `states`, `actions` (ints), `g`, `alpha`, `delta`
(arrays, one entry per type), optional `mask` (array of [tau, x, a] triples
that are ALLOWED; absent means all actions allowed), `transitions` (array of
{tau, x, a, to, prob} with `prob` an expression string) and optional `rewards`
(array of {tau, x, a, value}; missing cells default to reward 0).

Every unmasked (tau, x, a) must declare at least one transition entry;
undeclared target states get probability 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import EvalError, SpecError
from .types import GameSpec


@dataclass(frozen=True)
class GameDocument:
    """Parsed declarative game; the serializable source of a GameSpec."""

    n_tau: int
    n_x: int
    n_a: int
    g: tuple[float, ...]
    alpha: tuple[float, ...]
    delta: tuple[float, ...]
    mask_triples: tuple[tuple[int, int, int], ...] | None
    transitions: dict[tuple[int, int, int, int], ex.Expr]
    rewards: dict[tuple[int, int, int], ex.Expr]
    name: str = "game"


def _require(obj: dict, key: str, kind, what: str):
    if key not in obj:
        raise SpecError(f"{what} is missing required key {key!r}")
    value = obj[key]
    if kind is int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise SpecError(f"{what} key {key!r} must be an integer")
    elif kind is list and not isinstance(value, list):
        raise SpecError(f"{what} key {key!r} must be an array")
    elif kind is str and not isinstance(value, str):
        raise SpecError(f"{what} key {key!r} must be a string")
    return value


def _float_vector(obj: dict, key: str, n: int) -> tuple[float, ...]:
    raw = _require(obj, key, list, "game file")
    if len(raw) != n or not all(isinstance(v, (int, float)) and
                                not isinstance(v, bool) for v in raw):
        raise SpecError(f"game file key {key!r} must be an array of {n} numbers")
    return tuple(float(v) for v in raw)


def parse_game_file(text: str, name: str = "game") -> GameSpec:
    """Parse the JSON game format into a GameSpec with compiled evaluators."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as err:
        raise SpecError(
            f"syntax error at {err.lineno}:{err.colno}: {err.msg}") from err
    if not isinstance(obj, dict):
        raise SpecError("game file must be a JSON object")
    return spec_from_document(parse_game_dict(obj, name))


def parse_game_dict(obj: dict, name: str = "game") -> GameDocument:
    n_tau = _require(obj, "types", int, "game file")
    n_x = _require(obj, "states", int, "game file")
    n_a = _require(obj, "actions", int, "game file")
    if min(n_tau, n_x, n_a) < 1:
        raise SpecError("types, states and actions must all be at least 1")
    g = _float_vector(obj, "g", n_tau)
    alpha = _float_vector(obj, "alpha", n_tau)
    delta = _float_vector(obj, "delta", n_tau)

    mask_triples = None
    if "mask" in obj:
        raw_mask = _require(obj, "mask", list, "game file")
        triples = []
        for item in raw_mask:
            if (not isinstance(item, list) or len(item) != 3
                    or not all(isinstance(v, int) for v in item)):
                raise SpecError("mask entries must be [tau, x, a] triples")
            tau, x, a = item
            if not (0 <= tau < n_tau and 0 <= x < n_x and 0 <= a < n_a):
                raise SpecError(f"mask triple [{tau}, {x}, {a}] is out of range")
            triples.append((tau, x, a))
        mask_triples = tuple(triples)
        mask = np.zeros((n_tau, n_x, n_a), dtype=bool)
        for tau, x, a in triples:
            mask[tau, x, a] = True
    else:
        mask = np.ones((n_tau, n_x, n_a), dtype=bool)

    transitions: dict[tuple[int, int, int, int], ex.Expr] = {}
    for item in _require(obj, "transitions", list, "game file"):
        if not isinstance(item, dict):
            raise SpecError("transition entries must be objects")
        tau = _require(item, "tau", int, "transition entry")
        x = _require(item, "x", int, "transition entry")
        a = _require(item, "a", int, "transition entry")
        to = _require(item, "to", int, "transition entry")
        prob = _require(item, "prob", str, "transition entry")
        if not (0 <= tau < n_tau and 0 <= x < n_x and 0 <= a < n_a
                and 0 <= to < n_x):
            raise SpecError(f"transition entry ({tau}, {x}, {a}, to={to}) "
                            "is out of range")
        if not mask[tau, x, a]:
            raise SpecError(f"transition declared for masked action "
                            f"({tau}, {x}, {a})")
        key = (tau, x, a, to)
        if key in transitions:
            raise SpecError(f"duplicate transition entry ({tau}, {x}, {a}, "
                            f"to={to})")
        tree = ex.parse_expr(prob)
        ex.check_refs(tree, n_tau, n_x, n_a, mask)
        transitions[key] = tree

    for tau in range(n_tau):
        for x in range(n_x):
            for a in range(n_a):
                if mask[tau, x, a] and not any(
                        k[:3] == (tau, x, a) for k in transitions):
                    raise SpecError(
                        f"missing transition row for ({tau}, {x}, {a})")

    rewards: dict[tuple[int, int, int], ex.Expr] = {}
    for item in obj.get("rewards", []):
        if not isinstance(item, dict):
            raise SpecError("reward entries must be objects")
        tau = _require(item, "tau", int, "reward entry")
        x = _require(item, "x", int, "reward entry")
        a = _require(item, "a", int, "reward entry")
        value = _require(item, "value", str, "reward entry")
        if not (0 <= tau < n_tau and 0 <= x < n_x and 0 <= a < n_a):
            raise SpecError(f"reward entry ({tau}, {x}, {a}) is out of range")
        if not mask[tau, x, a]:
            raise SpecError(f"reward declared for masked action ({tau}, {x}, {a})")
        key = (tau, x, a)
        if key in rewards:
            raise SpecError(f"duplicate reward entry ({tau}, {x}, {a})")
        tree = ex.parse_expr(value)
        ex.check_refs(tree, n_tau, n_x, n_a, mask)
        rewards[key] = tree

    return GameDocument(n_tau, n_x, n_a, g, alpha, delta, mask_triples,
                        transitions, rewards, name)


def spec_from_document(doc: GameDocument) -> GameSpec:
    """Compile a declarative document into a GameSpec with table evaluators."""
    n_tau, n_x, n_a = doc.n_tau, doc.n_x, doc.n_a
    if doc.mask_triples is None:
        mask = np.ones((n_tau, n_x, n_a), dtype=bool)
    else:
        mask = np.zeros((n_tau, n_x, n_a), dtype=bool)
        for tau, x, a in doc.mask_triples:
            mask[tau, x, a] = True
    g = np.asarray(doc.g)

    trans_cells = [
        (key, _cell_fn(tree, key[0], key[1], key[2], n_tau, n_x, n_a, mask))
        for key, tree in sorted(doc.transitions.items())
    ]
    reward_cells = [
        (key, _cell_fn(tree, key[0], key[1], key[2], n_tau, n_x, n_a, mask))
        for key, tree in sorted(doc.rewards.items())
    ]

    def transitions(pi, d):
        out = np.zeros((n_tau, n_x, n_a, n_x))
        for (tau, x, a, to), fn in trans_cells:
            out[tau, x, a, to] = fn(pi, d, g)
        return out

    def rewards(pi, d):
        out = np.zeros((n_tau, n_x, n_a))
        for (tau, x, a), fn in reward_cells:
            out[tau, x, a] = fn(pi, d, g)
        return out

    return GameSpec(n_tau=n_tau, n_x=n_x, n_a=n_a, action_mask=mask,
                    g=g, alpha=np.asarray(doc.alpha),
                    delta=np.asarray(doc.delta), transitions=transitions,
                    rewards=rewards, name=doc.name, source=doc)


def _cell_fn(tree: ex.Expr, tau: int, x: int, a: int,
             n_tau: int, n_x: int, n_a: int, mask):
    fn = ex.compile_expr(tree, n_tau, n_x, n_a, mask)

    def run(pi, d, g):
        try:
            return fn(pi, d, g)
        except EvalError as err:
            raise EvalError(str(err), tau=tau, x=x, a=a) from err

    return run


def serialize_game(spec: GameSpec) -> str:
    """Serialize a declaratively-defined GameSpec back to canonical JSON text.

    parse_game_file(serialize_game(spec)) reproduces the spec up to
    expression-tree equality.
    """
    doc = spec.source
    if not isinstance(doc, GameDocument):
        raise SpecError("game has no declarative source to serialize")
    obj: dict = {
        "types": doc.n_tau,
        "states": doc.n_x,
        "actions": doc.n_a,
        "g": list(doc.g),
        "alpha": list(doc.alpha),
        "delta": list(doc.delta),
    }
    if doc.mask_triples is not None:
        obj["mask"] = [list(t) for t in sorted(doc.mask_triples)]
    obj["transitions"] = [
        {"tau": tau, "x": x, "a": a, "to": to, "prob": ex.unparse(tree)}
        for (tau, x, a, to), tree in sorted(doc.transitions.items())
    ]
    obj["rewards"] = [
        {"tau": tau, "x": x, "a": a, "value": ex.unparse(tree)}
        for (tau, x, a), tree in sorted(doc.rewards.items())
    ]
    return json.dumps(obj, indent=2) + "\n"
