"""JSON (de)serialization for games and piecewise-linear functions."""
from __future__ import annotations

import json
from fractions import Fraction

from .core import (
    Configuration,
    Guard,
    InputError,
    Location,
    Transition,
    WeightedTimedGame,
    frac,
    frac_str,
)

_OP_ALIASES = {"<": "<", "<=": "<=", "=": "==", "==": "==", ">=": ">=", ">": ">"}


def game_from_dict(data: dict) -> WeightedTimedGame:
    try:
        clocks = list(data["clocks"])
        index = {name: i for i, name in enumerate(clocks)}
        if len(index) != len(clocks):
            raise InputError("duplicate clock names")
        locations = {}
        for ld in data["locations"]:
            loc = Location(
                name=ld["id"],
                owner=ld["owner"],
                is_goal=bool(ld.get("goal", False)),
                weight=int(ld.get("weight", 0)),
            )
            if loc.name in locations:
                raise InputError(f"duplicate location {loc.name}")
            locations[loc.name] = loc
        transitions = []
        for i, td in enumerate(data["transitions"]):
            guards = []
            for clock, op, bound in td.get("guards", ()):
                if op not in _OP_ALIASES:
                    raise InputError(f"bad guard operator {op!r}")
                if clock not in index:
                    raise InputError(f"unknown clock {clock!r}")
                guards.append(Guard(index[clock], _OP_ALIASES[op], int(bound)))
            resets = frozenset(index[c] for c in td.get("resets", ()))
            transitions.append(
                Transition(
                    tid=td.get("id", f"t{i}"),
                    src=td["from"],
                    tgt=td["to"],
                    guards=tuple(guards),
                    resets=resets,
                    weight=int(td.get("weight", 0)),
                )
            )
        ini = data["initial"]
        vals = ini.get("valuation", {})
        valuation = tuple(frac(vals.get(c, 0)) for c in clocks)
        initial = Configuration(ini["location"], valuation)
    except KeyError as exc:
        raise InputError(f"missing field {exc}") from exc
    return WeightedTimedGame(clocks, locations, transitions, initial)


def game_to_dict(game: WeightedTimedGame) -> dict:
    return {
        "clocks": list(game.clocks),
        "locations": [
            {"id": l.name, "owner": l.owner, "goal": l.is_goal, "weight": l.weight}
            for l in game.locations.values()
        ],
        "transitions": [
            {
                "id": t.tid,
                "from": t.src,
                "to": t.tgt,
                "guards": [[game.clocks[g.clock], g.op, g.bound] for g in t.guards],
                "resets": sorted(game.clocks[c] for c in t.resets),
                "weight": t.weight,
            }
            for t in game.transitions
        ],
        "initial": {
            "location": game.initial.location,
            "valuation": {
                c: frac_str(v) for c, v in zip(game.clocks, game.initial.valuation)
            },
        },
    }


def load_game(path: str) -> WeightedTimedGame:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc}") from exc
    return game_from_dict(data)


def save_game(game: WeightedTimedGame, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(game_to_dict(game), fh, indent=2)


def plf1_to_list(plf) -> object:
    if plf.is_infinite:
        return "+inf"
    return [[frac_str(x), frac_str(y)] for x, y in plf.points]


def plf1_from_list(data) -> "PLF1":
    from .plf import PLF1

    if data == "+inf":
        return PLF1.infinite()
    return PLF1(tuple((frac(x), frac(y)) for x, y in data))


def plf2_to_dict(plf) -> dict:
    verts: list[tuple[Fraction, Fraction]] = []
    vindex: dict[tuple[Fraction, Fraction], int] = {}

    def vid(p):
        if p not in vindex:
            vindex[p] = len(verts)
            verts.append(p)
        return vindex[p]

    cells = []
    coeffs = []
    for tri, (a, b, c) in plf.cells:
        cells.append([vid(p) for p in tri])
        coeffs.append([frac_str(a), frac_str(b), frac_str(c)])
    return {
        "vertices": [[frac_str(x), frac_str(y)] for x, y in verts],
        "cells": cells,
        "coeffs": coeffs,
    }
