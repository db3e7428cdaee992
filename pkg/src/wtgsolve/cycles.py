"""Cycle analyses on trimmed region games.

Corner-point abstraction, the zero-or-at-least-one cycle weight check,
green marking of zero-weight cycles, the weight-zero location split, kernel
extraction and the crude value upper bound W.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import networkx as nx

from .core import Guard, Location, StructuralError, Transition, Valuation
from .regions import Region, RegionGame

ANZ = "almost-non-zeno"
VIOLATION = "violation"
BUDGET_EXCEEDED = "budget-exceeded"


@dataclass
class CornerPointGraph:
    """Finite weighted graph over (region-location, closure corner) pairs.

    A transition edge from corner c bundles the delay to a corner c' of the
    transition's firing region (an integer 0 or 1, billed at the location
    rate) with the discrete jump, so every edge weight is a non-negative
    integer and run weights are sandwiched between corner path weights.
    """

    graph: nx.MultiDiGraph
    rg: RegionGame
    by_tid: dict[str, list] = field(default_factory=dict)

    def location_digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.rg.game.locations)
        for t in self.rg.game.transitions:
            if self.has_corner_edge(t.tid):
                g.add_edge(t.src, t.tgt)
        return g

    def has_corner_edge(self, tid: str) -> bool:
        return bool(self.by_tid.get(tid))

    def edges_for(self, tid: str):
        return self.by_tid.get(tid, [])


@dataclass
class AnzReport:
    verdict: str
    kappa: Optional[Fraction] = None
    witness: Optional[list[str]] = None
    witness_weights: Optional[tuple[int, int]] = None
    cycles_checked: int = 0


@dataclass
class GreenMarking:
    locations: frozenset[str]
    transitions: frozenset[str]


@dataclass
class Kernel:
    components: list[frozenset[str]]
    output_edges: list[Transition]

    @property
    def locations(self) -> frozenset[str]:
        return frozenset().union(*self.components) if self.components \
            else frozenset()


def _uniform_delay(c: Valuation, c2: Valuation) -> Optional[int]:
    diffs = {b - a for a, b in zip(c, c2)}
    if len(diffs) == 1:
        d = diffs.pop()
        if d in (0, 1):
            return int(d)
    return None


def build_corner_point(rg: RegionGame) -> CornerPointGraph:
    if not rg.trimmed:
        raise StructuralError("corner-point abstraction needs a trimmed game")
    g = nx.MultiDiGraph()
    game = rg.game
    for name in game.locations:
        for c in rg.reg[name].corners():
            g.add_node((name, c))
    for t in game.transitions:
        fire = rg.guard_region[t.tid]
        src_r = rg.reg[t.src]
        w_loc = game.locations[t.src].weight
        for c in src_r.corners():
            for c2 in fire.corners():
                d = _uniform_delay(c, c2)
                if d is None:
                    continue
                landed = tuple(Fraction(0) if i in t.resets else v
                               for i, v in enumerate(c2))
                if (t.tgt, landed) not in g:
                    raise StructuralError(
                        f"corner {landed} off the target region of {t.tid}")
                g.add_edge((t.src, c), (t.tgt, landed), key=(t.tid, d),
                           tid=t.tid, weight=d * w_loc + t.weight, delay=d)
    by_tid: dict[str, list] = {}
    for u, v, d in g.edges(data=True):
        by_tid.setdefault(d["tid"], []).append((u, v, d))
    return CornerPointGraph(g, rg, by_tid)


def _cycle_weight_range(cp: CornerPointGraph,
                        cycle: list[str]) -> Optional[tuple[int, int]]:
    """Min and max corner-path weight around a region-location cycle, or
    None when no corner realization exists."""
    rg = cp.rg
    tmap = rg.game.transition_map()
    start = tmap[cycle[0]].src
    best: Optional[tuple[int, int]] = None
    for c0 in rg.reg[start].corners():
        # (corner -> (min, max)) weight of partial corner paths
        front = {(start, c0): (0, 0)}
        for tid in cycle:
            nxt: dict = {}
            for node, (lo, hi) in front.items():
                for u, v, data in cp.edges_for(tid):
                    if u != node:
                        continue
                    w = data["weight"]
                    cur = nxt.get(v)
                    if cur is None:
                        nxt[v] = (lo + w, hi + w)
                    else:
                        nxt[v] = (min(cur[0], lo + w), max(cur[1], hi + w))
            front = nxt
            if not front:
                break
        closed = front.get((start, c0))
        if closed is None:
            continue
        if best is None:
            best = closed
        else:
            best = (min(best[0], closed[0]), max(best[1], closed[1]))
    return best


def check_almost_non_zeno(cp: CornerPointGraph,
                          budget: int = 10 ** 6) -> AnzReport:
    """Every region cycle must weigh 0 on all corners or >= 1 on all of
    them; a mixed cycle realizes intermediate run weights in (0, 1)."""
    loc_graph = cp.location_digraph()
    count = 0
    for cycle_nodes in nx.simple_cycles(loc_graph):
        count += 1
        if count > budget:
            return AnzReport(BUDGET_EXCEEDED, cycles_checked=count - 1)
        ring = cycle_nodes + [cycle_nodes[0]]
        # All transition choices along the node cycle, folded into the DP by
        # checking each edge multiplicity separately.
        for tids in _edge_choices(cp, ring):
            rng = _cycle_weight_range(cp, tids)
            if rng is None:
                continue
            lo, hi = rng
            if lo == 0 and hi > 0:
                return AnzReport(VIOLATION, witness=tids,
                                 witness_weights=rng, cycles_checked=count)
    return AnzReport(ANZ, kappa=Fraction(1), cycles_checked=count)


def _edge_choices(cp: CornerPointGraph, ring: list[str]):
    """Transition-id tuples realizing a node cycle (parallel edges branch)."""
    per_hop = []
    for u, v in zip(ring, ring[1:]):
        tids = sorted({t.tid for t in cp.rg.game.outgoing(u)
                       if t.tgt == v and cp.has_corner_edge(t.tid)})
        per_hop.append(tids)
    out = [[]]
    for tids in per_hop:
        out = [acc + [tid] for acc in out for tid in tids]
    return out


def mark_green(rg: RegionGame, cp: CornerPointGraph) -> GreenMarking:
    zero = nx.MultiDiGraph()
    zero.add_nodes_from(cp.graph.nodes)
    for u, v, k, d in cp.graph.edges(keys=True, data=True):
        if d["weight"] == 0:
            zero.add_edge(u, v, key=k, tid=d["tid"])
    locs: set[str] = set()
    tids: set[str] = set()
    for comp in nx.strongly_connected_components(zero):
        sub = zero.subgraph(comp)
        if sub.number_of_edges() == 0:
            continue
        for (loc, _c) in comp:
            locs.add(loc)
        for _u, _v, d in sub.edges(data=True):
            tids.add(d["tid"])
    return GreenMarking(frozenset(locs), frozenset(tids))


def fix_weight_zero(rg: RegionGame,
                    marking: GreenMarking) -> tuple[RegionGame, GreenMarking]:
    """Split every positive-weight green location so green cycling happens
    at rate 0; the original keeps its non-green exits behind a zero-delay
    hop.  Identity when all green locations already have weight 0."""
    game = rg.game
    locations = dict(game.locations)
    transitions = list(game.transitions)
    reg = dict(rg.reg)
    guard_region = dict(rg.guard_region)
    green_locs = set(marking.locations)
    green_tids = set(marking.transitions)
    for name in sorted(marking.locations):
        locobj = game.locations[name]
        if locobj.weight == 0:
            continue
        r = reg[name]
        if not r.zeros:
            raise StructuralError(
                f"green location {name} has no clock pinned at 0")
        green_out = [t for t in transitions
                     if t.src == name and t.tid in green_tids]
        if not any(any(g.op == "==" and g.bound == 0 for g in t.guards)
                   for t in green_out):
            raise StructuralError(
                f"green location {name} (weight {locobj.weight}) has no "
                f"green exit guarded at 0")
        twin = f"{name}~z0"
        locations[twin] = Location(twin, locobj.owner, weight=0,
                                   synthetic=True)
        reg[twin] = r
        out = []
        for t in transitions:
            src = twin if t.src == name and t.tid in green_tids else t.src
            tgt = twin if t.tgt == name else t.tgt
            if (src, tgt) != (t.src, t.tgt):
                t = Transition(t.tid, src, tgt, t.guards, t.resets,
                               t.weight, t.synthetic)
            out.append(t)
        transitions = out
        z = min(r.zeros)
        hop = Transition(f"__z0_{name}", twin, name,
                         guards=(Guard(z, "==", 0),), synthetic=True)
        transitions.append(hop)
        guard_region[hop.tid] = r
        green_locs.discard(name)
        green_locs.add(twin)
    initial = game.initial
    if f"{initial.location}~z0" in locations:
        initial = type(initial)(f"{initial.location}~z0", initial.valuation)
    game2 = type(game)(game.clocks, locations, transitions, initial)
    out_rg = RegionGame(game2, reg, guard_region, trimmed=rg.trimmed,
                        relaxed=rg.relaxed, all_reset=rg.all_reset,
                        w_out=dict(rg.w_out))
    return out_rg, GreenMarking(frozenset(green_locs), frozenset(green_tids))


def extract_kernel(rg: RegionGame, marking: GreenMarking) -> Kernel:
    g = nx.DiGraph()
    g.add_nodes_from(marking.locations)
    tmap = rg.game.transition_map()
    for tid in marking.transitions:
        t = tmap[tid]
        if t.src in marking.locations and t.tgt in marking.locations:
            g.add_edge(t.src, t.tgt)
    comps = []
    for comp in nx.strongly_connected_components(g):
        sub = g.subgraph(comp)
        if sub.number_of_edges() == 0:
            continue
        comps.append(frozenset(comp))
    kernel_locs = frozenset().union(*comps) if comps else frozenset()
    outputs = [t for t in rg.game.transitions
               if t.src in kernel_locs
               and (t.tid not in marking.transitions
                    or t.tgt not in kernel_locs)]
    return Kernel(sorted(comps, key=sorted), outputs)


def compute_bounds(rg: RegionGame) -> tuple[Fraction, Fraction]:
    """(kappa, W): the cycle-weight granularity and a crude upper bound on
    any finite value, counted over the part reachable from the initial
    location."""
    game = rg.game
    g = nx.DiGraph()
    g.add_nodes_from(game.locations)
    g.add_edges_from((t.src, t.tgt) for t in game.transitions)
    reach = nx.descendants(g, game.initial.location) | {game.initial.location}
    max_loc = max((game.locations[n].weight for n in reach), default=0)
    max_tr = max((t.weight for t in game.transitions if t.src in reach),
                 default=0)
    w = Fraction(len(reach) * (max_loc + max_tr + 1))
    return Fraction(1), w
