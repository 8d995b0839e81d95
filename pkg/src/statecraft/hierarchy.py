"""Multilevel structure: composition operators, aggregation maps between
child-state combinations and parent states, coupled arcs, and assembly of
validated multilevel models.

Two diagrams chain sequentially when the first timeline is strictly shorter
(the first diagram's goal is glued to the second diagram's start and the
second timeline is appended).  They pair in parallel only over identical
horizons.  A parent diagram aggregates children by mapping blocks of child
state combinations to parent states, order-monotonically; coupled arcs tie
one parent arc to constituent child arcs, with a firing quorum.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from itertools import product
from typing import Mapping, Optional, Sequence

from .core import (
    Arc,
    ArcKind,
    CanonicalDiagram,
    Distribution,
    Role,
    StateNode,
    TimePartition,
    Violation,
    error_count,
    validate_canonical,
)
from .errors import AssemblyRejected, IdCollision, PreconditionViolated


class SymbolKind(str, Enum):
    INDIVIDUAL = "individual"
    GENERAL = "general"


@dataclass(frozen=True)
class ControlSymbol:
    """Named control input addressing exactly one forward arc.

    Individual symbols address arcs that are not coupling parents; general
    symbols address coupling parent arcs and fan out to the constituents.
    ``cost`` is the resource spent each time the symbol is applied.
    """

    id: str
    kind: SymbolKind
    diagram: str
    arc: str
    cost: float = 1.0

    def __post_init__(self):
        if not isinstance(self.kind, SymbolKind):
            object.__setattr__(self, "kind", SymbolKind(self.kind))


@dataclass(frozen=True)
class AggregationMap:
    """Blocks of child-state combinations, one block per parent state.

    ``child_order`` fixes the component order of every combination tuple.
    """

    child_order: tuple
    blocks: Mapping  # parent state id -> frozenset of combination tuples

    def __post_init__(self):
        object.__setattr__(self, "child_order", tuple(self.child_order))
        object.__setattr__(
            self,
            "blocks",
            {k: frozenset(tuple(c) for c in v) for k, v in dict(self.blocks).items()},
        )

    @cached_property
    def parent_of(self) -> dict:
        out: dict = {}
        for parent, combos in self.blocks.items():
            for combo in combos:
                out.setdefault(combo, parent)
        return out


@dataclass(frozen=True)
class CoupledArc:
    """One parent arc tied to child arcs in distinct child diagrams.

    The parent arc fires when at least ``quorum`` of the child arcs have
    completed a transition within the current partition interval.
    """

    id: str
    parent_diagram: str
    parent_arc: str
    children: tuple  # ((child diagram id, child arc id), ...)
    quorum: int

    def __post_init__(self):
        object.__setattr__(
            self, "children", tuple((d, a) for d, a in self.children)
        )


@dataclass(frozen=True)
class InterLevelRule:
    """Partition of forward arcs into isolated/coupled and of symbols into
    individual/general, as induced by the declared couplings."""

    isolated: frozenset  # of (diagram id, arc id)
    coupled: frozenset
    individual: frozenset  # of symbol ids
    general: frozenset
    default_quorum: object = "all"

    @classmethod
    def derive(cls, diagrams, couplings, symbols) -> "InterLevelRule":
        coupled = set()
        for c in couplings:
            coupled.add((c.parent_diagram, c.parent_arc))
            coupled.update(c.children)
        isolated = set()
        for d in diagrams.values():
            for a in d.forward_arcs:
                if (d.id, a.id) not in coupled:
                    isolated.add((d.id, a.id))
        individual = frozenset(
            s.id for s in symbols.values() if s.kind is SymbolKind.INDIVIDUAL
        )
        general = frozenset(
            s.id for s in symbols.values() if s.kind is SymbolKind.GENERAL
        )
        return cls(frozenset(isolated), frozenset(coupled), individual, general)


@dataclass(frozen=True)
class MultilevelModel:
    """Assembled model: diagrams, a topology forest, aggregation maps for
    every parent, coupled arcs, control symbols and the induced inter-level
    rule.  ``levels`` is the depth of the forest."""

    diagrams: Mapping
    topology: Mapping  # parent diagram id -> tuple of child diagram ids
    aggregations: Mapping
    couplings: tuple
    symbols: Mapping
    rule: InterLevelRule
    levels: int

    def __post_init__(self):
        object.__setattr__(self, "diagrams", dict(self.diagrams))
        object.__setattr__(
            self, "topology", {k: tuple(v) for k, v in dict(self.topology).items()}
        )
        object.__setattr__(self, "aggregations", dict(self.aggregations))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        object.__setattr__(self, "symbols", dict(self.symbols))

    @cached_property
    def parent_of(self) -> dict:
        return {
            child: parent
            for parent, children in self.topology.items()
            for child in children
        }

    @cached_property
    def roots(self) -> tuple:
        return tuple(sorted(d for d in self.diagrams if d not in self.parent_of))

    @cached_property
    def max_horizon(self) -> int:
        return max((d.horizon for d in self.diagrams.values()), default=0)

    @cached_property
    def couplings_by_parent_arc(self) -> dict:
        out: dict = {}
        for c in self.couplings:
            out.setdefault((c.parent_diagram, c.parent_arc), []).append(c)
        return out

    @cached_property
    def couplings_by_constituent(self) -> dict:
        out: dict = {}
        for c in self.couplings:
            for pair in c.children:
                out.setdefault(pair, []).append(c)
        return out

    @cached_property
    def coupled_arc_keys(self) -> frozenset:
        return self.rule.coupled

    def symbol_for_arc(self, diagram_id: str, arc_id: str) -> Optional[ControlSymbol]:
        for s in self.symbols.values():
            if s.diagram == diagram_id and s.arc == arc_id:
                return s
        return None

    def fingerprint_payload(self) -> dict:
        """Deterministic structural dump used for content hashing."""
        return {
            "diagrams": {
                d.id: {
                    "partition": list(d.partition.boundaries),
                    "population": d.population,
                    "states": [
                        [s.id, s.rank, s.interval, s.role.value, s.dwell_limit]
                        for s in sorted(d.states, key=lambda s: s.id)
                    ],
                    "arcs": [
                        [a.id, a.source, a.target, a.kind.value, a.transit_ticks]
                        for a in sorted(d.arcs, key=lambda a: a.id)
                    ],
                    "marks": [dict(m.items()) for m in d.boundary_distributions],
                }
                for d in self.diagrams.values()
            },
            "topology": {k: list(v) for k, v in self.topology.items()},
            "aggregations": {
                parent: {
                    "order": list(m.child_order),
                    "blocks": {
                        state: sorted(list(c) for c in combos)
                        for state, combos in m.blocks.items()
                    },
                }
                for parent, m in self.aggregations.items()
            },
            "couplings": [
                [c.id, c.parent_diagram, c.parent_arc, sorted(c.children), c.quorum]
                for c in sorted(self.couplings, key=lambda c: c.id)
            ],
            "symbols": [
                [s.id, s.kind.value, s.diagram, s.arc, s.cost]
                for s in sorted(self.symbols.values(), key=lambda s: s.id)
            ],
        }


def model_fingerprint(model: MultilevelModel) -> str:
    """Content hash of the model's structure: stable across process runs
    and insensitive to construction order."""
    blob = json.dumps(
        model.fingerprint_payload(),
        sort_keys=True,
        separators=(",", ":"),
        default=str,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# --- composition -------------------------------------------------------------


def compose_sequential(first: CanonicalDiagram, second: CanonicalDiagram) -> CanonicalDiagram:
    """Chain two diagrams: glue the first diagram's final state to the
    second diagram's initial state and append the second timeline.

    Requires the first horizon strictly shorter than the second.  State and
    arc identifiers must not collide except through the glued pair; the
    glued state keeps the first diagram's identifier.
    """
    if first.horizon >= second.horizon:
        raise PreconditionViolated(
            f"sequential composition needs horizon({first.id})={first.horizon} "
            f"< horizon({second.id})={second.horizon}"
        )
    if first.population != second.population:
        raise PreconditionViolated(
            f"populations differ: {first.population} vs {second.population}"
        )
    glue_from = second.initial_state
    glue_to = first.final_state
    if glue_from is None or glue_to is None:
        raise PreconditionViolated("both diagrams need initial and final states")

    shared = first.state_ids & second.state_ids
    allowed = {glue_from.id} if glue_from.id == glue_to.id else set()
    if shared - allowed:
        raise IdCollision(f"state ids collide: {sorted(shared - allowed)}")
    arc_ids = {a.id for a in first.arcs} & {a.id for a in second.arcs}
    if arc_ids:
        raise IdCollision(f"arc ids collide: {sorted(arc_ids)}")

    def rename(state_id: str) -> str:
        return glue_to.id if state_id == glue_from.id else state_id

    max_rank = max(s.rank for s in first.states)
    shift = first.partition.interval_count
    second_sorted = [s for s in second.states_by_rank if s.id != glue_from.id]
    states = [
        s if s.role is not Role.FINAL else StateNode(
            s.id, s.rank, s.interval, Role.INTERMEDIATE, s.dwell_limit
        )
        for s in first.states
    ]
    for i, s in enumerate(second_sorted):
        role = Role.FINAL if s.role is Role.FINAL else Role.INTERMEDIATE
        states.append(StateNode(
            s.id, max_rank + 1 + i, shift + s.interval, role, s.dwell_limit
        ))

    arcs = list(first.arcs)
    for a in second.arcs:
        arcs.append(Arc(a.id, rename(a.source), rename(a.target), a.kind, a.transit_ticks))

    offset = first.horizon
    boundaries = list(first.partition.boundaries) + [
        offset + b for b in second.partition.boundaries[1:]
    ]

    state_ids = frozenset(s.id for s in states)
    marks = [m.with_domain(state_ids) for m in first.boundary_distributions[:-1]]
    for m in second.boundary_distributions:
        marks.append(Distribution(
            {rename(s): f for s, f in m.fractions.items()}, state_ids
        ))

    return CanonicalDiagram(
        id=f"{first.id}+{second.id}",
        partition=TimePartition(tuple(boundaries)),
        states=tuple(states),
        arcs=tuple(arcs),
        boundary_distributions=tuple(marks),
        population=first.population,
    )


@dataclass(frozen=True)
class CompositeDiagram:
    """Pair-state view of two diagrams running in parallel.

    States are ordered componentwise, which is a partial order, so the
    composite is kept as its own type rather than forced into a canonical
    diagram.
    """

    id: str
    components: tuple
    partition: TimePartition
    states: tuple  # of (state id, state id) pairs
    initial: tuple
    final: tuple
    boundary_distributions: tuple  # Distributions keyed by "a|b" pair ids

    @staticmethod
    def pair_id(pair) -> str:
        return f"{pair[0]}|{pair[1]}"

    @property
    def state_count(self) -> int:
        return len(self.states)


def compose_parallel(first: CanonicalDiagram, second: CanonicalDiagram) -> CompositeDiagram:
    """Pair two diagrams over a common refined timeline.

    Requires identical horizons.  Composite boundary distributions are the
    products of the component distributions; at a merged boundary that only
    one component declares, the other component's latest declared
    distribution is held.
    """
    if first.horizon != second.horizon:
        raise PreconditionViolated(
            f"parallel composition needs equal horizons, got "
            f"{first.horizon} and {second.horizon}"
        )
    merged = sorted(set(first.partition.boundaries) | set(second.partition.boundaries))

    def mark_at(diagram: CanonicalDiagram, tick: int) -> Distribution:
        latest = 0
        for i, b in enumerate(diagram.partition.boundaries):
            if b <= tick:
                latest = i
        return diagram.boundary_distributions[latest]

    pairs = [
        (a.id, b.id)
        for a in first.states_by_rank
        for b in second.states_by_rank
    ]
    marks = []
    for tick in merged:
        da, db = mark_at(first, tick), mark_at(second, tick)
        fractions = {}
        for (sa, fa) in da.fractions.items():
            for (sb, fb) in db.fractions.items():
                if fa * fb:
                    fractions[CompositeDiagram.pair_id((sa, sb))] = fa * fb
        marks.append(Distribution(
            fractions, frozenset(CompositeDiagram.pair_id(p) for p in pairs)
        ))

    init_a, init_b = first.initial_state, second.initial_state
    fin_a, fin_b = first.final_state, second.final_state
    if not all((init_a, init_b, fin_a, fin_b)):
        raise PreconditionViolated("both diagrams need initial and final states")

    return CompositeDiagram(
        id=f"{first.id}||{second.id}",
        components=(first.id, second.id),
        partition=TimePartition(tuple(merged)),
        states=tuple(pairs),
        initial=(init_a.id, init_b.id),
        final=(fin_a.id, fin_b.id),
        boundary_distributions=tuple(marks),
    )


# --- aggregation and coupling validation --------------------------------------


def validate_aggregation(
    children: Sequence,
    aggregation: AggregationMap,
    parent: CanonicalDiagram,
) -> list:
    """Check an aggregation map: known states only, pairwise-disjoint
    blocks, full coverage of the child-state product, and monotonicity of
    the block order against the componentwise child order.  Monotonicity
    violations carry a witness pair of combinations."""
    out = []
    by_id = {c.id: c for c in children}
    order = aggregation.child_order
    missing = [d for d in order if d not in by_id]
    if missing:
        out.append(Violation(
            "agg-unknown-child",
            f"aggregation orders unknown child diagram(s) {missing}",
            tuple(missing),
        ))
        return out
    if set(by_id) - set(order):
        out.append(Violation(
            "agg-order-incomplete",
            f"aggregation omits child diagram(s) "
            f"{sorted(set(by_id) - set(order))}",
        ))
        return out

    for parent_state in aggregation.blocks:
        if parent_state not in parent.state_ids:
            out.append(Violation(
                "agg-unknown-parent-state",
                f"block maps to unknown parent state {parent_state}",
                (parent_state,),
            ))

    child_states = [by_id[d].state_ids for d in order]
    universe = set(product(*[sorted(s) for s in child_states]))

    seen: dict = {}
    for parent_state, combos in sorted(aggregation.blocks.items()):
        for combo in sorted(combos):
            bad = [
                s for s, d in zip(combo, order) if s not in by_id[d].state_ids
            ]
            if bad or len(combo) != len(order):
                out.append(Violation(
                    "agg-unknown-state",
                    f"combination {combo} does not fit the child state sets",
                    (parent_state,),
                ))
                continue
            if combo in seen and seen[combo] != parent_state:
                out.append(Violation(
                    "agg-not-disjoint",
                    f"combination {combo} appears in blocks {seen[combo]} "
                    f"and {parent_state}",
                    (seen[combo], parent_state),
                ))
            seen[combo] = parent_state

    uncovered = sorted(universe - set(seen))
    for combo in uncovered:
        out.append(Violation(
            "agg-uncovered",
            f"combination {combo} is not covered by any block",
            (combo,),
        ))

    ranks = [by_id[d].rank_of for d in order]
    parent_rank = parent.rank_of

    def leq(c1, c2) -> bool:
        return all(
            r[a] <= r[b] for a, b, r in zip(c1, c2, ranks)
        )

    covered = sorted(seen)
    for i, c1 in enumerate(covered):
        p1 = seen[c1]
        if p1 not in parent_rank:
            continue
        for c2 in covered[i + 1:]:
            p2 = seen[c2]
            if p2 not in parent_rank:
                continue
            if leq(c1, c2) and parent_rank[p1] > parent_rank[p2]:
                out.append(Violation(
                    "agg-not-monotone",
                    f"combination {c1} maps to {p1} but the componentwise "
                    f"larger {c2} maps to lower-ranked {p2}",
                    (c1, c2),
                ))
            elif leq(c2, c1) and parent_rank[p2] > parent_rank[p1]:
                out.append(Violation(
                    "agg-not-monotone",
                    f"combination {c2} maps to {p2} but the componentwise "
                    f"larger {c1} maps to lower-ranked {p1}",
                    (c2, c1),
                ))
    return out


def validate_coupling(model: MultilevelModel) -> list:
    """Check every coupled arc and the symbol classing against them.

    A coupling must reference existing forward arcs, span distinct declared
    children of its parent diagram, keep its quorum within range, and move
    child combinations from a block of the parent arc's source into a block
    of the parent arc's target.  General symbols must address coupling
    parent arcs; individual symbols must not.
    """
    out = []
    for c in model.couplings:
        parent = model.diagrams.get(c.parent_diagram)
        if parent is None:
            out.append(Violation(
                "coupling-unknown-diagram",
                f"coupling {c.id} names unknown parent diagram "
                f"{c.parent_diagram}",
                (c.id,),
            ))
            continue
        parc = parent.arc_by_id.get(c.parent_arc)
        if parc is None or parc.kind is not ArcKind.FORWARD:
            out.append(Violation(
                "coupling-parent-arc",
                f"coupling {c.id} needs a forward parent arc, "
                f"{c.parent_arc} is missing or not forward",
                (c.id,),
            ))
            continue
        declared_children = set(model.topology.get(c.parent_diagram, ()))
        child_diagrams = [d for d, _ in c.children]
        if len(set(child_diagrams)) != len(child_diagrams):
            out.append(Violation(
                "coupling-duplicate-child",
                f"coupling {c.id} uses one child diagram twice",
                (c.id,),
            ))
        bad_refs = False
        for d, a in c.children:
            child = model.diagrams.get(d)
            if d not in declared_children or child is None:
                out.append(Violation(
                    "coupling-unknown-child",
                    f"coupling {c.id} references {d} which is not a child "
                    f"of {c.parent_diagram}",
                    (c.id, d),
                ))
                bad_refs = True
                continue
            arc = child.arc_by_id.get(a)
            if arc is None or arc.kind is not ArcKind.FORWARD:
                out.append(Violation(
                    "coupling-child-arc",
                    f"coupling {c.id} needs forward child arcs, {d}:{a} "
                    f"is missing or not forward",
                    (c.id, d, a),
                ))
                bad_refs = True
        if not (1 <= c.quorum <= len(c.children)):
            out.append(Violation(
                "coupling-quorum",
                f"coupling {c.id} quorum {c.quorum} outside 1..{len(c.children)}",
                (c.id,),
            ))
        if bad_refs:
            continue

        agg = model.aggregations.get(c.parent_diagram)
        if agg is None:
            out.append(Violation(
                "coupling-no-aggregation",
                f"parent diagram {c.parent_diagram} has no aggregation map",
                (c.id,),
            ))
            continue
        moves = {}
        for d, a in c.children:
            arc = model.diagrams[d].arc_by_id[a]
            moves[d] = (arc.source, arc.target)
        source_block = agg.blocks.get(parc.source, frozenset())
        target_block = agg.blocks.get(parc.target, frozenset())
        applicable = [
            combo
            for combo in sorted(source_block)
            if all(
                combo[agg.child_order.index(d)] == moves[d][0]
                for d in moves
                if d in agg.child_order
            )
        ]
        if not applicable:
            out.append(Violation(
                "coupling-not-applicable",
                f"coupling {c.id} does not cross blocks: no combination in "
                f"the {parc.source} block can fire all child arcs",
                (c.id,),
            ))
        for combo in applicable:
            after = tuple(
                moves[d][1] if d in moves else s
                for s, d in zip(combo, agg.child_order)
            )
            if after not in target_block:
                out.append(Violation(
                    "coupling-wrong-block",
                    f"coupling {c.id} does not cross blocks: firing from "
                    f"{combo} lands on {after}, outside the {parc.target} "
                    f"block",
                    (c.id, combo, after),
                ))

    parent_arc_keys = {
        (c.parent_diagram, c.parent_arc) for c in model.couplings
    }
    for s in sorted(model.symbols.values(), key=lambda s: s.id):
        is_parent = (s.diagram, s.arc) in parent_arc_keys
        if s.kind is SymbolKind.GENERAL and not is_parent:
            out.append(Violation(
                "symbol-class-mismatch",
                f"general symbol {s.id} mapped to an isolated arc "
                f"{s.diagram}:{s.arc}",
                (s.id,),
            ))
        if s.kind is SymbolKind.INDIVIDUAL and is_parent:
            out.append(Violation(
                "symbol-class-mismatch",
                f"individual symbol {s.id} mapped to coupling parent arc "
                f"{s.diagram}:{s.arc}",
                (s.id,),
            ))
    return out


def _forest_depth(topology: Mapping, diagrams: Mapping) -> tuple:
    """Depth of the topology forest plus any structural violations."""
    out = []
    parent_of: dict = {}
    for parent, children in topology.items():
        if parent not in diagrams:
            out.append(Violation(
                "topology-unknown",
                f"topology names unknown diagram {parent}",
                (parent,),
            ))
        for child in children:
            if child not in diagrams:
                out.append(Violation(
                    "topology-unknown",
                    f"topology names unknown diagram {child}",
                    (child,),
                ))
            if child in parent_of:
                out.append(Violation(
                    "topology-multi-parent",
                    f"diagram {child} has parents {parent_of[child]} and "
                    f"{parent}",
                    (child,),
                ))
            parent_of[child] = parent

    depth = {}

    def walk(node, trail):
        if node in trail:
            out.append(Violation(
                "topology-cycle",
                f"topology cycle through {node}",
                (node,),
            ))
            return 0
        if node in depth:
            return depth[node]
        children = topology.get(node, ())
        d = 1 + max((walk(c, trail | {node}) for c in children), default=0)
        depth[node] = d
        return d

    roots = [d for d in diagrams if d not in parent_of]
    levels = max((walk(r, frozenset()) for r in sorted(roots)), default=0)
    if not roots and diagrams:
        out.append(Violation("topology-cycle", "topology has no root"))
    return levels, out


def assemble(
    diagrams: Sequence,
    topology: Mapping,
    aggregations: Mapping,
    couplings: Sequence = (),
    symbols: Sequence = (),
) -> MultilevelModel:
    """Validate all parts together and return the model, or raise
    :class:`AssemblyRejected` carrying the full report.

    Checks: each diagram individually, unique diagram ids, topology forms a
    forest, every non-leaf has an aggregation map validating against its
    children, couplings and symbol classes, and the symbol/forward-arc
    bijection (every forward arc of every diagram is addressed by exactly
    one symbol).
    """
    report: list = []
    by_id: dict = {}
    for d in diagrams:
        if d.id in by_id:
            report.append(Violation(
                "diagram-duplicate", f"duplicate diagram id {d.id}", (d.id,)
            ))
        by_id[d.id] = d
        for v in validate_canonical(d):
            report.append(Violation(
                v.code, f"{d.id}: {v.message}", (d.id,) + tuple(v.subjects),
                v.severity,
            ))

    levels, topo_violations = _forest_depth(topology, by_id)
    report.extend(topo_violations)

    for parent_id, children_ids in sorted(topology.items()):
        if parent_id not in by_id or any(c not in by_id for c in children_ids):
            continue
        agg = aggregations.get(parent_id)
        if agg is None:
            report.append(Violation(
                "agg-missing",
                f"non-leaf diagram {parent_id} has no aggregation map",
                (parent_id,),
            ))
            continue
        report.extend(validate_aggregation(
            [by_id[c] for c in agg.child_order if c in by_id],
            agg,
            by_id[parent_id],
        ))
    for parent_id in sorted(aggregations):
        if parent_id not in topology:
            report.append(Violation(
                "agg-no-children",
                f"aggregation declared for {parent_id} which has no children",
                (parent_id,),
            ))

    symbol_map: dict = {}
    for s in symbols:
        if s.id in symbol_map:
            report.append(Violation(
                "symbol-duplicate", f"duplicate symbol id {s.id}", (s.id,)
            ))
        symbol_map[s.id] = s

    arc_symbols: dict = {}
    for s in symbol_map.values():
        d = by_id.get(s.diagram)
        if d is None:
            report.append(Violation(
                "symbol-unknown-diagram",
                f"symbol {s.id} addresses unknown diagram {s.diagram}",
                (s.id,),
            ))
            continue
        arc = d.arc_by_id.get(s.arc)
        if arc is None:
            report.append(Violation(
                "symbol-unknown-arc",
                f"symbol {s.id} addresses unknown arc {s.diagram}:{s.arc}",
                (s.id,),
            ))
            continue
        if arc.kind is not ArcKind.FORWARD:
            report.append(Violation(
                "symbol-backstep",
                f"symbol {s.id} addresses backstep arc {s.arc}; only "
                f"forward arcs take control symbols",
                (s.id,),
            ))
            continue
        key = (s.diagram, s.arc)
        if key in arc_symbols:
            report.append(Violation(
                "symbol-not-bijective",
                f"arc {s.diagram}:{s.arc} is addressed by both "
                f"{arc_symbols[key]} and {s.id}",
                (arc_symbols[key], s.id),
            ))
        arc_symbols[key] = s.id
    for d in by_id.values():
        for a in d.forward_arcs:
            if (d.id, a.id) not in arc_symbols:
                report.append(Violation(
                    "symbol-not-bijective",
                    f"forward arc {d.id}:{a.id} has no control symbol",
                    (d.id, a.id),
                ))

    rule = InterLevelRule.derive(by_id, couplings, symbol_map)
    model = MultilevelModel(
        diagrams=by_id,
        topology=topology,
        aggregations=aggregations,
        couplings=tuple(couplings),
        symbols=symbol_map,
        rule=rule,
        levels=levels,
    )
    seen_couplings = set()
    for c in model.couplings:
        if c.id in seen_couplings:
            report.append(Violation(
                "coupling-duplicate", f"duplicate coupling id {c.id}", (c.id,)
            ))
        seen_couplings.add(c.id)
    report.extend(validate_coupling(model))

    if error_count(report):
        raise AssemblyRejected(report)
    return model
