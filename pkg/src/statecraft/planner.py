"""Plan search over IF-THEN transition rules, objectives trees, and reusable
diagram templates.

A transition rule moves an object from one state to a higher-ranked state
under a named control, spending a resource amount and a whole number of
ticks, optionally forbidding a later backstep into a named state.  Plan
enumeration is an exhaustive depth-first search over rule chains with
dominance pruning, returning the full Pareto frontier over
(total resource, total time).  Plans convert to control schedules by prefix
sums of rule durations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
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
)
from .errors import (
    InvalidOverride,
    NoPlanExists,
    TransformBreaksOrder,
    UnknownGoalState,
    UnknownSupportState,
)
from .hierarchy import ControlSymbol, SymbolKind


@dataclass(frozen=True)
class TransitionRule:
    """IF at ``source`` THEN ``control`` moves the object to ``target`` for
    ``resource`` units over ``duration`` ticks, and from then on the plan
    must never pass through ``forbidden_backstep``."""

    id: str
    source: str
    target: str
    control: str = ""
    resource: float = 0.0
    duration: int = 1
    forbidden_backstep: Optional[str] = None


@dataclass(frozen=True)
class Plan:
    """A chained rule sequence with its cost totals and visited states."""

    rules: tuple  # of TransitionRule
    total_resource: float
    total_time: int
    states: tuple  # visited state ids, start first

    @property
    def rule_ids(self) -> tuple:
        return tuple(r.id for r in self.rules)

    def dominates(self, other: "Plan") -> bool:
        """Weak dominance with at least one strict improvement."""
        return (
            self.total_resource <= other.total_resource
            and self.total_time <= other.total_time
            and (
                self.total_resource < other.total_resource
                or self.total_time < other.total_time
            )
        )


def validate_rules(
    rules: Sequence,
    diagram: CanonicalDiagram,
    symbols: Optional[Mapping] = None,
) -> list:
    """Report unknown states/symbols, rank violations, nonpositive
    durations, negative resources, and duplicate (source, target, control)
    triples."""
    out = []
    seen_triples: dict = {}
    seen_ids: set = set()
    ranks = diagram.rank_of
    for r in rules:
        if r.id in seen_ids:
            out.append(Violation(
                "rule-duplicate-id", f"duplicate rule id {r.id}", (r.id,)
            ))
        seen_ids.add(r.id)
        unknown = [
            s for s in (r.source, r.target, r.forbidden_backstep)
            if s is not None and s not in ranks
        ]
        for s in unknown:
            out.append(Violation(
                "rule-unknown-state",
                f"rule {r.id} references unknown state {s}",
                (r.id, s),
            ))
        if symbols is not None and r.control not in symbols:
            out.append(Violation(
                "rule-unknown-symbol",
                f"rule {r.id} references unknown control symbol {r.control}",
                (r.id, r.control),
            ))
        if not unknown:
            if ranks[r.source] >= ranks[r.target]:
                out.append(Violation(
                    "rule-rank",
                    f"rule {r.id} must climb ranks, "
                    f"{r.source} (rank {ranks[r.source]}) does not precede "
                    f"{r.target} (rank {ranks[r.target]})",
                    (r.id,),
                ))
            if (
                r.forbidden_backstep is not None
                and ranks[r.forbidden_backstep] >= ranks[r.target]
            ):
                out.append(Violation(
                    "rule-guard-rank",
                    f"rule {r.id} forbids backstep to "
                    f"{r.forbidden_backstep} which does not sit below "
                    f"{r.target}",
                    (r.id,),
                ))
        if r.duration < 1:
            out.append(Violation(
                "rule-duration",
                f"rule {r.id} duration must be a positive tick count",
                (r.id,),
            ))
        if r.resource < 0:
            out.append(Violation(
                "rule-resource",
                f"rule {r.id} resource must be nonnegative",
                (r.id,),
            ))
        triple = (r.source, r.target, r.control)
        if triple in seen_triples:
            out.append(Violation(
                "rule-duplicate",
                f"rules {seen_triples[triple]} and {r.id} duplicate the "
                f"triple {triple}",
                (seen_triples[triple], r.id),
            ))
        else:
            seen_triples[triple] = r.id
    return out


def enumerate_plans(
    rules: Sequence,
    start: str,
    goal: str,
    budgets: Optional[tuple] = None,
) -> tuple:
    """All Pareto-nondominated rule chains from ``start`` to ``goal``.

    ``budgets`` is an optional (max resource, max time) pair; either bound
    may be None.  Returns plans sorted by their rule-id sequences.  Raises
    :class:`NoPlanExists` only when ``start`` or ``goal`` is not a state any
    rule mentions; an empty frontier over known states is returned as ().
    """
    known = set()
    for r in rules:
        known.add(r.source)
        known.add(r.target)
        if r.forbidden_backstep is not None:
            known.add(r.forbidden_backstep)
    if start not in known:
        raise NoPlanExists(f"start state {start} appears in no rule")
    if goal not in known:
        raise NoPlanExists(f"goal state {goal} appears in no rule")

    max_resource = budgets[0] if budgets else None
    max_time = budgets[1] if budgets else None

    if start == goal:
        return (Plan((), 0.0, 0, (start,)),)

    by_source: dict = {}
    for r in sorted(rules, key=lambda r: r.id):
        by_source.setdefault(r.source, []).append(r)

    # Strictly-dominated partial labels at a state can never finish a
    # nondominated plan (rule costs are nonnegative), so they are pruned.
    labels: dict = {}
    complete: list = []

    def dominated_at(state: str, resource: float, time: int) -> bool:
        for (lr, lt) in labels.get(state, ()):
            if lr <= resource and lt <= time and (lr < resource or lt < time):
                return True
        return False

    def visit(state, chain, visited, forbidden, resource, time):
        if max_resource is not None and resource > max_resource:
            return
        if max_time is not None and time > max_time:
            return
        if dominated_at(state, resource, time):
            return
        labels.setdefault(state, []).append((resource, time))
        if state == goal:
            complete.append(Plan(tuple(chain), resource, time, tuple(visited)))
            return
        for r in by_source.get(state, ()):
            nxt = r.target
            if nxt in visited or nxt in forbidden:
                continue
            if r.forbidden_backstep is not None and r.forbidden_backstep in (nxt,):
                continue
            next_forbidden = (
                forbidden | {r.forbidden_backstep}
                if r.forbidden_backstep is not None
                else forbidden
            )
            chain.append(r)
            visited.append(nxt)
            visit(
                nxt, chain, visited, next_forbidden,
                resource + r.resource, time + r.duration,
            )
            chain.pop()
            visited.pop()

    visit(start, [], [start], frozenset(), 0.0, 0)

    frontier = [
        p for p in complete
        if not any(q.dominates(p) for q in complete)
    ]
    return tuple(sorted(frontier, key=lambda p: p.rule_ids))


def plan_to_time_diagram(plan: Plan, start_tick: int = 0):
    """Schedule each rule's control at the tick where its leg starts: the
    start tick plus the summed durations of the preceding legs."""
    from .engine import TimeDiagram

    schedule: dict = {}
    tick = start_tick
    for r in plan.rules:
        schedule.setdefault(tick, set()).add(r.control)
        tick += r.duration
    return TimeDiagram(schedule)


def rules_to_diagram(
    rules: Sequence,
    start: str,
    goal: str,
    diagram_id: str = "plan-space",
    population: int = 1,
) -> tuple:
    """Build a runnable diagram whose forward arcs are the rules (one arc
    per rule, transit time = rule duration) plus one control symbol per
    rule (cost = rule resource).  Returns (diagram, symbols).

    States are ranked by longest chain distance from the start state with
    identifier order breaking ties, which keeps every rule rank-increasing.
    """
    states = sorted({s for r in rules for s in (r.source, r.target)})
    if start not in states:
        raise UnknownSupportState(f"start state {start} appears in no rule")
    if goal not in states:
        raise UnknownSupportState(f"goal state {goal} appears in no rule")

    depth = {s: 0 for s in states}
    changed = True
    guard = 0
    while changed:
        changed = False
        guard += 1
        if guard > len(states) + 1:
            raise UnknownSupportState("rule graph is not acyclic")
        for r in sorted(rules, key=lambda r: r.id):
            want = depth[r.source] + 1
            if depth[r.target] < want:
                depth[r.target] = want
                changed = True

    ordered = sorted(states, key=lambda s: (depth[s], s))
    horizon = sum(r.duration for r in rules) + 1
    nodes = []
    for rank, s in enumerate(ordered):
        role = Role.INTERMEDIATE
        if s == start:
            role = Role.INITIAL
        elif s == goal:
            role = Role.FINAL
        nodes.append(StateNode(s, rank=rank, interval=0, role=role))
    arcs = tuple(
        Arc(r.id, r.source, r.target, ArcKind.FORWARD, r.duration)
        for r in sorted(rules, key=lambda r: r.id)
    )
    diagram = CanonicalDiagram(
        id=diagram_id,
        partition=TimePartition((0, horizon)),
        states=tuple(nodes),
        arcs=arcs,
        boundary_distributions=(
            Distribution({start: 1.0}),
            Distribution({goal: 1.0}),
        ),
        population=population,
    )
    symbols = tuple(
        ControlSymbol(r.control, SymbolKind.INDIVIDUAL, diagram_id, r.id,
                      cost=float(r.resource))
        for r in sorted(rules, key=lambda r: r.id)
    )
    return diagram, symbols


# --- objectives tree ----------------------------------------------------------

RULE_ALL = "all-children"
RULE_ANY = "any-child"
RULE_K_OF_N = "k-of-n"


@dataclass(frozen=True)
class ObjectiveNode:
    """One node of the objectives tree: a leaf carries a goal
    (diagram id, state id); an internal node carries a combination rule
    over its children."""

    id: str
    children: tuple = ()
    goal: Optional[tuple] = None
    rule: str = RULE_ALL
    threshold: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if self.goal is not None:
            object.__setattr__(self, "goal", tuple(self.goal))


@dataclass(frozen=True)
class ObjectivesTree:
    """Rooted decomposition of a global goal into subgoals."""

    root: str
    nodes: Mapping  # node id -> ObjectiveNode

    def __post_init__(self):
        object.__setattr__(self, "nodes", dict(self.nodes))

    def node(self, node_id: str) -> ObjectiveNode:
        return self.nodes[node_id]


def validate_objectives(tree: ObjectivesTree, model) -> list:
    """Structural checks: one root, acyclic reachability of every node,
    leaf goals resolve, internal rules well formed."""
    out = []
    if tree.root not in tree.nodes:
        out.append(Violation(
            "objective-root", f"root node {tree.root} is not declared",
            (tree.root,),
        ))
        return out
    reached = set()
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if nid in reached:
            out.append(Violation(
                "objective-cycle",
                f"node {nid} is reachable twice (cycle or shared subtree)",
                (nid,),
            ))
            continue
        reached.add(nid)
        node = tree.nodes.get(nid)
        if node is None:
            out.append(Violation(
                "objective-unknown",
                f"node {nid} is referenced but not declared",
                (nid,),
            ))
            continue
        if node.children:
            if node.rule not in (RULE_ALL, RULE_ANY, RULE_K_OF_N):
                out.append(Violation(
                    "objective-rule",
                    f"node {nid} has unsupported rule {node.rule}",
                    (nid,),
                ))
            if node.rule == RULE_K_OF_N and not (
                node.threshold is not None
                and 1 <= node.threshold <= len(node.children)
            ):
                out.append(Violation(
                    "objective-threshold",
                    f"node {nid} needs a threshold within "
                    f"1..{len(node.children)}",
                    (nid,),
                ))
            stack.extend(node.children)
        else:
            if node.goal is None:
                out.append(Violation(
                    "objective-leaf-goal",
                    f"leaf node {nid} declares no goal",
                    (nid,),
                ))
                continue
            diagram_id, state_id = node.goal
            diagram = model.diagrams.get(diagram_id)
            if diagram is None or state_id not in diagram.state_ids:
                out.append(Violation(
                    "objective-goal-unknown",
                    f"leaf node {nid} targets unknown goal "
                    f"{diagram_id}:{state_id}",
                    (nid,),
                ))
    unreached = sorted(set(tree.nodes) - reached)
    for nid in unreached:
        out.append(Violation(
            "objective-unreachable",
            f"node {nid} is not reachable from the root",
            (nid,),
            severity="warning",
        ))
    return out


@dataclass(frozen=True)
class ObjectivesReport:
    """Per-node achievement of an objectives tree over one trajectory."""

    achieved: Mapping  # node id -> bool
    root: str

    def __post_init__(self):
        object.__setattr__(self, "achieved", dict(self.achieved))

    @property
    def root_achieved(self) -> bool:
        return self.achieved[self.root]

    def unachieved(self) -> tuple:
        return tuple(sorted(n for n, ok in self.achieved.items() if not ok))


def check_objectives(tree: ObjectivesTree, model, trajectory) -> ObjectivesReport:
    """Evaluate every node bottom-up.

    A leaf is achieved when its goal state holds the diagram's whole
    population at some recorded tick; an internal node combines its
    children with its rule.
    """
    achieved: dict = {}

    def leaf_achieved(node: ObjectiveNode) -> bool:
        diagram_id, state_id = node.goal
        diagram = model.diagrams.get(diagram_id)
        if diagram is None or state_id not in diagram.state_ids:
            raise UnknownGoalState(
                f"objective {node.id} targets unknown goal "
                f"{diagram_id}:{state_id}"
            )
        series = trajectory.dynamics_for(diagram_id).occupancy[state_id]
        return any(v == diagram.population for v in series)

    def walk(nid: str) -> bool:
        node = tree.nodes.get(nid)
        if node is None:
            raise UnknownGoalState(f"objective node {nid} is not declared")
        if not node.children:
            ok = leaf_achieved(node)
        else:
            child_ok = [walk(c) for c in node.children]
            if node.rule == RULE_ANY:
                ok = any(child_ok)
            elif node.rule == RULE_K_OF_N:
                ok = sum(child_ok) >= (node.threshold or len(child_ok))
            else:
                ok = all(child_ok)
        achieved[nid] = ok
        return ok

    walk(tree.root)
    return ObjectivesReport(achieved, tree.root)


# --- canonical template -------------------------------------------------------


@dataclass(frozen=True)
class TemplateTransform:
    """Named structural rewrite: add or remove a state or arc, or modify
    an arc's transit time or a state's dwell limit."""

    id: str
    op: str  # add-state | remove-state | add-arc | remove-arc | set-transit | set-dwell
    target: Optional[str] = None
    value: object = None


@dataclass(frozen=True)
class CanonicalTemplate:
    """Reusable diagram skeleton with named default values and named
    structural transforms.

    ``defaults`` names every overridable value; supported keys are
    ``population``, ``id``, ``transit:<arc id>``, ``dwell:<state id>`` and
    ``mark:<boundary index>`` (a state-fraction mapping).
    """

    id: str
    skeleton: CanonicalDiagram
    inputs: tuple = ()
    outputs: tuple = ()
    controls: tuple = ()
    defaults: Mapping = field(default_factory=dict)
    transforms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "defaults", dict(self.defaults))
        object.__setattr__(self, "transforms", tuple(self.transforms))

    def transform(self, transform_id: str) -> TemplateTransform:
        for t in self.transforms:
            if t.id == transform_id:
                return t
        raise InvalidOverride(f"template {self.id} has no transform {transform_id}")


def _rebuild(
    diagram: CanonicalDiagram,
    *,
    new_id=None,
    states=None,
    arcs=None,
    marks=None,
    population=None,
    partition=None,
) -> CanonicalDiagram:
    return CanonicalDiagram(
        id=new_id if new_id is not None else diagram.id,
        partition=partition if partition is not None else diagram.partition,
        states=tuple(states) if states is not None else diagram.states,
        arcs=tuple(arcs) if arcs is not None else diagram.arcs,
        boundary_distributions=(
            tuple(marks) if marks is not None else diagram.boundary_distributions
        ),
        population=population if population is not None else diagram.population,
    )


def _apply_value(diagram: CanonicalDiagram, key: str, value) -> CanonicalDiagram:
    if key == "population":
        return _rebuild(diagram, population=int(value))
    if key == "id":
        return _rebuild(diagram, new_id=str(value))
    if key.startswith("transit:"):
        arc_id = key.split(":", 1)[1]
        if arc_id not in diagram.arc_by_id:
            raise InvalidOverride(f"unknown arc {arc_id}")
        arcs = [
            replace(a, transit_ticks=int(value)) if a.id == arc_id else a
            for a in diagram.arcs
        ]
        return _rebuild(diagram, arcs=arcs)
    if key.startswith("dwell:"):
        state_id = key.split(":", 1)[1]
        if state_id not in diagram.state_by_id:
            raise InvalidOverride(f"unknown state {state_id}")
        states = [
            replace(s, dwell_limit=None if value is None else int(value))
            if s.id == state_id else s
            for s in diagram.states
        ]
        return _rebuild(diagram, states=states)
    if key.startswith("mark:"):
        index = int(key.split(":", 1)[1])
        marks = list(diagram.boundary_distributions)
        if not 0 <= index < len(marks):
            raise InvalidOverride(f"no boundary {index}")
        marks[index] = Distribution(dict(value), diagram.state_ids)
        return _rebuild(diagram, marks=marks)
    raise InvalidOverride(f"unsupported template value key {key}")


_ORDER_CODES = (
    "partition-empty", "partition-origin", "partition-order",
    "rank-duplicate", "arc-order", "arc-transit", "interval-range",
)


def _check_order(diagram: CanonicalDiagram, transform_id: str):
    from .core import validate_canonical

    broken = [
        v for v in validate_canonical(diagram)
        if v.code in _ORDER_CODES and v.severity == "error"
    ]
    if broken:
        raise TransformBreaksOrder(
            f"transform {transform_id} breaks order discipline: "
            + "; ".join(v.message for v in broken[:3])
        )


def apply_transform(diagram: CanonicalDiagram, t: TemplateTransform) -> CanonicalDiagram:
    """Apply one named rewrite and verify it keeps the order discipline
    (partition order, unique ranks, arcs pointing the right way)."""
    if t.op == "remove-arc":
        if t.target not in diagram.arc_by_id:
            raise InvalidOverride(f"unknown arc {t.target}")
        out = _rebuild(diagram, arcs=[a for a in diagram.arcs if a.id != t.target])
    elif t.op == "add-arc":
        out = _rebuild(diagram, arcs=list(diagram.arcs) + [t.value])
    elif t.op == "remove-state":
        if t.target not in diagram.state_by_id:
            raise InvalidOverride(f"unknown state {t.target}")
        out = _rebuild(
            diagram,
            states=[s for s in diagram.states if s.id != t.target],
            arcs=[
                a for a in diagram.arcs
                if t.target not in (a.source, a.target)
            ],
        )
    elif t.op == "add-state":
        out = _rebuild(diagram, states=list(diagram.states) + [t.value])
    elif t.op == "set-transit":
        out = _apply_value(diagram, f"transit:{t.target}", t.value)
    elif t.op == "set-dwell":
        out = _apply_value(diagram, f"dwell:{t.target}", t.value)
    else:
        raise InvalidOverride(f"unsupported transform op {t.op}")
    _check_order(out, t.id)
    return out


def instantiate_template(
    template: CanonicalTemplate,
    overrides: Optional[Mapping] = None,
    transforms: Sequence = (),
) -> CanonicalDiagram:
    """Apply defaults, then overrides (which must name declared defaults),
    then the requested named transforms, and return the diagram.

    Raises :class:`InvalidOverride` for undeclared override keys and
    :class:`TransformBreaksOrder` when a rewrite violates the order
    discipline.  Other validity questions (reachability and the like) are
    left to the caller's validation pass.
    """
    diagram = template.skeleton
    values = dict(template.defaults)
    for key, value in (overrides or {}).items():
        if key not in template.defaults:
            raise InvalidOverride(
                f"override {key} does not name a declared template value"
            )
        values[key] = value
    for key in sorted(values):
        diagram = _apply_value(diagram, key, values[key])
    for name in transforms:
        diagram = apply_transform(diagram, template.transform(name))
    return diagram
