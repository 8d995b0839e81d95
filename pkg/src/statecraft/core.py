"""Canonical diagram types and population bookkeeping.

A canonical diagram is a ranked, time-partitioned state graph: states are
totally ordered, forward arcs climb the order with a positive transit time,
backstep arcs fall (or loop) instantly.  Prescribed boundary distributions
say where the population ought to sit at each partition boundary, while
:class:`ActualDynamics` records where it actually sat, tick by tick.

Constructors are deliberately permissive; :func:`validate_canonical` is the
single place invariants are enforced, so that broken inputs can be inspected
rather than rejected at construction time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    InsufficientOccupancy,
    StateSetMismatch,
    TickOutOfRange,
    UnknownArc,
)

#: Tolerance applied when checking that a distribution sums to one.
NORMALIZATION_TOLERANCE = 1e-9


class Role(str, Enum):
    INITIAL = "initial"
    INTERMEDIATE = "intermediate"
    FINAL = "final"


class ArcKind(str, Enum):
    FORWARD = "forward"
    BACKSTEP = "backstep"


@dataclass(frozen=True)
class Violation:
    """One validation finding.  ``severity`` is ``error`` or ``warning``."""

    code: str
    message: str
    subjects: tuple = ()
    severity: str = "error"

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "subjects": [list(s) if isinstance(s, tuple) else s for s in self.subjects],
            "severity": self.severity,
        }


def error_count(report: Sequence[Violation]) -> int:
    return sum(1 for v in report if v.severity == "error")


@dataclass(frozen=True)
class TimePartition:
    """Strictly increasing integer boundaries starting at zero."""

    boundaries: tuple

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(int(b) for b in self.boundaries))

    @property
    def horizon(self) -> int:
        return self.boundaries[-1] if self.boundaries else 0

    @property
    def interval_count(self) -> int:
        return max(len(self.boundaries) - 1, 0)

    def bucket(self, tick: int) -> int:
        """Index of the interval that contains ``tick``.

        Buckets are half-open ``[boundary_j, boundary_j+1)`` so tick 0 and
        every tick before the first interior boundary share bucket 0.
        """
        idx = 0
        for j, b in enumerate(self.boundaries):
            if b <= tick:
                idx = j
            else:
                break
        return min(idx, max(self.interval_count - 1, 0))

    def violations(self) -> list:
        out = []
        if not self.boundaries:
            out.append(Violation("partition-empty", "partition has no boundaries"))
            return out
        if self.boundaries[0] != 0:
            out.append(Violation(
                "partition-origin",
                f"partition must start at 0, got {self.boundaries[0]}",
            ))
        for a, b in zip(self.boundaries, self.boundaries[1:]):
            if b <= a:
                out.append(Violation(
                    "partition-order",
                    f"partition boundaries must strictly increase ({a} then {b})",
                ))
        return out


@dataclass(frozen=True)
class StateNode:
    """One state of a canonical diagram.

    ``rank`` is the position in the diagram's total order, ``interval`` the
    index of the partition interval the state belongs to (0 = the start of
    the timeline).  ``dwell_limit``, when set, is the number of consecutive
    ticks an object may sit in the state before its backstep arc triggers.
    """

    id: str
    rank: int
    interval: int = 0
    role: Role = Role.INTERMEDIATE
    dwell_limit: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.role, Role):
            object.__setattr__(self, "role", Role(self.role))


@dataclass(frozen=True)
class Arc:
    """Directed transition.  Forward arcs take ``transit_ticks >= 1`` ticks;
    backsteps complete within the tick they fire (``transit_ticks == 0``)."""

    id: str
    source: str
    target: str
    kind: ArcKind = ArcKind.FORWARD
    transit_ticks: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.kind, ArcKind):
            object.__setattr__(self, "kind", ArcKind(self.kind))
        if self.transit_ticks is None:
            default = 1 if self.kind is ArcKind.FORWARD else 0
            object.__setattr__(self, "transit_ticks", default)


@dataclass(frozen=True)
class Distribution:
    """Fractions of a population per state.

    Zero entries are dropped at construction so that ``{S0: 1.0, S1: 0.0}``
    and ``{S0: 1.0}`` compare equal.  ``domain`` optionally pins the state
    set the distribution is defined over; comparisons across two declared
    but different domains are rejected.
    """

    fractions: Mapping
    domain: Optional[frozenset] = None

    def __post_init__(self):
        cleaned = {k: float(v) for k, v in dict(self.fractions).items() if v != 0}
        object.__setattr__(self, "fractions", cleaned)
        if self.domain is not None:
            object.__setattr__(self, "domain", frozenset(self.domain))

    def get(self, state: str) -> float:
        return self.fractions.get(state, 0.0)

    def total(self) -> float:
        return sum(self.fractions.values())

    def items(self):
        return sorted(self.fractions.items())

    def with_domain(self, domain) -> "Distribution":
        return Distribution(self.fractions, frozenset(domain))

    def to_dict(self) -> dict:
        return {k: v for k, v in self.items()}


def compare_distributions(expected: Distribution, observed: Distribution) -> float:
    """L1 distance between two distributions over the same state set.

    Missing entries count as zero, so two point masses on different states
    are at distance 2.0, the maximum.  Returns 0.0 exactly when the two
    agree on every state.
    """
    if (
        expected.domain is not None
        and observed.domain is not None
        and expected.domain != observed.domain
    ):
        raise StateSetMismatch(
            f"distributions declare different state sets: "
            f"{sorted(expected.domain)} vs {sorted(observed.domain)}"
        )
    keys = set(expected.fractions) | set(observed.fractions)
    return sum(abs(expected.get(k) - observed.get(k)) for k in sorted(keys))


def apportion(fractions: Mapping, total: int, order: Sequence) -> dict:
    """Split an integer ``total`` across states proportionally to fractions.

    Rounds half-up per state, then repairs any leftover so the counts sum
    exactly to ``total``.  Repairs go to the states that were rounded down
    the hardest (or trimmed from those rounded up the hardest), breaking
    ties by the supplied state order, so the result is deterministic.
    """
    raw = {s: fractions.get(s, 0.0) * total for s in order}
    counts = {s: int(math.floor(raw[s] + 0.5)) for s in order}
    diff = total - sum(counts.values())
    if diff > 0:
        by_need = sorted(order, key=lambda s: (-(raw[s] - counts[s]), order.index(s)))
        for s in by_need[:diff]:
            counts[s] += 1
    elif diff < 0:
        by_excess = sorted(
            (s for s in order if counts[s] > 0),
            key=lambda s: (raw[s] - counts[s], order.index(s)),
        )
        for s in by_excess[: -diff]:
            counts[s] -= 1
    return counts


@dataclass(frozen=True)
class CanonicalDiagram:
    """Ranked state graph with a time partition and boundary distributions.

    ``boundary_distributions`` holds one distribution per partition boundary.
    When omitted, the initial boundary defaults to a point mass on the
    initial state and later boundaries inherit their predecessor.
    """

    id: str
    partition: TimePartition
    states: tuple
    arcs: tuple = ()
    boundary_distributions: Optional[tuple] = None
    population: int = 1

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        if self.boundary_distributions is None:
            init = self.initial_state.id if self.initial_state else None
            base = Distribution({init: 1.0} if init else {}, self.state_ids)
            marks = tuple(base for _ in self.partition.boundaries)
            object.__setattr__(self, "boundary_distributions", marks)
        else:
            marks = tuple(
                d if d.domain is not None else d.with_domain(self.state_ids)
                for d in self.boundary_distributions
            )
            object.__setattr__(self, "boundary_distributions", marks)

    # -- lookups (cached, the dataclass itself stays immutable) --------------

    @cached_property
    def state_ids(self) -> frozenset:
        return frozenset(s.id for s in self.states)

    @cached_property
    def state_by_id(self) -> dict:
        return {s.id: s for s in self.states}

    @cached_property
    def rank_of(self) -> dict:
        return {s.id: s.rank for s in self.states}

    @cached_property
    def states_by_rank(self) -> tuple:
        return tuple(sorted(self.states, key=lambda s: (s.rank, s.id)))

    @cached_property
    def ordinal_of(self) -> dict:
        """Zero-based position of each state in rank order."""
        return {s.id: i for i, s in enumerate(self.states_by_rank)}

    @cached_property
    def arc_by_id(self) -> dict:
        return {a.id: a for a in self.arcs}

    @cached_property
    def forward_arcs(self) -> tuple:
        return tuple(a for a in self.arcs if a.kind is ArcKind.FORWARD)

    @cached_property
    def backstep_arcs(self) -> tuple:
        return tuple(a for a in self.arcs if a.kind is ArcKind.BACKSTEP)

    @cached_property
    def initial_state(self) -> Optional[StateNode]:
        for s in self.states:
            if s.role is Role.INITIAL:
                return s
        return None

    @cached_property
    def final_state(self) -> Optional[StateNode]:
        for s in self.states:
            if s.role is Role.FINAL:
                return s
        # A single-state diagram serves as its own start and goal.
        if len(self.states) == 1:
            return self.states[0]
        return None

    @property
    def horizon(self) -> int:
        return self.partition.horizon

    def backsteps_from(self, state_id: str) -> tuple:
        arcs = [a for a in self.backstep_arcs if a.source == state_id]
        arcs.sort(key=lambda a: (self.rank_of.get(a.target, 0), a.id))
        return tuple(arcs)


def validate_canonical(diagram: CanonicalDiagram) -> list:
    """Check every structural invariant of a canonical diagram.

    Returns a list of violations; an empty list means the diagram is valid.
    Pure and idempotent: validating twice reports the same findings.
    """
    out: list = []
    out.extend(diagram.partition.violations())

    if not diagram.states:
        out.append(Violation("states-empty", "diagram declares no states"))
        return out

    seen_ids = set()
    for s in diagram.states:
        if s.id in seen_ids:
            out.append(Violation("state-duplicate", f"duplicate state id {s.id}", (s.id,)))
        seen_ids.add(s.id)

    ranks = {}
    for s in diagram.states:
        if s.rank in ranks:
            out.append(Violation(
                "rank-duplicate",
                f"states {ranks[s.rank]} and {s.id} share rank {s.rank}",
                (ranks[s.rank], s.id),
            ))
        ranks[s.rank] = s.id
        if s.dwell_limit is not None and s.dwell_limit < 1:
            out.append(Violation(
                "dwell-invalid",
                f"state {s.id} has dwell limit {s.dwell_limit}, must be >= 1",
                (s.id,),
            ))
        n_intervals = diagram.partition.interval_count
        if not (0 <= s.interval <= n_intervals):
            out.append(Violation(
                "interval-range",
                f"state {s.id} sits in interval {s.interval}, "
                f"partition has {n_intervals}",
                (s.id,),
            ))

    initials = [s for s in diagram.states if s.role is Role.INITIAL]
    finals = [s for s in diagram.states if s.role is Role.FINAL]
    if len(initials) != 1:
        out.append(Violation(
            "initial-count",
            f"diagram must have exactly one initial state, found {len(initials)}",
        ))
    if len(finals) != 1 and not (len(diagram.states) == 1 and len(finals) == 0):
        out.append(Violation(
            "final-count",
            f"diagram must have exactly one final state, found {len(finals)}",
        ))

    # States of earlier intervals must rank below states of later intervals.
    by_rank = sorted(diagram.states, key=lambda s: s.rank)
    for a, b in zip(by_rank, by_rank[1:]):
        if a.interval > b.interval:
            out.append(Violation(
                "interval-grouping",
                f"state {b.id} (interval {b.interval}) ranks above {a.id} "
                f"(interval {a.interval}) against the interval grouping",
                (a.id, b.id),
            ))

    arc_ids = set()
    for a in diagram.arcs:
        if a.id in arc_ids:
            out.append(Violation("arc-duplicate", f"duplicate arc id {a.id}", (a.id,)))
        arc_ids.add(a.id)
        missing = [x for x in (a.source, a.target) if x not in diagram.state_ids]
        if missing:
            out.append(Violation(
                "arc-endpoint",
                f"arc {a.id} references unknown state(s) {', '.join(missing)}",
                (a.id,),
            ))
            continue
        src, tgt = diagram.rank_of[a.source], diagram.rank_of[a.target]
        if a.kind is ArcKind.FORWARD:
            if src >= tgt:
                out.append(Violation(
                    "arc-order",
                    f"forward arc {a.id} violates order: rank({a.source})={src} "
                    f">= rank({a.target})={tgt}",
                    (a.id,),
                ))
            if a.transit_ticks < 1:
                out.append(Violation(
                    "arc-transit",
                    f"forward arc {a.id} must take at least one tick, "
                    f"got {a.transit_ticks}",
                    (a.id,),
                ))
        else:
            if tgt > src:
                out.append(Violation(
                    "arc-order",
                    f"backstep arc {a.id} must not climb: rank({a.target})={tgt} "
                    f"> rank({a.source})={src}",
                    (a.id,),
                ))
            if a.transit_ticks != 0:
                out.append(Violation(
                    "arc-transit",
                    f"backstep arc {a.id} must complete instantly, "
                    f"got {a.transit_ticks} ticks",
                    (a.id,),
                ))

    marks = diagram.boundary_distributions
    if len(marks) != len(diagram.partition.boundaries):
        out.append(Violation(
            "mu-missing",
            f"{len(marks)} boundary distributions for "
            f"{len(diagram.partition.boundaries)} boundaries",
        ))
    for i, dist in enumerate(marks):
        unknown = [s for s in dist.fractions if s not in diagram.state_ids]
        if unknown:
            out.append(Violation(
                "mu-unknown-state",
                f"boundary {i} distributes mass to unknown state(s) "
                f"{', '.join(sorted(unknown))}",
                (str(i),),
            ))
        if any(v < 0 for v in dist.fractions.values()):
            out.append(Violation(
                "mu-negative",
                f"boundary {i} has a negative fraction",
                (str(i),),
            ))
        if abs(dist.total() - 1.0) > NORMALIZATION_TOLERANCE:
            out.append(Violation(
                "mu-not-normalized",
                f"distribution not normalized at boundary {i} "
                f"(sum={dist.total()!r})",
                (str(i),),
            ))

    if diagram.population < 1:
        out.append(Violation(
            "population",
            f"population must be positive, got {diagram.population}",
        ))

    initial = initials[0] if len(initials) == 1 else None
    if initial is not None and not any(
        v.code == "arc-endpoint" or v.code == "state-duplicate" for v in out
    ):
        reachable = {initial.id}
        frontier = [initial.id]
        fwd_from: dict = {}
        for a in diagram.forward_arcs:
            fwd_from.setdefault(a.source, []).append(a.target)
        while frontier:
            cur = frontier.pop()
            for nxt in fwd_from.get(cur, ()):
                if nxt not in reachable:
                    reachable.add(nxt)
                    frontier.append(nxt)
        for s in diagram.states:
            if s.id not in reachable:
                out.append(Violation(
                    "unreachable",
                    f"state {s.id} is not reachable from {initial.id} "
                    f"via forward arcs",
                    (s.id,),
                ))

    final = finals[0] if len(finals) == 1 else (
        diagram.states[0] if len(diagram.states) == 1 else None
    )
    if final is not None:
        for a in diagram.forward_arcs:
            if a.source == final.id:
                out.append(Violation(
                    "final-forward-out",
                    f"final state {final.id} has outgoing forward arc {a.id}",
                    (a.id,),
                ))

    return out


@dataclass(frozen=True)
class ActualDynamics:
    """Observed dynamics of one diagram: cumulative per-arc transition
    counters, per-state occupancy series and the in-transit channel.

    Series are indexed by tick, 0..horizon.  Departures leave their state at
    the departure tick and arrivals land at departure + transit time, so at
    every tick occupancy plus in-transit equals the population exactly.
    """

    diagram: CanonicalDiagram
    occupancy: Mapping
    transition_counts: Mapping
    in_transit: tuple

    @classmethod
    def initial(cls, diagram: CanonicalDiagram, horizon: Optional[int] = None) -> "ActualDynamics":
        """Fresh dynamics: the initial boundary distribution converted to
        integer counts, constant over 0..horizon (the diagram's own horizon
        by default), with zeroed counters."""
        h = diagram.horizon if horizon is None else int(horizon)
        order = [s.id for s in diagram.states_by_rank]
        start = apportion(
            diagram.boundary_distributions[0].fractions, diagram.population, order
        )
        occ = {s: tuple([start.get(s, 0)] * (h + 1)) for s in order}
        counts = {a.id: tuple([0] * (h + 1)) for a in diagram.arcs}
        return cls(diagram, occ, counts, tuple([0] * (h + 1)))

    @property
    def horizon(self) -> int:
        return len(self.in_transit) - 1

    @property
    def population(self) -> int:
        return self.diagram.population


def advance_population(dynamics: ActualDynamics, events: Iterable) -> ActualDynamics:
    """Apply transition events and return the updated dynamics.

    Each event is ``(arc_id, count, departure_tick)``.  The departure
    removes ``count`` objects from the arc's source at the departure tick;
    they ride the in-transit channel and land on the target (bumping the
    arc's cumulative counter) at departure + transit_ticks.  Series grow as
    needed to cover late arrivals.  Raises :class:`InsufficientOccupancy`
    if a departure would overdraw its source state and :class:`UnknownArc`
    for arcs the diagram does not declare.
    """
    diagram = dynamics.diagram
    occ = {s: list(v) for s, v in dynamics.occupancy.items()}
    counts = {a: list(v) for a, v in dynamics.transition_counts.items()}
    transit = list(dynamics.in_transit)

    def extend_to(tick: int):
        cur = len(transit) - 1
        if tick <= cur:
            return
        for series in occ.values():
            series.extend([series[-1]] * (tick - cur))
        for series in counts.values():
            series.extend([series[-1]] * (tick - cur))
        transit.extend([transit[-1]] * (tick - cur))

    for arc_id, count, depart in events:
        arc = diagram.arc_by_id.get(arc_id)
        if arc is None:
            raise UnknownArc(f"diagram {diagram.id} has no arc {arc_id}")
        count = int(count)
        depart = int(depart)
        if count < 0 or depart < 0:
            raise ValueError(f"event ({arc_id}, {count}, {depart}) is malformed")
        arrive = depart + arc.transit_ticks
        extend_to(arrive)
        src = occ[arc.source]
        if src[depart] < count:
            raise InsufficientOccupancy(
                f"state {arc.source} holds {src[depart]} at tick {depart}, "
                f"cannot depart {count} on {arc_id}"
            )
        for t in range(depart, len(src)):
            src[t] -= count
        if min(src[depart:]) < 0:
            raise InsufficientOccupancy(
                f"departing {count} on {arc_id} at tick {depart} overdraws "
                f"state {arc.source} later in the series"
            )
        tgt = occ[arc.target]
        for t in range(arrive, len(tgt)):
            tgt[t] += count
        for t in range(depart, arrive):
            transit[t] += count
        ctr = counts[arc_id]
        for t in range(arrive, len(ctr)):
            ctr[t] += count

    return ActualDynamics(
        diagram,
        {s: tuple(v) for s, v in occ.items()},
        {a: tuple(v) for a, v in counts.items()},
        tuple(transit),
    )


def distribution_at(dynamics: ActualDynamics, tick: int) -> Distribution:
    """Occupancy over population at ``tick`` as a distribution.

    Objects in transit are excluded, so the fractions sum to
    ``(population - in_transit) / population``; the in-transit share is
    available via :func:`transit_fraction`.
    """
    if not (0 <= tick <= dynamics.horizon):
        raise TickOutOfRange(
            f"tick {tick} outside recorded series 0..{dynamics.horizon}"
        )
    pop = dynamics.population
    fractions = {
        s: series[tick] / pop
        for s, series in dynamics.occupancy.items()
        if series[tick]
    }
    return Distribution(fractions, dynamics.diagram.state_ids)


def transit_fraction(dynamics: ActualDynamics, tick: int) -> float:
    """Share of the population riding an arc at ``tick``."""
    if not (0 <= tick <= dynamics.horizon):
        raise TickOutOfRange(
            f"tick {tick} outside recorded series 0..{dynamics.horizon}"
        )
    return dynamics.in_transit[tick] / dynamics.population
