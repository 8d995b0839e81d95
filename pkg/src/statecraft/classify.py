"""Interval classifiers, dynamics recognition and diagram reconstruction.

States are recognized from parameter vectors through ordered scales of
propositions.  Each proposition is a conjunction of half-open interval
predicates, so its truth domain is an axis-aligned box; propositions on one
scale must be pairwise disjoint and ordered like the states they name.
Scales refine hierarchically: a proposition may carry a child scale whose
boxes subdivide its own.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
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
    DimensionMismatch,
    SeriesTooShort,
    UnknownState,
    UnsampledBoundary,
)

_INF = float("inf")


@dataclass(frozen=True)
class Predicate:
    """Half-open interval test ``lower <= params[parameter] < upper``.

    Either bound may be omitted; at least one must be present for the
    predicate to say anything.
    """

    parameter: int
    lower: Optional[float] = None
    upper: Optional[float] = None

    def matches(self, value: float) -> bool:
        lo = -_INF if self.lower is None else self.lower
        hi = _INF if self.upper is None else self.upper
        return lo <= value < hi


@dataclass(frozen=True)
class Proposition:
    """Conjunction of predicates; its truth domain is a box."""

    id: str
    predicates: tuple

    def __post_init__(self):
        object.__setattr__(self, "predicates", tuple(self.predicates))

    @cached_property
    def box(self) -> dict:
        """Per-parameter interval after intersecting all predicates."""
        out: dict = {}
        for p in self.predicates:
            lo = -_INF if p.lower is None else p.lower
            hi = _INF if p.upper is None else p.upper
            cur = out.get(p.parameter, (-_INF, _INF))
            out[p.parameter] = (max(cur[0], lo), min(cur[1], hi))
        return out

    def nonempty(self) -> bool:
        return all(lo < hi for lo, hi in self.box.values())

    def contains(self, params: Sequence) -> bool:
        return all(
            lo <= params[i] < hi for i, (lo, hi) in self.box.items()
        )


def _boxes_overlap(a: Mapping, b: Mapping) -> bool:
    for i in set(a) | set(b):
        lo_a, hi_a = a.get(i, (-_INF, _INF))
        lo_b, hi_b = b.get(i, (-_INF, _INF))
        if max(lo_a, lo_b) >= min(hi_a, hi_b):
            return False
    return True


def _box_inside(inner: Mapping, outer: Mapping) -> bool:
    for i, (lo, hi) in outer.items():
        ilo, ihi = inner.get(i, (-_INF, _INF))
        if ilo < lo or ihi > hi:
            return False
    return True


@dataclass(frozen=True)
class Scale:
    """Ordered propositions, each naming one state."""

    propositions: tuple
    state_of: Mapping

    def __post_init__(self):
        object.__setattr__(self, "propositions", tuple(self.propositions))
        object.__setattr__(self, "state_of", dict(self.state_of))

    def ordered_states(self) -> tuple:
        return tuple(self.state_of.get(p.id) for p in self.propositions)


def validate_scale(scale: Scale, state_ranks: Optional[Mapping] = None) -> list:
    """Check a scale: nonempty disjoint truth domains, full state mapping,
    and (when ranks are supplied) proposition order matching state order.

    Oversized scales are reported at warning severity rather than rejected:
    a scale may legitimately name fewer states than it has propositions for
    while a model is being drafted.
    """
    out = []
    for p in scale.propositions:
        if not p.predicates:
            out.append(Violation(
                "prop-empty", f"proposition {p.id} has no predicates", (p.id,)
            ))
        elif not p.nonempty():
            out.append(Violation(
                "prop-empty-domain",
                f"proposition {p.id} has an empty truth domain",
                (p.id,),
            ))
        if p.id not in scale.state_of:
            out.append(Violation(
                "prop-unmapped", f"proposition {p.id} names no state", (p.id,)
            ))
    props = scale.propositions
    for i, a in enumerate(props):
        for b in props[i + 1:]:
            if _boxes_overlap(a.box, b.box):
                overlap = {}
                for k in set(a.box) | set(b.box):
                    lo_a, hi_a = a.box.get(k, (-_INF, _INF))
                    lo_b, hi_b = b.box.get(k, (-_INF, _INF))
                    overlap[k] = (max(lo_a, lo_b), min(hi_a, hi_b))
                out.append(Violation(
                    "prop-overlap",
                    f"propositions {a.id} and {b.id} overlap on {overlap}",
                    (a.id, b.id),
                ))
    mapped = [scale.state_of.get(p.id) for p in scale.propositions]
    seen: dict = {}
    for p, s in zip(scale.propositions, mapped):
        if s is None:
            continue
        if s in seen:
            out.append(Violation(
                "state-remapped",
                f"state {s} is named by both {seen[s]} and {p.id}",
                (seen[s], p.id),
            ))
        seen[s] = p.id
    if state_ranks is not None:
        known = [s for s in mapped if s in state_ranks]
        ranks = [state_ranks[s] for s in known]
        if any(a >= b for a, b in zip(ranks, ranks[1:])):
            out.append(Violation(
                "order-mismatch",
                f"proposition order does not match state order: {known}",
                tuple(known),
            ))
        unknown = [s for s in mapped if s is not None and s not in state_ranks]
        for s in unknown:
            out.append(Violation(
                "unknown-state", f"scale names unknown state {s}", (s,)
            ))
        if len(scale.propositions) > len(state_ranks):
            out.append(Violation(
                "scale-size",
                f"{len(scale.propositions)} propositions for "
                f"{len(state_ranks)} states",
                severity="warning",
            ))
    return out


@dataclass(frozen=True)
class Classifier:
    """Root scale plus optional refinements keyed by proposition id."""

    root: Scale
    refinements: Mapping = field(default_factory=dict)
    dimension: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "refinements", dict(self.refinements))
        if self.dimension is None:
            params = [
                p.parameter
                for scale in self._all_scales()
                for prop in scale.propositions
                for p in prop.predicates
            ]
            object.__setattr__(self, "dimension", (max(params) + 1) if params else 0)

    def _all_scales(self):
        yield self.root
        yield from self.refinements.values()

    @cached_property
    def state_paths(self) -> dict:
        """state id -> ordinal path from the root scale downwards."""
        out: dict = {}

        def walk(scale: Scale, prefix: tuple):
            for i, prop in enumerate(scale.propositions):
                path = prefix + (i,)
                state = scale.state_of.get(prop.id)
                if state is not None and state not in out:
                    out[state] = path
                child = self.refinements.get(prop.id)
                if child is not None:
                    walk(child, path)

        walk(self.root, ())
        return out

    def root_ordinal(self, state_id: str) -> int:
        path = self.state_paths.get(state_id)
        if path is None:
            raise UnknownState(f"classifier does not map state {state_id}")
        return path[0]

    @cached_property
    def known_states(self) -> frozenset:
        return frozenset(self.state_paths)


def validate_classifier(classifier: Classifier, state_ranks: Optional[Mapping] = None) -> list:
    """Validate the root scale, every refinement, and the nesting rule that
    a child scale's truth domains stay inside the parent proposition's box."""
    out = list(validate_scale(classifier.root, state_ranks))
    props_by_id = {
        p.id: p for scale in classifier._all_scales() for p in scale.propositions
    }
    for parent_id, child in classifier.refinements.items():
        out.extend(validate_scale(child))
        parent = props_by_id.get(parent_id)
        if parent is None:
            out.append(Violation(
                "refine-unknown",
                f"refinement attached to unknown proposition {parent_id}",
                (parent_id,),
            ))
            continue
        for p in child.propositions:
            if not _box_inside(p.box, parent.box):
                out.append(Violation(
                    "refine-outside",
                    f"refining proposition {p.id} leaves the domain of "
                    f"{parent_id}",
                    (parent_id, p.id),
                ))
    return out


def classify(classifier: Classifier, params: Sequence) -> Optional[str]:
    """Deepest state whose proposition contains the vector, or None.

    Descends greedily: match a root proposition, then keep matching inside
    its refinement while one exists.  Disjointness guarantees at most one
    match per scale.  Raises :class:`DimensionMismatch` when the vector has
    the wrong arity.
    """
    if len(params) != classifier.dimension:
        raise DimensionMismatch(
            f"vector has {len(params)} components, classifier expects "
            f"{classifier.dimension}"
        )
    scale = classifier.root
    best: Optional[str] = None
    while scale is not None:
        hit = None
        for prop in scale.propositions:
            if prop.contains(params):
                hit = prop
                break
        if hit is None:
            return best
        mapped = scale.state_of.get(hit.id)
        if mapped is not None:
            best = mapped
        scale = classifier.refinements.get(hit.id)
    return best


class Trend(str, Enum):
    INCREASING = "monotone-increasing"
    DECREASING = "monotone-decreasing"
    NON_MONOTONE = "non-monotone"


@dataclass(frozen=True)
class DynamicsProfile:
    trend: Trend
    critical_points: tuple
    bounded_range: tuple
    inflexions: tuple
    cyclic: bool
    period: Optional[float]

    def to_dict(self) -> dict:
        return {
            "trend": self.trend.value,
            "critical_points": list(self.critical_points),
            "bounded_range": list(self.bounded_range),
            "inflexions": list(self.inflexions),
            "cyclic": self.cyclic,
            "period": self.period,
        }


def _signs(deltas, tolerance):
    out = []
    for d in deltas:
        if d > tolerance:
            out.append(1)
        elif d < -tolerance:
            out.append(-1)
        else:
            out.append(0)
    return out


def _sign_changes(signs):
    """Indices where the running sign flips; zeros ride along."""
    changes = []
    last = 0
    for i, s in enumerate(signs):
        if s == 0:
            continue
        if last != 0 and s != last:
            changes.append(i)
        last = s
    return changes


def recognize_dynamics(series: Sequence, tolerance: float = 0.0) -> DynamicsProfile:
    """Qualitative profile of a sampled parameter series.

    Differences within ``tolerance`` of zero are treated as flat.  A series
    is cyclic when it crosses its mean at least four times at roughly even
    spacing; the period estimate is twice the mean crossing gap.
    """
    if len(series) < 3:
        raise SeriesTooShort(f"need at least 3 samples, got {len(series)}")
    if tolerance < 0:
        raise ValueError("tolerance must be nonnegative")
    values = [float(x) for x in series]

    first = [b - a for a, b in zip(values, values[1:])]
    signs = _signs(first, tolerance)
    if all(s >= 0 for s in signs) and any(s > 0 for s in signs):
        trend = Trend.INCREASING
    elif all(s <= 0 for s in signs) and any(s < 0 for s in signs):
        trend = Trend.DECREASING
    else:
        trend = Trend.NON_MONOTONE

    critical = tuple(_sign_changes(signs))

    second = [b - a for a, b in zip(first, first[1:])]
    # a second difference at i is centered on sample i + 1
    inflexions = tuple(i + 1 for i in _sign_changes(_signs(second, tolerance)))

    mean = statistics.fmean(values)
    crossings = []
    prev_side = 0
    touch_run = False
    for i, v in enumerate(values):
        if abs(v - mean) <= tolerance:
            if not touch_run:
                crossings.append(i)
            touch_run = True
            prev_side = 0  # a touch already counts; don't recount the exit
            continue
        touch_run = False
        side = 1 if v > mean else -1
        if prev_side != 0 and side != prev_side:
            crossings.append(i)
        prev_side = side

    cyclic = False
    period = None
    if len(crossings) >= 4:
        gaps = [b - a for a, b in zip(crossings, crossings[1:])]
        gaps = [g for g in gaps if g > 0]
        if gaps and max(gaps) <= 2 * min(gaps):
            cyclic = True
            period = 2 * statistics.fmean(gaps)

    return DynamicsProfile(
        trend=trend,
        critical_points=critical,
        bounded_range=(min(values), max(values)),
        inflexions=inflexions,
        cyclic=cyclic,
        period=period,
    )


GAP_HOLD = "gap-hold"
RANK_JUMP = "rank-jump"


def reestimate_state(
    prev_state: str,
    prev_params: Optional[Sequence],
    cur_params: Sequence,
    classifier: Classifier,
) -> tuple:
    """Next state estimate for an object that was last seen in ``prev_state``.

    Returns ``(state, flags)``.  An unclassifiable vector keeps the previous
    state and flags ``gap-hold``; a classified state more than one root
    ordinal away flags ``rank-jump``.  ``prev_params`` is accepted for
    callers that re-estimate from full sample pairs; the default rule only
    needs the current vector.
    """
    del prev_params  # the interval rule depends on the current sample only
    if prev_state not in classifier.known_states:
        raise UnknownState(f"classifier does not map state {prev_state}")
    state = classify(classifier, cur_params)
    if state is None:
        return prev_state, frozenset({GAP_HOLD})
    flags = set()
    if abs(classifier.root_ordinal(state) - classifier.root_ordinal(prev_state)) > 1:
        flags.add(RANK_JUMP)
    return state, frozenset(flags)


@dataclass(frozen=True)
class ClassificationMatrix:
    """Recognition-rule table: parameter rows, object-class columns."""

    parameters: tuple
    classes: tuple
    cells: Mapping  # (parameter, class) -> proposition id

    def __post_init__(self):
        object.__setattr__(self, "cells", dict(self.cells))


def validate_matrix(matrix: ClassificationMatrix, classifier: Classifier) -> list:
    known = {
        p.id
        for scale in [classifier.root, *classifier.refinements.values()]
        for p in scale.propositions
    }
    out = []
    for (param, cls), prop_id in sorted(matrix.cells.items()):
        if prop_id not in known:
            out.append(Violation(
                "matrix-unknown-rule",
                f"cell ({param}, {cls}) references unknown proposition {prop_id}",
                (str(param), cls),
            ))
    return out


def build_canonical_from_history(
    histories: Mapping,
    classifier: Classifier,
    partition: TimePartition,
    diagram_id: str = "observed",
) -> CanonicalDiagram:
    """Reconstruct a canonical diagram from per-object parameter histories.

    ``histories`` maps object id -> {tick -> parameter vector}; every
    partition boundary must be sampled for every object.  States are the
    classified states observed at boundaries, ranked by their classifier
    path; rank-increasing consecutive pairs become forward arcs and
    rank-decreasing pairs become backsteps.  Boundary distributions are the
    observed occupancy fractions.  The result is meant to be checked with
    validate_canonical; observed data can legitimately leave states
    unreachable.
    """
    if not histories:
        raise UnsampledBoundary("no object histories supplied")
    boundaries = partition.boundaries
    tracks: dict = {}
    for obj in sorted(histories):
        samples = histories[obj]
        states = []
        prev: Optional[str] = None
        for b in boundaries:
            if b not in samples:
                raise UnsampledBoundary(
                    f"object {obj} has no sample at boundary tick {b}"
                )
            if prev is None:
                state = classify(classifier, samples[b])
                if state is None:
                    raise UnknownState(
                        f"object {obj} is unclassifiable at boundary tick {b}"
                    )
            else:
                state, _flags = reestimate_state(prev, None, samples[b], classifier)
            states.append(state)
            prev = state
        tracks[obj] = states

    observed = sorted(
        {s for states in tracks.values() for s in states},
        key=lambda s: (classifier.state_paths.get(s, ()), s),
    )
    rank = {s: i for i, s in enumerate(observed)}

    first_seen = {s: len(boundaries) for s in observed}
    for states in tracks.values():
        for i, s in enumerate(states):
            first_seen[s] = min(first_seen[s], i)
    # keep intervals nondecreasing along the rank order
    intervals = {}
    floor = 0
    for s in observed:
        floor = max(floor, first_seen[s])
        intervals[s] = floor

    nodes = []
    for s in observed:
        role = Role.INTERMEDIATE
        if rank[s] == 0:
            role = Role.INITIAL
        elif rank[s] == len(observed) - 1:
            role = Role.FINAL
        nodes.append(StateNode(s, rank[s], intervals[s], role))

    arcs: dict = {}
    for states in tracks.values():
        for a, b in zip(states, states[1:]):
            if rank[b] > rank[a]:
                arc_id = f"fwd-{a}-{b}"
                arcs.setdefault(arc_id, Arc(arc_id, a, b, ArcKind.FORWARD, 1))
            elif rank[b] < rank[a]:
                arc_id = f"back-{a}-{b}"
                arcs.setdefault(arc_id, Arc(arc_id, a, b, ArcKind.BACKSTEP, 0))

    n_objects = len(tracks)
    marks = []
    for i in range(len(boundaries)):
        counts: dict = {}
        for states in tracks.values():
            counts[states[i]] = counts.get(states[i], 0) + 1
        marks.append(Distribution(
            {s: c / n_objects for s, c in counts.items()},
            frozenset(observed),
        ))

    return CanonicalDiagram(
        id=diagram_id,
        partition=partition,
        states=tuple(nodes),
        arcs=tuple(arcs[k] for k in sorted(arcs)),
        boundary_distributions=tuple(marks),
        population=n_objects,
    )
