"""Monitoring-data ingestion: turn sampled parameter vectors back into
observed dynamics.

Monitoring data is a stream of per-object samples.  Each sample is
classified to a state; a change between an object's consecutive samples is
mapped to an arc of the declared diagram and counted at the tick of the
later sample.  Moves with no matching arc are reported as anomalies and the
object is held at its last accepted state, so counters always describe the
declared diagram.  Objects contribute to occupancy only at ticks where they
were actually sampled; the in-transit channel absorbs the rest.

The file format is CSV with header ``tick,object,diagram,p1..pN`` where N
is the widest parameter vector in the file; rows for narrower diagrams
leave the trailing cells empty.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .classify import GAP_HOLD, RANK_JUMP, Classifier, classify, reestimate_state
from .core import ActualDynamics
from .errors import UnknownDiagram, UnsortedInput


@dataclass(frozen=True)
class MonitoringRecord:
    """One sample: where one object's parameters stood at one tick."""

    tick: int
    object: str
    diagram: str
    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.tick < 0:
            raise ValueError(f"sample tick must be nonnegative, got {self.tick}")


@dataclass(frozen=True)
class IngestAnomaly:
    """One sample that could not be counted as a clean transition."""

    tick: int
    object: str
    diagram: str
    kind: str  # no-arc | gap-hold | rank-jump | unclassified
    detail: str

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "object": self.object,
            "diagram": self.diagram,
            "kind": self.kind,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class IngestResult:
    """Observed dynamics per diagram, the anomaly list, and the observed
    boundary distributions (fractions over the objects sampled at each
    covered boundary tick)."""

    dynamics: Mapping
    anomalies: tuple
    observed_marks: Mapping

    def __post_init__(self):
        object.__setattr__(self, "dynamics", dict(self.dynamics))
        object.__setattr__(self, "anomalies", tuple(self.anomalies))
        object.__setattr__(
            self,
            "observed_marks",
            {k: dict(v) for k, v in dict(self.observed_marks).items()},
        )


def _classifier_for(classifier, diagram_id: str) -> Classifier:
    if isinstance(classifier, Classifier):
        return classifier
    try:
        return classifier[diagram_id]
    except (KeyError, TypeError):
        raise UnknownDiagram(
            f"no classifier available for diagram {diagram_id}"
        ) from None


def ingest_monitoring(
    records: Sequence,
    model,
    classifier,
    horizon: Optional[int] = None,
):
    """Interpret a monitoring stream against a model.

    ``classifier`` is either one classifier used for every diagram or a
    mapping from diagram id to classifier.  Records must arrive sorted by
    tick (:class:`UnsortedInput` otherwise) and must name diagrams of the
    model (:class:`UnknownDiagram` otherwise).  Returns an
    :class:`IngestResult`; anomalous samples are listed, not counted.
    """
    records = list(records)
    last_tick = None
    for record in records:
        if last_tick is not None and record.tick < last_tick:
            raise UnsortedInput(
                f"record for object {record.object} at tick {record.tick} "
                f"arrived after tick {last_tick}"
            )
        last_tick = record.tick
        if record.diagram not in model.diagrams:
            raise UnknownDiagram(
                f"monitoring names unknown diagram {record.diagram}"
            )

    if horizon is None:
        horizon = max((r.tick for r in records), default=0)

    length = horizon + 1
    occupancy = {
        d: {s: [0] * length for s in diagram.state_ids}
        for d, diagram in model.diagrams.items()
    }
    increments = {
        d: {a.id: [0] * length for a in diagram.arcs}
        for d, diagram in model.diagrams.items()
    }
    arc_for_move = {
        d: _lowest_arcs(diagram) for d, diagram in model.diagrams.items()
    }

    anomalies: list = []
    tracked: dict = {}  # (diagram, object) -> current accepted state

    for record in records:
        if record.tick > horizon:
            continue
        diagram_id = record.diagram
        clf = _classifier_for(classifier, diagram_id)
        key = (diagram_id, record.object)
        prev = tracked.get(key)
        if prev is None:
            state = classify(clf, record.params)
            if state is None:
                anomalies.append(IngestAnomaly(
                    record.tick, record.object, diagram_id, "unclassified",
                    "first sample matches no state; object not tracked yet",
                ))
                continue
        else:
            state, flags = reestimate_state(prev, None, record.params, clf)
            if GAP_HOLD in flags:
                anomalies.append(IngestAnomaly(
                    record.tick, record.object, diagram_id, GAP_HOLD,
                    f"sample matches no state; holding {prev}",
                ))
            if RANK_JUMP in flags:
                anomalies.append(IngestAnomaly(
                    record.tick, record.object, diagram_id, RANK_JUMP,
                    f"{prev} -> {state} skips more than one level",
                ))
            if state != prev:
                arc = arc_for_move[diagram_id].get((prev, state))
                if arc is None:
                    anomalies.append(IngestAnomaly(
                        record.tick, record.object, diagram_id, "no-arc",
                        f"no-arc {prev}->{state}",
                    ))
                    state = prev
                else:
                    increments[diagram_id][arc][record.tick] += 1
        tracked[key] = state
        occupancy[diagram_id][state][record.tick] += 1

    dynamics = {}
    marks: dict = {}
    for diagram_id, diagram in model.diagrams.items():
        counters = {}
        for arc_id, series in increments[diagram_id].items():
            total = 0
            cumulative = []
            for value in series:
                total += value
                cumulative.append(total)
            counters[arc_id] = tuple(cumulative)
        state_series = {
            s: tuple(v) for s, v in occupancy[diagram_id].items()
        }
        in_transit = tuple(
            diagram.population - sum(state_series[s][t] for s in state_series)
            for t in range(length)
        )
        dynamics[diagram_id] = ActualDynamics(
            diagram, state_series, counters, in_transit
        )
        observed = {}
        for index, boundary in enumerate(diagram.partition.boundaries):
            if boundary > horizon:
                continue
            total = sum(state_series[s][boundary] for s in state_series)
            if total == 0:
                continue
            observed[index] = {
                s: state_series[s][boundary] / total
                for s in state_series
                if state_series[s][boundary]
            }
        if observed:
            marks[diagram_id] = observed

    return IngestResult(dynamics, anomalies, marks)


def _lowest_arcs(diagram) -> dict:
    """(source, target) -> arc id, keeping the lowest id for parallel arcs."""
    out: dict = {}
    for arc in sorted(diagram.arcs, key=lambda a: a.id):
        out.setdefault((arc.source, arc.target), arc.id)
    return out


# -- synthesizing monitoring data from a run --------------------------------


def state_vector(classifier: Classifier, state: str) -> tuple:
    """A parameter vector that classifies to exactly ``state``.

    Probes representative points of the proposition mapped to the state
    (box midpoint first, then corners) until one classifies back to the
    state; raises ValueError when the classifier cannot express it, e.g.
    because refinements cover the whole box with deeper states.
    """
    scales = [classifier.root, *classifier.refinements.values()]
    candidates = [
        prop
        for scale in scales
        for prop in scale.propositions
        if scale.state_of.get(prop.id) == state
    ]
    if not candidates:
        raise ValueError(f"classifier maps no proposition to state {state}")
    for prop in candidates:
        for vector in _probe_points(prop.box, classifier.dimension):
            if classify(classifier, vector) == state:
                return tuple(vector)
    raise ValueError(f"no probe point classifies to state {state}")


def _probe_points(box: Mapping, dimension: int):
    """Candidate vectors inside a box: midpoints, then skewed blends."""
    finite_mid = []
    lows = []
    for param in range(dimension):
        lo, hi = box.get(param, (float("-inf"), float("inf")))
        if lo == float("-inf") and hi == float("inf"):
            finite_mid.append(0.0)
            lows.append(0.0)
        elif lo == float("-inf"):
            finite_mid.append(hi - 1.0)
            lows.append(hi - 1.0)
        elif hi == float("inf"):
            finite_mid.append(lo + 1.0)
            lows.append(lo)
        else:
            finite_mid.append((lo + hi) / 2.0)
            lows.append(lo)
    yield finite_mid
    yield lows
    for blend in (0.25, 0.75, 0.0625):
        yield [
            low + (mid - low) * 2.0 * blend
            for low, mid in zip(lows, finite_mid)
        ]


def records_from_trajectory(trajectory, model, classifier) -> tuple:
    """Per-object monitoring rows for a finished run.

    Emits one row per object per tick while the object occupies a state
    (objects in transit are unobservable, so those ticks have no row),
    with parameter vectors synthesized via :func:`state_vector`.  Sorted by
    (tick, diagram, object); feeding the result back through
    :func:`ingest_monitoring` reproduces the run's counters and occupancy.
    """
    from .engine import SimState  # local import; engine pulls in no IO

    initial = SimState.initial(model)
    rows = []
    for diagram_id in model.diagrams:
        diagram = model.diagrams[diagram_id]
        clf = _classifier_for(classifier, diagram_id)
        vectors = {s: state_vector(clf, s) for s in diagram.state_ids}
        location = dict(initial.state_of[diagram_id])
        arrivals: dict = {}
        moves: dict = {}
        departures: dict = {}
        for event in trajectory.events:
            if event.diagram != diagram_id:
                continue
            if event.kind == "arrive":
                arrivals.setdefault(event.tick, []).append(event)
            elif event.kind == "backstep":
                moves.setdefault(event.tick, []).append(event)
            elif event.kind in ("depart", "propagate"):
                departures.setdefault(event.tick, []).append(event)
        for tick in range(trajectory.horizon + 1):
            for event in arrivals.get(tick, ()):
                target = diagram.arc_by_id[event.arc].target
                for obj in event.objects:
                    location[obj] = target
            for event in moves.get(tick, ()):
                target = diagram.arc_by_id[event.arc].target
                for obj in event.objects:
                    location[obj] = target
            for obj in sorted(location):
                state = location[obj]
                if state is not None:
                    rows.append(MonitoringRecord(
                        tick, str(obj), diagram_id, vectors[state]
                    ))
            for event in departures.get(tick, ()):
                for obj in event.objects:
                    location[obj] = None
    rows.sort(key=lambda r: (r.tick, r.diagram, int(r.object)))
    return tuple(rows)


# -- CSV ---------------------------------------------------------------------


def write_monitoring_csv(records: Sequence, stream) -> None:
    """Write records as ``tick,object,diagram,p1..pN`` rows."""
    records = list(records)
    width = max((len(r.params) for r in records), default=1)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(
        ["tick", "object", "diagram"] + [f"p{i + 1}" for i in range(width)]
    )
    for record in records:
        cells = [str(record.tick), record.object, record.diagram]
        cells += [repr(p) for p in record.params]
        cells += [""] * (width - len(record.params))
        writer.writerow(cells)


def read_monitoring_csv(stream) -> tuple:
    """Parse monitoring CSV back into records; inverse of the writer."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:3]] != [
        "tick", "object", "diagram"
    ]:
        raise ValueError(
            "monitoring CSV must start with header tick,object,diagram,p1.."
        )
    out = []
    for row in reader:
        if not row or not any(cell.strip() for cell in row):
            continue
        params = tuple(float(cell) for cell in row[3:] if cell.strip())
        out.append(MonitoringRecord(int(row[0]), row[1], row[2], params))
    return tuple(out)
