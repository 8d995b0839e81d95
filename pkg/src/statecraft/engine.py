"""Deterministic scenario execution over a multilevel model.

Each tick runs four phases in a fixed order: (1) pending arrivals complete
and update the counters, (2) scheduled control symbols are taken in sorted
order and move whole source populations onto their arcs (general symbols
also fan out to their coupling's constituent child arcs), (3) couplings
whose completion quorum was met within the current parent-partition
interval propagate upward and fire the parent arc once per interval —
co-occurrence with a general-symbol firing in the same interval is counted
as redundancy instead, and (4) states whose dwell limit has run out push
their objects along the lowest-ranked backstep arc, landing the same tick.

Occupancy series count an object at its source through its departure tick,
in transit strictly between departure and arrival, and at its target from
the arrival tick onward.
"""

from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .core import (
    ActualDynamics,
    ArcKind,
    CanonicalDiagram,
    apportion,
    compare_distributions,
    distribution_at,
)
from .errors import (
    InconsistentState,
    ModelMismatch,
    PreconditionViolated,
    TrajectoryModelMismatch,
    UnknownDiagram,
    UnknownSupportState,
    UnknownSymbol,
)
from .hierarchy import MultilevelModel, SymbolKind, model_fingerprint


@dataclass(frozen=True)
class TimeDiagram:
    """Schedule mapping tick -> the set of control symbols applied then."""

    schedule: Mapping

    def __post_init__(self):
        object.__setattr__(
            self,
            "schedule",
            {int(t): frozenset(syms) for t, syms in dict(self.schedule).items()},
        )

    def symbols_at(self, tick: int) -> tuple:
        return tuple(sorted(self.schedule.get(tick, ())))

    @property
    def max_tick(self) -> int:
        return max(self.schedule, default=0)

    def items(self) -> tuple:
        return tuple(sorted(
            (t, tuple(sorted(s))) for t, s in self.schedule.items()
        ))

    def is_empty(self) -> bool:
        return not any(self.schedule.values())


@dataclass(frozen=True)
class CriterionConfig:
    """Weights of the per-diagram criterion series: progress counts
    ``rank_weight`` times the modal state's normalized position, spending
    counts ``resource_weight`` times the cumulative cost, and
    ``time_weight`` is carried for ranking extensions."""

    rank_weight: float = 1.0
    resource_weight: float = 0.0
    time_weight: float = 0.0


@dataclass(frozen=True)
class ControlScenario:
    """A named control schedule over a model, with a horizon, a
    decision-maker priority, criterion weights, and optionally a set of
    (diagram id, state id) pairs whose incoming backstep arcs are
    suppressed for the run."""

    id: str
    time_diagram: TimeDiagram
    horizon: int
    priority: int = 0
    criterion: CriterionConfig = field(default_factory=CriterionConfig)
    suppressed_backsteps: frozenset = frozenset()
    model_hash: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(
            self,
            "suppressed_backsteps",
            frozenset(tuple(p) for p in self.suppressed_backsteps),
        )


@dataclass(frozen=True)
class Event:
    """One log entry: a symbol application (possibly vacuous), a departure
    onto an arc, a completed arrival, a same-tick backstep, or an upward
    propagation firing."""

    tick: int
    kind: str  # symbol | vacuous | depart | arrive | backstep | propagate
    diagram: str
    arc: Optional[str] = None
    symbol: Optional[str] = None
    objects: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    def to_dict(self) -> dict:
        out = {"tick": self.tick, "kind": self.kind, "diagram": self.diagram}
        if self.arc is not None:
            out["arc"] = self.arc
        if self.symbol is not None:
            out["symbol"] = self.symbol
        if self.objects:
            out["objects"] = list(self.objects)
        return out


@dataclass
class SimState:
    """Mutable run state: per-diagram object locations and visit counts,
    in-flight transfers, cumulative counters, per-interval coupling
    windows, and the live metric accumulators."""

    state_of: dict  # diagram -> {object -> state id or None while in transit}
    arrived_at: dict  # diagram -> {object -> tick of arrival in current state}
    visits: dict  # diagram -> {object -> Counter of states entered}
    in_flight: dict  # diagram -> list of (arrival tick, arc id, object)
    transition_totals: dict  # diagram -> {arc id -> cumulative completed transitions}
    completions: dict  # (coupling id, interval) -> set of fired child arcs
    fired_general: set  # (coupling id, interval)
    fired_propagation: set  # (coupling id, interval)
    redundancy_counted: set  # (coupling id, interval)
    redundancy_count: int = 0
    resource_total: float = 0.0
    resource_spent: dict = field(default_factory=dict)  # diagram -> float
    omitted_backsteps: int = 0
    backstep_count: int = 0
    forward_completions: int = 0
    coupled_forward: int = 0

    @classmethod
    def initial(cls, model: MultilevelModel) -> "SimState":
        state_of: dict = {}
        arrived_at: dict = {}
        visits: dict = {}
        in_flight: dict = {}
        transition_totals: dict = {}
        spent: dict = {}
        for d in model.diagrams.values():
            order = [s.id for s in d.states_by_rank]
            placed = apportion(
                d.boundary_distributions[0].fractions, d.population, order
            )
            locations: dict = {}
            obj = 0
            for state_id in order:
                for _ in range(placed.get(state_id, 0)):
                    locations[obj] = state_id
                    obj += 1
            state_of[d.id] = locations
            arrived_at[d.id] = {o: 0 for o in locations}
            visits[d.id] = {o: Counter({s: 1}) for o, s in locations.items()}
            in_flight[d.id] = []
            transition_totals[d.id] = {a.id: 0 for a in d.arcs}
            spent[d.id] = 0.0
        return cls(
            state_of=state_of,
            arrived_at=arrived_at,
            visits=visits,
            in_flight=in_flight,
            transition_totals=transition_totals,
            completions={},
            fired_general=set(),
            fired_propagation=set(),
            redundancy_counted=set(),
            resource_spent=spent,
        )

    def occupancy_of(self, diagram_id: str) -> Counter:
        counts: Counter = Counter()
        for state in self.state_of[diagram_id].values():
            if state is not None:
                counts[state] += 1
        return counts


@dataclass(frozen=True)
class Trajectory:
    """Everything one run recorded: per-diagram dynamics (occupancy,
    counters, transit channel), the ordered event log, applied-control and
    modal-state and criterion series, and the live metric accumulators."""

    scenario_id: str
    model_hash: str
    horizon: int
    dynamics: Mapping  # diagram id -> ActualDynamics
    events: tuple
    applied: Mapping  # diagram id -> tuple per tick of applied symbol ids
    modal: Mapping  # diagram id -> tuple per tick of modal state id
    criterion: Mapping  # diagram id -> tuple per tick of criterion values
    resource_series: Mapping  # diagram id -> tuple per tick of cumulative cost
    resource_total: float
    redundancy_count: int
    omitted_backsteps: int
    backstep_count: int
    forward_completions: int
    coupled_forward: int

    def __post_init__(self):
        object.__setattr__(self, "dynamics", dict(self.dynamics))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "applied", dict(self.applied))
        object.__setattr__(self, "modal", dict(self.modal))
        object.__setattr__(self, "criterion", dict(self.criterion))
        object.__setattr__(self, "resource_series", dict(self.resource_series))

    def dynamics_for(self, diagram_id: str) -> ActualDynamics:
        try:
            return self.dynamics[diagram_id]
        except KeyError:
            raise UnknownDiagram(f"trajectory covers no diagram {diagram_id}")


@dataclass(frozen=True)
class ScenarioReport:
    """Outcome metrics of one run: completion, redundancy count, omitted
    and coupled-transition ratios, per-diagram goal times, total resource
    spend, and per-boundary divergence from the canonical distributions."""

    scenario_id: str
    model_hash: str
    horizon: int
    priority: int
    complete: bool
    redundancy_count: int
    omitted_ratio: float
    complexness: float
    goal_times: Mapping  # diagram id -> first full-occupancy tick or None
    resource_total: float
    divergence: Mapping  # diagram id -> {boundary index -> L1 distance}

    def __post_init__(self):
        object.__setattr__(self, "goal_times", dict(self.goal_times))
        object.__setattr__(
            self, "divergence", {k: dict(v) for k, v in dict(self.divergence).items()}
        )

    @property
    def max_goal_time(self) -> Optional[int]:
        times = list(self.goal_times.values())
        if not times or any(t is None for t in times):
            return None
        return max(times)

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "model_hash": self.model_hash,
            "horizon": self.horizon,
            "priority": self.priority,
            "complete": self.complete,
            "redundancy_count": self.redundancy_count,
            "omitted_ratio": self.omitted_ratio,
            "complexness": self.complexness,
            "goal_times": dict(self.goal_times),
            "resource_total": self.resource_total,
            "divergence": {
                d: {str(i): v for i, v in sorted(m.items())}
                for d, m in self.divergence.items()
            },
        }


@dataclass(frozen=True)
class SupportPoint:
    """One waypoint of a partial criterion: a state that must hold the
    whole population of its diagram no later than the deadline tick."""

    diagram: str
    state: str
    deadline: int


@dataclass(frozen=True)
class PartialCriterion:
    """Ordered support states with deadlines plus optional budgets."""

    supports: tuple  # of SupportPoint
    resource_budget: Optional[float] = None
    time_budget: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "supports", tuple(self.supports))


@dataclass(frozen=True)
class Verdict:
    """check_partial outcome: confirmed, or refuted with the first
    violated requirement."""

    confirmed: bool
    failed: Optional[str] = None
    reason: Optional[str] = None


# --- stepping ------------------------------------------------------------------


def _depart(
    model, sim, events, tick, diagram_id, arc_id, *, symbol=None, kind="depart"
):
    """Move every object sitting in the arc's source onto the arc.

    Forward arcs schedule an arrival after the transit time; the objects
    stay counted at the source for the remainder of this tick.  Returns the
    moved objects.
    """
    diagram = model.diagrams[diagram_id]
    arc = diagram.arc_by_id[arc_id]
    movers = sorted(
        o for o, s in sim.state_of[diagram_id].items() if s == arc.source
    )
    if not movers:
        return ()
    for obj in movers:
        sim.state_of[diagram_id][obj] = None
        sim.in_flight[diagram_id].append((tick + arc.transit_ticks, arc_id, obj))
    events.append(Event(tick, kind, diagram_id, arc=arc_id, symbol=symbol,
                        objects=tuple(movers)))
    return tuple(movers)


def _complete_arrival(model, sim, events, tick, diagram_id, arc_id, objects):
    """Land objects at the arc's target, bump counters and visit counts,
    and register the completion with any coupling the arc belongs to."""
    diagram = model.diagrams[diagram_id]
    arc = diagram.arc_by_id[arc_id]
    for obj in objects:
        sim.state_of[diagram_id][obj] = arc.target
        sim.arrived_at[diagram_id][obj] = tick
        sim.visits[diagram_id][obj][arc.target] += 1
    sim.transition_totals[diagram_id][arc_id] += len(objects)
    events.append(Event(tick, "arrive", diagram_id, arc=arc_id,
                        objects=tuple(objects)))
    key = (diagram_id, arc_id)
    coupled = key in model.coupled_arc_keys
    if arc.kind is ArcKind.FORWARD:
        sim.forward_completions += len(objects)
        if coupled:
            sim.coupled_forward += len(objects)
    for coupling in model.couplings_by_constituent.get(key, ()):
        parent = model.diagrams[coupling.parent_diagram]
        interval = parent.partition.bucket(tick)
        sim.completions.setdefault((coupling.id, interval), set()).add(key)


def _fire_general(model, sim, events, tick, symbol):
    """A general symbol fires its parent arc and fans out to every
    constituent child arc of the couplings keyed by that arc."""
    _depart(model, sim, events, tick, symbol.diagram, symbol.arc,
            symbol=symbol.id)
    for coupling in model.couplings_by_parent_arc.get(
        (symbol.diagram, symbol.arc), ()
    ):
        parent = model.diagrams[coupling.parent_diagram]
        interval = parent.partition.bucket(tick)
        window = (coupling.id, interval)
        sim.fired_general.add(window)
        if (
            window in sim.fired_propagation
            and window not in sim.redundancy_counted
        ):
            sim.redundancy_count += 1
            sim.redundancy_counted.add(window)
        for child_diagram, child_arc in sorted(coupling.children):
            _depart(model, sim, events, tick, child_diagram, child_arc,
                    symbol=symbol.id)


def _step_inplace(model: MultilevelModel, sim: SimState, tick: int,
                  symbols, scenario: Optional[ControlScenario] = None) -> list:
    events: list = []

    # Phase 1 — arrivals due this tick complete.
    for diagram_id in sorted(sim.in_flight):
        due = [e for e in sim.in_flight[diagram_id] if e[0] == tick]
        if not due:
            continue
        sim.in_flight[diagram_id] = [
            e for e in sim.in_flight[diagram_id] if e[0] != tick
        ]
        by_arc: dict = {}
        for _, arc_id, obj in due:
            by_arc.setdefault(arc_id, []).append(obj)
        for arc_id in sorted(by_arc):
            _complete_arrival(model, sim, events, tick, diagram_id, arc_id,
                              tuple(sorted(by_arc[arc_id])))

    # Phase 2 — symbol intake in sorted order.
    for symbol_id in sorted(symbols):
        symbol = model.symbols.get(symbol_id)
        if symbol is None:
            raise UnknownSymbol(f"scenario applies undeclared symbol {symbol_id}")
        sim.resource_total += symbol.cost
        sim.resource_spent[symbol.diagram] = (
            sim.resource_spent.get(symbol.diagram, 0.0) + symbol.cost
        )
        source = model.diagrams[symbol.diagram].arc_by_id[symbol.arc].source
        occupied = any(
            s == source for s in sim.state_of[symbol.diagram].values()
        )
        if not occupied:
            events.append(Event(tick, "vacuous", symbol.diagram,
                                arc=symbol.arc, symbol=symbol_id))
            if symbol.kind is SymbolKind.GENERAL:
                # The window still counts as generally fired for redundancy.
                for coupling in model.couplings_by_parent_arc.get(
                    (symbol.diagram, symbol.arc), ()
                ):
                    parent = model.diagrams[coupling.parent_diagram]
                    window = (coupling.id, parent.partition.bucket(tick))
                    sim.fired_general.add(window)
                    for child_diagram, child_arc in sorted(coupling.children):
                        _depart(model, sim, events, tick, child_diagram,
                                child_arc, symbol=symbol_id)
            continue
        events.append(Event(tick, "symbol", symbol.diagram, arc=symbol.arc,
                            symbol=symbol_id))
        if symbol.kind is SymbolKind.GENERAL:
            _fire_general(model, sim, events, tick, symbol)
        else:
            _depart(model, sim, events, tick, symbol.diagram, symbol.arc,
                    symbol=symbol_id)

    # Phase 3 — upward propagation over met quorums.
    for coupling in sorted(model.couplings, key=lambda c: c.id):
        parent = model.diagrams[coupling.parent_diagram]
        interval = parent.partition.bucket(tick)
        window = (coupling.id, interval)
        fired_children = sim.completions.get(window, ())
        if len(fired_children) < coupling.quorum:
            continue
        if window in sim.fired_general:
            if window not in sim.redundancy_counted:
                sim.redundancy_count += 1
                sim.redundancy_counted.add(window)
            continue
        if window in sim.fired_propagation:
            continue
        sim.fired_propagation.add(window)
        moved = _depart(model, sim, events, tick, coupling.parent_diagram,
                        coupling.parent_arc, kind="propagate")
        if not moved:
            events.append(Event(tick, "propagate", coupling.parent_diagram,
                                arc=coupling.parent_arc))

    # Phase 4 — dwell limits push objects back, landing the same tick.
    suppressed = scenario.suppressed_backsteps if scenario else frozenset()
    for diagram_id in sorted(sim.state_of):
        diagram = model.diagrams[diagram_id]
        for obj in sorted(sim.state_of[diagram_id]):
            state_id = sim.state_of[diagram_id][obj]
            if state_id is None:
                continue
            node = diagram.state_by_id[state_id]
            if node.dwell_limit is None:
                continue
            if tick - sim.arrived_at[diagram_id][obj] < node.dwell_limit:
                continue
            candidates = [
                a for a in diagram.backsteps_from(state_id)
                if (diagram_id, a.target) not in suppressed
            ]
            if not candidates:
                continue
            arc = candidates[0]
            if sim.visits[diagram_id][obj][state_id] >= 2:
                sim.omitted_backsteps += 1
            sim.backstep_count += 1
            sim.state_of[diagram_id][obj] = arc.target
            sim.arrived_at[diagram_id][obj] = tick
            sim.visits[diagram_id][obj][arc.target] += 1
            sim.transition_totals[diagram_id][arc.id] += 1
            events.append(Event(tick, "backstep", diagram_id, arc=arc.id,
                                objects=(obj,)))

    # Conservation check: every object is in a state or in flight.
    for diagram_id, diagram in model.diagrams.items():
        placed = sum(
            1 for s in sim.state_of[diagram_id].values() if s is not None
        )
        if placed + len(sim.in_flight[diagram_id]) != diagram.population:
            raise InconsistentState(
                f"conservation broken in {diagram_id} at tick {tick}: "
                f"{placed} placed + {len(sim.in_flight[diagram_id])} in "
                f"transit != population {diagram.population}"
            )
    return events


def step(model: MultilevelModel, sim_state: SimState, tick: int,
         symbols, scenario: Optional[ControlScenario] = None) -> tuple:
    """Advance one tick through the four phases and return the next state
    plus the events the tick produced.  The input state is not modified."""
    nxt = copy.deepcopy(sim_state)
    events = _step_inplace(model, nxt, tick, symbols, scenario)
    return nxt, tuple(events)


# --- running -------------------------------------------------------------------


def _modal_state(diagram: CanonicalDiagram, counts: Mapping) -> str:
    """Highest-occupancy state; ties (including all-zero) go to the lowest
    rank."""
    best = None
    best_count = -1
    for node in diagram.states_by_rank:
        c = counts.get(node.id, 0)
        if c > best_count:
            best, best_count = node.id, c
    return best


def _criterion_value(diagram: CanonicalDiagram, modal_id: str,
                     spent: float, cfg: CriterionConfig) -> float:
    final = diagram.final_state
    top = diagram.ordinal_of[final.id] if final is not None else 0
    if top == 0:
        progress = 1.0
    else:
        progress = diagram.ordinal_of[modal_id] / top
    return cfg.rank_weight * progress - cfg.resource_weight * spent


def run(model: MultilevelModel, scenario: ControlScenario) -> Trajectory:
    """Fold the step over ticks 0..horizon and assemble the trajectory."""
    if scenario.horizon < 0:
        raise PreconditionViolated("horizon must be nonnegative")
    if scenario.horizon > model.max_horizon:
        raise PreconditionViolated(
            f"scenario horizon {scenario.horizon} exceeds the model's "
            f"maximal diagram horizon {model.max_horizon}"
        )
    if scenario.priority < 0:
        raise PreconditionViolated("priority must be nonnegative")
    bad_ticks = [
        t for t in scenario.time_diagram.schedule
        if not 0 <= t <= scenario.horizon
    ]
    if bad_ticks:
        raise PreconditionViolated(
            f"schedule ticks outside 0..{scenario.horizon}: {sorted(bad_ticks)}"
        )
    fingerprint = model_fingerprint(model)
    if scenario.model_hash is not None and scenario.model_hash != fingerprint:
        raise ModelMismatch(
            f"scenario {scenario.id} was built for model "
            f"{scenario.model_hash[:12]}…, not {fingerprint[:12]}…"
        )

    sim = SimState.initial(model)
    events: list = []
    order = sorted(model.diagrams)
    occupancy = {
        d: {s.id: [] for s in model.diagrams[d].states} for d in order
    }
    transit = {d: [] for d in order}
    counters = {
        d: {a.id: [] for a in model.diagrams[d].arcs} for d in order
    }
    applied = {d: [] for d in order}
    modal = {d: [] for d in order}
    criterion = {d: [] for d in order}
    resource_series = {d: [] for d in order}

    for tick in range(scenario.horizon + 1):
        tick_events = _step_inplace(
            model, sim, tick, scenario.time_diagram.symbols_at(tick), scenario
        )
        events.extend(tick_events)

        graced: dict = {d: Counter() for d in order}
        for e in tick_events:
            if e.kind in ("depart", "propagate") and e.objects:
                source = model.diagrams[e.diagram].arc_by_id[e.arc].source
                graced[e.diagram][source] += len(e.objects)
        for d in order:
            counts = sim.occupancy_of(d)
            counts.update(graced[d])
            for s in occupancy[d]:
                occupancy[d][s].append(counts.get(s, 0))
            transit[d].append(
                len(sim.in_flight[d]) - sum(graced[d].values())
            )
            for a in counters[d]:
                counters[d][a].append(sim.transition_totals[d][a])
            applied[d].append(tuple(
                e.symbol for e in tick_events
                if e.kind in ("symbol", "vacuous") and e.diagram == d
            ))
            modal[d].append(_modal_state(model.diagrams[d], counts))
            resource_series[d].append(sim.resource_spent.get(d, 0.0))
            criterion[d].append(_criterion_value(
                model.diagrams[d], modal[d][-1], resource_series[d][-1],
                scenario.criterion,
            ))

    dynamics = {
        d: ActualDynamics(
            model.diagrams[d],
            {s: tuple(series) for s, series in occupancy[d].items()},
            {a: tuple(series) for a, series in counters[d].items()},
            tuple(transit[d]),
        )
        for d in order
    }
    return Trajectory(
        scenario_id=scenario.id,
        model_hash=fingerprint,
        horizon=scenario.horizon,
        dynamics=dynamics,
        events=tuple(events),
        applied={d: tuple(v) for d, v in applied.items()},
        modal={d: tuple(v) for d, v in modal.items()},
        criterion={d: tuple(v) for d, v in criterion.items()},
        resource_series={d: tuple(v) for d, v in resource_series.items()},
        resource_total=sim.resource_total,
        redundancy_count=sim.redundancy_count,
        omitted_backsteps=sim.omitted_backsteps,
        backstep_count=sim.backstep_count,
        forward_completions=sim.forward_completions,
        coupled_forward=sim.coupled_forward,
    )


def run_inertial(model: MultilevelModel, horizon: Optional[int] = None) -> Trajectory:
    """Run with an empty schedule: nothing moves forward, only dwell-limit
    backsteps can occur."""
    h = model.max_horizon if horizon is None else int(horizon)
    return run(model, ControlScenario("inertial", TimeDiagram({}), h))


# --- evaluation ----------------------------------------------------------------


def goal_time(dynamics: ActualDynamics) -> Optional[int]:
    """First tick at which the final state holds the whole population."""
    final = dynamics.diagram.final_state
    if final is None:
        return None
    series = dynamics.occupancy[final.id]
    for tick, value in enumerate(series):
        if value == dynamics.diagram.population:
            return tick
    return None


def evaluate(trajectory: Trajectory, scenario: ControlScenario) -> ScenarioReport:
    """Assemble the scenario report from the trajectory's accumulators and
    series."""
    if trajectory.scenario_id != scenario.id:
        raise TrajectoryModelMismatch(
            f"trajectory belongs to scenario {trajectory.scenario_id}, "
            f"not {scenario.id}"
        )
    if (
        scenario.model_hash is not None
        and scenario.model_hash != trajectory.model_hash
    ):
        raise TrajectoryModelMismatch(
            "trajectory and scenario reference different models"
        )

    goal_times = {d: goal_time(dyn) for d, dyn in trajectory.dynamics.items()}
    complete = all(t is not None for t in goal_times.values())

    transitions = trajectory.forward_completions + trajectory.backstep_count
    omitted_ratio = (
        trajectory.omitted_backsteps / transitions if transitions else 0.0
    )
    complexness = (
        trajectory.coupled_forward / trajectory.forward_completions
        if trajectory.forward_completions else 0.0
    )

    divergence: dict = {}
    for d, dyn in trajectory.dynamics.items():
        diagram = dyn.diagram
        per_boundary: dict = {}
        for i, boundary in enumerate(diagram.partition.boundaries):
            if boundary > trajectory.horizon:
                continue
            per_boundary[i] = compare_distributions(
                distribution_at(dyn, boundary),
                diagram.boundary_distributions[i],
            )
        divergence[d] = per_boundary

    return ScenarioReport(
        scenario_id=scenario.id,
        model_hash=trajectory.model_hash,
        horizon=trajectory.horizon,
        priority=scenario.priority,
        complete=complete,
        redundancy_count=trajectory.redundancy_count,
        omitted_ratio=omitted_ratio,
        complexness=complexness,
        goal_times=goal_times,
        resource_total=trajectory.resource_total,
        divergence=divergence,
    )


def efficiency_vectors(trajectory: Trajectory,
                       criterion_cfg: Optional[CriterionConfig] = None) -> tuple:
    """The applied-control, modal-state and criterion series per diagram;
    the criterion is recomputed under the given weights."""
    if criterion_cfg is None:
        return trajectory.applied, trajectory.modal, trajectory.criterion
    w = {
        d: tuple(
            _criterion_value(
                trajectory.dynamics[d].diagram,
                trajectory.modal[d][t],
                trajectory.resource_series[d][t],
                criterion_cfg,
            )
            for t in range(trajectory.horizon + 1)
        )
        for d in trajectory.modal
    }
    return trajectory.applied, trajectory.modal, w


def check_partial(trajectory: Trajectory, criterion: PartialCriterion) -> Verdict:
    """Confirm the trajectory passes through every support state by its
    deadline, in order, within the optional budgets."""
    deadlines = [s.deadline for s in criterion.supports]
    if any(b > a for b, a in zip(deadlines, deadlines[1:])):
        raise PreconditionViolated("support deadlines must be nondecreasing")

    reached = 0
    last_tick = 0
    for support in criterion.supports:
        try:
            dyn = trajectory.dynamics_for(support.diagram)
        except UnknownDiagram:
            raise UnknownSupportState(
                f"support references unknown diagram {support.diagram}"
            )
        if support.state not in dyn.diagram.state_ids:
            raise UnknownSupportState(
                f"support references unknown state "
                f"{support.diagram}:{support.state}"
            )
        series = dyn.occupancy[support.state]
        hit = None
        for tick in range(last_tick, min(support.deadline, trajectory.horizon) + 1):
            if series[tick] == dyn.diagram.population:
                hit = tick
                break
        if hit is None:
            return Verdict(
                confirmed=False,
                failed=f"{support.diagram}:{support.state}",
                reason=(
                    f"support state {support.state} not fully occupied by "
                    f"tick {support.deadline}"
                ),
            )
        last_tick = hit
        reached += 1

    if (
        criterion.resource_budget is not None
        and trajectory.resource_total > criterion.resource_budget
    ):
        return Verdict(
            confirmed=False,
            failed="resource",
            reason=(
                f"resource total {trajectory.resource_total} exceeds budget "
                f"{criterion.resource_budget}"
            ),
        )
    if criterion.time_budget is not None and last_tick > criterion.time_budget:
        return Verdict(
            confirmed=False,
            failed="time",
            reason=(
                f"last support reached at tick {last_tick}, after the time "
                f"budget {criterion.time_budget}"
            ),
        )
    return Verdict(confirmed=True)


# --- comparison ----------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonResult:
    """Deterministic ranking of scenario reports with the Pareto frontier
    marked."""

    order: tuple  # scenario ids, best first
    frontier: frozenset  # scenario ids on the Pareto frontier


def _compare_key(report: ScenarioReport):
    goal = report.max_goal_time
    return (
        0 if report.complete else 1,
        goal if goal is not None else float("inf"),
        report.resource_total,
        report.omitted_ratio,
        report.scenario_id,
    )


def compare(reports: Sequence) -> ComparisonResult:
    """Rank reports: Pareto frontier over (completeness, resource total,
    worst goal time) first, then the dominated rest, each ordered
    lexicographically by (completeness, goal time, resource, omitted
    ratio) with scenario ids breaking ties."""
    reports = list(reports)
    hashes = {r.model_hash for r in reports}
    if len(hashes) > 1:
        raise ModelMismatch(
            f"reports span {len(hashes)} different models; comparison "
            f"needs a single model"
        )

    def vector(r: ScenarioReport):
        goal = r.max_goal_time
        return (
            0 if r.complete else 1,
            r.resource_total,
            goal if goal is not None else float("inf"),
        )

    def dominates(a, b) -> bool:
        va, vb = vector(a), vector(b)
        return all(x <= y for x, y in zip(va, vb)) and va != vb

    on_frontier = [
        r for r in reports
        if not any(dominates(other, r) for other in reports)
    ]
    frontier_ids = frozenset(r.scenario_id for r in on_frontier)
    ranked = sorted(reports, key=lambda r: (
        0 if r.scenario_id in frontier_ids else 1,
        *_compare_key(r),
    ))
    return ComparisonResult(
        order=tuple(r.scenario_id for r in ranked),
        frontier=frontier_ids,
    )
