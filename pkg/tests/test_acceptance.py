"""End-to-end acceptance checks with explicit wall-clock budgets.

Each test covers one release gate: exact conservation, inertial neutrality,
event-log replay, coupled cascades, metric and planner oracles, plan
executability, classifier soundness, monitoring closure, composition
algebra, and CLI determinism.  Randomized bodies are seeded so any failure
replays exactly; every budget is asserted because slow correctness is a
defect in a decision-support tool.
"""

import hashlib
import random
import time
from bisect import bisect_right
from contextlib import contextmanager

import pytest

from statecraft.classify import Classifier, classify, validate_scale
from statecraft.core import ArcKind, validate_canonical
from statecraft.engine import (
    ControlScenario,
    TimeDiagram,
    evaluate,
    run,
    run_inertial,
)
from statecraft.hierarchy import (
    AggregationMap,
    compose_parallel,
    compose_sequential,
    validate_aggregation,
)
from statecraft.ingest import ingest_monitoring, records_from_trajectory
from statecraft.planner import (
    enumerate_plans,
    plan_to_time_diagram,
    rules_to_diagram,
)
from statecraft.cli import main

from conftest import make_parent_child_model, planner_rules
from modelgen import (
    interval_classifier_for,
    min_aggregation,
    random_chain_diagram,
    random_interval_scale,
    random_rule_base,
    random_scenario,
    random_single_level_model,
    random_tree_model,
)
from oracles import exhaustive_plans, recount_metrics, replay_occupancy
from sampletexts import DEMO3_TEXT

CORPUS_SEED = 20260816
CORPUS_SIZE = 200


@contextmanager
def budget(seconds):
    start = time.monotonic()
    yield
    elapsed = time.monotonic() - start
    assert elapsed < seconds, (
        f"budget exceeded: {elapsed:.2f}s against {seconds}s"
    )


@pytest.fixture(scope="module")
def corpus():
    """200 randomized models (every third one a coupled tree) with one
    random scenario each."""
    rng = random.Random(CORPUS_SEED)
    out = []
    for i in range(CORPUS_SIZE):
        if i % 3 == 2:
            model = random_tree_model(rng)
        else:
            model = random_single_level_model(rng, diagram_id=f"d{i}")
        out.append((model, random_scenario(rng, model, f"sc{i}")))
    return out


@pytest.fixture(scope="module")
def corpus_runs(corpus):
    return [(model, scenario, run(model, scenario))
            for model, scenario in corpus]


def event_tuple(event):
    return (event.tick, event.kind, event.diagram, event.arc,
            event.symbol, event.objects)


class TestConservation:
    def test_population_is_conserved_every_tick(self, corpus):
        with budget(10):
            for model, scenario in corpus:
                trajectory = run(model, scenario)
                for diagram in model.diagrams.values():
                    dynamics = trajectory.dynamics[diagram.id]
                    for tick in range(trajectory.horizon + 1):
                        located = sum(
                            series[tick]
                            for series in dynamics.occupancy.values()
                        )
                        assert (
                            located + dynamics.in_transit[tick]
                            == diagram.population
                        ), (diagram.id, tick)


class TestInertialNeutrality:
    def test_uncontrolled_runs_move_nothing_forward(self, corpus):
        with budget(5):
            for model, _scenario in corpus:
                trajectory = run_inertial(model)
                for diagram in model.diagrams.values():
                    counters = trajectory.dynamics[diagram.id].transition_counts
                    for arc in diagram.arcs:
                        if arc.kind is ArcKind.FORWARD:
                            assert not any(counters[arc.id]), (
                                diagram.id, arc.id,
                            )


class TestReplaySoundness:
    def test_event_log_rebuilds_occupancy_bit_exactly(self, corpus_runs):
        with budget(10):
            for model, _scenario, trajectory in corpus_runs:
                occupancy, transit = replay_occupancy(model, trajectory)
                for diagram_id, dynamics in trajectory.dynamics.items():
                    for state, series in dynamics.occupancy.items():
                        assert tuple(occupancy[diagram_id][state]) == series
                    assert (
                        tuple(transit[diagram_id]) == dynamics.in_transit
                    )


class TestCoupledCascade:
    def run_fixture(self, schedule):
        model = make_parent_child_model(quorum=2)
        scenario = ControlScenario("cascade", TimeDiagram(schedule), 2)
        return model, run(model, scenario)

    def test_child_quorum_fires_parent_within_interval(self):
        with budget(1):
            model, trajectory = self.run_fixture({0: {"x_c1", "x_c2"}})
            assert [event_tuple(e) for e in trajectory.events] == [
                (0, "symbol", "c1", "a01", "x_c1", ()),
                (0, "depart", "c1", "a01", "x_c1", (0,)),
                (0, "symbol", "c2", "a01", "x_c2", ()),
                (0, "depart", "c2", "a01", "x_c2", (0,)),
                (1, "arrive", "c1", "a01", None, (0,)),
                (1, "arrive", "c2", "a01", None, (0,)),
                (1, "propagate", "root", "p01", None, (0,)),
                (2, "arrive", "root", "p01", None, (0,)),
            ]
            assert trajectory.redundancy_count == 0
            assert trajectory.dynamics["root"].occupancy["P1"] == (0, 0, 1)
            # the upward firing lands inside the parent's first interval
            boundaries = model.diagrams["root"].partition.boundaries
            propagate = [e for e in trajectory.events
                         if e.kind == "propagate"]
            assert len(propagate) == 1
            assert boundaries[0] <= propagate[0].tick < boundaries[1]

    def test_cooccurring_general_symbol_counts_redundancy(self):
        with budget(1):
            _model, trajectory = self.run_fixture({0: {"g", "x_c1", "x_c2"}})
            assert [event_tuple(e) for e in trajectory.events] == [
                (0, "symbol", "root", "p01", "g", ()),
                (0, "depart", "root", "p01", "g", (0,)),
                (0, "depart", "c1", "a01", "g", (0,)),
                (0, "depart", "c2", "a01", "g", (0,)),
                (0, "vacuous", "c1", "a01", "x_c1", ()),
                (0, "vacuous", "c2", "a01", "x_c2", ()),
                (1, "arrive", "c1", "a01", None, (0,)),
                (1, "arrive", "c2", "a01", None, (0,)),
                (1, "arrive", "root", "p01", None, (0,)),
            ]
            assert trajectory.redundancy_count == 1
            assert trajectory.dynamics["root"].occupancy["P1"] == (0, 1, 1)


class TestMetricOracle:
    def test_every_metric_matches_brute_force_recount(self, corpus_runs):
        with budget(5):
            for model, scenario, trajectory in corpus_runs[:100]:
                report = evaluate(trajectory, scenario)
                recount = recount_metrics(model, trajectory)
                assert report.complete == recount["complete"]
                assert report.redundancy_count == recount["redundancy_count"]
                assert report.omitted_ratio == recount["omitted_ratio"]
                assert report.complexness == recount["complexness"]
                assert report.goal_times == recount["goal_times"]
                assert report.resource_total == recount["resource_total"]
                assert report.divergence == recount["divergence"]


class TestPlannerOracle:
    def test_fixture_frontier(self):
        plans = enumerate_plans(planner_rules(), "S0", "S2")
        assert {(p.total_resource, p.total_time) for p in plans} == {
            (5.0, 3),
            (6.0, 2),
        }

    def test_frontier_matches_exhaustive_search(self):
        rng = random.Random(6606)
        with budget(10):
            for i in range(100):
                rules, _states = random_rule_base(rng)
                named = sorted(
                    {r.source for r in rules} | {r.target for r in rules}
                )
                start, goal = rng.sample(named, 2)
                variant = i % 4
                if variant == 0:
                    budgets = None
                elif variant == 1:
                    budgets = (float(rng.randint(0, 15)), None)
                elif variant == 2:
                    budgets = (None, rng.randint(1, 8))
                else:
                    budgets = (float(rng.randint(0, 15)),
                               rng.randint(1, 8))
                plans = enumerate_plans(rules, start, goal, budgets=budgets)
                oracle = exhaustive_plans(rules, start, goal, budgets=budgets)
                assert [
                    (p.rule_ids, p.total_resource, p.total_time)
                    for p in plans
                ] == [
                    (tuple(r.id for r in chain), resource, duration)
                    for chain, resource, duration, _states in oracle
                ], (i, start, goal, budgets)


class TestPlanExecutability:
    def test_every_plan_reaches_goal_at_start_plus_total_time(self):
        from statecraft.hierarchy import assemble

        with budget(2):
            rules = planner_rules()
            diagram, symbols = rules_to_diagram(rules, "S0", "S2")
            assert validate_canonical(diagram) == []
            model = assemble([diagram], {}, {}, (), symbols)
            for start_tick in (0, 2):
                for plan in enumerate_plans(rules, "S0", "S2"):
                    schedule = plan_to_time_diagram(plan, start_tick)
                    scenario = ControlScenario(
                        f"plan-{start_tick}-{'-'.join(plan.rule_ids)}",
                        schedule,
                        diagram.horizon,
                    )
                    trajectory = run(model, scenario)
                    report = evaluate(trajectory, scenario)
                    assert report.goal_times[diagram.id] == (
                        start_tick + plan.total_time
                    )
                    assert report.resource_total == plan.total_resource
                    visited = ["S0"] + [
                        diagram.arc_by_id[e.arc].target
                        for e in trajectory.events
                        if e.kind == "arrive"
                    ]
                    assert tuple(visited) == plan.states


class TestClassifierSuite:
    def direct_membership(self, edges, value):
        if value < edges[0] or value >= edges[-1]:
            return None
        return f"S{bisect_right(edges, value) - 1}"

    def test_overlap_rejection_and_membership_agreement(self):
        rng = random.Random(88)
        with budget(5):
            for i in range(500):
                overlapped = i % 2 == 1
                scale, edges = random_interval_scale(rng, overlap=overlapped)
                ranks = {
                    f"S{k}": k for k in range(len(scale.propositions))
                }
                errors = [
                    v for v in validate_scale(scale, ranks)
                    if v.severity == "error"
                ]
                if overlapped:
                    assert any(v.code == "prop-overlap" for v in errors), i
                    continue
                assert errors == [], i
                classifier = Classifier(root=scale)
                probes = [rng.uniform(-2.0, edges[-1] + 2.0)
                          for _ in range(12)]
                probes.extend(rng.choice(edges) for _ in range(4))
                for value in probes:
                    assert classify(classifier, (value,)) == (
                        self.direct_membership(edges, value)
                    ), (i, value)


class TestMonitoringClosure:
    def test_reingesting_a_run_reproduces_counters_and_occupancy(self):
        rng = random.Random(909)
        with budget(10):
            for i in range(50):
                model = random_single_level_model(rng, diagram_id=f"m{i}")
                scenario = random_scenario(rng, model, f"sc{i}")
                trajectory = run(model, scenario)
                diagram = next(iter(model.diagrams.values()))
                classifier = interval_classifier_for(diagram)
                records = records_from_trajectory(
                    trajectory, model, classifier
                )
                result = ingest_monitoring(
                    records, model, classifier, horizon=trajectory.horizon
                )
                # skip arcs legitimately jump more than one rank; those
                # samples are flagged for attention but still counted, so
                # they must be the only anomaly kind present
                assert all(
                    a.kind == "rank-jump" for a in result.anomalies
                ), result.anomalies
                expected = trajectory.dynamics[diagram.id]
                got = result.dynamics[diagram.id]
                assert got.transition_counts == expected.transition_counts
                assert got.occupancy == expected.occupancy
                assert got.in_transit == expected.in_transit


class TestCompositionAlgebra:
    def assert_no_errors(self, violations):
        assert [v for v in violations if v.severity == "error"] == []

    def test_sequential_parallel_and_aggregation_laws(self):
        rng = random.Random(1010)
        with budget(5):
            for i in range(100):
                self.check_sequential(rng, i)
                self.check_parallel(rng, i)
                self.check_aggregation_witness(rng, i)

    def check_sequential(self, rng, i):
        population = rng.randint(1, 20)
        first = random_chain_diagram(
            rng, f"left{i}", population=population,
            state_prefix="A", arc_prefix="a",
        )
        second = random_chain_diagram(
            rng, f"right{i}", population=population,
            state_prefix="B", arc_prefix="b",
        )
        while second.horizon == first.horizon:
            second = random_chain_diagram(
                rng, f"right{i}", population=population,
                state_prefix="B", arc_prefix="b",
            )
        if second.horizon < first.horizon:
            first, second = second, first
        chained = compose_sequential(first, second)
        assert len(chained.states) == (
            len(first.states) + len(second.states) - 1
        )
        assert chained.horizon == first.horizon + second.horizon
        self.assert_no_errors(validate_canonical(chained))

    def check_parallel(self, rng, i):
        left = random_chain_diagram(
            rng, f"par-a{i}", n_states=rng.randint(2, 4),
            state_prefix="A", arc_prefix="a",
        )
        horizon = left.horizon
        n_right = rng.randint(2, min(4, horizon + 1))
        if n_right > 2:
            inner = sorted(rng.sample(range(1, horizon), n_right - 2))
        else:
            inner = []
        right = random_chain_diagram(
            rng, f"par-b{i}", n_states=n_right,
            state_prefix="B", arc_prefix="b",
            boundaries=[0] + inner + [horizon],
        )
        composite = compose_parallel(left, right)
        assert composite.state_count == len(left.states) * len(right.states)
        merged = sorted(
            set(left.partition.boundaries) | set(right.partition.boundaries)
        )
        assert list(composite.partition.boundaries) == merged
        for mark in composite.boundary_distributions:
            assert abs(sum(mark.fractions.values()) - 1.0) < 1e-9

    def check_aggregation_witness(self, rng, i):
        n = rng.randint(2, 4)
        width = rng.randint(2, 3)
        children = [
            random_chain_diagram(rng, f"c{i}_{j}", n_states=n,
                                 allow_extras=False, population=1)
            for j in range(width)
        ]
        parent = random_chain_diagram(rng, f"p{i}", n_states=n,
                                      allow_extras=False, population=1)
        clean = min_aggregation([c.id for c in children], n)
        assert validate_aggregation(children, clean, parent) == []

        # moving the all-bottom combination into the top block must always
        # surface a monotonicity witness
        bottom = ("S0",) * width
        blocks = {p: set(c) for p, c in clean.blocks.items()}
        blocks["S0"].discard(bottom)
        blocks.setdefault(f"S{n - 1}", set()).add(bottom)
        corrupted = AggregationMap(
            child_order=clean.child_order,
            blocks={p: frozenset(c) for p, c in blocks.items() if c},
        )
        violations = validate_aggregation(children, corrupted, parent)
        witnesses = [v for v in violations if v.code == "agg-not-monotone"]
        assert witnesses, i
        mapped = {
            combo: p for p, combos in corrupted.blocks.items()
            for combo in combos
        }
        for violation in witnesses:
            lower, higher = violation.subjects
            assert all(
                int(a[1:]) <= int(b[1:]) for a, b in zip(lower, higher)
            )
            assert int(mapped[lower][1:]) > int(mapped[higher][1:])


class TestCliDeterminism:
    def test_twenty_runs_hash_identically(self, tmp_path):
        model_path = tmp_path / "demo3.scm"
        model_path.write_text(DEMO3_TEXT)
        out_path = tmp_path / "report.json"
        with budget(5):
            digests = set()
            for _ in range(20):
                code = main([
                    "run", str(model_path),
                    "--scenario", "full",
                    "--out", str(out_path),
                ])
                assert code == 0
                digests.add(
                    hashlib.sha256(out_path.read_bytes()).hexdigest()
                )
            assert len(digests) == 1
