"""Scenario execution: stepping phases, trajectories, metrics, efficiency
series, partial criteria, and report comparison."""

import pytest

from statecraft.core import (
    Arc,
    ArcKind,
    CanonicalDiagram,
    Distribution,
    Role,
    StateNode,
    TimePartition,
)
from statecraft.engine import (
    ComparisonResult,
    ControlScenario,
    CriterionConfig,
    PartialCriterion,
    ScenarioReport,
    SimState,
    SupportPoint,
    TimeDiagram,
    check_partial,
    compare,
    efficiency_vectors,
    evaluate,
    run,
    run_inertial,
    step,
)
from statecraft.errors import (
    ModelMismatch,
    PreconditionViolated,
    TrajectoryModelMismatch,
    UnknownSupportState,
    UnknownSymbol,
)
from statecraft.hierarchy import ControlSymbol, SymbolKind, assemble

from conftest import make_demo3, make_demo3_model, make_parent_child_model
from oracles import recount_metrics, replay_occupancy


def demo3_scenario(horizon=4):
    return ControlScenario(
        "full", TimeDiagram({0: {"x01"}, 2: {"x12"}}), horizon
    )


def slow_cycler_model():
    """One object bouncing: a dwell limit of 1 on the middle state sends it
    straight back, so re-driving the first arc revisits states."""
    diagram = CanonicalDiagram(
        id="cycler",
        partition=TimePartition((0, 8)),
        states=(
            StateNode("S0", rank=0, interval=0, role=Role.INITIAL),
            StateNode("S1", rank=1, interval=0, dwell_limit=1),
            StateNode("S2", rank=2, interval=0, role=Role.FINAL),
        ),
        arcs=(
            Arc("a01", "S0", "S1", ArcKind.FORWARD, 1),
            Arc("a12", "S1", "S2", ArcKind.FORWARD, 1),
            Arc("b10", "S1", "S0", ArcKind.BACKSTEP, 0),
        ),
        boundary_distributions=(
            Distribution({"S0": 1.0}),
            Distribution({"S2": 1.0}),
        ),
        population=1,
    )
    symbols = (
        ControlSymbol("x01", SymbolKind.INDIVIDUAL, "cycler", "a01"),
        ControlSymbol("x12", SymbolKind.INDIVIDUAL, "cycler", "a12"),
    )
    return assemble([diagram], {}, {}, (), symbols)


def double_backstep_model():
    """Everything starts in the top state, which has two backstep arcs."""
    diagram = CanonicalDiagram(
        id="drop",
        partition=TimePartition((0, 4)),
        states=(
            StateNode("S0", rank=0, interval=0, role=Role.INITIAL),
            StateNode("S1", rank=1, interval=0),
            StateNode("S2", rank=2, interval=0, role=Role.FINAL,
                      dwell_limit=1),
        ),
        arcs=(
            Arc("a01", "S0", "S1", ArcKind.FORWARD, 1),
            Arc("a12", "S1", "S2", ArcKind.FORWARD, 1),
            Arc("b20", "S2", "S0", ArcKind.BACKSTEP, 0),
            Arc("b21", "S2", "S1", ArcKind.BACKSTEP, 0),
        ),
        boundary_distributions=(
            Distribution({"S2": 1.0}),
            Distribution({"S2": 1.0}),
        ),
        population=2,
    )
    symbols = (
        ControlSymbol("x01", SymbolKind.INDIVIDUAL, "drop", "a01"),
        ControlSymbol("x12", SymbolKind.INDIVIDUAL, "drop", "a12"),
    )
    return assemble([diagram], {}, {}, (), symbols)


# --- running -------------------------------------------------------------------


class TestRun:
    def test_full_run_reaches_the_goal(self):
        model = make_demo3_model()
        scenario = demo3_scenario()
        trajectory = run(model, scenario)
        dyn = trajectory.dynamics["demo3"]
        assert dyn.occupancy["S0"] == (4, 0, 0, 0, 0)
        assert dyn.occupancy["S1"] == (0, 4, 4, 0, 0)
        assert dyn.occupancy["S2"] == (0, 0, 0, 4, 4)
        assert dyn.transition_counts["a01"] == (0, 4, 4, 4, 4)
        assert dyn.transition_counts["a12"] == (0, 0, 0, 4, 4)
        assert dyn.transition_counts["b10"] == (0, 0, 0, 0, 0)

    def test_run_is_deterministic(self):
        model = make_demo3_model()
        first = run(model, demo3_scenario())
        second = run(model, demo3_scenario())
        assert first.events == second.events
        assert first.dynamics == second.dynamics

    def test_empty_schedule_equals_inertial(self):
        model = make_demo3_model()
        empty = run(model, ControlScenario("inertial", TimeDiagram({}), 4))
        inertial = run_inertial(model, 4)
        assert empty.events == inertial.events
        assert empty.dynamics == inertial.dynamics
        assert empty.modal == inertial.modal

    def test_vacuous_application_is_logged(self):
        model = make_demo3_model()
        scenario = ControlScenario("vac", TimeDiagram({0: {"x12"}}), 4)
        trajectory = run(model, scenario)
        kinds = [e.kind for e in trajectory.events]
        assert kinds == ["vacuous"]
        assert trajectory.dynamics["demo3"].occupancy["S0"] == (4, 4, 4, 4, 4)
        # the application still spends its cost
        assert trajectory.resource_total == 1.0

    def test_unknown_symbol_raises(self):
        model = make_demo3_model()
        scenario = ControlScenario("bad", TimeDiagram({0: {"ghost"}}), 4)
        with pytest.raises(UnknownSymbol):
            run(model, scenario)

    def test_applied_series_mirrors_the_schedule(self):
        model = make_demo3_model()
        trajectory = run(model, demo3_scenario())
        assert trajectory.applied["demo3"][0] == ("x01",)
        assert trajectory.applied["demo3"][2] == ("x12",)
        assert trajectory.applied["demo3"][1] == ()

    def test_preflight_rejections(self):
        model = make_demo3_model()
        with pytest.raises(PreconditionViolated):
            run(model, ControlScenario("h", TimeDiagram({}), 99))
        with pytest.raises(PreconditionViolated):
            run(model, ControlScenario("t", TimeDiagram({9: {"x01"}}), 4))
        with pytest.raises(PreconditionViolated):
            run(model, ControlScenario("p", TimeDiagram({}), 4, priority=-1))

    def test_scenario_model_hash_is_enforced(self):
        model = make_demo3_model()
        scenario = ControlScenario(
            "pinned", TimeDiagram({}), 4, model_hash="not-this-model"
        )
        with pytest.raises(ModelMismatch):
            run(model, scenario)

    def test_step_leaves_its_input_untouched(self):
        model = make_demo3_model()
        state = SimState.initial(model)
        before_locations = dict(state.state_of["demo3"])
        nxt, events = step(model, state, 0, {"x01"})
        assert state.state_of["demo3"] == before_locations
        assert state.in_flight["demo3"] == []
        assert nxt.in_flight["demo3"] != []
        assert [e.kind for e in events] == ["symbol", "depart"]


class TestInertial:
    def test_occupancy_stays_at_the_start(self):
        model = make_demo3_model()
        trajectory = run_inertial(model)
        dyn = trajectory.dynamics["demo3"]
        assert dyn.occupancy["S0"] == (4, 4, 4, 4, 4)
        assert all(v == 0 for v in dyn.occupancy["S1"])

    def test_forward_counters_stay_zero(self):
        model = make_parent_child_model()
        trajectory = run_inertial(model)
        for diagram_id, dyn in trajectory.dynamics.items():
            for arc in dyn.diagram.forward_arcs:
                assert dyn.transition_counts[arc.id] == tuple(
                    0 for _ in range(trajectory.horizon + 1)
                ), (diagram_id, arc.id)
        assert not [e for e in trajectory.events if e.kind == "propagate"]

    def test_dwell_limit_forces_the_backstep(self):
        base = make_demo3(dwell_s1=2)
        diagram = CanonicalDiagram(
            id=base.id,
            partition=base.partition,
            states=base.states,
            arcs=base.arcs,
            boundary_distributions=(Distribution({"S1": 1.0}),)
            + base.boundary_distributions[1:],
            population=4,
        )
        model = assemble(
            [diagram], {}, {}, (),
            (
                ControlSymbol("x01", SymbolKind.INDIVIDUAL, "demo3", "a01"),
                ControlSymbol("x12", SymbolKind.INDIVIDUAL, "demo3", "a12"),
            ),
        )
        trajectory = run_inertial(model)
        dyn = trajectory.dynamics["demo3"]
        assert dyn.occupancy["S1"] == (4, 4, 0, 0, 0)
        assert dyn.occupancy["S0"] == (0, 0, 4, 4, 4)
        assert dyn.transition_counts["b10"] == (0, 0, 4, 4, 4)
        assert trajectory.backstep_count == 4


class TestBacksteps:
    def test_tie_break_picks_the_lowest_ranked_target(self):
        model = double_backstep_model()
        trajectory = run_inertial(model)
        dyn = trajectory.dynamics["drop"]
        assert dyn.occupancy["S0"][1] == 2
        assert dyn.occupancy["S1"][1] == 0

    def test_suppression_diverts_to_the_next_target(self):
        model = double_backstep_model()
        scenario = ControlScenario(
            "divert", TimeDiagram({}), 4,
            suppressed_backsteps={("drop", "S0")},
        )
        trajectory = run(model, scenario)
        dyn = trajectory.dynamics["drop"]
        assert dyn.occupancy["S1"][1] == 2
        assert dyn.occupancy["S0"][1] == 0

    def test_suppressing_every_target_means_waiting(self):
        model = double_backstep_model()
        scenario = ControlScenario(
            "wait", TimeDiagram({}), 4,
            suppressed_backsteps={("drop", "S0"), ("drop", "S1")},
        )
        trajectory = run(model, scenario)
        assert trajectory.backstep_count == 0
        assert trajectory.dynamics["drop"].occupancy["S2"] == (2, 2, 2, 2, 2)


class TestCoupledRuns:
    def test_quorum_propagation_fires_the_parent(self):
        model = make_parent_child_model()
        scenario = ControlScenario(
            "quorum", TimeDiagram({0: {"x_c1", "x_c2"}}), 2
        )
        trajectory = run(model, scenario)
        assert trajectory.dynamics["root"].occupancy["P1"] == (0, 0, 1)
        assert [e.kind for e in trajectory.events if e.diagram == "root"] == [
            "propagate", "arrive"
        ]
        assert trajectory.redundancy_count == 0

    def test_partial_quorum_does_not_fire(self):
        model = make_parent_child_model()
        scenario = ControlScenario("half", TimeDiagram({0: {"x_c1"}}), 2)
        trajectory = run(model, scenario)
        assert trajectory.dynamics["root"].occupancy["P1"] == (0, 0, 0)
        assert trajectory.redundancy_count == 0

    def test_quorum_of_one_fires_on_the_first_completion(self):
        model = make_parent_child_model(quorum=1)
        scenario = ControlScenario("one", TimeDiagram({0: {"x_c1"}}), 2)
        trajectory = run(model, scenario)
        assert trajectory.dynamics["root"].occupancy["P1"] == (0, 0, 1)

    def test_general_symbol_fans_out(self):
        model = make_parent_child_model()
        scenario = ControlScenario("general", TimeDiagram({0: {"g"}}), 2)
        trajectory = run(model, scenario)
        assert trajectory.dynamics["root"].occupancy["P1"] == (0, 1, 1)
        assert trajectory.dynamics["c1"].occupancy["S1"] == (0, 1, 1)
        assert trajectory.dynamics["c2"].occupancy["S1"] == (0, 1, 1)
        assert trajectory.redundancy_count == 1

    def test_co_occurrence_counts_once_per_interval(self):
        model = make_parent_child_model()
        scenario = ControlScenario(
            "co", TimeDiagram({0: {"g", "x_c1"}, 1: {"x_c2"}}), 2
        )
        trajectory = run(model, scenario)
        assert trajectory.redundancy_count == 1


class TestConservationAndReplay:
    def scenarios(self):
        yield make_demo3_model(), demo3_scenario()
        yield make_parent_child_model(), ControlScenario(
            "general", TimeDiagram({0: {"g"}}), 2
        )
        yield make_parent_child_model(), ControlScenario(
            "quorum", TimeDiagram({0: {"x_c1", "x_c2"}}), 2
        )
        yield slow_cycler_model(), ControlScenario(
            "bounce", TimeDiagram({0: {"x01"}, 3: {"x01"}}), 8
        )
        yield double_backstep_model(), ControlScenario(
            "drop", TimeDiagram({}), 4
        )

    def test_conservation_holds_at_every_tick(self):
        for model, scenario in self.scenarios():
            trajectory = run(model, scenario)
            for diagram_id, dyn in trajectory.dynamics.items():
                population = model.diagrams[diagram_id].population
                for t in range(trajectory.horizon + 1):
                    placed = sum(
                        dyn.occupancy[s][t] for s in dyn.occupancy
                    )
                    assert placed + dyn.in_transit[t] == population

    def test_event_log_replay_reproduces_the_series(self):
        for model, scenario in self.scenarios():
            trajectory = run(model, scenario)
            occupancy, transit = replay_occupancy(model, trajectory)
            for diagram_id, dyn in trajectory.dynamics.items():
                for state, series in dyn.occupancy.items():
                    assert tuple(occupancy[diagram_id][state]) == series, (
                        scenario.id, diagram_id, state
                    )
                assert tuple(transit[diagram_id]) == dyn.in_transit

    def test_metrics_match_the_independent_recount(self):
        for model, scenario in self.scenarios():
            trajectory = run(model, scenario)
            report = evaluate(trajectory, scenario)
            recount = recount_metrics(model, trajectory)
            assert report.complete == recount["complete"]
            assert report.redundancy_count == recount["redundancy_count"]
            assert report.omitted_ratio == recount["omitted_ratio"]
            assert report.complexness == recount["complexness"]
            assert report.goal_times == recount["goal_times"]
            assert report.resource_total == recount["resource_total"]
            assert report.divergence == recount["divergence"]


class TestEvaluate:
    def test_full_run_report(self):
        model = make_demo3_model()
        scenario = demo3_scenario()
        report = evaluate(run(model, scenario), scenario)
        assert report.complete
        assert report.goal_times == {"demo3": 3}
        assert report.redundancy_count == 0
        assert report.omitted_ratio == 0.0
        assert report.complexness == 0.0
        assert report.resource_total == 2.0
        assert report.divergence == {"demo3": {0: 0.0, 1: 0.0, 2: 0.0}}

    def test_coupled_run_is_maximally_complex(self):
        model = make_parent_child_model()
        scenario = ControlScenario("general", TimeDiagram({0: {"g"}}), 2)
        report = evaluate(run(model, scenario), scenario)
        assert report.complete
        assert report.complexness == 1.0

    def test_horizon_zero_run(self):
        model = make_demo3_model()
        scenario = ControlScenario("frozen", TimeDiagram({}), 0)
        report = evaluate(run(model, scenario), scenario)
        assert not report.complete
        assert report.omitted_ratio == 0.0
        assert report.complexness == 0.0

    def test_omitted_ratio_counts_revisited_sources(self):
        model = slow_cycler_model()
        scenario = ControlScenario(
            "bounce", TimeDiagram({0: {"x01"}, 3: {"x01"}}), 8
        )
        trajectory = run(model, scenario)
        report = evaluate(trajectory, scenario)
        assert trajectory.backstep_count == 2
        assert trajectory.omitted_backsteps == 1
        assert report.omitted_ratio == 0.25

    def test_scenario_identity_is_checked(self):
        model = make_demo3_model()
        trajectory = run(model, demo3_scenario())
        with pytest.raises(TrajectoryModelMismatch):
            evaluate(trajectory, ControlScenario("other", TimeDiagram({}), 4))

    def test_divergence_reflects_drift(self):
        model = make_demo3_model()
        scenario = ControlScenario("late", TimeDiagram({0: {"x01"}}), 4)
        report = evaluate(run(model, scenario), scenario)
        # at the last boundary everything sits in S1 instead of S2
        assert report.divergence["demo3"][2] == 2.0


class TestEfficiencyVectors:
    def test_progress_series(self):
        model = make_demo3_model()
        trajectory = run(model, demo3_scenario())
        u, s, w = efficiency_vectors(trajectory, CriterionConfig(1.0, 0.0))
        assert s["demo3"] == ("S0", "S1", "S1", "S2", "S2")
        assert w["demo3"] == (0.0, 0.5, 0.5, 1.0, 1.0)
        assert u["demo3"][0] == ("x01",)

    def test_inertial_progress_is_flat(self):
        model = make_demo3_model()
        trajectory = run_inertial(model)
        _u, _s, w = efficiency_vectors(trajectory, CriterionConfig(1.0, 0.0))
        assert w["demo3"] == (0.0, 0.0, 0.0, 0.0, 0.0)

    def test_cost_only_criterion(self):
        from statecraft.planner import (
            enumerate_plans, plan_to_time_diagram, rules_to_diagram,
        )
        from conftest import planner_rules

        rules = planner_rules()
        diagram, symbols = rules_to_diagram(rules, "S0", "S2")
        model = assemble([diagram], {}, {}, (), symbols)
        plan = enumerate_plans(rules, "S0", "S2")[0]
        scenario = ControlScenario(
            "plan", plan_to_time_diagram(plan, 0), diagram.horizon
        )
        trajectory = run(model, scenario)
        _u, _s, w = efficiency_vectors(trajectory, CriterionConfig(0.0, 1.0))
        assert w[diagram.id][-1] == -5.0

    def test_modal_rank_is_monotone_without_dwell_limits(self):
        model = make_demo3_model()
        trajectory = run(model, demo3_scenario())
        diagram = model.diagrams["demo3"]
        ranks = [diagram.rank_of[s] for s in trajectory.modal["demo3"]]
        assert ranks == sorted(ranks)

    def test_scaling_weights_scales_the_series(self):
        model = make_demo3_model()
        trajectory = run(model, demo3_scenario())
        _, _, w1 = efficiency_vectors(trajectory, CriterionConfig(1.0, 0.5))
        _, _, w2 = efficiency_vectors(trajectory, CriterionConfig(2.0, 1.0))
        for d in w1:
            assert tuple(2 * v for v in w1[d]) == pytest.approx(w2[d])

    def test_default_returns_the_scenario_series(self):
        model = make_demo3_model()
        scenario = ControlScenario(
            "weighted", TimeDiagram({0: {"x01"}, 2: {"x12"}}), 4,
            criterion=CriterionConfig(1.0, 0.0),
        )
        trajectory = run(model, scenario)
        u, s, w = efficiency_vectors(trajectory)
        assert w == trajectory.criterion
        assert u == trajectory.applied
        assert s == trajectory.modal


class TestCheckPartial:
    def run_demo3(self):
        model = make_demo3_model()
        scenario = demo3_scenario()
        return run(model, scenario)

    def test_supports_in_order_confirm(self):
        trajectory = self.run_demo3()
        criterion = PartialCriterion((
            SupportPoint("demo3", "S1", 2),
            SupportPoint("demo3", "S2", 4),
        ))
        assert check_partial(trajectory, criterion).confirmed

    def test_missed_deadline_refutes_with_the_first_failure(self):
        trajectory = self.run_demo3()
        criterion = PartialCriterion((SupportPoint("demo3", "S2", 2),))
        verdict = check_partial(trajectory, criterion)
        assert not verdict.confirmed
        assert verdict.failed == "demo3:S2"

    def test_empty_support_list_is_vacuously_confirmed(self):
        assert check_partial(self.run_demo3(), PartialCriterion(())).confirmed

    def test_budgets(self):
        trajectory = self.run_demo3()
        tight = PartialCriterion(
            (SupportPoint("demo3", "S2", 4),), resource_budget=1.0
        )
        verdict = check_partial(trajectory, tight)
        assert not verdict.confirmed and verdict.failed == "resource"
        roomy = PartialCriterion(
            (SupportPoint("demo3", "S2", 4),), resource_budget=2.0,
            time_budget=3,
        )
        assert check_partial(trajectory, roomy).confirmed

    def test_unknown_support_state_raises(self):
        trajectory = self.run_demo3()
        with pytest.raises(UnknownSupportState):
            check_partial(
                trajectory,
                PartialCriterion((SupportPoint("demo3", "S9", 2),)),
            )
        with pytest.raises(UnknownSupportState):
            check_partial(
                trajectory,
                PartialCriterion((SupportPoint("ghost", "S1", 2),)),
            )

    def test_deadlines_must_be_ordered(self):
        with pytest.raises(PreconditionViolated):
            check_partial(
                self.run_demo3(),
                PartialCriterion((
                    SupportPoint("demo3", "S2", 4),
                    SupportPoint("demo3", "S1", 2),
                )),
            )


def make_report(scenario_id, complete=True, resource=5.0, goal=3,
                omitted=0.0, model_hash="m"):
    return ScenarioReport(
        scenario_id=scenario_id,
        model_hash=model_hash,
        horizon=4,
        priority=0,
        complete=complete,
        redundancy_count=0,
        omitted_ratio=omitted,
        complexness=0.0,
        goal_times={"d": goal},
        resource_total=resource,
        divergence={},
    )


class TestCompare:
    def test_mutually_nondominated_reports_share_the_frontier(self):
        result = compare([
            make_report("a", resource=5.0, goal=3),
            make_report("b", resource=6.0, goal=2),
        ])
        assert result.frontier == {"a", "b"}
        assert result.order == ("b", "a")

    def test_complete_reports_rank_first(self):
        result = compare([
            make_report("cheap", complete=False, resource=1.0, goal=None),
            make_report("done", resource=5.0, goal=3),
        ])
        assert result.order == ("done", "cheap")

    def test_dominated_reports_fall_behind_the_frontier(self):
        result = compare([
            make_report("good", resource=5.0, goal=3),
            make_report("worse", resource=6.0, goal=3),
            make_report("fast", resource=6.0, goal=2),
        ])
        assert result.frontier == {"good", "fast"}
        assert result.order == ("fast", "good", "worse")

    def test_identical_reports_tie_break_on_id(self):
        result = compare([make_report("b"), make_report("a")])
        assert result.order == ("a", "b")
        assert result.frontier == {"a", "b"}

    def test_reports_must_share_a_model(self):
        with pytest.raises(ModelMismatch):
            compare([
                make_report("a", model_hash="m1"),
                make_report("b", model_hash="m2"),
            ])

    def test_result_is_a_comparison(self):
        result = compare([make_report("solo")])
        assert isinstance(result, ComparisonResult)
        assert result.order == ("solo",)
