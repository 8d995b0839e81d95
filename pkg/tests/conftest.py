"""Shared fixtures: the three-state demo diagram, a two-level parent/child
model with one coupled arc, and the three-rule planning base."""

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
from statecraft.hierarchy import AggregationMap, ControlSymbol, CoupledArc, SymbolKind, assemble
from statecraft.planner import TransitionRule


def make_demo3(dwell_s1=None):
    """Three ranked states, two forward arcs, one backstep."""
    return CanonicalDiagram(
        id="demo3",
        partition=TimePartition((0, 2, 4)),
        states=(
            StateNode("S0", rank=0, interval=0, role=Role.INITIAL),
            StateNode("S1", rank=1, interval=1, dwell_limit=dwell_s1),
            StateNode("S2", rank=2, interval=2, role=Role.FINAL),
        ),
        arcs=(
            Arc("a01", "S0", "S1", ArcKind.FORWARD, 1),
            Arc("a12", "S1", "S2", ArcKind.FORWARD, 1),
            Arc("b10", "S1", "S0", ArcKind.BACKSTEP, 0),
        ),
        boundary_distributions=(
            Distribution({"S0": 1.0}),
            Distribution({"S1": 1.0}),
            Distribution({"S2": 1.0}),
        ),
        population=4,
    )


def make_demo2():
    """Two-state diagram with a longer timeline, used for chaining."""
    return CanonicalDiagram(
        id="demo2",
        partition=TimePartition((0, 6)),
        states=(
            StateNode("T0", rank=0, interval=0, role=Role.INITIAL),
            StateNode("T1", rank=1, interval=1, role=Role.FINAL),
        ),
        arcs=(Arc("c01", "T0", "T1", ArcKind.FORWARD, 1),),
        boundary_distributions=(
            Distribution({"T0": 1.0}),
            Distribution({"T1": 1.0}),
        ),
        population=4,
    )


def demo3_symbols():
    return (
        ControlSymbol("x01", SymbolKind.INDIVIDUAL, "demo3", "a01", cost=1.0),
        ControlSymbol("x12", SymbolKind.INDIVIDUAL, "demo3", "a12", cost=1.0),
    )


def make_demo3_model(dwell_s1=None):
    return assemble(
        diagrams=[make_demo3(dwell_s1)],
        topology={},
        aggregations={},
        couplings=(),
        symbols=demo3_symbols(),
    )


def two_state_child(diagram_id):
    return CanonicalDiagram(
        id=diagram_id,
        partition=TimePartition((0, 2)),
        states=(
            StateNode("S0", rank=0, interval=0, role=Role.INITIAL),
            StateNode("S1", rank=1, interval=1, role=Role.FINAL),
        ),
        arcs=(Arc("a01", "S0", "S1", ArcKind.FORWARD, 1),),
        boundary_distributions=(
            Distribution({"S0": 1.0}),
            Distribution({"S1": 1.0}),
        ),
        population=1,
    )


def make_parent_child_model(quorum=2):
    """Parent diagram over two children, coupled through the parent arc."""
    parent = CanonicalDiagram(
        id="root",
        partition=TimePartition((0, 2)),
        states=(
            StateNode("P0", rank=0, interval=0, role=Role.INITIAL),
            StateNode("P1", rank=1, interval=1, role=Role.FINAL),
        ),
        arcs=(Arc("p01", "P0", "P1", ArcKind.FORWARD, 1),),
        boundary_distributions=(
            Distribution({"P0": 1.0}),
            Distribution({"P1": 1.0}),
        ),
        population=1,
    )
    children = [two_state_child("c1"), two_state_child("c2")]
    agg = AggregationMap(
        child_order=("c1", "c2"),
        blocks={
            "P0": frozenset({("S0", "S0")}),
            "P1": frozenset({("S1", "S0"), ("S0", "S1"), ("S1", "S1")}),
        },
    )
    coupling = CoupledArc(
        id="cpl1",
        parent_diagram="root",
        parent_arc="p01",
        children=(("c1", "a01"), ("c2", "a01")),
        quorum=quorum,
    )
    symbols = (
        ControlSymbol("g", SymbolKind.GENERAL, "root", "p01", cost=1.0),
        ControlSymbol("x_c1", SymbolKind.INDIVIDUAL, "c1", "a01", cost=1.0),
        ControlSymbol("x_c2", SymbolKind.INDIVIDUAL, "c2", "a01", cost=1.0),
    )
    return assemble(
        diagrams=[parent] + children,
        topology={"root": ("c1", "c2")},
        aggregations={"root": agg},
        couplings=(coupling,),
        symbols=symbols,
    )


def planner_rules():
    return (
        TransitionRule("r1", "S0", "S1", control="u1", resource=2, duration=1),
        TransitionRule("r2", "S1", "S2", control="u2", resource=3, duration=2,
                       forbidden_backstep="S0"),
        TransitionRule("r3", "S0", "S2", control="u3", resource=6, duration=2),
    )


@pytest.fixture
def demo3():
    return make_demo3()


@pytest.fixture
def demo2():
    return make_demo2()


@pytest.fixture
def demo3_model():
    return make_demo3_model()


@pytest.fixture
def parent_child_model():
    return make_parent_child_model()


@pytest.fixture
def rules():
    return planner_rules()
