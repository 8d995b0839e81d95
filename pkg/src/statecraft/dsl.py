"""Line-oriented model text: parsing, cross-reference checking, and
serialization.

A model document is a sequence of blocks, each opened by a header line and
closed by a line consisting of the single word ``end``.  Blank lines are
ignored and ``#`` starts a comment that runs to the end of the line.
Indentation is free.  The blocks:

``diagram <id>``
    ``population <int>`` --- object count (required).
    ``partition <tick> <tick> ...`` --- boundary ticks (required).
    ``state <id> rank <int> interval <int> [role initial|final] [dwell <int>]``
    ``arc <id> <source> -> <target> forward|backstep [transit <int>]``
    ``mark <boundary-index> [<state> <fraction>]...`` --- one per boundary.

``scale <id> for <diagram> [refines <proposition>]``
    ``prop <id> [<param> <lo|*> <hi|*>]+ -> <state|*>`` --- half-open
    interval per parameter index; ``*`` leaves a bound open or the
    proposition unmapped.  A diagram's scales form its classifier: the one
    scale without ``refines`` is the root.

``topology``
    ``child <diagram> of <diagram>``

``aggregation <parent-diagram>``
    ``order <child-diagram> ...`` --- component order of combinations.
    ``block <parent-state> <combo> [<combo> ...]`` --- combo is child
    states joined by commas, e.g. ``S1,S0``.

``coupling <id> on <diagram> <arc>``
    ``quorum <int|all>``
    ``child <diagram> <arc>``

``symbols``
    ``symbol <id> individual|general <diagram> <arc> [cost <float>]``

``rules``
    ``rule <id> <source> -> <target> [control <name>] [resource <float>]
    [duration <int>] [forbid <state>]``

``objectives``
    ``node <id> all|any [<child> ...]``
    ``node <id> k <threshold> [<child> ...]``
    ``node <id> goal <diagram> <state>``
    The first declared node is the tree root.

``scenario <id>``
    ``horizon <int>`` (required), ``priority <int>``,
    ``criterion <rank> <resource> [<time>]``,
    ``suppress <diagram> <state>``, ``at <tick> <symbol> [<symbol> ...]``.

Parsing either returns a :class:`ModelDocument` or raises
:class:`~statecraft.errors.ModelSyntaxError` carrying diagnostics with
stable ``E_`` codes and 1-based line/column positions; a rejected text
never yields a partial document.  ``serialize_model`` inverts ``parse_model``
up to comments and layout: the serialized text parses to an equal document.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from .classify import Classifier, Predicate, Proposition, Scale
from .core import (
    Arc,
    ArcKind,
    CanonicalDiagram,
    Distribution,
    Role,
    StateNode,
    TimePartition,
)
from .engine import ControlScenario, CriterionConfig, TimeDiagram
from .errors import ModelSyntaxError
from .hierarchy import (
    AggregationMap,
    ControlSymbol,
    CoupledArc,
    SymbolKind,
    assemble,
)
from .planner import (
    RULE_ALL,
    RULE_ANY,
    RULE_K_OF_N,
    ObjectiveNode,
    ObjectivesTree,
    TransitionRule,
)

E_EMPTY = "E_EMPTY"
E_SYNTAX = "E_SYNTAX"
E_UNKNOWN_BLOCK = "E_UNKNOWN_BLOCK"
E_UNTERMINATED = "E_UNTERMINATED"
E_STRAY = "E_STRAY"
E_DUP_ID = "E_DUP_ID"
E_DUP_MARK = "E_DUP_MARK"
E_UNDEF_STATE = "E_UNDEF_STATE"
E_UNDEF_DIAGRAM = "E_UNDEF_DIAGRAM"
E_UNDEF_PROP = "E_UNDEF_PROP"
E_UNDEF_NODE = "E_UNDEF_NODE"
E_UNDEF_SYMBOL = "E_UNDEF_SYMBOL"
E_BAD_NUMBER = "E_BAD_NUMBER"
E_BAD_INDEX = "E_BAD_INDEX"
E_BAD_VALUE = "E_BAD_VALUE"
E_MISSING = "E_MISSING"


@dataclass(frozen=True)
class Diagnostic:
    """One parse problem, locatable in the source text."""

    code: str
    message: str
    line: int
    column: int = 1

    def __str__(self) -> str:
        return f"{self.line}:{self.column} {self.code} {self.message}"

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "line": self.line,
            "column": self.column,
        }


@dataclass(frozen=True)
class ScaleDecl:
    """One scale block: its id, owning diagram, optional refined
    proposition, and the scale itself."""

    id: str
    diagram: str
    scale: Scale
    refines: Optional[str] = None


@dataclass(frozen=True)
class ModelDocument:
    """Parsed model text.  ``locations`` maps ``kind:qualified-id`` to the
    (line, column) where the entity was declared; it is excluded from
    equality so that serialize/parse round trips compare equal."""

    diagrams: tuple = ()
    scales: tuple = ()
    topology: Mapping = field(default_factory=dict)
    aggregations: Mapping = field(default_factory=dict)
    couplings: tuple = ()
    symbols: tuple = ()
    rules: tuple = ()
    objectives: Optional[ObjectivesTree] = None
    scenarios: Mapping = field(default_factory=dict)
    locations: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "diagrams", tuple(self.diagrams))
        object.__setattr__(self, "scales", tuple(self.scales))
        object.__setattr__(
            self,
            "topology",
            {k: tuple(v) for k, v in dict(self.topology).items()},
        )
        object.__setattr__(self, "aggregations", dict(self.aggregations))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "scenarios", dict(self.scenarios))
        object.__setattr__(self, "locations", dict(self.locations))

    def classifiers(self) -> dict:
        """Per-diagram classifier built from this document's scales."""
        out: dict = {}
        for decl in self.scales:
            if decl.refines is None:
                refinements = {
                    other.refines: other.scale
                    for other in self.scales
                    if other.diagram == decl.diagram and other.refines
                }
                out[decl.diagram] = Classifier(decl.scale, refinements)
        return out

    def assemble_model(self):
        """Build the runnable model; raises AssemblyRejected on failure."""
        return assemble(
            self.diagrams,
            self.topology,
            self.aggregations,
            self.couplings,
            self.symbols,
        )


_TOKEN_RE = re.compile(r"\S+")
_BLOCK_HEADS = frozenset({
    "diagram", "scale", "topology", "aggregation", "coupling",
    "symbols", "rules", "objectives", "scenario",
})


@dataclass
class _Line:
    number: int
    tokens: list  # of (text, column)

    @property
    def head(self):
        return self.tokens[0][0]

    @property
    def col(self):
        return self.tokens[0][1]


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.diagnostics: list = []
        self.locations: dict = {}
        self.diagrams: list = []
        self.scales: list = []
        self.topology: dict = {}
        self.aggregations: dict = {}
        self.couplings: list = []
        self.symbols: list = []
        self.rules: list = []
        self.objective_nodes: list = []
        self.scenarios: dict = {}

    # -- helpers ----------------------------------------------------------

    def error(self, code, message, line, column=1):
        self.diagnostics.append(Diagnostic(code, message, line, column))

    def _int(self, token, col, line, what):
        try:
            return int(token)
        except ValueError:
            self.error(E_BAD_NUMBER, f"{what}: not an integer: {token!r}",
                       line, col)
            return None

    def _float(self, token, col, line, what):
        try:
            return float(token)
        except ValueError:
            self.error(E_BAD_NUMBER, f"{what}: not a number: {token!r}",
                       line, col)
            return None

    def _options(self, tokens, line, allowed):
        """Parse trailing ``key value`` pairs; returns {key: (value, col)}."""
        out = {}
        i = 0
        while i < len(tokens):
            key, col = tokens[i]
            if key not in allowed:
                self.error(E_SYNTAX, f"unexpected token {key!r}", line, col)
                return out
            if i + 1 >= len(tokens):
                self.error(E_SYNTAX, f"{key} needs a value", line, col)
                return out
            if key in out:
                self.error(E_SYNTAX, f"duplicate option {key}", line, col)
            out[key] = (tokens[i + 1][0], tokens[i + 1][1])
            i += 2
        return out

    # -- block grouping ----------------------------------------------------

    def _blocks(self):
        """Group physical lines into (header line, body lines) pairs."""
        blocks = []
        header: Optional[_Line] = None
        body: list = []
        for number, raw in enumerate(self.text.splitlines(), start=1):
            stripped = raw.split("#", 1)[0]
            tokens = [(m.group(), m.start() + 1)
                      for m in _TOKEN_RE.finditer(stripped)]
            if not tokens:
                continue
            line = _Line(number, tokens)
            if header is None:
                if line.head == "end":
                    self.error(E_STRAY, "'end' outside any block",
                               number, line.col)
                elif line.head in _BLOCK_HEADS:
                    header = line
                    body = []
                else:
                    self.error(
                        E_UNKNOWN_BLOCK,
                        f"unknown block {line.head!r}", number, line.col,
                    )
            else:
                if line.head == "end":
                    blocks.append((header, body))
                    header = None
                else:
                    body.append(line)
        if header is not None:
            self.error(E_UNTERMINATED,
                       f"block {header.head!r} is never closed",
                       header.number, header.col)
        return blocks

    # -- block builders ----------------------------------------------------

    def parse(self):
        if not self.text.strip():
            self.error(E_EMPTY, "model text is empty", 1)
            return None
        blocks = self._blocks()
        if not blocks and not self.diagnostics:
            self.error(E_EMPTY, "model text declares nothing", 1)
        handlers = {
            "diagram": self._diagram,
            "scale": self._scale,
            "topology": self._topology,
            "aggregation": self._aggregation,
            "coupling": self._coupling,
            "symbols": self._symbols,
            "rules": self._rules,
            "objectives": self._objectives,
            "scenario": self._scenario,
        }
        for header, body in blocks:
            handlers[header.head](header, body)
        self._cross_check()
        if self.diagnostics:
            return None
        objectives = None
        if self.objective_nodes:
            objectives = ObjectivesTree(
                self.objective_nodes[0].id,
                {n.id: n for n in self.objective_nodes},
            )
        return ModelDocument(
            diagrams=tuple(self.diagrams),
            scales=tuple(self.scales),
            topology=self.topology,
            aggregations=self.aggregations,
            couplings=tuple(self.couplings),
            symbols=tuple(self.symbols),
            rules=tuple(self.rules),
            objectives=objectives,
            scenarios=self.scenarios,
            locations=self.locations,
        )

    def _register(self, kind, qualified, line, col):
        key = f"{kind}:{qualified}"
        if key in self.locations:
            self.error(E_DUP_ID, f"duplicate {kind} id {qualified!r}",
                       line, col)
            return False
        self.locations[key] = (line, col)
        return True

    def _header_id(self, header, expected_len=2):
        if len(header.tokens) != expected_len:
            self.error(E_SYNTAX,
                       f"{header.head} header needs an id", header.number,
                       header.col)
            return None
        return header.tokens[1][0]

    def _diagram(self, header, body):
        diagram_id = self._header_id(header)
        if diagram_id is None:
            return
        clean_mark = len(self.diagnostics)
        self._register("diagram", diagram_id, header.number, header.col)
        population = None
        boundaries = None
        states: list = []
        arcs: list = []
        marks: dict = {}
        for line in body:
            kind = line.head
            tokens = line.tokens
            if kind == "population" and len(tokens) == 2:
                population = self._int(tokens[1][0], tokens[1][1],
                                       line.number, "population")
            elif kind == "partition" and len(tokens) >= 2:
                boundaries = []
                for text, col in tokens[1:]:
                    tick = self._int(text, col, line.number, "partition tick")
                    if tick is not None:
                        boundaries.append(tick)
            elif kind == "state" and len(tokens) >= 6:
                self._state_line(diagram_id, line, states)
            elif kind == "arc" and len(tokens) >= 6:
                self._arc_line(diagram_id, line, arcs)
            elif kind == "mark" and len(tokens) >= 4:
                self._mark_line(line, marks)
            else:
                self.error(E_SYNTAX,
                           f"bad diagram line starting {kind!r}",
                           line.number, line.col)
        if population is None:
            self.error(E_MISSING, f"diagram {diagram_id} has no population",
                       header.number, header.col)
        if boundaries is None:
            self.error(E_MISSING, f"diagram {diagram_id} has no partition",
                       header.number, header.col)
        state_ids = {s.id for s in states}
        for arc, line in arcs:
            for endpoint in (arc.source, arc.target):
                if endpoint not in state_ids:
                    self.error(
                        E_UNDEF_STATE,
                        f"arc {arc.id} references undefined state "
                        f"{endpoint!r}",
                        line.number, line.col,
                    )
        distributions = []
        if boundaries is not None:
            for i in range(len(boundaries)):
                if i not in marks:
                    self.error(
                        E_MISSING,
                        f"diagram {diagram_id} has no mark for boundary {i}",
                        header.number, header.col,
                    )
                    continue
                weights, line = marks[i]
                for state in weights:
                    if state not in state_ids:
                        self.error(
                            E_UNDEF_STATE,
                            f"mark {i} references undefined state {state!r}",
                            line.number, line.col,
                        )
                distributions.append(Distribution(weights))
            for i in sorted(marks):
                if i < 0 or i >= len(boundaries):
                    line = marks[i][1]
                    self.error(
                        E_BAD_INDEX,
                        f"mark index {i} out of range for "
                        f"{len(boundaries)} boundaries",
                        line.number, line.col,
                    )
        if len(self.diagnostics) > clean_mark:
            return
        self.diagrams.append(CanonicalDiagram(
            id=diagram_id,
            partition=TimePartition(tuple(boundaries)),
            states=tuple(states),
            arcs=tuple(a for a, _ in arcs),
            boundary_distributions=tuple(distributions),
            population=population,
        ))

    def _state_line(self, diagram_id, line, states):
        tokens = line.tokens
        state_id = tokens[1][0]
        if tokens[2][0] != "rank" or tokens[4][0] != "interval":
            self.error(E_SYNTAX,
                       "state line must read: state <id> rank <n> "
                       "interval <n> ...", line.number, line.col)
            return
        rank = self._int(tokens[3][0], tokens[3][1], line.number, "rank")
        interval = self._int(tokens[5][0], tokens[5][1], line.number,
                             "interval")
        options = self._options(tokens[6:], line.number, ("role", "dwell"))
        role = Role.INTERMEDIATE
        if "role" in options:
            text, col = options["role"]
            if text == "initial":
                role = Role.INITIAL
            elif text == "final":
                role = Role.FINAL
            else:
                self.error(E_BAD_VALUE, f"unknown role {text!r}",
                           line.number, col)
        dwell = None
        if "dwell" in options:
            dwell = self._int(options["dwell"][0], options["dwell"][1],
                              line.number, "dwell")
        if rank is None or interval is None:
            return
        if self._register(
            "state", f"{diagram_id}.{state_id}", line.number, tokens[1][1]
        ):
            states.append(StateNode(state_id, rank, interval, role, dwell))

    def _arc_line(self, diagram_id, line, arcs):
        tokens = line.tokens
        arc_id = tokens[1][0]
        if tokens[3][0] != "->":
            self.error(E_SYNTAX,
                       "arc line must read: arc <id> <src> -> <dst> "
                       "forward|backstep [transit <n>]",
                       line.number, line.col)
            return
        source, target = tokens[2][0], tokens[4][0]
        kind_text, kind_col = tokens[5]
        if kind_text == "forward":
            kind, default_transit = ArcKind.FORWARD, 1
        elif kind_text == "backstep":
            kind, default_transit = ArcKind.BACKSTEP, 0
        else:
            self.error(E_BAD_VALUE, f"unknown arc kind {kind_text!r}",
                       line.number, kind_col)
            return
        options = self._options(tokens[6:], line.number, ("transit",))
        transit = default_transit
        if "transit" in options:
            transit = self._int(options["transit"][0],
                                options["transit"][1], line.number,
                                "transit")
            if transit is None:
                return
        if self._register(
            "arc", f"{diagram_id}.{arc_id}", line.number, tokens[1][1]
        ):
            arcs.append((Arc(arc_id, source, target, kind, transit), line))

    def _mark_line(self, line, marks):
        tokens = line.tokens
        index = self._int(tokens[1][0], tokens[1][1], line.number,
                          "mark index")
        if index is None:
            return
        pairs = tokens[2:]
        if len(pairs) % 2:
            self.error(E_SYNTAX, "mark needs <state> <fraction> pairs",
                       line.number, line.col)
            return
        if index in marks:
            self.error(E_DUP_MARK, f"boundary {index} marked twice",
                       line.number, tokens[1][1])
            return
        weights = {}
        for (state, _scol), (text, col) in zip(pairs[::2], pairs[1::2]):
            value = self._float(text, col, line.number, "mark fraction")
            if value is not None:
                weights[state] = value
        marks[index] = (weights, line)

    def _scale(self, header, body):
        tokens = header.tokens
        if len(tokens) not in (4, 6) or tokens[2][0] != "for" or (
            len(tokens) == 6 and tokens[4][0] != "refines"
        ):
            self.error(E_SYNTAX,
                       "scale header must read: scale <id> for <diagram> "
                       "[refines <prop>]", header.number, header.col)
            return
        scale_id = tokens[1][0]
        diagram_id = tokens[3][0]
        refines = tokens[5][0] if len(tokens) == 6 else None
        if not self._register("scale", scale_id, header.number, header.col):
            return
        propositions: list = []
        state_of: dict = {}
        for line in body:
            if line.head != "prop" or len(line.tokens) < 7:
                self.error(E_SYNTAX,
                           "scale lines must read: prop <id> "
                           "[<param> <lo> <hi>]+ -> <state|*>",
                           line.number, line.col)
                continue
            ltk = line.tokens
            prop_id = ltk[1][0]
            if ltk[-2][0] != "->":
                self.error(E_SYNTAX, "prop line needs '-> <state|*>'",
                           line.number, line.col)
                continue
            bounds = ltk[2:-2]
            if len(bounds) % 3:
                self.error(E_SYNTAX,
                           "prop bounds come in <param> <lo> <hi> triples",
                           line.number, line.col)
                continue
            predicates = []
            ok = True
            for j in range(0, len(bounds), 3):
                param = self._int(bounds[j][0], bounds[j][1], line.number,
                                  "parameter index")
                lo = (None if bounds[j + 1][0] == "*" else
                      self._float(bounds[j + 1][0], bounds[j + 1][1],
                                  line.number, "lower bound"))
                hi = (None if bounds[j + 2][0] == "*" else
                      self._float(bounds[j + 2][0], bounds[j + 2][1],
                                  line.number, "upper bound"))
                if param is None:
                    ok = False
                    continue
                predicates.append(Predicate(param, lo, hi))
            if not ok:
                continue
            propositions.append(Proposition(prop_id, tuple(predicates)))
            state = ltk[-1][0]
            if state != "*":
                state_of[prop_id] = state
        self.scales.append(ScaleDecl(
            scale_id, diagram_id, Scale(tuple(propositions), state_of),
            refines,
        ))

    def _topology(self, header, body):
        if len(header.tokens) != 1:
            self.error(E_SYNTAX, "topology header takes no id",
                       header.number, header.col)
        for line in body:
            tokens = line.tokens
            if (line.head != "child" or len(tokens) != 4
                    or tokens[2][0] != "of"):
                self.error(E_SYNTAX,
                           "topology lines must read: child <diagram> "
                           "of <diagram>", line.number, line.col)
                continue
            child, parent = tokens[1][0], tokens[3][0]
            children = self.topology.setdefault(parent, [])
            children.append(child)
            self.locations.setdefault(
                f"topology:{child}", (line.number, line.col)
            )

    def _aggregation(self, header, body):
        parent_id = self._header_id(header)
        if parent_id is None:
            return
        if not self._register("aggregation", parent_id, header.number,
                              header.col):
            return
        order = None
        blocks: dict = {}
        for line in body:
            tokens = line.tokens
            if line.head == "order" and len(tokens) >= 2:
                order = tuple(t for t, _ in tokens[1:])
            elif line.head == "block" and len(tokens) >= 3:
                parent_state = tokens[1][0]
                combos = blocks.setdefault(parent_state, set())
                for text, _col in tokens[2:]:
                    combos.add(tuple(text.split(",")))
            else:
                self.error(E_SYNTAX,
                           f"bad aggregation line starting {line.head!r}",
                           line.number, line.col)
        if order is None:
            self.error(E_MISSING,
                       f"aggregation {parent_id} has no order line",
                       header.number, header.col)
            return
        self.aggregations[parent_id] = AggregationMap(order, blocks)

    def _coupling(self, header, body):
        tokens = header.tokens
        if len(tokens) != 5 or tokens[2][0] != "on":
            self.error(E_SYNTAX,
                       "coupling header must read: coupling <id> on "
                       "<diagram> <arc>", header.number, header.col)
            return
        coupling_id = tokens[1][0]
        if not self._register("coupling", coupling_id, header.number,
                              header.col):
            return
        parent_diagram, parent_arc = tokens[3][0], tokens[4][0]
        quorum_text, quorum_line = "all", header
        children: list = []
        for line in body:
            ltk = line.tokens
            if line.head == "quorum" and len(ltk) == 2:
                quorum_text, quorum_line = ltk[1][0], line
            elif line.head == "child" and len(ltk) == 3:
                children.append((ltk[1][0], ltk[2][0]))
            else:
                self.error(E_SYNTAX,
                           f"bad coupling line starting {line.head!r}",
                           line.number, line.col)
        if quorum_text == "all":
            quorum = len(children)
        else:
            quorum = self._int(quorum_text, quorum_line.col,
                               quorum_line.number, "quorum")
            if quorum is None:
                return
        self.couplings.append(CoupledArc(
            coupling_id, parent_diagram, parent_arc, tuple(children), quorum,
        ))

    def _symbols(self, header, body):
        for line in body:
            tokens = line.tokens
            if line.head != "symbol" or len(tokens) < 5:
                self.error(E_SYNTAX,
                           "symbol lines must read: symbol <id> "
                           "individual|general <diagram> <arc> "
                           "[cost <float>]", line.number, line.col)
                continue
            symbol_id = tokens[1][0]
            kind_text, kind_col = tokens[2]
            if kind_text == "individual":
                kind = SymbolKind.INDIVIDUAL
            elif kind_text == "general":
                kind = SymbolKind.GENERAL
            else:
                self.error(E_BAD_VALUE,
                           f"unknown symbol kind {kind_text!r}",
                           line.number, kind_col)
                continue
            options = self._options(tokens[5:], line.number, ("cost",))
            cost = 1.0
            if "cost" in options:
                cost = self._float(options["cost"][0], options["cost"][1],
                                   line.number, "cost")
                if cost is None:
                    continue
            if self._register("symbol", symbol_id, line.number,
                              tokens[1][1]):
                self.symbols.append(ControlSymbol(
                    symbol_id, kind, tokens[3][0], tokens[4][0], cost,
                ))

    def _rules(self, header, body):
        for line in body:
            tokens = line.tokens
            if line.head != "rule" or len(tokens) < 5 or tokens[3][0] != "->":
                self.error(E_SYNTAX,
                           "rule lines must read: rule <id> <src> -> <dst> "
                           "[control <name>] [resource <x>] [duration <n>] "
                           "[forbid <state>]", line.number, line.col)
                continue
            rule_id = tokens[1][0]
            options = self._options(
                tokens[5:], line.number,
                ("control", "resource", "duration", "forbid"),
            )
            resource = 0.0
            if "resource" in options:
                resource = self._float(options["resource"][0],
                                       options["resource"][1], line.number,
                                       "resource")
                if resource is None:
                    continue
            duration = 1
            if "duration" in options:
                duration = self._int(options["duration"][0],
                                     options["duration"][1], line.number,
                                     "duration")
                if duration is None:
                    continue
            if self._register("rule", rule_id, line.number, tokens[1][1]):
                self.rules.append(TransitionRule(
                    rule_id, tokens[2][0], tokens[4][0],
                    control=options.get("control", ("", 0))[0],
                    resource=resource,
                    duration=duration,
                    forbidden_backstep=options.get("forbid", (None, 0))[0],
                ))

    def _objectives(self, header, body):
        for line in body:
            tokens = line.tokens
            if line.head != "node" or len(tokens) < 3:
                self.error(E_SYNTAX,
                           "objective lines must read: node <id> "
                           "all|any|k|goal ...", line.number, line.col)
                continue
            node_id = tokens[1][0]
            if not self._register("node", node_id, line.number,
                                  tokens[1][1]):
                continue
            kind_text, kind_col = tokens[2]
            if kind_text == "goal":
                if len(tokens) != 5:
                    self.error(E_SYNTAX,
                               "goal nodes read: node <id> goal <diagram> "
                               "<state>", line.number, line.col)
                    continue
                self.objective_nodes.append(ObjectiveNode(
                    node_id, goal=(tokens[3][0], tokens[4][0]),
                ))
            elif kind_text in ("all", "any"):
                rule = RULE_ALL if kind_text == "all" else RULE_ANY
                children = tuple(t for t, _ in tokens[3:])
                self.objective_nodes.append(ObjectiveNode(
                    node_id, children=children, rule=rule,
                ))
            elif kind_text == "k":
                if len(tokens) < 4:
                    self.error(E_SYNTAX, "k nodes need a threshold",
                               line.number, kind_col)
                    continue
                threshold = self._int(tokens[3][0], tokens[3][1],
                                      line.number, "threshold")
                if threshold is None:
                    continue
                children = tuple(t for t, _ in tokens[4:])
                self.objective_nodes.append(ObjectiveNode(
                    node_id, children=children, rule=RULE_K_OF_N,
                    threshold=threshold,
                ))
            else:
                self.error(E_BAD_VALUE,
                           f"unknown objective rule {kind_text!r}",
                           line.number, kind_col)

    def _scenario(self, header, body):
        scenario_id = self._header_id(header)
        if scenario_id is None:
            return
        if not self._register("scenario", scenario_id, header.number,
                              header.col):
            return
        horizon = None
        priority = 0
        criterion = CriterionConfig()
        suppressed: set = set()
        schedule: dict = {}
        for line in body:
            tokens = line.tokens
            if line.head == "horizon" and len(tokens) == 2:
                horizon = self._int(tokens[1][0], tokens[1][1], line.number,
                                    "horizon")
            elif line.head == "priority" and len(tokens) == 2:
                priority = self._int(tokens[1][0], tokens[1][1], line.number,
                                     "priority")
            elif line.head == "criterion" and len(tokens) in (3, 4):
                weights = [
                    self._float(t, c, line.number, "criterion weight")
                    for t, c in tokens[1:]
                ]
                if None not in weights:
                    weights += [0.0] * (3 - len(weights))
                    criterion = CriterionConfig(*weights)
            elif line.head == "suppress" and len(tokens) == 3:
                suppressed.add((tokens[1][0], tokens[2][0]))
            elif line.head == "at" and len(tokens) >= 3:
                tick = self._int(tokens[1][0], tokens[1][1], line.number,
                                 "tick")
                if tick is not None:
                    bucket = schedule.setdefault(tick, set())
                    bucket.update(t for t, _ in tokens[2:])
            else:
                self.error(E_SYNTAX,
                           f"bad scenario line starting {line.head!r}",
                           line.number, line.col)
        if horizon is None:
            self.error(E_MISSING,
                       f"scenario {scenario_id} has no horizon",
                       header.number, header.col)
            return
        self.scenarios[scenario_id] = ControlScenario(
            scenario_id,
            TimeDiagram({t: frozenset(s) for t, s in schedule.items()}),
            horizon,
            priority=priority,
            criterion=criterion,
            suppressed_backsteps=frozenset(suppressed),
        )

    # -- document-level reference checks ------------------------------------

    def _loc(self, kind, qualified):
        return self.locations.get(f"{kind}:{qualified}", (1, 1))

    def _check_diagram_ref(self, kind, owner, diagram_id, diagram_ids):
        if diagram_id not in diagram_ids:
            line, col = self._loc(kind, owner)
            self.error(E_UNDEF_DIAGRAM,
                       f"{kind} {owner} references undefined diagram "
                       f"{diagram_id!r}", line, col)
            return False
        return True

    def _cross_check(self):
        diagram_ids = {d.id for d in self.diagrams}
        states_of = {d.id: set(d.state_ids) for d in self.diagrams}

        for decl in self.scales:
            if not self._check_diagram_ref("scale", decl.id, decl.diagram,
                                           diagram_ids):
                continue
            line, col = self._loc("scale", decl.id)
            for prop_id, state in decl.scale.state_of.items():
                if state not in states_of[decl.diagram]:
                    self.error(
                        E_UNDEF_STATE,
                        f"scale {decl.id} maps {prop_id} to undefined "
                        f"state {state!r}", line, col,
                    )
            if decl.refines is not None:
                siblings = {
                    p.id
                    for other in self.scales
                    if other.diagram == decl.diagram
                    for p in other.scale.propositions
                    if other.id != decl.id
                }
                if decl.refines not in siblings:
                    self.error(
                        E_UNDEF_PROP,
                        f"scale {decl.id} refines undefined proposition "
                        f"{decl.refines!r}", line, col,
                    )
        roots: dict = {}
        for decl in self.scales:
            if decl.refines is None and decl.diagram in diagram_ids:
                if decl.diagram in roots:
                    line, col = self._loc("scale", decl.id)
                    self.error(
                        E_DUP_ID,
                        f"diagram {decl.diagram} has two root scales "
                        f"({roots[decl.diagram]} and {decl.id})", line, col,
                    )
                roots[decl.diagram] = decl.id

        for parent, children in self.topology.items():
            for child in children:
                for diagram_id in (parent, child):
                    if diagram_id not in diagram_ids:
                        line, col = self._loc("topology", child)
                        self.error(
                            E_UNDEF_DIAGRAM,
                            f"topology references undefined diagram "
                            f"{diagram_id!r}", line, col,
                        )
        for parent_id, aggregation in self.aggregations.items():
            self._check_diagram_ref("aggregation", parent_id, parent_id,
                                    diagram_ids)
            for child in aggregation.child_order:
                self._check_diagram_ref("aggregation", parent_id, child,
                                        diagram_ids)
        for coupling in self.couplings:
            self._check_diagram_ref("coupling", coupling.id,
                                    coupling.parent_diagram, diagram_ids)
            for child_diagram, _arc in coupling.children:
                self._check_diagram_ref("coupling", coupling.id,
                                        child_diagram, diagram_ids)
        for symbol in self.symbols:
            self._check_diagram_ref("symbol", symbol.id, symbol.diagram,
                                    diagram_ids)

        symbol_ids = {s.id for s in self.symbols}
        for scenario in self.scenarios.values():
            line, col = self._loc("scenario", scenario.id)
            if self.symbols:
                for _tick, names in scenario.time_diagram.items():
                    for name in names:
                        if name not in symbol_ids:
                            self.error(
                                E_UNDEF_SYMBOL,
                                f"scenario {scenario.id} applies undefined "
                                f"symbol {name!r}", line, col,
                            )
            for diagram_id, state in sorted(scenario.suppressed_backsteps):
                if diagram_id not in diagram_ids:
                    self.error(
                        E_UNDEF_DIAGRAM,
                        f"scenario {scenario.id} suppresses in undefined "
                        f"diagram {diagram_id!r}", line, col,
                    )
                elif state not in states_of[diagram_id]:
                    self.error(
                        E_UNDEF_STATE,
                        f"scenario {scenario.id} suppresses undefined "
                        f"state {state!r}", line, col,
                    )

        node_ids = {n.id for n in self.objective_nodes}
        for node in self.objective_nodes:
            line, col = self._loc("node", node.id)
            for child in node.children:
                if child not in node_ids:
                    self.error(E_UNDEF_NODE,
                               f"node {node.id} references undefined node "
                               f"{child!r}", line, col)
            if node.goal is not None:
                diagram_id, state = node.goal
                if diagram_id not in diagram_ids:
                    self.error(E_UNDEF_DIAGRAM,
                               f"node {node.id} targets undefined diagram "
                               f"{diagram_id!r}", line, col)
                elif state not in states_of[diagram_id]:
                    self.error(E_UNDEF_STATE,
                               f"node {node.id} targets undefined state "
                               f"{state!r}", line, col)


def try_parse_model(text: str):
    """Parse model text; returns ``(document, diagnostics)`` where exactly
    one of the pair is meaningful: a document with no diagnostics, or no
    document with at least one diagnostic."""
    parser = _Parser(text)
    document = parser.parse()
    return document, tuple(parser.diagnostics)


def parse_model(text: str) -> ModelDocument:
    """Parse model text or raise :class:`ModelSyntaxError` with the full
    diagnostics list; never returns a partial document."""
    document, diagnostics = try_parse_model(text)
    if document is None:
        raise ModelSyntaxError(diagnostics)
    return document


# -- serialization ---------------------------------------------------------


def _num(value) -> str:
    if isinstance(value, bool):
        raise TypeError("booleans have no place in model text")
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _bound(value) -> str:
    return "*" if value is None else repr(float(value))


def serialize_model(document: ModelDocument) -> str:
    """Canonical text for a document; ``parse_model`` of the result equals
    the document (locations aside)."""
    out: list = []

    def emit(line=""):
        out.append(line)

    for diagram in document.diagrams:
        emit(f"diagram {diagram.id}")
        emit(f"  population {diagram.population}")
        emit("  partition " + " ".join(
            str(b) for b in diagram.partition.boundaries
        ))
        for state in diagram.states:
            parts = [f"  state {state.id} rank {state.rank} "
                     f"interval {state.interval}"]
            if state.role is Role.INITIAL:
                parts.append("role initial")
            elif state.role is Role.FINAL:
                parts.append("role final")
            if state.dwell_limit is not None:
                parts.append(f"dwell {state.dwell_limit}")
            emit(" ".join(parts))
        for arc in diagram.arcs:
            kind = "forward" if arc.kind is ArcKind.FORWARD else "backstep"
            emit(f"  arc {arc.id} {arc.source} -> {arc.target} {kind} "
                 f"transit {arc.transit_ticks}")
        for i, mark in enumerate(diagram.boundary_distributions):
            pairs = " ".join(
                f"{state} {_num(weight)}" for state, weight in mark.items()
            )
            emit(f"  mark {i} {pairs}")
        emit("end")
        emit()

    for decl in document.scales:
        refines = f" refines {decl.refines}" if decl.refines else ""
        emit(f"scale {decl.id} for {decl.diagram}{refines}")
        for prop in decl.scale.propositions:
            bounds = " ".join(
                f"{p.parameter} {_bound(p.lower)} {_bound(p.upper)}"
                for p in prop.predicates
            )
            state = decl.scale.state_of.get(prop.id, "*")
            emit(f"  prop {prop.id} {bounds} -> {state}")
        emit("end")
        emit()

    if document.topology:
        emit("topology")
        for parent, children in document.topology.items():
            for child in children:
                emit(f"  child {child} of {parent}")
        emit("end")
        emit()

    for parent_id in document.aggregations:
        aggregation = document.aggregations[parent_id]
        emit(f"aggregation {parent_id}")
        emit("  order " + " ".join(aggregation.child_order))
        for parent_state in sorted(aggregation.blocks):
            combos = " ".join(
                ",".join(combo)
                for combo in sorted(aggregation.blocks[parent_state])
            )
            emit(f"  block {parent_state} {combos}")
        emit("end")
        emit()

    for coupling in document.couplings:
        emit(f"coupling {coupling.id} on {coupling.parent_diagram} "
             f"{coupling.parent_arc}")
        emit(f"  quorum {coupling.quorum}")
        for child_diagram, child_arc in coupling.children:
            emit(f"  child {child_diagram} {child_arc}")
        emit("end")
        emit()

    if document.symbols:
        emit("symbols")
        for symbol in document.symbols:
            kind = ("individual" if symbol.kind is SymbolKind.INDIVIDUAL
                    else "general")
            emit(f"  symbol {symbol.id} {kind} {symbol.diagram} "
                 f"{symbol.arc} cost {_num(symbol.cost)}")
        emit("end")
        emit()

    if document.rules:
        emit("rules")
        for rule in document.rules:
            parts = [f"  rule {rule.id} {rule.source} -> {rule.target}"]
            if rule.control:
                parts.append(f"control {rule.control}")
            parts.append(f"resource {_num(rule.resource)}")
            parts.append(f"duration {rule.duration}")
            if rule.forbidden_backstep is not None:
                parts.append(f"forbid {rule.forbidden_backstep}")
            emit(" ".join(parts))
        emit("end")
        emit()

    if document.objectives is not None:
        emit("objectives")
        tree = document.objectives
        ordered = [tree.root] + [n for n in tree.nodes if n != tree.root]
        for node_id in ordered:
            node = tree.node(node_id)
            if node.goal is not None:
                emit(f"  node {node.id} goal {node.goal[0]} {node.goal[1]}")
            elif node.rule == RULE_K_OF_N:
                children = " ".join(node.children)
                emit(f"  node {node.id} k {node.threshold} {children}")
            else:
                rule = "all" if node.rule == RULE_ALL else "any"
                children = " ".join(node.children)
                emit(f"  node {node.id} {rule} {children}".rstrip())
        emit("end")
        emit()

    for scenario_id in document.scenarios:
        scenario = document.scenarios[scenario_id]
        emit(f"scenario {scenario.id}")
        emit(f"  horizon {scenario.horizon}")
        emit(f"  priority {scenario.priority}")
        emit(f"  criterion {_num(scenario.criterion.rank_weight)} "
             f"{_num(scenario.criterion.resource_weight)} "
             f"{_num(scenario.criterion.time_weight)}")
        for diagram_id, state in sorted(scenario.suppressed_backsteps):
            emit(f"  suppress {diagram_id} {state}")
        for tick, names in scenario.time_diagram.items():
            emit(f"  at {tick} " + " ".join(names))
        emit("end")
        emit()

    while out and out[-1] == "":
        out.pop()
    return "\n".join(out) + "\n"
