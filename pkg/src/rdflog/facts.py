"""Data translation: RDF datasets become ground Datalog facts.

Every distinct term in a triple yields one of iri/literal/bnode; each triple
in graph g yields triple(s, p, o, g) with g = "default" for the default
graph; each named graph additionally yields named(g) and an iri(g) fact so
that GRAPH variables can participate in joins like any other value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .datalog import Atom, Const, Rule, Var, render_rule
from .rdf import DEFAULT_GRAPH, Dataset, Term, iri

_X, _Y, _P, _D = Var("X"), Var("Y"), Var("P"), Var("D")

# Domain rules carried alongside the facts: term/1 classifies constants,
# subjectOrObject/1 collects every node of the dataset.
FIXED_RULES: tuple[Rule, ...] = (
    Rule(Atom("term", (_X,)), (Atom("iri", (_X,)),)),
    Rule(Atom("term", (_X,)), (Atom("literal", (_X,)),)),
    Rule(Atom("term", (_X,)), (Atom("bnode", (_X,)),)),
    Rule(Atom("subjectOrObject", (_X,)), (Atom("triple", (_X, _P, _Y, _D)),)),
    Rule(Atom("subjectOrObject", (_Y,)), (Atom("triple", (_X, _P, _Y, _D)),)),
)


@dataclass(frozen=True)
class FactBase:
    facts: frozenset[Atom]
    rules: tuple[Rule, ...] = FIXED_RULES

    def __iter__(self) -> Iterator[Atom]:
        return iter(sorted(self.facts, key=repr))

    def __len__(self) -> int:
        return len(self.facts)

    def dump(self) -> str:
        """One pred(args...). line per fact, deterministically ordered."""
        return "".join(render_rule(Rule(a)) + "\n" for a in self)


def _kind_pred(term: Term) -> str:
    return {"iri": "iri", "literal": "literal", "blank": "bnode"}[term.kind]


def translate_data(dataset: Dataset) -> FactBase:
    facts: set[Atom] = set()

    def add_graph(graph, name: str) -> None:
        g = Const(iri(name))
        for t in graph:
            s, p, o = t.terms()
            facts.add(Atom("triple", (Const(s), Const(p), Const(o), g)))
            for term in (s, p, o):
                facts.add(Atom(_kind_pred(term), (Const(term),)))

    add_graph(dataset.default_graph, DEFAULT_GRAPH)
    for name, graph in dataset.named_graphs.items():
        facts.add(Atom("named", (Const(iri(name)),)))
        facts.add(Atom("iri", (Const(iri(name)),)))
        add_graph(graph, name)
    return FactBase(frozenset(facts))
