"""SPARQL 1.1 query engine built as a compiler to Datalog with tuple-ID bag
semantics, plus an independent direct-semantics evaluator for differential
testing."""

from .rdf import (
    Dataset, Term, Triple, UNBOUND, blank, iri, literal, load_dataset,
    parse_nquads, parse_ntriples, serialize_ntriples,
)
from .facts import FactBase, translate_data
from .sparql import QueryAst, ParseError, UnsupportedFeature, index_patterns, parse_query
from .datalog import (
    Atom, Const, DerivedFacts, EMPTY_ID, Goal, NotStratifiable, Program,
    ResourceLimit, Rule, Sk, Var, audit_id_recursion, bagify, check_warded,
    evaluate, load_program, render_program, stratify,
)
from .translate import SkolemGenerator, TranslationContext, emit_auxiliaries, \
    translate_path, translate_pattern, translate_query
from .solution import (
    Modifiers, SolutionMultiset, apply_modifiers, eval_ask, extract_solutions,
    serialize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
