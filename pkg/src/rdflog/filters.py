"""FILTER constraint expressions and their three-valued evaluation.

Constraints evaluate to True, False or ERROR.  A solution passes a filter
only when the constraint evaluates to exactly True; type errors (comparing
an IRI with <, regex on a non-string, unbound operands) eliminate the
solution rather than aborting evaluation, and ERROR propagates through the
boolean connectives the way SPARQL defines (False && E = False,
True || E = True, !E = E).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

from .rdf import Term, UNBOUND

ERROR = "error"
Tri = Union[bool, str]  # True | False | ERROR

Operand = Union[str, Term]  # variable name (no leading "?") or constant term

COMPARISON_OPS = ("=", "!=", "<=", ">=", "<", ">")
TYPE_TESTS = ("isIri", "isBlank", "isLiteral", "isNumeric")


@dataclass(frozen=True)
class Comparison:
    op: str
    lhs: Operand
    rhs: Operand


@dataclass(frozen=True)
class Bound:
    var: str


@dataclass(frozen=True)
class TypeTest:
    test: str  # one of TYPE_TESTS
    var: str


@dataclass(frozen=True)
class Regex:
    var: str
    pattern: str
    flags: str = ""


@dataclass(frozen=True)
class Not:
    child: "Constraint"


@dataclass(frozen=True)
class And:
    left: "Constraint"
    right: "Constraint"


@dataclass(frozen=True)
class Or:
    left: "Constraint"
    right: "Constraint"


Constraint = Union[Comparison, Bound, TypeTest, Regex, Not, And, Or]


def constraint_vars(c: Constraint) -> set[str]:
    if isinstance(c, Comparison):
        return {x for x in (c.lhs, c.rhs) if isinstance(x, str)}
    if isinstance(c, Bound):
        return {c.var}
    if isinstance(c, TypeTest):
        return {c.var}
    if isinstance(c, Regex):
        return {c.var}
    if isinstance(c, Not):
        return constraint_vars(c.child)
    return constraint_vars(c.left) | constraint_vars(c.right)


def rename_constraint(c: Constraint, mapping: dict[str, str]) -> Constraint:
    """Rewrite variable references (used when a filter joins renamed copies)."""
    def ren(x: Operand) -> Operand:
        return mapping.get(x, x) if isinstance(x, str) else x

    if isinstance(c, Comparison):
        return Comparison(c.op, ren(c.lhs), ren(c.rhs))
    if isinstance(c, Bound):
        return Bound(mapping.get(c.var, c.var))
    if isinstance(c, TypeTest):
        return TypeTest(c.test, mapping.get(c.var, c.var))
    if isinstance(c, Regex):
        return Regex(mapping.get(c.var, c.var), c.pattern, c.flags)
    if isinstance(c, Not):
        return Not(rename_constraint(c.child, mapping))
    if isinstance(c, And):
        return And(rename_constraint(c.left, mapping), rename_constraint(c.right, mapping))
    return Or(rename_constraint(c.left, mapping), rename_constraint(c.right, mapping))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _is_string(term: Term) -> bool:
    return term.kind == "literal" and term.datatype is None and term.lang is None


def _compare(op: str, a: Term, b: Term) -> Tri:
    if a.kind == "unbound" or b.kind == "unbound":
        return ERROR
    if op in ("=", "!="):
        if a.is_numeric and b.is_numeric:
            va, vb = a.numeric_value(), b.numeric_value()
            if va is None or vb is None:
                return ERROR
            return (va == vb) if op == "=" else (va != vb)
        return (a == b) if op == "=" else (a != b)
    # ordering comparisons
    if a.is_numeric and b.is_numeric:
        va, vb = a.numeric_value(), b.numeric_value()
        if va is None or vb is None:
            return ERROR
        pair = (va, vb)
    elif _is_string(a) and _is_string(b):
        pair = (a.value, b.value)
    else:
        return ERROR
    if op == "<":
        return pair[0] < pair[1]
    if op == "<=":
        return pair[0] <= pair[1]
    if op == ">":
        return pair[0] > pair[1]
    return pair[0] >= pair[1]


def evaluate_constraint(c: Constraint, lookup: Callable[[str], Term]) -> Tri:
    """Evaluate under a binding function; unbound variables map to UNBOUND."""
    if isinstance(c, Comparison):
        a = lookup(c.lhs) if isinstance(c.lhs, str) else c.lhs
        b = lookup(c.rhs) if isinstance(c.rhs, str) else c.rhs
        return _compare(c.op, a, b)
    if isinstance(c, Bound):
        return lookup(c.var).kind != "unbound"
    if isinstance(c, TypeTest):
        t = lookup(c.var)
        if t.kind == "unbound":
            return ERROR
        if c.test == "isIri":
            return t.kind == "iri"
        if c.test == "isBlank":
            return t.kind == "blank"
        if c.test == "isLiteral":
            return t.kind == "literal"
        return t.is_numeric and t.numeric_value() is not None
    if isinstance(c, Regex):
        t = lookup(c.var)
        if not _is_string(t):
            return ERROR
        flags = re.IGNORECASE if "i" in c.flags else 0
        try:
            return re.search(c.pattern, t.value, flags) is not None
        except re.error:
            return ERROR
    if isinstance(c, Not):
        r = evaluate_constraint(c.child, lookup)
        return ERROR if r == ERROR else (not r)
    if isinstance(c, And):
        l = evaluate_constraint(c.left, lookup)
        r = evaluate_constraint(c.right, lookup)
        if l is False or r is False:
            return False
        if l == ERROR or r == ERROR:
            return ERROR
        return True
    if isinstance(c, Or):
        l = evaluate_constraint(c.left, lookup)
        r = evaluate_constraint(c.right, lookup)
        if l is True or r is True:
            return True
        if l == ERROR or r == ERROR:
            return ERROR
        return False
    raise TypeError(f"not a constraint: {c!r}")


def holds(c: Constraint, lookup: Callable[[str], Term]) -> bool:
    return evaluate_constraint(c, lookup) is True
