"""Solution translation: derived goal atoms back into SPARQL solution
multisets, solution modifiers, and TSV/JSON result documents.

Multiset entries normalise away unbound variables (a mapping that binds
?x to UNBOUND equals one that omits ?x).  Ordering follows a documented
total order: Unbound < blank < IRI < literal, numeric literal pairs by
value, everything else by rendered form.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .datalog import DerivedFacts, Goal
from .rdf import Term, UNBOUND

Key = frozenset  # of (var, Term) pairs, unbound omitted


def _key(mapping: Mapping[str, Term]) -> Key:
    return frozenset((v, t) for v, t in mapping.items()
                     if isinstance(t, Term) and t.kind != "unbound")


class SolutionMultiset:
    """A multiset of partial variable bindings over a fixed schema."""

    def __init__(self, schema: Iterable[str] = ()):
        self.schema = frozenset(schema)
        self.counts: Counter[Key] = Counter()

    def add(self, mapping: Mapping[str, Term], n: int = 1) -> None:
        if n > 0:
            self.counts[_key(mapping)] += n

    def items(self) -> list[tuple[dict[str, Term], int]]:
        return [(dict(key), n) for key, n in self.counts.items()]

    def total(self) -> int:
        return sum(self.counts.values())

    def support(self) -> "SolutionMultiset":
        out = SolutionMultiset(self.schema)
        for key in self.counts:
            out.counts[key] = 1
        return out

    def __eq__(self, other) -> bool:
        return (isinstance(other, SolutionMultiset)
                and self.schema == other.schema
                and self.counts == other.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __repr__(self) -> str:
        rows = ", ".join(f"{dict(k)!r}x{n}" for k, n in sorted(
            self.counts.items(), key=lambda kv: repr(kv[0])))
        return f"SolutionMultiset({sorted(self.schema)}: {rows})"


def extract_solutions(df: DerivedFacts, goal: Goal) -> SolutionMultiset:
    """One occurrence per goal atom, with the tuple ID and the graph column
    projected out; multiplicity is the number of distinct IDs per tuple."""
    ms = SolutionMultiset(goal.variables)
    for tup in df.tuples(goal.pred):
        values = list(tup)
        if goal.has_id:
            values = values[1:]
        if goal.has_graph:
            values = values[:-1]
        mapping = {v: t for v, t in zip(goal.variables, values) if isinstance(t, Term)}
        if goal.has_id:
            ms.add(mapping, 1)
        else:
            ms.counts[_key(mapping)] = 1
    return ms


def eval_ask(df: DerivedFacts, goal: Goal) -> bool:
    for tup in df.tuples(goal.pred):
        value = tup[0]
        if isinstance(value, Term) and value.value == "true":
            return True
    return False


# ---------------------------------------------------------------------------
# Modifiers
# ---------------------------------------------------------------------------

_KIND_RANK = {"unbound": 0, "blank": 1, "iri": 2, "literal": 3}


def term_sort_key(term: Term):
    rank = _KIND_RANK[term.kind]
    if term.kind == "literal" and term.is_numeric:
        value = term.numeric_value()
        if value is not None:
            return (rank, 0, float(value), term.ntriples())
    return (rank, 1, 0.0, term.ntriples())


@dataclass(frozen=True)
class Modifiers:
    order_by: tuple[tuple[str, bool], ...] = ()
    distinct: bool = False
    limit: int | None = None
    offset: int | None = None


def apply_modifiers(ms: SolutionMultiset, mods: Modifiers) -> list[dict[str, Term]]:
    schema = sorted(ms.schema)

    def row_key(mapping: dict[str, Term]):
        return tuple(term_sort_key(mapping.get(v, UNBOUND)) for v in schema)

    rows: list[dict[str, Term]] = []
    for mapping, n in sorted(ms.items(), key=lambda kv: row_key(kv[0])):
        rows.extend([mapping] * n)

    for var, ascending in reversed(mods.order_by):
        rows.sort(key=lambda m: term_sort_key(m.get(var, UNBOUND)),
                  reverse=not ascending)
    if mods.distinct:
        seen = set()
        unique = []
        for m in rows:
            k = _key(m)
            if k not in seen:
                seen.add(k)
                unique.append(m)
        rows = unique
    if mods.offset is not None:
        rows = rows[mods.offset:]
    if mods.limit is not None:
        rows = rows[:mods.limit]
    return rows


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def serialize(rows: list[dict[str, Term]], variables: Iterable[str], fmt: str = "tsv") -> str:
    variables = list(variables)
    if fmt == "tsv":
        lines = ["\t".join("?" + v for v in variables)]
        for row in rows:
            lines.append("\t".join(_tsv_cell(row.get(v, UNBOUND)) for v in variables))
        return "\n".join(lines) + "\n"
    if fmt == "json":
        bindings = []
        for row in rows:
            b = {}
            for v in variables:
                t = row.get(v, UNBOUND)
                if t.kind == "unbound":
                    continue
                b[v] = _json_term(t)
            bindings.append(b)
        doc = {"head": {"vars": variables}, "results": {"bindings": bindings}}
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown result format: {fmt}")


def _tsv_cell(term: Term) -> str:
    return "" if term.kind == "unbound" else term.ntriples()


def _json_term(t: Term) -> dict:
    if t.kind == "iri":
        return {"type": "uri", "value": t.value}
    if t.kind == "blank":
        return {"type": "bnode", "value": t.value}
    out = {"type": "literal", "value": t.value}
    if t.lang:
        out["xml:lang"] = t.lang
    if t.datatype:
        out["datatype"] = t.datatype
    return out
