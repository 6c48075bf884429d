"""RDF data model: terms, triples, datasets, and N-Triples/N-Quads I/O.

Terms are immutable and hashable.  A literal carries its lexical form plus
at most one of a datatype IRI or a language tag.  The UNBOUND sentinel
stands for "no value" in partial query solutions; it is distinct from every
literal, including the literal "null".
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

XSD = "http://www.w3.org/2001/XMLSchema#"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

NUMERIC_DATATYPES = frozenset(
    XSD + t
    for t in (
        "integer", "decimal", "double", "float", "long", "int", "short",
        "byte", "nonNegativeInteger", "nonPositiveInteger", "negativeInteger",
        "positiveInteger", "unsignedLong", "unsignedInt", "unsignedShort",
        "unsignedByte",
    )
)

DEFAULT_GRAPH = "default"


class RdfError(ValueError):
    """Malformed RDF input or violated term/triple constraints."""


@dataclass(frozen=True, slots=True)
class Term:
    """An RDF term, or the reserved UNBOUND sentinel (kind="unbound")."""

    kind: str  # "iri" | "literal" | "blank" | "unbound"
    value: str = ""
    datatype: str | None = None
    lang: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("iri", "literal", "blank", "unbound"):
            raise RdfError(f"bad term kind: {self.kind!r}")
        if self.kind != "literal" and (self.datatype or self.lang):
            raise RdfError("datatype/lang are only allowed on literals")
        if self.datatype and self.lang:
            raise RdfError("a literal has at most one of datatype and lang")
        if self.kind == "unbound" and self.value:
            raise RdfError("UNBOUND carries no value")

    @property
    def is_numeric(self) -> bool:
        return self.kind == "literal" and self.datatype in NUMERIC_DATATYPES

    def numeric_value(self) -> float | int | None:
        if not self.is_numeric:
            return None
        try:
            text = self.value.strip()
            if re.fullmatch(r"[+-]?\d+", text):
                return int(text)
            return float(text)
        except ValueError:
            return None

    def ntriples(self) -> str:
        """Render in N-Triples surface syntax."""
        if self.kind == "iri":
            return f"<{self.value}>"
        if self.kind == "blank":
            return f"_:{self.value}"
        if self.kind == "unbound":
            return ""
        body = '"%s"' % escape_literal(self.value)
        if self.lang:
            return f"{body}@{self.lang}"
        if self.datatype:
            return f"{body}^^<{self.datatype}>"
        return body

    def __repr__(self) -> str:  # compact, for test failure output
        if self.kind == "unbound":
            return "UNBOUND"
        return self.ntriples()


UNBOUND = Term("unbound")


def iri(value: str) -> Term:
    return Term("iri", value)


def literal(value: str, datatype: str | None = None, lang: str | None = None) -> Term:
    return Term("literal", value, datatype, lang)


def blank(label: str) -> Term:
    return Term("blank", label)


@dataclass(frozen=True, slots=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self) -> None:
        if self.subject.kind not in ("iri", "blank"):
            raise RdfError(f"triple subject must be IRI or blank node: {self.subject!r}")
        if self.predicate.kind != "iri":
            raise RdfError(f"triple predicate must be an IRI: {self.predicate!r}")
        if self.object.kind not in ("iri", "blank", "literal"):
            raise RdfError(f"triple object must be IRI, blank node or literal: {self.object!r}")

    def terms(self) -> tuple[Term, Term, Term]:
        return (self.subject, self.predicate, self.object)


@dataclass(frozen=True)
class Dataset:
    """A default graph plus zero or more named graphs; graphs are triple sets."""

    default_graph: frozenset[Triple] = frozenset()
    named_graphs: Mapping[str, frozenset[Triple]] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.named_graphs is None:
            object.__setattr__(self, "named_graphs", {})
        if DEFAULT_GRAPH in self.named_graphs:
            raise RdfError('"default" is reserved and cannot name a graph')

    def graph(self, name: str | None) -> frozenset[Triple]:
        if name is None or name == DEFAULT_GRAPH:
            return self.default_graph
        return self.named_graphs.get(name, frozenset())

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self.named_graphs))


# ---------------------------------------------------------------------------
# N-Triples / N-Quads parsing
# ---------------------------------------------------------------------------

_ESCAPES = {
    "t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
    '"': '"', "'": "'", "\\": "\\",
}


def escape_literal(text: str) -> str:
    out = []
    for ch in text:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        else:
            out.append(ch)
    return "".join(out)


def unescape(text: str, where: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= len(text):
            raise RdfError(f"{where}: dangling backslash")
        nxt = text[i + 1]
        if nxt in _ESCAPES:
            out.append(_ESCAPES[nxt])
            i += 2
        elif nxt == "u":
            out.append(chr(int(text[i + 2:i + 6], 16)))
            i += 6
        elif nxt == "U":
            out.append(chr(int(text[i + 2:i + 10], 16)))
            i += 10
        else:
            raise RdfError(f"{where}: bad escape \\{nxt}")
    return "".join(out)


class _LineScanner:
    """Token scanner for one N-Triples/N-Quads statement line."""

    def __init__(self, line: str, lineno: int):
        self.line = line
        self.pos = 0
        self.lineno = lineno

    def error(self, message: str) -> RdfError:
        return RdfError(f"line {self.lineno}: {message}")

    def skip_ws(self) -> None:
        while self.pos < len(self.line) and self.line[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.line)

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.pos >= len(self.line) or self.line[self.pos] != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def term(self) -> Term:
        self.skip_ws()
        if self.pos >= len(self.line):
            raise self.error("unexpected end of statement")
        ch = self.line[self.pos]
        if ch == "<":
            end = self.line.find(">", self.pos)
            if end < 0:
                raise self.error("unterminated IRI")
            raw = self.line[self.pos + 1:end]
            self.pos = end + 1
            return iri(unescape(raw, f"line {self.lineno}"))
        if ch == "_":
            if not self.line.startswith("_:", self.pos):
                raise self.error("expected blank node label")
            m = re.match(r"_:([A-Za-z0-9_.\-]+)", self.line[self.pos:])
            if not m:
                raise self.error("bad blank node label")
            self.pos += m.end()
            return blank(m.group(1))
        if ch == '"':
            return self._literal()
        raise self.error(f"unexpected character {ch!r}")

    def _literal(self) -> Term:
        i = self.pos + 1
        buf = []
        while i < len(self.line):
            ch = self.line[i]
            if ch == "\\":
                if i + 1 >= len(self.line):
                    raise self.error("dangling backslash in literal")
                buf.append(self.line[i:i + 2])
                i += 2
                continue
            if ch == '"':
                break
            buf.append(ch)
            i += 1
        else:
            raise self.error("unterminated literal")
        lexical = unescape("".join(buf), f"line {self.lineno}")
        self.pos = i + 1
        if self.line.startswith("@", self.pos):
            m = re.match(r"@([A-Za-z]+(?:-[A-Za-z0-9]+)*)", self.line[self.pos:])
            if not m:
                raise self.error("bad language tag")
            self.pos += m.end()
            return literal(lexical, lang=m.group(1))
        if self.line.startswith("^^", self.pos):
            self.pos += 2
            dt = self.term()
            if dt.kind != "iri":
                raise self.error("datatype must be an IRI")
            return literal(lexical, datatype=dt.value)
        return literal(lexical)


def _statements(text: str) -> Iterable[tuple[int, _LineScanner]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, _LineScanner(raw, lineno)


def parse_ntriples(text: str) -> list[Triple]:
    """Parse N-Triples text into a list of triples (order preserved)."""
    triples = []
    for _, sc in _statements(text):
        s = sc.term()
        p = sc.term()
        o = sc.term()
        sc.expect(".")
        if not sc.at_end():
            raise sc.error("trailing content after '.'")
        triples.append(Triple(s, p, o))
    return triples


def parse_nquads(text: str) -> list[tuple[Triple, str | None]]:
    """Parse N-Quads text; each statement yields (triple, graph IRI or None)."""
    quads = []
    for _, sc in _statements(text):
        s = sc.term()
        p = sc.term()
        o = sc.term()
        sc.skip_ws()
        graph: str | None = None
        if sc.pos < len(sc.line) and sc.line[sc.pos] != ".":
            g = sc.term()
            if g.kind != "iri":
                raise sc.error("graph label must be an IRI")
            graph = g.value
        sc.expect(".")
        if not sc.at_end():
            raise sc.error("trailing content after '.'")
        quads.append((Triple(s, p, o), graph))
    return quads


def serialize_ntriples(triples: Iterable[Triple]) -> str:
    lines = [
        f"{t.subject.ntriples()} {t.predicate.ntriples()} {t.object.ntriples()} ."
        for t in triples
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def load_dataset(
    default_sources: Sequence[str | Path] = (),
    named_sources: Mapping[str, str | Path] | None = None,
) -> Dataset:
    """Build a dataset from files: default sources merge (set union) into the
    default graph; each named source becomes one named graph.  Files ending in
    .nq are read as N-Quads and their labelled quads route to named graphs.
    """
    default: set[Triple] = set()
    named: dict[str, set[Triple]] = {}

    def add_named(name: str, triples: Iterable[Triple], merging: bool = False) -> None:
        if name == DEFAULT_GRAPH:
            raise RdfError('"default" is reserved and cannot name a graph')
        if name in named and not merging:
            raise RdfError(f"duplicate graph name: {name}")
        named.setdefault(name, set()).update(triples)

    for path in default_sources:
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix == ".nq":
            for triple, graph in parse_nquads(text):
                if graph is None:
                    default.add(triple)
                else:
                    add_named(graph, [triple], merging=True)
        else:
            default.update(parse_ntriples(text))

    for name, path in (named_sources or {}).items():
        text = Path(path).read_text(encoding="utf-8")
        add_named(name, parse_ntriples(text))

    return Dataset(
        default_graph=frozenset(default),
        named_graphs={n: frozenset(ts) for n, ts in named.items()},
    )
