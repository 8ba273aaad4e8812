"""In-memory triple store with dictionary encoding and exact histograms.

Terms are interned into dense integer ids in first-seen order. Triples are
kept in three sorted permutations (SPO, POS, OSP) so that every pattern with
one or two bound positions scans a contiguous range. Statistics are exact
per-value counts: for each term the number of triples where it appears as
subject, predicate, or object.

A dataset is immutable after load; the only mutation is registering
intermediate relations produced while executing a single query.
"""

from __future__ import annotations

import io
import struct
import threading
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass
from typing import BinaryIO, Iterable, NamedTuple, Optional

from .errors import ParseError, SnapshotFormatError

TermId = int
RelationId = int

SNAPSHOT_MAGIC = b"ROSIEDB1"

# Term canonical forms:
#   IRI      -> the IRI string itself (no angle brackets)
#   literal  -> '"' escaped-lexical '"' plus optional @lang or ^^<datatype>
#   blank    -> '_:' label

_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_REV_ESCAPES = {"\t": "\\t", "\n": "\\n", "\r": "\\r", '"': '\\"', "\\": "\\\\"}


def escape_literal(lexical: str) -> str:
    return "".join(_REV_ESCAPES.get(c, c) for c in lexical)


def make_literal(lexical: str, lang: str = "", datatype: str = "") -> str:
    term = f'"{escape_literal(lexical)}"'
    if lang:
        term += f"@{lang}"
    elif datatype:
        term += f"^^<{datatype}>"
    return term


def lexical_form(term: str) -> str:
    """The comparison string of a term: literal content or the IRI itself."""
    if not term.startswith('"'):
        return term
    # find the closing quote, honouring backslash escapes
    out = []
    i = 1
    while i < len(term):
        c = term[i]
        if c == "\\" and i + 1 < len(term):
            out.append(_ESCAPES.get(term[i + 1], term[i + 1]))
            i += 2
            continue
        if c == '"':
            break
        out.append(c)
        i += 1
    return "".join(out)


class Triple(NamedTuple):
    s: TermId
    p: TermId
    o: TermId


class TermDictionary:
    """Bijective term <-> id mapping; ids are dense and first-seen ordered."""

    def __init__(self) -> None:
        self._terms: list[str] = []
        self._ids: dict[str, TermId] = {}

    def __len__(self) -> int:
        return len(self._terms)

    def encode(self, term: str) -> TermId:
        tid = self._ids.get(term)
        if tid is None:
            tid = len(self._terms)
            self._terms.append(term)
            self._ids[term] = tid
        return tid

    def lookup(self, term: str) -> Optional[TermId]:
        return self._ids.get(term)

    def decode(self, tid: TermId) -> str:
        return self._terms[tid]

    def terms(self) -> list[str]:
        return list(self._terms)


@dataclass
class Stats:
    """Exact single-value histograms plus the dataset size."""

    size: int
    s_hist: Counter
    p_hist: Counter
    o_hist: Counter

    def count(self, term: TermId, role: str) -> int:
        if role == "S":
            return self.s_hist.get(term, 0)
        if role == "P":
            return self.p_hist.get(term, 0)
        if role == "O":
            return self.o_hist.get(term, 0)
        raise ValueError(f"unknown role {role!r}")


@dataclass
class Relation:
    """Bag of solution rows over an ordered variable schema.

    A None cell means the variable is unbound in that row.
    """

    schema: tuple[str, ...]
    rows: list[tuple]

    @property
    def exact_cardinality(self) -> int:
        return len(self.rows)


class Dataset:
    """Immutable triple set plus dictionary, stats and query intermediates."""

    def __init__(self, dictionary: TermDictionary, triples: set[Triple]):
        self.dict = dictionary
        self.spo: list[tuple] = sorted(triples)
        self.pos: list[tuple] = sorted((p, o, s) for s, p, o in triples)
        self.osp: list[tuple] = sorted((o, s, p) for s, p, o in triples)
        self.stats = Stats(
            size=len(self.spo),
            s_hist=Counter(t[0] for t in self.spo),
            p_hist=Counter(t[1] for t in self.spo),
            o_hist=Counter(t[2] for t in self.spo),
        )
        self.intermediates: dict[RelationId, Relation] = {}
        self._next_relation_id = 1
        self._registration_lock = threading.Lock()

    # -- construction ------------------------------------------------------

    @classmethod
    def from_strings(cls, triples: Iterable[tuple[str, str, str]]) -> "Dataset":
        d = TermDictionary()
        enc: set[Triple] = set()
        for s, p, o in triples:
            enc.add(Triple(d.encode(s), d.encode(p), d.encode(o)))
        return cls(d, enc)

    @property
    def size(self) -> int:
        return self.stats.size

    def triples(self) -> Iterable[Triple]:
        for s, p, o in self.spo:
            yield Triple(s, p, o)

    def has_triple(self, s: TermId, p: TermId, o: TermId) -> bool:
        i = bisect_left(self.spo, (s, p, o))
        return i < len(self.spo) and self.spo[i] == (s, p, o)

    # -- scans ---------------------------------------------------------------

    def _range(self, index: list[tuple], prefix: tuple) -> Iterable[tuple]:
        lo = bisect_left(index, prefix)
        hi = bisect_left(index, prefix[:-1] + (prefix[-1] + 1,))
        return index[lo:hi]


def load_ntriples(source) -> Dataset:
    """Parse line-oriented N-Triples from a byte or text stream.

    Duplicate triples are deduplicated (graphs are sets). Comments (#) and
    blank lines are permitted. Malformed lines abort with ParseError.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    if isinstance(source, str):
        source = io.StringIO(source)
    dictionary = TermDictionary()
    triples: set[Triple] = set()
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(line_no, f"invalid UTF-8: {exc}") from None
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        terms = _parse_ntriples_line(line, line_no)
        triples.add(
            Triple(
                dictionary.encode(terms[0]),
                dictionary.encode(terms[1]),
                dictionary.encode(terms[2]),
            )
        )
    return Dataset(dictionary, triples)


def _parse_ntriples_line(line: str, line_no: int) -> tuple[str, str, str]:
    pos = 0
    terms = []
    for which in ("subject", "predicate", "object"):
        while pos < len(line) and line[pos] in " \t":
            pos += 1
        if pos >= len(line):
            raise ParseError(line_no, f"missing {which}")
        term, pos = _parse_term(line, pos, line_no, which)
        terms.append(term)
    while pos < len(line) and line[pos] in " \t":
        pos += 1
    if pos >= len(line) or line[pos] != ".":
        raise ParseError(line_no, "expected '.' terminator")
    rest = line[pos + 1 :].strip()
    if rest and not rest.startswith("#"):
        raise ParseError(line_no, f"trailing content {rest[:20]!r}")
    return terms[0], terms[1], terms[2]


def _parse_term(line: str, pos: int, line_no: int, which: str) -> tuple[str, int]:
    c = line[pos]
    if c == "<":
        end = line.find(">", pos + 1)
        if end < 0:
            raise ParseError(line_no, f"unterminated IRI in {which}")
        return line[pos + 1 : end], end + 1
    if c == "_" and line[pos : pos + 2] == "_:":
        end = pos + 2
        while end < len(line) and (line[end].isalnum() or line[end] in "_-"):
            end += 1
        if end == pos + 2:
            raise ParseError(line_no, f"empty blank node label in {which}")
        return line[pos:end], end
    if c == '"':
        lexical = []
        i = pos + 1
        while True:
            if i >= len(line):
                raise ParseError(line_no, f"unterminated literal in {which}")
            ch = line[i]
            if ch == "\\":
                if i + 1 >= len(line):
                    raise ParseError(line_no, "dangling escape")
                nxt = line[i + 1]
                if nxt == "u" or nxt == "U":
                    width = 4 if nxt == "u" else 8
                    hexdigits = line[i + 2 : i + 2 + width]
                    if len(hexdigits) != width:
                        raise ParseError(line_no, "bad unicode escape")
                    try:
                        lexical.append(chr(int(hexdigits, 16)))
                    except ValueError:
                        raise ParseError(line_no, "bad unicode escape") from None
                    i += 2 + width
                    continue
                if nxt not in _ESCAPES:
                    raise ParseError(line_no, f"unknown escape \\{nxt}")
                lexical.append(_ESCAPES[nxt])
                i += 2
                continue
            if ch == '"':
                break
            lexical.append(ch)
            i += 1
        i += 1
        lang = ""
        datatype = ""
        if line[i : i + 1] == "@":
            end = i + 1
            while end < len(line) and (line[end].isalnum() or line[end] == "-"):
                end += 1
            lang = line[i + 1 : end]
            if not lang:
                raise ParseError(line_no, "empty language tag")
            i = end
        elif line[i : i + 2] == "^^":
            if line[i + 2 : i + 3] != "<":
                raise ParseError(line_no, "datatype must be an IRI")
            end = line.find(">", i + 3)
            if end < 0:
                raise ParseError(line_no, "unterminated datatype IRI")
            datatype = line[i + 3 : end]
            i = end + 1
        return make_literal("".join(lexical), lang, datatype), i
    raise ParseError(line_no, f"unexpected character {c!r} in {which}")


def scan(d: Dataset, tp) -> Relation:
    """All solutions of one triple pattern, schema in S,P,O order.

    `tp` is a frontend.TriplePattern; bound terms absent from the dictionary
    yield the empty relation. Repeated variables constrain positions to be
    equal.
    """
    positions = [("S", tp.s), ("P", tp.p), ("O", tp.o)]
    bound: list[Optional[TermId]] = []
    var_names: list[Optional[str]] = []
    for _, atom in positions:
        if atom.is_var():
            bound.append(None)
            var_names.append(atom.name)
        else:
            tid = d.dict.lookup(atom.value)
            if tid is None:
                schema = _pattern_schema(tp)
                return Relation(schema, [])
            bound.append(tid)
            var_names.append(None)

    s, p, o = bound
    if s is not None and p is not None and o is not None:
        matches: Iterable[tuple] = [(s, p, o)] if d.has_triple(s, p, o) else []
    elif s is not None and p is not None:
        matches = d._range(d.spo, (s, p))
    elif s is not None and o is not None:
        matches = ((a, c, b) for b, a, c in d._range(d.osp, (o, s)))
    elif p is not None and o is not None:
        matches = ((c, a, b) for a, b, c in d._range(d.pos, (p, o)))
    elif s is not None:
        matches = d._range(d.spo, (s,))
    elif p is not None:
        matches = ((c, a, b) for a, b, c in d._range(d.pos, (p,)))
    elif o is not None:
        matches = ((b, c, a) for a, b, c in d._range(d.osp, (o,)))
    else:
        matches = d.spo

    schema = _pattern_schema(tp)
    rows: list[tuple] = []
    for triple in matches:
        binding: dict[str, TermId] = {}
        ok = True
        for (name, value) in zip(var_names, triple):
            if name is None:
                continue
            if name in binding:
                if binding[name] != value:
                    ok = False
                    break
            else:
                binding[name] = value
        if ok:
            rows.append(tuple(binding[v] for v in schema))
    return Relation(schema, rows)


def _pattern_schema(tp) -> tuple[str, ...]:
    schema: list[str] = []
    for atom in (tp.s, tp.p, tp.o):
        if atom.is_var() and atom.name not in schema:
            schema.append(atom.name)
    return tuple(schema)


def stats_lookup(d: Dataset, term: TermId, role: str) -> int:
    """Exact count of triples with `term` at `role`; 0 when absent."""
    return d.stats.count(term, role)


def register_intermediate(d: Dataset, r: Relation) -> RelationId:
    """Make a relation retrievable by id for the rest of the query.

    The only mutation a dataset sees after load; guarded so concurrent
    queries on one dataset cannot collide on ids.
    """
    with d._registration_lock:
        rid = d._next_relation_id
        d._next_relation_id += 1
        d.intermediates[rid] = r
    return rid


def snapshot_save(d: Dataset, sink: BinaryIO) -> None:
    """Write a snapshot: magic, dictionary strings, fixed-width triples."""
    sink.write(SNAPSHOT_MAGIC)
    terms = d.dict.terms()
    sink.write(struct.pack("<I", len(terms)))
    for term in terms:
        blob = term.encode("utf-8")
        sink.write(struct.pack("<I", len(blob)))
        sink.write(blob)
    sink.write(struct.pack("<I", len(d.spo)))
    for s, p, o in d.spo:
        sink.write(struct.pack("<III", s, p, o))


def snapshot_load(source: BinaryIO) -> Dataset:
    magic = source.read(len(SNAPSHOT_MAGIC))
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    dictionary = TermDictionary()
    (term_count,) = _read_struct(source, "<I")
    for _ in range(term_count):
        (length,) = _read_struct(source, "<I")
        blob = source.read(length)
        if len(blob) != length:
            raise SnapshotFormatError("truncated dictionary entry")
        dictionary.encode(blob.decode("utf-8"))
    (triple_count,) = _read_struct(source, "<I")
    triples: set[Triple] = set()
    for _ in range(triple_count):
        s, p, o = _read_struct(source, "<III")
        if max(s, p, o) >= len(dictionary):
            raise SnapshotFormatError("triple id out of dictionary range")
        triples.add(Triple(s, p, o))
    return Dataset(dictionary, triples)


def _read_struct(source: BinaryIO, fmt: str) -> tuple:
    size = struct.calcsize(fmt)
    blob = source.read(size)
    if len(blob) != size:
        raise SnapshotFormatError("truncated snapshot")
    return struct.unpack(fmt, blob)
