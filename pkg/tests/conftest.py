"""Shared fixtures: the 8-triple toy dataset, the 11-pattern example query
with its weight-inducing statistics, and synthetic histogram builders."""

from __future__ import annotations

from collections import Counter

import pytest

from rosie.frontend import parse_query
from rosie.qrg import build_qrg
from rosie.store import Dataset, Stats, TermDictionary, load_ntriples

D_TOY_NT = """\
<p1> <type> <Post> .
<p2> <type> <Post> .
<u1> <creator_of> <p1> .
<u1> <creator_of> <p2> .
<p1> <content> "a" .
<p2> <content> "b" .
<u1> <type> <User> .
<u1> <knows> <u2> .
"""


@pytest.fixture
def d_toy() -> Dataset:
    return load_ntriples(D_TOY_NT)


def make_stats(
    size: int,
    p_counts: dict[str, int] | None = None,
    o_counts: dict[str, int] | None = None,
    s_counts: dict[str, int] | None = None,
) -> tuple[Stats, TermDictionary]:
    """Synthetic histograms for estimator tests (no backing triples)."""
    dictionary = TermDictionary()
    stats = Stats(size=size, s_hist=Counter(), p_hist=Counter(), o_hist=Counter())
    for counts, hist in (
        (s_counts or {}, stats.s_hist),
        (p_counts or {}, stats.p_hist),
        (o_counts or {}, stats.o_hist),
    ):
        for term, count in counts.items():
            hist[dictionary.encode(term)] = count
    return stats, dictionary


# The running example: eleven patterns, one filter, a union and an optional
# part, shaped so the greedy planner's narrated choices are reproducible.
QE_TEXT = """\
SELECT ?u1 ?p1 ?u2 WHERE {
  { ?f <has_member> ?u1 .
    ?f <has_moderator> ?m .
    ?u1 <creator_of> ?p1 .
    ?p1 <reply_of> ?p2 .
    ?p1 <type> <Post> .
    ?p1 <content> ?pc .
    FILTER regex(str(?pc), "sep", "i")
  }
  { ?u1 <follows> ?u2 . }
  UNION
  { ?c <created_by> ?u2 .
    ?u1 <likes> ?c . }
  OPTIONAL {
    ?u2 <email> ?e .
    ?u1 <knows> ?u2 .
  }
}
"""

QE_EXPECTED_CS = (
    "((((((T5 And T4) And (T6 Filter C)) And T3) And T2) And T1)"
    " And (T7 Or (T9 And T8))) Opt (T11 And T10)"
)

QE_PRED_COUNTS = {
    "has_member": 400,
    "has_moderator": 250,
    "creator_of": 200,
    "reply_of": 150,
    "type": 300,
    "content": 180,
    "follows": 160,
    "created_by": 700,
    "likes": 300,
    "email": 900,
    "knows": 600,
    "pad": 860,  # brings the predicate histogram total to |D|
}


def qe_weights_dataset() -> Dataset:
    """A concrete 5000-triple dataset whose histograms reproduce the
    example's plan-inducing weights (predicate counts above, 70 type rows
    with object Post)."""
    triples = []
    counter = 0
    for pred, count in QE_PRED_COUNTS.items():
        for i in range(count):
            if pred == "type":
                obj = "Post" if i < 70 else f"Cls{i % 9}"
            else:
                obj = f"n{counter}"
            triples.append((f"e{counter}", pred, obj))
            counter += 1
    d = Dataset.from_strings(triples)
    assert d.size == 5000
    return d


@pytest.fixture
def qe_query():
    return parse_query(QE_TEXT)


@pytest.fixture
def qe_stats():
    return make_stats(5000, p_counts=QE_PRED_COUNTS, o_counts={"Post": 70})


@pytest.fixture
def qe_qrg(qe_query, qe_stats):
    stats, dictionary = qe_stats
    return build_qrg(qe_query, stats, dictionary)


def op_by_label(g):
    return {op.label: op for op in g.ops.values()}
