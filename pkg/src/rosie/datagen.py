"""Synthetic dataset builders for policy comparisons and stress tests.

The correlated builders create star-shaped entities whose predicates
co-occur deterministically (every post has a creator and a content), the
situation where position-independence estimates collapse. The uncorrelated
builder spreads predicates uniformly so interval bounds stay tight and the
adaptive policy never needs to materialize.
"""

from __future__ import annotations

import random

from .store import Dataset, make_literal

TYPE = "type"
POST = "Post"
USER = "User"


def correlated_star(
    total_triples: int = 10000,
    posts: int = 60,
    users: int = 12,
    seed: int = 7,
) -> Dataset:
    """Posts with deterministic creator/content co-occurrence, sparsely typed.

    Only posts and users carry type triples, so the independence estimate
    for (?p type Post) sits far below the true count; the creator join then
    fans the error out through a subject-object step.
    """
    rng = random.Random(seed)
    triples: list[tuple[str, str, str]] = []
    for i in range(posts):
        p = f"post{i}"
        triples.append((p, TYPE, POST))
        triples.append((p, "content", make_literal(f"body-{i}")))
        triples.append((f"user{i % users}", "creator_of", p))
    for j in range(users):
        triples.append((f"user{j}", TYPE, USER))
    filler = total_triples - len(triples)
    for k in range(max(0, filler)):
        triples.append((f"thing{k}", f"filler{rng.randrange(40)}", f"item{k}"))
    return Dataset.from_strings(triples)


CORRELATED_STAR_QUERY = """
SELECT ?p ?c ?u WHERE {
  ?p <type> <Post> .
  ?p <content> ?c .
  ?u <creator_of> ?p .
}
"""


def uncorrelated_uniform(
    total_triples: int = 10000,
    entities: int = 1200,
    seed: int = 11,
) -> Dataset:
    """Uniform, independent edges; all patterns here have exact bounds."""
    rng = random.Random(seed)
    predicates = ["a", "b", "c", "d"]
    triples: list[tuple[str, str, str]] = []
    for i in range(entities):
        e = f"e{i}"
        for pred in predicates[:3]:
            triples.append((e, pred, f"v{rng.randrange(entities)}"))
    k = 0
    while len(triples) < total_triples:
        triples.append(
            (
                f"e{rng.randrange(entities)}",
                predicates[rng.randrange(len(predicates))],
                f"v{rng.randrange(entities)}",
            )
        )
        k += 1
    return Dataset.from_strings(triples[:total_triples])


UNCORRELATED_STAR_QUERY = """
SELECT ?s ?x ?y ?z WHERE {
  ?s <a> ?x .
  ?s <b> ?y .
  ?s <c> ?z .
}
"""


def adversarial_fanout(
    posts: int = 90,
    hot_posts: int = 5,
    comments: int = 6000,
    seed: int = 23,
) -> Dataset:
    """A fixture where the static plan feeds a huge comment fan-out join.

    The ghost-forum pattern matches two junk subjects that are not typed,
    so the query's mandatory prefix is empty; a static pipeline still scans
    and probes the whole comment table, while an adaptive run detects the
    fan-out step, materializes the (empty) prefix and stops. The comment
    count is >= 50x every other predicate, the blow-up a static order pays.
    """
    rng = random.Random(seed)
    triples: list[tuple[str, str, str]] = []
    for i in range(posts):
        p = f"post{i}"
        triples.append((p, TYPE, POST))
        triples.append((p, "in_forum", f"forum{i % 7}"))
        likes = 5 if i < hot_posts else 1
        for j in range(likes):
            triples.append((p, "liked_by", f"fan{(i * 7 + j) % 50}"))
    triples.append(("junk1", "in_forum", "GhostForum"))
    triples.append(("junk2", "in_forum", "GhostForum"))
    for m in range(comments):
        triples.append((f"comment{m}", "comment_on", f"post{m % hot_posts}"))
    return Dataset.from_strings(triples)


ADVERSARIAL_QUERY = """
SELECT ?p ?l ?m WHERE {
  ?p <in_forum> <GhostForum> .
  ?p <type> <Post> .
  ?p <liked_by> ?l .
  ?m <comment_on> ?p .
}
"""
