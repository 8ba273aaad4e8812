"""Cardinality and selectivity estimation with error intervals.

Point estimates follow the independence assumption for triple patterns and
the containment assumption for joins. Alongside every point estimate the
module can compute a [lo, hi] interval for the *real* cardinality from the
same single-value histograms; the ratio interval/estimate is the error
bound that drives mid-query re-optimization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .errors import DegenerateCard, ZeroEstimate
from .store import Stats, TermDictionary

JOIN_TYPES = ("SS", "SO", "OO", "SP", "OP", "PP", "NONE")

# Default selectivities for filter constraints; tunable plumbing.
EQUALITY_SELECTIVITY = 0.1
RANGE_SELECTIVITY = 1.0 / 3.0
REGEX_SELECTIVITY = 0.25
FILTER_ERROR_LO = 0.5
FILTER_ERROR_HI = 2.0


@dataclass(frozen=True)
class CardinalityInterval:
    """[lo, hi] bounds on a real cardinality; exact values have lo == hi."""

    lo: float
    hi: float

    @classmethod
    def point(cls, value: float) -> "CardinalityInterval":
        return cls(value, value)

    @property
    def is_empty(self) -> bool:
        return self.hi <= 0.0


@dataclass(frozen=True)
class ErrorEstimate:
    """Interval of the ratio real/estimated cardinality."""

    lo: float
    hi: float

    @classmethod
    def point(cls, value: float) -> "ErrorEstimate":
        return cls(value, value)


def _bound_count(atom, stats: Stats, dictionary: TermDictionary, role: str) -> Optional[int]:
    """Histogram count for a bound position, or None when the atom is a var."""
    if atom.is_var():
        return None
    tid = dictionary.lookup(atom.value)
    if tid is None:
        return 0
    return stats.count(tid, role)


def estimate_tp(tp, stats: Stats, dictionary: TermDictionary) -> float:
    """Independence estimate |D| * p(S) * p(P) * p(O); 0 when a term is absent."""
    size = stats.size
    if size == 0:
        return 0.0
    p = 1.0
    for role, atom in tp.atoms():
        count = _bound_count(atom, stats, dictionary, role)
        if count is None:
            continue
        if count == 0:
            return 0.0
        p *= count / size
    return p * size


def estimate_join(card_i: float, card_j: float, jt: str) -> float:
    """Containment estimate of a join; Cartesian product when jt is NONE."""
    if jt == "NONE":
        return card_i * card_j
    return card_i * card_j / max(card_i, card_j, 1.0)


def tp_bounds(
    tp,
    stats: Stats,
    dictionary: TermDictionary,
    contains: Optional[Callable[[str, str, str], bool]] = None,
) -> CardinalityInterval:
    """Real-cardinality bounds for one pattern.

    Patterns with two or more variables are captured exactly by the
    histograms. One-variable patterns get [max(1, product/|D|), min(counts)].
    Fully bound patterns need a point-lookup callable.
    """
    counts: list[int] = []
    for role, atom in tp.atoms():
        c = _bound_count(atom, stats, dictionary, role)
        if c is not None:
            if c == 0:
                return CardinalityInterval(0.0, 0.0)
            counts.append(c)

    n_bound = len(counts)
    if n_bound == 0:
        return CardinalityInterval.point(float(stats.size))
    if n_bound == 1:
        return CardinalityInterval.point(float(counts[0]))
    if n_bound == 2:
        size = max(stats.size, 1)
        lo = max(1.0, counts[0] * counts[1] / size)
        hi = float(min(counts))
        return CardinalityInterval(lo, hi)
    if contains is None:
        raise ValueError("fully bound pattern needs a point-lookup callable")
    present = contains(tp.s.value, tp.p.value, tp.o.value)
    return CardinalityInterval.point(1.0 if present else 0.0)


def join_selectivity_bounds(jt: str, card_i: float, card_j: float) -> tuple[float, float]:
    """Selectivity interval of one join predicate (Cartesian: exactly 1)."""
    if jt == "NONE":
        return (1.0, 1.0)
    if card_i < 1.0 or card_j < 1.0:
        raise DegenerateCard(f"cards ({card_i}, {card_j}) must be >= 1")
    lo = 1.0 / (card_i * card_j)
    if jt in ("SS", "OO", "PP"):
        return (lo, 1.0 / max(card_i, card_j))
    return (lo, 1.0)


def cs_bounds(steps: list[tuple[CardinalityInterval, Optional[str]]]) -> CardinalityInterval:
    """Bounds for a chain of joined patterns.

    `steps` pairs each pattern interval with the join type linking it to the
    chain built so far (the first entry's type is ignored). Selectivity
    bounds for each step are evaluated at the hi cardinalities of the
    accumulated chain and the incoming pattern; that keeps the map monotone
    in every input interval (widening never narrows the output) while
    reproducing the worked-example arithmetic. lo clamps to >= 1 unless
    some operand is impossible.
    """
    if not steps:
        raise ValueError("need at least one step")
    if any(iv.is_empty for iv, _ in steps):
        return CardinalityInterval(0.0, 0.0)
    lo = steps[0][0].lo
    hi = steps[0][0].hi
    for k in range(1, len(steps)):
        iv, jt = steps[k]
        jt = jt or "NONE"
        sel_lo, sel_hi = join_selectivity_bounds(jt, max(hi, 1.0), max(iv.hi, 1.0))
        lo *= iv.lo * sel_lo
        hi *= iv.hi * sel_hi
    return CardinalityInterval(max(lo, 1.0), hi)


def propagate_error(
    op: str,
    eps_j: ErrorEstimate,
    eps_k: Optional[ErrorEstimate] = None,
    eps_sel: Optional[ErrorEstimate] = None,
) -> ErrorEstimate:
    """Combine child error ratios across one operator.

    And/Opt multiply the child errors with the join-selectivity error; Or
    takes the endpoint-wise max of its children; Filter is governed by the
    constraint-selectivity error alone.
    """
    sel = eps_sel or ErrorEstimate.point(1.0)
    if op in ("And", "Opt"):
        k = eps_k or ErrorEstimate.point(1.0)
        return ErrorEstimate(eps_j.lo * k.lo * sel.lo, eps_j.hi * k.hi * sel.hi)
    if op == "Or":
        k = eps_k or eps_j
        return ErrorEstimate(max(eps_j.lo, k.lo), max(eps_j.hi, k.hi))
    if op == "Filter":
        return sel
    raise ValueError(f"unknown operator {op!r}")


def error_ratio(real: float, est: float) -> float:
    """real/estimated; < 1 flags an over-estimate, > 1 an under-estimate."""
    if est == 0.0:
        if real == 0.0:
            return 1.0
        raise ZeroEstimate(f"real cardinality {real} with zero estimate")
    return real / est


def adjusted_upper_error(bounds: CardinalityInterval, est: float, sigma: float) -> float:
    """Upper error after scaling the hi bound down by sigma (never below lo)."""
    if est <= 0.0:
        raise ZeroEstimate("adjusted error needs a positive estimate")
    return max(bounds.lo, sigma * bounds.hi) / est


def check_error_condition(
    bounds_current_next: CardinalityInterval,
    est_current_next: float,
    bounds_alt_next: CardinalityInterval,
    est_alt_next: float,
    sigma: float,
) -> bool:
    """True (keep going) iff the current ordering's adjusted upper error does
    not exceed the best alternative's."""
    eps_cur = adjusted_upper_error(bounds_current_next, est_current_next, sigma)
    eps_alt = adjusted_upper_error(bounds_alt_next, est_alt_next, sigma)
    return eps_cur <= eps_alt


# ---------------------------------------------------------------------------
# Join classification
# ---------------------------------------------------------------------------

def tp_positions(tp) -> dict[str, str]:
    """First position (S < P < O) of each variable in a pattern."""
    out: dict[str, str] = {}
    for pos, name in tp.variables():
        out.setdefault(name, pos)
    return out


def classify_join(
    left_positions: dict[str, str],
    right_positions: dict[str, str],
    var_order: dict[str, int],
) -> tuple[str, Optional[str]]:
    """Join type between two operands given each side's variable positions.

    With several shared variables the first one (lowest query-order id)
    decides; no shared variable means a Cartesian product.
    """
    shared = set(left_positions) & set(right_positions)
    if not shared:
        return "NONE", None
    var = min(shared, key=lambda v: (var_order.get(v, len(var_order)), v))
    pair = frozenset((left_positions[var], right_positions[var]))
    if pair == frozenset(("S",)):
        kind = "SS"
    elif pair == frozenset(("S", "O")):
        kind = "SO"
    elif pair == frozenset(("O",)):
        kind = "OO"
    elif pair == frozenset(("S", "P")):
        kind = "SP"
    elif pair == frozenset(("O", "P")):
        kind = "OP"
    else:
        kind = "PP"
    return kind, var


def constraint_selectivity(constraint) -> float:
    """Product of per-comparison default selectivities for one constraint."""
    sel = 1.0
    for expr in constraint.exprs:
        if expr.op == "=":
            sel *= EQUALITY_SELECTIVITY
        elif expr.op == "regex":
            sel *= REGEX_SELECTIVITY
        elif expr.op == "!=":
            sel *= 1.0 - EQUALITY_SELECTIVITY
        else:
            sel *= RANGE_SELECTIVITY
    return sel


def filter_error_interval() -> ErrorEstimate:
    return ErrorEstimate(FILTER_ERROR_LO, FILTER_ERROR_HI)
