"""Physical plan compilation and bag-semantics evaluation.

A candidate sequence maps directly onto physical operators: joins for And,
a padded-schema union for Or, a left outer join for Opt, row filters for
constraints. Rows are tuples over an ordered variable schema with None for
unbound cells; join matching follows solution-mapping compatibility, so an
unbound shared variable matches anything and adopts the other side's value.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass
from typing import Optional, Union

from .errors import QueryTimeout, UnresolvedLeaf
from .frontend import AND, OPT, OR, Constraint, FilterExpr, Modifiers, TriplePattern
from .planner import CS, CSFilter, CSNode, PatternLeaf, RelationLeaf
from .store import Dataset, Relation, lexical_form, scan

log = logging.getLogger(__name__)

_TIMEOUT_CHECK_EVERY = 4096


@dataclass
class Scan:
    tp: TriplePattern
    schema: tuple[str, ...]


@dataclass
class FetchIntermediate:
    rel_id: int
    schema: tuple[str, ...]


@dataclass
class HashJoin:
    left: "PhysicalPlan"
    right: "PhysicalPlan"
    shared: tuple[str, ...]
    schema: tuple[str, ...]


@dataclass
class LeftOuterJoin:
    left: "PhysicalPlan"
    right: "PhysicalPlan"
    shared: tuple[str, ...]
    schema: tuple[str, ...]


@dataclass
class UnionOp:
    left: "PhysicalPlan"
    right: "PhysicalPlan"
    schema: tuple[str, ...]


@dataclass
class FilterOp:
    child: "PhysicalPlan"
    constraint: Constraint
    schema: tuple[str, ...]


@dataclass
class Project:
    child: "PhysicalPlan"
    schema: tuple[str, ...]


@dataclass
class Distinct:
    child: "PhysicalPlan"
    schema: tuple[str, ...]


@dataclass
class Sort:
    child: "PhysicalPlan"
    keys: tuple[tuple[str, bool], ...]
    schema: tuple[str, ...]


@dataclass
class Slice:
    child: "PhysicalPlan"
    limit: Optional[int]
    offset: Optional[int]
    schema: tuple[str, ...]


PhysicalPlan = Union[
    Scan, FetchIntermediate, HashJoin, LeftOuterJoin, UnionOp, FilterOp,
    Project, Distinct, Sort, Slice,
]


def _pattern_schema(tp: TriplePattern) -> tuple[str, ...]:
    out: list[str] = []
    for _pos, name in tp.variables():
        if name not in out:
            out.append(name)
    return tuple(out)


def _merged_schema(left: tuple[str, ...], right: tuple[str, ...]) -> tuple[str, ...]:
    return left + tuple(v for v in right if v not in left)


def compile_cs(
    cs: CS,
    projection: Optional[list[str]],
    modifiers: Optional[Modifiers],
    d: Dataset,
) -> PhysicalPlan:
    """Lower a candidate sequence to a physical operator tree.

    Projection/modifiers may be None to compile a bare fragment (used when
    materializing partial results mid-query).
    """
    plan = _compile_node(cs, d)
    if modifiers and modifiers.order_by:
        plan = Sort(plan, modifiers.order_by, plan.schema)
    if projection is not None:
        plan = Project(plan, tuple(projection))
    if modifiers and modifiers.distinct:
        plan = Distinct(plan, plan.schema)
    if modifiers and (modifiers.limit is not None or modifiers.offset is not None):
        plan = Slice(plan, modifiers.limit, modifiers.offset, plan.schema)
    return plan


def _compile_node(cs: CS, d: Dataset) -> PhysicalPlan:
    if isinstance(cs, PatternLeaf):
        return Scan(cs.tp, _pattern_schema(cs.tp))
    if isinstance(cs, RelationLeaf):
        rel = d.intermediates.get(cs.rel_id)
        if rel is None:
            raise UnresolvedLeaf(f"intermediate R{cs.rel_id} is not registered")
        return FetchIntermediate(cs.rel_id, rel.schema)
    if isinstance(cs, CSFilter):
        child = _compile_node(cs.child, d)
        return FilterOp(child, cs.constraint, child.schema)
    assert isinstance(cs, CSNode)
    left = _compile_node(cs.left, d)
    right = _compile_node(cs.right, d)
    schema = _merged_schema(left.schema, right.schema)
    shared = tuple(v for v in left.schema if v in right.schema)
    if cs.op == AND:
        return HashJoin(left, right, shared, schema)
    if cs.op == OPT:
        return LeftOuterJoin(left, right, shared, schema)
    assert cs.op == OR
    return UnionOp(left, right, schema)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

class _Budget:
    def __init__(self, deadline: Optional[float], budget_ms: Optional[float] = None):
        self.deadline = deadline
        self.budget_ms = budget_ms or 0.0
        self._tick = 0

    def check(self, amount: int = 1) -> None:
        if self.deadline is None:
            return
        self._tick += amount
        if self._tick >= _TIMEOUT_CHECK_EVERY:
            self._tick = 0
            if time.monotonic() > self.deadline:
                raise QueryTimeout(self.budget_ms)


def execute(
    plan: PhysicalPlan,
    d: Dataset,
    deadline: Optional[float] = None,
    budget_ms: Optional[float] = None,
) -> Relation:
    """Evaluate a plan to a relation (a bag; row order is deterministic)."""
    budget = _Budget(deadline, budget_ms)
    rows = _eval(plan, d, budget)
    return Relation(plan.schema, rows)


def _eval(plan: PhysicalPlan, d: Dataset, budget: _Budget) -> list[tuple]:
    if isinstance(plan, Scan):
        budget.check(_TIMEOUT_CHECK_EVERY)
        return scan(d, plan.tp).rows
    if isinstance(plan, FetchIntermediate):
        rel = d.intermediates.get(plan.rel_id)
        if rel is None:
            raise UnresolvedLeaf(f"intermediate R{plan.rel_id} is not registered")
        return rel.rows
    if isinstance(plan, HashJoin):
        left_rows = _eval(plan.left, d, budget)
        right_rows = _eval(plan.right, d, budget)
        return _join(
            left_rows, plan.left.schema, right_rows, plan.right.schema,
            plan.shared, plan.schema, outer=False, budget=budget,
        )
    if isinstance(plan, LeftOuterJoin):
        left_rows = _eval(plan.left, d, budget)
        right_rows = _eval(plan.right, d, budget)
        return _join(
            left_rows, plan.left.schema, right_rows, plan.right.schema,
            plan.shared, plan.schema, outer=True, budget=budget,
        )
    if isinstance(plan, UnionOp):
        left_rows = _eval(plan.left, d, budget)
        right_rows = _eval(plan.right, d, budget)
        out: list[tuple] = []
        for row in left_rows:
            out.append(_pad(row, plan.left.schema, plan.schema))
        for row in right_rows:
            out.append(_pad(row, plan.right.schema, plan.schema))
        return out
    if isinstance(plan, FilterOp):
        child_rows = _eval(plan.child, d, budget)
        schema = plan.child.schema
        out = []
        for row in child_rows:
            budget.check()
            binding = {
                v: (None if row[i] is None else d.dict.decode(row[i]))
                for i, v in enumerate(schema)
            }
            if all(eval_filter(e, binding) for e in plan.constraint.exprs):
                out.append(row)
        return out
    if isinstance(plan, Project):
        child_rows = _eval(plan.child, d, budget)
        child_schema = plan.child.schema
        idx = [child_schema.index(v) if v in child_schema else None for v in plan.schema]
        return [
            tuple(row[i] if i is not None else None for i in idx)
            for row in child_rows
        ]
    if isinstance(plan, Distinct):
        child_rows = _eval(plan.child, d, budget)
        seen: set[tuple] = set()
        out = []
        for row in child_rows:
            if row not in seen:
                seen.add(row)
                out.append(row)
        return out
    if isinstance(plan, Sort):
        child_rows = _eval(plan.child, d, budget)
        schema = plan.child.schema
        rows = list(child_rows)
        for var, ascending in reversed(plan.keys):
            col = schema.index(var)
            rows.sort(key=lambda r: _sort_key(r[col], d), reverse=not ascending)
        return rows
    if isinstance(plan, Slice):
        child_rows = _eval(plan.child, d, budget)
        start = plan.offset or 0
        end = None if plan.limit is None else start + plan.limit
        return child_rows[start:end]
    raise TypeError(f"unknown plan node {plan!r}")


def _pad(row: tuple, schema: tuple[str, ...], out_schema: tuple[str, ...]) -> tuple:
    pos = {v: i for i, v in enumerate(schema)}
    return tuple(row[pos[v]] if v in pos else None for v in out_schema)


def _sort_key(cell, d: Dataset):
    """Unbound first, then numerics by value, then strings by codepoint."""
    if cell is None:
        return (0, 0.0, "")
    lexical = lexical_form(d.dict.decode(cell))
    try:
        return (1, float(lexical), lexical)
    except ValueError:
        return (2, 0.0, lexical)


def _join(
    left_rows: list[tuple],
    left_schema: tuple[str, ...],
    right_rows: list[tuple],
    right_schema: tuple[str, ...],
    shared: tuple[str, ...],
    out_schema: tuple[str, ...],
    outer: bool,
    budget: _Budget,
) -> list[tuple]:
    """Compatibility join. Rows whose shared variables are all bound go
    through a hash table; rows with unbound shared cells are compared
    pairwise (they are compatible with anything at those positions)."""
    if not outer and shared and len(left_rows) <= len(right_rows):
        # smaller (or tied) side builds the hash table
        left_rows, right_rows = right_rows, left_rows
        left_schema, right_schema = right_schema, left_schema

    left_idx = [left_schema.index(v) for v in shared]
    right_idx = [right_schema.index(v) for v in shared]

    if not shared:
        out = []
        for lrow in left_rows:
            budget.check(max(1, len(right_rows)))
            for rrow in right_rows:
                out.append(_merge(lrow, left_schema, rrow, right_schema, out_schema))
            if outer and not right_rows:
                out.append(_pad(lrow, left_schema, out_schema))
        return out

    buckets: dict[tuple, list[tuple]] = {}
    wild: list[tuple] = []
    for rrow in right_rows:
        key = tuple(rrow[i] for i in right_idx)
        if any(k is None for k in key):
            wild.append(rrow)
        else:
            buckets.setdefault(key, []).append(rrow)

    out = []
    for lrow in left_rows:
        budget.check()
        key = tuple(lrow[i] for i in left_idx)
        if any(k is None for k in key):
            candidates = right_rows
        else:
            candidates = buckets.get(key, [])
            if wild:
                candidates = candidates + wild
        matched = False
        for rrow in candidates:
            budget.check()
            if _compatible(lrow, left_idx, rrow, right_idx):
                matched = True
                out.append(_merge(lrow, left_schema, rrow, right_schema, out_schema))
        if outer and not matched:
            out.append(_pad(lrow, left_schema, out_schema))
    return out


def _compatible(lrow: tuple, left_idx: list[int], rrow: tuple, right_idx: list[int]) -> bool:
    for li, ri in zip(left_idx, right_idx):
        lv, rv = lrow[li], rrow[ri]
        if lv is not None and rv is not None and lv != rv:
            return False
    return True


def _merge(
    lrow: tuple,
    left_schema: tuple[str, ...],
    rrow: tuple,
    right_schema: tuple[str, ...],
    out_schema: tuple[str, ...],
) -> tuple:
    lpos = {v: i for i, v in enumerate(left_schema)}
    rpos = {v: i for i, v in enumerate(right_schema)}
    out = []
    for v in out_schema:
        value = None
        if v in lpos and lrow[lpos[v]] is not None:
            value = lrow[lpos[v]]
        elif v in rpos:
            value = rrow[rpos[v]]
        out.append(value)
    return tuple(out)


# ---------------------------------------------------------------------------
# Filter evaluation
# ---------------------------------------------------------------------------

def eval_filter(expr: FilterExpr, binding: dict[str, Optional[str]]) -> bool:
    """Evaluate one atomic filter against decoded term strings.

    Unbound variables and evaluation errors make the row fail (three-valued
    logic collapsed to false); numeric comparison applies when both sides
    parse as numbers, else codepoint comparison of the lexical forms.
    """
    term = binding.get(expr.var)
    if term is None:
        return False
    lexical = lexical_form(term)
    if expr.op == "regex":
        flags = re.IGNORECASE if "i" in expr.flags else 0
        try:
            return re.search(expr.operand, lexical, flags) is not None
        except re.error as exc:
            log.warning("regex filter failed (%s); dropping row", exc)
            return False

    left_num: Optional[float]
    try:
        left_num = float(lexical)
        right_num = float(expr.operand)
    except ValueError:
        left_num = right_num = None

    if left_num is not None and right_num is not None:
        a, b = left_num, right_num
    else:
        a, b = lexical, expr.operand  # type: ignore[assignment]
    if expr.op == "=":
        return a == b
    if expr.op == "!=":
        return a != b
    if expr.op == "<":
        return a < b
    if expr.op == "<=":
        return a <= b
    if expr.op == ">":
        return a > b
    if expr.op == ">=":
        return a >= b
    log.warning("unknown filter operator %r; dropping row", expr.op)
    return False
