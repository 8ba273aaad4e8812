"""Greedy plan construction over the query relation graph.

The output is a candidate sequence: a binary operator tree whose leaves are
triple patterns (or one materialized relation) and whose spine carries the
execution order. Selection order inside each operator group follows the
pattern-shape heuristic (fewer/cheaper incoming variable edges first), with
star-shaped runs preferred among otherwise equal candidates; filters are
attached at the first point their variable is fully bound; patterns on the
optional side of a left-outer-join are never scheduled before the variables
they share with mandatory patterns.

Equivalence rewrites (position exchange inside And-only/Or-only regions,
the four distribution rules) are provided for testing and for comparing
alternative orderings; plan construction itself never distributes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .errors import NotExchangeable, PlanningStuck, ShapeMismatch
from .frontend import AND, FILTER, OPT, OR, Constraint, TriplePattern
from .qrg import QRG, LeafVertex, OpId

# ---------------------------------------------------------------------------
# Candidate sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PatternLeaf:
    tp: TriplePattern

    @property
    def label(self) -> str:
        return f"T{self.tp.id}"


@dataclass(frozen=True)
class RelationLeaf:
    rel_id: int

    @property
    def label(self) -> str:
        return f"R{self.rel_id}"


@dataclass(frozen=True)
class CSNode:
    op: str  # And | Or | Opt
    left: "CS"
    right: "CS"


@dataclass(frozen=True)
class CSFilter:
    child: "CS"
    constraint: Constraint
    label: str


CS = Union[PatternLeaf, RelationLeaf, CSNode, CSFilter]


def cs_to_string(cs: CS) -> str:
    """Parenthesized plan notation; the outermost node carries no parens."""

    def fmt(node: CS) -> str:
        if isinstance(node, (PatternLeaf, RelationLeaf)):
            return node.label
        return "(" + body(node) + ")"

    def body(node: CS) -> str:
        if isinstance(node, (PatternLeaf, RelationLeaf)):
            return node.label
        if isinstance(node, CSFilter):
            return f"{fmt(node.child)} Filter {node.label}"
        return f"{fmt(node.left)} {node.op} {fmt(node.right)}"

    return body(cs)


def cs_leaves(cs: CS) -> list[Union[PatternLeaf, RelationLeaf]]:
    if isinstance(cs, (PatternLeaf, RelationLeaf)):
        return [cs]
    if isinstance(cs, CSFilter):
        return cs_leaves(cs.child)
    return cs_leaves(cs.left) + cs_leaves(cs.right)


@dataclass(frozen=True)
class LinStep:
    """One step of the left-spine linearization.

    `op` is None for the opening unit, an operator for joins, or Filter for
    a constraint applied to the accumulated prefix (consuming no leaf).
    Or-subtrees stay opaque: execution never stops inside a union branch.
    """

    op: Optional[str]
    unit: Optional[CS]
    constraint: Optional[CSFilter] = None


def linearize(cs: CS) -> list[LinStep]:
    steps: list[LinStep] = []

    def walk(node: CS) -> None:
        if isinstance(node, CSNode) and node.op in (AND, OPT):
            walk(node.left)
            steps.append(LinStep(node.op, node.right))
        elif isinstance(node, CSFilter):
            walk(node.child)
            steps.append(LinStep(FILTER, None, node))
        else:
            steps.append(LinStep(None, node))

    walk(cs)
    return steps


# ---------------------------------------------------------------------------
# Heuristic ordering
# ---------------------------------------------------------------------------

_CLASS_ORDER = {
    frozenset(): 0,
    frozenset("P"): 1,
    frozenset("S"): 2,
    frozenset("O"): 3,
    frozenset("SP"): 4,
    frozenset("PO"): 5,
    frozenset("SO"): 6,
    frozenset("SPO"): 7,
}


def incidence_class(leaf: LeafVertex) -> frozenset[str]:
    labels: set[str] = set()
    for positions in leaf.var_edges.values():
        labels.update(positions)
    return frozenset(labels)


def incidence_rank(leaf: LeafVertex) -> int:
    return _CLASS_ORDER[incidence_class(leaf)]


def h1_rank(g: QRG, candidates: set[int]) -> list[int]:
    """Candidates ordered by incidence class, then weight, then id."""
    if not candidates:
        raise ValueError("no candidates to rank")
    return sorted(
        candidates,
        key=lambda lid: (incidence_rank(g.leaves[lid]), g.leaves[lid].weight, lid),
    )


def _shares_star(current: Optional[LeafVertex], cand: LeafVertex) -> bool:
    """True when both vertices hang off one variable with the same label."""
    if current is None:
        return False
    for var, positions in cand.var_edges.items():
        cur_positions = current.var_edges.get(var)
        if not cur_positions:
            continue
        if set(positions) & set(cur_positions):
            return True
    return False


# ---------------------------------------------------------------------------
# Plan construction
# ---------------------------------------------------------------------------

@dataclass
class _PendingFilter:
    constraint: Constraint
    label: str
    anchor: OpId
    occurrences: frozenset[int]  # leaves in scope binding the filter vars
    attached: bool = False


class _PlanState:
    def __init__(self, g: QRG):
        self.g = g
        self.arranged: set[int] = set()
        self.current: Optional[LeafVertex] = None
        self.bound_vars: set[str] = set()
        self.first_pick = True
        self.optional_leaves = g.optional_leaves()
        self.seed = self._choose_seed()
        self.pending: dict[OpId, list[_PendingFilter]] = {}
        for op_id in sorted(g.ops):
            entries = []
            for c in g.ops[op_id].constraints:
                scope = g.subtree_leaves(("op", op_id))
                occ = frozenset(
                    lid
                    for var in c.variables()
                    for lid, _pos in g.var_edges.get(var, [])
                    if lid in scope
                )
                entries.append(
                    _PendingFilter(
                        c, g.constraint_labels.get(c.ordinal, f"C{c.ordinal}"), op_id, occ
                    )
                )
            if entries:
                self.pending[op_id] = entries

    def _choose_seed(self) -> int:
        materialized = sorted(
            lid for lid, leaf in self.g.leaves.items() if leaf.is_materialized
        )
        if materialized:
            return materialized[0]
        mandatory = set(self.g.leaves) - self.optional_leaves
        pool = mandatory or set(self.g.leaves)
        return h1_rank(self.g, pool)[0]

    def arrange(self, lid: int) -> None:
        leaf = self.g.leaves[lid]
        self.arranged.add(lid)
        self.bound_vars.update(leaf.var_edges)
        self.current = leaf
        self.first_pick = False


def plan_cs(g: QRG) -> CS:
    """Greedy candidate-sequence generation; deterministic for a fixed graph."""
    if not g.leaves:
        raise PlanningStuck("graph has no pattern vertices")
    st = _PlanState(g)
    cs = _plan_op(g, g.root_id, st)
    if len(st.arranged) != len(g.leaves):
        raise PlanningStuck("planner did not cover every pattern")  # pragma: no cover
    return cs


def _leaf_cs(g: QRG, lid: int) -> CS:
    leaf = g.leaves[lid]
    if leaf.is_materialized:
        return RelationLeaf(leaf.rel_id)
    assert leaf.tp is not None
    return PatternLeaf(leaf.tp)


def _plan_op(g: QRG, op_id: OpId, st: _PlanState) -> CS:
    op = g.ops[op_id]
    if op.kind == OPT:
        assert len(op.children) == 2
        left = _plan_unit(g, op.children[0], st)
        right = _plan_unit(g, op.children[1], st)
        node: CS = CSNode(OPT, left, right)
        return _attach_group_end(g, op_id, st, node)

    acc: Optional[CS] = None
    member_leaves = [ident for kind, ident in op.children if kind == "leaf"]
    child_ops = [ident for kind, ident in op.children if kind == "op"]
    remaining_ops = list(child_ops)

    while True:
        leaf_cands = [lid for lid in member_leaves if lid not in st.arranged]
        pick = _pick_unit(g, st, leaf_cands, remaining_ops)
        if pick is None:
            break
        kind, ident = pick
        if kind == "leaf":
            st.arrange(ident)
            unit: CS = _leaf_cs(g, ident)
            unit_leaves = {ident}
        else:
            remaining_ops.remove(ident)
            unit = _plan_op(g, ident, st)
            unit_leaves = g.subtree_leaves(("op", ident))
        if op.kind == AND:
            unit, acc = _attach_filters(g, op_id, st, unit, unit_leaves, acc)
        acc = unit if acc is None else CSNode(op.kind, acc, unit)

    assert acc is not None
    return _attach_group_end(g, op_id, st, acc)


def _plan_unit(g: QRG, child: tuple[str, int], st: _PlanState) -> CS:
    kind, ident = child
    if kind == "leaf":
        st.arrange(ident)
        return _leaf_cs(g, ident)
    return _plan_op(g, ident, st)


def _pick_unit(
    g: QRG,
    st: _PlanState,
    leaf_cands: list[int],
    op_units: list[OpId],
) -> Optional[tuple[str, int]]:
    if not leaf_cands and not op_units:
        return None

    if st.first_pick:
        if st.seed in leaf_cands:
            return ("leaf", st.seed)
        for ident in op_units:
            if st.seed in g.subtree_leaves(("op", ident)) and _opt_gate_passes(
                g, ident, st
            ):
                return ("op", ident)

    if leaf_cands:
        best = min(
            leaf_cands,
            key=lambda lid: (
                incidence_rank(g.leaves[lid]),
                g.leaves[lid].weight,
                0 if _shares_star(st.current, g.leaves[lid]) else 1,
                lid,
            ),
        )
        return ("leaf", best)

    admissible = [ident for ident in op_units if _opt_gate_passes(g, ident, st)]
    pool = admissible or op_units
    best_op = min(pool, key=lambda ident: (_unit_hop_rank(g, ident, st), ident))
    return ("op", best_op)


def _unit_hop_rank(g: QRG, op_id: OpId, st: _PlanState) -> int:
    unit_vars: set[str] = set()
    for lid in g.subtree_leaves(("op", op_id)):
        unit_vars.update(g.leaves[lid].var_edges)
    return 0 if unit_vars & st.bound_vars else 1


def _opt_gate_passes(g: QRG, op_id: OpId, st: _PlanState) -> bool:
    """An Opt subtree may only start once every variable of its optional side
    has all its mandatory occurrences outside the subtree arranged."""
    op = g.ops[op_id]
    if op.kind != OPT:
        return True
    subtree = g.subtree_leaves(("op", op_id))
    gate_vars: set[str] = set()
    for lid in g.subtree_leaves(op.children[1]):
        gate_vars.update(g.leaves[lid].var_edges)
    for var in gate_vars:
        for lid, _pos in g.var_edges.get(var, []):
            if lid in subtree or lid in st.optional_leaves:
                continue
            if lid not in st.arranged:
                return False
    return True


def _attach_filters(
    g: QRG,
    op_id: OpId,
    st: _PlanState,
    unit: CS,
    unit_leaves: set[int],
    acc: Optional[CS],
) -> tuple[CS, Optional[CS]]:
    """Attach every anchor-local constraint that became applicable with this
    unit: wrapping the unit itself when it holds all occurrences, else the
    accumulated prefix (after the unit is appended by the caller)."""
    late: list[_PendingFilter] = []
    for pf in st.pending.get(op_id, []):
        if pf.attached or not pf.occurrences:
            continue
        if not pf.occurrences <= st.arranged:
            continue
        pf.attached = True
        if pf.occurrences <= unit_leaves:
            unit = CSFilter(unit, pf.constraint, pf.label)
        else:
            late.append(pf)
    for pf in late:
        # occurrences span earlier units; filter the joined prefix instead
        joined = unit if acc is None else CSNode(AND, acc, unit)
        acc, unit = None, CSFilter(joined, pf.constraint, pf.label)
    return unit, acc


def _attach_group_end(g: QRG, op_id: OpId, st: _PlanState, acc: CS) -> CS:
    for pf in st.pending.get(op_id, []):
        if not pf.attached:
            pf.attached = True
            acc = CSFilter(acc, pf.constraint, pf.label)
    return acc


# ---------------------------------------------------------------------------
# Equivalence rewrites
# ---------------------------------------------------------------------------

def _subtree_at(cs: CS, path: tuple[int, ...]) -> CS:
    node = cs
    for step in path:
        if isinstance(node, CSFilter):
            if step != 0:
                raise ShapeMismatch("filter nodes have a single child")
            node = node.child
        elif isinstance(node, CSNode):
            node = node.left if step == 0 else node.right
        else:
            raise ShapeMismatch("path descends below a leaf")
    return node


def _replace_at(cs: CS, path: tuple[int, ...], replacement: CS) -> CS:
    if not path:
        return replacement
    head, rest = path[0], path[1:]
    if isinstance(cs, CSFilter):
        return CSFilter(_replace_at(cs.child, rest, replacement), cs.constraint, cs.label)
    if isinstance(cs, CSNode):
        if head == 0:
            return CSNode(cs.op, _replace_at(cs.left, rest, replacement), cs.right)
        return CSNode(cs.op, cs.left, _replace_at(cs.right, rest, replacement))
    raise ShapeMismatch("path descends below a leaf")


def _flatten_units(node: CS, op: str) -> list[CS]:
    if isinstance(node, CSNode) and node.op == op:
        return _flatten_units(node.left, op) + _flatten_units(node.right, op)
    return [node]


def rewrite_exchange(cs: CS, region_path: tuple[int, ...], i: int, j: int) -> CS:
    """Swap operand positions i and j inside one And-only or Or-only subtree.

    The subtree is re-folded left-deep over its operand units; opaque units
    (filtered leaves, nested other-operator trees) move as a whole.
    """
    subtree = _subtree_at(cs, region_path)
    if not isinstance(subtree, CSNode) or subtree.op not in (AND, OR):
        raise NotExchangeable(f"subtree at {region_path} is not an And/Or region")
    units = _flatten_units(subtree, subtree.op)
    if not (0 <= i < len(units) and 0 <= j < len(units)):
        raise NotExchangeable(f"positions ({i}, {j}) outside the region")
    units[i], units[j] = units[j], units[i]
    rebuilt = units[0]
    for unit in units[1:]:
        rebuilt = CSNode(subtree.op, rebuilt, unit)
    return _replace_at(cs, region_path, rebuilt)


def rewrite_distribute(cs: CS, rule: int, path: tuple[int, ...] = ()) -> CS:
    """Apply one distribution rule at `path`:

    1. (A And (B Or C)) -> ((A And C) Or (A And B))
    2. (A Opt (B Or C)) -> ((A Opt C) Or (A Opt B))
    3. ((A Or B) Opt C) -> ((A Opt C) Or (B Opt C))
    4. ((A Or B) Filter C) -> ((A Filter C) Or (B Filter C))
    """
    node = _subtree_at(cs, path)
    if rule == 1:
        if (
            isinstance(node, CSNode)
            and node.op == AND
            and isinstance(node.right, CSNode)
            and node.right.op == OR
        ):
            a, b, c = node.left, node.right.left, node.right.right
            out: CS = CSNode(OR, CSNode(AND, a, c), CSNode(AND, a, b))
            return _replace_at(cs, path, out)
        raise ShapeMismatch("rule 1 needs (A And (B Or C))")
    if rule == 2:
        if (
            isinstance(node, CSNode)
            and node.op == OPT
            and isinstance(node.right, CSNode)
            and node.right.op == OR
        ):
            a, b, c = node.left, node.right.left, node.right.right
            out = CSNode(OR, CSNode(OPT, a, c), CSNode(OPT, a, b))
            return _replace_at(cs, path, out)
        raise ShapeMismatch("rule 2 needs (A Opt (B Or C))")
    if rule == 3:
        if (
            isinstance(node, CSNode)
            and node.op == OPT
            and isinstance(node.left, CSNode)
            and node.left.op == OR
        ):
            a, b, c = node.left.left, node.left.right, node.right
            out = CSNode(OR, CSNode(OPT, a, c), CSNode(OPT, b, c))
            return _replace_at(cs, path, out)
        raise ShapeMismatch("rule 3 needs ((A Or B) Opt C)")
    if rule == 4:
        if (
            isinstance(node, CSFilter)
            and isinstance(node.child, CSNode)
            and node.child.op == OR
        ):
            a, b = node.child.left, node.child.right
            out = CSNode(
                OR,
                CSFilter(a, node.constraint, node.label),
                CSFilter(b, node.constraint, node.label),
            )
            return _replace_at(cs, path, out)
        raise ShapeMismatch("rule 4 needs ((A Or B) Filter C)")
    raise ShapeMismatch(f"unknown rule {rule}")
