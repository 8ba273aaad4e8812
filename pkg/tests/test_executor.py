import random
from collections import Counter

import pytest

from rosie.errors import UnresolvedLeaf
from rosie.executor import (
    FetchIntermediate,
    HashJoin,
    Project,
    Scan,
    UnionOp,
    compile_cs,
    eval_filter,
    execute,
)
from rosie.frontend import FilterExpr, parse_query
from rosie.planner import plan_cs
from rosie.qrg import build_qrg
from rosie.store import Dataset, Relation, register_intermediate

from genqueries import random_dataset, random_query_text
from naive_eval import evaluate_query
from test_store import tp


def engine_bag(q, d):
    g = build_qrg(q, d.stats, d.dict)
    plan = compile_cs(plan_cs(g), q.projection, q.modifiers, d)
    rel = execute(plan, d)
    return Counter(tuple(row) for row in rel.rows)


class TestCompile:
    def test_join_on_shared_variable(self, d_toy):
        q = parse_query("SELECT ?x ?c WHERE { ?x <type> <Post> . ?x <content> ?c . }")
        g = build_qrg(q, d_toy.stats, d_toy.dict)
        plan = compile_cs(plan_cs(g), None, None, d_toy)
        assert isinstance(plan, HashJoin)
        assert plan.shared == ("x",)
        assert isinstance(plan.left, Scan) and isinstance(plan.right, Scan)

    def test_union_pads_schema(self, d_toy):
        q = parse_query(
            "SELECT * WHERE { { ?x <type> <Post> . } UNION { ?x <knows> ?y . } }"
        )
        g = build_qrg(q, d_toy.stats, d_toy.dict)
        plan = compile_cs(plan_cs(g), None, None, d_toy)
        assert isinstance(plan, UnionOp)
        assert set(plan.schema) == {"x", "y"}
        rel = execute(plan, d_toy)
        # post rows leave ?y unbound
        y_col = plan.schema.index("y")
        assert sum(1 for r in rel.rows if r[y_col] is None) == 2

    def test_materialized_leaf_compiles_to_fetch(self, d_toy):
        from rosie.planner import RelationLeaf

        rid = register_intermediate(d_toy, Relation(("x",), [(1,)]))
        plan = compile_cs(RelationLeaf(rid), None, None, d_toy)
        assert isinstance(plan, FetchIntermediate)
        assert execute(plan, d_toy).rows == [(1,)]

    def test_unresolved_leaf(self, d_toy):
        from rosie.planner import RelationLeaf

        with pytest.raises(UnresolvedLeaf):
            compile_cs(RelationLeaf(999), None, None, d_toy)

    def test_cartesian_when_no_shared_variable(self, d_toy):
        q = parse_query("SELECT * WHERE { ?x <knows> ?y . ?a <content> ?c . }")
        g = build_qrg(q, d_toy.stats, d_toy.dict)
        rel = execute(compile_cs(plan_cs(g), q.projection, None, d_toy), d_toy)
        assert rel.exact_cardinality == 1 * 2


class TestExecuteExamples:
    def test_posts_with_content(self, d_toy):
        q = parse_query("SELECT ?x ?c WHERE { ?x <type> <Post> . ?x <content> ?c . }")
        decode = d_toy.dict.decode
        got = {
            (decode(a), decode(b))
            for a, b in engine_bag(q, d_toy)
        }
        assert got == {("p1", '"a"'), ("p2", '"b"')}

    def test_optional_with_no_match_keeps_left_row(self, d_toy):
        q = parse_query(
            "SELECT * WHERE { <u1> <knows> ?y . OPTIONAL { ?y <type> ?t . } }"
        )
        bag = engine_bag(q, d_toy)
        assert len(bag) == 1
        ((y, t),) = bag
        assert d_toy.dict.decode(y) == "u2" and t is None

    def test_empty_scan_annihilates_join(self, d_toy):
        q = parse_query("SELECT * WHERE { ?x <missing> ?y . ?x <type> ?t . }")
        assert not engine_bag(q, d_toy)

    def test_union_padded_rows_join_later(self):
        # a var unbound in one branch is compatible with anything downstream
        d = Dataset.from_strings(
            [
                ("a", "p", "b"),
                ("a", "q", "c"),
                ("b", "r", "w"),
                ("c", "r", "w2"),
            ]
        )
        q = parse_query(
            "SELECT * WHERE { { ?x <p> ?y . } UNION { ?x <q> ?z . } ?y <r> ?w . }"
        )
        assert engine_bag(q, d) == evaluate_query(q, d)


class TestEvalFilter:
    def test_numeric_comparison(self):
        assert eval_filter(FilterExpr("n", ">", "3"), {"n": '"5"'})
        assert not eval_filter(FilterExpr("n", ">", "7"), {"n": '"5"'})

    def test_unbound_is_false(self):
        assert not eval_filter(FilterExpr("n", ">", "3"), {"n": None})
        assert not eval_filter(FilterExpr("n", ">", "3"), {})

    def test_regex_case_insensitive(self):
        expr = FilterExpr("s", "regex", "sep", "i")
        assert eval_filter(expr, {"s": '"Sep2009"'})
        assert not eval_filter(FilterExpr("s", "regex", "sep"), {"s": '"Sep2009"'})

    def test_lexicographic_fallback(self):
        assert eval_filter(FilterExpr("s", "<", "b"), {"s": '"abc"'})
        assert eval_filter(FilterExpr("s", "=", "abc"), {"s": '"abc"'})

    def test_numeric_equality_across_forms(self):
        assert eval_filter(FilterExpr("n", "=", "5"), {"n": '"5.0"'})

    def test_bad_regex_drops_row(self):
        assert not eval_filter(FilterExpr("s", "regex", "("), {"s": '"x"'})

    def test_iri_terms_compare_lexically(self):
        assert eval_filter(FilterExpr("x", "=", "http://a"), {"x": "http://a"})


class TestJoinProperties:
    def test_commutativity_as_bags(self):
        rng = random.Random(17)
        for _ in range(25):
            d = random_dataset(rng, 150)
            a = tp("?x", f"p{rng.randrange(6)}", "?y", tp_id=1)
            b = tp("?y", f"p{rng.randrange(6)}", "?z", tp_id=2)
            from rosie.planner import CSNode, PatternLeaf

            ab = execute(compile_cs(CSNode("And", PatternLeaf(a), PatternLeaf(b)), None, None, d), d)
            ba = execute(compile_cs(CSNode("And", PatternLeaf(b), PatternLeaf(a)), None, None, d), d)

            def norm(rel):
                order = sorted(rel.schema)
                idx = [rel.schema.index(v) for v in order]
                return Counter(tuple(r[i] for i in idx) for r in rel.rows)

            assert norm(ab) == norm(ba)

    def test_union_cardinality_is_sum(self):
        rng = random.Random(23)
        for _ in range(25):
            d = random_dataset(rng, 150)
            from rosie.planner import CSNode, PatternLeaf

            a = PatternLeaf(tp("?x", f"p{rng.randrange(6)}", "?y", tp_id=1))
            b = PatternLeaf(tp("?x", f"p{rng.randrange(6)}", "?z", tp_id=2))
            u = execute(compile_cs(CSNode("Or", a, b), None, None, d), d)
            ra = execute(compile_cs(a, None, None, d), d)
            rb = execute(compile_cs(b, None, None, d), d)
            assert u.exact_cardinality == ra.exact_cardinality + rb.exact_cardinality

    def test_left_rows_survive_outer_join(self):
        rng = random.Random(31)
        for _ in range(25):
            d = random_dataset(rng, 150)
            from rosie.planner import CSNode, PatternLeaf

            a = PatternLeaf(tp("?x", f"p{rng.randrange(6)}", "?y", tp_id=1))
            b = PatternLeaf(tp("?y", f"p{rng.randrange(6)}", "?z", tp_id=2))
            left = execute(compile_cs(a, None, None, d), d)
            loj = execute(compile_cs(CSNode("Opt", a, b), None, None, d), d)
            # every left row appears at least once in the output
            idx = [loj.schema.index(v) for v in left.schema]
            projected = Counter(tuple(r[i] for i in idx) for r in loj.rows)
            for row, count in Counter(left.rows).items():
                assert projected[row] >= count


class TestModifiers:
    def test_order_by_numeric_then_string_unbound_first(self):
        d = Dataset.from_strings(
            [
                ("a", "v", '"10"'),
                ("b", "v", '"2"'),
                ("c", "v", '"x"'),
                ("a", "w", '"1"'),
            ]
        )
        q = parse_query(
            "SELECT ?s ?n WHERE { ?s <v> ?n . OPTIONAL { ?s <w> ?m . } } ORDER BY ?n"
        )
        g = build_qrg(q, d.stats, d.dict)
        rel = execute(compile_cs(plan_cs(g), q.projection, q.modifiers, d), d)
        decoded = [d.dict.decode(r[1]) for r in rel.rows]
        assert decoded == ['"2"', '"10"', '"x"']

    def test_distinct_limit_offset(self):
        d = Dataset.from_strings(
            [("a", "p", "x"), ("b", "p", "x"), ("c", "p", "y"), ("e", "p", "y")]
        )
        q = parse_query(
            "SELECT DISTINCT ?o WHERE { ?s <p> ?o . } ORDER BY ?o LIMIT 1 OFFSET 1"
        )
        g = build_qrg(q, d.stats, d.dict)
        rel = execute(compile_cs(plan_cs(g), q.projection, q.modifiers, d), d)
        assert len(rel.rows) == 1

    def test_projection_order(self, d_toy):
        q = parse_query("SELECT ?c ?x WHERE { ?x <content> ?c . }")
        g = build_qrg(q, d_toy.stats, d_toy.dict)
        plan = compile_cs(plan_cs(g), q.projection, q.modifiers, d_toy)
        assert isinstance(plan, Project)
        assert plan.schema == ("c", "x")


class TestDifferentialSmoke:
    def test_engine_matches_reference_on_random_pairs(self):
        rng = random.Random(1234)
        checked = 0
        for _ in range(70):
            d = random_dataset(rng, 220)
            text = random_query_text(rng, max_tps=6)
            q = parse_query(text)
            expected = evaluate_query(q, d)
            got = engine_bag(q, d)
            assert got == expected, f"mismatch for {text}"
            checked += 1
        assert checked == 70
