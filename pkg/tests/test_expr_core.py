import math

import numpy as np
import pytest

from nsgp.expr_core import (
    BINARY_OPS,
    BinaryOp,
    Constant,
    EpsilonConfig,
    ExprTree,
    MAX_REAL,
    MAX_TREE_SIZE,
    MalformedTreeError,
    UnaryOp,
    Variable,
    VariableIndexError,
    arity,
    eval_tree,
    one_point_mutation,
    parse_infix,
    ramped_half_and_half,
    random_tree,
    size,
    subtree_crossover,
)


def chain(op: str, depth: int, leaf=Variable(0)) -> ExprTree:
    return ExprTree(tuple([UnaryOp(op)] * depth + [leaf]))


class ScriptedRng:
    """Replays queued draws; only the methods the operators use."""

    def __init__(self, integers=(), randoms=(), uniforms=()):
        self._integers = list(integers)
        self._randoms = list(randoms)
        self._uniforms = list(uniforms)

    def integers(self, low, high=None, size=None):
        if size is not None:
            return np.array([self._integers.pop(0) for _ in range(int(size))])
        return self._integers.pop(0)

    def random(self, size=None):
        if size is not None:
            return np.array([self._randoms.pop(0) for _ in range(int(size))])
        return self._randoms.pop(0)

    def uniform(self, low, high, size=None):
        return self._uniforms.pop(0)


class TestTreeStructure:
    def test_size_single_leaf(self):
        assert size(ExprTree((Variable(0),))) == 1

    def test_size_add(self):
        t = ExprTree((BinaryOp("add"), Variable(0), Constant(1.0)))
        assert size(t) == 3

    def test_size_nested_hand_count(self):
        # sub(exp(exp(sin(x0))), x1): 6 prefix nodes
        t = ExprTree(
            (BinaryOp("sub"), UnaryOp("exp"), UnaryOp("exp"), UnaryOp("sin"),
             Variable(0), Variable(1))
        )
        assert size(t) == 6

    def test_depth_conventions(self):
        assert ExprTree((Variable(0),)).depth() == 0
        assert ExprTree((BinaryOp("add"), Variable(0), Variable(1))).depth() == 1
        assert chain("sin", 3).depth() == 3

    def test_malformed_incomplete(self):
        with pytest.raises(MalformedTreeError):
            ExprTree((BinaryOp("add"), Variable(0)))

    def test_malformed_trailing(self):
        with pytest.raises(MalformedTreeError):
            ExprTree((Variable(0), Variable(1)))

    def test_constant_must_be_finite(self):
        with pytest.raises(ValueError):
            Constant(float("inf"))

    def test_unknown_ops_rejected(self):
        with pytest.raises(ValueError):
            UnaryOp("tan")
        with pytest.raises(ValueError):
            BinaryOp("pow")

    def test_subtree_span(self):
        t = ExprTree(
            (BinaryOp("sub"), UnaryOp("exp"), UnaryOp("sin"), Variable(0), Variable(1))
        )
        assert t.subtree_span(0) == (0, 5)
        assert t.subtree_span(1) == (1, 4)
        assert t.subtree_span(4) == (4, 5)


class TestEval:
    def test_identity_leaf(self):
        t = ExprTree((Variable(0),))
        assert eval_tree(t, np.array([[3.5]])) == pytest.approx([3.5])

    def test_div_p_by_zero_is_zero(self):
        t = ExprTree((BinaryOp("div_p"), Variable(0), Variable(1)))
        out = eval_tree(t, np.array([[1.0, 0.0]]))
        assert out[0] == 0.0

    def test_log_p_protected_value(self):
        # ln(|-1| + 1e-6), computed independently
        expected = math.log(1.0 + 1e-6)
        t = ExprTree((UnaryOp("log_p"), Variable(0)))
        out = eval_tree(t, np.array([[-1.0]]))
        assert out[0] == pytest.approx(expected, rel=1e-12)

    def test_div_p_matches_plain_division_away_from_zero(self):
        # protected form deviates from a/b by exactly eps/(|b|+eps) relative
        rng = np.random.default_rng(3)
        t = ExprTree((BinaryOp("div_p"), Variable(0), Variable(1)))
        a = rng.uniform(-10, 10, 500)
        b = rng.uniform(1e-3, 10, 500) * rng.choice([-1.0, 1.0], 500)
        out = eval_tree(t, np.column_stack([a, b]))
        rel = np.abs(out - a / b) / np.abs(a / b)
        assert np.all(rel <= 1e-6 / (np.abs(b) + 1e-6) + 1e-12)
        big = rng.uniform(1e3, 1e6, 500) * rng.choice([-1.0, 1.0], 500)
        out_big = eval_tree(t, np.column_stack([a, big]))
        assert np.allclose(out_big, a / big, rtol=1e-9, atol=0)

    def test_constant_tree_same_value_every_row(self):
        t = ExprTree((UnaryOp("exp"), BinaryOp("mul"), Constant(2.0), Constant(-1.5)))
        out = eval_tree(t, np.random.default_rng(0).normal(size=(50, 3)))
        assert np.all(out == out[0])

    def test_exp_saturates_instead_of_overflowing(self):
        t = ExprTree((UnaryOp("exp"), UnaryOp("exp"), UnaryOp("exp"), Constant(4.9)))
        out = eval_tree(t, np.zeros((2, 1)))
        assert np.isfinite(out).all()
        assert out[0] == MAX_REAL

    def test_variable_out_of_range(self):
        t = ExprTree((Variable(5),))
        with pytest.raises(VariableIndexError) as exc:
            eval_tree(t, np.zeros((3, 2)))
        assert exc.value.index == 5
        assert "x5" in str(exc.value)

    def test_epsilon_must_be_positive(self):
        with pytest.raises(ValueError):
            EpsilonConfig(epsilon=0.0)

    def test_unary_ops_match_numpy(self):
        x = np.linspace(-3, 3, 20)[:, None]
        for op, fn in [("sin", np.sin), ("cos", np.cos), ("exp", np.exp)]:
            out = eval_tree(ExprTree((UnaryOp(op), Variable(0))), x)
            assert np.allclose(out, fn(x[:, 0]))


class TestInfixRoundTrip:
    def test_spec_example_shape(self):
        t = ExprTree((BinaryOp("sub"), UnaryOp("exp"), UnaryOp("sin"), Variable(0), Constant(1.234)))
        assert t.to_infix() == "( exp( sin( x0 ) ) - 1.234 )"
        assert parse_infix(t.to_infix()).nodes == t.nodes

    def test_div_p_and_log_p_spelled_literally(self):
        t = ExprTree((BinaryOp("div_p"), UnaryOp("log_p"), Variable(0), Constant(-2.5)))
        text = t.to_infix()
        assert "div_p" in text and "log_p" in text
        assert parse_infix(text).nodes == t.nodes

    def test_round_trip_random_trees(self):
        rng = np.random.default_rng(11)
        for i in range(2000):
            t = random_tree("grow" if i % 2 else "full", int(rng.integers(0, 7)), 3, rng)
            assert parse_infix(t.to_infix()).nodes == t.nodes

    def test_parse_rejects_garbage(self):
        for bad in ["", "( x0 +", "sin(x0))", "x0 x1", "foo( x0 )"]:
            with pytest.raises(MalformedTreeError):
                parse_infix(bad)


class TestRandomGeneration:
    def test_full_depth_zero_is_leaf(self):
        t = random_tree("full", 0, 2, np.random.default_rng(0))
        assert t.size == 1

    def test_full_trees_have_all_leaves_at_max_depth(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            t = random_tree("full", 2, 2, rng)
            # independent walk collecting leaf depths
            depths = []
            stack = [0]
            for node in t.nodes:
                d = stack.pop()
                if arity(node) == 0:
                    depths.append(d)
                else:
                    stack.extend([d + 1] * arity(node))
            assert set(depths) == {2}

    def test_grow_depth_bounded_and_varied(self):
        rng = np.random.default_rng(2)
        depths = [random_tree("grow", 6, 1, rng).depth() for _ in range(10_000)]
        assert max(depths) <= 6
        assert min(depths) >= 1  # root forced to an operator
        assert any(d < 6 for d in depths)

    def test_ramped_depth_levels_cycle_evenly(self):
        rng = np.random.default_rng(3)
        trees = ramped_half_and_half(1000, 1, 6, 1, rng)
        # reconstruct the documented slot cycle and check it is consistent
        levels = {d: 0 for d in range(1, 7)}
        for i, t in enumerate(trees):
            level = 1 + i % 6
            method_full = (i // 6) % 2 == 1
            levels[level] += 1
            if method_full:
                assert t.depth() == level
            else:
                assert 1 <= t.depth() <= level
        counts = list(levels.values())
        assert max(counts) - min(counts) <= 1
        assert all(abs(c - 1000 / 6) <= 1 for c in counts)

    def test_ramped_two_trees_min_equals_max(self):
        trees = ramped_half_and_half(2, 1, 1, 1, np.random.default_rng(4))
        assert len(trees) == 2
        assert trees[0].depth() <= 1  # grow slot
        assert trees[1].depth() == 1  # full slot

    def test_ramped_respects_size_cap(self):
        trees = ramped_half_and_half(3000, 1, 6, 5, np.random.default_rng(5))
        assert all(t.size <= MAX_TREE_SIZE for t in trees)

    def test_ramped_never_emits_bare_leaf_root(self):
        trees = ramped_half_and_half(1000, 1, 6, 1, np.random.default_rng(6))
        assert all(arity(t.nodes[0]) > 0 for t in trees)

    def test_ramped_rejects_bad_depths(self):
        with pytest.raises(ValueError):
            ramped_half_and_half(10, 0, 6, 1, np.random.default_rng(0))

    def test_constants_within_range(self):
        rng = np.random.default_rng(7)
        consts = [
            n.value
            for _ in range(500)
            for n in random_tree("grow", 4, 1, rng).nodes
            if isinstance(n, Constant)
        ]
        assert consts and all(-5.0 <= c <= 5.0 for c in consts)


class TestCrossover:
    def test_single_node_parents_swap(self):
        a = ExprTree((Variable(0),))
        b = ExprTree((Variable(1),))
        c1, c2 = subtree_crossover(a, b, ScriptedRng(integers=[0, 0]))
        assert c1.nodes == (Variable(1),)
        assert c2.nodes == (Variable(0),)

    def test_node_conservation(self):
        rng = np.random.default_rng(8)
        a = random_tree("full", 2, 2, rng)  # size 5 or 7
        b = random_tree("full", 2, 2, rng)
        for _ in range(200):
            c1, c2 = subtree_crossover(a, b, rng)
            if c1.size <= MAX_TREE_SIZE and c2.size <= MAX_TREE_SIZE:
                assert c1.size + c2.size == a.size + b.size

    def test_oversized_offspring_replaced_by_skeleton_parent(self):
        a = chain("sin", 59)  # size 60
        b = chain("cos", 59)
        # swap a's leaf (span 1) with all of b (span 60): 119 nodes, capped
        c1, c2 = subtree_crossover(a, b, ScriptedRng(integers=[59, 0]))
        assert c1.nodes == a.nodes
        assert c2.nodes == (Variable(0),)

    def test_parents_unchanged(self):
        rng = np.random.default_rng(9)
        a = random_tree("full", 3, 2, rng)
        b = random_tree("full", 3, 2, rng)
        na, nb = a.nodes, b.nodes
        subtree_crossover(a, b, rng)
        assert a.nodes == na and b.nodes == nb


class TestMutation:
    def test_size_one_tree_becomes_some_leaf(self):
        t = ExprTree((Variable(0),))
        out = one_point_mutation(t, 1, ScriptedRng(randoms=[0.0], integers=[1], uniforms=[2.5]))
        assert out.size == 1
        assert isinstance(out.nodes[0], (Variable, Constant))

    def test_binary_node_stays_binary(self):
        t = ExprTree((BinaryOp("add"), Variable(0), Variable(1)))
        out = one_point_mutation(t, 2, ScriptedRng(randoms=[0.0, 0.9, 0.9], integers=[3]))
        assert isinstance(out.nodes[0], BinaryOp)
        assert out.nodes[0].op in BINARY_OPS
        assert out.nodes[1:] == t.nodes[1:]

    def test_shape_and_size_preserved(self):
        rng = np.random.default_rng(10)
        t = random_tree("full", 4, 3, rng)
        for _ in range(300):
            out = one_point_mutation(t, 3, rng)
            assert out.size == t.size
            assert all(arity(a) == arity(b) for a, b in zip(t.nodes, out.nodes))

    def test_expected_one_change_per_tree(self):
        # 10-node tree: 4 binaries + 1 unary (visible change prob 3/4 each)
        # and 5 constant leaves (fresh terminal is a.s. different), so the
        # expected visible changes are 0.875 per flagged-node expectation 1.
        t = ExprTree(
            (BinaryOp("add"),
             BinaryOp("mul"), Constant(1.0), Constant(2.0),
             BinaryOp("sub"),
             BinaryOp("div_p"), Constant(3.0), Constant(4.0),
             UnaryOp("sin"), Constant(5.0))
        )
        assert t.size == 10
        rng = np.random.default_rng(12)
        changed = 0
        n_trials = 20_000
        for _ in range(n_trials):
            out = one_point_mutation(t, 1, rng)
            changed += sum(a != b for a, b in zip(t.nodes, out.nodes))
        estimated_flagged = (changed / n_trials) / 0.875
        assert abs(estimated_flagged - 1.0) <= 0.1


class TestVariationSafety:
    def test_variation_outputs_valid_over_many_applications(self):
        rng = np.random.default_rng(13)
        pool = ramped_half_and_half(200, 1, 6, 2, rng)
        for i in range(5000):
            a = pool[int(rng.integers(0, len(pool)))]
            b = pool[int(rng.integers(0, len(pool)))]
            c1, c2 = subtree_crossover(a, b, rng)
            m = one_point_mutation(c1, 2, rng)
            for t in (c1, c2, m):
                assert t.size <= MAX_TREE_SIZE
                ExprTree(t.nodes)  # re-validates arity consistency
            pool[int(rng.integers(0, len(pool)))] = m if m.size <= MAX_TREE_SIZE else c2
