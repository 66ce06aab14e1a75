import json

import numpy as np
import pytest

from nsgp.expr_core import (
    BinaryOp,
    Constant,
    ExprTree,
    UnaryOp,
    Variable,
    arity,
    random_tree,
)
from nsgp.phi_features import (
    DEFAULT_COEFFICIENTS,
    NON_ARITHMETIC_OPS,
    FeatureVector,
    PhiCoefficients,
    extract_features,
    load_coefficients,
    phi_estimate,
    phi_objective,
)


def oracle_features(tree: ExprTree) -> FeatureVector:
    """Brute-force reference: build the nested structure, then count
    non-arithmetic ancestor/descendant pairs by explicit enumeration."""

    def build(i):
        node = tree.nodes[i]
        kids = []
        j = i + 1
        for _ in range(arity(node)):
            child, j = build(j)
            kids.append(child)
        return (node, kids), j

    root, _ = build(0)

    def is_na(node):
        return isinstance(node, UnaryOp) and node.op in NON_ARITHMETIC_OPS

    def walk(entry, na_ancestors):
        node, kids = entry
        pairs = na_ancestors if is_na(node) else 0
        nao = 1 if is_na(node) else 0
        ops = 1 if arity(node) else 0
        for kid in kids:
            p, a, o = walk(kid, na_ancestors + (1 if is_na(node) else 0))
            pairs += p
            nao += a
            ops += o
        return pairs, nao, ops

    pairs, nao, ops = walk(root, 0)
    return FeatureVector(l=tree.size, n_o=ops, n_nao=nao, n_naoc=pairs)


class TestExtractFeatures:
    def test_sin_leaf(self):
        t = ExprTree((UnaryOp("sin"), Variable(0)))
        assert extract_features(t) == FeatureVector(2, 1, 1, 0)

    def test_arithmetic_only(self):
        t = ExprTree((BinaryOp("add"), Variable(0), Variable(1)))
        assert extract_features(t) == FeatureVector(3, 1, 0, 0)

    def test_nested_composition_pairs(self):
        # sub(exp(exp(sin(x0))), x1): pairs (exp1,exp2), (exp1,sin), (exp2,sin)
        t = ExprTree(
            (BinaryOp("sub"), UnaryOp("exp"), UnaryOp("exp"), UnaryOp("sin"),
             Variable(0), Variable(1))
        )
        assert extract_features(t) == FeatureVector(6, 4, 3, 3)

    def test_chain_counts_all_pairs(self):
        t = ExprTree((UnaryOp("sin"), UnaryOp("cos"), UnaryOp("exp"), UnaryOp("log_p"), Variable(0)))
        assert extract_features(t).n_naoc == 6  # C(4,2)

    def test_branches_do_not_pair_with_each_other(self):
        t = ExprTree((BinaryOp("add"), UnaryOp("sin"), Variable(0), UnaryOp("cos"), Variable(1)))
        fv = extract_features(t)
        assert fv.n_nao == 2
        assert fv.n_naoc == 0

    def test_matches_bruteforce_oracle_on_random_trees(self):
        rng = np.random.default_rng(21)
        for i in range(10_000):
            t = random_tree("grow" if i % 2 else "full", int(rng.integers(0, 7)), 3, rng)
            assert extract_features(t) == oracle_features(t)

    def test_feature_invariants_hold(self):
        rng = np.random.default_rng(22)
        for _ in range(2000):
            t = random_tree("grow", 6, 2, rng)
            fv = extract_features(t)
            if fv.n_o == 0:
                assert fv.l == 1
            else:
                assert 0 <= fv.n_nao <= fv.n_o <= fv.l - 1
            assert fv.n_naoc <= fv.n_nao * (fv.n_nao - 1) // 2


class TestPhiModel:
    def test_intercept_only(self):
        assert phi_estimate(FeatureVector(0, 0, 0, 0)) == pytest.approx(79.1, abs=1e-9)

    def test_eq_values(self):
        assert phi_estimate(FeatureVector(5, 2, 0, 0)) == pytest.approx(77.1, abs=1e-9)

    def test_objective_single_leaf(self):
        assert phi_objective(FeatureVector(1, 0, 0, 0)) == pytest.approx(0.2, abs=1e-12)

    def test_objective_weighted_sum(self):
        # 0.2*9 + 0.5*4 + 3.4*2 + 4.5*1
        assert phi_objective(FeatureVector(9, 4, 2, 1)) == pytest.approx(15.1, abs=1e-12)

    def test_objective_of_sin_x0(self):
        t = ExprTree((UnaryOp("sin"), Variable(0)))
        assert phi_objective(extract_features(t)) == pytest.approx(4.3, abs=1e-12)

    def test_realistic_tree_penalty_range(self):
        # a plausible evolved 13-node tree scores a small, positive penalty
        t = ExprTree(
            (BinaryOp("add"),
             BinaryOp("mul"), Variable(0), UnaryOp("sin"), Variable(1),
             BinaryOp("sub"),
             BinaryOp("mul"), Constant(2.0), UnaryOp("cos"), Variable(2),
             BinaryOp("div_p"), Variable(0), Variable(1))
        )
        fv = extract_features(t)
        assert fv.l == 13
        assert 0.0 < phi_objective(fv) < 30.0

    def test_estimate_plus_objective_is_intercept_exactly(self):
        rng = np.random.default_rng(23)
        for _ in range(5000):
            t = random_tree("grow", 6, 2, rng)
            fv = extract_features(t)
            assert phi_estimate(fv) + phi_objective(fv) == 79.1

    def test_arithmetic_growth_changes_penalty_by_fixed_amount(self):
        rng = np.random.default_rng(24)
        for _ in range(500):
            t = random_tree("grow", 5, 2, rng)
            wrapped = ExprTree((BinaryOp("add"),) + t.nodes + (Constant(1.0),))
            delta = phi_objective(extract_features(wrapped)) - phi_objective(extract_features(t))
            assert delta == pytest.approx(0.2 * 2 + 0.5, abs=1e-12)

    def test_objective_monotone_in_each_feature(self):
        base = FeatureVector(10, 4, 2, 1)
        v = phi_objective(base)
        assert phi_objective(FeatureVector(11, 4, 2, 1)) > v
        assert phi_objective(FeatureVector(10, 5, 2, 1)) > v
        assert phi_objective(FeatureVector(10, 4, 3, 1)) > v
        assert phi_objective(FeatureVector(10, 4, 2, 2)) > v

    def test_positive_slopes_rejected(self):
        with pytest.raises(ValueError):
            PhiCoefficients(w_l=0.1)
        with pytest.raises(ValueError):
            PhiCoefficients(w_naoc=2.0)

    def test_custom_coefficients_used(self):
        c = PhiCoefficients(intercept=50.0, w_l=-1.0, w_no=0.0, w_nao=0.0, w_naoc=0.0)
        assert phi_objective(FeatureVector(7, 3, 1, 0), c) == pytest.approx(7.0)
        assert phi_estimate(FeatureVector(7, 3, 1, 0), c) == pytest.approx(43.0)


class TestCoefficientsIO:
    def test_load_ignores_extra_keys(self, tmp_path):
        path = tmp_path / "coeffs.json"
        path.write_text(json.dumps({
            "intercept": 70.0, "w_l": -0.3, "w_no": -0.4, "w_nao": -3.0,
            "w_naoc": -5.0, "cv_r2_train": 0.5, "cv_r2_test": 0.5, "cv_mae": 10.0,
        }))
        c = load_coefficients(path)
        assert c == PhiCoefficients(70.0, -0.3, -0.4, -3.0, -5.0)

    def test_defaults_round_trip(self, tmp_path):
        path = tmp_path / "coeffs.json"
        path.write_text(json.dumps(DEFAULT_COEFFICIENTS.to_dict()))
        assert load_coefficients(path) == DEFAULT_COEFFICIENTS
