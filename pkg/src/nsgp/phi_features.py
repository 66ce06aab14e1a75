"""Structural interpretability features of a formula and the linear model
that maps them to an interpretability estimate.

The four features are the node count, the operation count, the count of
non-arithmetic operations, and the count of nested compositions of
non-arithmetic operations. The default coefficients come from a linear
model fit on human survey feedback; replacements can be loaded from the
JSON file emitted by :mod:`nsgp.phi_trainer`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .expr_core import ExprTree, UnaryOp, arity

#: Operators counted as non-arithmetic. In this primitive set these are
#: exactly the unary ones; kept as an explicit set so richer sets keep working.
NON_ARITHMETIC_OPS = frozenset({"sin", "cos", "exp", "log_p"})


@dataclass(frozen=True)
class FeatureVector:
    """(node count, op count, non-arithmetic ops, nested na-op pairs)."""

    l: int
    n_o: int
    n_nao: int
    n_naoc: int


@dataclass(frozen=True)
class PhiCoefficients:
    """Linear interpretability model: intercept plus four slope weights.

    Slopes must be non-positive; every structural feature can only lower
    the interpretability estimate.
    """

    intercept: float = 79.1
    w_l: float = -0.2
    w_no: float = -0.5
    w_nao: float = -3.4
    w_naoc: float = -4.5

    def __post_init__(self):
        for name in ("w_l", "w_no", "w_nao", "w_naoc"):
            if getattr(self, name) > 0:
                raise ValueError(f"{name} must be <= 0, got {getattr(self, name)}")

    def to_dict(self) -> dict[str, float]:
        return {
            "intercept": self.intercept,
            "w_l": self.w_l,
            "w_no": self.w_no,
            "w_nao": self.w_nao,
            "w_naoc": self.w_naoc,
        }


DEFAULT_COEFFICIENTS = PhiCoefficients()


def load_coefficients(path: str | Path) -> PhiCoefficients:
    """Read a coefficients JSON (extra keys, e.g. CV scores, are ignored)."""
    raw = json.loads(Path(path).read_text())
    return PhiCoefficients(
        intercept=float(raw["intercept"]),
        w_l=float(raw["w_l"]),
        w_no=float(raw["w_no"]),
        w_nao=float(raw["w_nao"]),
        w_naoc=float(raw["w_naoc"]),
    )


def _composition_pairs(tree: ExprTree) -> int:
    """Count ancestor-descendant pairs of non-arithmetic operators.

    A chain of k nested non-arithmetic operators contributes k*(k-1)/2.
    This is the single place that fixes the meaning of "consecutive
    compositions"; switching to the adjacent-parent-child reading would be
    a local change here.
    """
    count = 0
    na_depth = 0  # non-arithmetic operators on the current ancestor path
    stack: list[list] = []  # [unfilled child slots, node was non-arithmetic]
    for node in tree.nodes:
        is_na = isinstance(node, UnaryOp) and node.op in NON_ARITHMETIC_OPS
        if is_na:
            count += na_depth
        k = arity(node)
        if k:
            stack.append([k, is_na])
            na_depth += is_na
        else:
            while stack and stack[-1][0] == 1:
                na_depth -= stack.pop()[1]
            if stack:
                stack[-1][0] -= 1
    return count


def extract_features(tree: ExprTree) -> FeatureVector:
    """Compute the four structural features of a tree."""
    n_o = 0
    n_nao = 0
    for node in tree.nodes:
        if arity(node):
            n_o += 1
            if isinstance(node, UnaryOp) and node.op in NON_ARITHMETIC_OPS:
                n_nao += 1
    return FeatureVector(
        l=tree.size, n_o=n_o, n_nao=n_nao, n_naoc=_composition_pairs(tree)
    )


def phi_objective(
    fv: FeatureVector, coeffs: PhiCoefficients = DEFAULT_COEFFICIENTS
) -> float:
    """Interpretability penalty to minimize: the negated slope sum.

    With the default coefficients this is
    0.2*l + 0.5*n_o + 3.4*n_nao + 4.5*n_naoc, nonnegative and zero only
    for an all-zero feature vector.
    """
    return -(
        coeffs.w_l * fv.l
        + coeffs.w_no * fv.n_o
        + coeffs.w_nao * fv.n_nao
        + coeffs.w_naoc * fv.n_naoc
    )


def phi_estimate(
    fv: FeatureVector, coeffs: PhiCoefficients = DEFAULT_COEFFICIENTS
) -> float:
    """Interpretability estimate in percent: intercept plus slope terms.

    Implemented as intercept minus the penalty so the two views stay exact
    complements of each other in floating point across the magnitudes real
    trees produce.
    """
    return coeffs.intercept - phi_objective(fv, coeffs)
