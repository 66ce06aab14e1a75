"""Expression trees for symbolic regression.

Trees are immutable sequences of nodes in prefix (pre-order) layout: each
operator node owns the one or two complete subtrees that follow it. The
module provides protected evaluation over a dataset, random generation
(grow / full / ramped half-and-half), and the two variation operators used
by the evolutionary engine (subtree crossover, one-point mutation).

All randomness is drawn from an explicit ``numpy.random.Generator`` so that
callers own reproducibility; nothing in here keeps global state.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

UNARY_OPS = ("sin", "cos", "exp", "log_p")
BINARY_OPS = ("add", "sub", "mul", "div_p")

#: Hard cap on tree size; oversized variation products are rejected.
MAX_TREE_SIZE = 100

#: Ephemeral random constants are drawn once from U(CONST_LOW, CONST_HIGH).
CONST_LOW = -5.0
CONST_HIGH = 5.0

#: Saturation value for overflowing exponentials (keeps outputs ordered).
MAX_REAL = float(np.finfo(np.float64).max)

_BINARY_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div_p": "div_p"}
_SYMBOL_BINARY = {v: k for k, v in _BINARY_SYMBOL.items()}


class MalformedTreeError(ValueError):
    """The node sequence does not parse to exactly one complete tree."""


class VariableIndexError(IndexError):
    """A variable refers to a feature column the dataset does not have."""

    def __init__(self, index: int, dimensionality: int):
        self.index = index
        self.dimensionality = dimensionality
        super().__init__(
            f"variable x{index} out of range for {dimensionality}-column input"
        )


@dataclass(frozen=True)
class EpsilonConfig:
    """Protection constant for div_p and log_p."""

    epsilon: float = 1e-6

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


DEFAULT_EPS = EpsilonConfig()


@dataclass(frozen=True)
class Variable:
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"variable index must be >= 0, got {self.index}")


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"constant must be finite, got {self.value}")


@dataclass(frozen=True)
class UnaryOp:
    op: str

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary operator {self.op!r}")


@dataclass(frozen=True)
class BinaryOp:
    op: str

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary operator {self.op!r}")


Node = Variable | Constant | UnaryOp | BinaryOp


def arity(node: Node) -> int:
    if isinstance(node, BinaryOp):
        return 2
    if isinstance(node, UnaryOp):
        return 1
    return 0


@dataclass(frozen=True)
class ExprTree:
    """One candidate formula, stored as a prefix node sequence."""

    nodes: tuple[Node, ...]

    def __post_init__(self):
        open_slots = 1
        for pos, node in enumerate(self.nodes):
            if open_slots == 0:
                raise MalformedTreeError(
                    f"trailing nodes after a complete tree (position {pos})"
                )
            open_slots += arity(node) - 1
        if open_slots != 0:
            raise MalformedTreeError(
                f"incomplete tree: {open_slots} unfilled argument slot(s)"
            )

    @property
    def size(self) -> int:
        return len(self.nodes)

    def subtree_span(self, i: int) -> tuple[int, int]:
        """Half-open index range of the subtree rooted at node ``i``."""
        open_slots = 1
        j = i
        while open_slots:
            open_slots += arity(self.nodes[j]) - 1
            j += 1
        return i, j

    def depth(self) -> int:
        """Longest root-to-leaf edge count; a lone leaf has depth 0."""
        best = 0
        stack: list[int] = []  # unfilled child slots per open operator
        for node in self.nodes:
            best = max(best, len(stack))
            k = arity(node)
            if k:
                stack.append(k)
            else:
                while stack and stack[-1] == 1:
                    stack.pop()
                if stack:
                    stack[-1] -= 1
        return best

    def to_infix(self) -> str:
        """Serialize to infix text, e.g. ``( exp( sin( x0 ) ) - 1.234 )``."""

        def emit(i: int) -> tuple[str, int]:
            node = self.nodes[i]
            if isinstance(node, Variable):
                return f"x{node.index}", i + 1
            if isinstance(node, Constant):
                return repr(node.value), i + 1
            if isinstance(node, UnaryOp):
                inner, nxt = emit(i + 1)
                return f"{node.op}( {inner} )", nxt
            left, mid = emit(i + 1)
            right, nxt = emit(mid)
            return f"( {left} {_BINARY_SYMBOL[node.op]} {right} )", nxt

        text, _ = emit(0)
        return text

    def __str__(self) -> str:
        return self.to_infix()


_TOKEN = re.compile(
    r"\s*(log_p|div_p|sin|cos|exp|x\d+|-?\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|[()+*-])"
)


def parse_infix(text: str) -> ExprTree:
    """Parse the infix serialization produced by :meth:`ExprTree.to_infix`."""
    tokens: list[str] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip():
                raise MalformedTreeError(f"bad token at position {pos}: {text[pos:pos+20]!r}")
            break
        tokens.append(m.group(1))
        pos = m.end()

    idx = 0

    def peek() -> str | None:
        return tokens[idx] if idx < len(tokens) else None

    def take(expected: str | None = None) -> str:
        nonlocal idx
        if idx >= len(tokens):
            raise MalformedTreeError("unexpected end of input")
        tok = tokens[idx]
        if expected is not None and tok != expected:
            raise MalformedTreeError(f"expected {expected!r}, got {tok!r}")
        idx += 1
        return tok

    def expr() -> list[Node]:
        tok = take()
        if tok == "(":
            left = expr()
            op_tok = take()
            if op_tok not in _SYMBOL_BINARY:
                raise MalformedTreeError(f"expected a binary operator, got {op_tok!r}")
            right = expr()
            take(")")
            return [BinaryOp(_SYMBOL_BINARY[op_tok]), *left, *right]
        if tok in UNARY_OPS:
            take("(")
            inner = expr()
            take(")")
            return [UnaryOp(tok), *inner]
        if tok.startswith("x") and tok[1:].isdigit():
            return [Variable(int(tok[1:]))]
        try:
            return [Constant(float(tok))]
        except ValueError:
            raise MalformedTreeError(f"unexpected token {tok!r}") from None

    nodes = expr()
    if peek() is not None:
        raise MalformedTreeError(f"trailing input starting at {peek()!r}")
    return ExprTree(tuple(nodes))


def size(tree: ExprTree) -> int:
    """Total node count (variables + constants + operations)."""
    return tree.size


def eval_tree(tree: ExprTree, X: np.ndarray, eps: EpsilonConfig = DEFAULT_EPS) -> np.ndarray:
    """Evaluate ``tree`` on every row of ``X`` (shape N x D).

    Protected semantics: div_p(a, b) = sign(b) * a / (|b| + eps) with
    sign(0) = 0, log_p(a) = ln(|a| + eps), and exp saturates at the largest
    finite float instead of overflowing to infinity. Other operators may
    still produce non-finite values on extreme inputs; callers decide what
    a non-finite prediction vector means.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D (N x D), got shape {X.shape}")
    n_rows, n_cols = X.shape
    for node in tree.nodes:
        if isinstance(node, Variable) and node.index >= n_cols:
            raise VariableIndexError(node.index, n_cols)

    e = eps.epsilon
    stack: list[np.ndarray] = []
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for node in reversed(tree.nodes):
            if isinstance(node, Variable):
                stack.append(X[:, node.index])
            elif isinstance(node, Constant):
                stack.append(np.full(n_rows, node.value))
            elif isinstance(node, UnaryOp):
                a = stack.pop()
                if node.op == "sin":
                    stack.append(np.sin(a))
                elif node.op == "cos":
                    stack.append(np.cos(a))
                elif node.op == "exp":
                    stack.append(np.minimum(np.exp(a), MAX_REAL))
                else:  # log_p
                    stack.append(np.log(np.abs(a) + e))
            else:
                a = stack.pop()
                b = stack.pop()
                if node.op == "add":
                    stack.append(a + b)
                elif node.op == "sub":
                    stack.append(a - b)
                elif node.op == "mul":
                    stack.append(a * b)
                else:  # div_p
                    stack.append(np.sign(b) * a / (np.abs(b) + e))
    return stack[-1]


def _random_leaf(D: int, rng: np.random.Generator) -> Node:
    # terminal set: the D problem variables plus one ephemeral constant slot
    choice = int(rng.integers(0, D + 1))
    if choice < D:
        return Variable(choice)
    return Constant(float(rng.uniform(CONST_LOW, CONST_HIGH)))


def _random_operator(rng: np.random.Generator) -> Node:
    choice = int(rng.integers(0, len(UNARY_OPS) + len(BINARY_OPS)))
    if choice < len(UNARY_OPS):
        return UnaryOp(UNARY_OPS[choice])
    return BinaryOp(BINARY_OPS[choice - len(UNARY_OPS)])


def random_tree(method: str, max_depth: int, D: int, rng: np.random.Generator) -> ExprTree:
    """Generate a random tree with the grow or full method.

    Depth counts edges, so ``max_depth=0`` yields a single leaf. Full trees
    place every leaf at exactly ``max_depth``; grow trees stay within it.
    Whenever ``max_depth >= 1`` the root is an operator, so ramped
    initialization never emits a bare leaf.
    """
    if method not in ("grow", "full"):
        raise ValueError(f"method must be 'grow' or 'full', got {method!r}")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    n_terminals = D + 1
    n_primitives = n_terminals + len(UNARY_OPS) + len(BINARY_OPS)

    nodes: list[Node] = []

    def gen(depth_left: int, at_root: bool) -> None:
        if depth_left == 0:
            nodes.append(_random_leaf(D, rng))
            return
        if method == "grow" and not at_root:
            if rng.integers(0, n_primitives) < n_terminals:
                nodes.append(_random_leaf(D, rng))
                return
        op = _random_operator(rng)
        nodes.append(op)
        for _ in range(arity(op)):
            gen(depth_left - 1, False)

    gen(max_depth, True)
    return ExprTree(tuple(nodes))


def ramped_half_and_half(
    pop_size: int,
    min_depth: int,
    max_depth: int,
    D: int,
    rng: np.random.Generator,
) -> list[ExprTree]:
    """Classic ramped half-and-half initialization.

    Depth levels cycle uniformly over [min_depth, max_depth] and each level
    gets an alternating half of grow and full trees. Trees larger than
    MAX_TREE_SIZE are regenerated at the same (depth, method) slot.
    """
    if not 0 < min_depth <= max_depth:
        raise ValueError("need 0 < min_depth <= max_depth")
    depths = range(min_depth, max_depth + 1)
    n_levels = len(depths)
    out: list[ExprTree] = []
    for i in range(pop_size):
        depth = depths[i % n_levels]
        method = "grow" if (i // n_levels) % 2 == 0 else "full"
        tree = random_tree(method, depth, D, rng)
        while tree.size > MAX_TREE_SIZE:
            tree = random_tree(method, depth, D, rng)
        out.append(tree)
    return out


def subtree_crossover(
    a: ExprTree, b: ExprTree, rng: np.random.Generator
) -> tuple[ExprTree, ExprTree]:
    """Swap one uniformly chosen subtree between the parents.

    Inputs are untouched (trees are immutable). An offspring that would
    exceed MAX_TREE_SIZE is replaced by its skeleton parent, keeping the
    pair count exact.
    """
    ia = int(rng.integers(0, a.size))
    ib = int(rng.integers(0, b.size))
    a0, a1 = a.subtree_span(ia)
    b0, b1 = b.subtree_span(ib)
    c1_nodes = a.nodes[:a0] + b.nodes[b0:b1] + a.nodes[a1:]
    c2_nodes = b.nodes[:b0] + a.nodes[a0:a1] + b.nodes[b1:]
    c1 = ExprTree(c1_nodes) if len(c1_nodes) <= MAX_TREE_SIZE else a
    c2 = ExprTree(c2_nodes) if len(c2_nodes) <= MAX_TREE_SIZE else b
    return c1, c2


def one_point_mutation(tree: ExprTree, D: int, rng: np.random.Generator) -> ExprTree:
    """Resample each node with probability 1/size into the same-arity pool.

    Leaves become a random terminal (variable or fresh constant), unary
    operators a random unary, binary a random binary; resampling a node to
    its current kind is allowed. Shape and size never change.
    """
    n = tree.size
    mask = rng.random(n) < (1.0 / n)
    if not mask.any():
        return tree
    nodes = list(tree.nodes)
    for i in np.flatnonzero(mask):
        node = nodes[i]
        if isinstance(node, (Variable, Constant)):
            nodes[i] = _random_leaf(D, rng)
        elif isinstance(node, UnaryOp):
            nodes[i] = UnaryOp(UNARY_OPS[int(rng.integers(0, len(UNARY_OPS)))])
        else:
            nodes[i] = BinaryOp(BINARY_OPS[int(rng.integers(0, len(BINARY_OPS)))])
    return ExprTree(tuple(nodes))
