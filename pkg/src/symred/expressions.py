"""Symbolic-regression expression trees.

A tree is a flat prefix-order array of opcodes plus a parallel payload array
for constant leaves. The grammar is fixed: binary ``+ - * /``, unary
``sin cos tan exp log``, terminals are feature variables and numeric
constants. Trees are immutable; every variation operator returns a new tree
and always respects the hard limits of 50 symbols and depth 30.

Evaluation uses protected semantics (see ``_kernels``) so predictions are
always finite for finite inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._kernels import CONST, N_BINARY, VAR0
from ._validation import as_generator, check_X_y, check_vector

__all__ = [
    "MAX_TREE_SIZE",
    "MAX_TREE_DEPTH",
    "MUTATION_OPERATORS",
    "Grammar",
    "ExpressionTree",
    "ScaledModel",
    "random_tree",
    "subtree_crossover",
    "mutate",
    "evaluate",
    "linear_scale",
    "optimize_constants",
    "constant_jacobian",
    "tree_size",
    "tree_depth",
]

MAX_TREE_SIZE = 50
MAX_TREE_DEPTH = 30

# Probability of placing an operator (rather than a terminal) at a position
# where both still fit, during grow-style random construction.
_P_OPERATOR = 0.7

_BINARY_NAMES = {K.ADD: "+", K.SUB: "-", K.MUL: "*", K.DIV: "/"}
_UNARY_NAMES = {K.SIN: "sin", K.COS: "cos", K.TAN: "tan", K.EXP: "exp", K.LOG: "log"}
_OP_NAMES = {**_BINARY_NAMES, **_UNARY_NAMES}
_NAME_TO_CODE = {name: code for code, name in _OP_NAMES.items()}

MUTATION_OPERATORS = (
    "point",
    "shake",
    "change_symbol",
    "replace_branch",
    "remove_branch",
)


@dataclass(frozen=True)
class Grammar:
    """Terminal alphabet: variable count and the range of random constants."""

    n_features: int
    const_range: tuple[float, float] = (-20.0, 20.0)

    def __post_init__(self):
        if self.n_features < 1:
            raise ValueError("grammar needs at least one feature")
        lo, hi = self.const_range
        if not lo < hi:
            raise ValueError("const_range must be an increasing pair")


def _arity(code: int) -> int:
    if code < N_BINARY:
        return 2
    if code < CONST:
        return 1
    return 0


def _check_wellformed(codes) -> None:
    if len(codes) == 0:
        raise ValueError("empty expression")
    need = 1
    for i, c in enumerate(codes):
        if need <= 0:
            raise ValueError(f"trailing nodes after a complete expression (index {i})")
        if c < 0 or (N_BINARY + len(_UNARY_NAMES) <= c < CONST):
            raise ValueError(f"unknown opcode {c} at index {i}")
        need += _arity(int(c)) - 1
    if need != 0:
        raise ValueError("incomplete expression: missing operands")


def _subtree_end(codes, start: int) -> int:
    return int(K.subtree_end(codes, start))


def _node_depths(codes) -> list[int]:
    depths = []
    stack: list[int] = []
    for c in codes:
        depths.append(len(stack) + 1)
        a = _arity(int(c))
        if a:
            stack.append(a)
        else:
            while stack and stack[-1] == 1:
                stack.pop()
            if stack:
                stack[-1] -= 1
    return depths


def _codes_depth(codes) -> int:
    return int(K.codes_depth(np.asarray(codes, dtype=K.CODE_DTYPE)))


class ExpressionTree:
    """Immutable prefix-encoded expression tree.

    Parameters
    ----------
    codes : array of int16
        Prefix-order opcodes.
    values : array of float64
        Constant payloads, aligned with ``codes`` (ignored for non-constant
        nodes).
    """

    __slots__ = ("codes", "values", "_depth")

    def __init__(self, codes, values, *, copy: bool = True, validate: bool = True):
        codes = np.asarray(codes, dtype=K.CODE_DTYPE)
        values = np.asarray(values, dtype=np.float64)
        if copy:
            codes = codes.copy()
            values = values.copy()
        if validate:
            _check_wellformed(codes)
            if values.shape != codes.shape:
                raise ValueError("codes and values must have the same length")
            if len(codes) > MAX_TREE_SIZE:
                raise ValueError(
                    f"tree has {len(codes)} symbols, limit is {MAX_TREE_SIZE}"
                )
            if _codes_depth(codes) > MAX_TREE_DEPTH:
                raise ValueError(f"tree depth exceeds {MAX_TREE_DEPTH}")
            cmask = codes == CONST
            if not np.all(np.isfinite(values[cmask])):
                raise ValueError("constant leaves must be finite")
        codes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_depth", -1)

    def __setattr__(self, name, value):
        raise AttributeError("ExpressionTree is immutable")

    @property
    def size(self) -> int:
        return int(self.codes.shape[0])

    @property
    def depth(self) -> int:
        if self._depth < 0:
            object.__setattr__(self, "_depth", _codes_depth(self.codes))
        return self._depth

    @property
    def max_var_index(self) -> int:
        """Largest referenced feature index, or -1 if no variables."""
        var = self.codes[self.codes >= VAR0]
        return int(var.max()) - VAR0 if var.size else -1

    @property
    def n_constants(self) -> int:
        return int(np.count_nonzero(self.codes == CONST))

    def constants(self) -> np.ndarray:
        return self.values[self.codes == CONST].copy()

    def with_constants(self, constants) -> "ExpressionTree":
        constants = np.asarray(constants, dtype=np.float64)
        if constants.shape[0] != self.n_constants:
            raise ValueError("wrong number of constants")
        values = self.values.copy()
        values[self.codes == CONST] = constants
        return ExpressionTree(self.codes, values, copy=False, validate=True)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExpressionTree):
            return NotImplemented
        return np.array_equal(self.codes, other.codes) and np.array_equal(
            self.values, other.values
        )

    __hash__ = None

    def to_prefix(self) -> str:
        """Parenthesised prefix text, e.g. ``(+ (* 2.5 x0) (sin x1))``."""

        def fmt(i: int) -> tuple[str, int]:
            c = int(self.codes[i])
            if c >= VAR0:
                return f"x{c - VAR0}", i + 1
            if c == CONST:
                return repr(float(self.values[i])), i + 1
            if c < N_BINARY:
                left, nxt = fmt(i + 1)
                right, nxt = fmt(nxt)
                return f"({_OP_NAMES[c]} {left} {right})", nxt
            child, nxt = fmt(i + 1)
            return f"({_OP_NAMES[c]} {child})", nxt

        text, _ = fmt(0)
        return text

    @classmethod
    def from_prefix(cls, text: str) -> "ExpressionTree":
        """Parse the parenthesised prefix form produced by ``to_prefix``."""
        tokens = text.replace("(", " ( ").replace(")", " ) ").split()
        if not tokens:
            raise ValueError("empty expression text")
        codes: list[int] = []
        values: list[float] = []

        def parse(pos: int) -> int:
            if pos >= len(tokens):
                raise ValueError("unexpected end of expression")
            tok = tokens[pos]
            if tok == "(":
                if pos + 1 >= len(tokens):
                    raise ValueError("dangling '('")
                name = tokens[pos + 1]
                code = _NAME_TO_CODE.get(name)
                if code is None:
                    raise ValueError(f"unknown operator {name!r}")
                codes.append(code)
                values.append(0.0)
                pos += 2
                for _ in range(_arity(code)):
                    pos = parse(pos)
                if pos >= len(tokens) or tokens[pos] != ")":
                    raise ValueError(f"expected ')' to close ({name} ...)")
                return pos + 1
            if tok == ")":
                raise ValueError("unexpected ')'")
            if tok.startswith("x") and tok[1:].isdigit():
                codes.append(VAR0 + int(tok[1:]))
                values.append(0.0)
                return pos + 1
            try:
                value = float(tok)
            except ValueError:
                raise ValueError(f"unrecognised token {tok!r}") from None
            codes.append(CONST)
            values.append(value)
            return pos + 1

        end = parse(0)
        if end != len(tokens):
            raise ValueError("trailing tokens after a complete expression")
        return cls(codes, values)

    def __repr__(self) -> str:
        return f"ExpressionTree({self.to_prefix()})"


def tree_size(tree: ExpressionTree) -> int:
    """Number of symbols (nodes)."""
    return tree.size


def tree_depth(tree: ExpressionTree) -> int:
    """Longest root-to-leaf node count; a lone terminal has depth 1."""
    return tree.depth


@dataclass(frozen=True)
class ScaledModel:
    """An expression tree with explicit linear scaling: a + b * tree(x)."""

    tree: ExpressionTree
    offset: float
    slope: float

    def predict(self, data) -> np.ndarray:
        return self.offset + self.slope * evaluate(self.tree, data)

    def __str__(self) -> str:
        return (
            f"{self.tree.to_prefix()} scaled by a={self.offset!r} b={self.slope!r}"
        )


def _emit_terminal(codes, values, grammar: Grammar, rng) -> None:
    pick = int(rng.integers(0, grammar.n_features + 1))
    if pick < grammar.n_features:
        codes.append(VAR0 + pick)
        values.append(0.0)
    else:
        codes.append(CONST)
        values.append(float(rng.uniform(*grammar.const_range)))


def _grow(
    codes, values, grammar, rng, size_budget, depth_budget, p_operator=_P_OPERATOR
) -> int:
    """Append one random subtree, returning the number of nodes used."""
    if depth_budget <= 1 or size_budget < 2 or rng.random() >= p_operator:
        _emit_terminal(codes, values, grammar, rng)
        return 1
    if size_budget >= 3:
        op = int(rng.integers(0, CONST))
    else:
        op = int(rng.integers(N_BINARY, CONST))
    codes.append(op)
    values.append(0.0)
    if op < N_BINARY:
        left_budget = int(rng.integers(1, size_budget - 1))
        used_left = _grow(
            codes, values, grammar, rng, left_budget, depth_budget - 1, p_operator
        )
        used_right = _grow(
            codes,
            values,
            grammar,
            rng,
            size_budget - 1 - used_left,
            depth_budget - 1,
            p_operator,
        )
        return 1 + used_left + used_right
    return 1 + _grow(
        codes, values, grammar, rng, size_budget - 1, depth_budget - 1, p_operator
    )


def random_tree(
    grammar: Grammar,
    max_size: int = MAX_TREE_SIZE,
    max_depth: int = MAX_TREE_DEPTH,
    random_state=None,
    method: str = "grow",
) -> ExpressionTree:
    """Build a random well-formed tree within the given limits.

    ``method="grow"`` stops branches stochastically (varied shapes and
    sizes); ``method="full"`` places operators until the depth or size budget
    forces a terminal, producing trees near the limits.
    """
    if not 1 <= max_size <= MAX_TREE_SIZE:
        raise ValueError(f"max_size must be in [1, {MAX_TREE_SIZE}]")
    if not 1 <= max_depth <= MAX_TREE_DEPTH:
        raise ValueError(f"max_depth must be in [1, {MAX_TREE_DEPTH}]")
    if method not in ("grow", "full"):
        raise ValueError(f"method must be 'grow' or 'full', got {method!r}")
    rng = as_generator(random_state)
    codes: list[int] = []
    values: list[float] = []
    p_operator = 1.0 if method == "full" else _P_OPERATOR
    _grow(codes, values, grammar, rng, max_size, max_depth, p_operator)
    return ExpressionTree(codes, values, copy=False, validate=False)


def subtree_crossover(
    parent1: ExpressionTree,
    parent2: ExpressionTree,
    max_size: int = MAX_TREE_SIZE,
    max_depth: int = MAX_TREE_DEPTH,
    random_state=None,
    max_attempts: int = 10,
) -> ExpressionTree:
    """Subtree swap: a random subtree of ``parent2`` replaces a random
    subtree of ``parent1``.

    Crossover points are redrawn up to ``max_attempts`` times when the child
    would violate the limits; after that the (immutable) first parent is
    returned unchanged.
    """
    rng = as_generator(random_state)
    for _ in range(max_attempts):
        i = int(rng.integers(parent1.size))
        j = int(rng.integers(parent2.size))
        i_end = _subtree_end(parent1.codes, i)
        j_end = _subtree_end(parent2.codes, j)
        new_size = parent1.size - (i_end - i) + (j_end - j)
        if new_size > max_size:
            continue
        codes = np.concatenate(
            [parent1.codes[:i], parent2.codes[j:j_end], parent1.codes[i_end:]]
        )
        if _codes_depth(codes) > max_depth:
            continue
        vals = np.concatenate(
            [parent1.values[:i], parent2.values[j:j_end], parent1.values[i_end:]]
        )
        return ExpressionTree(codes, vals, copy=False, validate=False)
    return parent1


def _splice(tree, start, end, sub_codes, sub_values) -> ExpressionTree:
    codes = np.concatenate([tree.codes[:start], sub_codes, tree.codes[end:]])
    vals = np.concatenate([tree.values[:start], sub_values, tree.values[end:]])
    return ExpressionTree(codes, vals, copy=False, validate=False)


def _mutate_point(tree, grammar, rng, max_size, max_depth):
    cpos = np.flatnonzero(tree.codes == CONST)
    if cpos.size == 0:
        return tree
    i = int(cpos[rng.integers(cpos.size)])
    values = tree.values.copy()
    values[i] += rng.normal(0.0, 1.0)
    return ExpressionTree(tree.codes, values, copy=False, validate=False)


def _mutate_shake(tree, grammar, rng, max_size, max_depth):
    cpos = np.flatnonzero(tree.codes == CONST)
    if cpos.size == 0:
        return tree
    values = tree.values.copy()
    values[cpos] += rng.normal(0.0, 1.0, size=cpos.size)
    return ExpressionTree(tree.codes, values, copy=False, validate=False)


def _mutate_change_symbol(tree, grammar, rng, max_size, max_depth):
    eligible = [
        i
        for i, c in enumerate(tree.codes)
        if c < CONST or (c >= VAR0 and grammar.n_features >= 2)
    ]
    if not eligible:
        return tree
    i = eligible[int(rng.integers(len(eligible)))]
    c = int(tree.codes[i])
    if c < N_BINARY:
        choices = [op for op in _BINARY_NAMES if op != c]
    elif c < CONST:
        choices = [op for op in _UNARY_NAMES if op != c]
    else:
        choices = [VAR0 + v for v in range(grammar.n_features) if VAR0 + v != c]
    codes = tree.codes.copy()
    codes[i] = choices[int(rng.integers(len(choices)))]
    return ExpressionTree(codes, tree.values, copy=False, validate=False)


def _mutate_replace_branch(tree, grammar, rng, max_size, max_depth):
    i = int(rng.integers(tree.size))
    i_end = _subtree_end(tree.codes, i)
    size_room = max_size - (tree.size - (i_end - i))
    depth_room = max_depth - _node_depths(tree.codes)[i] + 1
    codes: list[int] = []
    values: list[float] = []
    _grow(codes, values, grammar, rng, max(size_room, 1), max(depth_room, 1))
    return _splice(
        tree, i, i_end, np.asarray(codes, K.CODE_DTYPE), np.asarray(values)
    )


def _mutate_remove_branch(tree, grammar, rng, max_size, max_depth):
    if tree.size == 1:
        return tree
    i = int(rng.integers(1, tree.size))
    i_end = _subtree_end(tree.codes, i)
    codes: list[int] = []
    values: list[float] = []
    _emit_terminal(codes, values, grammar, rng)
    return _splice(
        tree, i, i_end, np.asarray(codes, K.CODE_DTYPE), np.asarray(values)
    )


_MUTATIONS = {
    "point": _mutate_point,
    "shake": _mutate_shake,
    "change_symbol": _mutate_change_symbol,
    "replace_branch": _mutate_replace_branch,
    "remove_branch": _mutate_remove_branch,
}


def mutate(
    tree: ExpressionTree,
    operator: str,
    grammar: Grammar,
    max_size: int = MAX_TREE_SIZE,
    max_depth: int = MAX_TREE_DEPTH,
    random_state=None,
) -> ExpressionTree:
    """Apply one named mutation operator.

    ``point`` perturbs one constant leaf with Gaussian noise, ``shake``
    perturbs all constant leaves, ``change_symbol`` swaps one operator for a
    same-arity operator or one variable for another, ``replace_branch``
    replaces a random subtree with a fresh random tree fitting the limits and
    ``remove_branch`` collapses a random non-root subtree to a terminal.
    Degenerate cases (no constants, single-node tree, ...) return the tree
    unchanged.
    """
    try:
        fn = _MUTATIONS[operator]
    except KeyError:
        raise ValueError(
            f"unknown mutation operator {operator!r}; "
            f"expected one of {MUTATION_OPERATORS}"
        ) from None
    rng = as_generator(random_state)
    return fn(tree, grammar, rng, max_size, max_depth)


def _as_X(data) -> np.ndarray:
    X = getattr(data, "X", data)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return X


def evaluate(tree: ExpressionTree, data) -> np.ndarray:
    """One protected prediction per row. ``data`` is a Dataset or a matrix."""
    X = _as_X(data)
    if tree.max_var_index >= X.shape[1]:
        raise ValueError(
            f"tree references x{tree.max_var_index} but data has "
            f"{X.shape[1]} feature(s)"
        )
    Xt = np.ascontiguousarray(X.T)
    return K.eval_tree(tree.codes, tree.values, Xt)


def linear_scale(predictions, targets) -> tuple[float, float]:
    """Least-squares (a, b) minimising sum((targets - (a + b*pred))^2).

    Zero-variance (or numerically degenerate) predictions yield b = 0 and
    a = mean(targets). Applying the returned coefficients never increases
    the MSE relative to the raw predictions.
    """
    p = check_vector(predictions, "predictions")
    t = check_vector(targets, "targets", length=p.shape[0])
    if p.shape[0] < 2:
        raise ValueError("linear_scale requires at least 2 observations")
    a, b, _ = K.scale_and_mse(p, t)
    return float(a), float(b)


def constant_jacobian(tree: ExpressionTree, data) -> tuple[np.ndarray, np.ndarray]:
    """Predictions and the analytic Jacobian w.r.t. the constant leaves.

    This is the same kernel the constant optimiser uses; the Jacobian columns
    follow the prefix-order positions of the constants.
    """
    X = _as_X(data)
    Xt = np.ascontiguousarray(X.T)
    return K.eval_tree_grad(tree.codes, tree.values, Xt)


def _refine_constants_transposed(
    tree: ExpressionTree, Xt: np.ndarray, y: np.ndarray, iterations: int
) -> tuple[ExpressionTree, np.ndarray]:
    """Engine-facing refinement: returns (tree, predictions of that tree)."""
    if iterations <= 0 or tree.n_constants == 0:
        return tree, K.eval_tree(tree.codes, tree.values, Xt)
    vals, pred, _, accepted = K.lm_refine_constants(
        tree.codes, tree.values, Xt, y, iterations
    )
    if accepted == 0:
        return tree, pred
    return ExpressionTree(tree.codes, vals, copy=False, validate=False), pred


def optimize_constants(tree: ExpressionTree, data, iterations: int = 10):
    """Refine constant leaves by damped Gauss-Newton on the scaled error.

    Structure is untouched and every step is accepted only if it lowers the
    linearly-scaled training MSE, so the refined tree never scores worse than
    the input tree. Trees without constants are returned unchanged.

    ``data`` may be a Dataset or an ``(X, y)`` pair.
    """
    if hasattr(data, "X") and hasattr(data, "y"):
        X, y = data.X, data.y
    else:
        X, y = data
    X, y = check_X_y(X, y)
    Xt = np.ascontiguousarray(X.T)
    refined, _ = _refine_constants_transposed(tree, Xt, y, iterations)
    return refined
