"""Expression trees for symbolic regression.

Trees are immutable and built from four node kinds: ``Const``, ``Var``,
``Unary`` and ``Binary``.  The operator vocabulary is fixed:

    unary   neg exp log sin cos tanh sqrt square asin
    binary  add sub mul div

Evaluation is total: any operation whose result would be non-finite
(division by zero, log of a non-positive number, overflow, ...) yields NaN,
and NaN propagates upward.  This gives search code a single error channel
instead of exceptions.

Canonical text form (round-trips through :func:`to_string` / :func:`from_string`)::

    expr    := '(' expr SYM expr ')' | NAME '(' expr ')' | VAR | NUMBER
    SYM     := '+' | '-' | '*' | '/'
    NAME    := unary operator name, e.g. 'sqrt'
    VAR     := 'x' INTEGER            (zero-based input index)
    NUMBER  := float literal, optionally preceded by '-'

Binary nodes are always fully parenthesised, so the grammar needs no
precedence rules.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "UNARY_OPS",
    "BINARY_OPS",
    "Expr",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "VariableBox",
    "evaluate",
    "evaluate_batch",
    "differentiate",
    "simplify",
    "size",
    "depth",
    "arity",
    "subtree_at",
    "node_depth",
    "replace_subtree",
    "preorder",
    "to_string",
    "from_string",
]

UNARY_OPS = ("neg", "exp", "log", "sin", "cos", "tanh", "sqrt", "square", "asin")
BINARY_OPS = ("add", "sub", "mul", "div")

_NAN = float("nan")


class Expr:
    """Base class for expression nodes."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", float(self.value))
        if not math.isfinite(self.value):
            raise ValueError(f"constant must be finite, got {self.value!r}")


@dataclass(frozen=True, slots=True)
class Var(Expr):
    index: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"variable index must be >= 0, got {self.index}")


@dataclass(frozen=True, slots=True)
class Unary(Expr):
    op: str
    child: Expr

    def __post_init__(self) -> None:
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary operator {self.op!r}")


@dataclass(frozen=True, slots=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self) -> None:
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary operator {self.op!r}")


@dataclass(frozen=True, slots=True)
class VariableBox:
    """Axis-aligned box of closed per-variable intervals."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        coerced = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        for lo, hi in coerced:
            if math.isnan(lo) or math.isnan(hi) or lo > hi:
                raise ValueError(f"invalid variable bounds ({lo}, {hi})")
        object.__setattr__(self, "bounds", coerced)

    @property
    def arity(self) -> int:
        return len(self.bounds)

    def lows(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    def highs(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])


# --- structural helpers -----------------------------------------------------


def size(e: Expr) -> int:
    """Number of nodes in the tree."""
    t = type(e)
    if t is Unary:
        return 1 + size(e.child)
    if t is Binary:
        return 1 + size(e.left) + size(e.right)
    return 1


def depth(e: Expr) -> int:
    """Height of the tree; a lone leaf has depth 1."""
    t = type(e)
    if t is Unary:
        return 1 + depth(e.child)
    if t is Binary:
        return 1 + max(depth(e.left), depth(e.right))
    return 1


def arity(e: Expr) -> int:
    """Smallest input width the tree can be evaluated on (1 + max var index)."""
    t = type(e)
    if t is Var:
        return e.index + 1
    if t is Unary:
        return arity(e.child)
    if t is Binary:
        return max(arity(e.left), arity(e.right))
    return 0


def preorder(e: Expr) -> Iterator[Expr]:
    """Yield every node in preorder (node, left subtree, right subtree)."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        t = type(node)
        if t is Unary:
            stack.append(node.child)
        elif t is Binary:
            stack.append(node.right)
            stack.append(node.left)


def subtree_at(e: Expr, index: int) -> Expr:
    """Return the subtree rooted at preorder position ``index``."""
    for k, node in enumerate(preorder(e)):
        if k == index:
            return node
    raise IndexError(f"node index {index} out of range for tree of size {size(e)}")


def node_depth(e: Expr, index: int) -> int:
    """Depth (root = 1) of the node at preorder position ``index``."""
    stack = [(e, 1)]
    k = 0
    while stack:
        node, d = stack.pop()
        if k == index:
            return d
        k += 1
        t = type(node)
        if t is Unary:
            stack.append((node.child, d + 1))
        elif t is Binary:
            stack.append((node.right, d + 1))
            stack.append((node.left, d + 1))
    raise IndexError(f"node index {index} out of range for tree of size {size(e)}")


def replace_subtree(e: Expr, index: int, replacement: Expr) -> Expr:
    """Return a copy of ``e`` with the subtree at preorder ``index`` swapped out.

    Untouched subtrees are shared with the original; nodes are immutable so
    sharing is safe.
    """

    def rec(node: Expr, i: int) -> Expr:
        if i == 0:
            return replacement
        i -= 1
        t = type(node)
        if t is Unary:
            return Unary(node.op, rec(node.child, i))
        if t is Binary:
            left_size = size(node.left)
            if i < left_size:
                return Binary(node.op, rec(node.left, i), node.right)
            return Binary(node.op, node.left, rec(node.right, i - left_size))
        raise IndexError(
            f"node index {index} out of range for tree of size {size(e)}"
        )

    return rec(e, index)


# --- evaluation ---------------------------------------------------------------

def _scalar_neg(c: float) -> float:
    return -c


def _scalar_log(c: float) -> float:
    return math.log(c) if c > 0 else _NAN


def _scalar_sqrt(c: float) -> float:
    return math.sqrt(c) if c >= 0 else _NAN


def _scalar_square(c: float) -> float:
    return c * c


def _scalar_asin(c: float) -> float:
    return math.asin(c) if -1.0 <= c <= 1.0 else _NAN


_UNARY_SCALAR: dict[str, Callable[[float], float]] = {
    "neg": _scalar_neg,
    "exp": math.exp,
    "log": _scalar_log,
    "sin": math.sin,
    "cos": math.cos,
    "tanh": math.tanh,
    "sqrt": _scalar_sqrt,
    "square": _scalar_square,
    "asin": _scalar_asin,
}


def _scalar_div(a: float, b: float) -> float:
    return a / b if b != 0 else _NAN


_BINARY_SCALAR: dict[str, Callable[[float, float], float]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": _scalar_div,
}


def evaluate(e: Expr, point: Sequence[float]) -> float:
    """Evaluate the tree at one input point.

    Every primitive result is checked for finiteness; non-finite values
    collapse to NaN on the spot, so the only non-real output is NaN.
    """
    t = type(e)
    if t is Const:
        return e.value
    if t is Var:
        return float(point[e.index])
    if t is Unary:
        c = evaluate(e.child, point)
        try:
            r = _UNARY_SCALAR[e.op](c)
        except (ValueError, OverflowError):
            return _NAN
        return r if math.isfinite(r) else _NAN
    c1 = evaluate(e.left, point)
    c2 = evaluate(e.right, point)
    try:
        r = _BINARY_SCALAR[e.op](c1, c2)
    except OverflowError:
        return _NAN
    return r if math.isfinite(r) else _NAN


_UNARY_UFUNC = {
    "neg": np.negative,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
    "square": np.square,
    "asin": np.arcsin,
}

_BINARY_UFUNC = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.true_divide,
}

# Ops that can turn finite-or-NaN inputs into +/-inf and therefore need an
# explicit NaN rewrite; the rest are bounded or map bad inputs to NaN already.
_NEEDS_SANITIZE = frozenset({"add", "sub", "mul", "div", "exp", "log", "square"})

_OP_CONST = 0
_OP_VAR = 1
_OP_UNARY = 2
_OP_BINARY = 3


def _compile(e: Expr, prog: list) -> None:
    t = type(e)
    if t is Const:
        prog.append((_OP_CONST, e.value, False))
    elif t is Var:
        prog.append((_OP_VAR, e.index, False))
    elif t is Unary:
        _compile(e.child, prog)
        prog.append((_OP_UNARY, _UNARY_UFUNC[e.op], e.op in _NEEDS_SANITIZE))
    else:
        _compile(e.left, prog)
        _compile(e.right, prog)
        prog.append((_OP_BINARY, _BINARY_UFUNC[e.op], e.op in _NEEDS_SANITIZE))


def evaluate_batch(e: Expr, X: np.ndarray) -> np.ndarray:
    """Evaluate the tree on every row of ``X`` (shape ``(n, arity)``).

    Matches :func:`evaluate` pointwise: non-finite intermediates become NaN.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d input matrix, got shape {X.shape}")
    prog: list = []
    _compile(e, prog)
    stack: list = []
    with np.errstate(all="ignore"):
        for kind, payload, sanitize in prog:
            if kind == _OP_CONST:
                stack.append(payload)
                continue
            if kind == _OP_VAR:
                if payload >= X.shape[1]:
                    raise IndexError(
                        f"tree reads x{payload} but input has {X.shape[1]} columns"
                    )
                stack.append(X[:, payload])
                continue
            if kind == _OP_UNARY:
                r = payload(stack[-1])
            else:
                b = stack.pop()
                r = payload(stack[-1], b)
            if sanitize:
                r = np.where(np.isfinite(r), r, _NAN)
            stack[-1] = r
    out = stack[0]
    if np.ndim(out) == 0:
        return np.full(X.shape[0], float(out))
    return np.array(out, dtype=float, copy=True)


# --- differentiation ----------------------------------------------------------

# Smart constructors used only while building derivatives.  They fold constants
# and drop zero terms so derivative trees stay near the size of their source.
# Folding x*0 -> 0 is deliberate here: the derivative is a mathematical object
# describing the function where it is defined, not a genotype.


def _is_zero(e: Expr) -> bool:
    return type(e) is Const and e.value == 0.0


def _is_one(e: Expr) -> bool:
    return type(e) is Const and e.value == 1.0


def _fneg(a: Expr) -> Expr:
    if type(a) is Const:
        return Const(-a.value)
    if type(a) is Unary and a.op == "neg":
        return a.child
    return Unary("neg", a)


def _fadd(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    if type(a) is Const and type(b) is Const:
        v = a.value + b.value
        if math.isfinite(v):
            return Const(v)
    return Binary("add", a, b)


def _fsub(a: Expr, b: Expr) -> Expr:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return _fneg(b)
    if type(a) is Const and type(b) is Const:
        v = a.value - b.value
        if math.isfinite(v):
            return Const(v)
    return Binary("sub", a, b)


def _fmul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return Const(0.0)
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    if type(a) is Const and type(b) is Const:
        v = a.value * b.value
        if math.isfinite(v):
            return Const(v)
    return Binary("mul", a, b)


def _fdiv(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return Const(0.0)
    if _is_one(b):
        return a
    if type(a) is Const and type(b) is Const and b.value != 0:
        v = a.value / b.value
        if math.isfinite(v):
            return Const(v)
    return Binary("div", a, b)


def differentiate(e: Expr, var: int) -> Expr:
    """Symbolic partial derivative with respect to input ``var``.

    The result is built with folding constructors, so common patterns collapse
    (for example the derivative of ``exp(x0)`` is ``exp(x0)`` itself, not
    ``exp(x0) * 1``).  Derivative trees may exceed genotype size limits; they
    are not genotypes.
    """
    if var < 0:
        raise ValueError(f"variable index must be >= 0, got {var}")
    t = type(e)
    if t is Const:
        return Const(0.0)
    if t is Var:
        return Const(1.0) if e.index == var else Const(0.0)
    if t is Unary:
        c = e.child
        dc = differentiate(c, var)
        op = e.op
        if op == "neg":
            return _fneg(dc)
        if op == "exp":
            return _fmul(e, dc)
        if op == "log":
            return _fdiv(dc, c)
        if op == "sin":
            return _fmul(Unary("cos", c), dc)
        if op == "cos":
            return _fneg(_fmul(Unary("sin", c), dc))
        if op == "tanh":
            return _fmul(_fsub(Const(1.0), Unary("square", e)), dc)
        if op == "sqrt":
            return _fdiv(dc, _fmul(Const(2.0), e))
        if op == "square":
            return _fmul(_fmul(Const(2.0), c), dc)
        # asin
        return _fdiv(dc, Unary("sqrt", _fsub(Const(1.0), Unary("square", c))))
    dl = differentiate(e.left, var)
    dr = differentiate(e.right, var)
    op = e.op
    if op == "add":
        return _fadd(dl, dr)
    if op == "sub":
        return _fsub(dl, dr)
    if op == "mul":
        return _fadd(_fmul(dl, e.right), _fmul(e.left, dr))
    # div: (u'v - uv') / v^2
    num = _fsub(_fmul(dl, e.right), _fmul(e.left, dr))
    return _fdiv(num, Unary("square", e.right))


# --- simplification -----------------------------------------------------------

# Ops that cannot introduce NaN for finite inputs (overflow aside).  Rules that
# delete a subtree (x*0, x-x) are restricted to such subtrees so that the
# simplified tree keeps NaN at exactly the points the original had it.
_NAN_FREE_OPS = frozenset({"neg", "add", "sub", "mul"})


def _nan_total(e: Expr) -> bool:
    t = type(e)
    if t is Const or t is Var:
        return True
    if t is Unary:
        return e.op in _NAN_FREE_OPS and _nan_total(e.child)
    return e.op in _NAN_FREE_OPS and _nan_total(e.left) and _nan_total(e.right)


def simplify(e: Expr) -> Expr:
    """Bottom-up algebraic cleanup preserving pointwise semantics.

    Applied rules: finite constant folding, the identities ``x+0``, ``x-0``,
    ``x*1``, ``x/1``, ``neg(neg(x))``, and (only for subtrees that can never
    produce NaN) ``x*0 -> 0`` and ``x-x -> 0``.
    """
    t = type(e)
    if t is Const or t is Var:
        return e
    if t is Unary:
        c = simplify(e.child)
        if type(c) is Const:
            try:
                v = _UNARY_SCALAR[e.op](c.value)
            except (ValueError, OverflowError):
                v = _NAN
            if math.isfinite(v):
                return Const(v)
        if e.op == "neg" and type(c) is Unary and c.op == "neg":
            return c.child
        return e if c is e.child else Unary(e.op, c)

    l = simplify(e.left)
    r = simplify(e.right)
    op = e.op
    if type(l) is Const and type(r) is Const:
        try:
            v = _BINARY_SCALAR[op](l.value, r.value)
        except OverflowError:
            v = _NAN
        if math.isfinite(v):
            return Const(v)
    if op == "add":
        if _is_zero(l):
            return r
        if _is_zero(r):
            return l
    elif op == "sub":
        if _is_zero(r):
            return l
        if _is_zero(l):
            return Unary("neg", r)
        if l == r and _nan_total(l):
            return Const(0.0)
    elif op == "mul":
        if _is_one(l):
            return r
        if _is_one(r):
            return l
        if (_is_zero(l) and _nan_total(r)) or (_is_zero(r) and _nan_total(l)):
            return Const(0.0)
    elif op == "div":
        if _is_one(r):
            return l
    if l is e.left and r is e.right:
        return e
    return Binary(op, l, r)


# --- text form ----------------------------------------------------------------

_BINARY_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
_SYMBOL_BINARY = {v: k for k, v in _BINARY_SYMBOL.items()}


def to_string(e: Expr) -> str:
    """Render the canonical text form (see module docstring for the grammar)."""
    t = type(e)
    if t is Const:
        return repr(e.value)
    if t is Var:
        return f"x{e.index}"
    if t is Unary:
        return f"{e.op}({to_string(e.child)})"
    return f"({to_string(e.left)} {_BINARY_SYMBOL[e.op]} {to_string(e.right)})"


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<punct>[()+\-*/])"
    r")"
)

_VAR_RE = re.compile(r"^x(\d+)$")


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"unexpected character {text[pos]!r} at position {pos}")
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("punct", m.group("punct")))
        pos = m.end()
    return tokens


def from_string(text: str) -> Expr:
    """Parse the canonical text form back into a tree.

    Raises ``ValueError`` on malformed input (including unknown operator
    names and trailing garbage).
    """
    tokens = _tokenize(text)

    def parse(pos: int) -> tuple[Expr, int]:
        if pos >= len(tokens):
            raise ValueError("unexpected end of input")
        kind, value = tokens[pos]
        if kind == "num":
            return Const(float(value)), pos + 1
        if kind == "punct" and value == "-":
            if pos + 1 < len(tokens) and tokens[pos + 1][0] == "num":
                return Const(-float(tokens[pos + 1][1])), pos + 2
            raise ValueError(f"stray '-' at token {pos}")
        if kind == "punct" and value == "(":
            left, pos = parse(pos + 1)
            if pos >= len(tokens) or tokens[pos][0] != "punct" or tokens[pos][1] not in _SYMBOL_BINARY:
                raise ValueError(f"expected binary operator at token {pos}")
            op = _SYMBOL_BINARY[tokens[pos][1]]
            right, pos = parse(pos + 1)
            if pos >= len(tokens) or tokens[pos] != ("punct", ")"):
                raise ValueError(f"expected ')' at token {pos}")
            return Binary(op, left, right), pos + 1
        if kind == "name":
            var_match = _VAR_RE.match(value)
            if var_match and not (
                pos + 1 < len(tokens) and tokens[pos + 1] == ("punct", "(")
            ):
                return Var(int(var_match.group(1))), pos + 1
            if value not in UNARY_OPS:
                raise ValueError(f"unknown operator {value!r}")
            if pos + 1 >= len(tokens) or tokens[pos + 1] != ("punct", "("):
                raise ValueError(f"expected '(' after {value!r}")
            child, pos = parse(pos + 2)
            if pos >= len(tokens) or tokens[pos] != ("punct", ")"):
                raise ValueError(f"expected ')' at token {pos}")
            return Unary(value, child), pos + 1
        raise ValueError(f"unexpected token {value!r} at position {pos}")

    tree, pos = parse(0)
    if pos != len(tokens):
        raise ValueError(f"trailing input starting at token {pos}")
    return tree
