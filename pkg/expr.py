"""
Expression language in which users define functions Q and modulating maps G.

Grammar, loosest binding first:

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := primary ('^' unary)?          right-associative
    primary := number | 'e' | variable | name '(' expr (',' expr)* ')' | '(' expr ')'

Function bodies use x1..xn. Modulating maps use u1..un (first point),
v1..vn (second point) and s. Functions: exp, log, abs, sqrt, max, min.

Trees are immutable; evaluation is pure and may run from many threads.
Two evaluators are provided: a scalar one built on `math` and a vectorized
one built on numpy. They share no arithmetic so each can check the other.
"""
import logging
import math
import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from errors import EvaluationDomainError, ExpressionSyntaxError, ParameterError, VariableError

logger = logging.getLogger(__name__)

FUNCTION_VARIABLES = "function"
MODMAP_VARIABLES = "modmap"

UNARY_FUNCTIONS = ("exp", "log", "abs", "sqrt")
NARY_FUNCTIONS = ("max", "min")

_TOKEN_RE = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
)
_VARIABLE_RE = re.compile(r"([xuv])(\d+)$")


# ---------------------------------------------------------------------------
# Tree nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float
    name: str = None  # "e" for the named constant

    def text(self):
        if self.name:
            return self.name
        if self.value < 0:
            return f"(-{-self.value!r})"
        return repr(self.value)

    def eval_scalar(self, env):
        return self.value

    def eval_array(self, env):
        return np.float64(self.value)

    def eval_dual(self, env, direction):
        return self.value, 0.0, True


@dataclass(frozen=True)
class Var:
    kind: str  # 'x', 'u', 'v' or 's'
    index: int = 0  # 1-based; 0 for s

    def text(self):
        return "s" if self.kind == "s" else f"{self.kind}{self.index}"

    def eval_scalar(self, env):
        if self.kind == "s":
            return env["s"]
        return env[self.kind][self.index - 1]

    def eval_array(self, env):
        if self.kind == "s":
            return env["s"]
        return env[self.kind][self.index - 1]

    def eval_dual(self, env, direction):
        return env["x"][self.index - 1], direction[self.index - 1], True


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg', 'exp', 'log', 'abs', 'sqrt'
    arg: object

    def text(self):
        if self.op == "neg":
            return f"(-{self.arg.text()})"
        return f"{self.op}({self.arg.text()})"

    def eval_scalar(self, env):
        return _unary_scalar(self.op, self.arg.eval_scalar(env), self)

    def eval_array(self, env):
        a = self.arg.eval_array(env)
        if self.op == "neg":
            return -a
        if self.op == "abs":
            return np.abs(a)
        if self.op == "exp":
            return _finite(np.exp(a), self)
        if self.op == "log":
            _reject(a <= 0, "log of non-positive value", self)
            return np.log(a)
        _reject(a < 0, "square root of negative value", self)
        return np.sqrt(a)

    def eval_dual(self, env, direction):
        a, da, smooth = self.arg.eval_dual(env, direction)
        value = _unary_scalar(self.op, a, self)
        if self.op == "neg":
            return value, -da, smooth
        if self.op == "abs":
            if a == 0:
                # kink: right branch
                return value, da, False
            return value, (da if a > 0 else -da), smooth
        if self.op == "exp":
            return value, value * da, smooth
        if self.op == "log":
            return value, da / a, smooth
        if a == 0:
            if da == 0:
                return value, 0.0, False
            raise EvaluationDomainError("unbounded derivative of sqrt at 0", self.text())
        return value, da / (2.0 * value), smooth


def _unary_scalar(op, a, node):
    if op == "neg":
        return -a
    if op == "abs":
        return abs(a)
    if op == "exp":
        try:
            return math.exp(a)
        except OverflowError:
            raise EvaluationDomainError("overflow", node.text()) from None
    if op == "log":
        if a <= 0:
            raise EvaluationDomainError("log of non-positive value", node.text())
        return math.log(a)
    if a < 0:
        raise EvaluationDomainError("square root of negative value", node.text())
    return math.sqrt(a)


@dataclass(frozen=True)
class Binary:
    op: str  # '+', '-', '*', '/', '^'
    left: object
    right: object

    def text(self):
        return f"({self.left.text()} {self.op} {self.right.text()})"

    def eval_scalar(self, env):
        a = self.left.eval_scalar(env)
        b = self.right.eval_scalar(env)
        if self.op == "+":
            result = a + b
        elif self.op == "-":
            result = a - b
        elif self.op == "*":
            result = a * b
        elif self.op == "/":
            if b == 0:
                raise EvaluationDomainError("division by zero", self.text())
            result = a / b
        else:
            result = _pow_scalar(a, b, self)
        if not math.isfinite(result):
            raise EvaluationDomainError("overflow", self.text())
        return result

    def eval_array(self, env):
        a = self.left.eval_array(env)
        b = self.right.eval_array(env)
        if self.op == "+":
            result = a + b
        elif self.op == "-":
            result = a - b
        elif self.op == "*":
            result = a * b
        elif self.op == "/":
            _reject(b == 0, "division by zero", self)
            result = a / b
        else:
            _reject((a == 0) & (b < 0), "zero raised to a negative power", self)
            _reject((a < 0) & (b != np.floor(b)), "negative base with non-integer exponent", self)
            result = np.power(a, b)
        return _finite(result, self)

    def eval_dual(self, env, direction):
        a, da, smooth_a = self.left.eval_dual(env, direction)
        b, db, smooth_b = self.right.eval_dual(env, direction)
        smooth = smooth_a and smooth_b
        if self.op == "+":
            value, derivative = a + b, da + db
        elif self.op == "-":
            value, derivative = a - b, da - db
        elif self.op == "*":
            value, derivative = a * b, da * b + a * db
        elif self.op == "/":
            if b == 0:
                raise EvaluationDomainError("division by zero", self.text())
            value, derivative = a / b, (da * b - a * db) / (b * b)
        else:
            value = _pow_scalar(a, b, self)
            if db == 0:
                derivative = 0.0 if da == 0 else b * _pow_scalar(a, b - 1.0, self) * da
            else:
                if a <= 0:
                    raise EvaluationDomainError("variable exponent needs a positive base", self.text())
                derivative = value * (db * math.log(a) + b * da / a)
        if not (math.isfinite(value) and math.isfinite(derivative)):
            raise EvaluationDomainError("overflow", self.text())
        return value, derivative, smooth


@dataclass(frozen=True)
class NAry:
    op: str  # 'max' or 'min'
    args: tuple

    def text(self):
        return f"{self.op}({', '.join(arg.text() for arg in self.args)})"

    def eval_scalar(self, env):
        values = [arg.eval_scalar(env) for arg in self.args]
        return max(values) if self.op == "max" else min(values)

    def eval_array(self, env):
        values = [arg.eval_array(env) for arg in self.args]
        reduce = np.maximum if self.op == "max" else np.minimum
        result = values[0]
        for value in values[1:]:
            result = reduce(result, value)
        return result

    def eval_dual(self, env, direction):
        results = [arg.eval_dual(env, direction) for arg in self.args]
        values = [r[0] for r in results]
        best = max(values) if self.op == "max" else min(values)
        chosen = values.index(best)  # first listed on ties
        tie = values.count(best) > 1
        value, derivative, smooth = results[chosen]
        return value, derivative, smooth and not tie


def _pow_scalar(a, b, node):
    if a == 0 and b < 0:
        raise EvaluationDomainError("zero raised to a negative power", node.text())
    if a < 0 and b != math.floor(b):
        raise EvaluationDomainError("negative base with non-integer exponent", node.text())
    try:
        return math.pow(a, b)
    except OverflowError:
        raise EvaluationDomainError("overflow", node.text()) from None


def _reject(mask, message, node):
    mask = np.atleast_1d(mask)
    if mask.any():
        index = int(np.flatnonzero(mask)[0])
        raise EvaluationDomainError(message, node.text(), index=index)


def _finite(result, node):
    _reject(~np.isfinite(result), "overflow", node)
    return result


# ---------------------------------------------------------------------------
# Public tree wrapper
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExprAst:
    """A parsed expression together with the dimension and variable set it was checked against."""
    root: object
    dimension: int
    variable_set: str = FUNCTION_VARIABLES

    def __str__(self):
        return to_text(self)

    @property
    def is_modmap(self):
        return self.variable_set == MODMAP_VARIABLES


class DualResult(NamedTuple):
    value: float
    derivative: float
    smooth: bool


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

class _Token(NamedTuple):
    kind: str
    text: str
    position: int


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ExpressionSyntaxError(f"unexpected character '{text[pos]}'", pos + 1, text)
        tokens.append(_Token(match.lastgroup, match.group(), pos + 1))
        pos = match.end()
    tokens.append(_Token("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text, dimension, variable_set):
        self.text = text
        self.dimension = dimension
        self.variable_set = variable_set
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def current(self):
        return self.tokens[self.pos]

    def advance(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def at_op(self, *ops):
        return self.current.kind == "op" and self.current.text in ops

    def fail(self, message, token=None):
        token = token or self.current
        if token.kind == "end":
            message = f"{message}: unexpected end of input"
        else:
            message = f"{message}: unexpected '{token.text}'"
        raise ExpressionSyntaxError(message, token.position, self.text)

    def expect(self, op):
        if not self.at_op(op):
            self.fail(f"expected '{op}'")
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.current.kind != "end":
            self.fail("expected operator")
        return node

    def expr(self):
        node = self.term()
        while self.at_op("+", "-"):
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.at_op("*", "/"):
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.at_op("-"):
            self.advance()
            return Unary("neg", self.unary())
        if self.at_op("+"):
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.at_op("^"):
            self.advance()
            return Binary("^", base, self.unary())
        return base

    def primary(self):
        token = self.current
        if token.kind == "number":
            self.advance()
            return Const(float(token.text))
        if token.kind == "name":
            self.advance()
            if self.at_op("("):
                return self.call(token)
            return self.name(token)
        if self.at_op("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail("expected a number, variable, function or '('")

    def call(self, token):
        name = token.text
        if name not in UNARY_FUNCTIONS and name not in NARY_FUNCTIONS:
            raise ExpressionSyntaxError(f"unknown function '{name}'", token.position, self.text)
        self.expect("(")
        args = [self.expr()]
        while self.at_op(","):
            self.advance()
            args.append(self.expr())
        self.expect(")")
        if name in UNARY_FUNCTIONS:
            if len(args) != 1:
                raise ExpressionSyntaxError(f"{name} takes exactly one argument", token.position, self.text)
            return Unary(name, args[0])
        return NAry(name, tuple(args))

    def name(self, token):
        name = token.text
        if name == "e":
            return Const(math.e, "e")
        if name == "s":
            if self.variable_set != MODMAP_VARIABLES:
                raise VariableError("variable 's' is only available in modulating maps", token.position, self.text)
            return Var("s")
        match = _VARIABLE_RE.match(name)
        if match is None:
            raise ExpressionSyntaxError(f"unknown identifier '{name}'", token.position, self.text)
        kind, index = match.group(1), int(match.group(2))
        if self.variable_set == FUNCTION_VARIABLES and kind != "x":
            raise VariableError(f"variable '{name}' is not allowed in a function body (use x1..xn)",
                                token.position, self.text)
        if self.variable_set == MODMAP_VARIABLES and kind == "x":
            raise VariableError(f"variable '{name}' is not allowed in a modulating map (use u, v, s)",
                                token.position, self.text)
        if not 1 <= index <= self.dimension:
            raise VariableError(f"variable '{name}' out of range 1..{self.dimension}", token.position, self.text)
        return Var(kind, index)


def parse(text, dimension, variable_set=FUNCTION_VARIABLES):
    """
    Parse expression text into an immutable tree

    Args:
        text: Expression source
        dimension: Number of coordinates n (x1..xn, or u1..un / v1..vn)
        variable_set: FUNCTION_VARIABLES or MODMAP_VARIABLES

    Returns:
        ExprAst: Parsed tree

    Raises:
        ExpressionSyntaxError: Malformed text, with the 1-based character position
        VariableError: Out-of-range index or variable from the wrong set
    """
    if variable_set not in (FUNCTION_VARIABLES, MODMAP_VARIABLES):
        raise ParameterError(f"unknown variable set '{variable_set}'")
    if not isinstance(dimension, int) or dimension < 1:
        raise ParameterError(f"dimension must be a positive integer, got {dimension!r}")
    if text is None or not text.strip():
        raise ExpressionSyntaxError("empty expression", 1, text or "")
    root = _Parser(text, dimension, variable_set).parse()
    logger.debug("Parsed %r as %s", text, root.text())
    return ExprAst(root, dimension, variable_set)


def to_text(ast):
    """Fully parenthesized text; parse(to_text(ast)) rebuilds the same tree."""
    return ast.root.text()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _binding(ast, points, s):
    expected = 2 if ast.is_modmap else 1
    if len(points) != expected:
        raise ParameterError(f"expected {expected} point(s) for a {ast.variable_set} expression, got {len(points)}")
    if ast.is_modmap and s is None:
        raise ParameterError("a modulating map needs a value for s")
    if not ast.is_modmap and s is not None:
        raise ParameterError("s is only bound for modulating maps")


def evaluate(ast, *points, s=None):
    """
    Evaluate at a single binding in double precision

    Args:
        ast: Parsed expression
        points: One point for a function body, two (m1, m2) for a modulating map
        s: Value of s, required for (and only for) modulating maps

    Returns:
        float: Value of the expression

    Raises:
        EvaluationDomainError: The evaluation left the domain of an operation
    """
    _binding(ast, points, s)
    coords = []
    for point in points:
        values = tuple(float(c) for c in np.atleast_1d(point))
        if len(values) != ast.dimension:
            raise ParameterError(f"point has dimension {len(values)}, expression expects {ast.dimension}")
        coords.append(values)
    if ast.is_modmap:
        env = {"u": coords[0], "v": coords[1], "s": float(s)}
    else:
        env = {"x": coords[0]}
    return float(ast.root.eval_scalar(env))


def evaluate_array(ast, *points, s=None):
    """
    Vectorized evaluation over many bindings at once

    Args:
        ast: Parsed expression
        points: Arrays of shape (N, n); one for a function body, two for a modulating map
        s: Scalar or array of shape (N,) for modulating maps

    Returns:
        np.ndarray: Values of shape (N,)

    Raises:
        EvaluationDomainError: `index` names the first offending row
    """
    _binding(ast, points, s)
    arrays = [np.atleast_2d(np.asarray(p, dtype=float)) for p in points]
    count = arrays[0].shape[0]
    for array in arrays:
        if array.shape != (count, ast.dimension):
            raise ParameterError(f"points have shape {array.shape}, expected ({count}, {ast.dimension})")
    with np.errstate(all="ignore"):
        if ast.is_modmap:
            env = {"u": arrays[0].T, "v": arrays[1].T, "s": np.asarray(s, dtype=float)}
        else:
            env = {"x": arrays[0].T}
        result = ast.root.eval_array(env)
    return np.broadcast_to(np.asarray(result, dtype=float), (count,)).copy()


def evaluate_dual(ast, point, direction):
    """
    Value and directional derivative by forward-mode dual numbers

    At a kink (abs at 0, tied max/min) the first-listed / right branch is
    differentiated and the result is flagged non-smooth.

    Args:
        ast: Parsed function body
        point: Evaluation point
        direction: Direction vector d

    Returns:
        DualResult: (value, gradient . d, smooth flag)
    """
    if ast.is_modmap:
        raise ParameterError("dual evaluation is defined for function bodies only")
    x = tuple(float(c) for c in np.atleast_1d(point))
    d = tuple(float(c) for c in np.atleast_1d(direction))
    if len(x) != ast.dimension or len(d) != ast.dimension:
        raise ParameterError(f"point and direction must have dimension {ast.dimension}")
    value, derivative, smooth = ast.root.eval_dual({"x": x}, d)
    return DualResult(float(value), float(derivative), bool(smooth))


# ---------------------------------------------------------------------------
# Tree combinators
# ---------------------------------------------------------------------------

def _common(asts):
    first = asts[0]
    for other in asts[1:]:
        if (other.dimension, other.variable_set) != (first.dimension, first.variable_set):
            raise ParameterError("expressions differ in dimension or variable set")
    return first.dimension, first.variable_set


def constant(value, dimension, variable_set=FUNCTION_VARIABLES):
    return ExprAst(Const(float(value)), dimension, variable_set)


def sum_of(left, right):
    dimension, variable_set = _common([left, right])
    return ExprAst(Binary("+", left.root, right.root), dimension, variable_set)


def scaled(factor, ast):
    return ExprAst(Binary("*", Const(float(factor)), ast.root), ast.dimension, ast.variable_set)


def maximum(asts):
    if not asts:
        raise ParameterError("maximum of an empty list")
    dimension, variable_set = _common(list(asts))
    if len(asts) == 1:
        return asts[0]
    return ExprAst(NAry("max", tuple(a.root for a in asts)), dimension, variable_set)
