"""Small expression language for driver and terminal-condition formulas.

Grammar (see ``docs/grammar.md`` for the EBNF): arithmetic over ``+ - * / ^``
with unary minus, parentheses, decimal literals, and the function set
``abs, sin, cos, exp, min, max, norm2, dot``.  Driver expressions may refer
to ``s`` (time), ``y``/``ybar`` (state and its mean) and ``z``/``zbar``
(martingale integrand and its mean); terminal expressions refer to the
Brownian level ``w`` or its coordinates ``w1 .. w9``.

Scalar convention for vectors: ``abs``, ``sin``, ``cos`` and ``exp`` applied
to a vector quantity act on its Euclidean norm, so every well-formed
expression is scalar-valued.  Multi-component generators are written as
``;``-separated expression lists.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EvalDomainError, InvalidInput, ParseError

__all__ = [
    "GeneratorExpr",
    "parse",
    "to_text",
    "evaluate",
    "evaluate_terminal",
    "builtin",
    "GENERATOR_VARS",
    "TERMINAL_VARS",
    "FUNCTIONS",
]

GENERATOR_VARS: tuple[str, ...] = ("s", "y", "ybar", "z", "zbar")
TERMINAL_VARS: tuple[str, ...] = ("w",) + tuple(f"w{i}" for i in range(1, 10))

# function name -> arity
FUNCTIONS: dict[str, int] = {
    "abs": 1,
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "min": 2,
    "max": 2,
    "norm2": 1,
    "dot": 2,
}


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Expr"
    right: "Expr"
    pos: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    pos: int = field(default=0, compare=False, repr=False)


Expr = Num | Var | Neg | Bin | Call


# ---------------------------------------------------------------------------
# Lexer / parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)


def _tokenize(text: str, offset: int) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", offset + i + 1)
        i = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        tokens.append((kind, m.group(), offset + m.start() + 1))
    tokens.append(("end", "", offset + len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, tokens, variables):
        self.tokens = tokens
        self.k = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, text):
        kind, val, pos = self.peek()
        if val != text:
            raise ParseError(f"expected {text!r}, found {val or 'end of input'!r}", pos)
        return self.advance()

    def parse_expr(self):
        node = self.parse_term()
        while self.peek()[1] in ("+", "-"):
            _, op, pos = self.advance()
            node = Bin(op, node, self.parse_term(), pos=pos)
        return node

    def parse_term(self):
        node = self.parse_factor()
        while self.peek()[1] in ("*", "/"):
            _, op, pos = self.advance()
            node = Bin(op, node, self.parse_factor(), pos=pos)
        return node

    def parse_factor(self):
        return self.parse_unary()

    def parse_unary(self):
        kind, val, pos = self.peek()
        if val == "-":
            self.advance()
            return Neg(self.parse_unary(), pos=pos)
        return self.parse_power()

    def parse_power(self):
        # exponentiation binds tighter than unary minus and is
        # right-associative; the exponent re-enters at the unary level so
        # that y^-2 and y^2^3 both parse
        node = self.parse_primary()
        if self.peek()[1] == "^":
            _, _, pos = self.advance()
            node = Bin("^", node, self.parse_unary(), pos=pos)
        return node

    def parse_primary(self):
        kind, val, pos = self.advance()
        if kind == "num":
            return Num(float(val), pos=pos)
        if kind == "ident":
            if self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function {val!r}", pos)
                self.advance()
                args = [self.parse_expr()]
                while self.peek()[1] == ",":
                    self.advance()
                    args.append(self.parse_expr())
                self.expect(")")
                if len(args) != FUNCTIONS[val]:
                    raise ParseError(
                        f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", pos
                    )
                return Call(val, tuple(args), pos=pos)
            if val not in self.variables:
                raise ParseError(f"unknown identifier {val!r}", pos)
            return Var(val, pos=pos)
        if val == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {val or 'end of input'!r}", pos)


@dataclass(frozen=True)
class GeneratorExpr:
    """Parsed expression list: one AST per output component."""

    components: tuple
    variables: tuple[str, ...] = GENERATOR_VARS

    @property
    def n_components(self) -> int:
        return len(self.components)

    def free_variables(self) -> frozenset[str]:
        seen: set[str] = set()
        for c in self.components:
            _collect_vars(c, seen)
        return frozenset(seen)

    def __str__(self) -> str:
        return to_text(self)


def _collect_vars(node: Expr, out: set) -> None:
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Neg):
        _collect_vars(node.operand, out)
    elif isinstance(node, Bin):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, Call):
        for a in node.args:
            _collect_vars(a, out)


def parse(text: str, variables: tuple[str, ...] = GENERATOR_VARS) -> GeneratorExpr:
    """Parse a ``;``-separated expression list.

    Raises :class:`ParseError` with a 1-based column on syntax errors,
    unknown identifiers, and arity mismatches.
    """
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression", 1)
    components = []
    offset = 0
    for chunk in text.split(";"):
        tokens = _tokenize(chunk, offset)
        p = _Parser(tokens, variables)
        node = p.parse_expr()
        kind, val, pos = p.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos)
        components.append(node)
        offset += len(chunk) + 1
    return GeneratorExpr(components=tuple(components), variables=tuple(variables))


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _print_node(node: Expr, parent_prec: int, right_side: bool = False) -> str:
    if isinstance(node, Num):
        s = _fmt_num(node.value)
        prec = 5
    elif isinstance(node, Var):
        s = node.name
        prec = 5
    elif isinstance(node, Neg):
        s = "-" + _print_node(node.operand, _PREC["neg"])
        prec = _PREC["neg"]
    elif isinstance(node, Call):
        s = node.func + "(" + ", ".join(_print_node(a, 0) for a in node.args) + ")"
        prec = 5
    elif isinstance(node, Bin):
        prec = _PREC[node.op]
        if node.op == "^":
            left = _print_node(node.left, prec + 1)
            right = _print_node(node.right, prec)
        else:
            left = _print_node(node.left, prec)
            right = _print_node(node.right, prec + 1)
        s = f"{left}{node.op}{right}" if node.op == "^" else f"{left} {node.op} {right}"
    else:  # pragma: no cover - exhaustive
        raise TypeError(node)
    if prec < parent_prec:
        return "(" + s + ")"
    return s


def to_text(expr: GeneratorExpr) -> str:
    """Canonical text form; ``parse(to_text(e))`` reproduces ``e``."""
    return " ; ".join(_print_node(c, 0) for c in expr.components)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _as_paths_vec(x, m: int, what: str) -> np.ndarray:
    """Normalise ``x`` to shape (P, m) (P may be 1 for deterministic input)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        if m != 1:
            raise DimensionError(f"{what}: scalar given, expected {m} components")
        return a.reshape(1, 1)
    if a.ndim == 1:
        if a.shape[0] == m and m > 1:
            return a.reshape(1, m)
        if m == 1:
            return a.reshape(-1, 1)
        raise DimensionError(f"{what}: shape {a.shape} incompatible with {m} components")
    if a.ndim == 2:
        if a.shape[1] != m:
            raise DimensionError(f"{what}: shape {a.shape}, expected (*, {m})")
        return a
    raise DimensionError(f"{what}: too many axes {a.shape}")


def _as_paths_mat(x, d: int, n: int, what: str) -> np.ndarray:
    """Normalise a (d, n)-matrix-per-path quantity to shape (P, d*n)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        if d * n != 1:
            raise DimensionError(f"{what}: scalar given, expected ({d}, {n})")
        return a.reshape(1, 1)
    if a.ndim == 1:
        if d * n == 1:
            return a.reshape(-1, 1)
        if a.shape[0] == d * n:
            return a.reshape(1, d * n)
        raise DimensionError(f"{what}: shape {a.shape} incompatible with ({d}, {n})")
    if a.ndim == 2:
        if a.shape == (d, n):
            return a.reshape(1, d * n)
        if n == 1 and a.shape[1] == d:
            return a.reshape(a.shape[0], d)
        raise DimensionError(f"{what}: shape {a.shape} incompatible with ({d}, {n})")
    if a.ndim == 3:
        if a.shape[1:] != (d, n):
            raise DimensionError(f"{what}: shape {a.shape}, expected (*, {d}, {n})")
        return a.reshape(a.shape[0], d * n)
    raise DimensionError(f"{what}: too many axes {a.shape}")


def _node_text(node: Expr) -> str:
    return _print_node(node, 0)


def _combine(node, a, b):
    if a.shape[1] != b.shape[1] and a.shape[1] != 1 and b.shape[1] != 1:
        raise DimensionError(
            f"component mismatch {a.shape[1]} vs {b.shape[1]} in '{_node_text(node)}'"
        )


def _eval_node(node: Expr, env: dict) -> np.ndarray:
    if isinstance(node, Num):
        return np.full((1, 1), node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval_node(node.operand, env)
    if isinstance(node, Bin):
        a = _eval_node(node.left, env)
        b = _eval_node(node.right, env)
        _combine(node, a, b)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(b == 0.0):
                raise EvalDomainError("division by zero", _node_text(node), node.pos)
            return a / b
        if node.op == "^":
            if b.shape != (1, 1):
                raise DimensionError(
                    f"exponent must be a constant scalar in '{_node_text(node)}'"
                )
            e = float(b[0, 0])
            if e != round(e):
                if np.any(a < 0.0):
                    raise EvalDomainError(
                        "fractional power of a negative base",
                        _node_text(node),
                        node.pos,
                    )
            if e < 0 and np.any(a == 0.0):
                raise EvalDomainError(
                    "negative power of zero", _node_text(node), node.pos
                )
            return a**e
        raise TypeError(node.op)  # pragma: no cover
    if isinstance(node, Call):
        args = [_eval_node(a, env) for a in node.args]
        f = node.func
        if f == "norm2":
            (a,) = args
            return np.sqrt(np.sum(a * a, axis=1, keepdims=True))
        if f == "dot":
            a, b = args
            if a.shape[1] != b.shape[1]:
                raise DimensionError(
                    f"dot of {a.shape[1]}- and {b.shape[1]}-component vectors"
                )
            return np.sum(a * b, axis=1, keepdims=True)
        if f in ("abs", "sin", "cos", "exp"):
            (a,) = args
            if a.shape[1] > 1:
                # scalar convention: unary transcendental of a vector acts on
                # its Euclidean norm
                a = np.sqrt(np.sum(a * a, axis=1, keepdims=True))
            return {"abs": np.abs, "sin": np.sin, "cos": np.cos, "exp": np.exp}[f](a)
        if f == "min":
            a, b = args
            _combine(node, a, b)
            return np.minimum(a, b)
        if f == "max":
            a, b = args
            _combine(node, a, b)
            return np.maximum(a, b)
        raise TypeError(f)  # pragma: no cover
    raise TypeError(node)  # pragma: no cover


def _run_components(expr: GeneratorExpr, env: dict, n_out: int) -> np.ndarray:
    comps = expr.components
    if len(comps) not in (1, n_out):
        raise DimensionError(
            f"generator has {len(comps)} component(s), scenario needs {n_out}"
        )
    P = max(v.shape[0] for v in env.values()) if env else 1
    out = np.empty((P, n_out))
    for j in range(n_out):
        node = comps[0] if len(comps) == 1 else comps[j]
        val = _eval_node(node, env)
        if val.shape[1] != 1:
            raise DimensionError(
                f"component {j + 1} is {val.shape[1]}-dimensional, expected scalar:"
                f" '{_node_text(node)}'"
            )
        out[:, j] = np.broadcast_to(val[:, 0], (P,))
    if not np.all(np.isfinite(out)):
        raise EvalDomainError("non-finite value", to_text(expr), 1)
    return out


def evaluate(expr: GeneratorExpr, s, y, ybar, z, zbar, n: int = 1, d: int = 1) -> np.ndarray:
    """Evaluate a driver expression, vectorised over paths.

    Parameters
    ----------
    s : float or array_like
        Current time, scalar or per-path ``(P,)``.
    y, ybar : array_like
        State and mean state; scalars, ``(n,)`` vectors, or ``(P, n)`` arrays.
    z, zbar : array_like
        Integrand and mean integrand; scalars, ``(d, n)`` matrices, or
        ``(P, d, n)`` arrays.

    Returns an ``(P, n)`` array (``P = 1`` for fully deterministic input).
    Vectorised evaluation agrees with pointwise scalar evaluation to within
    floating-point roundoff.
    """
    env = {
        "s": _as_paths_vec(s, 1, "s"),
        "y": _as_paths_vec(y, n, "y"),
        "ybar": _as_paths_vec(ybar, n, "ybar"),
        "z": _as_paths_mat(z, d, n, "z"),
        "zbar": _as_paths_mat(zbar, d, n, "zbar"),
    }
    unknown = expr.free_variables() - set(GENERATOR_VARS)
    if unknown:
        raise InvalidInput(f"not a driver expression, uses {sorted(unknown)}")
    return _run_components(expr, env, n)


def evaluate_terminal(expr: GeneratorExpr, w, n: int = 1, d: int = 1) -> np.ndarray:
    """Evaluate a terminal-condition expression at Brownian levels ``w``.

    ``w`` is a scalar, a ``(d,)`` vector, or a ``(P, d)`` array; the result
    has shape ``(P, n)``.
    """
    wv = _as_paths_vec(w, d, "w")
    env = {"w": wv}
    for i in range(1, 10):
        if i <= d:
            env[f"w{i}"] = wv[:, i - 1 : i]
    used = expr.free_variables()
    unknown = used - set(env)
    if unknown:
        raise InvalidInput(f"not a terminal expression, uses {sorted(unknown)}")
    return _run_components(expr, env, n)


# ---------------------------------------------------------------------------
# Built-in generators
# ---------------------------------------------------------------------------

_BUILTIN_TEXT = {
    "ex2.2": "1 + s + abs(y) + abs(ybar) + 0.5*norm2(z)^2 + abs(sin(norm2(zbar)))",
    "ex3.1-f1": "1 + abs(sin(y)) + abs(sin(ybar)) + 0.5*norm2(z)^2 + abs(sin(norm2(zbar)))",
    "ex3.1-f2": "1 + abs(y) + abs(ybar) + 0.5*(norm2(z) + norm2(zbar))^2",
    "ex4.1-f1": "1 + abs(sin(y)) + abs(sin(ybar)) + norm2(z) + norm2(zbar)",
    "ex4.1-f2": "1 + abs(y) + abs(ybar) + 0.5*(norm2(z) + norm2(zbar))^2",
}


def builtin(name: str, alpha: float | None = None) -> GeneratorExpr:
    """Return a named built-in generator.

    ``ex2.1`` takes the mean-integrand growth exponent ``alpha`` in [0, 1);
    the remaining names (``ex2.2``, ``ex3.1-f1``, ``ex3.1-f2``, ``ex4.1-f1``,
    ``ex4.1-f2``) are fixed formulas.
    """
    if name == "ex2.1":
        if alpha is None:
            raise InvalidInput("ex2.1 needs the exponent alpha")
        if not (0.0 <= alpha < 1.0):
            raise InvalidInput("alpha must lie in [0, 1)")
        p = 1.0 + alpha
        text = (
            "1 + abs(y) + abs(ybar) + 0.5*norm2(z)^2 + "
            f"norm2(zbar)^{_fmt_num(p)}"
        )
        return parse(text)
    if name in _BUILTIN_TEXT:
        if alpha is not None:
            raise InvalidInput(f"{name} takes no alpha parameter")
        return parse(_BUILTIN_TEXT[name])
    raise InvalidInput(f"unknown builtin generator {name!r}")


def math_eval_scalar(expr: GeneratorExpr, s, y, ybar, z, zbar) -> float:
    """Scalar-path evaluation used in tests to cross-check vectorisation.

    Only supports the n = d = 1 case; deliberately routed through python
    floats rather than numpy arrays.
    """

    def go(node):
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Var):
            return {"s": s, "y": y, "ybar": ybar, "z": z, "zbar": zbar}[node.name]
        if isinstance(node, Neg):
            return -go(node.operand)
        if isinstance(node, Bin):
            a, b = go(node.left), go(node.right)
            return {
                "+": lambda: a + b,
                "-": lambda: a - b,
                "*": lambda: a * b,
                "/": lambda: a / b,
                "^": lambda: a**b,
            }[node.op]()
        if isinstance(node, Call):
            args = [go(a) for a in node.args]
            return {
                "abs": lambda: abs(args[0]),
                "sin": lambda: math.sin(args[0]),
                "cos": lambda: math.cos(args[0]),
                "exp": lambda: math.exp(args[0]),
                "min": lambda: min(args),
                "max": lambda: max(args),
                "norm2": lambda: abs(args[0]),
                "dot": lambda: args[0] * args[1],
            }[node.func]()
        raise TypeError(node)

    return go(expr.components[0])
