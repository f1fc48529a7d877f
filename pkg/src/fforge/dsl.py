"""Expression language for Finsler functions, validity domains and k-profiles.

Grammar (whitespace and ``#`` comments ignored)::

    expr    := 'let' NAME '=' expr 'in' expr | sum
    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?            # right associative, binds tighter than unary minus
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names resolve, in order, to let-bound names, the coordinates
``t r theta phi dt dr dtheta dphi``, the builtin ``w`` (the SO(3)-invariant
angular speed ``sqrt(dtheta^2 + dphi^2 sin(theta)^2)``), the constant ``pi`` and
declared parameters.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from fforge import jets
from fforge.jets import Jet, JetConfig

COORDINATES = jets.VARIABLE_NAMES
BUILTIN_NAMES = ("w", "pi")
FUNCTIONS = {"exp": 1, "ln": 1, "sqrt": 1, "sin": 1, "cos": 1, "abs": 1, "pow": 2}
KEYWORDS = ("let", "in")

Span = tuple[int, int]


class DslError(Exception):
    def __init__(self, message: str, span: Span | None = None):
        super().__init__(message)
        self.message = message
        self.span = span

    def __str__(self):
        if self.span is None:
            return self.message
        return f"{self.message} at {self.span[0]}:{self.span[1]}"


class LexError(DslError):
    pass


class ParseError(DslError):
    pass


class EvaluationError(DslError):
    """A jet domain error raised while evaluating a node; ``span`` locates it."""

    def __init__(self, message: str, span: Span | None, cause: Exception):
        super().__init__(message, span)
        self.cause = cause


class GeometryFileError(DslError):
    def __init__(self, message: str, line: int, span: Span | None = None):
        super().__init__(message, span)
        self.line = line

    def __str__(self):
        return f"line {self.line}: {super().__str__()}"


# --- lexing -----------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # number, identifier, operator, paren, comma, keyword, end
    lexeme: str
    span: Span


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<identifier>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<operator>[-+*/^=])
  | (?P<paren>[()])
  | (?P<comma>,)
    """,
    re.VERBOSE,
)


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise LexError(f"illegal character {source[pos]!r}", (pos, pos + 1))
        kind = m.lastgroup
        if kind == "identifier" and m.group() in KEYWORDS:
            kind = "keyword"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), m.span()))
        pos = m.end()
    return tokens


# --- syntax tree -----------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Name:
    name: str
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Ast"
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Ast"
    right: "Ast"
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Ast", ...]
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Let:
    name: str
    value: "Ast"
    body: "Ast"
    span: Span = field(default=(0, 0), compare=False)


Ast = Num | Name | Unary | Binary | Call | Let

_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_PREFIX_BP = 30


class _Parser:
    def __init__(self, tokens: Sequence[Token], source_len: int):
        self.tokens = list(tokens)
        end = self.tokens[-1].span[1] if self.tokens else source_len
        self.tokens.append(Token("end", "", (end, end)))
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, kind: str, lexeme: str | None = None) -> Token:
        t = self.tok
        if t.kind != kind or (lexeme is not None and t.lexeme != lexeme):
            want = repr(lexeme) if lexeme else kind
            got = repr(t.lexeme) if t.kind != "end" else "end of input"
            raise ParseError(f"expected {want}, found {got}", t.span)
        return self.advance()

    def expression(self, rbp: int = 0) -> Ast:
        t = self.advance()
        left = self.nud(t)
        while True:
            op = self.tok
            if op.kind != "operator" or op.lexeme not in _INFIX:
                break
            lbp = _INFIX[op.lexeme]
            if lbp <= rbp:
                break
            self.advance()
            # '^' is right associative; its right operand may carry a unary sign
            right = self.expression(_PREFIX_BP - 1 if op.lexeme == "^" else lbp)
            left = Binary(op.lexeme, left, right, (_start(left), _end(right)))
        return left

    def nud(self, t: Token) -> Ast:
        if t.kind == "number":
            return Num(float(t.lexeme), t.span)
        if t.kind == "identifier":
            if self.tok.kind == "paren" and self.tok.lexeme == "(":
                return self.call(t)
            return Name(t.lexeme, t.span)
        if t.kind == "keyword" and t.lexeme == "let":
            name = self.expect("identifier")
            self.expect("operator", "=")
            value = self.expression()
            self.expect("keyword", "in")
            body = self.expression()
            return Let(name.lexeme, value, body, (t.span[0], _end(body)))
        if t.kind == "operator" and t.lexeme in "+-":
            operand = self.expression(_PREFIX_BP)
            if t.lexeme == "+":
                return operand
            return Unary("-", operand, (t.span[0], _end(operand)))
        if t.kind == "paren" and t.lexeme == "(":
            inner = self.expression()
            self.expect("paren", ")")
            return inner
        got = repr(t.lexeme) if t.kind != "end" else "end of input"
        raise ParseError(f"expected an expression, found {got}", t.span)

    def call(self, name: Token) -> Ast:
        self.expect("paren", "(")
        args = [self.expression()]
        while self.tok.kind == "comma":
            self.advance()
            args.append(self.expression())
        close = self.expect("paren", ")")
        return Call(name.lexeme, tuple(args), (name.span[0], close.span[1]))


def _start(node: Ast) -> int:
    return node.span[0]


def _end(node: Ast) -> int:
    return node.span[1]


def parse(tokens: Sequence[Token] | str) -> Ast:
    """Parse a token stream (or source text) into an expression tree."""
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    p = _Parser(tokens, 0)
    node = p.expression()
    if p.tok.kind != "end":
        raise ParseError(f"expected operator or end of input, found {p.tok.lexeme!r}", p.tok.span)
    return node


def parse_expression_list(source: str) -> tuple[Ast, ...]:
    """Comma-separated expressions, as used by ``domain:`` and ``point:`` lines."""
    p = _Parser(tokenize(source), len(source))
    items = [p.expression()]
    while p.tok.kind == "comma":
        p.advance()
        items.append(p.expression())
    if p.tok.kind != "end":
        raise ParseError(f"expected ',' or end of input, found {p.tok.lexeme!r}", p.tok.span)
    return tuple(items)


# --- pretty printing --------------------------------------------------------


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_source(node: Ast, parent_bp: int = 0) -> str:
    """Render ``node`` back to source that reparses to an equal tree."""
    if isinstance(node, Num):
        text = _fmt_number(node.value)
        return f"({text})" if node.value < 0 else text
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Let):
        text = f"let {node.name} = {to_source(node.value)} in {to_source(node.body)}"
        return f"({text})" if parent_bp > 0 else text
    if isinstance(node, Unary):
        text = "-" + to_source(node.operand, _PREFIX_BP)
        return f"({text})" if parent_bp > _PREFIX_BP else text
    bp = _INFIX[node.op]
    if node.op == "^":
        left = to_source(node.left, bp + 1)
        right = to_source(node.right, _PREFIX_BP - 1)
    else:
        left = to_source(node.left, bp - 1)
        right = to_source(node.right, bp)
    text = f"{left} {node.op} {right}" if node.op in "+-" else f"{left}{node.op}{right}"
    return f"({text})" if bp <= parent_bp else text


# --- geometry specs ----------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: Span

    def __str__(self):
        return f"{self.code}: {self.message} at {self.span[0]}:{self.span[1]}"


@dataclass(frozen=True)
class GeometrySpec:
    name: str
    l_expr: Ast
    parameters: Mapping[str, float] = field(default_factory=dict)
    domain: tuple[Ast, ...] = ()
    signature_hint: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "parameters", MappingProxyType(dict(self.parameters)))

    def __hash__(self):
        return hash((self.name, self.l_expr, tuple(sorted(self.parameters.items())), self.domain))

    def to_text(self) -> str:
        lines = [f"name: {self.name}"]
        for k, v in self.parameters.items():
            lines.append(f"param {k} = {v!r}")
        if self.signature_hint:
            lines.append(f"signature: {self.signature_hint}")
        if self.domain:
            lines.append("domain: " + ", ".join(to_source(d) for d in self.domain))
        lines.append(f"L: {to_source(self.l_expr)}")
        return "\n".join(lines) + "\n"


def _walk_diagnostics(node: Ast, params: Mapping[str, float], bound: frozenset, out: list):
    if isinstance(node, Num):
        return
    if isinstance(node, Name):
        n = node.name
        if n in bound or n in COORDINATES or n in BUILTIN_NAMES or n in params:
            return
        out.append(Diagnostic("UnboundParameter", f"undeclared name {n!r}", node.span))
        return
    if isinstance(node, Unary):
        _walk_diagnostics(node.operand, params, bound, out)
    elif isinstance(node, Binary):
        _walk_diagnostics(node.left, params, bound, out)
        _walk_diagnostics(node.right, params, bound, out)
    elif isinstance(node, Call):
        if node.func not in FUNCTIONS:
            out.append(Diagnostic("UnknownFunction", f"unknown function {node.func!r}", node.span))
        elif len(node.args) != FUNCTIONS[node.func]:
            out.append(
                Diagnostic(
                    "ArityMismatch",
                    f"{node.func} takes {FUNCTIONS[node.func]} argument(s), got {len(node.args)}",
                    node.span,
                )
            )
        for a in node.args:
            _walk_diagnostics(a, params, bound, out)
    elif isinstance(node, Let):
        _walk_diagnostics(node.value, params, bound, out)
        _walk_diagnostics(node.body, params, bound | {node.name}, out)


def expression_diagnostics(node: Ast, params: Mapping[str, float]) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    _walk_diagnostics(node, params, frozenset(), out)
    out.sort(key=lambda d: (d.span, d.code, d.message))
    return out


def validate(spec: GeometrySpec) -> list[Diagnostic]:
    """All unresolved names and arity problems in L and the domain predicates."""
    out = expression_diagnostics(spec.l_expr, spec.parameters)
    for d in spec.domain:
        out.extend(expression_diagnostics(d, spec.parameters))
    return out


# --- evaluation ---------------------------------------------------------------


def _even_power_of_w(node: Binary) -> int | None:
    if (
        node.op == "^"
        and isinstance(node.left, Name)
        and node.left.name == "w"
        and isinstance(node.right, Num)
        and node.right.value.is_integer()
        and node.right.value % 2 == 0
    ):
        return int(node.right.value) // 2
    return None


class _JetEvaluator:
    def __init__(self, spec_params: Mapping[str, float], coords: list[Jet]):
        self.params = spec_params
        self.coords = dict(zip(COORDINATES, coords))
        self.cfg = coords[0].cfg
        self._w2 = None
        self._w = None

    def w2(self) -> Jet:
        if self._w2 is None:
            c = self.coords
            self._w2 = c["dtheta"] * c["dtheta"] + c["dphi"] * c["dphi"] * jets.sin(c["theta"]) ** 2
        return self._w2

    def w(self) -> Jet:
        if self._w is None:
            self._w = jets.sqrt(self.w2())
        return self._w

    def eval(self, node: Ast, env: dict):
        try:
            return self._eval(node, env)
        except EvaluationError:
            raise
        except jets.JetError as exc:
            raise EvaluationError(str(exc), node.span, exc) from exc

    def _eval(self, node: Ast, env: dict):
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Name):
            n = node.name
            if n in env:
                return env[n]
            if n in self.coords:
                return self.coords[n]
            if n == "w":
                return self.eval_w(node)
            if n == "pi":
                return math.pi
            return float(self.params[n])
        if isinstance(node, Unary):
            return -self.eval(node.operand, env)
        if isinstance(node, Binary):
            half = _even_power_of_w(node) if "w" not in env else None
            if half is not None:
                return jets.integer_power(self.w2(), half)
            left = self.eval(node.left, env)
            right = self.eval(node.right, env)
            return _apply_binary(node.op, left, right)
        if isinstance(node, Call):
            args = [self.eval(a, env) for a in node.args]
            return _apply_call(node.func, args, self.cfg)
        if isinstance(node, Let):
            value = self.eval(node.value, env)
            return self.eval(node.body, {**env, node.name: value})
        raise TypeError(f"unknown node {node!r}")

    def eval_w(self, node):
        try:
            return self.w()
        except jets.JetError as exc:
            raise EvaluationError("w evaluated at zero angular velocity", node.span, exc) from exc


def _apply_binary(op: str, left, right):
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        if not isinstance(right, Jet):
            if right == 0.0:
                raise jets.DivisionByZeroJet("division by zero constant")
        return left / right
    if op == "^":
        if isinstance(right, Jet):
            if not isinstance(left, Jet):
                if left <= 0:
                    raise jets.DomainErrorJet("non-positive base with variable exponent")
                return jets.exp(right * math.log(left))
            return jets.exp(jets.log(left) * right)
        if isinstance(left, Jet):
            return left ** right
        return _scalar_pow(left, right)
    raise ValueError(op)


def _scalar_pow(base: float, exponent: float) -> float:
    if base < 0 and not float(exponent).is_integer():
        raise jets.DomainErrorJet("fractional power of a negative constant")
    if base == 0 and exponent < 0:
        raise jets.DivisionByZeroJet("zero to a negative power")
    return float(base) ** exponent


def _apply_call(func: str, args, cfg: JetConfig):
    if func == "pow":
        return _apply_binary("^", args[0], args[1])
    (x,) = args
    if not isinstance(x, Jet):
        x = Jet.constant(x, JetConfig(0, 0, 0))
        out = jets.ELEMENTARY[func](x)
        return out.value
    return jets.ELEMENTARY[func](x)


def eval_jet(spec: GeometrySpec, sample: Sequence[float], config: JetConfig = jets.DEFAULT_CONFIG) -> Jet:
    """Jet of L at ``sample = (t, r, theta, phi, dt, dr, dtheta, dphi)``."""
    return eval_expression_jet(spec.l_expr, spec.parameters, sample, config)


def eval_expression_jet(node: Ast, params: Mapping[str, float], sample, config: JetConfig) -> Jet:
    coords = jets.seed_point(sample, config)
    value = _JetEvaluator(params, coords).eval(node, {})
    if not isinstance(value, Jet):
        value = Jet.constant(value, config)
    return value


def eval_scalar(node: Ast, params: Mapping[str, float], sample: Sequence[float], env=None) -> float:
    """Plain floating-point evaluation (the reference for order-0 jets)."""
    env = env or {}
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        n = node.name
        if n in env:
            return env[n]
        if n in COORDINATES:
            return float(sample[COORDINATES.index(n)])
        if n == "w":
            return math.sqrt(_scalar_w2(sample))
        if n == "pi":
            return math.pi
        return float(params[n])
    if isinstance(node, Unary):
        return -eval_scalar(node.operand, params, sample, env)
    if isinstance(node, Binary):
        half = _even_power_of_w(node) if "w" not in env else None
        if half is not None:
            return _scalar_w2(sample) ** half
        a = eval_scalar(node.left, params, sample, env)
        b = eval_scalar(node.right, params, sample, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return _scalar_pow(a, b)
    if isinstance(node, Call):
        args = [eval_scalar(a, params, sample, env) for a in node.args]
        if node.func == "pow":
            return _scalar_pow(*args)
        fn = {"exp": math.exp, "ln": math.log, "sqrt": math.sqrt, "sin": math.sin, "cos": math.cos, "abs": abs}
        return fn[node.func](args[0])
    if isinstance(node, Let):
        v = eval_scalar(node.value, params, sample, env)
        return eval_scalar(node.body, params, sample, {**env, node.name: v})
    raise TypeError(node)


def _scalar_w2(sample) -> float:
    return sample[6] ** 2 + sample[7] ** 2 * math.sin(sample[2]) ** 2


def evaluate(spec: GeometrySpec, sample: Sequence[float]) -> float:
    return eval_scalar(spec.l_expr, spec.parameters, sample)


def in_domain(spec: GeometrySpec, sample: Sequence[float]) -> bool:
    """Strict positivity of every domain predicate (and finiteness of L)."""
    try:
        for d in spec.domain:
            if not eval_scalar(d, spec.parameters, sample) > 0.0:
                return False
        value = evaluate(spec, sample)
    except (ArithmeticError, ValueError, jets.JetError):
        return False
    return math.isfinite(value)


# --- file formats ------------------------------------------------------------

_HEADER_RE = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z_0-9]*)\s*:(?P<rest>.*)$")
_PARAM_RE = re.compile(r"^param\s+(?P<name>[A-Za-z_][A-Za-z_0-9]*)\s*=(?P<rest>.*)$")


def _logical_lines(text: str):
    """Yield (line_no, text); indented lines continue the previous entry."""
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        stripped = line.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        if line[:1] in (" ", "\t") and current is not None:
            current = (current[0], current[1] + " " + stripped.strip())
            continue
        if current is not None:
            yield current
        current = (no, stripped.strip())
    if current is not None:
        yield current


def _parse_at(text: str, line: int, what) -> object:
    try:
        return what(text)
    except DslError as exc:
        raise GeometryFileError(exc.message, line, exc.span) from exc


def _constant(text: str, line: int, params: Mapping[str, float]) -> float:
    node = _parse_at(text, line, parse)
    diags = expression_diagnostics(node, params)
    if diags:
        raise GeometryFileError(str(diags[0]), line)
    free = _free_coordinates(node)
    if free:
        raise GeometryFileError(f"parameter value depends on {sorted(free)}", line)
    return eval_scalar(node, params, [0.0] * 8)


def _free_coordinates(node: Ast, bound=frozenset()) -> set:
    if isinstance(node, Name):
        if node.name in bound:
            return set()
        return {node.name} if node.name in COORDINATES or node.name == "w" else set()
    if isinstance(node, Num):
        return set()
    if isinstance(node, Unary):
        return _free_coordinates(node.operand, bound)
    if isinstance(node, Binary):
        return _free_coordinates(node.left, bound) | _free_coordinates(node.right, bound)
    if isinstance(node, Call):
        return set().union(*(_free_coordinates(a, bound) for a in node.args))
    if isinstance(node, Let):
        return _free_coordinates(node.value, bound) | _free_coordinates(node.body, bound | {node.name})
    return set()


def parse_geometry(text: str) -> GeometrySpec:
    """Parse a geometry file: ``name:``, ``param x = v``, ``signature:``, ``domain:``, ``L:``."""
    name = "unnamed"
    params: dict[str, float] = {}
    domain: tuple[Ast, ...] = ()
    l_expr = None
    signature = None
    for no, line in _logical_lines(text):
        m = _PARAM_RE.match(line)
        if m:
            params[m["name"]] = _constant(m["rest"].strip(), no, params)
            continue
        m = _HEADER_RE.match(line)
        if not m:
            raise GeometryFileError(f"unrecognised line {line!r}", no)
        key, rest = m["key"], m["rest"].strip()
        if key == "name":
            name = rest
        elif key == "signature":
            signature = rest
        elif key == "domain":
            domain = domain + _parse_at(rest, no, parse_expression_list)
        elif key == "L":
            if l_expr is not None:
                raise GeometryFileError("L defined twice", no)
            l_expr = _parse_at(rest, no, parse)
        else:
            raise GeometryFileError(f"unknown header {key!r}", no)
    if l_expr is None:
        raise GeometryFileError("missing 'L:' line", 0)
    return GeometrySpec(name, l_expr, params, domain, signature)


def load_geometry(path) -> GeometrySpec:
    with open(path, encoding="utf-8") as fh:
        return parse_geometry(fh.read())


@dataclass(frozen=True)
class KProfileSource:
    """A k-profile file: k1..k12 as expressions in (t, r) plus evaluation points."""

    name: str
    k_exprs: tuple[Ast, ...]
    parameters: Mapping[str, float]
    points: tuple[tuple[float, float], ...]

    def diagnostics(self) -> list[Diagnostic]:
        out = []
        for e in self.k_exprs:
            out.extend(expression_diagnostics(e, self.parameters))
            for n in sorted(_free_coordinates(e) - {"t", "r"}):
                out.append(Diagnostic("IllegalVariable", f"k-profiles may depend on t and r only, not {n!r}", e.span))
        return out


def parse_kprofile(text: str) -> KProfileSource:
    name = "unnamed"
    params: dict[str, float] = {}
    exprs: list[Ast] = [Num(0.0)] * 12
    points = []
    for no, line in _logical_lines(text):
        m = _PARAM_RE.match(line)
        if m:
            params[m["name"]] = _constant(m["rest"].strip(), no, params)
            continue
        m = _HEADER_RE.match(line)
        if not m:
            raise GeometryFileError(f"unrecognised line {line!r}", no)
        key, rest = m["key"], m["rest"].strip()
        if key == "name":
            name = rest
        elif key == "point":
            items = _parse_at(rest, no, parse_expression_list)
            if len(items) != 2:
                raise GeometryFileError("point takes two values: t, r", no)
            points.append(tuple(_constant(to_source(i), no, params) for i in items))
        elif re.fullmatch(r"k([1-9]|1[0-2])", key):
            exprs[int(key[1:]) - 1] = _parse_at(rest, no, parse)
        else:
            raise GeometryFileError(f"unknown header {key!r}", no)
    return KProfileSource(name, tuple(exprs), params, tuple(points))


def load_kprofile(path) -> KProfileSource:
    with open(path, encoding="utf-8") as fh:
        return parse_kprofile(fh.read())


def kprofile_jets(src: KProfileSource, t: float, r: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values and exact first t- and r-derivatives of k1..k12 at (t, r)."""
    cfg = JetConfig(1, 1, 0)
    sample = [t, r, math.pi / 2, 0.0, 0.0, 0.0, 0.0, 0.0]
    vals, dts, drs = [], [], []
    for e in src.k_exprs:
        j = eval_expression_jet(e, src.parameters, sample, cfg)
        vals.append(j.value)
        dts.append(j.partial(jets.unit(0)))
        drs.append(j.partial(jets.unit(1)))
    return np.array(vals), np.array(dts), np.array(drs)
