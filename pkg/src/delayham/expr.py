"""Symbolic expressions over the three-point delay jet space.

The coordinate set covers the independent variable and the phase variables at
the current time, one delay back and one delay forward, together with first
and second time derivatives:

    t, tm, tp            time at the three points (tm = t - tau, tp = t + tau)
    q, qm, qp, ...       position and its shifts
    p, pm, pp, ...       momentum and its shifts
    qd, qdd, pd, pdd     first / second derivatives (suffix m/p for shifts)
    tau                  the delay constant

Expressions are immutable and hash-consed: structurally identical trees are
the same object, so equality is identity and large derived expressions share
their common subtrees.  Evaluation compiles an expression into a flat Python
function over a slot vector, which keeps repeated sampling cheap.

Rational constants are kept exact (`fractions.Fraction`) until evaluation;
evaluation itself is plain IEEE double arithmetic.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, NamedTuple, Union

import numpy as np

Number = Union[int, float, Fraction]


class ExprError(Exception):
    """Base class for expression-level failures."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    def __init__(self, identifier: str, offset: int):
        super().__init__(f"unknown identifier '{identifier}'", offset)
        self.identifier = identifier


class ShiftRangeError(ExprError):
    def __init__(self, symbol: "Symbol", direction: int):
        super().__init__(
            f"shifting '{symbol.name}' by {direction:+d} leaves the allowed range"
        )
        self.symbol = symbol


class DerivativeOrderError(ExprError):
    pass


class EvalError(ExprError):
    def __init__(self, message: str, jet: "JetPoint | None" = None):
        super().__init__(message)
        self.jet = jet


class MissingSymbolError(EvalError):
    def __init__(self, symbol: "Symbol", jet: "JetPoint | None" = None):
        super().__init__(f"jet point has no value for '{symbol.name}'", jet)
        self.symbol = symbol


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

_SHIFT_SUFFIX = {-1: "m", 0: "", 1: "p"}


@dataclass(frozen=True, eq=False)
class Symbol:
    """One jet coordinate: base in {t, q, p}, shift in {-1,0,+1}, order <= 2."""

    base: str
    shift: int
    order: int
    index: int

    @property
    def name(self) -> str:
        return self.base + "d" * self.order + _SHIFT_SUFFIX[self.shift]

    def __repr__(self) -> str:
        return self.name


SYMBOLS: list[Symbol] = []
_SYM_BY_KEY: dict[tuple[str, int, int], Symbol] = {}
SYMBOL_BY_NAME: dict[str, Symbol] = {}

for _base in ("t", "q", "p"):
    for _order in range(1 if _base == "t" else 3):
        for _shift in (-1, 0, 1):
            _s = Symbol(_base, _shift, _order, len(SYMBOLS))
            SYMBOLS.append(_s)
            _SYM_BY_KEY[(_base, _shift, _order)] = _s
            SYMBOL_BY_NAME[_s.name] = _s

TAU_INDEX = len(SYMBOLS)
NSLOTS = TAU_INDEX + 1


def symbol(base: str, shift: int, order: int = 0) -> Symbol:
    try:
        return _SYM_BY_KEY[(base, shift, order)]
    except KeyError:
        raise ValueError(f"no jet symbol with base={base!r} shift={shift} order={order}")


# ---------------------------------------------------------------------------
# expression nodes
# ---------------------------------------------------------------------------


class Expr:
    """Immutable expression node; construct through the module helpers."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, n):
        return powi(self, n)

    def __neg__(self):
        return neg(self)

    def __str__(self) -> str:
        return to_source(self)

    def __repr__(self) -> str:
        return to_source(self)


@dataclass(frozen=True, eq=False, repr=False)
class Const(Expr):
    value: Number

    __slots__ = ("value",)


@dataclass(frozen=True, eq=False, repr=False)
class Sym(Expr):
    symbol: Symbol

    __slots__ = ("symbol",)


@dataclass(frozen=True, eq=False, repr=False)
class TauConst(Expr):
    __slots__ = ()


@dataclass(frozen=True, eq=False, repr=False)
class Add(Expr):
    terms: tuple[Expr, ...]

    __slots__ = ("terms",)


@dataclass(frozen=True, eq=False, repr=False)
class Mul(Expr):
    factors: tuple[Expr, ...]

    __slots__ = ("factors",)


@dataclass(frozen=True, eq=False, repr=False)
class Neg(Expr):
    arg: Expr

    __slots__ = ("arg",)


@dataclass(frozen=True, eq=False, repr=False)
class Div(Expr):
    num: Expr
    den: Expr

    __slots__ = ("num", "den")


@dataclass(frozen=True, eq=False, repr=False)
class Pow(Expr):
    base: Expr
    exponent: int

    __slots__ = ("base", "exponent")


@dataclass(frozen=True, eq=False, repr=False)
class Func(Expr):
    name: str
    arg: Expr

    __slots__ = ("name", "arg")


_INTERN: dict[tuple, Expr] = {}


def _intern(key: tuple, build: Callable[[], Expr]) -> Expr:
    node = _INTERN.get(key)
    if node is None:
        node = build()
        _INTERN[key] = node
    return node


def _const_key(v: Number) -> tuple:
    if isinstance(v, Fraction):
        return ("c", "F", v.numerator, v.denominator)
    return ("c", "f", v.hex())


def const(v: Number) -> Const:
    if isinstance(v, bool):
        raise TypeError("boolean is not a numeric constant")
    if isinstance(v, int):
        v = Fraction(v)
    elif not isinstance(v, (float, Fraction)):
        raise TypeError(f"unsupported constant type {type(v).__name__}")
    return _intern(_const_key(v), lambda: Const(v))  # type: ignore[return-value]


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return const(x)


def sym(s: Symbol | str) -> Sym:
    if isinstance(s, str):
        s = SYMBOL_BY_NAME[s]
    return _intern(("s", s.index), lambda: Sym(s))  # type: ignore[return-value]


TAU: TauConst = _intern(("tau",), TauConst)  # type: ignore[assignment]


def _is_const(e: Expr, value=None) -> bool:
    if not isinstance(e, Const):
        return False
    return value is None or e.value == value


def add(*terms) -> Expr:
    flat: list[Expr] = []
    acc: Number = Fraction(0)
    touched = False
    stack = [as_expr(t) for t in terms]
    for item in stack:
        parts = item.terms if isinstance(item, Add) else (item,)
        for p in parts:
            if isinstance(p, Const):
                acc = acc + p.value
                touched = True
            else:
                flat.append(p)
    if touched and acc != 0:
        flat.append(const(acc))
    if not flat:
        return const(acc if touched else Fraction(0))
    if len(flat) == 1:
        return flat[0]
    key = ("+",) + tuple(id(f) for f in flat)
    tup = tuple(flat)
    return _intern(key, lambda: Add(tup))


def neg(x) -> Expr:
    x = as_expr(x)
    if isinstance(x, Const):
        return const(-x.value)
    if isinstance(x, Neg):
        return x.arg
    return _intern(("neg", id(x)), lambda: Neg(x))


def sub(a, b) -> Expr:
    return add(a, neg(b))


def mul(*factors) -> Expr:
    flat: list[Expr] = []
    coeff: Number = Fraction(1)
    negative = False
    zero = False

    def push(x: Expr):
        nonlocal coeff, negative, zero
        if isinstance(x, Mul):
            for f in x.factors:
                push(f)
        elif isinstance(x, Neg):
            negative = not negative
            push(x.arg)
        elif isinstance(x, Const):
            v = x.value
            if v == 0:
                zero = True
                coeff = coeff * v
                return
            if v < 0:
                negative = not negative
                v = -v
            coeff = coeff * v
        else:
            flat.append(x)

    for f in factors:
        push(as_expr(f))
    if zero:
        return const(coeff * 0)
    parts = ([const(coeff)] if coeff != 1 else []) + flat
    if not parts:
        out: Expr = const(coeff)
    elif len(parts) == 1:
        out = parts[0]
    else:
        key = ("*",) + tuple(id(f) for f in parts)
        tup = tuple(parts)
        out = _intern(key, lambda: Mul(tup))
    return neg(out) if negative else out


def div(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if _is_const(b, 0):
        raise ExprError("division by the literal zero constant")
    if isinstance(a, Const) and isinstance(b, Const):
        if isinstance(a.value, Fraction) and isinstance(b.value, Fraction):
            return const(a.value / b.value)
        return const(float(a.value) / float(b.value))
    negative = False
    if isinstance(a, Neg):
        negative = not negative
        a = a.arg
    if isinstance(b, Neg):
        negative = not negative
        b = b.arg
    if isinstance(a, Const) and a.value < 0:
        negative = not negative
        a = const(-a.value)
    if isinstance(b, Const) and b.value < 0:
        negative = not negative
        b = const(-b.value)
    if _is_const(b, 1):
        out = a
    elif _is_const(a, 0):
        out = a
    elif isinstance(b, Const) and isinstance(a, Mul) and isinstance(a.factors[0], Const):
        out = mul(div(a.factors[0], b), *a.factors[1:])
    else:
        bb = b
        aa = a
        out = _intern(("/", id(aa), id(bb)), lambda: Div(aa, bb))
    return neg(out) if negative else out


def powi(base, exponent: int) -> Expr:
    base = as_expr(base)
    if isinstance(exponent, Fraction) and exponent.denominator == 1:
        exponent = int(exponent)
    if not isinstance(exponent, int) or isinstance(exponent, bool):
        raise TypeError("exponents must be integers")
    if exponent == 0:
        return const(Fraction(1))
    if exponent == 1:
        return base
    if isinstance(base, Const):
        v = base.value
        if v == 0 and exponent < 0:
            raise ExprError("zero raised to a negative power")
        if isinstance(v, Fraction):
            return const(v**exponent)
        return const(float(v) ** exponent)
    if isinstance(base, Neg):
        inner = powi(base.arg, exponent)
        return inner if exponent % 2 == 0 else neg(inner)
    b = base
    n = exponent
    return _intern(("^", id(b), n), lambda: Pow(b, n))


def _func(name: str, arg) -> Expr:
    a = as_expr(arg)
    return _intern(("fn", name, id(a)), lambda: Func(name, a))


def sin(arg) -> Expr:
    return _func("sin", arg)


def cos(arg) -> Expr:
    return _func("cos", arg)


def exp(arg) -> Expr:
    return _func("exp", arg)


# Ready-made atoms, named exactly like the surface grammar.
t = sym("t")
tm = sym("tm")
tp = sym("tp")
q = sym("q")
qm = sym("qm")
qp = sym("qp")
p = sym("p")
pm = sym("pm")
pp = sym("pp")
qd = sym("qd")
qdm = sym("qdm")
qdp = sym("qdp")
pd = sym("pd")
pdm = sym("pdm")
pdp = sym("pdp")
qdd = sym("qdd")
qddm = sym("qddm")
qddp = sym("qddp")
pdd = sym("pdd")
pddm = sym("pddm")
pddp = sym("pddp")
tau = TAU

ZERO = const(0)
ONE = const(1)


# ---------------------------------------------------------------------------
# structure queries
# ---------------------------------------------------------------------------

_SYMBOLS_CACHE: dict[int, frozenset[Symbol]] = {}


def _children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, Add):
        return e.terms
    if isinstance(e, Mul):
        return e.factors
    if isinstance(e, Neg):
        return (e.arg,)
    if isinstance(e, Div):
        return (e.num, e.den)
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, Func):
        return (e.arg,)
    return ()


def symbols_of(e: Expr) -> frozenset[Symbol]:
    cached = _SYMBOLS_CACHE.get(id(e))
    if cached is not None:
        return cached
    if isinstance(e, Sym):
        out = frozenset((e.symbol,))
    else:
        out = frozenset().union(*(symbols_of(c) for c in _children(e))) if _children(e) else frozenset()
    _SYMBOLS_CACHE[id(e)] = out
    return out


def max_order(e: Expr) -> int:
    return max((s.order for s in symbols_of(e)), default=0)


def _rebuild(e: Expr, rec: Callable[[Expr], Expr]) -> Expr:
    if isinstance(e, Add):
        return add(*[rec(c) for c in e.terms])
    if isinstance(e, Mul):
        return mul(*[rec(c) for c in e.factors])
    if isinstance(e, Neg):
        return neg(rec(e.arg))
    if isinstance(e, Div):
        return div(rec(e.num), rec(e.den))
    if isinstance(e, Pow):
        return powi(rec(e.base), e.exponent)
    if isinstance(e, Func):
        return _func(e.name, rec(e.arg))
    return e


def shift(e: Expr, direction: int) -> Expr:
    """Apply the forward (+1) or backward (-1) delay shift to every symbol."""
    if direction not in (-1, 1):
        raise ValueError("shift direction must be +1 or -1")
    memo: dict[int, Expr] = {}

    def rec(x: Expr) -> Expr:
        got = memo.get(id(x))
        if got is not None:
            return got
        if isinstance(x, Sym):
            s = x.symbol
            ns = s.shift + direction
            if ns < -1 or ns > 1:
                raise ShiftRangeError(s, direction)
            out: Expr = sym(symbol(s.base, ns, s.order))
        else:
            out = _rebuild(x, rec)
        memo[id(x)] = out
        return out

    return rec(e)


def substitute(e: Expr, mapping: Mapping[Symbol | str | Sym, Expr | Number]) -> Expr:
    """Replace symbols by expressions everywhere in `e`."""
    table: dict[int, Expr] = {}
    for key, val in mapping.items():
        if isinstance(key, Sym):
            key = key.symbol
        elif isinstance(key, str):
            key = SYMBOL_BY_NAME[key]
        table[key.index] = as_expr(val)
    memo: dict[int, Expr] = {}

    def rec(x: Expr) -> Expr:
        got = memo.get(id(x))
        if got is not None:
            return got
        if isinstance(x, Sym):
            out = table.get(x.symbol.index, x)
        else:
            out = _rebuild(x, rec)
        memo[id(x)] = out
        return out

    return rec(e)


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

_PARTIAL_CACHE: dict[tuple[int, int], Expr] = {}


def partial(e: Expr, s: Symbol | Sym | str) -> Expr:
    """Partial derivative treating every jet symbol as an independent coordinate."""
    if isinstance(s, Sym):
        s = s.symbol
    elif isinstance(s, str):
        s = SYMBOL_BY_NAME[s]
    key = (id(e), s.index)
    got = _PARTIAL_CACHE.get(key)
    if got is not None:
        return got
    if isinstance(e, (Const, TauConst)):
        out: Expr = ZERO
    elif isinstance(e, Sym):
        out = ONE if e.symbol is s else ZERO
    elif s not in symbols_of(e):
        out = ZERO
    elif isinstance(e, Add):
        out = add(*[partial(c, s) for c in e.terms])
    elif isinstance(e, Neg):
        out = neg(partial(e.arg, s))
    elif isinstance(e, Mul):
        pieces = []
        for i, f in enumerate(e.factors):
            df = partial(f, s)
            if _is_const(df, 0):
                continue
            rest = e.factors[:i] + e.factors[i + 1 :]
            pieces.append(mul(df, *rest))
        out = add(*pieces)
    elif isinstance(e, Div):
        da = partial(e.num, s)
        db = partial(e.den, s)
        out = sub(div(da, e.den), div(mul(e.num, db), powi(e.den, 2)))
    elif isinstance(e, Pow):
        out = mul(e.exponent, powi(e.base, e.exponent - 1), partial(e.base, s))
    elif isinstance(e, Func):
        darg = partial(e.arg, s)
        if e.name == "sin":
            out = mul(cos(e.arg), darg)
        elif e.name == "cos":
            out = neg(mul(sin(e.arg), darg))
        else:
            out = mul(e, darg)
    else:  # pragma: no cover
        raise TypeError(f"cannot differentiate {type(e).__name__}")
    _PARTIAL_CACHE[key] = out
    return out


_TOTAL_CACHE: dict[int, Expr] = {}


def total_derivative(e: Expr) -> Expr:
    """Three-point total time derivative.

    All three time coordinates advance at unit rate; positions and momenta at
    every shift advance through their stored derivative symbols.  Input must
    not contain second-derivative symbols (the result would need third
    derivatives, which the jet space does not carry).
    """
    got = _TOTAL_CACHE.get(id(e))
    if got is not None:
        return got
    bad = [s for s in symbols_of(e) if s.order >= 2]
    if bad:
        raise DerivativeOrderError(
            f"total derivative of an expression containing {bad[0].name} would "
            "need third derivatives"
        )
    terms = []
    for sh in (-1, 0, 1):
        terms.append(partial(e, symbol("t", sh, 0)))
        for base in ("q", "p"):
            d0 = partial(e, symbol(base, sh, 0))
            if not _is_const(d0, 0):
                terms.append(mul(sym(symbol(base, sh, 1)), d0))
            d1 = partial(e, symbol(base, sh, 1))
            if not _is_const(d1, 0):
                terms.append(mul(sym(symbol(base, sh, 2)), d1))
    out = add(*terms)
    _TOTAL_CACHE[id(e)] = out
    return out


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------


def _fmt_number(v: Number) -> tuple[str, int]:
    """Return (text, precedence-class) for a non-negative constant."""
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator), 100
        return f"{v.numerator}/{v.denominator}", 20
    return repr(v), 100


def _render(e: Expr, ctx: int) -> str:
    s, prec = _render_raw(e)
    return f"({s})" if prec < ctx else s


def _render_raw(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        v = e.value
        if v < 0:
            text, _ = _fmt_number(-v)
            return "-" + text, 15
        return _fmt_number(v)
    if isinstance(e, Sym):
        return e.symbol.name, 100
    if isinstance(e, TauConst):
        return "tau", 100
    if isinstance(e, Add):
        first = e.terms[0]
        if isinstance(first, Neg):
            out = "-" + _render(first.arg, 16)
        elif isinstance(first, Const) and first.value < 0:
            out = "-" + _render(const(-first.value), 16)
        else:
            out = _render(first, 11)
        for term in e.terms[1:]:
            if isinstance(term, Neg):
                out += " - " + _render(term.arg, 11)
            elif isinstance(term, Const) and term.value < 0:
                out += " - " + _render(const(-term.value), 11)
            else:
                out += " + " + _render(term, 11)
        return out, 10
    if isinstance(e, Neg):
        return "-" + _render(e.arg, 16), 15
    if isinstance(e, Mul):
        parts = [_render(e.factors[0], 20)]
        parts += [_render(f, 21) for f in e.factors[1:]]
        return "*".join(parts), 20
    if isinstance(e, Div):
        return _render(e.num, 20) + "/" + _render(e.den, 21), 20
    if isinstance(e, Pow):
        n = e.exponent
        suffix = str(n) if n >= 0 else f"({n})"
        return _render(e.base, 31) + "^" + suffix, 30
    if isinstance(e, Func):
        return f"{e.name}({_render(e.arg, 0)})", 100
    raise TypeError(f"cannot print {type(e).__name__}")  # pragma: no cover


def to_source(e: Expr) -> str:
    return _render(e, 0)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
)

_FUNCTIONS = {"sin": sin, "cos": cos, "exp": exp}


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(source):
            m = _TOKEN_RE.match(source, pos)
            if m is None:
                raise ParseError(f"unexpected character {source[pos]!r}", pos)
            if m.lastgroup != "ws":
                self.tokens.append((m.lastgroup, m.group(), pos))  # type: ignore[arg-type]
            pos = m.end()
        self.tokens.append(("eof", "", len(source)))
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, ch: str):
        kind, text, off = self.next()
        if kind != "op" or text != ch:
            raise ParseError(f"expected '{ch}'", off)

    def parse(self) -> Expr:
        e = self.expression()
        kind, text, off = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected token {text!r}", off)
        return e

    def expression(self) -> Expr:
        e = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.next()
                rhs = self.term()
                e = add(e, rhs) if text == "+" else sub(e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.next()
                rhs = self.unary()
                e = mul(e, rhs) if text == "*" else div(e, rhs)
            else:
                return e

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.next()
            return neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.next()
            return powi(base, self.exponent())
        return base

    def exponent(self) -> int:
        kind, text, off = self.next()
        if kind == "op" and text == "(":
            n = self.exponent()
            self.expect_op(")")
            return n
        if kind == "op" and text == "-":
            return -self.exponent()
        if kind == "num" and re.fullmatch(r"\d+", text):
            return int(text)
        raise ParseError("exponent must be an integer", off)

    def atom(self) -> Expr:
        kind, text, off = self.next()
        if kind == "num":
            if re.fullmatch(r"\d+", text):
                return const(Fraction(int(text)))
            return const(float(text))
        if kind == "ident":
            if text in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expression()
                self.expect_op(")")
                return _FUNCTIONS[text](arg)
            if text == "tau":
                return TAU
            if text in SYMBOL_BY_NAME:
                return sym(text)
            raise UnknownIdentifierError(text, off)
        if kind == "op" and text == "(":
            e = self.expression()
            self.expect_op(")")
            return e
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input", off)


def parse(source: str) -> Expr:
    """Parse the surface grammar; round-trips with `to_source`."""
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# canonical ordering (order-insensitive structural comparison)
# ---------------------------------------------------------------------------

_CANON_CACHE: dict[int, Expr] = {}


def canonical(e: Expr) -> Expr:
    """Rebuild with commutative children in a deterministic order."""
    got = _CANON_CACHE.get(id(e))
    if got is not None:
        return got
    if isinstance(e, Add):
        kids = sorted((canonical(c) for c in e.terms), key=to_source)
        out = add(*kids)
    elif isinstance(e, Mul):
        kids = sorted((canonical(c) for c in e.factors), key=to_source)
        out = mul(*kids)
    else:
        out = _rebuild(e, canonical)
    _CANON_CACHE[id(e)] = out
    return out


def equivalent(a: Expr, b: Expr) -> bool:
    """Structural equality up to reordering of commutative children."""
    return canonical(a) is canonical(b)


# ---------------------------------------------------------------------------
# jet points and evaluation
# ---------------------------------------------------------------------------


class JetPoint:
    """Numeric values for the jet coordinates at one base time.

    The three time slots always satisfy tm = t - tau and tp = t + tau; all
    other coordinates are free (a jet point is off-shell unless constrained
    explicitly).
    """

    __slots__ = ("tau", "_vals")

    def __init__(self, tau_value: float, values: Mapping[str | Symbol, float] | None = None,
                 t_value: float | None = None):
        tau_value = float(tau_value)
        if not (tau_value > 0) or not math.isfinite(tau_value):
            raise ValueError("tau must be a positive finite number")
        vals = [math.nan] * NSLOTS
        vals[TAU_INDEX] = tau_value
        object.__setattr__(self, "tau", tau_value)
        object.__setattr__(self, "_vals", vals)
        if t_value is not None:
            self._set_time(float(t_value))
        if values:
            for key, val in values.items():
                s = SYMBOL_BY_NAME[key] if isinstance(key, str) else key
                val = float(val)
                if not math.isfinite(val):
                    raise ValueError(f"non-finite value for '{s.name}'")
                if s.base == "t" and s.order == 0:
                    if s.shift == 0:
                        self._set_time(val)
                    else:
                        expected = self._vals[symbol("t", 0).index] + s.shift * tau_value
                        if not math.isnan(expected) and abs(val - expected) > 1e-9 * (1 + abs(expected)):
                            raise ValueError(
                                f"'{s.name}'={val} conflicts with t and tau "
                                f"(expected {expected})"
                            )
                else:
                    self._vals[s.index] = val

    def _set_time(self, t_value: float):
        self._vals[symbol("t", 0).index] = t_value
        self._vals[symbol("t", -1).index] = t_value - self.tau
        self._vals[symbol("t", 1).index] = t_value + self.tau

    @property
    def t(self) -> float:
        return self._vals[symbol("t", 0).index]

    def value(self, s: Symbol | Sym | str) -> float:
        if isinstance(s, Sym):
            s = s.symbol
        elif isinstance(s, str):
            s = SYMBOL_BY_NAME[s]
        v = self._vals[s.index]
        if math.isnan(v):
            raise MissingSymbolError(s, self)
        return v

    def with_values(self, values: Mapping[str | Symbol, float]) -> "JetPoint":
        out = JetPoint(self.tau)
        out._vals[:] = self._vals
        for key, val in values.items():
            s = SYMBOL_BY_NAME[key] if isinstance(key, str) else key
            if s.base == "t" and s.order == 0 and s.shift == 0:
                out._set_time(float(val))
            else:
                out._vals[s.index] = float(val)
        return out

    def slots(self) -> list[float]:
        return self._vals

    def advanced(self) -> "JetPoint":
        """The jet one delay later, assuming shifted slots describe the same curve."""
        out = JetPoint(self.tau)
        out._set_time(self.t + self.tau)
        for base in ("q", "p"):
            for order in range(3):
                for sh in (-1, 0):
                    out._vals[symbol(base, sh, order).index] = self._vals[
                        symbol(base, sh + 1, order).index
                    ]
        return out

    def __repr__(self) -> str:
        named = {
            s.name: round(self._vals[s.index], 6)
            for s in SYMBOLS
            if not math.isnan(self._vals[s.index])
        }
        return f"JetPoint(tau={self.tau}, {named})"


def random_jet(seed: int, index: int = 0) -> JetPoint:
    """Deterministic pseudo-random jet point; sample k depends only on (seed, k).

    Coordinate values are uniform in [-2, 2], tau in [0.3, 1.5], t in [-3, 3].
    """
    rng = np.random.default_rng((int(seed) & 0xFFFFFFFF, int(index)))
    tau_value = rng.uniform(0.3, 1.5)
    t_value = rng.uniform(-3.0, 3.0)
    jet = JetPoint(tau_value, t_value=t_value)
    for s in SYMBOLS:
        if s.base != "t":
            jet._vals[s.index] = rng.uniform(-2.0, 2.0)
    return jet


_COMPILE_CACHE: dict[tuple[int, bool], Callable] = {}


def compiled(e: Expr, with_magnitude: bool = False) -> Callable:
    """Compile into `f(slots) -> value` (or `(value, max_abs_intermediate)`)."""
    key = (id(e), with_magnitude)
    fn = _COMPILE_CACHE.get(key)
    if fn is not None:
        return fn
    names: dict[int, str] = {}
    lines: list[str] = []

    def rec(n: Expr) -> str:
        got = names.get(id(n))
        if got is not None:
            return got
        if isinstance(n, Const):
            src = repr(float(n.value))
        elif isinstance(n, Sym):
            src = f"A[{n.symbol.index}]"
        elif isinstance(n, TauConst):
            src = f"A[{TAU_INDEX}]"
        elif isinstance(n, Add):
            src = " + ".join(rec(c) for c in n.terms)
        elif isinstance(n, Mul):
            src = "*".join(rec(c) for c in n.factors)
        elif isinstance(n, Neg):
            src = f"-{rec(n.arg)}"
        elif isinstance(n, Div):
            src = f"{rec(n.num)} / {rec(n.den)}"
        elif isinstance(n, Pow):
            src = f"{rec(n.base)}**{n.exponent}"
        elif isinstance(n, Func):
            src = f"_{n.name}({rec(n.arg)})"
        else:  # pragma: no cover
            raise TypeError(type(n).__name__)
        name = f"v{len(names)}"
        names[id(n)] = name
        lines.append(f"{name} = {src}")
        return name

    root = rec(e)
    body = "\n    ".join(lines) if lines else "pass"
    if with_magnitude:
        allnames = ", ".join(names.values())
        src = (
            f"def _f(A):\n    {body}\n"
            f"    _m = max(map(abs, ({allnames},)))\n"
            f"    return {root}, _m\n"
        )
    else:
        src = f"def _f(A):\n    {body}\n    return {root}\n"
    env = {"_sin": math.sin, "_cos": math.cos, "_exp": math.exp}
    exec(compile(src, "<delayham-expr>", "exec"), env)
    fn = env["_f"]
    _COMPILE_CACHE[key] = fn
    return fn


def evaluate(e: Expr, jet: JetPoint) -> float:
    """IEEE double evaluation of `e` at `jet`."""
    for s in symbols_of(e):
        if math.isnan(jet._vals[s.index]):
            raise MissingSymbolError(s, jet)
    try:
        return compiled(e)(jet._vals)
    except ZeroDivisionError:
        raise EvalError("division by zero", jet) from None
    except OverflowError:
        raise EvalError("numeric overflow", jet) from None


def evaluate_with_magnitude(e: Expr, jet: JetPoint) -> tuple[float, float]:
    for s in symbols_of(e):
        if math.isnan(jet._vals[s.index]):
            raise MissingSymbolError(s, jet)
    try:
        return compiled(e, with_magnitude=True)(jet._vals)
    except ZeroDivisionError:
        raise EvalError("division by zero", jet) from None
    except OverflowError:
        raise EvalError("numeric overflow", jet) from None


class ZeroCheck(NamedTuple):
    ok: bool
    witness: JetPoint | None
    worst: float

    def __bool__(self) -> bool:  # type: ignore[override]
        return self.ok


def is_zero(e: Expr, samples: int = 100, tol: float = 1e-9, seed: int = 0) -> ZeroCheck:
    """Sampled check that `e` vanishes identically.

    Evaluates at `samples` seeded pseudo-random jet points and accepts when
    |value| <= tol * (1 + largest intermediate magnitude) at every point.  On
    failure the witness jet point is returned.  Sample k's randomness depends
    only on (seed, k), so fanning the loop out over workers cannot change the
    verdict.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    worst = 0.0
    for k in range(samples):
        jet = random_jet(seed, k)
        value, mag = evaluate_with_magnitude(e, jet)
        ratio = abs(value) / (1.0 + mag)
        if not (ratio <= tol):
            return ZeroCheck(False, jet, ratio)
        worst = max(worst, ratio)
    return ZeroCheck(True, None, worst)


def is_zero_at(e: Expr, jets: Iterable[JetPoint], tol: float = 1e-9) -> ZeroCheck:
    """Like `is_zero` but over caller-supplied jet points (e.g. on-shell ones)."""
    worst = 0.0
    for jet in jets:
        value, mag = evaluate_with_magnitude(e, jet)
        ratio = abs(value) / (1.0 + mag)
        if not (ratio <= tol):
            return ZeroCheck(False, jet, ratio)
        worst = max(worst, ratio)
    return ZeroCheck(True, None, worst)
