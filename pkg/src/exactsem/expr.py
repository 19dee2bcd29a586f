"""Expression trees for structural equations, exogenous maps and transformations.

The language is deliberately small: real constants, references to endogenous
variables (:class:`Var`) and exogenous/base-noise ids (:class:`Exo`), negation,
n-ary sums and products, and the boolean connectives ``or``/``and``/``not``
over {0,1}-valued operands.

Text form (used in JSON documents)::

    expr   := term (("+" | "-") term)*
    term   := factor ("*" factor)*
    factor := NUMBER | IDENT | "-" factor | IDENT "(" expr ("," expr)* ")" | "(" expr ")"

``to_string`` and ``parse_expr`` round-trip exactly: ``parse_expr(to_string(e)) == e``.
"""
from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import EvaluationError, ValidationError


@dataclass(frozen=True)
class Const:
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v):
            raise ValidationError(f"non-finite constant {self.value!r}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Exo:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Sum:
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 2:
            raise ValueError("Sum needs at least two operands; use add()")


@dataclass(frozen=True)
class Prod:
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 2:
            raise ValueError("Prod needs at least two operands; use mul()")


@dataclass(frozen=True)
class Or:
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise ValueError("or() needs at least one operand")


@dataclass(frozen=True)
class And:
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise ValueError("and() needs at least one operand")


@dataclass(frozen=True)
class Not:
    arg: "Expr"


Expr = Union[Const, Var, Exo, Neg, Sum, Prod, Or, And, Not]

_NARY = (Sum, Prod, Or, And)


# --------------------------------------------------------------------------
# builders


def add(*terms):
    """Sum of ``terms``; a single term is returned unchanged."""
    flat = []
    for t in terms:
        flat.extend(t.args if isinstance(t, Sum) else (t,))
    if not flat:
        return Const(0.0)
    return flat[0] if len(flat) == 1 else Sum(tuple(flat))


def mul(*factors):
    flat = []
    for f in factors:
        flat.extend(f.args if isinstance(f, Prod) else (f,))
    if not flat:
        return Const(1.0)
    return flat[0] if len(flat) == 1 else Prod(tuple(flat))


def linear_expr(terms, offset=0.0):
    """Build ``sum(coef * expr) + offset``, skipping zero coefficients.

    ``terms`` is an iterable of ``(coef, expr)`` pairs.
    """
    parts = []
    for coef, e in terms:
        coef = float(coef)
        if coef == 0.0:
            continue
        if coef == 1.0:
            parts.append(e)
        elif coef == -1.0:
            parts.append(Neg(e))
        else:
            parts.append(Prod((Const(coef), e)))
    if offset != 0.0 or not parts:
        parts.append(Const(offset))
    return add(*parts)


# --------------------------------------------------------------------------
# traversal


def children(expr):
    if isinstance(expr, (Neg, Not)):
        return (expr.arg,)
    if isinstance(expr, _NARY):
        return expr.args
    return ()


def _rebuild(expr, new_children):
    if isinstance(expr, (Neg, Not)):
        return type(expr)(new_children[0])
    if isinstance(expr, _NARY):
        return type(expr)(tuple(new_children))
    return expr


def flatten(expr):
    """Merge nested sums/products and drop double negations."""
    kids = [flatten(k) for k in children(expr)]
    if isinstance(expr, Sum):
        return add(*kids)
    if isinstance(expr, Prod):
        return mul(*kids)
    if isinstance(expr, Neg) and isinstance(kids[0], Neg):
        return kids[0].arg
    return _rebuild(expr, kids) if kids else expr


def _collect(expr, kind, out):
    if isinstance(expr, kind):
        if expr.name not in out:
            out[expr.name] = None
    for c in children(expr):
        _collect(c, kind, out)


def variables_in(expr) -> tuple:
    """Names of :class:`Var` nodes in first-occurrence order."""
    out = {}
    _collect(expr, Var, out)
    return tuple(out)


def exogenous_in(expr) -> tuple:
    out = {}
    _collect(expr, Exo, out)
    return tuple(out)


def substitute(expr, var_map: Mapping[str, "Expr"] = None, exo_map: Mapping[str, "Expr"] = None):
    """Replace ``Var``/``Exo`` references by expressions (simultaneously)."""
    var_map = var_map or {}
    exo_map = exo_map or {}

    def go(e):
        if isinstance(e, Var):
            return var_map.get(e.name, e)
        if isinstance(e, Exo):
            return exo_map.get(e.name, e)
        kids = children(e)
        if not kids:
            return e
        return _rebuild(e, [go(k) for k in kids])

    return go(expr)


def rename(expr, var_names: Mapping[str, str] = None, exo_names: Mapping[str, str] = None):
    var_names = var_names or {}
    exo_names = exo_names or {}
    return substitute(
        expr,
        {old: Var(new) for old, new in var_names.items()},
        {old: Exo(new) for old, new in exo_names.items()},
    )


# --------------------------------------------------------------------------
# evaluation


def _check_boolean(value, expr):
    a = np.asarray(value)
    if not np.all((a == 0) | (a == 1)):
        raise EvaluationError(f"boolean connective applied to a non-{{0,1}} operand in {to_string(expr)}")
    return a


def evaluate(expr, env: Mapping[str, object]):
    """Evaluate ``expr`` with ``env`` mapping reference names to scalars or arrays.

    All arithmetic is elementwise, so passing equal-length column arrays
    evaluates a whole batch of draws at once.
    """
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, (Var, Exo)):
        try:
            return env[expr.name]
        except KeyError:
            raise EvaluationError(f"unbound reference {expr.name!r}") from None
    if isinstance(expr, Neg):
        return -evaluate(expr.arg, env)
    if isinstance(expr, Sum):
        total = evaluate(expr.args[0], env)
        for a in expr.args[1:]:
            total = total + evaluate(a, env)
        return total
    if isinstance(expr, Prod):
        total = evaluate(expr.args[0], env)
        for a in expr.args[1:]:
            total = total * evaluate(a, env)
        return total
    if isinstance(expr, Or):
        vals = [_check_boolean(evaluate(a, env), expr) for a in expr.args]
        return functools.reduce(np.maximum, vals).astype(float)
    if isinstance(expr, And):
        vals = [_check_boolean(evaluate(a, env), expr) for a in expr.args]
        return functools.reduce(np.minimum, vals).astype(float)
    if isinstance(expr, Not):
        return 1.0 - _check_boolean(evaluate(expr.arg, env), expr).astype(float)
    raise TypeError(f"not an expression: {expr!r}")


# --------------------------------------------------------------------------
# affine analysis


def affine_form(expr):
    """Decompose an affine expression as ``({ref_node: coef}, const)``.

    Keys are :class:`Var` / :class:`Exo` nodes.  Returns ``None`` when the
    expression is not affine in its references.
    """
    if isinstance(expr, Const):
        return {}, expr.value
    if isinstance(expr, (Var, Exo)):
        return {expr: 1.0}, 0.0
    if isinstance(expr, Neg):
        inner = affine_form(expr.arg)
        if inner is None:
            return None
        coefs, c = inner
        return {k: -v for k, v in coefs.items()}, -c
    if isinstance(expr, Sum):
        coefs, c = {}, 0.0
        for a in expr.args:
            part = affine_form(a)
            if part is None:
                return None
            for k, v in part[0].items():
                coefs[k] = coefs.get(k, 0.0) + v
            c += part[1]
        return coefs, c
    if isinstance(expr, Prod):
        coefs, scale = None, 1.0
        for a in expr.args:
            part = affine_form(a)
            if part is None:
                return None
            if part[0]:
                if coefs is not None:
                    return None
                coefs, c = dict(part[0]), part[1]
            else:
                scale *= part[1]
        if coefs is None:
            return {}, scale
        return {k: v * scale for k, v in coefs.items()}, c * scale
    if isinstance(expr, (Or, And, Not)):
        if variables_in(expr) or exogenous_in(expr):
            return None
        return {}, float(evaluate(expr, {}))
    raise TypeError(f"not an expression: {expr!r}")


def split_linear(expr, names):
    """Split ``expr`` as ``sum(coef[name] * Var(name)) + remainder``.

    The coefficients must be constants and ``remainder`` must not reference
    any of ``names``.  Returns ``(coefs, remainder)`` or ``None``.
    """
    names = set(names)

    def go(e):
        if not (set(variables_in(e)) & names):
            return {}, [e]
        if isinstance(e, Var):
            return {e.name: 1.0}, []
        if isinstance(e, Neg):
            r = go(e.arg)
            if r is None:
                return None
            return {k: -v for k, v in r[0].items()}, [Neg(x) for x in r[1]]
        if isinstance(e, Sum):
            coefs, rest = {}, []
            for a in e.args:
                r = go(a)
                if r is None:
                    return None
                for k, v in r[0].items():
                    coefs[k] = coefs.get(k, 0.0) + v
                rest.extend(r[1])
            return coefs, rest
        if isinstance(e, Prod):
            dependent = [a for a in e.args if set(variables_in(a)) & names]
            if len(dependent) != 1:
                return None
            others = [a for a in e.args if a is not dependent[0]]
            if any(variables_in(a) or exogenous_in(a) for a in others):
                return None
            scale = float(np.prod([evaluate(a, {}) for a in others]))
            r = go(dependent[0])
            if r is None:
                return None
            return ({k: v * scale for k, v in r[0].items()},
                    [mul(Const(scale), x) for x in r[1]])
        return None

    r = go(expr)
    if r is None:
        return None
    coefs, rest = r
    return coefs, (add(*rest) if rest else Const(0.0))


# --------------------------------------------------------------------------
# printing


def _atom(e):
    s = to_string(e)
    if isinstance(e, (Const, Sum, Prod, Neg)):
        return f"({s})"
    return s


def _term(e):
    s = to_string(e)
    return f"({s})" if isinstance(e, Sum) else s


def _factor(e):
    s = to_string(e)
    return f"({s})" if isinstance(e, (Sum, Prod)) else s


def to_string(expr) -> str:
    if isinstance(expr, Const):
        return repr(expr.value)
    if isinstance(expr, (Var, Exo)):
        return expr.name
    if isinstance(expr, Neg):
        return "-" + _atom(expr.arg)
    if isinstance(expr, Sum):
        out = [_term(expr.args[0])]
        for a in expr.args[1:]:
            if isinstance(a, Neg):
                out.append(" - " + _term(a.arg))
            else:
                out.append(" + " + _term(a))
        return "".join(out)
    if isinstance(expr, Prod):
        return "*".join(_factor(a) for a in expr.args)
    if isinstance(expr, (Or, And, Not)):
        name = type(expr).__name__.lower()
        args = (expr.arg,) if isinstance(expr, Not) else expr.args
        return f"{name}(" + ", ".join(to_string(a) for a in args) + ")"
    raise TypeError(f"not an expression: {expr!r}")


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*(),]))"
)
_FUNCTIONS = {"or": Or, "and": And, "not": Not}


def _tokenize(text, location):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ValidationError(f"unexpected character {text[col - 1]!r}", _loc(location, col))
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


def _loc(location, col):
    return f"{location}:{col}" if location else f"col {col}"


class _Parser:
    def __init__(self, text, variables, exogenous, location):
        self.tokens = _tokenize(text, location)
        self.i = 0
        self.variables = variables
        self.exogenous = exogenous
        self.location = location

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok):
        raise ValidationError(msg, _loc(self.location, tok[2]))

    def expect(self, op):
        tok = self.next()
        if tok[:2] != ("op", op):
            self.error(f"expected {op!r}, found {tok[1] or 'end of input'!r}", tok)

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.error(f"unexpected token {tok[1]!r}", tok)
        return e

    def expr(self):
        terms = [self.term()]
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.next()[1]
            t = self.term()
            terms.append(Neg(t) if op == "-" else t)
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self):
        factors = [self.factor()]
        while self.peek()[:2] == ("op", "*"):
            self.next()
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else Prod(tuple(factors))

    def factor(self):
        tok = self.next()
        kind, text, _ = tok
        if kind == "num":
            return Const(float(text))
        if (kind, text) == ("op", "-"):
            if self.peek()[0] == "num":
                return Const(-float(self.next()[1]))
            return Neg(self.factor())
        if (kind, text) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                if text not in _FUNCTIONS:
                    self.error(f"unknown function {text!r}", tok)
                self.next()
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                if text == "not":
                    if len(args) != 1:
                        self.error("not() takes exactly one argument", tok)
                    return Not(args[0])
                return _FUNCTIONS[text](tuple(args))
            return self.reference(tok)
        self.error(f"unexpected token {text or 'end of input'!r}", tok)

    def reference(self, tok):
        name = tok[1]
        is_var = name in self.variables
        is_exo = name in self.exogenous
        if is_var and is_exo:
            self.error(f"identifier {name!r} is both a variable and an exogenous id", tok)
        if is_var:
            return Var(name)
        if is_exo:
            return Exo(name)
        self.error(f"undeclared reference {name!r}", tok)


def parse_expr(text: str, variables=(), exogenous=(), location: str = None):
    """Parse ``text``; identifiers resolve to variables first, then exogenous ids.

    Raises :class:`ValidationError` with a ``location:column`` pointer on
    syntax errors and undeclared references.
    """
    if not isinstance(text, str):
        raise ValidationError(f"expected an expression string, got {type(text).__name__}", location)
    return _Parser(text, set(variables), set(exogenous), location).parse()
