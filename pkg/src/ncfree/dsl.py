"""Parser and canonical printer for the expression DSL.

Grammar (whitespace insignificant)::

    expr    := ["+"|"-"] term (("+"|"-") term)*
    term    := factor ("*" factor)*
    factor  := atom ["'"]                      -- trailing apostrophe: adjoint
    atom    := scalar | letter | "exp" "(" "i" [scalar] expr ")" | "(" expr ")"
    letter  := ("X"|"A") integer
    scalar  := ["-"] decimal
             | "(" ["-"] decimal ("+"|"-") decimal "i" ")"

``X1..Xd`` are the self-adjoint indeterminates, ``A1..Aq`` the general ones;
``A1'`` denotes the adjoint of ``A1``.  ``exp(i 2 (X1*X1))`` is the atom with
scale 2 and base ``X1*X1``; the base must be self-adjoint.
"""

from __future__ import annotations

import re

from .expr import ExpAtom, Letter, NcExpr

__all__ = ["DslError", "parse", "to_text", "fmt_float"]


class DslError(ValueError):
    """Syntax or validation error, carrying the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<letter>[XA]\d+)|(?P<name>[A-Za-z]+)"
    r"|(?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)"
    r"|(?P<sym>[+\-*()']))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            at = len(text) - len(stripped)
            raise DslError(f"unexpected character {text[at]!r}", at)
        for kind in ("letter", "name", "number", "sym"):
            val = m.group(kind)
            if val is not None:
                tokens.append((kind, val, m.start(kind)))
                break
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, d: int, q: int):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.d = d
        self.q = q

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, val, at = self.next()
        if val != value:
            raise DslError(f"expected {value!r}, found {val or 'end of input'!r}", at)

    def fail(self, message: str):
        raise DslError(message, self.peek()[2])

    # -- grammar ------------------------------------------------------------

    def parse(self) -> NcExpr:
        e = self.expr()
        kind, val, at = self.peek()
        if kind != "end":
            raise DslError(f"unexpected trailing input {val!r}", at)
        return e

    def expr(self) -> NcExpr:
        sign = 1.0
        if self.peek()[1] in ("+", "-"):
            sign = -1.0 if self.next()[1] == "-" else 1.0
        e = self.term() * sign
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            t = self.term()
            e = e + t if op == "+" else e - t
        return e

    def term(self) -> NcExpr:
        e = self.factor()
        while self.peek()[1] == "*":
            self.next()
            e = e * self.factor()
        return e

    def factor(self) -> NcExpr:
        e = self.atom()
        while self.peek()[1] == "'":
            self.next()
            e = e.adjoint()
        return e

    def atom(self) -> NcExpr:
        kind, val, at = self.peek()
        if kind == "letter":
            self.next()
            return self.letter(val, at)
        if kind == "number" or val == "-":
            return NcExpr(self.d, self.q, {(): self.signed_decimal()})
        if val == "exp":
            self.next()
            return self.exp_atom()
        if val == "(":
            z = self.try_complex_scalar()
            if z is not None:
                return NcExpr(self.d, self.q, {(): z})
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        self.fail(f"expected an atom, found {val or 'end of input'!r}")

    def letter(self, text: str, at: int) -> NcExpr:
        idx = int(text[1:])
        if text[0] == "X":
            if not 1 <= idx <= self.d:
                raise DslError(f"X{idx} exceeds arity d={self.d}", at)
            return NcExpr.x(idx, self.d, self.q)
        if not 1 <= idx <= self.q:
            raise DslError(f"A{idx} exceeds arity q={self.q}", at)
        return NcExpr.a(idx, self.d, self.q)

    def exp_atom(self) -> NcExpr:
        self.expect("(")
        kind, val, at = self.next()
        if val != "i":
            raise DslError("expected 'i' after exp(", at)
        scale = 1.0
        kind, val, _ = self.peek()
        if kind == "number" or val == "-":
            save = self.pos
            scale = self.signed_decimal()
            if self.peek()[1] == ")":
                # the number was the whole base expression, not a scale
                self.pos = save
                scale = 1.0
        base_at = self.peek()[2]
        base = self.expr()
        self.expect(")")
        if not base.is_self_adjoint():
            raise DslError("exponential base is not self-adjoint", base_at)
        return NcExpr.exp_i(scale, base)

    def signed_decimal(self) -> float:
        sign = 1.0
        if self.peek()[1] == "-":
            self.next()
            sign = -1.0
        kind, val, at = self.next()
        if kind != "number":
            raise DslError(f"expected a number, found {val or 'end of input'!r}", at)
        return sign * float(val)

    def try_complex_scalar(self):
        """Attempt '(' re ('+'|'-') im 'i' ')'; backtrack on failure."""
        save = self.pos
        try:
            self.expect("(")
            re_part = self.signed_decimal()
            op = self.next()[1]
            if op not in ("+", "-"):
                raise DslError("not a complex literal", 0)
            im_part = self.signed_decimal()
            kind, val, _ = self.next()
            if val != "i":
                raise DslError("not a complex literal", 0)
            self.expect(")")
        except DslError:
            self.pos = save
            return None
        return complex(re_part, im_part if op == "+" else -im_part)


def parse(text: str, d: int, q: int = 0) -> NcExpr:
    """Parse DSL text into a canonical expression of arity (d, q)."""
    return _Parser(text, d, q).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def fmt_float(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _fmt_complex(c: complex) -> str:
    if c.imag == 0:
        return fmt_float(c.real)
    re_s = fmt_float(c.real)
    im_s = fmt_float(abs(c.imag))
    op = "+" if c.imag > 0 else "-"
    return f"({re_s}{op}{im_s}i)"


def _factor_text(f) -> str:
    if isinstance(f, Letter):
        if f.kind == "X":
            return f"X{f.index}"
        if f.kind == "A":
            return f"A{f.index}"
        return f"A{f.index}'"
    if not f.scale.is_constant:
        raise ValueError("cannot print an atom with quadrature-dependent scale")
    scale = f.scale.constant_value().real
    return f"exp(i {fmt_float(scale)} ({to_text(f.base)}))"


def to_text(e: NcExpr) -> str:
    """Canonical rendering; ``parse(to_text(e), e.d, e.q) == e``."""
    if len(e) == 0:
        return "0"
    parts = []
    for word, coeff in e.terms():
        word_s = "*".join(_factor_text(f) for f in word)
        if not word:
            piece, neg = _fmt_complex(coeff), False
        elif coeff.imag == 0:
            mag = abs(coeff.real)
            body = word_s if mag == 1 else f"{fmt_float(mag)}*{word_s}"
            piece, neg = body, coeff.real < 0
        else:
            piece, neg = f"{_fmt_complex(coeff)}*{word_s}", False
        parts.append((piece, neg))
    out = []
    for n, (piece, neg) in enumerate(parts):
        if n == 0:
            out.append(("-" if neg else "") + piece)
        else:
            out.append(("- " if neg else "+ ") + piece)
    return " ".join(out)
