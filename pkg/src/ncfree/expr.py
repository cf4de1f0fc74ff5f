"""Symbolic non-commutative expressions with exponential atoms.

Expressions are weighted sums of words over the letters ``X1..Xd`` (self-adjoint
indeterminates), ``A1..Aq`` and their adjoints ``A1'..Aq'``, plus opaque
exponential atoms ``exp(i y P)`` with ``P`` self-adjoint.  The derivative of an
exponential atom introduces a quadrature variable ``alpha in [0,1]``; those
variables live in :class:`AlphaForm` scales and coefficients of
:class:`TensorExpr` terms and are integrated out numerically at evaluation
time (see ``ncfree.matrices``).

Everything here is an immutable value; all operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

__all__ = [
    "AlphaForm",
    "Letter",
    "ExpAtom",
    "Word",
    "NcExpr",
    "TensorTerm",
    "TensorExpr",
    "adjoint",
    "is_self_adjoint",
    "normalize",
    "nc_derivative",
    "cyclic_derivative",
    "tensor_contract",
]


# ---------------------------------------------------------------------------
# AlphaForm: polynomials in the quadrature variables a0, a1, ...
# ---------------------------------------------------------------------------

Monomial = tuple  # sorted tuple of variable indices, repeats allowed


@dataclass(frozen=True)
class AlphaForm:
    """Polynomial in quadrature variables with complex coefficients.

    ``terms`` maps monomials (sorted tuples of variable indices) to
    coefficients; the empty tuple is the constant term.  Derivatives only ever
    produce multilinear forms, but products of repeated variables are handled
    uniformly.
    """

    terms: tuple

    @staticmethod
    def _make(d: dict) -> "AlphaForm":
        items = tuple(sorted((m, c) for m, c in d.items() if c != 0))
        return AlphaForm(items)

    @classmethod
    def const(cls, c: complex) -> "AlphaForm":
        return cls._make({(): complex(c)})

    @classmethod
    def var(cls, k: int) -> "AlphaForm":
        return cls._make({(k,): 1.0 + 0j})

    def __add__(self, other: "AlphaForm") -> "AlphaForm":
        d = dict(self.terms)
        for m, c in other.terms:
            d[m] = d.get(m, 0j) + c
        return AlphaForm._make(d)

    def __neg__(self) -> "AlphaForm":
        return AlphaForm(tuple((m, -c) for m, c in self.terms))

    def __sub__(self, other: "AlphaForm") -> "AlphaForm":
        return self + (-other)

    def __mul__(self, other: Union["AlphaForm", complex, float, int]) -> "AlphaForm":
        if not isinstance(other, AlphaForm):
            z = complex(other)
            if z == 0:
                return AlphaForm(())
            return AlphaForm(tuple((m, c * z) for m, c in self.terms))
        d: dict = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = tuple(sorted(m1 + m2))
                d[m] = d.get(m, 0j) + c1 * c2
        return AlphaForm._make(d)

    __rmul__ = __mul__

    def conjugate(self) -> "AlphaForm":
        return AlphaForm(tuple((m, c.conjugate()) for m, c in self.terms))

    def shift(self, offset: int) -> "AlphaForm":
        """Renumber every variable index by ``offset``."""
        if offset == 0:
            return self
        return AlphaForm._make(
            {tuple(v + offset for v in m): c for m, c in self.terms}
        )

    def evaluate(self, alphas) -> complex:
        total = 0j
        for m, c in self.terms:
            p = c
            for v in m:
                p = p * alphas[v]
            total += p
        return total

    @property
    def is_constant(self) -> bool:
        return all(m == () for m, _ in self.terms)

    @property
    def is_real(self) -> bool:
        return all(c.imag == 0 for _, c in self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def constant_value(self) -> complex:
        if not self.is_constant:
            raise ValueError("AlphaForm depends on quadrature variables")
        return self.terms[0][1] if self.terms else 0j

    def max_var(self) -> int:
        """Largest variable index used, or -1."""
        vs = [v for m, _ in self.terms for v in m]
        return max(vs) if vs else -1

    def sort_key(self):
        return tuple((m, c.real, c.imag) for m, c in self.terms)

    def __repr__(self):
        if not self.terms:
            return "0"
        bits = []
        for m, c in self.terms:
            mono = "*".join(f"a{v}" for v in m)
            bits.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(bits)


ZERO_FORM = AlphaForm(())
ONE_FORM = AlphaForm.const(1.0)


# ---------------------------------------------------------------------------
# Word factors
# ---------------------------------------------------------------------------

KIND_X = "X"
KIND_A = "A"
KIND_ASTAR = "A*"
_KIND_RANK = {KIND_X: 0, KIND_A: 1, KIND_ASTAR: 2}


@dataclass(frozen=True)
class Letter:
    kind: str
    index: int  # 1-based

    def adjoint(self) -> "Letter":
        if self.kind == KIND_X:
            return self
        if self.kind == KIND_A:
            return Letter(KIND_ASTAR, self.index)
        return Letter(KIND_A, self.index)

    def sort_key(self):
        return (0, (_KIND_RANK[self.kind], self.index))

    def __repr__(self):
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class ExpAtom:
    """Exponential atom ``exp(i * scale * base)`` with self-adjoint base."""

    scale: AlphaForm
    base: "NcExpr"

    def adjoint(self) -> "ExpAtom":
        return ExpAtom(-self.scale, self.base)

    def sort_key(self):
        return (1, (self.scale.sort_key(), self.base.sort_key()))

    def __repr__(self):
        return f"exp(i ({self.scale}) {self.base!r})"


Factor = Union[Letter, ExpAtom]
Word = tuple  # tuple of Factor; the empty tuple is the unit


def word_adjoint(word: Word) -> Word:
    return tuple(f.adjoint() for f in reversed(word))


def word_sort_key(word: Word):
    return tuple(f.sort_key() for f in word)


# ---------------------------------------------------------------------------
# NcExpr
# ---------------------------------------------------------------------------

class NcExpr:
    """Weighted sum of words, canonically ordered, no zero coefficients."""

    __slots__ = ("d", "q", "_terms", "_key")

    def __init__(self, d: int, q: int, terms: Mapping[Word, complex] | Iterable = ()):
        self.d = int(d)
        self.q = int(q)
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict = {}
        for word, coeff in items:
            c = complex(coeff)
            if c == 0:
                continue
            merged[word] = merged.get(word, 0j) + c
        merged = {w: c for w, c in merged.items() if c != 0}
        ordered = tuple(sorted(merged.items(), key=lambda kv: word_sort_key(kv[0])))
        self._terms = ordered
        self._key = None

    # -- construction helpers ------------------------------------------------

    @classmethod
    def zero(cls, d: int, q: int = 0) -> "NcExpr":
        return cls(d, q)

    @classmethod
    def one(cls, d: int, q: int = 0) -> "NcExpr":
        return cls(d, q, {(): 1.0})

    @classmethod
    def x(cls, i: int, d: int, q: int = 0) -> "NcExpr":
        if not 1 <= i <= d:
            raise ValueError(f"X{i} out of range for d={d}")
        return cls(d, q, {(Letter(KIND_X, i),): 1.0})

    @classmethod
    def a(cls, j: int, d: int, q: int) -> "NcExpr":
        if not 1 <= j <= q:
            raise ValueError(f"A{j} out of range for q={q}")
        return cls(d, q, {(Letter(KIND_A, j),): 1.0})

    @classmethod
    def a_star(cls, j: int, d: int, q: int) -> "NcExpr":
        if not 1 <= j <= q:
            raise ValueError(f"A{j}' out of range for q={q}")
        return cls(d, q, {(Letter(KIND_ASTAR, j),): 1.0})

    @classmethod
    def exp_i(cls, scale, base: "NcExpr") -> "NcExpr":
        """Build ``exp(i*scale*base)``; ``base`` must be self-adjoint."""
        form = scale if isinstance(scale, AlphaForm) else AlphaForm.const(scale)
        if not form.is_real:
            raise ValueError("exponential scale must be real")
        if not base.is_self_adjoint():
            raise ValueError("exponential base is not self-adjoint")
        return cls(base.d, base.q, {(ExpAtom(form, base),): 1.0})

    # -- basic protocol --------------------------------------------------------

    def terms(self):
        return self._terms

    def __iter__(self) -> Iterator:
        return iter(self._terms)

    def __len__(self):
        return len(self._terms)

    def sort_key(self):
        if self._key is None:
            self._key = tuple(
                (word_sort_key(w), (c.real, c.imag)) for w, c in self._terms
            )
        return self._key

    def __eq__(self, other):
        return (
            isinstance(other, NcExpr)
            and self.d == other.d
            and self.q == other.q
            and self._terms == other._terms
        )

    def __hash__(self):
        return hash((self.d, self.q, self._terms))

    def __repr__(self):
        from . import dsl

        try:
            return f"NcExpr({dsl.to_text(self)!r}, d={self.d}, q={self.q})"
        except ValueError:
            return f"NcExpr(<{len(self._terms)} terms>, d={self.d}, q={self.q})"

    # -- algebra ---------------------------------------------------------------

    def _check_arity(self, other: "NcExpr"):
        if (self.d, self.q) != (other.d, other.q):
            raise ValueError(
                f"arity mismatch: ({self.d},{self.q}) vs ({other.d},{other.q})"
            )

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = NcExpr(self.d, self.q, {(): other})
        self._check_arity(other)
        return NcExpr(self.d, self.q, list(self._terms) + list(other._terms))

    __radd__ = __add__

    def __neg__(self):
        return NcExpr(self.d, self.q, [(w, -c) for w, c in self._terms])

    def __sub__(self, other):
        if isinstance(other, (int, float, complex)):
            other = NcExpr(self.d, self.q, {(): other})
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return NcExpr(self.d, self.q, [(w, c * other) for w, c in self._terms])
        self._check_arity(other)
        out: dict = {}
        for w1, c1 in self._terms:
            for w2, c2 in other._terms:
                w = w1 + w2
                out[w] = out.get(w, 0j) + c1 * c2
        return NcExpr(self.d, self.q, out)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self * other
        return NotImplemented

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers not supported")
        out = NcExpr.one(self.d, self.q)
        for _ in range(n):
            out = out * self
        return out

    # -- structure -------------------------------------------------------------

    def adjoint(self) -> "NcExpr":
        return NcExpr(
            self.d,
            self.q,
            [(word_adjoint(w), c.conjugate()) for w, c in self._terms],
        )

    def is_self_adjoint(self) -> bool:
        return self.adjoint() == self

    def is_polynomial(self) -> bool:
        """True when no word contains an exponential atom."""
        return all(
            not isinstance(f, ExpAtom) for w, _ in self._terms for f in w
        )

    def degree(self) -> int:
        """Maximal word length (atoms count as one factor); -1 for zero."""
        return max((len(w) for w, _ in self._terms), default=-1)

    def max_alpha_var(self) -> int:
        out = -1
        for w, _ in self._terms:
            for f in w:
                if isinstance(f, ExpAtom):
                    out = max(out, f.scale.max_var(), f.base.max_alpha_var())
        return out

    def scale_exponentials(self, y: float) -> "NcExpr":
        """Multiply the scale of every exponential atom by ``y``."""
        out = []
        for w, c in self._terms:
            nw = tuple(
                ExpAtom(f.scale * y, f.base.scale_exponentials(y))
                if isinstance(f, ExpAtom)
                else f
                for f in w
            )
            out.append((nw, c))
        return NcExpr(self.d, self.q, out)

    def letters_used(self):
        """Set of (kind, index) pairs appearing anywhere, bases included."""
        out = set()
        for w, _ in self._terms:
            for f in w:
                if isinstance(f, Letter):
                    out.add((f.kind, f.index))
                else:
                    out |= f.base.letters_used()
        return out


# ---------------------------------------------------------------------------
# TensorExpr
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TensorTerm:
    """One ``coeff * (left (x) right)`` contribution with ``nalpha`` local
    quadrature variables (indices ``0..nalpha-1``), each integrated over
    [0, 1]."""

    coeff: AlphaForm
    nalpha: int
    left: NcExpr
    right: NcExpr


class TensorExpr:
    """Finite sum of tensor terms; ``transpose_left`` marks the pending
    matrix-level transpose of the left leg produced by the ``h`` contraction."""

    __slots__ = ("d", "q", "terms", "transpose_left")

    def __init__(self, d: int, q: int, terms: Iterable[TensorTerm] = (),
                 transpose_left: bool = False):
        self.d = int(d)
        self.q = int(q)
        # canonical form: legs are single words with unit coefficient, all
        # scalar weight lives in the term coefficient
        merged: dict = {}
        for t in terms:
            if t.coeff.is_zero:
                continue
            for wl, cl in t.left.terms():
                for wr, cr in t.right.terms():
                    key = (t.nalpha,
                           NcExpr(d, q, {wl: 1.0}), NcExpr(d, q, {wr: 1.0}))
                    add = t.coeff * (cl * cr)
                    prev = merged.get(key)
                    merged[key] = add if prev is None else prev + add
        cleaned = [
            TensorTerm(c, k[0], k[1], k[2])
            for k, c in merged.items()
            if not c.is_zero
        ]
        cleaned.sort(key=lambda t: (t.nalpha, t.left.sort_key(), t.right.sort_key()))
        self.terms = tuple(cleaned)
        self.transpose_left = bool(transpose_left)

    @classmethod
    def zero(cls, d: int, q: int = 0) -> "TensorExpr":
        return cls(d, q)

    def __eq__(self, other):
        return (
            isinstance(other, TensorExpr)
            and (self.d, self.q) == (other.d, other.q)
            and self.terms == other.terms
            and self.transpose_left == other.transpose_left
        )

    def __hash__(self):
        return hash((self.d, self.q, self.terms, self.transpose_left))

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"TensorExpr(<{len(self.terms)} terms>, d={self.d}, q={self.q})"

    def __add__(self, other: "TensorExpr") -> "TensorExpr":
        if (self.d, self.q) != (other.d, other.q):
            raise ValueError("arity mismatch")
        if self.transpose_left != other.transpose_left:
            raise ValueError("cannot mix h-tagged and plain tensor expressions")
        return TensorExpr(self.d, self.q, self.terms + other.terms,
                          self.transpose_left)

    def __neg__(self):
        return TensorExpr(
            self.d, self.q,
            [TensorTerm(-t.coeff, t.nalpha, t.left, t.right) for t in self.terms],
            self.transpose_left,
        )

    def __sub__(self, other):
        return self + (-other)

    def scalar_mul(self, z: complex) -> "TensorExpr":
        return TensorExpr(
            self.d, self.q,
            [TensorTerm(t.coeff * z, t.nalpha, t.left, t.right) for t in self.terms],
            self.transpose_left,
        )

    def left_mul(self, e: NcExpr) -> "TensorExpr":
        """(e (x) 1) * self"""
        return TensorExpr(
            self.d, self.q,
            [TensorTerm(t.coeff, t.nalpha, e * t.left, t.right) for t in self.terms],
            self.transpose_left,
        )

    def right_mul(self, e: NcExpr) -> "TensorExpr":
        """self * (1 (x) e)"""
        return TensorExpr(
            self.d, self.q,
            [TensorTerm(t.coeff, t.nalpha, t.left, t.right * e) for t in self.terms],
            self.transpose_left,
        )

    def is_alpha_free(self) -> bool:
        return all(t.nalpha == 0 for t in self.terms)

    def to_expr(self) -> NcExpr:
        """Collapse single-leg, alpha-free tensors back to an expression."""
        if self.transpose_left:
            raise ValueError("h-tagged tensor cannot collapse to an expression")
        out = NcExpr.zero(self.d, self.q)
        one = NcExpr.one(self.d, self.q)
        for t in self.terms:
            if t.nalpha != 0 or t.right != one:
                raise ValueError("tensor is not a plain single-leg expression")
            out = out + t.left * t.coeff.constant_value()
        return out


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------

def _word_expr(d: int, q: int, word: Word, coeff: complex = 1.0) -> NcExpr:
    return NcExpr(d, q, {word: coeff})


def _derive_word(d: int, q: int, word: Word, coeff: AlphaForm, i: int,
                 m0: int) -> list:
    """Leibniz expansion of one word; fresh quadrature variables start at m0."""
    out = []
    for p, f in enumerate(word):
        prefix, suffix = word[:p], word[p + 1:]
        if isinstance(f, Letter):
            if f.kind == KIND_X and f.index == i:
                out.append(TensorTerm(
                    coeff, m0,
                    _word_expr(d, q, prefix), _word_expr(d, q, suffix),
                ))
            continue
        # exponential atom: i * s * (e^{i a s R} (x) 1) dR (1 (x) e^{i (1-a) s R})
        inner = nc_derivative(f.base, i)
        if not inner.terms:
            continue
        k = m0
        scale_l = f.scale * AlphaForm.var(k)
        scale_r = f.scale - scale_l
        atom_l = _word_expr(d, q, (ExpAtom(scale_l, f.base),))
        atom_r = _word_expr(d, q, (ExpAtom(scale_r, f.base),))
        pre = _word_expr(d, q, prefix) * atom_l
        suf = atom_r * _word_expr(d, q, suffix)
        for it in inner.terms:
            shift = k + 1
            out.append(TensorTerm(
                coeff * (1j * f.scale) * it.coeff.shift(shift),
                shift + it.nalpha,
                pre * it.left,
                it.right * suf,
            ))
    return out


def nc_derivative(e, i: int) -> TensorExpr:
    """Non-commutative derivative with respect to ``Xi``.

    Accepts an :class:`NcExpr`, or a single-leg :class:`TensorExpr` (as
    produced by :func:`cyclic_derivative`) whose quadrature variables are kept,
    so that the composed operator over [0,1]^2 can be evaluated.
    """
    if isinstance(e, TensorExpr):
        one = NcExpr.one(e.d, e.q)
        terms: list = []
        for t in e.terms:
            if t.right != one:
                raise ValueError("derivative of a two-leg tensor is not defined")
            for w, c in t.left.terms():
                terms.extend(
                    _derive_word(e.d, e.q, w, t.coeff * c, i, t.nalpha)
                )
        return TensorExpr(e.d, e.q, terms)
    if not 1 <= i <= e.d:
        raise ValueError(f"derivative index {i} out of range for d={e.d}")
    terms = []
    for w, c in e.terms():
        terms.extend(_derive_word(e.d, e.q, w, AlphaForm.const(c), i, 0))
    return TensorExpr(e.d, e.q, terms)


def cyclic_derivative(e, i: int) -> TensorExpr:
    """``m`` applied to the derivative: single-leg tensor, variables kept."""
    return tensor_contract(nc_derivative(e, i), "m", collapse=False)


def tensor_contract(t: TensorExpr, mode: str, C: NcExpr | None = None,
                    collapse: bool = True):
    """Contract a tensor term-wise.

    mode ``sharp``:       A (x) B -> A C B
    mode ``tilde_sharp``: A (x) B -> B C A
    mode ``m``:           A (x) B -> B A
    mode ``h``:           tag for the matrix-level A^T B contraction, consumed
                          at evaluation time.

    Returns an :class:`NcExpr` when the result carries no quadrature variables
    (and ``collapse`` is true), else a single-leg :class:`TensorExpr`.
    """
    if t.transpose_left:
        raise ValueError("tensor is already h-tagged")
    if mode == "h":
        return TensorExpr(t.d, t.q, t.terms, transpose_left=True)
    if mode in ("sharp", "tilde_sharp"):
        if C is None:
            raise ValueError(f"mode {mode!r} requires the middle factor C")
        if (C.d, C.q) != (t.d, t.q):
            raise ValueError("arity mismatch with middle factor")
    elif mode == "m":
        if C is not None:
            raise ValueError("mode 'm' takes no middle factor")
    else:
        raise ValueError(f"unknown contraction mode {mode!r}")

    one = NcExpr.one(t.d, t.q)
    out = []
    for term in t.terms:
        if mode == "sharp":
            leg = term.left * C * term.right
        elif mode == "tilde_sharp":
            leg = term.right * C * term.left
        else:
            leg = term.right * term.left
        out.append(TensorTerm(term.coeff, term.nalpha, leg, one))
    result = TensorExpr(t.d, t.q, out)
    if collapse and result.is_alpha_free():
        return result.to_expr()
    return result


# -- functional aliases matching the operation names -------------------------

def adjoint(e: NcExpr) -> NcExpr:
    return e.adjoint()


def is_self_adjoint(e: NcExpr) -> bool:
    return e.is_self_adjoint()


def normalize(e: NcExpr) -> NcExpr:
    """Expressions are kept canonical at construction; this is the identity
    re-canonicalization, exposed for symmetry with the other operations."""
    return NcExpr(e.d, e.q, e.terms())
