"""Dense Hermitian numerics: expression evaluation, functional calculus, and
tensor-trace evaluation with Gauss-Legendre quadrature over the [0,1]
variables introduced by derivatives of exponential atoms.

Matrix exponentials of ``i * (Hermitian)`` go through the eigendecomposition
of the base, which is cached per context so that sweeps over the exponential
scale reuse one factorization.
"""

from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np

from .expr import ExpAtom, Letter, NcExpr, TensorExpr
from .fourier import FourierSum

__all__ = [
    "Context",
    "evaluate",
    "herm_funcalc",
    "evaluate_tensor",
    "trace_forms",
    "ts",
    "ts_of_expr",
]

HERM_TOL = 1e-12
HERM_WARN = 1e-10
HERM_FAIL = 1e-6


def _herm_defect(M) -> float:
    return float(np.max(np.abs(M - M.conj().T)))


def _symmetrize(M, what: str = "context matrix"):
    defect = _herm_defect(M)
    if defect == 0.0:
        return M
    scale = max(1.0, float(np.max(np.abs(M))))
    if defect > HERM_FAIL * scale:
        raise ValueError(f"{what} is not Hermitian (defect {defect:.3e})")
    if defect > HERM_WARN * scale:
        warnings.warn(f"{what}: Hermitian defect {defect:.3e} exceeds "
                      f"{HERM_WARN:g}; symmetrizing", RuntimeWarning)
    return (M + M.conj().T) / 2


class Context:
    """Evaluation point: d Hermitian matrices X, q general matrices A."""

    __slots__ = ("X", "A", "quadrature_order", "N", "_eig_cache", "_word_cache")

    def __init__(self, X=(), A=(), quadrature_order: int = 21):
        X = tuple(np.asarray(m) for m in X)
        A = tuple(np.asarray(m) for m in A)
        dims = {m.shape for m in X + A}
        if len(dims) > 1:
            raise ValueError(f"matrices of mixed shapes: {sorted(dims)}")
        for m in X + A:
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("context matrices must be square")
        self.X = tuple(_symmetrize(m.astype(complex, copy=False)) for m in X)
        self.A = A
        if quadrature_order < 1:
            raise ValueError("quadrature_order must be positive")
        self.quadrature_order = int(quadrature_order)
        self.N = X[0].shape[0] if X else (A[0].shape[0] if A else 0)
        self._eig_cache: dict = {}
        self._word_cache: dict = {}

    @property
    def d(self) -> int:
        return len(self.X)

    @property
    def q(self) -> int:
        return len(self.A)

    def eig_of(self, base: NcExpr):
        """Cached eigendecomposition of an exponential-atom base."""
        hit = self._eig_cache.get(base)
        if hit is None:
            H = _symmetrize(evaluate(base, self), "exponential base evaluation")
            hit = np.linalg.eigh(H)
            self._eig_cache[base] = hit
        return hit


def _check_arity(e, ctx: Context):
    if e.d > ctx.d or e.q > ctx.q:
        raise ValueError(
            f"expression arity ({e.d},{e.q}) exceeds context ({ctx.d},{ctx.q})"
        )


def _factor_matrix(f, ctx: Context, alphas):
    if isinstance(f, Letter):
        if f.kind == "X":
            return ctx.X[f.index - 1]
        if f.kind == "A":
            return ctx.A[f.index - 1]
        return ctx.A[f.index - 1].conj().T
    return _atom_matrix(f, ctx, alphas)


def _atom_matrix(atom: ExpAtom, ctx: Context, alphas):
    w, V = ctx.eig_of(atom.base)
    s = atom.scale.evaluate(alphas)
    if abs(s.imag) > 1e-14 * max(1.0, abs(s.real)):
        raise ValueError("exponential scale evaluated to a non-real value")
    phases = np.exp(1j * s.real * w)
    return (V * phases) @ V.conj().T


def _eval_word(word, ctx: Context, alphas):
    """Balanced-split product with per-context memoization."""
    if not word:
        return np.eye(ctx.N, dtype=complex)
    key = (word, alphas)
    hit = ctx._word_cache.get(key)
    if hit is not None:
        return hit
    if len(word) == 1:
        out = _factor_matrix(word[0], ctx, alphas)
    else:
        mid = len(word) // 2
        out = _eval_word(word[:mid], ctx, alphas) @ _eval_word(word[mid:], ctx, alphas)
    ctx._word_cache[key] = out
    return out


def evaluate(e: NcExpr, ctx: Context, alphas=()) -> np.ndarray:
    """Evaluate an expression to a dense matrix."""
    _check_arity(e, ctx)
    out = np.zeros((ctx.N, ctx.N), dtype=complex)
    for word, coeff in e.terms():
        out += coeff * _eval_word(word, ctx, alphas)
    return out


def herm_funcalc(H, f: FourierSum) -> np.ndarray:
    """Apply a Fourier-sum function to a Hermitian matrix spectrally."""
    H = np.asarray(H)
    H = _symmetrize(H.astype(complex), "funcalc input")
    if f.is_identity:
        return H
    w, V = np.linalg.eigh(H)
    return (V * f(w)) @ V.conj().T


def ts(M) -> complex:
    """Normalized trace."""
    M = np.asarray(M)
    return complex(np.trace(M)) / M.shape[0]


def trace_forms(M, form: str, x=None, y=None) -> complex:
    M = np.asarray(M)
    if form == "tr":
        return complex(np.trace(M))
    if form == "ts":
        return ts(M)
    if form == "bilinear":
        if x is None or y is None:
            raise ValueError("bilinear form requires vectors x and y")
        x = np.asarray(x).reshape(-1)
        y = np.asarray(y).reshape(-1)
        if x.shape[0] != M.shape[0] or y.shape[0] != M.shape[1]:
            raise ValueError("vector length does not match matrix dimension")
        return complex(np.vdot(x, M @ y))
    raise ValueError(f"unknown trace form {form!r}")


@lru_cache(maxsize=None)
def _gl_nodes(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def evaluate_tensor(t: TensorExpr, ctx: Context, reduction: str = "ts_ts",
                    P=None) -> complex:
    """Quadrature evaluation of a tensor expression under a trace reduction.

    reduction "ts_ts":            sum of ts(left) * ts(right)
    reduction "sharp_then_trace": sum of ts(left @ P @ right)
    reduction "h_then_trace":     sum of ts(left.T @ right)
    """
    if reduction == "sharp_then_trace":
        if P is None:
            raise ValueError("sharp_then_trace requires the middle matrix P")
        P = np.asarray(P)
        if P.shape != (ctx.N, ctx.N):
            raise ValueError("middle matrix dimension mismatch")
    elif reduction not in ("ts_ts", "h_then_trace"):
        raise ValueError(f"unknown reduction {reduction!r}")
    nodes, weights = _gl_nodes(ctx.quadrature_order)
    total = 0j
    for term in t.terms:
        _check_arity(term.left, ctx)
        _check_arity(term.right, ctx)
        grids = np.meshgrid(*([nodes] * term.nalpha), indexing="ij") \
            if term.nalpha else []
        wgrids = np.meshgrid(*([weights] * term.nalpha), indexing="ij") \
            if term.nalpha else []
        points = (np.stack([g.reshape(-1) for g in grids], axis=1)
                  if term.nalpha else np.zeros((1, 0)))
        wts = (np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
               if term.nalpha else np.ones(1))
        for alphas, wt in zip(points, wts):
            al = tuple(alphas)
            L = evaluate(term.left, ctx, al)
            if t.transpose_left:
                L = L.T
            R = evaluate(term.right, ctx, al)
            c = term.coeff.evaluate(al)
            if reduction == "ts_ts":
                val = ts(L) * ts(R)
            elif reduction == "sharp_then_trace":
                val = np.einsum("ij,jk,ki->", L, P, R) / ctx.N
            else:
                val = np.einsum("ji,ij->", L, R) / ctx.N
            total += wt * c * val
    return complex(total)


def ts_of_expr(e: NcExpr, ctx: Context) -> complex:
    """Normalized trace of an evaluated expression.

    Splits each word in half and contracts the halves with one inner product,
    saving a full matrix product relative to ``ts(evaluate(...))``; used by
    the Monte Carlo surrogates.
    """
    _check_arity(e, ctx)
    total = 0j
    for word, coeff in e.terms():
        if len(word) < 2:
            total += coeff * ts(_eval_word(word, ctx, ()))
            continue
        mid = len(word) // 2
        L = _eval_word(word[:mid], ctx, ())
        R = _eval_word(word[mid:], ctx, ())
        total += coeff * np.einsum("ij,ji->", L, R) / ctx.N
    return complex(total)
