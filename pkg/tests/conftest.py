"""Shared generators for randomized tests.

Coefficients are dyadic (and small), so sums and products taken in any order
are exact in double precision; symbolic identities can then be asserted as
exact equalities.
"""

import random

from ncfree.expr import NcExpr

COEFFS = [1.0, -1.0, 2.0, -2.0, 0.5, -0.5, 1.5, 1 + 1j, -1j, 0.5 - 1j]
SCALES = [0.5, -0.5, 1.0, -1.0, 2.0]


def random_word_expr(rng: random.Random, d: int, q: int, max_len: int,
                     atom_prob: float):
    word = NcExpr.one(d, q)
    length = rng.randint(0, max_len)
    budget = length
    while budget > 0:
        if atom_prob and rng.random() < atom_prob:
            base = random_self_adjoint(rng, d, q, max_len=2)
            word = word * NcExpr.exp_i(rng.choice(SCALES), base)
            budget -= 1
            continue
        kind = rng.randrange(3 if q else 1)
        if kind == 0:
            word = word * NcExpr.x(rng.randint(1, d), d, q)
        elif kind == 1:
            word = word * NcExpr.a(rng.randint(1, q), d, q)
        else:
            word = word * NcExpr.a_star(rng.randint(1, q), d, q)
        budget -= 1
    return word


def random_expr(rng: random.Random, d: int = 2, q: int = 1,
                max_words: int = 3, max_len: int = 6,
                atom_prob: float = 0.15) -> NcExpr:
    out = NcExpr.zero(d, q)
    for _ in range(rng.randint(1, max_words)):
        out = out + random_word_expr(rng, d, q, max_len, atom_prob) \
            * rng.choice(COEFFS)
    return out


def random_poly(rng: random.Random, d: int = 2, q: int = 1,
                max_words: int = 3, max_len: int = 6) -> NcExpr:
    return random_expr(rng, d, q, max_words, max_len, atom_prob=0.0)


def random_self_adjoint(rng: random.Random, d: int, q: int,
                        max_len: int = 3) -> NcExpr:
    e = random_poly(rng, d, q, max_words=2, max_len=max_len)
    return e + e.adjoint()
