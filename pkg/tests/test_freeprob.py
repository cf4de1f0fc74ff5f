import itertools
import math
import random

import numpy as np
import pytest

from ncfree.dsl import parse
from ncfree.ensembles import SeedStream
from ncfree.fourier import FourierSum
from ncfree.freeprob import (FreeWord, NcPartition, catalan,
                             conditional_expectation_scalar, embed_blocks,
                             free_expr_scalar, free_expr_trace,
                             free_surrogate_trace, free_word_trace,
                             freeness_oracle_trace, fourier_norm, kreweras,
                             nc_pair_partitions, semicircle_moment)


def all_partitions(k):
    """All set partitions of {1..k} via restricted growth strings."""
    if k == 0:
        yield ()
        return

    def rec(prefix, maxv):
        n = len(prefix)
        if n == k:
            blocks = {}
            for pos, b in enumerate(prefix, start=1):
                blocks.setdefault(b, []).append(pos)
            yield tuple(tuple(v) for v in blocks.values())
            return
        for b in range(maxv + 2):
            yield from rec(prefix + [b], max(maxv, b))

    yield from rec([], -1)


def noncrossing_partitions(k):
    return [NcPartition.from_blocks(k, p) for p in all_partitions(k)
            if NcPartition.from_blocks(k, p).is_noncrossing()]


def kreweras_bruteforce(pi: NcPartition) -> NcPartition:
    """Coarsest sigma on primed points with pi ∪ sigma non-crossing on the
    interleaved circle; independent of the permutation construction."""
    k = pi.k
    best = None
    for cand in all_partitions(k):
        blocks = [tuple(2 * e - 1 for e in b) for b in pi.blocks]
        blocks += [tuple(2 * e for e in b) for b in cand]
        if not NcPartition.from_blocks(2 * k, blocks).is_noncrossing():
            continue
        if best is None or len(cand) < len(best):
            best = cand
    return NcPartition.from_blocks(k, best)


class TestPartitions:
    def test_pair_partition_examples(self):
        assert len(nc_pair_partitions(2, [1, 1])) == 1
        ms = nc_pair_partitions(4, [1, 1, 1, 1])
        assert sorted(m.blocks for m in ms) == [((1, 2), (3, 4)),
                                                ((1, 4), (2, 3))]
        assert nc_pair_partitions(4, [1, 2, 1, 2]) == []
        assert nc_pair_partitions(3, [1, 1, 1]) == []

    def test_colorless_exhaustive_oracle(self):
        # against brute-force enumeration of all perfect matchings
        for k in (2, 4, 6, 8):
            positions = list(range(1, k + 1))

            def matchings(idx):
                if not idx:
                    yield ()
                    return
                first, rest = idx[0], idx[1:]
                for j, other in enumerate(rest):
                    for m in matchings(rest[:j] + rest[j + 1:]):
                        yield ((first, other),) + m

            brute = [NcPartition.from_blocks(k, m)
                     for m in matchings(tuple(positions))]
            brute_nc = {m.blocks for m in brute if m.is_noncrossing()}
            got = {m.blocks for m in nc_pair_partitions(k)}
            assert got == brute_nc

    def test_catalan_counts(self):
        for kk in range(1, 9):
            assert len(nc_pair_partitions(2 * kk)) == catalan(kk)

    def test_noncrossing_flag(self):
        assert NcPartition.from_blocks(4, [(1, 3), (2, 4)]).is_noncrossing() \
            is False
        assert NcPartition.from_blocks(4, [(1, 4), (2, 3)]).is_noncrossing()
        with pytest.raises(ValueError):
            NcPartition.from_blocks(3, [(1, 2)])


class TestKreweras:
    def test_examples(self):
        pi = NcPartition.from_blocks(4, [(1, 2), (3, 4)])
        assert kreweras(pi).blocks == ((1,), (2, 4), (3,))
        singles = NcPartition.from_blocks(5, [(i,) for i in range(1, 6)])
        assert kreweras(singles).blocks == ((1, 2, 3, 4, 5),)

    def test_crossing_rejected(self):
        with pytest.raises(ValueError):
            kreweras(NcPartition.from_blocks(4, [(1, 3), (2, 4)]))

    def test_bruteforce_oracle(self):
        for k in range(1, 7):
            for pi in noncrossing_partitions(k):
                assert kreweras(pi) == kreweras_bruteforce(pi)

    def test_size_identity_exhaustive(self):
        for k in range(1, 9):
            for pi in noncrossing_partitions(k):
                assert len(pi) + len(kreweras(pi)) == k + 1


class TestSemicircle:
    def test_examples(self):
        assert semicircle_moment(0) == 1.0
        assert semicircle_moment(2) == 1.0
        assert semicircle_moment(4) == 2.0
        assert semicircle_moment(6) == 5.0
        assert semicircle_moment(7) == 0.0

    def test_quadrature_oracle(self):
        from scipy.integrate import quad
        for k in range(0, 13):
            val, _ = quad(lambda t: t**k * math.sqrt(4 - t * t) / (2 * math.pi),
                          -2, 2, limit=200)
            assert abs(semicircle_moment(k) - val) <= 1e-10


def random_mats(rng, count, n):
    out = []
    for _ in range(count):
        M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        out.append(M / 2)
    return out


class TestFreeWordTrace:
    def test_word_text_round_trip(self):
        w = FreeWord.from_text("x1 B1 x2 B2 x1")
        assert w.to_text() == "x1 B1 x2 B2 x1"
        with pytest.raises(ValueError):
            FreeWord.from_text("x1 q2")

    def test_examples(self):
        rng = np.random.default_rng(1)
        B1, B2 = random_mats(rng, 2, 6)
        w = FreeWord.from_text("x1 B1 x1 B2")
        from ncfree.matrices import ts
        want = ts(B1) * ts(B2)
        assert abs(free_word_trace(w, [B1, B2]) - want) <= 1e-12
        assert free_word_trace(FreeWord.from_text("x1 x2 x1 x2")) == 0
        assert free_word_trace(FreeWord.from_text("x1 x1")) == 1.0

    def test_matrix_only_word(self):
        rng = np.random.default_rng(2)
        B1, B2 = random_mats(rng, 2, 4)
        from ncfree.matrices import ts
        w = FreeWord.from_text("B1 B2")
        assert abs(free_word_trace(w, [B1, B2]) - ts(B1 @ B2)) <= 1e-14

    def test_oracle_equivalence_exhaustive(self):
        # every word over {x1, x2, B1, B2} up to length 6, one per rotation
        # class (both sides are tracial)
        rng = np.random.default_rng(3)
        mats = random_mats(rng, 2, 5)
        alphabet = [("x", 1), ("x", 2), ("B", 1), ("B", 2)]
        seen = set()
        checked = 0
        for length in range(0, 7):
            for tup in itertools.product(range(4), repeat=length):
                rot = min(tup[i:] + tup[:i] for i in range(max(len(tup), 1)))
                if rot in seen:
                    continue
                seen.add(rot)
                w = FreeWord(tuple(alphabet[i] for i in tup))
                a = free_word_trace(w, mats)
                b = freeness_oracle_trace(w, mats)
                assert abs(a - b) <= 1e-10 * max(1.0, abs(a)), w.to_text()
                checked += 1
        assert checked > 150

    def test_traciality(self):
        rng = np.random.default_rng(4)
        mats = random_mats(rng, 2, 4)
        pyrng = random.Random(5)
        alphabet = [("x", 1), ("x", 2), ("B", 1), ("B", 2)]
        for _ in range(40):
            length = pyrng.randint(1, 10)
            factors = tuple(pyrng.choice(alphabet) for _ in range(length))
            base = free_word_trace(FreeWord(factors), mats)
            for r in range(1, length):
                rot = free_word_trace(FreeWord(factors[r:] + factors[:r]), mats)
                assert abs(base - rot) <= 1e-10 * max(1.0, abs(base))

    def test_oracle_caps_length(self):
        w = FreeWord((("x", 1),) * 13)
        with pytest.raises(ValueError):
            freeness_oracle_trace(w)

    def test_centered_alternating_vanishes(self):
        rng = np.random.default_rng(6)
        (B,) = random_mats(rng, 1, 5)
        from ncfree.matrices import ts
        B0 = B - ts(B) * np.eye(5)
        w = FreeWord.from_text("x1 B1")
        assert abs(free_word_trace(w, [B0])) <= 1e-14
        assert abs(freeness_oracle_trace(w, [B0])) <= 1e-14


class TestExprLevel:
    def test_expr_trace_with_adjoints(self):
        rng = np.random.default_rng(7)
        (A1,) = random_mats(rng, 1, 4)
        from ncfree.matrices import ts
        e = parse("X1*A1'*X1*A1", 1, 1)
        want = ts(A1.conj().T) * ts(A1)
        assert abs(free_expr_trace(e, [A1]) - want) <= 1e-12

    def test_expr_trace_rejects_atoms(self):
        with pytest.raises(ValueError):
            free_expr_trace(parse("exp(i 1 (X1))", 1, 0))

    def test_scalar_rank_one(self):
        rng = np.random.default_rng(8)
        (A1,) = random_mats(rng, 1, 4)
        x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        y = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        got = free_expr_scalar(parse("A1", 1, 1), [A1], x, y)
        want = np.vdot(x, A1 @ y)
        assert abs(got - want) <= 1e-12 * abs(want)
        got = free_expr_scalar(parse("X1*X1", 1, 1), [A1], x, y)
        assert abs(got - np.vdot(x, y)) <= 1e-12 * abs(np.vdot(x, y))


class TestSurrogate:
    def test_embed_blocks(self):
        rng = np.random.default_rng(9)
        (A,) = random_mats(rng, 1, 4)
        from ncfree.matrices import ts
        big = embed_blocks(A, 12)
        assert big.shape == (12, 12)
        assert abs(ts(big @ big) - ts(A @ A)) <= 1e-14
        with pytest.raises(ValueError):
            embed_blocks(A, 10)

    def test_pure_moment(self):
        est, err = free_surrogate_trace(parse("X1*X1", 1, 0), [], 128, 60,
                                        SeedStream(21))
        assert err > 0
        assert abs(est - 1.0) <= 4 * err

    def test_mixed_color_vanishes(self):
        est, err = free_surrogate_trace(parse("X1*X2*X1*X2", 2, 0), [], 128,
                                        60, SeedStream(22))
        assert abs(est) <= 4 * err

    def test_arity_checked(self):
        with pytest.raises(ValueError):
            free_surrogate_trace(parse("A1", 0, 1), [], 64, 10, SeedStream(0))

    def test_conditional_expectation_odd_moment(self):
        x = np.zeros(16)
        x[0] = 1.0
        est, err = conditional_expectation_scalar(
            parse("X1", 1, 0), [], x, x, 64, 80, SeedStream(23))
        assert abs(est) <= 4 * max(err, 1e-12)

    def test_conditional_expectation_divisibility(self):
        x = np.ones(10)
        with pytest.raises(ValueError):
            conditional_expectation_scalar(parse("X1", 1, 0), [], x, x, 64,
                                           10, SeedStream(0))


class TestFourierNorm:
    def test_examples(self):
        f = FourierSum.from_atoms([(1.0, 3.0)])
        assert fourier_norm(f, 4) == 1.0 + 3.0**4
        assert fourier_norm(FourierSum.identity(), 4) == 1.0
        g = FourierSum.from_atoms([(1.0, 0.0), (2.0, 1.0)])
        assert fourier_norm(g, 2) == 1.0 + 2.0 * 2.0

    def test_norm_chain(self):
        # sup|f| <= sum|c_j| <= either norm; the order-4 norm dominates the
        # order-2 one whenever the frequencies sit at |y| >= 1 (not in
        # general: 1 + y^4 < 1 + y^2 for |y| < 1)
        rng = random.Random(10)
        for _ in range(50):
            atoms = [(complex(rng.uniform(-2, 2), rng.uniform(-2, 2)),
                      rng.uniform(-3, 3)) for _ in range(rng.randint(1, 5))]
            f = FourierSum.from_atoms(atoms)
            n4 = fourier_norm(f, 4)
            n2 = fourier_norm(f, 2)
            total = sum(abs(c) for c, _ in f.atoms)
            sup = max(abs(f(t)) for t in np.linspace(-5, 5, 64))
            assert min(n4, n2) >= total >= sup - 1e-12
            if all(abs(y) >= 1.0 for _, y in f.atoms):
                assert n4 >= n2

    def test_order_validation(self):
        with pytest.raises(ValueError):
            fourier_norm(FourierSum.identity(), 3)

    def test_atom_merge(self):
        f = FourierSum.from_atoms([(1.0, 2.0), (2.0, 2.0), (-3.0, 2.0)])
        assert f.atoms == ()
