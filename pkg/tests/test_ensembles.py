import math

import numpy as np
import pytest

from ncfree.ensembles import (EnsembleSpec, EntryLaw, SeedStream,
                              entry_moment_report, goe, gue, interpolate,
                              sample, wigner)


class TestEntryLaw:
    def test_builtin_moments(self):
        g = EntryLaw("gaussian")
        assert g.moment(2) == 1.0
        assert g.moment(4) == 3.0
        assert g.moment(6) == 15.0
        assert g.moment(3) == 0.0
        r = EntryLaw("rademacher")
        assert r.moment(2) == 1.0 and r.moment(4) == 1.0
        u = EntryLaw("uniform")
        assert abs(u.moment(2) - 1.0) < 1e-15
        assert abs(u.moment(4) - 9.0 / 5.0) < 1e-14

    def test_uniform_moment_quadrature_oracle(self):
        from scipy.integrate import quad
        u = EntryLaw("uniform")
        s = math.sqrt(3)
        for p in (2, 4, 6, 8):
            val, _ = quad(lambda x: x**p / (2 * s), -s, s)
            assert abs(u.moment(p) - val) < 1e-10

    def test_custom_validation(self):
        EntryLaw("custom", (-1.0, 1.0), (0.5, 0.5))
        with pytest.raises(ValueError):
            EntryLaw("custom", (-1.0, 2.0), (0.5, 0.5))  # mean 0.5
        with pytest.raises(ValueError):
            EntryLaw("custom", (-2.0, 2.0), (0.5, 0.5))  # variance 4
        with pytest.raises(ValueError):
            EntryLaw("custom", (1.0,), (0.9,))  # not a distribution
        with pytest.raises(ValueError):
            EntryLaw("cauchy")

    def test_draw_laws(self):
        gen = SeedStream(1).generator()
        r = EntryLaw("rademacher").draw(gen, 1000)
        assert set(np.unique(r)) == {-1.0, 1.0}
        u = EntryLaw("uniform").draw(gen, 1000)
        assert np.all(np.abs(u) <= math.sqrt(3))


class TestSample:
    def test_determinism(self):
        st = SeedStream(99, experiment=2, sample=5, matrix=1)
        a = sample(gue(32), st)
        b = sample(gue(32), st)
        assert np.array_equal(a, b)
        c = sample(wigner(16, EntryLaw("rademacher")), st)
        d = sample(wigner(16, EntryLaw("rademacher")), st)
        assert np.array_equal(c, d)

    def test_distinct_coordinates_differ(self):
        st = SeedStream(99)
        a = sample(gue(16), st)
        assert not np.array_equal(a, sample(gue(16), st.with_coords(sample=1)))
        assert not np.array_equal(a, sample(gue(16), st.with_coords(matrix=1)))
        assert not np.array_equal(
            a, sample(gue(16), st.with_coords(experiment=1)))

    def test_hermitian_exact(self):
        H = sample(gue(24), SeedStream(3))
        assert np.array_equal(H, H.conj().T)
        S = sample(goe(24), SeedStream(3))
        assert np.array_equal(S, S.T)
        W = sample(wigner(24, EntryLaw("uniform"), "hermitian"), SeedStream(3))
        assert np.array_equal(W, W.conj().T)

    def test_gue_entry_variances(self):
        # fixed (0,1) and (2,2) entries over many independent draws
        N, k = 8, 4000
        off = np.empty(k, complex)
        dia = np.empty(k)
        for s in range(k):
            X = sample(gue(N), SeedStream(7, sample=s))
            off[s] = X[0, 1]
            dia[s] = X[2, 2].real
        v = np.abs(off) ** 2
        se = v.std(ddof=1) / math.sqrt(k)
        assert abs(v.mean() - 1.0 / N) <= 3 * se
        v = dia**2
        se = v.std(ddof=1) / math.sqrt(k)
        assert abs(v.mean() - 1.0 / N) <= 3 * se

    def test_goe_diagonal_variance(self):
        N, k = 8, 4000
        dia = np.array([sample(goe(N), SeedStream(8, sample=s))[1, 1]
                        for s in range(k)])
        v = dia**2
        se = v.std(ddof=1) / math.sqrt(k)
        assert abs(v.mean() - 2.0 / N) <= 3 * se

    def test_rademacher_offdiag_exact(self):
        N = 16
        W = sample(wigner(N, EntryLaw("rademacher")), SeedStream(5))
        off = W[~np.eye(N, dtype=bool)]
        assert np.all(np.isin(off * math.sqrt(N), [-1.0, 1.0]))

    def test_independence_proxy(self):
        k = 4000
        a = np.empty(k)
        b = np.empty(k)
        for s in range(k):
            a[s] = sample(goe(4), SeedStream(6, sample=s))[0, 1]
            b[s] = sample(goe(4), SeedStream(6, sample=s, matrix=1))[0, 1]
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) <= 4 / math.sqrt(k)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            EnsembleSpec(0, "hermitian")
        with pytest.raises(ValueError):
            EnsembleSpec(4, "upper")
        with pytest.raises(ValueError):
            EnsembleSpec(4, "hermitian", diag_variance=0.0)


class TestInterpolate:
    def test_endpoints(self):
        Y = sample(gue(12), SeedStream(1))
        X = sample(gue(12), SeedStream(2))
        assert np.array_equal(interpolate(Y, X, 0.0), Y)
        assert np.allclose(interpolate(Y, X, 1e3), X, atol=1e-300)

    def test_variance_weights(self):
        for t in (0.1, 1.0, 5.0):
            assert abs(math.exp(-t) + (1 - math.exp(-t)) - 1.0) < 1e-15

    def test_hermitian_preserved(self):
        Y = sample(gue(12), SeedStream(3))
        X = sample(gue(12), SeedStream(4))
        Z = interpolate(Y, X, 0.7)
        assert np.max(np.abs(Z - Z.conj().T)) == 0.0

    def test_errors(self):
        with pytest.raises(ValueError):
            interpolate(np.eye(2), np.eye(3), 1.0)
        with pytest.raises(ValueError):
            interpolate(np.eye(2), np.eye(2), -0.5)


class TestMomentReport:
    def test_gue_offdiag_p2(self):
        rep = entry_moment_report(gue(64), 2, 100_000, SeedStream(11))
        assert abs(rep.offdiag_mean - 1.0) <= 3 * rep.offdiag_se

    def test_symmetric_gaussian_p4(self):
        rep = entry_moment_report(goe(64), 4, 100_000, SeedStream(12))
        assert abs(rep.offdiag_mean - 3.0) <= 3 * rep.offdiag_se

    def test_rademacher_p4_exact(self):
        spec = wigner(64, EntryLaw("rademacher"), diag_variance=1.0)
        rep = entry_moment_report(spec, 4, 1000, SeedStream(13))
        assert rep.offdiag_mean == 1.0 and rep.offdiag_se == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            entry_moment_report(gue(8), 3, 100, SeedStream(0))
        with pytest.raises(ValueError):
            entry_moment_report(gue(8), 14, 100, SeedStream(0))
