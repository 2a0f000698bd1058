import numpy as np
import pytest

from toda_gge.core import (
    ChainParams,
    FlaschkaState,
    SizeError,
    conserved_traces,
    flow,
    hamiltonian,
    lax_matrix,
)


def random_state(n, rng, spread=1.0):
    return FlaschkaState(a=np.exp(spread * rng.normal(size=n)), b=rng.normal(size=n))


class TestLaxMatrix:
    def test_symmetric_circulant_plus(self):
        st = FlaschkaState(a=np.ones(3), b=np.zeros(3))
        m = lax_matrix(st, +1)
        assert np.array_equal(m, np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=float))

    def test_corner_sign_minus(self):
        st = FlaschkaState(a=np.ones(3), b=np.zeros(3))
        m = lax_matrix(st, -1)
        expected = np.array([[0, 1, -1], [1, 0, 1], [-1, 1, 0]], dtype=float)
        assert np.array_equal(m, expected)

    def test_eigenvalues_match_dense_oracle(self):
        st = FlaschkaState(a=[1.0, 0.5, 2.0, 0.8], b=[0.3, -0.1, 0.4, -0.6])
        m = lax_matrix(st, +1)
        # oracle: assemble the matrix entry by entry, independent of lax_matrix
        n = 4
        dense = np.zeros((n, n))
        for j in range(n - 1):
            dense[j, j] = st.b[j]
            dense[j, j + 1] = dense[j + 1, j] = st.a[j]
        dense[n - 1, n - 1] = st.b[-1]
        dense[0, n - 1] = dense[n - 1, 0] = st.a[-1]
        assert np.allclose(np.linalg.eigvalsh(m), np.linalg.eigvalsh(dense), rtol=0, atol=1e-14)

    def test_n2_corner_overlap_sums(self):
        st = FlaschkaState(a=[2.0, 0.5], b=[0.0, 0.0])
        assert lax_matrix(st, +1)[0, 1] == 2.5
        assert lax_matrix(st, -1)[0, 1] == 1.5

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        st = random_state(6, rng)
        for sign in (+1, -1):
            m = lax_matrix(st, sign)
            assert np.array_equal(m, m.T)

    def test_too_small(self):
        with pytest.raises(SizeError):
            FlaschkaState(a=[1.0], b=[0.0])


class TestHamiltonian:
    def test_all_ones(self):
        assert hamiltonian(FlaschkaState(a=np.ones(3), b=np.zeros(3))) == 3.0

    def test_two_site_value(self):
        assert hamiltonian(FlaschkaState(a=[2.0, 1.0], b=[1.0, -1.0])) == 6.0

    def test_trace_identity(self):
        # tr(L+^2) = sum b^2 + 2 sum a^2 whenever corners do not overlap (N >= 3)
        rng = np.random.default_rng(1)
        for n in (3, 5, 8):
            st = random_state(n, rng)
            tr2 = np.trace(lax_matrix(st, +1) @ lax_matrix(st, +1))
            expected = np.sum(st.b**2) + 2 * np.sum(st.a**2)
            assert abs(tr2 - expected) <= 1e-12 * abs(expected)

    def test_hamiltonian_from_trace(self):
        # consequence of the trace identity: H = tr(L+^2) / 2 for N >= 3
        rng = np.random.default_rng(2)
        st = random_state(5, rng)
        tr2 = np.trace(np.linalg.matrix_power(lax_matrix(st, +1), 2))
        assert np.isclose(hamiltonian(st), 0.5 * tr2, rtol=1e-12)


class TestFlow:
    def test_zero_time_identity(self):
        rng = np.random.default_rng(3)
        st = random_state(5, rng)
        out = flow(st, 0.0, 1e-10)
        assert np.array_equal(out.a, st.a)
        assert np.array_equal(out.b, st.b)

    def test_isospectral(self):
        rng = np.random.default_rng(4)
        st = random_state(8, rng, spread=0.3)
        out = flow(st, 5.0, 1e-10)
        for sign in (+1, -1):
            lam0 = np.linalg.eigvalsh(lax_matrix(st, sign))
            lam1 = np.linalg.eigvalsh(lax_matrix(out, sign))
            scale = np.max(np.abs(lam0))
            assert np.max(np.abs(lam1 - lam0)) <= 1e-8 * scale

    def test_leaf_invariants(self):
        rng = np.random.default_rng(5)
        st = random_state(8, rng, spread=0.3)
        out = flow(st, 5.0, 1e-10)
        assert abs(np.sum(out.b) - np.sum(st.b)) <= 1e-10 * max(1, abs(np.sum(st.b)))
        assert abs(np.prod(out.a) / np.prod(st.a) - 1.0) <= 1e-10

    def test_positivity_preserved(self):
        rng = np.random.default_rng(6)
        st = random_state(6, rng, spread=0.8)
        out = flow(st, 3.0, 1e-9)
        assert np.all(out.a > 0)

    def test_time_reversal(self):
        rng = np.random.default_rng(7)
        st = random_state(4, rng, spread=0.2)
        back = flow(flow(st, 1.5, 1e-11), -1.5, 1e-11)
        assert np.allclose(back.a, st.a, rtol=1e-7)
        assert np.allclose(back.b, st.b, rtol=0, atol=1e-7)


class TestConservedTraces:
    def test_first_trace_zero(self):
        st = FlaschkaState(a=np.ones(3), b=np.zeros(3))
        assert abs(conserved_traces(st, 1)[0]) < 1e-12

    def test_second_trace(self):
        st = FlaschkaState(a=np.ones(3), b=np.zeros(3))
        assert np.isclose(conserved_traces(st, 2)[1], 6.0, rtol=1e-12)

    def test_traces_conserved_under_flow(self):
        rng = np.random.default_rng(8)
        st = random_state(6, rng, spread=0.3)
        t0 = conserved_traces(st, 3)
        t1 = conserved_traces(flow(st, 2.0, 1e-11), 3)
        assert np.max(np.abs(t1 - t0) / np.maximum(np.abs(t0), 1.0)) <= 1e-8


class TestChainParams:
    def test_eps_definition(self):
        p = ChainParams(n=16, ell=1.0)
        assert p.eps == np.exp(-8.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ChainParams(n=4, ell=-1.0)
        with pytest.raises(SizeError):
            ChainParams(n=1, ell=1.0)
