import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import exterior as ext
from helpers import rand_hermitian, rand_metric
from torusma import forms


@st.composite
def hermitian_matrices(draw, nmin=2, nmax=4):
    n = draw(st.integers(nmin, nmax))
    elems = st.floats(-3, 3, allow_nan=False)
    re = np.array([[draw(elems) for _ in range(n)] for _ in range(n)])
    im = np.array([[draw(elems) for _ in range(n)] for _ in range(n)])
    a = re + 1j * im
    return a + a.conj().T


class TestTracePair:
    def test_identity_case(self):
        for n in range(2, 6):
            assert forms.trace_pair(np.eye(n), np.eye(n)) == pytest.approx(n)

    def test_trace_of_metric_is_dimension(self):
        g = np.diag([1.0, 2.0, 3.0])
        assert forms.trace_pair(g, g) == pytest.approx(3.0)

    def test_direct_sum(self):
        assert forms.trace_pair(np.eye(3), np.diag([1.0, 2.0, 3.0])) == pytest.approx(6.0)

    def test_singular_metric_rejected(self):
        with pytest.raises(ValueError, match="metric not invertible"):
            forms.trace_pair(np.diag([1.0, 0.0]), np.eye(2))

    def test_real_within_tolerance(self):
        rng = np.random.default_rng(0)
        for n in (2, 3, 4):
            g, a = rand_metric(rng, n), rand_hermitian(rng, n)
            direct = np.einsum("ab,ba->", np.linalg.inv(g), a)
            assert abs(direct.imag) <= 1e-13 * max(1.0, abs(direct.real))
            assert forms.trace_pair(g, a) == pytest.approx(direct.real)


class TestWedgeInvariant:
    def test_metric_squared(self):
        rng = np.random.default_rng(1)
        for n in (2, 3, 4, 5):
            g = rand_metric(rng, n)
            assert forms.wedge11_invariant(g, g, g) == pytest.approx(n * (n - 1))

    def test_diagonal_example(self):
        got = forms.wedge11_invariant(np.eye(3), np.diag([1.0, 2, 3]), np.diag([4.0, 5, 6]))
        assert got == pytest.approx(58.0)

    def test_diagonal_cross_sum(self):
        # a = sum lam_i e_i, b = c * sum (1/alpha_j) e_j -> c * sum_{k != l} lam_k / alpha_l
        rng = np.random.default_rng(2)
        n = 4
        lam = rng.uniform(0.5, 2, n)
        alpha = rng.uniform(0.5, 2, n)
        c = 1.7
        want = c * sum(lam[k] / alpha[l] for k in range(n) for l in range(n) if k != l)
        got = forms.wedge11_invariant(np.eye(n), np.diag(lam), c * np.diag(1 / alpha))
        assert got == pytest.approx(want)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_against_exterior_oracle(self, n):
        rng = np.random.default_rng(10 + n)
        for _ in range(5):
            g, a, b = rand_metric(rng, n), rand_hermitian(rng, n), rand_hermitian(rng, n)
            top = ext.top_over_unit(ext.omega_power(g, n), n)
            f = ext.wedge_many([ext.from_matrix_11(a), ext.from_matrix_11(b)]
                               + [ext.from_matrix_11(g)] * (n - 2))
            brute = n * (n - 1) * ext.top_over_unit(f, n) / top
            assert forms.wedge11_invariant(g, a, b) == pytest.approx(brute.real, abs=1e-11)


class TestHodgeStar:
    def test_unit_diagonal_star(self):
        # *e_i is the product of the remaining e_j's
        for n in (2, 3, 4):
            for i in range(n):
                a = np.zeros((n, n))
                a[i, i] = 1.0
                psi = forms.hodge_star_11(np.eye(n), a)
                brute = ext.to_matrix_n1n1(ext.star(ext.from_matrix_11(a), np.eye(n), n, 1, 1), n)
                assert np.allclose(psi, brute, atol=1e-13)
                eprod = ext.wedge_many([{(1 << j, 1 << j): 1j} for j in range(n) if j != i])
                assert np.allclose(psi, ext.to_matrix_n1n1(eprod, n), atol=1e-13)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_roundtrip_involution(self, n):
        rng = np.random.default_rng(20 + n)
        for _ in range(10):
            g, a = rand_metric(rng, n), rand_hermitian(rng, n)
            back = forms.hodge_star_n1(g, forms.hodge_star_11(g, a))
            assert np.max(np.abs(back - a)) <= 1e-12 * max(1.0, np.max(np.abs(a)))

    def test_diagonal_power_star(self):
        alpha = np.array([1.0, 2.0, 3.0])
        psi = forms.wedge_power_n_minus_one(np.diag(alpha))
        h = forms.hodge_star_n1(np.eye(3), psi) / math.factorial(2)
        assert np.allclose(h, alpha.prod() * np.diag(1 / alpha), atol=1e-13)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_star_matches_oracle(self, n):
        rng = np.random.default_rng(30 + n)
        for _ in range(3):
            g, a = rand_metric(rng, n), rand_hermitian(rng, n)
            fast = forms.hodge_star_11(g, a)
            brute = ext.to_matrix_n1n1(ext.star(ext.from_matrix_11(a), g, n, 1, 1), n)
            assert np.max(np.abs(fast - brute)) <= 1e-11
            psi = rand_hermitian(rng, n)
            fast2 = forms.hodge_star_n1(g, psi)
            sform = ext.star(ext.from_matrix_n1n1(psi), g, n, n - 1, n - 1)
            brute2 = np.zeros((n, n), complex)
            for j in range(n):
                for k in range(n):
                    brute2[j, k] = sform.get((1 << j, 1 << k), 0.0) / 1j
            assert np.max(np.abs(fast2 - brute2)) <= 1e-11 * max(1.0, np.max(np.abs(brute2)))

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_wedge_with_omega_power_matches_oracle(self, n):
        rng = np.random.default_rng(40 + n)
        g, a = rand_metric(rng, n), rand_hermitian(rng, n)
        fast = forms.wedge_with_omega_power(g, a)
        brute_form = ext.wedge_many([ext.from_matrix_11(a)] + [ext.from_matrix_11(g)] * (n - 2))
        brute = ext.to_matrix_n1n1(brute_form, n)
        assert np.max(np.abs(fast - brute)) <= 1e-11 * max(1.0, np.max(np.abs(brute)))

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_pairing_matches_oracle(self, n):
        rng = np.random.default_rng(50 + n)
        g = rand_metric(rng, n)
        psi, x = rand_hermitian(rng, n), rand_hermitian(rng, n)
        fast = forms.pairing_over_volume(g, psi, x)
        brute = ext.top_over_unit(ext.wedge(ext.from_matrix_n1n1(psi), ext.from_matrix_11(x)), n) \
            / ext.top_over_unit(ext.omega_power(g, n), n)
        assert fast == pytest.approx(brute.real, abs=1e-11)


class TestDeterminantConvention:
    def test_identity(self):
        for n in (2, 3, 4):
            psi = forms.wedge_power_n_minus_one(np.eye(n))
            assert forms.det_form_top_minus_one(psi) == pytest.approx(1.0)

    def test_diag_example(self):
        psi = forms.wedge_power_n_minus_one(np.diag([1.0, 2.0, 3.0]))
        assert forms.det_form_top_minus_one(psi) == pytest.approx(36.0)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_random_metrics(self, n):
        rng = np.random.default_rng(60 + n)
        for _ in range(5):
            g = rand_metric(rng, n)
            want = np.linalg.det(g).real ** (n - 1)
            got = forms.det_form_top_minus_one(forms.wedge_power_n_minus_one(g))
            assert abs(got - want) <= 1e-12 * abs(want)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_wedge_power_matches_oracle(self, n):
        rng = np.random.default_rng(70 + n)
        g = rand_metric(rng, n)
        brute = ext.to_matrix_n1n1(ext.omega_power(g, n - 1), n)
        assert np.max(np.abs(brute - forms.wedge_power_n_minus_one(g))) <= 1e-11


class TestRoot:
    def test_root_of_own_power(self):
        rng = np.random.default_rng(80)
        for n in (2, 3, 4):
            g = rand_metric(rng, n)
            psi = forms.wedge_power_n_minus_one(g)
            assert np.allclose(forms.root_n_minus_one(g, psi), g, atol=1e-11)
            # the root does not depend on the metric argument
            assert np.allclose(forms.root_n_minus_one(np.eye(n), psi), g, atol=1e-11)

    def test_diag_example(self):
        w0 = np.diag([1.0, 2.0, 3.0])
        psi = forms.wedge_power_n_minus_one(w0)
        h = forms.hodge_star_n1(np.eye(3), psi) / math.factorial(2)
        assert np.allclose(h, np.diag([6.0, 3.0, 2.0]), atol=1e-13)
        assert np.linalg.det(h).real == pytest.approx(36.0)
        assert np.allclose(forms.root_n_minus_one(np.eye(3), psi), w0, atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_random_roundtrip(self, n):
        rng = np.random.default_rng(90 + n)
        for _ in range(10):
            s = rand_metric(rng, n)
            g = rand_metric(rng, n)
            psi = forms.wedge_power_n_minus_one(s)
            back = forms.root_n_minus_one(g, psi)
            assert np.max(np.abs(back - s)) <= 1e-11 * max(1.0, np.max(np.abs(s)))

    def test_negative_cone(self):
        with pytest.raises(forms.ConeError, match="form not in positive cone"):
            forms.root_n_minus_one(np.eye(3), np.diag([1.0, -1.0, 1.0]))


class TestPOperator:
    def test_zero_hessian(self):
        rng = np.random.default_rng(100)
        g, h = rand_metric(rng, 3), rand_metric(rng, 3)
        assert np.allclose(forms.updated_metric(g, h, np.zeros((3, 3))), h)

    def test_n2_diagonal_reduction(self):
        hess = np.diag([0.3, -0.1])
        gt = forms.updated_metric(np.eye(2), np.eye(2), hess)
        assert np.allclose(gt, np.diag([1 - 0.1, 1 + 0.3]))
        assert np.linalg.det(gt).real == pytest.approx(np.linalg.det(np.eye(2) + hess).real)

    def test_n2_trace_reversal_is_adjugate(self):
        rng = np.random.default_rng(101)
        h = rand_hermitian(rng, 2)
        adj = np.array([[h[1, 1], -h[0, 1]], [-h[1, 0], h[0, 0]]])
        assert np.allclose(forms.trace_reverse(np.eye(2), h), adj)

    @given(hermitian_matrices())
    @settings(max_examples=40, deadline=None)
    def test_trace_identity(self, hess):
        n = hess.shape[0]
        rng = np.random.default_rng(n)
        g, h = rand_metric(rng, n), rand_metric(rng, n)
        gt = forms.updated_metric(g, h, hess)
        lhs = forms.trace_pair(g, gt) - forms.trace_pair(g, h) - forms.trace_pair(g, hess)
        assert abs(lhs) <= 1e-13 * max(1.0, abs(forms.trace_pair(g, gt)))

    def test_n2_reduction_determinant(self):
        rng = np.random.default_rng(102)
        for _ in range(10):
            g, h = rand_metric(rng, 2), rand_metric(rng, 2)
            hess = rand_hermitian(rng, 2)
            lhs = np.linalg.det(forms.updated_metric(g, h, hess)).real
            rhs = np.linalg.det(forms.trace_reverse(g, h) + hess).real
            assert lhs == pytest.approx(rhs)


class TestPsh:
    def test_examples(self):
        assert forms.is_n_minus_one_psh(np.diag([-1.0, 1.0, 1.0]), tol=1e-12)
        assert not forms.is_n_minus_one_psh(np.diag([-2.0, 1.0, 1.0]), tol=1e-12)

    def test_psd_implies(self):
        rng = np.random.default_rng(110)
        for n in (2, 3, 4):
            b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            assert forms.is_n_minus_one_psh(b @ b.conj().T)

    @given(hermitian_matrices())
    @settings(max_examples=40, deadline=None)
    def test_equivalent_to_subset_enumeration(self, hess):
        n = hess.shape[0]
        tol = 1e-9
        eigs = np.linalg.eigvalsh(hess)
        lhs = forms.is_n_minus_one_psh(hess, tol=tol)
        rhs = forms.subset_sums_nonneg(eigs, n - 1, tol)
        if lhs != rhs:
            # the two paths may only disagree on the decision boundary itself
            worst = min(sum(c) for c in itertools.combinations(eigs.tolist(), n - 1))
            assert abs(worst + tol) <= 1e-12


class TestConeMargin:
    def test_examples(self):
        rng = np.random.default_rng(120)
        g = rand_metric(rng, 3)
        assert forms.cone_margin(g, g) == pytest.approx(1.0)
        assert forms.cone_margin(g, 2 * g) == pytest.approx(2.0)
        assert forms.cone_margin(np.eye(2), np.diag([3.0, 0.5])) == pytest.approx(0.5)

    def test_batched(self):
        rng = np.random.default_rng(121)
        g = rand_metric(rng, 2)
        batch = np.stack([g, 3 * g, 0.25 * g])
        np.testing.assert_allclose(forms.cone_margin(g, batch), [1.0, 3.0, 0.25], atol=1e-12)


class TestEtaTheta:
    def test_reversal_eigenvalue_relation(self):
        rng = np.random.default_rng(130)
        for n in (2, 3, 4):
            g, gt = rand_metric(rng, n), rand_metric(rng, n)
            lam = forms.generalized_eigenvalues(g, gt)
            mu = forms.generalized_eigenvalues(g, forms.trace_reverse_weighted(g, gt))
            want = np.sort(lam.sum() - (n - 1) * lam)
            np.testing.assert_allclose(mu, want, atol=1e-11 * max(1.0, lam.max()))

    def test_linearization_coefficients_positive(self):
        rng = np.random.default_rng(131)
        for n in (2, 3, 4):
            g, gt = rand_metric(rng, n), rand_metric(rng, n)
            w = forms.linearization_coefficients(g, gt)
            assert np.min(np.linalg.eigvalsh(forms.hermitize(w))) > 0


class TestCorrespondenceWithOracle:
    """The star carries the (n-1,n-1) description of the equation to the
    (1,1) description; checked with the left side evaluated brute-force."""

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_identity(self, n):
        rng = np.random.default_rng(140 + n)
        fac = math.factorial(n - 1)
        for _ in range(3):
            g, w0 = rand_metric(rng, n), rand_metric(rng, n)
            hess = rand_hermitian(rng, n)
            psi0_form = ext.omega_power(w0, n - 1)
            hess_form = ext.wedge_many([ext.from_matrix_11(hess)]
                                       + [ext.from_matrix_11(g)] * (n - 2))
            tot = {k: v / fac for k, v in psi0_form.items()}
            for key, val in hess_form.items():
                tot[key] = tot.get(key, 0.0) + val / fac
            lhs_form = ext.star(tot, g, n, n - 1, n - 1)
            lhs = np.zeros((n, n), complex)
            for j in range(n):
                for k in range(n):
                    lhs[j, k] = lhs_form.get((1 << j, 1 << k), 0.0) / 1j
            h = forms.hodge_star_n1(g, forms.wedge_power_n_minus_one(w0)) / fac
            rhs = forms.updated_metric(g, h, hess)
            assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))


class TestHermitize:
    @given(hermitian_matrices())
    @settings(max_examples=30, deadline=None)
    def test_idempotent(self, a):
        one = forms.hermitize(a + 1e-16j * np.eye(a.shape[0]))
        assert forms.is_hermitian(one)
        assert np.allclose(forms.hermitize(one), one)

    def test_absorbs_ulp_asymmetry(self):
        a = np.array([[1.0, 0.5 + 1e-16j], [0.5, 2.0]])
        assert forms.is_hermitian(forms.hermitize(a))
