import math

import numpy as np
import pytest

from helpers import manufactured_n2, manufactured_n3
from torusma import forms, solver, verify
from torusma.fields import ScalarField, TorusGrid, constant_matrix_field


@pytest.fixture(scope="module")
def solved_n2():
    spec, u_star = manufactured_n2(N=8)
    state, _ = solver.continuity_solve(spec)
    return spec, state


class TestIdentityChecks:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_all_pass(self, n):
        for fn in verify.IDENTITY_CHECKS:
            rep = fn(n, trials=200, seed=99)
            assert rep.passed, f"{rep.check_name}: {rep.max_residual}"

    def test_cancellation_trivial_case(self):
        # g = I, w0 = omega: n^2 - (n^2 - n) - n = 0 term by term
        for n in (2, 3, 4):
            g = np.eye(n)
            fac = math.factorial(n - 1)
            wh = forms.hodge_star_n1(g, forms.wedge_power_n_minus_one(g)) / fac
            t1 = forms.trace_pair(g, g) * forms.trace_pair(g, wh)
            t2 = forms.wedge11_invariant(g, g, wh)
            t3 = forms.trace_pair(g, g) * 1.0
            assert t1 == pytest.approx(n * n)
            assert t2 == pytest.approx(n * n - n)
            assert t3 == pytest.approx(n)
            assert t1 - t2 - t3 == pytest.approx(0.0, abs=1e-12)

    def test_cancellation_hand_case_n3(self):
        # g = I, w0 = diag(1,2,3), wt = I: 33 - 22 - 11 = 0
        g = np.eye(3)
        w0 = np.diag([1.0, 2.0, 3.0])
        wt = np.eye(3)
        fac = math.factorial(2)
        wh = forms.hodge_star_n1(g, forms.wedge_power_n_minus_one(w0)) / fac
        t1 = forms.trace_pair(g, wt) * forms.trace_pair(g, wh)
        t2 = forms.wedge11_invariant(g, wt, wh)
        t3 = forms.trace_pair(w0, wt) * np.linalg.det(w0).real
        assert (t1, t2, t3) == (pytest.approx(33.0), pytest.approx(22.0), pytest.approx(11.0))

    def test_suite_runner(self):
        reports = verify.run_identity_suite(dims=(2, 3), trials=50, seed=5)
        assert len(reports) == len(verify.IDENTITY_CHECKS) * 2
        assert all(r.passed for r in reports)


class TestReportSerialization:
    def test_jsonl_deterministic(self, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        verify.write_jsonl(verify.run_identity_suite(dims=(2,), trials=50, seed=7), p1)
        verify.write_jsonl(verify.run_identity_suite(dims=(2,), trials=50, seed=7), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_json_fields(self):
        rep = verify.check_wedge_trace_cancellation(2, trials=10, seed=1)
        import json

        payload = json.loads(rep.to_json())
        assert set(payload) == {"check_name", "instances", "max_residual", "pass", "notes"}
        assert payload["pass"] is True

    def test_summary_table_format(self):
        reps = [verify.check_wedge_trace_cancellation(2, trials=10, seed=1)]
        table = verify.summary_table(reps)
        assert "wedge_trace_cancellation" in table and "PASS" in table


class TestSolutionChecks:
    def test_all_pass_on_manufactured(self, solved_n2):
        spec, state = solved_n2
        reports = verify.run_solution_checks(state, spec)
        for rep in reports:
            assert rep.passed, f"{rep.check_name}: {rep.max_residual} {rep.notes}"

    def test_ma1_fww_trivial(self):
        spec, _ = manufactured_n2(N=8)
        u0 = ScalarField(spec.grid, np.zeros(spec.grid.shape))
        rep = verify.check_dual_form_equivalence(u0, spec)
        assert rep.passed

    def test_corollary_trivial(self):
        grid = TorusGrid(n=3, N=8, axes=(0,))
        g = np.eye(3)
        spec = solver.ProblemSpec(grid, g, constant_matrix_field(grid, g),
                                  ScalarField(grid, np.zeros(grid.shape)))
        u0 = ScalarField(grid, np.zeros(grid.shape))
        rep = verify.check_root_volume_ratio(u0, 0.0, spec, ScalarField(grid, np.zeros(grid.shape)))
        assert rep.passed and rep.max_residual < 1e-12

    def test_corollary_constant_shift_moves_b(self):
        # replacing F' by F' + c shifts b' by -c while u is unchanged
        spec, _ = manufactured_n2(N=8)
        n = spec.grid.n
        c = 0.25
        state1, _ = solver.continuity_solve(spec)
        spec2 = solver.ProblemSpec(spec.grid, spec.g, spec.h,
                                   ScalarField(spec.grid, spec.F.values + (n - 1) * c))
        state2, _ = solver.continuity_solve(spec2)
        assert np.max(np.abs(state1.u.values - state2.u.values)) <= 1e-9
        bprime1 = state1.b / (n - 1)
        bprime2 = state2.b / (n - 1)
        assert bprime2 - bprime1 == pytest.approx(-c, abs=1e-10)

    def test_lemma32_zero_solution(self):
        spec, _ = manufactured_n2(N=8)
        grid = spec.grid
        g = np.eye(2)
        flat = solver.ProblemSpec(grid, g, constant_matrix_field(grid, g),
                                  ScalarField(grid, np.zeros(grid.shape)))
        u0 = ScalarField(grid, np.zeros(grid.shape))
        rep = verify.check_hessian_wedge_sup(u0, flat)
        assert rep.passed
        assert "sup_field=0.0" in rep.notes

    def test_cherrier_zero_solution(self):
        grid = TorusGrid(n=2, N=8, axes=(0, 2))
        g = np.eye(2)
        spec = solver.ProblemSpec(grid, g, constant_matrix_field(grid, g),
                                  ScalarField(grid, np.zeros(grid.shape)))
        rep = verify.check_gradient_integral_ratios(ScalarField(grid, np.zeros(grid.shape)), spec)
        assert rep.passed
        assert "max_p R(p)=0.0" in rep.notes

    def test_second_order_u_zero_trace_match(self):
        # at u = 0 the metric trace of the update equals that of h everywhere
        grid = TorusGrid(n=2, N=8, axes=(0, 2))
        g = np.eye(2)
        x = grid.coordinate(0)
        h = constant_matrix_field(grid, 1.5 * np.eye(2))
        spec = solver.ProblemSpec(grid, g, h, ScalarField(grid, np.zeros(grid.shape)))
        rep = verify.check_second_order_quantities(ScalarField(grid, np.zeros(grid.shape)), spec)
        assert rep.passed
        assert "sup_tr=3.0" in rep.notes

    def test_uniqueness_check(self):
        spec, _ = manufactured_n2(N=8)
        rep = verify.check_comparison_uniqueness(spec, seed=3)
        assert rep.passed, rep.notes

    def test_b_bounds_check(self, solved_n2):
        spec, state = solved_n2
        rep = verify.check_b_bounds(state, spec)
        assert rep.passed


class TestSamplers:
    def test_hermitian_and_metric(self):
        rng = np.random.default_rng(11)
        a = verify.random_hermitian(rng, 4)
        assert forms.is_hermitian(a)
        m = verify.random_metric(rng, 4, batch=(10,))
        assert np.min(np.linalg.eigvalsh(m)) > 0
