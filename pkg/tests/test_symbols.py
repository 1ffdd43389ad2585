import numpy as np
import pytest

from kjflow.symbols import (
    SymbolPoint,
    apply_S_multiplier,
    case_bound,
    corrected_case_b_bound,
    eval_D,
    eval_M,
    eval_m_factored,
    verify_multiplier_bounds,
)

rng = np.random.default_rng(11)


class TestSymbolPoint:
    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            SymbolPoint(alpha=0.0, beta=0.0, eta_x=1.0)

    def test_rejects_supersonic(self):
        with pytest.raises(ValueError):
            SymbolPoint(alpha=1.0, beta=0.0, eta_x=1.0, U=1.0)

    def test_z_u_derived(self):
        p = SymbolPoint(alpha=1.0, beta=2.0, eta_x=3.0, U=0.5)
        assert p.z_U == 2.0 + 0.5 * 3.0


class TestEvalD:
    def test_eta_zero(self):
        p = SymbolPoint(alpha=1.0, beta=0.0, eta_x=0.0, U=0.3)
        assert abs(eval_D(p) - 1.0) < 1e-14

    def test_unit_eta_no_flow(self):
        p = SymbolPoint(alpha=1.0, beta=0.0, eta_x=1.0, U=0.0)
        assert abs(eval_D(p) - 2.0) < 1e-14

    def test_general_point(self):
        # tau = 1+i, eta_x = 2, U = 0.5:
        # (tau + i)^2 + 4 = (1+2i)^2 + 4 = 1 + 4i
        p = SymbolPoint(alpha=1.0, beta=1.0, eta_x=2.0, U=0.5)
        assert abs(eval_D(p) - (1 + 4j)) < 1e-13

    def test_split_form_random(self):
        for _ in range(50):
            p = SymbolPoint(
                alpha=float(rng.uniform(0.1, 5)),
                beta=float(rng.uniform(-10, 10)),
                eta_x=float(rng.uniform(-20, 20)),
                eta_y=float(rng.uniform(-20, 20)),
                U=float(rng.uniform(0, 0.99)),
            )
            eval_D(p)  # internal split-form assertion


class TestFactorization:
    def test_eta_zero_m_is_minus_one(self):
        for beta, U in ((0.0, 0.0), (3.0, 0.5), (-2.0, 0.9)):
            p = SymbolPoint(alpha=1.3, beta=beta, eta_x=0.0, U=U)
            rec = eval_m_factored(p)
            assert rec.degenerate
            assert rec.j is None and rec.S is None
            assert abs(rec.m + 1.0) < 1e-13

    def test_j_sign(self):
        rec = eval_m_factored(SymbolPoint(alpha=1.0, beta=0.0, eta_x=-3.0))
        assert abs(rec.j - 1j) < 1e-15
        rec = eval_m_factored(SymbolPoint(alpha=1.0, beta=0.0, eta_x=3.0))
        assert abs(rec.j + 1j) < 1e-15

    def test_simple_point(self):
        rec = eval_m_factored(SymbolPoint(alpha=1.0, beta=0.0, eta_x=1.0, U=0.0))
        assert abs(rec.m + np.sqrt(2)) < 1e-13
        assert abs(rec.j * rec.S - rec.m) < 1e-12

    def test_identity_on_grid(self):
        for _ in range(200):
            p = SymbolPoint(
                alpha=float(rng.uniform(0.1, 10)),
                beta=float(rng.uniform(-100, 100)),
                eta_x=float(rng.uniform(-100, 100)),
                eta_y=float(rng.uniform(-5, 5)),
                U=float(rng.uniform(0, 0.99)),
            )
            if p.eta_x == 0:
                continue
            rec = eval_m_factored(p)
            assert not rec.branch_ambiguous
            assert abs(rec.j * rec.S - rec.m) < 1e-12 * max(1, abs(rec.m))

    def test_principal_branch(self):
        # Re sqrt(D) >= 0 is equivalent to Re(-m * (tau + i U eta_x)) >= 0
        for _ in range(100):
            p = SymbolPoint(
                alpha=float(rng.uniform(0.1, 10)),
                beta=float(rng.uniform(-50, 50)),
                eta_x=float(rng.uniform(-50, 50)),
                U=float(rng.uniform(0, 0.99)),
            )
            rec = eval_m_factored(p)
            root = -rec.m * (p.tau + 1j * p.U * p.eta_x)
            assert root.real >= 0

    def test_reality_symmetry_at_U0(self):
        # |m| invariant under (beta, eta_x) -> (-beta, -eta_x) at U = 0
        for _ in range(50):
            alpha = float(rng.uniform(0.1, 5))
            beta = float(rng.uniform(-20, 20))
            eta = float(rng.uniform(0.1, 20))
            m1 = eval_m_factored(SymbolPoint(alpha, beta, eta)).m
            m2 = eval_m_factored(SymbolPoint(alpha, -beta, -eta)).m
            assert abs(abs(m1) - abs(m2)) < 1e-12


class TestEvalM:
    def test_case_a_example(self):
        p = SymbolPoint(alpha=1.0, beta=0.0, eta_x=2.0, U=0.0)  # z_U = 0
        rec = eval_M(p)
        assert rec.case == "A"
        assert abs(rec.M) < (2.0 / 5.0) ** 0.25

    def test_case_b_example(self):
        p = SymbolPoint(alpha=1.0, beta=1.0, eta_x=1.0, U=0.0)  # z_U = 1 = eta
        rec = eval_M(p)
        assert rec.case == "B"
        assert abs(rec.M) <= (5 + 8) ** 0.25

    def test_case_c_example(self):
        p = SymbolPoint(alpha=1.0, beta=5.0, eta_x=1.0, U=0.0)  # z_U = 5
        rec = eval_M(p)
        assert rec.case == "C"
        assert abs(rec.M) < (81.0 / 2.0) ** 0.25

    def test_ties_go_to_b(self):
        assert eval_M(SymbolPoint(1.0, 1.0, 2.0)).case == "B"  # |z_U| = eta/2
        assert eval_M(SymbolPoint(1.0, 2.0, 1.0)).case == "B"  # |z_U| = 2 eta
        assert eval_M(SymbolPoint(1.0, 0.0, 0.0)).case == "B"

    def test_rejects_2d(self):
        with pytest.raises(ValueError):
            eval_M(SymbolPoint(1.0, 0.0, 1.0, eta_y=1.0))

    def test_m_definition_consistency(self):
        # |M| = 1/(|S| (1+eta^2)^{1/4}) with S evaluated at tau = alpha + i beta,
        # U folded into z_U = beta (U=0 here so z_U = beta directly)
        for _ in range(30):
            p = SymbolPoint(
                alpha=float(rng.uniform(0.1, 5)),
                beta=float(rng.uniform(-10, 10)),
                eta_x=float(rng.uniform(0.1, 10)),
                U=0.0,
            )
            rec = eval_m_factored(p)
            M = eval_M(p).M
            assert abs(abs(M) - 1.0 / (abs(rec.S) * (1 + p.eta_x**2) ** 0.25)) < 1e-12


class TestBoundCertification:
    def test_small_grid_corrected_passes(self):
        rep = verify_multiplier_bounds(resolution=40)
        assert rep.violations_corrected == 0
        assert rep.passed_corrected

    def test_printed_case_b_constant_fails_at_small_alpha(self):
        # counterexample: alpha = 0.1, eta = z_U = 10 sits in the middle
        # region with |M| ~ 2.23 above the stated (5 + 8 alpha^2)^{1/4} ~ 1.50
        rep = verify_multiplier_bounds(
            alpha_range=(0.1, 0.1), eta_range=(10, 10), z_u_range=(10, 10), resolution=1
        )
        assert rep.violations_printed == 1
        assert rep.violations_corrected == 0

    def test_cases_a_c_printed_bounds_hold(self):
        rep = verify_multiplier_bounds(resolution=40)
        # every printed-bound violation is a middle-region point
        for (_, _, _, case, _, _, margin) in rep.worst_points:
            if margin < -1e-12:
                assert case == "B"

    def test_fitted_constants_sane(self):
        rep = verify_multiplier_bounds(resolution=30)
        assert 0 < rep.fitted_C < 10
        assert rep.fitted_c > 0

    def test_bound_scale_hook(self):
        rep = verify_multiplier_bounds(resolution=20, bound_scale=1e-3)
        assert rep.violations_corrected > 0

    def test_corrected_dominates_printed_only_for_small_alpha(self):
        assert corrected_case_b_bound(2.0) < (5 + 8 * 4.0) ** 0.25
        assert corrected_case_b_bound(0.1) > (5 + 8 * 0.01) ** 0.25

    def test_degenerate_eta_zero_slice(self):
        rep = verify_multiplier_bounds(
            eta_range=(0.0, 0.0), z_u_range=(1.0, 50.0), resolution=25
        )
        assert rep.violations_printed == 0
        assert rep.case_counts["C"] == rep.n_points


class TestApplyS:
    def setup_method(self):
        n = 256
        self.eta = 2 * np.pi * np.fft.fftfreq(n, d=16.0 / n)

    def test_zero_input(self):
        out = apply_S_multiplier(np.zeros_like(self.eta, dtype=complex), self.eta, 1 + 0j, 0.5)
        assert np.all(out == 0)

    def test_round_trip(self):
        data = rng.standard_normal(self.eta.shape) + 1j * rng.standard_normal(self.eta.shape)
        mid = apply_S_multiplier(data, self.eta, 1 + 2j, 0.5)
        back = apply_S_multiplier(mid, self.eta, 1 + 2j, 0.5, inverse=True)
        assert np.max(np.abs(back - data)) < 1e-12 * np.max(np.abs(data))

    def test_eta_zero_mode_is_minus_one(self):
        data = np.ones_like(self.eta, dtype=complex)
        out = apply_S_multiplier(data, self.eta, 1 + 0j, 0.3)
        i0 = int(np.argmin(np.abs(self.eta)))
        assert abs(out[i0] + 1.0) < 1e-14

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            apply_S_multiplier(np.zeros(5, dtype=complex), self.eta, 1 + 0j, 0.0)
