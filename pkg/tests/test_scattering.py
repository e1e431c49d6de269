"""Frobenius branches, interior solver and Q-curvature extraction."""

import math
import random
from fractions import Fraction as Fr

import numpy as np
import pytest

from hkcce.model_geometry import ModelSpace
from hkcce.scattering import (MatchingError, ResonanceError, default_match_T,
                              frobenius_branch, frobenius_coefficients,
                              lee_potential_exact, match_and_q, solve_case,
                              solve_interior)
from hkcce.special_fn import QCurvParams, sphere_q_value


class TestFrobeniusCoefficients:
    def test_a2_reference_case(self):
        # u2 = (n-2g)/(8(1-g)) * J with J = nk/2: for n=4, g=1/2, k=1 -> 3/2
        p = QCurvParams(4, 0.5, 1.0)
        b = frobenius_branch(p, p.n - p.s)
        assert b.coeffs[1] == pytest.approx(1.5, rel=1e-14)

    def test_formal_k_zero(self):
        a = frobenius_coefficients(4, 2.75, 0.0, 1.25, 6)
        assert a[0] == 1.0
        assert all(c == 0.0 for c in a[1:])

    def test_lee_branch_terminates(self):
        # s = n+1, mu = -1: r V = 1 + (k/4) r^2 exactly, all higher terms zero
        a = frobenius_coefficients(5, Fr(6), Fr(1), Fr(-1), 4)
        assert a == [Fr(1), Fr(1, 4), Fr(0), Fr(0), Fr(0)]

    def test_lee_resonance_even_n(self):
        with pytest.raises(ResonanceError):
            frobenius_coefficients(4, 5.0, 1.0, -1.0, 4)
        # below the resonant step it is fine
        frobenius_coefficients(4, 5.0, 1.0, -1.0, 2)

    @pytest.mark.parametrize("seed", range(5))
    def test_u2_exact_rational(self, seed):
        rng = random.Random(seed)
        n = rng.randint(3, 9)
        gamma = Fr(rng.randint(1, 18), 20)
        k = Fr(rng.randint(1, 9), rng.randint(1, 9))
        s = Fr(n, 2) + gamma
        a = frobenius_coefficients(n, s, k, n - s, 2)
        assert a[1] == n * k * (n - 2 * gamma) / (16 * (1 - gamma))

    def test_recursion_residual(self):
        for gamma in (0.25, 0.6, 0.95):
            p = QCurvParams(5, gamma, 2.0)
            for mu in (p.s, p.n - p.s):
                assert frobenius_branch(p, mu).recursion_residual() <= 1e-13

    def test_mu_must_be_indicial(self):
        p = QCurvParams(4, 0.5, 1.0)
        with pytest.raises(ValueError):
            frobenius_branch(p, 1.0)

    def test_branch_evaluation_against_closed_form(self):
        # gamma = 1/2, n = 4, k = 1: u = r^{3/2} (1 + r/2)^{-3}, so the
        # mu = n-s branch series is the even part of (1+r/2)^{-3}
        p = QCurvParams(4, 0.5, 1.0)
        b = frobenius_branch(p, p.n - p.s, order=14)
        for r in (0.05, 0.2, 0.4):
            even_part = 0.5 * ((1 + r / 2) ** -3 + (1 - r / 2) ** -3)
            assert float(b.series(r)) == pytest.approx(even_part, rel=1e-13)


class TestInteriorSolve:
    def test_taylor_start_values(self):
        p = QCurvParams(4, 0.5, 1.0)
        prof = solve_interior(p, 1e-8)
        u0, du0 = prof.evaluate(prof.tau0)
        # u ~ 1 - lam tau^2 / (2(n+1))
        assert u0[0] - 1.0 == pytest.approx(-p.lam * prof.tau0 ** 2 / 10.0, rel=1e-5)
        assert du0[0] / prof.tau0 == pytest.approx(-p.lam / 5.0, rel=1e-5)

    def test_tolerance_precondition(self):
        with pytest.raises(ValueError):
            solve_interior(QCurvParams(4, 0.5, 1.0), 1e-13)

    def test_closure_residual(self):
        p = QCurvParams(5, 0.4, 1.0)
        prof = solve_interior(p, 1e-8)
        assert prof.closure_residual() <= 1e-10

    def test_grid_is_increasing(self):
        prof = solve_interior(QCurvParams(4, 0.25, 1.0), 1e-8)
        assert np.all(np.diff(prof.tau) > 0)

    def test_lee_profile_is_scaled_cosh(self):
        m = ModelSpace(5, 2.0)
        vp = lee_potential_exact(m)
        taus = np.linspace(0.01, 12.0, 50)
        u, du = vp.evaluate(taus)
        scale = math.sqrt(2.0)
        assert np.max(np.abs(u / (scale * np.cosh(taus)) - 1.0)) <= 1e-10
        # eigenfunction residual -Lap V + (n+1) V via the closure
        lap = vp.u_dd(taus, u, du) + m.n / np.tanh(taus) * du
        assert np.max(np.abs(-lap + (m.n + 1) * u)) <= 1e-12
        # normalisation r V -> 1
        r = np.asarray(m.r_of_tau(taus))
        assert abs(r[-1] * u[-1] - 1.0) <= 1e-8


class TestMatching:
    def test_unit_sphere_q(self, solved):
        _, sr = solved(4, 0.5, 1.0)
        assert sr.q_value == pytest.approx(1.0, abs=1e-6)
        assert sr.c1 != 0.0
        assert sr.scattering_value == pytest.approx(sr.c2 / sr.c1, rel=1e-15)

    def test_quarter_q(self, solved):
        _, sr = solved(4, 0.25, 1.0)
        assert sr.q_value == pytest.approx(0.704446, abs=1e-5)

    def test_k2_scaling(self, solved):
        _, sr = solved(4, 0.5, 2.0)
        assert sr.q_value == pytest.approx(math.sqrt(2.0), abs=1e-5)

    def test_q_normalisation_invariant(self, solved):
        for case in ((4, 0.5, 1.0), (5, 0.6, 2.0)):
            p = QCurvParams(*case)
            _, sr = solved(*case)
            from hkcce.special_fn import d_gamma
            expected = (2.0 / (p.n - 2 * p.gamma)) * d_gamma(p.gamma) * sr.c2 / sr.c1
            assert sr.q_value == pytest.approx(expected, rel=1e-15)

    def test_oracle_grid_subset(self, solved):
        for n in (4, 6):
            for gamma in (0.25, 0.5, 0.75):
                for k in (0.5, 2.0):
                    _, sr = solved(n, gamma, k)
                    oracle = sphere_q_value(n, gamma, k)
                    assert abs(sr.q_value - oracle) <= 1e-6 * max(1.0, abs(oracle))
                    assert sr.q_value > 0.0

    def test_two_T_consistency_in_window(self):
        # contrast e^{-2 gamma T} must stay well above machine epsilon for
        # the subdominant branch to be resolvable; these (gamma, T) pairs
        # keep it >= ~3e-6 across T in [12, 25]
        for gamma, t_values in ((0.1, (12.0, 18.0, 25.0)),
                                (0.15, (12.0, 25.0)),
                                (0.25, (12.0, 16.0))):
            p = QCurvParams(4, gamma, 1.0)
            prof = solve_interior(p, 1e-8, tau_max=26.0)
            for T in t_values:
                sr = match_and_q(prof, p, T)
                assert sr.consistency_gap <= 1e-7

    def test_condition_estimate_reported(self, solved):
        _, sr = solved(4, 0.5, 1.0)
        assert 1.0 < sr.condition_estimate < 1e12

    def test_T_outside_grid(self):
        p = QCurvParams(4, 0.5, 1.0)
        prof = solve_interior(p, 1e-8, tau_max=10.0)
        with pytest.raises(MatchingError):
            match_and_q(prof, p, 12.0)

    def test_truncation_guard(self):
        # matching very close to the centre: r(T) near the series boundary
        p = QCurvParams(4, 0.5, 4.0)
        prof = solve_interior(p, 1e-8, tau_max=10.0)
        with pytest.raises(MatchingError):
            match_and_q(prof, p, 0.3)

    def test_default_window(self):
        assert default_match_T(0.5) == pytest.approx(-math.log(1e-4), rel=1e-12)
        assert default_match_T(0.05) == 30.0
        assert default_match_T(0.95) == 6.0
