import numpy as np
import pytest
from numpy.testing import assert_allclose

from erasurebench import potential as pot
from erasurebench.de_coupled import OneSidedConstellation, one_sided_fp_search
from erasurebench.de_uncoupled import bp_threshold, de_step, fp_epsilon_of_x
from erasurebench.ensemble import design_rate, make_regular

EPS_AREA = 0.48818


class TestScalar:
    def test_zero(self):
        for eps in (0.0, 0.3, 0.9):
            assert pot.potential_u(0.0, eps, 3, 6) == 0.0

    def test_increasing_below_bp(self):
        # g'(1) = 0, so the derivative vanishes at the right end only
        x = np.linspace(1e-3, 1, 1000)
        assert pot.potential_derivative(x[:-1], 0.40, 3, 6).min() > 0
        assert np.all(np.diff(pot.potential_u(x, 0.40, 3, 6)) > 0)

    def test_touches_zero_at_area(self):
        assert abs(pot.min_stationary_potential(EPS_AREA, 3, 6)) < 1e-4

    @pytest.mark.parametrize("dl,dr,eps", [(3, 6, 0.46), (4, 8, 0.3), (2, 4, 0.6)])
    def test_closed_form_vs_quadrature(self, dl, dr, eps):
        for x in (0.1, 0.37, 0.8, 1.0):
            assert pot.potential_u(x, eps, dl, dr) == pytest.approx(
                pot.potential_u_quad(x, eps, dl, dr), abs=1e-10)

    def test_central_difference(self):
        h = 1e-6
        x = np.linspace(h, 1 - h, 1000)
        num = (pot.potential_u(x + h, 0.46, 3, 6) - pot.potential_u(x - h, 0.46, 3, 6)) / (2 * h)
        assert_allclose(num, pot.potential_derivative(x, 0.46, 3, 6), atol=1e-6)

    def test_domain(self):
        with pytest.raises(ValueError):
            pot.potential_u(1.5, 0.4, 3, 6)

    def test_profile(self):
        p = pot.potential_profile(0.46, 3, 6, grid=200)
        assert p.U[0] == 0 and p.x.size == 201 and len(p.stationary) == 2


class TestStationary:
    def test_none_below_bp(self):
        assert pot.stationary_points(0.40, 3, 6) == []

    def test_pair(self):
        pts = pot.stationary_points(0.46, 3, 6)
        assert [p.kind for p in pts] == ["max", "min"]
        for p in pts:
            assert fp_epsilon_of_x(p.x, 3, 6) == pytest.approx(0.46, abs=1e-9)
            assert abs(pot.potential_derivative(p.x, 0.46, 3, 6)) < 1e-9

    def test_tangency(self):
        pts = pot.stationary_points(bp_threshold(make_regular(3, 6), tol=1e-10), 3, 6)
        assert len(pts) == 2 and abs(pts[0].x - pts[1].x) < 1e-3

    def test_tol_guard(self):
        with pytest.raises(ValueError):
            pot.stationary_points(0.46, 3, 6, tol=1e-12)

    def test_bijection_with_fixed_points(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            dl = int(rng.integers(3, 6))
            dr = 2 * dl
            dd = make_regular(dl, dr)
            eps = rng.uniform(bp_threshold(dd) + 0.005, 0.7)
            pts = pot.stationary_points(eps, dl, dr)
            # oracle: sign changes of the DE map on a fine independent grid
            xs = np.linspace(1e-6, 1, 400001)
            phi = de_step(dd, eps, xs)[0] - xs
            n_roots = np.count_nonzero(np.sign(phi[1:]) != np.sign(phi[:-1]))
            assert len(pts) == n_roots
            for p in pts:
                assert abs(de_step(dd, eps, p.x)[0] - p.x) < 1e-9


class TestGap:
    def test_positive(self):
        assert pot.energy_gap(0.46, 3, 6) > 0

    def test_sentinel(self):
        assert pot.energy_gap(0.40, 3, 6) == np.inf

    def test_nonpositive(self):
        with pytest.raises(pot.NonPositiveGapError):
            pot.energy_gap(0.5, 3, 6)

    def test_monotone(self):
        gaps = [pot.energy_gap(e, 3, 6) for e in (0.44, 0.45, 0.46, 0.47, 0.48)]
        assert np.all(np.diff(gaps) < 0)


class TestAreaThreshold:
    def test_three_six(self):
        assert abs(pot.area_threshold(3, 6) - EPS_AREA) < 1e-4

    @pytest.mark.parametrize("dl,dr", [(3, 6), (4, 8), (5, 10)])
    def test_two_methods(self, dl, dr):
        a = pot.area_threshold(dl, dr)
        assert abs(a - pot.area_threshold_exit(dl, dr)) < 1e-3
        assert a <= 1 - design_rate(make_regular(dl, dr))

    def test_cross_check(self):
        pot.area_threshold(3, 6, cross_check=True)

    def test_maxwell(self):
        m = pot.maxwell_areas(3, 6, pot.area_threshold(3, 6))
        assert m.area_I > 0 and abs(m.area_I - m.area_II) < 1e-3

    def test_tol_guard(self):
        with pytest.raises(ValueError):
            pot.area_threshold(3, 6, tol=1e-9)


class TestK:
    @pytest.mark.parametrize("dl,dr,eps,k", [(3, 6, 0.5, 50), (2, 4, 1 / 3, 12), (3, 6, 0.0, 25)])
    def test_values(self, dl, dr, eps, k):
        assert pot.k_fg(dl, dr, eps) == pytest.approx(k)


class TestCoupled:
    def test_zero(self):
        c = OneSidedConstellation(np.zeros(10), 3)
        assert pot.coupled_potential(c, 0.46, 3, 6) == 0.0

    def test_constant_interior(self):
        w, x = 3, 0.4
        terms = pot.coupled_potential_terms(np.full(60, x), 0.46, 3, 6, w)
        assert_allclose(terms[:-w], pot.potential_u(x, 0.46, 3, 6), atol=1e-8)

    def test_layout(self):
        x = pot.pad_one_sided([0.1, 0.2, 0.3], 3)
        assert x.size == 2 + 3 * 3 + 1 + 1
        assert_allclose(x[:3], 0)
        assert_allclose(x[-7:], 0.3)

    def test_shift_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            w, L = int(rng.integers(1, 8)), int(rng.integers(1, 40))
            v = np.sort(rng.random(L + 1)) * rng.random()
            eps = rng.uniform(0.3, 0.6)
            x = pot.pad_one_sided(v, w)
            diff = pot.coupled_potential(pot.shift(x), eps, 3, 6, w) - pot.coupled_potential(x, eps, 3, 6, w)
            assert abs(diff + pot.potential_u(v[-1], eps, 3, 6)) < 1e-9

    def test_gradient(self):
        rng = np.random.default_rng(2)
        x = pot.pad_one_sided(np.sort(rng.random(12)), 3)
        grad = pot.coupled_gradient(x, 0.46, 3, 6, 3)
        h = 1e-6
        for i in (0, 5, 10, 20):
            e = np.zeros(x.size)
            e[i] = h
            num = (pot.coupled_potential(x + e, 0.46, 3, 6, 3)
                   - pot.coupled_potential(x - e, 0.46, 3, 6, 3)) / (2 * h)
            assert num == pytest.approx(grad[i], abs=1e-6)

    def test_dimension_errors(self):
        with pytest.raises(ValueError):
            pot.coupled_potential(np.zeros(2), 0.4, 3, 6, 5)
        with pytest.raises(ValueError):
            pot.coupled_potential(np.zeros(8), 0.4, 3, 6)


class TestShiftDecrease:
    def test_drifting_profile(self):
        c = one_sided_fp_search(400, 200, 3, 6, 0.46, max_iters=2).constellation
        rep = pot.shift_decrease_check(c, 0.46, 3, 6)
        assert rep.gap_ok and rep.strict_decrease
        assert rep.lhs < 0 and rep.taylor_margin >= 0
        assert rep.decreasing.size > 0

    def test_zero_constellation(self):
        rep = pot.shift_decrease_check(OneSidedConstellation(np.zeros(20), 5), 0.46, 3, 6)
        assert rep.shift_difference == 0 and rep.taylor_margin >= 0

    def test_above_area(self):
        rep = pot.shift_decrease_check(OneSidedConstellation(np.linspace(0, 0.5, 20), 5), 0.6, 3, 6)
        assert not rep.gap_ok and rep.strict_decrease is None
