import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import optimize

from erasurebench import de_uncoupled as de
from erasurebench.channel import make_rng
from erasurebench.decoders import bp_decode
from erasurebench.ensemble import DegreeDistribution, make_regular, matching_margin
from erasurebench.graphgen import sample_configuration

DD36 = make_regular(3, 6)


class TestIterate:
    def test_below_threshold(self):
        x, traj = de.de_iterate(DD36, 0.40)
        assert x < 1e-8
        assert traj[0] == (0.40, 1.0, 0)

    def test_above_threshold_root(self):
        x, _ = de.de_iterate(DD36, 0.46)
        f = lambda t: t - 0.46 * (1 - (1 - t) ** 5) ** 2  # noqa: E731
        root = optimize.brentq(f, 0.3, 0.46, xtol=1e-15)
        assert x == pytest.approx(root, abs=1e-9)

    def test_eps_zero(self):
        x, traj = de.de_iterate(DD36, 0.0)
        assert x == 0 and len(traj) == 2

    @pytest.mark.parametrize("eps", [0.2, 0.42, 0.43, 0.46, 0.8])
    def test_monotone_bounded(self, eps):
        _, traj = de.de_iterate(DD36, eps, tol=1e-12)
        xs = np.array([s.x for s in traj])
        assert np.all(np.diff(xs) <= 0)
        assert np.all((xs >= 0) & (xs <= eps))
        ys = np.array([s.y for s in traj])
        assert np.all((ys >= 0) & (ys <= 1))

    @pytest.mark.parametrize("eps", [0.3, 0.45, 0.6])
    def test_limit_residual(self, eps):
        tol = 1e-12
        x, _ = de.de_iterate(DD36, eps, tol=tol)
        assert abs(x - de.de_step(DD36, eps, x)[0]) < 10 * tol

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            de.de_iterate(DD36, 0.3, tol=0)


class TestFixedPointEps:
    def test_half(self):
        assert de.fp_epsilon_of_x(0.5, 3, 6) == pytest.approx(0.53278, abs=1e-5)

    def test_one(self):
        assert de.fp_epsilon_of_x(1.0, 3, 6) == 1.0

    def test_cycle_code_limit(self):
        assert de.fp_epsilon_of_x(1e-9, 2, 4) == pytest.approx(1 / 3, abs=1e-6)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            de.fp_epsilon_of_x(0.0, 3, 6)

    def test_is_fixed_point(self):
        for x in (0.1, 0.3, 0.7):
            eps = de.fp_epsilon_of_x(x, 3, 6)
            assert de.de_step(DD36, eps, x)[0] == pytest.approx(x, abs=1e-14)


class TestThreshold:
    @pytest.mark.parametrize("dl,dr,expected,tol", [
        (3, 6, 0.42944, 1e-4), (100, 200, 0.0372964, 1e-5), (2, 4, 1 / 3, 1e-6),
    ])
    def test_values(self, dl, dr, expected, tol):
        assert abs(de.bp_threshold(make_regular(dl, dr)) - expected) < tol

    def test_cross_check(self):
        tol = 1e-6
        a = de.bp_threshold(DD36, tol)
        b = de.bp_threshold_de(DD36, tol)
        assert abs(a - b) < 2 * tol
        de.bp_threshold(DD36, tol, cross_check=True)

    def test_irregular_cross_check(self):
        dd = DegreeDistribution({2: 0.25, 4: 0.5, 5: 0.25}, {5: 0.5, 7: 0.5})
        assert abs(de.bp_threshold(dd) - de.bp_threshold_de(dd)) < 2e-6

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            de.bp_threshold(DD36, 1e-12)

    def test_matches_matching_condition(self):
        thr = de.bp_threshold(DD36)
        assert matching_margin(DD36, thr - 1e-4) < 0 < matching_margin(DD36, thr + 1e-4)


class TestExit:
    def test_curve_shape(self):
        pts = de.exit_curve(DD36, 1000)
        eps = np.array([p.epsilon for p in pts])
        assert eps.min() == pytest.approx(0.42944, abs=1e-4)
        assert pts[-1].epsilon == 1.0 and pts[-1].exit_value == 1.0
        i = int(np.argmin(eps))
        kinds = [p.stability for p in pts]
        assert set(kinds[:i - 1]) == {"unstable"} and set(kinds[i + 2:]) == {"stable"}

    def test_exit_value_formula(self):
        for p in de.exit_curve(DD36, 100)[::17]:
            assert p.exit_value == pytest.approx((1 - (1 - p.x) ** 5) ** 3, abs=1e-14)
            assert p.epsilon == pytest.approx(de.fp_epsilon_of_x(p.x, 3, 6))

    @pytest.mark.parametrize("dl,dr", [(3, 6), (4, 8), (3, 5)])
    def test_area_equals_rate(self, dl, dr):
        assert de.exit_area(make_regular(dl, dr)) == pytest.approx(1 - dl / dr, abs=1e-3)

    def test_grid_guard(self):
        with pytest.raises(ValueError):
            de.exit_curve(DD36, 50)


class TestChart:
    def test_no_crossing(self):
        ch = de.exit_chart(DD36, 0.35)
        assert not ch.crossing and ch.n_intersections == 1

    def test_tangency(self):
        thr = de.bp_threshold(DD36)
        xs = np.linspace(1e-6, thr, 200001)
        margin = thr * DD36.lam(DD36.check_out(xs)) - xs
        assert abs(margin.max()) < 1e-6

    def test_three_points(self):
        ch = de.exit_chart(DD36, 0.5)
        assert ch.crossing and ch.n_intersections == 3

    def test_staircase_between_curves(self):
        ch = de.exit_chart(DD36, 0.35, staircase=True)
        st = ch.staircase
        assert st.shape[1] == 2 and st[-1, 0] < 1e-8
        assert_allclose(ch.check_curve[:, 1], DD36.check_out(ch.check_curve[:, 0]))


class TestConcentration:
    @pytest.mark.parametrize("eps", [0.35, 0.46])
    def test_bp_matches_de(self, eps):
        n = 2**15
        g = sample_configuration(DD36, n, make_rng(77, 0))
        erased = make_rng(77, 1).random(n) < eps
        y = np.where(erased, -1, 0).astype(np.int8)
        emp = bp_decode(g, y).erased.mean()
        assert abs(emp - de.residual_bit_erasure(DD36, eps)) < 0.01
