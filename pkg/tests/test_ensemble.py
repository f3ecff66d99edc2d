import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from erasurebench import ensemble as en
from erasurebench.de_uncoupled import bp_threshold

IRREGULAR = en.DegreeDistribution({2: 0.25, 4: 0.5, 5: 0.25}, {5: 0.5, 7: 0.5})


def random_dd(draw_degs, draw_w):
    w = np.array(draw_w, dtype=float)
    w /= w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return dict(zip(draw_degs, w))


dist = st.lists(
    st.tuples(st.integers(2, 20), st.floats(0.01, 1.0)), min_size=1, max_size=5,
    unique_by=lambda t: t[0],
).map(lambda items: random_dd([d for d, _ in items], [w for _, w in items]))


class TestMakeRegular:
    def test_three_six(self):
        dd = en.make_regular(3, 6)
        assert dd.var_node_coeffs == {3: 1.0}
        assert dd.check_node_coeffs == {6: 1.0}
        assert dd.is_regular and dd.regular_degrees == (3, 6)

    def test_cycle_code(self):
        dd = en.make_regular(2, 4)
        assert dd.var_node_coeffs == {2: 1.0} and dd.check_node_coeffs == {4: 1.0}

    @pytest.mark.parametrize("dl,dr", [(2, 2), (6, 3)])
    def test_nonpositive_rate(self, dl, dr):
        with pytest.raises(en.NonPositiveRateError):
            en.make_regular(dl, dr)

    @pytest.mark.parametrize("dl,dr", [(1, 6), (3, 1), (0, 4)])
    def test_small_degree(self, dl, dr):
        with pytest.raises(en.EnsembleError) as info:
            en.make_regular(dl, dr)
        assert not isinstance(info.value, en.NonPositiveRateError)


class TestValidation:
    def test_sum(self):
        with pytest.raises(en.EnsembleError):
            en.DegreeDistribution({3: 0.5}, {6: 1.0})

    def test_negative(self):
        with pytest.raises(en.EnsembleError):
            en.DegreeDistribution({3: 1.5, 4: -0.5}, {6: 1.0})

    def test_degree_zero(self):
        with pytest.raises(en.EnsembleError):
            en.DegreeDistribution({0: 1.0}, {6: 1.0})

    def test_sum_tolerance(self):
        en.DegreeDistribution({3: 1.0 + 5e-13}, {6: 1.0})


class TestEdgePerspective:
    def test_irregular_example(self):
        lam, rho = en.edge_perspective(IRREGULAR)
        assert_allclose([lam[2], lam[4], lam[5]], [2 / 15, 8 / 15, 5 / 15], atol=1e-15)
        assert_allclose([rho[5], rho[7]], [5 / 12, 7 / 12], atol=1e-15)

    def test_regular(self):
        lam, rho = en.edge_perspective(en.make_regular(3, 6))
        assert lam == {3: 1.0} and rho == {6: 1.0}
        assert_allclose(en.make_regular(3, 6).lam(0.7), 0.49)

    @given(dist, dist)
    def test_sums_to_one(self, var, chk):
        lam, rho = en.edge_perspective(en.DegreeDistribution(var, chk))
        assert min(lam.values()) >= 0 and min(rho.values()) >= 0
        assert abs(sum(lam.values()) - 1) < 1e-12
        assert abs(sum(rho.values()) - 1) < 1e-12

    def test_polynomials_match_coefficients(self):
        x = np.linspace(0, 1, 11)
        assert_allclose(IRREGULAR.lam(x), 2 / 15 * x + 8 / 15 * x**3 + 5 / 15 * x**4, atol=1e-15)
        assert_allclose(IRREGULAR.rho(x), 5 / 12 * x**4 + 7 / 12 * x**6, atol=1e-15)
        assert_allclose(IRREGULAR.check_out(x), 1 - IRREGULAR.rho(1 - x), atol=1e-15)


class TestRates:
    @pytest.mark.parametrize("dl,dr", [(3, 6), (100, 200), (2, 4)])
    def test_half_rate(self, dl, dr):
        assert en.design_rate(en.make_regular(dl, dr)) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("dl,dr", [(2, 3), (3, 4), (3, 5), (4, 9), (5, 12), (7, 8)])
    def test_regular_exact(self, dl, dr):
        assert abs(en.design_rate(en.make_regular(dl, dr)) - float(1 - Fraction(dl, dr))) < 1e-12

    def test_shannon(self):
        assert en.shannon_threshold(en.make_regular(3, 6)) == pytest.approx(0.5)
        assert en.shannon_threshold(en.make_regular(100, 200)) == pytest.approx(0.5)
        # Lambda'(1) = 3.75, P'(1) = 6
        assert IRREGULAR.avg_var_degree == pytest.approx(3.75)
        assert IRREGULAR.avg_check_degree == pytest.approx(6.0)
        assert en.design_rate(IRREGULAR) == pytest.approx(0.375, abs=1e-12)
        assert en.shannon_threshold(IRREGULAR) == pytest.approx(0.625, abs=1e-12)

    @given(dist, dist)
    @settings(max_examples=200)
    def test_integral_form_agrees(self, var, chk):
        dd = en.DegreeDistribution(var, chk)
        assert abs(en.design_rate(dd) - en.design_rate_integral(dd)) < 1e-10


class TestMatching:
    dd = en.make_regular(3, 6)

    def test_below(self):
        assert en.matching_margin(self.dd, 0.40) < 0

    def test_above(self):
        assert en.matching_margin(self.dd, 0.46) > 0

    def test_zero_eps(self):
        m = en.matching_margin(self.dd, 0.0, grid_size=200)
        assert m == pytest.approx(-1 / 200)

    def test_grid_guard(self):
        with pytest.raises(ValueError):
            en.matching_margin(self.dd, 0.4, grid_size=50)

    def test_callable_family(self):
        # lambda_a(x) = 1 - (1-x)^a, rho_a(x) = x^(1/a) meets the matching condition with equality
        a = 0.5
        lam = lambda x: 1 - (1 - x) ** a  # noqa: E731
        rho = lambda x: x ** (1 / a)  # noqa: E731
        assert en.matching_margin((lam, rho), 0.5) <= 1e-12

    @pytest.mark.parametrize("dl,dr", [(3, 6), (4, 8), (5, 10)])
    def test_single_sign_flip(self, dl, dr):
        dd = en.make_regular(dl, dr)
        thr = bp_threshold(dd)
        eps = np.concatenate([np.linspace(thr - 0.05, thr - 1e-3, 8), np.linspace(thr + 1e-3, thr + 0.05, 8)])
        signs = np.sign([en.matching_margin(dd, e) for e in eps])
        assert np.all(signs[:8] < 0) and np.all(signs[8:] > 0)
        assert np.count_nonzero(np.diff(signs)) == 1


class TestSerialization:
    def test_round_trip(self, tmp_path):
        txt = IRREGULAR.to_json()
        assert json.loads(txt)["rho_nodes"] == {"5": 0.5, "7": 0.5}
        assert en.DegreeDistribution.from_json(txt) == IRREGULAR
        p = tmp_path / "dd.json"
        p.write_text(json.dumps({"lambda_nodes": {"3": 1.0}, "rho_nodes": {"6": 1.0}}))
        assert en.DegreeDistribution.load(p) == en.make_regular(3, 6)

    def test_malformed(self):
        with pytest.raises(en.EnsembleError):
            en.DegreeDistribution.from_dict({"lambda_nodes": {"3": 1.0}})
