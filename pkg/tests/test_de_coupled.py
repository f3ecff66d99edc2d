import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from erasurebench import de_coupled as dc
from erasurebench.ensemble import make_regular
from erasurebench.de_uncoupled import bp_threshold, de_step

DD36 = make_regular(3, 6)


def explicit_step(x, w, dl, dr, eps):
    """Direct double sum with zero boundary, positions 0..L-1."""
    L = len(x)
    get = lambda i: x[i] if 0 <= i < L else 0.0  # noqa: E731
    out = np.empty(L)
    for i in range(L):
        s = 0.0
        for j in range(w):
            inner = sum(get(i + j - k) for k in range(w)) / w
            s += (1 - inner) ** (dr - 1)
        out[i] = eps * (1 - s / w) ** (dl - 1)
    return out


class TestStep:
    def test_zero(self):
        c = dc.Constellation(np.zeros(10), 3)
        assert not dc.coupled_de_step(c, 0.5, 3, 6).values.any()

    def test_w1_uncoupled(self):
        x = np.linspace(0.05, 1, 12)
        out = dc.coupled_de_step(dc.Constellation(x, 1), 0.45, 3, 6).values
        assert_allclose(out, de_step(DD36, 0.45, x)[0], rtol=0, atol=1e-15)

    def test_interior_constant(self):
        w, x = 4, 0.37
        out = dc.coupled_de_step(dc.Constellation(np.full(30, x), w), 0.5, 3, 6).values
        assert_allclose(out[2 * w:-2 * w], de_step(DD36, 0.5, x)[0], atol=1e-15)

    def test_matches_explicit_sum(self):
        rng = np.random.default_rng(0)
        x = rng.random(15)
        for w in (1, 2, 5):
            out = dc.coupled_de_step(dc.Constellation(x, w), 0.47, 3, 6).values
            assert_allclose(out, explicit_step(x, w, 3, 6, 0.47), atol=1e-14)

    def test_range(self):
        out = dc.coupled_de_step(dc.Constellation(np.ones(20), 3), 0.45, 3, 6).values
        assert np.all((out >= 0) & (out <= 0.45))

    def test_validation(self):
        with pytest.raises(ValueError):
            dc.Constellation([0.5, 1.2], 2)
        with pytest.raises(ValueError):
            dc.Constellation([0.5], 0)


class TestRun:
    def test_low_eps(self):
        assert dc.coupled_de_run(100, 20, 3, 6, 0.3).decoded

    def test_wave_decodes(self):
        run = dc.coupled_de_run(100, 20, 3, 6, 0.48)
        assert run.decoded and run.iterations > 50

    def test_high_eps_stuck(self):
        run = dc.coupled_de_run(100, 20, 3, 6, 0.6)
        assert not run.decoded
        x_star = dc.uncoupled_fixed_point(0.6, 3, 6)
        # domination by the uncoupled fixed point
        assert np.all(run.fixed_point.values <= x_star + 1e-12)

    def test_pointwise_monotone(self):
        prev = np.ones(100)
        traj = dc.coupled_de_trajectory(100, 20, 3, 6, 0.48)
        for _ in range(200):
            x = next(traj)
            assert np.all(x <= prev)
            prev = x

    def test_symmetric(self):
        v = dc.coupled_de_run(60, 4, 3, 6, 0.6).fixed_point.values
        assert np.abs(v - v[::-1]).max() < 1e-10

    def test_cap(self):
        assert dc.coupled_de_run(100, 20, 3, 6, 0.48, max_iters=5).iterations == 5


class TestThreshold:
    def test_w1_is_uncoupled(self):
        assert abs(dc.coupled_threshold(50, 1, 3, 6) - 0.42944) < 1e-3

    def test_coupling_helps(self):
        thr = dc.coupled_threshold(60, 3, 3, 6, tol=1e-4)
        assert thr > bp_threshold(DD36) + 0.03

    def test_tol_guard(self):
        with pytest.raises(ValueError):
            dc.coupled_threshold(10, 2, 3, 6, tol=1e-7)


class TestWave:
    def test_positive(self):
        assert dc.wave_speed(100, 5, 3, 6, 0.46) > 0

    def test_monotone_in_eps(self):
        v = [dc.wave_speed(200, 5, 3, 6, e) for e in (0.44, 0.47, 0.485)]
        assert v[0] > v[1] > v[2] > 0

    def test_near_area_threshold(self):
        assert dc.wave_speed(200, 5, 3, 6, 0.488) < 0.01

    def test_no_wave_below_bp(self):
        with pytest.raises(dc.NoWaveError):
            dc.wave_speed(100, 5, 3, 6, 0.40)

    def test_stuck_above_area(self):
        with pytest.raises(dc.StuckWaveError):
            dc.wave_speed(100, 5, 3, 6, 0.6)

    def test_guard(self):
        with pytest.raises(ValueError):
            dc.wave_speed(40, 5, 3, 6, 0.46)


class TestOneSided:
    def test_clamp_rule(self):
        v = np.array([0.1, 0.2, 0.3])
        w = 2
        out = dc.one_sided_step(v, w, 3, 6, 0.5)
        ext = np.concatenate([[0.0], v, [0.3, 0.3]])
        full = explicit_step(ext, w, 3, 6, 0.5)
        assert_allclose(out, full[1:4], atol=1e-15)

    def test_below_bp(self):
        r = dc.one_sided_fp_search(50, 5, 3, 6, 0.40)
        assert r.residual == 0 and r.entropy == 0

    def test_special_fixed_point_shape(self):
        r = dc.one_sided_fp_search(100, 5, 3, 6, 0.48818)
        v = r.constellation.values
        x_star = dc.uncoupled_fixed_point(0.48818, 3, 6)
        assert r.constellation.is_monotone
        assert np.count_nonzero((v >= 0.05) & (v <= x_star - 0.05)) <= 10 * 5
        assert v[0] < 0.05 and v[-1] > x_star - 0.05

    def test_drift_below_area(self):
        r = dc.one_sided_fp_search(100, 5, 3, 6, 0.46, max_iters=100)
        assert not r.converged and r.residual > 1e-3
        full = dc.one_sided_fp_search(100, 5, 3, 6, 0.46)
        assert full.collapsed

    def test_entropy(self):
        c = dc.OneSidedConstellation([0, 0.2, 0.4], 2)
        assert c.L == 2 and c.entropy == pytest.approx(0.2)
        assert not dc.OneSidedConstellation([0.3, 0.1], 2).is_monotone

    def test_uncoupled_fixed_point(self):
        x = dc.uncoupled_fixed_point(0.6, 3, 6)
        assert x == pytest.approx(0.6 * (1 - (1 - x) ** 5) ** 2, abs=1e-14)
        assert dc.uncoupled_fixed_point(0.4, 3, 6) < 1e-12
        assert_array_equal(dc.uncoupled_fixed_point(0.0, 3, 6), 0.0)
