import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfou import fou
from cfou.errors import DomainError
from cfou.fbm import ComplexPath, Seed, UniformGrid, sample_complex_fgn
from cfou.fou import DriftParam, ergodic_average, fou_from_increments, simulate_fou, stationary_variance


class TestDriftParam:
    def test_round_trip(self):
        g = DriftParam.from_complex(1 - 2j)
        assert (g.lam, g.omega) == (1.0, 2.0)
        assert g.gamma == 1 - 2j and g.gamma_bar == 1 + 2j and complex(g) == g.gamma

    @pytest.mark.parametrize("lam, omega", [(0.0, 1.0), (-1.0, 0.0), (np.inf, 0.0), (1.0, np.nan)])
    def test_rejects(self, lam, omega):
        with pytest.raises(DomainError):
            DriftParam(lam, omega)


class TestRecursion:
    def test_matches_loop(self, rng):
        dz = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        g, dt = 0.7 - 1.3j, 0.05
        z = [0j]
        for d in dz:
            z.append(np.exp(-g * dt) * (z[-1] + d))
        np.testing.assert_allclose(fou_from_increments(g, dt, dz), z, rtol=1e-12, atol=1e-14)

    def test_starts_at_zero_and_batches(self, rng):
        dz = rng.standard_normal((3, 10)) + 0j
        z = fou_from_increments(1.0, 0.1, dz)
        assert z.shape == (3, 11) and np.all(z[:, 0] == 0)
        np.testing.assert_allclose(z[1], fou_from_increments(1.0, 0.1, dz[1]))

    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_linear_in_driver(self, a, b):
        rng = np.random.default_rng(0)
        d1 = rng.standard_normal(20) + 1j * rng.standard_normal(20)
        d2 = rng.standard_normal(20) + 1j * rng.standard_normal(20)
        c = complex(a, b)
        lhs = fou_from_increments(1 + 1j, 0.1, c * d1 - d2)
        rhs = c * fou_from_increments(1 + 1j, 0.1, d1) - fou_from_increments(1 + 1j, 0.1, d2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_simulate_uses_complex_driver(self):
        grid = UniformGrid(2.0, 64)
        p = simulate_fou(1 - 1j, 0.35, grid, Seed(4, 2))
        dz = sample_complex_fgn(0.35, grid, 4, [2])[0]
        np.testing.assert_array_equal(p.increments, dz)
        np.testing.assert_allclose(p.values, fou_from_increments(1 - 1j, grid.dt, dz))
        Z, D = fou.simulate_fou_batch(1 - 1j, 0.35, grid, 4, [2, 3])
        np.testing.assert_allclose(Z[0], p.values)

    def test_discretization_consistency(self):
        # paths built from aggregated increments approach the fine path as the grid refines
        fine = UniformGrid(4.0, 4096)
        dz = sample_complex_fgn(0.35, fine, 8, [0])[0]
        zf = fou_from_increments(1 - 1j, fine.dt, dz)
        errs = []
        for k in (64, 16, 4):
            zc = fou_from_increments(1 - 1j, fine.dt * k, dz.reshape(-1, k).sum(axis=1))
            errs.append(np.max(np.abs(zc - zf[::k])))
        assert errs[0] > errs[1] > errs[2]


class TestErgodicAverage:
    def test_zero_path(self):
        assert ergodic_average(np.zeros(11, complex), 2.0) == 0.0

    def test_constant_modulus(self):
        z = 3 * np.exp(1j * np.linspace(0, 7, 101))
        assert ergodic_average(z, 5.0) == pytest.approx(9.0)

    def test_trapezoid_linear(self):
        # |Z_t|^2 = t on [0, 2] is integrated exactly
        t = np.linspace(0, 2, 9)
        assert ergodic_average(np.sqrt(t) + 0j, 2.0) == pytest.approx(1.0)

    def test_path_and_rows(self):
        grid = UniformGrid(1.0, 4)
        p = ComplexPath(grid, np.ones(5, complex))
        assert ergodic_average(p) == pytest.approx(1.0)
        np.testing.assert_allclose(ergodic_average(np.ones((2, 5)), 1.0), [1.0, 1.0])

    def test_raw_needs_horizon(self):
        with pytest.raises(DomainError):
            ergodic_average(np.ones(5))


class TestStationaryVariance:
    @pytest.mark.parametrize("lam, omega", [(1.0, 0.0), (2.0, 3.0), (0.5, -1.0)])
    def test_brownian(self, lam, omega):
        assert stationary_variance(DriftParam(lam, omega), 0.5) == pytest.approx(1 / (2 * lam))

    def test_real_drift(self):
        # omega = 0 reduces to H Gamma(2H) lambda^(-2H)
        from scipy.special import gamma

        assert stationary_variance(2.0, 0.3) == pytest.approx(0.3 * gamma(0.6) * 2.0**-0.6)

    @pytest.mark.parametrize("h", [0.3, 0.5, 0.7])
    def test_ergodic_limit(self, h):
        g = 1 - 1j
        grid = UniformGrid(200.0, 2**15)
        Z, _ = fou.simulate_fou_batch(g, h, grid, 31, range(8))
        # discard the transient by averaging the second half only
        half = ergodic_average(Z[:, 2**14 :], 100.0)
        v = stationary_variance(g, h)
        assert np.mean(half) == pytest.approx(v, rel=0.1)
