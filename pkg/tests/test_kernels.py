import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfou import kernels as k
from cfou.errors import DomainError
from cfou.kernels import ExpKernel, KernelKind

GAMMA = 1 - 1j


def _jump(t, s):
    return (s < t).astype(float)


class TestExpKernel:
    def test_values(self):
        psi = ExpKernel("Psi", GAMMA, 2.0)
        hh = ExpKernel(KernelKind.HH, GAMMA, 2.0)
        assert psi(1.0, 0.5) == pytest.approx(np.exp(-np.conj(GAMMA) * 0.5))
        assert psi(0.5, 1.0) == 0 and psi(1.0, 1.0) == 0 and psi(3.0, 1.0) == 0
        assert hh(0.5, 1.0) == pytest.approx(np.exp(-GAMMA * 0.5))
        assert hh(1.0, 0.5) == 0

    def test_grid_is_strictly_lower(self):
        K = ExpKernel("Psi", GAMMA, 1.0).grid(8)
        assert np.all(np.triu(K) == 0) and np.all(K[np.tril_indices(8, -1)] != 0)

    def test_validation(self):
        with pytest.raises(DomainError):
            ExpKernel("Psi", GAMMA, 0.0)
        with pytest.raises(ValueError):
            ExpKernel("Phi", GAMMA, 1.0)


class TestJumpNorm:
    @pytest.mark.parametrize("H", [0.25, 0.5, 0.1])
    def test_domain(self, H):
        with pytest.raises(DomainError):
            k.jump_norm_coefficient(H)

    def test_grid_convergence(self):
        H, T = 0.35, 2.0
        exact = k.jump_norm_coefficient(H) * T ** (4 * H)
        errs = [abs(k.tensor_norm_sq((_jump, T), H, n) / exact - 1) for n in (32, 128, 512)]
        assert errs[0] > errs[1] > errs[2] and errs[2] < 0.02

    @pytest.mark.parametrize("H", [0.3, 0.4, 0.45])
    def test_positive(self, H):
        assert k.jump_norm_coefficient(H) > 0


class TestAitken:
    def test_geometric_exact(self):
        assert k.aitken(1.0, 1.5, 1.75) == pytest.approx(2.0)

    def test_componentwise(self):
        assert k.aitken(1 + 0j, 1.5 + 3j, 1.75 + 3j) == pytest.approx(2.0 + 3j)

    @pytest.mark.parametrize("seq", [(1.0, 2.0, 4.0), (1.0, 1.0, 1.0), (0.0, 1.0, -1.0)])
    def test_fallback(self, seq):
        assert k.aitken(*seq) == seq[-1]

    @given(st.floats(-10, 10), st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.floats(-0.9, 0.9).filter(lambda r: abs(r) > 1e-2))
    def test_recovers_limit(self, lim, c, r):
        a, b, cc = (lim + c * r**j for j in range(3))
        assert k.aitken(a, b, cc) == pytest.approx(lim, abs=1e-6 * (1 + abs(c)))


class TestTensorNorms:
    def test_brownian_closed_form(self):
        # at H = 1/2 the norm is the L2 norm over the triangle
        T, lam = 3.0, 1.0
        exact = T / (2 * lam) - (1 - np.exp(-2 * lam * T)) / (4 * lam**2)
        for n in (64, 256):
            v = k.tensor_norm_sq(ExpKernel("Psi", GAMMA, T), 0.5, n)
            # zeroed diagonal cells carry about T dt / 2 of the mass
            assert v + T * (T / n) / 2 == pytest.approx(exact, rel=2e-3)

    @pytest.mark.parametrize("H", [0.3, 0.35, 0.5, 0.7])
    def test_real_nonnegative(self, H):
        v = k.tensor_norm_sq(ExpKernel("Psi", GAMMA, 4.0), H, 32)
        assert isinstance(v, float) and v > 0

    @pytest.mark.parametrize("method", ["step", "extrapolated"])
    def test_conjugate_drift(self, method):
        a = ExpKernel("Psi", 1 - 2j, 5.0)
        b = ExpKernel("Psi", 1 + 2j, 5.0)
        assert k.tensor_norm_sq(a, 0.35, 32, method=method) == pytest.approx(k.tensor_norm_sq(b, 0.35, 32, method=method), rel=1e-10)
        ha, hb = ExpKernel("Hh", 1 - 2j, 5.0), ExpKernel("Hh", 1 + 2j, 5.0)
        assert k.tensor_inner(a, ha, 0.35, 32, method=method) == pytest.approx(
            np.conj(k.tensor_inner(b, hb, 0.35, 32, method=method)), rel=1e-10
        )

    def test_extrapolation_beats_step(self):
        psi = ExpKernel("Psi", GAMMA, 4.0)
        ref = k.tensor_norm_sq(psi, 0.35, 512, method="extrapolated")
        step = k.tensor_norm_sq(psi, 0.35, 64, method="step")
        ext = k.tensor_norm_sq(psi, 0.35, 64, method="extrapolated")
        assert abs(ext - ref) < 0.2 * abs(step - ref)

    @pytest.mark.parametrize("H, method", [(0.5, "extrapolated"), (0.2, "extrapolated"), (0.35, "spline")])
    def test_method_validation(self, H, method):
        with pytest.raises(DomainError):
            k.tensor_norm_sq(ExpKernel("Psi", GAMMA, 2.0), H, 16, method=method)

    def test_inner_needs_common_horizon(self):
        with pytest.raises(DomainError):
            k.tensor_inner(ExpKernel("Psi", GAMMA, 2.0), ExpKernel("Hh", GAMMA, 3.0), 0.35, 16)

    def test_small_grid(self):
        with pytest.raises(DomainError):
            k.tensor_norm_sq(ExpKernel("Psi", GAMMA, 2.0), 0.35, 4)


class TestSweeps:
    def test_divergence_growth(self):
        low = k.divergence_probe(0.25, GAMMA, 5.0, [32, 64, 128])
        vals = [abs(r.estimate) for r in low.rows]
        assert vals[0] < vals[1] < vals[2]
        ctl = k.divergence_probe(0.45, GAMMA, 5.0, [32, 64, 128])
        assert ctl.growth_ratio() < low.growth_ratio()

    def test_drift_table(self):
        tab = k.drift_sweep(GAMMA, 0.35, [4, 2], 8)
        assert [r.t_end for r in tab.rows] == [2.0, 4.0] and [r.n for r in tab.rows] == [16, 32]
        a, _ = k.linear_coefficients(GAMMA, 0.35)
        assert tab.rows[1].target == pytest.approx(4 * a)
        assert len(tab.csv_rows()[0]) == len(k.CSV_COLUMNS)

    def test_unknown_quantity(self):
        with pytest.raises(DomainError):
            k.drift_sweep(GAMMA, 0.35, [2], 8, quantity="trace")

    def test_slope_exact_on_lines(self):
        rows = [k.ConvergenceRow(T, 8, complex(2 * T + 1, -T), 0.0, 0j) for T in (1.0, 2.0, 5.0)]
        assert k.slope(k.ConvergenceTable(rows)) == pytest.approx(2 - 1j)

    def test_three_term_split(self):
        T = 10.0
        split = k.three_term_split(GAMMA, 0.35, T)
        direct = k.tensor_norm_sq(ExpKernel("Psi", GAMMA, T), 0.35, 128)
        assert split["total"] == pytest.approx(direct, rel=0.05)

    def test_contraction(self):
        v = k.contraction_norm(GAMMA, 0.35, 5.0, 24)
        assert np.isfinite(v) and v > 0
        with pytest.raises(DomainError):
            k.contraction_norm(GAMMA, 0.1, 5.0, 24)

    def test_contract_matches_loop(self, rng):
        K = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        A = rng.standard_normal((5, 5))
        G = A @ A.T
        # phi[s, t] = sum_ij conj(K[s, i]) G[i, j] K[j, t]
        ref = np.array([[np.conj(K[s, :]) @ G @ K[:, t] for t in range(5)] for s in range(5)])
        np.testing.assert_allclose(k.contract(K, G), ref)
