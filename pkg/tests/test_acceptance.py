"""Acceptance criteria at their fixed tolerances.

Each test records one ``PASS``/``FAIL`` line (shown in the terminal summary)
and then asserts the criterion. Run standalone with
``python tests/test_acceptance.py`` to print only the summary lines.
"""

from __future__ import annotations

import subprocess
import sys
import time

import numpy as np
import pytest

from cfou import bridges, estimator, kernels, quad
from cfou.fbm import fbm_covariance
from cfou.rkhs import PiecewiseSmoothFn as P, grid_gram_inner, inner_product

from conftest import ACCEPTANCE_LINES, rkhs_pairs

pytestmark = pytest.mark.slow

GAMMA = complex(1.0, -1.0)


def record(num: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_c01_rkhs_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for H in (0.3, 0.35, 0.45):
        for f, g in rkhs_pairs():
            v = inner_product(f, g, H)
            o = grid_gram_inner(f, g, H, 1024)
            worst = max(worst, abs(v - o) / (1 + abs(v)))
    dt = time.perf_counter() - t0
    ok = worst <= 5e-3 and dt < 60
    record(1, "RKHS oracle equivalence", ok, f"max |ip-grid|/(1+|ip|) = {worst:.2e} (tol 5e-3), {dt:.1f}s")
    assert ok


def test_c02_covariance_recovery():
    rng = np.random.default_rng(2)
    st = rng.uniform(0.0, 2.0, size=(20, 2))
    worst = 0.0
    for s, t in st:
        v = inner_product(P.indicator(0.0, t), P.indicator(0.0, s), 0.3)
        worst = max(worst, abs(v - fbm_covariance(s, t, 0.3)))
    ok = worst <= 1e-6
    record(2, "covariance recovery", ok, f"max abs error {worst:.2e} over 20 pairs (tol 1e-6)")
    assert ok


def test_c03_consistency():
    t0 = time.perf_counter()
    rep = estimator.run_mc_experiment(GAMMA, 0.35, [25, 50, 100], 2**14, 500, seed=20240)
    dt = time.perf_counter() - t0
    maes = [e for _, e in rep.consistency_curve]
    ok = all(a > b for a, b in zip(maes, maes[1:])) and dt < 300
    record(3, "consistency", ok, "mean|err| at T=25,50,100: " + ", ".join(f"{m:.4f}" for m in maes) + f", {dt:.0f}s")
    assert ok


def test_c04_clt_covariance():
    t0 = time.perf_counter()
    half = estimator.run_mc_experiment(1.0, 0.5, [100], 2**13, 2000, seed=20240)
    dh = estimator.normality_diagnostics(half)
    mid = estimator.run_mc_experiment(GAMMA, 0.35, [100], 2**14, 2000, seed=20241)
    dm = estimator.normality_diagnostics(mid)
    feas = estimator.run_mc_experiment(GAMMA, 0.35, [100], 2**14, 2000, seed=20241, correction="feasible")
    df = estimator.normality_diagnostics(feas)
    dt = time.perf_counter() - t0
    # the H = 1/2 run arbitrates the normalization; it is then applied at H = 0.35
    fit_half = min(dh.frobenius_rel_c, dh.frobenius_rel_half)
    use_half = dh.better_fit == "C/2"
    fit_mid = dm.frobenius_rel_half if use_half else dm.frobenius_rel_c
    fit_feas = df.frobenius_rel_half if use_half else df.frobenius_rel_c
    ok = fit_half <= 0.15 and fit_mid <= 0.25 and dt < 600
    record(
        4,
        "CLT covariance",
        ok,
        f"H=1/2 fits {dh.better_fit} (rel {dh.frobenius_rel_c:.3f} vs C, {dh.frobenius_rel_half:.3f} vs C/2; tol 0.15); "
        f"H=0.35 rel {fit_mid:.3f} vs {dh.better_fit} (tol 0.25; feasible-correction estimator {fit_feas:.3f}), {dt:.0f}s",
    )
    assert ok


def test_c05_linear_drift():
    t0 = time.perf_counter()
    a, b = kernels.linear_coefficients(GAMMA, 0.35)
    psi = kernels.ExpKernel("Psi", GAMMA, 20.0)
    est = kernels.tensor_norm_sq(psi, 0.35, 256) / 20.0
    raw = kernels.tensor_norm_sq(psi, 0.35, 256, method="step") / 20.0
    sweep = kernels.drift_sweep(GAMMA, 0.35, [10, 20, 40], 12.8)
    res = [abs(r.residual) for r in sweep.rows]
    inner = kernels.drift_sweep(GAMMA, 0.35, [10, 20, 40], 12.8, quantity="inner")
    sl = kernels.slope(inner)
    dt = time.perf_counter() - t0
    norm_ok = abs(est - a) <= 0.10 * a
    trend_ok = res[-1] <= 1.25 * res[0]
    inner_ok = abs(sl.real - b.real) <= 0.15 * abs(b.real) and abs(sl.imag - b.imag) <= 0.15 * abs(b.imag)
    ok = norm_ok and trend_ok and inner_ok and dt < 300
    record(
        5,
        "linear drift",
        ok,
        f"||psi||^2/T={est:.4f} vs {a:.4f} (plain projection {raw:.4f}); |residual| over T=10,20,40: "
        + ", ".join(f"{r:.3f}" for r in res)
        + f"; inner slope {sl.real:.4f}{sl.imag:+.4f}i vs {b.real:.4f}{b.imag:+.4f}i, {dt:.0f}s",
    )
    assert ok


def test_c06_non_membership():
    ns = [64, 128, 256, 512]
    low = kernels.divergence_probe(0.2, 1.0, 5.0, ns)
    ctl = kernels.divergence_probe(0.35, 1.0, 5.0, ns)
    r_low, r_ctl = low.growth_ratio(), ctl.growth_ratio()
    ok = r_low > 5 and r_ctl < 1.5
    record(
        6,
        "non-membership probe",
        ok,
        f"H=0.2 last/first {r_low:.3f} (need > 5; n^(1-4H) growth allows {8 ** 0.2:.3f}), H=0.35 control {r_ctl:.3f} (need < 1.5)",
    )
    assert ok


def test_c07_contraction_decay():
    t0 = time.perf_counter()
    vals = [kernels.contraction_norm(GAMMA, 0.35, T, 48) for T in (5, 10, 20)]
    dt = time.perf_counter() - t0
    ok = vals[0] > vals[1] > vals[2] and dt < 300
    record(7, "contraction decay", ok, "T=5,10,20: " + ", ".join(f"{v:.4f}" for v in vals) + f", {dt:.1f}s")
    assert ok


def _slope(fn, ts):
    return quad.gap_rate([fn(T) for T in ts])


def test_c08_expansions():
    H = 0.35
    cases = [
        ("key0 beta=-0.5", lambda T: quad.asym_key0(-0.5, T), (25, 50, 100), -2.5, "two"),
        ("key delta=-0.2", lambda T: quad.asym_key(-0.4, -0.8, T), (50, 100, 200), -1.2, "two"),
        ("key delta=+0.2", lambda T: quad.asym_key(-0.4, -0.4, T), (50, 100, 200), -1.8, "two"),
        ("coro XZ", lambda T: quad.asym_coro(GAMMA, H, T, "XZ"), (50, 100, 200), 4 * H - 3, "two"),
        ("coro ZX", lambda T: quad.asym_coro(GAMMA, H, T, "ZX"), (50, 100, 200), 4 * H - 3, "two"),
        # the remainder is only O(1): bounded, so only growth is excluded
        ("coro Weighted", lambda T: quad.asym_coro(GAMMA, H, T, "Weighted"), (50, 100, 200), 0.0, "upper"),
    ]
    parts, ok = [], True
    for name, fn, ts, order, kind in cases:
        s = _slope(fn, ts)
        good = abs(s - order) <= 0.3 if kind == "two" else s <= order + 0.3
        ok &= good
        parts.append(f"{name} slope {s:.3f} (order {order:.2f}{'' if good else ' MISS'})")
    r0 = quad.asym_key(-0.5, -0.5, np.exp(10.0))
    ratio = float(np.real(r0.value_quadrature)) / 10.0
    log_ok = abs(ratio - 1) <= 0.10
    ok &= log_ok
    parts.append(f"delta=0 quadrature/log T at e^10 = {ratio:.4f} (tol 10%)")
    record(8, "asymptotic expansions", ok, "; ".join(parts))
    assert ok


def test_c09_xi_moments():
    t0 = time.perf_counter()
    p = bridges.BridgeParams(0.3, 0.1, 1.0)
    cf = bridges.xi_closed_form(p)
    qd = bridges.xi_quadrature_trace(p).limit
    mc, se = bridges.xi_monte_carlo(p, return_se=True)
    gap = bridges.max_rel_gap([cf, qd, mc])
    hol = bridges.holder_exponent_estimate(p)
    hol0 = bridges.holder_exponent_estimate(p, s=0.0)
    dt = time.perf_counter() - t0
    ok = gap < 0.02 and abs(hol - 0.2) <= 0.02
    record(
        9,
        "alpha-order fBm moments",
        ok,
        f"closed {cf:.6f}, quadrature {qd:.6f}, MC {mc:.5f} (se {se:.5f}); max gap {gap:.2e} (tol 2e-2); "
        f"Holder slope {hol:.4f} at the horizon (target 0.2; anchored at s=0 it is {hol0:.4f}), {dt:.0f}s",
    )
    assert ok


def test_c10_bridge():
    H, g = 0.3, 0.6
    tr = bridges.bridge_second_moment_trace(H, g)
    closed = bridges.bridge_second_moment(H, g)
    terms = bridges.bridge_limit_terms(H, g)
    rel = abs(tr.limit - closed) / closed
    orth = bridges.orthogonality_trace(H, g, 0.5)
    ok_m = rel <= 0.02
    ok_o = abs(orth.limit) < 5e-3
    record(
        10,
        "bridge moments",
        ok_m and ok_o,
        f"quadrature limit {tr.limit:.6f} (k=10 value {tr.values[-1]:.6f}) vs H^2/(g-H)B = {closed:.6f}: rel gap {rel:.3f} (tol 0.02); "
        f"sum of the J1,J2,J3 limits = {terms['total']:.6f}; orthogonality limit {orth.limit:.2e} "
        f"(k=10 value {orth.values[-1]:.2e}, tol 5e-3)",
    )
    assert ok_m and ok_o


def test_c11_determinism(tmp_path):
    args = ["mc", "--t-list", "5,10", "--n-steps", "1024", "--n-reps", "20", "--hurst", "0.35", "--format", "csv"]
    bodies = []
    for i in range(2):
        out = tmp_path / f"run{i}.csv"
        subprocess.run([sys.executable, "-m", "cfou", *args, "--out-path", str(out)], check=True, capture_output=True)
        bodies.append([ln for ln in out.read_text().splitlines() if not ln.startswith("#")])
    ok = bodies[0] == bodies[1] and len(bodies[0]) == 41
    record(11, "determinism", ok, f"two identical CLI runs, {len(bodies[0]) - 1} rows, bodies identical: {bodies[0] == bodies[1]}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
