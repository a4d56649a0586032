"""Acceptance gate.  Each test records one PASS/FAIL line, printed in the
terminal summary, and then asserts it."""
import time

import numpy as np
import pytest

from conftest import record
from projsmooth.dynamics import OuParams, ScenarioConfig, ou_step, simulate_scenario
from projsmooth.experiment import REFERENCE_TABLE, ExperimentConfig, run_monte_carlo
from projsmooth.projection import (
    VmfSphereModel,
    predict_rhs_generic,
    rk4_step,
    run_vmf_filter,
    run_vmf_smoother,
    smooth_rhs_generic,
    smoother_gain,
    vmf_predict_rhs,
    vmf_smooth_rhs,
)
from projsmooth.sphere_math import kappa_all
from projsmooth.vmf import MeasurementModel, expected_process_noise, expected_statistic, fisher, fisher_inv, sample_vmf

CELLS = [(1e-3, 1e-3), (1e-2, 1e-3), (1e-3, 1e-2), (1e-2, 1e-2)]


@pytest.fixture(scope="module")
def full_study():
    cfg = ExperimentConfig()
    t0 = time.perf_counter()
    table = run_monte_carlo(cfg)
    elapsed = time.perf_counter() - t0
    means = {(a, s, e): table.mean(a, s, e) for a, s in CELLS for e in cfg.estimators}
    return table, means, elapsed


def _fmt(means, a, s):
    return " ".join(f"{e}={means[(a, s, e)]:.4f}" for e in ("VMFF", "VMFS", "GF", "GS"))


@pytest.mark.slow
def test_c1_runtime_and_completeness(full_study):
    table, _, elapsed = full_study
    ok = elapsed < 600 and not table.failures
    record("C1 runtime < 10 min, 100 runs per cell", ok,
           f"{elapsed:.0f} s, {len(table.failures)} failed runs")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("a,s", CELLS)
def test_c1_vmfs_best(full_study, a, s):
    _, means, _ = full_study
    ok = means[(a, s, "VMFS")] < means[(a, s, "VMFF")] and means[(a, s, "VMFS")] < means[(a, s, "GS")]
    record(f"C1 VMFS < VMFF and VMFS < GS at ({a:g},{s:g})", ok, _fmt(means, a, s))
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("a,s", [c for c in CELLS if c[1] == 1e-2])
def test_c1_gs_worse_than_gf_at_high_s(full_study, a, s):
    _, means, _ = full_study
    ok = means[(a, s, "GS")] > means[(a, s, "GF")]
    record(f"C1 GS > GF at ({a:g},{s:g})", ok, _fmt(means, a, s))
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("a,s", CELLS)
def test_c1_vmff_close_to_gf(full_study, a, s):
    _, means, _ = full_study
    ok = means[(a, s, "VMFF")] <= means[(a, s, "GF")] + 0.2
    record(f"C1 VMFF <= GF + 0.2 at ({a:g},{s:g})", ok, _fmt(means, a, s))
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("a,s", CELLS)
def test_c2_factor_two_of_reference(full_study, a, s):
    _, means, _ = full_study
    parts, ok = [], True
    for e in ("VMFF", "VMFS", "GF"):
        ref = REFERENCE_TABLE[(a, s)][e]
        got = means[(a, s, e)]
        inside = ref / 2 <= got <= ref * 2
        ok &= inside
        parts.append(f"{e} {got:.4f} vs {ref:.4f}")
    record(f"C2 within factor 2 of reference at ({a:g},{s:g})", ok, ", ".join(parts))
    assert ok


@pytest.mark.slow
def test_monotone_in_alpha2_and_s(full_study):
    _, means, _ = full_study
    bad = []
    for e in ("VMFF", "VMFS", "GF", "GS"):
        for s in (1e-3, 1e-2):
            if means[(1e-2, s, e)] < means[(1e-3, s, e)]:
                bad.append(f"{e} alpha2 @ s={s:g}")
        for a in (1e-3, 1e-2):
            if means[(a, 1e-2, e)] < means[(a, 1e-3, e)]:
                bad.append(f"{e} s @ alpha2={a:g}")
    ok = not bad
    record("Mean error non-decreasing in alpha2 and s", ok, "; ".join(bad) or "all 16 comparisons hold")
    assert ok


def _draws(n, seed, log_r=(-6, 2)):
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n, 3))
    r = 10 ** rng.uniform(*log_r, (n, 1))
    th_s = d / np.linalg.norm(d, axis=1, keepdims=True) * r
    th_f = th_s + rng.standard_normal((n, 3)) * r
    # gyro rates at the stationary OU scale, gamma2 over the studied range
    omega = rng.standard_normal((n, 3)) * np.sqrt(OuParams().stationary_var)
    gamma2 = 10 ** rng.uniform(-3, -2, n)
    return th_s, th_f, omega, gamma2


def test_c3_generic_equals_closed_form():
    th_s, th_f, omega, gamma2 = _draws(10_000, 2024)
    model = VmfSphereModel(gamma2, omega)
    e_pred = np.abs(predict_rhs_generic(model, th_s) - vmf_predict_rhs(th_s, omega, gamma2)).max()
    e_smooth = np.abs(smooth_rhs_generic(model, th_s, th_f) - vmf_smooth_rhs(th_s, th_f, omega, gamma2)).max()
    ok = e_pred <= 1e-12 and e_smooth <= 1e-12
    record("C3 generic vs closed-form RHS within 1e-12 absolute (10^4 draws, |theta| in (1e-6, 100))", ok,
           f"max |diff| predict {e_pred:.2e}, smooth {e_smooth:.2e}")
    assert ok


def test_c3_bridge_identity():
    th, _, _, gamma2 = _draws(10_000, 2025)
    err = np.abs(smoother_gain(th, gamma2) - fisher_inv(th) @ expected_process_noise(th, gamma2)).max()
    ok = err <= 1e-12
    record("C3 fisher_inv * E[Q] equals G within 1e-12", ok, f"max |diff| {err:.2e}")
    assert ok


def test_c4_fisher_inverse_identity():
    th, _, _, _ = _draws(10_000, 7)
    err = np.abs(fisher(th) @ fisher_inv(th) - np.eye(3)).max()
    ok = err <= 1e-10
    record("C4 g * g^-1 = I within 1e-10, |theta| in (1e-6, 100)", ok, f"max |diff| {err:.2e}")
    assert ok


@pytest.mark.slow
def test_c4_simulator_norm_preservation():
    cfg = ScenarioConfig(duration_s=1000.0, gamma2=1e-2, seed=11)
    sc = simulate_scenario(cfg)
    steps = len(sc.times) - 1
    err = np.abs(np.linalg.norm(sc.truth, axis=-1) - 1.0).max()
    ok = steps >= 10**6 and err <= 1e-9
    record("C4 simulator norm preserved within 1e-9 over 10^6 steps", ok, f"{steps} steps, max dev {err:.2e}")
    assert ok


def test_c4_smoother_equals_filter_without_measurements():
    worst = 0.0
    for seed in range(3):
        sc = simulate_scenario(ScenarioConfig(duration_s=1.0, gamma2=1e-2, seed=seed)).without_measurements()
        th0 = 20.0 * np.random.default_rng(seed).standard_normal(3)
        filt = run_vmf_filter(sc, 1e-2, MeasurementModel(), theta0=th0)
        sm = run_vmf_smoother(filt, sc, 1e-2)
        worst = max(worst, np.abs(sm.theta_s - filt.theta_f).max())
    ok = worst <= 1e-8
    record("C4 smoother equals filter without measurements within 1e-8", ok, f"max |diff| {worst:.2e}")
    assert ok


def test_c4_uniform_is_fixed_point():
    rng = np.random.default_rng(0)
    rhs = [vmf_predict_rhs(np.zeros(3), rng.standard_normal(3), g2) for g2 in (0.0, 1e-3, 1.0)]
    sc = simulate_scenario(ScenarioConfig(duration_s=0.5, seed=2)).without_measurements()
    filt = run_vmf_filter(sc, 1e-3, MeasurementModel())
    ok = all(np.all(r == 0) for r in rhs) and np.all(filt.theta_f == 0)
    record("C4 theta = 0 is an exact fixed point of the prediction ODE", ok, "rhs and integrated trajectory")
    assert ok


def test_c5_kappa_finite_differences():
    r = np.array([0.1, 0.3, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0])
    h = 1e-5
    kv = kappa_all(r)
    fd1 = (kappa_all(r + h).kappa - kappa_all(r - h).kappa) / (2 * h)
    fd2 = (kappa_all(r + h).kappa_prime - kappa_all(r - h).kappa_prime) / (2 * h)
    e1 = np.max(np.abs(kv.kappa_prime - fd1) / kv.kappa_prime)
    e2 = np.max(np.abs(kv.kappa_double_prime - fd2) / kv.kappa_double_prime)
    ok = e1 <= 1e-6 and e2 <= 1e-6
    record("C5 kappa', kappa'' match finite differences within 1e-6 relative", ok, f"{e1:.1e}, {e2:.1e}")
    assert ok


def test_c5_vmf_sampler_moments():
    rng = np.random.default_rng(99)
    n = 10**6
    worst = 0.0
    for theta in ([0.0, 0.0, 1.0], [1.5, -0.5, 2.0], [-4.0, 3.0, 1.0]):
        theta = np.asarray(theta)
        x = sample_vmf(theta, rng, n)
        mean = x.mean(axis=0)
        z_mean = np.abs(mean - expected_statistic(theta)) / (x.std(axis=0) / np.sqrt(n))
        c = x - mean
        prods = c[:, :, None] * c[:, None, :]
        z_cov = np.abs(prods.mean(axis=0) - fisher(theta)) / (prods.std(axis=0) / np.sqrt(n))
        worst = max(worst, z_mean.max(), z_cov.max())
    ok = worst < 3.0
    record("C5 E[X] and Cov[X] = g(theta) match 10^6-draw Monte Carlo within 3 SE", ok,
           f"largest deviation {worst:.2f} SE")
    assert ok


def test_c5_ou_stationary_variance():
    rng = np.random.default_rng(5)
    p = OuParams()
    w = np.zeros((10_000, 3))
    for _ in range(200):
        w = ou_step(w, 0.01, p, rng)
    acc = []
    for _ in range(100):
        w = ou_step(w, 0.01, p, rng)
        acc.append(w.var())
    target = p.diffusion**2 / (2 * abs(p.reversion_rate))
    rel = abs(np.mean(acc) - target) / target
    ok = rel <= 0.02
    record("C5 OU stationary variance within 2%", ok, f"{np.mean(acc):.4f} vs {target:.4f}")
    assert ok


def test_c6_rk4_order():
    w, g2, th0 = np.array([1.0, 0.5, -0.3]), 0.5, np.array([2.0, 1.0, 3.0])
    f = lambda t, y: vmf_predict_rhs(y, w, g2)

    def solve(h):
        y = th0.copy()
        for k in range(int(round(1.0 / h))):
            y = rk4_step(f, k * h, y, h)
        return y

    ref = solve(1e-4)
    ratio = np.linalg.norm(solve(0.1) - ref) / np.linalg.norm(solve(0.05) - ref)
    ok = 12 <= ratio <= 20
    record("C6 RK4 error ratio in [12, 20] when halving h", ok, f"ratio {ratio:.2f}")
    assert ok
