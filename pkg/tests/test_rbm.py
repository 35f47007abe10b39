import numpy as np
import pytest

from crisscross.params import (BrownianData, NetworkParams, brownian_data,
                               lp_optimizer, lp_value)
from crisscross.boundary import FreeBoundary
from crisscross.rbm import (
    CostEstimate, McConfig, estimate_jstar, optimal_bcp_processes, sample_B,
    sample_X, simulate_wstar, GridMismatch, InvalidN, ConfigError,
)


def drift_only_bd(drift, scale=0.0):
    d = np.asarray(drift, float)
    cov = scale * np.eye(2)
    return BrownianData(x_drift=np.zeros(3), x_cov=np.zeros((3, 3)),
                        b_drift=d, b_cov=cov,
                        workload_map=np.array([[1.0, 0.5, 0.0],
                                               [0.0, 1.0, 1.0]]))


def test_mc_config_validation():
    with pytest.raises(InvalidN):
        McConfig(n_paths=1)
    with pytest.raises(InvalidN):
        McConfig(n_paths=101, antithetic=True)
    with pytest.raises(ConfigError):
        McConfig(n_paths=10, dt=-0.1)
    with pytest.raises(ConfigError):
        McConfig(n_paths=10, dt=1.0, horizon=0.5)


def test_sample_b_deterministic_drift():
    bd = drift_only_bd([0.5, -0.25])
    cfg = McConfig(n_paths=4, dt=0.1, horizon=2.0, seed=0)
    t, b1, b2 = sample_B(bd, cfg)
    assert np.allclose(t, np.arange(21) * 0.1)
    assert np.allclose(b1, 0.5 * t)
    assert np.allclose(b2, -0.25 * t)


def test_sample_b_moments(ref_bd):
    cfg = McConfig(n_paths=20000, dt=0.05, horizon=2.0, antithetic=False,
                   seed=3)
    t, b1, b2 = sample_B(ref_bd, cfg)
    inc = np.stack([np.diff(b1, axis=1).ravel(),
                    np.diff(b2, axis=1).ravel()])
    cov = np.cov(inc) / cfg.dt
    assert np.allclose(np.mean(inc, axis=1) / cfg.dt, ref_bd.b_drift,
                       atol=0.02)
    assert np.allclose(cov, ref_bd.b_cov, atol=0.05)


def test_sample_b_antithetic_mirrors(ref_bd):
    cfg = McConfig(n_paths=8, dt=0.1, horizon=1.0, antithetic=True, seed=5)
    t, b1, b2 = sample_B(ref_bd, cfg)
    half = 4
    drift1 = ref_bd.b_drift[0] * t
    drift2 = ref_bd.b_drift[1] * t
    assert np.allclose(b1[:half] - drift1, -(b1[half:] - drift1), atol=1e-12)
    assert np.allclose(b2[:half] - drift2, -(b2[half:] - drift2), atol=1e-12)


def test_wstar_stays_in_region(ref_bd, ref_boundary):
    cfg = McConfig(n_paths=50, dt=0.02, horizon=4.0, seed=2)
    t, w1, w2, i1, i2 = simulate_wstar(ref_boundary, ref_bd, cfg)
    assert np.all(w2 >= -1e-12)
    assert np.all(w1 - ref_boundary(w2) >= -1e-9)
    assert np.all(np.diff(i1, axis=1) >= -1e-12)
    assert np.all(np.diff(i2, axis=1) >= -1e-12)
    assert np.all(i1[:, 0] == 0.0) and np.all(i2[:, 0] == 0.0)


def test_wstar_zero_noise_negative_drift():
    # pure downward drift pins both coordinates to the boundary
    bd = drift_only_bd([-1.0, -1.0])
    fb = FreeBoundary.zero(0.5)
    cfg = McConfig(n_paths=4, dt=0.1, horizon=2.0, seed=0)
    t, w1, w2, i1, i2 = simulate_wstar(fb, bd, cfg)
    assert np.allclose(w1, 0.0, atol=1e-12)
    assert np.allclose(w2, 0.0, atol=1e-12)
    assert np.allclose(i1, t, atol=1e-12)
    assert np.allclose(i2, t, atol=1e-12)


def test_wstar_zero_noise_sloped_barrier():
    # w2 grows freely, w1 is dragged up along psi(w2) = 0.5 w2
    bd = drift_only_bd([-1.0, 1.0])
    fb = FreeBoundary.cone(0.5)
    cfg = McConfig(n_paths=4, dt=0.1, horizon=2.0, seed=0)
    t, w1, w2, i1, i2 = simulate_wstar(fb, bd, cfg)
    assert np.allclose(w2, t, atol=1e-12)
    assert np.allclose(w1, 0.5 * t, atol=1e-10)


def test_estimate_jstar_constant_cost(ref_params, ref_bd, ref_boundary):
    gam = ref_params.gamma
    cfg = McConfig(n_paths=64, dt=0.01, horizon=3.0, seed=1)
    est = estimate_jstar(ref_params, ref_boundary, ref_bd, cfg,
                         hhat=lambda w1, w2: np.ones_like(w1))
    exact = (1.0 - np.exp(-gam * cfg.horizon)) / gam
    t = np.arange(int(round(cfg.horizon / cfg.dt)) + 1) * cfg.dt
    quad = np.trapezoid(np.exp(-gam * t), t)
    assert abs(est.mean - quad) < 1e-12
    assert abs(est.mean - exact) < 1e-4  # trapezoid error O(dt^2)
    assert est.std_error < 1e-12
    assert est.tail_bound <= np.exp(-gam * cfg.horizon) / gam + 1e-12


def test_estimate_jstar_reference_value(ref_params, ref_bd, ref_boundary):
    cfg = McConfig(n_paths=4000, dt=0.01, seed=7)
    est = estimate_jstar(ref_params, ref_boundary, ref_bd, cfg)
    assert isinstance(est, CostEstimate)
    # frozen large-run value 1.5917 +- 0.0012; allow 4 SEs at this size
    assert abs(est.mean - 1.5917) < 4 * est.std_error + 0.005
    lo, hi = est.ci95()
    assert lo < est.mean < hi
    assert est.n_samples == 2000  # antithetic pairs count once


def test_estimate_jstar_dominated_by_suboptimal(ref_params, ref_bd,
                                                ref_boundary):
    cfg = McConfig(n_paths=20000, dt=0.02, seed=9)
    opt = estimate_jstar(ref_params, ref_boundary, ref_bd, cfg)
    cap = ref_params.mu[2] / ref_params.mu[1]
    for alt in (FreeBoundary.zero(cap), FreeBoundary.cone(cap)):
        sub = estimate_jstar(ref_params, alt, ref_bd, cfg)
        margin = 2 * (opt.std_error + sub.std_error)
        assert sub.mean > opt.mean + margin


def test_optimal_bcp_matches_lp(ref_params, ref_bd, ref_boundary):
    cfg = McConfig(n_paths=16, dt=0.05, horizon=2.0, seed=4)
    t, x, b1, b2 = sample_X(ref_bd, cfg)
    t2, w1, w2, i1, i2 = simulate_wstar(ref_boundary, ref_bd, cfg)
    out = optimal_bcp_processes(ref_params, (w1, w2), (i1, i2), x)
    q = np.stack([out["Q1"], out["Q2"], out["Q3"]])
    for k in np.ndindex(w1.shape):
        q_ref = lp_optimizer(ref_params, float(w1[k]), float(w2[k]))
        assert np.allclose(q[(slice(None),) + k], q_ref, atol=1e-12)
    # queue vector carries the workload and costs hhat
    cost = sum(c * qq for c, qq in zip(ref_params.cost, q))
    assert np.allclose(cost, lp_value(ref_params, w1, w2), atol=1e-10)


def test_optimal_bcp_hand_examples(ref_params, ref_bd):
    w1 = np.array([[1.0, 0.25]])
    w2 = np.array([[1.0, 1.0]])
    zeros = np.zeros_like(w1)
    x = np.zeros(w1.shape + (3,))
    out = optimal_bcp_processes(ref_params, (w1, w2), (zeros, zeros), x)
    assert np.allclose([out["Q1"][0, 0], out["Q2"][0, 0], out["Q3"][0, 0]],
                       [0.5, 1.0, 0.0], atol=1e-12)
    assert np.allclose([out["Q1"][0, 1], out["Q2"][0, 1], out["Q3"][0, 1]],
                       [0.0, 0.5, 0.5], atol=1e-12)


def test_optimal_bcp_controls_consistent(ref_params, ref_bd, ref_boundary):
    # Q = q(X + RY) must tie out: workload of Q equals L X + I and Y3 = I2
    cfg = McConfig(n_paths=8, dt=0.05, horizon=2.0, seed=6)
    t, x, b1, b2 = sample_X(ref_bd, cfg)
    t2, w1, w2, i1, i2 = simulate_wstar(ref_boundary, ref_bd, cfg)
    out = optimal_bcp_processes(ref_params, (w1, w2), (i1, i2), x)
    mu1, mu2, mu3 = ref_params.mu
    assert np.allclose(out["Q1"] / mu1 + out["Q2"] / mu2, w1, atol=1e-10)
    assert np.allclose((out["Q2"] + out["Q3"]) / mu3, w2, atol=1e-10)
    assert np.allclose(out["Y3"], i2, atol=1e-10)
    for k in ("Y1", "Y2", "Y3"):
        assert np.allclose(out[k][:, 0], 0.0, atol=1e-12)


def test_optimal_bcp_grid_mismatch(ref_params):
    w = np.zeros((2, 5))
    x = np.zeros((2, 4, 3))
    with pytest.raises(GridMismatch):
        optimal_bcp_processes(ref_params, (w, w), (w, w), x)


def test_bridge_reduces_step_bias(ref_params, ref_bd, ref_boundary):
    # plain Euler under-reflects; the bridge correction raises the estimate
    coarse = McConfig(n_paths=20000, dt=0.05, seed=11, bridge=False)
    bridged = McConfig(n_paths=20000, dt=0.05, seed=11, bridge=True)
    a = estimate_jstar(ref_params, ref_boundary, ref_bd, coarse)
    b = estimate_jstar(ref_params, ref_boundary, ref_bd, bridged)
    assert b.mean > a.mean + 2 * (a.std_error + b.std_error)
    assert abs(b.mean - 1.5917) < 0.02
