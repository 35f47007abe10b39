"""Monte Carlo for the reflected Brownian workload under a boundary policy.

The two-dimensional workload W* is built pathwise from the Brownian input B:
W2* is the one-sided reflection of B2 at zero, and W1* is B1 reflected at the
moving barrier psi(W2*).  The discounted cost integral is accumulated with the
trapezoidal rule; antithetic pairing of the Gaussian increments is on by
default.  `estimate_jstar` streams over time steps, so memory stays O(paths),
independent of the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, GridMismatch, InvalidN, NonPsdCovariance
from .params import BrownianData, NetworkParams, lp_optimizer, lp_value


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 100_000
    dt: float = 0.01
    horizon: float | None = None   # default 12/gamma where gamma is known
    antithetic: bool = True
    bridge: bool = True            # bridge-minimum correction for reflection
    seed: int = 0

    def __post_init__(self):
        if self.n_paths < 2:
            raise InvalidN(f"need at least 2 paths, got {self.n_paths}")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.horizon is not None and self.horizon <= self.dt:
            raise ConfigError("horizon must exceed dt")
        if self.antithetic and self.n_paths % 2:
            raise InvalidN("antithetic pairing needs an even number of paths")


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    std_error: float
    n_samples: int
    horizon: float
    tail_bound: float    # e^{-gamma T} * (sup observed running cost) / gamma
    dt: float

    def ci95(self) -> tuple[float, float]:
        return (self.mean - 1.96 * self.std_error, self.mean + 1.96 * self.std_error)


def _require_horizon(cfg: McConfig, gamma: float | None = None) -> float:
    if cfg.horizon is not None:
        return cfg.horizon
    if gamma is not None:
        return 12.0 / gamma
    raise ConfigError("an explicit horizon is required here")


def _chol(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov + 1e-15 * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError:
        raise NonPsdCovariance("covariance is not positive semidefinite")


def _gaussian_block(rng, shape_half, antithetic):
    Z = rng.standard_normal(shape_half)
    if antithetic:
        Z = np.concatenate([Z, -Z], axis=0)
    return Z


def sample_B(bd: BrownianData, cfg: McConfig,
             rng: np.random.Generator | None = None):
    """Brownian input paths on the time grid; returns (times, B1, B2), each
    path array of shape (n_paths, n_steps+1).  B(0) = 0."""
    T = _require_horizon(cfg)
    n_steps = int(round(T / cfg.dt))
    times = cfg.dt * np.arange(n_steps + 1)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    L = _chol(bd.b_cov)
    half = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    Z = _gaussian_block(rng, (half, n_steps, 2), cfg.antithetic)
    dB = np.sqrt(cfg.dt) * (Z @ L.T) + cfg.dt * bd.b_drift
    B = np.zeros((cfg.n_paths, n_steps + 1, 2))
    np.cumsum(dB, axis=1, out=B[:, 1:, :])
    return times, B[:, :, 0], B[:, :, 1]


def _bridge_min(x0, x1, var, u):
    """Minimum over one step of a Brownian bridge pinned at x0, x1.

    Standard inverse-cdf draw: m = (x0 + x1 - sqrt((x1-x0)^2 - 2 var ln u))/2.
    Euler reflection only sees endpoint values and misses within-step
    excursions below the barrier, an O(sqrt(dt)) bias; sampling the bridge
    minimum restores them."""
    return 0.5 * (x0 + x1 - np.sqrt((x1 - x0) ** 2 - 2.0 * var * np.log(u)))


def _reflect_paths(B1, B2, psi, bd=None, dt=None, rng=None, antithetic=False):
    """Vectorized moving-barrier reflection across a batch of paths; the same
    recursion as the pathwise Skorohod construction.  If `bd`, `dt` and `rng`
    are given, the running minima use bridge-minimum draws."""
    step2 = np.minimum(B2[..., :-1], B2[..., 1:])
    if rng is not None and bd is not None and bd.b_cov[1, 1] > 0:
        u = _uniform_block(rng, step2.shape, antithetic)
        step2 = _bridge_min(B2[..., :-1], B2[..., 1:], bd.b_cov[1, 1] * dt, u)
    run_min2 = np.minimum.accumulate(np.minimum(step2, 0.0), axis=-1)
    run_min2 = np.concatenate([np.zeros(B2.shape[:-1] + (1,)), run_min2], axis=-1)
    W2 = B2 - run_min2
    I2 = -run_min2
    bar = psi(W2)
    F = B1 - bar
    step1 = np.minimum(F[..., :-1], F[..., 1:])
    if rng is not None and bd is not None and bd.b_cov[0, 0] > 0:
        u = _uniform_block(rng, step1.shape, antithetic)
        step1 = _bridge_min(F[..., :-1], F[..., 1:], bd.b_cov[0, 0] * dt, u)
    run_min1 = np.minimum.accumulate(np.minimum(step1, 0.0), axis=-1)
    run_min1 = np.concatenate([np.zeros(F.shape[:-1] + (1,)), run_min1], axis=-1)
    W1 = F - run_min1 + bar
    I1 = -run_min1
    return W1, W2, I1, I2


def _uniform_block(rng, shape, antithetic):
    """Uniforms for bridge draws; mirrored across antithetic halves so the
    pairing on the Gaussian increments is preserved."""
    if antithetic:
        half = shape[0] // 2
        u = rng.random((half,) + shape[1:])
        return np.concatenate([u, u], axis=0)
    return rng.random(shape)


def simulate_wstar(
    fb: Callable[[np.ndarray], np.ndarray],
    bd: BrownianData,
    cfg: McConfig,
):
    """Workload and idleness paths (times, W1, W2, I1, I2) under boundary fb.

    Stores full paths: use for plots and diagnostics at modest n_paths.
    """
    rng = np.random.default_rng(cfg.seed)
    times, B1, B2 = sample_B(bd, cfg, rng)
    if cfg.bridge:
        W1, W2, I1, I2 = _reflect_paths(B1, B2, fb, bd=bd, dt=cfg.dt,
                                        rng=rng, antithetic=cfg.antithetic)
    else:
        W1, W2, I1, I2 = _reflect_paths(B1, B2, fb)
    return times, W1, W2, I1, I2


def estimate_jstar(
    p: NetworkParams,
    fb: Callable[[np.ndarray], np.ndarray],
    bd: BrownianData,
    cfg: McConfig,
    hhat: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> CostEstimate:
    """Discounted-cost estimate of E int_0^T e^{-gamma t} hhat(W*(t)) dt.

    Streams over time steps with trapezoidal quadrature.  With antithetic
    pairing the per-sample values are pair means, so n_samples = n_paths/2.
    The reported tail bound is e^{-gamma T} times the largest running cost
    seen along any path, divided by gamma.
    """
    gamma = p.gamma
    T = _require_horizon(cfg, gamma)
    n_steps = int(round(T / cfg.dt))
    if hhat is None:
        hhat = lambda w1, w2: lp_value(p, w1, w2)

    rng = np.random.default_rng(cfg.seed)
    L = _chol(bd.b_cov)
    half = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    sqdt = np.sqrt(cfg.dt)

    n = cfg.n_paths
    B1 = np.zeros(n)
    B2 = np.zeros(n)
    m2 = np.zeros(n)                  # running min of min(B2, 0)
    m1 = np.zeros(n)                  # running min of min(B1 - psi(W2), 0)
    F_prev = np.zeros(n)
    cost = np.zeros(n)
    h_prev = np.asarray(hhat(np.zeros(n), np.zeros(n)), dtype=float) * np.ones(n)
    w_prev = h_prev.copy()            # discounted integrand at t=0
    sup_h = float(h_prev.max())
    a11, a22 = bd.b_cov[0, 0], bd.b_cov[1, 1]
    use_bridge = cfg.bridge

    for k in range(1, n_steps + 1):
        Z = _gaussian_block(rng, (half, 2), cfg.antithetic)
        dB = sqdt * (Z @ L.T) + cfg.dt * bd.b_drift
        B2_prev = B2.copy()
        B1 += dB[:, 0]
        B2 += dB[:, 1]
        if use_bridge and a22 > 0:
            u = _uniform_block(rng, (n,), cfg.antithetic)
            np.minimum(m2, _bridge_min(B2_prev, B2, a22 * cfg.dt, u), out=m2)
        else:
            np.minimum(m2, B2, out=m2)
        W2 = B2 - m2
        bar = fb(W2)
        F = B1 - bar
        if use_bridge and a11 > 0:
            u = _uniform_block(rng, (n,), cfg.antithetic)
            np.minimum(m1, _bridge_min(F_prev, F, a11 * cfg.dt, u), out=m1)
        else:
            np.minimum(m1, F, out=m1)
        F_prev = F
        W1 = F - m1 + bar
        h_cur = np.asarray(hhat(W1, W2), dtype=float) * np.ones(n)
        sup_h = max(sup_h, float(h_cur.max()))
        w_cur = h_cur * np.exp(-gamma * k * cfg.dt)
        cost += 0.5 * cfg.dt * (w_prev + w_cur)
        w_prev = w_cur

    samples = 0.5 * (cost[:half] + cost[half:]) if cfg.antithetic else cost
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(len(samples)))
    tail = np.exp(-gamma * T) * sup_h / gamma
    return CostEstimate(mean=mean, std_error=se, n_samples=len(samples),
                        horizon=T, tail_bound=float(tail), dt=cfg.dt)


def sample_X(bd: BrownianData, cfg: McConfig):
    """Three-dimensional netput paths X plus the induced workload input B.

    Needed when the idleness triplet Y* is requested, since Y* depends on the
    components of X and not only on B."""
    T = _require_horizon(cfg)
    n_steps = int(round(T / cfg.dt))
    times = cfg.dt * np.arange(n_steps + 1)
    rng = np.random.default_rng(cfg.seed)
    Lx = _chol(bd.x_cov)
    half = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    Z = _gaussian_block(rng, (half, n_steps, 3), cfg.antithetic)
    dX = np.sqrt(cfg.dt) * (Z @ Lx.T) + cfg.dt * bd.x_drift
    X = np.zeros((cfg.n_paths, n_steps + 1, 3))
    np.cumsum(dX, axis=1, out=X[:, 1:, :])
    B = X @ bd.workload_map.T
    return times, X, B[:, :, 0], B[:, :, 1]


def optimal_bcp_processes(
    p: NetworkParams,
    wstar: tuple[np.ndarray, np.ndarray],
    istar: tuple[np.ndarray, np.ndarray],
    x: np.ndarray,
) -> dict[str, np.ndarray]:
    """Queue lengths Q* and idleness Y* along given workload paths.

    `wstar` = (W1, W2), `istar` = (I1, I2), `x` the netput paths with class
    components along the last axis.  Branch on mu3 W2 < mu2 W1 versus >=:
    on the first branch class 3 is empty and server 2's idleness follows X3;
    on the second class 1 is empty and server 1's idleness follows X1.
    """
    W1, W2 = wstar
    I1, I2 = istar
    if not (W1.shape == W2.shape == I1.shape == I2.shape == x.shape[:-1]) or x.shape[-1] != 3:
        raise GridMismatch("workload, idleness and netput paths must share a grid")
    mu1, mu2, mu3 = p.mu
    Q1, Q2, Q3 = lp_optimizer(p, W1, W2)
    X1, X3 = x[..., 0], x[..., 2]
    on_branch2 = mu3 * W2 >= mu2 * W1
    Y1_b1 = -X3 / mu2 + I1 - (mu3 / mu2) * I2
    Y2_b1 = X3 / mu2 + (mu3 / mu2) * I2
    Y1_b2 = -X1 / mu1
    Y2_b2 = X1 / mu1 + I1
    Y1 = np.where(on_branch2, Y1_b2, Y1_b1)
    Y2 = np.where(on_branch2, Y2_b2, Y2_b1)
    Y3 = I2
    return {"Q1": Q1, "Q2": Q2, "Q3": Q3, "Y1": Y1, "Y2": Y2, "Y3": Y3}
