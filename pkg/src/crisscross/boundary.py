"""Numerical solution of the two-dimensional workload singular control problem
and extraction of the idling boundary psi.

The value function J(w1, w2) minimizes E int e^{-gamma t} hhat(W(t)) dt where
W = w + B + I, I componentwise nondecreasing (costless pushing in +e1, +e2).
Discretization is a locally consistent Markov-chain approximation on a square
grid: upwind differences for the drift, central for the diffusion, diagonal
transitions absorbing the covariance cross term.  Singular controls appear as
instantaneous grid jumps, so the dynamic-programming operator at each node is

    J = min( (sum_y p(y) J(y) + hhat*dt) / (1 + gamma*dt),  J(+e1),  J(+e2) ).

Gauss-Seidel sweeps with alternating direction, warm-started from a coarser
grid.  The outer boundary is reflecting; the axes are handled by projection,
which matches the pushing directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import (
    ConfigError,
    NegativeInput,
    NoConvergence,
    NonPsdCovariance,
    NotConverged,
    WrongRegime,
)
from .params import BrownianData, NetworkParams, Regime, classify_regime, lp_value

TOL_VI = 1e-8       # sup-norm change per sweep at convergence
TOL_ACT = 1e-6      # branch-classification tolerance for the action mask
MAX_SWEEPS = 200_000

# action_mask bits
PUSH_E1 = 1
PUSH_E2 = 2


@dataclass(frozen=True)
class GridSpec:
    h: float
    wmax: float

    def __post_init__(self):
        if not (self.h > 0 and self.wmax > self.h):
            raise ConfigError(f"need 0 < h < wmax, got h={self.h}, wmax={self.wmax}")

    @property
    def n(self) -> int:
        return max(2, round(self.wmax / self.h))


def default_wmax(bd: BrownianData, gamma: float) -> float:
    """Domain truncation: large enough that discounting kills boundary effects."""
    lam_max = float(np.linalg.eigvalsh(bd.b_cov)[-1])
    return 8.0 * np.sqrt(lam_max / gamma)


@dataclass
class ValueGrid:
    h1: float
    h2: float
    n1: int
    n2: int
    values: np.ndarray       # (n1+1, n2+1)
    action_mask: np.ndarray  # (n1+1, n2+1) uint8 bitmask
    converged: bool
    sweeps: int
    tol_vi: float

    @property
    def w1(self) -> np.ndarray:
        return self.h1 * np.arange(self.n1 + 1)

    @property
    def w2(self) -> np.ndarray:
        return self.h2 * np.arange(self.n2 + 1)


@dataclass(frozen=True)
class FreeBoundary:
    """Tabulated idling boundary with piecewise-linear interpolation.

    Beyond the last knot the boundary continues linearly with the last
    segment's slope clipped to [0, slope_cap].
    """

    w2_knots: np.ndarray
    psi_values: np.ndarray
    slope_cap: float

    def __post_init__(self):
        k = np.asarray(self.w2_knots, dtype=float)
        v = np.asarray(self.psi_values, dtype=float)
        object.__setattr__(self, "w2_knots", k)
        object.__setattr__(self, "psi_values", v)
        if k.ndim != 1 or v.shape != k.shape or len(k) < 2:
            raise ConfigError("need >= 2 knots with matching psi values")
        if k[0] != 0.0 or np.any(np.diff(k) <= 0):
            raise ConfigError("knots must start at 0 and be strictly increasing")
        if abs(v[0]) > 1e-12:
            raise ConfigError("psi(0) must be 0")
        if np.any(np.diff(v) < -1e-12):
            raise ConfigError("psi must be nondecreasing")

    @property
    def tail_slope(self) -> float:
        s = (self.psi_values[-1] - self.psi_values[-2]) / (self.w2_knots[-1] - self.w2_knots[-2])
        return float(np.clip(s, 0.0, self.slope_cap))

    def __call__(self, w2):
        w2 = np.asarray(w2, dtype=float)
        if np.any(w2 < 0):
            raise NegativeInput("psi is defined on w2 >= 0")
        out = np.interp(w2, self.w2_knots, self.psi_values)
        last_k, last_v = self.w2_knots[-1], self.psi_values[-1]
        beyond = w2 > last_k
        if np.any(beyond):
            out = np.where(beyond, last_v + self.tail_slope * (w2 - last_k), out)
        return out if out.ndim else float(out)

    @classmethod
    def zero(cls, slope_cap: float, w2_max: float = 1.0) -> "FreeBoundary":
        return cls(np.array([0.0, w2_max]), np.array([0.0, 0.0]), slope_cap)

    @classmethod
    def cone(cls, slope_cap: float, w2_max: float = 1.0) -> "FreeBoundary":
        return cls(np.array([0.0, w2_max]), np.array([0.0, slope_cap * w2_max]), slope_cap)


def psi_eval(fb: FreeBoundary, w2):
    return fb(w2)


# -- transition probabilities ------------------------------------------------

def _chain_coefficients(bd: BrownianData, gamma: float, h: float):
    a = bd.b_cov
    a11, a22, a12 = a[0, 0], a[1, 1], a[0, 1]
    try:
        np.linalg.cholesky(a + 1e-14 * np.eye(2))
    except np.linalg.LinAlgError:
        raise NonPsdCovariance("workload covariance is not positive semidefinite")
    if a11 - abs(a12) < -1e-12 or a22 - abs(a12) < -1e-12:
        raise ConfigError(
            "covariance cross term exceeds a diagonal entry; the diagonal-"
            "transition scheme is not monotone for these parameters")
    m1, m2 = bd.b_drift
    denom = a11 + a22 - abs(a12) + h * (abs(m1) + abs(m2))
    dt = h * h / denom
    p = np.zeros(8)
    p[0] = (a11 - abs(a12)) / 2 + h * max(m1, 0.0)   # +e1
    p[1] = (a11 - abs(a12)) / 2 + h * max(-m1, 0.0)  # -e1
    p[2] = (a22 - abs(a12)) / 2 + h * max(m2, 0.0)   # +e2
    p[3] = (a22 - abs(a12)) / 2 + h * max(-m2, 0.0)  # -e2
    p[4] = max(a12, 0.0) / 2   # +e1+e2
    p[5] = max(a12, 0.0) / 2   # -e1-e2
    p[6] = max(-a12, 0.0) / 2  # +e1-e2
    p[7] = max(-a12, 0.0) / 2  # -e1+e2
    p /= denom
    return p, dt


@njit(cache=True)
def _gs_sweep(J, H, p, dt, beta, order):  # pragma: no cover - jit kernel
    n1 = J.shape[0] - 1
    n2 = J.shape[1] - 1
    maxdiff = 0.0
    if order % 2 == 0:
        i_range = range(0, n1 + 1)
    else:
        i_range = range(n1, -1, -1)
    for i in i_range:
        iu = i + 1 if i < n1 else n1
        idn = i - 1 if i > 0 else 0
        if (order // 2) % 2 == 0:
            j_range = range(0, n2 + 1)
        else:
            j_range = range(n2, -1, -1)
        for j in j_range:
            ju = j + 1 if j < n2 else n2
            jd = j - 1 if j > 0 else 0
            acc = (p[0] * J[iu, j] + p[1] * J[idn, j]
                   + p[2] * J[i, ju] + p[3] * J[i, jd]
                   + p[4] * J[iu, ju] + p[5] * J[idn, jd]
                   + p[6] * J[iu, jd] + p[7] * J[idn, ju])
            new = beta * (acc + H[i, j] * dt)
            if i < n1 and J[i + 1, j] < new:
                new = J[i + 1, j]
            if j < n2 and J[i, j + 1] < new:
                new = J[i, j + 1]
            d = new - J[i, j]
            if d < 0.0:
                d = -d
            if d > maxdiff:
                maxdiff = d
            J[i, j] = new
    return maxdiff


def _enforce_monotone(J: np.ndarray) -> None:
    """Transitive pass J[i,j] <- min(J[i,j], J[i+1,j], J[i,j+1]), high to low."""
    n1, n2 = J.shape[0] - 1, J.shape[1] - 1
    for i in range(n1 - 1, -1, -1):
        J[i, :] = np.minimum(J[i, :], J[i + 1, :])
    for j in range(n2 - 1, -1, -1):
        J[:, j] = np.minimum(J[:, j], J[:, j + 1])


def _hhat_grid(p: NetworkParams, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    c1, c2, c3 = p.cost
    mu1, mu2, mu3 = p.mu
    W1, W2 = np.meshgrid(w1, w2, indexing="ij")
    branch1 = c1 * mu1 * W1 + (mu3 / mu2) * (c2 * mu2 - c1 * mu1) * W2
    branch2 = (c2 * mu2 - c3 * mu2) * W1 + c3 * mu3 * W2
    return np.where(mu3 * W2 <= mu2 * W1, branch1, branch2)


def _solve_on_grid(H, p_trans, dt, gamma, tol_vi, max_sweeps, J0=None):
    J = np.zeros_like(H) if J0 is None else J0.copy()
    beta = 1.0 / (1.0 + gamma * dt)
    order = 0
    for sweep in range(1, max_sweeps + 1):
        maxdiff = _gs_sweep(J, H, p_trans, dt, beta, order)
        order = (order + 1) % 4
        if maxdiff < tol_vi:
            return J, sweep
    raise NoConvergence(max_sweeps, maxdiff)


def solve_value(
    p: NetworkParams,
    bd: BrownianData,
    grid: GridSpec,
    hhat: np.ndarray | None = None,
    tol_vi: float = TOL_VI,
    tol_act: float = TOL_ACT,
    max_sweeps: int = MAX_SWEEPS,
) -> ValueGrid:
    """Value iteration to the discrete fixed point; returns grid + action mask.

    `hhat` overrides the running-cost grid (test hook); by default it is the
    static-LP value evaluated at the nodes.
    """
    regime = classify_regime(p)
    if regime in (Regime.CaseI, Regime.CaseIID):
        raise WrongRegime(f"solver supports Cases IIA/IIB/IIC, got {regime.value}")

    n = grid.n
    h = grid.wmax / n
    w = h * np.arange(n + 1)
    H = _hhat_grid(p, w, w) if hhat is None else np.asarray(hhat, dtype=float)
    if H.shape != (n + 1, n + 1):
        raise ConfigError(f"hhat grid must have shape {(n + 1, n + 1)}")

    # warm start from a coarser grid (same wmax, half the resolution)
    J0 = None
    if n >= 32 and hhat is None:
        coarse = solve_value(p, bd, GridSpec(h=2 * h, wmax=grid.wmax),
                             tol_vi=max(tol_vi, 1e-7), max_sweeps=max_sweeps)
        from scipy.interpolate import RegularGridInterpolator
        interp = RegularGridInterpolator((coarse.w1, coarse.w2), coarse.values,
                                         bounds_error=False, fill_value=None)
        W1, W2 = np.meshgrid(w, w, indexing="ij")
        J0 = interp(np.stack([W1.ravel(), W2.ravel()], axis=1)).reshape(H.shape)

    p_trans, dt = _chain_coefficients(bd, p.gamma, h)
    J, sweeps = _solve_on_grid(H, p_trans, dt, p.gamma, tol_vi, max_sweeps, J0)
    _enforce_monotone(J)

    mask = _classify_actions(J, H, p_trans, dt, p.gamma, tol_act)
    return ValueGrid(h1=h, h2=h, n1=n, n2=n, values=J, action_mask=mask,
                     converged=True, sweeps=sweeps, tol_vi=tol_vi)


def _branch_values(J, H, p_trans, dt, gamma):
    """Dynamic branch and push branches at every node (pushes inf at the rim)."""
    pad = np.pad(J, 1, mode="edge")
    up1, dn1 = pad[2:, 1:-1], pad[:-2, 1:-1]
    up2, dn2 = pad[1:-1, 2:], pad[1:-1, :-2]
    uu, dd = pad[2:, 2:], pad[:-2, :-2]
    ud, du = pad[2:, :-2], pad[:-2, 2:]
    acc = (p_trans[0] * up1 + p_trans[1] * dn1 + p_trans[2] * up2 + p_trans[3] * dn2
           + p_trans[4] * uu + p_trans[5] * dd + p_trans[6] * ud + p_trans[7] * du)
    dyn = (acc + H * dt) / (1.0 + gamma * dt)
    push1 = np.full_like(J, np.inf)
    push1[:-1, :] = J[1:, :]
    push2 = np.full_like(J, np.inf)
    push2[:, :-1] = J[:, 1:]
    return dyn, push1, push2


def _classify_actions(J, H, p_trans, dt, gamma, tol_act):
    dyn, push1, push2 = _branch_values(J, H, p_trans, dt, gamma)
    best = np.minimum(dyn, np.minimum(push1, push2))
    mask = np.zeros(J.shape, dtype=np.uint8)
    mask[push1 <= best + tol_act] |= PUSH_E1
    mask[push2 <= best + tol_act] |= PUSH_E2
    return mask


def hjb_residual(vg: ValueGrid, p: NetworkParams, bd: BrownianData) -> float:
    """Max over interior nodes of the discrete variational-inequality defect.

    At each node the defect is |min(L_h J + hhat - gamma J, D+_1 J, D+_2 J)|:
    the dynamic rate term vanishes on the continuation region, the forward
    differences vanish where pushing is active, and all three are nonnegative
    at the exact fixed point.
    """
    if not vg.converged:
        raise NotConverged("value grid did not converge")
    h = vg.h1
    J, gamma = vg.values, p.gamma
    H = _hhat_grid(p, vg.w1, vg.w2)
    p_trans, dt = _chain_coefficients(bd, gamma, h)
    dyn, push1, push2 = _branch_values(J, H, p_trans, dt, gamma)
    # rate-units dynamic defect: (dyn-branch value - J) rescaled by dt
    dyn_rate = (dyn - J) * (1.0 + gamma * dt) / dt
    fwd1 = (push1 - J) / h
    fwd2 = (push2 - J) / h
    defect = np.abs(np.minimum(dyn_rate, np.minimum(fwd1, fwd2)))
    return float(defect[1:-1, 1:-1].max())


# -- boundary extraction -----------------------------------------------------

def _pava_nondecreasing(y: np.ndarray) -> np.ndarray:
    """L2 isotonic regression (pool adjacent violators), unit weights."""
    y = y.astype(float).copy()
    level = list(y)
    count = [1] * len(y)
    out_vals: list[float] = []
    out_cnt: list[int] = []
    for v, c in zip(level, count):
        out_vals.append(v)
        out_cnt.append(c)
        while len(out_vals) > 1 and out_vals[-2] > out_vals[-1]:
            v2, c2 = out_vals.pop(), out_cnt.pop()
            v1, c1 = out_vals.pop(), out_cnt.pop()
            out_vals.append((v1 * c1 + v2 * c2) / (c1 + c2))
            out_cnt.append(c1 + c2)
    res = np.empty_like(y)
    k = 0
    for v, c in zip(out_vals, out_cnt):
        res[k:k + c] = v
        k += c
    return res


def extract_boundary(vg: ValueGrid, p: NetworkParams,
                     tol_grad: float | None = None) -> FreeBoundary:
    """Outer edge of the push-e1 region, projected onto the feasible set
    {nondecreasing, slope <= mu3/mu2, 0 <= psi <= (mu3/mu2) w2}."""
    if not vg.converged:
        raise NotConverged("value grid did not converge")
    mu2, mu3 = p.mu[1], p.mu[2]
    cap = mu3 / mu2
    if tol_grad is None:
        corner = lp_value(p, vg.n1 * vg.h1, vg.n2 * vg.h2)
        tol_grad = 1e-6 * corner / p.gamma
    J, h = vg.values, vg.h1
    fwd = (J[1:, :] - J[:-1, :]) / h          # shape (n1, n2+1)
    flat = fwd <= tol_grad
    psi_raw = np.zeros(vg.n2 + 1)
    for j in range(vg.n2 + 1):
        idx = np.nonzero(flat[:, j])[0]
        psi_raw[j] = h * idx[-1] if len(idx) else 0.0

    w2 = vg.w2
    psi = _pava_nondecreasing(psi_raw)
    psi = np.minimum(psi, cap * w2)
    for j in range(1, len(psi)):
        psi[j] = min(psi[j], psi[j - 1] + cap * (w2[j] - w2[j - 1]))
    psi = np.maximum(psi, 0.0)
    psi[0] = 0.0
    return FreeBoundary(w2_knots=w2, psi_values=psi, slope_cap=cap)


# -- serialization -----------------------------------------------------------

def save_value_grid(vg: ValueGrid, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# h1={float(vg.h1)!r} h2={float(vg.h2)!r} n1={vg.n1} n2={vg.n2} "
                 f"converged={int(vg.converged)} sweeps={vg.sweeps} tol_vi={float(vg.tol_vi)!r}\n")
        fh.write("i,j,J,mask\n")
        for i in range(vg.n1 + 1):
            for j in range(vg.n2 + 1):
                fh.write(f"{i},{j},{float(vg.values[i, j])!r},{vg.action_mask[i, j]}\n")


def load_value_grid(path: str | Path) -> ValueGrid:
    lines = Path(path).read_text().splitlines()
    meta = dict(kv.split("=") for kv in lines[0].lstrip("# ").split())
    n1, n2 = int(meta["n1"]), int(meta["n2"])
    values = np.zeros((n1 + 1, n2 + 1))
    mask = np.zeros((n1 + 1, n2 + 1), dtype=np.uint8)
    for line in lines[2:]:
        i, j, v, m = line.split(",")
        values[int(i), int(j)] = float(v)
        mask[int(i), int(j)] = int(m)
    return ValueGrid(h1=float(meta["h1"]), h2=float(meta["h2"]), n1=n1, n2=n2,
                     values=values, action_mask=mask,
                     converged=bool(int(meta["converged"])),
                     sweeps=int(meta["sweeps"]), tol_vi=float(meta["tol_vi"]))


def save_boundary(fb: FreeBoundary, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# slope_cap={fb.slope_cap!r} knots={len(fb.w2_knots)}\n")
        fh.write("w2,psi\n")
        for k, v in zip(fb.w2_knots, fb.psi_values):
            fh.write(f"{float(k)!r},{float(v)!r}\n")


def load_boundary(path: str | Path) -> FreeBoundary:
    lines = Path(path).read_text().splitlines()
    meta = dict(kv.split("=") for kv in lines[0].lstrip("# ").split() if "=" in kv)
    rows = [ln.split(",") for ln in lines[2:] if ln]
    k = np.array([float(r[0]) for r in rows])
    v = np.array([float(r[1]) for r in rows])
    return FreeBoundary(w2_knots=k, psi_values=v, slope_cap=float(meta["slope_cap"]))
