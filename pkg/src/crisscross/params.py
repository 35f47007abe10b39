"""Network parameters, cost-regime classification, the static LP, and the
driving Brownian data for the two-dimensional workload.

The criss-cross network has two arrival streams (classes 1 and 2 at server 1)
and one downstream class (class 3 at server 2).  Heavy traffic requires

    lambda1/mu1 + lambda2/mu2 = 1    and    lambda2/mu3 = 1.

Cost regimes (strict/non-strict placement matters at ties):

    Case I   : c1*mu1 - c2*mu2 + c3*mu2 <= 0
    Case IIA : c2*mu2 - c3*mu2 >= 0  and  c2*mu2 - c1*mu1 >= 0
    Case IIB : c2*mu2 - c3*mu2 <  0  and  c2*mu2 - c1*mu1 >= 0
    Case IIC : c2*mu2 - c3*mu2 >= 0  and  c2*mu2 - c1*mu1 <  0
    Case IID : c2*mu2 - c3*mu2 <  0  and  c2*mu2 - c1*mu1 <  0

Case IIB implies c1*mu1 - c2*mu2 + c3*mu2 > 0, so the II sub-cases are only
consulted when the Case I inequality fails.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, HeavyTrafficViolation, NegativeWorkload

HT_RTOL = 1e-12  # relative tolerance on the heavy-traffic identities

CONFIG_KEYS = (
    "lambda1", "lambda2", "mu1", "mu2", "mu3",
    "c1", "c2", "c3", "gamma", "b1", "b2", "b3",
    "scv_a1", "scv_a2", "scv_s1", "scv_s2", "scv_s3",
)


class Regime(enum.Enum):
    CaseI = "CaseI"
    CaseIIA = "CaseIIA"
    CaseIIB = "CaseIIB"
    CaseIIC = "CaseIIC"
    CaseIID = "CaseIID"


@dataclass(frozen=True)
class NetworkParams:
    """All model parameters.  Immutable; validated at construction."""

    lam: tuple[float, float]
    mu: tuple[float, float, float]
    cost: tuple[float, float, float]
    gamma: float
    drift_offsets: tuple[float, float, float] = (0.0, 0.0, 0.0)
    interarrival_scv: tuple[float, float] = (1.0, 1.0)
    service_scv: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for name, vals in (("lambda", self.lam), ("mu", self.mu), ("cost", self.cost),
                           ("gamma", (self.gamma,))):
            if any(not (v > 0) for v in vals):
                raise ConfigError(f"{name} must be strictly positive, got {vals}")
        if any(v < 0 for v in self.interarrival_scv + self.service_scv):
            raise ConfigError("squared coefficients of variation must be nonnegative")
        validate_heavy_traffic(self)


def validate_heavy_traffic(p: NetworkParams) -> None:
    """Check the two heavy-traffic identities to relative tolerance HT_RTOL."""
    lam1, lam2 = p.lam
    mu1, mu2, mu3 = p.mu
    r1 = lam1 / mu1 + lam2 / mu2 - 1.0
    if abs(r1) > HT_RTOL:
        raise HeavyTrafficViolation("lambda1/mu1 + lambda2/mu2 = 1", r1)
    r2 = lam2 / mu3 - 1.0
    if abs(r2) > HT_RTOL:
        raise HeavyTrafficViolation("lambda2/mu3 = 1", r2)


def classify_regime(p: NetworkParams) -> Regime:
    c1, c2, c3 = p.cost
    mu1, mu2, mu3 = p.mu
    if c1 * mu1 - c2 * mu2 + c3 * mu2 <= 0:
        return Regime.CaseI
    a = c2 * mu2 - c3 * mu2
    b = c2 * mu2 - c1 * mu1
    if a >= 0:
        return Regime.CaseIIA if b >= 0 else Regime.CaseIIC
    return Regime.CaseIIB if b >= 0 else Regime.CaseIID


def lp_value(p: NetworkParams, w1, w2):
    """Minimal holding-cost rate over queue vectors carrying workload (w1, w2).

    Two-branch piecewise-linear form; the branches agree on mu3*w2 = mu2*w1.
    Accepts scalars or arrays (broadcast elementwise).
    """
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if np.any(w1 < 0) or np.any(w2 < 0):
        raise NegativeWorkload("workload must be nonnegative")
    c1, c2, c3 = p.cost
    mu1, mu2, mu3 = p.mu
    branch1 = c1 * mu1 * w1 + (mu3 / mu2) * (c2 * mu2 - c1 * mu1) * w2
    branch2 = (c2 * mu2 - c3 * mu2) * w1 + c3 * mu3 * w2
    out = np.where(mu3 * w2 <= mu2 * w1, branch1, branch2)
    return float(out) if out.ndim == 0 else out


def lp_optimizer(p: NetworkParams, w1, w2):
    """Optimal queue vector (q1, q2, q3) for the static LP at workload (w1, w2).

    Accepts scalars or arrays (broadcast elementwise)."""
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if np.any(w1 < 0) or np.any(w2 < 0):
        raise NegativeWorkload("workload must be nonnegative")
    mu1, mu2, mu3 = p.mu
    on1 = mu3 * w2 <= mu2 * w1
    q1 = np.where(on1, mu1 / mu2 * (mu2 * w1 - mu3 * w2), 0.0)
    q2 = np.where(on1, mu3 * w2, mu2 * w1)
    q3 = np.where(on1, 0.0, mu3 * w2 - mu2 * w1)
    if q1.ndim == 0:
        return (float(q1), float(q2), float(q3))
    return (q1, q2, q3)


@dataclass(frozen=True)
class BrownianData:
    """Drift/covariance of the 3-d netput limit X and its 2-d workload image B.

    B1 = X1/mu1 + X2/mu2, B2 = (X2 + X3)/mu3.
    """

    x_drift: np.ndarray
    x_cov: np.ndarray
    b_drift: np.ndarray
    b_cov: np.ndarray
    workload_map: np.ndarray = field(repr=False, default=None)


def brownian_data(p: NetworkParams) -> BrownianData:
    lam1, lam2 = p.lam
    mu1, mu2, mu3 = p.mu
    b1, b2, b3 = p.drift_offsets
    s1, s2 = p.interarrival_scv
    v1, v2, v3 = p.service_scv

    x_drift = np.array([mu1 * b1, mu2 * b2, mu3 * b3 - mu2 * b2])
    x_cov = np.array([
        [s1 * lam1 + v1 * lam1, 0.0, 0.0],
        [0.0, s2 * lam2 + v1 * lam2, -v1 * lam2],
        [0.0, -v1 * lam2, v2 * lam2 + v3 * mu3],
    ])
    L = np.array([
        [1.0 / mu1, 1.0 / mu2, 0.0],
        [0.0, 1.0 / mu3, 1.0 / mu3],
    ])
    b_drift = L @ x_drift
    b_cov = L @ x_cov @ L.T
    return BrownianData(x_drift=x_drift, x_cov=x_cov, b_drift=b_drift,
                        b_cov=b_cov, workload_map=L)


# -- flat key/value config files ------------------------------------------

def params_to_dict(p: NetworkParams) -> dict[str, float]:
    return {
        "lambda1": p.lam[0], "lambda2": p.lam[1],
        "mu1": p.mu[0], "mu2": p.mu[1], "mu3": p.mu[2],
        "c1": p.cost[0], "c2": p.cost[1], "c3": p.cost[2],
        "gamma": p.gamma,
        "b1": p.drift_offsets[0], "b2": p.drift_offsets[1], "b3": p.drift_offsets[2],
        "scv_a1": p.interarrival_scv[0], "scv_a2": p.interarrival_scv[1],
        "scv_s1": p.service_scv[0], "scv_s2": p.service_scv[1], "scv_s3": p.service_scv[2],
    }


def params_from_dict(d: dict[str, float]) -> NetworkParams:
    missing = [k for k in CONFIG_KEYS if k not in d]
    if missing:
        raise ConfigError(f"missing config keys: {missing}")
    return NetworkParams(
        lam=(d["lambda1"], d["lambda2"]),
        mu=(d["mu1"], d["mu2"], d["mu3"]),
        cost=(d["c1"], d["c2"], d["c3"]),
        gamma=d["gamma"],
        drift_offsets=(d["b1"], d["b2"], d["b3"]),
        interarrival_scv=(d["scv_a1"], d["scv_a2"]),
        service_scv=(d["scv_s1"], d["scv_s2"], d["scv_s3"]),
    )


def read_config(path: str | Path) -> dict[str, float]:
    """Read a flat `key = value` document.  Lines starting with # are comments."""
    out: dict[str, float] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, val = line.partition("=")
        else:
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: cannot parse '{raw}'")
            key, val = parts
        try:
            out[key.strip()] = float(val.strip())
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: bad value for '{key.strip()}'") from e
    return out


def write_config(d: dict[str, float], path: str | Path) -> None:
    lines = [f"{k} = {v!r}" for k, v in d.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path: str | Path) -> NetworkParams:
    return params_from_dict(read_config(path))


def save_params(p: NetworkParams, path: str | Path) -> None:
    write_config(params_to_dict(p), path)
