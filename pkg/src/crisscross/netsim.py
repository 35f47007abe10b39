"""Discrete-event simulation of the pre-limit criss-cross network.

Two servers, three buffers: classes 1 and 2 arrive at server 1, class 2
output becomes class 3 at server 2.  Server 2 works whenever buffer 3 is
nonempty.  Server 1 follows a threshold policy driven by safety-stock levels
Ln = floor(l0 log n), Cn = floor(c l0 log n) and an idling test against the
free boundary evaluated at diffusion scale.

One replication is a single-threaded event loop compiled with numba; the
primitive draws (interarrival and service times) are pregenerated with numpy
so that replications are reproducible from (seed, rep index) alone.  Service
is preempt-resume with per-class residuals, and the policy is re-evaluated at
every event epoch on the post-event state.  The discounted cost integral is
exact between events since queue lengths are piecewise constant.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .errors import ConfigError, InvalidN
from .params import NetworkParams

UNIT_MEAN_TOL = 1e-12

# actions for server 1
SERVE1, SERVE2, IDLE1 = 0, 1, 2
# event codes in the log
EV_INIT, EV_ARR1, EV_ARR2, EV_SVC1, EV_SVC2, EV_SVC3, EV_END = 0, 1, 2, 3, 4, 5, 6
# policy variants
POLICY_THRESHOLD, POLICY_PRIO1, POLICY_PRIO2 = 0, 1, 2


@dataclass(frozen=True)
class Primitive:
    """Unit-mean positive distribution for one primitive stream.

    Families: exponential, erlang(k), uniform(a, b) with a > 0, deterministic.
    All have a finite moment generating function near 0.
    """

    family: str
    shape: int = 1          # erlang k
    lo: float = 1.0         # uniform a
    hi: float = 1.0         # uniform b

    def __post_init__(self):
        if self.family not in ("exponential", "erlang", "uniform", "deterministic"):
            raise ConfigError(f"unknown family {self.family!r}")
        if self.family == "erlang" and self.shape < 1:
            raise ConfigError("erlang shape must be >= 1")
        if self.family == "uniform":
            if not (0 < self.lo < self.hi):
                raise ConfigError("uniform needs 0 < a < b")
            if abs(0.5 * (self.lo + self.hi) - 1.0) > UNIT_MEAN_TOL:
                raise ConfigError("uniform endpoints must average to 1")

    @property
    def mean(self) -> float:
        return 1.0

    @property
    def scv(self) -> float:
        """Squared coefficient of variation (variance, since the mean is 1)."""
        if self.family == "exponential":
            return 1.0
        if self.family == "erlang":
            return 1.0 / self.shape
        if self.family == "uniform":
            return (self.hi - self.lo) ** 2 / 12.0
        return 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.family == "exponential":
            return rng.exponential(1.0, size)
        if self.family == "erlang":
            return rng.gamma(self.shape, 1.0 / self.shape, size)
        if self.family == "uniform":
            return rng.uniform(self.lo, self.hi, size)
        return np.ones(size)

    def log_mgf(self, s: float) -> float:
        """log E e^{s X} for the unit-mean variable; inf outside the domain."""
        if self.family == "exponential":
            return -math.log1p(-s) if s < 1.0 else math.inf
        if self.family == "erlang":
            k = self.shape
            return -k * math.log1p(-s / k) if s < k else math.inf
        if self.family == "uniform":
            if s == 0.0:
                return 0.0
            a, b = self.lo, self.hi
            z = s * (b - a)
            if z > 500.0:  # expm1 would overflow; e^z - 1 ~ e^z
                return s * b - math.log(z)
            return s * a + math.log(math.expm1(z) / z)
        return s  # deterministic at 1

    @property
    def mgf_radius(self) -> float:
        """Right edge of the domain of the unit-mean MGF (inf if entire)."""
        if self.family == "exponential":
            return 1.0
        if self.family == "erlang":
            return float(self.shape)
        return math.inf

    @classmethod
    def parse(cls, text: str) -> "Primitive":
        text = text.strip()
        if text == "exponential":
            return cls("exponential")
        if text == "deterministic":
            return cls("deterministic")
        if text.startswith("erlang(") and text.endswith(")"):
            return cls("erlang", shape=int(text[7:-1]))
        if text.startswith("uniform(") and text.endswith(")"):
            a, b = (float(x) for x in text[8:-1].split(","))
            return cls("uniform", lo=a, hi=b)
        raise ConfigError(f"cannot parse distribution {text!r}")


@dataclass(frozen=True)
class PrimitiveDistributions:
    """One unit-mean distribution per primitive stream: interarrivals u1, u2
    and services v1, v2, v3."""

    u1: Primitive
    u2: Primitive
    v1: Primitive
    v2: Primitive
    v3: Primitive

    @classmethod
    def exponential(cls) -> "PrimitiveDistributions":
        e = Primitive("exponential")
        return cls(e, e, e, e, e)

    @classmethod
    def parse(cls, text: str) -> "PrimitiveDistributions":
        """Either one family for all five streams or five comma-separated."""
        parts = [t for t in text.split(";") if t.strip()]
        if len(parts) == 1:
            d = Primitive.parse(parts[0])
            return cls(d, d, d, d, d)
        if len(parts) != 5:
            raise ConfigError("need one distribution or five ';'-separated")
        return cls(*(Primitive.parse(t) for t in parts))

    def scvs(self) -> tuple[tuple[float, float], tuple[float, float, float]]:
        return ((self.u1.scv, self.u2.scv), (self.v1.scv, self.v2.scv, self.v3.scv))


@dataclass(frozen=True)
class PolicyThresholds:
    c: float
    l0: float
    g0: float
    d: float = 0.0     # level constant for the idleness diagnostic

    def __post_init__(self):
        if not (self.c > 1 and self.l0 > 1 and self.g0 > 0):
            raise ConfigError("need c > 1, l0 > 1, g0 > 0")

    def Ln(self, n: int) -> int:
        return int(math.floor(self.l0 * math.log(n)))

    def Cn(self, n: int) -> int:
        return int(math.floor(self.c * self.l0 * math.log(n)))

    def Dn(self, n: int) -> float:
        return self.d * self.l0 * math.log(n)

    def check_n(self, n: int, mu1n: float, mu2n: float) -> None:
        """Guard n >= nbar: Cn - Ln - 1 >= 1 and (mu1n/mu2n)(Cn - Ln + 2) >= 1."""
        Ln, Cn = self.Ln(n), self.Cn(n)
        if Cn - Ln - 1 < 1 or (mu1n / mu2n) * (Cn - Ln + 2) < 1:
            raise InvalidN(f"n={n} below the minimal index for thresholds "
                           f"(Ln={Ln}, Cn={Cn})")


@dataclass(frozen=True)
class RatesN:
    """Arrival and service rates of the n-th network."""
    lam1: float
    lam2: float
    mu1: float
    mu2: float
    mu3: float


def per_n_rates(p: NetworkParams, n: int) -> RatesN:
    """Default rate schedule hitting the configured drift offsets b.

    lam_i^n = lam_i + b_i mu_i / sqrt(n) for i = 1, 2 and mu^n = mu; when b3
    is not the value already implied by b2 (b2 mu2/mu3), the third drift limit
    is met by perturbing mu3^n = lam2^n / (1 + b3/sqrt(n)) instead.
    """
    lam1, lam2 = p.lam
    mu1, mu2, mu3 = p.mu
    b1, b2, b3 = p.drift_offsets
    rn = math.sqrt(n)
    lam1n = lam1 + b1 * mu1 / rn
    lam2n = lam2 + b2 * mu2 / rn
    mu3n = mu3
    if abs(b3 - b2 * mu2 / mu3) > 1e-12:
        mu3n = lam2n / (1.0 + b3 / rn)
    if min(lam1n, lam2n, mu3n) <= 0:
        raise ConfigError(f"per-n rates not positive at n={n}")
    return RatesN(lam1n, lam2n, mu1, mu2, mu3n)


@dataclass
class SimState:
    """Snapshot of the event-loop state, used by the standalone decision
    function and in tests; the compiled loop keeps the same fields in
    scalars."""
    clock: float = 0.0
    queues: tuple[int, int, int] = (0, 0, 0)
    residuals: dict = field(default_factory=dict)
    allocations: tuple[float, float, float] = (0.0, 0.0, 0.0)
    idleness: tuple[float, float] = (0.0, 0.0)
    counters: dict = field(default_factory=dict)
    cost_accumulator: float = 0.0


@njit(cache=True)
def _psi_scalar(knots, vals, tail_slope, x):  # pragma: no cover - jit kernel
    m = len(knots)
    if x >= knots[m - 1]:
        return vals[m - 1] + tail_slope * (x - knots[m - 1])
    return np.interp(x, knots, vals)


@njit(cache=True)
def _decide(q1, q2, q3, Ln, Cn, mu1n, mu2n, mu3n, g0, sqrt_n,
            knots, vals, tail_slope, policy_mode):  # pragma: no cover
    """Server-1 action and branch id.

    Branch ids: 0 queue-balance branch serve-1, 1 serve-2, 2 fallback idle
    (both queues empty); 10 threshold branch serve-1, 11 serve-2, 12 idle by
    the free-boundary test, 13 fallback idle (unspecified corner Q1=Q2=0).
    """
    if policy_mode == POLICY_PRIO1:
        if q1 > 0:
            return SERVE1, 0
        if q2 > 0:
            return SERVE2, 1
        return IDLE1, 2
    if policy_mode == POLICY_PRIO2:
        if q2 > 0:
            return SERVE2, 1
        if q1 > 0:
            return SERVE1, 0
        return IDLE1, 2
    if q3 - (mu2n / mu1n) * q1 < Ln:
        if (q3 >= Cn - 1 or q2 == 0) and q1 > 0:
            return SERVE1, 0
        if q2 > 0:
            return SERVE2, 1
        return IDLE1, 2
    thresh = (mu1n / mu2n) * (Cn - Ln + 2)
    if q1 >= thresh or (q2 == 0 and q1 > 0):
        return SERVE1, 10
    if q2 > 0:
        w1 = q1 / mu1n + q2 / mu2n
        w2 = (q2 + q3) / mu3n
        if w1 - sqrt_n * _psi_scalar(knots, vals, tail_slope, w2 / sqrt_n) >= g0:
            return SERVE2, 11
        return IDLE1, 12
    return IDLE1, 13


@njit(cache=True)
def _event_loop(u1, u2, v1, v2, v3,
                lam1n, lam2n, mu1n, mu2n, mu3n,
                Ln, Cn, g0, n, gamma, c1, c2, c3,
                horizon_unscaled, d_level,
                knots, vals, tail_slope, policy_mode,
                q0, log_t, log_ev, log_q, log_act, log_br):  # pragma: no cover
    """Single replication.  Returns a flag (0 ok, 1 samples exhausted) and
    the packed results."""
    sqrt_n = math.sqrt(n)
    t = 0.0
    q1, q2, q3 = q0[0], q0[1], q0[2]
    a1 = a2 = s1 = s2 = s3 = 0     # event counters
    i_u1 = i_u2 = i_v1 = i_v2 = i_v3 = 0
    INF = 1e308
    next_a1 = u1[i_u1] / lam1n if lam1n > 0 else INF
    next_a2 = u2[i_u2] / lam2n if lam2n > 0 else INF
    if lam1n > 0:
        i_u1 += 1
    if lam2n > 0:
        i_u2 += 1
    rs1 = -1.0
    rs2 = -1.0
    rs3 = -1.0
    T1 = T2 = T3 = 0.0
    I1 = I2 = 0.0
    cost = 0.0
    sup_d1 = 0.0    # sup Qhat3 on the A branch
    sup_d2 = 0.0    # sup Qhat1 off the A branch
    idle_int = 0.0  # integral of 1{Qhat2 >= d_level} dIhat2
    w1 = q1 / mu1n + q2 / mu2n
    w2 = (q2 + q3) / mu3n
    min_gap = w1 / sqrt_n - _psi_scalar(knots, vals, tail_slope, w2 / sqrt_n)
    nlog = 0
    cap = len(log_t)
    if cap > 0:
        log_t[0] = 0.0
        log_ev[0] = EV_INIT
        log_q[0, 0] = q1
        log_q[0, 1] = q2
        log_q[0, 2] = q3
        log_act[0] = -1
        log_br[0] = -1
        nlog = 1

    while True:
        act, branch = _decide(q1, q2, q3, Ln, Cn, mu1n, mu2n, mu3n, g0,
                              sqrt_n, knots, vals, tail_slope, policy_mode)
        serve2 = q3 > 0
        if act == SERVE1 and rs1 < 0.0:
            if i_v1 >= len(v1):
                return 1, cost, sup_d1, sup_d2, idle_int, min_gap, t, T1, T2, T3, I1, I2, a1, a2, s1, s2, s3, q1, q2, q3, nlog
            rs1 = v1[i_v1] / mu1n
            i_v1 += 1
        if act == SERVE2 and rs2 < 0.0:
            if i_v2 >= len(v2):
                return 1, cost, sup_d1, sup_d2, idle_int, min_gap, t, T1, T2, T3, I1, I2, a1, a2, s1, s2, s3, q1, q2, q3, nlog
            rs2 = v2[i_v2] / mu2n
            i_v2 += 1
        if serve2 and rs3 < 0.0:
            if i_v3 >= len(v3):
                return 1, cost, sup_d1, sup_d2, idle_int, min_gap, t, T1, T2, T3, I1, I2, a1, a2, s1, s2, s3, q1, q2, q3, nlog
            rs3 = v3[i_v3] / mu3n
            i_v3 += 1

        t_s1 = t + rs1 if act == SERVE1 else INF
        t_s2 = t + rs2 if act == SERVE2 else INF
        t_s3 = t + rs3 if serve2 else INF
        te = horizon_unscaled
        ev = EV_END
        if next_a1 < te:
            te = next_a1
            ev = EV_ARR1
        if next_a2 < te:
            te = next_a2
            ev = EV_ARR2
        if t_s1 < te:
            te = t_s1
            ev = EV_SVC1
        if t_s2 < te:
            te = t_s2
            ev = EV_SVC2
        if t_s3 < te:
            te = t_s3
            ev = EV_SVC3

        dt = te - t
        cost += ((c1 * q1 + c2 * q2 + c3 * q3) / sqrt_n
                 * (math.exp(-gamma * t / n) - math.exp(-gamma * te / n)) / gamma)
        if act == SERVE1:
            T1 += dt
            rs1 -= dt
        elif act == SERVE2:
            T2 += dt
            rs2 -= dt
        else:
            I1 += dt
        if serve2:
            T3 += dt
            rs3 -= dt
        else:
            I2 += dt
            if q2 / sqrt_n >= d_level:
                idle_int += dt / sqrt_n

        t = te
        if ev == EV_END:
            if cap > 0 and nlog < cap:
                log_t[nlog] = t
                log_ev[nlog] = EV_END
                log_q[nlog, 0] = q1
                log_q[nlog, 1] = q2
                log_q[nlog, 2] = q3
                log_act[nlog] = act
                log_br[nlog] = branch
                nlog += 1
            return 0, cost, sup_d1, sup_d2, idle_int, min_gap, t, T1, T2, T3, I1, I2, a1, a2, s1, s2, s3, q1, q2, q3, nlog
        if ev == EV_ARR1:
            q1 += 1
            a1 += 1
            if i_u1 >= len(u1):
                return 1, cost, sup_d1, sup_d2, idle_int, min_gap, t, T1, T2, T3, I1, I2, a1, a2, s1, s2, s3, q1, q2, q3, nlog
            next_a1 = t + u1[i_u1] / lam1n
            i_u1 += 1
        elif ev == EV_ARR2:
            q2 += 1
            a2 += 1
            if i_u2 >= len(u2):
                return 1, cost, sup_d1, sup_d2, idle_int, min_gap, t, T1, T2, T3, I1, I2, a1, a2, s1, s2, s3, q1, q2, q3, nlog
            next_a2 = t + u2[i_u2] / lam2n
            i_u2 += 1
        elif ev == EV_SVC1:
            q1 -= 1
            s1 += 1
            rs1 = -1.0
        elif ev == EV_SVC2:
            q2 -= 1
            q3 += 1
            s2 += 1
            rs2 = -1.0
        else:
            q3 -= 1
            s3 += 1
            rs3 = -1.0

        # diagnostics on the post-event state
        if q3 - (mu2n / mu1n) * q1 < Ln:
            qh3 = q3 / sqrt_n
            if qh3 > sup_d1:
                sup_d1 = qh3
        else:
            qh1 = q1 / sqrt_n
            if qh1 > sup_d2:
                sup_d2 = qh1
        w1 = q1 / mu1n + q2 / mu2n
        w2 = (q2 + q3) / mu3n
        gap = w1 / sqrt_n - _psi_scalar(knots, vals, tail_slope, w2 / sqrt_n)
        if gap < min_gap:
            min_gap = gap

        if cap > 0 and nlog < cap:
            log_t[nlog] = t
            log_ev[nlog] = ev
            log_q[nlog, 0] = q1
            log_q[nlog, 1] = q2
            log_q[nlog, 2] = q3
            log_act[nlog] = act
            log_br[nlog] = branch
            nlog += 1


def decide_server1(state: SimState, th: PolicyThresholds, fb, n: int,
                   rates: RatesN) -> tuple[int, int]:
    """Action for server 1 on the given state; returns (action, branch id).

    Actions: SERVE1, SERVE2, IDLE1.  The same compiled decision rule the
    event loop uses."""
    q1, q2, q3 = state.queues
    knots, vals, slope = _fb_arrays(fb)
    return _decide(q1, q2, q3, th.Ln(n), th.Cn(n), rates.mu1, rates.mu2,
                   rates.mu3, th.g0, math.sqrt(n), knots, vals, slope,
                   POLICY_THRESHOLD)


def _fb_arrays(fb) -> tuple[np.ndarray, np.ndarray, float]:
    """Knot arrays for the compiled kernel from a FreeBoundary (or any object
    with w2_knots / psi_values / tail_slope)."""
    knots = np.ascontiguousarray(fb.w2_knots, dtype=float)
    vals = np.ascontiguousarray(fb.psi_values, dtype=float)
    return knots, vals, float(fb.tail_slope)


@dataclass
class ReplicationResult:
    n: int
    rep: int
    jhat: float
    sup_q3_on_A: float
    sup_q1_off_A: float
    idle_integral: float
    min_G_gap: float
    horizon_unscaled: float
    allocations: tuple[float, float, float]
    idleness: tuple[float, float]
    counters: dict
    final_queues: tuple[int, int, int]


def default_horizon(gamma: float) -> float:
    """Scaled horizon with discount tail below 1e-4."""
    return math.log(1.05e4) / gamma


def run_network(
    p: NetworkParams,
    th: PolicyThresholds,
    fb,
    prim: PrimitiveDistributions,
    n: int,
    horizon: float | None = None,
    seed=0,
    rates: RatesN | None = None,
    q0: tuple[int, int, int] = (0, 0, 0),
    policy: str = "threshold",
    log_capacity: int = 0,
):
    """One replication; returns (ReplicationResult, event log dict or None).

    `seed` may be an int or a numpy SeedSequence.  `policy` selects the
    threshold rule or the strict priority variants used as sanity baselines.
    """
    if rates is None:
        rates = per_n_rates(p, n)
    if policy == "threshold":
        th.check_n(n, rates.mu1, rates.mu2)
    T = default_horizon(p.gamma) if horizon is None else horizon
    Tn = T * n
    policy_mode = {"threshold": POLICY_THRESHOLD, "priority1": POLICY_PRIO1,
                   "priority2": POLICY_PRIO2}[policy]
    knots, vals, slope = _fb_arrays(fb)
    d_level = th.Dn(n) / math.sqrt(n)
    c1, c2, c3 = p.cost

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    margin = 1.5
    while True:
        rng = np.random.default_rng(ss)
        sizes = {
            "u1": rates.lam1 * Tn, "u2": rates.lam2 * Tn,
            "v1": rates.mu1 * Tn, "v2": rates.mu2 * Tn, "v3": rates.mu3 * Tn,
        }
        draws = {}
        for name, mean_count in sizes.items():
            m = int(margin * mean_count + 6 * math.sqrt(mean_count + 1) + 64)
            dist = getattr(prim, name)
            draws[name] = dist.sample(rng, m)
        cap = log_capacity
        log_t = np.zeros(cap)
        log_ev = np.zeros(cap, dtype=np.int64)
        log_q = np.zeros((cap, 3), dtype=np.int64)
        log_act = np.zeros(cap, dtype=np.int64)
        log_br = np.zeros(cap, dtype=np.int64)
        out = _event_loop(
            draws["u1"], draws["u2"], draws["v1"], draws["v2"], draws["v3"],
            rates.lam1, rates.lam2, rates.mu1, rates.mu2, rates.mu3,
            th.Ln(n), th.Cn(n), th.g0, float(n), p.gamma, c1, c2, c3,
            Tn, d_level, knots, vals, slope, policy_mode,
            np.asarray(q0, dtype=np.int64),
            log_t, log_ev, log_q, log_act, log_br)
        if out[0] == 0:
            break
        margin *= 2.0     # rerun from scratch with more draws, same stream

    (_, cost, sup_d1, sup_d2, idle_int, min_gap, t, T1, T2, T3,
     I1, I2, a1, a2, s1, s2, s3, q1, q2, q3, nlog) = out
    res = ReplicationResult(
        n=n, rep=0, jhat=cost, sup_q3_on_A=sup_d1, sup_q1_off_A=sup_d2,
        idle_integral=idle_int, min_G_gap=min_gap, horizon_unscaled=t,
        allocations=(T1, T2, T3), idleness=(I1, I2),
        counters={"A1": a1, "A2": a2, "S1": s1, "S2": s2, "S3": s3},
        final_queues=(q1, q2, q3))
    log = None
    if log_capacity:
        log = {"time": log_t[:nlog], "event": log_ev[:nlog],
               "queues": log_q[:nlog], "action": log_act[:nlog],
               "branch": log_br[:nlog]}
    return res, log


def _worker(args):
    (p, th, fb_arrays, prim, n, horizon, ss, rep, policy) = args
    knots, vals, slope = fb_arrays

    class _FB:
        w2_knots = knots
        psi_values = vals
        tail_slope = slope

    res, _ = run_network(p, th, _FB(), prim, n, horizon=horizon, seed=ss,
                         policy=policy)
    res.rep = rep
    return res


def run_replications(
    p: NetworkParams,
    th: PolicyThresholds,
    fb,
    prim: PrimitiveDistributions,
    n: int,
    reps: int,
    horizon: float | None = None,
    seed: int = 0,
    workers: int | None = None,
    policy: str = "threshold",
) -> list[ReplicationResult]:
    """Independent replications with per-rep seed streams; results ordered by
    rep index, so the aggregation is independent of worker scheduling."""
    children = np.random.SeedSequence(seed).spawn(reps)
    args = [(p, th, _fb_arrays(fb), prim, n, horizon, children[r], r, policy)
            for r in range(reps)]
    if workers == 1 or reps == 1:
        results = [_worker(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_worker, args, chunksize=max(1, reps // 32)))
    results.sort(key=lambda r: r.rep)
    return results


# -- post-hoc analysis of event logs ----------------------------------------

def scaled_processes(log: dict, n: int, rates: RatesN) -> dict[str, np.ndarray]:
    """Diffusion-scaled queue, workload and idleness paths on the event grid."""
    rn = math.sqrt(n)
    t = log["time"] / n
    Q = log["queues"] / rn
    W1 = log["queues"][:, 0] / rates.mu1 + log["queues"][:, 1] / rates.mu2
    W2 = (log["queues"][:, 1] + log["queues"][:, 2]) / rates.mu3
    # idleness increments: server 1 idles over [t_k, t_k+1) iff the action at
    # t_k is IDLE1; server 2 iff Q3(t_k) = 0
    dts = np.diff(log["time"], append=log["time"][-1])
    idle1 = np.where(log["action"] == IDLE1, dts, 0.0)
    idle2 = np.where(log["queues"][:, 2] == 0, dts, 0.0)
    I1 = np.concatenate([[0.0], np.cumsum(idle1)[:-1]])
    I2 = np.concatenate([[0.0], np.cumsum(idle2)[:-1]])
    return {"time": t, "Q": Q, "W1": W1 / rn, "W2": W2 / rn,
            "I1": I1 / rn, "I2": I2 / rn}


def diagnostics(log: dict, th: PolicyThresholds, n: int, rates: RatesN,
                fb=None) -> dict[str, float]:
    """Event statistics recomputed from a recorded history.

    sup of Qhat3 while the queue-balance condition Q3 - (mu2/mu1)Q1 < Ln
    holds, sup of Qhat1 while it fails, the idleness integral of server 2 on
    {Qhat2 >= d l0 log n / sqrt(n)}, and (if a boundary is given) the minimal
    gap W1hat - psi(W2hat)."""
    rn = math.sqrt(n)
    q = log["queues"]
    if len(q) == 0:
        return {"sup_q3_on_A": 0.0, "sup_q1_off_A": 0.0,
                "idle_integral": 0.0, "min_G_gap": 0.0}
    on_A = q[:, 2] - (rates.mu2 / rates.mu1) * q[:, 0] < th.Ln(n)
    sup1 = float((q[on_A, 2] / rn).max()) if on_A.any() else 0.0
    sup2 = float((q[~on_A, 0] / rn).max()) if (~on_A).any() else 0.0
    dts = np.diff(log["time"], append=log["time"][-1])
    d_level = th.Dn(n) / rn
    idle2_steps = (q[:, 2] == 0) & (q[:, 1] / rn >= d_level)
    idle_int = float(dts[idle2_steps].sum() / rn)
    out = {"sup_q3_on_A": sup1, "sup_q1_off_A": sup2, "idle_integral": idle_int}
    if fb is not None:
        W1 = (q[:, 0] / rates.mu1 + q[:, 1] / rates.mu2) / rn
        W2 = ((q[:, 1] + q[:, 2]) / rates.mu3) / rn
        out["min_G_gap"] = float((W1 - fb(W2)).min())
    return out


def results_to_csv(results: list[ReplicationResult], path) -> None:
    with open(path, "w") as fh:
        fh.write("n,rep,jhat,sup_q3_on_A,sup_q1_off_A,idle_integral,min_G_gap\n")
        for r in results:
            fh.write(f"{r.n},{r.rep},{r.jhat!r},{r.sup_q3_on_A!r},"
                     f"{r.sup_q1_off_A!r},{r.idle_integral!r},{r.min_G_gap!r}\n")
