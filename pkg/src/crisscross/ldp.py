"""Large-deviation rate functions for the renewal primitives and the explicit
threshold-parameter formulas (theta4, c, gamma4, lbar).

The renewal count N(t) built from i.i.d. positive variables with mean 1/nu
satisfies exponential tail bounds governed by the Legendre-Fenchel transform
Lambda* of the log-MGF Lambda of the increments.  The primitives here are
unit-mean variables scaled by 1/nu, so Lambda(l) = log E exp(l u / nu) and
Lambda*(x) = Lambda*_unit(nu x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (DegenerateRates, EpsTooLarge, OutOfDomain, TooSmallT,
                     WrongRegime)
from .netsim import Primitive, PrimitiveDistributions
from .params import NetworkParams, Regime, classify_regime

LEGENDRE_TOL = 1e-10


@dataclass(frozen=True)
class RateFunction:
    """Log-MGF and Legendre transform machinery for one renewal stream.

    `dist` is the unit-mean primitive; `nu` the stream rate, so increments
    are dist/nu with mean 1/nu."""

    dist: Primitive
    nu: float

    def __post_init__(self):
        if self.nu <= 0:
            raise OutOfDomain("rate nu must be positive")

    def lam(self, l: float) -> float:
        """Lambda(l) = log E exp(l * (u/nu))."""
        return self.dist.log_mgf(l / self.nu)

    @property
    def domain_radius(self) -> float:
        """Right edge of {l : Lambda(l) < inf}."""
        return self.nu * self.dist.mgf_radius

    @property
    def p0(self) -> float:
        """Default p0 in the MGF domain: half the radius, or nu if the
        domain is the whole line."""
        r = self.domain_radius
        return 0.5 * r if math.isfinite(r) else self.nu

    def legendre_unit(self, y: float) -> float:
        """Legendre transform of the unit-mean primitive's log-MGF at y."""
        if y <= 0:
            raise OutOfDomain("legendre transform evaluated at x <= 0")
        d = self.dist
        if d.family == "deterministic":
            return 0.0 if abs(y - 1.0) <= 1e-12 else math.inf
        if d.family == "uniform" and (y <= d.lo or y >= d.hi):
            return math.inf if (y < d.lo or y > d.hi) else _legendre_num(d, y)
        return _legendre_num(d, y)


def _legendre_num(d: Primitive, y: float) -> float:
    """sup_s (s y - log_mgf(s)) by bounded concave maximization."""
    radius = d.mgf_radius
    hi = radius * (1 - 1e-12) if math.isfinite(radius) else None
    lo = -1.0
    # expand left while the objective still increases toward the left
    while lo > -1e8 and ((lo * 2) * y - d.log_mgf(lo * 2)) > (lo * y - d.log_mgf(lo)):
        lo *= 2
    if lo <= -1e8:
        return math.inf
    lo *= 2
    if hi is None:
        hi = 1.0
        while hi < 1e8 and (hi * y - d.log_mgf(hi)) < ((hi * 2) * y - d.log_mgf(hi * 2)):
            hi *= 2
        hi *= 2
        if hi >= 1e8:
            return math.inf
    res = minimize_scalar(lambda s: -(s * y - d.log_mgf(s)),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": LEGENDRE_TOL})
    return max(0.0, float(-res.fun))


def legendre(rf: RateFunction, x: float) -> float:
    """Lambda*(x) for the mean-1/nu increments."""
    if x <= 0:
        raise OutOfDomain("legendre transform needs x > 0")
    return rf.legendre_unit(rf.nu * x)


def _theta1(rf: RateFunction, nu: float, eps: float) -> float:
    return rf.legendre_unit(1.0 / (1.0 + eps / (3.0 * nu)))


def _theta2(rf: RateFunction, nu: float, eps: float) -> float:
    return rf.legendre_unit(1.0 + eps / (2.0 * nu))


def thetas(rf: RateFunction, nu: float, eps: float) -> tuple[float, float]:
    """Exponents Theta1, Theta2 of the renewal tail bounds; both positive."""
    if not (0 < eps < nu / 2):
        raise EpsTooLarge(f"need 0 < eps < nu/2, got eps={eps}, nu={nu}")
    return _theta1(rf, nu, eps), _theta2(rf, nu, eps)


def ldp_bounds(rf: RateFunction, nu_n: float, eps: float, t: float,
               m: int = 1) -> tuple[float, float]:
    """Tail bound evaluations for the renewal count N^n(t).

    Upper: P(N^n(t) > (nu_n + eps) t) <= exp(-(nu t - 1) Theta1(nu, eps)),
    valid for t >= 2/eps.  Lower: P(N^n(t) < (nu_n - eps) t) <=
    exp(-(nu - 2 eps) t Theta2) + m exp(-p0 eps t / (2 nu)) exp(Lambda(p0)).
    """
    if t < 2.0 / eps:
        raise TooSmallT(f"upper bound needs t >= 2/eps = {2.0 / eps}")
    nu = rf.nu
    th1 = _theta1(rf, nu, eps)
    th2 = _theta2(rf, nu, eps)
    upper = math.exp(-(nu * t - 1.0) * th1)
    p0 = rf.p0
    lower = (math.exp(-(nu - 2.0 * eps) * t * th2)
             + m * math.exp(-p0 * eps * t / (2.0 * nu)) * math.exp(rf.lam(p0)))
    return upper, lower


@dataclass(frozen=True)
class ThresholdSelection:
    theta4: float
    c: float
    gamma4: float
    lbar: float
    d: float
    K: float
    theta: float
    eps1: float
    eps: float
    notes: dict = field(default_factory=dict)


def select_thresholds(
    p: NetworkParams,
    prim: PrimitiveDistributions,
    n_schedule: tuple[int, ...] = (100, 400, 1600, 6400),
) -> ThresholdSelection:
    """Evaluate the displayed formulas for the policy constants.

    Free choices are fixed deterministically: eps is the midpoint of its open
    interval (0, (mu1 - lam1)/4), eps1 half its stated cap, and each p0 is
    half the corresponding MGF-domain radius (or nu when the domain is the
    whole line).  The inf over n of the pre-limit rate ratio is taken over
    the supplied n-schedule.  Term-by-term provenance is recorded in notes.
    """
    if classify_regime(p) is not Regime.CaseIIB:
        raise WrongRegime("threshold formulas are stated for Case IIB")
    lam1, lam2 = p.lam
    mu1, mu2, mu3 = p.mu
    if mu2 <= mu3:
        raise DegenerateRates("need mu2 > mu3 for the K and d denominators")

    from .netsim import per_n_rates
    rf_a1 = RateFunction(prim.u1, lam1)
    rf_a2 = RateFunction(prim.u2, lam2)
    rf_s = [RateFunction(prim.v1, mu1), RateFunction(prim.v2, mu2),
            RateFunction(prim.v3, mu3)]

    eps = (mu1 - lam1) / 8.0                              # midpoint of (0, (mu1-lam1)/4)
    ratio = min(per_n_rates(p, n).mu1
                / (2.0 * per_n_rates(p, n).mu2 * (per_n_rates(p, n).lam1 + eps))
                for n in n_schedule)
    p0_s1 = rf_s[0].p0
    theta4_terms = {
        "lam1*Theta1_a1": lam1 * _theta1(rf_a1, lam1, eps),
        "mu1*Theta2_s1": mu1 * _theta2(rf_s[0], mu1, eps),
        "p0*eps/(2 mu1)": p0_s1 * eps / (2.0 * mu1),
    }
    theta4 = ratio * min(theta4_terms.values())
    c = 1.0 + 4.0 / theta4

    eps1 = 0.5 * min(1.0, (mu2 - mu3) / 8.0, mu2 / 2.0, mu3 / 2.0)
    K = 32.0 * mu2 + 4.0 * mu2 * (mu2 - mu3) / mu3
    d = 2.0 * c * K / (mu2 - mu3)
    theta = min(0.5, (mu2 - mu3) / (32.0 * c * mu3))

    mus = {2: mu2, 3: mu3}
    rfs = {2: rf_s[1], 3: rf_s[2]}
    p0_a2 = rf_a2.p0
    g_terms = {
        "d lam2 Theta1_a2 / K": d * lam2 * _theta1(rf_a2, lam2, eps1) / K,
        "lam2 Theta1_a2 / (4 mu3)": lam2 * _theta1(rf_a2, lam2, eps1) / (4.0 * mu3),
        "(lam2-2eps1) Theta2_a2 / (4 mu3)":
            (lam2 - 2.0 * eps1) * _theta2(rf_a2, lam2, eps1) / (4.0 * mu3),
        "p0_a2 eps1 / (8 mu3 lam2)": p0_a2 * eps1 / (8.0 * mu3 * lam2),
    }
    for i in (2, 3):
        mi, rfi = mus[i], rfs[i]
        p0_i = rfi.p0
        g_terms[f"d (theta+1) (mu{i}-2eps1) Theta2_s{i} / K"] = (
            d * (theta + 1.0) * (mi - 2.0 * eps1) * _theta2(rfi, mi, eps1) / K)
        g_terms[f"d theta mu{i} Theta1_s{i} / K"] = (
            d * theta * mi * _theta1(rfi, mi, eps1) / K)
        g_terms[f"d p0_s{i} (theta+1) eps1 / (2 mu{i} K)"] = (
            d * p0_i * (theta + 1.0) * eps1 / (2.0 * mi * K))
        g_terms[f"mu{i} Theta1_s{i} / (4 mu3)"] = (
            mi * _theta1(rfi, mi, eps1) / (4.0 * mu3))
        g_terms[f"(mu{i}-2eps1) Theta2_s{i} / (4 mu3)"] = (
            (mi - 2.0 * eps1) * _theta2(rfi, mi, eps1) / (4.0 * mu3))
        g_terms[f"p0_s{i} eps1 / (8 mu3 mu{i})"] = p0_i * eps1 / (8.0 * mu3 * mi)
    gamma4 = min(g_terms.values())
    lbar = 1.01 * max(1.0, 3.0 / gamma4)

    notes = {
        "eps": "midpoint of (0, (mu1 - lam1)/4)",
        "eps1": "half of min{1, (mu2-mu3)/8, mu2/2, mu3/2}",
        "p0": "half MGF-domain radius per stream (nu when domain unbounded)",
        "inf_n range": f"n in {tuple(n_schedule)}",
        "theta4 argmin": min(theta4_terms, key=theta4_terms.get),
        "gamma4 argmin": min(g_terms, key=g_terms.get),
        "theta4 terms": theta4_terms,
        "gamma4 terms": g_terms,
        "lbar": "1.01 * max{1, 3/gamma4}, so gamma4*lbar > 3 and lbar > 1",
    }
    return ThresholdSelection(theta4=theta4, c=c, gamma4=gamma4, lbar=lbar,
                              d=d, K=K, theta=theta, eps1=eps1, eps=eps,
                              notes=notes)


def selection_to_text(sel: ThresholdSelection) -> str:
    lines = [f"theta4 = {sel.theta4!r}", f"c = {sel.c!r}",
             f"gamma4 = {sel.gamma4!r}", f"lbar = {sel.lbar!r}",
             f"d = {sel.d!r}", f"K = {sel.K!r}", f"theta = {sel.theta!r}",
             f"eps1 = {sel.eps1!r}", f"eps = {sel.eps!r}", ""]
    for k, v in sel.notes.items():
        if isinstance(v, dict):
            lines.append(f"# {k}:")
            for kk, vv in v.items():
                lines.append(f"#   {kk} = {vv!r}")
        else:
            lines.append(f"# {k}: {v}")
    return "\n".join(lines) + "\n"
