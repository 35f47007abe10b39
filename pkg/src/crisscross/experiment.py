"""End-to-end experiment pipeline: solve the free boundary, estimate the
limiting optimal cost, sweep the network size schedule with replications, and
emit convergence tables plus rendered figures.

Intermediate artifacts (boundary, value grid, cost estimate) are cached in
<out>/cache keyed by a content hash of their inputs, so re-sweeping the
n-schedule does not re-solve the control problem.  All CSV outputs are
deterministic for a fixed master seed; wall-clock metadata goes to a separate
run_meta.json so the tables stay byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import boundary as bnd
from .errors import ConfigError, StageError
from .ldp import select_thresholds, selection_to_text
from .netsim import (PolicyThresholds, PrimitiveDistributions,
                     ReplicationResult, results_to_csv, run_replications)
from .params import NetworkParams, brownian_data, params_to_dict
from .rbm import CostEstimate, McConfig, estimate_jstar


@dataclass(frozen=True)
class ExperimentPlan:
    params: NetworkParams
    out_dir: Path
    mc: McConfig = McConfig()
    grid_h: float | None = None          # default wmax/200
    wmax: float | None = None            # default from boundary.default_wmax
    n_schedule: tuple[int, ...] = (100, 400, 1600, 6400)
    reps: int = 200
    thresholds: PolicyThresholds | str = "auto"
    primitives: PrimitiveDistributions = field(
        default_factory=PrimitiveDistributions.exponential)
    horizon: float | None = None         # scaled network horizon
    seed: int = 0
    workers: int | None = None
    solve: bool = True                   # if False, require a cached boundary

    def __post_init__(self):
        if list(self.n_schedule) != sorted(set(self.n_schedule)):
            raise ConfigError("n schedule must be strictly increasing")
        if self.reps < 2:
            raise ConfigError("need at least 2 replications")


@dataclass
class ConvergenceReport:
    jstar: CostEstimate
    rows: list[dict]                     # per n, sorted
    thresholds: PolicyThresholds
    boundary_file: Path
    report_file: Path


def _hash_inputs(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode())
        h.update(b"\0")
    return h.hexdigest()[:16]


def _grid_spec(p: NetworkParams, plan: ExperimentPlan) -> bnd.GridSpec:
    bd = brownian_data(p)
    wmax = plan.wmax if plan.wmax is not None else bnd.default_wmax(bd, p.gamma)
    h = plan.grid_h if plan.grid_h is not None else wmax / 200
    return bnd.GridSpec(h=h, wmax=wmax)


def solve_boundary_cached(plan: ExperimentPlan) -> tuple[bnd.FreeBoundary, Path]:
    """Solve (or load) the free boundary for the plan; returns it with the
    cached file path."""
    p = plan.params
    cache = Path(plan.out_dir) / "cache"
    cache.mkdir(parents=True, exist_ok=True)
    gs = _grid_spec(p, plan)
    key = _hash_inputs(params_to_dict(p), gs.h, gs.wmax, bnd.TOL_VI, bnd.TOL_ACT)
    fb_path = cache / f"boundary_{key}.csv"
    if fb_path.exists():
        return bnd.load_boundary(fb_path), fb_path
    if not plan.solve:
        raise StageError("solve-fb", FileNotFoundError(str(fb_path)))
    try:
        bd = brownian_data(p)
        vg = bnd.solve_value(p, bd, gs)
        fb = bnd.extract_boundary(vg, p)
        bnd.save_value_grid(vg, cache / f"valuegrid_{key}.csv")
        bnd.save_boundary(fb, fb_path)
    except Exception as e:
        raise StageError("solve-fb", e) from e
    return fb, fb_path


def estimate_jstar_cached(plan: ExperimentPlan, fb: bnd.FreeBoundary) -> CostEstimate:
    p = plan.params
    cache = Path(plan.out_dir) / "cache"
    cache.mkdir(parents=True, exist_ok=True)
    key = _hash_inputs(params_to_dict(p), plan.mc,
                       fb.w2_knots.tobytes(), fb.psi_values.tobytes())
    path = cache / f"jstar_{key}.json"
    if path.exists():
        d = json.loads(path.read_text())
        return CostEstimate(**d)
    try:
        est = estimate_jstar(p, fb, brownian_data(p), plan.mc)
    except Exception as e:
        raise StageError("simulate-bcp", e) from e
    path.write_text(json.dumps(est.__dict__))
    return est


def resolve_thresholds(plan: ExperimentPlan) -> PolicyThresholds:
    if isinstance(plan.thresholds, PolicyThresholds):
        return plan.thresholds
    if plan.thresholds != "auto":
        raise ConfigError(f"unknown thresholds spec {plan.thresholds!r}")
    try:
        sel = select_thresholds(plan.params, plan.primitives,
                                n_schedule=plan.n_schedule)
    except Exception as e:
        raise StageError("select-params", e) from e
    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "selected_params.txt").write_text(selection_to_text(sel))
    return PolicyThresholds(c=sel.c, l0=sel.lbar, g0=1.0, d=sel.d)


def run_experiment(plan: ExperimentPlan, policy: str = "threshold",
                   render: bool = True) -> ConvergenceReport:
    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.time()
    fb, fb_path = solve_boundary_cached(plan)
    jstar = estimate_jstar_cached(plan, fb)
    th = resolve_thresholds(plan)

    rows = []
    for n in plan.n_schedule:
        try:
            results = run_replications(
                plan.params, th, fb, plan.primitives, n, plan.reps,
                horizon=plan.horizon, seed=plan.seed, workers=plan.workers,
                policy=policy)
        except Exception as e:
            raise StageError("simulate-network", e) from e
        results_to_csv(results, out / f"replications_n{n}.csv")
        rows.append(_summarize(results, n, jstar))

    report_file = out / "convergence_report.csv"
    _write_report(rows, jstar, report_file)
    meta = {"elapsed_seconds": time.time() - t_start, "reps": plan.reps,
            "seed": plan.seed, "thresholds": th.__dict__,
            "boundary_file": str(fb_path)}
    (out / "run_meta.json").write_text(json.dumps(meta, indent=1))
    if render:
        _render_figures(rows, jstar, out)
    return ConvergenceReport(jstar=jstar, rows=rows, thresholds=th,
                             boundary_file=fb_path, report_file=report_file)


def _summarize(results: list[ReplicationResult], n: int,
               jstar: CostEstimate) -> dict:
    j = np.array([r.jhat for r in results])
    mean = float(j.mean())
    se = float(j.std(ddof=1) / math.sqrt(len(j)))
    return {
        "n": n,
        "jhat_mean": mean,
        "jhat_se": se,
        "gap": mean - jstar.mean,
        "rel_gap": (mean - jstar.mean) / jstar.mean,
        "sup_q3_on_A": float(np.mean([r.sup_q3_on_A for r in results])),
        "sup_q1_off_A": float(np.mean([r.sup_q1_off_A for r in results])),
        "idle_integral": float(np.mean([r.idle_integral for r in results])),
        "min_G_gap": float(np.mean([r.min_G_gap for r in results])),
    }


_REPORT_COLS = ("n", "jhat_mean", "jhat_se", "gap", "rel_gap",
                "sup_q3_on_A", "sup_q1_off_A", "idle_integral", "min_G_gap")


def _write_report(rows: list[dict], jstar: CostEstimate, path: Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# jstar_mean={jstar.mean!r} jstar_se={jstar.std_error!r}\n")
        fh.write(",".join(_REPORT_COLS) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[c]) if c != "n" else str(row[c])
                              for c in _REPORT_COLS) + "\n")


def _render_figures(rows: list[dict], jstar: CostEstimate, out: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ns = [r["n"] for r in rows]
    means = [r["jhat_mean"] for r in rows]
    ses = [r["jhat_se"] for r in rows]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ns, means, yerr=[1.96 * s for s in ses], marker="o",
                capsize=3, label=r"mean $\hat J^n$")
    ax.axhline(jstar.mean, color="k", ls="--", lw=1, label=r"$J^*(0)$ (MC)")
    ax.axhspan(jstar.mean - 1.96 * jstar.std_error,
               jstar.mean + 1.96 * jstar.std_error, color="k", alpha=0.1)
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("discounted cost")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "cost_vs_n.png", dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    gaps = [abs(r["gap"]) for r in rows]
    ax.loglog(ns, gaps, marker="o")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$|\mathrm{mean}\ \hat J^n - J^*(0)|$")
    fig.tight_layout()
    fig.savefig(out / "gap_vs_n.png", dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    for key, lbl in (("sup_q3_on_A", r"sup $\hat Q_3 1_A$"),
                     ("sup_q1_off_A", r"sup $\hat Q_1 1_{A^c}$"),
                     ("idle_integral", r"$\int 1_{B_d} d\hat I_2$")):
        ax.loglog(ns, [max(r[key], 1e-12) for r in rows], marker="o", label=lbl)
    ax.set_xlabel("n")
    ax.set_ylabel("diagnostic mean")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "diagnostics_vs_n.png", dpi=150)
    plt.close(fig)


def compare_policies(plan: ExperimentPlan,
                     variants: tuple[str, ...] = ("threshold", "psi-zero",
                                                  "priority1", "priority2"),
                     ) -> list[dict]:
    """Mean cost per policy variant at matched seeds, largest n last row per
    variant.  `psi-zero` runs the threshold rule with the boundary replaced
    by zero; the priority variants are strict static priorities at server 1.
    """
    th = resolve_thresholds(plan)
    mu2, mu3 = plan.params.mu[1], plan.params.mu[2]
    fb = None
    if "threshold" in variants:     # only the threshold policy needs the boundary
        fb, _ = solve_boundary_cached(plan)
    zero_fb = bnd.FreeBoundary.zero(mu3 / mu2)
    table = []
    for variant in variants:
        if variant == "psi-zero":
            use_fb, pol = zero_fb, "threshold"
        elif variant == "threshold":
            use_fb, pol = fb, "threshold"
        elif variant in ("priority1", "priority2"):
            use_fb, pol = zero_fb, variant
        else:
            raise ConfigError(f"unknown policy variant {variant!r}")
        for n in plan.n_schedule:
            try:
                results = run_replications(
                    plan.params, th, use_fb, plan.primitives, n, plan.reps,
                    horizon=plan.horizon, seed=plan.seed, workers=plan.workers,
                    policy=pol)
            except Exception as e:
                raise StageError("simulate-network", e) from e
            j = np.array([r.jhat for r in results])
            table.append({"variant": variant, "n": n,
                          "jhat_mean": float(j.mean()),
                          "jhat_se": float(j.std(ddof=1) / math.sqrt(len(j)))})
    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "policy_comparison.csv", "w") as fh:
        fh.write("variant,n,jhat_mean,jhat_se\n")
        for row in table:
            fh.write(f"{row['variant']},{row['n']},{row['jhat_mean']!r},"
                     f"{row['jhat_se']!r}\n")
    return table
