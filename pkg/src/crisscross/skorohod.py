"""One-dimensional Skorohod map on discretized paths, and the sequential
reflection that confines a two-dimensional workload path to the region
{w1 >= psi(w2)}.

Paths are right-continuous piecewise-constant on a shared time grid; for such
paths the running-minimum formula for the reflection is exact, so the
complementarity and minimality properties hold with no discretization slack.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import GridMismatch, NegativeStart, NonzeroStart

if TYPE_CHECKING:
    from .boundary import FreeBoundary

G_MEMBERSHIP_TOL = 1e-12  # floating-point guard on w1 - psi(w2) >= 0


@dataclass(frozen=True)
class DiscretePath:
    """Piecewise-constant path: value[k] holds on [times[k], times[k+1])."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or v.shape != t.shape:
            raise GridMismatch("times and values must be 1-d arrays of equal length")
        if len(t) == 0 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise GridMismatch("times must start at 0 and be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise GridMismatch("path values must be finite")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "value"])
            for t, v in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "DiscretePath":
        rows = list(csv.reader(open(path)))[1:]
        t = np.array([float(r[0]) for r in rows])
        v = np.array([float(r[1]) for r in rows])
        return cls(t, v)


def _check_grids(*paths: DiscretePath) -> None:
    t0 = paths[0].times
    for p in paths[1:]:
        if len(p.times) != len(t0) or not np.array_equal(p.times, t0):
            raise GridMismatch("paths must share a common time grid")


def gamma_values(values: np.ndarray) -> np.ndarray:
    """Skorohod reflection applied along the last axis of a value array."""
    running_min = np.minimum.accumulate(np.minimum(values, 0.0), axis=-1)
    return values - running_min


def gamma(f: DiscretePath) -> DiscretePath:
    """Reflected path z(t) = f(t) - inf_{s<=t} (f(s) ^ 0); z >= 0."""
    if f.values[0] < 0:
        raise NegativeStart(f"path must start >= 0, got {f.values[0]}")
    return DiscretePath(f.times, gamma_values(f.values))


def regulator(f: DiscretePath) -> DiscretePath:
    """Minimal nondecreasing y with f + y >= 0; increases only when f + y = 0."""
    if f.values[0] < 0:
        raise NegativeStart(f"path must start >= 0, got {f.values[0]}")
    running_min = np.minimum.accumulate(np.minimum(f.values, 0.0))
    return DiscretePath(f.times, -running_min)


def reflect_in_G(
    b1: DiscretePath, b2: DiscretePath, psi: "FreeBoundary"
) -> tuple[DiscretePath, DiscretePath, DiscretePath, DiscretePath]:
    """Reflect (b1, b2) into {w1 >= psi(w2), w2 >= 0}.

    w2 is the plain reflection of b2; w1 reflects b1 off the moving barrier
    psi(w2).  Returns (w1, w2, i1, i2) with i1, i2 the pushing processes.
    The construction is one-pass: w2 is closed-form, and the barrier for w1
    depends only on w2, so no fixed-point iteration is needed.
    """
    _check_grids(b1, b2)
    if b1.values[0] != 0.0 or b2.values[0] != 0.0:
        raise NonzeroStart("driving paths must start at 0")

    w2_vals = gamma_values(b2.values)
    i2_vals = w2_vals - b2.values
    barrier = psi(w2_vals)
    shifted = b1.values - barrier
    w1_vals = gamma_values(shifted) + barrier
    i1_vals = w1_vals - b1.values

    t = b1.times
    return (
        DiscretePath(t, w1_vals),
        DiscretePath(t, w2_vals),
        DiscretePath(t, i1_vals),
        DiscretePath(t, i2_vals),
    )
