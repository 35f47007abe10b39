import numpy as np
import pytest

from crisscross.params import NetworkParams, brownian_data
from crisscross import boundary


@pytest.fixture(scope="session")
def ref_params():
    return NetworkParams(
        lam=(0.5, 1.0),
        mu=(1.0, 2.0, 1.0),
        cost=(1.0, 1.0, 2.0),
        gamma=1.0,
    )


@pytest.fixture(scope="session")
def ref_bd(ref_params):
    return brownian_data(ref_params)


@pytest.fixture(scope="session")
def ref_grid(ref_params, ref_bd):
    wmax = boundary.default_wmax(ref_bd, ref_params.gamma)
    spec = boundary.GridSpec(h=wmax / 100, wmax=wmax)
    return boundary.solve_value(ref_params, ref_bd, spec)


@pytest.fixture(scope="session")
def ref_boundary(ref_grid, ref_params):
    return boundary.extract_boundary(ref_grid, ref_params)


def rand_heavy_traffic_params(rng, regime=None):
    """Random heavy-traffic instance, optionally filtered to one regime."""
    from crisscross.params import classify_regime

    while True:
        mu1, mu2 = rng.uniform(0.5, 3.0, size=2)
        rho1 = rng.uniform(0.2, 0.8)
        lam1 = rho1 * mu1
        lam2 = (1.0 - rho1) * mu2
        mu3 = lam2
        c = rng.uniform(0.5, 3.0, size=3)
        p = NetworkParams(
            lam=(lam1, lam2), mu=(mu1, mu2, mu3),
            cost=tuple(float(ci) for ci in c), gamma=1.0,
        )
        if regime is None or classify_regime(p) is regime:
            return p
