import numpy as np
import pytest

from crisscross.boundary import FreeBoundary
from crisscross.skorohod import (
    DiscretePath, gamma, gamma_values, regulator, reflect_in_G,
    GridMismatch, NegativeStart, NonzeroStart,
)


def rand_path(rng, n=10000, start=0.0):
    t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.01, 0.1, n - 1))])
    v = start + np.concatenate([[0.0], np.cumsum(rng.normal(0, 0.3, n - 1))])
    return DiscretePath(t, v)


def test_reflection_axioms():
    rng = np.random.default_rng(0)
    for _ in range(5):
        f = rand_path(rng)
        z = gamma(f)
        y = regulator(f)
        # decomposition, nonnegativity, monotone pushing
        assert np.allclose(z.values, f.values + y.values, atol=1e-12)
        assert np.all(z.values >= -1e-12)
        assert y.values[0] == 0.0
        assert np.all(np.diff(y.values) >= -1e-12)
        # complementarity: y increases only where z = 0
        dy = np.diff(y.values)
        assert np.all(z.values[1:][dy > 1e-12] < 1e-9)


def test_reflection_minimality():
    # any other nondecreasing y' with f + y' >= 0 dominates the regulator
    rng = np.random.default_rng(1)
    f = rand_path(rng, n=2000)
    y = regulator(f)
    for _ in range(20):
        extra = np.cumsum(rng.uniform(0, 0.05, len(f.times)))
        y_alt = y.values + extra
        assert np.all(f.values + y_alt >= -1e-12)
        assert np.all(y_alt >= y.values - 1e-12)


def test_reflection_lipschitz():
    # sup |gamma(f) - gamma(g)| <= 2 sup |f - g|
    rng = np.random.default_rng(2)
    for _ in range(10):
        f = rand_path(rng, n=3000)
        g = DiscretePath(f.times, f.values + rng.normal(0, 0.2, len(f.times))
                         * (f.times > 0))
        d_in = np.max(np.abs(f.values - g.values))
        d_out = np.max(np.abs(gamma(f).values - gamma(g).values))
        assert d_out <= 2 * d_in + 1e-12


def test_reflection_positive_path_unchanged():
    t = np.arange(5.0)
    f = DiscretePath(t, np.array([0.0, 1.0, 0.5, 2.0, 0.1]))
    assert np.array_equal(gamma(f).values, f.values)
    assert np.all(regulator(f).values == 0.0)


def test_reflection_rejects_negative_start():
    t = np.arange(3.0)
    with pytest.raises(NegativeStart):
        gamma(DiscretePath(t, np.array([-0.5, 0.0, 1.0])))


def test_discrete_path_validation():
    with pytest.raises(GridMismatch):
        DiscretePath(np.array([0.0, 1.0]), np.array([0.0]))
    with pytest.raises(GridMismatch):
        DiscretePath(np.array([0.5, 1.0]), np.array([0.0, 0.0]))
    with pytest.raises(GridMismatch):
        DiscretePath(np.array([0.0, 1.0, 1.0]), np.zeros(3))
    with pytest.raises(GridMismatch):
        DiscretePath(np.array([0.0, 1.0]), np.array([0.0, np.nan]))


def test_reflect_in_G_hand_example():
    # barrier psi(w2) = 0.5 w2; b1 stays at 0, b2 steps to 1 then stays
    psi = FreeBoundary(np.array([0.0, 1.0]), np.array([0.0, 0.5]),
                       slope_cap=0.5)
    t = np.array([0.0, 1.0, 2.0])
    b1 = DiscretePath(t, np.array([0.0, 0.0, 0.0]))
    b2 = DiscretePath(t, np.array([0.0, 1.0, 1.0]))
    w1, w2, i1, i2 = reflect_in_G(b1, b2, psi)
    assert np.allclose(w2.values, [0.0, 1.0, 1.0])
    assert np.allclose(w1.values, [0.0, 0.5, 0.5])
    assert np.allclose(i1.values, [0.0, 0.5, 0.5])
    assert np.allclose(i2.values, [0.0, 0.0, 0.0])


def test_reflect_in_G_properties():
    rng = np.random.default_rng(3)
    psi = FreeBoundary(np.array([0.0, 0.5, 1.5]), np.array([0.0, 0.2, 0.4]),
                       slope_cap=0.5)
    for _ in range(5):
        n = 5000
        t = np.arange(n, dtype=float) * 0.01
        b1 = DiscretePath(t, np.concatenate([[0.0], np.cumsum(rng.normal(0, 0.1, n - 1))]))
        b2 = DiscretePath(t, np.concatenate([[0.0], np.cumsum(rng.normal(0, 0.1, n - 1))]))
        w1, w2, i1, i2 = reflect_in_G(b1, b2, psi)
        assert np.all(w2.values >= -1e-12)
        assert np.all(w1.values - psi(w2.values) >= -1e-9)
        for i in (i1, i2):
            assert i.values[0] == 0.0
            assert np.all(np.diff(i.values) >= -1e-12)
        # i2 pushes only at w2 = 0; i1 only on the barrier
        d2 = np.diff(i2.values)
        assert np.all(w2.values[1:][d2 > 1e-12] < 1e-9)
        d1 = np.diff(i1.values)
        gap = (w1.values - psi(w2.values))[1:]
        assert np.all(gap[d1 > 1e-12] < 1e-9)


def test_reflect_in_G_rejects_nonzero_start():
    psi = FreeBoundary.zero(0.5)
    t = np.array([0.0, 1.0])
    good = DiscretePath(t, np.array([0.0, 1.0]))
    bad = DiscretePath(t, np.array([0.3, 1.0]))
    with pytest.raises(NonzeroStart):
        reflect_in_G(bad, good, psi)
    with pytest.raises(GridMismatch):
        reflect_in_G(good, DiscretePath(np.array([0.0, 2.0]),
                                        np.array([0.0, 1.0])), psi)


def test_path_csv_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    f = rand_path(rng, n=50)
    fp = tmp_path / "path.csv"
    f.to_csv(fp)
    g = DiscretePath.from_csv(fp)
    assert np.array_equal(f.times, g.times)
    assert np.array_equal(f.values, g.values)
