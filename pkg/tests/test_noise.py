import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oscillattr.noise import (NoiseEnsemble, NoisePath, TimeGrid, brownian_increments,
                              check_temperedness, keyed_normals, ou_from_increments, ou_path,
                              ou_recursion, sample_path, stationary_ou_init)


def test_time_grid_validation():
    g = TimeGrid.span(-2.0, 3.0, 0.5)
    assert g.n_steps == 10 and g.k0 == -4 and g.t1 == pytest.approx(3.0)
    assert abs(g.t1 - g.t0 - g.n_steps * g.dt) <= 1e-12
    with pytest.raises(ValueError):
        TimeGrid(0.0, 0.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(0.0, -1e-3, 10)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1e-3, 0)


def test_zero_intensity():
    p = ou_path(3, TimeGrid.span(0, 1, 1e-3), [0.0, 0.0])
    assert not p.increments.any() and not p.z.any()


def test_deterministic():
    g = TimeGrid.span(-1, 1, 1e-3)
    a, b = ou_path(9, g, [0.3, 0.7]), ou_path(9, g, [0.3, 0.7])
    assert np.array_equal(a.increments, b.increments) and np.array_equal(a.z, b.z)
    c = ou_path(10, g, [0.3, 0.7])
    assert not np.array_equal(a.increments, c.increments)


def test_keyed_normals_chunk_independent():
    # any window of the stream is the same numbers, across block boundaries and negative indices
    long = keyed_normals(2**64 - 1, 3, 0, 0, -5000, 10_000)
    for i0, n in [(-5000, 7), (-4097, 3), (-1, 2), (4095, 5)]:
        np.testing.assert_array_equal(keyed_normals(2**64 - 1, 3, 0, 0, i0, n), long[i0 + 5000:i0 + 5000 + n])


def test_brownian_variance_monte_carlo():
    eps = np.array([1.0, 0.5])
    g = TimeGrid.span(0.0, 0.1, 1e-3)
    ends = np.array([sample_path(s, g, eps).increments.sum(axis=0) for s in range(10_000)])
    np.testing.assert_allclose(ends.var(axis=0), eps**2 * 0.1, rtol=0.05)


def test_increment_variance_and_independence():
    n = 200_000
    x = brownian_increments(4, [1.0, 1.0, 1.0], 1e-3, -n // 2, n)
    np.testing.assert_allclose(x.var(axis=0), 1e-3, rtol=0.02)
    corr = np.corrcoef(x.T)
    off = corr[~np.eye(3, dtype=bool)]
    assert np.abs(off).max() <= 3 / math.sqrt(n)


@pytest.mark.parametrize("coarse, fine", [(1e-3, 5e-4), (5e-4, 2.5e-4), (1e-3, 1e-3 / 8),
                                          (1e-3, 1e-3 / 3), (2e-3, 1e-3), (1e-2, 1e-3 / 2)])
def test_refinement_consistency(coarse, fine):
    gc = TimeGrid.span(-0.5, 0.5, coarse)
    gf = TimeGrid.span(-0.5, 0.5, fine)
    Wc = sample_path(77, gc, [1.0, 2.0]).W()
    Wf = sample_path(77, gf, [1.0, 2.0]).W()
    r = int(round(coarse / fine))
    np.testing.assert_allclose(Wf[::r], Wc, atol=1e-12)


def test_two_sided_windows_agree():
    full = ou_path(5, TimeGrid.span(-5, 5, 1e-3), [0.5] * 3)
    right = sample_path(5, TimeGrid.span(0, 5, 1e-3), [0.5] * 3)
    np.testing.assert_array_equal(full.window(0.0, 5.0).increments, right.increments)
    w = full.window(-2.0, 1.0)
    assert w.grid.t0 == pytest.approx(-2.0) and w.grid.n_steps == 3000
    np.testing.assert_array_equal(w.z, full.z[3000:6001])


def test_pure_decay():
    z = ou_recursion(np.array([1.0]), np.zeros((1, 1)), 1.0)
    assert z[1, 0] == pytest.approx(math.exp(-1), abs=1e-15)


@given(seed=st.integers(0, 2**32), dt=st.sampled_from([1e-3, 5e-4, 2e-3]))
def test_ou_recursion_residual(seed, dt):
    p = ou_path(seed, TimeGrid.span(-0.5, 0.5, dt), [0.2, 1.5])
    resid = p.z[1:] - math.exp(-dt) * p.z[:-1] - p.increments
    assert np.abs(resid).max() <= 1e-12


def test_ou_stationary_moments():
    eps = np.full(8, 0.8)
    dt = 0.01
    z = np.concatenate([ou_path(s, TimeGrid(0.0, dt, 100_000), eps).z for s in range(4)], axis=1)
    var = z.var(axis=0).mean()
    assert var == pytest.approx(eps[0] ** 2 / 2, rel=0.05)
    lag = int(round(1.0 / dt))
    cov = np.mean(z[lag:] * z[:-lag]) - z.mean() ** 2
    assert cov == pytest.approx(eps[0] ** 2 / 2 * math.exp(-1.0), rel=0.10)


def test_stationary_init_law():
    draws = np.array([stationary_ou_init(s, [2.0], 0)[0] for s in range(20_000)])
    assert draws.var() == pytest.approx(2.0, rel=0.05)
    assert abs(draws.mean()) <= 4 * math.sqrt(2.0 / 20_000)


def test_burn_in_alternative():
    g = TimeGrid.span(0, 1, 1e-3)
    p = ou_from_increments(sample_path(1, g, [0.5, 0.5]), init="burn_in")
    assert p.z.shape == (1001, 2) and p.meta["ou_init"] == "burn_in"
    with pytest.raises(ValueError):
        ou_from_increments(sample_path(1, g, [0.5]), init="nope")


def test_ensemble_matches_members():
    g = TimeGrid.span(-3.0, 2.0, 1e-3)
    ens = NoiseEnsemble((3, 8), g, [0.5, 0.25])
    z = np.concatenate([b[:-1] for b in ens.z_blocks(1000)] + [list(ens.z_blocks(1000))[-1][-1:]])
    inc = np.concatenate(list(ens.increment_blocks(1000)))
    for i in range(2):
        m = ens.member(i)
        np.testing.assert_array_equal(inc[:, i], m.increments)
        np.testing.assert_allclose(z[:, i], m.z, atol=1e-12)


def test_temperedness():
    g = TimeGrid.span(-1000.0, 0.0, 0.01)
    p = ou_path(2, g, [0.5] * 4)
    rep = check_temperedness(p, 0.1)
    assert rep.tempered and rep.r_tilde == pytest.approx(rep.sup_envelope.max())

    zero = ou_path(2, TimeGrid.span(0, 200, 0.1), [0.0])
    rep0 = check_temperedness(zero, 0.1)
    assert rep0.tempered and rep0.r_tilde == 0.0

    t = np.linspace(-200, 0, 2001)
    grow = NoisePath(TimeGrid(-200.0, 0.1, 2000), 0, np.ones(1), np.zeros((2000, 1)),
                     np.exp(0.2 * np.abs(t))[:, None])
    assert not check_temperedness(grow, 0.1).tempered

    with pytest.raises(ValueError):
        check_temperedness(ou_path(2, TimeGrid.span(0, 50, 0.1), [1.0]), 0.1)


def test_csv_dump(tmp_path):
    p = ou_path(1, TimeGrid.span(0, 0.003, 1e-3), [0.5, 0.5])
    out = tmp_path / "noise.csv"
    p.to_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,j,dW,z" and len(lines) == 1 + 4 * 2
