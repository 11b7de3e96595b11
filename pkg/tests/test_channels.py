import numpy as np
import pytest

from polarcb import (PolarCoord, effective_channel, los_channel, multipath_channel,
                     multipath_channel_equal, steering_matrix_exact, steering_vector_exact)


def test_los_norm_and_matched_filter(cfg387):
    coord = PolarCoord(0.0, 10.0)
    h = los_channel(cfg387, coord, 1.0)
    assert np.linalg.norm(h.vector) == pytest.approx(np.sqrt(387))
    a = steering_vector_exact(cfg387, coord)
    assert abs(np.vdot(h.vector, a)) == pytest.approx(np.sqrt(387))


def test_los_zero_gain(cfg387):
    h = los_channel(cfg387, PolarCoord(0.1, 8.0), 0.0)
    assert np.allclose(h.vector, 0.0)


def test_reconstruction_from_paths(cfg129):
    rng = np.random.default_rng(4)
    coords = [PolarCoord(t, r) for t, r in zip(rng.uniform(-0.5, 0.5, 3),
                                               rng.uniform(4, 120, 3))]
    h = multipath_channel(cfg129, coords[0], coords[1:], kappa_db=9.54, seed=5)
    rebuilt = np.zeros(129, dtype=complex)
    for p in h.paths:
        rebuilt += np.sqrt(129) * p.gain * steering_matrix_exact(cfg129, p.coord.theta, p.coord.r)
    assert np.abs(rebuilt - h.vector).max() < 1e-10


def test_rician_limit_and_gain_stats(cfg129):
    user = PolarCoord(0.0, 30.0)
    scats = [PolarCoord(0.2, 15.0), PolarCoord(-0.3, 50.0)]
    # huge kappa: scatter gains vanish
    h = multipath_channel(cfg129, user, scats, kappa_db=200.0, seed=1)
    assert max(abs(p.gain) for p in h.paths[1:]) < 1e-8
    assert h.paths[0].gain == pytest.approx(1.0)

    kappa = 10 ** 0.954
    nlos_sq = []
    total = []
    for seed in range(4000):
        h = multipath_channel(cfg129, user, scats, kappa_db=9.54, seed=seed)
        g = np.array([p.gain for p in h.paths])
        nlos_sq.extend(np.abs(g[1:]) ** 2)
        total.append((np.abs(g) ** 2).sum())
    expected_var = (1 / (1 + kappa)) / 2
    assert np.mean(nlos_sq) == pytest.approx(expected_var, rel=0.05)
    assert np.mean(total) == pytest.approx(1.0, rel=0.02)


def test_equal_gain_stats(cfg129):
    coords = [PolarCoord(0.0, 30.0), PolarCoord(0.2, 15.0), PolarCoord(-0.3, 50.0)]
    total = [sum(abs(p.gain) ** 2 for p in
                 multipath_channel_equal(cfg129, coords, seed).paths)
             for seed in range(4000)]
    assert np.mean(total) == pytest.approx(1.0, rel=0.02)
    single = [abs(multipath_channel_equal(cfg129, coords[:1], s).paths[0].gain) ** 2
              for s in range(4000)]
    assert np.mean(single) == pytest.approx(1.0, rel=0.02)


def test_multipath_determinism(cfg129):
    coords = [PolarCoord(0.0, 30.0), PolarCoord(0.2, 15.0)]
    a = multipath_channel_equal(cfg129, coords, 7)
    b = multipath_channel_equal(cfg129, coords, 7)
    assert np.array_equal(a.vector, b.vector)
    with pytest.raises(ValueError):
        multipath_channel_equal(cfg129, [], 0)


def test_degenerate_single_path_rician(cfg129):
    h = multipath_channel(cfg129, PolarCoord(0.0, 30.0), [], kappa_db=9.54, seed=0)
    kappa = 10 ** 0.954
    assert len(h.paths) == 1
    assert abs(h.paths[0].gain) == pytest.approx(np.sqrt(kappa / (1 + kappa)))


def test_effective_channel_matched(cfg387):
    coord = PolarCoord(0.1, 20.0)
    beta = 0.8 - 0.3j
    h = los_channel(cfg387, coord, beta)
    f_rf = steering_vector_exact(cfg387, coord)[:, None]
    g = effective_channel([h], f_rf)
    assert g.shape == (1, 1)
    assert g[0, 0] == pytest.approx(np.sqrt(387) * np.conj(beta))


def test_effective_channel_zero_row(cfg129):
    h0 = los_channel(cfg129, PolarCoord(0.0, 10.0), 0.0)
    h1 = los_channel(cfg129, PolarCoord(0.3, 40.0), 1.0)
    f_rf = steering_matrix_exact(cfg129, np.array([0.0, 0.3]), np.array([10.0, 40.0])).T
    g = effective_channel([h0, h1], f_rf)
    assert np.allclose(g[0], 0.0)
    assert abs(g[1, 1]) == pytest.approx(np.sqrt(129))


def test_effective_channel_dimension_checks(cfg129):
    h = los_channel(cfg129, PolarCoord(0.0, 10.0))
    f1 = steering_vector_exact(cfg129, PolarCoord(0.0, 10.0))[:, None]
    with pytest.raises(ValueError):
        effective_channel([h, h], f1)
    with pytest.raises(ValueError):
        effective_channel([h], f1[:-1, :])


def test_beam_focusing_interference_decay(cfg387):
    # same location: full leakage; separated angles: leakage small on average
    # (isolated near-field sidelobe pairs can still reach ~0.5, so the
    # worst case is not bounded by 0.1)
    c0 = PolarCoord(0.1, 30.0)
    h = los_channel(cfg387, c0, 1.0)
    same = effective_channel([h], steering_vector_exact(cfg387, c0)[:, None])
    assert abs(same[0, 0]) / np.sqrt(387) == pytest.approx(1.0, abs=1e-12)

    rng = np.random.default_rng(8)
    n = 1500
    t1 = rng.uniform(-0.5, 0.5, n)
    t2 = rng.uniform(-0.5, 0.5, n)
    r1 = rng.uniform(4, 120, n)
    r2 = rng.uniform(4, 120, n)
    keep = np.abs(t1 - t2) >= 2 / 387
    a = steering_matrix_exact(cfg387, t1[keep], r1[keep])
    b = steering_matrix_exact(cfg387, t2[keep], r2[keep])
    cross = np.abs(np.einsum("nm,nm->n", a.conj(), b))
    assert cross.mean() < 0.05
