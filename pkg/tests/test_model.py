import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from turbocs.model import (ConfigError, Prior, quantize, sample_signal, ser,
                           transmit)


def test_prior_probabilities_sum_to_one():
    for alphabet, L, s in [((-1.0, 1.0), 258, 20), ((1.0,), 10, 3),
                           ((-3.0, -1.0, 1.0, 3.0), 100, 7)]:
        p = Prior(alphabet=alphabet, L=L, s=s)
        assert abs(p.p0 + len(alphabet) * p.p_symbol - 1.0) < 1e-15
        assert abs(p.atom_probs.sum() - 1.0) < 1e-15


def test_prior_signal_power():
    p = Prior(alphabet=(-1.0, 1.0), L=258, s=20)
    assert p.signal_power == pytest.approx(20 / 258, abs=1e-15)
    p2 = Prior(alphabet=(-2.0, 2.0), L=10, s=5)
    assert p2.signal_power == pytest.approx(0.5 * 4.0)


def test_prior_validation():
    with pytest.raises(ConfigError):
        Prior(alphabet=(0.0, 1.0), L=10, s=2)      # zero symbol
    with pytest.raises(ConfigError):
        Prior(alphabet=(1.0, 1.0), L=10, s=2)      # not strictly increasing
    with pytest.raises(ConfigError):
        Prior(alphabet=(1.0, -1.0), L=10, s=2)     # wrong order
    with pytest.raises(ConfigError):
        Prior(alphabet=(-1.0, 1.0), L=10, s=11)    # s > L
    with pytest.raises(ConfigError):
        Prior(alphabet=(), L=10, s=1)


def test_sample_signal_support_size():
    rng = np.random.default_rng(0)
    p = Prior(alphabet=(-1.0, 1.0), L=258, s=20)
    x = sample_signal(rng, p)
    assert x.shape == (258,)
    assert np.count_nonzero(x) == 20
    assert set(np.unique(x[x != 0])) <= {-1.0, 1.0}


def test_sample_signal_trivial_supports():
    rng = np.random.default_rng(1)
    zero = sample_signal(rng, Prior(alphabet=(-1.0, 1.0), L=17, s=0))
    assert_array_equal(zero, np.zeros(17))
    ones = sample_signal(rng, Prior(alphabet=(1.0,), L=9, s=9))
    assert_array_equal(ones, np.ones(9))


def test_sample_signal_activity_rate():
    # empirical per-position activity over many draws stays within 3 binomial
    # standard errors of s/L
    rng = np.random.default_rng(2)
    p = Prior(alphabet=(-1.0, 1.0), L=10, s=3)
    n = 100_000
    hits = np.zeros(10)
    for _ in range(n):
        hits += sample_signal(rng, p) != 0
    rate = hits / n
    se = np.sqrt(0.3 * 0.7 / n)
    assert np.all(np.abs(rate - 0.3) < 3 * se + 1e-12)


def test_transmit_identity_and_zero():
    rng = np.random.default_rng(3)
    A = np.eye(5)
    x = np.array([1.0, 0.0, -1.0, 0.0, 1.0])
    assert_array_equal(transmit(A, x, 0.0, rng), x)
    assert_array_equal(transmit(A, np.zeros(5), 0.0, rng), np.zeros(5))


def test_transmit_matches_reference_stream():
    # same seed, same draw order -> identical noise realization
    from turbocs.matrices import gen_gaussian_normalized
    sm = gen_gaussian_normalized(np.random.default_rng(11), 2, 4)
    x = np.array([1.0, 0.0, -1.0, 0.0])

    rng = np.random.default_rng(5)
    y = transmit(sm, x, 0.3, rng)

    rng_ref = np.random.default_rng(5)
    y_ref = sm.A @ x + np.sqrt(0.3) * rng_ref.standard_normal(2)
    assert_array_equal(y, y_ref)


def test_transmit_noiseless_linearity():
    rng = np.random.default_rng(6)
    A = rng.standard_normal((7, 12))
    x1 = rng.standard_normal(12)
    x2 = rng.standard_normal(12)
    lhs = transmit(A, x1 + x2, 0.0, rng)
    rhs = transmit(A, x1, 0.0, rng) + transmit(A, x2, 0.0, rng)
    assert_allclose(lhs, rhs, atol=1e-12)


def test_transmit_dimension_mismatch():
    rng = np.random.default_rng(7)
    with pytest.raises(ValueError):
        transmit(np.eye(3), np.zeros(4), 0.1, rng)


def test_ser_basic():
    a = np.array([1.0, 0.0, -1.0, 0.0])
    assert ser(a, a) == 0.0
    assert ser(a, -a + 2 * (a == 0)) == 1.0
    b = a.copy()
    b[1] = 1.0
    assert ser(a, b) == 0.25
    with pytest.raises(ValueError):
        ser(a, a[:3])


def test_ser_symmetry_and_zero_iff_equal():
    rng = np.random.default_rng(8)
    p = Prior(alphabet=(-1.0, 1.0), L=40, s=6)
    for _ in range(20):
        x = sample_signal(rng, p)
        y = sample_signal(rng, p)
        assert ser(x, y) == ser(y, x)
        assert (ser(x, y) == 0.0) == np.array_equal(x, y)


def test_quantize_nearest_and_ties():
    p = Prior(alphabet=(-1.0, 1.0), L=258, s=20)  # p0 > p_symbol
    assert_array_equal(quantize(np.array([0.6]), p), [1.0])
    assert_array_equal(quantize(np.array([0.5]), p), [0.0])   # tie -> higher prior
    assert_array_equal(quantize(np.array([-0.49]), p), [0.0])
    assert_array_equal(quantize(np.array([-0.51]), p), [-1.0])
    assert_array_equal(quantize(np.array([10.0, -10.0]), p), [1.0, -1.0])


def test_quantize_tie_prefers_higher_prior_when_sparse_inverted():
    # dense prior: nonzero symbols more probable than zero
    p = Prior(alphabet=(-1.0, 1.0), L=10, s=9)  # p0 = 0.1 < 0.45
    assert_array_equal(quantize(np.array([0.5]), p), [1.0])


def test_quantize_idempotent():
    rng = np.random.default_rng(9)
    p = Prior(alphabet=(-1.0, 1.0), L=50, s=10)
    v = rng.standard_normal(200) * 2
    q1 = quantize(v, p)
    assert_array_equal(quantize(q1, p), q1)
