import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from turbocs.matrices import (GENERAL_DENSE, PARTIAL_ORTHOGONAL,
                              gen_gaussian_normalized, gen_partial_orthogonal,
                              haar_orthogonal, load_matrix, save_matrix)
from turbocs.model import ConfigError


def test_partial_orthogonal_structure():
    sm = gen_partial_orthogonal(np.random.default_rng(0), 129, 258)
    assert sm.kind == PARTIAL_ORTHOGONAL
    assert sm.A.shape == (129, 258)
    # unit columns
    assert_allclose(np.linalg.norm(sm.A, axis=0), 1.0, atol=1e-10)
    # orthonormal rows of U
    assert_allclose(sm.U @ sm.U.T, np.eye(129), atol=1e-10)
    # factored form and the column scaling definition
    assert_allclose(sm.A, sm.U * sm.c[None, :], atol=1e-12)
    assert_allclose(sm.c ** 2, 1.0 / np.sum(sm.U ** 2, axis=0), atol=1e-12)
    assert sm.c_bar_sq == pytest.approx(np.mean(sm.c ** 2))


def test_partial_orthogonal_square_case():
    sm = gen_partial_orthogonal(np.random.default_rng(1), 16, 16)
    assert_allclose(sm.c, np.ones(16), atol=1e-10)
    assert_allclose(sm.A @ sm.A.T, np.eye(16), atol=1e-10)


def test_partial_orthogonal_cbar_concentration():
    # mean of c_bar^2 over realizations concentrates near L/K = 2
    vals = [gen_partial_orthogonal(np.random.default_rng(i), 129, 258).c_bar_sq
            for i in range(100)]
    assert abs(np.mean(vals) - 2.0) < 0.1


def test_haar_orthogonal_is_orthogonal():
    Q = haar_orthogonal(np.random.default_rng(2), 40)
    assert_allclose(Q @ Q.T, np.eye(40), atol=1e-10)


def test_gaussian_normalized_columns():
    sm = gen_gaussian_normalized(np.random.default_rng(3), 129, 258)
    assert sm.kind == GENERAL_DENSE
    assert sm.U is None and sm.c is None
    assert_allclose(np.linalg.norm(sm.A, axis=0), 1.0, atol=1e-10)


def test_gaussian_scalar_case():
    sm = gen_gaussian_normalized(np.random.default_rng(4), 1, 1)
    assert sm.A.shape == (1, 1)
    assert abs(abs(sm.A[0, 0]) - 1.0) < 1e-14


def test_seed_reproducibility():
    a = gen_gaussian_normalized(np.random.default_rng(5), 8, 20).A
    b = gen_gaussian_normalized(np.random.default_rng(5), 8, 20).A
    assert_array_equal(a, b)
    c = gen_gaussian_normalized(np.random.default_rng(6), 8, 20).A
    assert np.any(a != c)
    d = gen_partial_orthogonal(np.random.default_rng(5), 8, 20).A
    e = gen_partial_orthogonal(np.random.default_rng(5), 8, 20).A
    assert_array_equal(d, e)


def test_dimension_validation():
    rng = np.random.default_rng(7)
    with pytest.raises(ConfigError):
        gen_partial_orthogonal(rng, 10, 9)
    with pytest.raises(ConfigError):
        gen_gaussian_normalized(rng, 0, 5)


def test_save_load_round_trip(tmp_path):
    sm = gen_partial_orthogonal(np.random.default_rng(8), 6, 12)
    path = tmp_path / "matrix.npz"
    save_matrix(sm, path, seed=8)
    back = load_matrix(path)
    assert back.kind == sm.kind
    assert_array_equal(back.A, sm.A)
    assert_array_equal(back.U, sm.U)
    assert_array_equal(back.c, sm.c)
    assert back.c_bar_sq == pytest.approx(sm.c_bar_sq)

    dense = gen_gaussian_normalized(np.random.default_rng(9), 6, 12)
    path2 = tmp_path / "dense.npz"
    save_matrix(dense, path2)
    back2 = load_matrix(path2)
    assert back2.kind == GENERAL_DENSE
    assert_array_equal(back2.A, dense.A)
    assert back2.U is None
