# Measurement matrix ensembles.
#
# Two families, both with unit-norm columns: a random selection of rows of a
# Haar orthogonal matrix in factored form A = U diag(c), and a column-
# normalized i.i.d. Gaussian matrix.

from dataclasses import dataclass

import numpy as np

from .model import ConfigError

PARTIAL_ORTHOGONAL = "partial_orthogonal"
GENERAL_DENSE = "general_dense"


@dataclass
class SensingMatrix:
    """Dense K x L measurement operator, optionally with the U diag(c) factors."""

    A: np.ndarray
    kind: str
    U: np.ndarray = None
    c: np.ndarray = None
    c_bar_sq: float = None

    @property
    def K(self):
        return self.A.shape[0]

    @property
    def L(self):
        return self.A.shape[1]


def haar_orthogonal(rng, n):
    """Haar-distributed n x n orthogonal matrix.

    QR of an i.i.d. Gaussian matrix with the sign correction that makes the
    triangular factor's diagonal positive; without it QR is not uniform.
    """
    G = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d[None, :]


def gen_partial_orthogonal(rng, K, L):
    """K rows of a Haar orthogonal L x L matrix, columns rescaled to unit norm.

    Draw order: the L x L Gaussian block for the Haar factor, then the row
    subset.  c_i^2 = 1 / sum_j U_ji^2, A = U diag(c).
    """
    if not 1 <= K <= L:
        raise ConfigError(f"need 1 <= K <= L, got K={K}, L={L}")
    Q = haar_orthogonal(rng, L)
    rows = rng.choice(L, size=K, replace=False)
    U = Q[rows, :]
    col_energy = np.sum(U * U, axis=0)
    c = 1.0 / np.sqrt(col_energy)
    A = U * c[None, :]
    return SensingMatrix(A=A, kind=PARTIAL_ORTHOGONAL, U=U, c=c,
                         c_bar_sq=float(np.mean(c * c)))


def gen_gaussian_normalized(rng, K, L):
    """i.i.d. N(0,1) entries with each column scaled to unit Euclidean norm."""
    if K < 1 or L < 1:
        raise ConfigError(f"need K >= 1 and L >= 1, got K={K}, L={L}")
    A = rng.standard_normal((K, L))
    A = A / np.linalg.norm(A, axis=0)[None, :]
    return SensingMatrix(A=A, kind=GENERAL_DENSE)


def save_matrix(sm, path, seed=None):
    """Dump a matrix to an .npz container (dense data plus K, L, kind, seed)."""
    extra = {}
    if sm.U is not None:
        extra["U"] = sm.U
        extra["c"] = sm.c
    np.savez(path, A=sm.A, kind=sm.kind, K=sm.K, L=sm.L,
             seed=-1 if seed is None else int(seed), **extra)


def load_matrix(path):
    with np.load(path, allow_pickle=False) as f:
        kind = str(f["kind"])
        A = f["A"]
        if "U" in f:
            c = f["c"]
            return SensingMatrix(A=A, kind=kind, U=f["U"], c=c,
                                 c_bar_sq=float(np.mean(c * c)))
        return SensingMatrix(A=A, kind=kind)
