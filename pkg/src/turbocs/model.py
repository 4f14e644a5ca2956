# Source, channel and metric definitions for discrete sparse recovery.
#
# Signal model: x in C0^L with C0 = {0} u C, exactly s nonzero entries,
# observed through y = A x + n with n ~ N(0, sigma_n^2 I).

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class ConfigError(ValueError):
    """Invalid problem or sweep configuration."""


@dataclass(frozen=True)
class Prior:
    """I.i.d. discrete sparse prior.

    Each element is 0 with probability 1 - s/L and equals each symbol of the
    nonzero alphabet with probability (s/L)/|C|.  The exactly-s support
    constraint of the generator is captured here only through the activity
    ratio s/L, which is what the iterative algorithms use.
    """

    alphabet: tuple
    L: int
    s: int

    def __post_init__(self):
        alphabet = tuple(float(c) for c in self.alphabet)
        if len(alphabet) == 0:
            raise ConfigError("alphabet must contain at least one symbol")
        if any(not np.isfinite(c) for c in alphabet):
            raise ConfigError("alphabet symbols must be finite")
        if any(c == 0.0 for c in alphabet):
            raise ConfigError("0 is implicit in C0 and must not appear in the alphabet")
        if any(b <= a for a, b in zip(alphabet, alphabet[1:])):
            raise ConfigError("alphabet symbols must be strictly increasing")
        if self.L < 1:
            raise ConfigError("L must be a positive integer")
        if not 0 <= self.s <= self.L:
            raise ConfigError(f"sparsity s={self.s} must satisfy 0 <= s <= L={self.L}")
        object.__setattr__(self, "alphabet", alphabet)

    @property
    def activity(self):
        """Probability that an element is nonzero, s/L."""
        return self.s / self.L

    @property
    def p0(self):
        return 1.0 - self.s / self.L

    @property
    def p_symbol(self):
        """Prior probability of each individual nonzero symbol."""
        return (self.s / self.L) / len(self.alphabet)

    @property
    def signal_power(self):
        """E{x_i^2} = (s/L) * mean of c^2 over the alphabet."""
        return self.activity * float(np.mean(np.square(self.alphabet)))

    @cached_property
    def atoms(self):
        """All admissible symbols, zero first: C0 = {0} u C."""
        return np.array((0.0,) + self.alphabet)

    @cached_property
    def atom_probs(self):
        return np.array((self.p0,) + (self.p_symbol,) * len(self.alphabet))

    @cached_property
    def _quantize_order(self):
        # atom indices ordered by (higher prior, smaller |symbol|, value);
        # argmin over distances then picks the first entry on exact ties
        a, p = self.atoms, self.atom_probs
        return np.lexsort((a, np.abs(a), -p))


@dataclass
class Estimate:
    """A (mean vector, scalar error variance) belief about x."""

    mean: np.ndarray
    variance: float


@dataclass
class ProblemInstance:
    """One realized trial: y = A x_true + n."""

    A: object  # SensingMatrix or dense ndarray
    x_true: np.ndarray
    y: np.ndarray
    sigma_n_sq: float


def _dense(A):
    return A.A if hasattr(A, "A") else np.asarray(A, dtype=float)


def sample_signal(rng, prior):
    """Draw a vector with exactly s nonzeros, support uniform over subsets,
    values uniform over the alphabet.  Draw order: support, then values."""
    x = np.zeros(prior.L)
    if prior.s == 0:
        return x
    support = rng.choice(prior.L, size=prior.s, replace=False)
    values = np.asarray(prior.alphabet)[rng.integers(0, len(prior.alphabet), size=prior.s)]
    x[support] = values
    return x


def transmit(A, x, sigma_n_sq, rng):
    """y = A x + n with n_i i.i.d. N(0, sigma_n_sq); exact A x when sigma_n_sq = 0.

    Noise is drawn as sqrt(sigma_n_sq) * rng.standard_normal(K); nothing is
    drawn when sigma_n_sq = 0.
    """
    Am = _dense(A)
    x = np.asarray(x, dtype=float)
    if x.shape != (Am.shape[1],):
        raise ValueError(f"x has shape {x.shape}, expected ({Am.shape[1]},)")
    if sigma_n_sq < 0:
        raise ValueError("sigma_n_sq must be >= 0")
    y = Am @ x
    if sigma_n_sq > 0:
        y = y + np.sqrt(sigma_n_sq) * rng.standard_normal(Am.shape[0])
    return y


def ser(x_hat, x_true):
    """Symbol error rate: fraction of positions with x_hat != x_true."""
    x_hat = np.asarray(x_hat)
    x_true = np.asarray(x_true)
    if x_hat.shape != x_true.shape:
        raise ValueError(f"length mismatch: {x_hat.shape} vs {x_true.shape}")
    return float(np.mean(x_hat != x_true))


def quantize(v, prior):
    """Elementwise nearest symbol of C0.

    Ties go to the symbol with the larger prior probability, remaining ties
    to the smaller absolute value (then to the smaller symbol).  Any fixed
    rule works since ties have probability zero; this one is reproducible.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    atoms = prior.atoms[prior._quantize_order]
    dist = np.abs(v[:, None] - atoms[None, :])
    return atoms[np.argmin(dist, axis=1)]
