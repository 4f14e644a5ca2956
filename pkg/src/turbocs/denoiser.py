# Elementwise Bayes posterior under the discrete sparse prior (soft values),
# plus the extrinsic / unbiasing combiner shared by both turbo halves.
#
# The observation model for a soft value is z = x + e with e ~ N(0, sigma^2)
# and x drawn from the prior over C0.  Posterior weights are computed in the
# log domain with max subtraction, so nothing under- or overflows for
# |z| <= 1e6 even at sigma^2 = V_MIN.

from dataclasses import dataclass

import numpy as np

from .model import Estimate

# variance clamps for the extrinsic recursion; the gap rule keeps the
# inverse-difference positive when a stage gains (almost) no information
V_MIN = 1e-12
V_MAX = 1e6
EXT_GAP = 1e-6

K_DIAG_MIN = 1e-12
K_DIAG_MAX = 1.0 - 1e-12


@dataclass
class DenoiseOutput:
    post_mean: np.ndarray
    post_var_mean: float
    post_var_elem: np.ndarray


def _check_sigma(sigma_sq):
    if not np.isfinite(sigma_sq) or sigma_sq <= 0:
        raise ValueError(f"sigma_sq must be finite and > 0, got {sigma_sq}")


def _posterior_moments(z, sigma_sq, prior):
    """Posterior mean and variance of x given z = x + N(0, sigma_sq), vectorized."""
    atoms = prior.atoms
    probs = prior.atom_probs
    # zero-probability atoms drop out exactly (weight e^-inf = 0)
    logp = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), -np.inf)
    logw = logp[None, :] - (z[:, None] - atoms[None, :]) ** 2 / (2.0 * sigma_sq)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    w /= w.sum(axis=1, keepdims=True)
    mean = w @ atoms
    var = w @ (atoms * atoms) - mean * mean
    return mean, np.maximum(var, 0.0)


def soft_value(z, sigma_sq, prior):
    """Scalar posterior (mean, variance) of x given the noisy observation z."""
    _check_sigma(sigma_sq)
    if not np.isfinite(z):
        raise ValueError(f"z must be finite, got {z}")
    mean, var = _posterior_moments(np.array([float(z)]), float(sigma_sq), prior)
    return float(mean[0]), float(var[0])


def soft_value_vec(z, sigma_sq, prior):
    """Elementwise soft values for a whole vector at a shared error variance."""
    _check_sigma(sigma_sq)
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("z contains non-finite entries")
    mean, var = _posterior_moments(z, float(sigma_sq), prior)
    return DenoiseOutput(post_mean=mean, post_var_mean=float(np.mean(var)),
                         post_var_elem=var)


def soft_value_deriv(z, sigma_sq, prior):
    """d/dz of the posterior mean, computed in closed form as var(x|z)/sigma^2."""
    _, var = soft_value(z, sigma_sq, prior)
    return var / sigma_sq


def extrinsic_with_flags(post_mean, post_var, pri_mean, pri_var):
    """Extrinsic mean/variance with the clamp rules; also reports clamp flags.

    post_var is limited to (1 - EXT_GAP) * pri_var before inverting so the
    variance difference stays positive; the result is clipped to
    [V_MIN, V_MAX].
    """
    if not (np.isfinite(post_var) and post_var > 0):
        raise ValueError(f"post variance must be finite and > 0, got {post_var}")
    if not (np.isfinite(pri_var) and pri_var > 0):
        raise ValueError(f"prior variance must be finite and > 0, got {pri_var}")
    cap = (1.0 - EXT_GAP) * pri_var
    gap_clamped = post_var > cap
    pv = min(post_var, cap)
    raw = 1.0 / (1.0 / pv - 1.0 / pri_var)
    ext_var = min(max(raw, V_MIN), V_MAX)
    range_clamped = raw < V_MIN or raw > V_MAX
    ext_mean = ext_var * (post_mean / pv - pri_mean / pri_var)
    return ext_mean, ext_var, gap_clamped, range_clamped


def extrinsic(post, pri):
    """Remove the prior contribution from a posterior belief (Estimate in/out)."""
    mean, var, _, _ = extrinsic_with_flags(post.mean, post.variance,
                                         pri.mean, pri.variance)
    return Estimate(mean=mean, variance=var)


def unbias_elementwise(x_pri, x_post, k_diag, sigma_pri_sq):
    """Bias compensation of an LMMSE step, per element.

    x_U,i = x_pri,i + (x_post,i - x_pri,i) / K_ii and
    sigma_U,i^2 = sigma_pri^2 (1/K_ii - 1), with K_ii clipped into (0, 1).
    """
    kc = np.clip(np.asarray(k_diag, dtype=float), K_DIAG_MIN, K_DIAG_MAX)
    x_u = x_pri + (x_post - x_pri) / kc
    sigma_u_sq = sigma_pri_sq * (1.0 / kc - 1.0)
    return x_u, sigma_u_sq


def count_k_clamps(k_diag):
    """Number of K_ii entries outside the admissible open interval (0, 1)."""
    k = np.asarray(k_diag)
    return int(np.count_nonzero((k <= K_DIAG_MIN) | (k >= K_DIAG_MAX)))
