# Machine-checkable verification of the estimator identities:
#  - the Stein-type relation E{g(x+e) e} = average posterior variance for
#    Gaussian error e, checked by quadrature and independently by Monte Carlo;
#  - per-element equality of bias compensation and extrinsic computation
#    after one exact LMMSE step;
#  - empirical calibration of the variance sequence tracked by the turbo loop.

from dataclasses import dataclass, asdict

import numpy as np

from . import denoiser
from .model import ConfigError, sample_signal, transmit
from .recover import RecoveryConfig, _dense, _lmmse_dual_step, run_tms

QUADRATURE = "quadrature"
MONTE_CARLO = "monte_carlo"


@dataclass
class IdentityReport:
    lhs: float
    rhs: float
    abs_err: float
    rel_err: float
    method: str
    budget: int
    std_err: float = None       # Monte Carlo only
    k_e_regress: float = None   # Monte Carlo only: LS fit of z - g(z) on e
    k_e_theory: float = None    # 1 - rhs / sigma_e^2
    corr_err_obs: float = None  # Monte Carlo only: corr(x - g(z), z); soft
                                # check that the posterior error is
                                # uncorrelated with the observation

    def to_dict(self):
        return asdict(self)


def _identity_report(lhs, rhs, method, budget, **kw):
    abs_err = abs(lhs - rhs)
    return IdentityReport(lhs=float(lhs), rhs=float(rhs), abs_err=float(abs_err),
                          rel_err=float(abs_err / max(abs(rhs), 1e-300)),
                          method=method, budget=budget, **kw)


def _mirror_symmetric(prior):
    """True when every atom a with probability p has a partner -a with the
    same probability (always the case for C = -C alphabets)."""
    atoms, probs = prior.atoms, prior.atom_probs
    for a, p in zip(atoms, probs):
        match = np.isclose(atoms, -a) & np.isclose(probs, p)
        if not match.any():
            return False
    return True


def _stein_quadrature(prior, sigma_e_sq, budget):
    """Uniform-trapezoid quadrature of both sides of the identity.

    Each atom-conditional integral gets a `budget`-node uniform rule over its
    non-negligible span (the uniform trapezoid is spectrally accurate for
    these analytic, Gaussian-decaying integrands; a Gauss-Hermite rule of the
    same size cannot resolve the posterior-transition bumps sitting in its
    sparse tail region).  For mirror-symmetric priors the zero atom is
    integrated on the half line, which doubles its resolution, and the +-a
    atom pairs are computed once since their integrals are equal exactly.
    """
    sig = np.sqrt(sigma_e_sq)
    atoms = prior.atoms
    probs = prior.atom_probs
    reach = float(atoms.max() - atoms.min()) + 12.0 * sig + 1.0
    norm = 1.0 / np.sqrt(2.0 * np.pi * sigma_e_sq)
    symmetric = _mirror_symmetric(prior)

    def f_lhs(e, x):
        mean, _ = denoiser._posterior_moments(x + e, sigma_e_sq, prior)
        return mean * e * norm * np.exp(-e * e / (2.0 * sigma_e_sq))

    def f_rhs(e, x):
        _, var = denoiser._posterior_moments(x + e, sigma_e_sq, prior)
        return var * norm * np.exp(-e * e / (2.0 * sigma_e_sq))

    def span(x):
        probe = np.linspace(-reach, reach, 2001)
        fp = np.maximum(np.abs(f_lhs(probe, x)), f_rhs(probe, x))
        top = fp.max()
        if top == 0.0:
            return None
        active = np.nonzero(fp >= top * 1e-14)[0]
        pad = 3 * (probe[1] - probe[0])
        return probe[active[0]] - pad, probe[active[-1]] + pad

    lhs = rhs = 0.0
    for x, px in zip(atoms, probs):
        if px == 0.0:
            continue
        if symmetric and x < 0.0:
            continue  # equals the +x integral exactly; weighted below
        where = span(float(x))
        if where is None:
            continue
        lo, hi = where
        if symmetric and x == 0.0:
            # both integrands are even in e here
            grid = np.linspace(0.0, max(abs(lo), abs(hi)), budget)
            weight, factor = px, 2.0
        else:
            grid = np.linspace(lo, hi, budget)
            weight = 2.0 * px if (symmetric and x > 0.0) else px
            factor = 1.0
        lhs += weight * factor * float(np.trapezoid(f_lhs(grid, float(x)), grid))
        rhs += weight * factor * float(np.trapezoid(f_rhs(grid, float(x)), grid))
    return lhs, rhs


def _stein_monte_carlo(prior, sigma_e_sq, budget, rng):
    idx = rng.choice(len(prior.atoms), size=budget, p=prior.atom_probs)
    x = prior.atoms[idx]
    e = np.sqrt(sigma_e_sq) * rng.standard_normal(budget)
    z = x + e
    mean, var = denoiser._posterior_moments(z, sigma_e_sq, prior)
    lhs_samples = mean * e
    diff = lhs_samples - var
    std_err = float(np.std(diff, ddof=1) / np.sqrt(budget))
    k_e_regress = float(np.sum((z - mean) * e) / np.sum(e * e))
    err = x - mean
    corr = float(np.corrcoef(err, z)[0, 1]) if err.std() > 0 else 0.0
    return (float(np.mean(lhs_samples)), float(np.mean(var)), std_err,
            k_e_regress, corr)


def verify_stein_identity(prior, sigma_e_sq, method=QUADRATURE, budget=None, rng=None):
    """Check E{g(x+e) e} (lhs) against the mean posterior variance (rhs).

    Quadrature integrates both sides per atom of the prior with a
    `budget`-node rule (default 200); Monte Carlo estimates both sides from
    `budget` shared samples (default 10^6) and reports the standard error of
    the difference plus a regression estimate of the linearization factor.
    """
    if sigma_e_sq <= 0 or not np.isfinite(sigma_e_sq):
        raise ValueError("sigma_e_sq must be finite and > 0")
    if method == QUADRATURE:
        budget = 200 if budget is None else int(budget)
        if budget < 10:
            raise ConfigError("quadrature budget must be >= 10 nodes")
        lhs, rhs = _stein_quadrature(prior, sigma_e_sq, budget)
        return _identity_report(lhs, rhs, QUADRATURE, budget,
                                k_e_theory=1.0 - rhs / sigma_e_sq)
    if method == MONTE_CARLO:
        budget = 10 ** 6 if budget is None else int(budget)
        if budget < 10:
            raise ConfigError("Monte Carlo budget must be >= 10 samples")
        rng = np.random.default_rng(0) if rng is None else rng
        lhs, rhs, std_err, k_e_regress, corr = _stein_monte_carlo(
            prior, sigma_e_sq, budget, rng)
        return _identity_report(lhs, rhs, MONTE_CARLO, budget, std_err=std_err,
                                k_e_regress=k_e_regress,
                                k_e_theory=1.0 - rhs / sigma_e_sq,
                                corr_err_obs=corr)
    raise ValueError(f"unknown method {method!r}")


def verify_extrinsic_unbias(instance, prior, sigma_pri_sq):
    """Max relative gap between bias compensation and per-element extrinsics.

    Runs one exact LMMSE step from the zero prior mean, then compares the
    unbiased means/variances (compensation by 1/K_ii) against the extrinsic
    values formed with the per-element posterior variance
    sigma_pri^2 (1 - K_ii).  The two are algebraically identical, so the
    returned discrepancy measures numerical error only.
    """
    if sigma_pri_sq <= 0:
        raise ValueError("sigma_pri_sq must be > 0")
    Am = _dense(instance.A)
    x_pri = np.zeros(Am.shape[1])
    update, k_diag = _lmmse_dual_step(Am, Am @ Am.T, instance.y - Am @ x_pri,
                                      sigma_pri_sq, instance.sigma_n_sq)
    x_post = x_pri + update

    x_unb, var_unb = denoiser.unbias_elementwise(x_pri, x_post, k_diag, sigma_pri_sq)

    kc = np.clip(k_diag, denoiser.K_DIAG_MIN, denoiser.K_DIAG_MAX)
    var_post = sigma_pri_sq * (1.0 - kc)
    var_ext = 1.0 / (1.0 / var_post - 1.0 / sigma_pri_sq)
    x_ext = var_ext * (x_post / var_post - x_pri / sigma_pri_sq)

    def rel(a, b):
        return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)

    return float(max(rel(x_unb, x_ext).max(), rel(var_unb, var_ext).max()))


def verify_variance_tracking(prior, matrix_gen, snr_db, trials, max_iters=10, seed=0):
    """Compare the tracked prior variance of TMS against the true per-iteration
    mean-squared error, averaged over fresh instances.

    matrix_gen(rng) must return a fresh sensing matrix; trials >= 100 is
    required so the empirical averages are stable.  Returns a dict with the
    per-iteration tracked and empirical variances and their ratio.
    """
    if trials < 100:
        raise ConfigError("variance tracking needs trials >= 100")
    sigma_n_sq = 10.0 ** (-snr_db / 10.0)
    cfg = RecoveryConfig(algorithm="tms", max_iters=max_iters, record_trace=True)
    tracked = np.zeros(max_iters)
    empirical = np.zeros(max_iters)
    for t in range(trials):
        rng = np.random.default_rng((seed, t))
        sm = matrix_gen(rng)
        x = sample_signal(rng, prior)
        y = transmit(sm, x, sigma_n_sq, rng)
        res = run_tms(y, sm, sigma_n_sq, prior, cfg)
        for it, entry in enumerate(res.trace):
            tracked[it] += entry["v_m_pri"]
            empirical[it] += float(np.mean((entry["x_m_pri"] - x) ** 2))
    tracked /= trials
    empirical /= trials
    return {
        "snr_db": snr_db,
        "trials": trials,
        "iterations": list(range(max_iters)),
        "tracked": tracked.tolist(),
        "empirical": empirical.tolist(),
        "ratio": (tracked / np.maximum(empirical, 1e-300)).tolist(),
    }
