import numpy as np
import pytest

from turbocs.diagnostics import (MONTE_CARLO, QUADRATURE,
                                 verify_extrinsic_unbias,
                                 verify_stein_identity,
                                 verify_variance_tracking)
from turbocs.matrices import gen_gaussian_normalized, gen_partial_orthogonal
from turbocs.model import ConfigError, Prior, ProblemInstance, sample_signal, transmit

PRIOR = Prior(alphabet=(-1.0, 1.0), L=258, s=20)


def test_stein_quadrature_reference_case():
    rep = verify_stein_identity(PRIOR, 0.1, method=QUADRATURE, budget=200)
    assert rep.method == QUADRATURE
    assert rep.budget == 200
    assert rep.rel_err < 1e-8


def test_stein_quadrature_across_variances_and_alphabets():
    # the identity is distribution-free; wider alphabets get a denser rule
    # because their integrands span a larger interval
    cases = [((1.0,), 200), ((-1.0, 1.0), 200), ((-3.0, -1.0, 1.0, 3.0), 600)]
    for alphabet, budget in cases:
        prior = Prior(alphabet=alphabet, L=258, s=20)
        for s2 in (0.01, 0.1, 1.0):
            rep = verify_stein_identity(prior, s2, method=QUADRATURE, budget=budget)
            assert rep.rel_err < 1e-8, (alphabet, s2, rep.rel_err)


def test_stein_degenerate_prior():
    prior = Prior(alphabet=(-1.0, 1.0), L=10, s=0)
    rep = verify_stein_identity(prior, 0.1, method=QUADRATURE, budget=200)
    assert rep.lhs == 0.0
    assert rep.rhs == 0.0


def test_stein_monte_carlo():
    rng = np.random.default_rng(0)
    rep = verify_stein_identity(PRIOR, 0.1, method=MONTE_CARLO, budget=10 ** 6,
                                rng=rng)
    assert rep.method == MONTE_CARLO
    assert rep.std_err > 0
    assert rep.abs_err < 3 * rep.std_err
    # regression estimate of the linearization factor agrees with
    # 1 - E{var}/sigma_e^2
    assert rep.k_e_regress == pytest.approx(rep.k_e_theory, abs=0.02)


def test_stein_budget_validation():
    with pytest.raises(ConfigError):
        verify_stein_identity(PRIOR, 0.1, method=QUADRATURE, budget=5)
    with pytest.raises(ValueError):
        verify_stein_identity(PRIOR, -0.1)


def make_instance(seed, kind, L=32, K=16, s=2, snr_db=15.0):
    rng = np.random.default_rng(seed)
    gen = gen_partial_orthogonal if kind == "ortho" else gen_gaussian_normalized
    sm = gen(rng, K, L)
    prior = Prior(alphabet=(-1.0, 1.0), L=L, s=s)
    sigma_n_sq = 10.0 ** (-snr_db / 10.0)
    x = sample_signal(rng, prior)
    y = transmit(sm, x, sigma_n_sq, rng)
    return ProblemInstance(A=sm, x_true=x, y=y, sigma_n_sq=sigma_n_sq), prior


def test_extrinsic_unbias_small_discrepancy():
    worst = 0.0
    for i in range(20):
        inst, prior = make_instance((3, i), "ortho" if i % 2 else "gauss")
        for v_pri in (0.01, prior.activity, 1.0):
            worst = max(worst, verify_extrinsic_unbias(inst, prior, v_pri))
    assert worst < 1e-10


def test_extrinsic_unbias_rejects_bad_variance():
    inst, prior = make_instance(4, "gauss")
    with pytest.raises(ValueError):
        verify_extrinsic_unbias(inst, prior, 0.0)


def test_variance_tracking_initial_ratio_exact():
    prior = Prior(alphabet=(-1.0, 1.0), L=64, s=5)
    rep = verify_variance_tracking(
        prior, lambda rng: gen_partial_orthogonal(rng, 32, 64),
        snr_db=10.0, trials=100, max_iters=3, seed=0)
    assert rep["ratio"][0] == 1.0
    assert rep["tracked"][0] == prior.activity


def test_variance_tracking_requires_trials():
    prior = Prior(alphabet=(-1.0, 1.0), L=64, s=5)
    with pytest.raises(ConfigError):
        verify_variance_tracking(prior, lambda rng: gen_partial_orthogonal(rng, 32, 64),
                                 snr_db=10.0, trials=10)


def test_variance_tracking_reference_config_first_iterations():
    # tracked variances stay calibrated within a factor two early on
    rep = verify_variance_tracking(
        PRIOR, lambda rng: gen_partial_orthogonal(rng, 129, 258),
        snr_db=12.0, trials=100, max_iters=5, seed=1)
    for r in rep["ratio"]:
        assert 0.5 <= r <= 2.0, rep["ratio"]


def test_variance_tracking_no_information_plateau():
    # at very high noise both tracked and true error stay near the prior power
    prior = Prior(alphabet=(-1.0, 1.0), L=64, s=5)
    rep = verify_variance_tracking(
        prior, lambda rng: gen_partial_orthogonal(rng, 32, 64),
        snr_db=-60.0, trials=100, max_iters=4, seed=2)
    for tracked, empirical in zip(rep["tracked"], rep["empirical"]):
        assert tracked == pytest.approx(prior.activity, rel=0.15)
        assert empirical == pytest.approx(prior.activity, rel=0.15)
