# Iterative recovery algorithms.
#
# TMS: exact-LMMSE turbo loop (linear stage solves the K x K dual system).
# TSR: approximate turbo loop (scaled matched filter / factored form).
# IHT, SFT, BAMP: baselines sharing the same prior and final quantizer.
#
# All algorithms are deterministic given (y, A, sigma_n_sq, prior, cfg); none
# consumes randomness, which is what makes paired Monte-Carlo trials work.

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from . import denoiser
from .denoiser import V_MAX, V_MIN
from .model import ConfigError, quantize

ALGORITHMS = ("tms", "tsr", "iht", "sft", "bamp")


@dataclass
class RecoveryConfig:
    max_iters: int = 50
    early_stop_tol: float = 0.0  # 0 disables; else stop when max |delta x| < tol
    algorithm: str = "tms"
    record_trace: bool = False

    def validate(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.early_stop_tol < 0:
            raise ConfigError("early_stop_tol must be >= 0")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    x_soft: np.ndarray
    iters_run: int
    trace: list = None
    diverged: bool = False
    clamp_events: int = 0


def _dense(A):
    return A.A if hasattr(A, "A") else np.asarray(A, dtype=float)


def _check_inputs(y, Am, sigma_n_sq, need_positive_noise):
    K = Am.shape[0]
    if np.asarray(y).shape != (K,):
        raise ValueError(f"y has shape {np.asarray(y).shape}, expected ({K},)")
    if need_positive_noise and not sigma_n_sq > 0:
        raise ValueError("sigma_n_sq must be > 0 for the LMMSE-based algorithms")
    if sigma_n_sq < 0:
        raise ValueError("sigma_n_sq must be >= 0")


def _lmmse_dual_step(Am, G, y_resid, sigma_pri_sq, sigma_n_sq):
    """One exact LMMSE update in the K x K dual form.

    Returns the additive mean update sigma_pri^2 A^T M^-1 r and the diagonal
    K_ii = sigma_pri^2 a_i^T M^-1 a_i, where M = sigma_pri^2 A A^T +
    sigma_n^2 I.  The diagonal is extracted by back-substituting A's columns
    through the Cholesky factor (never forming the L x L cascade matrix).
    """
    K = G.shape[0]
    M = sigma_pri_sq * G
    M.flat[:: K + 1] += sigma_n_sq
    F = cho_factor(M, lower=True, overwrite_a=True, check_finite=False)
    update = sigma_pri_sq * (Am.T @ cho_solve(F, y_resid, check_finite=False))
    Z = solve_triangular(F[0], Am, lower=True, check_finite=False)
    k_diag = sigma_pri_sq * np.sum(Z * Z, axis=0)
    return update, k_diag


def _turbo_loop(y, A, sigma_n_sq, prior, cfg, linear_stage):
    """Shared scaffold of TMS and TSR: linear stage, extrinsic, soft feedback,
    extrinsic back, final quantization."""
    Am = _dense(A)
    L = Am.shape[1]
    x_m_pri = np.zeros(L)
    v_m_pri = prior.activity
    x_s_post = np.zeros(L)
    prev = None
    trace = [] if cfg.record_trace else None
    clamps_total = 0
    iters_run = 0

    for _ in range(cfg.max_iters):
        entry = {"v_m_pri": v_m_pri} if cfg.record_trace else None
        if cfg.record_trace:
            entry["x_m_pri"] = x_m_pri.copy()

        x_m_post, v_m_post = linear_stage(x_m_pri, v_m_pri)

        x_s_pri, v_s_pri, gap1, rng1 = denoiser.extrinsic_with_flags(
            x_m_post, v_m_post, x_m_pri, v_m_pri)

        den = denoiser.soft_value_vec(x_s_pri, v_s_pri, prior)
        x_s_post = den.post_mean
        v_s_post = den.post_var_mean
        floor_clamp = v_s_post < V_MIN
        v_s_post = max(v_s_post, V_MIN)

        x_m_pri, v_m_pri, gap2, rng2 = denoiser.extrinsic_with_flags(
            x_s_post, v_s_post, x_s_pri, v_s_pri)

        clamps = int(gap1) + int(rng1) + int(gap2) + int(rng2) + int(floor_clamp)
        clamps_total += clamps
        iters_run += 1
        if cfg.record_trace:
            entry.update(v_m_post=v_m_post, v_m_ext=v_s_pri,
                         v_s_post=v_s_post, v_s_ext=v_m_pri, clamps=clamps)
            trace.append(entry)

        if cfg.early_stop_tol > 0 and prev is not None:
            if np.max(np.abs(x_s_post - prev)) < cfg.early_stop_tol:
                break
        prev = x_s_post.copy() if cfg.early_stop_tol > 0 else None

    return RecoveryResult(x_hat=quantize(x_s_post, prior), x_soft=x_s_post,
                          iters_run=iters_run, trace=trace,
                          clamp_events=clamps_total)


def run_tms(y, A, sigma_n_sq, prior, cfg=None):
    """Turbo recovery with the exact LMMSE linear stage (any matrix kind)."""
    cfg = cfg or RecoveryConfig(algorithm="tms")
    cfg.validate()
    Am = _dense(A)
    _check_inputs(y, Am, sigma_n_sq, need_positive_noise=True)
    y = np.asarray(y, dtype=float)
    G = Am @ Am.T

    def linear(x_pri, v_pri):
        update, k_diag = _lmmse_dual_step(Am, G, y - Am @ x_pri, v_pri, sigma_n_sq)
        v_post = v_pri * (1.0 - float(np.mean(k_diag)))
        return x_pri + update, v_post

    return _turbo_loop(y, A, sigma_n_sq, prior, cfg, linear)


def run_tsr(y, A, sigma_n_sq, prior, cfg=None):
    """Turbo recovery with the approximate (matched-filter style) linear stage.

    Uses the factored C^-1 U^T form when the matrix carries U and c; for a
    general dense matrix it falls back to the A^T approximation with unit
    average column scaling.
    """
    cfg = cfg or RecoveryConfig(algorithm="tsr")
    cfg.validate()
    Am = _dense(A)
    _check_inputs(y, Am, sigma_n_sq, need_positive_noise=True)
    y = np.asarray(y, dtype=float)
    K, L = Am.shape
    factored = getattr(A, "U", None) is not None
    c_bar_sq = A.c_bar_sq if factored else 1.0

    def linear(x_pri, v_pri):
        resid = y - Am @ x_pri
        gain = c_bar_sq * v_pri / (c_bar_sq * v_pri + sigma_n_sq)
        if factored:
            x_post = x_pri + gain * ((A.U.T @ resid) / A.c)
        else:
            x_post = x_pri + (v_pri / (c_bar_sq * v_pri + sigma_n_sq)) * (Am.T @ resid)
        v_post = v_pri * (1.0 - (K / L) * gain)
        return x_post, v_post

    return _turbo_loop(y, A, sigma_n_sq, prior, cfg, linear)


def _hard_threshold(w, s):
    """Keep the s largest-magnitude entries (ties to the lower index)."""
    out = np.zeros_like(w)
    if s > 0:
        keep = np.argsort(-np.abs(w), kind="stable")[:s]
        out[keep] = w[keep]
    return out


def run_iht(y, A, sigma_n_sq, prior, cfg=None):
    """Iterative hard thresholding with unit step, quantized at the end."""
    cfg = cfg or RecoveryConfig(algorithm="iht")
    cfg.validate()
    Am = _dense(A)
    _check_inputs(y, Am, sigma_n_sq, need_positive_noise=False)
    y = np.asarray(y, dtype=float)
    x = np.zeros(Am.shape[1])
    trace = [] if cfg.record_trace else None
    iters_run = 0
    for _ in range(cfg.max_iters):
        x_new = _hard_threshold(x + Am.T @ (y - Am @ x), prior.s)
        change = float(np.max(np.abs(x_new - x))) if x_new.size else 0.0
        x = x_new
        iters_run += 1
        if cfg.record_trace:
            trace.append({"max_change": change})
        if cfg.early_stop_tol > 0 and change < cfg.early_stop_tol:
            break
    return RecoveryResult(x_hat=quantize(x, prior), x_soft=x,
                          iters_run=iters_run, trace=trace)


def run_sft(y, A, sigma_n_sq, prior, cfg=None):
    """Soft-feedback thresholding: the IHT scaffold with the hard threshold
    replaced by the Bayes denoiser at a residual-energy noise estimate."""
    cfg = cfg or RecoveryConfig(algorithm="sft")
    cfg.validate()
    Am = _dense(A)
    _check_inputs(y, Am, sigma_n_sq, need_positive_noise=False)
    y = np.asarray(y, dtype=float)
    K = Am.shape[0]
    x = np.zeros(Am.shape[1])
    trace = [] if cfg.record_trace else None
    iters_run = 0
    for _ in range(cfg.max_iters):
        resid = y - Am @ x
        tau = min(max(float(resid @ resid) / K, V_MIN), V_MAX)
        x_new = denoiser.soft_value_vec(x + Am.T @ resid, tau, prior).post_mean
        change = float(np.max(np.abs(x_new - x)))
        x = x_new
        iters_run += 1
        if cfg.record_trace:
            trace.append({"tau": tau, "max_change": change})
        if cfg.early_stop_tol > 0 and change < cfg.early_stop_tol:
            break
    return RecoveryResult(x_hat=quantize(x, prior), x_soft=x,
                          iters_run=iters_run, trace=trace)


def run_bamp(y, A, sigma_n_sq, prior, cfg=None):
    """Bayesian AMP: matched filter plus Onsager-corrected residual, with the
    effective noise tracked from the residual energy."""
    cfg = cfg or RecoveryConfig(algorithm="bamp")
    cfg.validate()
    Am = _dense(A)
    _check_inputs(y, Am, sigma_n_sq, need_positive_noise=False)
    y = np.asarray(y, dtype=float)
    K, L = Am.shape
    x = np.zeros(L)
    r_prev = np.zeros(K)
    onsager = 0.0
    trace = [] if cfg.record_trace else None
    iters_run = 0
    diverged = False
    for _ in range(cfg.max_iters):
        r = y - Am @ x + (L / K) * onsager * r_prev
        tau_raw = float(r @ r) / K
        if tau_raw > V_MAX:
            diverged = True
            if cfg.record_trace:
                trace.append({"tau": tau_raw, "diverged": True})
            break
        tau = max(tau_raw, V_MIN)
        den = denoiser.soft_value_vec(x + Am.T @ r, tau, prior)
        change = float(np.max(np.abs(den.post_mean - x)))
        x = den.post_mean
        onsager = den.post_var_mean / tau  # mean of soft_value_deriv
        r_prev = r
        iters_run += 1
        if cfg.record_trace:
            trace.append({"tau": tau, "onsager": onsager})
        if cfg.early_stop_tol > 0 and change < cfg.early_stop_tol:
            break
    return RecoveryResult(x_hat=quantize(x, prior), x_soft=x,
                          iters_run=iters_run, trace=trace, diverged=diverged)


_RUNNERS = {"tms": run_tms, "tsr": run_tsr, "iht": run_iht,
            "sft": run_sft, "bamp": run_bamp}


def recover(y, A, sigma_n_sq, prior, cfg):
    """Dispatch on cfg.algorithm."""
    cfg.validate()
    return _RUNNERS[cfg.algorithm](y, A, sigma_n_sq, prior, cfg)
