# turbocs: turbo-style iterative recovery of discrete-valued sparse vectors
# from underdetermined noisy linear measurements, with baselines, bias-
# compensation diagnostics and a Monte-Carlo SER benchmark harness.

__version__ = "0.1.0"

from .model import (ConfigError, Estimate, Prior, ProblemInstance,
                    quantize, sample_signal, ser, transmit)
from .matrices import (SensingMatrix, gen_gaussian_normalized,
                       gen_partial_orthogonal, haar_orthogonal,
                       load_matrix, save_matrix)
from .denoiser import (DenoiseOutput, V_MAX, V_MIN, extrinsic,
                       soft_value, soft_value_deriv, soft_value_vec,
                       unbias_elementwise)
from .recover import (ALGORITHMS, RecoveryConfig, RecoveryResult, recover,
                      run_bamp, run_iht, run_sft, run_tms, run_tsr)
from .diagnostics import (IdentityReport, verify_extrinsic_unbias,
                          verify_stein_identity, verify_variance_tracking)
from .bench import (SweepConfig, SweepResult, cli, emit, run_sweep,
                    wilson_interval)
