"""Gaussian-process emulation of dynamical simulators through their
short-time flow map, with random-Fourier-feature realisations providing
ensemble predictions and uncertainty."""

from .analysis import benchmark, detect_mean_change, mae, predictability_horizon, rmse
from .design import Box, DesignMatrix, lhs_sample, maximin_lhs, maximin_optimize
from .dynamics import (SystemSpec, Trajectory, flow_map_dataset, hindmarsh_rose, integrate_step, lorenz,
                       simulate_trajectory, van_der_pol, vector_field)
from .emulator import (EnsembleResult, FlowMapEmulator, baseline_rollout, ensemble_predict,
                       rollout_realisation, train)
from .errors import (ConditioningError, DegeneracyError, DivergenceError, EnsembleError, FittingError,
                     FlowGPError, InputError)
from .gp import (GpModel, KernelParams, SearchConfig, TrendModel, beta_hat, fit_hyperparameters,
                 log_likelihood, predict_mean_exact, profile_log_likelihood, se_kernel, sigma2_hat)
from .rff import (FeatureSample, RealisationPredictor, draw_realisation, eval_realisation, feature_map,
                  kernel_approx_error, sample_spectral)

__version__ = "0.1.0"
