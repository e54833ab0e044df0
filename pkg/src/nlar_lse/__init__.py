"""Least-squares estimation for nonlinear autoregressive models."""
from .kernels import BACKEND
from .models import (
    ModelSpec, NoiseSpec, RegressorMap, eval_regressor, gaussian_mixture, make_exar, make_general,
    make_linear_ar, make_separable, make_separable_model, make_tar, model_from_description, standard_normal,
    uniform,
)
from .simulator import Trajectory, count_recurrence, simulate, window
from .estimator import EstimatorState, batch_ls, gram_eigs, posterior, rls_init, rls_step, run_estimator

__version__ = "0.1.0"
