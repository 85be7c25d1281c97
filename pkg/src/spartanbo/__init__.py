"""Nonstationary Bayesian optimization with a weighted local+global
composite kernel, MCMC-marginalized hyperparameters, and a reproducible
benchmark harness."""

from .acquisition import (AcquisitionConfig, PredictionSet, eiig,
                          expected_improvement, information_gain, maximize,
                          predict_set)
from .benchmarks import (Benchmark, Summary, get_benchmark, list_benchmarks,
                         optimality_gap, run_experiment)
from .inference import (LogNormalPrior, McmcEnsemble, PriorSpec,
                        log_posterior_density, sample_ensemble, slice_step)
from .kernels import (ArdParams, HammingParams, SpartanParams, WeightConfig,
                      gram, hamming_kernel, matern52_ard, se_ard,
                      spartan_kernel, weights)
from .space import SearchSpace
from .strategies import (HboConfig, RunConfig, SpboConfig, Trace, TraceRecord,
                         latin_hypercube, run_algorithm, run_bo, run_hbo,
                         run_sbo, run_spbo)
from .surrogate import (Dataset, PosteriorSample, Prediction, fit,
                        log_marginal_likelihood, predict, predict_many)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig", "ArdParams", "Benchmark", "Dataset", "HammingParams",
    "HboConfig", "LogNormalPrior", "McmcEnsemble", "PosteriorSample",
    "Prediction", "PredictionSet", "PriorSpec", "RunConfig", "SearchSpace",
    "SpartanParams", "SpboConfig", "Summary", "Trace", "TraceRecord",
    "WeightConfig", "eiig", "expected_improvement", "fit", "get_benchmark",
    "gram", "hamming_kernel", "information_gain", "latin_hypercube",
    "list_benchmarks", "log_marginal_likelihood", "log_posterior_density",
    "matern52_ard", "maximize", "optimality_gap", "predict", "predict_many",
    "predict_set", "run_algorithm", "run_bo", "run_experiment", "run_hbo",
    "run_sbo", "run_spbo", "sample_ensemble", "se_ard", "slice_step",
    "spartan_kernel", "weights",
]
