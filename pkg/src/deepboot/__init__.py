"""Deep bootstrap sampler: a generator network trained to map bootstrap weights
to weighted-loss minimizers, with exact bootstrap and MCMC baselines."""

from .data import Dataset, SampleBatch
from .dbs import DbsConfig, TrainedSampler, sample, train_gibbs, train_npl
from .exact import SolverConfig, npl_sample, solve_weighted, wlb_sample
from .losses import LaplacePrior, LossModel, Parameter
from .mcmc import ChainSummary, McmcConfig, effective_sample_size, mh_run, split_rhat
from .ndnet import GeneratorNetwork, RmspropState

__version__ = "0.1.0"

__all__ = [
    "ChainSummary",
    "Dataset",
    "DbsConfig",
    "GeneratorNetwork",
    "LaplacePrior",
    "LossModel",
    "McmcConfig",
    "Parameter",
    "RmspropState",
    "SampleBatch",
    "SolverConfig",
    "TrainedSampler",
    "effective_sample_size",
    "mh_run",
    "npl_sample",
    "sample",
    "solve_weighted",
    "split_rhat",
    "train_gibbs",
    "train_npl",
    "wlb_sample",
]
