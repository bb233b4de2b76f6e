"""Learn Bayesian priors from expert-elicited statistics.

Simulates a generative model forward from trainable priors (independent
parametric families or a normalizing-flow joint prior), queries the
simulations the way an expert was queried, and descends the weighted
discrepancy to the expert's answers with reverse-mode gradients.
"""

from . import backend, diagnostics, dists, flows, initializers, losses, models, optim, queries, tape
from .config import parse_config, parse_config_dict
from .dists import Constraint, DistributionSpec, gumbel_softmax_trick, sample_reparameterized
from .engine import (
    Bundle,
    FitRecord,
    HyperSpec,
    ParameterSpec,
    TrainerConfig,
    fit,
    fit_parallel,
    update,
)
from .errors import ConfigError, NonFiniteError
from .flows import FlowConfig
from .initializers import InitializerConfig
from .losses import LossSpec
from .models import GenerativeModelSpec, design_categorical, register_model
from .optim import OptimizerConfig, Schedule
from .persist import SavedBundle, load_bundle, save_bundle
from .queries import QuerySpec, TargetSpec, get_expert_data_format, register_query, register_transform

__version__ = "0.1.0"
