"""Herded Gibbs sampling for binary graphical models."""

from .herding import SampleRecord, SamplerState, WeightKey, herd_scalar, herded_gibbs, init_state, run
from .oracle import ExactDistribution, enumerate_joint, exact_marginals, tv_distance
from .pgm import Factor, Model, build_model, full_conditional, in_support, make_two_var_model

__version__ = "0.1.0"
