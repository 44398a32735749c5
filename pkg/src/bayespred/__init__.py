"""Bayesian predictive rules as executable objects.

Rules are (initial state, update, predict) triples.  From a rule the
library simulates chains, evaluates exact joint probabilities on finite
spaces, samples the prior or posterior of the directing measure by
simulating the future, builds Gaussian credible sets from predictive
updates, and checks exchangeability-type conditions exhaustively.
"""
from .errors import (
    BayesPredError,
    ConditioningError,
    ConfigurationError,
    DomainError,
    ReplicateError,
    RuleUpdateError,
    UnsupportedOperationError,
)
from .measures import (
    AtomicMixture,
    ContinuousBase,
    DiscreteDistribution,
    RandomSource,
    SampleSpace,
    TagBase,
    categorical_space,
    eval_cdf,
    mix,
    sample,
    uniform_discrete,
)
from .engine import (
    ChainPath,
    IidRule,
    PredictiveRule,
    RecencyRule,
    condition,
    enumerate_joint,
    joint_prob,
    log_joint_prob,
    simulate_chain,
)
from .exchangeable import (
    EppfSpec,
    IbpState,
    KernelDirichletRule,
    PartitionCounts,
    PitmanYorRule,
    PolyaRule,
    PolyaState,
    SpeciesSamplingRule,
    crp_eppf,
    crp_rule,
    eppf_crp,
    eppf_py,
    ibp_next,
    kernel_ds_predict,
    polya_predict,
    py_eppf,
    py_weights,
    species_predict,
)
from .structured import (
    Graphon,
    PcidRule,
    ReinforcedUrnRule,
    TransitionCounts,
    franchise_next,
    graphon_sample,
    ihmm_next,
    markov_swap_check,
    pcid_predict,
    reinforced_predict,
    successor_states,
)
from .resampling import PosteriorSample, ResamplingPlan, functional_posterior, sample_posterior, sample_prior
from .asymptotics import GaussianApprox, UpdateAccumulator, credible_interval, gaussian_posterior, vn
from .newton import MixingGrid, NewtonRule, newton_predict, newton_update
from .ogd import OgdRule, OgdState, logistic, ogd_credible, ogd_u_plugin, ogd_update, ogd_vn
from .diagnostics import (
    DiagnosticReport,
    check_cid,
    check_eppf,
    check_exchangeable,
    check_markov_exch,
    check_partial_cid,
    check_partial_exch,
)

__version__ = "0.1.0"
