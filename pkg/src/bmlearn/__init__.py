"""Finite-domain workbench for SQ dimension, boost-by-majority and bounded-memory learning."""

from .boosting import (
    BoostParams,
    BoostState,
    MajorityHypothesis,
    QuerySimulator,
    SampleWeakLearner,
    bbm_boost,
    bbm_distribution,
    bbm_weight,
    binom_pmf,
    majority_eval,
    sq_bbm_boost,
    sq_simulate_query,
    weak_sq_learn,
)
from .config import Config, get_config, load_config
from .core import (
    ConceptClass,
    Distribution,
    Domain,
    ExampleStream,
    LabeledExample,
    correlation,
    is_mu_close,
    loss,
    mix,
)
from .generators import GenSpec, generate
from .memory import StreamingLearner, run_stream, triviality_check
from .oracle import AdversarialOracle, ExactOracle, SamplingOracle, SQQuery, adversarial_answer, exact_answer, sampling_answer
from .pipelines import ExperimentResult, pipeline_boost, pipeline_shift
from .reductions import (
    exact_identify,
    pac_rejection_learn,
    properify,
    quantize_signs,
    sq_rejection_learn,
    sq_to_bounded_memory,
)
from .sqdim import SQWitness, ball_max_sqdim, sq_dim_exact, sq_dim_greedy, verify_witness

__version__ = "0.1.0"

__all__ = [
    "AdversarialOracle",
    "BoostParams",
    "BoostState",
    "ConceptClass",
    "Config",
    "Distribution",
    "Domain",
    "ExactOracle",
    "ExampleStream",
    "ExperimentResult",
    "GenSpec",
    "LabeledExample",
    "MajorityHypothesis",
    "QuerySimulator",
    "SQQuery",
    "SQWitness",
    "SampleWeakLearner",
    "SamplingOracle",
    "StreamingLearner",
    "adversarial_answer",
    "ball_max_sqdim",
    "bbm_boost",
    "bbm_distribution",
    "bbm_weight",
    "binom_pmf",
    "correlation",
    "exact_answer",
    "exact_identify",
    "generate",
    "get_config",
    "is_mu_close",
    "load_config",
    "loss",
    "majority_eval",
    "mix",
    "pac_rejection_learn",
    "pipeline_boost",
    "pipeline_shift",
    "properify",
    "quantize_signs",
    "run_stream",
    "sampling_answer",
    "sq_bbm_boost",
    "sq_dim_exact",
    "sq_dim_greedy",
    "sq_rejection_learn",
    "sq_simulate_query",
    "sq_to_bounded_memory",
    "triviality_check",
    "verify_witness",
    "weak_sq_learn",
]
