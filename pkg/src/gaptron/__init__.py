"""Online multiclass classification with surrogate-gap exploration.

A randomized linear learner mixes its argmax prediction with uniform
exploration whose mass comes from a loss-specific confidence map; projected
online gradient descent drives the weights under full-information or one-bit
(bandit) feedback.  The package also ships reference baselines, synthetic
stream generators, per-round inequality audits, an expert-advice learner
with an abstain option, and a CLI harness.
"""

from .abstention import (
    AbstentionTrace,
    AdaHedgeState,
    ExpertRound,
    abstention_round,
    adahedge_weights,
    simulate,
    theorem7_audit,
)
from .baselines import Banditron, BaselineConfig, Perceptron
from .environments import LabeledStream, StreamSpec, generate, load_stream, write_stream
from .harness import (
    BanditAggregate,
    RunResult,
    bandit_regret,
    figure1_curves,
    full_info_regret,
    run_bandit,
    run_full_info,
)
from .learner import (
    BanditFeedback,
    FeedbackMode,
    FullInfoFeedback,
    Gaptron,
    GaptronConfig,
    PredictionDistribution,
    RoundAudit,
    derive_hyperparams,
)
from .linalg import Example, RankedGradient, WeightMatrix
from .losses import LossFamily

__version__ = "0.1.0"

__all__ = [
    "AbstentionTrace",
    "AdaHedgeState",
    "BanditAggregate",
    "BanditFeedback",
    "Banditron",
    "BaselineConfig",
    "Example",
    "ExpertRound",
    "FeedbackMode",
    "FullInfoFeedback",
    "Gaptron",
    "GaptronConfig",
    "LabeledStream",
    "LossFamily",
    "Perceptron",
    "PredictionDistribution",
    "RankedGradient",
    "RoundAudit",
    "RunResult",
    "StreamSpec",
    "WeightMatrix",
    "abstention_round",
    "adahedge_weights",
    "bandit_regret",
    "derive_hyperparams",
    "figure1_curves",
    "full_info_regret",
    "generate",
    "load_stream",
    "run_bandit",
    "run_full_info",
    "simulate",
    "theorem7_audit",
    "write_stream",
]
