"""Memory-weighted stochastic model of conversational turn-taking in small teams."""

from .fitter import FitOptions, FitResult, ModelVariant, SplitEvaluation, evaluate_split, fit
from .model import (
    NEVER,
    ConversationState,
    MemberParams,
    Roster,
    TeamParams,
    TurnSequence,
    advance,
    memory_value,
    multi_meeting_log_likelihood,
    sequence_log_likelihood,
    speaking_likelihoods,
    turn_probabilities,
)
from .patterns import coverage_report, pattern_report, percentile_ci
from .simulator import SimConfig, replicate_ensemble, sample_next_speaker, simulate_conversation

__all__ = [
    "NEVER",
    "ConversationState",
    "FitOptions",
    "FitResult",
    "MemberParams",
    "ModelVariant",
    "Roster",
    "SimConfig",
    "SplitEvaluation",
    "TeamParams",
    "TurnSequence",
    "advance",
    "coverage_report",
    "evaluate_split",
    "fit",
    "memory_value",
    "multi_meeting_log_likelihood",
    "pattern_report",
    "percentile_ci",
    "replicate_ensemble",
    "sample_next_speaker",
    "sequence_log_likelihood",
    "simulate_conversation",
    "speaking_likelihoods",
    "turn_probabilities",
]

__version__ = "0.1.0"
