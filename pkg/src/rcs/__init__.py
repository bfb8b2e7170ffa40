"""Consensus sampling protocols for model groups with Byzantine members."""
from .adversary import (
    Regime,
    SafeModelSpec,
    ScenarioConfig,
    build_group,
    gen_byzantine_collusion,
    gen_byzantine_general,
    gen_safe_models,
)
from .analysis import RiskReport, bound_rhs, delta_sigma, exhaustive_q, risk_bound_report
from .dist import (
    FiniteDistribution,
    ModelGroup,
    OutputSpace,
    accept_distribution,
    cumulative_mass,
    mixture_draw,
    overlap_z,
    sigma,
    validate,
)
from .feedback import (
    ExclusionRegistry,
    FeedbackRecord,
    FeedbackSession,
    Verdict,
    eval_oracle,
    feedback_accuracy,
    frcs_run,
    update_registry,
)
from .protocols import LatencyModel, Outcome, Phase, run_cs, run_rcs, run_rcs_coin, trace_select

__version__ = "0.1.0"
