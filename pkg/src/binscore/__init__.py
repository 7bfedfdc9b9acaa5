"""Scoring rules, exact and approximate forecast comparison, and the
simulation studies built on them."""

from .comparison import (
    ConfidenceInterval,
    Decision,
    DeltaField,
    DeltaSummary,
    NoPreferenceBounds,
    PreferenceProbabilities,
    PreferenceReport,
    average_delta,
    clopper_pearson,
    decide,
    delta_ci_exact,
    delta_ci_gaussian,
    delta_field,
    delta_moments,
    delta_summary,
    expected_average_delta,
    improperness_interval,
    no_preference_bounds,
    preference_power,
    preference_probabilities,
)
from .errors import (
    BinscoreError,
    ConvergenceError,
    DataError,
    DegeneratePanelError,
    DomainError,
    IndeterminateDifferenceError,
    NumericError,
)
from .forecast import (
    BinaryForecast,
    GridBin,
    ObservationField,
    RateForecast,
    aggregate_magnitudes,
    load_binary_forecast,
    load_observations,
    load_rate_forecast,
    scale_forecast,
    simulate_observations,
    synthetic_truth,
)
from .numerics import beta_quantile, binom_cdf, binom_pmf, make_stream, reg_inc_beta, t_quantile
from .scores import (
    BRIER,
    FULL_GAMBLING,
    LOG,
    RuleKind,
    ScoreRule,
    brier,
    expected_score,
    full_gambling,
    log_score,
    pairwise_gambling,
)

__version__ = "0.1.0"
