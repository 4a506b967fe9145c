"""Dichotomous valuation of regressors: D-values, endowment bias and value-based variable selection."""

from .exact import (
    MarginalityProfile,
    UndefinedBiasRatio,
    ValueReport,
    banzhaf_exact,
    beta_binomial_dvalue,
    dvalue_exact,
    endowment_bias,
    expected_performance,
    gamma_lambda_exact,
    marginality_profile,
    shapley_exact,
    unbiased_dvalue_exact,
    unbiased_shapley_exact,
    value_report,
)
from .game import Coalition, EvaluationError, Game, TooManyPlayersError, additive_game, table_game, unanimity_game
from .priors import Prior, SubsetPrior, eta_bounds, parse_prior
from .regression import DataLoadError, Dataset, load_csv, ols_fit, performance_abs_t, performance_game
from .sampling import SamplerConfig, sample_orderings, sample_shapley, sample_unbiased_shapley, sampled_report
from .selection import (
    SelectionResult,
    select_bn_fixed_point,
    select_forward_by_value,
    stepwise_pvalue,
    subset_search_ic,
)
from .simulation import DiscrepancyStats, SimConfig, generate_model, run_benchmark

__version__ = "0.1.0"
