"""Semiparametric odds-ratio estimation for right-censored survival data.

Library layers: odds families and the data model (`families`, `model`,
`simulate`), nuisance construction (`nuisance`), the projection-index
solver (`ide`), the score equations and root finder (`estimator`),
orthogonality diagnostics (`tangent`), and the experiment harness
(`scenario`, `harness`, `verify`, `cli`).
"""

from .errors import (
    CoefficientSingularityError,
    DegenerateOddsError,
    FitFailureError,
    FlatScoreError,
    HorizonError,
    InvalidModelError,
    NoRootError,
    NonIdentifiedError,
    NumericInversionError,
    PositivityViolationError,
    ScenarioError,
    SingularityError,
    SolverFailureError,
    SurvOddsError,
)
from .families import (
    ConstantPropensity,
    DiscreteCovariateLaw,
    ExponentialCensoring,
    LogLogisticOdds,
    LogisticPropensity,
    NoCensoring,
    PerturbedOdds,
    TabulatedOdds,
    TreatmentModel,
)
from .model import (
    OddsModel,
    cumulative_hazard,
    hazard,
    log_likelihood,
    log_odds_ratio,
    naive_score,
    naive_scores,
    survival,
    validate_odds_model,
)
from .simulate import Dataset, Observation, generate_dataset, sample_event_time
from .nuisance import (
    NuisanceSet,
    build_nuisances,
    fit_censoring,
    fit_odds_parametric,
    fit_propensity,
    oracle_nuisances,
)
from .ide import (
    CoefficientTable,
    H0Solution,
    TimeGrid,
    coefficients,
    expect_given_z,
    make_grid,
    negative_treatment_target,
    projection_condition_residual,
    solve_h0,
    solve_projection,
    write_h0_profiles,
)
from .estimator import (
    ScoreEngine,
    ScoreReport,
    bracketed_root,
    efficient_integrand,
    efficient_score,
    sandwich_se,
    solve_beta,
)
from .tangent import (
    SpaceElement,
    TestFunction,
    TowerLawResult,
    default_alpha_functions,
    default_b_functions,
    default_test_functions,
    exact_mean_b,
    lambda1_element,
    lambda1_space_element,
    lambda2_element,
    lambda2_space_element,
    lambda3_element,
    lambda3_space_element,
    make_space_elements,
    mc_inner_product,
    score_element,
    tower_law_check,
)
from .scenario import Scenario, builtin_names, builtin_scenario, load_scenario
from .harness import SummaryTable, replicate_seed, run_replicate, run_scenario, summarize
from .verify import run_suite

__version__ = "0.1.0"

__all__ = [
    "CoefficientSingularityError",
    "CoefficientTable",
    "ConstantPropensity",
    "Dataset",
    "DegenerateOddsError",
    "DiscreteCovariateLaw",
    "ExponentialCensoring",
    "FitFailureError",
    "FlatScoreError",
    "H0Solution",
    "HorizonError",
    "InvalidModelError",
    "LogLogisticOdds",
    "LogisticPropensity",
    "NoCensoring",
    "NoRootError",
    "NonIdentifiedError",
    "NuisanceSet",
    "NumericInversionError",
    "Observation",
    "OddsModel",
    "PerturbedOdds",
    "PositivityViolationError",
    "ScenarioError",
    "Scenario",
    "ScoreEngine",
    "ScoreReport",
    "SingularityError",
    "SolverFailureError",
    "SpaceElement",
    "SummaryTable",
    "SurvOddsError",
    "TabulatedOdds",
    "TestFunction",
    "TimeGrid",
    "TowerLawResult",
    "TreatmentModel",
    "bracketed_root",
    "build_nuisances",
    "builtin_names",
    "builtin_scenario",
    "coefficients",
    "cumulative_hazard",
    "default_alpha_functions",
    "default_b_functions",
    "default_test_functions",
    "efficient_integrand",
    "efficient_score",
    "exact_mean_b",
    "expect_given_z",
    "fit_censoring",
    "fit_odds_parametric",
    "fit_propensity",
    "generate_dataset",
    "hazard",
    "lambda1_element",
    "lambda1_space_element",
    "lambda2_element",
    "lambda2_space_element",
    "lambda3_element",
    "lambda3_space_element",
    "load_scenario",
    "log_likelihood",
    "log_odds_ratio",
    "make_grid",
    "make_space_elements",
    "mc_inner_product",
    "naive_score",
    "naive_scores",
    "negative_treatment_target",
    "oracle_nuisances",
    "projection_condition_residual",
    "replicate_seed",
    "run_replicate",
    "run_scenario",
    "run_suite",
    "sample_event_time",
    "sandwich_se",
    "score_element",
    "solve_beta",
    "solve_h0",
    "solve_projection",
    "summarize",
    "survival",
    "tower_law_check",
    "validate_odds_model",
    "write_h0_profiles",
]
