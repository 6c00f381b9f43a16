"""Bayesian prediction of complete rankings from an expert's complete ranking
and a user's partial ranking, via bivariate copula models on latent grades.

Exact FGM rank-likelihood computation provides the oracle against which the
Monte Carlo estimator and the chain samplers are validated.
"""
from ._backend import BACKEND, available_backends
from .perm import (
    IncompleteRanking,
    Permutation,
    compose,
    enumerate_compatible,
    induced_subranking,
    inverse,
    is_compatible,
    kendall_distance,
    random_compatible,
    rank_of,
    to_star_form,
)
from .copula import CopulaModel, check_symmetries, fgm_density, fgm_model, gaussian_density, gaussian_model, model_from_tag
from .priors import (
    JeffreysPrior,
    MomentTable,
    TabulatedPrior,
    TransformedBetaPrior,
    beta_moment,
    jeffreys_fisher_info,
    parse_prior,
    sample_prior,
    tv_distance,
)
from .exact import (
    ExactPredictive,
    RankLikelihoodPolynomial,
    d_coefficient,
    exact_marginal,
    exact_predictive,
    exact_rank_likelihood,
    marginal_over_group,
    predict_mode_exact,
    rank_likelihood_poly,
)
from .montecarlo import MCEstimate, mc_marginal, mc_rank_likelihood, sample_spacings
from .chains import (
    AnnealConfig,
    AnnealResult,
    ChainState,
    GibbsResult,
    OccupancyTable,
    Unconstrained,
    anneal,
    compat_chain,
    compat_step,
    gibbs_run,
    instrumental_density,
    instrumental_sample,
    joint_density,
    tv_empirical,
)
from .recommender import (
    EngineConfig,
    EvalReport,
    ExpertOrder,
    RatingsMatrix,
    derive_expert,
    evaluate,
    fit_prior_from_ratings,
    holdout_split,
    ingest_ratings,
    predict_user,
    synthetic_benchmark,
    top_nprime,
    user_ranking,
)

__version__ = "0.1.0"
