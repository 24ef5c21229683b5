"""Simulation and tail asymptotics for second-order branching processes
with immigration (GINAR(2))."""

from ._kernels import USING_NUMBA, set_workers
from .asymptotics import (
    HeavyProfile,
    MeanMatrix,
    MkSequence,
    RANDOM_SUM_PROPOSITIONS,
    TailPrediction,
    mean_forecast,
    mean_matrix,
    mk,
    moment_bound,
    predict_tail,
    clan_tail,
    random_sum_prediction,
)
from .errors import (
    ConfigError,
    GW2Error,
    HypothesisError,
    InfiniteMeanError,
    LawError,
    OverflowAbort,
    UnsupportedProfileError,
)
from .laws import (
    LawSpec,
    bernoulli,
    deterministic,
    discrete_pareto,
    geometric,
    poisson,
    table_law,
    zeta_law,
)
from .process import (
    BASES,
    EnsembleSummary,
    PathState,
    ScenarioSpec,
    exact_distribution,
    sample_clan,
    sample_xn,
    simulate_clan,
    simulate_decomposed,
    simulate_ensemble,
    simulate_path,
    step,
    summarize,
)
from .rng import Stream
from .tailstats import (
    check_random_sum,
    empirical_survival,
    hill_estimate,
    ratio_diagnostic,
    two_sample_chi2,
    wilson_interval,
)

__version__ = "0.1.0"
