"""Prisoner's-dilemma peer-learning scoring, cohort simulation and paired
Hotelling analysis of pre/post gradebooks."""

from .distributions import f_quantile, t_quantile
from .errors import ConvergenceError, NumericalError, SingularCovarianceError, ValidationError
from .game import (
    PayoffMatrix2x2,
    Strategy,
    StrategyProfile,
    induced_game,
    is_prisoners_dilemma,
    pareto_efficient_profiles,
    pure_nash_equilibria,
)
from .gradebook import Gradebook, filter_participation, load_gradebook, write_gradebook
from .impute import (
    DataMatrix,
    FkmModel,
    FkmParams,
    fkm_cluster,
    impute_fkm,
    impute_knn,
    impute_mean,
    impute_median,
    partial_distance,
)
from .mstats import (
    PairedOutcome,
    TestReport,
    bonferroni,
    critical_value,
    descriptive_stats,
    diff_stats,
    hotelling_t2,
    hotelling_test,
    improvement_percentages,
    paired_t_test,
)
from .scoring import SessionRecord, aggregate, payoff, score_session, session_score
from .sim import EffortPolicy, SimConfig, policy_step, reformation_rates, select_partners, simulate

__version__ = "0.1.0"
