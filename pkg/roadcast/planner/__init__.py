from .baselines import baseline_maxmin_distance, baseline_random, candidate_pool
from .greedy import (
    CoverEngine,
    Element,
    PlanProblem,
    PlanResult,
    Step,
    coverage_mass,
    greedy_mincost,
    maxopp_budget,
    single_site_mass,
)
from .robust import robust_maxopp, robust_mincost_enum, robust_mincost_meanspeed
from .twostage import (
    TwoStageResult,
    twostage_evaluate,
    twostage_expected,
    twostage_saa,
    twostage_secondonly,
)
