"""Simulation laboratory: dependence scenarios, trial runners, Monte Carlo driver."""
from .runner import DEFAULT_SEED, power_difference, run_trials, summarize, trial_seed
from .scenarios import (
    SCENARIOS,
    ConfigError,
    FcrScenario,
    LocalDepScenario,
    SharpnessScenario,
    WcsScenario,
    WorScenario,
    banded_factor,
    gen_local_dep,
    gen_wor_population,
    null_pattern,
)
from .trials import (
    TRIAL_RUNNERS,
    gate_all,
    quantile_rule,
    run_fcr_trial,
    run_local_dep_trial,
    run_sharpness_trial,
    run_wcs_trial,
    run_wor_trial,
    sharpness_evalues,
)
