"""Online false discovery and false coverage rate control under arbitrary
dependence: e-LOND and its randomized, p-value and selective-inference
relatives, plus a simulation lab."""
from .core import (
    DecisionRecord,
    DiscountSequence,
    GroundTruth,
    Kind,
    Statistic,
    TrialSummary,
    TrialTrace,
    fdp,
    gamma_default,
    monte_carlo_aggregate,
    power,
)
from .procedures import (
    ELOND,
    LOND,
    RLOND,
    UELOND,
    URLOND,
    LordStar,
    UniformSource,
    restore,
)
from .transforms import Calibrator, ReshapingFunction, beta_by, calibrate_lond, stochastic_round

__version__ = "0.1.0"
