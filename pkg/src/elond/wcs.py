"""Online weighted conformal selection under covariate shift.

Hypotheses are H_0^t : Y_{n+t} <= c_{n+t}. Weighted conformal p-values are
gated either directly (r-LOND, Ur-LOND) or through the LOND-derived
e-values E_t = 1{P_t <= a_t^+} / a_t^- (e-LOND, U-eLOND), where a_t^-/a_t^+
are LOND levels computed on the leave-one-out p-value sequences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .core import DiscountSequence, Kind, TrialTrace
from .procedures import LOND, UniformSource, canonical_name, make_procedure

SCORE_JITTER = 1e-12


@dataclass(frozen=True)
class CalibrationSet:
    x: np.ndarray
    scores: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, float)
        w = np.asarray(self.weights, float)
        if s.shape != w.shape or s.ndim != 1 or s.size == 0:
            raise ValueError("calibration scores and weights must be nonempty 1-d arrays of equal length")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not w.sum() > 0:
            raise ValueError("calibration weights are all zero")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "weights", w)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def weight_below(self, v) -> np.ndarray:
        """sum_i w_i 1{v_i < v}, vectorized over v."""
        v = np.atleast_1d(np.asarray(v, float))
        return np.where(self.scores[None, :] < v[:, None], self.weights[None, :], 0.0).sum(axis=1)


@dataclass(frozen=True)
class TestPoint:
    __test__ = False  # not a pytest class

    x: np.ndarray | None
    threshold: float
    score_hat: float
    weight: float
    y: float | None = None

    @property
    def is_null(self) -> bool | None:
        return None if self.y is None else bool(self.y <= self.threshold)


def weighted_pvalue(cal: CalibrationSet, pt: TestPoint) -> float:
    below = float(cal.weight_below(pt.score_hat)[0])
    return (below + pt.weight) / (cal.total_weight + pt.weight)


def loo_pvalues(cal: CalibrationSet, past_scores: Sequence[float], pt: TestPoint) -> tuple[np.ndarray, np.ndarray]:
    """(P_j^-, P_j^+) for j < t: past test scores against the calibration set
    augmented by the current test weight, without and with that weight in
    the numerator."""
    if len(past_scores) == 0:
        return np.zeros(0), np.zeros(0)
    A = cal.weight_below(past_scores)
    denom = cal.total_weight + pt.weight
    return A / denom, (A + pt.weight) / denom


def _lond_count(pvalues: np.ndarray, alpha: float, discount: DiscountSequence) -> int:
    proc = LOND(alpha, discount)
    for p in pvalues:
        proc.process(float(min(p, 1.0)))
    return proc.n_rejections


def wcs_evalue(cal: CalibrationSet, history: Sequence[float], pt: TestPoint, alpha: float,
               discount: DiscountSequence | None = None) -> float:
    """E_t for the point ``pt`` given past test scores ``history``."""
    discount = discount if discount is not None else DiscountSequence.default()
    t = len(history) + 1
    pm, pp = loo_pvalues(cal, history, pt)
    g = discount(t)
    lm = alpha * g * (_lond_count(pm, alpha, discount) + 1)
    lp = alpha * g * (_lond_count(pp, alpha, discount) + 1)
    return 1.0 / lm if weighted_pvalue(cal, pt) <= lp else 0.0


class WcsStatistics(NamedTuple):
    pvalues: np.ndarray
    evalues: np.ndarray
    level_minus: np.ndarray
    level_plus: np.ndarray


def wcs_statistics(cal: CalibrationSet, points: Sequence[TestPoint], alpha: float,
                   discount: DiscountSequence | None = None) -> WcsStatistics:
    """P_t and E_t for a whole stream (compiled O(T^2) kernel)."""
    discount = discount if discount is not None else DiscountSequence.default()
    scores = np.array([p.score_hat for p in points], float)
    wt = np.array([p.weight for p in points], float)
    A = cal.weight_below(scores)
    return WcsStatistics(*kernels.wcs_evalues(A, wt, cal.total_weight, discount.array(len(points)), alpha))


GATES = {"e-LOND": Kind.EVALUE, "U-eLOND": Kind.EVALUE, "r-LOND": Kind.PVALUE, "Ur-LOND": Kind.PVALUE}


def wcs_gate(cal: CalibrationSet, points: Sequence[TestPoint], procedure: str, alpha: float,
             discount: DiscountSequence | None = None, uniforms: Sequence[float] | UniformSource | None = None,
             stats: WcsStatistics | None = None) -> TrialTrace:
    name = canonical_name(procedure)
    if name not in GATES:
        raise ValueError(f"{name} cannot gate conformal selection; use one of {sorted(GATES)}")
    discount = discount if discount is not None else DiscountSequence.default()
    stats = stats if stats is not None else wcs_statistics(cal, points, alpha, discount)
    src = uniforms if isinstance(uniforms, UniformSource) else None
    proc = make_procedure(name, alpha, discount, uniforms=src)
    values = stats.evalues if GATES[name] is Kind.EVALUE else stats.pvalues
    us = None if isinstance(uniforms, UniformSource) or uniforms is None else np.asarray(uniforms, float)
    nulls = [p.is_null for p in points]
    mask = None if any(n is None for n in nulls) else np.array(nulls, bool)
    return proc.run(values, us, is_null=mask)


@dataclass
class CovariateShiftModel:
    """Gaussian covariate shift with a known likelihood ratio.

    Test covariates X ~ N(0, I_d); calibration covariates X ~ N(delta, I_d),
    so w(x) = exp(-x.delta + |delta|^2 / 2). Labels Y = x.beta + noise*eps
    and the score is V(x, y) = y - x.beta, nondecreasing in y.
    """

    d: int = 3
    delta: np.ndarray | None = None
    beta: np.ndarray | None = None
    noise: float = 1.0

    def __post_init__(self):
        self.delta = np.full(self.d, 0.3) if self.delta is None else np.asarray(self.delta, float)
        self.beta = np.ones(self.d) if self.beta is None else np.asarray(self.beta, float)

    def weight(self, x: np.ndarray) -> np.ndarray:
        return np.exp(-x @ self.delta + self.delta @ self.delta / 2)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return x @ self.beta

    def score(self, x: np.ndarray, y) -> np.ndarray:
        return np.asarray(y) - self.predict(x)

    def labels(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.predict(x) + self.noise * rng.standard_normal(len(x))

    def calibration(self, n: int, rng: np.random.Generator) -> CalibrationSet:
        x = self.delta + rng.standard_normal((n, self.d))
        y = self.labels(x, rng)
        v = self.score(x, y) + SCORE_JITTER * rng.standard_normal(n)
        return CalibrationSet(x, v, self.weight(x))

    def test_points(self, T: int, rng: np.random.Generator,
                    threshold: float | Callable[[np.ndarray], float] = 0.0) -> list[TestPoint]:
        x = rng.standard_normal((T, self.d))
        y = self.labels(x, rng)
        w = self.weight(x)
        out = []
        for k in range(T):
            c = float(threshold(x[k]) if callable(threshold) else threshold)
            v = float(self.score(x[k : k + 1], c)[0]) + SCORE_JITTER * rng.standard_normal()
            out.append(TestPoint(x[k], c, v, float(w[k]), float(y[k])))
        return out
