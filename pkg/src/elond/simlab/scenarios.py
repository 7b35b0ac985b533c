"""Scenario configs and data generators."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

BOUNDS = (-4.0, 4.0)


class ConfigError(ValueError):
    pass


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


@dataclass
class LocalDepScenario:
    T: int = 200
    N: int = 200
    L: int = 0
    mu0: float = 0.0
    mu1: float = 3.0
    pi1: float = 0.5
    alpha: float = 0.3
    beta_sum: float = 0.01
    w0: float = 0.9
    bounds: tuple = BOUNDS

    def __post_init__(self):
        self.bounds = tuple(float(b) for b in self.bounds)
        lo, hi = self.bounds
        _check(self.T >= 1 and self.N >= 1, "T and N must be positive")
        _check(self.L >= 0, "lag L must be nonnegative")
        _check(lo < self.mu0 < hi and lo < self.mu1 < hi, "means must lie inside the support")
        _check(0.0 <= self.pi1 <= 1.0, "pi1 must lie in [0, 1]")
        _check(0.0 < self.alpha < 1.0, "alpha must lie in (0, 1)")
        _check(self.beta_sum > 0, "beta_sum must be positive")


@dataclass
class WorScenario:
    T: int = 200
    N: int = 200
    mu0: float = 0.0
    mu1: float = 2.0
    pi1: float = 0.5
    s: float = 0.01
    alpha: float = 0.05
    bounds: tuple = BOUNDS

    def __post_init__(self):
        self.bounds = tuple(float(b) for b in self.bounds)
        lo, hi = self.bounds
        _check(self.T >= 1 and self.N >= 1, "T and N must be positive")
        _check(lo < self.mu0 < hi and lo < self.mu1 < hi, "means must lie inside the support")
        _check(0.0 <= self.pi1 <= 1.0, "pi1 must lie in [0, 1]")
        _check(self.s > 0, "variance factor s must be positive")
        _check(0.0 < self.alpha < 1.0, "alpha must lie in (0, 1)")


@dataclass
class SharpnessScenario:
    T: int = 9
    alpha: float = 0.3

    def __post_init__(self):
        _check(self.T >= 1, "T must be positive")
        _check(0.0 < self.alpha < 1.0, "alpha must lie in (0, 1)")


@dataclass
class FcrScenario:
    T: int = 100
    n: int = 50
    L: int = 5
    alpha: float = 0.1
    mu1: float = 1.0
    pi1: float = 0.5
    quantile: float = 0.5
    alpha_ref: float = 0.05
    beta_sum: float = 0.01
    bounds: tuple = BOUNDS

    def __post_init__(self):
        self.bounds = tuple(float(b) for b in self.bounds)
        _check(self.T >= 1 and self.n >= 1, "T and n must be positive")
        _check(0.0 < self.alpha < 1.0, "alpha must lie in (0, 1)")
        _check(0.0 <= self.quantile <= 1.0, "quantile must lie in [0, 1]")
        _check(self.L >= 0, "lag L must be nonnegative")


@dataclass
class WcsScenario:
    T: int = 100
    n_cal: int = 500
    d: int = 3
    shift: float = 0.3
    noise: float = 1.0
    signal: float = 2.0
    threshold: float = 0.0
    alpha: float = 0.1

    def __post_init__(self):
        _check(self.T >= 1 and self.n_cal >= 1 and self.d >= 1, "T, n_cal and d must be positive")
        _check(0.0 < self.alpha < 1.0, "alpha must lie in (0, 1)")
        _check(self.noise > 0, "noise must be positive")


SCENARIOS = {
    "local-dep": LocalDepScenario,
    "wor": WorScenario,
    "sharpness": SharpnessScenario,
    "fcr": FcrScenario,
    "wcs": WcsScenario,
}


def scenario_fields(cls) -> dict:
    return {f.name: f for f in dataclasses.fields(cls)}


@lru_cache(maxsize=32)
def banded_factor(T: int, L: int) -> np.ndarray:
    """A with A A^T = the banded Toeplitz 0.5^|i-j| 1{|i-j| <= L}, after
    clipping negative eigenvalues at zero."""
    idx = np.arange(T)
    D = np.abs(idx[:, None] - idx[None, :])
    S = np.where(D <= L, 0.5**D, 0.0)
    w, V = np.linalg.eigh(S)
    w = np.clip(w, 0.0, None)
    A = V * np.sqrt(w)
    A.setflags(write=False)
    return A


def scaled_beta_params(mu, total: float, bounds=BOUNDS):
    lo, hi = bounds
    m = (np.asarray(mu, float) - lo) / (hi - lo)
    return m * total, (1 - m) * total


def null_pattern(T: int, pi1: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean is_null mask with exactly ceil(pi1*T) non-nulls at random spots."""
    is_null = np.ones(T, bool)
    k = math.ceil(pi1 * T - 1e-12)
    is_null[rng.choice(T, k, replace=False)] = False
    return is_null


def gen_local_dep(T: int, N: int, L: int, means, rng: np.random.Generator,
                  beta_sum: float = 0.01, bounds=BOUNDS) -> np.ndarray:
    """(T, N) samples: each column is a Gaussian-copula draw across hypotheses
    with scaled-Beta marginals of the given per-hypothesis means."""
    means = np.broadcast_to(np.asarray(means, float), (T,))
    lo, hi = bounds
    Z = rng.standard_normal((N, T)) @ banded_factor(T, L).T
    U = stats.norm.cdf(Z).T
    X = np.empty((T, N))
    for mu in np.unique(means):
        rows = means == mu
        a, b = scaled_beta_params(mu, beta_sum, bounds)
        X[rows] = lo + (hi - lo) * stats.beta.ppf(U[rows], a, b)
    return np.clip(X, lo, hi)


@lru_cache(maxsize=16)
def _wor_population(mu: float, s: float, size: int, bounds: tuple) -> np.ndarray:
    lo, hi = bounds
    if not lo < mu < hi:
        raise ValueError("population mean must lie inside the support")
    a, b = scaled_beta_params(mu, s, bounds)
    if not (a > 0 and b > 0):
        raise ValueError("degenerate Beta parameters")
    q = (np.arange(size) + 0.5) / size
    v = lo + (hi - lo) * stats.beta.ppf(q, a, b)
    d = mu - v.mean()
    side = v < mu if d > 0 else v > mu
    v[side] += d * size / side.sum()
    v.setflags(write=False)
    return v


def gen_wor_population(mu: float, s: float, size: int, bounds=BOUNDS) -> np.ndarray:
    """``size`` Beta quantiles scaled to ``bounds``, shifted on one side of mu
    so the mean is mu."""
    return _wor_population(float(mu), float(s), int(size), tuple(float(b) for b in bounds)).copy()
