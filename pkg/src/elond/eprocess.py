"""Hoeffding and sampling-without-replacement e-processes, stopped
e-values/p-values, and stopping rules coupled through e-LOND levels."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .core import DiscountSequence


@dataclass(frozen=True)
class EProcessState:
    """Running log-wealth of one e-process; ``M_0 = 1``.

    ``population_size`` switches on the without-replacement correction.
    """

    bounds: tuple[float, float] = (-4.0, 4.0)
    log_wealth: float = 0.0
    samples_seen: int = 0
    population_size: int | None = None
    running_sum: float = 0.0

    def __post_init__(self):
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError(f"bad bounds {self.bounds}")

    @property
    def wealth(self) -> float:
        return math.exp(self.log_wealth)

    @property
    def width(self) -> float:
        return self.bounds[1] - self.bounds[0]

    def _check(self, x: float, lam: float) -> None:
        lo, hi = self.bounds
        if not lo <= x <= hi:
            raise ValueError(f"sample {x} outside support [{lo}, {hi}]")
        if lam < 0:
            raise ValueError("lambda must be nonnegative")

    def hoeffding_step(self, x: float, lam: float) -> "EProcessState":
        self._check(x, lam)
        inc = lam * x - (lam * self.width) ** 2 / 8
        return replace(self, log_wealth=self.log_wealth + inc, samples_seen=self.samples_seen + 1,
                       running_sum=self.running_sum + x)

    def wor_mean(self) -> float:
        """Adjustment mu^i(0) = S_i / (N - i + 1); zero before any sample."""
        i = self.samples_seen
        if i == 0:
            return 0.0
        return self.running_sum / (self.population_size - i + 1)

    def wor_step(self, x: float, lam: float) -> "EProcessState":
        if self.population_size is None:
            raise RuntimeError("wor_step needs population_size")
        if self.samples_seen >= self.population_size:
            raise RuntimeError("population exhausted")
        self._check(x, lam)
        inc = lam * (x + self.wor_mean()) - (lam * self.width) ** 2 / 8
        return replace(self, log_wealth=self.log_wealth + inc, samples_seen=self.samples_seen + 1,
                       running_sum=self.running_sum + x)


def lambda_schedule(alpha: float, gamma_t: float, bounds: tuple[float, float], n: int) -> float:
    """Constant bet sqrt(8 log(1/(alpha*gamma_t)) / ((u - l)^2 n))."""
    ag = alpha * gamma_t
    if not 0.0 < ag < 1.0:
        raise ValueError(f"alpha*gamma_t must lie in (0, 1), got {ag}")
    if n < 1:
        raise ValueError("sample budget must be >= 1")
    width = bounds[1] - bounds[0]
    return math.sqrt(8 * math.log(1 / ag) / (width**2 * n))


def lambda_array(alpha: float, gammas: np.ndarray, bounds, n: int) -> np.ndarray:
    return np.array([lambda_schedule(alpha, g, bounds, n) for g in np.asarray(gammas, float)])


def _check_samples(samples, bounds) -> np.ndarray:
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if X.shape[1] == 0:
        raise ValueError("empty sample stream")
    lo, hi = bounds
    if np.any((X < lo) | (X > hi)) or np.isnan(X).any():
        raise ValueError(f"samples outside support [{lo}, {hi}]")
    return X


def hoeffding_log_wealth(samples, lambdas, bounds=(-4.0, 4.0)) -> np.ndarray:
    """log M^i for i = 1..N, one row per hypothesis."""
    X = _check_samples(samples, bounds)
    lam = np.broadcast_to(np.asarray(lambdas, float).reshape(-1, 1), (X.shape[0], 1))
    width = bounds[1] - bounds[0]
    inc = lam * X - (lam * width) ** 2 / 8
    return np.cumsum(inc, axis=1)


def wor_log_wealth(samples, lambdas, population_size: int, bounds=(-4.0, 4.0)) -> np.ndarray:
    """log M^i with the without-replacement mean adjustment."""
    X = _check_samples(samples, bounds)
    n = X.shape[1]
    if n > population_size:
        raise ValueError("more draws than population size")
    lam = np.broadcast_to(np.asarray(lambdas, float).reshape(-1, 1), (X.shape[0], 1))
    width = bounds[1] - bounds[0]
    prev = np.zeros_like(X)
    prev[:, 1:] = np.cumsum(X, axis=1)[:, :-1]
    i = np.arange(n)  # samples seen before step j
    denom = (population_size - i + 1).astype(float)
    mu = np.where(i == 0, 0.0, prev / denom)
    inc = lam * (X + mu) - (lam * width) ** 2 / 8
    return np.cumsum(inc, axis=1)


@dataclass(frozen=True)
class StoppedEvidence:
    e_value: float
    p_value: float
    tau: int


class EvidenceBatch(NamedTuple):
    e_values: np.ndarray
    p_values: np.ndarray
    tau: np.ndarray

    def records(self) -> list[StoppedEvidence]:
        return [StoppedEvidence(float(e), float(p), int(t)) for e, p, t in zip(*self)]


def p_values_from_wealth(log_wealth: np.ndarray) -> np.ndarray:
    """1 / max_i M^i, with M^0 = 1 included so the result lies in (0, 1]."""
    top = np.maximum(np.max(log_wealth, axis=1), 0.0)
    return np.exp(-top)


def first_crossing(log_wealth: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """tau_t = min{i : M^i >= 1/level_t} or N (1-based)."""
    W = np.exp(np.atleast_2d(log_wealth))
    lev = np.asarray(levels, float)
    thr = np.where(lev == 0.0, np.inf, 1.0 / np.where(lev == 0.0, 1.0, lev))
    hit = W >= thr[:, None]
    n = W.shape[1]
    return np.where(hit.any(axis=1), hit.argmax(axis=1) + 1, n).astype(np.int64)


def stop(log_wealth: np.ndarray, tau: np.ndarray) -> EvidenceBatch:
    L = np.atleast_2d(log_wealth)
    e = np.exp(L[np.arange(L.shape[0]), np.asarray(tau) - 1])
    return EvidenceBatch(e, p_values_from_wealth(L), np.asarray(tau, np.int64))


def coupled_stopping_run(
    samples,
    procedure=None,
    bounds=(-4.0, 4.0),
    population_size: int | None = None,
    fixed_levels: Sequence[float] | None = None,
    lambdas: Sequence[float] | None = None,
) -> EvidenceBatch:
    """Stop each hypothesis' e-process at its first crossing of the e-LOND level.

    ``samples`` is a (T, N) array, row t holding the samples for hypothesis
    t+1. At sample index i the e-LOND level of hypothesis t is computed
    from the stopped values M_k^{tau_k ^ i}, k < t, so tau_t only looks at
    the first i samples of every stream. ``fixed_levels`` replaces the
    recursive level by constants (plain first-crossing). ``procedure``
    supplies alpha and the discount sequence; it is not advanced.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    T, N = X.shape
    if procedure is None and (fixed_levels is None or lambdas is None):
        raise ValueError("need an e-LOND procedure or both fixed_levels and lambdas")
    if procedure is not None:
        gam = procedure.discount.array(T)
        ag = procedure.alpha * gam
        lam = lambda_array(procedure.alpha, gam, bounds, N) if lambdas is None else np.asarray(lambdas, float)
    else:
        lam = np.asarray(lambdas, float)
    if population_size is None:
        L = hoeffding_log_wealth(X, lam, bounds)
    else:
        L = wor_log_wealth(X, lam, population_size, bounds)
    if fixed_levels is not None:
        tau = first_crossing(L, fixed_levels)
    else:
        tau = kernels.coupled_stopping(np.exp(L), ag)
    return stop(L, tau)
