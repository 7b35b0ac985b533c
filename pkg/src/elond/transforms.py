"""Reshaping functions, p-to-e calibrators and stochastic rounding."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

_HARMONIC = np.zeros(1)


def harmonic_numbers(horizon: int) -> np.ndarray:
    """ell_1..ell_horizon, ell_t = sum_{i<=t} 1/i (sequential float summation)."""
    global _HARMONIC
    if len(_HARMONIC) <= horizon:
        n = max(horizon + 1, 2 * len(_HARMONIC))
        _HARMONIC = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, n))])
    return _HARMONIC[1 : horizon + 1]


def harmonic(t: int) -> float:
    if t < 1:
        raise ValueError("harmonic number needs t >= 1")
    return float(harmonic_numbers(t)[-1])


def beta_by(t: int, r: float) -> float:
    """Benjamini-Yekutieli reshaping: (floor(r) ^ t) / ell_t."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if r < 0:
        raise ValueError(f"reshaping argument must be nonnegative, got {r}")
    return min(math.floor(r), t) / harmonic(t)


class ReshapingFunction:
    """A family t -> beta_t of reshaping functions.

    ``fn(t, r)`` must be nondecreasing in r with ``beta_t(0) = 0`` and
    ``beta_t(r) <= r``. User-supplied families are checked on a grid when
    ``validate`` is called.
    """

    def __init__(self, fn: Callable[[int, float], float], kind: str = "user"):
        self.fn = fn
        self.kind = kind

    @classmethod
    def by(cls) -> "ReshapingFunction":
        return cls(beta_by, kind="BY")

    def __call__(self, t: int, r: float) -> float:
        return float(self.fn(t, r))

    def validate(self, horizon: int = 100, points: int = 2001) -> None:
        for t in range(1, horizon + 1):
            grid = np.linspace(0.0, 10.0 * t, points)
            vals = np.array([self(t, r) for r in grid])
            if vals[0] != 0.0:
                raise ValueError(f"beta_{t}(0) = {vals[0]} != 0")
            if np.any(np.diff(vals) < 0):
                raise ValueError(f"beta_{t} is not nondecreasing")
            if np.any(vals > grid * (1 + 1e-12)):
                raise ValueError(f"beta_{t}(r) exceeds r")


def calibrate_lond(t: int, alpha: float, gamma_t: float, ell_t: float, p: float, truncate: bool = False) -> float:
    """p-to-e map under which e-LOND reproduces r-LOND with BY reshaping.

    Returns ``1 / (alpha*gamma_t * ceil(max(p*ell_t/(alpha*gamma_t), 1)))``.
    With ``truncate=True`` the value is set to 0 whenever the ceiling exceeds
    t; that version integrates to exactly 1 over [0, 1], while the untruncated
    one integrates to H_K/ell_t with K = ceil(ell_t/(alpha*gamma_t)). Both give
    identical e-LOND decisions because |R_{t-1}| + 1 <= t.
    """
    ag = alpha * gamma_t
    if not ag > 0:
        raise ValueError("alpha * gamma_t must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p-value must lie in [0, 1], got {p}")
    k = math.ceil(max(p * ell_t / ag, 1.0))
    if truncate and k > t:
        return 0.0
    return 1.0 / (ag * k)


class Calibrator:
    """Nonincreasing p -> e map with integral at most 1."""

    def __init__(self, fn: Callable[[float], float], kind: str = "user", breakpoints=()):
        self.fn = fn
        self.kind = kind
        self.breakpoints = np.asarray(breakpoints, dtype=float)

    @classmethod
    def lond(cls, t: int, alpha: float, gamma_t: float, ell_t: float | None = None) -> "Calibrator":
        ell = harmonic(t) if ell_t is None else ell_t
        ag = alpha * gamma_t
        jumps = np.arange(1, t + 1) * ag / ell
        return cls(lambda p: calibrate_lond(t, alpha, gamma_t, ell, p, truncate=True), kind="LondRecovery",
                   breakpoints=jumps[jumps < 1])

    def __call__(self, p: float) -> float:
        return float(self.fn(p))

    def integral(self, points: int = 100_000) -> float:
        """Midpoint-rule integral over [0, 1] on a uniform grid refined at the
        known jump points, so piecewise-constant calibrators are exact."""
        xs = np.union1d(np.linspace(0.0, 1.0, points + 1), self.breakpoints)
        mids = (xs[:-1] + xs[1:]) / 2
        return math.fsum(self(m) * w for m, w in zip(mids, np.diff(xs)))

    def validate(self, points: int = 100_000, tol: float = 1e-6) -> None:
        xs = np.linspace(0.0, 1.0, 2001)
        vals = np.array([self(x) for x in xs])
        if np.any(vals < 0):
            raise ValueError("calibrator returned a negative value")
        if np.any(np.diff(vals) > 0):
            raise ValueError("calibrator is not nonincreasing")
        area = self.integral(points)
        if area > 1 + tol:
            raise ValueError(f"calibrator integrates to {area} > 1")


def stochastic_round(e: float, alpha_hat: float, u: float) -> float:
    """Randomized rounding of an e-value at level alpha_hat.

    max(E*1{E >= 1/a}, 1{U <= E*a}/a). The second event is evaluated as
    ``E >= U/a`` so that ``S >= 1/a`` iff ``E >= U/a`` holds exactly in
    floating point. For a = 0 the second branch is 0.
    """
    if not 0.0 < u <= 1.0:
        raise ValueError(f"uniform draw must lie in (0, 1], got {u}")
    if alpha_hat < 0:
        raise ValueError("alpha_hat must be nonnegative")
    if e < 0:
        raise ValueError("e-value must be nonnegative")
    if alpha_hat == 0.0:
        return math.inf if e == math.inf else 0.0
    inv = 1.0 / alpha_hat
    first = e if e >= inv else 0.0
    second = inv if e >= u / alpha_hat else 0.0
    return max(first, second)
