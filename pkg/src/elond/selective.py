"""Online selective confidence intervals with FCR control (e-LOND-CI and
its randomized variant) on top of e-value confidence sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import DiscountSequence
from .procedures import UniformSource, _check_u, elond_level

BISECT_TOL = 1e-9


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    empty: bool = False

    @classmethod
    def null(cls) -> "Interval":
        return cls(math.nan, math.nan, True)

    def contains(self, theta: float) -> bool:
        return (not self.empty) and self.lower <= theta <= self.upper

    def __contains__(self, theta) -> bool:
        return self.contains(theta)

    def subset_of(self, other: "Interval", tol: float = 0.0) -> bool:
        if self.empty:
            return True
        if other.empty:
            return False
        return other.lower - tol <= self.lower and self.upper <= other.upper + tol


class EConfidenceIntervalFamily:
    """Confidence sets {theta : E_theta(X) < 1/alpha} for a scalar parameter.

    ``log_evalue(data, theta)`` must be quasi-convex in theta (one valley)
    for ``interval`` to be exact; the boundary is located by root finding
    to ``BISECT_TOL``.
    """

    def __init__(self, log_evalue: Callable[[Any, float], float], parameter_range: tuple[float, float]):
        self.log_evalue = log_evalue
        self.parameter_range = (float(parameter_range[0]), float(parameter_range[1]))

    def evalue(self, data, theta: float) -> float:
        return math.exp(self.log_evalue(data, theta))

    def contains(self, data, theta: float, alpha: float) -> bool:
        return self.log_evalue(data, theta) < -math.log(alpha)

    def interval(self, data, alpha: float) -> Interval:
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        lo, hi = self.parameter_range
        thr = -math.log(alpha)
        g = lambda th: self.log_evalue(data, th) - thr  # noqa: E731
        res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": BISECT_TOL})
        centre = float(res.x)
        for cand in (lo, hi):
            if g(cand) < g(centre):
                centre = cand
        if g(centre) >= 0:
            return Interval.null()
        left = lo if g(lo) < 0 else brentq(g, lo, centre, xtol=BISECT_TOL)
        right = hi if g(hi) < 0 else brentq(g, centre, hi, xtol=BISECT_TOL)
        return Interval(left, right)


def _log_cosh(x: np.ndarray | float):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2 * x)) - math.log(2)


def _acosh_exp(log_y: float) -> float:
    """acosh(exp(log_y)) without overflow, log_y >= 0."""
    if log_y > 20:
        return log_y + math.log(2) + math.log1p(-0.25 * math.exp(-2 * log_y))
    return math.acosh(math.exp(log_y))


class HoeffdingMeanFamily(EConfidenceIntervalFamily):
    """Two-sided Hoeffding mixture for the mean of [l, u]-bounded samples.

    E_mu = exp(-n lam^2 (u-l)^2 / 8) cosh(lam (S - n mu)), the average of
    the two one-sided Hoeffding processes with bets +lam and -lam. The bet
    is fixed by ``alpha_ref`` and n so the sets are nested in alpha.
    """

    def __init__(self, bounds=(-4.0, 4.0), alpha_ref: float = 0.05, lam: float | None = None):
        super().__init__(self._log_e, bounds)
        self.bounds = (float(bounds[0]), float(bounds[1]))
        self.alpha_ref = alpha_ref
        self.lam = lam

    @property
    def width(self) -> float:
        return self.bounds[1] - self.bounds[0]

    def bet(self, n: int) -> float:
        if self.lam is not None:
            return self.lam
        return math.sqrt(8 * math.log(2 / self.alpha_ref) / (self.width**2 * n))

    def _prep(self, data) -> tuple[int, float]:
        x = np.asarray(data, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("empty sample")
        if np.any((x < self.bounds[0]) | (x > self.bounds[1])):
            raise ValueError("samples outside bounds")
        return x.size, float(x.sum())

    def _log_e(self, data, mu: float) -> float:
        n, s = self._prep(data)
        lam = self.bet(n)
        return float(-n * (lam * self.width) ** 2 / 8 + _log_cosh(lam * (s - n * mu)))

    def interval(self, data, alpha: float) -> Interval:
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        n, s = self._prep(data)
        lam = self.bet(n)
        log_y = n * (lam * self.width) ** 2 / 8 - math.log(alpha)
        if log_y <= 0:
            # cosh >= 1 can never fall below exp(log_y) <= 1
            return Interval.null()
        if lam == 0:
            return Interval(*self.bounds)
        h = _acosh_exp(log_y) / (lam * n)
        lo = max(s / n - h, self.bounds[0])
        hi = min(s / n + h, self.bounds[1])
        if lo > hi:
            return Interval.null()
        return Interval(lo, hi)


def hoeffding_eci(samples, bounds=(-4.0, 4.0), alpha: float = 0.1, alpha_ref: float = 0.05) -> Interval:
    return HoeffdingMeanFamily(bounds, alpha_ref).interval(samples, alpha)


@dataclass(frozen=True)
class History:
    """What a selection rule may look at: past data and past selections."""

    data: tuple
    selected: tuple

    @property
    def t(self) -> int:
        return len(self.data) + 1


SelectionRule = Callable[[Any, History], bool]


@dataclass
class SelectionOutcome:
    index: int
    selected: bool
    level: float
    interval: Interval | None
    covered: bool | None = None
    uniform_draw: float | None = None


@dataclass
class SelectionLog:
    selected: list[int] = field(default_factory=list)
    levels: list[float] = field(default_factory=list)
    intervals: list[Interval] = field(default_factory=list)
    covered: list[bool | None] = field(default_factory=list)

    def append(self, out: SelectionOutcome) -> None:
        self.selected.append(out.index)
        self.levels.append(out.level)
        self.intervals.append(out.interval)
        self.covered.append(out.covered)


def fcp(log: SelectionLog, truth: Sequence[float] | dict | None = None) -> float:
    """Share of selected intervals that miss their true parameter."""
    if not log.selected:
        return 0.0
    if truth is None:
        if any(c is None for c in log.covered):
            raise ValueError("coverage unknown; pass the true parameters")
        miss = sum(not c for c in log.covered)
    else:
        get = truth.__getitem__ if isinstance(truth, dict) else (lambda i: truth[i - 1])
        miss = sum(not iv.contains(get(i)) for i, iv in zip(log.selected, log.intervals))
    return miss / len(log.selected)


class SelectiveSession:
    """Runs e-LOND-CI (or U-eLOND-CI when ``randomized``) over a data stream.

    The rule sees the current datum and the history of data and selections;
    it never sees the uniform draws, so selections do not depend on alpha.
    """

    def __init__(
        self,
        alpha: float,
        family: EConfidenceIntervalFamily,
        rule: SelectionRule,
        discount: DiscountSequence | None = None,
        randomized: bool = False,
        uniforms: UniformSource | None = None,
    ):
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        self.alpha = alpha
        self.family = family
        self.rule = rule
        self.discount = discount if discount is not None else DiscountSequence.default()
        self.randomized = randomized
        self.uniforms = uniforms if uniforms is not None else (UniformSource() if randomized else None)
        self.t = 1
        self._data: list = []
        self._selected: list[int] = []
        self.log = SelectionLog()
        self.outcomes: list[SelectionOutcome] = []

    def history(self) -> History:
        return History(tuple(self._data), tuple(self._selected))

    def level(self, u: float | None = None) -> float:
        lev = elond_level(self.alpha, self.discount(self.t), len(self._selected))
        if self.randomized:
            _check_u(u)
            lev = lev / u
        return lev

    def step(self, x, theta: float | None = None, u: float | None = None) -> SelectionOutcome:
        sel = bool(self.rule(x, self.history()))
        if self.randomized:
            if u is None:
                u = self.uniforms.draw()
        elif u is not None:
            raise ValueError("uniform draw given to a non-randomized session")
        lev = self.level(u)
        out = SelectionOutcome(self.t, sel, lev, None, None, u)
        if sel:
            out.interval = self.family.interval(x, lev)
            if theta is not None:
                out.covered = out.interval.contains(theta)
            self._selected.append(self.t)
            self.log.append(out)
        self._data.append(x)
        self.outcomes.append(out)
        self.t += 1
        return out

    @property
    def selected(self) -> tuple[int, ...]:
        return tuple(self._selected)


def elond_ci_step(session: SelectiveSession, x, theta: float | None = None, u: float | None = None) -> SelectionOutcome:
    return session.step(x, theta, u)
