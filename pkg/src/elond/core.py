"""Shared domain types, discount sequences and FDR/FCR/power metrics."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import zeta

PARTIAL_SUM_TOL = 1e-12


class Kind(str, enum.Enum):
    EVALUE = "e"
    PVALUE = "p"


@dataclass(frozen=True)
class Statistic:
    """Evidence attached to one hypothesis: an e-value or a p-value."""

    kind: Kind
    value: float

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        v = float(self.value)
        if math.isnan(v):
            raise ValueError("statistic value is NaN")
        if kind is Kind.EVALUE:
            if v < 0:
                raise ValueError(f"e-value must be nonnegative, got {v}")
        elif not 0.0 <= v <= 1.0:
            raise ValueError(f"p-value must lie in [0, 1], got {v}")
        object.__setattr__(self, "value", v)

    @classmethod
    def e(cls, value: float) -> "Statistic":
        return cls(Kind.EVALUE, value)

    @classmethod
    def p(cls, value: float) -> "Statistic":
        return cls(Kind.PVALUE, value)


def inverse(level: float) -> float:
    """1/level with 1/0 taken as +inf."""
    return math.inf if level == 0.0 else 1.0 / level


def rejects(statistic: Statistic, level: float) -> bool:
    """Tie rule shared by every procedure: E >= 1/level, P <= level."""
    if statistic.kind is Kind.EVALUE:
        return statistic.value >= inverse(level)
    return statistic.value <= level


def gamma_default(t: int) -> float:
    """The discount 1/(t(t+1)); its first t terms sum to t/(t+1)."""
    if t < 1:
        raise ValueError(f"discount index must be >= 1, got {t}")
    return 1.0 / (t * (t + 1))


class DiscountSequence:
    """Nonnegative weights gamma_t (t >= 1) whose partial sums stay <= 1.

    Terms are generated lazily; every newly drawn prefix is checked against
    ``1 + PARTIAL_SUM_TOL``.
    """

    def __init__(self, fn: Callable[[int], float], name: str = "custom", params: dict | None = None):
        self._fn = fn
        self.name = name
        self.params = dict(params or {})
        self._terms: list[float] = []
        self._partial = 0.0

    @classmethod
    def default(cls) -> "DiscountSequence":
        return cls(gamma_default, name="default")

    @classmethod
    def power(cls, s: float) -> "DiscountSequence":
        """gamma_t = t^-s / zeta(s), s > 1."""
        if not s > 1:
            raise ValueError("power discount needs exponent s > 1")
        z = float(zeta(s))
        return cls(lambda t: t ** (-s) / z, name="power", params={"s": s})

    @classmethod
    def from_spec(cls, spec: dict | str | None) -> "DiscountSequence":
        if spec is None or spec == "default":
            return cls.default()
        if isinstance(spec, dict):
            kind = spec.get("kind", "default")
            if kind == "default":
                return cls.default()
            if kind == "power":
                return cls.power(float(spec["s"]))
        raise ValueError(f"unknown discount specification: {spec!r}")

    def to_spec(self) -> dict:
        if self.name in ("default", "power"):
            return {"kind": self.name, **self.params}
        raise ValueError("custom discount sequences cannot be serialized")

    def _extend(self, t: int) -> None:
        while len(self._terms) < t:
            idx = len(self._terms) + 1
            g = float(self._fn(idx))
            if not g >= 0 or math.isnan(g):
                raise ValueError(f"gamma_{idx} = {g} is negative or NaN")
            self._partial += g
            if self._partial > 1.0 + PARTIAL_SUM_TOL:
                raise ValueError(f"discount partial sum exceeds 1 at t={idx}: {self._partial}")
            self._terms.append(g)

    def __call__(self, t: int) -> float:
        if t < 1:
            raise ValueError(f"discount index must be >= 1, got {t}")
        self._extend(t)
        return self._terms[t - 1]

    def partial_sum(self, t: int) -> float:
        self._extend(t)
        return math.fsum(self._terms[:t])

    def array(self, horizon: int) -> np.ndarray:
        """gamma_1..gamma_horizon as float64."""
        self._extend(horizon)
        return np.asarray(self._terms[:horizon], dtype=np.float64)


@dataclass(frozen=True)
class DecisionRecord:
    index: int
    level: float
    statistic: Statistic
    rejected: bool
    uniform_draw: float | None = None
    is_null: bool | None = None


@dataclass(frozen=True)
class GroundTruth:
    null_set: frozenset

    @classmethod
    def from_mask(cls, is_null: Sequence[bool]) -> "GroundTruth":
        return cls(frozenset(i + 1 for i, n in enumerate(is_null) if n))

    def non_nulls(self, horizon: int) -> set:
        return {i for i in range(1, horizon + 1) if i not in self.null_set}


def fdp(discoveries: Iterable[int], truth: GroundTruth) -> float:
    disc = set(discoveries)
    return len(disc & truth.null_set) / max(len(disc), 1)


def power(discoveries: Iterable[int], truth: GroundTruth, horizon: int) -> float:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    alt = truth.non_nulls(horizon)
    return len(set(discoveries) & alt) / max(len(alt), 1)


@dataclass
class TrialTrace:
    """Array form of one trial's decision stream for one procedure."""

    levels: np.ndarray
    statistics: np.ndarray
    rejected: np.ndarray
    is_null: np.ndarray
    kind: Kind = Kind.EVALUE
    uniforms: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return len(self.rejected)

    def fdp_path(self) -> np.ndarray:
        rej = self.rejected.astype(np.int64)
        false = np.cumsum(rej & self.is_null)
        return false / np.maximum(np.cumsum(rej), 1)

    def power_path(self) -> np.ndarray:
        rej = self.rejected.astype(bool)
        alt = ~self.is_null.astype(bool)
        return np.cumsum(rej & alt) / np.maximum(np.cumsum(alt), 1)

    def records(self) -> list[DecisionRecord]:
        out = []
        for i in range(self.horizon):
            u = None if self.uniforms is None else float(self.uniforms[i])
            out.append(
                DecisionRecord(
                    index=i + 1,
                    level=float(self.levels[i]),
                    statistic=Statistic(self.kind, float(self.statistics[i])),
                    rejected=bool(self.rejected[i]),
                    uniform_draw=u,
                    is_null=bool(self.is_null[i]),
                )
            )
        return out

    @classmethod
    def from_records(cls, records: Sequence[DecisionRecord]) -> "TrialTrace":
        if any(r.is_null is None for r in records):
            raise ValueError("records need ground-truth is_null flags for aggregation")
        kind = records[0].statistic.kind if records else Kind.EVALUE
        return cls(
            levels=np.array([r.level for r in records], dtype=float),
            statistics=np.array([r.statistic.value for r in records], dtype=float),
            rejected=np.array([r.rejected for r in records], dtype=bool),
            is_null=np.array([r.is_null for r in records], dtype=bool),
            kind=kind,
        )


@dataclass
class TrialSummary:
    trials: int
    fdr: np.ndarray
    fdr_se: np.ndarray
    power: np.ndarray
    power_se: np.ndarray
    fdp: np.ndarray = field(repr=False)
    power_paths: np.ndarray = field(repr=False)

    @property
    def horizon(self) -> int:
        return len(self.fdr)

    def at(self, t: int) -> dict:
        i = t - 1
        return {
            "horizon": t,
            "FDR": float(self.fdr[i]),
            "FDR_SE": float(self.fdr_se[i]),
            "power": float(self.power[i]),
            "power_SE": float(self.power_se[i]),
        }


def _se(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    if n < 2:
        return np.zeros(x.shape[1:])
    return x.std(axis=0, ddof=1) / math.sqrt(n)


def monte_carlo_aggregate(traces: Sequence[TrialTrace | Sequence[DecisionRecord]]) -> TrialSummary:
    """Mean FDP/power trajectories with standard errors (sample std / sqrt(n))."""
    if len(traces) == 0:
        raise ValueError("need at least one trial")
    traces = [tr if isinstance(tr, TrialTrace) else TrialTrace.from_records(tr) for tr in traces]
    horizons = {tr.horizon for tr in traces}
    if len(horizons) != 1:
        raise ValueError(f"mismatched horizons across trials: {sorted(horizons)}")
    fdps = np.stack([tr.fdp_path() for tr in traces])
    pows = np.stack([tr.power_path() for tr in traces])
    return TrialSummary(
        trials=len(traces),
        fdr=fdps.mean(axis=0),
        fdr_se=_se(fdps),
        power=pows.mean(axis=0),
        power_se=_se(pows),
        fdp=fdps,
        power_paths=pows,
    )
