"""Online multiple testing state machines: LOND, r-LOND, e-LOND, U-eLOND,
Ur-LOND and LORD*.

Each procedure holds the current index ``t`` (1-based) and the ordered
rejection indices. ``level()`` gives the test level for the next
hypothesis; ``process()`` decides it and advances the state.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import kernels
from .core import DecisionRecord, DiscountSequence, Kind, Statistic, TrialTrace, inverse, rejects
from .transforms import ReshapingFunction, beta_by, harmonic_numbers

SNAPSHOT_FORMAT = "elond.procedure-snapshot"
SNAPSHOT_VERSION = 1


def lond_level(alpha: float, gamma_t: float, n_rej: int) -> float:
    return alpha * gamma_t * (n_rej + 1)


elond_level = lond_level


def rlond_level(alpha: float, gamma_t: float, t: int, n_rej: int, beta: ReshapingFunction | None = None) -> float:
    b = beta_by(t, n_rej + 1) if beta is None else beta(t, n_rej + 1)
    return alpha * gamma_t * b


def _check_u(u: float) -> None:
    if not 0.0 < u <= 1.0:
        raise ValueError(f"uniform draw must lie in (0, 1], got {u}")


def uelond_level(alpha: float, gamma_t: float, n_rej: int, u: float) -> float:
    _check_u(u)
    return elond_level(alpha, gamma_t, n_rej) / u


def urlond_level(alpha: float, gamma_t: float, t: int, n_rej: int, u: float, beta: ReshapingFunction | None = None) -> float:
    _check_u(u)
    r = (n_rej + 1) / u
    b = beta_by(t, r) if beta is None else beta(t, r)
    return alpha * gamma_t * b


def lordstar_level(alpha: float, w0: float, t: int, rejections: Sequence[int], lag: int, discount) -> float:
    """LORD* level with the leading alpha multiplying every term.

    Conflict sets are the fixed-lag windows {t-lag, ..., t-1}. Negative
    values (possible when w0 > alpha) are clipped to 0.
    """
    def in_conflict(i):
        return t - lag <= i <= t - 1

    s = w0 * discount(t)
    if rejections:
        r1 = rejections[0]
        assert r1 < t
        if not in_conflict(r1):
            s += (alpha - w0) * discount(t - r1)
        for i in rejections[1:]:
            if not in_conflict(i):
                s += discount(t - i)
    return max(alpha * s, 0.0)


class UniformSource:
    """Uniform(0, 1] draws for the randomized procedures.

    ``mode="independent"`` draws a fresh value per hypothesis; ``"shared"``
    reuses the first draw for every hypothesis.
    """

    def __init__(self, seed=None, mode: str = "independent"):
        if mode not in ("independent", "shared"):
            raise ValueError(f"unknown uniform mode {mode!r}")
        self.mode = mode
        self._rng = np.random.default_rng(seed)
        self._shared: float | None = None

    def draw(self) -> float:
        if self.mode == "shared" and self._shared is not None:
            return self._shared
        u = 1.0 - float(self._rng.random())
        if self.mode == "shared":
            self._shared = u
        return u

    def draws(self, n: int) -> np.ndarray:
        return np.array([self.draw() for _ in range(n)])

    def state(self) -> dict:
        return {"mode": self.mode, "bit_generator": self._rng.bit_generator.state, "shared": self._shared}

    @classmethod
    def from_state(cls, state: dict) -> "UniformSource":
        src = cls(mode=state["mode"])
        src._rng.bit_generator.state = state["bit_generator"]
        src._shared = state["shared"]
        return src


class OnlineProcedure:
    name = "base"
    kind = Kind.PVALUE
    randomized = False

    def __init__(self, alpha: float, discount: DiscountSequence | None = None, uniforms: UniformSource | None = None):
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        self.alpha = float(alpha)
        self.discount = discount if discount is not None else DiscountSequence.default()
        self.uniforms = uniforms
        if self.randomized and self.uniforms is None:
            self.uniforms = UniformSource()
        self.t = 1
        self.rejections: list[int] = []

    @property
    def n_rejections(self) -> int:
        return len(self.rejections)

    def _level(self, u: float | None) -> float:
        raise NotImplementedError

    def level(self, u: float | None = None) -> float:
        """Test level for hypothesis ``self.t`` (u is required for randomized procedures)."""
        if self.randomized and u is None:
            raise ValueError(f"{self.name} needs a uniform draw")
        return self._level(u)

    def _coerce(self, statistic) -> Statistic:
        if not isinstance(statistic, Statistic):
            return Statistic(self.kind, statistic)
        if statistic.kind is not self.kind:
            raise TypeError(f"{self.name} takes {self.kind.name} statistics, got {statistic.kind.name}")
        return statistic

    def process(self, statistic, u: float | None = None, is_null: bool | None = None) -> DecisionRecord:
        stat = self._coerce(statistic)
        if self.randomized:
            if u is None:
                u = self.uniforms.draw()
            _check_u(u)
        else:
            u = None
        lev = self._level(u)
        rej = rejects(stat, lev)
        rec = DecisionRecord(self.t, lev, stat, rej, u, is_null)
        if rej:
            self.rejections.append(self.t)
        self.t += 1
        return rec

    def run(self, values: Sequence[float], uniforms: Sequence[float] | None = None, is_null=None) -> TrialTrace:
        """Process a whole stream with the compiled kernels.

        Only valid from a fresh state; decisions equal repeated ``process``.
        """
        if self.t != 1:
            raise RuntimeError("run() needs a fresh procedure")
        vals = np.asarray(values, dtype=np.float64)
        if self.randomized and uniforms is None:
            uniforms = self.uniforms.draws(len(vals))
        us = None if uniforms is None else np.asarray(uniforms, dtype=np.float64)
        levels, rejected = self._run_arrays(vals, us)
        self.rejections = [int(i) + 1 for i in np.flatnonzero(rejected)]
        self.t = len(vals) + 1
        nulls = np.zeros(len(vals), bool) if is_null is None else np.asarray(is_null, bool)
        return TrialTrace(levels, vals, rejected, nulls, kind=self.kind, uniforms=us if self.randomized else None)

    def _run_arrays(self, vals, us):
        # generic fallback through process()
        levels = np.empty(len(vals))
        rejected = np.zeros(len(vals), bool)
        for k, v in enumerate(vals):
            rec = self.process(float(v), None if us is None else float(us[k]))
            levels[k] = rec.level
            rejected[k] = rec.rejected
        self.t = 1
        self.rejections = []
        return levels, rejected

    def _extras(self) -> dict:
        return {}

    def snapshot(self) -> dict:
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "procedure": self.name,
            "alpha": self.alpha,
            "t": self.t,
            "rejections": list(self.rejections),
            "discount": self.discount.to_spec(),
            "extras": self._extras(),
            "rng": None if self.uniforms is None else self.uniforms.state(),
        }


class LOND(OnlineProcedure):
    """LOND on p-values (valid under independence or PRDS)."""

    name = "LOND"

    def _level(self, u):
        return lond_level(self.alpha, self.discount(self.t), self.n_rejections)

    def _run_arrays(self, vals, us):
        T = len(vals)
        return kernels.lond_family_run(vals, self.discount.array(T), harmonic_numbers(T), self.alpha, kernels.LOND)


class ELOND(OnlineProcedure):
    """e-LOND: LOND levels applied to e-values, valid under arbitrary dependence."""

    name = "e-LOND"
    kind = Kind.EVALUE

    def _level(self, u):
        return elond_level(self.alpha, self.discount(self.t), self.n_rejections)

    def _run_arrays(self, vals, us):
        T = len(vals)
        return kernels.lond_family_run(vals, self.discount.array(T), harmonic_numbers(T), self.alpha, kernels.ELOND)


class UELOND(ELOND):
    """Randomized e-LOND: the e-LOND level divided by an independent uniform."""

    name = "U-eLOND"
    randomized = True

    def _level(self, u):
        return uelond_level(self.alpha, self.discount(self.t), self.n_rejections, u)

    def _run_arrays(self, vals, us):
        T = len(vals)
        if np.any(~((us > 0) & (us <= 1))):
            raise ValueError("uniform draws must lie in (0, 1]")
        return kernels.lond_family_run(vals, self.discount.array(T), harmonic_numbers(T), self.alpha, kernels.ELOND, us)


class RLOND(OnlineProcedure):
    """r-LOND on p-values with a reshaping family (BY by default)."""

    name = "r-LOND"

    def __init__(self, alpha, discount=None, beta: ReshapingFunction | None = None, uniforms=None):
        super().__init__(alpha, discount, uniforms)
        self.beta = beta

    def _level(self, u):
        return rlond_level(self.alpha, self.discount(self.t), self.t, self.n_rejections, self.beta)

    def _run_arrays(self, vals, us):
        if self.beta is not None and self.beta.kind != "BY":
            return super()._run_arrays(vals, us)
        T = len(vals)
        return kernels.lond_family_run(vals, self.discount.array(T), harmonic_numbers(T), self.alpha, kernels.RLOND_BY)

    def _extras(self):
        if self.beta is not None and self.beta.kind != "BY":
            raise ValueError("user-supplied reshaping functions cannot be serialized")
        return {"beta": "BY"}


class URLOND(RLOND):
    """Randomized r-LOND: reshaping applied to (|R_{t-1}| + 1)/U_t."""

    name = "Ur-LOND"
    randomized = True

    def _level(self, u):
        return urlond_level(self.alpha, self.discount(self.t), self.t, self.n_rejections, u, self.beta)

    def _run_arrays(self, vals, us):
        if self.beta is not None and self.beta.kind != "BY":
            return OnlineProcedure._run_arrays(self, vals, us)
        if np.any(~((us > 0) & (us <= 1))):
            raise ValueError("uniform draws must lie in (0, 1]")
        T = len(vals)
        return kernels.lond_family_run(vals, self.discount.array(T), harmonic_numbers(T), self.alpha, kernels.URLOND_BY, us)


class LordStar(OnlineProcedure):
    """LORD* with fixed-lag conflict sets {t-lag, ..., t-1}."""

    name = "LORD*"

    def __init__(self, alpha, discount=None, w0: float = 0.9, lag: int = 0, uniforms=None):
        super().__init__(alpha, discount, uniforms)
        if lag < 0:
            raise ValueError("lag must be nonnegative")
        self.w0 = float(w0)
        self.lag = int(lag)

    @property
    def r1(self) -> int:
        return self.rejections[0] if self.rejections else 0

    def _level(self, u):
        return lordstar_level(self.alpha, self.w0, self.t, self.rejections, self.lag, self.discount)

    def _run_arrays(self, vals, us):
        return kernels.lordstar_run(vals, self.discount.array(len(vals)), self.alpha, self.w0, self.lag)

    def _extras(self):
        return {"w0": self.w0, "lag": self.lag, "r1": self.r1}


PROCEDURES = {cls.name: cls for cls in (LOND, ELOND, UELOND, RLOND, URLOND, LordStar)}
ALIASES = {
    "lond": "LOND",
    "elond": "e-LOND",
    "e-lond": "e-LOND",
    "uelond": "U-eLOND",
    "u-elond": "U-eLOND",
    "rlond": "r-LOND",
    "r-lond": "r-LOND",
    "urlond": "Ur-LOND",
    "ur-lond": "Ur-LOND",
    "lordstar": "LORD*",
    "lord*": "LORD*",
}


def canonical_name(name: str) -> str:
    if name in PROCEDURES:
        return name
    key = name.lower()
    if key in ALIASES:
        return ALIASES[key]
    raise ValueError(f"unknown procedure {name!r}; choose from {sorted(PROCEDURES)}")


def make_procedure(name: str, alpha: float, discount=None, uniforms=None, **options) -> OnlineProcedure:
    cls = PROCEDURES[canonical_name(name)]
    if cls is LordStar:
        return cls(alpha, discount, w0=options.get("w0", 0.9), lag=options.get("lag", 0), uniforms=uniforms)
    return cls(alpha, discount, uniforms=uniforms)


def restore(snapshot: dict) -> OnlineProcedure:
    """Rebuild a procedure from ``OnlineProcedure.snapshot()`` output."""
    if snapshot.get("format") != SNAPSHOT_FORMAT:
        raise ValueError("not a procedure snapshot")
    if snapshot.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {snapshot.get('version')}")
    extras = snapshot.get("extras", {})
    uniforms = UniformSource.from_state(snapshot["rng"]) if snapshot.get("rng") else None
    proc = make_procedure(
        snapshot["procedure"],
        snapshot["alpha"],
        DiscountSequence.from_spec(snapshot["discount"]),
        uniforms=uniforms,
        w0=extras.get("w0", 0.9),
        lag=extras.get("lag", 0),
    )
    proc.t = int(snapshot["t"])
    proc.rejections = [int(i) for i in snapshot["rejections"]]
    if proc.rejections and (proc.rejections[-1] >= proc.t or len(proc.rejections) + 1 > proc.t):
        raise ValueError("inconsistent snapshot: rejections beyond current index")
    return proc
