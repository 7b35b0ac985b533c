"""Single-trial runners. Each returns {procedure name: TrialTrace}."""
from __future__ import annotations

import numpy as np

from ..core import DiscountSequence, TrialTrace
from ..eprocess import coupled_stopping_run, lambda_array
from ..procedures import ELOND, RLOND, UELOND, URLOND, LordStar
from ..selective import HoeffdingMeanFamily, SelectiveSession
from ..wcs import CovariateShiftModel, wcs_gate, wcs_statistics
from .scenarios import (
    FcrScenario,
    LocalDepScenario,
    SharpnessScenario,
    WcsScenario,
    WorScenario,
    gen_local_dep,
    gen_wor_population,
    null_pattern,
)

EVALUE_PROCS = ("e-LOND", "U-eLOND")
PVALUE_PROCS = ("r-LOND", "Ur-LOND")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _uniforms(rng: np.random.Generator, T: int) -> np.ndarray:
    return 1.0 - rng.random(T)


def gate_all(E, P, is_null, alpha, us, discount=None, lordstar_lags=()) -> dict[str, TrialTrace]:
    """Run the e-value and p-value procedures on one trial's statistics.

    Both randomized procedures share the draws ``us``.
    """
    out = {
        "e-LOND": ELOND(alpha, discount).run(E, is_null=is_null),
        "U-eLOND": UELOND(alpha, discount).run(E, us, is_null=is_null),
        "r-LOND": RLOND(alpha, discount).run(P, is_null=is_null),
        "Ur-LOND": URLOND(alpha, discount).run(P, us, is_null=is_null),
    }
    for lag, w0 in lordstar_lags:
        out["LORD*"] = LordStar(alpha, discount, w0=w0, lag=lag).run(P, is_null=is_null)
    return out


def run_local_dep_trial(sc: LocalDepScenario, seed) -> dict[str, TrialTrace]:
    rng = _rng(seed)
    is_null = null_pattern(sc.T, sc.pi1, rng)
    means = np.where(is_null, sc.mu0, sc.mu1)
    X = gen_local_dep(sc.T, sc.N, sc.L, means, rng, sc.beta_sum, sc.bounds)
    ev = coupled_stopping_run(X, ELOND(sc.alpha), bounds=sc.bounds)
    us = _uniforms(rng, sc.T)
    return gate_all(ev.e_values, ev.p_values, is_null, sc.alpha, us, lordstar_lags=[(sc.L, sc.w0)])


def run_wor_trial(sc: WorScenario, seed) -> dict[str, TrialTrace]:
    rng = _rng(seed)
    size = sc.N * sc.T
    V0 = gen_wor_population(sc.mu0, sc.s, size, sc.bounds)
    V1 = gen_wor_population(sc.mu1, sc.s, size, sc.bounds)
    is_null = null_pattern(sc.T, sc.pi1, rng)
    pos = rng.permutation(size).reshape(sc.T, sc.N)
    X = np.where(is_null[:, None], V0[pos], V1[pos])
    gam = DiscountSequence.default().array(sc.T)
    lam = lambda_array(sc.alpha, gam, sc.bounds, sc.N)
    ev = coupled_stopping_run(X, bounds=sc.bounds, population_size=size, fixed_levels=sc.alpha * gam, lambdas=lam)
    us = _uniforms(rng, sc.T)
    return gate_all(ev.e_values, ev.p_values, is_null, sc.alpha, us)


def sharpness_evalues(sc: SharpnessScenario, rng: np.random.Generator) -> np.ndarray:
    """One draw from the worst-case law: with probability alpha*gamma_t the
    t-th e-value is 1/(alpha*gamma_t) and all others are 0; the leftover
    mass (including the tail beyond T) gives all zeros."""
    ag = sc.alpha * DiscountSequence.default().array(sc.T)
    probs = np.append(ag, max(0.0, 1.0 - ag.sum()))
    k = rng.choice(sc.T + 1, p=probs / probs.sum())
    E = np.zeros(sc.T)
    if k < sc.T:
        E[k] = 1.0 / ag[k]
    return E


def run_sharpness_trial(sc: SharpnessScenario, seed) -> dict[str, TrialTrace]:
    rng = _rng(seed)
    E = sharpness_evalues(sc, rng)
    return {"e-LOND": ELOND(sc.alpha).run(E, is_null=np.ones(sc.T, bool))}


def quantile_rule(q: float):
    """Select x_t iff its sample mean exceeds the q-quantile of past means."""

    def rule(x, history):
        m = float(np.mean(x))
        if not history.data:
            return True
        past = [float(np.mean(d)) for d in history.data]
        return m > float(np.quantile(past, q))

    return rule


def run_fcr_trial(sc: FcrScenario, seed, alpha: float | None = None) -> dict[str, dict]:
    """e-LOND-CI and U-eLOND-CI on Gaussian-copula data with a data-snooping rule.

    Returns per-procedure dicts with selection indices, levels, coverage
    flags and the per-step FCP path.
    """
    rng = _rng(seed)
    alpha = sc.alpha if alpha is None else alpha
    is_null = null_pattern(sc.T, sc.pi1, rng)
    theta = np.where(is_null, 0.0, sc.mu1)
    X = gen_local_dep(sc.T, sc.n, sc.L, theta, rng, sc.beta_sum, sc.bounds)
    us = _uniforms(rng, sc.T)
    fam = HoeffdingMeanFamily(sc.bounds, sc.alpha_ref)
    out = {}
    for name, randomized in (("e-LOND-CI", False), ("U-eLOND-CI", True)):
        sess = SelectiveSession(alpha, fam, quantile_rule(sc.quantile), randomized=randomized)
        miss = np.zeros(sc.T)
        sel = np.zeros(sc.T, bool)
        lower = np.full(sc.T, np.nan)
        upper = np.full(sc.T, np.nan)
        levels = np.zeros(sc.T)
        for k in range(sc.T):
            o = sess.step(X[k], theta=theta[k], u=us[k] if randomized else None)
            levels[k] = o.level
            if o.selected:
                sel[k] = True
                miss[k] = not o.covered
                if not o.interval.empty:
                    lower[k], upper[k] = o.interval.lower, o.interval.upper
        fcp_path = np.cumsum(miss) / np.maximum(np.cumsum(sel), 1)
        out[name] = {
            "selected": sel,
            "miscovered": miss.astype(bool),
            "levels": levels,
            "lower": lower,
            "upper": upper,
            "fcp": fcp_path,
        }
    return out


def run_wcs_trial(sc: WcsScenario, seed) -> dict:
    """Weighted conformal selection on the Gaussian covariate-shift model.

    Returns gated traces plus the raw statistics for validity checks.
    """
    rng = _rng(seed)
    model = CovariateShiftModel(d=sc.d, delta=np.full(sc.d, sc.shift), beta=np.full(sc.d, sc.signal), noise=sc.noise)
    cal = model.calibration(sc.n_cal, rng)
    pts = model.test_points(sc.T, rng, sc.threshold)
    stats = wcs_statistics(cal, pts, sc.alpha)
    us = _uniforms(rng, sc.T)
    traces = {name: wcs_gate(cal, pts, name, sc.alpha, uniforms=us if name.startswith("U") else None, stats=stats)
              for name in ("e-LOND", "U-eLOND", "r-LOND", "Ur-LOND")}
    return {
        "traces": traces,
        "pvalues": stats.pvalues,
        "evalues": stats.evalues,
        "level_minus": stats.level_minus,
        "level_plus": stats.level_plus,
        "is_null": np.array([p.is_null for p in pts], bool),
    }


TRIAL_RUNNERS = {
    "local-dep": run_local_dep_trial,
    "wor": run_wor_trial,
    "sharpness": run_sharpness_trial,
    "fcr": run_fcr_trial,
    "wcs": run_wcs_trial,
}
