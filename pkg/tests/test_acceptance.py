"""Acceptance suite: one pass/fail line per criterion, at the stated tolerances."""
import itertools
import math
import time

import numpy as np
import pytest

from elond.core import DiscountSequence
from elond.eprocess import first_crossing, hoeffding_log_wealth, lambda_schedule, wor_log_wealth
from elond.procedures import ELOND, RLOND, UELOND, URLOND, elond_level, rlond_level
from elond.simlab import (
    FcrScenario,
    LocalDepScenario,
    SharpnessScenario,
    WcsScenario,
    WorScenario,
    gen_wor_population,
    power_difference,
    run_fcr_trial,
    run_local_dep_trial,
    run_sharpness_trial,
    run_trials,
    run_wcs_trial,
    run_wor_trial,
    summarize,
    trial_seed,
)
from elond.transforms import calibrate_lond, harmonic, stochastic_round
from elond.wcs import CalibrationSet, TestPoint, wcs_evalue

pytestmark = pytest.mark.acceptance

TRIALS = 200
HORIZONS = (50, 100, 200)
LAGS = (0, 50, 150)
PI1S = (0.1, 0.5, 0.9)
GATED = ("e-LOND", "U-eLOND", "r-LOND", "Ur-LOND")


def _se(x) -> float:
    x = np.asarray(x, float)
    return float(x.std(ddof=1) / math.sqrt(len(x)))


@pytest.fixture(scope="session")
def battery():
    """Trial results for the six dependence scenarios, with the elapsed time."""
    start = time.perf_counter()
    runs = {}
    for L in LAGS:
        runs[f"local-dep L={L}"] = run_trials(run_local_dep_trial, LocalDepScenario(L=L), TRIALS)
    for pi1 in PI1S:
        runs[f"wor pi1={pi1}"] = run_trials(run_wor_trial, WorScenario(pi1=pi1), TRIALS)
    return runs, time.perf_counter() - start


def test_criterion_1_sharpness(report):
    start = time.perf_counter()
    n = 10_000
    res = run_trials(run_sharpness_trial, SharpnessScenario(), n)
    s = summarize(res)["e-LOND"].at(9)
    elapsed = time.perf_counter() - start
    ok = abs(s["FDR"] - 0.27) <= 3 * s["FDR_SE"] and elapsed < 60
    report(1, ok, f"FDR(9)={s['FDR']:.4f} SE={s['FDR_SE']:.4f} target 0.27, {elapsed:.1f}s")
    assert ok


def test_criterion_2_fdr_battery(battery, report):
    runs, elapsed = battery
    worst, where = -np.inf, ""
    for label, res in runs.items():
        alpha = 0.3 if label.startswith("local") else 0.05
        summ = summarize(res)
        for name in GATED:
            for t in HORIZONS:
                s = summ[name].at(t)
                slack = s["FDR"] - (alpha + 3 * s["FDR_SE"])
                if slack > worst:
                    worst, where = slack, f"{label} {name} t={t} FDR={s['FDR']:.4f}"
    ok = worst <= 0 and elapsed < 900
    report(2, ok, f"max FDR - (alpha + 3SE) = {worst:.4f} at {where}; {elapsed:.1f}s")
    assert ok


def test_criterion_3_power_ordering(battery, report):
    runs, _ = battery
    pathwise_ok = True
    strict = []
    for label, res in runs.items():
        for r in res:
            pathwise_ok &= bool(np.all(r["e-LOND"].rejected <= r["U-eLOND"].rejected))
            pathwise_ok &= bool(np.all(r["r-LOND"].rejected <= r["Ur-LOND"].rejected))
        d, se = power_difference(res, "e-LOND", "r-LOND")
        strict.append((label, d, se, d > 0 and d >= 3 * se))
    strict_ok = all(s[-1] for s in strict)
    detail = "; ".join(f"{lab}: diff={d:.4f} SE={se:.4f}" for lab, d, se, _ in strict)
    report(3, pathwise_ok and strict_ok,
           f"pathwise U>=e, Ur>=r: {pathwise_ok}; strict e>r by 3SE: {strict_ok} ({detail})")
    assert pathwise_ok
    assert strict_ok


def test_criterion_4_lordstar_trend(battery, report):
    runs, _ = battery
    s0 = summarize(runs["local-dep L=0"])["LORD*"].at(200)
    s150 = summarize(runs["local-dep L=150"])["LORD*"].at(200)
    diff = s0["power"] - s150["power"]
    se = math.hypot(s0["power_SE"], s150["power_SE"])
    ok = diff > 0 and diff >= 3 * se
    report(4, ok, f"power L=0 {s0['power']:.4f}, L=150 {s150['power']:.4f}, diff={diff:.4f} SE={se:.4f}")
    assert ok


def test_criterion_5_calibration_equivalence(report):
    rng = np.random.default_rng(5)
    disc = DiscountSequence.default()
    T = 100
    gam = disc.array(T)
    mismatched = 0
    for k in range(1000):
        alpha = float(rng.uniform(0.05, 0.5))
        mix = rng.random(T) < rng.uniform(0.1, 0.9)
        p = np.where(mix, rng.random(T) * 10.0 ** rng.uniform(-8, -2, T), rng.random(T))
        e = np.array([calibrate_lond(t, alpha, gam[t - 1], harmonic(t), p[t - 1]) for t in range(1, T + 1)])
        re = ELOND(alpha, disc).run(e).rejected
        rr = RLOND(alpha, disc).run(p).rejected
        mismatched += int(not np.array_equal(re, rr))
    report(5, mismatched == 0, f"{mismatched} of 1000 streams differ")
    assert mismatched == 0


def test_criterion_6_dominance(report):
    rng = np.random.default_rng(6)
    disc = DiscountSequence.default()
    T = 100
    gam = disc.array(T)
    failures = 0
    for k in range(1000):
        alpha = float(rng.uniform(0.01, 0.5))
        e = rng.exponential(size=T) * 10.0 ** rng.uniform(0, 4, T) * (rng.random(T) < 0.6)
        p = np.minimum(1.0, 1.0 / np.where(e > 0, e, 1e-300))
        u = 1.0 - rng.random(T)
        te = ELOND(alpha, disc).run(e)
        tr = RLOND(alpha, disc).run(p)
        tue = UELOND(alpha, disc).run(e, u)
        tur = URLOND(alpha, disc).run(p, u)
        re, rr = np.cumsum(te.rejected), np.cumsum(tr.rejected)
        r_prev_e = np.concatenate([[0], re[:-1]])
        r_prev_r = np.concatenate([[0], rr[:-1]])
        lev_ok = all(
            elond_level(alpha, gam[t], int(r_prev_e[t])) >= rlond_level(alpha, gam[t], t + 1, int(r_prev_r[t]))
            and elond_level(alpha, gam[t], int(r_prev_r[t])) >= rlond_level(alpha, gam[t], t + 1, int(r_prev_r[t]))
            for t in range(T)
        )
        sets_ok = (
            np.all(tr.rejected <= te.rejected)
            and np.all(te.rejected <= tue.rejected)
            and np.all(tr.rejected <= tur.rejected)
        )
        failures += int(not (lev_ok and sets_ok))
    report(6, failures == 0, f"{failures} of 1000 streams violate a level or set inclusion")
    assert failures == 0


def test_criterion_7_stochastic_rounding(report):
    rng = np.random.default_rng(7)
    n = 100_000
    a = 10.0 ** rng.uniform(-6, 0, n) * (1 - 1e-12)
    u = 1.0 - rng.random(n)
    e = np.where(rng.random(n) < 0.3, u / a, 10.0 ** rng.uniform(-2, 7, n))
    e[::97] = 1.0 / a[::97]
    e[::89] = 0.0
    bad = sum((stochastic_round(ei, ai, ui) >= 1.0 / ai) != (ei >= ui / ai) for ei, ai, ui in zip(e, a, u))
    report(7, bad == 0, f"{bad} mismatches on {n} points")
    assert bad == 0


def _stopped_mean(log_wealth, level):
    tau = first_crossing(log_wealth, np.full(len(log_wealth), level))
    return np.exp(log_wealth[np.arange(len(log_wealth)), tau - 1])


def test_criterion_8_eprocess_validity(report):
    rng = np.random.default_rng(8)
    n_trials, N, bounds = 10_000, 200, (-4.0, 4.0)
    lines, ok = [], True
    for alpha, t in ((0.05, 1), (0.3, 5)):
        level = alpha / (t * (t + 1))
        lam = lambda_schedule(alpha, 1 / (t * (t + 1)), bounds, N)
        X = 8.0 * rng.beta(0.5, 0.5, size=(n_trials, N)) - 4.0
        E = _stopped_mean(hoeffding_log_wealth(X, np.full(n_trials, lam), bounds), level)
        ok &= E.mean() <= 1 + 3 * _se(E)
        lines.append(f"hoeffding(level={level:.3g}) mean={E.mean():.4f} SE={_se(E):.4f}")
        pop = gen_wor_population(0.0, 0.01, 1000, bounds)
        idx = np.argsort(rng.random((n_trials, pop.size)), axis=1)[:, :N]
        E = _stopped_mean(wor_log_wealth(pop[idx], np.full(n_trials, lam), pop.size, bounds), level)
        ok &= E.mean() <= 1 + 3 * _se(E)
        lines.append(f"wor(level={level:.3g}) mean={E.mean():.4f} SE={_se(E):.4f}")
    worst = 0.0
    checked = 0
    while checked < 50:
        pop = rng.uniform(-4, 4, 5)
        pop -= pop.mean()
        if np.abs(pop).max() > 4:
            continue
        checked += 1
        perms = np.array(list(itertools.permutations(pop)))
        lam = float(rng.uniform(0.01, 0.6))
        for level in (0.0, float(rng.uniform(0.05, 0.95))):
            worst = max(worst, _stopped_mean(wor_log_wealth(perms, np.full(len(perms), lam), 5), level).mean())
    ok &= worst <= 1 + 1e-12
    lines.append(f"exhaustive size-5 max mean={float(worst)!r}")
    report(8, bool(ok), "; ".join(lines))
    assert ok


def test_criterion_9_fcr(report):
    sc = FcrScenario()
    n = 500
    res = run_trials(run_fcr_trial, sc, n)
    lines, ok = [], True
    for name in ("e-LOND-CI", "U-eLOND-CI"):
        fcp = np.array([r[name]["fcp"][-1] for r in res])
        ok &= fcp.mean() <= 0.1 + 3 * _se(fcp)
        lines.append(f"{name} FCR={fcp.mean():.4f} SE={_se(fcp):.4f}")
    same = True
    for k, r in enumerate(res):
        again = run_fcr_trial(sc, np.random.default_rng(trial_seed(20240601, k)), alpha=0.05)
        for name in r:
            same &= r[name]["selected"].tobytes() == again[name]["selected"].tobytes()
    ok &= same
    lines.append(f"selections identical at alpha=0.05: {same}")
    report(9, bool(ok), "; ".join(lines))
    assert ok


def _brute_evalue(scores, weights, hats, wts, alpha):
    gam = [1 / (j * (j + 1)) for j in range(1, len(hats) + 1)]
    out = []
    for t in range(len(hats)):
        denom = sum(weights) + wts[t]

        def count(extra):
            r = 0
            for j in range(t):
                num = sum(w for v, w in zip(scores, weights) if v < hats[j]) + extra
                if num / denom <= alpha * gam[j] * (r + 1):
                    r += 1
            return r

        lm = alpha * gam[t] * (count(0.0) + 1)
        lp = alpha * gam[t] * (count(wts[t]) + 1)
        p = (sum(w for v, w in zip(scores, weights) if v < hats[t]) + wts[t]) / denom
        out.append(1 / lm if p <= lp else 0.0)
    return out


def test_criterion_10_wcs(report):
    sc = WcsScenario()
    n = 500
    res = run_trials(run_wcs_trial, sc, n)
    lines, ok = [], True
    ev = np.array([np.mean(r["evalues"] * r["is_null"]) for r in res])
    ok &= ev.mean() <= 1 + 3 * _se(ev)
    lines.append(f"E*1{{null}} mean={ev.mean():.4f} SE={_se(ev):.4f}")
    for s in (0.05, 0.1, 0.3):
        hit = np.array([np.mean((r["pvalues"] <= s) & r["is_null"]) for r in res])
        ok &= hit.mean() <= s + 3 * _se(hit)
        lines.append(f"P(P<={s},null)={hit.mean():.4f}")
    rng = np.random.default_rng(10)
    mism = 0
    for _ in range(500):
        scores, weights = rng.normal(size=3), rng.exponential(size=3)
        T = int(rng.integers(1, 6))
        hats, wts = rng.normal(-1.5, 1.5, T), rng.exponential(size=T)
        alpha = float(rng.uniform(0.2, 0.9))
        cal = CalibrationSet(np.zeros((3, 1)), scores, weights)
        want = _brute_evalue(list(scores), list(weights), list(hats), list(wts), alpha)
        for t in range(T):
            got = wcs_evalue(cal, hats[:t], TestPoint(None, 0.0, hats[t], wts[t]), alpha)
            mism += int(got != want[t])
    ok &= mism == 0
    lines.append(f"oracle mismatches={mism}")
    report(10, bool(ok), "; ".join(lines))
    assert ok
