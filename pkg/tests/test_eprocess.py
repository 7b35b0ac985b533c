import itertools
import math

import mpmath
import numpy as np
import pytest

from elond.core import DiscountSequence
from elond.eprocess import (
    EProcessState,
    coupled_stopping_run,
    first_crossing,
    hoeffding_log_wealth,
    lambda_array,
    lambda_schedule,
    p_values_from_wealth,
    wor_log_wealth,
)
from elond.procedures import ELOND


def test_hoeffding_step_examples():
    s = EProcessState((-4, 4)).hoeffding_step(1.0, 0.1)
    assert s.wealth == pytest.approx(math.exp(0.02))
    assert EProcessState((-4, 4)).hoeffding_step(0.0, 0.3).wealth < 1
    assert EProcessState((-4, 4)).hoeffding_step(2.0, 0.0).wealth == 1
    with pytest.raises(ValueError):
        EProcessState((-4, 4)).hoeffding_step(4.5, 0.1)


def test_wor_step_examples():
    s = EProcessState((-4, 4), population_size=3)
    a = s.wor_step(1.0, 0.2)
    assert a.log_wealth == s.hoeffding_step(1.0, 0.2).log_wealth
    assert a.wor_mean() == pytest.approx(1 / 3)
    b = a.wor_step(-1.0, 0.2).wor_step(0.0, 0.2)
    with pytest.raises(RuntimeError):
        b.wor_step(0.0, 0.2)
    with pytest.raises(RuntimeError):
        EProcessState().wor_step(0.0, 0.1)


def test_vectorized_wealth_matches_steps():
    rng = np.random.default_rng(2)
    X = rng.uniform(-4, 4, size=(3, 25))
    lam = np.array([0.05, 0.1, 0.3])
    L = hoeffding_log_wealth(X, lam)
    Lw = wor_log_wealth(X, lam, 40)
    for k in range(3):
        s = w = EProcessState((-4, 4), population_size=40)
        for j in range(25):
            s = s.hoeffding_step(X[k, j], lam[k])
            w = w.wor_step(X[k, j], lam[k])
            assert L[k, j] == pytest.approx(s.log_wealth, rel=1e-13, abs=1e-13)
            assert Lw[k, j] == pytest.approx(w.log_wealth, rel=1e-13, abs=1e-13)


def test_lambda_schedule_example():
    with mpmath.workdps(50):
        want = mpmath.sqrt(8 * mpmath.log(1 / (mpmath.mpf("0.3") * mpmath.mpf("0.5"))) / (64 * 200))
    assert lambda_schedule(0.3, 0.5, (-4, 4), 200) == pytest.approx(float(want), rel=1e-14)
    assert float(want) == pytest.approx(0.03444, abs=1e-5)
    assert lambda_schedule(0.999999, 0.999999, (-4, 4), 200) < 1e-3
    assert lambda_schedule(0.3, 0.5, (-4, 4), 10**9) < 1e-4
    with pytest.raises(ValueError):
        lambda_schedule(1.0, 1.0, (-4, 4), 10)
    with pytest.raises(ValueError):
        lambda_schedule(0.3, 0.5, (-4, 4), 0)


def test_log_space_no_overflow():
    X = np.full((1, 100_000), 5.0)
    L = hoeffding_log_wealth(X, [1.0], bounds=(-5, 5))
    assert np.all(np.isfinite(L))
    assert np.all(np.isfinite(wor_log_wealth(X, [1.0], 100_000, bounds=(-5, 5))))


def test_out_of_support_samples_rejected():
    with pytest.raises(ValueError):
        hoeffding_log_wealth([[0.0, 5.0]], [0.1])
    with pytest.raises(ValueError):
        wor_log_wealth([[0.0, 1.0, 2.0]], [0.1], 2)


def test_pvalues_in_unit_interval():
    L = np.array([[-1.0, -2.0], [0.5, 3.0]])
    p = p_values_from_wealth(L)
    assert p[0] == 1.0 and p[1] == pytest.approx(math.exp(-3.0))


def _brute_force_tau(W, ag):
    """Straight-line recursion: tau_t is the first i at which M_t^i reaches
    the e-LOND level built from the stopped values of hypotheses 1..t-1."""
    T, N = W.shape
    taus = []
    for t in range(T):
        tau = N
        for i in range(1, N + 1):
            # stopped values of earlier hypotheses at sample index i
            prev = [W[k, min(taus[k], i) - 1] for k in range(t)]
            r = 0
            for k, v in enumerate(prev):
                if v >= 1 / (ag[k] * (r + 1)):
                    r += 1
            if W[t, i - 1] >= 1 / (ag[t] * (r + 1)):
                tau = i
                break
        taus.append(tau)
    return np.array(taus)


def test_coupled_stopping_matches_brute_force(backend):
    rng = np.random.default_rng(4)
    proc = ELOND(0.3)
    for _ in range(200):
        T, N = rng.integers(1, 8), rng.integers(1, 15)
        X = np.clip(rng.normal(rng.uniform(0, 3), 2.0, size=(T, N)), -4, 4)
        ev = coupled_stopping_run(X, proc)
        gam = proc.discount.array(T)
        W = np.exp(hoeffding_log_wealth(X, lambda_array(0.3, gam, (-4, 4), N)))
        assert np.array_equal(ev.tau, _brute_force_tau(W, 0.3 * gam))


def test_two_hypothesis_toy_coupling(backend):
    # hypothesis 1 rejects at i=4, which doubles hypothesis 2's level
    lam = np.array([0.2, 0.2])
    X = np.array([[4.0] * 20, [2.5] * 20])
    ev = coupled_stopping_run(X, ELOND(0.3), lambdas=lam)
    gam = DiscountSequence.default().array(2)
    W = np.exp(hoeffding_log_wealth(X, lam))
    assert np.array_equal(ev.tau, _brute_force_tau(W, 0.3 * gam))
    uncoupled = coupled_stopping_run(X, fixed_levels=0.3 * gam, lambdas=lam)
    assert ev.tau[0] == uncoupled.tau[0] == 4
    assert ev.tau[1] == 13 < uncoupled.tau[1] == 17


def test_single_hypothesis_fallback_and_crossing():
    X = np.zeros((1, 12))
    ev = coupled_stopping_run(X, ELOND(0.3))
    assert ev.tau[0] == 12
    assert ev.e_values[0] == pytest.approx(math.exp(hoeffding_log_wealth(X, [lambda_schedule(0.3, 0.5, (-4, 4), 12)])[0, -1]))
    lam = 0.4
    X = np.zeros((1, 20))
    X[0, :7] = 4.0
    L = hoeffding_log_wealth(X, [lam])
    level = math.exp(-L[0, 6]) * 1.0000001
    ev = coupled_stopping_run(X, fixed_levels=[level], lambdas=[lam])
    assert ev.tau[0] == 7
    assert ev.e_values[0] >= 1 / level * (1 - 1e-12)


def test_fixed_levels_reduce_to_independent_first_crossing():
    rng = np.random.default_rng(9)
    X = np.clip(rng.normal(1.0, 2.0, size=(20, 50)), -4, 4)
    levels = rng.uniform(0.01, 0.3, size=20)
    lam = rng.uniform(0.05, 0.3, size=20)
    ev = coupled_stopping_run(X, fixed_levels=levels, lambdas=lam)
    for k in range(20):
        s = EProcessState()
        tau = 50
        for j in range(50):
            s = s.hoeffding_step(X[k, j], lam[k])
            if s.wealth >= 1 / levels[k]:
                tau = j + 1
                break
        assert ev.tau[k] == tau
    assert np.array_equal(first_crossing(hoeffding_log_wealth(X, lam), levels), ev.tau)


def _scaled_beta_null(rng, shape):
    return -4 + 8 * rng.beta(0.005, 0.005, size=shape)


def test_null_mean_and_superuniformity():
    rng = np.random.default_rng(12)
    n_trials, N = 10_000, 200
    X = _scaled_beta_null(rng, (n_trials, N))
    lam = lambda_schedule(0.3, 0.5, (-4, 4), N)
    L = hoeffding_log_wealth(X, np.full(n_trials, lam))
    ev = coupled_stopping_run(X, fixed_levels=np.full(n_trials, 0.15), lambdas=np.full(n_trials, lam))
    m, se = ev.e_values.mean(), ev.e_values.std(ddof=1) / math.sqrt(n_trials)
    assert m <= 1 + 3 * se
    fixed_n = np.exp(L[:, -1])
    assert fixed_n.mean() <= 1 + 3 * fixed_n.std(ddof=1) / math.sqrt(n_trials)
    for s in (0.01, 0.05, 0.1, 0.3):
        hit = ev.p_values <= s
        assert hit.mean() <= s + 3 * hit.std(ddof=1) / math.sqrt(n_trials)


def test_wor_exhaustive_permutations():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(40):
        pop = rng.uniform(-4, 4, 5)
        pop -= pop.mean()
        if np.abs(pop).max() > 4:
            continue
        lam = rng.uniform(0.01, 0.5)
        for level in (0.0, rng.uniform(0.05, 0.9)):
            perms = np.array(list(itertools.permutations(pop)))
            L = wor_log_wealth(perms, np.full(len(perms), lam), 5)
            tau = first_crossing(L, np.full(len(perms), level))
            worst = max(worst, np.exp(L[np.arange(len(perms)), tau - 1]).mean())
    assert worst <= 1 + 1e-12
