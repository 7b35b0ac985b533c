"""Pure-Python kernels. Same signatures and bit-identical results as _ckernels."""
import math

import numpy as np

ELOND = 0
LOND = 1
RLOND_BY = 2
URLOND_BY = 3


def _inv(x):
    return math.inf if x == 0.0 else 1.0 / x


def lond_family_run(values, gammas, ells, alpha, mode, uniforms=None):
    """Run one LOND-type procedure over a full statistic stream.

    Returns (levels, rejected). ``uniforms`` divides the e-LOND level
    (U-eLOND) in mode ELOND and is required in mode URLOND_BY.
    """
    vals = np.asarray(values, dtype=np.float64).tolist()
    gam = np.asarray(gammas, dtype=np.float64).tolist()
    ell = np.asarray(ells, dtype=np.float64).tolist()
    us = None if uniforms is None else np.asarray(uniforms, dtype=np.float64).tolist()
    if mode == URLOND_BY and us is None:
        raise ValueError("Ur-LOND needs uniform draws")
    n = len(vals)
    levels = [0.0] * n
    rejected = [False] * n
    r = 0
    for k in range(n):
        ag = alpha * gam[k]
        if mode == ELOND:
            lev = ag * (r + 1)
            if us is not None:
                lev = lev / us[k]
            rej = vals[k] >= _inv(lev)
        elif mode == LOND:
            lev = ag * (r + 1)
            rej = vals[k] <= lev
        elif mode == RLOND_BY:
            lev = ag * (min(math.floor(r + 1), k + 1) / ell[k])
            rej = vals[k] <= lev
        elif mode == URLOND_BY:
            lev = ag * (min(math.floor((r + 1) / us[k]), k + 1) / ell[k])
            rej = vals[k] <= lev
        else:
            raise ValueError(f"unknown mode {mode}")
        levels[k] = lev
        rejected[k] = rej
        r += rej
    return np.array(levels), np.array(rejected, dtype=bool)


def lordstar_run(pvalues, gammas, alpha, w0, lag):
    p = np.asarray(pvalues, dtype=np.float64).tolist()
    gam = np.asarray(gammas, dtype=np.float64).tolist()
    n = len(p)
    levels = [0.0] * n
    rejected = [False] * n
    rej_idx = []
    for k in range(n):
        t = k + 1
        s = w0 * gam[t - 1]
        if rej_idx:
            r1 = rej_idx[0]
            if not (t - lag <= r1 <= t - 1):
                s += (alpha - w0) * gam[t - r1 - 1]
            for i in rej_idx[1:]:
                if not (t - lag <= i <= t - 1):
                    s += gam[t - i - 1]
        lev = alpha * s
        if lev < 0.0:
            lev = 0.0
        levels[k] = lev
        if p[k] <= lev:
            rejected[k] = True
            rej_idx.append(t)
    return np.array(levels), np.array(rejected, dtype=bool)


def coupled_stopping(wealth, ag):
    """Stopping indices (1-based) for e-processes coupled through e-LOND.

    ``wealth[t, i]`` is M_t^{i+1}; ``ag[t]`` is alpha*gamma_{t+1}. At each
    sample index i the e-LOND levels are recomputed from the stopped values
    M_k^{tau_k ^ i} of earlier hypotheses.
    """
    W = np.asarray(wealth, dtype=np.float64)
    T, N = W.shape
    rows = W.tolist()
    agl = np.asarray(ag, dtype=np.float64).tolist()
    tau = [N] * T
    stopped = [False] * T
    frozen = [0.0] * T
    for i in range(N):
        cnt = 0
        for k in range(T):
            inv = _inv(agl[k] * (cnt + 1))
            if stopped[k]:
                v = frozen[k]
            else:
                v = rows[k][i]
                if v >= inv:
                    stopped[k] = True
                    tau[k] = i + 1
                    frozen[k] = v
            if v >= inv:
                cnt += 1
    return np.array(tau, dtype=np.int64)


def wcs_evalues(below, wtest, wtotal, gammas, alpha):
    """Weighted conformal p-values and the LOND-derived e-values.

    ``below[j]`` is the calibration weight strictly below the score of test
    point j. Returns (P, E, level_minus, level_plus).
    """
    A = np.asarray(below, dtype=np.float64).tolist()
    w = np.asarray(wtest, dtype=np.float64).tolist()
    gam = np.asarray(gammas, dtype=np.float64).tolist()
    T = len(A)
    P = [0.0] * T
    E = [0.0] * T
    lm = [0.0] * T
    lp = [0.0] * T
    for t in range(T):
        wt = w[t]
        denom = wtotal + wt
        rm = 0
        rp = 0
        for j in range(t):
            if A[j] / denom <= alpha * gam[j] * (rm + 1):
                rm += 1
            if (A[j] + wt) / denom <= alpha * gam[j] * (rp + 1):
                rp += 1
        am = alpha * gam[t] * (rm + 1)
        ap = alpha * gam[t] * (rp + 1)
        pt = (A[t] + wt) / denom
        P[t] = pt
        lm[t] = am
        lp[t] = ap
        E[t] = _inv(am) if pt <= ap else 0.0
    return np.array(P), np.array(E), np.array(lm), np.array(lp)
