"""Compare the compiled and pure-Python kernels: ``python -m elond.bench``."""
from __future__ import annotations

import argparse
import time

import numpy as np

from . import kernels
from .core import DiscountSequence
from .transforms import harmonic_numbers


def _cases(T: int, N: int, rng: np.random.Generator) -> dict:
    gam = DiscountSequence.default().array(T)
    ell = harmonic_numbers(T)
    e = rng.exponential(size=T) * 50
    p = rng.random(T) ** 3
    us = 1.0 - rng.random(T)
    W = np.exp(np.cumsum(rng.normal(0.02, 0.2, size=(T, N)), axis=1))
    A = rng.random(T) * 100
    wt = rng.random(T) + 0.5
    return {
        "e-LOND": lambda m: m.lond_family_run(e, gam, ell, 0.3, m.ELOND),
        "Ur-LOND": lambda m: m.lond_family_run(p, gam, ell, 0.3, m.URLOND_BY, us),
        "LORD*": lambda m: m.lordstar_run(p, gam, 0.3, 0.9, 10),
        "coupled stopping": lambda m: m.coupled_stopping(W, 0.3 * gam),
        "wcs e-values": lambda m: m.wcs_evalues(A, wt, 200.0, gam, 0.1),
    }


def _as_tuple(out) -> tuple:
    return out if isinstance(out, tuple) else (out,)


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(T: int = 1000, N: int = 200, repeat: int = 3, seed: int = 0) -> list[tuple]:
    cases = _cases(T, N, np.random.default_rng(seed))
    backends = kernels.available_backends()
    rows = []
    for name, fn in cases.items():
        times = {b: _time(lambda: fn(kernels.get_module(b)), repeat) for b in backends}
        outs = [_as_tuple(fn(kernels.get_module(b))) for b in backends]
        same = all(all(np.array_equal(x, y) for x, y in zip(o, outs[0])) for o in outs)
        rows.append((name, times, same))
    return rows


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizon", type=int, default=1000)
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args(argv)
    rows = run(a.horizon, a.samples, a.repeat)
    backends = kernels.available_backends()
    print(f"T={a.horizon} N={a.samples}  backends: {', '.join(backends)}")
    print(f"{'kernel':<18}" + "".join(f"{b + ' [s]':>14}" for b in backends) + f"{'speedup':>10}{'identical':>11}")
    for name, times, same in rows:
        sp = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<18}" + "".join(f"{times[b]:>14.5f}" for b in backends) + f"{sp:>10.1f}{str(same):>11}")


if __name__ == "__main__":
    main()
