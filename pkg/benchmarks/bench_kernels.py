"""Compare the compiled kernels with the numpy/scipy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel and backend with the best wall time and the
speedup of the compiled backend.  Both backends must give identical output;
the script checks that before timing.
"""
from __future__ import annotations

import argparse
import importlib
import time

import numpy as np

from percolab.events import EventSpec, touch_form
from percolab.lattice import open_threshold, trial_key, trial_keys


def _load(name):
    try:
        return importlib.import_module(f"percolab.{name}")
    except ImportError:
        return None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(ref):
    thr = open_threshold(0.59274621)
    key = trial_key(1, 0)
    yield "sample 513^2", lambda k: k.sample(key, (-256, -256), (513, 513), thr)
    grid = ref.sample(key, (-256, -256), (513, 513), thr)
    yield "label 513^2", lambda k: k.label(grid)
    grid3 = ref.sample(key, (0, 0, 0), (65, 65, 65), open_threshold(0.3116077))
    yield "label 65^3", lambda k: k.label(grid3)

    f = touch_form(EventSpec.make("two_arms", 2, n=16))
    rect = f.rect
    within = np.ascontiguousarray(f.region.mask_in(rect), dtype=np.uint8)
    a = np.ascontiguousarray(f.a.flat_indices(rect))
    b = np.ascontiguousarray(f.b.flat_indices(rect))
    keys = trial_keys(1, np.arange(2000))
    yield "two_arms n=16 x2000", lambda k: k.touch_indicators(
        keys, rect.lo, rect.shape, thr, within, a, b, f.k, f.negate)

    g = touch_form(EventSpec.make("crossing_v", 2, k=3, m=3))
    r = g.rect
    gw = np.ascontiguousarray(g.region.mask_in(r), dtype=np.uint8)
    yield "enumerate 16 sites", lambda k: k.enumerate_touch(
        r.shape, gw, np.ascontiguousarray(g.a.flat_indices(r)),
        np.ascontiguousarray(g.b.flat_indices(r)), g.k, g.negate)


def _same(x, y):
    if isinstance(x, tuple):
        return all(_same(u, v) for u, v in zip(x, y))
    return np.array_equal(np.asarray(x), np.asarray(y))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py = _load("_pykernels")
    cy = _load("_kernels")
    if cy is None:
        print("compiled extension not built; timing the python backend only")
    print(f"{'kernel':24s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases(py):
        tp = best_of(lambda: fn(py), args.repeat)
        if cy is None:
            print(f"{name:24s} {tp * 1e3:12.2f}")
            continue
        if not _same(fn(py), fn(cy)):
            raise SystemExit(f"backends disagree on {name}")
        tc = best_of(lambda: fn(cy), args.repeat)
        print(f"{name:24s} {tp * 1e3:12.2f} {tc * 1e3:12.2f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
