"""Monte Carlo estimation of event probabilities, and the exact enumeration oracle.

Trial ``t`` of stream ``seed`` always sees the same configuration, so a tally
is a pure function of ``(spec, p, seed, trial range)``.  Work is split into
fixed-size chunks of consecutive trials whose tallies are summed; chunking
does not depend on the number of worker threads, which therefore cannot
change any result.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from statistics import NormalDist

import numpy as np

from ._backend import kernels
from .events import EventSpec, TouchForm, detector, support, touch_form
from .lattice import (DEFAULT_DENSE_LIMIT, ResourceGuardError, as_rect, open_threshold, sample,
                      trial_keys)

DEFAULT_GUARD = 28
DEFAULT_CHUNK = 4096


def interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    With 0 (all) successes the lower (upper) end is exactly 0 (1) and the
    other end stays informative.
    """
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials and trials >= 1")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    n = trials
    ph = successes / n
    denom = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / denom
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom
    low = 0.0 if successes == 0 else max(0.0, min(ph, centre - half))
    high = 1.0 if successes == trials else min(1.0, max(ph, centre + half))
    return low, high


@dataclass(frozen=True)
class Estimate:
    spec: EventSpec
    p: float
    trials: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float
    confidence: float
    seed: int
    ranges: tuple = ()  # disjoint half-open trial-index ranges covered

    @classmethod
    def from_tally(cls, spec, p, successes: int, trials: int, seed: int,
                   confidence: float = 0.95, ranges: tuple = ()) -> "Estimate":
        if trials == 0:
            return cls(spec, p, 0, 0, float("nan"), 0.0, 1.0, confidence, seed, ())
        lo, hi = interval(successes, trials, confidence)
        return cls(spec, p, trials, successes, successes / trials, lo, hi, confidence, seed,
                   _normalize(ranges))

    @property
    def relative_width(self) -> float:
        """Full interval width over the point estimate (``inf`` with no successes)."""
        if self.successes == 0:
            return math.inf
        return (self.ci_high - self.ci_low) / self.p_hat

    def row(self) -> dict:
        return {"spec": str(self.spec), "d": self.spec.d, "p": self.p, "trials": self.trials,
                "successes": self.successes, "p_hat": self.p_hat, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "seed": self.seed}


def _normalize(ranges) -> tuple:
    out = []
    for a, b in sorted((int(a), int(b)) for a, b in ranges if b > a):
        if out and a < out[-1][1]:
            raise ValueError("trial ranges overlap")
        if out and a == out[-1][1]:
            out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return tuple(out)


def empty(spec: EventSpec, p, seed: int, confidence: float = 0.95) -> Estimate:
    return Estimate.from_tally(spec, p, 0, 0, seed, confidence)


def merge(a: Estimate, b: Estimate) -> Estimate:
    """Sum two tallies over disjoint trial ranges of the same stream."""
    if (a.spec, a.p, a.seed, a.confidence) != (b.spec, b.p, b.seed, b.confidence):
        raise ValueError("can only merge estimates of the same spec, p, seed and confidence")
    return Estimate.from_tally(a.spec, a.p, a.successes + b.successes, a.trials + b.trials,
                               a.seed, a.confidence, a.ranges + b.ranges)


# -- Monte Carlo ---------------------------------------------------------------

class _TouchPlan:
    """Precomputed arrays for the batched cluster-touching kernel."""

    def __init__(self, form: TouchForm, p):
        rect = form.rect
        self.lo, self.shape = rect.lo, rect.shape
        self.within = np.ascontiguousarray(form.region.mask_in(rect), dtype=np.uint8)
        self.a = np.ascontiguousarray(form.a.flat_indices(rect))
        self.b = np.ascontiguousarray(form.b.flat_indices(rect))
        self.k, self.negate = form.k, form.negate
        self.thr = open_threshold(p)

    def indicators(self, seed: int, start: int, stop: int) -> np.ndarray:
        keys = trial_keys(seed, np.arange(start, stop))
        hits = kernels.touch_indicators(keys, self.lo, self.shape, self.thr, self.within,
                                        self.a, self.b, self.k, self.negate)
        return np.asarray(hits, dtype=bool)

    def count(self, seed: int, start: int, stop: int) -> int:
        return int(np.count_nonzero(self.indicators(seed, start, stop)))


class _DetectorPlan:
    """Per-trial path: sample the support and call the detector."""

    def __init__(self, spec: EventSpec, p, lazy: bool):
        self.region = as_rect(support(spec))
        self.pred = detector(spec)
        self.p, self.lazy = p, lazy

    def indicators(self, seed: int, start: int, stop: int) -> np.ndarray:
        out = np.zeros(stop - start, dtype=bool)
        for i, t in enumerate(range(start, stop)):
            out[i] = self.pred(sample(self.region, self.p, seed, t, lazy=self.lazy))
        return out

    def count(self, seed: int, start: int, stop: int) -> int:
        return int(np.count_nonzero(self.indicators(seed, start, stop)))


def _plan(spec: EventSpec, p, lazy: bool, dense_limit: int):
    size = as_rect(support(spec)).size
    if size > dense_limit and not lazy:
        raise ResourceGuardError(
            f"support of {spec} has {size} sites (> {dense_limit}); enable lazy mode")
    form = touch_form(spec)
    if form is not None and not lazy:
        return _TouchPlan(form, p)
    return _DetectorPlan(spec, p, lazy)


def tally(spec: EventSpec, p, seed: int, start: int, stop: int, workers: int = 1,
          chunk: int = DEFAULT_CHUNK, lazy: bool = False,
          dense_limit: int = DEFAULT_DENSE_LIMIT) -> int:
    """Number of trials in ``[start, stop)`` on which the event occurs."""
    plan = _plan(spec, p, lazy, dense_limit)
    bounds = [(a, min(a + chunk, stop)) for a in range(start, stop, chunk)]
    if workers <= 1 or len(bounds) <= 1:
        return sum(plan.count(seed, a, b) for a, b in bounds)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(lambda ab: plan.count(seed, *ab), bounds))


def indicators(spec: EventSpec, p, seed: int, start: int, stop: int, lazy: bool = False,
               dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    """Per-trial outcomes of ``spec`` for trials ``[start, stop)``, as a bool array.

    Trial ``t`` sees the same site uniforms at every ``p`` and for every event,
    so vectors from different calls are coupled entry by entry.
    """
    return _plan(spec, p, lazy, dense_limit).indicators(seed, start, stop)


def estimate_event(spec: EventSpec, p, trials: int, seed: int = 0, confidence: float = 0.95,
                   workers: int = 1, start: int = 0, chunk: int = DEFAULT_CHUNK,
                   lazy: bool = False, dense_limit: int = DEFAULT_DENSE_LIMIT) -> Estimate:
    """Estimate ``P_p(spec)`` from trials ``start, ..., start + trials - 1`` of stream ``seed``.

    Parameters
    ----------
    workers : int
        Threads evaluating chunks concurrently.  Never affects the result.
    lazy : bool
        Sample on demand instead of materializing the support; required once
        the support exceeds ``dense_limit`` sites.

    Raises
    ------
    ResourceGuardError
        If the support is larger than ``dense_limit`` and ``lazy`` is off.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    hits = tally(spec, p, seed, start, start + trials, workers, chunk, lazy, dense_limit)
    return Estimate.from_tally(spec, p, hits, trials, seed, confidence,
                               ((start, start + trials),))


def estimate_until(spec: EventSpec, p, target: float, cap: int, seed: int = 0,
                   confidence: float = 0.95, initial: int = 1000, workers: int = 1,
                   **kw) -> Estimate:
    """Double the trial count until the relative CI width reaches ``target`` or ``cap``.

    Each round extends the previous trial range, so the result equals a
    single :func:`estimate_event` call with the final trial count.
    """
    if target <= 0 or cap < 1:
        raise ValueError("need target > 0 and cap >= 1")
    est = estimate_event(spec, p, min(initial, cap), seed, confidence, workers, **kw)
    while est.relative_width > target and est.trials < cap:
        # aim straight for the target once successes give a usable rate
        if est.successes >= 10:
            need = math.ceil(est.trials * (est.relative_width / target) ** 2 * 1.05)
            more = max(need - est.trials, est.trials // 4)
        else:
            more = est.trials
        more = min(more, cap - est.trials)
        est = merge(est, estimate_event(spec, p, more, seed, confidence, workers,
                                        start=est.trials, **kw))
    return est


# -- exact oracle --------------------------------------------------------------

def support_size(spec: EventSpec) -> int:
    form = touch_form(spec)
    return len(form.region) if form is not None else len(support(spec))


def exact_counts(spec: EventSpec, guard: int = DEFAULT_GUARD) -> list[int]:
    """``c[j]`` = number of configurations of the support with ``j`` open sites where the event occurs."""
    form = touch_form(spec)
    size = support_size(spec)
    if form is None or size > guard:
        raise ResourceGuardError(f"support of {spec} has {size} sites; enumeration guard is {guard}")
    rect = form.rect
    within = np.ascontiguousarray(form.region.mask_in(rect), dtype=np.uint8)
    counts = kernels.enumerate_touch(rect.shape, within,
                                     np.ascontiguousarray(form.a.flat_indices(rect)),
                                     np.ascontiguousarray(form.b.flat_indices(rect)),
                                     form.k, form.negate)
    return [int(c) for c in counts]


def exact_probability(spec: EventSpec, p, guard: int = DEFAULT_GUARD) -> Fraction:
    """Exact ``P_p(spec)`` as a rational, summing over every configuration of the support.

    ``p`` is converted with :class:`fractions.Fraction`, so pass ``"1/2"`` or
    ``Fraction(1, 2)`` to avoid binary floating-point values.
    """
    q = Fraction(p)
    if not 0 <= q <= 1:
        raise ValueError("p must lie in [0, 1]")
    counts = exact_counts(spec, guard)
    s = len(counts) - 1
    return sum((c * q**j * (1 - q) ** (s - j) for j, c in enumerate(counts) if c), Fraction(0))


def with_confidence(est: Estimate, confidence: float) -> Estimate:
    lo, hi = interval(est.successes, est.trials, confidence)
    return replace(est, ci_low=lo, ci_high=hi, confidence=confidence)
