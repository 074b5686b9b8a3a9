import math
from fractions import Fraction
from functools import lru_cache
from statistics import NormalDist

import numpy as np
import pytest

from percolab import estimate as S
from percolab.estimate import (Estimate, empty, estimate_event, estimate_until, exact_probability,
                               indicators, interval, merge)
from percolab.events import EventSpec, evaluate, support
from percolab.lattice import Configuration, ResourceGuardError, as_rect

CROSS = EventSpec.make("crossing_v", 2, k=1, m=1)
TWO = EventSpec.make("two_arms", 2, n=1)


def _within(est, exact, level=0.999):
    z = NormalDist().inv_cdf(0.5 + level / 2)
    q = float(exact)
    return abs(est.p_hat - q) <= z * math.sqrt(q * (1 - q) / est.trials)


def test_interval_degenerate():
    assert interval(0, 50)[0] == 0.0 and interval(0, 50)[1] > 0
    assert interval(50, 50)[1] == 1.0 and interval(50, 50)[0] < 1
    lo, hi = interval(30, 100)
    assert lo < 0.3 < hi
    with pytest.raises(ValueError):
        interval(5, 3)
    with pytest.raises(ValueError):
        interval(1, 3, confidence=1.0)


def test_interval_coverage():
    rng = np.random.default_rng(2024)
    n, p = 200, 0.3
    ci = lru_cache(maxsize=None)(lambda k: interval(k, n, 0.95))
    draws = rng.binomial(n, p, size=10_000)
    cover = np.mean([ci(int(k))[0] <= p <= ci(int(k))[1] for k in draws])
    assert 0.94 <= cover <= 0.96


def test_trivial_estimates():
    assert estimate_event(CROSS, 1, 100).p_hat == 1
    assert estimate_event(TWO, 0, 100).p_hat == 0


def test_crossing_agrees_with_seven_sixteenths():
    est = estimate_event(CROSS, 0.5, 100_000, seed=11)
    assert _within(est, Fraction(7, 16))


def test_two_arms_agrees_with_oracle():
    q = exact_probability(TWO, "1/2")
    assert _within(estimate_event(TWO, 0.5, 100_000, seed=12), q)


def test_exact_at_p1_matches_detector():
    for spec in [CROSS, TWO, EventSpec.make("one_arm", 2, m=0, n=2),
                 EventSpec.make("crossing_v", 3, k=1, m=1)]:
        r = as_rect(support(spec))
        for value, p in ((True, 1), (False, 0)):
            cfg = Configuration.from_array(r, np.full(r.shape, value))
            assert exact_probability(spec, p) == int(evaluate(spec, cfg))


def test_exact_guard():
    with pytest.raises(ResourceGuardError):
        exact_probability(EventSpec.make("two_arms", 2, n=3), "1/2")
    with pytest.raises(ResourceGuardError):
        exact_probability(EventSpec.make("good", 2, n=1, M=2), "1/2")
    with pytest.raises(ResourceGuardError):
        exact_probability(CROSS, "1/2", guard=3)


def test_merge_identity_commutative_and_shards():
    x = estimate_event(TWO, 0.6, 1000, seed=4)
    assert merge(x, empty(TWO, 0.6, 4)) == x
    a = estimate_event(TWO, 0.6, 500, seed=4)
    b = estimate_event(TWO, 0.6, 500, seed=4, start=500)
    assert merge(a, b) == merge(b, a) == x
    whole = estimate_event(CROSS, 0.5, 10_000, seed=9)
    parts = [estimate_event(CROSS, 0.5, 1000, seed=9, start=1000 * i) for i in range(10)]
    acc = parts[0]
    for e in parts[1:]:
        acc = merge(acc, e)
    assert (acc.successes, acc.trials, acc.ranges) == (whole.successes, whole.trials, whole.ranges)


def test_merge_rejects_mismatch_and_overlap():
    a = estimate_event(TWO, 0.6, 100, seed=4)
    with pytest.raises(ValueError):
        merge(a, estimate_event(CROSS, 0.6, 100, seed=4))
    with pytest.raises(ValueError):
        merge(a, estimate_event(TWO, 0.5, 100, seed=4))
    with pytest.raises(ValueError):
        merge(a, a)


def test_workers_and_chunking_do_not_matter():
    spec = EventSpec.make("two_arms", 2, n=4)
    ref = estimate_event(spec, 0.59, 5000, seed=3, workers=1)
    for workers, chunk in [(4, 4096), (16, 300), (3, 1)]:
        other = estimate_event(spec, 0.59, 5000, seed=3, workers=workers, chunk=chunk)
        assert other == ref


def test_batch_and_detector_paths_agree():
    for spec in [EventSpec.make("two_arms", 2, n=5), EventSpec.make("f2", 2, n=1, M=2),
                 EventSpec.make("point_pair", 2, x=(2, 0), y=(-2, 0), r=2)]:
        fast = S.tally(spec, 0.6, 8, 0, 400)
        slow = S.tally(spec, 0.6, 8, 0, 400, lazy=True)
        assert fast == slow


def test_support_guard_without_lazy():
    spec = EventSpec.make("two_arms", 2, n=200)
    with pytest.raises(ResourceGuardError):
        estimate_event(spec, 0.5, 1, dense_limit=1000)
    est = estimate_event(spec, 0.5, 2, dense_limit=1000, lazy=True)
    assert est.trials == 2


def test_estimate_until_matches_single_run():
    spec = EventSpec.make("two_arms", 2, n=4)
    est = estimate_until(spec, 0.59, 0.3, 10**6, seed=5, initial=500)
    assert est.relative_width <= 0.3
    same = estimate_event(spec, 0.59, est.trials, seed=5)
    assert (est.successes, est.trials) == (same.successes, same.trials)
    capped = estimate_until(spec, 0.59, 1e-6, 2000, seed=5, initial=500)
    assert capped.trials == 2000


def test_estimate_fields():
    e = estimate_event(TWO, 0.5, 300, seed=1)
    assert isinstance(e, Estimate)
    assert 0 <= e.successes <= e.trials and e.p_hat == e.successes / e.trials
    assert e.ci_low <= e.p_hat <= e.ci_high
    with pytest.raises(ValueError):
        estimate_event(TWO, 0.5, 0)


def test_indicators_match_tally_and_detector():
    spec = EventSpec.make("two_arms", 2, n=3)
    fast = indicators(spec, 0.6, 2, 100, 400)
    slow = indicators(spec, 0.6, 2, 100, 400, lazy=True)
    assert fast.dtype == bool and fast.shape == (300,)
    assert np.array_equal(fast, slow)
    assert int(fast.sum()) == S.tally(spec, 0.6, 2, 100, 400)
