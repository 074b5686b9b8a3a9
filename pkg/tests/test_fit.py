from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from percolab.fit import (CONSISTENT, INCONCLUSIVE, INCONSISTENT, exponent_bounds, extremal_pairs,
                          fit_power_law, ratio_report, schedule)


def test_schedule_examples():
    assert schedule(1, 8, 2) == [1, 2, 4, 8]
    assert schedule(3, 3, 2) == [3]
    s = schedule(1, 100, 16)
    assert s[0] == 1 and s[-1] == 100
    assert all(b / a <= 16 <= 8 * 2 for a, b in zip(s, s[1:]))
    assert schedule(2, 50, Fraction(3, 2))[-1] == 50
    with pytest.raises(ValueError):
        schedule(4, 2, 2)
    with pytest.raises(ValueError):
        schedule(1, 4, 1)


def test_exponent_bounds_values():
    assert exponent_bounds(2) == (Fraction(11, 21), 10, 10)
    assert exponent_bounds(3) == (Fraction(24, 46), 19, 22)
    lo, up, _ = exponent_bounds(7)
    assert lo < 4 < up
    for d in range(2, 30):
        lo, up, weak = exponent_bounds(d)
        assert lo < 1 < up <= weak
    with pytest.raises(ValueError):
        exponent_bounds(1)


def test_exact_power_law():
    r = fit_power_law([(n, n ** -2.0, 0) for n in (2, 4, 8, 16)])
    assert abs(r.alpha_hat - 2) < 1e-12 and r.stderr_alpha < 1e-10
    r = fit_power_law([(n, 0.5, 0.01) for n in (2, 4, 8, 16)])
    assert abs(r.alpha_hat) < 1e-12 and abs(r.c_hat - 0.5) < 1e-12


def test_scale_equivariance():
    rng = np.random.default_rng(0)
    pts = [(n, n ** -1.3 * np.exp(rng.normal(0, 0.05)), 0.01 * n ** -1.3) for n in (2, 4, 8, 16, 32)]
    a = fit_power_law(pts)
    b = fit_power_law([(n, 7 * p, 7 * s) for n, p, s in pts])
    assert abs(a.alpha_hat - b.alpha_hat) < 1e-10
    assert abs(b.c_hat / a.c_hat - 7) < 1e-9


def test_stderr_calibration():
    rng = np.random.default_rng(99)
    ns = np.array([2, 4, 8, 16, 32])
    alpha, s = 1.25, 0.1
    hits = 0
    for _ in range(1000):
        ph = ns ** -alpha * np.exp(rng.normal(0, s, size=len(ns)))
        r = fit_power_law(list(zip(ns, ph, s * ph)))
        hits += abs(r.alpha_hat - alpha) <= 1.959964 * r.stderr_alpha
    assert 930 <= hits <= 970


def test_zero_points_excluded_and_errors():
    r = fit_power_law([(2, 0.2, 0.01), (4, 0.1, 0.01), (8, 0.05, 0.01), (16, 0.0, 0.0, 0.003)])
    assert len(r.points) == 3 and r.excluded == [(16.0, 0.003)]
    with pytest.raises(ValueError):
        fit_power_law([(2, 0.2, 0.01), (4, 0.0, 0.0), (8, 0.05, 0.01)])
    with pytest.raises(ValueError):
        fit_power_law([(4, 0.2, 0.01), (4, 0.1, 0.01), (4, 0.05, 0.01)])


def test_verdicts():
    r = fit_power_law([(n, n ** -1.2, 1e-4 * n ** -1.2) for n in (4, 8, 16, 32)], d=2)
    assert r.verdicts == {"lower": CONSISTENT, "upper": CONSISTENT, "weaker_upper": CONSISTENT}
    r = fit_power_law([(n, n ** -0.1, 1e-4 * n ** -0.1) for n in (4, 8, 16, 32)], d=2)
    assert r.verdicts["lower"] == INCONSISTENT
    noisy = fit_power_law([(4, 0.5, 0.3), (8, 0.45, 0.3), (16, 0.4, 0.3)], d=2)
    assert noisy.verdicts["lower"] == INCONCLUSIVE
    assert r.to_dict()["lower_bound"] == pytest.approx(11 / 21)


def _e(p, lo, hi):
    return SimpleNamespace(p_hat=p, ci_low=lo, ci_high=hi)


def test_ratio_report():
    ns = [2, 4, 8]
    d = 2
    # R(n) = a2 * pair / (n^6 * two_arms) held constant at 1/2
    a2 = [_e(0.5, 0.4, 0.6)] * 3
    pair = [_e(0.5, 0.4, 0.6)] * 3
    ta = [_e(0.5 / n ** 6, 0.4 / n ** 6, 0.6 / n ** 6) for n in ns]
    rep = ratio_report(ns, d, a2, ta, pair)
    assert [pt.flag for pt in rep] == ["ok"] * 3
    assert all(abs(pt.ratio - 0.5) < 1e-12 and pt.ci_low < pt.ratio < pt.ci_high for pt in rep)
    ta[1] = _e(0.0, 0.0, 0.01)
    assert ratio_report(ns, d, a2, ta, pair)[1].flag == "inconclusive"


def test_extremal_pairs_on_sphere():
    for d, n in [(2, 3), (3, 2)]:
        for x, y in extremal_pairs(d, n):
            assert max(map(abs, x)) == n == max(map(abs, y))
            assert tuple(-c for c in x) == y
