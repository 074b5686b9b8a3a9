"""The compiled kernels and the numpy fallback must agree bit for bit."""
import numpy as np
import pytest

from percolab import _pykernels as py
from percolab._backend import BACKEND, kernels
from percolab.estimate import exact_counts
from percolab.events import EventSpec, parse_event, touch_form
from percolab.lattice import open_threshold, trial_key, trial_keys

from oracles import bfs_partition, labels_partition

cy = pytest.importorskip("percolab._kernels")


def test_backend_selected():
    assert BACKEND in ("cython", "python")
    assert kernels.NAME == BACKEND


@pytest.mark.parametrize("shape,lo", [((7,), (-3,)), ((9, 5), (0, -2)), ((4, 5, 6), (1, 2, 3)),
                                      ((3, 2, 3, 2), (-1, 0, 1, 0))])
def test_uniforms_identical(shape, lo):
    key = trial_key(17, 3)
    assert np.array_equal(py.uniforms(key, lo, shape), cy.uniforms(key, lo, shape))


@pytest.mark.parametrize("p", [0, 0.3, 0.5927, 1])
def test_sample_identical(p):
    key = trial_key(2, 1)
    thr = open_threshold(p)
    assert np.array_equal(py.sample(key, (0, 0), (33, 17), thr), cy.sample(key, (0, 0), (33, 17), thr))


def test_labels_identical_and_match_bfs():
    rng = np.random.default_rng(0)
    for d in (1, 2, 3, 4):
        for _ in range(15):
            shape = tuple(rng.integers(1, 9 if d < 4 else 5, size=d))
            act = rng.random(shape) < rng.uniform(0.2, 0.8)
            l1, k1 = py.label(act)
            l2, k2 = cy.label(act)
            assert k1 == k2 and np.array_equal(l1, l2)
            assert labels_partition(l2) == bfs_partition(act)


def test_labels_first_appearance_order():
    act = np.array([[0, 1, 0], [1, 0, 1], [1, 1, 1]], dtype=bool)
    lab, k = cy.label(act)
    assert k == 2
    assert lab[0, 1] == 1 and lab[1, 0] == 2 and lab[2, 2] == 2


@pytest.mark.parametrize("text", ["two_arms(d=2,n=3)", "a2(d=2,m=1,n=4)",
                                  "crossing_v(d=3,k=2,m=3)", "e1(d=2,n=1,M=2)"])
def test_touch_indicators_identical(text):
    f = touch_form(parse_event(text))
    r = f.rect
    w = np.ascontiguousarray(f.region.mask_in(r), dtype=np.uint8)
    a = np.ascontiguousarray(f.a.flat_indices(r))
    b = np.ascontiguousarray(f.b.flat_indices(r))
    keys = trial_keys(5, np.arange(300))
    thr = open_threshold(0.55)
    x = py.touch_indicators(keys, r.lo, r.shape, thr, w, a, b, f.k, f.negate)
    y = cy.touch_indicators(keys, r.lo, r.shape, thr, w, a, b, f.k, f.negate)
    assert np.array_equal(x, y)


@pytest.mark.parametrize("spec", [EventSpec.make("two_arms", 2, n=1),
                                  EventSpec.make("crossing_v", 2, k=2, m=3),
                                  EventSpec.make("crossing_v", 3, k=1, m=1),
                                  EventSpec.make("one_arm", 2, m=0, n=1),
                                  EventSpec.make("point_pair", 2, x=(1, 1), y=(-1, -1), r=1)])
def test_enumeration_identical(spec, monkeypatch):
    import percolab.estimate as est
    monkeypatch.setattr(est, "kernels", py)
    slow = exact_counts(spec)
    monkeypatch.setattr(est, "kernels", cy)
    assert exact_counts(spec) == slow
