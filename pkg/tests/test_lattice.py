import numpy as np
import pytest

from percolab import lattice as L
from percolab.lattice import (Box, Boundary, Configuration, PointSet, Rect, RegionError,
                              ResourceGuardError, SiteDifference, SiteUnion, box, sample)


def test_box_sizes_and_membership():
    b = box(0, 3, d=2)
    assert b.size == len(b) == 49
    assert (3, -3) in b and (4, 0) not in b
    assert len(Boundary(b)) == 49 - 25
    assert len(box((0, 0, 0), 1)) == 27


def test_boundary_is_sup_sphere():
    b = Box((1, -2), 2)
    pts = set(Boundary(b).points())
    assert all(max(abs(z[0] - 1), abs(z[1] + 2)) == 2 for z in pts)
    assert len(pts) == 16


def test_rect_faces_and_slices():
    r = Rect((0, 0), (3, 1))
    assert r.shape == (4, 2)
    assert set(r.face(1, False).points()) == {(x, 0) for x in range(4)}
    assert set(r.face(0, True).points()) == {(3, 0), (3, 1)}
    outer = Rect((-1, -1), (4, 4))
    assert outer.contains_rect(r) and not r.contains_rect(outer)
    assert r.slices(outer) == (slice(1, 5), slice(1, 3))


def test_rect_intersect_hull():
    a, b = Rect((0, 0), (2, 2)), Rect((1, 1), (5, 3))
    assert a.intersect(b) == Rect((1, 1), (2, 2))
    assert a.hull(b) == Rect((0, 0), (5, 3))
    assert a.intersect(Rect((3, 3), (4, 4))) is None


def test_set_algebra_masks():
    b = Box((0, 0), 2)
    diff = SiteDifference(b, PointSet([(0, 0)]))
    assert len(diff) == 24 and (0, 0) not in diff
    u = SiteUnion((Box((0, 0), 1), Box((3, 0), 1)))
    assert len(u) == 18
    m = b.mask_in(Rect((-3, -3), (3, 3)))
    assert m.sum() == 25 and not m.flags.writeable


def test_threshold_exact():
    assert L.open_threshold(0) == 0
    assert L.open_threshold(1) == 1 << 64
    assert L.open_threshold("1/2") == 1 << 63
    with pytest.raises(ValueError):
        L.open_threshold(1.5)


def test_sample_reproducible_and_restriction_commutes():
    big = Box((0, 0), 10)
    c1 = sample(big, 0.5, seed=3, trial=7)
    c2 = sample(big, 0.5, seed=3, trial=7)
    assert np.array_equal(c1.open_mask(), c2.open_mask())
    small = Rect((-2, 1), (4, 5))
    c3 = sample(small, 0.5, seed=3, trial=7)
    assert np.array_equal(c1.open_mask(small), c3.open_mask())
    assert not np.array_equal(c1.open_mask(), sample(big, 0.5, 3, 8).open_mask())


def test_lazy_matches_dense():
    r = Box((5, -5), 6).rect
    dense = sample(r, 0.4, 11, 2)
    lazy = sample(r, 0.4, 11, 2, lazy=True)
    assert lazy.lazy and not dense.lazy
    for z in [(5, -5), (0, -11), (11, 1), (7, -3)]:
        assert dense.site_state(z) == lazy.site_state(z)
    assert np.array_equal(dense.open_mask(), lazy.open_mask())


def test_site_uniform_matches_kernel():
    r = Rect((-1, 2, 0), (1, 3, 2))
    u = L.site_uniforms(r, 9, 4)
    for z in r.points():
        idx = tuple(c - lo for c, lo in zip(z, r.lo))
        assert int(u[idx]) == L.site_uniform(9, 4, z)


def test_density_and_extremes():
    b = Box((0, 0), 50)
    assert sample(b, 0, 1, 0).open_mask().sum() == 0
    assert sample(b, 1, 1, 0).open_mask().all()
    frac = sample(b, 0.3, 1, 0).open_mask().mean()
    assert abs(frac - 0.3) < 0.02


def test_coupling_across_p():
    b = Box((0, 0), 20)
    lo = sample(b, 0.3, 5, 1).open_mask()
    hi = sample(b, 0.6, 5, 1).open_mask()
    assert not np.any(lo & ~hi)


def test_out_of_region_errors():
    cfg = sample(Box((0, 0), 2), 0.5, 0, 0)
    with pytest.raises(RegionError):
        cfg.site_state((3, 0))
    with pytest.raises(RegionError):
        cfg.open_mask(Rect((0, 0), (3, 3)))


def test_dense_guard():
    region = Box((0, 0), 100)
    with pytest.raises(ResourceGuardError):
        sample(region, 0.5, 0, 0, lazy=False, dense_limit=1000)
    assert sample(region, 0.5, 0, 0, dense_limit=1000).lazy


def test_from_open_sites():
    cfg = Configuration.from_open_sites(Box((0, 0), 1), [(0, 0), (1, 1)])
    assert cfg.site_state((1, 1)) and not cfg.site_state((1, 0))
    with pytest.raises(RegionError):
        Configuration.from_open_sites(Box((0, 0), 1), [(2, 0)])


def test_trial_keys_vectorized():
    ks = L.trial_keys(42, np.arange(50))
    assert [int(k) for k in ks] == [L.trial_key(42, t) for t in range(50)]
