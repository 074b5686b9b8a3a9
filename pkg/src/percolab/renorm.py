"""Coarse-grained good-point field.

A coarse site ``x`` lives on the block ``Lambda(nx; n)``.  It is *good* when
some open site of its block reaches the boundary of ``Lambda(nx; 16Mn)``
(``W(x)`` nonempty) and the annulus from ``Lambda(nx; 4n)`` to the boundary
of ``Lambda(nx; 4Mn)`` has at most one crossing cluster inside
``Lambda(nx; 4Mn)``.  Goodness reads only the sites of ``Lambda(nx; 16Mn)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cluster import clusters_touching, label
from .events import a2, one_arm
from .lattice import (Box, Boundary, Configuration, Point, ResourceGuardError, SiteUnion,
                      origin, sample)
from .verify import Verdict


def _center(x: Sequence[int], n: int) -> Point:
    return tuple(n * c for c in x)


def good_support(d: int, x: Sequence[int], n: int, M: int) -> Box:
    return Box(_center(x, n), 16 * M * n)


def w_set(cfg: Configuration, x: Sequence[int], n: int, M: int) -> set[Point]:
    """Open sites of ``Lambda(nx; n)`` joined to the boundary of ``Lambda(nx; 16Mn)`` inside that box."""
    c = _center(x, n)
    outer = Box(c, 16 * M * n)
    labs = label(cfg, outer)
    reach = labs.labels_on(Boundary(outer))
    block = Box(c, n)
    sub = labs.labels[block.rect.slices(outer.rect)]
    idx = np.argwhere(np.isin(sub, reach) & (sub > 0))
    return {tuple(int(i) + lo for i, lo in zip(row, block.rect.lo)) for row in idx}


def crossing_clusters(cfg: Configuration, x: Sequence[int], n: int, M: int) -> int:
    """Clusters of ``Lambda(nx; 4Mn)`` meeting both ``Lambda(nx; 4n)`` and its boundary."""
    c = _center(x, n)
    outer = Box(c, 4 * M * n)
    return clusters_touching(label(cfg, outer), Box(c, 4 * n), Boundary(outer))


def good(cfg: Configuration, x: Sequence[int], n: int, M: int) -> bool:
    if n < 1 or M < 2:
        raise ValueError("need n >= 1 and M >= 2")
    c = _center(x, n)
    outer = Box(c, 16 * M * n)
    if clusters_touching(label(cfg, outer), Box(c, n), Boundary(outer)) == 0:
        return False
    return crossing_clusters(cfg, x, n, M) <= 1


def good_direct(cfg: Configuration, x: Sequence[int], n: int, M: int) -> bool:
    """Second route to :func:`good`: W(x) nonempty and no translated A2(4n, 4Mn)."""
    c = _center(x, n)
    return bool(w_set(cfg, x, n, M)) and not a2(cfg, 4 * n, 4 * M * n, center=c)


@dataclass(frozen=True, eq=False)
class GoodField:
    K: int
    n: int
    M: int
    good: np.ndarray  # indexed by x + K
    cfg: Configuration

    @property
    def density(self) -> float:
        return float(self.good.mean())

    def at(self, x: Sequence[int]) -> bool:
        return bool(self.good[tuple(c + self.K for c in x)])


def field_region(d: int, K: int, n: int, M: int) -> Box:
    return Box(origin(d), n * K + 16 * M * n)


def good_field(cfg: Configuration, K: int, n: int, M: int) -> GoodField:
    d = cfg.d
    need = field_region(d, K, n, M)
    if not cfg.region.contains_rect(need.rect):
        raise ValueError(f"window {need.rect} exceeds configuration region")
    out = np.zeros((2 * K + 1,) * d, dtype=bool)
    for x in itertools.product(range(-K, K + 1), repeat=d):
        out[tuple(c + K for c in x)] = good(cfg, x, n, M)
    return GoodField(K, n, M, out, cfg)


def sample_field(d: int, K: int, n: int, M: int, p, seed: int, trial: int,
                 lazy: bool | None = None, dense_limit: int = 10**8) -> GoodField:
    region = field_region(d, K, n, M)
    if lazy is False and region.size > dense_limit:
        raise ResourceGuardError(f"good-field window of {region.size} sites exceeds dense limit")
    return good_field(sample(region, p, seed, trial, lazy=lazy, dense_limit=dense_limit), K, n, M)


def good_path_gluing(cfg: Configuration, path: Sequence[Sequence[int]], n: int, M: int) -> Verdict:
    """If every coarse site on ``path`` is good, all their W-sets lie in one open cluster.

    Connectivity is taken inside the union of the 16Mn-boxes of the path.
    """
    path = [tuple(x) for x in path]
    for x, y in zip(path, path[1:]):
        if sum(abs(a - b) for a, b in zip(x, y)) != 1:
            raise ValueError(f"{x} and {y} are not coarse nearest neighbours")
    if not all(good(cfg, x, n, M) for x in path):
        return Verdict.vacuous()
    union = SiteUnion(tuple(good_support(cfg.d, x, n, M) for x in path))
    labs = label(cfg, union)
    seen = set()
    for x in path:
        for z in w_set(cfg, x, n, M):
            seen.add(labs.label_at(z))
    if len(seen) == 1 and 0 not in seen:
        return Verdict.holds()
    return Verdict.violation(path=path, n=n, M=M, labels=sorted(seen),
                             seed=cfg.seed, trial=cfg.trial, p=cfg.p)


def resample_outside(cfg: Configuration, keep: Box, seed: int, trial: int) -> Configuration:
    """Copy of ``cfg`` whose sites outside ``keep`` come from another trial stream."""
    other = sample(cfg.region, cfg.p, seed, trial)
    arr = other.open_mask().copy()
    arr[keep.rect.slices(cfg.region)] = cfg.open_mask(keep.rect)
    return Configuration.from_array(cfg.region, arr)


def locality_check(d: int, n: int, M: int, p, seed: int, trials: int,
                   x: Sequence[int] | None = None, margin: int | None = None) -> int:
    """Number of trials where good(x) changes after re-randomizing outside its support."""
    x = tuple(x) if x is not None else origin(d)
    sup = good_support(d, x, n, M)
    margin = 2 * n if margin is None else margin
    region = Box(sup.center, sup.radius + margin)
    changed = 0
    for t in range(trials):
        cfg = sample(region, p, seed, t)
        alt = resample_outside(cfg, sup, seed ^ 0x5EED, t)
        if good(cfg, x, n, M) != good(alt, x, n, M):
            changed += 1
    return changed


def pair_covariance(d: int, n: int, M: int, p, seed: int, trials: int,
                    distance: int | None = None) -> tuple[float, float]:
    """Empirical covariance of good(0) and good(y), y = distance * e_1, and its standard error.

    ``distance`` is in coarse units and defaults to ``32M + 1``, beyond which
    the two supports are disjoint.  Both sites are read from one lazy
    configuration spanning the pair.
    """
    distance = 32 * M + 1 if distance is None else distance
    x0 = origin(d)
    y = (distance,) + (0,) * (d - 1)
    bx, by = good_support(d, x0, n, M), good_support(d, y, n, M)
    hull = bx.rect.hull(by.rect)
    gx = np.zeros(trials)
    gy = np.zeros(trials)
    for t in range(trials):
        cfg = sample(hull, p, seed, t, lazy=True)
        gx[t] = good(_dense_on(cfg, bx), x0, n, M)
        gy[t] = good(_dense_on(cfg, by), y, n, M)
    prod = (gx - gx.mean()) * (gy - gy.mean())
    cov = float(prod.sum() / trials)
    se = float(prod.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
    return cov, se


def _dense_on(cfg: Configuration, b: Box) -> Configuration:
    return Configuration(b.rect, cfg.p, cfg.seed, cfg.trial, cfg.open_mask(b.rect).copy())


def one_arm_route(cfg: Configuration, x: Sequence[int], n: int, M: int) -> bool:
    """W(x) nonempty expressed as the one-arm event of the translated boxes."""
    return one_arm(cfg, n, 16 * M * n, center=_center(x, n))

