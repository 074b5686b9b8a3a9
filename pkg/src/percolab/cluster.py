"""Cluster labeling and connectivity queries {U <-> V in W}."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._backend import kernels
from .lattice import Configuration, Point, Rect, SiteSet, as_rect, neighbours


@dataclass(frozen=True, eq=False)
class ClusterLabels:
    """Open clusters of a configuration restricted to ``region``.

    ``labels`` is laid out over ``rect`` (the bounding rectangle of
    ``region``); 0 marks closed sites and sites outside ``region``.
    """

    region: SiteSet
    rect: Rect
    labels: np.ndarray
    count: int

    def label_at(self, z: Sequence[int]) -> int:
        if tuple(z) not in self.rect:
            return 0
        return int(self.labels[tuple(c - lo for c, lo in zip(z, self.rect.lo))])

    def labels_on(self, sites: SiteSet) -> np.ndarray:
        """Distinct nonzero labels carried by the sites of ``sites``."""
        vals = self.labels.reshape(-1)[sites.flat_indices(self.rect)]
        return np.unique(vals[vals > 0])

    def cluster(self, lab: int) -> set[Point]:
        idx = np.argwhere(self.labels == lab)
        return {tuple(int(c) + lo for c, lo in zip(row, self.rect.lo)) for row in idx}

    def partition(self) -> set[frozenset]:
        return {frozenset(self.cluster(lab)) for lab in range(1, self.count + 1)}


def label(cfg: Configuration, region: SiteSet | None = None) -> ClusterLabels:
    """Cluster labels of the open sites of ``region``.

    Memoized per configuration (configurations are immutable).
    """
    region = cfg.region if region is None else region
    cache = cfg._labels
    hit = cache.get(region)
    if hit is not None:
        return hit
    rect = as_rect(region)
    active = cfg.open_mask(rect)
    if not isinstance(region, Rect):
        active = active & region.mask_in(rect)
    labels, count = kernels.label(active)
    labels.flags.writeable = False
    out = ClusterLabels(region, rect, labels, count)
    if len(cache) >= 16:
        cache.pop(next(iter(cache)))
    cache[region] = out
    return out


def clusters_touching(labels: ClusterLabels, a: SiteSet, b: SiteSet) -> int:
    """Number of distinct clusters holding an open site of ``a`` and one of ``b``."""
    return len(np.intersect1d(labels.labels_on(a), labels.labels_on(b), assume_unique=True))


def connected(cfg: Configuration, u: SiteSet, v: SiteSet, w: SiteSet) -> bool:
    """True iff an open path inside ``w`` joins an open site of ``u`` to one of ``v``.

    A single open site in both ``u`` and ``v`` counts (zero-length path).
    """
    return clusters_touching(label(cfg, w), u, v) >= 1


def grow_clusters(cfg: Configuration, sources: Iterable[Sequence[int]],
                  region: SiteSet | None = None) -> dict[Point, int]:
    """Frontier growth from ``sources`` querying site states one at a time.

    Returns ``{site: cluster id}`` for every open site reachable from an open
    source inside ``region``; ids are the rank of the first source reaching
    the cluster.  Matches :func:`label` restricted to the explored sites, but
    never materializes the region, so it suits lazy configurations.
    """
    region = cfg.region if region is None else region
    seen: dict[Point, int] = {}
    state: dict[Point, bool] = {}

    def is_open(z):
        if z not in state:
            state[z] = z in region and cfg.site_state(z)
        return state[z]

    next_id = 0
    for s in sources:
        s = tuple(s)
        if s in seen or not is_open(s):
            continue
        next_id += 1
        seen[s] = next_id
        queue = deque([s])
        while queue:
            z = queue.popleft()
            for y in neighbours(z):
                if y not in seen and is_open(y):
                    seen[y] = next_id
                    queue.append(y)
    return seen

