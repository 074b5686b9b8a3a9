"""Lattice geometry and reproducible Bernoulli site configurations.

Site states are a pure function of ``(seed, trial, coordinates, p)``: each site
gets one 64-bit uniform from a counter-based hash, and the site is open iff
that uniform is below ``floor(p * 2**64)``.  Dense and lazy configurations
therefore agree everywhere, restriction to a sub-region commutes with
sampling, and the same uniforms couple configurations across values of ``p``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._backend import kernels

M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_SEED_SALT = 0x5851F42D4C957F2D
_COORD = 0xD6E8FEB86659FD93

DEFAULT_DENSE_LIMIT = 10**8

Point = tuple[int, ...]


class RegionError(ValueError):
    """A query or region falls outside the configuration's region."""


class ResourceGuardError(RuntimeError):
    """A request would exceed a configured memory or enumeration guard."""


# -- hashing ---------------------------------------------------------------

def mix64(z: int) -> int:
    z &= M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return z ^ (z >> 31)


def trial_key(seed: int, trial: int) -> int:
    """Per-trial stream key; every site uniform of the trial derives from it."""
    k = mix64((seed & M64) ^ _SEED_SALT)
    return mix64(k + ((trial + 1) * _GOLDEN))


def trial_keys(seed: int, trials: Sequence[int] | np.ndarray) -> np.ndarray:
    """Vectorized :func:`trial_key` over an array of trial indices."""
    t = np.asarray(trials, dtype=np.int64).astype(np.uint64)
    k = np.uint64(mix64((seed & M64) ^ _SEED_SALT))
    with np.errstate(over="ignore"):
        return _vmix64(k + (t + np.uint64(1)) * np.uint64(_GOLDEN))


def _vmix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def site_uniform(seed: int, trial: int, z: Sequence[int]) -> int:
    h = trial_key(seed, trial)
    for c in z:
        h = mix64(h ^ ((int(c) * _COORD) & M64))
    return h


def open_threshold(p) -> int:
    """Exact integer threshold ``floor(p * 2**64)``; ``2**64`` means always open."""
    fp = Fraction(p)
    if not 0 <= fp <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return (fp.numerator << 64) // fp.denominator


# -- geometry --------------------------------------------------------------

class SiteSet:
    """Finite set of lattice sites.

    Subclasses are frozen dataclasses, so they hash and can key the mask cache.
    """

    d: int

    def bounding_rect(self) -> "Rect":
        raise NotImplementedError

    def mask_in(self, rect: "Rect") -> np.ndarray:
        """Read-only boolean array over ``rect`` marking the sites of this set."""
        return _mask(self, rect)

    def flat_indices(self, rect: "Rect") -> np.ndarray:
        return _flat(self, rect)

    def _build_mask(self, rect: "Rect") -> np.ndarray:
        raise NotImplementedError

    def points(self) -> Iterator[Point]:
        rect = self.bounding_rect()
        m = self.mask_in(rect)
        for idx in zip(*np.nonzero(m)):
            yield tuple(int(i) + lo for i, lo in zip(idx, rect.lo))

    def __len__(self) -> int:
        return int(self.mask_in(self.bounding_rect()).sum())

    def __or__(self, other: "SiteSet") -> "SiteUnion":
        return SiteUnion((self, other))


@lru_cache(maxsize=4096)
def _mask(sites: SiteSet, rect: "Rect") -> np.ndarray:
    if sites.d != rect.d:
        raise ValueError("dimension mismatch")
    m = sites._build_mask(rect)
    m.flags.writeable = False
    return m


@lru_cache(maxsize=4096)
def _flat(sites: SiteSet, rect: "Rect") -> np.ndarray:
    f = np.flatnonzero(_mask(sites, rect)).astype(np.int64)
    f.flags.writeable = False
    return f


@dataclass(frozen=True)
class Rect(SiteSet):
    """Product of closed integer intervals ``[lo[i], hi[i]]``."""

    lo: Point
    hi: Point

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(int(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(int(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("lo and hi must be non-empty and of equal length")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"empty rectangle {self.lo}..{self.hi}")

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=object))

    def __len__(self) -> int:
        return self.size

    def __contains__(self, z) -> bool:
        return len(z) == self.d and all(a <= c <= b for a, c, b in zip(self.lo, z, self.hi))

    def contains_rect(self, other: "Rect") -> bool:
        return all(a <= c and d_ <= b for a, b, c, d_ in zip(self.lo, self.hi, other.lo, other.hi))

    def bounding_rect(self) -> "Rect":
        return self

    def intersect(self, other: "Rect") -> "Rect | None":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(a > b for a, b in zip(lo, hi)):
            return None
        return Rect(lo, hi)

    def hull(self, other: "Rect") -> "Rect":
        return Rect(tuple(map(min, self.lo, other.lo)), tuple(map(max, self.hi, other.hi)))

    def translate(self, v: Sequence[int]) -> "Rect":
        return Rect(tuple(a + c for a, c in zip(self.lo, v)), tuple(b + c for b, c in zip(self.hi, v)))

    def face(self, axis: int, upper: bool) -> "Rect":
        """The layer of sites with coordinate ``axis`` at its max (``upper``) or min."""
        c = self.hi[axis] if upper else self.lo[axis]
        lo = list(self.lo)
        hi = list(self.hi)
        lo[axis] = hi[axis] = c
        return Rect(tuple(lo), tuple(hi))

    def slices(self, within: "Rect") -> tuple[slice, ...]:
        """Index slices of this rectangle inside an array laid out over ``within``."""
        return tuple(slice(a - w, b - w + 1) for a, b, w in zip(self.lo, self.hi, within.lo))

    def points(self) -> Iterator[Point]:
        return itertools.product(*(range(a, b + 1) for a, b in zip(self.lo, self.hi)))

    def _build_mask(self, rect: "Rect") -> np.ndarray:
        m = np.zeros(rect.shape, dtype=bool)
        inter = self.intersect(rect)
        if inter is not None:
            m[inter.slices(rect)] = True
        return m


@dataclass(frozen=True)
class Box(SiteSet):
    """Sup-norm ball ``{z : ||z - center||_inf <= radius}``."""

    center: Point
    radius: int

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(int(v) for v in self.center))
        if self.radius < 0:
            raise ValueError("radius must be non-negative")

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def rect(self) -> Rect:
        r = self.radius
        return Rect(tuple(c - r for c in self.center), tuple(c + r for c in self.center))

    @property
    def size(self) -> int:
        return (2 * self.radius + 1) ** self.d

    def __len__(self) -> int:
        return self.size

    def __contains__(self, z) -> bool:
        return sup_dist(z, self.center) <= self.radius

    def contains_box(self, other: "Box") -> bool:
        return sup_dist(self.center, other.center) + other.radius <= self.radius

    def bounding_rect(self) -> Rect:
        return self.rect

    def boundary(self) -> "Boundary":
        return Boundary(self)

    def points(self) -> Iterator[Point]:
        return self.rect.points()

    def _build_mask(self, rect: Rect) -> np.ndarray:
        return self.rect._build_mask(rect)


@dataclass(frozen=True)
class Boundary(SiteSet):
    """Sup-norm sphere: sites of ``box`` at distance exactly ``box.radius`` from its center."""

    box: Box

    @property
    def d(self) -> int:
        return self.box.d

    def bounding_rect(self) -> Rect:
        return self.box.rect

    def __contains__(self, z) -> bool:
        return sup_dist(z, self.box.center) == self.box.radius

    def _build_mask(self, rect: Rect) -> np.ndarray:
        m = self.box.rect._build_mask(rect).copy()
        if self.box.radius > 0:
            m &= ~Box(self.box.center, self.box.radius - 1).rect._build_mask(rect)
        return m


@dataclass(frozen=True)
class PointSet(SiteSet):
    """Explicit finite set of sites."""

    pts: frozenset

    def __init__(self, pts: Iterable[Sequence[int]]):
        object.__setattr__(self, "pts", frozenset(tuple(int(c) for c in z) for z in pts))
        if not self.pts:
            raise ValueError("empty point set")
        if len({len(z) for z in self.pts}) != 1:
            raise ValueError("mixed dimensions")

    @property
    def d(self) -> int:
        return len(next(iter(self.pts)))

    def bounding_rect(self) -> Rect:
        arr = np.array(sorted(self.pts))
        return Rect(tuple(arr.min(axis=0)), tuple(arr.max(axis=0)))

    def __contains__(self, z) -> bool:
        return tuple(z) in self.pts

    def __len__(self) -> int:
        return len(self.pts)

    def points(self) -> Iterator[Point]:
        return iter(sorted(self.pts))

    def _build_mask(self, rect: Rect) -> np.ndarray:
        m = np.zeros(rect.shape, dtype=bool)
        for z in self.pts:
            if z in rect:
                m[tuple(c - lo for c, lo in zip(z, rect.lo))] = True
        return m


@dataclass(frozen=True)
class SiteUnion(SiteSet):
    parts: tuple

    @property
    def d(self) -> int:
        return self.parts[0].d

    def bounding_rect(self) -> Rect:
        r = self.parts[0].bounding_rect()
        for part in self.parts[1:]:
            r = r.hull(part.bounding_rect())
        return r

    def __contains__(self, z) -> bool:
        return any(z in part for part in self.parts)

    def _build_mask(self, rect: Rect) -> np.ndarray:
        m = np.zeros(rect.shape, dtype=bool)
        for part in self.parts:
            m |= part.mask_in(rect)
        return m


@dataclass(frozen=True)
class SiteDifference(SiteSet):
    base: SiteSet
    removed: SiteSet

    @property
    def d(self) -> int:
        return self.base.d

    def bounding_rect(self) -> Rect:
        return self.base.bounding_rect()

    def __contains__(self, z) -> bool:
        return z in self.base and z not in self.removed

    def _build_mask(self, rect: Rect) -> np.ndarray:
        return self.base.mask_in(rect) & ~self.removed.mask_in(rect)


def sup_dist(x: Sequence[int], y: Sequence[int]) -> int:
    return max(abs(a - b) for a, b in zip(x, y))


def origin(d: int) -> Point:
    return (0,) * d


def box(center: Sequence[int] | int, radius: int, d: int | None = None) -> Box:
    """``box(0, n, d)`` is Lambda(n); ``box(x, n)`` is the translate Lambda(x; n)."""
    if isinstance(center, int):
        if d is None:
            raise ValueError("dimension needed for scalar center")
        center = (center,) * d
    return Box(tuple(center), radius)


def boundary(b: Box) -> Boundary:
    return Boundary(b)


def neighbours(z: Sequence[int]) -> list[Point]:
    out = []
    for a in range(len(z)):
        for s in (-1, 1):
            w = list(z)
            w[a] += s
            out.append(tuple(w))
    return out


def as_rect(region: SiteSet) -> Rect:
    return region if isinstance(region, Rect) else region.bounding_rect()


# -- configurations ----------------------------------------------------------

class Configuration:
    """Open/closed assignment of the sites of ``region``.

    Built by :func:`sample` (dense bitset or lazy on-demand hashing) or
    :meth:`from_array` (explicit states, for constructed and enumerated
    configurations).  Immutable.
    """

    def __init__(self, region: Rect, p, seed: int | None, trial: int | None,
                 dense: np.ndarray | None = None):
        self.region = region
        self.p = p
        self.seed = seed
        self.trial = trial
        self._dense = dense
        self._labels: dict = {}
        if dense is not None:
            dense.flags.writeable = False
            self._key = None
        else:
            self._key = trial_key(seed, trial)
            self._thr = open_threshold(p)

    @classmethod
    def from_array(cls, region: SiteSet, states) -> "Configuration":
        rect = as_rect(region)
        arr = np.array(states, dtype=bool)
        if arr.shape != rect.shape:
            raise ValueError(f"array shape {arr.shape} does not match region {rect.shape}")
        return cls(rect, None, None, None, arr)

    @classmethod
    def from_open_sites(cls, region: SiteSet, open_sites: Iterable[Sequence[int]]) -> "Configuration":
        rect = as_rect(region)
        arr = np.zeros(rect.shape, dtype=bool)
        for z in open_sites:
            if z not in rect:
                raise RegionError(f"site {tuple(z)} outside {rect}")
            arr[tuple(c - lo for c, lo in zip(z, rect.lo))] = True
        return cls(rect, None, None, None, arr)

    @property
    def d(self) -> int:
        return self.region.d

    @property
    def lazy(self) -> bool:
        return self._dense is None

    def _check(self, rect: Rect) -> None:
        if not self.region.contains_rect(rect):
            raise RegionError(f"{rect} not inside configuration region {self.region}")

    def open_mask(self, rect: Rect | None = None) -> np.ndarray:
        """Boolean open-site array over ``rect`` (default: the whole region)."""
        rect = self.region if rect is None else as_rect(rect)
        self._check(rect)
        if self._dense is not None:
            return self._dense[rect.slices(self.region)]
        return kernels.sample(self._key, rect.lo, rect.shape, self._thr)

    def site_state(self, z: Sequence[int]) -> bool:
        z = tuple(z)
        if z not in self.region:
            raise RegionError(f"site {z} outside configuration region {self.region}")
        if self._dense is not None:
            return bool(self._dense[tuple(c - lo for c, lo in zip(z, self.region.lo))])
        if self._thr >= 1 << 64:
            return True
        return site_uniform(self.seed, self.trial, z) < self._thr

    def materialize(self) -> "Configuration":
        if self._dense is not None:
            return self
        return Configuration(self.region, self.p, self.seed, self.trial, self.open_mask())

    def __repr__(self) -> str:
        kind = "lazy" if self.lazy else "dense"
        return f"Configuration({self.region}, p={self.p}, seed={self.seed}, trial={self.trial}, {kind})"


def sample(region: SiteSet, p, seed: int, trial: int, lazy: bool | None = None,
           dense_limit: int = DEFAULT_DENSE_LIMIT) -> Configuration:
    """Configuration of ``region`` for trial ``trial`` of stream ``seed`` at density ``p``.

    ``lazy=None`` picks dense storage unless the region exceeds ``dense_limit``
    sites; requesting dense storage beyond the limit raises
    :class:`ResourceGuardError`.
    """
    rect = as_rect(region)
    open_threshold(p)
    too_big = rect.size > dense_limit
    if lazy is None:
        lazy = too_big
    if not lazy:
        if too_big:
            raise ResourceGuardError(f"{rect.size} sites exceed dense limit {dense_limit}")
        arr = kernels.sample(trial_key(seed, trial), rect.lo, rect.shape, open_threshold(p))
        return Configuration(rect, p, seed, trial, arr)
    return Configuration(rect, p, seed, trial)


def site_state(cfg: Configuration, z: Sequence[int]) -> bool:
    return cfg.site_state(z)


def site_uniforms(region: SiteSet, seed: int, trial: int) -> np.ndarray:
    """Raw per-site uniforms; ``uniforms < open_threshold(p)`` is the open mask at ``p``."""
    rect = as_rect(region)
    return kernels.uniforms(trial_key(seed, trial), rect.lo, rect.shape)
