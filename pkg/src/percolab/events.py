"""Event detectors: pure predicates of a configuration.

Every event except ``good`` has the same shape: label the open sites of a
region ``W`` and ask whether at least ``k`` clusters meet both a set ``A`` and
a set ``B`` (possibly negated).  :func:`touch_form` exposes that description
so the batch Monte Carlo and enumeration kernels can evaluate the event
without going through the per-configuration Python path.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

from .cluster import clusters_touching, grow_clusters, label
from .lattice import (Box, Boundary, Configuration, PointSet, Rect, SiteDifference,
                      SiteSet, as_rect, neighbours, origin)

ORIGIN_POLICIES = ("include", "exclude")

# canonical parameter order and defaults (None: required)
_PARAMS: dict[str, tuple[tuple[str, object], ...]] = {
    "two_arms": (("n", None), ("origin", "include")),
    "a2": (("m", None), ("n", None)),
    "crossing_v": (("k", None), ("m", None), ("at", None), ("axis", None)),
    "one_arm": (("m", None), ("n", None)),
    "point_pair": (("x", None), ("y", None), ("r", None)),
    "e1": (("n", None), ("M", None)),
    "f2": (("n", None), ("M", None)),
    "f3": (("n", None), ("M", None)),
    "good": (("n", None), ("M", None), ("x", None)),
}
_OPTIONAL = {("crossing_v", "at"), ("crossing_v", "axis"), ("good", "x"), ("two_arms", "origin")}

_SPEC_RE = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class EventSpec:
    """Event kind, dimension and parameters; ``str()`` gives the canonical text form.

    Text form: ``kind(d=2,key=value,...)`` with points written ``1:0:-2``,
    e.g. ``two_arms(d=2,n=16)`` or ``point_pair(d=2,x=1:0,y=0:1,r=9)``.
    """

    kind: str
    d: int
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in _PARAMS:
            raise SpecError(f"unknown event kind {self.kind!r}")
        if self.d < 1:
            raise SpecError("dimension must be >= 1")
        given = dict(self.params)
        known = {k for k, _ in _PARAMS[self.kind]}
        extra = set(given) - known
        if extra:
            raise SpecError(f"unknown parameters for {self.kind}: {sorted(extra)}")
        canon = []
        for key, default in _PARAMS[self.kind]:
            if key in given:
                val = given[key]
                if isinstance(val, list):
                    val = tuple(val)
                if isinstance(val, tuple) and len(val) != self.d:
                    raise SpecError(f"{key} must have {self.d} coordinates")
                if val != default and not self._implied(key, val):
                    canon.append((key, val))
            elif (self.kind, key) not in _OPTIONAL:
                raise SpecError(f"{self.kind} needs parameter {key}")
        object.__setattr__(self, "params", tuple(canon))

    def _implied(self, key, val) -> bool:
        # parameters equal to their dimension-dependent defaults are dropped
        if (self.kind, key) == ("crossing_v", "axis"):
            return val == self.d - 1
        if key in ("at", "x") and self.kind in ("crossing_v", "good"):
            return val == (0,) * self.d
        return False

    @classmethod
    def make(cls, kind: str, d: int, **params) -> "EventSpec":
        return cls(kind, d, tuple(params.items()))

    def get(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        for k, v in _PARAMS[self.kind]:
            if k == key and v is not None:
                return v
        return default

    @property
    def n(self) -> int | None:
        return self.get("n")

    def __str__(self) -> str:
        parts = [f"d={self.d}"]
        for k, v in self.params:
            if isinstance(v, tuple):
                v = ":".join(str(c) for c in v)
            parts.append(f"{k}={v}")
        return f"{self.kind}({','.join(parts)})"


def _parse_value(text: str):
    text = text.strip()
    if ":" in text:
        return tuple(int(c) for c in text.split(":"))
    try:
        return int(text)
    except ValueError:
        return text


def parse_event(text: str) -> EventSpec:
    m = _SPEC_RE.match(text)
    if not m:
        raise SpecError(f"cannot parse event {text!r}")
    kind, body = m.groups()
    params = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        if "=" not in item:
            raise SpecError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k.strip()] = _parse_value(v)
        except ValueError as exc:
            raise SpecError(f"bad value in {item!r}") from exc
    if "d" not in params:
        raise SpecError("event text needs d=...")
    d = params.pop("d")
    if not isinstance(d, int):
        raise SpecError("d must be an integer")
    return EventSpec(kind, d, tuple(params.items()))


# -- geometry of the events --------------------------------------------------

def crossing_rect(d: int, k: int, m: int, at: Sequence[int] | None = None,
                  axis: int | None = None) -> Rect:
    """``[0,m]^(d-1) x [0,k]`` with the short side along ``axis`` (default last), translated by ``at``."""
    axis = d - 1 if axis is None else axis
    hi = tuple(k if a == axis else m for a in range(d))
    r = Rect(origin(d), hi)
    return r.translate(at) if at is not None else r


def e1_slab(d: int, n: int, M: int) -> Rect:
    w, h = 8 * M * M * n, 8 * M * n - 1
    return Rect((-w,) * (d - 1) + (-h,), (w,) * (d - 1) + (h,))


def f_box(d: int, n: int, M: int, upper: bool = True) -> Rect:
    w, a, b = 8 * M * M * n, 8 * M * n, 8 * M * M * n
    if upper:
        return Rect((-w,) * (d - 1) + (a,), (w,) * (d - 1) + (b,))
    return Rect((-w,) * (d - 1) + (-b,), (w,) * (d - 1) + (-a,))


def f_face(d: int, n: int, M: int, upper: bool = True) -> Rect:
    a = 8 * M * n
    z = a if upper else -a
    return Rect((-a,) * (d - 1) + (z,), (a,) * (d - 1) + (z,))


def origin_neighbours(d: int, center: Sequence[int] | None = None) -> PointSet:
    return PointSet(neighbours(center if center is not None else origin(d)))


# -- detectors ---------------------------------------------------------------

def _touch(cfg: Configuration, w: SiteSet, a: SiteSet, b: SiteSet) -> int:
    return clusters_touching(label(cfg, w), a, b)


def two_arms(cfg: Configuration, n: int, origin_policy: str = "include") -> bool:
    """At least two clusters of Lambda(n) each hold an open neighbour of 0 and a site of its boundary.

    With ``origin_policy="exclude"`` the origin is removed from the lattice
    first, so an open origin cannot merge arms.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    f = touch_form(EventSpec.make("two_arms", cfg.d, n=n, origin=origin_policy))
    if cfg.lazy:
        return _two_arms_grown(cfg, f)
    return _touch(cfg, f.region, f.a, f.b) >= 2


def _two_arms_grown(cfg: Configuration, f: "TouchForm") -> bool:
    ids = grow_clusters(cfg, f.a.points(), f.region)
    hit = {cid for z, cid in ids.items() if z in f.b}
    return len(hit) >= 2


def a2(cfg: Configuration, m: int, n: int, center: Sequence[int] | None = None) -> bool:
    """Two distinct clusters of Lambda(n) connect Lambda(m) to the boundary of Lambda(n)."""
    if not 0 <= m < n:
        raise ValueError("need 0 <= m < n")
    c = center if center is not None else origin(cfg.d)
    outer = Box(c, n)
    return _touch(cfg, outer, Box(c, m), Boundary(outer)) >= 2


def crossing(cfg: Configuration, rect: Rect, axis: int) -> bool:
    """Open crossing of ``rect`` between its two faces orthogonal to ``axis``."""
    return _touch(cfg, rect, rect.face(axis, False), rect.face(axis, True)) >= 1


def crossing_v(cfg: Configuration, k: int, m: int, at: Sequence[int] | None = None,
               axis: int | None = None) -> bool:
    """V(k, m): crossing of ``[0,m]^(d-1) x [0,k]`` in the last direction."""
    if k < 1 or m < 1:
        raise ValueError("need k, m >= 1")
    axis = cfg.d - 1 if axis is None else axis
    return crossing(cfg, crossing_rect(cfg.d, k, m, at, axis), axis)


def one_arm(cfg: Configuration, m: int, n: int, center: Sequence[int] | None = None) -> bool:
    if not 0 <= m < n:
        raise ValueError("need 0 <= m < n")
    c = center if center is not None else origin(cfg.d)
    outer = Box(c, n)
    return _touch(cfg, outer, Box(c, m), Boundary(outer)) >= 1


def point_pair(cfg: Configuration, x: Sequence[int], y: Sequence[int], region: SiteSet) -> bool:
    x, y = tuple(x), tuple(y)
    if x not in region or y not in region:
        raise ValueError("x and y must lie in the region")
    return _touch(cfg, region, PointSet([x]), PointSet([y])) >= 1


def event_e1(cfg: Configuration, n: int, M: int) -> bool:
    """No open top-to-bottom path inside the slab ``[-8M^2n, 8M^2n]^(d-1) x [-8Mn+1, 8Mn-1]``."""
    slab = e1_slab(cfg.d, n, M)
    ax = cfg.d - 1
    return _touch(cfg, slab, slab.face(ax, True), slab.face(ax, False)) == 0


def event_f2(cfg: Configuration, n: int, M: int) -> bool:
    """Central face at height 8Mn joined to height 8M^2n inside ``[-8M^2n, 8M^2n]^(d-1) x [8Mn, 8M^2n]``."""
    b = f_box(cfg.d, n, M, True)
    return _touch(cfg, b, f_face(cfg.d, n, M, True), b.face(cfg.d - 1, True)) >= 1


def event_f3(cfg: Configuration, n: int, M: int) -> bool:
    b = f_box(cfg.d, n, M, False)
    return _touch(cfg, b, f_face(cfg.d, n, M, False), b.face(cfg.d - 1, False)) >= 1


# -- spec-level interface ----------------------------------------------------

class TouchForm(NamedTuple):
    """Event = ``(#clusters of W meeting A and B >= k) xor negate``."""

    region: SiteSet
    a: SiteSet
    b: SiteSet
    k: int
    negate: bool = False

    @property
    def rect(self) -> Rect:
        return as_rect(self.region)


def touch_form(spec: EventSpec) -> TouchForm | None:
    """Cluster-touching description of ``spec``; ``None`` for ``good``."""
    d, g = spec.d, spec.get
    kind = spec.kind
    if kind == "two_arms":
        n = g("n")
        policy = g("origin")
        if policy not in ORIGIN_POLICIES:
            raise SpecError(f"origin policy must be one of {ORIGIN_POLICIES}")
        outer = Box(origin(d), n)
        w = outer if policy == "include" else SiteDifference(outer, PointSet([origin(d)]))
        return TouchForm(w, origin_neighbours(d), Boundary(outer), 2)
    if kind in ("a2", "one_arm"):
        m, n = g("m"), g("n")
        if not 0 <= m < n:
            raise SpecError("need 0 <= m < n")
        outer = Box(origin(d), n)
        return TouchForm(outer, Box(origin(d), m), Boundary(outer), 2 if kind == "a2" else 1)
    if kind == "crossing_v":
        axis = g("axis", d - 1)
        r = crossing_rect(d, g("k"), g("m"), g("at"), axis)
        return TouchForm(r, r.face(axis, False), r.face(axis, True), 1)
    if kind == "point_pair":
        region = Box(origin(d), g("r"))
        x, y = g("x"), g("y")
        if x not in region or y not in region:
            raise SpecError("x and y must lie in Lambda(r)")
        return TouchForm(region, PointSet([x]), PointSet([y]), 1)
    if kind == "e1":
        slab = e1_slab(d, g("n"), g("M"))
        return TouchForm(slab, slab.face(d - 1, True), slab.face(d - 1, False), 1, True)
    if kind in ("f2", "f3"):
        upper = kind == "f2"
        b = f_box(d, g("n"), g("M"), upper)
        return TouchForm(b, f_face(d, g("n"), g("M"), upper), b.face(d - 1, upper), 1)
    return None


def support(spec: EventSpec) -> SiteSet:
    """The sites the detector for ``spec`` reads."""
    if spec.kind == "good":
        from .renorm import good_support
        return good_support(spec.d, spec.get("x", origin(spec.d)), spec.get("n"), spec.get("M"))
    return touch_form(spec).region


def detector(spec: EventSpec) -> Callable[[Configuration], bool]:
    """Predicate ``cfg -> bool`` for ``spec`` built on the per-configuration detectors."""
    g = spec.get
    kind = spec.kind
    if kind == "two_arms":
        return lambda cfg: two_arms(cfg, g("n"), g("origin"))
    if kind == "a2":
        return lambda cfg: a2(cfg, g("m"), g("n"))
    if kind == "one_arm":
        return lambda cfg: one_arm(cfg, g("m"), g("n"))
    if kind == "crossing_v":
        return lambda cfg: crossing_v(cfg, g("k"), g("m"), g("at"), g("axis"))
    if kind == "point_pair":
        return lambda cfg: point_pair(cfg, g("x"), g("y"), Box(origin(cfg.d), g("r")))
    if kind == "e1":
        return lambda cfg: event_e1(cfg, g("n"), g("M"))
    if kind == "f2":
        return lambda cfg: event_f2(cfg, g("n"), g("M"))
    if kind == "f3":
        return lambda cfg: event_f3(cfg, g("n"), g("M"))
    if kind == "good":
        from .renorm import good
        return lambda cfg: good(cfg, g("x", origin(cfg.d)), g("n"), g("M"))
    raise SpecError(f"no detector for {kind}")


def evaluate(spec: EventSpec, cfg: Configuration) -> bool:
    if cfg.d != spec.d:
        raise SpecError("configuration dimension does not match the event")
    return detector(spec)(cfg)

