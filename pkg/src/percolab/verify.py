"""Per-configuration checkers for deterministic event containments.

Each checker returns a :class:`Verdict`: *vacuous* when the premise fails,
*holds* when premise and conclusion both hold, *violation* otherwise.  The
containments are theorems, so any violation points at a bug in a detector;
the witness carries what is needed to reproduce it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cluster import label
from .events import a2, crossing, crossing_rect, event_e1, event_f2, event_f3, one_arm
from .lattice import Box, Configuration, Rect, origin, sample

VACUOUS, HOLDS, VIOLATION = "vacuous", "holds", "violation"
_RANK = {VACUOUS: 0, HOLDS: 1, VIOLATION: 2}

CHECKS = ("gluing", "good_gluing", "annulus", "subface", "inclusions")
FAULTS = ("a2-false", "crossing-false")


@dataclass(frozen=True)
class Verdict:
    status: str
    witness: dict | None = None

    @classmethod
    def vacuous(cls) -> "Verdict":
        return cls(VACUOUS)

    @classmethod
    def holds(cls) -> "Verdict":
        return cls(HOLDS)

    @classmethod
    def violation(cls, **witness) -> "Verdict":
        return cls(VIOLATION, witness)

    @property
    def ok(self) -> bool:
        return self.status != VIOLATION

    def merge(self, other: "Verdict") -> "Verdict":
        """Associative merge; a violation dominates."""
        return self if _RANK[self.status] >= _RANK[other.status] else other


def _cfg_id(cfg: Configuration) -> dict:
    return {"seed": cfg.seed, "trial": cfg.trial, "p": None if cfg.p is None else float(cfg.p)}


# -- checkers ------------------------------------------------------------------

def check_gluing(cfg: Configuration, n: int, M: int, a2_fn: Callable = a2) -> Verdict:
    """E1 and F2 and F3 imply A2(8Mn, 8M^2 n)."""
    if not (event_f2(cfg, n, M) and event_f3(cfg, n, M) and event_e1(cfg, n, M)):
        return Verdict.vacuous()
    if a2_fn(cfg, 8 * M * n, 8 * M * M * n):
        return Verdict.holds()
    return Verdict.violation(check="gluing", n=n, M=M, **_cfg_id(cfg))


def check_good_gluing(cfg: Configuration, x: Sequence[int], y: Sequence[int], n: int,
                      M: int) -> Verdict:
    """Two good neighbours: every site of W(x) is joined to every site of W(y)."""
    from .renorm import good_path_gluing

    v = good_path_gluing(cfg, [tuple(x), tuple(y)], n, M)
    if v.status == VIOLATION:
        return Verdict.violation(check="good_gluing", x=list(x), y=list(y), n=n, M=M,
                                 labels=v.witness["labels"], **_cfg_id(cfg))
    return v


def _box_inclusion(outer: Box, inner: Box) -> bool:
    # boxes are products of integer intervals: site inclusion holds iff it holds on every axis
    return outer.rect.contains_rect(inner.rect)


def check_box_inclusions(x: Sequence[int], y: Sequence[int], n: int, M: int) -> Verdict:
    """Lambda(nx; 4n) contains Lambda(ny; n) and Lambda(ny; 16Mn) contains Lambda(nx; 4Mn)."""
    cx = tuple(n * c for c in x)
    cy = tuple(n * c for c in y)
    failed = []
    if not _box_inclusion(Box(cx, 4 * n), Box(cy, n)):
        failed.append("small")
    if not _box_inclusion(Box(cy, 16 * M * n), Box(cx, 4 * M * n)):
        failed.append("large")
    if failed:
        return Verdict.violation(check="inclusions", x=list(x), y=list(y), n=n, M=M, failed=failed)
    return Verdict.holds()


def annulus_slabs(d: int, r: int, R: int) -> list[tuple[Rect, int, bool]]:
    """The 2d slabs ``[-R,R]^(d-1) x [r,R]`` (rotated/reflected) with their thin axis and side."""
    out = []
    for axis in range(d):
        for upper in (True, False):
            lo = [-R] * d
            hi = [R] * d
            lo[axis], hi[axis] = (r, R) if upper else (-R, -r)
            out.append((Rect(tuple(lo), tuple(hi)), axis, upper))
    return out


def check_annulus_cover(cfg: Configuration, r: int, R: int,
                        crossing_fn: Callable = crossing) -> Verdict:
    """A path from Lambda(r) to the boundary of Lambda(R) crosses one of the 2d slabs the thin way."""
    if not 0 < r < R:
        raise ValueError("need 0 < r < R")
    if not one_arm(cfg, r, R):
        return Verdict.vacuous()
    for slab, axis, _ in annulus_slabs(cfg.d, r, R):
        if crossing_fn(cfg, slab, axis):
            return Verdict.holds()
    return Verdict.violation(check="annulus", r=r, R=R, **_cfg_id(cfg))


def subface_rect(d: int, n: int, M: int) -> Rect:
    return crossing_rect(d, 16 * M * n, 16 * M * M * n)


def check_subface_decomposition(cfg: Configuration, n: int, M: int,
                                crossing_fn: Callable = crossing) -> Verdict:
    """A crossing of ``[0,16M^2n]^(d-1) x [0,16Mn]`` starts in some side-2n subface of the bottom."""
    d = cfg.d
    rect = subface_rect(d, n, M)
    if not crossing_fn(cfg, rect, d - 1):
        return Verdict.vacuous()
    labs = label(cfg, rect)
    top = labs.labels_on(rect.face(d - 1, True))
    bottom = labs.labels[(slice(None),) * (d - 1) + (0,)]
    hits = np.isin(bottom, top) & (bottom > 0)
    # count hits in each closed window [2nj, 2nj + 2n] along every face axis
    side = 2 * n
    counts = hits.astype(np.int64)
    for axis in range(d - 1):
        c = np.cumsum(counts, axis=axis)
        c = np.concatenate([np.zeros_like(np.take(c, [0], axis=axis)), c], axis=axis)
        starts = np.arange(0, counts.shape[axis] - side, side)
        counts = np.take(c, starts + side + 1, axis=axis) - np.take(c, starts, axis=axis)
    if np.any(counts > 0):
        return Verdict.holds()
    return Verdict.violation(check="subface", n=n, M=M, **_cfg_id(cfg))


# -- orchestration -------------------------------------------------------------

@dataclass
class CheckSummary:
    check: str
    d: int
    n: int
    M: int
    p_grid: list
    trials: int
    seed: int
    counts: dict = field(default_factory=lambda: {VACUOUS: 0, HOLDS: 0, VIOLATION: 0})
    per_p: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    max_witnesses: int = 20

    def add(self, p, verdict: Verdict) -> None:
        self.counts[verdict.status] += 1
        row = self.per_p.setdefault(str(p), {VACUOUS: 0, HOLDS: 0, VIOLATION: 0})
        row[verdict.status] += 1
        if verdict.status == VIOLATION and len(self.witnesses) < self.max_witnesses:
            self.witnesses.append(verdict.witness)

    @property
    def violations(self) -> int:
        return self.counts[VIOLATION]

    def to_dict(self) -> dict:
        return {
            "check": self.check, "d": self.d, "n": self.n, "M": self.M,
            "p": [float(p) for p in self.p_grid], "trials": self.trials, "seed": self.seed,
            "counts": dict(self.counts), "per_p": self.per_p,
            "violations": self.violations, "witnesses": self.witnesses,
        }


def neighbour_directions(d: int) -> list[tuple[int, ...]]:
    out = []
    for axis in range(d):
        for s in (1, -1):
            out.append(tuple(s if a == axis else 0 for a in range(d)))
    return out


def check_region(check: str, d: int, n: int, M: int, direction: Sequence[int] | None = None) -> Rect:
    if check == "gluing":
        return Box(origin(d), 8 * M * M * n).rect
    if check == "annulus":
        return Box(origin(d), 8 * M * M * n).rect
    if check == "subface":
        return subface_rect(d, n, M)
    if check == "good_gluing":
        direction = direction or neighbour_directions(d)[0]
        bx = Box(origin(d), 16 * M * n)
        by = Box(tuple(n * c for c in direction), 16 * M * n)
        return bx.rect.hull(by.rect)
    raise ValueError(f"no sampling region for {check}")


def run_check(check: str, d: int, n: int, M: int, p_grid: Sequence = (0.3, 0.5, 0.7),
              trials: int = 1000, seed: int = 0, fault: str | None = None,
              r: int | None = None, R: int | None = None) -> CheckSummary:
    """Run ``check`` on ``trials`` configurations at each ``p`` in ``p_grid``.

    Trial ``t`` uses stream ``(seed, t)`` at every p, so the grid is coupled.
    ``fault`` swaps in a deliberately wrong detector (harness negative control).
    """
    if check not in CHECKS:
        raise ValueError(f"unknown check {check!r}")
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    never = lambda *a, **k: False  # noqa: E731
    a2_fn = never if fault == "a2-false" else a2
    crossing_fn = never if fault == "crossing-false" else crossing
    summary = CheckSummary(check, d, n, M, list(p_grid), trials, seed)
    if check == "inclusions":
        for direction in neighbour_directions(d):
            summary.add("-", check_box_inclusions(origin(d), direction, n, M))
        summary.trials = len(neighbour_directions(d))
        return summary
    r = 8 * M * n if r is None else r
    R = 8 * M * M * n if R is None else R
    dirs = neighbour_directions(d)
    for p in p_grid:
        for t in range(trials):
            if check == "good_gluing":
                direction = dirs[t % len(dirs)]
                cfg = sample(check_region(check, d, n, M, direction), p, seed, t)
                v = check_good_gluing(cfg, origin(d), direction, n, M)
            elif check == "gluing":
                cfg = sample(check_region(check, d, n, M), p, seed, t)
                v = check_gluing(cfg, n, M, a2_fn=a2_fn)
            elif check == "annulus":
                cfg = sample(Box(origin(d), R).rect, p, seed, t)
                v = check_annulus_cover(cfg, r, R, crossing_fn=crossing_fn)
            else:
                cfg = sample(check_region(check, d, n, M), p, seed, t)
                v = check_subface_decomposition(cfg, n, M, crossing_fn=crossing_fn)
            summary.add(p, v)
    return summary


def coarse_pairs(d: int, radius: int):
    """All nearest-neighbour coarse pairs inside ``[-radius, radius]^d``."""
    for x in itertools.product(range(-radius, radius + 1), repeat=d):
        for e in neighbour_directions(d):
            y = tuple(a + b for a, b in zip(x, e))
            if max(abs(c) for c in y) <= radius:
                yield x, y
