"""Power-law fits of estimated probabilities and comparison with exponent bounds."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

CONSISTENT, INCONSISTENT, INCONCLUSIVE = "consistent", "inconsistent", "inconclusive"


def schedule(n_min: int, n_max: int, ratio) -> list[int]:
    """Geometric ladder ``n_min, floor(n_min * ratio), ...`` capped at ``n_max``.

    Consecutive ratios never exceed ``ratio``, except where ``n * ratio < n + 1``
    forces a step of one.  Rounding down rather than up is what keeps the
    bound for non-integer ratios; for integer ratios the two agree.
    """
    r = Fraction(ratio)
    if not 1 <= n_min <= n_max:
        raise ValueError("need 1 <= n_min <= n_max")
    if r <= 1:
        raise ValueError("ratio must exceed 1")
    out = [int(n_min)]
    while out[-1] < n_max:
        nxt = math.floor(out[-1] * r)
        out.append(min(max(nxt, out[-1] + 1), n_max))
    return out


def exponent_bounds(d: int) -> tuple[Fraction, int, int]:
    """``(lower, upper, weaker_upper)`` bounds on the two-arms exponent in dimension ``d``.

    ``lower = (2d^2+3d-3)/(4d^2+5d-5)`` exactly, ``upper = d^2+4d-2`` and
    ``weaker_upper = 2d^2+2d-2``.
    """
    if d < 2:
        raise ValueError("exponent bounds need d >= 2")
    lower = Fraction(2 * d * d + 3 * d - 3, 4 * d * d + 5 * d - 5)
    return lower, d * d + 4 * d - 2, 2 * d * d + 2 * d - 2


def _verdict_lower(a: float, se: float, bound) -> str:
    if a - 2 * se >= bound:
        return CONSISTENT
    if a + 2 * se < bound:
        return INCONSISTENT
    return INCONCLUSIVE


def _verdict_upper(a: float, se: float, bound) -> str:
    if a + 2 * se <= bound:
        return CONSISTENT
    if a - 2 * se > bound:
        return INCONSISTENT
    return INCONCLUSIVE


@dataclass
class FitResult:
    alpha_hat: float
    c_hat: float
    stderr_alpha: float
    points: list  # (n, p_hat, sigma) actually fitted
    excluded: list = field(default_factory=list)  # zero-success points (n, upper CI)
    chi2: float = float("nan")
    rms_residual: float = float("nan")
    d: int | None = None
    lower_bound: float | None = None
    upper_bound: float | None = None
    weaker_upper_bound: float | None = None
    verdicts: dict = field(default_factory=dict)

    def compare(self, d: int) -> "FitResult":
        """Fill in the bounds for dimension ``d`` and a verdict for each at +-2 stderr."""
        lo, up, weak = exponent_bounds(d)
        self.d = d
        self.lower_bound, self.upper_bound, self.weaker_upper_bound = float(lo), up, weak
        a, se = self.alpha_hat, self.stderr_alpha
        self.verdicts = {"lower": _verdict_lower(a, se, lo),
                         "upper": _verdict_upper(a, se, up),
                         "weaker_upper": _verdict_upper(a, se, weak)}
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def fit_power_law(points: Sequence[Sequence[float]], d: int | None = None) -> FitResult:
    """Fit ``p(n) = c * n**(-alpha)`` by weighted least squares on logs.

    Parameters
    ----------
    points : sequence of (n, p_hat, sigma) or (n, p_hat, sigma, ci_high)
        ``sigma`` is the standard error of ``p_hat``; on the log scale it
        becomes ``sigma / p_hat``.  Points with ``p_hat == 0`` are excluded and
        listed with their upper confidence bound, when given.
        If every sigma is positive the weights are ``(p_hat / sigma)**2`` and
        the stderr treats them as known variances; otherwise the fit is
        unweighted and the stderr comes from the residual scatter.
    d : int, optional
        Compare against :func:`exponent_bounds` for this dimension.
    """
    pts = [tuple(float(v) for v in q) for q in points]
    used = [q[:3] for q in pts if q[1] > 0]
    excluded = [(q[0], q[3] if len(q) > 3 else None) for q in pts if q[1] <= 0]
    if len(used) < 3:
        raise ValueError("need at least 3 points with nonzero p_hat")
    x = np.log([q[0] for q in used])
    y = np.log([q[1] for q in used])
    if np.ptp(x) == 0:
        raise ValueError("degenerate fit: all n equal")
    known = all(q[2] > 0 for q in used)
    w = np.array([(q[1] / q[2]) ** 2 for q in used]) if known else np.ones(len(used))
    X = np.column_stack([np.ones_like(x), x])
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    resid = y - X @ beta
    chi2 = float(np.sum(w * resid**2))
    if not known:
        dof = len(used) - 2
        cov = cov * (chi2 / dof) if dof > 0 else cov * np.nan
    out = FitResult(alpha_hat=float(-beta[1]), c_hat=float(math.exp(beta[0])),
                    stderr_alpha=float(math.sqrt(max(cov[1, 1], 0.0))), points=used,
                    excluded=excluded, chi2=chi2,
                    rms_residual=float(np.sqrt(np.mean(resid**2))))
    if d is not None:
        out.compare(d)
    return out


# -- ratio report --------------------------------------------------------------

def extremal_pairs(d: int, n: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Opposite corners and opposite face centres of the sphere of radius ``n``.

    Stands in for the minimum over all pairs on the sphere.
    """
    corner = (n,) * d
    face = (n,) + (0,) * (d - 1)
    return [(corner, tuple(-c for c in corner)), (face, tuple(-c for c in face))]


def pair_region_radius(n: int, M: int) -> int:
    """Pairs are joined inside ``Lambda((M - 1) n)``."""
    return (M - 1) * n


@dataclass
class RatioPoint:
    n: int
    ratio: float | None
    ci_low: float | None
    ci_high: float | None
    flag: str  # "ok" or "inconclusive"


def ratio_report(n_values: Sequence[int], d: int, a2_est: Sequence, two_arms_est: Sequence,
                 pair_min_est: Sequence) -> list[RatioPoint]:
    """``R(n) = P(A2) * min-pair P / (n^(4d-2) * P(two-arms))`` with a conservative interval.

    Each estimate argument is a sequence (one per ``n``) of objects exposing
    ``p_hat``, ``ci_low`` and ``ci_high``.  Report only: nothing is asserted
    about the size of ``R``.
    """
    if not len(n_values) == len(a2_est) == len(two_arms_est) == len(pair_min_est):
        raise ValueError("one estimate per n is required")
    out = []
    for n, a, t, m in zip(n_values, a2_est, two_arms_est, pair_min_est):
        scale = float(n) ** (4 * d - 2)
        if t.p_hat == 0 or t.ci_low == 0:
            out.append(RatioPoint(int(n), None, None, None, "inconclusive"))
            continue
        r = a.p_hat * m.p_hat / (scale * t.p_hat)
        lo = a.ci_low * m.ci_low / (scale * t.ci_high)
        hi = a.ci_high * m.ci_high / (scale * t.ci_low)
        out.append(RatioPoint(int(n), r, lo, hi, "ok"))
    return out
