"""Throughput aggregation, fairness and the multi-user gain fit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, UndefinedFairnessError
from .linkmodel import GOLDEN


def jain_index(x):
    """Jain's fairness index ``(sum x)^2 / (n sum x^2)``."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise InvalidParameterError("need at least one value")
    if np.any(x < 0):
        raise InvalidParameterError("throughputs must be non-negative")
    top = x.max()
    if top == 0:
        raise UndefinedFairnessError("fairness of an all-zero allocation is undefined")
    x = x / top  # scale-free, and safe against under/overflow
    sq = np.sum(x * x)
    return float(np.sum(x) ** 2 / (x.size * sq))


@dataclass(frozen=True)
class ThroughputReport:
    user_throughput: np.ndarray  # bit/s, ordered by user id
    tier: np.ndarray  # "macro" | "femto" per user

    @property
    def cell_sum(self):
        return float(np.sum(self.user_throughput))


@dataclass(frozen=True)
class TierSplit:
    macro: float | None
    femto: float | None
    combined: float
    n_macro: int
    n_femto: int


def tier_split_report(report):
    """Mean throughput per tier and overall; an empty tier is ``None``."""
    x = np.asarray(report.user_throughput, dtype=float)
    tier = np.asarray(report.tier)
    if tier.shape != x.shape:
        raise InvalidParameterError("every user needs a tier tag")
    macro = x[tier == "macro"]
    femto = x[tier == "femto"]
    return TierSplit(
        float(macro.mean()) if macro.size else None,
        float(femto.mean()) if femto.size else None,
        float(x.mean()),
        int(macro.size),
        int(femto.size),
    )


def area_spectral_efficiency(throughput, area, bandwidth):
    """Summed throughput per unit area and bandwidth (bit/s/Hz/m^2)."""
    if not area > 0 or not bandwidth > 0:
        raise InvalidParameterError("area and bandwidth must be positive")
    return float(np.sum(throughput)) / (area * bandwidth)


@dataclass(frozen=True)
class GainFit:
    m: float
    b: float
    r2: float


def _loglog(k, b):
    return np.log(np.log(b * k))


def _profile(k, t, log_b):
    phi = _loglog(k, math.exp(log_b))
    den = np.dot(phi, phi)
    m = np.dot(phi, t) / den if den > 0 else 0.0
    sse = np.sum((t - m * phi) ** 2)
    return m, sse


def fit_loglog_gain(points, b_max=1e6, n_scan=400, rel_tol=1e-12):
    """Least-squares fit of ``T(k) = m ln(ln(b k))``.

    ``m`` has a closed form for fixed ``b``; ``ln b`` is bracketed by a scan
    over ``(ln(1/k_min), ln b_max]`` and refined by golden-section search.
    Constant data yield ``r2 = 0``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise InvalidParameterError("need at least three (k, throughput) points")
    k, t = pts[:, 0], pts[:, 1]
    if np.any(k < 2):
        raise InvalidParameterError("user counts must be at least 2")

    lo = -math.log(k.min()) + 1e-9
    hi = math.log(b_max)
    grid = np.linspace(lo, hi, n_scan)
    sse = np.array([_profile(k, t, u)[1] for u in grid])
    j = int(np.argmin(sse))
    a, c = grid[max(j - 1, 0)], grid[min(j + 1, n_scan - 1)]

    # golden-section minimization of the profiled SSE inside the bracket
    x1 = c - GOLDEN * (c - a)
    x2 = a + GOLDEN * (c - a)
    f1, f2 = _profile(k, t, x1)[1], _profile(k, t, x2)[1]
    width = c - a
    while c - a > rel_tol * max(width, 1e-300) and c - a > 1e-15:
        if f1 <= f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - GOLDEN * (c - a)
            f1 = _profile(k, t, x1)[1]
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (c - a)
            f2 = _profile(k, t, x2)[1]
    u = (a + c) / 2
    if sse[j] < _profile(k, t, u)[1]:
        u = grid[j]
    m, sse_best = _profile(k, t, u)
    sst = np.sum((t - t.mean()) ** 2)
    r2 = 0.0 if sst == 0 else float(min(max(1.0 - sse_best / sst, 0.0), 1.0))
    return GainFit(float(m), math.exp(u), r2)


def mean_and_stderr(samples):
    x = np.asarray(samples, dtype=float)
    x = x[np.isfinite(x)]
    n = x.size
    if n == 0:
        return math.nan, math.nan, 0
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(x.mean()), se, n
