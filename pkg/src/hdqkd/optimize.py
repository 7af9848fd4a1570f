"""Parameter studies over channel length, decision threshold and intensity.

Rate curves are clamped and kinked, so every search starts from a coarse grid
and only refines with golden-section inside the bracket around the grid
maximum. Ties go to the smaller argument.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import transmittance
from .rates import DECOY, rate_components, rate_curve
from .search import bisect_predicate, golden_section_max

L_CEILING = 200.0


class EmptyWindow(ValueError):
    pass


@dataclass(frozen=True)
class ChannelWindow:
    """Lengths in km bounding the positive-rate region, and the best length."""

    l_min: float
    l_opt: float
    l_max: float
    r_opt: float


@dataclass(frozen=True)
class Optimum:
    argmax: float
    value: float
    # "golden", "grid-only" or "none" (rate identically zero)
    method: str
    at_boundary: bool = False


def _refine_peak(f, grid, values, tol):
    """Golden-section around the grid argmax; returns (arg, value, method)."""
    i = int(np.argmax(values))
    best_x, best_v = float(grid[i]), float(values[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    left = values[max(i - 1, 0)]
    right = values[min(i + 1, len(grid) - 1)]
    if hi <= lo or not (left <= best_v >= right):
        return best_x, best_v, "grid-only"
    x, v = golden_section_max(f, float(lo), float(hi), tol)
    if v > best_v:
        return float(x), float(v), "golden"
    return best_x, best_v, "golden"


def channel_window(x: float, mu: float, alpha: float, mode: str = DECOY, *,
                   step: float = 0.01, ceiling: float = L_CEILING, tol: float = 1e-6,
                   **rate_kw) -> ChannelWindow:
    """Minimum, optimum and maximum channel length with a positive rate.

    Raises :class:`EmptyWindow` when the rate vanishes on ``[0, ceiling]``.
    """
    if x < 0 or not mu > 0 or not alpha > 0:
        raise ValueError("need x >= 0, mu > 0, alpha > 0")
    grid = np.linspace(0.0, ceiling, int(round(ceiling / step)) + 1)
    rates = rate_curve(grid, mu, x, alpha, mode, **rate_kw)

    def rate(length):
        return float(rate_curve(length, mu, x, alpha, mode, **rate_kw))

    def positive(length):
        return rate(length) > 0

    pos = np.nonzero(rates > 0)[0]
    if len(pos) == 0:
        raise EmptyWindow(f"empty window: rate is zero on [0, {ceiling}] km")
    first, last = pos[0], pos[-1]
    l_min = 0.0 if first == 0 else bisect_predicate(positive, grid[first - 1], grid[first], tol)[1]
    l_max = float(grid[-1]) if last == len(grid) - 1 else \
        bisect_predicate(positive, grid[last], grid[last + 1], tol)[0]

    l_opt, r_opt, _ = _refine_peak(rate, grid, rates, tol)
    if rate(l_min) >= r_opt:
        l_opt, r_opt = l_min, rate(l_min)
    return ChannelWindow(float(l_min), float(l_opt), float(l_max), float(r_opt))


def optimal_threshold(length: float, mu: float, alpha: float, mode: str = DECOY, *,
                      x_max: float = 10.0, step: float = 0.05, tol: float = 1e-4,
                      **rate_kw) -> Optimum:
    """Threshold in ``[0, x_max]`` maximizing the rate at a fixed length."""
    if length < 0 or not mu > 0 or not alpha > 0:
        raise ValueError("need length >= 0, mu > 0, alpha > 0")
    eta = float(transmittance(alpha, length))
    grid = np.linspace(0.0, x_max, int(round(x_max / step)) + 1)

    def rate(x):
        return float(rate_components(eta, mu, x, mode, **rate_kw)["rate"])

    values = rate_components(eta, mu, grid, mode, **rate_kw)["rate"]
    if not np.any(values > 0):
        return Optimum(0.0, 0.0, "none")
    x, v, method = _refine_peak(rate, grid, values, tol)
    return Optimum(x, v, method, at_boundary=x in (0.0, x_max))


def max_rate_vs_threshold(x_grid, mu: float, alpha: float, mode: str = DECOY, **kw):
    """For each threshold, the best rate over all channel lengths.

    Returns a list of ``(x, length_at_max, max_rate)``; empty windows give zeros.
    """
    xs = list(x_grid)
    if not xs:
        raise ValueError("empty threshold grid")
    out = []
    for x in xs:
        try:
            w = channel_window(float(x), mu, alpha, mode, **kw)
        except EmptyWindow:
            out.append((float(x), 0.0, 0.0))
            continue
        out.append((float(x), w.l_opt, w.r_opt))
    return out


def optimal_mu(length: float, x: float, alpha: float, mu_range=(0.01, 5.0), mode: str = DECOY,
               *, step: float = 0.01, tol: float = 1e-4, **rate_kw) -> Optimum:
    """Intensity maximizing the rate; ``at_boundary`` flags an endpoint maximum."""
    lo, hi = map(float, mu_range)
    if not 0 < lo < hi:
        raise ValueError("mu_range must be a positive interval")
    eta = float(transmittance(alpha, length))
    grid = np.linspace(lo, hi, max(int(round((hi - lo) / step)), 2) + 1)

    def rate(mu):
        return float(rate_components(eta, mu, x, mode, **rate_kw)["rate"])

    values = rate_components(eta, grid, x, mode, **rate_kw)["rate"]
    if not np.any(values > 0):
        return Optimum(lo, 0.0, "none", at_boundary=True)
    m, v, method = _refine_peak(rate, grid, values, tol)
    edge = min(hi - lo, step) * 1e-3
    return Optimum(m, v, method, at_boundary=(m - lo) < edge or (hi - m) < edge)
