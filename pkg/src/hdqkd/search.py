"""Small one-dimensional search routines used by the optimizers."""
from __future__ import annotations

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def bisect_predicate(pred, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Shrink ``[lo, hi]`` around the point where ``pred`` flips.

    ``pred(lo)`` and ``pred(hi)`` must differ. Returns the final bracket, whose
    endpoints keep their original truth values.
    """
    p_lo = pred(lo)
    if p_lo == pred(hi):
        raise ValueError("predicate does not change over the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid) == p_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def golden_section_max(f, a: float, b: float, tol: float = 1e-4, max_iter: int = 200):
    """Maximize a unimodal ``f`` on ``[a, b]``. Returns ``(x, f(x))``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        # ">=" keeps the left half on ties, i.e. prefers smaller arguments
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)
