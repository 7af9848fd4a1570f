"""Balanced homodyne detection with a symmetric displaced decision threshold.

The received quadrature is normalized so the mean signal level is +/-1. A slot
decodes to the bit of mean +1 when the outcome exceeds ``+x``, to the opposite
bit below ``-x``, and is abandoned in between.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .channel import DELTA_MODES, WORST_CASE


@dataclass(frozen=True)
class DetectionPolicy:
    threshold_x: float = 0.0
    delta_mode: str = WORST_CASE

    def __post_init__(self):
        if not self.threshold_x >= 0:
            raise ValueError("threshold must be non-negative")
        if self.delta_mode not in DELTA_MODES:
            raise ValueError(f"unknown delta mode {self.delta_mode!r}")


def _scalar(v):
    return v if np.ndim(v) else float(v)


def _signal_amplitude(eta, mu):
    return np.sqrt(2.0 * np.multiply(eta, mu))


def qber(eta, mu, x=0.0):
    """Error probability ``0.5*erfc(sqrt(2*eta*mu)*(1+x))``; ``x=0`` is the plain decision."""
    s = _signal_amplitude(eta, mu)
    return _scalar(0.5 * erfc(s * (1.0 + np.asarray(x, dtype=float))))


def abandonment_rate(eta, mu, x=0.0):
    """Fraction of slots falling in the dead zone ``(-x, x)``.

    For ``x > 1`` the first erfc argument is negative; scipy's erfc covers the
    whole real line, which is the reflection ``erfc(-z) = 2 - erfc(z)``.
    """
    s = _signal_amplitude(eta, mu)
    x = np.asarray(x, dtype=float)
    below_plus = 0.5 * erfc(s * (1.0 - x))
    below_minus = 0.5 * erfc(s * (1.0 + x))
    return _scalar(np.maximum(below_plus - below_minus, 0.0))


def quadrature_sd(eta, mu):
    """Standard deviation of the normalized homodyne outcome, ``1/(2*sqrt(eta*mu))``.

    With mean +/-1 this makes ``P(outcome < -x)`` equal :func:`qber`.
    """
    n = np.multiply(eta, mu)
    if np.any(np.asarray(n) <= 0):
        raise ValueError("quadrature normalization undefined for eta*mu = 0")
    return _scalar(0.5 / np.sqrt(n))
