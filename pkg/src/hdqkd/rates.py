"""Secure-rate and attack-bound formulas.

Two post-processing models are provided:

* ``gllp``: plain GLLP efficiency with worst-case tagging and no threshold,
  ``eta1 = -f H(e) + (1 - D) [1 - H(e / (1 - D))]``.
* ``decoy``: decoy-state efficiency with the displaced-threshold abandonment
  penalty, ``eta1 = (1 - 2a) [-f H(e) + (1 - D) (1 - H(e))]``.

The rate is always ``R = q * p_D * max(eta1, 0)``.

Clamping of the decoy product is selectable. ``"product"`` clamps the whole
product at zero, so two negative factors give a positive rate; this is what
produces the minimum channel length for thresholds above one. ``"factorwise"``
zeroes the rate as soon as either factor is non-positive and is the
conservative choice.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import bisect
from scipy.special import entr

from .channel import (
    WORST_CASE,
    ChannelParams,
    detection_prob,
    multiphoton_prob,
    transmittance,
)
from .homodyne import DetectionPolicy, abandonment_rate, qber

F_EC_DEFAULT = 1.22
Q_BB84 = 0.5
GLLP = "gllp"
DECOY = "decoy"
MODES = (GLLP, DECOY)
PRODUCT = "product"
FACTORWISE = "factorwise"
CLAMPINGS = (PRODUCT, FACTORWISE)


class NoFiniteBound(ValueError):
    pass


@dataclass(frozen=True)
class RateReport:
    """Every intermediate quantity of one operating point. Rates in secret bits per pulse."""

    mode: str
    eta: float
    q: float
    p_D: float
    e: float
    a: float
    delta_ratio: float
    eta1: float
    eta_pp: float
    rate: float
    f_ec: float

    def as_dict(self):
        return asdict(self)


def binary_entropy(p):
    """H(p) in bits, with H(0) = H(1) = 0."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError("binary entropy argument must lie in [0, 1]")
    h = (entr(arr) + entr(1.0 - arr)) / math.log(2.0)
    return h if h.ndim else float(h)


def _entropy(p):
    # unchecked variant for internal arrays already known to be in range
    return (entr(p) + entr(1.0 - p)) / math.log(2.0)


def pns_margin(mu, eta):
    """Left side of the PNS detectability inequality; the attack is detectable iff >= 0."""
    mu = np.asarray(mu, dtype=float)
    t = np.multiply(eta, mu)
    m = (1.0 + mu + mu**2 / 2.0) * np.exp(-mu) - (1.0 + t) * np.exp(-t)
    return m if np.ndim(m) else float(m)


def pns_max_length(mu: float, alpha: float, ceiling: float = 200.0, tol: float = 1e-4) -> float:
    """Longest channel (km) over which a PNS attack is still detectable."""
    if not mu > 0 or not alpha > 0:
        raise ValueError("mu and alpha must be positive")

    def margin(length):
        return pns_margin(mu, transmittance(alpha, length))

    if margin(0.0) < 0:
        raise NoFiniteBound("PNS attack undetectable even at zero length")
    if margin(ceiling) >= 0:
        raise NoFiniteBound(f"no sign change of the PNS margin below {ceiling} km")
    grid = np.linspace(0.0, ceiling, 2001)
    if np.any(np.diff(margin(grid)) > 1e-12):
        raise ArithmeticError("PNS margin is not monotone in length")
    return float(bisect(margin, 0.0, ceiling, xtol=tol / 2))


def _gllp_eta1(e, delta, f_ec):
    delta = np.asarray(delta, dtype=float)
    one_minus = 1.0 - delta
    safe = np.where(one_minus > 0, one_minus, 1.0)
    arg = np.minimum(np.asarray(e) / safe, 0.5)
    # (1 - D) * [1 - H(.)] -> 0 as D -> 1
    tail = np.where(one_minus > 0, one_minus * (1.0 - _entropy(arg)), 0.0)
    return -f_ec * _entropy(np.asarray(e)) + tail


def _decoy_eta1(e, a, delta, f_ec, clamping):
    throughput = 1.0 - 2.0 * np.asarray(a)
    bracket = -f_ec * _entropy(np.asarray(e)) + (1.0 - np.asarray(delta)) * (1.0 - _entropy(np.asarray(e)))
    raw = throughput * bracket
    if clamping == FACTORWISE:
        return np.where((throughput > 0) & (bracket > 0), raw, 0.0)
    return raw


def gllp_eta1(e: float, delta_ratio: float, f_ec: float = F_EC_DEFAULT) -> float:
    """GLLP post-processing efficiency without decoy states.

    The entropy argument ``e/(1-D)`` saturates at 0.5.
    """
    if not 0 <= e <= 0.5:
        raise ValueError("e must lie in [0, 0.5]")
    if not 0 <= delta_ratio < 1:
        raise ValueError("delta_ratio must lie in [0, 1)")
    if f_ec < 1:
        raise ValueError("f_ec must be >= 1")
    return float(_gllp_eta1(e, delta_ratio, f_ec))


def decoy_eta1(e: float, a: float, delta_ratio: float, f_ec: float = F_EC_DEFAULT,
               clamping: str = PRODUCT) -> float:
    """Decoy-state efficiency with the ``(1 - 2a)`` abandonment factor.

    Under ``factorwise`` clamping a non-positive factor returns 0; under
    ``product`` the raw product is returned and the caller takes ``max(., 0)``.
    """
    if not 0 <= e <= 0.5 or not 0 <= a <= 1 or not 0 <= delta_ratio <= 1:
        raise ValueError("e, a, delta_ratio out of range")
    if f_ec < 1:
        raise ValueError("f_ec must be >= 1")
    if clamping not in CLAMPINGS:
        raise ValueError(f"unknown clamping {clamping!r}")
    return float(_decoy_eta1(e, a, delta_ratio, f_ec, clamping))


def secure_rate(q: float, p_D: float, eta_pp: float) -> float:
    return q * p_D * eta_pp


def combined_rate(components) -> float:
    """Weighted sum of per-state rates, ``sum(p_i * R_i)``."""
    components = list(components)
    weights = [w for w, _ in components]
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    if sum(weights) > 1 + 1e-12:
        raise ValueError("weights sum to more than 1")
    return float(sum(w * r for w, r in components))


def rate_components(eta, mu, x, mode=DECOY, delta_mode=WORST_CASE, f_ec=F_EC_DEFAULT,
                    q=Q_BB84, clamping=PRODUCT):
    """Vectorized end-to-end evaluation; returns a dict of broadcast arrays."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if clamping not in CLAMPINGS:
        raise ValueError(f"unknown clamping {clamping!r}")
    eta, mu, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (eta, mu, x)))
    if mode == GLLP:
        x = np.zeros_like(x)
    p_d = detection_prob(eta, mu)
    e = np.asarray(qber(eta, mu, x))
    a = np.zeros_like(e) if mode == GLLP else np.asarray(abandonment_rate(eta, mu, x))
    p_m = multiphoton_prob(mu) if delta_mode == WORST_CASE else multiphoton_prob(eta * mu)
    safe_pd = np.where(p_d > 0, p_d, 1.0)
    delta = np.where(p_d > 0, np.clip(p_m / safe_pd, 0.0, 1.0), 0.0)
    if mode == GLLP:
        eta1 = _gllp_eta1(e, delta, f_ec)
    else:
        eta1 = _decoy_eta1(e, a, delta, f_ec, clamping)
    eta_pp = np.maximum(eta1, 0.0)
    return {"eta": eta, "p_D": p_d, "e": e, "a": a, "delta_ratio": delta,
            "eta1": eta1, "eta_pp": eta_pp, "rate": q * p_d * eta_pp}


def rate_curve(lengths, mu, x, alpha, mode=DECOY, **kw):
    """Secure rate over an array of channel lengths."""
    return rate_components(transmittance(alpha, lengths), mu, x, mode, **kw)["rate"]


def rate_at(channel: ChannelParams, mu: float, policy: DetectionPolicy, mode: str = DECOY,
            f_ec: float = F_EC_DEFAULT, q: float = Q_BB84, clamping: str = PRODUCT) -> RateReport:
    """Full :class:`RateReport` for one operating point.

    ``gllp`` forces the threshold and the abandonment rate to zero.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    c = rate_components(channel.eta, mu, policy.threshold_x, mode, policy.delta_mode,
                        f_ec, q, clamping)
    return RateReport(mode=mode, q=q, f_ec=f_ec, **{k: float(v) for k, v in c.items()})
