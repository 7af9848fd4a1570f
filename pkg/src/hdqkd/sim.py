"""Pulse-level Monte Carlo of phase-encoded decoy-state BB84 with homodyne detection.

Model, per pulse:

* Alice draws a bit, a basis and the state kind (decoy with probability
  ``p_decoy``); the photon number is Poisson with the kind's intensity.
* Honest channel: each photon survives with probability ``eta``; the
  quadrature is drawn for a coherent amplitude ``eta * mu``.
* PNS channel: Eve blocks single photons and keeps one photon of every
  multi-photon pulse, forwarding the rest over a lossless line (optionally
  re-prepared at a rescaled coherent intensity, see :func:`pns_compensation`).
* Bob registers the slot only if at least one photon arrives (probability
  ``p_D = 1 - exp(-eta*mu)`` when honest). Sifting keeps registered slots with
  matching bases; the homodyne outcome is Gaussian with mean +/-1 and
  sd ``quadrature_sd(1, amplitude)`` and is decoded with the double threshold.

Pulses are processed in fixed-size batches, each driven by its own child of a
``SeedSequence``; results therefore do not depend on the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.stats import chisquare, poisson

from .channel import DECOY_VERIFIED, ChannelParams, SourceConfig, multiphoton_prob
from .homodyne import DetectionPolicy, abandonment_rate, qber
from .rates import (
    CLAMPINGS,
    F_EC_DEFAULT,
    PRODUCT,
    Q_BB84,
    DECOY,
    _decoy_eta1,
    rate_at,
)

SIGNAL = "signal"
DECOY_STATE = "decoy"
KINDS = (SIGNAL, DECOY_STATE)
NO_ADVERSARY = "none"
PNS = "pns"
SIGNAL_MATCHED = "signal-matched"
NO_COMPENSATION = "none"
BATCH_SIZE = 1 << 16


class InsufficientStatistics(ValueError):
    pass


@dataclass(frozen=True)
class Pulse:
    bit: int
    basis: int
    state_kind: str
    photon_count: int
    amplitude_scale: float


@dataclass(frozen=True)
class SessionConfig:
    n_pulses: int
    channel: ChannelParams = field(default_factory=ChannelParams)
    source: SourceConfig = field(default_factory=SourceConfig)
    policy: DetectionPolicy = field(default_factory=DetectionPolicy)
    adversary: str = NO_ADVERSARY
    compensation: str = SIGNAL_MATCHED
    rng_seed: int = 0
    f_ec: float = F_EC_DEFAULT
    clamping: str = PRODUCT

    def __post_init__(self):
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")
        if self.adversary not in (NO_ADVERSARY, PNS):
            raise ValueError(f"unknown adversary {self.adversary!r}")
        if self.compensation not in (SIGNAL_MATCHED, NO_COMPENSATION):
            raise ValueError(f"unknown compensation {self.compensation!r}")
        if self.clamping not in CLAMPINGS:
            raise ValueError(f"unknown clamping {self.clamping!r}")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")

    def mu(self, kind: str) -> float:
        return self.source.mu_signal if kind == SIGNAL else self.source.mu_decoy


@dataclass(frozen=True)
class KindStats:
    """Tallies for one state kind. ``pnd_histogram[k]`` counts slots where k photons reached Bob."""

    sent: int = 0
    detected: int = 0
    sifted: int = 0
    accepted: int = 0
    errors: int = 0
    abandoned: int = 0
    tagged: int = 0
    pnd_histogram: tuple = ()

    def merge(self, other: "KindStats") -> "KindStats":
        n = max(len(self.pnd_histogram), len(other.pnd_histogram))
        h = np.zeros(n, dtype=np.int64)
        h[: len(self.pnd_histogram)] += np.asarray(self.pnd_histogram, dtype=np.int64)
        h[: len(other.pnd_histogram)] += np.asarray(other.pnd_histogram, dtype=np.int64)
        return KindStats(
            self.sent + other.sent, self.detected + other.detected,
            self.sifted + other.sifted, self.accepted + other.accepted,
            self.errors + other.errors, self.abandoned + other.abandoned,
            self.tagged + other.tagged, tuple(int(v) for v in h),
        )

    @staticmethod
    def _ratio(num, den):
        return num / den if den else 0.0

    @property
    def gain(self) -> float:
        return self._ratio(self.accepted, self.sent)

    @property
    def qber(self) -> float:
        """Errors among accepted bits."""
        return self._ratio(self.errors, self.accepted)

    @property
    def error_fraction(self) -> float:
        """Errors among sifted slots; the quantity the analytic QBER formula predicts."""
        return self._ratio(self.errors, self.sifted)

    @property
    def abandon_fraction(self) -> float:
        return self._ratio(self.abandoned, self.sifted)

    @property
    def detection_rate(self) -> float:
        return self._ratio(self.detected, self.sent)

    @property
    def multiphoton_fraction(self) -> float:
        return self._ratio(sum(self.pnd_histogram[2:]), self.detected)


@dataclass(frozen=True)
class SimStats:
    seed: int
    n_pulses: int
    signal: KindStats
    decoy: KindStats

    def kind(self, name: str) -> KindStats:
        return self.signal if name == SIGNAL else self.decoy

    def as_dict(self) -> dict:
        out = {"seed": self.seed, "n_pulses": self.n_pulses}
        for name in KINDS:
            ks = self.kind(name)
            d = asdict(ks)
            d["pnd_histogram"] = list(ks.pnd_histogram)
            d.update(gain=ks.gain, qber=ks.qber, error_fraction=ks.error_fraction,
                     abandon_fraction=ks.abandon_fraction)
            out[name] = d
        return out


def _pns_arrays(n_src, compensation, rng):
    """Vectorized PNS transform: returns (forwarded photon counts, amplitudes)."""
    n_src = np.asarray(n_src)
    kept = np.where(n_src >= 2, n_src - 1, 0)
    if compensation is None:
        return kept, kept.astype(float)
    amp = compensation * kept
    # Eve re-prepares a coherent pulse so the forwarded count stays Poissonian
    return rng.poisson(amp), amp


def eve_pns_transform(pulse: Pulse, compensation: float | None = None, rng=None) -> Pulse:
    """Apply the photon-number-splitting attack to one pulse.

    Vacuum passes, single photons are blocked, and from a k-photon pulse Eve
    keeps one photon and forwards ``k - 1`` losslessly. With a compensation
    factor ``c`` the forwarded pulse is a coherent state of mean ``c * (k - 1)``.
    Eve cannot see ``state_kind``, so the factor is the same for every pulse.
    """
    if compensation is not None and rng is None:
        rng = np.random.default_rng()
    n, amp = _pns_arrays(np.array([pulse.photon_count]), compensation, rng)
    return replace(pulse, photon_count=int(n[0]), amplitude_scale=float(amp[0]))


def _expected_gain_honest(eta, mu, x):
    return 0.5 * -math.expm1(-eta * mu) * (1.0 - abandonment_rate(eta, mu, x))


def _expected_gain_pns(mu, x, c):
    kmax = int(mu + 20 * math.sqrt(mu) + 20)
    k = np.arange(2, kmax + 1)
    amp = c * (k - 1)
    reg = -np.expm1(-amp)
    return 0.5 * float(np.sum(poisson.pmf(k, mu) * reg * (1.0 - abandonment_rate(1.0, amp, x))))


def pns_compensation(config: SessionConfig) -> float | None:
    """Eve's global intensity factor, tuned to the signal state's honest gain.

    When no factor reaches the target (the attack is then detectable from the
    signal alone), the gain saturates; Eve uses the smallest factor bringing
    it within a relative 1e-6 of that ceiling.
    """
    if config.compensation == NO_COMPENSATION:
        return None
    mu, x, eta = config.source.mu_signal, config.policy.threshold_x, config.channel.eta
    target = _expected_gain_honest(eta, mu, x)
    c_lo, c_hi = 1e-3, 1e3
    ceiling = _expected_gain_pns(mu, x, c_hi)
    if ceiling < target:
        target = ceiling * (1 - 1e-6)
    if _expected_gain_pns(mu, x, c_lo) >= target:
        return c_lo
    return brentq(lambda c: _expected_gain_pns(mu, x, c) - target, c_lo, c_hi, xtol=1e-12, rtol=1e-12)


def _run_batch(config: SessionConfig, seq: np.random.SeedSequence, size: int, eve_c):
    rng = np.random.Generator(np.random.PCG64(seq))
    src = config.source
    eta = config.channel.eta
    x = config.policy.threshold_x

    bits = rng.integers(0, 2, size)
    alice_basis = rng.integers(0, 2, size)
    is_decoy = rng.random(size) < src.p_decoy
    mu = np.where(is_decoy, src.mu_decoy, src.mu_signal)
    n_src = rng.poisson(mu)
    if config.adversary == PNS:
        n_rx, amp = _pns_arrays(n_src, eve_c, rng)
        eve_holds = n_src >= 2
    else:
        n_rx = rng.binomial(n_src, eta)
        amp = eta * mu
        eve_holds = np.zeros(size, dtype=bool)
    bob_basis = rng.integers(0, 2, size)
    noise = rng.standard_normal(size)

    detected = n_rx >= 1
    sifted = detected & (bob_basis == alice_basis)
    sd = 0.5 / np.sqrt(np.where(amp > 0, amp, 1.0))
    # bit 0 <-> phase 0 or pi/2 (mean +1), bit 1 <-> pi or 3pi/2 (mean -1)
    outcome = (1 - 2 * bits) + sd * noise
    decided_0 = outcome > x
    decided_1 = outcome < -x
    accepted = sifted & (decided_0 | decided_1)
    abandoned = sifted & ~(decided_0 | decided_1)
    errors = accepted & (decided_1 != (bits == 1))

    out = []
    for kind_mask in (~is_decoy, is_decoy):
        out.append(KindStats(
            sent=int(kind_mask.sum()),
            detected=int((detected & kind_mask).sum()),
            sifted=int((sifted & kind_mask).sum()),
            accepted=int((accepted & kind_mask).sum()),
            errors=int((errors & kind_mask).sum()),
            abandoned=int((abandoned & kind_mask).sum()),
            tagged=int((accepted & eve_holds & kind_mask).sum()),
            pnd_histogram=tuple(int(v) for v in np.bincount(n_rx[kind_mask])),
        ))
    return out


def run_session(config: SessionConfig, workers: int = 1) -> SimStats:
    """Simulate ``config.n_pulses`` pulses. Deterministic for a given seed at any ``workers``."""
    n_batches = -(-config.n_pulses // BATCH_SIZE)
    seqs = np.random.SeedSequence(config.rng_seed).spawn(n_batches)
    sizes = [BATCH_SIZE] * (n_batches - 1) + [config.n_pulses - BATCH_SIZE * (n_batches - 1)]
    eve_c = pns_compensation(config) if config.adversary == PNS else None

    def job(i):
        return _run_batch(config, seqs[i], sizes[i], eve_c)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(n_batches)))
    else:
        results = [job(i) for i in range(n_batches)]
    signal, decoy = KindStats(), KindStats()
    for s, d in results:
        signal, decoy = signal.merge(s), decoy.merge(d)
    return SimStats(config.rng_seed, config.n_pulses, signal, decoy)


def honest_expectations(config: SessionConfig, kind: str) -> dict:
    """Honest-channel expectations of the per-kind observables.

    Expected gain (accepted per sent) is ``0.5 * p_D * (1 - a)``; the expected
    QBER among accepted bits is ``e / (1 - a)``.
    """
    eta, mu, x = config.channel.eta, config.mu(kind), config.policy.threshold_x
    if mu == 0:
        return {"gain": 0.0, "qber": 0.0, "e": 0.25, "a": 0.0, "p_D": 0.0}
    e, a = qber(eta, mu, x), abandonment_rate(eta, mu, x)
    p_d = -math.expm1(-eta * mu)
    return {"gain": 0.5 * p_d * (1 - a), "qber": e / (1 - a) if a < 1 else 0.0,
            "e": e, "a": a, "p_D": p_d}


def _zscore(observed, expected, n):
    if n == 0:
        return 0.0
    sd = math.sqrt(expected * (1 - expected) / n)
    if sd == 0:
        return 0.0 if observed == expected else math.inf
    return (observed - expected) / sd


@dataclass(frozen=True)
class DecoyTestResult:
    verdict: str
    z_scores: dict

    @property
    def detected(self) -> bool:
        return self.verdict == "eavesdropping-detected"


def decoy_test(stats: SimStats, config: SessionConfig, z_threshold: float = 5.0,
               min_accepted: int = 1000) -> DecoyTestResult:
    """Compare each state's gain and QBER against honest-channel expectations.

    Any standardized deviation beyond ``z_threshold`` flags eavesdropping.
    """
    for name in KINDS:
        if stats.kind(name).accepted < min_accepted:
            raise InsufficientStatistics(
                f"insufficient statistics: {name} has {stats.kind(name).accepted} accepted slots")
    z = {}
    for name in KINDS:
        ks, exp = stats.kind(name), honest_expectations(config, name)
        z[f"{name}.gain"] = _zscore(ks.gain, exp["gain"], ks.sent)
        z[f"{name}.qber"] = _zscore(ks.qber, exp["qber"], ks.accepted)
    flagged = any(abs(v) > z_threshold for v in z.values())
    return DecoyTestResult("eavesdropping-detected" if flagged else "clean", z)


@dataclass(frozen=True)
class RateEstimate:
    signal_rate: float
    signal_sd: float
    decoy_rate: float
    decoy_sd: float
    rate: float
    sd: float
    degenerate: bool

    @property
    def relative_sd(self) -> float:
        return self.sd / self.rate if self.rate > 0 else math.inf


def _kind_rate(ks: KindStats, mu, config: SessionConfig):
    """Plug observed p_D, e, a (and the tagged ratio) into the decoy rate; delta-method sd."""
    if ks.accepted == 0 or ks.sent == 0:
        return 0.0, math.inf
    delta_mode = config.policy.delta_mode
    p_mult = multiphoton_prob(mu)

    def rate(p, e, a, d):
        if delta_mode != DECOY_VERIFIED:
            d = min(p_mult / p, 1.0) if p > 0 else 0.0
        e, a, d = min(max(e, 0.0), 0.5), min(max(a, 0.0), 1.0), min(max(d, 0.0), 1.0)
        eta1 = float(_decoy_eta1(e, a, d, config.f_ec, config.clamping))
        return Q_BB84 * p * max(eta1, 0.0)

    theta = np.array([ks.detection_rate, ks.error_fraction, ks.abandon_fraction,
                      ks.multiphoton_fraction])
    p, e, a, d = theta
    cov = np.zeros((4, 4))
    cov[0, 0] = p * (1 - p) / ks.sent
    cov[1, 1] = e * (1 - e) / ks.sifted
    cov[2, 2] = a * (1 - a) / ks.sifted
    cov[1, 2] = cov[2, 1] = -e * a / ks.sifted
    cov[3, 3] = d * (1 - d) / ks.detected
    grad = np.zeros(4)
    for i in range(4):
        h = max(1e-3 * math.sqrt(cov[i, i]), 1e-9)
        up, dn = theta.copy(), theta.copy()
        up[i] = min(theta[i] + h, 1.0)
        dn[i] = max(theta[i] - h, 0.0)
        if up[i] > dn[i]:
            grad[i] = (rate(*up) - rate(*dn)) / (up[i] - dn[i])
    return float(rate(*theta)), float(math.sqrt(max(grad @ cov @ grad, 0.0)))


def simulate_rate(config: SessionConfig, stats: SimStats | None = None, workers: int = 1) -> RateEstimate:
    """Empirical secure rate from observed tallies, with propagated binomial uncertainty."""
    if stats is None:
        stats = run_session(config, workers)
    r_s, sd_s = _kind_rate(stats.signal, config.source.mu_signal, config)
    p = config.source.p_decoy
    if p > 0:
        r_d, sd_d = _kind_rate(stats.decoy, config.source.mu_decoy, config)
    else:
        r_d, sd_d = 0.0, 0.0
    rate = (1 - p) * r_s + p * r_d
    sd = math.hypot((1 - p) * sd_s, p * sd_d)
    return RateEstimate(r_s, sd_s, r_d, sd_d, float(rate), sd, degenerate=math.isinf(sd))


def analytic_rates(config: SessionConfig) -> dict:
    """Analytic decoy-mode rates at the config's operating point, per kind and combined."""
    out = {}
    for name in KINDS:
        mu = config.mu(name)
        out[name] = 0.0 if mu == 0 else rate_at(
            config.channel, mu, config.policy, DECOY, config.f_ec, Q_BB84, config.clamping).rate
    p = config.source.p_decoy
    out["combined"] = (1 - p) * out[SIGNAL] + p * out[DECOY_STATE]
    return out


def photon_number_pvalue(histogram, mean: float, min_expected: float = 5.0) -> float:
    """Chi-square p-value of a photon-count histogram against Poisson(mean).

    Bins are merged from the tail until each expected count reaches ``min_expected``.
    """
    obs = np.asarray(histogram, dtype=float)
    total = obs.sum()
    if total == 0:
        raise ValueError("empty histogram")
    if mean == 0:
        return 1.0 if obs[1:].sum() == 0 else 0.0
    kmax = max(len(obs), int(mean + 20 * math.sqrt(mean) + 20))
    obs = np.pad(obs, (0, kmax - len(obs)))
    exp = poisson.pmf(np.arange(kmax), mean) * total
    exp[-1] += poisson.sf(kmax - 1, mean) * total
    # pool from the top down so every bin has enough expected mass
    o_bins, e_bins = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(obs[::-1], exp[::-1]):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            o_bins.append(o_acc)
            e_bins.append(e_acc)
            o_acc = e_acc = 0.0
    if o_acc or e_acc:
        if o_bins:
            o_bins[-1] += o_acc
            e_bins[-1] += e_acc
        else:
            o_bins.append(o_acc)
            e_bins.append(e_acc)
    if len(o_bins) < 2:
        return 1.0
    f_exp = np.array(e_bins)
    f_obs = np.array(o_bins)
    return float(chisquare(f_obs, f_exp * f_obs.sum() / f_exp.sum()).pvalue)
