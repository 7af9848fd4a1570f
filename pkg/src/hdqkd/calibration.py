"""Mean photon number from homodyne voltage statistics.

The phase spread of the detected signal is ``dphi = V_sd / V_mean``. At
minimum phase/number uncertainty ``dn * dphi = 1/2`` with ``dn**2 = mu`` for a
coherent state, which gives ``mu = 1 / (4 dphi**2)`` (``derived`` mode). The
``as-printed`` mode evaluates ``mu = sqrt(1 / (2 dphi))`` for comparison with
the published form of the relation.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

DERIVED = "derived"
AS_PRINTED = "as-printed"
FORMULA_MODES = (DERIVED, AS_PRINTED)


@dataclass(frozen=True)
class CalibrationRecord:
    v_mean: float
    v_sd: float
    delta_phi: float
    mu_hat: float
    formula_mode: str
    n_samples: int

    def as_dict(self):
        return asdict(self)


def estimate_mu(samples, formula_mode: str = DERIVED) -> CalibrationRecord:
    if formula_mode not in FORMULA_MODES:
        raise ValueError(f"unknown formula mode {formula_mode!r}")
    v = np.asarray(samples, dtype=float)
    if v.ndim != 1 or len(v) < 2:
        raise ValueError("need at least 2 voltage samples")
    v_mean = float(v.mean())
    if not v_mean > 0:
        raise ValueError("mean voltage must be positive")
    v_sd = float(v.std(ddof=1))
    delta_phi = v_sd / v_mean
    if delta_phi == 0:
        raise ValueError("degenerate: zero variance implies unbounded μ")
    if formula_mode == DERIVED:
        mu_hat = 1.0 / (4.0 * delta_phi**2)
    else:
        mu_hat = math.sqrt(1.0 / (2.0 * delta_phi))
    return CalibrationRecord(v_mean, v_sd, delta_phi, mu_hat, formula_mode, len(v))


def read_samples(path) -> list[float]:
    """One decimal number per line; blank lines are skipped."""
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
    return values
