import numpy as np
import pytest

from hdqkd.optimize import (
    EmptyWindow,
    channel_window,
    max_rate_vs_threshold,
    optimal_mu,
    optimal_threshold,
)
from hdqkd.rates import rate_curve

from reference import rate as ref_rate, scan


def _scan_window(x, hi, step=1e-4, **kw):
    pts = scan(lambda l: ref_rate(l, x=x, **kw), 0, hi, step)
    pos = [(l, r) for l, r in pts if r > 0]
    best = max(pos, key=lambda p: p[1])
    return pos[0][0], best[0], pos[-1][0], best[1]


def test_window_below_one_peaks_at_zero():
    w = channel_window(0.9, 1.65, 0.21)
    assert w.l_min == 0.0 and w.l_opt == 0.0
    lo, opt, hi, rmax = _scan_window(0.9, 3.0)
    assert (lo, opt) == (0.0, 0.0)
    assert w.l_max == pytest.approx(hi, abs=2e-4)
    assert w.r_opt == pytest.approx(rmax, rel=1e-9)


def test_window_above_one_has_minimum_length():
    w = channel_window(2.0, 1.65, 0.21)
    lo, opt, hi, rmax = _scan_window(2.0, 10.0)
    assert w.l_min > 0
    assert w.l_min == pytest.approx(lo, abs=2e-4)
    assert w.l_max == pytest.approx(hi, abs=2e-4)
    assert w.l_opt == pytest.approx(opt, abs=2e-3)
    assert w.r_opt >= rmax - 1e-12


@pytest.mark.parametrize("x", [0.0, 0.5, 0.9, 1.2, 2.0, 4.0])
def test_window_invariants(x):
    w = channel_window(x, 1.65, 0.21)
    assert 0 <= w.l_min <= w.l_opt <= w.l_max
    eps = 2e-3
    r = lambda l: float(rate_curve(np.array([l]), 1.65, x, 0.21)[0])
    assert r(w.l_max - eps) > 0 and r(w.l_max + eps) == 0
    if w.l_min > 0:
        assert r(w.l_min + eps) > 0 and r(w.l_min - eps) == 0
    inside = np.linspace(w.l_min, w.l_max, 200)[1:-1]
    assert np.all(rate_curve(inside, 1.65, x, 0.21) > 0)


@pytest.mark.parametrize("x", [0.0, 0.3, 0.6, 0.9, 0.99])
def test_thresholds_below_one_start_at_zero(x):
    w = channel_window(x, 1.65, 0.21)
    assert w.l_min == 0.0 and w.l_opt == 0.0


def test_window_growth_over_thresholds():
    xs = [1.2, 1.6, 2.0, 2.5, 3.0, 4.0, 5.0]
    ws = [channel_window(x, 1.65, 0.21) for x in xs]
    assert all(b.l_min >= a.l_min for a, b in zip(ws, ws[1:]))
    assert all(b.l_max >= a.l_max for a, b in zip(ws, ws[1:]))


def test_empty_window():
    with pytest.raises(EmptyWindow, match="empty window"):
        channel_window(2.0, 1.65, 0.21, clamping="factorwise")


def test_optimal_threshold_zero_length_against_grid():
    o = optimal_threshold(0.0, 1.65, 0.21)
    xs = np.arange(0, 10.0005, 1e-3)
    grid = [ref_rate(0.0, x=x) for x in xs]
    assert o.value >= max(grid) - 1e-9
    assert o.argmax == pytest.approx(xs[int(np.argmax(grid))], abs=1e-3)
    # zero threshold is not optimal even without loss
    assert o.argmax == pytest.approx(0.2268, abs=1e-3)
    assert o.value > ref_rate(0.0, x=0.0)


def test_optimal_threshold_three_km_against_grid():
    o = optimal_threshold(3.0, 1.65, 0.21)
    xs = np.arange(0, 10.0005, 1e-3)
    grid = [ref_rate(3.0, x=x) for x in xs]
    assert o.argmax == pytest.approx(xs[int(np.argmax(grid))], abs=2e-3)
    assert o.value == pytest.approx(max(grid), abs=1e-6)


def test_optimal_threshold_grows_with_length():
    assert optimal_threshold(2.0, 1.65, 0.21).argmax < optimal_threshold(8.0, 1.65, 0.21).argmax


def test_optimal_threshold_random_pairs_match_grid():
    rng = np.random.default_rng(2024)
    xs = np.arange(0, 10.0005, 1e-3)
    for length, mu in zip(rng.uniform(0, 12, 20), rng.uniform(0.3, 3.0, 20)):
        o = optimal_threshold(length, mu, 0.21)
        best = float(np.max(rate_curve(np.full_like(xs, length), mu, xs, 0.21)))
        assert o.value >= best - 1e-6


def test_optimal_threshold_empty():
    o = optimal_threshold(150.0, 1.65, 0.21)
    assert (o.argmax, o.value, o.method) == (0.0, 0.0, "none")


def test_max_rate_vs_threshold():
    curve = max_rate_vs_threshold(np.linspace(0, 10, 21), 1.65, 0.21)
    assert curve[0][2] == pytest.approx(ref_rate(0.0, x=0.0), rel=1e-12)
    assert all(np.isfinite(r) and r >= 0 for _, _, r in curve)
    at_09 = max_rate_vs_threshold([0.9], 1.65, 0.21)[0]
    assert at_09[1] == 0.0
    assert at_09[2] == pytest.approx(0.0321, abs=2e-4)
    for x, length, _ in curve:
        if x < 1:
            assert length == 0.0
        elif x > 1.1:
            assert length > 0


@pytest.mark.parametrize("mode", ["decoy", "gllp"])
def test_optimal_mu_matches_grid(mode):
    o = optimal_mu(0.0, 0.0, 0.21, (0.01, 5.0), mode)
    mus = np.arange(0.01, 5.0, 1e-3)
    vals = [ref_rate(0.0, mu=m, x=0.0, mode=mode) for m in mus]
    i = int(np.argmax(vals))
    assert o.argmax == pytest.approx(mus[i], abs=2e-3)
    assert o.value >= vals[i] - 1e-12
    assert not o.at_boundary
    # unimodal: rises to the peak, then falls
    v = np.array(vals)
    assert np.all(np.diff(v[: i + 1]) >= -1e-15) and np.all(np.diff(v[i:]) <= 1e-15)


def test_optimal_mu_limits():
    assert ref_rate(0.0, mu=1e-6) < 1e-5
    assert ref_rate(0.0, mu=20.0, mode="gllp") < 1e-6
    o = optimal_mu(0.0, 0.0, 0.21, (0.01, 1.0))
    assert o.at_boundary and o.argmax == pytest.approx(1.0, abs=1e-6)
    # below ~0.6 photons per pulse the error rate alone kills the key
    assert optimal_mu(0.0, 0.0, 0.21, (0.01, 0.5)).method == "none"
    with pytest.raises(ValueError):
        optimal_mu(0.0, 0.0, 0.21, (1.0, 0.5))
