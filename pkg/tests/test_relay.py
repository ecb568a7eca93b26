import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from hvdc_modal.acceptance import AcceptanceContext
from hvdc_modal.errors import InvalidParameterError
from hvdc_modal.harness import simulate_scenario
from hvdc_modal.relay import (RelaySettings, StreamingRelay, Verdict, classify, condition,
                              decide, derivative, expected_verdict, inject_wgn, rolling_mean,
                              windowed_delta)
from hvdc_modal.scenario import default_scenario
from hvdc_modal.system import FaultKind
from hvdc_modal.traces import Trace


def _tr(x, dt=20e-6):
    return Trace("x", "V", 0.0, dt, np.asarray(x, float))


@pytest.fixture(scope="module")
def ptp():
    sc = default_scenario(FaultKind.INTERNAL_PTP, 0.1, 0.0, 0.09)
    return sc, simulate_scenario(sc)


@pytest.fixture(scope="module")
def grid():
    return AcceptanceContext()


# -- conditioning ------------------------------------------------------------

def test_infinite_snr_is_identity():
    tr = _tr(np.sin(np.arange(100)))
    assert inject_wgn(tr, math.inf, seed=1) is tr


def test_noise_is_zero_mean_and_scaled():
    tr = _tr(np.ones(10 ** 6))
    noisy = inject_wgn(tr, 20.0, seed=7)
    e = noisy.samples - 1.0
    sigma = math.sqrt(10 ** -2)
    assert abs(e.mean()) < 4 * sigma / 1000
    assert e.std() == pytest.approx(sigma, rel=1e-2)


def test_noise_is_seeded():
    tr = _tr(np.arange(1.0, 50.0))
    a, b = inject_wgn(tr, 10.0, seed=3), inject_wgn(tr, 10.0, seed=3)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, inject_wgn(tr, 10.0, seed=4).samples)


def test_zero_power_rejected():
    with pytest.raises(InvalidParameterError):
        inject_wgn(_tr(np.zeros(10)), 30.0, seed=0)


def test_noise_power_referenced_after_window_start():
    tr = _tr(np.r_[np.zeros(100), np.full(100, 2.0)])
    noisy = inject_wgn(tr, 0.0, seed=1, window_start=tr.t[100])
    assert np.std(noisy.samples - tr.samples) == pytest.approx(2.0, rel=0.2)


def test_rolling_mean_identity_and_constant():
    tr = _tr(np.random.default_rng(0).normal(size=30))
    assert np.array_equal(rolling_mean(tr, 1).samples, tr.samples)
    assert np.allclose(rolling_mean(_tr(np.full(80, 3.5)), 50).samples, 3.5)


def test_rolling_mean_step_ramp():
    k = 60
    x = np.r_[np.zeros(k), np.ones(100)]
    y = rolling_mean(_tr(x), 50).samples
    assert y.size == x.size
    assert y[k + 48] < 1.0 and y[k + 49] == pytest.approx(1.0)
    assert y[k] == pytest.approx(1 / 50)


def test_windowed_delta_constant_and_ramp():
    dt = 20e-6
    assert np.all(windowed_delta(_tr(np.full(60, 4.0)), 0.5e-3).samples == 0)
    m = 1e5
    ramp = _tr(m * dt * np.arange(200))
    d = windowed_delta(ramp, 0.5e-3).samples
    assert np.allclose(d[25:], m * 0.5e-3)


def test_windowed_delta_rejects_subsample_window():
    with pytest.raises(InvalidParameterError):
        windowed_delta(_tr(np.ones(10)), 1e-6)


def test_derivative_of_ramp():
    d = derivative(_tr(3.0 * np.arange(10) * 20e-6)).samples
    assert np.allclose(d[1:], 3.0)


# -- decision procedure --------------------------------------------------------

def test_decide_internal_ptp():
    v, _ = decide(592e3, 0.1e3, 50e3, 6e3)
    assert v is Verdict.INTERNAL_PTP


def test_decide_below_trigger():
    for v0, v1, di in [(0.0, 0.0, 0.0), (300e3, -300e3, 9e3), (-50e3, 50e3, 9e3)]:
        assert decide(80e3, v0, v1, di)[0] is Verdict.NO_FAULT


def test_decide_forward_boundary():
    assert decide(150e3, 30e3, 40e3, 1.2e3)[0] is Verdict.EXTERNAL_FORWARD


def test_decide_backward_and_subtypes():
    assert decide(200e3, 0.0, -50e3, 9e3)[0] is Verdict.EXTERNAL_BACKWARD
    assert decide(200e3, -30e3, -50e3, 9e3)[0] is Verdict.EXTERNAL_BACKWARD
    assert decide(200e3, 30e3, 50e3, 9e3)[0] is Verdict.INTERNAL_P_PTG
    assert decide(200e3, -30e3, 50e3, 0.0, 9e3)[0] is Verdict.INTERNAL_N_PTG
    # N-pole faults are judged on the negative-pole current
    assert decide(200e3, -30e3, 50e3, 9e3, 0.0)[0] is Verdict.EXTERNAL_FORWARD


def test_threshold_equality_counts_as_violation():
    s = RelaySettings()
    assert decide(s.u_set, 0.0, 1e3, s.i_set)[0] is Verdict.INTERNAL_PTP
    assert decide(s.u_set, s.e_set, 1e3, s.i_set)[0] is Verdict.INTERNAL_PTP


def test_expected_verdicts():
    assert expected_verdict("ExternalForwardPTG") is Verdict.EXTERNAL_FORWARD
    assert expected_verdict(FaultKind.NONE) is Verdict.NO_FAULT
    assert expected_verdict(FaultKind.INTERNAL_N_PTG) is Verdict.INTERNAL_N_PTG


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.floats(0, 1e6), finite, finite, st.floats(0, 1e5), st.floats(0, 1e5))
def test_decide_is_total(dv, v0, v1, dip, din):
    verdict, flags = decide(dv, v0, v1, dip, din)
    assert isinstance(verdict, Verdict) and isinstance(flags, tuple)
    assert decide(dv, v0, v1, dip, din) == (verdict, flags)


@hsettings(max_examples=200)
@given(st.floats(0, 1e6), finite, finite, st.floats(0, 1e5), st.floats(0, 1e5),
       st.floats(1e3, 1e6), st.floats(0, 1e6))
def test_raising_u_set_only_silences(dv, v0, v1, dip, din, u1, extra):
    lo = RelaySettings(u_set=u1)
    hi = RelaySettings(u_set=u1 + extra + 1.0)
    a, _ = decide(dv, v0, v1, dip, din, lo)
    b, _ = decide(dv, v0, v1, dip, din, hi)
    assert b is a or b is Verdict.NO_FAULT


# -- on simulated traces -------------------------------------------------------

def test_classify_bolted_ptp(ptp):
    sc, ms = ptp
    dec = classify(condition(ms, sc.relay), sc.relay)
    assert dec.trigger_time is not None
    assert dec.latency_ms == pytest.approx(2.0)
    row = dec.as_row()
    assert row["verdict"] == dec.verdict.value and row["latency_ms"] == dec.latency_ms


def test_classify_is_deterministic(ptp):
    sc, ms = ptp
    a = classify(condition(ms, sc.relay, 30.0, seed=5), sc.relay)
    b = classify(condition(ms, sc.relay, 30.0, seed=5), sc.relay)
    assert a == b


def test_noise_at_30db_keeps_ptp_verdict(ptp):
    sc, ms = ptp
    clean = classify(condition(ms, sc.relay), sc.relay).verdict
    for seed in range(10):
        assert classify(condition(ms, sc.relay, 30.0, seed), sc.relay).verdict is clean


@pytest.mark.parametrize("kind", [FaultKind.INTERNAL_PTP, FaultKind.INTERNAL_N_PTG,
                                  FaultKind.EXTERNAL_FORWARD_PTP, FaultKind.NONE])
def test_streaming_matches_batch(kind):
    sc = default_scenario(kind, 0.1, 0.0, 0.09)
    ms = simulate_scenario(sc)
    batch = classify(condition(ms, sc.relay), sc.relay)
    raw = condition(ms, replace(sc.relay, use_filter=False))
    relay = StreamingRelay(sc.relay)
    cols = [raw.v_clr_p.samples, raw.v_clr_n.samples, raw.i_p.samples, raw.i_n.samples]
    for row in zip(*cols):
        if relay.push(*row) is not None:
            break
    stream = relay.finish()
    assert stream.verdict is batch.verdict
    assert stream.trigger_value == pytest.approx(batch.trigger_value, rel=1e-9)
    if batch.trigger_time is not None:
        assert stream.trigger_time == pytest.approx(batch.trigger_time)
        assert stream.decision_time == pytest.approx(batch.decision_time)
        assert stream.v_l121 == pytest.approx(batch.v_l121, rel=1e-9)


def test_monotone_u_set_on_grid(grid):
    for p in grid.points():
        base = grid.noiseless(p)
        for u in (150e3, 300e3):
            dec = grid.noiseless(p, replace(grid.base.relay, u_set=u))
            assert dec.verdict in (base.verdict, Verdict.NO_FAULT), p


def test_filter_invariance_on_grid(grid):
    differ = []
    unfiltered = replace(grid.base.relay, use_filter=False)
    for p in grid.points():
        a = grid.noiseless(p).verdict
        b = grid.noiseless(p, unfiltered).verdict
        if a is not b:
            differ.append((p[0].value, p[1], p[2], p[3], a.value, b.value))
    assert not differ, f"{len(differ)} grid points change verdict: {differ[:5]}"
