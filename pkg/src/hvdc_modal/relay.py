"""Relay-side signal conditioning and the fault classification procedure.

Everything here is causal: each output sample depends only on the current
and earlier inputs, so the batch functions and :class:`StreamingRelay`
produce the same decisions.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .analytic import dominant, sign_of
from .errors import InvalidParameterError
from .modal import SQRT2
from .system import FaultKind
from .traces import Trace


class Verdict(str, Enum):
    NO_FAULT = "NoFault"
    INTERNAL_PTP = "InternalPTP"
    INTERNAL_P_PTG = "InternalP_PTG"
    INTERNAL_N_PTG = "InternalN_PTG"
    EXTERNAL_FORWARD = "ExternalForward"
    EXTERNAL_BACKWARD = "ExternalBackward"


def expected_verdict(kind) -> Verdict:
    """Ground-truth verdict for a fault kind (direction only for external faults)."""
    kind = FaultKind(kind)
    if kind is FaultKind.NONE:
        return Verdict.NO_FAULT
    if kind.is_internal:
        return Verdict(kind.value)
    return Verdict.EXTERNAL_FORWARD if kind.direction == "forward" else Verdict.EXTERNAL_BACKWARD


@dataclass(frozen=True)
class RelaySettings:
    u_set: float = 100e3
    e_set: float = 10e3
    i_set: float = 2e3
    rolling_window: int = 50
    delta_window: float = 0.5e-3
    polarity_window: float = 2e-3
    sample_rate: float = 50e3
    use_filter: bool = True

    def __post_init__(self):
        for name in ("u_set", "e_set", "i_set", "delta_window", "polarity_window", "sample_rate"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidParameterError(f"{name} must be finite and > 0, got {v}")
        if int(self.rolling_window) != self.rolling_window or self.rolling_window < 1:
            raise InvalidParameterError("rolling_window must be an integer >= 1")

    @property
    def dt(self):
        return 1.0 / self.sample_rate

    def samples(self, seconds):
        return int(round(seconds * self.sample_rate))


# -- conditioning ------------------------------------------------------------

def inject_wgn(trace: Trace, snr_db, seed=None, window_start=None) -> Trace:
    """Add white Gaussian noise at ``snr_db`` relative to the signal power.

    Signal power is the mean square over samples at or after
    ``window_start`` (default: the whole trace).  ``snr_db = inf`` returns
    the trace unchanged.  ``seed`` may be an int or a numpy SeedSequence.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return trace
    if not np.isfinite(snr_db):
        raise InvalidParameterError(f"snr_db must be finite or +inf, got {snr_db}")
    k0 = 0 if window_start is None else trace.index_at(window_start)
    ref = trace.samples[k0:]
    power = float(np.mean(ref ** 2)) if ref.size else 0.0
    if power == 0.0:
        raise InvalidParameterError(f"trace {trace.name!r} has zero power; SNR is undefined")
    sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    return trace.with_samples(trace.samples + rng.normal(0.0, sigma, trace.samples.size))


def rolling_mean(trace: Trace, window) -> Trace:
    """Causal moving average; the first ``window - 1`` outputs average the prefix."""
    window = int(window)
    if window < 1:
        raise InvalidParameterError("window must be >= 1")
    if window == 1:
        return trace
    x = trace.samples
    csum = np.concatenate([[0.0], np.cumsum(x)])
    k = np.arange(1, x.size + 1)
    lo = np.maximum(k - window, 0)
    return trace.with_samples((csum[k] - csum[lo]) / (k - lo))


def _lag(trace: Trace, delta_window):
    lag = int(round(delta_window / trace.dt))
    if delta_window < trace.dt * (1 - 1e-9) or lag < 1:
        raise InvalidParameterError(
            f"delta window {delta_window} s is shorter than one sample ({trace.dt} s)")
    return lag


def windowed_delta(trace: Trace, delta_window) -> Trace:
    """|x(t) - x(t - delta_window)|; the first samples compare against x(t0)."""
    lag = _lag(trace, delta_window)
    x = trace.samples
    past = np.concatenate([np.full(min(lag, x.size), x[0]), x[:-lag]])[: x.size]
    return trace.with_samples(np.abs(x - past), name=f"d_{trace.name}")


def derivative(trace: Trace) -> Trace:
    """Backward-difference rate of change; a diagnostic only."""
    x = trace.samples
    return trace.with_samples(np.diff(x, prepend=x[0]) / trace.dt,
                              name=f"ddt_{trace.name}", unit=f"{trace.unit}/s")


@dataclass(frozen=True)
class RelayInputs:
    """Conditioned, time-aligned relay measurements."""

    v_clr_p: Trace
    v_clr_n: Trace
    i_p: Trace
    i_n: Trace

    def __post_init__(self):
        ref = self.v_clr_p
        for tr in (self.v_clr_n, self.i_p, self.i_n):
            if (len(tr), tr.t0, tr.dt) != (len(ref), ref.t0, ref.dt):
                raise InvalidParameterError("relay inputs are not time-aligned")

    @property
    def v_pp(self):
        return self.v_clr_p.with_samples(self.v_clr_p.samples - self.v_clr_n.samples, name="v_clr_pp")

    @property
    def v_l120(self):
        return self.v_clr_p.with_samples(
            (self.v_clr_p.samples + self.v_clr_n.samples) / SQRT2, name="v_l120")

    @property
    def v_l121(self):
        return self.v_clr_p.with_samples(
            (self.v_clr_p.samples - self.v_clr_n.samples) / SQRT2, name="v_l121")


def condition(ms, settings: RelaySettings | None = None, snr_db=math.inf, seed=None,
              noise_from=None) -> RelayInputs:
    """Resample to the relay rate, add noise, apply the rolling mean.

    ``ms`` is anything with ``v_clr_p``, ``v_clr_n``, ``i_p`` and ``i_n``
    traces.  Each trace gets its own child stream of ``seed``.  Noise power
    is referenced to the window starting at ``noise_from`` (default: the
    fault time of ``ms`` when it has one).
    """
    settings = settings or RelaySettings()
    traces = [ms.v_clr_p, ms.v_clr_n, ms.i_p, ms.i_n]
    ratio = settings.dt / traces[0].dt
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-6 * ratio:
        raise InvalidParameterError(
            f"relay sample period {settings.dt} s is not a multiple of {traces[0].dt} s")
    traces = [tr.decimate(factor) for tr in traces]
    if noise_from is None:
        noise_from = getattr(ms, "t_fault", None)
    if not (math.isinf(snr_db) and snr_db > 0):
        streams = np.random.SeedSequence(seed).spawn(len(traces))
        traces = [inject_wgn(tr, snr_db, s, noise_from) for tr, s in zip(traces, streams)]
    if settings.use_filter:
        traces = [rolling_mean(tr, settings.rolling_window) for tr in traces]
    return RelayInputs(*traces)


# -- decision ------------------------------------------------------------------

@dataclass(frozen=True)
class RelayDecision:
    verdict: Verdict
    trigger_value: float          # max |dV_CLR| seen, volt
    v_l120: float = 0.0           # signed dominant values, volt
    v_l121: float = 0.0
    delta_i_p: float = 0.0        # max |di| in the polarity window, ampere
    delta_i_n: float = 0.0
    trigger_time: float | None = None
    decision_time: float | None = None
    flags: tuple = ()

    @property
    def latency_ms(self):
        if self.trigger_time is None or self.decision_time is None:
            return None
        return 1e3 * (self.decision_time - self.trigger_time)

    def as_row(self):
        return {
            "verdict": self.verdict.value,
            "trigger_kV": self.trigger_value / 1e3,
            "v_l120_kV": self.v_l120 / 1e3,
            "v_l121_kV": self.v_l121 / 1e3,
            "delta_i_p_kA": self.delta_i_p / 1e3,
            "delta_i_n_kA": self.delta_i_n / 1e3,
            "trigger_time_s": self.trigger_time,
            "decision_time_s": self.decision_time,
            "latency_ms": self.latency_ms,
            "flags": ";".join(self.flags),
        }


def decide(trigger_value, v_l120, v_l121, delta_i_p, delta_i_n=0.0,
           settings: RelaySettings | None = None):
    """The five-step procedure on already extracted evidence.

    Returns ``(verdict, flags)``.  Threshold equality counts as a
    violation.
    """
    s = settings or RelaySettings()
    if trigger_value < s.u_set:
        return Verdict.NO_FAULT, ()
    ptg = abs(v_l120) > s.e_set
    sign1 = sign_of(v_l121)
    if not ptg:
        if sign1 < 0:
            return Verdict.EXTERNAL_BACKWARD, ()
    else:
        if sign_of(v_l120) < 0 and sign1 < 0:
            return Verdict.EXTERNAL_BACKWARD, ()
    flags = ()
    n_pole = ptg and v_l120 < 0
    delta_i = delta_i_n if n_pole else delta_i_p
    if delta_i < s.i_set:
        return Verdict.EXTERNAL_FORWARD, flags
    if not ptg:
        return Verdict.INTERNAL_PTP, flags
    if v_l120 == 0.0:
        return Verdict.INTERNAL_P_PTG, ("zero_v_l120_tiebreak",)
    return (Verdict.INTERNAL_P_PTG if v_l120 > 0 else Verdict.INTERNAL_N_PTG), flags


def trigger_trace(inputs: RelayInputs, settings: RelaySettings | None = None) -> Trace:
    """|dV_CLR|: windowed change of the pole-to-pole CLR voltage."""
    s = settings or RelaySettings()
    d = windowed_delta(inputs.v_pp, s.delta_window)
    return d.with_samples(d.samples, name="dv_clr")


def classify(inputs: RelayInputs, settings: RelaySettings | None = None) -> RelayDecision:
    """Run the procedure on conditioned traces.

    The trigger quantity is the windowed change of the pole-to-pole CLR
    voltage.  Polarity and current evidence are taken over
    ``polarity_window`` starting at the first triggering sample, and the
    decision is stamped at the end of that window.
    """
    s = settings or RelaySettings()
    dv = trigger_trace(inputs, s).samples
    hit = np.flatnonzero(dv >= s.u_set)
    if hit.size == 0:
        return RelayDecision(Verdict.NO_FAULT, float(dv.max()))
    k = int(hit[0])
    n = inputs.v_clr_p.samples.size
    end = min(k + s.samples(s.polarity_window), n)
    w = slice(k, end + 1)
    v0 = dominant(inputs.v_l120.samples[w])
    v1 = dominant(inputs.v_l121.samples[w])
    dip = float(np.max(windowed_delta(inputs.i_p, s.delta_window).samples[w]))
    din = float(np.max(windowed_delta(inputs.i_n, s.delta_window).samples[w]))
    verdict, flags = decide(float(dv[w].max()), v0, v1, dip, din, s)
    t = inputs.v_clr_p.t
    if end >= n:
        flags = flags + ("truncated_window",)
    return RelayDecision(verdict, float(dv[w].max()), v0, v1, dip, din,
                         float(t[k]), float(t[min(end, n - 1)]), flags)


# -- streaming ---------------------------------------------------------------

class _CausalMean:
    def __init__(self, window):
        self.buf = deque(maxlen=window)

    def push(self, x):
        self.buf.append(x)
        return math.fsum(self.buf) / len(self.buf)


class _CausalDelta:
    def __init__(self, lag):
        self.buf = deque(maxlen=lag + 1)

    def push(self, x):
        if not self.buf:
            self.buf.extend([x] * self.buf.maxlen)
        else:
            self.buf.append(x)
        return abs(self.buf[-1] - self.buf[0])


@dataclass
class StreamingRelay:
    """Sample-at-a-time relay with bounded memory.

    Feed raw samples at the relay rate with :meth:`push`; it returns a
    :class:`RelayDecision` once the polarity window after the trigger has
    elapsed, and ``None`` before that.  ``finish`` closes a run that ended
    before a decision.
    """

    settings: RelaySettings = field(default_factory=RelaySettings)
    t0: float = 0.0

    def __post_init__(self):
        s = self.settings
        w = s.rolling_window if s.use_filter else 1
        self._means = [_CausalMean(w) for _ in range(4)]
        lag = s.samples(s.delta_window)
        if lag < 1:
            raise InvalidParameterError("delta window is shorter than one relay sample")
        self._dv = _CausalDelta(lag)
        self._dip = _CausalDelta(lag)
        self._din = _CausalDelta(lag)
        self._span = s.samples(s.polarity_window)
        self._k = -1
        self._peak_dv = 0.0
        self._trig = None
        self._win = None
        self.decision = None

    def push(self, v_clr_p, v_clr_n, i_p, i_n):
        if self.decision is not None:
            return self.decision
        self._k += 1
        vp, vn, ip, inn = (m.push(x) for m, x in zip(self._means, (v_clr_p, v_clr_n, i_p, i_n)))
        dv = self._dv.push(vp - vn)
        dip = self._dip.push(ip)
        din = self._din.push(inn)
        self._peak_dv = max(self._peak_dv, dv)
        if self._trig is None and dv >= self.settings.u_set:
            self._trig = self._k
            self._win = {"v0": 0.0, "v1": 0.0, "dip": 0.0, "din": 0.0, "dv": 0.0}
        if self._trig is not None:
            w = self._win
            v0, v1 = float((vp + vn) / SQRT2), float((vp - vn) / SQRT2)
            if abs(v0) > abs(w["v0"]):
                w["v0"] = v0
            if abs(v1) > abs(w["v1"]):
                w["v1"] = v1
            w["dip"] = max(w["dip"], dip)
            w["din"] = max(w["din"], din)
            w["dv"] = max(w["dv"], dv)
            if self._k - self._trig >= self._span:
                self.decision = self._decide(())
                return self.decision
        return None

    def _decide(self, flags):
        s = self.settings
        dt = s.dt
        if self._trig is None:
            return RelayDecision(Verdict.NO_FAULT, self._peak_dv)
        w = self._win
        verdict, f = decide(w["dv"], w["v0"], w["v1"], w["dip"], w["din"], s)
        return RelayDecision(verdict, w["dv"], w["v0"], w["v1"], w["dip"], w["din"],
                             self.t0 + self._trig * dt, self.t0 + self._k * dt, f + flags)

    def finish(self):
        if self.decision is None:
            flags = ("truncated_window",) if self._trig is not None else ()
            self.decision = self._decide(flags)
        return self.decision


def settings_with(settings: RelaySettings, **changes) -> RelaySettings:
    return replace(settings, **changes)
