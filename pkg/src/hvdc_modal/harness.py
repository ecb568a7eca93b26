"""Scenario execution: single runs, parameter sweeps and engine cross-checks."""
from __future__ import annotations

import csv
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analytic import (EXPECTED_SIGNATURES, PolaritySignature, dominant, mode_waveforms,
                       polarity_grid, predict_signature, sign_of)
from .relay import (RelayDecision, RelaySettings, classify, condition, expected_verdict,
                    trigger_trace)
from .scenario import Scenario
from .system import FaultKind, FaultScenario
from .traces import write_traces_csv
from .transient import MeasurementSet, build_network, relay_tap, simulate

MODES = ("simulate", "analytic", "both")


def simulate_scenario(sc: Scenario, stiff=None, dt=None, t_end=None) -> MeasurementSet:
    sim = sc.sim
    if stiff is not None and stiff != sim.stiff_sources:
        sim = replace(sim, stiff_sources=stiff, preload_current=0.0 if not stiff else sim.preload_current)
    if dt is not None:
        sim = replace(sim, dt=dt)
    model = build_network(sc.topology, sc.fault, sc.system, sim)
    return simulate(model, t_end or sim.t_end, sim.dt)


def simulated_signature(ms: MeasurementSet, settings: RelaySettings) -> PolaritySignature:
    """Signs of the dominant relay-point mode voltages after inception.

    Uses the raw (unconditioned) traces over ``polarity_window``; the
    zero-mode sign is 0 inside the ``e_set`` band.
    """
    v0, v1 = relay_tap(ms)
    t = ms.t_fault or 0.0
    k0 = v0.index_at(t)
    k1 = v0.index_at(t + settings.polarity_window)
    w = slice(k0, k1 + 1)
    d0, d1 = dominant(v0.samples[w]), dominant(v1.samples[w])
    return PolaritySignature(sign_of(d0, settings.e_set), sign_of(d1), d0, d1)


@dataclass(frozen=True, eq=False)
class RunResult:
    scenario: Scenario
    measurements: MeasurementSet | None = None
    decision: RelayDecision | None = None
    signature: PolaritySignature | None = None
    dv_peak: float | None = None
    analytic: tuple | None = None          # (Inversion v_l120, Inversion v_l121)
    analytic_signature: PolaritySignature | None = None
    oracle: "OracleReport | None" = None


def run_scenario(sc: Scenario, mode="simulate") -> RunResult:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    out = {}
    kind = sc.fault.kind
    if mode in ("simulate", "both"):
        ms = simulate_scenario(sc)
        inputs = condition(ms, sc.relay, sc.noise.snr_db, sc.noise.seed)
        out["measurements"] = ms
        out["decision"] = classify(inputs, sc.relay)
        out["dv_peak"] = float(trigger_trace(inputs, sc.relay).samples.max())
        if kind is not FaultKind.NONE:
            out["signature"] = simulated_signature(ms, sc.relay)
    if mode in ("analytic", "both") and kind is not FaultKind.NONE:
        grid = polarity_grid(sc.relay.polarity_window)
        out["analytic"] = mode_waveforms(kind, sc.fault.location_d, sc.fault.r_f, sc.system,
                                         sc.topology, grid, alpha=sc.sim.ptp_alpha)
        out["analytic_signature"] = predict_signature(
            kind, sc.fault.location_d, sc.fault.r_f, sc.system, sc.topology,
            e_set=sc.relay.e_set, window=sc.relay.polarity_window, alpha=sc.sim.ptp_alpha)
    if mode == "both" and kind is not FaultKind.NONE:
        out["oracle"] = compare_oracle(sc)
    return RunResult(sc, **out)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def _write_rows(path, rows, header=None):
    header = header or list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row.get(h)) for h in header])


def write_run(result: RunResult, out_dir, plots=True):
    """Write traces, mode voltages, the decision report and figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    sc = result.scenario
    if result.measurements is not None:
        ms = result.measurements
        p = out / "traces.csv"
        write_traces_csv(p, ms.traces())
        written.append(p)
        p = out / "modes.csv"
        write_traces_csv(p, list(relay_tap(ms)))
        written.append(p)
    if result.decision is not None:
        row = {"scenario": sc.id, "kind": sc.fault.kind.value,
               "expected": expected_verdict(sc.fault.kind).value}
        row.update(result.decision.as_row())
        row["dv_peak_kV"] = result.dv_peak / 1e3
        if result.signature is not None:
            row["sign_v_l120"] = result.signature.sign_v_l0
            row["sign_v_l121"] = result.signature.sign_v_l1
        p = out / "decision.csv"
        _write_rows(p, [row])
        written.append(p)
    if result.analytic is not None:
        inv0, inv1 = result.analytic
        p = out / "analytic_modes.csv"
        _write_rows(p, [{"t_after_fault_s": float(t), "v_l120_V": float(a), "v_l121_V": float(b),
                         "v_l120_alt_V": float(c), "v_l121_alt_V": float(d)}
                        for t, a, b, c, d in zip(inv0.t, inv0.values, inv1.values,
                                                 inv0.alt, inv1.alt)])
        written.append(p)
    if result.oracle is not None:
        p = out / "oracle.csv"
        write_oracle(p, result.oracle)
        written.append(p)
    if plots:
        from . import plotting

        written += plotting.plot_run(result, out)
    return written


# -- oracle ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OracleReport:
    scenario_id: str
    kind: FaultKind
    t: np.ndarray
    sim_v_l121: np.ndarray
    ana_v_l121: np.ndarray
    sim_v_l120: np.ndarray
    ana_v_l120: np.ndarray
    extremum_index: int
    rel_error: float
    inversion_discrepancy: float
    tolerance: float = 0.05

    @property
    def passed(self):
        return self.rel_error <= self.tolerance

    @property
    def zero_mode_ratio_sim(self):
        return float(np.max(np.abs(self.sim_v_l120)) / np.max(np.abs(self.sim_v_l121)))

    @property
    def zero_mode_ratio_analytic(self):
        return float(np.max(np.abs(self.ana_v_l120)) / np.max(np.abs(self.ana_v_l121)))

    @property
    def polarity(self):
        return (sign_of(dominant(self.sim_v_l121)), sign_of(dominant(self.ana_v_l121)))


def first_extremum(x):
    """Index of the first local maximum of |x| (the start counts)."""
    a = np.abs(np.asarray(x))
    for k in range(a.size - 1):
        if a[k] >= a[k + 1] and (k == 0 or a[k] >= a[k - 1]):
            return k
    return a.size - 1


def compare_oracle(sc: Scenario, tolerance=0.05, dt=None) -> OracleReport:
    """Analytic inversion against the stiff-source simulation, both on the
    analytic grid (``polarity_window`` at 10 us steps after inception)."""
    kind = sc.fault.kind
    if kind is FaultKind.NONE:
        raise ValueError("the oracle needs a fault")
    grid = polarity_grid(sc.relay.polarity_window)
    dt = dt or sc.sim.dt
    t_end = sc.fault.t_fault + grid[-1] + 5 * dt
    ms = simulate_scenario(sc, stiff=True, dt=dt, t_end=t_end)
    v0, v1 = relay_tap(ms)
    k_f = v1.index_at(sc.fault.t_fault)
    idx = k_f + np.rint(grid / dt).astype(int)
    sim0, sim1 = v0.samples[idx], v1.samples[idx]
    inv0, inv1 = mode_waveforms(kind, sc.fault.location_d, sc.fault.r_f, sc.system,
                                sc.topology, grid, alpha=sc.sim.ptp_alpha)
    j = first_extremum(inv1.values)
    err = abs(sim1[j] - inv1.values[j]) / abs(inv1.values[j])
    return OracleReport(sc.id, kind, grid, sim1, inv1.values, sim0, inv0.values, j, float(err),
                        max(inv0.discrepancy, inv1.discrepancy), tolerance)


def write_oracle(path, rep: OracleReport):
    rows = [{"t_after_fault_s": float(t), "sim_v_l121_V": float(a), "analytic_v_l121_V": float(b),
             "sim_v_l120_V": float(c), "analytic_v_l120_V": float(d)}
            for t, a, b, c, d in zip(rep.t, rep.sim_v_l121, rep.ana_v_l121,
                                     rep.sim_v_l120, rep.ana_v_l120)]
    _write_rows(path, rows)


# -- sweeps -----------------------------------------------------------------------

PIVOT_KINDS = (FaultKind.INTERNAL_P_PTG, FaultKind.INTERNAL_PTP)
GRID_D = (0.1, 0.5, 0.9)
GRID_RF = (0.0, 100.0, 200.0)
GRID_CLR = (0.09, 0.13, 0.17)
ALL_FAULTS = tuple(k for k in FaultKind if k is not FaultKind.NONE)


@dataclass(frozen=True)
class SweepSpec:
    kinds: tuple = ALL_FAULTS
    location_d: tuple = GRID_D
    r_f: tuple = GRID_RF
    clr: tuple = GRID_CLR
    snr_db: tuple = (math.inf,)
    seeds: tuple = (0,)
    out_dir: str | None = None
    mode: str = "simulate"

    def __post_init__(self):
        for name in ("kinds", "location_d", "r_f", "clr", "snr_db", "seeds"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"sweep list '{name}' is empty")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "kinds", tuple(FaultKind(k) for k in self.kinds))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def physical_points(self):
        """(kind, d, r_f, clr) combinations; d is None for external faults."""
        pts = []
        for kind in self.kinds:
            ds = self.location_d if kind.is_internal else (None,)
            rfs = self.r_f if kind is not FaultKind.NONE else (0.0,)
            for d, rf, clr in itertools.product(ds, rfs, self.clr):
                pts.append((kind, d, float(rf), float(clr)))
        return pts

    def noise_points(self):
        pts = []
        for snr in self.snr_db:
            seeds = (None,) if math.isinf(snr) else self.seeds
            pts += [(float(snr), s) for s in seeds]
        return pts

    @property
    def size(self):
        return len(self.physical_points()) * len(self.noise_points())


def point_id(kind, d, r_f, clr):
    loc = "ext" if d is None else f"d{d:g}"
    return f"{FaultKind(kind).value}_{loc}_rf{r_f:g}_clr{clr * 1e3:g}mH"


def _scenario_for(base: Scenario, kind, d, r_f, clr) -> Scenario:
    fault = FaultScenario(kind, d, r_f, base.fault.t_fault)
    return base._replace(topology=base.topology.with_clr(clr), fault=fault,
                         id=point_id(kind, d, r_f, clr))


SWEEP_HEADER = ("scenario", "kind", "location_d", "r_f", "clr", "snr_db", "seed",
                "dv_peak_kV", "trigger_kV", "v_l120_kV", "v_l121_kV", "delta_i_kA",
                "sign_v_l120", "sign_v_l121", "expected_sign_v_l120", "expected_sign_v_l121",
                "polarity_pass", "verdict", "expected", "pass", "trigger_time_s",
                "decision_time_s", "latency_ms", "error")


def _evaluate_point(args):
    base, (kind, d, rf, clr), noise_pts, mode = args
    sc = _scenario_for(base, kind, d, rf, clr)
    common = {"scenario": sc.id, "kind": kind.value, "location_d": d, "r_f": rf, "clr": clr,
              "expected": expected_verdict(kind).value}
    rows = []
    try:
        if mode == "analytic":
            sig = predict_signature(kind, d, rf, sc.system, sc.topology, e_set=sc.relay.e_set,
                                    window=sc.relay.polarity_window, alpha=sc.sim.ptp_alpha)
            exp = EXPECTED_SIGNATURES.get(kind)
            rows.append({**common, "v_l120_kV": sig.dominant_v_l0 / 1e3,
                         "v_l121_kV": sig.dominant_v_l1 / 1e3,
                         "sign_v_l120": sig.sign_v_l0, "sign_v_l121": sig.sign_v_l1,
                         "expected_sign_v_l120": exp[0] if exp else None,
                         "expected_sign_v_l121": exp[1] if exp else None,
                         "polarity_pass": exp is None or sig.pair == exp})
            return rows
        ms = simulate_scenario(sc)
        sig = simulated_signature(ms, sc.relay) if kind is not FaultKind.NONE else None
        exp = EXPECTED_SIGNATURES.get(kind)
        for snr, seed in noise_pts:
            inputs = condition(ms, sc.relay, snr, seed)
            dec = classify(inputs, sc.relay)
            dv_peak = float(trigger_trace(inputs, sc.relay).samples.max())
            n_pole = kind.faulted_pole == "n"
            row = {**common, "snr_db": snr, "seed": seed, "dv_peak_kV": dv_peak / 1e3,
                   "trigger_kV": dec.trigger_value / 1e3, "v_l120_kV": dec.v_l120 / 1e3,
                   "v_l121_kV": dec.v_l121 / 1e3,
                   "delta_i_kA": (dec.delta_i_n if n_pole else dec.delta_i_p) / 1e3,
                   "verdict": dec.verdict.value,
                   "pass": dec.verdict is expected_verdict(kind),
                   "trigger_time_s": dec.trigger_time, "decision_time_s": dec.decision_time,
                   "latency_ms": dec.latency_ms}
            if sig is not None:
                row.update({"sign_v_l120": sig.sign_v_l0, "sign_v_l121": sig.sign_v_l1,
                            "expected_sign_v_l120": exp[0], "expected_sign_v_l121": exp[1],
                            "polarity_pass": sig.pair == exp})
            rows.append(row)
    except Exception as exc:  # recorded per row; the sweep goes on
        rows = [{**common, "snr_db": s, "seed": sd, "pass": False,
                 "error": f"{type(exc).__name__}: {exc}"} for s, sd in noise_pts]
    return rows


@dataclass(frozen=True, eq=False)
class SweepReport:
    spec: SweepSpec
    rows: list = field(default_factory=list)

    @property
    def passed(self):
        return sum(1 for r in self.rows if r.get("pass"))

    def pivot(self, value="dv_peak_kV"):
        """Pivot by d then (R_f, CLR): {kind: {d: {(r_f, clr): value}}}, noiseless rows only."""
        out = {}
        for r in self.rows:
            snr = r.get("snr_db")
            if r.get(value) is None or (snr is not None and not math.isinf(snr)):
                continue
            if r["location_d"] is None:
                continue
            out.setdefault(r["kind"], {}).setdefault(r["location_d"], {})[(r["r_f"], r["clr"])] = r[value]
        return out

    def write(self, out_dir, plots=True):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "sweep.csv"]
        _write_rows(paths[0], self.rows, list(SWEEP_HEADER))
        piv = self.pivot()
        if piv:
            p = out / "dv_pivot.csv"
            write_pivot(p, piv)
            paths.append(p)
            if plots:
                from . import plotting

                paths += plotting.plot_pivot(piv, out)
        return paths


def write_pivot(path, piv):
    rfs = sorted({k[0] for kind in piv.values() for row in kind.values() for k in row})
    clrs = sorted({k[1] for kind in piv.values() for row in kind.values() for k in row})
    cols = [(rf, c) for rf in rfs for c in clrs]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "location_d"] + [f"rf{rf:g}_clr{c * 1e3:g}mH" for rf, c in cols])
        for kind in sorted(piv):
            for d in sorted(piv[kind]):
                row = piv[kind][d]
                w.writerow([kind, _fmt(d)] + [_fmt(row.get(c)) for c in cols])


def sweep(spec: SweepSpec, base: Scenario | None = None, workers=1, progress=None) -> SweepReport:
    """Run the grid; rows come back sorted by scenario key."""
    from .scenario import default_scenario

    base = base or default_scenario()
    pts = spec.physical_points()
    noise = spec.noise_points()
    jobs = [(base, p, noise, spec.mode) for p in pts]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = []
        for j in jobs:
            results.append(_evaluate_point(j))
            if progress:
                progress(len(results), len(jobs))
    rows = [r for rs in results for r in rs]

    def key(r):
        snr = r.get("snr_db")
        return (r["kind"], -1.0 if r["location_d"] is None else r["location_d"], r["r_f"],
                r["clr"], math.inf if snr is None else snr,
                -1 if r.get("seed") is None else r["seed"])

    rows.sort(key=key)
    report = SweepReport(spec, rows)
    if spec.out_dir:
        report.write(spec.out_dir)
    return report


def default_workers():
    return max(1, (os.cpu_count() or 1))
