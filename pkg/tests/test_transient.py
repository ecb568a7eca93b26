from dataclasses import replace

import numpy as np
import pytest

from hvdc_modal.errors import BuildError, InvalidParameterError, SolverError
from hvdc_modal.harness import simulate_scenario
from hvdc_modal.relay import RelaySettings, classify, condition, trigger_trace
from hvdc_modal.scenario import default_scenario
from hvdc_modal.system import FaultKind, FaultScenario, LineParams, MmcParams, Topology
from hvdc_modal.transient import (SimSettings, build_netlist, build_network, energy_drift,
                                  relay_tap, simulate)


def _sim(kind, d=0.5, r_f=0.0, clr=None, **sim):
    sc = default_scenario(kind, d, r_f, clr)
    if sim:
        sc = sc._replace(sim=replace(sc.sim, **sim))
    return sc, simulate_scenario(sc)


def test_no_fault_holds_steady_state():
    model = build_network(Topology(), None)
    ms = simulate(model, 0.1)
    assert np.max(np.abs(ms.v_clr_p.samples)) < 1e3
    assert np.max(np.abs(ms.v_clr_n.samples)) < 1e3


def test_internal_fault_splits_line(system):
    topo = Topology()
    net = build_netlist(system, topo, FaultScenario(FaultKind.INTERNAL_PTP, 0.5, 0.0))
    L = {b.name: b.L for b in net.branches}
    L12 = topo.line("12").L
    assert L["seg1_p"] == pytest.approx(0.5 * L12)
    assert L["seg2_p"] == pytest.approx(0.5 * L12)
    assert "line12_p" not in L


def test_ptg_adds_single_conductance(system):
    net = build_netlist(system, Topology(), FaultScenario(FaultKind.INTERNAL_P_PTG, 0.3, 10.0))
    assert len(net.faults) == 1
    f = net.faults[0]
    assert f.a == "f12_p" and f.b == "gnd" and f.R == 10.0


def test_mutual_not_below_self_rejected():
    with pytest.raises(InvalidParameterError):
        LineParams(l_per_m=1e-8, m_per_m=1e-8)
    assert issubclass(InvalidParameterError, ValueError)


def test_nonpositive_branch_inductance_rejected():
    from hvdc_modal.transient import Netlist

    with pytest.raises(BuildError):
        Netlist().branch("x", "a", "b", 1.0, 0.0)


def test_self_convergence_default_ptp():
    sc = default_scenario()
    a = simulate_scenario(sc, dt=2e-6)
    b = simulate_scenario(sc, dt=1e-6)
    pa = np.max(np.abs(a.v_clr_p.samples))
    pb = np.max(np.abs(b.v_clr_p.samples))
    assert abs(pa - pb) / pb < 5e-3


def test_high_impedance_fault_never_triggers():
    sc, ms = _sim(FaultKind.INTERNAL_P_PTG, r_f=1e6)
    dv = trigger_trace(condition(ms, sc.relay), sc.relay)
    assert np.all(dv.samples < sc.relay.u_set)


def test_bolted_ptp_near_bus_magnitude():
    sc, ms = _sim(FaultKind.INTERNAL_PTP, d=0.1, clr=0.09)
    peak = trigger_trace(condition(ms, sc.relay), sc.relay).samples.max()
    assert 0.8 * 592e3 <= peak <= 1.2 * 592e3, f"|dV_CLR| peak {peak / 1e3:.1f} kV"


def test_bolted_ptp_near_bus_exceeds_u_set_quickly():
    sc, ms = _sim(FaultKind.INTERNAL_PTP, d=0.1, clr=0.09)
    dv = trigger_trace(condition(ms, sc.relay), sc.relay)
    k = np.flatnonzero(dv.samples >= sc.relay.u_set)
    assert k.size and dv.t[k[0]] - ms.t_fault <= 1e-3
    assert 100e3 < dv.samples.max() < 1e6


@pytest.mark.parametrize("kind", [FaultKind.INTERNAL_PTP, FaultKind.INTERNAL_P_PTG,
                                  FaultKind.EXTERNAL_FORWARD_PTP])
def test_energy_balance(kind):
    _, ms = _sim(kind, r_f=50.0)
    assert energy_drift(ms) < 1e-3


def test_ptp_is_pole_symmetric():
    _, ms = _sim(FaultKind.INTERNAL_PTP, d=0.3)
    assert np.allclose(ms.v_clr_p.samples, -ms.v_clr_n.samples, atol=1e-6 * 1e6)
    v0, _ = relay_tap(ms)
    assert np.max(np.abs(v0.samples)) < 1.0


def test_fault_closes_at_first_step_after_inception():
    _, ms = _sim(FaultKind.INTERNAL_PTP, d=0.5)
    k = int(np.ceil(ms.t_fault / ms.v_clr_p.dt - 1e-9))
    v = ms.v_clr_p.samples
    assert np.all(np.abs(v[:k]) < 1.0)
    assert abs(v[k + 1]) > 1e3


def test_preload_starts_in_equilibrium():
    sim = SimSettings(stiff_sources=True, preload_current=1e3)
    model = build_network(Topology(), None, settings=sim)
    ms = simulate(model, 5e-3)
    assert ms.i_p.samples[0] == pytest.approx(1e3, rel=1e-6)
    assert np.ptp(ms.i_p.samples) < 1e-3
    assert np.max(np.abs(ms.v_clr_p.samples)) < 1.0


def test_preload_requires_stiff_sources():
    with pytest.raises(ValueError):
        SimSettings(preload_current=1e3)


def test_divergence_reports_last_valid_time():
    model = build_network(Topology(), FaultScenario(FaultKind.INTERNAL_PTP, 0.5, 0.0),
                          settings=SimSettings(stiff_sources=True))
    bad = replace(model, x0=np.full(model.x0.size, np.nan))
    with pytest.raises(SolverError) as err:
        simulate(bad, 2e-3)
    assert err.value.last_valid_time is not None


def test_stiff_mode_is_hurwitz():
    model = build_network(Topology(), FaultScenario(FaultKind.INTERNAL_PTP, 0.5, 10.0),
                          settings=SimSettings(stiff_sources=True))
    assert np.all(model.post.eigenvalues.real < 0)


def test_ramp_produces_no_fault():
    sc = default_scenario(FaultKind.NONE)
    sc = sc._replace(sim=replace(sc.sim, dc_ramp=0.1, ramp_time=0.1, t_end=0.1))
    ms = simulate_scenario(sc)
    assert classify(condition(ms, sc.relay), sc.relay).verdict.value == "NoFault"


def test_relay_settings_validation():
    with pytest.raises(InvalidParameterError):
        RelaySettings(u_set=-1.0)
    with pytest.raises(InvalidParameterError):
        MmcParams(dc_voltage=float("nan"))
