import itertools

import numpy as np
import pytest

from hvdc_modal.analytic import (EXPECTED_SIGNATURES, initial_value, mode_voltage_transfer,
                                 mode_waveforms, predict_signature, z_backward, z_forward,
                                 z_internal)
from hvdc_modal.errors import InvalidParameterError
from hvdc_modal.laplace import invert_laplace
from hvdc_modal.modal import modal_line_inductances
from hvdc_modal.system import FaultKind, MmcParams, SystemParams, Topology

S = np.array([1e2 + 0j, 3e3 + 2e3j, 1e5 + 0j])
D, RF, CLR = (0.1, 0.5, 0.9), (0.0, 100.0, 200.0), (0.09, 0.13, 0.17)
FAULTS = [k for k in FaultKind if k is not FaultKind.NONE]


def test_default_coupling_inductances():
    assert modal_line_inductances(2.512, 1.0048) == pytest.approx((1.5072, 3.5168))
    assert modal_line_inductances(2.0, 0.0) == (2.0, 2.0)


def test_z1_at_dc(system, topology):
    z1, z2, z3, z4 = z_internal(0.1, system, topology)
    assert topology.line("12").R == pytest.approx(8.232)
    assert z1(np.array([0j]))[0].real == pytest.approx(1.6464)
    assert (z1(np.array([0j])) + z2(np.array([0j])))[0].real == pytest.approx(2 * 8.232)


@pytest.mark.parametrize("d", [0.0, 0.3, 1.0])
def test_zero_mode_minus_line_mode(d, system, topology):
    z1, _, z3, _ = z_internal(d, system, topology)
    M = topology.line("12").M
    assert np.allclose(z3(S) - z1(S), 4 * S * d * M)


def test_backward_impedances(system, topology):
    z5, z6, z7 = z_backward(system, topology)
    M = topology.line("12").M
    assert np.allclose(z5(S) - z7(S), -4 * S * M)
    assert abs(z6(np.array([0j]))[0]) == 0.0
    s = np.array([1e9 + 0j])
    eq = system.eq1
    lpar = 2 * topology.clr["14"] * eq.l / (2 * topology.clr["14"] + eq.l)
    assert z6(s)[0].real / s[0].real == pytest.approx(lpar, rel=1e-6)


def test_forward_mirrors_backward(topology):
    a = MmcParams(arm_inductance=0.08, arm_resistance=0.5)
    b = MmcParams()
    sys_ab, sys_ba = SystemParams(a, b), SystemParams(b, a)
    topo = topology.__class__(clr=topology.clr.from_mapping(
        {"12": 0.1, "21": 0.1, "14": 0.12, "23": 0.15}))
    topo_sw = topology.__class__(clr=topology.clr.from_mapping(
        {"12": 0.1, "21": 0.1, "14": 0.15, "23": 0.12}))
    z5, z6, z7 = z_backward(sys_ab, topo)
    z8, z9, z10 = z_forward(sys_ba, topo_sw)
    assert np.allclose(z5(S), z8(S)) and np.allclose(z6(S), z9(S)) and np.allclose(z7(S), z10(S))


def test_forward_dc_limits(system, topology):
    z8, z9, z10 = z_forward(system, topology)
    zero = np.array([0j])
    assert abs(z9(zero)[0]) == 0.0
    assert z10(zero)[0].real == pytest.approx(2 * topology.line("12").R)


def test_ptp_zero_mode_identically_zero(system, topology):
    for kind in (FaultKind.INTERNAL_PTP, FaultKind.EXTERNAL_FORWARD_PTP,
                 FaultKind.EXTERNAL_BACKWARD_PTP):
        tf = mode_voltage_transfer(kind, 0.4 if kind.is_internal else None, 50.0, system, topology)
        assert np.all(tf.v_l0(S) == 0)


def test_n_ptg_mirrors_p_ptg(system, topology):
    p = mode_voltage_transfer(FaultKind.INTERNAL_P_PTG, 0.3, 100.0, system, topology)
    n = mode_voltage_transfer(FaultKind.INTERNAL_N_PTG, 0.3, 100.0, system, topology)
    assert np.allclose(p.v_l1(S), n.v_l1(S))
    assert np.allclose(p.v_l0(S), -n.v_l0(S))


def test_backward_ptg_negative_on_real_axis(system, topology):
    tf = mode_voltage_transfer(FaultKind.EXTERNAL_BACKWARD_PTG, None, 100.0, system, topology)
    s = np.array([10.0, 1e3, 1e5], dtype=complex)
    assert np.all(tf.v_l0(s).real < 0) and np.all(tf.v_l1(s).real < 0)


def test_internal_needs_location(system, topology):
    with pytest.raises(InvalidParameterError):
        mode_voltage_transfer(FaultKind.INTERNAL_PTP, None, 0.0, system, topology)
    with pytest.raises(InvalidParameterError):
        mode_voltage_transfer(FaultKind.NONE, None, 0.0, system, topology)


def test_ptp_alpha_changes_magnitude_not_polarity(system, topology):
    a = predict_signature(FaultKind.INTERNAL_PTP, 0.5, 200.0, system, topology, alpha=0.5)
    b = predict_signature(FaultKind.INTERNAL_PTP, 0.5, 200.0, system, topology, alpha=1.0)
    assert a.pair == b.pair == (0, 1)
    assert b.dominant_v_l1 < a.dominant_v_l1


@pytest.mark.parametrize("kind", FAULTS, ids=lambda k: k.value)
def test_signatures_match_tables_on_grid(kind, system):
    for d, rf, clr in itertools.product(D if kind.is_internal else (None,), RF, CLR):
        sig = predict_signature(kind, d, rf, system, Topology().with_clr(clr))
        assert sig.pair == EXPECTED_SIGNATURES[kind], (d, rf, clr, sig)


def _peak_v_l121(kind, d, rf, clr, system):
    _, inv1 = mode_waveforms(kind, d, rf, system, Topology().with_clr(clr),
                             np.arange(1, 201) * 10e-6)
    return np.max(np.abs(inv1.values))


def test_internal_ptg_line_mode_trends(system):
    k = FaultKind.INTERNAL_P_PTG
    for d, clr in itertools.product(D, CLR):
        v = [_peak_v_l121(k, d, rf, clr, system) for rf in RF]
        assert v[0] >= v[1] >= v[2]
    for rf, clr in itertools.product(RF, CLR):
        v = [_peak_v_l121(k, d, rf, clr, system) for d in D]
        assert v[0] >= v[1] >= v[2]
    for d, rf in itertools.product(D, RF):
        v = [_peak_v_l121(k, d, rf, clr, system) for clr in CLR]
        assert v[0] <= v[1] <= v[2]


@pytest.mark.parametrize("kind", FAULTS, ids=lambda k: k.value)
def test_initial_value_theorem(kind, system, topology):
    tf = mode_voltage_transfer(kind, 0.5 if kind.is_internal else None, 100.0, system, topology)
    v0 = initial_value(tf.v_l1)
    inv = invert_laplace(tf.v_l1, [1e-7])
    assert inv.values[0] == pytest.approx(v0, rel=1e-2)


@pytest.mark.parametrize("kind", FAULTS, ids=lambda k: k.value)
def test_inversion_methods_agree_to_5ms(kind, system, topology):
    grid = np.linspace(10e-6, 5e-3, 120)
    for rf in RF:
        tf = mode_voltage_transfer(kind, 0.5 if kind.is_internal else None, rf, system, topology)
        for F in (tf.v_l0, tf.v_l1):
            assert invert_laplace(F, grid).discrepancy <= 5e-3
