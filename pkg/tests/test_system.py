import math
import warnings

import pytest
from hypothesis import given, strategies as st

from hvdc_modal.errors import InvalidParameterError
from hvdc_modal.system import (ClrSet, FaultKind, FaultScenario, LineParams, MmcParams,
                               SystemParams, Topology, line_totals, mmc_equivalent)


def test_mmc_equivalent_table_values():
    eq = mmc_equivalent(MmcParams())
    assert eq.r == pytest.approx(0.56667, abs=1e-5)
    assert eq.c == pytest.approx(45e-6, rel=1e-12)
    assert eq.l == pytest.approx(2 * 0.1 / 3, rel=1e-15)


def test_zero_arm_inductance_rejected():
    with pytest.raises(InvalidParameterError):
        MmcParams(arm_inductance=0.0)


@pytest.mark.parametrize("kw", [{"sm_count": 0}, {"sm_capacitance": -1e-3},
                                {"dc_voltage": 0.0}, {"arm_resistance": -0.1},
                                {"arm_resistance": math.nan}])
def test_invalid_mmc_params(kw):
    with pytest.raises(InvalidParameterError):
        MmcParams(**kw)


@given(k=st.floats(0.01, 100.0))
def test_equivalent_scales_linearly(k):
    base = mmc_equivalent(MmcParams())
    scaled = mmc_equivalent(MmcParams(arm_resistance=0.85 * k, arm_inductance=0.1 * k,
                                      sm_capacitance=1.5e-3 * k))
    assert scaled.r == pytest.approx(k * base.r, rel=1e-12)
    assert scaled.l == pytest.approx(k * base.l, rel=1e-12)
    assert scaled.c == pytest.approx(k * base.c, rel=1e-12)


def test_line_totals_per_metre_times_length():
    R, L, M = line_totals(LineParams(length=200e3, l_per_m=1.256e-5))
    assert R == pytest.approx(8.232)
    assert L == pytest.approx(2.512)
    assert M == pytest.approx(0.4 * 2.512)


@given(f=st.floats(0.1, 10.0))
def test_line_totals_linear_in_length(f):
    a = line_totals(LineParams(length=100e3))
    b = line_totals(LineParams(length=100e3 * f))
    for x, y in zip(a, b):
        assert y == pytest.approx(f * x, rel=1e-12)


def test_line_rejects_mutual_at_or_above_self():
    with pytest.raises(InvalidParameterError):
        LineParams(m_per_m=1.256e-8)
    with pytest.raises(InvalidParameterError):
        LineParams(r_per_m=-1.0)
    with pytest.raises(InvalidParameterError):
        LineParams(length=0.0)


def test_clr_uniform_and_range_warning():
    clr = ClrSet.uniform(0.13)
    assert all(v == 0.13 for v in clr.as_dict().values())
    with pytest.warns(UserWarning):
        ClrSet.uniform(0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ClrSet.uniform(0.17)


def test_clr_requires_all_ends():
    with pytest.raises(InvalidParameterError):
        ClrSet.from_mapping({"12": 0.1})


def test_fault_scenario_location_rules():
    assert FaultScenario().kind is FaultKind.NONE
    with pytest.raises(InvalidParameterError):
        FaultScenario(FaultKind.INTERNAL_PTP)
    with pytest.raises(InvalidParameterError):
        FaultScenario(FaultKind.INTERNAL_PTP, 1.5)
    with pytest.raises(InvalidParameterError):
        FaultScenario(FaultKind.EXTERNAL_FORWARD_PTG, 0.5)
    with pytest.raises(InvalidParameterError):
        FaultScenario(FaultKind.INTERNAL_P_PTG, 0.5, r_f=-1.0)
    assert FaultScenario(FaultKind.INTERNAL_P_PTG, 0.0, 0.0).r_f == 0.0


def test_fault_kind_properties():
    assert FaultKind.INTERNAL_N_PTG.faulted_pole == "n"
    assert FaultKind.EXTERNAL_BACKWARD_PTP.direction == "backward"
    assert FaultKind.EXTERNAL_FORWARD_PTP.is_ptp and not FaultKind.EXTERNAL_FORWARD_PTP.is_internal


def test_default_topology_inventory():
    topo = Topology()
    assert [n for n, _ in topo.lines] == ["12", "14", "23"]
    assert topo.relay == (1, "12")
    assert topo.inventory() == {"converters": 2, "terminal_capacitances": 2, "clr": 4,
                                "line_segments": 3, "poles": 2, "fault_branches": 0}
    assert topo.inventory(FaultKind.INTERNAL_PTP)["line_segments"] == 4
    c14, c23 = topo.terminal_capacitances(SystemParams())
    assert c14 == c23 == pytest.approx(45e-6)


def test_converters_share_dc_voltage():
    with pytest.raises(InvalidParameterError):
        SystemParams(mmc2=MmcParams(dc_voltage=8e5))
