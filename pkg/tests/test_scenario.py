import math

import pytest
from hypothesis import given, strategies as st

from hvdc_modal.errors import ScenarioParseError
from hvdc_modal.scenario import default_scenario, dump_scenario, load_scenario
from hvdc_modal.system import FaultKind

FULL = """\
id: demo
system:
  mmc:
    arm_inductance: 0.05
topology:
  clr: 130e-3
  lines:
    "14": {length: 150e3}
fault:
  kind: InternalP_PTG
  location_d: 0.3
  r_f: 100
  t_fault: 1e-3
relay:
  u_set: 120e3
  snr_db: 30
  seed: 9
sim:
  t_end: 8e-3
"""


def test_full_scenario_parses():
    sc = load_scenario(FULL)
    assert sc.id == "demo"
    assert sc.topology.clr["12"] == pytest.approx(0.13)
    assert sc.topology.line("14").length == 150e3
    assert sc.fault.kind is FaultKind.INTERNAL_P_PTG and sc.fault.r_f == 100.0
    assert sc.system.mmc1.arm_inductance == sc.system.mmc2.arm_inductance == 0.05
    assert sc.relay.u_set == 120e3
    assert sc.noise.snr_db == 30.0 and sc.noise.seed == 9
    assert sc.sim.t_end == 8e-3


def test_round_trip():
    sc = load_scenario(FULL)
    assert load_scenario(dump_scenario(sc)) == sc


def test_location_out_of_range_names_field_and_line():
    text = FULL.replace("location_d: 0.3", "location_d: 1.5")
    with pytest.raises(ScenarioParseError) as err:
        load_scenario(text)
    assert err.value.field == "fault.location_d"
    assert err.value.line == 11


def test_unit_strings_rejected():
    with pytest.raises(ScenarioParseError) as err:
        load_scenario(FULL.replace("clr: 130e-3", "clr: 130 mH"))
    assert err.value.field == "topology.clr" and err.value.line == 6


@pytest.mark.parametrize("text, field", [
    ("fault: {kind: Sideways}", "fault.kind"),
    ("bogus: 1", None),
    ("relay: {u_set: -5}", "relay"),
    ("fault: {kind: InternalPTP}", "fault"),
    ("sim: {stiff_sources: 3}", "sim.stiff_sources"),
])
def test_invalid_entries(text, field):
    with pytest.raises(ScenarioParseError) as err:
        load_scenario(text)
    if field:
        assert err.value.field.startswith(field)


def test_malformed_yaml():
    with pytest.raises(ScenarioParseError):
        load_scenario("fault: [1, 2")


def test_empty_fault_section_is_no_fault():
    sc = load_scenario("fault: {}\n")
    assert sc.fault.kind is FaultKind.NONE


def test_empty_text_gives_defaults():
    sc = load_scenario("")
    assert sc.relay.u_set == 100e3 and math.isinf(sc.noise.snr_db)


kinds = st.sampled_from([k for k in FaultKind if k is not FaultKind.NONE])


@given(kinds, st.floats(0, 1), st.floats(0, 1e3), st.floats(0.09, 0.17))
def test_round_trip_property(kind, d, r_f, clr):
    sc = default_scenario(kind, d, r_f, clr)
    assert load_scenario(dump_scenario(sc)) == sc
