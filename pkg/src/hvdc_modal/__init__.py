"""Modal-voltage fault classification for a two-terminal section of a meshed
bipolar MMC-HVDC grid.

The package pairs a closed-form s-domain model of the relay-point mode
voltages with a lumped transient simulator of the same network, and runs
both through a relay that separates internal faults from external ones.
"""
from .analytic import (EXPECTED_SIGNATURES, PolaritySignature, mode_voltage_transfer,
                       mode_waveforms, predict_signature)
from .errors import (BuildError, InvalidParameterError, NumericalInstabilityError,
                     ScenarioParseError, SolverError)
from .harness import (SweepReport, SweepSpec, compare_oracle, run_scenario, sweep,
                      write_run)
from .laplace import invert_laplace
from .modal import ModeQuantities, PoleQuantities, modal_to_phase, phase_to_modal
from .relay import (RelayDecision, RelaySettings, StreamingRelay, Verdict, classify,
                    condition)
from .scenario import Scenario, default_scenario, dump_scenario, load_scenario
from .system import (ClrSet, FaultKind, FaultScenario, LineParams, MmcParams, SystemParams,
                     Topology)
from .traces import Trace
from .transient import SimSettings, build_network, relay_tap, simulate

__version__ = "0.1.0"

__all__ = [
    "BuildError", "ClrSet", "EXPECTED_SIGNATURES", "FaultKind", "FaultScenario",
    "InvalidParameterError", "LineParams", "MmcParams", "ModeQuantities",
    "NumericalInstabilityError", "PolaritySignature", "PoleQuantities", "RelayDecision",
    "RelaySettings", "Scenario", "ScenarioParseError", "SimSettings", "SolverError",
    "StreamingRelay", "SweepReport", "SweepSpec", "SystemParams", "Topology", "Trace",
    "Verdict", "build_network", "classify", "compare_oracle", "condition",
    "default_scenario", "dump_scenario", "invert_laplace", "load_scenario",
    "modal_to_phase", "mode_voltage_transfer", "mode_waveforms", "phase_to_modal",
    "predict_signature", "relay_tap", "run_scenario", "simulate", "sweep", "write_run",
]
