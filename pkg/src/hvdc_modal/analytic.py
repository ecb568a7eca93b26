"""Closed-form Laplace-domain mode voltages across the relay-side CLR.

Impedances Z1..Z10 are built exactly as the loop (pole-to-pole) impedances
of the reduced network; the converters and the terminal capacitances are
treated as stiff sources, so no capacitance appears.  The mode networks are
then assembled in the orthonormal modal frame of :mod:`hvdc_modal.modal`,
where every loop impedance counts half and the pre-fault line-mode voltage
is ``V_dc / sqrt(2)``, applied as a step at the fault instant.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidParameterError
from .laplace import Inversion, invert_laplace
from .modal import SQRT2, fault_boundary_modal, modal_line_inductances
from .system import FaultKind, SystemParams, Topology

LOOP_TO_MODE = 0.5


# -- s-domain impedance expressions ---------------------------------------

class SImpedance:
    """Expression tree evaluating to a complex impedance at s."""

    def __call__(self, s):
        raise NotImplementedError

    def __add__(self, other):
        return Series((self, other))

    def __or__(self, other):
        return Parallel(self, other)


@dataclass(frozen=True)
class Resistor(SImpedance):
    R: float

    def __call__(self, s):
        return self.R * np.ones_like(np.asarray(s, dtype=complex))


@dataclass(frozen=True)
class Inductor(SImpedance):
    L: float

    def __call__(self, s):
        return self.L * np.asarray(s, dtype=complex)


@dataclass(frozen=True)
class Series(SImpedance):
    terms: tuple

    def __call__(self, s):
        out = 0.0
        for term in self.terms:
            out = out + term(s)
        return out

    def __add__(self, other):
        return Series(self.terms + (other,))


@dataclass(frozen=True)
class Parallel(SImpedance):
    a: SImpedance
    b: SImpedance

    def __call__(self, s):
        return par(self.a(s), self.b(s))


def par(a, b):
    return a * b / (a + b)


def _bus(clr_side, eq):
    # converter branch in parallel with both poles of the outgoing CLR pair
    return Inductor(2.0 * clr_side) | (Inductor(eq.l) + Resistor(eq.r))


def _line12(system: SystemParams, topology: Topology):
    lp = topology.line("12")
    L_l, L_0 = modal_line_inductances(lp.L, lp.M)
    return lp.R, L_l, L_0


def z_internal(d, system: SystemParams, topology: Topology):
    """Z1..Z4 for a fault at fraction ``d`` of line 12."""
    if not 0.0 <= d <= 1.0:
        raise InvalidParameterError(f"d={d} outside [0, 1]")
    clr = topology.clr
    R12, L_l, L_0 = _line12(system, topology)
    bus1 = _bus(clr["14"], system.eq1)
    bus2 = _bus(clr["23"], system.eq2)
    z1 = bus1 + Inductor(2.0 * (clr["12"] + d * L_l)) + Resistor(2.0 * d * R12)
    z2 = bus2 + Inductor(2.0 * (clr["21"] + (1.0 - d) * L_l)) + Resistor(2.0 * (1.0 - d) * R12)
    z3 = bus1 + Inductor(2.0 * (clr["12"] + d * L_0)) + Resistor(2.0 * d * R12)
    z4 = bus2 + Inductor(2.0 * (clr["21"] + (1.0 - d) * L_0)) + Resistor(2.0 * (1.0 - d) * R12)
    return z1, z2, z3, z4


def _through_line(bus_far, clr, L_mode, R12):
    return bus_far + Inductor(2.0 * (clr["12"] + clr["21"] + L_mode)) + Resistor(2.0 * R12)


def z_backward(system: SystemParams, topology: Topology):
    """Z5..Z7 for a fault at the bus-1 node, behind the relay."""
    clr = topology.clr
    R12, L_l, L_0 = _line12(system, topology)
    bus2 = _bus(clr["23"], system.eq2)
    z5 = _through_line(bus2, clr, L_l, R12)
    z6 = _bus(clr["14"], system.eq1)
    z7 = _through_line(bus2, clr, L_0, R12)
    return z5, z6, z7


def z_forward(system: SystemParams, topology: Topology):
    """Z8..Z10 for a fault at the bus-2 node, beyond the remote CLR."""
    clr = topology.clr
    R12, L_l, L_0 = _line12(system, topology)
    bus1 = _bus(clr["14"], system.eq1)
    z8 = _through_line(bus1, clr, L_l, R12)
    z9 = _bus(clr["23"], system.eq2)
    z10 = _through_line(bus1, clr, L_0, R12)
    return z8, z9, z10


# -- mode voltage transfer functions ---------------------------------------

@dataclass(frozen=True)
class ModeTransfer:
    """Laplace images (V*s) of the zero-mode and line-mode CLR voltages."""

    kind: FaultKind
    v_l0: Callable
    v_l1: Callable


def _two_source(za, zb, zf):
    """Current into the fault from the ``za`` side, per unit source.

    Superposes the two equal sources behind ``za`` and ``zb`` feeding the
    shunt ``zf`` at the fault node.
    """
    return 1.0 / (za + par(zb, zf)) - 1.0 / (zb + par(za, zf)) * par(za, zf) / za


def _fault_node_voltage(za, zb, zf):
    return 1.0 / (za + par(zb, zf)) * par(zb, zf) + 1.0 / (zb + par(za, zf)) * par(za, zf)


def mode_voltage_transfer(kind, d, r_f, system: SystemParams, topology: Topology,
                          alpha=0.5, zero_mode="printed") -> ModeTransfer:
    """Build V_L120(s) and V_L121(s) for one contingency.

    ``zero_mode="printed"`` divides the fault-node line-mode voltage by the
    relay-side zero-mode impedance, as the closed-form expressions do;
    ``"network"`` instead splits the fault current through the zero-mode
    network.  The two coincide for bolted faults.
    """
    kind = FaultKind(kind)
    if kind is FaultKind.NONE:
        raise InvalidParameterError("no transfer function without a fault")
    if zero_mode not in ("printed", "network"):
        raise ValueError(f"unknown zero_mode {zero_mode!r}")
    if kind.is_internal and d is None:
        raise InvalidParameterError("internal faults need d")
    bc = fault_boundary_modal(kind, r_f, alpha)
    L = topology.clr["12"]
    gain = L * system.dc_voltage / SQRT2   # s * L * (V_line_mode / s)
    k = LOOP_TO_MODE

    if kind.is_internal:
        z1, z2, z3, z4 = z_internal(d, system, topology)
        relay, remote, relay0, remote0 = z1, z2, z3, z4
        sign1 = 1.0
    elif kind.direction == "backward":
        z5, z6, z7 = z_backward(system, topology)
        relay, remote, relay0, remote0 = z5, z6, z7, z6
        sign1 = -1.0
    else:
        z8, z9, z10 = z_forward(system, topology)
        relay, remote, relay0, remote0 = z8, z9, z10, z9
        sign1 = 1.0

    if kind.is_ptp:
        def shunt(s):
            return bc.shunt_resistance + 0.0 * s

        def v_l0(s):
            return np.zeros_like(np.asarray(s, dtype=complex))
    else:
        def shunt(s):
            return par(k * relay0(s), k * remote0(s)) + bc.shunt_resistance

        sign0 = sign1 * bc.zero_mode_sign

        def v_l0(s):
            za, zb, zf = k * relay(s), k * remote(s), shunt(s)
            if zero_mode == "printed":
                return sign0 * gain * _fault_node_voltage(za, zb, zf) / (k * relay0(s))
            z0a, z0b = k * relay0(s), k * remote0(s)
            return sign0 * gain * z0b / ((z0a + z0b) * (zf + par(za, zb)))

    def v_l1(s):
        za, zb, zf = k * relay(s), k * remote(s), shunt(s)
        return sign1 * gain * _two_source(za, zb, zf)

    return ModeTransfer(kind, v_l0, v_l1)


def initial_value(F, s_large=1e12):
    """lim_{s->inf} s F(s), evaluated at a large real s."""
    return float(np.real(s_large * F(np.array([s_large + 0j]))[0]))


@dataclass(frozen=True)
class PolaritySignature:
    sign_v_l0: int
    sign_v_l1: int
    dominant_v_l0: float
    dominant_v_l1: float

    @property
    def pair(self):
        return self.sign_v_l0, self.sign_v_l1


def dominant(values):
    """Signed sample of largest magnitude."""
    values = np.asarray(values)
    if values.size == 0:
        return 0.0
    return float(values[int(np.argmax(np.abs(values)))])


def sign_of(x, zero_band=0.0):
    if abs(x) < zero_band or x == 0.0:
        return 0
    return 1 if x > 0 else -1


def mode_waveforms(kind, d, r_f, system, topology, t_grid, alpha=0.5,
                   zero_mode="printed", tol=None):
    """Inverted (V_L120, V_L121) on ``t_grid`` (seconds after inception)."""
    tf = mode_voltage_transfer(kind, d, r_f, system, topology, alpha, zero_mode)
    kw = {} if tol is None else {"tol": tol}
    inv0: Inversion = invert_laplace(tf.v_l0, t_grid, **kw)
    inv1: Inversion = invert_laplace(tf.v_l1, t_grid, **kw)
    return inv0, inv1


def polarity_grid(window=2e-3, step=10e-6):
    n = int(round(window / step))
    return step * np.arange(1, n + 1)


def predict_signature(kind, d, r_f, system, topology, e_set=10e3, window=2e-3,
                      alpha=0.5, zero_mode="printed") -> PolaritySignature:
    inv0, inv1 = mode_waveforms(kind, d, r_f, system, topology,
                                polarity_grid(window), alpha, zero_mode)
    dom0, dom1 = dominant(inv0.values), dominant(inv1.values)
    return PolaritySignature(sign_of(dom0, e_set), sign_of(dom1), dom0, dom1)


# Tables of expected polarity (zero mode, line mode) per contingency.
EXPECTED_SIGNATURES = {
    FaultKind.INTERNAL_P_PTG: (1, 1),
    FaultKind.INTERNAL_N_PTG: (-1, 1),
    FaultKind.EXTERNAL_BACKWARD_PTG: (-1, -1),
    FaultKind.EXTERNAL_FORWARD_PTG: (1, 1),
    FaultKind.INTERNAL_PTP: (0, 1),
    FaultKind.EXTERNAL_BACKWARD_PTP: (0, -1),
    FaultKind.EXTERNAL_FORWARD_PTP: (0, 1),
}
