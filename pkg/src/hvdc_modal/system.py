"""Physical parameters and topology of the four-terminal test grid.

All quantities are SI base units.  The defaults reproduce the converter and
line data of the reference four-terminal +/-500 kV half-bridge MMC system.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

from .errors import InvalidParameterError

CLR_RANGE = (0.09, 0.17)
CLR_KEYS = ("12", "21", "14", "23")
DEFAULT_LINE_LENGTH = 200e3
DEFAULT_COUPLING_RATIO = 0.4


def _finite(name, value):
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class MmcParams:
    """Arm-level data of one half-bridge MMC.

    ``dc_voltage`` is the pole-to-pole DC-link voltage.
    """

    arm_resistance: float = 0.85
    arm_inductance: float = 0.1
    sm_capacitance: float = 1.5e-3
    sm_count: int = 200
    dc_voltage: float = 1.0e6

    def __post_init__(self):
        for name in ("arm_resistance", "arm_inductance", "sm_capacitance", "dc_voltage"):
            _finite(name, getattr(self, name))
        if self.arm_resistance < 0:
            raise InvalidParameterError("arm_resistance must be >= 0")
        if self.arm_inductance <= 0:
            raise InvalidParameterError("arm_inductance must be > 0")
        if self.sm_capacitance <= 0:
            raise InvalidParameterError("sm_capacitance must be > 0")
        if int(self.sm_count) != self.sm_count or self.sm_count < 1:
            raise InvalidParameterError("sm_count must be an integer >= 1")
        if self.dc_voltage <= 0:
            raise InvalidParameterError("dc_voltage must be > 0")


@dataclass(frozen=True)
class MmcEquivalent:
    r: float
    l: float
    c: float


def mmc_equivalent(p: MmcParams) -> MmcEquivalent:
    """Reduce arm data to the series R-L-C seen from the DC terminals."""
    if p.arm_inductance <= 0 or p.sm_capacitance <= 0 or p.sm_count < 1:
        raise InvalidParameterError("L, C and N must be positive")
    return MmcEquivalent(
        r=2.0 * p.arm_resistance / 3.0,
        l=2.0 * p.arm_inductance / 3.0,
        c=6.0 * p.sm_capacitance / p.sm_count,
    )


@dataclass(frozen=True)
class LineParams:
    """Per-metre data of a two-pole overhead line.

    ``m_per_m`` is the pole-to-pole mutual inductance; ``None`` selects
    ``DEFAULT_COUPLING_RATIO * l_per_m``.
    """

    length: float = DEFAULT_LINE_LENGTH
    r_per_m: float = 4.116e-5
    l_per_m: float = 1.256e-8
    m_per_m: float | None = None

    def __post_init__(self):
        if self.m_per_m is None:
            object.__setattr__(self, "m_per_m", DEFAULT_COUPLING_RATIO * self.l_per_m)
        for name in ("length", "r_per_m", "l_per_m", "m_per_m"):
            _finite(name, getattr(self, name))
        if self.length <= 0:
            raise InvalidParameterError("line length must be > 0")
        if self.r_per_m < 0 or self.l_per_m < 0 or self.m_per_m < 0:
            raise InvalidParameterError("per-metre line values must be >= 0")
        if self.l_per_m <= self.m_per_m:
            raise InvalidParameterError(
                "mutual inductance must be below self inductance "
                f"(l={self.l_per_m}, m={self.m_per_m})"
            )

    @property
    def R(self):
        return self.r_per_m * self.length

    @property
    def L(self):
        return self.l_per_m * self.length

    @property
    def M(self):
        return self.m_per_m * self.length


def line_totals(lp: LineParams):
    """Return ``(R_mn, L_mn, M_mn)`` for the whole line length."""
    if min(lp.r_per_m, lp.l_per_m, lp.m_per_m) < 0:
        raise InvalidParameterError("per-metre line values must be >= 0")
    return lp.R, lp.L, lp.M


@dataclass(frozen=True)
class ClrSet:
    """Current limiting reactor at each line end, keyed ``"12"``, ``"21"``...

    Key ``"mn"`` is the reactor at bus m on line mn.
    """

    values: tuple = tuple((k, 0.09) for k in CLR_KEYS)

    def __post_init__(self):
        vals = dict(self.values)
        missing = [k for k in CLR_KEYS if k not in vals]
        if missing:
            raise InvalidParameterError(f"missing CLR entries: {missing}")
        for key, val in vals.items():
            _finite(f"clr {key}", val)
            if val <= 0:
                raise InvalidParameterError(f"CLR {key} must be > 0")
            lo, hi = CLR_RANGE
            if not lo - 1e-12 <= val <= hi + 1e-12:
                warnings.warn(
                    f"CLR {key}={val} H outside the usual {lo}-{hi} H range",
                    stacklevel=3,
                )
        object.__setattr__(self, "values", tuple(sorted(vals.items())))

    @classmethod
    def uniform(cls, value):
        return cls(tuple((k, float(value)) for k in CLR_KEYS))

    @classmethod
    def from_mapping(cls, mapping):
        return cls(tuple((str(k), float(v)) for k, v in mapping.items()))

    def __getitem__(self, key):
        return dict(self.values)[key]

    def as_dict(self):
        return dict(self.values)


class FaultKind(str, enum.Enum):
    INTERNAL_PTP = "InternalPTP"
    INTERNAL_P_PTG = "InternalP_PTG"
    INTERNAL_N_PTG = "InternalN_PTG"
    EXTERNAL_FORWARD_PTG = "ExternalForwardPTG"
    EXTERNAL_BACKWARD_PTG = "ExternalBackwardPTG"
    EXTERNAL_FORWARD_PTP = "ExternalForwardPTP"
    EXTERNAL_BACKWARD_PTP = "ExternalBackwardPTP"
    NONE = "None"

    @property
    def is_internal(self):
        return self in (FaultKind.INTERNAL_PTP, FaultKind.INTERNAL_P_PTG, FaultKind.INTERNAL_N_PTG)

    @property
    def is_ptp(self):
        return self in (
            FaultKind.INTERNAL_PTP,
            FaultKind.EXTERNAL_FORWARD_PTP,
            FaultKind.EXTERNAL_BACKWARD_PTP,
        )

    @property
    def is_ptg(self):
        return self not in (FaultKind.NONE,) and not self.is_ptp

    @property
    def faulted_pole(self):
        """``"p"``, ``"n"``, ``"pn"`` for pole-to-pole, or ``None``."""
        if self is FaultKind.NONE:
            return None
        if self.is_ptp:
            return "pn"
        # external ground faults are taken on the positive pole
        return "n" if self is FaultKind.INTERNAL_N_PTG else "p"

    @property
    def direction(self):
        if self is FaultKind.NONE:
            return None
        if self.is_internal:
            return "internal"
        return "forward" if "Forward" in self.value else "backward"


@dataclass(frozen=True)
class FaultScenario:
    kind: FaultKind = FaultKind.NONE
    location_d: float | None = None
    r_f: float = 0.0
    t_fault: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "kind", FaultKind(self.kind))
        if self.kind.is_internal:
            if self.location_d is None:
                raise InvalidParameterError("internal faults need location_d")
            _finite("location_d", self.location_d)
            if not 0.0 <= self.location_d <= 1.0:
                raise InvalidParameterError(f"location_d={self.location_d} outside [0, 1]")
        elif self.location_d is not None:
            raise InvalidParameterError("location_d only applies to internal faults")
        _finite("r_f", self.r_f)
        _finite("t_fault", self.t_fault)
        if self.r_f < 0:
            raise InvalidParameterError("r_f must be >= 0")
        if self.t_fault < 0:
            raise InvalidParameterError("t_fault must be >= 0")


@dataclass(frozen=True)
class SystemParams:
    """Converter data for the two MMCs adjacent to the protected line."""

    mmc1: MmcParams = field(default_factory=MmcParams)
    mmc2: MmcParams = field(default_factory=MmcParams)

    def __post_init__(self):
        if not math.isclose(self.mmc1.dc_voltage, self.mmc2.dc_voltage, rel_tol=1e-12):
            raise InvalidParameterError("both converters must share one DC voltage")

    @property
    def dc_voltage(self):
        return self.mmc1.dc_voltage

    @property
    def eq1(self):
        return mmc_equivalent(self.mmc1)

    @property
    def eq2(self):
        return mmc_equivalent(self.mmc2)


@dataclass(frozen=True)
class Topology:
    """Reduced network around the protected line 12.

    Buses 3 and 4 are represented by the terminal capacitances ``c23`` and
    ``c14`` behind lines 23 and 14 (``None`` means: equal to the adjacent
    converter's equivalent capacitance).
    """

    buses: tuple = (1, 2, 3, 4)
    lines: tuple = (("12", LineParams()), ("14", LineParams()), ("23", LineParams()))
    clr: ClrSet = field(default_factory=ClrSet)
    c14: float | None = None
    c23: float | None = None
    relay: tuple = (1, "12")

    def __post_init__(self):
        names = [name for name, _ in self.lines]
        for required in ("12", "14", "23"):
            if required not in names:
                raise InvalidParameterError(f"topology needs line {required}")
        for cap in (self.c14, self.c23):
            if cap is not None and not cap > 0:
                raise InvalidParameterError("terminal capacitances must be > 0")
        if tuple(self.relay) != (1, "12"):
            raise InvalidParameterError("only the bus-1 end of line 12 is supported as relay point")

    def line(self, name) -> LineParams:
        return dict(self.lines)[name]

    def with_line(self, name, lp):
        lines = tuple((n, lp if n == name else p) for n, p in self.lines)
        return replace(self, lines=lines)

    def with_clr(self, value):
        return replace(self, clr=ClrSet.uniform(value))

    def terminal_capacitances(self, system: SystemParams):
        c14 = self.c14 if self.c14 is not None else system.eq1.c
        c23 = self.c23 if self.c23 is not None else system.eq2.c
        return c14, c23

    def inventory(self, fault_kind=FaultKind.NONE):
        """Element counts of the two-pole equivalent network."""
        kind = FaultKind(fault_kind)
        segments = len(self.lines) + (1 if kind.is_internal else 0)
        return {
            "converters": 2,
            "terminal_capacitances": 2,
            "clr": len(CLR_KEYS),
            "line_segments": segments,
            "poles": 2,
            "fault_branches": 0 if kind is FaultKind.NONE else 1,
        }
