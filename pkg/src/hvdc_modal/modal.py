"""Pole-to-mode transformation for a symmetric two-pole DC line.

Orthonormal convention, applied identically to voltages and currents::

    x_l = (x_p - x_n) / sqrt(2)      line mode
    x_0 = (x_p + x_n) / sqrt(2)      zero mode

The matrix is orthogonal: its inverse is its transpose and it preserves
``x_p**2 + x_n**2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .system import FaultKind

SQRT2 = np.sqrt(2.0)

# rows: (line, zero); columns: (p, n)
MODAL_MATRIX = np.array([[1.0, -1.0], [1.0, 1.0]]) / SQRT2


@dataclass(frozen=True)
class PoleQuantities:
    x_p: object
    x_n: object


@dataclass(frozen=True)
class ModeQuantities:
    x_l: object
    x_0: object


def phase_to_modal(q: PoleQuantities) -> ModeQuantities:
    """Works on scalars and on equal-shape arrays (sample-wise)."""
    x_p = np.asarray(q.x_p, dtype=float)
    x_n = np.asarray(q.x_n, dtype=float)
    if not (np.all(np.isfinite(x_p)) and np.all(np.isfinite(x_n))):
        raise InvalidParameterError("pole quantities must be finite")
    x_l = (x_p - x_n) / SQRT2
    x_0 = (x_p + x_n) / SQRT2
    if x_l.ndim == 0:
        return ModeQuantities(float(x_l), float(x_0))
    return ModeQuantities(x_l, x_0)


def modal_to_phase(m: ModeQuantities) -> PoleQuantities:
    x_l = np.asarray(m.x_l, dtype=float)
    x_0 = np.asarray(m.x_0, dtype=float)
    x_p = (x_0 + x_l) / SQRT2
    x_n = (x_0 - x_l) / SQRT2
    if x_p.ndim == 0:
        return PoleQuantities(float(x_p), float(x_n))
    return PoleQuantities(x_p, x_n)


def modal_line_inductances(L_mn, M_mn):
    """Line-mode and zero-mode inductance of a coupled pole pair."""
    if M_mn < 0 or L_mn <= M_mn:
        raise InvalidParameterError(
            f"need L > M >= 0 for a physical line mode (L={L_mn}, M={M_mn})"
        )
    return L_mn - M_mn, L_mn + M_mn


@dataclass(frozen=True)
class ModeBoundaryCondition:
    """How the line-mode and zero-mode networks meet at the fault.

    ``connection`` is ``"series"`` for ground faults: both mode networks in
    series through ``shunt_resistance`` (= 2 R_f), with ``zero_mode_sign``
    giving the relative polarity of the zero-mode excitation.  For
    pole-to-pole faults it is ``"line_only"``: the line-mode network is
    terminated by ``shunt_resistance`` and the zero mode stays unexcited.
    """

    kind: FaultKind
    connection: str
    shunt_resistance: float
    zero_mode_sign: int
    zero_mode_current_free: bool

    def residual(self, v_l, v_0, i_l, i_0):
        """Violation of the modal constraints for a candidate solution."""
        if self.connection == "series":
            return (
                v_l + self.zero_mode_sign * v_0 - self.shunt_resistance * i_l,
                i_l - self.zero_mode_sign * i_0,
            )
        return v_l - self.shunt_resistance * i_l, i_0


def fault_boundary_modal(kind, r_f, alpha=0.5) -> ModeBoundaryCondition:
    """Modal boundary condition at the fault point.

    ``alpha`` scales R_f for pole-to-pole faults: 0.5 is the value implied by
    the orthonormal transform, 1.0 takes the pole-to-pole resistance
    unscaled.
    """
    kind = FaultKind(kind)
    if kind is FaultKind.NONE:
        raise InvalidParameterError("no boundary condition without a fault")
    if r_f < 0:
        raise InvalidParameterError("r_f must be >= 0")
    if kind.is_ptp:
        return ModeBoundaryCondition(kind, "line_only", alpha * r_f, 0, True)
    sign = -1 if kind.faulted_pole == "n" else 1
    return ModeBoundaryCondition(kind, "series", 2.0 * r_f, sign, False)
