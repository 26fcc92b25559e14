"""Standard tunneling model of a two-level defect.

A defect is described by its tunnel energy Delta and an asymmetry energy
eps that is shifted linearly by the applied gate and piezo voltages. All
energies are kept in GHz*h; SI constants enter only when converting a dipole
in an electric field to a coupling frequency.
"""

import math
from dataclasses import dataclass
from enum import Enum

from scipy.constants import e as _E_CHARGE, h as _H_PLANCK


class DefectLocation(Enum):
    BARRIER_INTERIOR = "barrier_interior"
    OPEN_EDGE = "open_edge"
    COVERED_EDGE = "covered_edge"
    ELECTRODE_SURFACE = "electrode_surface"


#: Locations inside a junction; these are screened from the DC gate field.
JUNCTION_LOCATIONS = frozenset(
    {
        DefectLocation.BARRIER_INTERIOR,
        DefectLocation.OPEN_EDGE,
        DefectLocation.COVERED_EDGE,
    }
)


@dataclass(frozen=True)
class TwoLevelSystem:
    """One tunneling defect.

    delta : tunnel energy (GHz*h), > 0
    eps0 : intrinsic asymmetry offset (GHz*h)
    dipole : electric dipole magnitude (e*nm), >= 0
    dipole_orientation : projection cosine onto the local field axis, in [-1, 1]
    deformation : deformation potential (GHz*h per unit strain)
    location : region class; determines which field map and lever-arm rule apply
    position : 2D coordinate within the region (nm)
    """

    delta: float
    eps0: float
    dipole: float
    dipole_orientation: float
    deformation: float
    location: DefectLocation
    position: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"tunnel energy must be positive, got {self.delta}")
        if self.dipole < 0:
            raise ValueError(f"dipole magnitude must be >= 0, got {self.dipole}")
        if not -1.0 <= self.dipole_orientation <= 1.0:
            raise ValueError("dipole orientation cosine must lie in [-1, 1]")


@dataclass(frozen=True)
class BiasPoint:
    """One point of the external controls; (0, 0) is the reference bias."""

    v_gate: float
    v_piezo: float

    def __post_init__(self):
        if not (math.isfinite(self.v_gate) and math.isfinite(self.v_piezo)):
            raise ValueError("bias voltages must be finite")


REFERENCE_BIAS = BiasPoint(0.0, 0.0)


@dataclass(frozen=True)
class LeverArms:
    """Linear response of the asymmetry energy to the two control voltages.

    kappa_gate is exactly zero for defects at junction locations: the tunnel
    barrier of a transmon-regime junction carries no DC field, so the gate
    channel is fully screened there. kappa_piezo is nonzero for every defect
    since all defects respond to strain.
    """

    kappa_gate: float
    kappa_piezo: float


def asymmetry(tls: TwoLevelSystem, arms: LeverArms, bias: BiasPoint) -> float:
    """Asymmetry energy (GHz*h) at the given bias: eps0 + kg*Vg + kp*Vp."""
    return tls.eps0 + arms.kappa_gate * bias.v_gate + arms.kappa_piezo * bias.v_piezo


def transition_energy(delta: float, eps: float) -> float:
    """Transition energy sqrt(delta^2 + eps^2) in GHz*h; requires delta > 0."""
    if not delta > 0:
        raise ValueError(f"tunnel energy must be positive, got {delta}")
    return math.hypot(delta, eps)


def transition_frequency(tls: TwoLevelSystem, arms: LeverArms, bias: BiasPoint) -> float:
    """Resonance frequency (GHz) of the defect at the given bias."""
    return transition_energy(tls.delta, asymmetry(tls, arms, bias))


# dipole (e*nm) times field (V/m) to linear frequency: p*F/h, expressed in MHz
_ENM_FIELD_TO_MHZ = _E_CHARGE * 1e-9 / _H_PLANCK / 1e6


def transverse_coupling(tls: TwoLevelSystem, field_rms: float, eps: float | None = None) -> float:
    """Transverse qubit-defect coupling g in MHz.

    g = (p * cos(theta) * F / h) * (delta / E), where the delta/E factor is the
    transverse matrix element of the defect at asymmetry ``eps``. ``eps``
    defaults to the intrinsic offset; the simulator passes the bias-dependent
    value so dips weaken away from a defect's symmetry point.
    """
    if field_rms < 0:
        raise ValueError("field amplitude must be >= 0")
    if eps is None:
        eps = tls.eps0
    energy = transition_energy(tls.delta, eps)
    return tls.dipole * tls.dipole_orientation * field_rms * _ENM_FIELD_TO_MHZ * tls.delta / energy
