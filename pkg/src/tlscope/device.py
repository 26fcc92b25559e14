"""Junction and qubit geometry, and seeded defect-ensemble sampling.

The stray junction is modelled as a strip whose long sides are the open and
covered edges. Defect counts per region follow a Poisson law with mean
density * region measure * frequency-window width; positions are uniform
within their region. Edge strips are one barrier thickness wide, and
barrier-interior defects are kept at least one strip width away from both
edges.
"""

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .tls import (
    JUNCTION_LOCATIONS,
    DefectLocation,
    LeverArms,
    TwoLevelSystem,
)


@dataclass(frozen=True)
class JunctionGeometry:
    """Stray-junction dimensions; reference qubits carry no stray junction.

    area_um2, l_open_um, l_covered_um are None for reference geometries.
    barrier_thickness_nm is the AlOx thickness d, which also sets the
    effective edge-strip width.
    """

    area_um2: float | None
    l_open_um: float | None
    l_covered_um: float | None
    barrier_thickness_nm: float = 2.0
    small_junction_nm: tuple[float, float] = (260.0, 280.0)

    def __post_init__(self):
        stray = (self.area_um2, self.l_open_um, self.l_covered_um)
        if any(v is not None for v in stray) and not all(v is not None for v in stray):
            raise ValueError("stray-junction dimensions must be all present or all absent")
        for v in stray:
            if v is not None and not v > 0:
                raise ValueError("stray-junction dimensions must be positive")
        if not self.barrier_thickness_nm > 0:
            raise ValueError("barrier thickness must be positive")

    @property
    def has_stray_junction(self) -> bool:
        return self.area_um2 is not None


@dataclass(frozen=True)
class QubitParams:
    """Per-qubit circuit parameters and AC field strengths."""

    qubit_id: str
    f01_max_ghz: float
    e_charge_ghz: float
    e_josephson_ghz: float
    t1_baseline_us: float
    field_small_junction_v_per_m: float = 2300.0
    field_stray_junction_v_per_m: float = 25.0
    gate_lever_scale: float = 1.0

    def __post_init__(self):
        if not self.f01_max_ghz > 0:
            raise ValueError("f01_max must be positive")
        if not self.t1_baseline_us > 0:
            raise ValueError("baseline T1 must be positive")
        if not self.field_small_junction_v_per_m > self.field_stray_junction_v_per_m:
            raise ValueError("small-junction field must exceed the stray-junction field")


@dataclass(frozen=True)
class PlantedDensities:
    """Ground-truth defect densities used by the sampler.

    rho_area : barrier-interior defects per (GHz * um^2 of junction area)
    rho_open_edge / rho_covered_edge : per (GHz * um^2) over the edge strip
        of area l_edge * d
    rho_surface_open / rho_surface_covered : per (GHz * um) along the film edge
    rho_surface_background : per GHz, electrode contribution independent of
        the stray junction
    rho_small_junction : per GHz, defects inside the small qubit junctions
    """

    rho_area: float = 0.0
    rho_open_edge: float = 0.0
    rho_covered_edge: float = 0.0
    rho_surface_open: float = 0.0
    rho_surface_covered: float = 0.0
    rho_surface_background: float = 0.0
    rho_small_junction: float = 0.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class EnsembleConfig:
    """Distributions for defect parameters the experiment does not pin down.

    Tunnel energies follow the standard-tunneling-model 1/Delta law,
    conditioned so transition frequencies cover the sampling window evenly.
    Dipoles are uniform in [0.1, 1.0] e*nm; orientation cosines are uniform
    in sign and magnitude over orientation_abs_range. Lever-arm magnitudes
    are uniform over their ranges with random sign; surface-defect gate
    response additionally scales with the qubit's gate_lever_scale.
    """

    delta_min_ghz: float = 0.1
    delta_max_ghz: float = 20.0
    dipole_range_enm: tuple[float, float] = (0.1, 1.0)
    orientation_abs_range: tuple[float, float] = (0.0, 1.0)
    kappa_gate_range_ghz_per_v: tuple[float, float] = (0.004, 0.04)
    kappa_piezo_range_ghz_per_v: tuple[float, float] = (0.005, 0.05)
    field_surface_v_per_m: float = 30.0


class DefectRecord(NamedTuple):
    """A sampled defect with its lever arms and the AC field it couples to."""

    tls: TwoLevelSystem
    arms: LeverArms
    field_rms_v_per_m: float


@dataclass(frozen=True)
class Ensemble:
    """Immutable sampled defect ensemble for one qubit."""

    records: tuple[DefectRecord, ...]
    window_ghz: tuple[float, float]
    seed: int

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def count_by_location(self) -> dict[DefectLocation, int]:
        counts = {loc: 0 for loc in DefectLocation}
        for rec in self.records:
            counts[rec.tls.location] += 1
        return counts

    def with_record(self, index: int, record: DefectRecord) -> "Ensemble":
        records = list(self.records)
        records[index] = record
        return replace(self, records=tuple(records))


class ExpectedDensity(NamedTuple):
    per_ghz: float
    has_stray_junction: bool


def expected_junction_density(geom: JunctionGeometry, densities: PlantedDensities) -> ExpectedDensity:
    """Spectral junction-defect density rho_A*A + rho_o*l_op*d + rho_c*l_cov*d.

    The barrier thickness enters in um so the edge densities are per
    (GHz*um^2). Reference geometries have no stray junction and contribute
    zero, flagged accordingly.
    """
    if not geom.has_stray_junction:
        return ExpectedDensity(0.0, False)
    d_um = geom.barrier_thickness_nm * 1e-3
    value = (
        densities.rho_area * geom.area_um2
        + densities.rho_open_edge * geom.l_open_um * d_um
        + densities.rho_covered_edge * geom.l_covered_um * d_um
    )
    return ExpectedDensity(value, True)


def region_bounds(geom: JunctionGeometry, location: DefectLocation) -> tuple[float, float, float, float]:
    """(x_min, x_max, y_min, y_max) in nm of the sampling region for a location.

    The stray junction is laid out as a strip of length (l_op + l_cov)/2 and
    width area / length, with the open edge at y=0 and the covered edge at
    y=width. Surface defects live in a thin band just outside the film edges
    (negative y); small-junction defects use the small-junction rectangle.
    """
    d = geom.barrier_thickness_nm
    if location is DefectLocation.ELECTRODE_SURFACE:
        l_op = geom.l_open_um or 0.0
        l_cov = geom.l_covered_um or 0.0
        length_nm = max((l_op + l_cov) * 1e3, 1e3)
        return (0.0, length_nm, -3.0, 0.0)
    if not geom.has_stray_junction:
        if location is DefectLocation.BARRIER_INTERIOR:
            return (0.0, geom.small_junction_nm[0], 0.0, geom.small_junction_nm[1])
        raise ValueError(f"no stray junction: cannot place {location}")
    length_nm = 0.5 * (geom.l_open_um + geom.l_covered_um) * 1e3
    width_nm = geom.area_um2 * 1e6 / length_nm
    if location is DefectLocation.OPEN_EDGE:
        return (0.0, geom.l_open_um * 1e3, 0.0, d)
    if location is DefectLocation.COVERED_EDGE:
        return (0.0, geom.l_covered_um * 1e3, width_nm - d, width_nm)
    if location is DefectLocation.BARRIER_INTERIOR:
        return (0.0, length_nm, d, width_nm - d)
    raise ValueError(f"unknown location {location}")


def _sample_tunneling_split(rng, f0, delta_min, delta_max):
    """Split a transition frequency into (delta, eps) per the 1/Delta law.

    Conditioned on E = f0, the tunnel-energy density is proportional to
    1/(Delta * sqrt(E^2 - Delta^2)). With Delta = E*cos(phi) this becomes
    sec(phi) d(phi), sampled in closed form through u = arctanh(sin(phi)).
    """
    hi = min(delta_max, f0)
    if hi <= delta_min:
        # window below the smallest allowed tunnel energy: pin delta to f0
        delta = f0 * (1.0 - 1e-12)
    else:
        s_lo = 0.0  # phi = 0 at delta = hi
        s_hi = math.sqrt(max(0.0, 1.0 - (delta_min / f0) ** 2))
        u = rng.uniform(math.atanh(s_lo), math.atanh(min(s_hi, 1.0 - 1e-15)))
        sin_phi = math.tanh(u)
        delta = f0 * math.sqrt(max(1e-24, 1.0 - sin_phi * sin_phi))
        delta = min(max(delta, delta_min * 1e-3), f0)
    eps_mag = math.sqrt(max(0.0, f0 * f0 - delta * delta))
    eps = eps_mag if rng.random() < 0.5 else -eps_mag
    return delta, eps


def _poisson_means(geom: JunctionGeometry, densities: PlantedDensities, width_ghz: float):
    means = {}
    if geom.has_stray_junction:
        d_um = geom.barrier_thickness_nm * 1e-3
        means[DefectLocation.BARRIER_INTERIOR] = densities.rho_area * geom.area_um2 * width_ghz
        means[DefectLocation.OPEN_EDGE] = densities.rho_open_edge * geom.l_open_um * d_um * width_ghz
        means[DefectLocation.COVERED_EDGE] = densities.rho_covered_edge * geom.l_covered_um * d_um * width_ghz
        surface_linear = (
            densities.rho_surface_open * geom.l_open_um
            + densities.rho_surface_covered * geom.l_covered_um
        )
    else:
        means[DefectLocation.BARRIER_INTERIOR] = 0.0
        means[DefectLocation.OPEN_EDGE] = 0.0
        means[DefectLocation.COVERED_EDGE] = 0.0
        surface_linear = 0.0
    means[DefectLocation.ELECTRODE_SURFACE] = (
        surface_linear + densities.rho_surface_background
    ) * width_ghz
    means["small_junction"] = densities.rho_small_junction * width_ghz
    return means


def sample_ensemble(
    geom: JunctionGeometry,
    densities: PlantedDensities,
    freq_window: tuple[float, float],
    seed: int,
    qubit: QubitParams | None = None,
    config: EnsembleConfig | None = None,
) -> Ensemble:
    """Draw a defect ensemble with Poisson counts over freq_window.

    Identical seeds give identical ensembles. Junction-region defects carry
    kappa_gate = 0 exactly (gate screening); surface defects get a gate lever
    arm scaled by the qubit's gate_lever_scale.
    """
    lo, hi = freq_window
    if not hi > lo:
        raise ValueError(f"empty frequency window {freq_window}")
    config = config or EnsembleConfig()
    gate_scale = qubit.gate_lever_scale if qubit is not None else 1.0
    field_stray = qubit.field_stray_junction_v_per_m if qubit is not None else 25.0
    field_small = qubit.field_small_junction_v_per_m if qubit is not None else 2300.0

    rng = np.random.default_rng(seed)
    width = hi - lo
    means = _poisson_means(geom, densities, width)

    records = []
    order = [
        DefectLocation.BARRIER_INTERIOR,
        DefectLocation.OPEN_EDGE,
        DefectLocation.COVERED_EDGE,
        DefectLocation.ELECTRODE_SURFACE,
        "small_junction",
    ]
    for key in order:
        n = rng.poisson(means[key])
        small = key == "small_junction"
        location = DefectLocation.BARRIER_INTERIOR if small else key
        for _ in range(n):
            f0 = rng.uniform(lo, hi)
            delta, eps0 = _sample_tunneling_split(rng, f0, config.delta_min_ghz, config.delta_max_ghz)
            dipole = rng.uniform(*config.dipole_range_enm)
            orientation = rng.uniform(*config.orientation_abs_range)
            if rng.random() < 0.5:
                orientation = -orientation
            kp = rng.uniform(*config.kappa_piezo_range_ghz_per_v)
            if rng.random() < 0.5:
                kp = -kp
            if location in JUNCTION_LOCATIONS or small:
                kg = 0.0
                field = field_small if small else field_stray
            else:
                kg = gate_scale * rng.uniform(*config.kappa_gate_range_ghz_per_v)
                if rng.random() < 0.5:
                    kg = -kg
                field = config.field_surface_v_per_m
            if small:
                x0, x1 = 0.0, geom.small_junction_nm[0]
                y0, y1 = 0.0, geom.small_junction_nm[1]
            else:
                x0, x1, y0, y1 = region_bounds(geom, location)
            pos = (rng.uniform(x0, x1), rng.uniform(y0, y1))
            tls = TwoLevelSystem(
                delta=delta,
                eps0=eps0,
                dipole=dipole,
                dipole_orientation=orientation,
                deformation=kp / 2.0,
                location=location,
                position=pos,
            )
            records.append(DefectRecord(tls, LeverArms(kg, kp), field))
    return Ensemble(records=tuple(records), window_ghz=(lo, hi), seed=seed)


# ---------------------------------------------------------------------------
# device config files


@dataclass(frozen=True)
class DeviceRecord:
    """One qubit row of a device config file."""

    qubit_id: str
    chip: int
    geometry: JunctionGeometry
    qubit: QubitParams


def load_chips(path: str | Path) -> list[DeviceRecord]:
    """Read a device config file (one section per qubit, units in key names)."""
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise FileNotFoundError(path)
    records = []
    for section in parser.sections():
        sec = parser[section]
        try:
            chip = sec.getint("chip")
            area = sec.getfloat("area_um2", fallback=None)
            l_op = sec.getfloat("l_open_um", fallback=None)
            l_cov = sec.getfloat("l_covered_um", fallback=None)
            geometry = JunctionGeometry(
                area_um2=area,
                l_open_um=l_op,
                l_covered_um=l_cov,
                barrier_thickness_nm=sec.getfloat("barrier_thickness_nm", fallback=2.0),
            )
            qubit = QubitParams(
                qubit_id=section,
                f01_max_ghz=sec.getfloat("f01_max_ghz"),
                e_charge_ghz=sec.getfloat("e_charge_ghz"),
                e_josephson_ghz=sec.getfloat("e_josephson_ghz"),
                t1_baseline_us=sec.getfloat("t1_us"),
                field_small_junction_v_per_m=sec.getfloat("field_small_junction_v_per_m", fallback=2300.0),
                field_stray_junction_v_per_m=sec.getfloat("field_stray_junction_v_per_m", fallback=25.0),
                gate_lever_scale=sec.getfloat("gate_lever_scale", fallback=1.0),
            )
        except (ValueError, TypeError, configparser.Error) as exc:
            raise ValueError(f"bad device config section [{section}]: {exc}") from exc
        records.append(DeviceRecord(qubit_id=section, chip=chip, geometry=geometry, qubit=qubit))
    return records


def default_chips_path() -> Path:
    return Path(__file__).parent / "data" / "chips.cfg"
