"""Built-in measured dataset: per-qubit geometry and defect densities.

Two chips of four qubits each; qubits *.1 are reference devices whose stray
junction is shorted, so their junction-defect density measures the small
qubit junctions alone. Spectral densities are in 1/GHz, lengths in um,
areas in um^2. ``refit_builtin_dataset`` reproduces the area/edge scaling
analysis of this dataset end to end.
"""

from dataclasses import dataclass

from .densityfit import (
    fit_area_edge,
    fit_area_total_edge,
    fit_surface_two_pass,
    junction_density_errorbar,
    stray_junction_density,
    volume_density,
)
from .device import JunctionGeometry

BARRIER_THICKNESS_NM = 2.0
E_CHARGE_GHZ = 0.2
E_JOSEPHSON_GHZ = {1: 24.0, 2: 21.0}
FIELD_SMALL_JUNCTION_V_PER_M = 2300.0
FIELD_STRAY_JUNCTION_V_PER_M = 25.0


@dataclass(frozen=True)
class MeasuredQubit:
    chip: int
    qubit_id: str
    area_um2: float | None
    l_open_um: float | None
    l_covered_um: float | None
    rho_s_per_ghz: float
    rho_surf_per_ghz: float
    rho_nc_per_ghz: float
    f01_ghz: float
    t1_us: float

    @property
    def is_reference(self) -> bool:
        return self.area_um2 is None

    @property
    def geometry(self) -> JunctionGeometry:
        return JunctionGeometry(
            area_um2=self.area_um2,
            l_open_um=self.l_open_um,
            l_covered_um=self.l_covered_um,
            barrier_thickness_nm=BARRIER_THICKNESS_NM,
        )


MEASURED_QUBITS: tuple[MeasuredQubit, ...] = (
    MeasuredQubit(1, "1.1", None, None, None, 0.8, 28.8, 7.7, 6.0, 10.0),
    MeasuredQubit(1, "1.2", 12.1, 7.1, 10.1, 19.6, 10.0, 3.5, 6.0, 10.0),
    MeasuredQubit(1, "1.3", 12.7, 7.1, 19.1, 19.6, 10.2, 3.0, 6.2, 6.0),
    MeasuredQubit(1, "1.4", 14.0, 15.7, 11.1, 22.5, 24.7, 9.7, 6.2, 8.0),
    MeasuredQubit(2, "2.1", None, None, None, 2.3, 67.7, 7.1, 5.9, 17.0),
    MeasuredQubit(2, "2.2", 13.1, 6.6, 10.8, 22.4, 22.4, 3.3, 5.8, 11.0),
    MeasuredQubit(2, "2.3", 13.6, 6.6, 18.4, 23.8, 23.8, 3.9, 5.7, 12.0),
    MeasuredQubit(2, "2.4", 14.3, 17.2, 11.7, 25.4, 64.9, 7.1, 5.9, 8.0),
)


def reference_density(chip: int) -> float:
    for q in MEASURED_QUBITS:
        if q.chip == chip and q.is_reference:
            return q.rho_s_per_ghz
    raise KeyError(f"no reference qubit for chip {chip}")


def stray_rows() -> list[MeasuredQubit]:
    return [q for q in MEASURED_QUBITS if not q.is_reference]


def chip_rows(chip: int) -> list[MeasuredQubit]:
    return [q for q in MEASURED_QUBITS if q.chip == chip and not q.is_reference]


def refit_builtin_dataset(d_nm: float = BARRIER_THICKNESS_NM) -> dict:
    """Full density analysis of the built-in dataset.

    Reference subtraction per chip, the three-coefficient area/edge fit on
    the merged chips, the total-edge variant, per-chip two-pass surface
    fits, per-qubit volume densities, and the junction-density error bars.
    """
    rows = stray_rows()
    points = []
    for q in rows:
        rho_sjj = stray_junction_density(q.rho_s_per_ghz, reference_density(q.chip))
        points.append((q, rho_sjj))

    area_edge = fit_area_edge([(q.geometry, rho) for q, rho in points], d_nm=d_nm)
    total_edge = fit_area_total_edge([(q.geometry, rho) for q, rho in points], d_nm=d_nm)

    surface = {}
    for chip in (1, 2):
        triples = [(q.l_open_um, q.l_covered_um, q.rho_surf_per_ghz) for q in chip_rows(chip)]
        surface[chip] = fit_surface_two_pass(triples)

    per_qubit = []
    for q, rho_sjj in points:
        per_qubit.append({
            "qubit": q.qubit_id,
            "chip": q.chip,
            "area_um2": q.area_um2,
            "l_open_um": q.l_open_um,
            "l_covered_um": q.l_covered_um,
            "rho_sjj_per_ghz": rho_sjj,
            "rho_sjj_predicted_per_ghz": (
                area_edge.rho_area * q.area_um2
                + area_edge.rho_open * q.l_open_um * d_nm * 1e-3
                + area_edge.rho_covered * q.l_covered_um * d_nm * 1e-3
            ),
            "volume_density_per_ghz_um3": volume_density(rho_sjj, q.area_um2, d_nm),
            "errorbar_per_ghz": junction_density_errorbar(
                q.rho_nc_per_ghz, rho_sjj, q.rho_surf_per_ghz),
        })

    return {
        "barrier_thickness_nm": d_nm,
        "area_edge_fit": {
            "rho_area": area_edge.rho_area, "rho_area_sigma": area_edge.rho_area_sigma,
            "rho_open": area_edge.rho_open, "rho_open_sigma": area_edge.rho_open_sigma,
            "rho_covered": area_edge.rho_covered, "rho_covered_sigma": area_edge.rho_covered_sigma,
        },
        "total_edge_fit": {
            "rho_area": total_edge.rho_area, "rho_area_sigma": total_edge.rho_area_sigma,
            "rho_total_edge": total_edge.rho_total_edge,
            "rho_total_edge_sigma": total_edge.rho_total_edge_sigma,
        },
        "surface_fit": {
            str(chip): {
                "rho_open": fit.rho_open, "rho_open_sigma": fit.rho_open_sigma,
                "rho_covered": fit.rho_covered, "rho_covered_sigma": fit.rho_covered_sigma,
                "offset": fit.offset,
            }
            for chip, fit in surface.items()
        },
        "per_qubit": per_qubit,
    }
