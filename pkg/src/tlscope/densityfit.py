"""Spectral defect densities and the linear area/edge density models.

Per segment, the density of a trace class is the average over that
segment's bias columns of the number of traces present in the frequency
window, divided by the window width. Presence is read off each trace's
fitted model between its first and last detection, so single missed dips do
not deflate the counts.

The junction-density model is a zero-intercept least-squares fit
rho = rho_A * A + rho_o * l_op * d + rho_c * l_cov * d (d in um), with
coefficient standard errors from the residual covariance. The surface model
rho_surf = rho_op * l_op + rho_cov * l_cov + const is fitted per chip in
two passes: the first determines the offset (with three points and three
parameters it interpolates), the offset is subtracted, and slopes are
refitted without an intercept so their uncertainties are defined.
"""

from dataclasses import dataclass

import numpy as np

from .device import JunctionGeometry
from .spectroscopy import GATE, SegmentPlan
from .traces import DefectTrace, TraceClass, trace_coverage


class DegenerateGeometryError(ValueError):
    """Design matrix is rank deficient: geometries do not span the model."""


@dataclass(frozen=True)
class SegmentDensityEstimate:
    """Per-segment spectral densities (1/GHz) by trace class."""

    segment_index: int
    channel: str
    rho_jj: float
    rho_surf: float
    rho_nc: float
    window_ghz: float

    def __post_init__(self):
        for v in (self.rho_jj, self.rho_surf, self.rho_nc):
            if v < 0:
                raise ValueError("densities must be >= 0")
        if self.channel == GATE and self.rho_nc != 0:
            raise ValueError("unclassified density must vanish in gate-swept segments")


@dataclass(frozen=True)
class RunDensities:
    """Run-level densities: means of the per-segment estimates."""

    segments: tuple[SegmentDensityEstimate, ...]
    rho_jj: float
    rho_surf: float
    rho_nc: float


def estimate_segment_densities(traces: list[DefectTrace], plan: SegmentPlan) -> RunDensities:
    """Count class coverage per bias column, normalized to the window width."""
    width = plan.window_width_ghz
    if width <= 0:
        raise ValueError("zero-width frequency window")
    n_cols = plan.n_columns
    counts = {cls: np.zeros(n_cols) for cls in TraceClass}
    for trace in traces:
        counts[trace.classification] += trace_coverage(trace, plan)

    estimates = []
    start = 0
    for si, seg in enumerate(plan.segments):
        sl = slice(start, start + seg.n_points)
        start += seg.n_points
        rho = {cls: float(counts[cls][sl].mean()) / width for cls in TraceClass}
        nc = rho[TraceClass.UNCLASSIFIED]
        if seg.channel == GATE:
            nc = 0.0  # gate-swept segments carry the gate information by construction
        estimates.append(SegmentDensityEstimate(
            segment_index=si,
            channel=seg.channel,
            rho_jj=rho[TraceClass.JUNCTION],
            rho_surf=rho[TraceClass.SURFACE],
            rho_nc=nc,
            window_ghz=width,
        ))
    return RunDensities(
        segments=tuple(estimates),
        rho_jj=float(np.mean([e.rho_jj for e in estimates])),
        rho_surf=float(np.mean([e.rho_surf for e in estimates])),
        rho_nc=float(np.mean([e.rho_nc for e in estimates])),
    )


def stray_junction_density(rho_s_qubit: float, rho_s_reference: float) -> float:
    """Junction density attributable to the stray junction alone.

    The reference qubit on the same chip measures the small-junction
    contribution, which is subtracted; the result is floored at zero.
    """
    return max(rho_s_qubit - rho_s_reference, 0.0)


@dataclass(frozen=True)
class AreaEdgeFit:
    rho_area: float
    rho_area_sigma: float
    rho_open: float
    rho_open_sigma: float
    rho_covered: float
    rho_covered_sigma: float
    residuals: np.ndarray

    def __post_init__(self):
        for s in (self.rho_area_sigma, self.rho_open_sigma, self.rho_covered_sigma):
            if s < 0:
                raise ValueError("uncertainties must be >= 0")


@dataclass(frozen=True)
class TotalEdgeFit:
    rho_area: float
    rho_area_sigma: float
    rho_total_edge: float
    rho_total_edge_sigma: float
    residuals: np.ndarray


@dataclass(frozen=True)
class SurfaceFit:
    rho_open: float
    rho_open_sigma: float
    rho_covered: float
    rho_covered_sigma: float
    offset: float
    residuals: np.ndarray


def _ols(design: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None):
    """OLS/WLS with coefficient standard errors from the residual covariance."""
    X = design
    if weights is not None:
        sw = np.sqrt(weights)
        Xw, yw = X * sw[:, None], y * sw
    else:
        Xw, yw = X, y
    n, p = X.shape
    if np.linalg.matrix_rank(Xw) < p:
        raise DegenerateGeometryError(
            "rank-deficient design matrix: vary the junction geometries")
    beta, _res, _rank, _sv = np.linalg.lstsq(Xw, yw, rcond=None)
    resid = y - X @ beta
    dof = n - p
    if dof > 0:
        wr = resid if weights is None else resid * np.sqrt(weights)
        sigma2 = float(wr @ wr) / dof
        cov = sigma2 * np.linalg.inv(Xw.T @ Xw)
        se = np.sqrt(np.diag(cov))
    else:
        se = np.zeros(p)
    return beta, se, resid


def fit_area_edge(points: list[tuple[JunctionGeometry, float]], d_nm: float = 2.0,
                  weights: np.ndarray | None = None) -> AreaEdgeFit:
    """Three-coefficient zero-intercept fit of stray-junction densities.

    points: (geometry, rho_sjj) per qubit, rho_sjj already reference
    subtracted. Needs at least 3 points and full column rank.
    """
    if len(points) < 3:
        raise ValueError("need at least 3 qubits to fit 3 coefficients")
    d_um = d_nm * 1e-3
    X = np.array([[g.area_um2, g.l_open_um * d_um, g.l_covered_um * d_um]
                  for g, _ in points])
    y = np.array([rho for _, rho in points])
    beta, se, resid = _ols(X, y, weights)
    return AreaEdgeFit(beta[0], se[0], beta[1], se[1], beta[2], se[2], resid)


def fit_area_total_edge(points: list[tuple[JunctionGeometry, float]],
                        d_nm: float = 2.0) -> TotalEdgeFit:
    """Two-coefficient variant: one density for the summed edge area."""
    if len(points) < 2:
        raise ValueError("need at least 2 qubits to fit 2 coefficients")
    d_um = d_nm * 1e-3
    X = np.array([[g.area_um2, (g.l_open_um + g.l_covered_um) * d_um]
                  for g, _ in points])
    y = np.array([rho for _, rho in points])
    beta, se, resid = _ols(X, y)
    return TotalEdgeFit(beta[0], se[0], beta[1], se[1], resid)


def fit_surface_two_pass(points: list[tuple[float, float, float]]) -> SurfaceFit:
    """Two-pass per-chip surface fit on (l_op, l_cov, rho_surf) triples.

    Pass 1 fits slopes and offset together (exact interpolation for three
    points); pass 2 refits the slopes on the offset-subtracted data with
    zero intercept, which leaves a degree of freedom for the uncertainties.
    """
    if len(points) < 3:
        raise ValueError("need at least 3 data points for the two-pass fit")
    lop = np.array([p[0] for p in points])
    lcov = np.array([p[1] for p in points])
    y = np.array([p[2] for p in points])
    X1 = np.column_stack([lop, lcov, np.ones_like(lop)])
    beta1, _se1, _resid1 = _ols(X1, y)
    offset = float(beta1[2])
    X2 = np.column_stack([lop, lcov])
    beta2, se2, resid2 = _ols(X2, y - offset)
    return SurfaceFit(float(beta2[0]), float(se2[0]), float(beta2[1]), float(se2[1]),
                      offset, resid2)


def volume_density(rho_sjj: float, area_um2: float, d_nm: float = 2.0) -> float:
    """Volume density per (GHz*um^3): spectral density over barrier volume."""
    if not area_um2 > 0:
        raise ValueError("area must be positive")
    if not d_nm > 0:
        raise ValueError("barrier thickness must be positive")
    return rho_sjj / (area_um2 * d_nm * 1e-3)


def junction_density_errorbar(rho_nc: float, rho_sjj: float, rho_surf: float) -> float:
    """Unclassified-defect density attributed to the junction share.

    rho_nc * rho_sjj / (rho_sjj + rho_surf); the denominator must be
    positive unless rho_nc is zero.
    """
    if rho_nc == 0.0:
        return 0.0
    denom = rho_sjj + rho_surf
    if denom <= 0:
        raise ZeroDivisionError("rho_sjj + rho_surf must be positive")
    return rho_nc * rho_sjj / denom
