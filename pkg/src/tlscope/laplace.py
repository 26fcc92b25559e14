"""2D finite-difference electrostatics of a junction cross-section.

Solves div(eps * grad(phi)) = 0 with Dirichlet conductors by red-black
successive over-relaxation (the sweep itself is a compiled kernel with a
numpy fallback). Two standard configurations are provided: the DC gate
problem (gate electrode above a grounded junction) and the AC problem
(junction electrodes driven differentially), which together quantify how
the open junction edge is screened from applied DC fields while the qubit
field stays confined to the tunnel barrier.

Convergence is declared on the diagonally scaled residual: the largest
Gauss-Seidel update step, relative to the largest boundary potential.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels

V_PER_NM_TO_V_PER_M = 1e9


class ConvergenceError(RuntimeError):
    """Raised when SOR does not reach the requested residual."""

    def __init__(self, residual, tol, iterations):
        self.residual = residual
        self.tol = tol
        self.iterations = iterations
        super().__init__(
            f"no convergence after {iterations} iterations: "
            f"relative residual {residual:.3e} > tolerance {tol:.3e}"
        )


@dataclass(frozen=True)
class Conductor:
    """Axis-aligned conductor held at a fixed potential; rect in nm."""

    rect: tuple[float, float, float, float]  # x0, x1, y0, y1
    potential: float


@dataclass(frozen=True)
class Dielectric:
    rect: tuple[float, float, float, float]
    eps: float


@dataclass(frozen=True)
class CrossSectionModel:
    """Continuous cross-section geometry plus target grid spacing.

    Side and bottom boundaries are natural (zero normal derivative); every
    conductor is a Dirichlet region. ``probe_y_nm`` and ``edge_x_nm`` mark
    the barrier mid-plane and the open-edge position used for field
    profiles.
    """

    spacing_nm: float
    width_nm: float
    height_nm: float
    conductors: tuple[Conductor, ...]
    dielectrics: tuple[Dielectric, ...] = ()
    edge_x_nm: float | None = None
    probe_y_nm: float | None = None
    barrier_thickness_nm: float | None = None

    def __post_init__(self):
        if not self.conductors:
            raise ValueError("at least one Dirichlet conductor is required")
        if self.barrier_thickness_nm is not None and self.spacing_nm > self.barrier_thickness_nm / 4:
            raise ValueError("grid spacing must resolve the barrier (spacing <= d/4)")

    # -- standard configurations ------------------------------------------

    @classmethod
    def junction(
        cls,
        mode: str,
        spacing_nm: float = 0.5,
        barrier_voltage: float = 1.0,
        gate_voltage: float = 1.0,
        width_nm: float = 160.0,
        height_nm: float = 130.0,
        substrate_nm: float = 30.0,
        bottom_nm: float = 30.0,
        barrier_nm: float = 2.0,
        top_nm: float = 60.0,
        edge_x_nm: float = 60.0,
        eps_substrate: float = 10.0,
        eps_barrier: float = 9.0,
    ) -> "CrossSectionModel":
        """Cross-section at the open junction edge.

        The bottom electrode spans the full width; barrier and top electrode
        stop at ``edge_x_nm``. mode "dc": both junction electrodes grounded,
        gate electrode along the top boundary. mode "ac": electrodes at
        +-barrier_voltage/2 and no gate.
        """
        y_bot = substrate_nm
        y_bar0 = y_bot + bottom_nm
        y_bar1 = y_bar0 + barrier_nm
        y_top = y_bar1 + top_nm
        if y_top >= height_nm:
            raise ValueError("domain height too small for the stack")
        if mode == "dc":
            v_bot = v_top = 0.0
        elif mode == "ac":
            v_bot, v_top = -barrier_voltage / 2.0, +barrier_voltage / 2.0
        else:
            raise ValueError(f"unknown mode {mode!r}")
        conductors = [
            Conductor((0.0, width_nm, y_bot, y_bar0), v_bot),
            Conductor((0.0, edge_x_nm, y_bar1, y_top), v_top),
        ]
        if mode == "dc":
            conductors.append(Conductor((0.0, width_nm, height_nm, height_nm), gate_voltage))
        dielectrics = (
            Dielectric((0.0, width_nm, 0.0, substrate_nm), eps_substrate),
            Dielectric((0.0, edge_x_nm, y_bar0, y_bar1), eps_barrier),
        )
        return cls(
            spacing_nm=spacing_nm,
            width_nm=width_nm,
            height_nm=height_nm,
            conductors=tuple(conductors),
            dielectrics=dielectrics,
            edge_x_nm=edge_x_nm,
            probe_y_nm=y_bar0 + barrier_nm / 2.0,
            barrier_thickness_nm=barrier_nm,
        )

    @classmethod
    def parallel_plate(cls, gap_nm: float = 8.0, voltage: float = 1.0, spacing_nm: float = 0.5,
                       width_nm: float = 40.0, plate_nm: float = 4.0) -> "CrossSectionModel":
        """Two full-width plates; analytic field voltage/gap between them."""
        height = 2 * plate_nm + gap_nm
        return cls(
            spacing_nm=spacing_nm,
            width_nm=width_nm,
            height_nm=height,
            conductors=(
                Conductor((0.0, width_nm, 0.0, plate_nm), 0.0),
                Conductor((0.0, width_nm, plate_nm + gap_nm, height), voltage),
            ),
            barrier_thickness_nm=gap_nm,
        )

    def with_spacing(self, spacing_nm: float) -> "CrossSectionModel":
        return replace(self, spacing_nm=spacing_nm)

    def scaled_potentials(self, factor: float) -> "CrossSectionModel":
        return replace(
            self,
            conductors=tuple(Conductor(c.rect, c.potential * factor) for c in self.conductors),
        )


@dataclass(frozen=True)
class FieldMap:
    """Discrete solution: potential (V) and field magnitude (V/m) per node."""

    model: CrossSectionModel
    x_nm: np.ndarray
    y_nm: np.ndarray
    potential: np.ndarray  # (ny, nx)
    e_mag: np.ndarray      # (ny, nx), V/m
    fixed: np.ndarray      # (ny, nx) bool
    iterations: int
    residual: float

    @property
    def spacing_nm(self) -> float:
        return self.model.spacing_nm


def _rasterize(model: CrossSectionModel):
    h = model.spacing_nm
    nx = int(round(model.width_nm / h)) + 1
    ny = int(round(model.height_nm / h)) + 1
    x = np.arange(nx) * h
    y = np.arange(ny) * h
    X, Y = np.meshgrid(x, y)
    tol = 1e-9
    eps = np.ones((ny, nx))
    for diel in model.dielectrics:
        x0, x1, y0, y1 = diel.rect
        eps[(X >= x0 - tol) & (X <= x1 + tol) & (Y >= y0 - tol) & (Y <= y1 + tol)] = diel.eps
    fixed = np.zeros((ny, nx), dtype=bool)
    phi = np.zeros((ny, nx))
    for cond in model.conductors:
        x0, x1, y0, y1 = cond.rect
        mask = (X >= x0 - tol) & (X <= x1 + tol) & (Y >= y0 - tol) & (Y <= y1 + tol)
        fixed |= mask
        phi[mask] = cond.potential
    return x, y, eps, fixed, phi


def _face_weights(eps, fixed):
    """Harmonic-mean face permittivities; faces touching a conductor adopt
    the free side's permittivity (the metal surface is an equipotential)."""
    ny, nx = eps.shape

    def harm(a, b):
        return 2.0 * a * b / (a + b)

    eps_x = harm(eps[:, :-1], eps[:, 1:])
    eps_x = np.where(fixed[:, 1:] & ~fixed[:, :-1], eps[:, :-1], eps_x)
    eps_x = np.where(fixed[:, :-1] & ~fixed[:, 1:], eps[:, 1:], eps_x)
    eps_y = harm(eps[:-1, :], eps[1:, :])
    eps_y = np.where(fixed[1:, :] & ~fixed[:-1, :], eps[:-1, :], eps_y)
    eps_y = np.where(fixed[:-1, :] & ~fixed[1:, :], eps[1:, :], eps_y)

    w_e = np.zeros((ny, nx)); w_w = np.zeros((ny, nx))
    w_n = np.zeros((ny, nx)); w_s = np.zeros((ny, nx))
    w_e[:, :-1] = eps_x; w_w[:, 1:] = eps_x
    w_n[:-1, :] = eps_y; w_s[1:, :] = eps_y
    return w_e, w_w, w_n, w_s


def _prolong(coarse: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear interpolation from a grid to its 2x refinement (nested nodes)."""
    out = np.zeros(shape)
    out[::2, ::2] = coarse
    out[1::2, ::2] = 0.5 * (coarse[:-1, :] + coarse[1:, :])
    out[::2, 1::2] = 0.5 * (coarse[:, :-1] + coarse[:, 1:])
    out[1::2, 1::2] = 0.25 * (
        coarse[:-1, :-1] + coarse[1:, :-1] + coarse[:-1, 1:] + coarse[1:, 1:]
    )
    return out


def _sor_solve(phi, fixed, weights, tol, max_iter):
    ny, nx = phi.shape
    w_e, w_w, w_n, w_s = (np.ascontiguousarray(w) for w in weights)
    denom = w_e + w_w + w_n + w_s
    free = (~fixed).astype(np.uint8)
    inv_diag = np.where((free == 1) & (denom > 0), 1.0 / np.where(denom > 0, denom, 1.0), 0.0)
    free[denom == 0] = 0  # isolated nodes (conductor-enclosed) stay untouched
    ii, jj = np.indices(phi.shape)
    parity = ((ii + jj) % 2).astype(np.uint8)
    omega = 2.0 / (1.0 + math.sin(math.pi / max(nx, ny)))
    v_scale = float(np.abs(phi[fixed]).max())
    if v_scale == 0.0:
        return phi, 0, 0.0
    phi = np.ascontiguousarray(phi)
    inv_diag = np.ascontiguousarray(inv_diag)
    step = math.inf
    for it in range(1, max_iter + 1):
        step = _kernels.sor_sweep(phi, w_e, w_w, w_n, w_s, inv_diag, free, parity, omega)
        if step < tol * v_scale:
            return phi, it, step / v_scale
    raise ConvergenceError(step / v_scale, tol, max_iter)


def solve_laplace(model: CrossSectionModel, tol: float = 1e-9,
                  max_iter: int | None = None, coarse_start: bool = True) -> FieldMap:
    """Solve the cross-section to the requested relative residual.

    With ``coarse_start`` the solution is first obtained on 2x/4x coarser
    grids and interpolated up, which cuts fine-grid iterations substantially.
    Raises ConvergenceError (with the achieved residual) at the iteration cap.
    """
    spacings = [model.spacing_nm]
    if coarse_start:
        while len(spacings) < 3:
            s = spacings[-1] * 2
            if model.width_nm / s < 40 or model.height_nm / s < 40:
                break
            spacings.append(s)
    warm = None
    result = None
    for s in reversed(spacings):
        level = model.with_spacing(s)
        x, y, eps, fixed, phi = _rasterize(level)
        if warm is not None:
            phi = np.where(fixed, phi, _prolong(warm, phi.shape))
        cap = max_iter if (max_iter is not None and s == model.spacing_nm) else None
        if cap is None:
            cap = max(20000, 12 * max(phi.shape))
        phi, iters, resid = _sor_solve(phi, fixed, _face_weights(eps, fixed), tol, cap)
        warm = phi
        result = (x, y, phi, fixed, iters, resid)
    x, y, phi, fixed, iters, resid = result
    gy, gx = np.gradient(phi, model.spacing_nm)
    e_mag = np.hypot(gx, gy) * V_PER_NM_TO_V_PER_M
    e_mag[fixed] = 0.0
    return FieldMap(
        model=model, x_nm=x, y_nm=y, potential=phi, e_mag=e_mag,
        fixed=fixed, iterations=iters, residual=resid,
    )


def edge_profile(fmap: FieldMap) -> tuple[np.ndarray, np.ndarray]:
    """Field magnitude along the outward normal from the open edge, at the
    barrier mid-plane height. Returns (distance_nm, e_mag_v_per_m)."""
    model = fmap.model
    if model.edge_x_nm is None or model.probe_y_nm is None:
        raise ValueError("model does not define an open edge")
    h = model.spacing_nm
    iy = int(round(model.probe_y_nm / h))
    ix = int(round(model.edge_x_nm / h))
    prof = fmap.e_mag[iy, ix:]
    s = np.arange(prof.shape[0]) * h
    return s, prof


@dataclass(frozen=True)
class DecayProfile:
    """AC fringe-field profile outside the open edge."""

    s_nm: np.ndarray
    e_v_per_m: np.ndarray
    e_barrier_v_per_m: float
    decay_length_nm: float
    fieldmap: FieldMap


def ac_decay_profile(model: CrossSectionModel, barrier_voltage: float = 1.0,
                     tol: float = 1e-9, fit_range_nm: tuple[float, float] = (0.5, 6.0)) -> DecayProfile:
    """Drive the junction electrodes at +-V/2 and profile the outside field.

    The barrier field is sampled well inside the junction (plate limit V/d);
    the 1/e decay length comes from a log-linear fit over ``fit_range_nm``.
    """
    if model.edge_x_nm is None:
        model = CrossSectionModel.junction("ac", spacing_nm=model.spacing_nm,
                                           barrier_voltage=barrier_voltage)
    fmap = solve_laplace(model.scaled_potentials(barrier_voltage /
                                                 _junction_drive(model)), tol=tol)
    s, prof = edge_profile(fmap)
    h = model.spacing_nm
    iy = int(round(model.probe_y_nm / h))
    ix_in = int(round((model.edge_x_nm - 10.0) / h))
    e_barrier = float(fmap.e_mag[iy, ix_in])
    lo, hi = fit_range_nm
    sel = (s >= lo) & (s <= hi) & (prof > 0)
    slope = np.polyfit(s[sel], np.log(prof[sel]), 1)[0]
    decay = -1.0 / slope if slope < 0 else math.inf
    return DecayProfile(s_nm=s, e_v_per_m=prof, e_barrier_v_per_m=e_barrier,
                        decay_length_nm=float(decay), fieldmap=fmap)


def _junction_drive(model: CrossSectionModel) -> float:
    """Potential difference across the junction conductors of an AC model."""
    pots = sorted({c.potential for c in model.conductors})
    return pots[-1] - pots[0] if len(pots) > 1 else 1.0


def dc_screening_report(fmap: FieldMap, interior_offset_nm: float = 30.0):
    """(field at barrier mid-plane, unscreened far-field on the profile line).

    The far-field reference is taken on the same profile line far from the
    edge, where the exposed electrode surface sees the full gate field.
    """
    model = fmap.model
    h = model.spacing_nm
    iy = int(round(model.probe_y_nm / h))
    ix_mid = int(round((model.edge_x_nm - interior_offset_nm) / h))
    e_mid = float(fmap.e_mag[iy, ix_mid])
    _, prof = edge_profile(fmap)
    e_far = float(np.median(prof[-10:]))
    return e_mid, e_far


def exclusion_zone_width(dc_map: FieldMap, ac_map: FieldMap,
                         dc_threshold: float, ac_threshold: float) -> tuple[float, float]:
    """Widths (nm) of the DC-screened and AC-coupled zones at the open edge.

    DC-screened width: distance from the edge to where the DC field first
    reaches dc_threshold times the unscreened far-field value. AC-coupled
    width: distance over which the AC field stays at or above ac_threshold
    times the barrier field. A threshold no part of the profile reaches is
    degenerate and yields width 0.
    """
    s_dc, prof_dc = edge_profile(dc_map)
    _, e_far = dc_screening_report(dc_map)
    dc_width = _first_crossing(s_dc, prof_dc, dc_threshold * e_far, rising=True)

    s_ac, prof_ac = edge_profile(ac_map)
    model = ac_map.model
    h = model.spacing_nm
    iy = int(round(model.probe_y_nm / h))
    ix_in = int(round((model.edge_x_nm - 10.0) / h))
    e_barrier = float(ac_map.e_mag[iy, ix_in])
    ac_width = _first_crossing(s_ac, prof_ac, ac_threshold * e_barrier, rising=False)
    return dc_width, ac_width


def _first_crossing(s, prof, level, rising):
    """Distance where the profile first crosses ``level``; 0 when degenerate."""
    above = prof >= level
    hit = above if rising else ~above
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        return 0.0 if rising else float(s[-1])
    i = int(idx[0])
    if i == 0:
        return 0.0
    # linear interpolation between the bracketing samples
    f0, f1 = prof[i - 1], prof[i]
    if f1 == f0:
        return float(s[i])
    frac = (level - f0) / (f1 - f0)
    frac = min(max(frac, 0.0), 1.0)
    return float(s[i - 1] + frac * (s[i] - s[i - 1]))


def max_principle_margin(fmap: FieldMap) -> float:
    """How far interior free-node potentials stay inside the Dirichlet range.

    Non-negative for any converged solution (discrete maximum principle).
    """
    fixed_vals = fmap.potential[fmap.fixed]
    lo, hi = float(fixed_vals.min()), float(fixed_vals.max())
    free_vals = fmap.potential[~fmap.fixed]
    if free_vals.size == 0:
        return 0.0
    return float(min(free_vals.min() - lo, hi - free_vals.max()))
