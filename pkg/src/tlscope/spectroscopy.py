"""Synthetic swap-spectroscopy data: T1(bias, frequency) maps.

A run is a sequence of segments, each sweeping one control channel (gate or
piezo) while the other is held fixed. Defects imprint Lorentzian dips on the
qubit's relaxation time at their bias-dependent resonance frequencies; the
per-point T1 estimate carries multiplicative log-normal noise.

The defect's on-resonance rate contribution derives from its transverse
coupling g and linewidth w as gain * 4 * (2*pi*g)^2 * tau (tau the defect
coherence time, w = 1/(2*pi*tau)). The dimensionless gain folds in the
sensitivity of the swap protocol, which the source experiments do not
quantify; the default is calibrated so that the default dipole ensemble in
the stray-junction field produces clearly detectable dips.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import e as _E_CHARGE, h as _H_PLANCK

from . import _kernels
from .device import Ensemble, QubitParams
from .tls import BiasPoint

# dipole (e*nm) * field (V/m) -> MHz, mirroring tls.transverse_coupling
_ENM_FIELD_TO_MHZ = _E_CHARGE * 1e-9 / _H_PLANCK / 1e6

GATE = "gate"
PIEZO = "piezo"

# Lorentzian tails whose added rate stays below this (1/us) are dropped when
# assembling maps; keeps the kernel cost proportional to in-window defects.
_RATE_FLOOR_PER_US = 1e-7


@dataclass(frozen=True)
class Segment:
    """One bias sweep: ``channel`` is swept, the other channel held fixed."""

    channel: str
    start_v: float
    stop_v: float
    n_points: int
    fixed_v: float = 0.0
    repetitions: int = 500

    def __post_init__(self):
        if self.channel not in (GATE, PIEZO):
            raise ValueError(f"unknown channel {self.channel!r}")
        if self.n_points < 1:
            raise ValueError("segment needs at least one bias point")

    def bias_values(self) -> np.ndarray:
        if self.n_points == 1:
            return np.array([self.start_v])
        return np.linspace(self.start_v, self.stop_v, self.n_points)

    def bias_points(self) -> list[BiasPoint]:
        vals = self.bias_values()
        if self.channel == GATE:
            return [BiasPoint(v_gate=v, v_piezo=self.fixed_v) for v in vals]
        return [BiasPoint(v_gate=self.fixed_v, v_piezo=v) for v in vals]


@dataclass(frozen=True)
class SegmentPlan:
    """Ordered segments sharing one frequency window."""

    segments: tuple[Segment, ...]
    freq_min_ghz: float
    freq_max_ghz: float
    freq_step_ghz: float = 0.002

    def __post_init__(self):
        if not self.freq_max_ghz > self.freq_min_ghz:
            raise ValueError("empty frequency window")
        if not self.segments:
            raise ValueError("plan needs at least one segment")

    @property
    def freqs_ghz(self) -> np.ndarray:
        n = int(round((self.freq_max_ghz - self.freq_min_ghz) / self.freq_step_ghz)) + 1
        return self.freq_min_ghz + self.freq_step_ghz * np.arange(n)

    @property
    def window_ghz(self) -> tuple[float, float]:
        return (self.freq_min_ghz, self.freq_max_ghz)

    @property
    def window_width_ghz(self) -> float:
        return self.freq_max_ghz - self.freq_min_ghz

    def columns(self) -> list[tuple[int, int, BiasPoint]]:
        """Global execution order: (segment index, bias index, bias point)."""
        out = []
        for si, seg in enumerate(self.segments):
            for bi, bp in enumerate(seg.bias_points()):
                out.append((si, bi, bp))
        return out

    @property
    def n_columns(self) -> int:
        return sum(seg.n_points for seg in self.segments)

    def gate_span_v(self) -> float:
        """Full range of gate voltages appearing anywhere in the plan."""
        vals = []
        for seg in self.segments:
            if seg.channel == GATE:
                vals.extend([seg.start_v, seg.stop_v])
            else:
                vals.append(seg.fixed_v)
        return max(vals) - min(vals) if vals else 0.0

    def max_asymmetry_shift_ghz(self, kappa_gate_max: float, kappa_piezo_max: float) -> float:
        """Largest |asymmetry shift| from the reference bias over the plan."""
        vg = [0.0]
        vp = [0.0]
        for seg in self.segments:
            if seg.channel == GATE:
                vg.extend([seg.start_v, seg.stop_v])
                vp.append(seg.fixed_v)
            else:
                vp.extend([seg.start_v, seg.stop_v])
                vg.append(seg.fixed_v)
        span_g = max(abs(v) for v in vg)
        span_p = max(abs(v) for v in vp)
        return kappa_gate_max * span_g + kappa_piezo_max * span_p


def alternating_piezo_plan(
    n_segments: int = 7,
    segment_span_v: float = 10.0,
    points_per_segment: int = 10,
    piezo_start_v: float = 0.0,
    gate_values_v: tuple[float, float] = (0.0, 10.0),
    freq_min_ghz: float = 5.0,
    freq_max_ghz: float = 6.0,
    freq_step_ghz: float = 0.002,
) -> SegmentPlan:
    """Piezo ramps in consecutive segments while the gate toggles between two
    values; junction-defect traces appear continuous, surface traces dashed."""
    segs = []
    step = segment_span_v / points_per_segment
    for k in range(n_segments):
        start = piezo_start_v + k * segment_span_v
        segs.append(
            Segment(
                channel=PIEZO,
                start_v=start,
                stop_v=start + step * (points_per_segment - 1),
                n_points=points_per_segment,
                fixed_v=gate_values_v[k % len(gate_values_v)],
            )
        )
    return SegmentPlan(tuple(segs), freq_min_ghz, freq_max_ghz, freq_step_ghz)


@dataclass(frozen=True)
class SpectroscopyConfig:
    """Knobs of the simulated protocol and noise."""

    rate_gain: float = 2000.0
    coherence_ns_range: tuple[float, float] = (80.0, 160.0)
    noise_sigma: float = 0.10


@dataclass(frozen=True)
class T1Map:
    """Estimated T1 (us) on a (bias, frequency) grid for one segment."""

    segment_index: int
    channel: str
    v_gate: np.ndarray   # (nb,)
    v_piezo: np.ndarray  # (nb,)
    freqs_ghz: np.ndarray
    t1_us: np.ndarray    # (nb, nf)
    noise_sigma: float

    def __post_init__(self):
        if self.t1_us.shape != (self.v_gate.shape[0], self.freqs_ghz.shape[0]):
            raise ValueError("T1 matrix does not match the bias/frequency grids")
        if not (self.t1_us > 0).all():
            raise ValueError("T1 values must be positive")


@dataclass(frozen=True)
class TelegraphJump:
    defect_index: int
    new_eps0: float
    at_column: int


@dataclass(frozen=True)
class TelegraphEnsemble:
    """Ensemble whose defects may shift asymmetry mid-run (telegraph switch)."""

    base: Ensemble
    jumps: tuple[TelegraphJump, ...] = ()

    def __len__(self):
        return len(self.base)


def inject_telegraph_jump(ensemble, defect_index: int, new_eps0: float,
                          at_column: int) -> TelegraphEnsemble:
    """From global bias column ``at_column`` onward the defect uses new_eps0."""
    base = ensemble.base if isinstance(ensemble, TelegraphEnsemble) else ensemble
    jumps = ensemble.jumps if isinstance(ensemble, TelegraphEnsemble) else ()
    if not 0 <= defect_index < len(base):
        raise ValueError(f"no defect with index {defect_index}")
    return TelegraphEnsemble(base=base, jumps=jumps + (TelegraphJump(defect_index, new_eps0, at_column),))


def rate_contribution(g_mhz: float, width_ghz: float, gain: float) -> float:
    """On-resonance added relaxation rate (1/us) of one defect."""
    return gain * 8.0e-3 * math.pi * g_mhz * g_mhz / width_ghz


def _ensemble_arrays(ensemble: Ensemble):
    n = len(ensemble)
    arr = {
        "delta": np.empty(n), "eps0": np.empty(n), "dipole": np.empty(n),
        "orientation": np.empty(n), "kg": np.empty(n), "kp": np.empty(n),
        "field": np.empty(n),
    }
    for i, rec in enumerate(ensemble.records):
        arr["delta"][i] = rec.tls.delta
        arr["eps0"][i] = rec.tls.eps0
        arr["dipole"][i] = rec.tls.dipole
        arr["orientation"][i] = rec.tls.dipole_orientation
        arr["kg"][i] = rec.arms.kappa_gate
        arr["kp"][i] = rec.arms.kappa_piezo
        arr["field"][i] = rec.field_rms_v_per_m
    return arr


def draw_linewidths(n: int, seed: int, config: SpectroscopyConfig) -> np.ndarray:
    """Per-defect Lorentzian half-widths (GHz) from drawn coherence times."""
    rng = np.random.default_rng(seed)
    tau_ns = rng.uniform(*config.coherence_ns_range, size=n)
    return 1.0 / (2.0 * math.pi * tau_ns * 1e-9) / 1e9


def _segment_rates(seg_cols, arr, widths, qubit, config, freqs, window):
    """Noise-free rate map (nb, nf) for one segment's columns.

    seg_cols: (vg array, vp array, eps0 matrix (nb, nd) or None)
    """
    vg, vp, eps0 = seg_cols
    nb = vg.shape[0]
    nd = arr["delta"].shape[0]
    baseline = 1.0 / qubit.t1_baseline_us
    if nd == 0:
        return np.full((nb, freqs.shape[0]), baseline)
    if eps0 is None:
        eps0 = arr["eps0"][None, :]
    eps = eps0 + arr["kg"][None, :] * vg[:, None] + arr["kp"][None, :] * vp[:, None]
    centers = np.hypot(arr["delta"][None, :], eps)
    matrix_element = arr["delta"][None, :] / centers
    g_mhz = (arr["dipole"] * arr["orientation"] * arr["field"] * _ENM_FIELD_TO_MHZ)[None, :] * matrix_element
    gammas = config.rate_gain * 8.0e-3 * math.pi * g_mhz * g_mhz / widths[None, :]
    # drop far-detuned defects: peak contribution at the nearest window point
    lo, hi = window
    dist = np.maximum(np.maximum(lo - centers, centers - hi), 0.0)
    w2 = widths[None, :] ** 2
    reach = gammas * w2 / (dist * dist + w2)
    gammas = np.where(reach >= _RATE_FLOOR_PER_US, gammas, 0.0)
    return _kernels.lorentzian_rate_map(freqs, centers, gammas, widths, baseline)


def effective_relaxation(freq_ghz, ensemble, bias: BiasPoint, qubit: QubitParams,
                         config: SpectroscopyConfig | None = None,
                         widths_ghz: np.ndarray | None = None):
    """Total relaxation rate (1/us) at one bias; scalar or per-frequency array.

    Gamma(f) = 1/T1_baseline + sum_k Gamma_k * w_k^2 / ((f - f_k)^2 + w_k^2).
    ``widths_ghz`` overrides the per-defect linewidths (defaults to the
    config's central coherence time for reproducible scalar use).
    """
    config = config or SpectroscopyConfig()
    base = ensemble.base if isinstance(ensemble, TelegraphEnsemble) else ensemble
    arr = _ensemble_arrays(base)
    n = len(base)
    if widths_ghz is None:
        tau_ns = 0.5 * (config.coherence_ns_range[0] + config.coherence_ns_range[1])
        widths_ghz = np.full(n, 1.0 / (2.0 * math.pi * tau_ns * 1e-9) / 1e9)
    freqs = np.atleast_1d(np.asarray(freq_ghz, dtype=float))
    window = (float(freqs.min()), float(freqs.max()))
    rates = _segment_rates(
        (np.array([bias.v_gate]), np.array([bias.v_piezo]), None),
        arr, np.asarray(widths_ghz, dtype=float), qubit, config, freqs, window,
    )[0]
    return float(rates[0]) if np.isscalar(freq_ghz) else rates


def run_swap_spectroscopy(plan: SegmentPlan, ensemble, qubit: QubitParams,
                          noise_seed: int, config: SpectroscopyConfig | None = None) -> list[T1Map]:
    """Simulate every segment of the plan; deterministic in (ensemble, seed).

    Defect linewidths and the per-point noise both derive from ``noise_seed``;
    noise_sigma = 0 yields the exact noise-free maps.
    """
    config = config or SpectroscopyConfig()
    base = ensemble.base if isinstance(ensemble, TelegraphEnsemble) else ensemble
    jumps = ensemble.jumps if isinstance(ensemble, TelegraphEnsemble) else ()
    arr = _ensemble_arrays(base)
    nd = len(base)
    widths = draw_linewidths(nd, noise_seed, config)
    rng = np.random.default_rng((noise_seed, 1))
    freqs = plan.freqs_ghz
    window = plan.window_ghz
    maps = []
    col0 = 0
    for si, seg in enumerate(plan.segments):
        pts = seg.bias_points()
        vg = np.array([p.v_gate for p in pts])
        vp = np.array([p.v_piezo for p in pts])
        eps0 = None
        if jumps:
            eps0 = np.tile(arr["eps0"], (len(pts), 1))
            for jump in jumps:
                start = max(jump.at_column - col0, 0)
                if start < len(pts):
                    eps0[start:, jump.defect_index] = jump.new_eps0
        rates = _segment_rates((vg, vp, eps0), arr, widths, qubit, config, freqs, window)
        t1 = 1.0 / rates
        if config.noise_sigma > 0:
            t1 = t1 * np.exp(config.noise_sigma * rng.standard_normal(t1.shape))
        maps.append(T1Map(
            segment_index=si, channel=seg.channel, v_gate=vg, v_piezo=vp,
            freqs_ghz=freqs, t1_us=t1, noise_sigma=config.noise_sigma,
        ))
        col0 += len(pts)
    return maps
